package org.fleet;

public class Driver {
    private String callsign;
    private int badge;
    private int hours;

    public Driver(String callsign, int badge, int hours) {
        this.callsign = callsign;
        this.badge = badge;
        this.hours = hours;
    }

    public String getCallsign() {
        return callsign;
    }

    public int getBadge() {
        return badge;
    }

    public int getHours() {
        return hours;
    }

    public double payFor(Route route) {
        double rate = getHours() > 40 ? 1.5 : 1.0;
        return rate * getHours() + getBadge() % 10 + route.getKilometers() * 0.2;
    }

    public String rosterLine(Depot depot) {
        String shift = getHours() > 8 ? "double" : "single";
        return getCallsign() + " #" + getBadge() + " " + shift + " shift at " + depot.getTown();
    }
}
