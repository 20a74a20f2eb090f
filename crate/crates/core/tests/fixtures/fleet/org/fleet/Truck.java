package org.fleet;

public class Truck {
    private String plate;
    private double capacity;
    private int axles;

    public Truck(String plate, double capacity, int axles) {
        this.plate = plate;
        this.capacity = capacity;
        this.axles = axles;
    }

    public String getPlate() {
        return plate;
    }

    public double getCapacity() {
        return capacity;
    }

    public int getAxles() {
        return axles;
    }

    public boolean canCarry(Cargo cargo) {
        double limit = getCapacity() * getAxles() / 2;
        return !getPlate().isEmpty() && cargo.getTons() <= limit;
    }

    public String logbookEntry(Driver driver) {
        String kind = getAxles() > 2 ? "heavy" : "light";
        return getPlate() + " " + kind + " " + getCapacity() + "t driven by " + driver.getBadge();
    }
}
