package org.clinic;

public class Visit {
    private String date;
    private int minutes;
    private String reason;

    public Visit(String date, int minutes, String reason) {
        this.date = date;
        this.minutes = minutes;
        this.reason = reason;
    }

    public String getDate() {
        return date;
    }

    public int getMinutes() {
        return minutes;
    }

    public String getReason() {
        return reason;
    }

    public String summary(Doctor doctor) {
        String length = getMinutes() > 30 ? "long" : "short";
        return getDate() + ": " + getReason() + " (" + length + ", " + getMinutes() + "m) with " + doctor.getLicense();
    }

    public double bill(Insurer insurer) {
        double raw = getMinutes() * 2.5;
        return getReason().equals("checkup") ? raw / 2 : raw - insurer.getTier();
    }
}
