package org.library;

public class Loan {
    private String due;
    private int days;
    private double fee;

    public Loan(String due, int days, double fee) {
        this.due = due;
        this.days = days;
        this.fee = fee;
    }

    public String getDue() {
        return due;
    }

    public int getDays() {
        return days;
    }

    public double getFee() {
        return fee;
    }

    public double lateCharge(Reader reader) {
        double base = getDays() * getFee();
        return getDue().isEmpty() ? 0 : base + reader.getCardNo() % 7;
    }

    public String reminder(Library library) {
        String overdue = getDays() > 14 ? "overdue" : "open";
        return overdue + " since " + getDue() + ", fee " + getFee() + " at " + library.getCity();
    }
}
