package org.fleet;

public class Invoice {
    private String number;
    private double amount;
    private int terms;

    public Invoice(String number, double amount, int terms) {
        this.number = number;
        this.amount = amount;
        this.terms = terms;
    }

    public String getNumber() {
        return number;
    }

    public double getAmount() {
        return amount;
    }

    public int getTerms() {
        return terms;
    }

    public double fuelSurcharge(Route route) {
        double pct = getTerms() > 30 ? 0.05 : 0.03;
        return getAmount() * pct + getNumber().length() + route.getKilometers() * 0.01;
    }

    public String remittance(Depot depot) {
        String due = getTerms() + " days";
        return "Invoice " + getNumber() + " for " + getAmount() + ", due in " + due + " to " + depot.getStaff();
    }
}
