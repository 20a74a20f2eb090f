package org.clinic;

public class Insurer {
    private String brand;
    private double discount;
    private int tier;

    public Insurer(String brand, double discount, int tier) {
        this.brand = brand;
        this.discount = discount;
        this.tier = tier;
    }

    public String getBrand() {
        return brand;
    }

    public double getDiscount() {
        return discount;
    }

    public int getTier() {
        return tier;
    }

    public double coverage(Patient patient) {
        double share = getTier() * 0.25 + getDiscount();
        return getBrand().isEmpty() ? 0 : share / Math.max(1, patient.getAge());
    }

    public String claimHeader(Ward ward) {
        String tierName = getTier() > 2 ? "gold" : "basic";
        return getBrand() + "/" + tierName + " discount " + getDiscount() + " ward " + ward.getFloor();
    }
}
