package com.shop;

public class Order {
    public static final int SCALE = 100;
    private int qty;
    private int price;

    /** Converts a price in euros to cents. */
    static int cents(double euros) {
        return (int) Math.round(euros * SCALE);
    }

    public int total() {
        return cents(price) * qty;
    }
}
