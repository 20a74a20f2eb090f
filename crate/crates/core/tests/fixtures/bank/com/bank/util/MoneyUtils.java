package com.bank.util;

public final class MoneyUtils {
    private MoneyUtils() {
    }

    public static double round(double value) {
        return Math.round(value * 100.0) / 100.0;
    }

    public static String format(double value) {
        return String.format("%.2f", value);
    }
}
