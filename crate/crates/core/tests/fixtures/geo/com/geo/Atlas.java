package com.geo;

public class Atlas {
    private final Route main = new Route("main");

    public String headline(Point center) {
        return main.describe(center, 5);
    }

    public int span(Point a, Point b) {
        return main.manhattan(a, b) * 2;
    }
}
