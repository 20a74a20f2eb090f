package com.geo;

import java.util.ArrayList;
import java.util.List;

public class Route {
    private final String name;
    private final List<Point> stops = new ArrayList<>();

    public Route(String name) {
        this.name = name;
    }

    public String getName() {
        return name;
    }

    public Point origin() {
        return stops.isEmpty() ? new Point(0, 0) : stops.get(0);
    }

    public String describe(Point p, int zoom) {
        return getName() + "@" + p.getX() + "," + p.getY() + "x" + zoom;
    }

    public int manhattan(Point a, Point b) {
        return Math.abs(a.getX() - b.getX()) + Math.abs(a.getY() - b.getY());
    }

    public String label() {
        return describe(origin(), 2) + " " + manhattan(origin(), new Point(1, 1));
    }
}
