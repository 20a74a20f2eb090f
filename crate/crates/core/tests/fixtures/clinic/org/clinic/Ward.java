package org.clinic;

public class Ward {
    private String code;
    private int beds;
    private int floor;

    public Ward(String code, int beds, int floor) {
        this.code = code;
        this.beds = beds;
        this.floor = floor;
    }

    public String getCode() {
        return code;
    }

    public int getBeds() {
        return beds;
    }

    public int getFloor() {
        return floor;
    }

    public boolean canAdmit(Patient patient) {
        int free = getBeds() - getFloor();
        return free > 0 && getCode().startsWith("W") && patient.getWeight() < 200;
    }

    public String rota(Doctor doctor) {
        String level = getFloor() > 2 ? "upper" : "lower";
        return getCode() + "@" + level + " beds=" + getBeds() + " lead " + doctor.getSurname();
    }
}
