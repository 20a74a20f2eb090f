package org.clinic;

public class Patient {
    private String fullName;
    private int age;
    private double weight;

    public Patient(String fullName, int age, double weight) {
        this.fullName = fullName;
        this.age = age;
        this.weight = weight;
    }

    public String getFullName() {
        return fullName;
    }

    public int getAge() {
        return age;
    }

    public double getWeight() {
        return weight;
    }

    public double dosage(Drug drug) {
        double perKilo = getWeight() * 0.1;
        return getAge() < 12 ? perKilo / 2 : perKilo + drug.getStrength();
    }

    public String admissionNote(Ward ward) {
        String group = getAge() > 65 ? "senior" : "adult";
        return getFullName() + " (" + group + ", " + getWeight() + "kg) to " + ward.getCode();
    }
}
