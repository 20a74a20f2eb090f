package org.clinic;

public class Doctor {
    private String surname;
    private String specialty;
    private int license;

    public Doctor(String surname, String specialty, int license) {
        this.surname = surname;
        this.specialty = specialty;
        this.license = license;
    }

    public String getSurname() {
        return surname;
    }

    public String getSpecialty() {
        return specialty;
    }

    public int getLicense() {
        return license;
    }

    public String signature(Patient patient) {
        String title = "Dr. " + getSurname();
        return title + ", " + getSpecialty() + " #" + getLicense() + " for " + patient.getFullName();
    }

    public boolean mayPrescribe(Drug drug) {
        boolean senior = getLicense() < 5000;
        return senior || getSpecialty().equals("pharmacology") && drug.getStrength() < 100;
    }
}
