package org.library;

public class Author {
    private String forename;
    private String surname;
    private int born;

    public Author(String forename, String surname, int born) {
        this.forename = forename;
        this.surname = surname;
        this.born = born;
    }

    public String getForename() {
        return forename;
    }

    public String getSurname() {
        return surname;
    }

    public int getBorn() {
        return born;
    }

    public String byline(Publisher publisher) {
        String initials = getForename().charAt(0) + ". ";
        return initials + getSurname() + " (" + getBorn() + "), " + publisher.getImprint();
    }

    public boolean wroteFor(Library library) {
        int age = 2024 - getBorn();
        return age > 18 && getSurname().length() > 0 && library.getBranches() > 0;
    }
}
