package org.library;

public class Reader {
    private String nickname;
    private int cardNo;
    private int speed;

    public Reader(String nickname, int cardNo, int speed) {
        this.nickname = nickname;
        this.cardNo = cardNo;
        this.speed = speed;
    }

    public String getNickname() {
        return nickname;
    }

    public int getCardNo() {
        return cardNo;
    }

    public int getSpeed() {
        return speed;
    }

    public String loanSlip(Loan loan) {
        String card = String.format("%06d", getCardNo());
        return getNickname() + " #" + card + " reads " + getSpeed() + " wpm, due " + loan.getDue();
    }

    public boolean canBorrow(Book book) {
        boolean regular = getCardNo() > 1000;
        return regular && getSpeed() > 100 && !getNickname().isEmpty() && book.getPages() > 0;
    }
}
