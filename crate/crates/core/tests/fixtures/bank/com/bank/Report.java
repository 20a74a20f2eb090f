package com.bank;

public interface Report {
    String render(Account account);
}
