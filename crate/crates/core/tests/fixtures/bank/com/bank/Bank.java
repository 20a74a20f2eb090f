package com.bank;

import java.util.ArrayList;
import java.util.List;

public class Bank {
    private final List<Account> accounts = new ArrayList<>();
    private final FeePolicy feePolicy;

    public Bank(FeePolicy feePolicy) {
        this.feePolicy = feePolicy;
    }

    public void open(Account account) {
        accounts.add(account);
    }

    public double totalDeposits() {
        double total = 0;
        for (Account a : accounts) {
            total += a.getBalance();
        }
        return total;
    }

    public void chargeMonthlyFee(Account account) {
        double fee = feePolicy.monthlyFee(account.getBalance());
        account.setBalance(account.getBalance() - fee);
    }

    public void audit() {
        // auditing is delegated to the ledger service
    }
}
