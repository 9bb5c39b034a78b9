"""Double-entry accounting core.

All mutations funnel through a single commit path guarded by one reentrant
lock (single-writer, linearizable commits); each commit appends a durable
journal record and then applies it to in-memory state. Balances follow the
liability convention: a credit increases the account balance, and every
committed transaction's debits equal its credits exactly.
"""

from __future__ import annotations

import threading
import time
from bisect import bisect_right
from typing import Callable

from . import model, state as records
from .errors import (
    FrozenAccountError,
    IdempotentReplay,
    InsufficientFundsError,
    UnbalancedError,
    UnknownAccountError,
    UnknownCustomerError,
    ValidationError,
)
from .journal import JournalStore
from .model import Account, LedgerTransaction, Posting, StatementEntry
from .state import BankState, idempotency_map_key

PAGE_LIMIT_MAX = 100


def now_ms() -> int:
    return time.time_ns() // 1_000_000


class Ledger:
    def __init__(
        self,
        state: BankState,
        store: JournalStore,
        clock: Callable[[], int] = now_ms,
        snapshot_every: int = 1000,
    ):
        self.state = state
        self.store = store
        self.clock = clock
        self.snapshot_every = snapshot_every
        self.lock = threading.RLock()

    # ------------------------------------------------------------------
    # Commit plumbing (also used by the service layer for workflow records,
    # which keeps every mutation in one total order)

    def commit(self, kind: str, payload: dict, ts: int | None = None) -> int:
        """Durably append one record, then apply it to state."""
        with self.lock:
            seq = self.store.append(kind, payload, self.clock() if ts is None else ts)
            self.state.apply(kind, payload)
            if self.snapshot_every and seq % self.snapshot_every == 0:
                self.store.write_snapshot(self.state.serialize(), seq)
            return seq

    # ------------------------------------------------------------------
    # Operations

    def open_account(self, owner: str, kind: str, label: str | None = None) -> Account:
        if kind not in model.ACCOUNT_KINDS:
            raise ValidationError(f"invalid account kind {kind!r}")
        with self.lock:
            if owner != model.INTERNAL and owner not in self.state.customers:
                raise UnknownCustomerError(f"unknown customer {owner}")
            new_id = model.account_id(self.state.account_seq + 1)
            payload = {"account_id": new_id, "owner": owner, "kind": kind}
            if label is not None:
                payload["label"] = label
            self.commit(records.ACCOUNT_OPENED, payload)
            return self.state.accounts[new_id]

    def post_transaction(
        self,
        kind: str,
        postings: list[Posting],
        memo: str = "",
        idempotency_key: str | None = None,
        initiator: str = "",
    ) -> LedgerTransaction:
        """Atomically commit a balanced transaction (journal record included).

        Raises IdempotentReplay carrying the original transaction when the
        (initiator, idempotency_key) pair has already committed.
        """
        if kind not in model.TX_KINDS:
            raise ValidationError(f"invalid transaction kind {kind!r}")
        if len(postings) < 2:
            raise ValidationError("a transaction needs at least two postings")
        if len(memo) > model.MEMO_MAX_LEN:
            raise ValidationError(f"memo exceeds {model.MEMO_MAX_LEN} chars")
        if idempotency_key is not None:
            if not idempotency_key or len(idempotency_key) > model.IDEMPOTENCY_KEY_MAX_LEN:
                raise ValidationError("idempotency key must be 1..64 chars")
        seen_accounts = set()
        for posting in postings:
            if not isinstance(posting.amount_minor, int) or isinstance(posting.amount_minor, bool):
                raise ValidationError("posting amounts must be integers")
            if posting.amount_minor <= 0:
                raise ValidationError("posting amounts must be positive")
            if posting.direction not in (model.DEBIT, model.CREDIT):
                raise ValidationError(f"invalid posting direction {posting.direction!r}")
            if posting.account_id in seen_accounts:
                # One posting per account per transaction keeps statement
                # cursors (last tx id of the page) exact.
                raise ValidationError(f"duplicate account {posting.account_id} in postings")
            seen_accounts.add(posting.account_id)

        with self.lock:
            if idempotency_key is not None:
                existing = self.state.idempotency.get(idempotency_map_key(initiator, idempotency_key))
                if existing is not None:
                    raise IdempotentReplay(self.state.tx_by_id[existing])

            debits = sum(p.amount_minor for p in postings if p.direction == model.DEBIT)
            credits = sum(p.amount_minor for p in postings if p.direction == model.CREDIT)
            if debits != credits:
                raise UnbalancedError(f"debits {debits} != credits {credits}")

            customer_initiated = initiator != model.ADMIN_PRINCIPAL
            for posting in postings:
                account = self.state.accounts.get(posting.account_id)
                if account is None:
                    raise UnknownAccountError(f"unknown account {posting.account_id}")
                if customer_initiated and account.status != model.ACTIVE:
                    raise FrozenAccountError(f"account {posting.account_id} is {account.status}")
            for posting in postings:
                account = self.state.accounts[posting.account_id]
                if account.kind in model.CUSTOMER_KINDS:
                    if account.balance_minor + posting.signed_minor < 0:
                        raise InsufficientFundsError(
                            f"account {posting.account_id} balance would fall below zero"
                        )

            ts = self.clock()
            new_id = model.tx_id(self.state.tx_seq + 1)
            payload = {
                "tx_id": new_id,
                "ts": ts,
                "kind": kind,
                "postings": [p.to_payload() for p in postings],
                "memo": memo,
                "initiator": initiator,
            }
            if idempotency_key is not None:
                payload["idempotency_key"] = idempotency_key
            self.commit(records.TX_COMMITTED, payload, ts=ts)
            return self.state.tx_by_id[new_id]

    def balance(self, account_id: str) -> int:
        with self.lock:
            account = self.state.accounts.get(account_id)
            if account is None:
                raise UnknownAccountError(f"unknown account {account_id}")
            return account.balance_minor

    def get_account(self, account_id: str) -> Account:
        with self.lock:
            account = self.state.accounts.get(account_id)
            if account is None:
                raise UnknownAccountError(f"unknown account {account_id}")
            return account

    def list_postings(
        self,
        account_id: str,
        from_ts: int | None = None,
        to_ts: int | None = None,
        min_amount: int | None = None,
        max_amount: int | None = None,
        cursor: str | None = None,
        limit: int = 50,
    ) -> tuple[list[StatementEntry], str | None]:
        """Filtered page of an account's history, ordered by tx id ascending.

        The cursor is the last tx id of the page; a follow-up call resumes
        strictly after it. next_cursor is returned iff more matches exist.
        """
        if not isinstance(limit, int) or isinstance(limit, bool) or not 1 <= limit <= PAGE_LIMIT_MAX:
            raise ValidationError(f"limit must be between 1 and {PAGE_LIMIT_MAX}")
        if from_ts is not None and to_ts is not None and from_ts > to_ts:
            raise ValidationError("from_ts must not exceed to_ts")
        if min_amount is not None and max_amount is not None and min_amount > max_amount:
            raise ValidationError("min_amount must not exceed max_amount")
        with self.lock:
            if account_id not in self.state.accounts:
                raise UnknownAccountError(f"unknown account {account_id}")
            history = self.state.account_history.get(account_id, [])
            start = 0
            if cursor is not None:
                start = bisect_right(history, cursor, key=lambda entry: entry.tx_id)

            def matches(entry: StatementEntry) -> bool:
                if from_ts is not None and entry.timestamp < from_ts:
                    return False
                if to_ts is not None and entry.timestamp > to_ts:
                    return False
                if min_amount is not None and entry.amount_minor < min_amount:
                    return False
                if max_amount is not None and entry.amount_minor > max_amount:
                    return False
                return True

            page: list[StatementEntry] = []
            next_cursor = None
            for entry in history[start:]:
                if not matches(entry):
                    continue
                if len(page) < limit:
                    page.append(entry)
                else:
                    next_cursor = page[-1].tx_id
                    break
            return page, next_cursor

    def set_account_status(self, account_id: str, status: str) -> Account:
        if status not in model.ACCOUNT_STATUSES:
            raise ValidationError(f"invalid account status {status!r}")
        with self.lock:
            account = self.state.accounts.get(account_id)
            if account is None:
                raise UnknownAccountError(f"unknown account {account_id}")
            if status == model.CLOSED and account.balance_minor != 0:
                raise ValidationError("cannot close an account with a nonzero balance")
            self.commit(records.ACCOUNT_STATUS, {"account_id": account_id, "status": status})
            return account
