"""Use-case orchestration: the five customer flows plus the admin surface.

This is the only layer that composes auth, the ledger, and journal-backed
workflow records. Every state-changing operation writes exactly one AUDIT
record naming principal, operation, and outcome; failed operations leave
the journal untouched, and idempotent replays return the original receipt
without writing anything.
"""

from __future__ import annotations

import re

from . import model, state as records
from .auth import ADMIN_USERNAME, AuthManager, verify_password
from .errors import (
    AlreadyDecidedError,
    BadCredentialsError,
    BillerRetiredError,
    DuplicateUsernameError,
    ForbiddenError,
    FrozenAccountError,
    IdempotentReplay,
    NotOwnerError,
    SelfTransferError,
    UnknownAccountError,
    UnknownBillerError,
    UnknownCustomerError,
    UnknownRequestError,
    ValidationError,
)
from .ledger import Ledger
from .model import (
    Account,
    Biller,
    ChequeBookRequest,
    CustomerProfile,
    LedgerTransaction,
    Posting,
    StopChequeOrder,
)

USERNAME_RE = re.compile(r"^[a-z0-9_]{3,32}$")
CHEQUE_NUMBER_RE = re.compile(r"^\d{6}$")
EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")

MIN_PASSWORD_LEN = 8


class BankService:
    def __init__(self, ledger: Ledger, auth: AuthManager):
        self.ledger = ledger
        self.auth = auth
        self.state = ledger.state

    # ------------------------------------------------------------------
    # Customer flows

    def pay_bill(
        self,
        token: str,
        from_account: str,
        biller_id: str,
        reference: str,
        amount_minor: int,
        idempotency_key: str,
    ) -> dict:
        principal, _role = self.auth.authenticate(token)
        _require_amount(amount_minor)
        if not isinstance(reference, str) or len(reference) > model.BILL_REFERENCE_MAX_LEN:
            raise ValidationError(f"reference must be a string of at most {model.BILL_REFERENCE_MAX_LEN} chars")
        with self.ledger.lock:
            self._owned_account(principal, from_account)
            biller = self.state.billers.get(biller_id)
            if biller is None:
                raise UnknownBillerError(f"unknown biller {biller_id}")
            if biller.status != model.ACTIVE:
                raise BillerRetiredError(f"biller {biller_id} is retired")
            postings = [
                Posting(from_account, model.DEBIT, amount_minor),
                Posting(biller.settlement_account_id, model.CREDIT, amount_minor),
            ]
            memo = f"Bill payment {biller_id} ref {reference}"
            try:
                tx = self.ledger.post_transaction(
                    model.BILL_PAYMENT,
                    postings,
                    memo=memo,
                    idempotency_key=idempotency_key,
                    initiator=principal,
                )
            except IdempotentReplay as replay:
                return self._receipt(replay.transaction)
            self._audit(principal, "pay_bill", tx_id=tx.tx_id, biller_id=biller_id)
            return self._receipt(tx)

    def transfer_funds(
        self,
        token: str,
        from_account: str,
        to_account: str,
        amount_minor: int,
        memo: str,
        idempotency_key: str,
    ) -> dict:
        principal, _role = self.auth.authenticate(token)
        _require_amount(amount_minor)
        if not isinstance(memo, str):
            raise ValidationError("memo must be a string")
        with self.ledger.lock:
            self._owned_account(principal, from_account)
            if to_account == from_account:
                raise SelfTransferError("cannot transfer an account to itself")
            destination = self.state.accounts.get(to_account)
            if destination is None or destination.kind not in model.CUSTOMER_KINDS:
                raise UnknownAccountError(f"unknown account {to_account}")
            postings = [
                Posting(from_account, model.DEBIT, amount_minor),
                Posting(to_account, model.CREDIT, amount_minor),
            ]
            try:
                tx = self.ledger.post_transaction(
                    model.TRANSFER,
                    postings,
                    memo=memo,
                    idempotency_key=idempotency_key,
                    initiator=principal,
                )
            except IdempotentReplay as replay:
                return self._receipt(replay.transaction)
            self._audit(principal, "transfer_funds", tx_id=tx.tx_id, to_account=to_account)
            return self._receipt(tx)

    def request_cheque_book(self, token: str, account_id: str, leaves: int) -> ChequeBookRequest:
        principal, _role = self.auth.authenticate(token)
        if leaves not in model.CHEQUE_LEAVES:
            raise ValidationError("leaves must be one of 25, 50, 100")
        with self.ledger.lock:
            account = self._owned_account(principal, account_id)
            if account.status != model.ACTIVE:
                raise FrozenAccountError(f"account {account_id} is {account.status}")
            request_id = model.cheque_request_id(self.state.cheque_seq + 1)
            payload = {
                "request_id": request_id,
                "account_id": account_id,
                "leaves": leaves,
                "status": model.PENDING,
                "requested_ts": self.ledger.clock(),
            }
            self.ledger.commit(records.CHEQUE_REQUEST, payload)
            self._audit(principal, "request_cheque_book", request_id=request_id)
            return self.state.cheque_requests[request_id]

    def stop_cheque(self, token: str, account_id: str, cheque_number: str, reason: str) -> StopChequeOrder:
        principal, _role = self.auth.authenticate(token)
        if not isinstance(cheque_number, str) or not CHEQUE_NUMBER_RE.match(cheque_number):
            raise ValidationError("cheque_number must be exactly 6 digits")
        if not isinstance(reason, str) or len(reason) > model.MEMO_MAX_LEN:
            raise ValidationError(f"reason must be a string of at most {model.MEMO_MAX_LEN} chars")
        with self.ledger.lock:
            self._owned_account(principal, account_id)
            existing = self.state.stop_index.get((account_id, cheque_number))
            if existing is not None:
                # Idempotent repeat: the first ACTIVE order stands unchanged.
                return self.state.stop_orders[existing]
            order_id = model.stop_order_id(self.state.stop_seq + 1)
            payload = {
                "order_id": order_id,
                "account_id": account_id,
                "cheque_number": cheque_number,
                "reason": reason,
                "status": model.ACTIVE,
            }
            self.ledger.commit(records.STOP_ORDER, payload)
            self._audit(principal, "stop_cheque", order_id=order_id)
            return self.state.stop_orders[order_id]

    def view_statement(
        self,
        token: str,
        account_id: str,
        from_ts: int | None = None,
        to_ts: int | None = None,
        min_amount: int | None = None,
        max_amount: int | None = None,
        cursor: str | None = None,
        limit: int = 50,
    ) -> tuple[list[dict], str | None]:
        principal, role = self.auth.authenticate(token)
        with self.ledger.lock:
            self._readable_account(principal, role, account_id)
            entries, next_cursor = self.ledger.list_postings(
                account_id,
                from_ts=from_ts,
                to_ts=to_ts,
                min_amount=min_amount,
                max_amount=max_amount,
                cursor=cursor,
                limit=limit,
            )
            lines = [
                {
                    "tx_id": e.tx_id,
                    "timestamp": e.timestamp,
                    "kind": e.kind,
                    "amount_minor": e.signed_minor,
                    "running_balance_minor": e.running_balance_minor,
                    "memo": e.memo,
                }
                for e in entries
            ]
            return lines, next_cursor

    def change_password(self, token: str, old_password: str, new_password: str) -> None:
        principal, role = self.auth.authenticate(token)
        if role == model.ROLE_ADMIN:
            raise ValidationError("the administrator credential is environment-managed")
        with self.ledger.lock:
            credential = self.state.credentials[principal]
            if not old_password or not verify_password(credential, old_password):
                raise BadCredentialsError("old password does not match")
            if not isinstance(new_password, str) or len(new_password) < MIN_PASSWORD_LEN:
                raise ValidationError(f"new password must be at least {MIN_PASSWORD_LEN} chars")
            fresh = self.auth.new_credential(principal, new_password)
            self.ledger.commit(records.CREDENTIAL_SET, fresh.to_payload())
            self._audit(principal, "change_password")
        self.auth.invalidate_other_sessions(principal, token)

    def update_contact(
        self,
        token: str,
        email: str | None = None,
        phone: str | None = None,
        postal_address: str | None = None,
    ) -> CustomerProfile:
        principal, role = self.auth.authenticate(token)
        if role == model.ROLE_ADMIN:
            raise ValidationError("the administrator has no customer profile")
        if email is None and phone is None and postal_address is None:
            raise ValidationError("at least one contact field is required")
        if email is not None and not EMAIL_RE.match(email):
            raise ValidationError("email must look like name@host.tld")
        payload: dict = {"customer_id": principal}
        if email is not None:
            payload["email"] = email
        if phone is not None:
            payload["phone"] = phone
        if postal_address is not None:
            payload["postal_address"] = postal_address
        with self.ledger.lock:
            self.ledger.commit(records.PROFILE_UPDATED, payload)
            self._audit(principal, "update_contact")
            return self.state.customers[principal]

    # ------------------------------------------------------------------
    # Authenticated reads

    def list_accounts(self, token: str) -> list[Account]:
        principal, role = self.auth.authenticate(token)
        with self.ledger.lock:
            if role == model.ROLE_ADMIN:
                accounts = list(self.state.accounts.values())
            else:
                accounts = [a for a in self.state.accounts.values() if a.owner == principal]
            return sorted(accounts, key=lambda a: a.id)

    def get_balance(self, token: str, account_id: str) -> int:
        principal, role = self.auth.authenticate(token)
        with self.ledger.lock:
            self._readable_account(principal, role, account_id)
            return self.ledger.balance(account_id)

    def list_billers(self, token: str) -> list[Biller]:
        self.auth.authenticate(token)
        with self.ledger.lock:
            active = [b for b in self.state.billers.values() if b.status == model.ACTIVE]
            return sorted(active, key=lambda b: b.id)

    def get_profile(self, token: str) -> CustomerProfile:
        principal, role = self.auth.authenticate(token)
        if role == model.ROLE_ADMIN:
            raise ValidationError("the administrator has no customer profile")
        with self.ledger.lock:
            return self.state.customers[principal]

    # ------------------------------------------------------------------
    # Admin surface

    def admin_create_customer(
        self,
        token: str,
        username: str,
        full_name: str,
        email: str,
        phone: str,
        postal_address: str,
        initial_password: str,
    ) -> CustomerProfile:
        admin = self._require_admin(token)
        if not isinstance(username, str) or not USERNAME_RE.match(username):
            raise ValidationError("username must be 3-32 lowercase alphanumeric/underscore chars")
        if username == ADMIN_USERNAME:
            raise ValidationError("that username is reserved")
        if not isinstance(full_name, str) or not full_name:
            raise ValidationError("full_name is required")
        if not isinstance(email, str) or not EMAIL_RE.match(email):
            raise ValidationError("email must look like name@host.tld")
        if not isinstance(initial_password, str) or len(initial_password) < MIN_PASSWORD_LEN:
            raise ValidationError(f"initial password must be at least {MIN_PASSWORD_LEN} chars")
        with self.ledger.lock:
            if username in self.state.username_index:
                raise DuplicateUsernameError(f"username {username!r} is taken")
            new_id = model.customer_id(self.state.customer_seq + 1)
            profile_payload = {
                "customer_id": new_id,
                "username": username,
                "full_name": full_name,
                "email": email,
                "phone": phone or "",
                "postal_address": postal_address or "",
            }
            credential = self.auth.new_credential(new_id, initial_password)
            self.ledger.commit(records.CUSTOMER_CREATED, profile_payload)
            self.ledger.commit(records.CREDENTIAL_SET, credential.to_payload())
            self._audit(admin, "admin_create_customer", customer_id=new_id)
            return self.state.customers[new_id]

    def admin_open_funded_account(
        self, token: str, customer_id: str, kind: str, opening_deposit_minor: int
    ) -> Account:
        admin = self._require_admin(token)
        if kind not in model.CUSTOMER_KINDS:
            raise ValidationError("kind must be CUSTOMER_CHECKING or CUSTOMER_SAVINGS")
        if not isinstance(opening_deposit_minor, int) or isinstance(opening_deposit_minor, bool):
            raise ValidationError("opening deposit must be an integer amount")
        if opening_deposit_minor < 0:
            raise ValidationError("opening deposit must not be negative")
        with self.ledger.lock:
            if customer_id not in self.state.customers:
                raise UnknownCustomerError(f"unknown customer {customer_id}")
            account = self.ledger.open_account(customer_id, kind)
            if opening_deposit_minor > 0:
                vault = self._ensure_vault()
                self.ledger.post_transaction(
                    model.INITIAL_FUNDING,
                    [
                        Posting(vault, model.DEBIT, opening_deposit_minor),
                        Posting(account.id, model.CREDIT, opening_deposit_minor),
                    ],
                    memo=f"Initial funding {account.id}",
                    initiator=model.ADMIN_PRINCIPAL,
                )
            self._audit(admin, "admin_open_funded_account", account_id=account.id)
            return account

    def admin_register_biller(self, token: str, name: str) -> Biller:
        admin = self._require_admin(token)
        if not isinstance(name, str) or not name.strip():
            raise ValidationError("biller name must not be empty")
        with self.ledger.lock:
            settlement = self.ledger.open_account(model.INTERNAL, model.INTERNAL_SETTLEMENT)
            new_id = model.biller_id(self.state.biller_seq + 1)
            payload = {
                "biller_id": new_id,
                "name": name,
                "settlement_account_id": settlement.id,
                "status": model.ACTIVE,
            }
            self.ledger.commit(records.BILLER_REGISTERED, payload)
            self._audit(admin, "admin_register_biller", biller_id=new_id)
            return self.state.billers[new_id]

    def admin_decide_cheque_request(self, token: str, request_id: str, decision: str) -> ChequeBookRequest:
        admin = self._require_admin(token)
        if decision not in (model.APPROVED, model.REJECTED):
            raise ValidationError("decision must be APPROVED or REJECTED")
        with self.ledger.lock:
            request = self.state.cheque_requests.get(request_id)
            if request is None:
                raise UnknownRequestError(f"unknown cheque book request {request_id}")
            if request.status != model.PENDING:
                raise AlreadyDecidedError(f"request {request_id} is already {request.status}")
            payload = {
                "request_id": request_id,
                "decision": decision,
                "decided_ts": self.ledger.clock(),
            }
            self.ledger.commit(records.CHEQUE_DECISION, payload)
            self._audit(admin, "admin_decide_cheque_request", request_id=request_id, decision=decision)
            return request

    def admin_set_account_status(self, token: str, account_id: str, status: str) -> Account:
        admin = self._require_admin(token)
        with self.ledger.lock:
            account = self.ledger.set_account_status(account_id, status)
            self._audit(admin, "set_account_status", account_id=account_id, status=status)
            return account

    # ------------------------------------------------------------------
    # Helpers

    def lookup_credential(self, username: str):
        """Username resolver handed to the AuthManager."""
        with self.ledger.lock:
            customer_id = self.state.username_index.get(username)
            if customer_id is None:
                return None
            credential = self.state.credentials.get(customer_id)
            if credential is None:
                return None
            return customer_id, credential

    def _owned_account(self, principal: str, account_id: str) -> Account:
        """Gate for money-moving paths: the account must exist and be owned
        by the caller. Missing accounts report NOT_OWNER so the error shape
        never confirms another customer's account ids."""
        account = self.state.accounts.get(account_id)
        if account is None or account.owner != principal:
            raise NotOwnerError(f"account {account_id} is not yours")
        return account

    def _readable_account(self, principal: str, role: str, account_id: str) -> Account:
        account = self.state.accounts.get(account_id)
        if account is None:
            raise UnknownAccountError(f"unknown account {account_id}")
        if role != model.ROLE_ADMIN and account.owner != principal:
            raise NotOwnerError(f"account {account_id} is not yours")
        return account

    def _require_admin(self, token: str) -> str:
        principal, role = self.auth.authenticate(token)
        if role != model.ROLE_ADMIN:
            raise ForbiddenError("administrator role required")
        return principal

    def _ensure_vault(self) -> str:
        if self.state.vault_account_id is None:
            self.ledger.open_account(model.INTERNAL, model.INTERNAL_SETTLEMENT, label="vault")
        return self.state.vault_account_id

    def _audit(self, principal: str, operation: str, **details: str) -> None:
        payload = {
            "principal": principal,
            "operation": operation,
            "outcome": "ok",
            "details": {k: str(v) for k, v in sorted(details.items())},
        }
        self.ledger.commit(records.AUDIT, payload)

    def _receipt(self, tx: LedgerTransaction) -> dict:
        debit = next(p for p in tx.postings if p.direction == model.DEBIT)
        credit = next(p for p in tx.postings if p.direction == model.CREDIT)
        if tx.kind == model.BILL_PAYMENT:
            counterparty = self.state.billers_by_settlement.get(credit.account_id, credit.account_id)
        else:
            counterparty = credit.account_id
        return {
            "tx_id": tx.tx_id,
            "timestamp": tx.timestamp,
            "kind": tx.kind,
            "amount_minor": debit.amount_minor,
            "from_account": debit.account_id,
            "counterparty": counterparty,
            "memo": tx.memo,
        }


def _require_amount(amount_minor) -> None:
    if not isinstance(amount_minor, int) or isinstance(amount_minor, bool):
        raise ValidationError("amount_minor must be an integer")
    if amount_minor <= 0:
        raise ValidationError("amount must be positive")
