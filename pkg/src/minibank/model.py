"""Domain types for the banking core.

Money is always an exact integer count of minor currency units (cents); no
fractional amounts exist anywhere in the system. All timestamps are UTC
epoch milliseconds. Entity ids are sequence-derived strings so that runs
are deterministic and journals reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Account kinds
CUSTOMER_CHECKING = "CUSTOMER_CHECKING"
CUSTOMER_SAVINGS = "CUSTOMER_SAVINGS"
INTERNAL_SETTLEMENT = "INTERNAL_SETTLEMENT"
ACCOUNT_KINDS = frozenset({CUSTOMER_CHECKING, CUSTOMER_SAVINGS, INTERNAL_SETTLEMENT})
CUSTOMER_KINDS = frozenset({CUSTOMER_CHECKING, CUSTOMER_SAVINGS})

# Account statuses
ACTIVE = "ACTIVE"
FROZEN = "FROZEN"
CLOSED = "CLOSED"
ACCOUNT_STATUSES = frozenset({ACTIVE, FROZEN, CLOSED})

# Transaction kinds
TRANSFER = "TRANSFER"
BILL_PAYMENT = "BILL_PAYMENT"
INITIAL_FUNDING = "INITIAL_FUNDING"
ADJUSTMENT = "ADJUSTMENT"
TX_KINDS = frozenset({TRANSFER, BILL_PAYMENT, INITIAL_FUNDING, ADJUSTMENT})

# Posting directions
DEBIT = "DEBIT"
CREDIT = "CREDIT"

# Principal roles
ROLE_CUSTOMER = "CUSTOMER"
ROLE_ADMIN = "ADMIN"

# Sentinel owner for bank-internal accounts, and the admin principal id.
INTERNAL = "INTERNAL"
ADMIN_PRINCIPAL = "ADMIN"

# Workflow statuses
PENDING = "PENDING"
APPROVED = "APPROVED"
REJECTED = "REJECTED"
RETIRED = "RETIRED"
CANCELLED = "CANCELLED"

CHEQUE_LEAVES = frozenset({25, 50, 100})

MEMO_MAX_LEN = 140
IDEMPOTENCY_KEY_MAX_LEN = 64
BILL_REFERENCE_MAX_LEN = 40


def account_id(n: int) -> str:
    return f"ACC-{n:06d}"


def customer_id(n: int) -> str:
    return f"CUS-{n:06d}"


def tx_id(n: int) -> str:
    return f"TX-{n:010d}"


def biller_id(n: int) -> str:
    return f"BIL-{n:04d}"


def cheque_request_id(n: int) -> str:
    return f"CHB-{n:06d}"


def stop_order_id(n: int) -> str:
    return f"STP-{n:06d}"


def id_sequence(entity_id: str) -> int:
    """Numeric suffix of a sequence-derived id (``ACC-000002`` -> 2)."""
    return int(entity_id.rsplit("-", 1)[1])


@dataclass
class Account:
    id: str
    owner: str  # customer id or INTERNAL
    kind: str
    status: str = ACTIVE
    balance_minor: int = 0
    label: str | None = None  # "vault" marks the funding settlement account

    def to_payload(self) -> dict:
        doc = {
            "account_id": self.id,
            "owner": self.owner,
            "kind": self.kind,
            "status": self.status,
            "balance_minor": self.balance_minor,
        }
        if self.label is not None:
            doc["label"] = self.label
        return doc

    @staticmethod
    def from_payload(doc: dict) -> "Account":
        return Account(
            id=doc["account_id"],
            owner=doc["owner"],
            kind=doc["kind"],
            status=doc["status"],
            balance_minor=doc["balance_minor"],
            label=doc.get("label"),
        )


@dataclass
class Posting:
    account_id: str
    direction: str  # DEBIT or CREDIT
    amount_minor: int

    def to_payload(self) -> dict:
        return {
            "account_id": self.account_id,
            "direction": self.direction,
            "amount_minor": self.amount_minor,
        }

    @staticmethod
    def from_payload(doc: dict) -> "Posting":
        return Posting(doc["account_id"], doc["direction"], doc["amount_minor"])

    @property
    def signed_minor(self) -> int:
        """Balance effect under the liability convention: credit increases."""
        return self.amount_minor if self.direction == CREDIT else -self.amount_minor


@dataclass
class LedgerTransaction:
    tx_id: str
    timestamp: int  # UTC ms
    kind: str
    postings: list[Posting]
    memo: str = ""
    idempotency_key: str | None = None
    initiator: str = ""

    def to_payload(self) -> dict:
        doc = {
            "tx_id": self.tx_id,
            "ts": self.timestamp,
            "kind": self.kind,
            "postings": [p.to_payload() for p in self.postings],
            "memo": self.memo,
            "initiator": self.initiator,
        }
        if self.idempotency_key is not None:
            doc["idempotency_key"] = self.idempotency_key
        return doc

    @staticmethod
    def from_payload(doc: dict) -> "LedgerTransaction":
        return LedgerTransaction(
            tx_id=doc["tx_id"],
            timestamp=doc["ts"],
            kind=doc["kind"],
            postings=[Posting.from_payload(p) for p in doc["postings"]],
            memo=doc["memo"],
            idempotency_key=doc.get("idempotency_key"),
            initiator=doc["initiator"],
        )


@dataclass
class CustomerProfile:
    id: str
    username: str
    full_name: str
    email: str
    phone: str
    postal_address: str

    def to_payload(self) -> dict:
        return {
            "customer_id": self.id,
            "username": self.username,
            "full_name": self.full_name,
            "email": self.email,
            "phone": self.phone,
            "postal_address": self.postal_address,
        }

    @staticmethod
    def from_payload(doc: dict) -> "CustomerProfile":
        return CustomerProfile(
            id=doc["customer_id"],
            username=doc["username"],
            full_name=doc["full_name"],
            email=doc["email"],
            phone=doc["phone"],
            postal_address=doc["postal_address"],
        )


@dataclass
class Credential:
    principal_id: str
    salt: bytes
    password_hash: bytes
    hash_params: dict

    def to_payload(self) -> dict:
        return {
            "principal_id": self.principal_id,
            "salt": self.salt.hex(),
            "password_hash": self.password_hash.hex(),
            "hash_params": dict(self.hash_params),
        }

    @staticmethod
    def from_payload(doc: dict) -> "Credential":
        return Credential(
            principal_id=doc["principal_id"],
            salt=bytes.fromhex(doc["salt"]),
            password_hash=bytes.fromhex(doc["password_hash"]),
            hash_params=dict(doc["hash_params"]),
        )


@dataclass
class Biller:
    id: str
    name: str
    settlement_account_id: str
    status: str = ACTIVE

    def to_payload(self) -> dict:
        return {
            "biller_id": self.id,
            "name": self.name,
            "settlement_account_id": self.settlement_account_id,
            "status": self.status,
        }

    @staticmethod
    def from_payload(doc: dict) -> "Biller":
        return Biller(
            id=doc["biller_id"],
            name=doc["name"],
            settlement_account_id=doc["settlement_account_id"],
            status=doc["status"],
        )


@dataclass
class ChequeBookRequest:
    id: str
    account_id: str
    leaves: int
    status: str = PENDING
    requested_ts: int = 0
    decided_ts: int | None = None

    def to_payload(self) -> dict:
        doc = {
            "request_id": self.id,
            "account_id": self.account_id,
            "leaves": self.leaves,
            "status": self.status,
            "requested_ts": self.requested_ts,
        }
        if self.decided_ts is not None:
            doc["decided_ts"] = self.decided_ts
        return doc

    @staticmethod
    def from_payload(doc: dict) -> "ChequeBookRequest":
        return ChequeBookRequest(
            id=doc["request_id"],
            account_id=doc["account_id"],
            leaves=doc["leaves"],
            status=doc["status"],
            requested_ts=doc["requested_ts"],
            decided_ts=doc.get("decided_ts"),
        )


@dataclass
class StopChequeOrder:
    id: str
    account_id: str
    cheque_number: str
    reason: str
    status: str = ACTIVE

    def to_payload(self) -> dict:
        return {
            "order_id": self.id,
            "account_id": self.account_id,
            "cheque_number": self.cheque_number,
            "reason": self.reason,
            "status": self.status,
        }

    @staticmethod
    def from_payload(doc: dict) -> "StopChequeOrder":
        return StopChequeOrder(
            id=doc["order_id"],
            account_id=doc["account_id"],
            cheque_number=doc["cheque_number"],
            reason=doc["reason"],
            status=doc["status"],
        )


@dataclass
class Session:
    token: str  # 64 lowercase hex chars
    principal_id: str
    role: str
    created_ts: int
    last_used_ts: int
    idle_ttl_s: int


@dataclass
class LockoutState:
    failed_count: int = 0
    locked_until: int | None = None  # UTC ms


@dataclass
class StatementEntry:
    """One posting's view in an account's history, with the running balance
    of the account immediately after its transaction committed."""

    tx_id: str
    timestamp: int
    kind: str
    direction: str
    amount_minor: int
    signed_minor: int
    running_balance_minor: int
    memo: str
