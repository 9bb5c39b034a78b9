"""In-memory system state reconstructed from the journal.

The journal is the source of truth: every mutation is expressed as a
(kind, payload) record, and :meth:`BankState.apply` is the only code path
that changes state. Live commits and crash recovery both funnel through
it, so a replayed journal reproduces the live state by construction.

``apply`` never validates business rules; validation happens before a
record is written. Records read back from a checksummed journal are
trusted verbatim.
"""

from __future__ import annotations

from . import model
from .model import (
    Account,
    Biller,
    ChequeBookRequest,
    Credential,
    CustomerProfile,
    LedgerTransaction,
    StatementEntry,
    StopChequeOrder,
)

# Journal record kinds
TX_COMMITTED = "TX_COMMITTED"
CUSTOMER_CREATED = "CUSTOMER_CREATED"
ACCOUNT_OPENED = "ACCOUNT_OPENED"
ACCOUNT_STATUS = "ACCOUNT_STATUS"
BILLER_REGISTERED = "BILLER_REGISTERED"
CHEQUE_REQUEST = "CHEQUE_REQUEST"
CHEQUE_DECISION = "CHEQUE_DECISION"
STOP_ORDER = "STOP_ORDER"
CREDENTIAL_SET = "CREDENTIAL_SET"
PROFILE_UPDATED = "PROFILE_UPDATED"
AUDIT = "AUDIT"

RECORD_KINDS = frozenset(
    {
        TX_COMMITTED,
        CUSTOMER_CREATED,
        ACCOUNT_OPENED,
        ACCOUNT_STATUS,
        BILLER_REGISTERED,
        CHEQUE_REQUEST,
        CHEQUE_DECISION,
        STOP_ORDER,
        CREDENTIAL_SET,
        PROFILE_UPDATED,
        AUDIT,
    }
)


def idempotency_map_key(initiator: str, key: str) -> str:
    # initiator ids never contain ':', so the first colon is unambiguous
    return f"{initiator}:{key}"


class BankState:
    def __init__(self):
        self.accounts: dict[str, Account] = {}
        self.customers: dict[str, CustomerProfile] = {}
        self.credentials: dict[str, Credential] = {}
        self.billers: dict[str, Biller] = {}
        self.cheque_requests: dict[str, ChequeBookRequest] = {}
        self.stop_orders: dict[str, StopChequeOrder] = {}
        self.transactions: list[LedgerTransaction] = []
        self.tx_by_id: dict[str, LedgerTransaction] = {}
        # (initiator, idempotency_key) -> tx_id
        self.idempotency: dict[str, str] = {}
        self.vault_account_id: str | None = None

        self.account_seq = 0
        self.customer_seq = 0
        self.biller_seq = 0
        self.cheque_seq = 0
        self.stop_seq = 0
        self.tx_seq = 0

        # Derived indexes, rebuilt on load; never serialized.
        self.username_index: dict[str, str] = {}  # username -> customer id
        self.billers_by_settlement: dict[str, str] = {}  # account id -> biller id
        self.account_history: dict[str, list[StatementEntry]] = {}
        self.stop_index: dict[tuple[str, str], str] = {}  # (account, cheque no) -> order id

    # ------------------------------------------------------------------
    # Record application

    def apply(self, kind: str, payload: dict) -> None:
        handler = _APPLIERS.get(kind)
        if handler is None:
            raise ValueError(f"unknown record kind {kind!r}")
        handler(self, payload)

    def _apply_tx(self, payload: dict) -> None:
        tx = LedgerTransaction.from_payload(payload)
        self.transactions.append(tx)
        self.tx_by_id[tx.tx_id] = tx
        self.tx_seq = max(self.tx_seq, model.id_sequence(tx.tx_id))
        for posting in tx.postings:
            account = self.accounts[posting.account_id]
            account.balance_minor += posting.signed_minor
        self._index_transaction(tx)
        if tx.idempotency_key is not None:
            self.idempotency[idempotency_map_key(tx.initiator, tx.idempotency_key)] = tx.tx_id

    def _index_transaction(self, tx: LedgerTransaction) -> None:
        for posting in tx.postings:
            history = self.account_history.setdefault(posting.account_id, [])
            previous = history[-1].running_balance_minor if history else 0
            history.append(
                StatementEntry(
                    tx_id=tx.tx_id,
                    timestamp=tx.timestamp,
                    kind=tx.kind,
                    direction=posting.direction,
                    amount_minor=posting.amount_minor,
                    signed_minor=posting.signed_minor,
                    running_balance_minor=previous + posting.signed_minor,
                    memo=tx.memo,
                )
            )

    def _apply_customer_created(self, payload: dict) -> None:
        profile = CustomerProfile.from_payload(payload)
        self.customers[profile.id] = profile
        self.username_index[profile.username] = profile.id
        self.customer_seq = max(self.customer_seq, model.id_sequence(profile.id))

    def _apply_account_opened(self, payload: dict) -> None:
        account = Account(
            id=payload["account_id"],
            owner=payload["owner"],
            kind=payload["kind"],
            label=payload.get("label"),
        )
        self.accounts[account.id] = account
        self.account_seq = max(self.account_seq, model.id_sequence(account.id))
        if account.label == "vault":
            self.vault_account_id = account.id

    def _apply_account_status(self, payload: dict) -> None:
        self.accounts[payload["account_id"]].status = payload["status"]

    def _apply_biller_registered(self, payload: dict) -> None:
        biller = Biller.from_payload(payload)
        self.billers[biller.id] = biller
        self.billers_by_settlement[biller.settlement_account_id] = biller.id
        self.biller_seq = max(self.biller_seq, model.id_sequence(biller.id))

    def _apply_cheque_request(self, payload: dict) -> None:
        request = ChequeBookRequest.from_payload(payload)
        self.cheque_requests[request.id] = request
        self.cheque_seq = max(self.cheque_seq, model.id_sequence(request.id))

    def _apply_cheque_decision(self, payload: dict) -> None:
        request = self.cheque_requests[payload["request_id"]]
        request.status = payload["decision"]
        request.decided_ts = payload["decided_ts"]

    def _apply_stop_order(self, payload: dict) -> None:
        order = StopChequeOrder.from_payload(payload)
        self.stop_orders[order.id] = order
        self.stop_seq = max(self.stop_seq, model.id_sequence(order.id))
        if order.status == model.ACTIVE:
            self.stop_index[(order.account_id, order.cheque_number)] = order.id

    def _apply_credential_set(self, payload: dict) -> None:
        credential = Credential.from_payload(payload)
        self.credentials[credential.principal_id] = credential

    def _apply_profile_updated(self, payload: dict) -> None:
        profile = self.customers[payload["customer_id"]]
        if "email" in payload:
            profile.email = payload["email"]
        if "phone" in payload:
            profile.phone = payload["phone"]
        if "postal_address" in payload:
            profile.postal_address = payload["postal_address"]

    def _apply_audit(self, payload: dict) -> None:
        # Audit records live in the journal only; they carry no state.
        pass

    # ------------------------------------------------------------------
    # Snapshot serialization

    def serialize(self) -> dict:
        return {
            "accounts": {a.id: a.to_payload() for a in self.accounts.values()},
            "customers": {c.id: c.to_payload() for c in self.customers.values()},
            "credentials": {c.principal_id: c.to_payload() for c in self.credentials.values()},
            "billers": {b.id: b.to_payload() for b in self.billers.values()},
            "cheque_requests": {r.id: r.to_payload() for r in self.cheque_requests.values()},
            "stop_orders": {o.id: o.to_payload() for o in self.stop_orders.values()},
            "transactions": [tx.to_payload() for tx in self.transactions],
            "idempotency": dict(self.idempotency),
            "vault_account_id": self.vault_account_id,
            "seqs": {
                "account": self.account_seq,
                "biller": self.biller_seq,
                "cheque": self.cheque_seq,
                "customer": self.customer_seq,
                "stop": self.stop_seq,
                "tx": self.tx_seq,
            },
        }

    @staticmethod
    def deserialize(doc: dict) -> "BankState":
        state = BankState()
        for payload in doc["accounts"].values():
            account = Account.from_payload(payload)
            state.accounts[account.id] = account
            if account.label == "vault":
                state.vault_account_id = account.id
        for payload in doc["customers"].values():
            profile = CustomerProfile.from_payload(payload)
            state.customers[profile.id] = profile
            state.username_index[profile.username] = profile.id
        for payload in doc["credentials"].values():
            credential = Credential.from_payload(payload)
            state.credentials[credential.principal_id] = credential
        for payload in doc["billers"].values():
            biller = Biller.from_payload(payload)
            state.billers[biller.id] = biller
            state.billers_by_settlement[biller.settlement_account_id] = biller.id
        for payload in doc["cheque_requests"].values():
            request = ChequeBookRequest.from_payload(payload)
            state.cheque_requests[request.id] = request
        for payload in doc["stop_orders"].values():
            order = StopChequeOrder.from_payload(payload)
            state.stop_orders[order.id] = order
            if order.status == model.ACTIVE:
                state.stop_index[(order.account_id, order.cheque_number)] = order.id
        for payload in doc["transactions"]:
            tx = LedgerTransaction.from_payload(payload)
            state.transactions.append(tx)
            state.tx_by_id[tx.tx_id] = tx
            state._index_transaction(tx)
        state.idempotency = dict(doc["idempotency"])
        seqs = doc["seqs"]
        state.account_seq = seqs["account"]
        state.biller_seq = seqs["biller"]
        state.cheque_seq = seqs["cheque"]
        state.customer_seq = seqs["customer"]
        state.stop_seq = seqs["stop"]
        state.tx_seq = seqs["tx"]
        return state


_APPLIERS = {
    TX_COMMITTED: BankState._apply_tx,
    CUSTOMER_CREATED: BankState._apply_customer_created,
    ACCOUNT_OPENED: BankState._apply_account_opened,
    ACCOUNT_STATUS: BankState._apply_account_status,
    BILLER_REGISTERED: BankState._apply_biller_registered,
    CHEQUE_REQUEST: BankState._apply_cheque_request,
    CHEQUE_DECISION: BankState._apply_cheque_decision,
    STOP_ORDER: BankState._apply_stop_order,
    CREDENTIAL_SET: BankState._apply_credential_set,
    PROFILE_UPDATED: BankState._apply_profile_updated,
    AUDIT: BankState._apply_audit,
}
