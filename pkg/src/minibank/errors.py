"""Failure types shared across all layers.

Every error carries a stable UPPER_SNAKE ``code`` from a closed set; the API
tier maps codes to HTTP statuses and renders them in a uniform envelope, so
nothing below the API layer ever needs to know about HTTP.
"""

from __future__ import annotations


class BankError(Exception):
    """Base class for every expected failure."""

    code: str = "INTERNAL"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ValidationError(BankError):
    code = "VALIDATION"


class UnknownCustomerError(BankError):
    code = "UNKNOWN_CUSTOMER"


class UnknownAccountError(BankError):
    code = "UNKNOWN_ACCOUNT"


class UnknownBillerError(BankError):
    code = "UNKNOWN_BILLER"


class UnknownRequestError(BankError):
    code = "UNKNOWN_REQUEST"


class UnbalancedError(BankError):
    code = "UNBALANCED"


class FrozenAccountError(BankError):
    code = "FROZEN"


class InsufficientFundsError(BankError):
    code = "INSUFFICIENT_FUNDS"


class NotOwnerError(BankError):
    code = "NOT_OWNER"


class SelfTransferError(BankError):
    code = "SELF_TRANSFER"


class BillerRetiredError(BankError):
    code = "BILLER_RETIRED"


class AlreadyDecidedError(BankError):
    code = "ALREADY_DECIDED"


class DuplicateUsernameError(BankError):
    code = "DUPLICATE_USERNAME"


class UnauthenticatedError(BankError):
    code = "UNAUTHENTICATED"


class BadCredentialsError(BankError):
    code = "BAD_CREDENTIALS"


class LockedOutError(BankError):
    code = "LOCKED_OUT"


class ForbiddenError(BankError):
    code = "FORBIDDEN"


class StorageFailure(BankError):
    code = "STORAGE_FAILURE"


class CorruptRecord(BankError):
    """Journal integrity failure; ``seq`` names the offending record."""

    code = "CORRUPT_RECORD"

    def __init__(self, seq: int, message: str = ""):
        super().__init__(message or f"corrupt journal record at seq {seq}")
        self.seq = seq


class IdempotentReplay(BankError):
    """Raised by the ledger when an (initiator, idempotency_key) pair has
    already committed; carries the original transaction so callers can
    return it unchanged. Not a failure at the service layer."""

    code = "IDEMPOTENT_REPLAY"

    def __init__(self, transaction):
        super().__init__(f"idempotent replay of {transaction.tx_id}")
        self.transaction = transaction
