"""Credential hashing, bearer-token sessions, and login lockout.

Passwords are hashed with salted PBKDF2-HMAC-SHA256 at a configurable cost
(tests pick the fast preset). Session and lockout state are process-local:
a restart logs everyone out, which is the safe direction for bearer tokens.
The login error for an unknown user is byte-identical to the one for a
wrong password so the API never becomes a username oracle.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
import threading
import time
from typing import Callable

from .errors import BadCredentialsError, LockedOutError, UnauthenticatedError, ValidationError
from .model import ADMIN_PRINCIPAL, ROLE_ADMIN, ROLE_CUSTOMER, Credential, LockoutState, Session

HASH_PRESETS = {
    "pbkdf2-sha256-100k": {"algorithm": "pbkdf2_sha256", "iterations": 100_000},
    # Fast preset so test suites stay quick; never the server default.
    "pbkdf2-sha256-1k": {"algorithm": "pbkdf2_sha256", "iterations": 1_000},
}
DEFAULT_PRESET = "pbkdf2-sha256-100k"

ADMIN_USERNAME = "admin"

_BAD_CREDENTIALS_MESSAGE = "invalid username or password"
_SALT_LEN = 16


def _now_ms() -> int:
    return time.time_ns() // 1_000_000


def hash_password(password: str, salt: bytes, params: dict) -> bytes:
    """Deterministic slow hash of (password, salt) under the given params."""
    if not password:
        raise ValidationError("password must not be empty")
    if params.get("algorithm") != "pbkdf2_sha256":
        raise ValidationError(f"unsupported hash algorithm {params.get('algorithm')!r}")
    return hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, params["iterations"])


def make_credential(
    principal_id: str,
    password: str,
    preset: str = DEFAULT_PRESET,
    salt_source: Callable[[], bytes] | None = None,
) -> Credential:
    params = HASH_PRESETS[preset]
    salt = salt_source() if salt_source is not None else secrets.token_bytes(_SALT_LEN)
    return Credential(
        principal_id=principal_id,
        salt=salt,
        password_hash=hash_password(password, salt, params),
        hash_params=dict(params),
    )


def verify_password(credential: Credential, password: str) -> bool:
    """Recompute under the credential's stored params and compare in constant time."""
    try:
        candidate = hash_password(password, credential.salt, credential.hash_params)
    except ValidationError:
        return False
    return hmac.compare_digest(candidate, credential.password_hash)


class AuthManager:
    """Session table and lockout counters over a credential lookup.

    ``credential_lookup(username)`` resolves a customer username to
    (principal_id, Credential) or None. The administrator is a virtual
    principal configured from the environment, never journaled, so a fresh
    data directory stays at last_seq 0.
    """

    def __init__(
        self,
        credential_lookup: Callable[[str], tuple[str, Credential] | None],
        clock: Callable[[], int] = _now_ms,
        idle_ttl_s: int = 900,
        lockout_threshold: int = 5,
        lockout_window_s: int = 900,
        hash_preset: str = DEFAULT_PRESET,
        salt_source: Callable[[], bytes] | None = None,
        token_source: Callable[[], str] | None = None,
        admin_password: str | None = None,
    ):
        self._lookup = credential_lookup
        self.clock = clock
        self.idle_ttl_s = idle_ttl_s
        self.lockout_threshold = lockout_threshold
        self.lockout_window_s = lockout_window_s
        self.hash_preset = hash_preset
        self.salt_source = salt_source
        self._token_source = token_source or (lambda: secrets.token_hex(32))
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        self._lockouts: dict[str, LockoutState] = {}
        # Hashing even for unknown usernames keeps timing uniform.
        self._decoy = make_credential("DECOY", "decoy-password", hash_preset, salt_source)
        self._admin_credential: Credential | None = None
        if admin_password:
            self._admin_credential = make_credential(
                ADMIN_PRINCIPAL, admin_password, hash_preset, salt_source
            )

    # ------------------------------------------------------------------
    # Login / logout / authenticate

    def login(self, username: str, password: str) -> Session:
        resolved = self._resolve(username)
        if resolved is None:
            verify_password(self._decoy, password or "?")
            raise BadCredentialsError(_BAD_CREDENTIALS_MESSAGE)
        principal_id, role, credential = resolved

        with self._lock:
            lockout = self._lockouts.setdefault(principal_id, LockoutState())
            now = self.clock()
            if lockout.locked_until is not None:
                if now < lockout.locked_until:
                    raise LockedOutError("too many failed logins; try again later")
                lockout.locked_until = None
                lockout.failed_count = 0

        ok = bool(password) and verify_password(credential, password)

        with self._lock:
            lockout = self._lockouts.setdefault(principal_id, LockoutState())
            if not ok:
                lockout.failed_count += 1
                if lockout.failed_count >= self.lockout_threshold:
                    lockout.locked_until = self.clock() + self.lockout_window_s * 1000
                raise BadCredentialsError(_BAD_CREDENTIALS_MESSAGE)
            if lockout.locked_until is not None and self.clock() < lockout.locked_until:
                # A concurrent attempt crossed the threshold while we hashed.
                raise LockedOutError("too many failed logins; try again later")
            lockout.failed_count = 0
            lockout.locked_until = None
            return self._create_session(principal_id, role)

    def authenticate(self, token: str) -> tuple[str, str]:
        """Resolve a bearer token to (principal_id, role), sliding the TTL."""
        with self._lock:
            session = self._sessions.get(token)
            now = self.clock()
            if session is None:
                raise UnauthenticatedError("missing or invalid session token")
            if now - session.last_used_ts > session.idle_ttl_s * 1000:
                del self._sessions[token]
                raise UnauthenticatedError("session expired")
            session.last_used_ts = now
            return session.principal_id, session.role

    def logout(self, token: str) -> None:
        with self._lock:
            self._sessions.pop(token, None)

    def invalidate_other_sessions(self, principal_id: str, keep_token: str) -> None:
        with self._lock:
            stale = [
                t
                for t, s in self._sessions.items()
                if s.principal_id == principal_id and t != keep_token
            ]
            for token in stale:
                del self._sessions[token]

    # ------------------------------------------------------------------
    # Credential construction for the service layer

    def new_credential(self, principal_id: str, password: str) -> Credential:
        return make_credential(principal_id, password, self.hash_preset, self.salt_source)

    def _create_session(self, principal_id: str, role: str) -> Session:
        token = self._token_source()
        now = self.clock()
        session = Session(
            token=token,
            principal_id=principal_id,
            role=role,
            created_ts=now,
            last_used_ts=now,
            idle_ttl_s=self.idle_ttl_s,
        )
        self._sessions[token] = session
        return session

    def _resolve(self, username: str) -> tuple[str, str, Credential] | None:
        if username == ADMIN_USERNAME:
            if self._admin_credential is None:
                return None
            return ADMIN_PRINCIPAL, ROLE_ADMIN, self._admin_credential
        found = self._lookup(username)
        if found is None:
            return None
        principal_id, credential = found
        return principal_id, ROLE_CUSTOMER, credential
