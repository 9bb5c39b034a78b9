"""Durable append-only journal, snapshots, and crash recovery.

Journal format (normative, byte-exact):
  - one record per line in ``<data_dir>/journal.log``, UTF-8, LF-terminated
  - a record is a JSON object with keys sorted lexicographically, no
    insignificant whitespace, integers in base 10
  - the ``crc`` field is the exception to key ordering: it is appended
    last as 8 lowercase hex chars of the CRC-32 (IEEE polynomial) taken
    over the line's bytes up to but excluding the ``,"crc":"..."`` suffix

A checksum failure mid-file is a hard error; a failure on the final
record only is a torn tail from a crash mid-write and is dropped with a
warning. Snapshots (``snapshot-<as_of_seq>.snap``) use the same canonical
encoding with a trailing ``snapshot_crc`` field and are written to a temp
name then atomically renamed.
"""

from __future__ import annotations

import json
import logging
import os
import re
import zlib
from pathlib import Path

from .errors import CorruptRecord, StorageFailure, ValidationError
from .state import RECORD_KINDS, BankState

logger = logging.getLogger(__name__)

JOURNAL_FILENAME = "journal.log"
_SNAPSHOT_RE = re.compile(r"^snapshot-(\d+)\.snap$")

_CRC_SUFFIX_MARK = b',"crc":"'
_SNAPSHOT_CRC_MARK = b',"snapshot_crc":"'


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _crc_hex(data: bytes) -> str:
    return f"{zlib.crc32(data) & 0xFFFFFFFF:08x}"


def encode_record(seq: int, ts: int, kind: str, payload: dict) -> bytes:
    """Render one journal record as its canonical line, newline included."""
    body = canonical_json({"kind": kind, "payload": payload, "seq": seq, "ts": ts})
    prefix = body[:-1].encode("utf-8")  # canonical object minus closing brace
    return prefix + _CRC_SUFFIX_MARK + _crc_hex(prefix).encode("ascii") + b'"}\n'


def decode_record(line: bytes, expected_seq: int) -> tuple[int, int, str, dict]:
    """Parse and verify one journal line; returns (seq, ts, kind, payload).

    Failures before the checksum verifies are marked ``tail_droppable``:
    if they hit the final record they are a torn write, not corruption.
    """
    mark = line.rfind(_CRC_SUFFIX_MARK)
    if mark < 0 or not line.endswith(b'"}'):
        raise _droppable(CorruptRecord(expected_seq, f"malformed journal line at seq {expected_seq}"))
    prefix = line[:mark]
    stored = line[mark + len(_CRC_SUFFIX_MARK) : -2]
    if len(stored) != 8 or _crc_hex(prefix) != stored.decode("ascii", "replace"):
        raise _droppable(CorruptRecord(expected_seq, f"checksum mismatch at seq {expected_seq}"))
    try:
        doc = json.loads(prefix + b"}")
    except json.JSONDecodeError:
        raise _droppable(CorruptRecord(expected_seq, f"unparsable journal record at seq {expected_seq}"))
    # Past this point the checksum verified, so a mismatch is a logic-level
    # inconsistency that truncation cannot explain; never drop it.
    if doc.get("seq") != expected_seq:
        raise CorruptRecord(expected_seq, f"sequence gap: expected {expected_seq}, found {doc.get('seq')}")
    if doc.get("kind") not in RECORD_KINDS:
        raise CorruptRecord(expected_seq, f"unknown record kind at seq {expected_seq}")
    return doc["seq"], doc["ts"], doc["kind"], doc["payload"]


def _droppable(exc: CorruptRecord) -> CorruptRecord:
    exc.tail_droppable = True
    return exc


def scan_journal(data: bytes) -> tuple[list[tuple[int, int, str, dict]], int]:
    """Parse journal bytes into records, tolerating a torn final record.

    Returns (records, good_byte_len) where good_byte_len is the length of
    the verified prefix of the file (the truncation point after a torn
    tail). Raises CorruptRecord for any bad record that is not the last.
    """
    records = []
    offset = 0
    pending_error: CorruptRecord | None = None
    while offset < len(data):
        newline = data.find(b"\n", offset)
        if newline < 0:
            chunk, end, complete = data[offset:], len(data), False
        else:
            chunk, end, complete = data[offset:newline], newline + 1, True
        expected = len(records) + 1
        try:
            if not complete:
                raise _droppable(CorruptRecord(expected, f"incomplete final record at seq {expected}"))
            records.append(decode_record(chunk, expected))
        except CorruptRecord as exc:
            pending_error = exc
            break
        offset = end
    if pending_error is not None:
        remainder = data[offset:]
        trailing = remainder.find(b"\n")
        mid_file = trailing >= 0 and trailing + 1 < len(remainder)
        if mid_file or not getattr(pending_error, "tail_droppable", False):
            raise pending_error
        logger.warning("dropping torn journal tail: %s", pending_error.message)
    return records, offset


def replay(data: bytes) -> BankState:
    """Reconstruct state by applying journal bytes in sequence order."""
    records, _ = scan_journal(data)
    state = BankState()
    for _seq, _ts, kind, payload in records:
        state.apply(kind, payload)
    return state


class JournalStore:
    """Single-appender handle on the journal file; every append is flushed
    and fsynced before it returns."""

    def __init__(self, data_dir: str | Path, last_seq: int = 0, good_byte_len: int | None = None):
        self.data_dir = Path(data_dir)
        self.path = self.data_dir / JOURNAL_FILENAME
        self.last_seq = last_seq
        self._closed = False
        try:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "ab")
            if good_byte_len is not None and self._fh.tell() > good_byte_len:
                # Crash left a torn tail; cut back to the last good record.
                self._fh.truncate(good_byte_len)
                self._fh.seek(good_byte_len)
        except OSError as exc:
            raise StorageFailure(f"cannot open journal: {exc}")

    def append(self, kind: str, payload: dict, ts: int) -> int:
        if self._closed:
            raise StorageFailure("journal store is closed")
        seq = self.last_seq + 1
        line = encode_record(seq, ts, kind, payload)
        try:
            self._fh.write(line)
            self._fh.flush()
            os.fsync(self._fh.fileno())
        except (OSError, ValueError) as exc:
            raise StorageFailure(f"journal append failed: {exc}")
        self.last_seq = seq
        return seq

    def write_snapshot(self, state_doc: dict, as_of_seq: int) -> Path:
        if self._closed:
            raise StorageFailure("journal store is closed")
        if as_of_seq > self.last_seq:
            raise ValidationError(
                f"snapshot as_of_seq {as_of_seq} is beyond last journaled seq {self.last_seq}"
            )
        return write_snapshot(self.data_dir, state_doc, as_of_seq)

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._fh.close()


def write_snapshot(data_dir: str | Path, state_doc: dict, as_of_seq: int) -> Path:
    """Write a snapshot atomically (temp file, fsync, rename)."""
    data_dir = Path(data_dir)
    body = canonical_json({"as_of_seq": as_of_seq, "state": state_doc})
    prefix = body[:-1].encode("utf-8")
    blob = prefix + _SNAPSHOT_CRC_MARK + _crc_hex(prefix).encode("ascii") + b'"}\n'
    final = data_dir / f"snapshot-{as_of_seq}.snap"
    tmp = data_dir / f".snapshot-{as_of_seq}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(blob)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, final)
    except OSError as exc:
        raise StorageFailure(f"snapshot write failed: {exc}")
    return final


def load_snapshot(path: Path) -> tuple[int, dict] | None:
    """Parse and verify a snapshot file; None if it is corrupt."""
    try:
        blob = path.read_bytes().rstrip(b"\n")
    except OSError:
        return None
    mark = blob.rfind(_SNAPSHOT_CRC_MARK)
    if mark < 0 or not blob.endswith(b'"}'):
        return None
    prefix = blob[:mark]
    stored = blob[mark + len(_SNAPSHOT_CRC_MARK) : -2]
    if len(stored) != 8 or _crc_hex(prefix) != stored.decode("ascii", "replace"):
        return None
    try:
        doc = json.loads(prefix + b"}")
    except json.JSONDecodeError:
        return None
    if not isinstance(doc.get("as_of_seq"), int) or "state" not in doc:
        return None
    return doc["as_of_seq"], doc["state"]


def recover(data_dir: str | Path) -> tuple[BankState, int, int]:
    """Rebuild state from <data_dir>: newest valid snapshot plus journal tail.

    The whole journal is checksum-verified even when a snapshot lets us skip
    applying a prefix. A corrupt snapshot is ignored in favor of replay.
    Returns (state, next_seq, good_byte_len).
    """
    data_dir = Path(data_dir)
    journal_path = data_dir / JOURNAL_FILENAME
    try:
        data = journal_path.read_bytes() if journal_path.exists() else b""
    except OSError as exc:
        raise StorageFailure(f"cannot read journal: {exc}")
    records, good_byte_len = scan_journal(data)
    last_seq = len(records)

    state: BankState | None = None
    start_after = 0
    for snap_path in _snapshot_candidates(data_dir):
        loaded = load_snapshot(snap_path)
        if loaded is None:
            logger.warning("ignoring corrupt snapshot %s", snap_path.name)
            continue
        as_of_seq, state_doc = loaded
        if as_of_seq > last_seq:
            logger.warning("ignoring snapshot %s beyond journal end", snap_path.name)
            continue
        state = BankState.deserialize(state_doc)
        start_after = as_of_seq
        break
    if state is None:
        state = BankState()
    for seq, _ts, kind, payload in records:
        if seq > start_after:
            state.apply(kind, payload)
    return state, last_seq + 1, good_byte_len


def _snapshot_candidates(data_dir: Path) -> list[Path]:
    """Snapshot files, newest first."""
    found = []
    if data_dir.is_dir():
        for entry in data_dir.iterdir():
            match = _SNAPSHOT_RE.match(entry.name)
            if match:
                found.append((int(match.group(1)), entry))
    return [path for _, path in sorted(found, reverse=True)]


def open_store(data_dir: str | Path) -> tuple[BankState, JournalStore]:
    """Recover state and open the journal for appending (torn tail truncated)."""
    state, next_seq, good_byte_len = recover(data_dir)
    store = JournalStore(data_dir, last_seq=next_seq - 1, good_byte_len=good_byte_len)
    return state, store
