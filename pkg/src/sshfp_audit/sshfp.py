"""SSHFP record handling: parsing, validation, serialization, matching, generation.

An SSHFP record carries three fields: a key algorithm code, a hash type code,
and a fingerprint digest. Codes are one octet each; unassigned codes are
representable (parsing succeeds) but fail validation, so that syntactically
well-formed records with bogus codes can still be counted and reported.
"""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional


class SshfpError(Exception):
    """Base class for SSHFP handling errors."""


class MalformedRecordError(SshfpError):
    """Record text or wire data is not structurally decodable."""


class UnsupportedHashError(SshfpError):
    """Hash type has no digest algorithm assigned."""


class UnknownAlgoError(SshfpError):
    """SSH algorithm name has no SSHFP key algorithm code."""


class KeyAlgo(enum.IntEnum):
    """Assigned values of the SSHFP key algorithm field."""

    RESERVED = 0
    RSA = 1
    DSA = 2
    ECDSA = 3
    ED25519 = 4
    ED448 = 6


class HashType(enum.IntEnum):
    """Assigned values of the SSHFP hash type field."""

    RESERVED = 0
    SHA1 = 1
    SHA256 = 2


# Code 5 and codes >= 7 are unassigned for the key algorithm; codes >= 3 for
# the hash type. Reserved code 0 is assigned but not usable.
ASSIGNED_KEY_ALGOS = frozenset(a for a in KeyAlgo if a is not KeyAlgo.RESERVED)
ASSIGNED_HASH_TYPES = frozenset(h for h in HashType if h is not HashType.RESERVED)

DIGEST_LENGTHS = {int(HashType.SHA1): 20, int(HashType.SHA256): 32}

_DIGESTS = {int(HashType.SHA1): hashlib.sha1, int(HashType.SHA256): hashlib.sha256}

# SSH wire algorithm identifiers -> SSHFP key algorithm code. All nistp curves
# share code 3; a digest match is still required afterwards, so curve
# confusion cannot create false positives.
SSH_NAME_TO_KEY_ALGO = {
    "ssh-rsa": KeyAlgo.RSA,
    "ssh-dss": KeyAlgo.DSA,
    "ecdsa-sha2-nistp256": KeyAlgo.ECDSA,
    "ecdsa-sha2-nistp384": KeyAlgo.ECDSA,
    "ecdsa-sha2-nistp521": KeyAlgo.ECDSA,
    "ssh-ed25519": KeyAlgo.ED25519,
    "ssh-ed448": KeyAlgo.ED448,
}


class InvalidReason(enum.Enum):
    UNASSIGNED_KEY_ALGO = "unassigned_key_algo"
    RESERVED_KEY_ALGO = "reserved_key_algo"
    UNASSIGNED_HASH_TYPE = "unassigned_hash_type"
    RESERVED_HASH_TYPE = "reserved_hash_type"
    LENGTH_MISMATCH = "length_mismatch"


class MatchReason(enum.Enum):
    OK = "ok"
    ALGO_MISMATCH = "algo_mismatch"
    DIGEST_MISMATCH = "digest_mismatch"
    UNASSIGNED_FIELD = "unassigned_field"


@dataclass(frozen=True)
class SshfpRecord:
    """One SSHFP record: key algorithm code, hash type code, fingerprint bytes."""

    key_algo: int
    hash_type: int
    fingerprint: bytes

    def __post_init__(self) -> None:
        if not 0 <= self.key_algo <= 255:
            raise MalformedRecordError(f"key algorithm {self.key_algo} out of octet range")
        if not 0 <= self.hash_type <= 255:
            raise MalformedRecordError(f"hash type {self.hash_type} out of octet range")

    def to_wire(self) -> bytes:
        return bytes([self.key_algo, self.hash_type]) + self.fingerprint


@dataclass(frozen=True)
class HostKey:
    """An SSH server public key: algorithm name plus the raw wire-encoded blob."""

    algo_name: str
    blob: bytes

    def __post_init__(self) -> None:
        if not self.blob:
            raise ValueError("host key blob is empty")
        embedded = _embedded_algo_name(self.blob)
        if embedded != self.algo_name:
            raise ValueError(
                f"blob encodes {embedded!r} but algo_name is {self.algo_name!r}"
            )

    @classmethod
    def from_blob(cls, blob: bytes) -> "HostKey":
        """Build a HostKey from a raw blob, taking the embedded identifier."""
        return cls(_embedded_algo_name(blob), blob)


@dataclass(frozen=True)
class MatchOutcome:
    """Result of matching one SSHFP record against one host key."""

    matched: bool
    reason: MatchReason
    note: Optional[str] = field(default=None, compare=False)


def _embedded_algo_name(blob: bytes) -> str:
    if len(blob) < 4:
        raise ValueError("host key blob shorter than its length prefix")
    (length,) = struct.unpack(">I", blob[:4])
    if length == 0 or 4 + length > len(blob):
        raise ValueError("host key blob has a truncated identifier string")
    try:
        return blob[4 : 4 + length].decode("ascii")
    except UnicodeDecodeError as exc:
        raise ValueError("host key identifier is not ASCII") from exc


def parse_record(text: str) -> SshfpRecord:
    """Parse a presentation-format SSHFP line.

    Accepts an optional leading "SSHFP" token, two decimal field codes, and a
    hex fingerprint. The hex field is case-insensitive and may contain internal
    whitespace (zone files sometimes split long digests).
    """
    fields = text.split()
    if fields and fields[0].upper() == "SSHFP":
        fields = fields[1:]
    if len(fields) < 3:
        raise MalformedRecordError(f"expected 3 fields, got {len(fields)}: {text!r}")
    try:
        key_algo = int(fields[0], 10)
        hash_type = int(fields[1], 10)
    except ValueError as exc:
        raise MalformedRecordError(f"non-integer field code in {text!r}") from exc
    if not 0 <= key_algo <= 255 or not 0 <= hash_type <= 255:
        raise MalformedRecordError(f"field code out of octet range in {text!r}")
    hex_digits = "".join(fields[2:]).lower()
    if not hex_digits or len(hex_digits) % 2 != 0:
        raise MalformedRecordError(f"odd-length or empty fingerprint in {text!r}")
    try:
        fingerprint = bytes.fromhex(hex_digits)
    except ValueError as exc:
        raise MalformedRecordError(f"non-hex fingerprint in {text!r}") from exc
    return SshfpRecord(key_algo, hash_type, fingerprint)


def parse_rdata(wire: bytes) -> SshfpRecord:
    """Decode SSHFP wire RDATA: one octet algorithm, one octet hash type, digest."""
    if len(wire) < 3:
        raise MalformedRecordError(f"RDATA too short: {len(wire)} bytes")
    return SshfpRecord(wire[0], wire[1], bytes(wire[2:]))


def serialize_record(record: SshfpRecord) -> str:
    """Emit the presentation format: "<algo> <hash> <lowercase hex>"."""
    return f"{record.key_algo} {record.hash_type} {record.fingerprint.hex()}"


def validate_record(record: SshfpRecord) -> Optional[InvalidReason]:
    """Check semantic validity; returns None when valid, else the first failure.

    Valid means: assigned non-reserved key algorithm, assigned non-reserved
    hash type, and fingerprint length equal to the hash's digest length.
    """
    if record.key_algo == KeyAlgo.RESERVED:
        return InvalidReason.RESERVED_KEY_ALGO
    if record.key_algo not in ASSIGNED_KEY_ALGOS:
        return InvalidReason.UNASSIGNED_KEY_ALGO
    if record.hash_type == HashType.RESERVED:
        return InvalidReason.RESERVED_HASH_TYPE
    if record.hash_type not in ASSIGNED_HASH_TYPES:
        return InvalidReason.UNASSIGNED_HASH_TYPE
    if len(record.fingerprint) != DIGEST_LENGTHS[record.hash_type]:
        return InvalidReason.LENGTH_MISMATCH
    return None


def key_algo_from_ssh_name(algo_name: str) -> Optional[KeyAlgo]:
    """Map an SSH wire algorithm name to its SSHFP code; None when unmapped."""
    return SSH_NAME_TO_KEY_ALGO.get(algo_name)


def compute_fingerprint(blob: bytes, hash_type: int) -> bytes:
    """Digest a raw host key blob under the named hash (SHA1 or SHA256)."""
    digest = _DIGESTS.get(hash_type)
    if digest is None:
        raise UnsupportedHashError(f"hash type {hash_type} has no digest algorithm")
    return digest(blob).digest()


def match_record(record: SshfpRecord, key: HostKey) -> MatchOutcome:
    """Match one SSHFP record against one host key.

    OK requires both the algorithm codes and the digests to match. Whether the
    record is trustworthy (DNSSEC) is a property of the DNS lookup, not of the
    record/key pair, and is judged separately.
    """
    if record.key_algo not in ASSIGNED_KEY_ALGOS or record.hash_type not in ASSIGNED_HASH_TYPES:
        return MatchOutcome(False, MatchReason.UNASSIGNED_FIELD)
    key_code = key_algo_from_ssh_name(key.algo_name)
    if key_code is None or key_code != record.key_algo:
        return MatchOutcome(False, MatchReason.ALGO_MISMATCH)
    if compute_fingerprint(key.blob, record.hash_type) == record.fingerprint:
        return MatchOutcome(True, MatchReason.OK)
    # Diagnose near-misses: a digest that is correct under the other hash type
    # points at a mislabeled record rather than a rotated key.
    note = None
    for other in ASSIGNED_HASH_TYPES:
        if other == record.hash_type:
            continue
        if compute_fingerprint(key.blob, other) == record.fingerprint:
            note = f"digest matches under {HashType(other).name}"
            break
    return MatchOutcome(False, MatchReason.DIGEST_MISMATCH, note=note)


def generate_records(
    keys: Iterable[HostKey], hash_types: Iterable[int] = (HashType.SHA1, HashType.SHA256)
) -> list[SshfpRecord]:
    """Generate the SSHFP records publishing the given host keys.

    One record per (key, hash type) pair, sorted by (key_algo, hash_type,
    fingerprint) for deterministic output.
    """
    records = []
    for key in keys:
        code = key_algo_from_ssh_name(key.algo_name)
        if code is None:
            raise UnknownAlgoError(f"no SSHFP code for algorithm {key.algo_name!r}")
        for hash_type in hash_types:
            records.append(
                SshfpRecord(int(code), int(hash_type), compute_fingerprint(key.blob, hash_type))
            )
    records.sort(key=lambda r: (r.key_algo, r.hash_type, r.fingerprint))
    return records
