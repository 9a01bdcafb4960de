"""Durable per-domain scan results as JSON Lines.

One line per scanned name, append-only, individually decodable: a crash
mid-run leaves a valid prefix. Field names are stable; schema changes bump
SCHEMA_VERSION.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterator, Optional, Union

from sshfp_audit.dnsclient import DnsLookupResult, Outcome, Qtype
from sshfp_audit.keyscan import KeyscanStatus
from sshfp_audit.sshfp import (
    HostKey,
    InvalidReason,
    MatchOutcome,
    MatchReason,
    SshfpRecord,
    parse_record,
    serialize_record,
)

SCHEMA_VERSION = 1

# Per-name status values; "ok" means the full path ran (keyscan attempted).
STATUS_OK = "ok"
STATUS_INVALID_NAME = "invalid_name"
STATUS_WILDCARD = "wildcard"
STATUS_NO_SSHFP_RECORDS = "no_sshfp_records"
STATUS_NO_VALID_RECORDS = "no_valid_records"
STATUS_NO_IPV4 = "no_ipv4"
# DNS-stage failures are prefixed with the stage that failed.
STATUS_SSHFP_PREFIX = "sshfp_"
STATUS_A_PREFIX = "a_"


@dataclass
class KeyscanEntry:
    """Keyscan outcome for one IPv4 address of the domain."""

    address: str
    per_algo_status: dict[str, KeyscanStatus] = field(default_factory=dict)
    keys: list[HostKey] = field(default_factory=list)
    sig_verified: dict[str, Optional[bool]] = field(default_factory=dict)


@dataclass
class MatchEntry:
    """Match outcome for one (record index, address, key) combination."""

    record_index: int
    address: str
    key_algo_name: str
    outcome: MatchOutcome


@dataclass
class DomainScanResult:
    """Everything learned about one input name in one scan pass."""

    domain: str
    status: str
    registrable_domain: Optional[str] = None
    started: str = ""
    finished: str = ""
    sshfp_lookup: Optional[DnsLookupResult] = None
    record_verdicts: list[Optional[InvalidReason]] = field(default_factory=list)
    a_lookup: Optional[DnsLookupResult] = None
    keyscans: list[KeyscanEntry] = field(default_factory=list)
    matches: list[MatchEntry] = field(default_factory=list)
    validating_lookup: Optional[DnsLookupResult] = None

    @property
    def records(self) -> list[SshfpRecord]:
        if self.sshfp_lookup is None:
            return []
        return [r for r in self.sshfp_lookup.records if isinstance(r, SshfpRecord)]

    def valid_records(self) -> list[SshfpRecord]:
        return [
            r for r, verdict in zip(self.records, self.record_verdicts) if verdict is None
        ]

    def all_keys(self) -> list[HostKey]:
        """Distinct host keys across all scanned addresses."""
        seen = set()
        keys = []
        for entry in self.keyscans:
            for key in entry.keys:
                if key.blob not in seen:
                    seen.add(key.blob)
                    keys.append(key)
        return keys


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def _lookup_to_dict(lookup: DnsLookupResult) -> dict:
    records: list[Union[str, dict]] = []
    for record in lookup.records:
        if isinstance(record, SshfpRecord):
            records.append(serialize_record(record))
        else:
            records.append(record)
    return {
        "qtype": lookup.qtype.name,
        "outcome": lookup.outcome.value,
        "records": records,
        "ad": lookup.ad_flag,
        "elapsed_ms": round(lookup.elapsed * 1000),
        "final_name": lookup.final_name,
    }


def _lookup_from_dict(domain: str, data: dict) -> DnsLookupResult:
    qtype = Qtype[data["qtype"]]
    records: list[Union[SshfpRecord, str]] = []
    for item in data.get("records", []):
        records.append(parse_record(item) if qtype is Qtype.SSHFP else item)
    return DnsLookupResult(
        domain=domain,
        qtype=qtype,
        outcome=Outcome(data["outcome"]),
        records=records,
        ad_flag=bool(data.get("ad", False)),
        elapsed=data.get("elapsed_ms", 0) / 1000.0,
        final_name=data.get("final_name"),
    )


def result_to_dict(result: DomainScanResult) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "domain": result.domain,
        "status": result.status,
        "registrable_domain": result.registrable_domain,
        "started": result.started,
        "finished": result.finished,
        "sshfp_lookup": _lookup_to_dict(result.sshfp_lookup) if result.sshfp_lookup else None,
        "record_verdicts": [
            verdict.value if verdict else None for verdict in result.record_verdicts
        ],
        "a_lookup": _lookup_to_dict(result.a_lookup) if result.a_lookup else None,
        "keyscans": [
            {
                "address": entry.address,
                "per_algo_status": {
                    algo: status.value for algo, status in entry.per_algo_status.items()
                },
                "keys": [
                    {
                        "algo": key.algo_name,
                        "blob": base64.b64encode(key.blob).decode("ascii"),
                        "sig_verified": entry.sig_verified.get(key.algo_name),
                    }
                    for key in entry.keys
                ],
            }
            for entry in result.keyscans
        ],
        "matches": [
            {
                "record": match.record_index,
                "address": match.address,
                "key_algo": match.key_algo_name,
                "matched": match.outcome.matched,
                "reason": match.outcome.reason.value,
                "note": match.outcome.note,
            }
            for match in result.matches
        ],
        "validating_lookup": (
            _lookup_to_dict(result.validating_lookup) if result.validating_lookup else None
        ),
    }


def result_from_dict(data: dict) -> DomainScanResult:
    domain = data["domain"]
    keyscans = []
    for entry in data.get("keyscans", []):
        keys = []
        sig_verified: dict[str, Optional[bool]] = {}
        for item in entry.get("keys", []):
            key = HostKey(item["algo"], base64.b64decode(item["blob"]))
            keys.append(key)
            sig_verified[key.algo_name] = item.get("sig_verified")
        keyscans.append(
            KeyscanEntry(
                address=entry["address"],
                per_algo_status={
                    algo: KeyscanStatus(status)
                    for algo, status in entry.get("per_algo_status", {}).items()
                },
                keys=keys,
                sig_verified=sig_verified,
            )
        )
    matches = [
        MatchEntry(
            record_index=item["record"],
            address=item["address"],
            key_algo_name=item["key_algo"],
            outcome=MatchOutcome(
                matched=item["matched"],
                reason=MatchReason(item["reason"]),
                note=item.get("note"),
            ),
        )
        for item in data.get("matches", [])
    ]
    return DomainScanResult(
        domain=domain,
        status=data["status"],
        registrable_domain=data.get("registrable_domain"),
        started=data.get("started", ""),
        finished=data.get("finished", ""),
        sshfp_lookup=(
            _lookup_from_dict(domain, data["sshfp_lookup"]) if data.get("sshfp_lookup") else None
        ),
        record_verdicts=[
            InvalidReason(verdict) if verdict else None
            for verdict in data.get("record_verdicts", [])
        ],
        a_lookup=_lookup_from_dict(domain, data["a_lookup"]) if data.get("a_lookup") else None,
        keyscans=keyscans,
        matches=matches,
        validating_lookup=(
            _lookup_from_dict(domain, data["validating_lookup"])
            if data.get("validating_lookup")
            else None
        ),
    )


def write_result(stream: IO[str], result: DomainScanResult) -> None:
    stream.write(json.dumps(result_to_dict(result), sort_keys=True) + "\n")
    stream.flush()


def read_log(path: str | Path) -> Iterator[DomainScanResult]:
    """Yield results from a JSON Lines log; undecodable lines raise ValueError."""
    with open(path, encoding="utf-8") as stream:
        for lineno, line in enumerate(stream, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield result_from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: undecodable log line: {exc}") from exc
