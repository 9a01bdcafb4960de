"""Aggregate scan logs into evaluation artifacts.

Produces algorithm/hash distributions for the DNS side and the SSH side
(split into matching and mismatching server fingerprints), match-ratio
classes per domain, DNSSEC security status splits, duplicate-fingerprint
clusters, and record-set change events across repeated observations.

Where a domain was measured multiple times, only the first observation is
considered for domain-level statistics; change events use the full sequence.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional

from sshfp_audit.dnsclient import DnsLookupResult, Outcome
from sshfp_audit.scanlog import STATUS_OK, DomainScanResult, result_from_dict
from sshfp_audit.sshfp import (
    HashType,
    HostKey,
    KeyAlgo,
    SshfpRecord,
    compute_fingerprint,
    key_algo_from_ssh_name,
    match_record,
)

KEY_ALGO_COLUMNS = [KeyAlgo.RESERVED, KeyAlgo.RSA, KeyAlgo.DSA, KeyAlgo.ECDSA, KeyAlgo.ED25519, KeyAlgo.ED448]
HASH_TYPE_COLUMNS = [HashType.SHA1, HashType.SHA256]


class MatchClassKind(enum.Enum):
    FULL = "full"
    PARTIAL = "partial"
    NONE = "none"


@dataclass(frozen=True)
class MatchClass:
    """Fraction of a domain's valid records matched by some collected key."""

    ratio: Fraction
    kind: MatchClassKind

    @classmethod
    def from_ratio(cls, ratio: Fraction) -> "MatchClass":
        if ratio == 1:
            kind = MatchClassKind.FULL
        elif ratio == 0:
            kind = MatchClassKind.NONE
        else:
            kind = MatchClassKind.PARTIAL
        return cls(ratio, kind)


class DnssecStatus(enum.Enum):
    SECURE = "secure"
    INSECURE = "insecure"
    BOGUS = "bogus"
    UNKNOWN = "unknown"


class ChangeKind(enum.Enum):
    UNCHANGED = "unchanged"
    FULL_REPLACEMENT = "full_replacement"
    PARTIAL_REMOVAL = "partial_removal"
    PARTIAL_REPLACEMENT = "partial_replacement"
    ADDITION = "addition"


def classify_domain_match(
    records: list[SshfpRecord], keys: Iterable[HostKey]
) -> MatchClass:
    """Ratio of records matched by at least one key, over all given records."""
    if not records:
        raise ValueError("records must be non-empty")
    keys = list(keys)
    matched = sum(
        1 for r in records if any(match_record(r, k).matched for k in keys)
    )
    return MatchClass.from_ratio(Fraction(matched, len(records)))


def dnssec_status(
    plain: Optional[DnsLookupResult], validating: Optional[DnsLookupResult]
) -> DnssecStatus:
    """Judge record-set authenticity from the two resolver paths.

    SECURE needs a validating-path NOERROR with the AD flag set. BOGUS is a
    validating-path SERVFAIL while the plain path answered, which is how a
    validating resolver reports signature failure.
    """
    if validating is None:
        return DnssecStatus.UNKNOWN
    if validating.outcome is Outcome.NOERROR:
        return DnssecStatus.SECURE if validating.ad_flag else DnssecStatus.INSECURE
    if (
        validating.outcome is Outcome.SERVFAIL
        and plain is not None
        and plain.outcome is Outcome.NOERROR
    ):
        return DnssecStatus.BOGUS
    return DnssecStatus.UNKNOWN


def diff_record_sets(old: set[SshfpRecord], new: set[SshfpRecord]) -> ChangeKind:
    """Classify how a domain's record set changed between two observations."""
    if old == new:
        return ChangeKind.UNCHANGED
    if not (old & new) and old and new:
        return ChangeKind.FULL_REPLACEMENT
    if new < old:
        return ChangeKind.PARTIAL_REMOVAL
    if old < new:
        return ChangeKind.ADDITION
    return ChangeKind.PARTIAL_REPLACEMENT


@dataclass
class ScanReport:
    """Aggregated statistics over one or more scan logs."""

    total_results: int = 0
    schema_errors: int = 0
    status_counts: dict[str, int] = field(default_factory=dict)
    unique_domains: int = 0
    domains_with_records: int = 0
    domains_with_valid_records: int = 0
    domains_ssh_reached: int = 0
    hosts_contacted: int = 0
    hosts_reached: int = 0
    records_total: int = 0
    records_valid: int = 0
    records_invalid: int = 0
    invalid_reason_counts: dict[str, int] = field(default_factory=dict)
    dns_key_algo: dict[int, int] = field(default_factory=dict)
    dns_hash_type: dict[int, int] = field(default_factory=dict)
    ssh_key_algo: dict[int, int] = field(default_factory=dict)
    ssh_hash_type: dict[int, int] = field(default_factory=dict)
    matching_key_algo: dict[int, int] = field(default_factory=dict)
    matching_hash_type: dict[int, int] = field(default_factory=dict)
    mismatching_key_algo: dict[int, int] = field(default_factory=dict)
    mismatching_hash_type: dict[int, int] = field(default_factory=dict)
    match_class_counts: dict[str, int] = field(default_factory=dict)
    match_ratio_bins: list[int] = field(default_factory=lambda: [0] * 10)
    match_ratios: dict[str, str] = field(default_factory=dict)
    dnssec_domains: dict[str, int] = field(default_factory=dict)
    dnssec_records: dict[str, int] = field(default_factory=dict)
    dnssec_record_sets: dict[str, int] = field(default_factory=dict)
    dnssec_hosts: dict[str, int] = field(default_factory=dict)
    duplicate_clusters: list[tuple[str, list[str]]] = field(default_factory=list)
    change_events: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        data = {
            "total_results": self.total_results,
            "schema_errors": self.schema_errors,
            "status_counts": dict(sorted(self.status_counts.items())),
            "unique_domains": self.unique_domains,
            "domains_with_records": self.domains_with_records,
            "domains_with_valid_records": self.domains_with_valid_records,
            "domains_ssh_reached": self.domains_ssh_reached,
            "hosts_contacted": self.hosts_contacted,
            "hosts_reached": self.hosts_reached,
            "records_total": self.records_total,
            "records_valid": self.records_valid,
            "records_invalid": self.records_invalid,
            "invalid_reason_counts": dict(sorted(self.invalid_reason_counts.items())),
            "match_class_counts": dict(sorted(self.match_class_counts.items())),
            "match_ratio_bins": self.match_ratio_bins,
            "match_ratios": dict(sorted(self.match_ratios.items())),
            "dnssec_domains": dict(sorted(self.dnssec_domains.items())),
            "dnssec_records": dict(sorted(self.dnssec_records.items())),
            "dnssec_record_sets": dict(sorted(self.dnssec_record_sets.items())),
            "dnssec_hosts": dict(sorted(self.dnssec_hosts.items())),
            "duplicate_clusters": [
                {"fingerprint": fp, "domains": domains} for fp, domains in self.duplicate_clusters
            ],
            "change_events": dict(sorted(self.change_events.items())),
        }
        for name, hist in (
            ("dns", (self.dns_key_algo, self.dns_hash_type)),
            ("ssh", (self.ssh_key_algo, self.ssh_hash_type)),
            ("matching", (self.matching_key_algo, self.matching_hash_type)),
            ("mismatching", (self.mismatching_key_algo, self.mismatching_hash_type)),
        ):
            key_algo, hash_type = hist
            data[f"{name}_key_algo"] = {str(k): v for k, v in sorted(key_algo.items())}
            data[f"{name}_hash_type"] = {str(k): v for k, v in sorted(hash_type.items())}
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _bump(hist: dict, key, n: int = 1) -> None:
    hist[key] = hist.get(key, 0) + n


def read_log_tolerant(path: str | Path) -> tuple[list[DomainScanResult], int]:
    """Read a log, counting and skipping schema-violating lines."""
    results = []
    errors = 0
    with open(path, encoding="utf-8") as stream:
        for line in stream:
            line = line.strip()
            if not line:
                continue
            try:
                results.append(result_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError):
                errors += 1
    return results, errors


def _ssh_fingerprints(result: DomainScanResult) -> list[tuple[str, HostKey, int, bytes]]:
    """Server-side fingerprints: one per (address, key, hash type)."""
    out = []
    for entry in result.keyscans:
        for key in entry.keys:
            for hash_type in HASH_TYPE_COLUMNS:
                out.append(
                    (entry.address, key, int(hash_type), compute_fingerprint(key.blob, hash_type))
                )
    return out


def aggregate_stats(
    results: Iterable[DomainScanResult], schema_errors: int = 0
) -> ScanReport:
    """Fold a result stream into a ScanReport.

    Deterministic: identical logs yield identical reports. Domain-level
    statistics use each domain's first observation; record-set change events
    use all observations in stream order.
    """
    report = ScanReport(schema_errors=schema_errors)
    first_seen: set[str] = set()
    record_set_history: dict[str, list[frozenset[SshfpRecord]]] = {}
    cluster_map: dict[str, set[str]] = {}

    for result in results:
        report.total_results += 1
        _bump(report.status_counts, result.status)

        valid_records = result.valid_records()
        if valid_records:
            history_key = result.registrable_domain or result.domain
            record_set_history.setdefault(history_key, []).append(frozenset(valid_records))

        if result.domain in first_seen:
            continue
        first_seen.add(result.domain)

        records = result.records
        if records:
            report.domains_with_records += 1
        report.records_total += len(records)
        for record, verdict in zip(records, result.record_verdicts):
            if verdict is None:
                report.records_valid += 1
                _bump(report.dns_key_algo, int(record.key_algo))
                _bump(report.dns_hash_type, int(record.hash_type))
                cluster_map.setdefault(record.fingerprint.hex(), set()).add(result.domain)
            else:
                report.records_invalid += 1
                _bump(report.invalid_reason_counts, verdict.value)
        if valid_records:
            report.domains_with_valid_records += 1

        report.hosts_contacted += len(result.keyscans)
        reached_hosts = [entry for entry in result.keyscans if entry.keys]
        report.hosts_reached += len(reached_hosts)

        all_keys = result.all_keys()
        if all_keys:
            report.domains_ssh_reached += 1
            if valid_records:
                match_class = classify_domain_match(valid_records, all_keys)
                _bump(report.match_class_counts, match_class.kind.value)
                report.match_ratios[result.domain] = (
                    f"{match_class.ratio.numerator}/{match_class.ratio.denominator}"
                )
                bin_index = min(9, int(match_class.ratio * 10))
                report.match_ratio_bins[bin_index] += 1

        # SSH-side fingerprints split into matching and mismatching against
        # the domain's valid DNS records; matching + mismatching = SSH total.
        dns_set = {
            (int(r.key_algo), int(r.hash_type), r.fingerprint) for r in valid_records
        }
        for _address, key, hash_type, digest in _ssh_fingerprints(result):
            code = key_algo_from_ssh_name(key.algo_name)
            code = int(code) if code is not None else -1
            _bump(report.ssh_key_algo, code)
            _bump(report.ssh_hash_type, hash_type)
            if (code, hash_type, digest) in dns_set:
                _bump(report.matching_key_algo, code)
                _bump(report.matching_hash_type, hash_type)
            else:
                _bump(report.mismatching_key_algo, code)
                _bump(report.mismatching_hash_type, hash_type)

        if result.validating_lookup is not None or result.status == STATUS_OK:
            status = dnssec_status(result.sshfp_lookup, result.validating_lookup)
            _bump(report.dnssec_domains, status.value)
            _bump(report.dnssec_records, status.value, len(valid_records))
            if valid_records:
                _bump(report.dnssec_record_sets, status.value)
            _bump(report.dnssec_hosts, status.value, len(reached_hosts))

    report.unique_domains = len(first_seen)
    report.duplicate_clusters = duplicate_fingerprint_clusters_from_map(cluster_map)

    for history in record_set_history.values():
        for old, new in zip(history, history[1:]):
            kind = diff_record_sets(set(old), set(new))
            if kind is not ChangeKind.UNCHANGED:
                _bump(report.change_events, kind.value)
    return report


def duplicate_fingerprint_clusters_from_map(
    cluster_map: dict[str, set[str]]
) -> list[tuple[str, list[str]]]:
    clusters = [
        (fp, sorted(domains)) for fp, domains in cluster_map.items() if len(domains) >= 2
    ]
    clusters.sort(key=lambda item: (-len(item[1]), item[0]))
    return clusters


def duplicate_fingerprint_clusters(
    results: Iterable[DomainScanResult],
) -> list[tuple[str, list[str]]]:
    """Group domains sharing exact fingerprint bytes; clusters of size >= 2."""
    cluster_map: dict[str, set[str]] = {}
    for result in results:
        for record in result.valid_records():
            cluster_map.setdefault(record.fingerprint.hex(), set()).add(result.domain)
    return duplicate_fingerprint_clusters_from_map(cluster_map)


def render_tables(report: ScanReport) -> str:
    """Aligned plain-text tables for the report."""
    lines = []
    lines.append("Population")
    lines.append(f"  results                 {report.total_results}")
    lines.append(f"  schema errors           {report.schema_errors}")
    lines.append(f"  unique domains          {report.unique_domains}")
    lines.append(f"  domains with records    {report.domains_with_records}")
    lines.append(f"  domains with valid recs {report.domains_with_valid_records}")
    lines.append(f"  domains SSH reached     {report.domains_ssh_reached}")
    lines.append(f"  hosts contacted/reached {report.hosts_contacted}/{report.hosts_reached}")
    lines.append(f"  records valid/invalid   {report.records_valid}/{report.records_invalid}")
    lines.append("")
    lines.append("Status counts")
    for status, count in sorted(report.status_counts.items()):
        lines.append(f"  {status:<24}{count}")
    lines.append("")

    algo_names = [a.name for a in KEY_ALGO_COLUMNS]
    hash_names = [h.name for h in HASH_TYPE_COLUMNS]
    header = f"{'Data From':<16}" + "".join(f"{n:>10}" for n in algo_names + hash_names)
    lines.append("Key algorithm and hash type distribution")
    lines.append(header)

    def row(label: str, key_hist: dict[int, int], hash_hist: dict[int, int]) -> str:
        cells = [key_hist.get(int(a), 0) for a in KEY_ALGO_COLUMNS]
        cells += [hash_hist.get(int(h), 0) for h in HASH_TYPE_COLUMNS]
        return f"{label:<16}" + "".join(f"{c:>10}" for c in cells)

    lines.append(row("DNS", report.dns_key_algo, report.dns_hash_type))
    lines.append(row("SSH", report.ssh_key_algo, report.ssh_hash_type))
    lines.append(row("- Matching", report.matching_key_algo, report.matching_hash_type))
    lines.append(row("- Mismatching", report.mismatching_key_algo, report.mismatching_hash_type))
    lines.append("")

    lines.append("Match classes (domains with valid records and reachable SSH)")
    for kind in MatchClassKind:
        lines.append(f"  {kind.value:<10}{report.match_class_counts.get(kind.value, 0)}")
    lines.append("  ratio bins [0-10% .. 90-100%]: " + " ".join(map(str, report.match_ratio_bins)))
    lines.append("")

    lines.append("DNSSEC status")
    header = f"  {'':<10}" + "".join(f"{s.value:>10}" for s in DnssecStatus)
    lines.append(header)
    for label, split in (
        ("domains", report.dnssec_domains),
        ("rec sets", report.dnssec_record_sets),
        ("records", report.dnssec_records),
        ("hosts", report.dnssec_hosts),
    ):
        cells = "".join(f"{split.get(s.value, 0):>10}" for s in DnssecStatus)
        lines.append(f"  {label:<10}{cells}")
    lines.append("")

    lines.append(f"Duplicate fingerprint clusters (size >= 2): {len(report.duplicate_clusters)}")
    for fp, domains in report.duplicate_clusters[:20]:
        lines.append(f"  {fp[:16]}...  x{len(domains)}: {', '.join(domains[:5])}")
    lines.append("")

    lines.append("Record-set change events")
    for kind in ChangeKind:
        if kind is ChangeKind.UNCHANGED:
            continue
        lines.append(f"  {kind.value:<20}{report.change_events.get(kind.value, 0)}")
    return "\n".join(lines) + "\n"
