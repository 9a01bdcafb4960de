"""JSON Lines scan log serialization round trips."""

import json
import struct

import pytest

from sshfp_audit.dnsclient import DnsLookupResult, Outcome, Qtype
from sshfp_audit.keyscan import KeyscanStatus
from sshfp_audit.scanlog import (
    SCHEMA_VERSION,
    DomainScanResult,
    KeyscanEntry,
    MatchEntry,
    read_log,
    result_from_dict,
    result_to_dict,
    write_result,
)
from sshfp_audit.sshfp import (
    HostKey,
    InvalidReason,
    MatchOutcome,
    MatchReason,
    SshfpRecord,
)


def sample_result() -> DomainScanResult:
    name = b"ssh-ed25519"
    blob = struct.pack(">I", len(name)) + name + b"\x11" * 32
    key = HostKey.from_blob(blob)
    record = SshfpRecord(4, 2, b"\x22" * 32)
    result = DomainScanResult(
        domain="host.example",
        status="ok",
        registrable_domain="example",
        started="2026-08-24T00:00:00.000+00:00",
        finished="2026-08-24T00:00:01.000+00:00",
    )
    result.sshfp_lookup = DnsLookupResult(
        domain="host.example",
        qtype=Qtype.SSHFP,
        outcome=Outcome.NOERROR,
        records=[record, SshfpRecord(5, 1, b"\x33" * 20)],
        elapsed=0.012,
        final_name="host.example",
    )
    result.record_verdicts = [None, InvalidReason.UNASSIGNED_KEY_ALGO]
    result.a_lookup = DnsLookupResult(
        domain="host.example",
        qtype=Qtype.A,
        outcome=Outcome.NOERROR,
        records=["198.51.100.5"],
    )
    result.keyscans = [
        KeyscanEntry(
            address="198.51.100.5",
            per_algo_status={
                "ssh-ed25519": KeyscanStatus.OK,
                "ssh-rsa": KeyscanStatus.UNSUPPORTED_BY_SERVER,
            },
            keys=[key],
            sig_verified={"ssh-ed25519": True},
        )
    ]
    result.matches = [
        MatchEntry(
            record_index=0,
            address="198.51.100.5",
            key_algo_name="ssh-ed25519",
            outcome=MatchOutcome(False, MatchReason.DIGEST_MISMATCH, note="digest matches under SHA1"),
        )
    ]
    result.validating_lookup = DnsLookupResult(
        domain="host.example",
        qtype=Qtype.SSHFP,
        outcome=Outcome.NOERROR,
        records=[record],
        ad_flag=True,
    )
    return result


class TestRoundtrip:
    def test_dict_roundtrip(self):
        original = sample_result()
        restored = result_from_dict(result_to_dict(original))
        assert restored.domain == original.domain
        assert restored.status == original.status
        assert restored.registrable_domain == original.registrable_domain
        assert restored.record_verdicts == original.record_verdicts
        assert restored.records == original.records
        assert restored.valid_records() == original.valid_records()
        assert restored.a_lookup.records == ["198.51.100.5"]
        assert restored.keyscans[0].keys[0] == original.keyscans[0].keys[0]
        assert restored.keyscans[0].per_algo_status == original.keyscans[0].per_algo_status
        assert restored.keyscans[0].sig_verified == {"ssh-ed25519": True}
        assert restored.matches[0].outcome.reason is MatchReason.DIGEST_MISMATCH
        assert restored.matches[0].outcome.note == "digest matches under SHA1"
        assert restored.validating_lookup.ad_flag

    def test_schema_version_stamped(self):
        assert result_to_dict(sample_result())["schema"] == SCHEMA_VERSION

    def test_lines_individually_decodable(self, tmp_path):
        path = tmp_path / "log.jsonl"
        with open(path, "w", encoding="utf-8") as stream:
            write_result(stream, sample_result())
            write_result(stream, DomainScanResult(domain="x.example", status="wildcard"))
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        for line in lines:
            json.loads(line)
        results = list(read_log(path))
        assert [r.domain for r in results] == ["host.example", "x.example"]

    def test_strict_reader_raises(self, tmp_path):
        path = tmp_path / "log.jsonl"
        path.write_text("not json\n", encoding="utf-8")
        with pytest.raises(ValueError):
            list(read_log(path))

    def test_all_keys_dedupes_across_addresses(self):
        result = sample_result()
        result.keyscans.append(
            KeyscanEntry(address="198.51.100.6", keys=list(result.keyscans[0].keys))
        )
        assert len(result.all_keys()) == 1
