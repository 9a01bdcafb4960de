"""DNS wire format and stub client behavior against the in-process server."""

import pytest

from mockdns import MockDnsServer, Zone

from sshfp_audit import dnswire
from sshfp_audit.dnsclient import (
    Outcome,
    Qtype,
    ResolverConfig,
    classify_response,
    query_a,
    query_sshfp,
)
from sshfp_audit.sshfp import SshfpRecord


@pytest.fixture(scope="module")
def zone():
    zone = Zone()
    zone.add_sshfp("good.example", SshfpRecord(4, 2, b"\x01" * 32))
    zone.add_sshfp("good.example", SshfpRecord(4, 1, b"\x02" * 20))
    zone.add_sshfp("good.example", SshfpRecord(1, 2, b"\x03" * 32))
    zone.add_a("good.example", "192.0.2.1")
    zone.add_a("good.example", "192.0.2.1")  # duplicate on purpose
    zone.add_a("good.example", "192.0.2.2")
    zone.add_a("nosshfp.example", "192.0.2.9")
    zone.behavior["missing.example"] = "nxdomain"
    zone.behavior["lame.example"] = "servfail"
    zone.behavior["dead.example"] = "timeout"
    zone.behavior["mangled.example"] = "broken"
    for i in range(12):
        zone.add_sshfp("big.example", SshfpRecord(4, 2, bytes([i]) * 32))
    zone.truncate.add("big.example")
    zone.secure.add("good.example")
    zone.bogus.add("forged.example")
    zone.add_sshfp("forged.example", SshfpRecord(4, 2, b"\x0f" * 32))
    return zone


@pytest.fixture(scope="module")
def plain(zone):
    with MockDnsServer(zone) as server:
        yield server


@pytest.fixture(scope="module")
def validating(zone):
    with MockDnsServer(zone, validating=True) as server:
        yield server


class TestWire:
    def test_name_roundtrip(self):
        wire = dnswire.encode_name("a.example.com")
        name, offset = dnswire._decode_name(wire, 0)
        assert name == "a.example.com"
        assert offset == len(wire)

    def test_root_name(self):
        assert dnswire.encode_name(".") == b"\x00"
        assert dnswire.encode_name("") == b"\x00"

    def test_compression_pointer(self):
        # "example.com" at offset 0, then a pointer back to it.
        raw = dnswire.encode_name("example.com") + b"\xc0\x00"
        name, offset = dnswire._decode_name(raw, len(raw) - 2)
        assert name == "example.com"
        assert offset == len(raw)

    def test_pointer_loop_rejected(self):
        with pytest.raises(dnswire.DnsDecodeError):
            dnswire._decode_name(b"\xc0\x00", 0)

    def test_query_message_parses(self):
        query = dnswire.build_query(0x1234, "example.com", dnswire.TYPE_SSHFP, edns_do=True)
        message = dnswire.parse_message(query)
        assert message.qid == 0x1234
        assert message.question == [("example.com", dnswire.TYPE_SSHFP, dnswire.CLASS_IN)]
        assert not message.is_response
        opt = [rr for rr in message.additional if rr.rtype == dnswire.TYPE_OPT]
        assert len(opt) == 1
        assert opt[0].ttl & dnswire.EDNS_DO

    def test_truncated_input_rejected(self):
        query = dnswire.build_query(1, "example.com", dnswire.TYPE_A)
        with pytest.raises(dnswire.DnsDecodeError):
            dnswire.parse_message(query[:8])


class TestClassify:
    def test_mapping(self):
        assert classify_response(dnswire.RCODE_NOERROR) is Outcome.NOERROR
        assert classify_response(dnswire.RCODE_NXDOMAIN) is Outcome.NXDOMAIN
        assert classify_response(dnswire.RCODE_SERVFAIL) is Outcome.SERVFAIL
        assert classify_response(1) is Outcome.BROKEN
        assert classify_response(5) is Outcome.BROKEN


class TestQueries:
    def test_sshfp_noerror(self, plain):
        result = query_sshfp("good.example", plain.endpoint, timeout=2.0)
        assert result.outcome is Outcome.NOERROR
        assert result.qtype is Qtype.SSHFP
        assert sorted((r.key_algo, r.hash_type) for r in result.records) == [
            (1, 2),
            (4, 1),
            (4, 2),
        ]
        assert result.final_name == "good.example"

    def test_sshfp_empty_answer(self, plain):
        result = query_sshfp("nosshfp.example", plain.endpoint, timeout=2.0)
        assert result.outcome is Outcome.NOERROR
        assert result.records == []

    def test_a_deduplicates(self, plain):
        result = query_a("good.example", plain.endpoint, timeout=2.0)
        assert result.outcome is Outcome.NOERROR
        assert result.records == ["192.0.2.1", "192.0.2.2"]

    def test_nxdomain(self, plain):
        result = query_sshfp("missing.example", plain.endpoint, timeout=2.0)
        assert result.outcome is Outcome.NXDOMAIN
        assert result.records == []

    def test_servfail(self, plain):
        assert query_sshfp("lame.example", plain.endpoint, timeout=2.0).outcome is Outcome.SERVFAIL

    def test_timeout_with_retries(self, plain):
        result = query_sshfp("dead.example", plain.endpoint, timeout=0.3, retries=1)
        assert result.outcome is Outcome.TIMEOUT
        # Two attempts of 0.3 s each.
        assert 0.55 <= result.elapsed < 2.0

    def test_broken_reply(self, plain):
        assert query_sshfp("mangled.example", plain.endpoint, timeout=2.0).outcome is Outcome.BROKEN

    def test_tcp_fallback_on_truncation(self, plain):
        result = query_sshfp("big.example", plain.endpoint, timeout=2.0)
        assert result.outcome is Outcome.NOERROR
        assert len(result.records) == 12

    def test_ad_only_on_validating_path(self, plain, validating):
        assert not query_sshfp("good.example", plain.endpoint, timeout=2.0).ad_flag
        assert not query_sshfp(
            "good.example", validating.endpoint, want_dnssec=False, timeout=2.0
        ).ad_flag
        assert query_sshfp(
            "good.example", validating.endpoint, want_dnssec=True, timeout=2.0
        ).ad_flag

    def test_bogus_name_servfails_only_when_validating(self, plain, validating):
        assert query_sshfp("forged.example", plain.endpoint, timeout=2.0).outcome is Outcome.NOERROR
        assert (
            query_sshfp("forged.example", validating.endpoint, want_dnssec=True, timeout=2.0).outcome
            is Outcome.SERVFAIL
        )

    def test_invalid_name_rejected(self, plain):
        with pytest.raises(ValueError):
            query_a("", plain.endpoint)
        with pytest.raises(ValueError):
            query_a("a" * 70 + ".example", plain.endpoint)

    def test_deterministic_records(self, plain):
        first = query_sshfp("good.example", plain.endpoint, timeout=2.0)
        second = query_sshfp("good.example", plain.endpoint, timeout=2.0)
        assert first.records == second.records


class TestResolverConfig:
    def test_identical_endpoints_rejected(self):
        with pytest.raises(ValueError):
            ResolverConfig(("127.0.0.1", 53), ("127.0.0.1", 53))

    def test_identical_endpoints_opt_in(self):
        config = ResolverConfig(("127.0.0.1", 53), ("127.0.0.1", 53), allow_same_endpoint=True)
        assert config.plain_resolver == config.validating_resolver

    def test_bad_timeout(self):
        with pytest.raises(ValueError):
            ResolverConfig(("127.0.0.1", 53), ("127.0.0.2", 53), timeout=0)
