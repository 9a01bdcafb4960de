"""Pipeline stage tests: ingestion, normalization, rate limiting, scanning."""

import io
import threading
import time

import pytest

from mockdns import MockDnsServer, Zone
from mockssh import MockSshServer

from sshfp_audit import scanlog
from sshfp_audit.dnsclient import ResolverConfig
from sshfp_audit.pipeline import (
    Dedup,
    InvalidNameError,
    RateLimiter,
    ScanConfig,
    ingest,
    is_wildcard,
    normalize_domain,
    rate_limited_acquire,
    run_scan,
    scan_domain,
)
from sshfp_audit.sshfp import HostKey, SshfpRecord, generate_records


class TestNormalize:
    def test_lowercase_and_trailing_dot(self):
        assert normalize_domain("Example.COM.") == "example.com"
        assert normalize_domain("  host.example.org\t") == "host.example.org"

    def test_wildcard_label_allowed(self):
        assert normalize_domain("*.example.com") == "*.example.com"

    @pytest.mark.parametrize(
        "name",
        [
            "",
            ".",
            "..",
            "a..b",
            ".example.com",
            "exämple.com",
            "exa mple.com",
            "a" * 64 + ".com",
            ("a." * 130) + "com",
        ],
    )
    def test_rejected(self, name):
        with pytest.raises(InvalidNameError):
            normalize_domain(name)

    def test_punycode_passes(self):
        assert normalize_domain("xn--bcher-kva.example") == "xn--bcher-kva.example"


class TestWildcard:
    def test_detection(self):
        assert is_wildcard("*.example.com")
        assert not is_wildcard("www.example.com")
        assert not is_wildcard("a.*.example.com")


class TestIngest:
    def test_plain_lines(self):
        stream = io.StringIO("a.example\n\nb.example\n")
        assert list(ingest(stream)) == ["a.example", "b.example"]

    def test_ranked_lines(self):
        stream = io.StringIO("1,a.example\n2,b.example\n")
        assert list(ingest(stream)) == ["a.example", "b.example"]

    def test_mixed_and_crlf(self):
        stream = io.StringIO("1,a.example\r\nplain.example\r\n")
        assert list(ingest(stream)) == ["a.example", "plain.example"]

    def test_comma_in_name_not_a_rank(self):
        # Only a leading all-digit field is treated as a rank.
        stream = io.StringIO("weird,name.example\n")
        assert list(ingest(stream)) == ["weird,name.example"]

    def test_from_file(self, tmp_path):
        path = tmp_path / "names.txt"
        path.write_text("5,x.example\ny.example\n", encoding="utf-8")
        assert list(ingest(path)) == ["x.example", "y.example"]


class TestRateLimiter:
    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            RateLimiter(0)
        with pytest.raises(ValueError):
            RateLimiter(-1)

    def test_synthetic_clock_pacing(self):
        # Virtual time: grants are spaced exactly one interval apart.
        now = [0.0]
        slept = []

        def clock():
            return now[0]

        def sleep(duration):
            slept.append(duration)
            now[0] += duration

        limiter = RateLimiter(10.0, clock=clock, sleep=sleep)
        for _ in range(20):
            limiter.acquire()
        # First grant is immediate; every later one waits one interval.
        assert len(slept) == 19
        assert all(abs(d - 0.1) < 1e-9 for d in slept)
        assert abs(now[0] - 1.9) < 1e-9

    def test_batch_acquire_reserves_n_slots(self):
        now = [0.0]

        def clock():
            return now[0]

        def sleep(duration):
            now[0] += duration

        limiter = RateLimiter(10.0, clock=clock, sleep=sleep)
        limiter.acquire(5)
        limiter.acquire()
        assert abs(now[0] - 0.5) < 1e-9

    def test_acquire_rejects_nonpositive(self):
        limiter = RateLimiter(10.0)
        with pytest.raises(ValueError):
            limiter.acquire(0)

    def test_concurrent_acquires_respect_window(self):
        # 50 workers, 500 acquires total at 500/s: any sliding 1 s window
        # must contain at most 500 grants, and the run takes about 1 s.
        limiter = RateLimiter(500.0)
        grants = []
        lock = threading.Lock()

        def worker():
            for _ in range(10):
                rate_limited_acquire(limiter)
                with lock:
                    grants.append(time.monotonic())

        threads = [threading.Thread(target=worker) for _ in range(50)]
        start = time.monotonic()
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        elapsed = time.monotonic() - start
        assert elapsed >= 0.9
        grants.sort()
        for i in range(len(grants)):
            j = i
            while j < len(grants) and grants[j] - grants[i] < 1.0:
                j += 1
            # rate plus the banked burst, plus 1% slack for sleep jitter.
            assert j - i <= 500 + 8 + 5


@pytest.fixture(scope="module")
def testbed():
    """Small zone + daemon for end-to-end pipeline runs."""
    with MockSshServer(key_types=("ssh-ed25519",)) as daemon:
        zone = Zone()
        key = HostKey.from_blob(daemon.blob("ssh-ed25519"))
        for record in generate_records([key]):
            zone.add_sshfp("match.test", record)
        zone.add_a("match.test", "127.0.0.1")
        zone.add_sshfp("norecords-a.test", SshfpRecord(5, 1, b"\x00" * 20))
        # noipv4.test publishes a valid record but has no A records at all.
        zone.add_sshfp("noipv4.test", SshfpRecord(4, 2, b"\x01" * 32))
        zone.behavior["gone.test"] = "nxdomain"
        zone.secure.add("match.test")
        with MockDnsServer(zone) as plain, MockDnsServer(zone, validating=True) as validating:
            yield {
                "daemon": daemon,
                "plain": plain,
                "validating": validating,
            }


def make_config(testbed, tmp_path, **overrides):
    resolver = ResolverConfig(
        plain_resolver=testbed["plain"].endpoint,
        validating_resolver=testbed["validating"].endpoint,
        timeout=2.0,
        retries=1,
    )
    defaults = dict(
        resolver=resolver,
        output_path=str(tmp_path / "out.jsonl"),
        query_workers=4,
        ssh_workers=2,
        qps_limit=500.0,
        keyscan_algos=("ssh-ed25519",),
        keyscan_timeout=2.0,
        ssh_port=testbed["daemon"].port,
    )
    defaults.update(overrides)
    return ScanConfig(**defaults)


class TestScanDomain:
    def test_full_path(self, testbed, tmp_path):
        config = make_config(testbed, tmp_path)
        result = scan_domain("match.test", config)
        assert result.status == scanlog.STATUS_OK
        assert len(result.records) == 2
        assert result.record_verdicts == [None, None]
        assert [entry.address for entry in result.keyscans] == ["127.0.0.1"]
        assert result.keyscans[0].keys[0].blob == testbed["daemon"].blob("ssh-ed25519")
        assert all(m.outcome.matched for m in result.matches)
        assert len(result.matches) == 2
        assert result.validating_lookup is not None
        assert result.validating_lookup.ad_flag

    def test_no_valid_records_stops_before_a_lookup(self, testbed, tmp_path):
        config = make_config(testbed, tmp_path)
        result = scan_domain("norecords-a.test", config)
        assert result.status == scanlog.STATUS_NO_VALID_RECORDS
        assert result.a_lookup is None
        assert result.keyscans == []
        assert result.validating_lookup is None

    def test_no_ipv4_stops_before_keyscan(self, testbed, tmp_path):
        config = make_config(testbed, tmp_path)
        result = scan_domain("noipv4.test", config)
        assert result.status == scanlog.STATUS_NO_IPV4
        assert result.keyscans == []
        assert result.validating_lookup is None

    def test_nxdomain(self, testbed, tmp_path):
        config = make_config(testbed, tmp_path)
        result = scan_domain("gone.test", config)
        assert result.status == "sshfp_nxdomain"
        assert result.a_lookup is None
        assert result.keyscans == []

    def test_no_sshfp_records(self, testbed, tmp_path):
        config = make_config(testbed, tmp_path)
        result = scan_domain("empty.test", config)
        assert result.status == scanlog.STATUS_NO_SSHFP_RECORDS


class TestRunScan:
    def read_results(self, path):
        return list(scanlog.read_log(path))

    def test_one_line_per_name(self, testbed, tmp_path):
        config = make_config(testbed, tmp_path)
        names = ["match.test", "gone.test", "norecords-a.test", "*.wild.test", "bad..name"]
        written = run_scan(config, names)
        assert written == 5
        results = self.read_results(config.output_path)
        statuses = {r.domain: r.status for r in results}
        assert statuses == {
            "match.test": "ok",
            "gone.test": "sshfp_nxdomain",
            "norecords-a.test": "no_valid_records",
            "*.wild.test": "wildcard",
            "bad..name": "invalid_name",
        }

    def test_exact_dedup(self, testbed, tmp_path):
        config = make_config(testbed, tmp_path)
        written = run_scan(config, ["gone.test", "GONE.test.", "gone.test"])
        assert written == 1

    def test_dedup_none_keeps_duplicates(self, testbed, tmp_path):
        config = make_config(testbed, tmp_path, dedup=Dedup.NONE)
        written = run_scan(config, ["gone.test", "gone.test"])
        assert written == 2

    def test_checkpoint_resume_skips_done(self, testbed, tmp_path):
        config = make_config(testbed, tmp_path)
        run_scan(config, ["gone.test"])
        assert (tmp_path / "out.jsonl.checkpoint").read_text().splitlines() == ["gone.test"]
        # Second pass with an overlapping input only adds the new name.
        written = run_scan(config, ["gone.test", "empty.test"])
        assert written == 1
        domains = [r.domain for r in self.read_results(config.output_path)]
        assert domains == ["gone.test", "empty.test"]

    def test_empty_input(self, testbed, tmp_path):
        config = make_config(testbed, tmp_path)
        assert run_scan(config, []) == 0

    def test_no_keyscan_without_valid_records(self, testbed, tmp_path):
        config = make_config(testbed, tmp_path)
        before = testbed["daemon"].connections
        run_scan(config, ["gone.test", "norecords-a.test", "empty.test", "noipv4.test"])
        assert testbed["daemon"].connections == before
        for result in self.read_results(config.output_path):
            assert result.keyscans == []

    def test_registrable_dedup(self, testbed, tmp_path):
        psl_path = tmp_path / "psl.dat"
        psl_path.write_text("test\n", encoding="utf-8")
        config = make_config(
            testbed, tmp_path, dedup=Dedup.REGISTRABLE, psl_path=str(psl_path)
        )
        written = run_scan(config, ["a.gone.test", "b.gone.test", "gone.test"])
        # All three share the registrable domain gone.test.
        assert written == 1
