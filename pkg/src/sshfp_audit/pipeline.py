"""Four-stage scan orchestration: query, parse, keyscan + revalidate, output.

Stages are connected by bounded queues and run worker pools; backpressure
propagates upstream when queues fill. The rate limiter and the checkpoint
store are the only cross-worker shared state. Output writing is serialized
through a single writer thread.
"""

from __future__ import annotations

import enum
import queue
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, TextIO

from sshfp_audit import dnsclient, psl as psl_mod, scanlog
from sshfp_audit.dnsclient import Outcome, ResolverConfig
from sshfp_audit.keyscan import (
    DEFAULT_ALGOS,
    DEFAULT_CLIENT_VERSION,
    KeyscanTarget,
    collect_host_keys,
)
from sshfp_audit.psl import NoRegistrableDomainError, SuffixList
from sshfp_audit.scanlog import (
    STATUS_A_PREFIX,
    STATUS_INVALID_NAME,
    STATUS_NO_IPV4,
    STATUS_NO_SSHFP_RECORDS,
    STATUS_NO_VALID_RECORDS,
    STATUS_OK,
    STATUS_SSHFP_PREFIX,
    STATUS_WILDCARD,
    DomainScanResult,
    KeyscanEntry,
    MatchEntry,
)
from sshfp_audit.sshfp import match_record, validate_record


class InvalidNameError(ValueError):
    """Input name cannot be normalized into a DNS name."""


class Dedup(enum.Enum):
    NONE = "none"
    EXACT_NAME = "exact_name"
    REGISTRABLE = "registrable"


@dataclass
class ScanConfig:
    resolver: ResolverConfig
    output_path: str
    query_workers: int = 50
    ssh_workers: int = 10
    qps_limit: float = 200.0
    dedup: Dedup = Dedup.EXACT_NAME
    psl_path: Optional[str] = None
    checkpoint_path: Optional[str] = None
    keyscan_algos: tuple[str, ...] = DEFAULT_ALGOS
    keyscan_timeout: float = 5.0
    ssh_port: int = 22
    client_version: str = DEFAULT_CLIENT_VERSION

    def __post_init__(self) -> None:
        if self.query_workers < 1 or self.ssh_workers < 1:
            raise ValueError("worker counts must be >= 1")
        if self.qps_limit <= 0:
            raise ValueError("qps_limit must be positive")

    @property
    def effective_checkpoint_path(self) -> str:
        return self.checkpoint_path or self.output_path + ".checkpoint"


_ALLOWED_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz0123456789-_*")


def normalize_domain(name: str) -> str:
    """Lowercase, strip one trailing dot, reject empty labels and non-ASCII.

    Internationalized names are accepted only in punycode form; anything
    containing non-ASCII raises InvalidNameError.
    """
    stripped = name.strip()
    if not stripped.isascii():
        raise InvalidNameError(f"non-ASCII name (punycode required): {name!r}")
    lowered = stripped.lower()
    if lowered.endswith("."):
        lowered = lowered[:-1]
    if not lowered or len(lowered) > 253:
        raise InvalidNameError(f"bad name length: {name!r}")
    for label in lowered.split("."):
        if not 0 < len(label) <= 63:
            raise InvalidNameError(f"empty or oversized label in {name!r}")
        if not set(label) <= _ALLOWED_CHARS:
            raise InvalidNameError(f"disallowed characters in {name!r}")
    return lowered


def is_wildcard(name: str) -> bool:
    """True iff the leftmost label is "*" (CT-log wildcard convention)."""
    return name.split(".", 1)[0] == "*"


def ingest(source: str | Path | TextIO) -> Iterator[str]:
    """Yield raw names from a file path or open stream.

    Lines of the form "rank,domain" (ranked lists) are stripped of the rank.
    Mixed CR/LF endings are tolerated.
    """
    if hasattr(source, "read"):
        yield from _ingest_stream(source)  # type: ignore[arg-type]
    else:
        with open(source, encoding="utf-8") as stream:
            yield from _ingest_stream(stream)


def _ingest_stream(stream: TextIO) -> Iterator[str]:
    for line in stream:
        name = line.strip()
        if not name:
            continue
        head, sep, tail = name.partition(",")
        if sep and head.isdigit() and tail:
            name = tail.strip()
        yield name


class RateLimiter:
    """Paces operations so the trailing rate never exceeds the limit.

    Each acquire reserves a slot 1/rate after the previous one. Up to `burst`
    unused slots are banked, which absorbs sleep() overshoot without letting
    the trailing-window rate exceed the limit by more than that small burst;
    the long-run average rate is exactly the configured limit.
    """

    def __init__(self, rate_per_second: float, clock=time.monotonic, sleep=time.sleep,
                 burst: int = 8):
        if rate_per_second <= 0:
            raise ValueError("rate must be positive")
        self.interval = 1.0 / rate_per_second
        self._max_credit = burst * self.interval
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_free = clock()

    def acquire(self, n: int = 1) -> None:
        if n < 1:
            raise ValueError("n must be >= 1")
        with self._lock:
            now = self._clock()
            if self._next_free < now - self._max_credit:
                self._next_free = now - self._max_credit
            wait = self._next_free - now
            self._next_free += n * self.interval
        if wait > 0:
            self._sleep(wait)


def rate_limited_acquire(limiter: RateLimiter, n: int = 1) -> None:
    """Block until n more operations keep the trailing rate within the limit."""
    limiter.acquire(n)


class _Checkpoint:
    """Append-only store of completed input names; enables resume."""

    def __init__(self, path: str):
        self.path = path
        self.done: set[str] = set()
        if Path(path).exists():
            with open(path, encoding="utf-8") as stream:
                self.done = {line.strip() for line in stream if line.strip()}
        self._stream = open(path, "a", encoding="utf-8")

    def mark(self, name: str) -> None:
        self.done.add(name)
        self._stream.write(name + "\n")
        self._stream.flush()

    def close(self) -> None:
        self._stream.close()


def scan_domain(
    domain: str,
    config: ScanConfig,
    limiter: Optional[RateLimiter] = None,
    suffix_list: Optional[SuffixList] = None,
) -> DomainScanResult:
    """Run the full per-domain path for one already-normalized name.

    Filtering order: SSHFP presence, record validity, A presence, keyscan,
    validating re-query. No SSH connection is attempted unless at least one
    valid SSHFP record and one IPv4 address were found.
    """
    partial = scan_domain_dns_only(domain, config, limiter, suffix_list)
    if isinstance(partial, DomainScanResult):
        return partial
    return _ssh_stage(partial, config, limiter)


def run_scan(
    config: ScanConfig,
    names: Iterable[str],
    progress: Optional[Callable[[int], None]] = None,
) -> int:
    """Scan a stream of names, appending one JSON line per name to the output.

    Per-domain failures never abort the run; completed names are checkpointed
    so an interrupted scan resumes without re-querying them. Returns the
    number of result lines written in this invocation.
    """
    limiter = RateLimiter(config.qps_limit)
    suffix_list = psl_mod.load(config.psl_path)
    checkpoint = _Checkpoint(config.effective_checkpoint_path)

    name_q: queue.Queue = queue.Queue(maxsize=1000)
    ssh_q: queue.Queue = queue.Queue(maxsize=200)
    out_q: queue.Queue = queue.Queue(maxsize=1000)

    written = 0
    write_lock = threading.Lock()

    def writer() -> None:
        nonlocal written
        with open(config.output_path, "a", encoding="utf-8") as stream:
            while True:
                item = out_q.get()
                if item is None:
                    return
                scanlog.write_result(stream, item)
                checkpoint.mark(item.domain)
                with write_lock:
                    written += 1
                    if progress:
                        progress(written)

    def query_worker() -> None:
        while True:
            domain = name_q.get()
            if domain is None:
                return
            result = scan_domain_dns_only(domain, config, limiter, suffix_list)
            if isinstance(result, DomainScanResult):
                out_q.put(result)
            else:
                ssh_q.put(result)

    def ssh_worker() -> None:
        while True:
            item = ssh_q.get()
            if item is None:
                return
            out_q.put(_ssh_stage(item, config, limiter))

    writer_thread = threading.Thread(target=writer, name="writer", daemon=True)
    query_threads = [
        threading.Thread(target=query_worker, name=f"query-{i}", daemon=True)
        for i in range(config.query_workers)
    ]
    ssh_threads = [
        threading.Thread(target=ssh_worker, name=f"ssh-{i}", daemon=True)
        for i in range(config.ssh_workers)
    ]
    writer_thread.start()
    for thread in query_threads + ssh_threads:
        thread.start()

    seen: set[str] = set()
    try:
        for raw in names:
            try:
                domain = normalize_domain(raw)
            except InvalidNameError:
                out_q.put(
                    DomainScanResult(
                        domain=raw.strip(),
                        status=STATUS_INVALID_NAME,
                        started=scanlog.now_iso(),
                        finished=scanlog.now_iso(),
                    )
                )
                continue
            if is_wildcard(domain):
                out_q.put(
                    DomainScanResult(
                        domain=domain,
                        status=STATUS_WILDCARD,
                        started=scanlog.now_iso(),
                        finished=scanlog.now_iso(),
                    )
                )
                continue
            if config.dedup is not Dedup.NONE:
                key = domain
                if config.dedup is Dedup.REGISTRABLE:
                    try:
                        key = psl_mod.registrable_domain(domain, suffix_list)
                    except NoRegistrableDomainError:
                        pass
                if key in seen:
                    continue
                seen.add(key)
            if domain in checkpoint.done:
                continue
            name_q.put(domain)
    finally:
        for _ in query_threads:
            name_q.put(None)
        for thread in query_threads:
            thread.join()
        for _ in ssh_threads:
            ssh_q.put(None)
        for thread in ssh_threads:
            thread.join()
        out_q.put(None)
        writer_thread.join()
        checkpoint.close()
    return written


def scan_domain_dns_only(domain, config, limiter, suffix_list):
    """Run SSHFP lookup, validation, and A lookup; defer keyscan to the SSH stage.

    Returns a DomainScanResult when the name fails a DNS-stage filter, or a
    (result, addresses) tuple for the SSH stage.
    """
    resolver = config.resolver
    result = DomainScanResult(domain=domain, status=STATUS_OK, started=scanlog.now_iso())
    if suffix_list is not None:
        try:
            result.registrable_domain = psl_mod.registrable_domain(domain, suffix_list)
        except NoRegistrableDomainError:
            result.registrable_domain = None

    def finish(status: str) -> DomainScanResult:
        result.status = status
        result.finished = scanlog.now_iso()
        return result

    if limiter:
        limiter.acquire()
    sshfp_lookup = dnsclient.query_sshfp(
        domain, resolver.plain_resolver, timeout=resolver.timeout, retries=resolver.retries
    )
    result.sshfp_lookup = sshfp_lookup
    if sshfp_lookup.outcome is not Outcome.NOERROR:
        return finish(STATUS_SSHFP_PREFIX + sshfp_lookup.outcome.value)
    if not sshfp_lookup.records:
        return finish(STATUS_NO_SSHFP_RECORDS)

    result.record_verdicts = [validate_record(r) for r in result.records]
    if not any(verdict is None for verdict in result.record_verdicts):
        return finish(STATUS_NO_VALID_RECORDS)

    if limiter:
        limiter.acquire()
    a_lookup = dnsclient.query_a(
        domain, resolver.plain_resolver, timeout=resolver.timeout, retries=resolver.retries
    )
    result.a_lookup = a_lookup
    if a_lookup.outcome is not Outcome.NOERROR:
        return finish(STATUS_A_PREFIX + a_lookup.outcome.value)
    addresses = [addr for addr in a_lookup.records if isinstance(addr, str)]
    if not addresses:
        return finish(STATUS_NO_IPV4)
    return (result, addresses)


def _ssh_stage(item, config: ScanConfig, limiter: Optional[RateLimiter]) -> DomainScanResult:
    result, addresses = item
    valid_indices = [i for i, verdict in enumerate(result.record_verdicts) if verdict is None]
    records = result.records
    for address in addresses:
        keyscan = collect_host_keys(
            KeyscanTarget(
                address=address,
                port=config.ssh_port,
                algos=config.keyscan_algos,
                timeout=config.keyscan_timeout,
            ),
            client_version=config.client_version,
        )
        entry = KeyscanEntry(
            address=address,
            per_algo_status=keyscan.per_algo_status,
            keys=keyscan.keys,
            sig_verified=keyscan.sig_verified,
        )
        result.keyscans.append(entry)
        for index in valid_indices:
            for key in keyscan.keys:
                result.matches.append(
                    MatchEntry(
                        record_index=index,
                        address=address,
                        key_algo_name=key.algo_name,
                        outcome=match_record(records[index], key),
                    )
                )
    if limiter:
        limiter.acquire()
    result.validating_lookup = dnsclient.query_sshfp(
        result.domain,
        config.resolver.validating_resolver,
        want_dnssec=True,
        timeout=config.resolver.timeout,
        retries=config.resolver.retries,
    )
    result.status = STATUS_OK
    result.finished = scanlog.now_iso()
    return result
