"""Stub DNS client for SSHFP and A lookups through configured recursive resolvers.

Queries go over UDP first and fall back to TCP when the response is truncated
(record sets of 8+ SSHFP records exceed 512 bytes). Recursion and DNSSEC
validation are delegated to the resolvers; the client only reports the AD flag
from the validating path.
"""

from __future__ import annotations

import enum
import random
import socket
import struct
import time
from dataclasses import dataclass, field
from typing import Optional, Union

from sshfp_audit import dnswire
from sshfp_audit.sshfp import MalformedRecordError, SshfpRecord, parse_rdata

Endpoint = tuple[str, int]


class Qtype(enum.IntEnum):
    A = dnswire.TYPE_A
    SSHFP = dnswire.TYPE_SSHFP


class Outcome(enum.Enum):
    NOERROR = "noerror"
    NXDOMAIN = "nxdomain"
    SERVFAIL = "servfail"
    TIMEOUT = "timeout"
    BROKEN = "broken"


@dataclass
class DnsLookupResult:
    """Outcome of one SSHFP or A query."""

    domain: str
    qtype: Qtype
    outcome: Outcome
    records: list[Union[SshfpRecord, str]] = field(default_factory=list)
    ad_flag: bool = False
    elapsed: float = 0.0
    final_name: Optional[str] = None


@dataclass
class ResolverConfig:
    """Endpoints for the plain and the DNSSEC-validating recursive resolver."""

    plain_resolver: Endpoint
    validating_resolver: Endpoint
    timeout: float = 5.0
    retries: int = 2
    allow_same_endpoint: bool = False

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.plain_resolver == self.validating_resolver and not self.allow_same_endpoint:
            raise ValueError(
                "plain and validating resolver endpoints are identical; "
                "set allow_same_endpoint to permit this"
            )


def classify_response(rcode: int) -> Outcome:
    """Map a response code to an outcome; anything but 0/3/2 is BROKEN."""
    if rcode == dnswire.RCODE_NOERROR:
        return Outcome.NOERROR
    if rcode == dnswire.RCODE_NXDOMAIN:
        return Outcome.NXDOMAIN
    if rcode == dnswire.RCODE_SERVFAIL:
        return Outcome.SERVFAIL
    return Outcome.BROKEN


def _check_name(domain: str) -> None:
    if not domain or len(domain.rstrip(".")) > 253:
        raise ValueError(f"invalid DNS name {domain!r}")
    for label in domain.rstrip(".").split("."):
        if not 0 < len(label) <= 63:
            raise ValueError(f"invalid DNS name {domain!r}")


def _udp_exchange(query: bytes, qid: int, resolver: Endpoint, timeout: float) -> Optional[bytes]:
    """One UDP round trip; returns raw reply bytes or None on timeout."""
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        sock.settimeout(timeout)
        try:
            sock.sendto(query, resolver)
        except OSError:
            return None
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            sock.settimeout(remaining)
            try:
                data, _addr = sock.recvfrom(65535)
            except socket.timeout:
                return None
            except OSError:
                # ICMP port-unreachable surfaces here as a connection error;
                # treat it like a resolver that never answered.
                return None
            # Replies with a foreign id are stray or spoofed; keep waiting.
            if len(data) >= 2 and struct.unpack(">H", data[:2])[0] == qid:
                return data


def _tcp_exchange(query: bytes, resolver: Endpoint, timeout: float) -> Optional[bytes]:
    try:
        with socket.create_connection(resolver, timeout=timeout) as sock:
            sock.settimeout(timeout)
            sock.sendall(struct.pack(">H", len(query)) + query)
            header = _recv_exact(sock, 2)
            if header is None:
                return None
            (length,) = struct.unpack(">H", header)
            return _recv_exact(sock, length)
    except (socket.timeout, OSError):
        return None


def _recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    chunks = []
    while n > 0:
        try:
            chunk = sock.recv(n)
        except (socket.timeout, OSError):
            return None
        if not chunk:
            return None
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def _lookup(
    domain: str,
    qtype: Qtype,
    resolver: Endpoint,
    want_dnssec: bool,
    timeout: float,
    retries: int,
) -> DnsLookupResult:
    _check_name(domain)
    started = time.monotonic()
    qid = random.randrange(0x10000)
    query = dnswire.build_query(qid, domain, int(qtype), edns_do=want_dnssec)

    raw = None
    for _ in range(max(1, retries + 1)):
        raw = _udp_exchange(query, qid, resolver, timeout)
        if raw is not None:
            break
    if raw is None:
        return DnsLookupResult(domain, qtype, Outcome.TIMEOUT, elapsed=time.monotonic() - started)

    try:
        message = dnswire.parse_message(raw)
    except dnswire.DnsDecodeError:
        return DnsLookupResult(domain, qtype, Outcome.BROKEN, elapsed=time.monotonic() - started)

    if message.truncated:
        raw = _tcp_exchange(query, resolver, timeout)
        if raw is None:
            return DnsLookupResult(
                domain, qtype, Outcome.TIMEOUT, elapsed=time.monotonic() - started
            )
        try:
            message = dnswire.parse_message(raw)
        except dnswire.DnsDecodeError:
            return DnsLookupResult(
                domain, qtype, Outcome.BROKEN, elapsed=time.monotonic() - started
            )

    outcome = classify_response(message.rcode)
    ad_flag = bool(want_dnssec and message.authenticated_data)
    result = DnsLookupResult(
        domain, qtype, outcome, ad_flag=ad_flag, elapsed=time.monotonic() - started
    )
    if outcome is not Outcome.NOERROR:
        return result

    # CNAME chains were already followed by the recursive resolver; accept
    # answers for the canonical name and record the final owner name.
    for rr in message.answers:
        if rr.rclass != dnswire.CLASS_IN or rr.rtype != int(qtype):
            continue
        result.final_name = rr.name.lower()
        if qtype is Qtype.SSHFP:
            try:
                result.records.append(parse_rdata(rr.rdata))
            except MalformedRecordError:
                return DnsLookupResult(
                    domain, qtype, Outcome.BROKEN, elapsed=time.monotonic() - started
                )
        else:
            if len(rr.rdata) != 4:
                return DnsLookupResult(
                    domain, qtype, Outcome.BROKEN, elapsed=time.monotonic() - started
                )
            address = socket.inet_ntoa(rr.rdata)
            if address not in result.records:
                result.records.append(address)
    return result


def query_sshfp(
    domain: str,
    resolver: Endpoint,
    want_dnssec: bool = False,
    timeout: float = 5.0,
    retries: int = 2,
) -> DnsLookupResult:
    """Query the SSHFP record set for a domain through the given resolver."""
    return _lookup(domain, Qtype.SSHFP, resolver, want_dnssec, timeout, retries)


def query_a(
    domain: str, resolver: Endpoint, timeout: float = 5.0, retries: int = 2
) -> DnsLookupResult:
    """Query the IPv4 address set for a domain; duplicates are removed in order."""
    return _lookup(domain, Qtype.A, resolver, False, timeout, retries)
