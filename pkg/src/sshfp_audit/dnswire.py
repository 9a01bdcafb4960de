"""Minimal DNS message encoding and decoding.

Only what a stub client (and its test server) needs: queries with an optional
EDNS0 OPT record carrying the DO bit, and response parsing with name
decompression. Record data is kept as raw RDATA bytes; interpretation is the
caller's business.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

TYPE_A = 1
TYPE_CNAME = 5
TYPE_AAAA = 28
TYPE_OPT = 41
TYPE_SSHFP = 44
CLASS_IN = 1

RCODE_NOERROR = 0
RCODE_SERVFAIL = 2
RCODE_NXDOMAIN = 3

FLAG_QR = 0x8000
FLAG_AA = 0x0400
FLAG_TC = 0x0200
FLAG_RD = 0x0100
FLAG_RA = 0x0080
FLAG_AD = 0x0020

EDNS_DO = 0x8000


class DnsDecodeError(Exception):
    """Message bytes could not be decoded."""


@dataclass(frozen=True)
class ResourceRecord:
    name: str
    rtype: int
    rclass: int
    ttl: int
    rdata: bytes


@dataclass
class DnsMessage:
    qid: int
    flags: int
    question: list[tuple[str, int, int]] = field(default_factory=list)
    answers: list[ResourceRecord] = field(default_factory=list)
    authority: list[ResourceRecord] = field(default_factory=list)
    additional: list[ResourceRecord] = field(default_factory=list)

    @property
    def rcode(self) -> int:
        return self.flags & 0x000F

    @property
    def is_response(self) -> bool:
        return bool(self.flags & FLAG_QR)

    @property
    def truncated(self) -> bool:
        return bool(self.flags & FLAG_TC)

    @property
    def authenticated_data(self) -> bool:
        return bool(self.flags & FLAG_AD)


def encode_name(name: str) -> bytes:
    if name in ("", "."):
        return b"\x00"
    out = bytearray()
    for label in name.rstrip(".").split("."):
        raw = label.encode("ascii")
        if not 0 < len(raw) < 64:
            raise ValueError(f"bad label {label!r} in {name!r}")
        out.append(len(raw))
        out += raw
    out.append(0)
    if len(out) > 255:
        raise ValueError(f"name {name!r} exceeds 255 wire octets")
    return bytes(out)


def build_query(
    qid: int, name: str, qtype: int, rd: bool = True, edns_do: bool = False, udp_payload: int = 4096
) -> bytes:
    flags = FLAG_RD if rd else 0
    arcount = 1 if edns_do else 0
    header = struct.pack(">HHHHHH", qid, flags, 1, 0, 0, arcount)
    question = encode_name(name) + struct.pack(">HH", qtype, CLASS_IN)
    message = header + question
    if edns_do:
        # OPT pseudo-RR: root name, type 41, class = requestor payload size,
        # TTL carries extended rcode/version/flags with the DO bit.
        message += b"\x00" + struct.pack(">HHIH", TYPE_OPT, udp_payload, EDNS_DO, 0)
    return message


def build_response(
    query: "DnsMessage",
    rcode: int = RCODE_NOERROR,
    answers: list[ResourceRecord] | None = None,
    ad: bool = False,
    tc: bool = False,
    edns: bool = False,
) -> bytes:
    """Encode a response echoing the query's question section (no compression)."""
    answers = answers or []
    flags = FLAG_QR | FLAG_RA | (query.flags & FLAG_RD) | (rcode & 0x0F)
    if ad:
        flags |= FLAG_AD
    if tc:
        flags |= FLAG_TC
    arcount = 1 if edns else 0
    out = bytearray(
        struct.pack(">HHHHHH", query.qid, flags, len(query.question), len(answers), 0, arcount)
    )
    for qname, qtype, qclass in query.question:
        out += encode_name(qname) + struct.pack(">HH", qtype, qclass)
    for rr in answers:
        out += encode_name(rr.name)
        out += struct.pack(">HHIH", rr.rtype, rr.rclass, rr.ttl, len(rr.rdata))
        out += rr.rdata
    if edns:
        out += b"\x00" + struct.pack(">HHIH", TYPE_OPT, 4096, EDNS_DO, 0)
    return bytes(out)


def _decode_name(data: bytes, offset: int) -> tuple[str, int]:
    labels: list[str] = []
    jumps = 0
    end = -1
    while True:
        if offset >= len(data):
            raise DnsDecodeError("name runs past end of message")
        length = data[offset]
        if length & 0xC0 == 0xC0:
            if offset + 1 >= len(data):
                raise DnsDecodeError("truncated compression pointer")
            pointer = ((length & 0x3F) << 8) | data[offset + 1]
            if end < 0:
                end = offset + 2
            offset = pointer
            jumps += 1
            if jumps > 63:
                raise DnsDecodeError("compression pointer loop")
            continue
        if length & 0xC0:
            raise DnsDecodeError(f"unsupported label type {length:#x}")
        offset += 1
        if length == 0:
            break
        if offset + length > len(data):
            raise DnsDecodeError("label runs past end of message")
        labels.append(data[offset : offset + length].decode("ascii", "replace"))
        offset += length
    if end < 0:
        end = offset
    return ".".join(labels), end


def _decode_rr(data: bytes, offset: int) -> tuple[ResourceRecord, int]:
    name, offset = _decode_name(data, offset)
    if offset + 10 > len(data):
        raise DnsDecodeError("truncated resource record header")
    rtype, rclass, ttl, rdlength = struct.unpack(">HHIH", data[offset : offset + 10])
    offset += 10
    if offset + rdlength > len(data):
        raise DnsDecodeError("truncated RDATA")
    rdata = data[offset : offset + rdlength]
    offset += rdlength
    return ResourceRecord(name, rtype, rclass, ttl, rdata), offset


def parse_message(data: bytes) -> DnsMessage:
    if len(data) < 12:
        raise DnsDecodeError(f"message too short: {len(data)} bytes")
    qid, flags, qdcount, ancount, nscount, arcount = struct.unpack(">HHHHHH", data[:12])
    message = DnsMessage(qid=qid, flags=flags)
    offset = 12
    for _ in range(qdcount):
        qname, offset = _decode_name(data, offset)
        if offset + 4 > len(data):
            raise DnsDecodeError("truncated question")
        qtype, qclass = struct.unpack(">HH", data[offset : offset + 4])
        offset += 4
        message.question.append((qname, qtype, qclass))
    for count, section in (
        (ancount, message.answers),
        (nscount, message.authority),
        (arcount, message.additional),
    ):
        for _ in range(count):
            rr, offset = _decode_rr(data, offset)
            section.append(rr)
    return message
