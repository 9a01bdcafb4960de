"""SSH transport wire primitives: data types and unencrypted packet framing.

Covers only what a pre-NEWKEYS key exchange needs: length-prefixed strings,
mpints, name-lists, and the binary packet format without encryption or MAC.
"""

from __future__ import annotations

import os
import socket
import struct

# Transport-layer message numbers used during key exchange.
MSG_DISCONNECT = 1
MSG_KEXINIT = 20
MSG_NEWKEYS = 21
MSG_KEXDH_INIT = 30
MSG_KEXDH_REPLY = 31
MSG_KEX_ECDH_INIT = 30
MSG_KEX_ECDH_REPLY = 31

DISCONNECT_BY_APPLICATION = 11


class SshWireError(Exception):
    """Malformed or truncated SSH wire data."""


def encode_string(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


def encode_name_list(names: list[str]) -> bytes:
    return encode_string(",".join(names).encode("ascii"))


def encode_mpint(value: int) -> bytes:
    if value == 0:
        return encode_string(b"")
    length = (value.bit_length() + 8) // 8  # extra byte keeps the sign bit clear
    return encode_string(value.to_bytes(length, "big"))


class Reader:
    """Sequential reader over an SSH wire buffer."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def remaining(self) -> int:
        return len(self.data) - self.offset

    def read_bytes(self, n: int) -> bytes:
        if self.remaining() < n:
            raise SshWireError(f"need {n} bytes, have {self.remaining()}")
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def read_byte(self) -> int:
        return self.read_bytes(1)[0]

    def read_uint32(self) -> int:
        return struct.unpack(">I", self.read_bytes(4))[0]

    def read_string(self) -> bytes:
        return self.read_bytes(self.read_uint32())

    def read_name_list(self) -> list[str]:
        raw = self.read_string().decode("ascii")
        return raw.split(",") if raw else []

    def read_mpint(self) -> int:
        raw = self.read_string()
        return int.from_bytes(raw, "big", signed=True) if raw else 0


def read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n > 0:
        chunk = sock.recv(n)
        if not chunk:
            raise SshWireError("connection closed mid-read")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def send_packet(sock: socket.socket, payload: bytes) -> None:
    """Frame and send one unencrypted transport packet (block size 8, no MAC)."""
    # packet_length covers padding_length byte + payload + padding; the total
    # including the length field itself must be a multiple of 8, padding >= 4.
    padding = 8 - ((len(payload) + 5) % 8)
    if padding < 4:
        padding += 8
    packet = struct.pack(">IB", len(payload) + padding + 1, padding) + payload + os.urandom(padding)
    sock.sendall(packet)


def recv_packet(sock: socket.socket, max_size: int = 256 * 1024) -> bytes:
    """Receive one unencrypted transport packet and return its payload."""
    (length,) = struct.unpack(">I", read_exact(sock, 4))
    if length < 2 or length > max_size:
        raise SshWireError(f"implausible packet length {length}")
    body = read_exact(sock, length)
    padding = body[0]
    if padding + 1 > length:
        raise SshWireError("padding longer than packet")
    return body[1 : length - padding]


def read_version_line(sock: socket.socket, max_lines: int = 32) -> str:
    """Read the peer's identification string, skipping any pre-banner lines."""
    for _ in range(max_lines):
        line = bytearray()
        while not line.endswith(b"\n"):
            byte = sock.recv(1)
            if not byte:
                raise SshWireError("connection closed before version exchange")
            line += byte
            if len(line) > 1024:
                raise SshWireError("oversized identification line")
        text = line.rstrip(b"\r\n").decode("ascii", "replace")
        if text.startswith("SSH-"):
            return text
    raise SshWireError("no SSH identification line within banner limit")
