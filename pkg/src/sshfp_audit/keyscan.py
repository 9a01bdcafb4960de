"""Collect SSH server host keys via a minimal unauthenticated transport handshake.

One TCP connection is opened per requested host-key algorithm. Each handshake
runs the version exchange, KEXINIT negotiation, and the key exchange far
enough to receive the server's host key blob, then disconnects. Nothing past
NEWKEYS is ever sent: no encryption keys are derived and no authentication is
attempted.
"""

from __future__ import annotations

import enum
import hashlib
import os
import socket
import struct
from dataclasses import dataclass, field
from typing import Optional

from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from sshfp_audit import hostkeys
from sshfp_audit.sshfp import HostKey
from sshfp_audit.sshwire import (
    DISCONNECT_BY_APPLICATION,
    MSG_DISCONNECT,
    MSG_KEXDH_INIT,
    MSG_KEXDH_REPLY,
    MSG_KEXINIT,
    Reader,
    SshWireError,
    encode_mpint,
    encode_name_list,
    encode_string,
    read_version_line,
    recv_packet,
    send_packet,
)

# Identify the scanner and point at a policy page, so operators seeing the
# connection in their logs can find out what it is and opt out.
DEFAULT_CLIENT_VERSION = "SSH-2.0-sshfp_audit_0.1.0 scan-policy: set --policy-url"

DEFAULT_ALGOS = (
    "ssh-dss",
    "ssh-rsa",
    "ecdsa-sha2-nistp256",
    "ecdsa-sha2-nistp384",
    "ecdsa-sha2-nistp521",
    "ssh-ed25519",
)

KEX_CURVE25519 = "curve25519-sha256"
KEX_CURVE25519_LIBSSH = "curve25519-sha256@libssh.org"
KEX_DH_GROUP14 = "diffie-hellman-group14-sha256"
SUPPORTED_KEX = (KEX_CURVE25519, KEX_CURVE25519_LIBSSH, KEX_DH_GROUP14)

# RFC 3526 group 14 (2048-bit MODP), generator 2.
DH_GROUP14_P = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E08"
    "8A67CC74020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B"
    "302B0A6DF25F14374FE1356D6D51C245E485B576625E7EC6F44C42E9"
    "A637ED6B0BFF5CB6F406B7EDEE386BFB5A899FA5AE9F24117C4B1FE6"
    "49286651ECE45B3DC2007CB8A163BF0598DA48361C55D39A69163FA8"
    "FD24CF5F83655D23DCA3AD961C62F356208552BB9ED529077096966D"
    "670C354E4ABC9804F1746C08CA18217C32905E462E36CE3BE39E772C"
    "180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF6955817183995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)
DH_GROUP14_G = 2


class KeyscanStatus(enum.Enum):
    OK = "ok"
    UNSUPPORTED_BY_SERVER = "unsupported_by_server"
    TIMEOUT = "timeout"
    REFUSED = "refused"
    PROTOCOL_ERROR = "protocol_error"


class HandshakeError(Exception):
    """Key exchange failed before the host key could be obtained."""


class UnsupportedByServer(HandshakeError):
    """Server offers no overlap for the requested host-key algorithm."""


class ProtocolError(HandshakeError):
    """Malformed packets or failed negotiation."""


@dataclass(frozen=True)
class KeyscanTarget:
    """One scan target: an address, a port, and the algorithms to request."""

    address: str
    port: int = 22
    algos: tuple[str, ...] = DEFAULT_ALGOS
    timeout: float = 5.0


@dataclass
class HandshakeOutcome:
    """Host key obtained from one handshake, plus the signature check result.

    sig_verified is None when the signature algorithm is unsupported; an
    unverifiable signature does not discard the key.
    """

    key: HostKey
    sig_verified: Optional[bool]
    kex_algo: str


@dataclass
class KeyscanResult:
    target: KeyscanTarget
    keys: list[HostKey] = field(default_factory=list)
    per_algo_status: dict[str, KeyscanStatus] = field(default_factory=dict)
    sig_verified: dict[str, Optional[bool]] = field(default_factory=dict)


def _build_kexinit(kex_algos: list[str], host_key_algos: list[str]) -> bytes:
    ciphers = encode_name_list(["aes128-ctr", "aes256-ctr"])
    macs = encode_name_list(["hmac-sha2-256", "hmac-sha2-512"])
    comp = encode_name_list(["none"])
    lang = encode_name_list([])
    return (
        bytes([MSG_KEXINIT])
        + os.urandom(16)
        + encode_name_list(kex_algos)
        + encode_name_list(host_key_algos)
        + ciphers
        + ciphers
        + macs
        + macs
        + comp
        + comp
        + lang
        + lang
        + b"\x00"
        + struct.pack(">I", 0)
    )


def _parse_kexinit(payload: bytes) -> tuple[list[str], list[str]]:
    reader = Reader(payload)
    if reader.read_byte() != MSG_KEXINIT:
        raise ProtocolError("expected KEXINIT")
    reader.read_bytes(16)
    kex_algos = reader.read_name_list()
    host_key_algos = reader.read_name_list()
    return kex_algos, host_key_algos


def _recv_until(sock: socket.socket, wanted: int) -> bytes:
    """Read packets, skipping transport chatter, until the wanted message type."""
    skippable = {2, 3, 4}  # IGNORE, UNIMPLEMENTED, DEBUG
    for _ in range(16):
        payload = recv_packet(sock)
        if not payload:
            raise ProtocolError("empty packet")
        if payload[0] == wanted:
            return payload
        if payload[0] == MSG_DISCONNECT:
            raise ProtocolError("server disconnected during key exchange")
        if payload[0] not in skippable:
            raise ProtocolError(f"unexpected message {payload[0]} while waiting for {wanted}")
    raise ProtocolError("too many interleaved packets")


def perform_handshake(
    sock: socket.socket,
    host_key_algo: str,
    timeout: float = 5.0,
    client_version: str = DEFAULT_CLIENT_VERSION,
) -> HandshakeOutcome:
    """Run one key exchange on a fresh connection and return the host key.

    Offers exactly one server-host-key algorithm. The session ends with a
    protocol-level disconnect before NEWKEYS; no authentication bytes are sent.
    """
    sock.settimeout(timeout)
    sock.sendall(client_version.encode("ascii") + b"\r\n")
    try:
        server_version = read_version_line(sock)
    except SshWireError as exc:
        raise ProtocolError(str(exc)) from exc
    if not (server_version.startswith("SSH-2.") or server_version.startswith("SSH-1.99")):
        raise ProtocolError(f"unsupported protocol version {server_version!r}")

    our_kexinit = _build_kexinit(list(SUPPORTED_KEX), [host_key_algo])
    send_packet(sock, our_kexinit)
    try:
        server_kexinit = _recv_until(sock, MSG_KEXINIT)
        server_kex, server_host_key_algos = _parse_kexinit(server_kexinit)
    except SshWireError as exc:
        raise ProtocolError(str(exc)) from exc

    if host_key_algo not in server_host_key_algos and not any(
        a.startswith(host_key_algo + "-cert") for a in server_host_key_algos
    ):
        raise UnsupportedByServer(
            f"server offers {server_host_key_algos!r}, not {host_key_algo!r}"
        )
    kex_algo = next((k for k in SUPPORTED_KEX if k in server_kex), None)
    if kex_algo is None:
        raise ProtocolError(f"no key-exchange overlap with server list {server_kex!r}")

    if kex_algo in (KEX_CURVE25519, KEX_CURVE25519_LIBSSH):
        host_key_blob, sig_blob, hash_input_tail = _kex_curve25519(sock)
    else:
        host_key_blob, sig_blob, hash_input_tail = _kex_group14(sock)

    exchange_hash = hashlib.sha256(
        encode_string(client_version.encode("ascii"))
        + encode_string(server_version.encode("ascii"))
        + encode_string(our_kexinit)
        + encode_string(server_kexinit)
        + encode_string(host_key_blob)
        + hash_input_tail
    ).digest()
    sig_verified = hostkeys.verify_signature(host_key_blob, sig_blob, exchange_hash)

    _send_disconnect(sock)
    try:
        key = HostKey.from_blob(host_key_blob)
    except ValueError as exc:
        raise ProtocolError(f"undecodable host key blob: {exc}") from exc
    return HandshakeOutcome(key=key, sig_verified=sig_verified, kex_algo=kex_algo)


def _kex_curve25519(sock: socket.socket) -> tuple[bytes, bytes, bytes]:
    ephemeral = X25519PrivateKey.generate()
    q_c = ephemeral.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    send_packet(sock, bytes([MSG_KEXDH_INIT]) + encode_string(q_c))
    try:
        reply = Reader(_recv_until(sock, MSG_KEXDH_REPLY))
        reply.read_byte()
        host_key_blob = reply.read_string()
        q_s = reply.read_string()
        sig_blob = reply.read_string()
    except SshWireError as exc:
        raise ProtocolError(str(exc)) from exc
    try:
        shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(q_s))
    except ValueError as exc:
        raise ProtocolError(f"invalid server ephemeral key: {exc}") from exc
    secret = int.from_bytes(shared, "big")
    tail = encode_string(q_c) + encode_string(q_s) + encode_mpint(secret)
    return host_key_blob, sig_blob, tail


def _kex_group14(sock: socket.socket) -> tuple[bytes, bytes, bytes]:
    x = int.from_bytes(os.urandom(32), "big") | 1
    e = pow(DH_GROUP14_G, x, DH_GROUP14_P)
    send_packet(sock, bytes([MSG_KEXDH_INIT]) + encode_mpint(e))
    try:
        reply = Reader(_recv_until(sock, MSG_KEXDH_REPLY))
        reply.read_byte()
        host_key_blob = reply.read_string()
        f = reply.read_mpint()
        sig_blob = reply.read_string()
    except SshWireError as exc:
        raise ProtocolError(str(exc)) from exc
    if not 1 < f < DH_GROUP14_P - 1:
        raise ProtocolError("server DH public value out of range")
    secret = pow(f, x, DH_GROUP14_P)
    tail = encode_mpint(e) + encode_mpint(f) + encode_mpint(secret)
    return host_key_blob, sig_blob, tail


def _send_disconnect(sock: socket.socket) -> None:
    payload = (
        bytes([MSG_DISCONNECT])
        + struct.pack(">I", DISCONNECT_BY_APPLICATION)
        + encode_string(b"key collection complete")
        + encode_string(b"")
    )
    try:
        send_packet(sock, payload)
    except OSError:
        pass


def collect_host_keys(
    target: KeyscanTarget, client_version: str = DEFAULT_CLIENT_VERSION
) -> KeyscanResult:
    """Scan one target, opening one connection per requested algorithm.

    Connections are sequential, so a single scan never holds more than one
    connection to the host at a time. Failures are recorded per algorithm and
    never raise.
    """
    result = KeyscanResult(target=target)
    for algo in target.algos:
        status, outcome = _scan_one(target, algo, client_version)
        result.per_algo_status[algo] = status
        if outcome is not None:
            result.keys.append(outcome.key)
            result.sig_verified[algo] = outcome.sig_verified
    return result


def _scan_one(
    target: KeyscanTarget, algo: str, client_version: str
) -> tuple[KeyscanStatus, Optional[HandshakeOutcome]]:
    try:
        sock = socket.create_connection((target.address, target.port), timeout=target.timeout)
    except (ConnectionRefusedError, OSError) as exc:
        if isinstance(exc, socket.timeout):
            return KeyscanStatus.TIMEOUT, None
        return KeyscanStatus.REFUSED, None
    try:
        outcome = perform_handshake(sock, algo, target.timeout, client_version)
        return KeyscanStatus.OK, outcome
    except UnsupportedByServer:
        return KeyscanStatus.UNSUPPORTED_BY_SERVER, None
    except socket.timeout:
        return KeyscanStatus.TIMEOUT, None
    except (HandshakeError, OSError):
        return KeyscanStatus.PROTOCOL_ERROR, None
    finally:
        try:
            sock.close()
        except OSError:
            pass
