"""Decoding SSH public host key blobs and verifying key-exchange signatures."""

from __future__ import annotations

import hashlib
from typing import Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import dsa, ec, ed25519, padding, rsa
from cryptography.hazmat.primitives.asymmetric.utils import encode_dss_signature

from sshfp_audit.sshwire import Reader, SshWireError

_ECDSA_CURVES = {
    "nistp256": (ec.SECP256R1, hashes.SHA256),
    "nistp384": (ec.SECP384R1, hashes.SHA384),
    "nistp521": (ec.SECP521R1, hashes.SHA512),
}

_RSA_SIG_HASHES = {
    "ssh-rsa": hashes.SHA1,
    "rsa-sha2-256": hashes.SHA256,
    "rsa-sha2-512": hashes.SHA512,
}


def decode_public_key(blob: bytes):
    """Decode an SSH public key blob into a cryptography public key object.

    Returns None for algorithms this module cannot decode.
    """
    reader = Reader(blob)
    name = reader.read_string().decode("ascii")
    if name == "ssh-ed25519":
        return ed25519.Ed25519PublicKey.from_public_bytes(reader.read_string())
    if name == "ssh-rsa":
        e = reader.read_mpint()
        n = reader.read_mpint()
        return rsa.RSAPublicNumbers(e, n).public_key()
    if name == "ssh-dss":
        p = reader.read_mpint()
        q = reader.read_mpint()
        g = reader.read_mpint()
        y = reader.read_mpint()
        return dsa.DSAPublicNumbers(
            y, dsa.DSAParameterNumbers(p, q, g)
        ).public_key()
    if name.startswith("ecdsa-sha2-"):
        curve_name = reader.read_string().decode("ascii")
        point = reader.read_string()
        entry = _ECDSA_CURVES.get(curve_name)
        if entry is None:
            return None
        curve_cls, _ = entry
        return ec.EllipticCurvePublicKey.from_encoded_point(curve_cls(), point)
    return None


def verify_signature(key_blob: bytes, sig_blob: bytes, data: bytes) -> Optional[bool]:
    """Verify an SSH signature blob over data with the given host key blob.

    Returns True/False for supported algorithms, None when the algorithm is
    not supported (the caller keeps the key either way).
    """
    try:
        sig_reader = Reader(sig_blob)
        sig_algo = sig_reader.read_string().decode("ascii")
        signature = sig_reader.read_string()
        key = decode_public_key(key_blob)
    except (SshWireError, ValueError, UnicodeDecodeError):
        return False
    if key is None:
        return None
    try:
        if sig_algo == "ssh-ed25519":
            key.verify(signature, data)
        elif sig_algo in _RSA_SIG_HASHES:
            key.verify(signature, data, padding.PKCS1v15(), _RSA_SIG_HASHES[sig_algo]())
        elif sig_algo.startswith("ecdsa-sha2-"):
            curve_name = sig_algo.removeprefix("ecdsa-sha2-")
            entry = _ECDSA_CURVES.get(curve_name)
            if entry is None:
                return None
            _, hash_cls = entry
            rs_reader = Reader(signature)
            r = rs_reader.read_mpint()
            s = rs_reader.read_mpint()
            key.verify(encode_dss_signature(r, s), data, ec.ECDSA(hash_cls()))
        elif sig_algo == "ssh-dss":
            if len(signature) != 40:
                return False
            r = int.from_bytes(signature[:20], "big")
            s = int.from_bytes(signature[20:], "big")
            key.verify(encode_dss_signature(r, s), data, hashes.SHA1())
        else:
            return None
    except InvalidSignature:
        return False
    except (SshWireError, ValueError):
        return False
    return True


def openssh_fingerprint_sha256(blob: bytes) -> str:
    """OpenSSH-style base64 SHA256 fingerprint, for diagnostics only."""
    import base64

    digest = hashlib.sha256(blob).digest()
    return "SHA256:" + base64.b64encode(digest).decode("ascii").rstrip("=")
