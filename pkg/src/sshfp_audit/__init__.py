"""Toolkit for auditing DNS-published SSH host key fingerprints (SSHFP records)."""

from sshfp_audit.sshfp import (
    HashType,
    HostKey,
    KeyAlgo,
    MatchOutcome,
    MatchReason,
    SshfpRecord,
)

__version__ = "0.1.0"

__all__ = [
    "HashType",
    "HostKey",
    "KeyAlgo",
    "MatchOutcome",
    "MatchReason",
    "SshfpRecord",
    "__version__",
]
