"""Registrable-domain (eTLD+1) extraction against a pinned public suffix list.

The list is a snapshot file in the usual PSL format: one rule per line,
comments starting with "//", wildcard rules ("*.ck"), and exception rules
("!www.ck"). The snapshot is never fetched at runtime so that classification
is reproducible.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Optional

DEFAULT_SNAPSHOT = "data/public_suffix_list.dat"


class NoRegistrableDomainError(Exception):
    """The name is itself a public suffix and has no registrable domain."""


class SuffixList:
    def __init__(self, rules: set[str], exceptions: set[str]):
        self.rules = rules
        self.exceptions = exceptions

    @classmethod
    def from_file(cls, path: str | Path) -> "SuffixList":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def from_text(cls, text: str) -> "SuffixList":
        rules: set[str] = set()
        exceptions: set[str] = set()
        for line in text.splitlines():
            line = line.strip().lower()
            if not line or line.startswith("//"):
                continue
            # Private-section markers and anything after whitespace are ignored.
            line = line.split()[0]
            if line.startswith("!"):
                exceptions.add(line[1:])
            else:
                rules.add(line)
        return cls(rules, exceptions)

    @classmethod
    def bundled(cls) -> "SuffixList":
        text = (
            resources.files("sshfp_audit").joinpath(DEFAULT_SNAPSHOT).read_text(encoding="utf-8")
        )
        return cls.from_text(text)

    def public_suffix(self, name: str) -> str:
        """Longest matching public suffix of a normalized name.

        Exception rules beat wildcard rules; an unlisted TLD matches the
        implicit "*" default rule.
        """
        labels = name.split(".")
        match_len = 0
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            wildcard = ".".join(["*"] + labels[i + 1 :]) if i + 1 <= len(labels) else None
            if candidate in self.exceptions:
                # The exception's suffix is the rule minus its first label.
                return ".".join(labels[i + 1 :])
            if candidate in self.rules:
                match_len = max(match_len, len(labels) - i)
            if wildcard and wildcard in self.rules:
                match_len = max(match_len, len(labels) - i)
        if match_len == 0:
            match_len = 1  # implicit "*" rule
        return ".".join(labels[len(labels) - match_len :])


def registrable_domain(name: str, psl: SuffixList) -> str:
    """Public suffix plus the single label immediately below it."""
    suffix = psl.public_suffix(name)
    if name == suffix:
        raise NoRegistrableDomainError(f"{name!r} is a public suffix")
    labels = name.split(".")
    suffix_len = len(suffix.split(".")) if suffix else 0
    return ".".join(labels[len(labels) - suffix_len - 1 :])


def load(path: Optional[str | Path] = None) -> SuffixList:
    return SuffixList.from_file(path) if path else SuffixList.bundled()
