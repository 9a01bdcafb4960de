"""Shared fixtures: generated host keys and server harnesses."""

import warnings

import pytest

from mockssh import MockSshServer, generate_host_key

# DSA host keys are deliberately part of the test matrix (legacy servers
# still present them), so silence the deprecation chatter around generating
# them with modern cryptography releases.
warnings.filterwarnings("ignore", message=".*DSA.*", category=UserWarning)
try:
    from cryptography.utils import CryptographyDeprecationWarning

    warnings.filterwarnings("ignore", category=CryptographyDeprecationWarning)
except ImportError:
    pass


@pytest.fixture(scope="session")
def ed25519_blob():
    _, blob = generate_host_key("ssh-ed25519")
    return blob


@pytest.fixture(scope="session")
def rsa_blob():
    _, blob = generate_host_key("ssh-rsa")
    return blob


@pytest.fixture(scope="session")
def ssh_server():
    """One shared daemon presenting an ed25519 and an RSA host key."""
    with MockSshServer(key_types=("ssh-ed25519", "ssh-rsa")) as server:
        yield server
