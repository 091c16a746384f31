import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fairdraw.crypto import KeyPair, derive_seed  # noqa: E402


@pytest.fixture(scope="session")
def ed_keys():
    """Deterministic Ed25519 keys for a small cast."""
    names = ["alice", "bob", "carol", "dave", "mallory"]
    return {n: KeyPair.generate("ed25519", derive_seed("test-key", n)) for n in names}


_REPORT: dict[str, list[str]] = {}


@pytest.fixture(scope="session")
def report():
    """Collects lines shown after the run, under a section heading."""

    def add(section: str, line: str) -> None:
        _REPORT.setdefault(section, []).append(line)
        print(line)

    return add


def pytest_terminal_summary(terminalreporter):
    for section, lines in _REPORT.items():
        terminalreporter.section(section)
        for line in lines:
            terminalreporter.write_line(line)
