import hashlib

import pytest

from hushroom.numtheory import PROFILES, generate_keypair, generate_params
from hushroom.rng import Csprng


def fixed_rng(label: bytes = b"") -> Csprng:
    """Deterministic generator so failures replay exactly."""
    material = hashlib.sha512(b"hushroom-test-seed" + label).digest()
    return Csprng(material[:40])


@pytest.fixture
def rng() -> Csprng:
    return fixed_rng()


@pytest.fixture(scope="session")
def dsa_material():
    """One parameter set and three keypairs, shared across the suite.

    Generation costs a few hundred ms; nothing here mutates it.
    """
    rng = fixed_rng(b"dsa-material")
    params = generate_params(PROFILES["optimized"], rng)
    keys = [generate_keypair(params, rng) for _ in range(3)]
    return params, keys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            if "test_acceptance" in report.nodeid and report.when == "call":
                outcomes.append((report.nodeid.split("::")[-1], status == "passed"))
    if not outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok in sorted(outcomes):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}: {name}")
