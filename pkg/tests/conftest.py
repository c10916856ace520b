import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from qlift.adversary import guess_adversary, wrap_with_readout  # noqa: E402
from qlift.oracle import OracleTable  # noqa: E402
from qlift.statevec import Predicate  # noqa: E402


def y_equals(target):
    """Predicate accepting only the image tuple ``target``."""
    target = tuple(target)
    return Predicate(len(target), lambda xs, ys, z, H: tuple(ys) == target, f"y={target}")


@pytest.fixture
def hand_fixture():
    # q=0, k=1: the adversary outputs x_o=1 without querying; H(1)=0 != G(1)=1
    adv = guess_adversary(2, 2, [1])
    return {
        "adv": adv,
        "wrapped": wrap_with_readout(adv, 1),
        "H": OracleTable(2, 2, (0, 0)),
        "G": OracleTable(2, 2, (1, 1)),
        "x_o": (1,),
        "V": y_equals((1,)),
    }


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
