import math

import numpy as np
import pytest

from symswitch.hilbert import HilbertSpace, ModeSpec, Operator, build_space
from symswitch.model import Channel, LindbladModel, build_model
from symswitch.presets import PRESETS, preset


@pytest.fixture(scope="session")
def space():
    return build_space()


@pytest.fixture(scope="session")
def models():
    return {name: build_model(preset(name)) for name in PRESETS}


def toy_space(n: int = 2) -> HilbertSpace:
    """Small stand-in space; only ``dim`` and ``space_id`` matter to the superoperator code."""
    basis = tuple((k, 0, 0, 0) for k in range(n))
    return HilbertSpace(ModeSpec(), basis, {b: i for i, b in enumerate(basis)}, f"toy-{n}")


def qubit_space() -> HilbertSpace:
    return toy_space(2)


def qubit_model(decay: float, pump: float, omega: float = 0.0, pump_nu: int = 0) -> LindbladModel:
    """Qubit with counted decay |0><1| (nu=+1) and an optional pump |1><0|."""
    sp = qubit_space()
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    H = Operator(np.diag([-omega / 2, omega / 2]).astype(complex), sp.space_id)
    chans = [Channel("decay", Operator(math.sqrt(decay) * lower, sp.space_id), 1)]
    if pump:
        chans.append(Channel("pump", Operator(math.sqrt(pump) * lower.T, sp.space_id), pump_nu))
    return LindbladModel(sp, H, tuple(chans))


def qubit_theta(s, a, b):
    """Exact leading eigenvalue of the tilted qubit population block [[-b, a e^-s], [b, -a]]."""
    return 0.5 * (-(a + b) + np.sqrt((a - b) ** 2 + 4 * a * b * np.exp(-s)))


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
