import numpy as np
import pytest

from fefetmult.device import FeFETParams, Polarity


class RelayGrid:
    """Explicit symmetric-relay Preisach reference: N relays, uniform thresholds."""

    def __init__(self, params: FeFETParams, n: int = 20000, p0: float = 0.0):
        edges = np.linspace(params.v_coercive, params.v_saturation, n + 1)
        self.h = 0.5 * (edges[1:] + edges[:-1])
        self.state = np.full(n, float(p0))
        self.sign = 1.0 if params.polarity is Polarity.N else -1.0

    def pulse(self, amplitude: float):
        u = self.sign * amplitude
        self.state[self.h <= abs(u)] = np.sign(u)
        return self

    @property
    def polarization(self) -> float:
        return float(np.mean(self.state))


@pytest.fixture
def nparams():
    return FeFETParams()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import acceptance_record
    if not acceptance_record.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_record.summary_lines():
        terminalreporter.write_line(line)
