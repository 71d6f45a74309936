import numpy as np
import pytest

from risdfrc.channel import RngStream, effective_channels, sample_scenario
from risdfrc.config import ScenarioConfig


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion."""

    def record(tag: str, title: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {tag}: {title}" + (f"  [{detail}]" if detail else "")
        print(line)
        request.config._acceptance_lines.append(line)
        return ok

    return record


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def rand_herm(rng, n):
    a = crandn(rng, n, n)
    return a + a.conj().T


def rand_hpd(rng, n):
    a = crandn(rng, n, n)
    return a @ a.conj().T + n * np.eye(n)


def unit_phases(rng, n):
    return np.exp(2j * np.pi * rng.random(n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_scenario():
    cfg = ScenarioConfig(l_elems=6)
    ch = sample_scenario(cfg, RngStream(7).child("channels"))
    return cfg, ch


@pytest.fixture(scope="session")
def default_scenario():
    cfg = ScenarioConfig()
    ch = sample_scenario(cfg, RngStream(0).child("channels"))
    return cfg, ch


def random_beams(rng, n_t, widths, power=1.0):
    beams = [crandn(rng, n_t, w) for w in widths]
    total = sum(np.vdot(b, b).real for b in beams)
    return [b * np.sqrt(power / total) for b in beams]


def comm_state(ch, theta, beams):
    from risdfrc.wmmse import decoders_and_weights

    h = effective_channels(ch, theta)
    us, ws, es = decoders_and_weights(h, beams, ch.sigma2)
    return h, us, ws, es
