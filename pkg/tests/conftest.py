import numpy as np
import pytest

from glhelix.fields import build_ansatz, make_grid, two_vortex
from glhelix.profile import default_profile


@pytest.fixture(scope="session")
def prof():
    return default_profile()


@pytest.fixture(scope="session")
def two02(prof):
    """Two-vortex ansatz at eps = 0.2, d_hat = 1 on the default grid."""
    cfg = two_vortex(0.2, 1.0)
    g = make_grid(cfg)
    return cfg, g, build_ansatz(cfg, prof, g)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    lines = request.config._acceptance_lines

    def emit(num, ok, detail):
        line = "%s criterion %d: %s" % ("PASS" if ok else "FAIL", num, detail)
        lines.append(line)
        print(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for ln in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(ln)
