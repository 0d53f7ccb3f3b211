import numpy as np
import pytest

from kakinuma.core import Grid1D, Model, ModelParams

ACCEPTANCE_KEY = pytest.StashKey[list]()


def smooth_fields(grid, n, rng, modes=4, amp=1.0, decay=2.0):
    """n random smooth zero-mean fields built from the lowest Fourier modes."""
    x = grid.x
    out = np.zeros((n, grid.points))
    for m in range(1, modes + 1):
        c = rng.normal(size=(n, 1)) * amp / m ** decay
        out += c * np.cos(2 * np.pi * m * x / grid.length + rng.uniform(0, 2 * np.pi, (n, 1)))
    return out


def make_model(M=64, L=2 * np.pi, N=1, p_list=(0, 2), bottom_amp=0.0, rho=(1.0, 2.0),
               h=(1.0, 3.0), g=1.0, dealias=True, **kw):
    grid = Grid1D(L, M, dealias)
    b = None
    if bottom_amp:
        b = bottom_amp * np.cos(2 * np.pi * grid.x / L)
    params = ModelParams(rho[0], rho[1], h[0], h[1], g, N, tuple(p_list), b)
    return Model(params, grid, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: (int(s.split()[1].rstrip("a:b:")), s)):
        terminalreporter.write_line(line)
