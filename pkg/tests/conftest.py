import numpy as np
import pytest


def fd_partial(f, x, alpha, h):
    """Nested central finite difference of a scalar function.

    `alpha` is an exponent tuple; each derivative order unfolds into one
    central difference, i.e. D_alpha f = sum over sign patterns of
    (prod signs) * f(x + h * sum signs*e_axis) / (2h)^{|alpha|}.
    `f` must accept a batch (M, d) and return (M,).
    """
    axes = [i for i, a in enumerate(alpha) for _ in range(a)]
    k = len(axes)
    if k == 0:
        return float(f(np.asarray(x, dtype=float)[None, :])[0])
    pts = np.repeat(np.asarray(x, dtype=float)[None, :], 2 ** k, axis=0)
    signs = np.ones(2 ** k)
    for bit, axis in enumerate(axes):
        s = np.where((np.arange(2 ** k) >> bit) & 1, 1.0, -1.0)
        pts[:, axis] += h * s
        signs *= s
    vals = np.asarray(f(pts), dtype=float)
    return float(np.dot(signs, vals) / (2.0 * h) ** k)


def fd_partial_richardson(f, x, alpha, h):
    """Richardson-extrapolated nested central difference (h^4 accurate)."""
    coarse = fd_partial(f, x, alpha, h)
    fine = fd_partial(f, x, alpha, h / 2.0)
    return (4.0 * fine - coarse) / 3.0


def rel_err(a, b, floor=1e-9):
    return abs(a - b) / max(abs(a), abs(b), floor)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
