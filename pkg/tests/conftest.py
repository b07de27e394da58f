"""Shared fixtures and independent reference computations.

The helpers here deliberately avoid the package's own numerics: norms come
from scipy's brentq on the modular, wavelets from explicit tensor products
of one-dimensional Haar profiles, and the maximal function from a direct
scan over every dyadic ancestor of each cell.
"""

import itertools
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from vlgreedy import constant_exponent, step_exponent


def reference_norm(values, p_values) -> float:
    """Luxemburg norm by brentq on log(modular) over a bracket that always straddles 1."""
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    q = np.asarray(p_values, dtype=float).ravel()
    if not v.any():
        return 0.0
    cell = 1.0 / v.size

    def log_modular(log_lam):
        return math.log(np.sum((v / math.exp(log_lam)) ** q) * cell)

    top = float(v.max())
    # modular(top) <= 1 and modular(top * cell**(1/p_-)) >= 1
    hi = math.log(top) + 1e-9
    lo = math.log(top) + math.log(cell) / q.min() - 1e-9
    return math.exp(brentq(log_modular, lo, hi, xtol=1e-15, rtol=1e-15))


def haar_profile(bit: int, scale: int, k: int, J: int) -> np.ndarray:
    """One-dimensional factor on the depth-J cells: chi_I for bit 0, +1/-1 halves for bit 1, L2-normalized."""
    out = np.zeros(2**J)
    width = 2 ** (J - scale)
    start = k * width
    if bit == 0:
        out[start : start + width] = 1.0
    else:
        out[start : start + width // 2] = 1.0
        out[start + width // 2 : start + width] = -1.0
    return out * 2.0 ** (scale / 2)


def reference_wavelets(scale: int, index, J: int) -> list[np.ndarray]:
    """All 2^n - 1 tensor-product Haar functions on one cube."""
    n = len(index)
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        if not any(bits):
            continue
        w = np.ones((1,) * 0)
        for axis, (b, k) in enumerate(zip(bits, index)):
            w = np.multiply.outer(w, haar_profile(b, scale, k, J)) if axis else haar_profile(b, scale, k, J)
        out.append(np.asarray(w))
    return out


def reference_maximal(values) -> np.ndarray:
    """Dyadic maximal function: for each cell, the largest average of |f| over its ancestors."""
    v = np.abs(np.asarray(values, dtype=float))
    n = v.ndim
    J = int(round(math.log2(v.shape[0])))
    out = np.zeros_like(v)
    for cell in itertools.product(range(2**J), repeat=n):
        best = 0.0
        for j in range(J + 1):
            w = 2 ** (J - j)
            sl = tuple(slice((c // w) * w, (c // w) * w + w) for c in cell)
            best = max(best, float(v[sl].mean()))
        out[cell] = best
    return out


@pytest.fixture
def step24():
    """p = 2 on [0,1/2), 4 on [1/2,1), n = 1, J = 6."""
    return step_exponent(2, 4, J=6)


@pytest.fixture
def const2():
    return constant_exponent(2, 1, 6)


@pytest.fixture
def const3():
    return constant_exponent(3, 1, 6)


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdicts, one line per criterion, when that module ran."""
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.VERDICTS):
        terminalreporter.write_line(module.VERDICTS[number])
