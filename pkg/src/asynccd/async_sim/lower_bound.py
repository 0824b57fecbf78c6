"""The equal-off-diagonal quadratic on which stale reads can stall progress."""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from ..objective import ProblemInstance, SmoothPart


def lower_bound_epsilon(n: int, c: float) -> float:
    return 1.0 / math.sqrt(c * n * math.log(n))


def lower_bound_matrix(n: int, c: float) -> sp.csr_matrix:
    """Unit diagonal, every off-diagonal entry eps = 1/sqrt(c n ln n)."""
    eps = lower_bound_epsilon(n, c)
    dense = np.full((n, n), eps)
    np.fill_diagonal(dense, 1.0)
    return sp.csr_matrix(dense)


def lower_bound_instance(n: int, c: float = 1.0, seed: int = 0):
    """Return (problem, x0) with f(x) = x'Lx/2, no regularizer and x0 a balanced +-1 vector.

    L = eps*J + (1-eps)*I for the all-ones J, so its eigenvalues are 1-eps and
    1-eps+n*eps; the minimum is 0 at the origin.
    """
    if n < 4 or n % 2:
        raise ValueError("n must be even and >= 4")
    if c < 1:
        raise ValueError("c must be >= 1")
    eps = lower_bound_epsilon(n, c)
    smooth = SmoothPart.quadratic(lower_bound_matrix(n, c), np.zeros(n))
    mu = 1.0 - eps
    p = ProblemInstance(smooth, (), mu_f=mu, mu_F=mu, f_star=0.0)
    x0 = np.ones(n)
    x0[np.random.default_rng(seed).permutation(n)[: n // 2]] = -1.0
    return p, x0
