"""Random problem generators with known structure."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from ..objective import ProblemInstance, Regularizer, SmoothPart

DENSE_SOLVE_MAX = 500


def _banded_factor(n: int, width: int, rng) -> sp.csr_matrix:
    # upper band of the given width: B[i, i:i+width]
    rows, cols = [], []
    for off in range(width):
        idx = np.arange(n - off)
        rows.append(idx)
        cols.append(idx + off)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = rng.standard_normal(len(rows))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _solve_spd(A: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    if A.shape[0] <= DENSE_SOLVE_MAX:
        return np.linalg.solve(A.toarray(), rhs)
    x, info = cg(A, rhs, rtol=1e-13, atol=0.0, maxiter=10 * A.shape[0])
    if info != 0:
        raise RuntimeError(f"conjugate gradient did not converge (info={info})")
    return x


def gen_random_quadratic(n: int, s: int, mu: float, lmax_target: float = 1.0,
                         seed: int = 0) -> ProblemInstance:
    """Banded strongly convex quadratic with at most ``s`` nonzeros per row.

    A = scale * B'B + mu*I where B is upper banded with width (s+1)//2, so A has
    bandwidth at most s.  The scale puts the largest diagonal entry at
    ``lmax_target``.  With mu > 0, b is standard normal; with mu = 0, b is drawn
    from the range of A so the minimum is finite.
    """
    if not 1 <= s <= n:
        raise ValueError(f"need 1 <= s <= n, got s={s}, n={n}")
    if mu < 0:
        raise ValueError("mu must be >= 0")
    if not lmax_target > mu:
        raise ValueError("lmax_target must exceed mu")
    rng = np.random.default_rng(seed)
    B = _banded_factor(n, (s + 1) // 2, rng)
    A0 = sp.csr_matrix(B.T @ B)
    scale = (lmax_target - mu) / A0.diagonal().max()
    A = sp.csr_matrix(A0 * scale + sp.identity(n, format="csr") * mu)
    A = sp.csr_matrix((A + A.T) * 0.5)
    if mu > 0:
        b = rng.standard_normal(n)
        xs = _solve_spd(A, -b)
    else:
        xs = rng.standard_normal(n)
        b = -(A @ xs)
    f_star = float(0.5 * b @ xs)
    smooth = SmoothPart.quadratic(A, b)
    return ProblemInstance(smooth, (), mu_f=float(mu), mu_F=float(mu), f_star=f_star)


def gen_lasso(m: int, n: int, density: float, lam: float, seed: int = 0,
              noise: float = 0.01) -> ProblemInstance:
    """Sparse least squares with an l1 penalty and a planted sparse solution.

    Every column of the design holds at least one entry, so no coordinate has a
    zero diagonal.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    if not 0 < density <= 1:
        raise ValueError("density must be in (0, 1]")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    rng = np.random.default_rng(seed)
    M = sp.random(m, n, density=density, random_state=rng, data_rvs=rng.standard_normal,
                  format="lil")
    counts = np.asarray((M != 0).sum(axis=0)).ravel()
    for j in np.flatnonzero(counts == 0):
        M[int(rng.integers(m)), j] = rng.standard_normal()
    M = sp.csr_matrix(M)
    x_true = np.zeros(n)
    support = rng.choice(n, size=max(1, n // 10), replace=False)
    x_true[support] = rng.standard_normal(len(support))
    y = M @ x_true + noise * rng.standard_normal(m)
    regs = tuple(Regularizer.l1(lam) for _ in range(n))
    return ProblemInstance(SmoothPart.least_squares(M, y), regs)
