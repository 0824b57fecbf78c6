"""Coordinate-wise Lipschitz parameters, diagonal rescaling and the overlap bound."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .objective import ProblemInstance, Regularizer, SmoothPart


@dataclass(frozen=True, eq=False)
class LipschitzProfile:
    l_diag: np.ndarray
    l_max: float
    l_res: float
    l_res_bar: float
    l_global: float

    def to_dict(self) -> dict:
        return {
            "l_max": self.l_max,
            "l_res": self.l_res,
            "l_res_bar": self.l_res_bar,
            "l_global": self.l_global,
            "l_diag_min": float(self.l_diag.min()) if len(self.l_diag) else 0.0,
            "l_diag_max": float(self.l_diag.max()) if len(self.l_diag) else 0.0,
        }


def spectral_norm(A, iters: int = 1000, rtol: float = 1e-6, seed: int = 0) -> float:
    """Largest |eigenvalue| of a symmetric matrix by power iteration."""
    n = A.shape[0]
    if n == 0 or A.nnz == 0:
        return 0.0
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = A @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        done = abs(nw - est) <= rtol * nw
        est = nw
        v = w / nw
        if done:
            break
    return est


def profile_quadratic(A) -> LipschitzProfile:
    """Lipschitz parameters of x -> 0.5 x'Ax, where L_jk = |A_jk|."""
    A = sp.csr_matrix(A, dtype=np.float64)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if (A != A.T).nnz:
        raise ValueError("matrix must be symmetric")
    absA = abs(A)
    l_max = float(absA.max()) if A.nnz else 0.0
    row_norms = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
    l_res = float(row_norms.max()) if len(row_norms) else 0.0
    return LipschitzProfile(
        l_diag=A.diagonal().astype(np.float64),
        l_max=l_max,
        l_res=l_res,
        l_res_bar=l_res,
        l_global=spectral_norm(A),
    )


def profile_of(p: ProblemInstance | SmoothPart) -> LipschitzProfile:
    smooth = p.smooth if isinstance(p, ProblemInstance) else p
    return profile_quadratic(smooth.quad.matrix())


def _rescale_reg(r: Regularizer, s: float) -> Regularizer:
    if r.kind in ("l1", "hinge"):
        return Regularizer(r.kind, r.lam * s)
    if r.kind == "squared_l2":
        return Regularizer(r.kind, r.lam * s * s)
    return r


def rescale_uniform_diagonal(p: ProblemInstance, return_scale: bool = False):
    """Substitute x_j = s_j x'_j so every diagonal entry equals the largest one.

    F'(x') = F(S x') pointwise.  The strong-convexity metadata stays a valid
    lower bound because every s_j >= 1, and the optimum value is unchanged.
    """
    diag = p.quad.diag
    if np.any(diag <= 0.0):
        raise ValueError("rescaling needs strictly positive diagonal entries")
    s = np.sqrt(diag.max() / diag)
    S = sp.diags(s)
    sm = p.smooth
    if sm.kind == "quadratic":
        A2 = sp.csr_matrix(S @ sm.A @ S)
        # restore exact symmetry lost to rounding in the two products
        A2 = sp.csr_matrix((A2 + A2.T) * 0.5)
        A2.setdiag(np.full(p.n, diag.max()))
        smooth = SmoothPart.quadratic(A2, s * sm.b, sm.c0)
    else:
        smooth = SmoothPart.least_squares(sm.M @ S, sm.y)
    regs = tuple(_rescale_reg(r, float(sj)) for r, sj in zip(p.regs, s))
    out = ProblemInstance(smooth, regs, p.mu_f, p.mu_F, p.f_star)
    return (out, s) if return_scale else out


def max_parallelism(profile: LipschitzProfile, gamma: float, n: int) -> int:
    """Largest overlap q allowed by min{sqrt(n)/102, gamma*sqrt(n)/(102*L_res_bar)}."""
    if gamma < profile.l_max:
        raise ValueError(f"gamma={gamma} is below l_max={profile.l_max}")
    root = math.sqrt(n)
    bound = root / 102.0
    if profile.l_res_bar > 0.0:
        bound = min(bound, gamma * root / (102.0 * profile.l_res_bar))
    return max(0, math.floor(bound))


def estimate_coord_lipschitz(smooth: SmoothPart, probes: int = 3, seed: int = 0) -> np.ndarray:
    """Matrix of sampled difference quotients |grad_k f(x + r e_j) - grad_k f(x)| / |r|.

    Entry [j, k] is the largest quotient seen over ``probes`` random (x, r).
    """
    if probes < 1:
        raise ValueError("probes must be >= 1")
    n = smooth.n
    rng = np.random.default_rng(seed)
    est = np.zeros((n, n))
    for _ in range(probes):
        x = rng.standard_normal(n)
        g0 = smooth.gradient(x)
        for j in range(n):
            r = rng.uniform(0.5, 2.0) * rng.choice((-1.0, 1.0))
            xr = x.copy()
            xr[j] += r
            q = np.abs(smooth.gradient(xr) - g0) / abs(r)
            np.maximum(est[j], q, out=est[j])
    return est
