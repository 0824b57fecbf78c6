"""Composite objectives F(x) = f(x) + sum_k psi_k(x_k).

The smooth part is either a quadratic ``0.5 x'Ax + b'x + c0`` with a symmetric
CSR matrix, or a least-squares term ``0.5 ||Mx - y||^2``.  Solvers never touch
the least-squares form directly; they work on its quadratic view
``A = M'M, b = -M'y, c0 = 0.5 ||y||^2`` so that every coordinate gradient is a
single CSR row dot.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from numba import njit

REG_CODES = {"zero": 0, "l1": 1, "squared_l2": 2, "hinge": 3}
REG_NAMES = {v: k for k, v in REG_CODES.items()}


@dataclass(frozen=True)
class Regularizer:
    """A univariate convex penalty: zero, l1, squared_l2 or hinge."""

    kind: str = "zero"
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in REG_CODES:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if not self.lam >= 0.0:
            raise ValueError(f"regularizer weight must be >= 0, got {self.lam}")
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def code(self) -> int:
        return REG_CODES[self.kind]

    @classmethod
    def zero(cls):
        return cls("zero", 0.0)

    @classmethod
    def l1(cls, lam):
        return cls("l1", lam)

    @classmethod
    def squared_l2(cls, lam):
        return cls("squared_l2", lam)

    @classmethod
    def hinge(cls, lam):
        return cls("hinge", lam)


@njit(cache=True, nogil=True)
def psi_scalar(v, kind, lam):
    if kind == 1:
        return lam * abs(v)
    if kind == 2:
        return 0.5 * lam * v * v
    if kind == 3:
        return lam * v if v > 0.0 else 0.0
    return 0.0


def psi_eval(reg: Regularizer, v: float) -> float:
    return float(psi_scalar(float(v), reg.code, reg.lam))


def _as_csr(mat) -> sp.csr_matrix:
    out = sp.csr_matrix(mat, dtype=np.float64, copy=True)
    out.sum_duplicates()
    out.sort_indices()
    return out


@dataclass(frozen=True, eq=False)
class QuadView:
    """CSR arrays of the quadratic form used by every kernel."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    b: np.ndarray
    c0: float
    diag: np.ndarray

    @property
    def n(self) -> int:
        return len(self.b)

    def matrix(self) -> sp.csr_matrix:
        n = self.n
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(n, n))


@dataclass(frozen=True, eq=False)
class SmoothPart:
    kind: str
    A: sp.csr_matrix | None = None
    b: np.ndarray | None = None
    M: sp.csr_matrix | None = None
    y: np.ndarray | None = None
    c0: float = 0.0

    @classmethod
    def quadratic(cls, A, b=None, c0: float = 0.0) -> "SmoothPart":
        A = _as_csr(A)
        n, m = A.shape
        if n != m:
            raise ValueError(f"quadratic matrix must be square, got {A.shape}")
        if (A != A.T).nnz:
            raise ValueError("quadratic matrix must be exactly symmetric")
        b = np.zeros(n) if b is None else np.array(b, dtype=np.float64)
        if b.shape != (n,):
            raise ValueError(f"b has shape {b.shape}, expected ({n},)")
        return cls("quadratic", A=A, b=b, c0=float(c0))

    @classmethod
    def least_squares(cls, M, y) -> "SmoothPart":
        M = _as_csr(M)
        y = np.array(y, dtype=np.float64)
        if y.shape != (M.shape[0],):
            raise ValueError(f"y has shape {y.shape}, expected ({M.shape[0]},)")
        return cls("least_squares", M=M, y=y)

    @property
    def n(self) -> int:
        return self.A.shape[0] if self.kind == "quadratic" else self.M.shape[1]

    @cached_property
    def quad(self) -> QuadView:
        if self.kind == "quadratic":
            A, b, c0 = self.A, self.b, self.c0
        else:
            A = _as_csr(self.M.T @ self.M)
            b = -(self.M.T @ self.y)
            c0 = 0.5 * float(self.y @ self.y)
        return QuadView(
            indptr=A.indptr.astype(np.int64),
            indices=A.indices.astype(np.int64),
            data=A.data.astype(np.float64),
            b=np.ascontiguousarray(b, dtype=np.float64),
            c0=float(c0),
            diag=A.diagonal().astype(np.float64),
        )

    def value(self, x: np.ndarray) -> float:
        if self.kind == "quadratic":
            return float(0.5 * (x @ (self.A @ x)) + self.b @ x + self.c0)
        r = self.M @ x - self.y
        return float(0.5 * (r @ r))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "quadratic":
            return self.A @ x + self.b
        return self.M.T @ (self.M @ x - self.y)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Smooth part, one regularizer per coordinate, optional metadata.

    ``mu_f``/``mu_F`` are declared strong-convexity moduli (lower bounds) and
    ``f_star`` the known minimum of F.  None means unknown.
    """

    smooth: SmoothPart
    regs: tuple = field(default=())
    mu_f: float | None = None
    mu_F: float | None = None
    f_star: float | None = None

    def __post_init__(self):
        regs = tuple(self.regs) if self.regs else (Regularizer.zero(),) * self.smooth.n
        if len(regs) != self.smooth.n:
            raise ValueError(f"need {self.smooth.n} regularizers, got {len(regs)}")
        object.__setattr__(self, "regs", regs)
        for name in ("mu_f", "mu_F"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.mu_f is not None and self.mu_F is not None and self.mu_F < self.mu_f:
            raise ValueError("mu_F must be >= mu_f")

    @property
    def n(self) -> int:
        return self.smooth.n

    @property
    def quad(self) -> QuadView:
        return self.smooth.quad

    @cached_property
    def reg_kind(self) -> np.ndarray:
        return np.array([r.code for r in self.regs], dtype=np.int64)

    @cached_property
    def reg_lam(self) -> np.ndarray:
        return np.array([r.lam for r in self.regs], dtype=np.float64)

    @property
    def smooth_only(self) -> bool:
        return bool(np.all((self.reg_kind == 0) | (self.reg_lam == 0.0)))

    def replace(self, **changes) -> "ProblemInstance":
        fields = dict(smooth=self.smooth, regs=self.regs, mu_f=self.mu_f,
                      mu_F=self.mu_F, f_star=self.f_star)
        fields.update(changes)
        return ProblemInstance(**fields)


def _check_x(p: ProblemInstance, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({p.n},)")
    return x


def eval_f(p: ProblemInstance, x) -> float:
    return p.smooth.value(_check_x(p, x))


def psi_sum(p: ProblemInstance, x) -> float:
    return float(_psi_sum(_check_x(p, x), p.reg_kind, p.reg_lam))


def eval_F(p: ProblemInstance, x) -> float:
    x = _check_x(p, x)
    return p.smooth.value(x) + float(_psi_sum(x, p.reg_kind, p.reg_lam))


def grad_coord(p: ProblemInstance, x, j: int) -> float:
    x = _check_x(p, x)
    if not 0 <= j < p.n:
        raise IndexError(f"coordinate {j} out of range for n={p.n}")
    q = p.quad
    return float(row_dot(q.indptr, q.indices, q.data, x, j) + q.b[j])


def grad_full(p: ProblemInstance, x) -> np.ndarray:
    x = _check_x(p, x)
    q = p.quad
    return _grad_all(q.indptr, q.indices, q.data, q.b, x)


@njit(cache=True, nogil=True)
def row_dot(indptr, indices, data, x, j):
    s = 0.0
    for i in range(indptr[j], indptr[j + 1]):
        s += data[i] * x[indices[i]]
    return s


@njit(cache=True)
def _grad_all(indptr, indices, data, b, x):
    n = len(b)
    out = np.empty(n)
    for j in range(n):
        out[j] = row_dot(indptr, indices, data, x, j) + b[j]
    return out


@njit(cache=True, nogil=True)
def _psi_sum(x, kind, lam):
    s = 0.0
    for j in range(len(x)):
        s += psi_scalar(x[j], kind[j], lam[j])
    return s


@njit(cache=True, nogil=True)
def full_F(indptr, indices, data, b, c0, kind, lam, x):
    """F(x) through the quadratic view, row by row."""
    s = 0.0
    for j in range(len(b)):
        s += x[j] * (0.5 * row_dot(indptr, indices, data, x, j) + b[j])
        s += psi_scalar(x[j], kind[j], lam[j])
    return s + c0


def smallest_eigenvalue(A, iters: int = 5000, tol: float = 1e-12, seed: int = 0) -> float:
    """Smallest eigenvalue of a symmetric matrix by power iteration on sigma*I - A.

    sigma is a Gershgorin upper bound on the spectrum, so sigma*I - A is PSD and
    its dominant eigenvalue is sigma - lambda_min.
    """
    A = sp.csr_matrix(A, dtype=np.float64)
    n = A.shape[0]
    sigma = float(np.max(np.asarray(abs(A).sum(axis=1)).ravel())) if n else 0.0
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = sigma * v - A @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return sigma
        w /= nw
        lam_new = float(w @ (sigma * w - A @ w))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam, v = lam_new, w
    return sigma - lam


# -- problem files ---------------------------------------------------------

def _triplets(mat: sp.csr_matrix) -> list:
    coo = mat.tocoo()
    order = np.lexsort((coo.col, coo.row))
    return [[int(coo.row[i]), int(coo.col[i]), float(coo.data[i])] for i in order]


def _from_triplets(trip: Sequence, shape) -> sp.csr_matrix:
    if len(trip):
        r, c, v = zip(*trip)
    else:
        r, c, v = (), (), ()
    return sp.csr_matrix(
        (np.array(v, dtype=np.float64), (np.array(r, dtype=np.int64), np.array(c, dtype=np.int64))),
        shape=shape,
    )


def problem_to_dict(p: ProblemInstance) -> dict:
    s = p.smooth
    if s.kind == "quadratic":
        smooth = {"kind": "quadratic", "triplets": _triplets(s.A),
                  "b": [float(v) for v in s.b]}
        if s.c0:
            smooth["c0"] = float(s.c0)
    else:
        smooth = {"kind": "least_squares", "m": int(s.M.shape[0]),
                  "triplets": _triplets(s.M), "y": [float(v) for v in s.y]}
    out = {
        "n": p.n,
        "smooth": smooth,
        "regs": [{"kind": r.kind, "lambda": r.lam} for r in p.regs],
    }
    for name in ("mu_f", "mu_F", "f_star"):
        v = getattr(p, name)
        if v is not None:
            out[name] = float(v)
    return out


def problem_from_dict(d: dict) -> ProblemInstance:
    n = int(d["n"])
    s = d["smooth"]
    if s["kind"] == "quadratic":
        smooth = SmoothPart.quadratic(_from_triplets(s["triplets"], (n, n)), s["b"], s.get("c0", 0.0))
    elif s["kind"] == "least_squares":
        smooth = SmoothPart.least_squares(_from_triplets(s["triplets"], (int(s["m"]), n)), s["y"])
    else:
        raise ValueError(f"unknown smooth kind {s['kind']!r}")
    regs = tuple(Regularizer(r["kind"], r.get("lambda", 0.0)) for r in d.get("regs", []))
    return ProblemInstance(smooth, regs, d.get("mu_f"), d.get("mu_F"), d.get("f_star"))


def save_problem(p: ProblemInstance, path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(p)), encoding="utf-8")


def load_problem(path) -> ProblemInstance:
    return problem_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
