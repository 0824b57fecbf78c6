from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.sparse as sp

from asynccd.async_sim.lower_bound import lower_bound_epsilon, lower_bound_matrix
from asynccd.harness.generators import gen_lasso, gen_random_quadratic
from asynccd.lipschitz import (LipschitzProfile, estimate_coord_lipschitz, max_parallelism, profile_of,
                               profile_quadratic, rescale_uniform_diagonal)
from asynccd.objective import ProblemInstance, Regularizer, SmoothPart, eval_F
from asynccd.seq_solver import SolverConfig, run_sequential


def _profile(l_max, l_res_bar):
    return LipschitzProfile(np.array([l_max]), l_max, l_res_bar, l_res_bar, l_res_bar)


def test_profile_examples():
    pr = profile_quadratic(np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert pr.l_max == 1.0
    assert pr.l_res == pytest.approx(math.sqrt(1.25), abs=1e-12)
    assert pr.l_res_bar == pytest.approx(math.sqrt(1.25), abs=1e-12)
    eye = profile_quadratic(sp.eye(5, format="csr"))
    assert eye.l_max == eye.l_res == eye.l_res_bar == 1.0
    assert eye.l_global == pytest.approx(1.0, rel=1e-6)
    eps = lower_bound_epsilon(4, 1.0)
    lb = profile_quadratic(lower_bound_matrix(4, 1.0))
    assert lb.l_max == 1.0
    assert lb.l_res_bar == pytest.approx(math.sqrt(1 + 3 * eps * eps), abs=1e-12)


def test_profile_rejects_asymmetric():
    with pytest.raises(ValueError):
        profile_quadratic(np.array([[1.0, 0.2], [0.0, 1.0]]))


@pytest.mark.parametrize("s", [1, 3, 5, 9])
def test_profile_invariants_on_sparse_quadratics(s):
    p = gen_random_quadratic(60, s, 0.05, 1.0, seed=s)
    pr = profile_of(p)
    assert pr.l_res_bar >= pr.l_res - 1e-9
    assert pr.l_max <= pr.l_res_bar + 1e-9
    assert abs(pr.l_res - pr.l_res_bar) <= 1e-10
    assert pr.l_res_bar <= math.sqrt(s) * pr.l_max + 1e-9
    assert np.all(pr.l_diag >= 0)
    if s == 1:
        assert pr.l_res_bar == pytest.approx(pr.l_max, abs=1e-12)


def test_max_parallelism_examples():
    assert max_parallelism(_profile(1.0, 1.0), 1.0, 10404) == 1
    assert max_parallelism(_profile(1.0, 1.0), 1.0, 4 * 102 ** 2) == 2
    n = 10000
    assert max_parallelism(_profile(1.0, math.sqrt(n)), 1.0, n) == 0
    with pytest.raises(ValueError):
        max_parallelism(_profile(1.0, 1.0), 0.5, 100)


def test_max_parallelism_monotone():
    base = max_parallelism(_profile(1.0, 1.5), 1.0, 200_000)
    assert max_parallelism(_profile(1.0, 3.0), 1.0, 200_000) <= base
    assert max_parallelism(_profile(1.0, 1.5), 1.0, 800_000) >= base
    assert max_parallelism(_profile(1.0, 1.5), 2.0, 200_000) >= base


def test_rescale_examples():
    p = ProblemInstance(SmoothPart.quadratic(np.diag([1.0, 4.0]), [1.0, -2.0]),
                        (Regularizer.l1(0.5), Regularizer.squared_l2(0.3)))
    p2, s = rescale_uniform_diagonal(p, return_scale=True)
    np.testing.assert_allclose(s, [2.0, 1.0])
    np.testing.assert_allclose(p2.smooth.A.toarray(), np.diag([4.0, 4.0]))
    rng = np.random.default_rng(0)
    for _ in range(20):
        xp = rng.normal(size=2)
        assert eval_F(p2, xp) == pytest.approx(eval_F(p, s * xp), rel=1e-12, abs=1e-12)
    u = ProblemInstance(SmoothPart.quadratic(np.array([[2.0, 0.3], [0.3, 2.0]])))
    np.testing.assert_array_equal(rescale_uniform_diagonal(u).smooth.A.toarray(), u.smooth.A.toarray())


def test_rescale_preserves_minimum():
    base = gen_random_quadratic(40, 3, 0.2, 1.0, seed=2)
    A = base.smooth.A.toarray()
    D = np.diag(np.linspace(0.3, 1.0, 40))
    DAD = D @ A @ D
    p = ProblemInstance(SmoothPart.quadratic((DAD + DAD.T) / 2, D @ base.smooth.b), (Regularizer.l1(0.05),) * 40)
    p2 = rescale_uniform_diagonal(p)
    pr = profile_of(p2)
    assert np.allclose(pr.l_diag, pr.l_max)
    lo1 = run_sequential(p, SolverConfig(profile_of(p).l_max, 200_000, record_every=200_000)).F[-1]
    lo2 = run_sequential(p2, SolverConfig(pr.l_max, 200_000, record_every=200_000)).F[-1]
    assert abs(lo1 - lo2) <= 1e-8


def test_estimate_coord_lipschitz():
    p = gen_random_quadratic(15, 3, 0.1, 1.0, seed=1)
    np.testing.assert_allclose(estimate_coord_lipschitz(p.smooth), np.abs(p.smooth.A.toarray()), atol=1e-9)
    ls = gen_lasso(20, 10, 0.5, 0.0, seed=4)
    M = ls.smooth.M.toarray()
    np.testing.assert_allclose(estimate_coord_lipschitz(ls.smooth), np.abs(M.T @ M), atol=1e-6)
    z = SmoothPart.quadratic(sp.csr_matrix((4, 4)))
    assert np.all(estimate_coord_lipschitz(z) == 0)
