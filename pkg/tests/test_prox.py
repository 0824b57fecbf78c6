from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asynccd.objective import Regularizer
from asynccd.prox import (SWEEP_NAMES, StepContext, prox_invariant_report, prox_oracle, prox_step,
                          w_hat, w_value)

REGS = [Regularizer.zero(), Regularizer.l1(0.7), Regularizer.squared_l2(1.3), Regularizer.hinge(0.9)]


def test_w_value_examples():
    ctx = StepContext(4.0, Regularizer.zero(), 0.0, 2.0)
    assert w_value(0.0, ctx) == 0.0
    assert w_value(-0.5, ctx) == -0.5
    l1 = StepContext(1.0, Regularizer.l1(0.3), 1.0, 0.0)
    assert w_value(-0.3, l1) == pytest.approx(-0.045, abs=1e-15)


def test_prox_step_closed_forms():
    assert prox_step(StepContext(4.0, Regularizer.zero(), 0.0, 2.0)) == -0.5
    assert prox_step(StepContext(3.0, Regularizer.squared_l2(2.0), 1.0, 1.0)) == pytest.approx(-0.6, abs=1e-15)


def test_prox_step_frozen_oracle_values():
    # frozen from an independent bounded scalar minimizer (tolerance 1e-12)
    assert prox_step(StepContext(1.0, Regularizer.l1(0.3), 1.0, 0.0)) == pytest.approx(-0.3, abs=1e-8)
    # hinge: the step stops at the kink
    assert prox_step(StepContext(1.0, Regularizer.hinge(1.0), 0.1, 0.0)) == pytest.approx(-0.1, abs=1e-8)


def test_w_hat_examples():
    assert w_hat(StepContext(4.0, Regularizer.zero(), 3.0, 2.0)) == 0.5
    assert w_hat(StepContext(1.0, Regularizer.l1(0.3), 1.0, 0.0)) == pytest.approx(0.045, abs=1e-12)
    # d_hat = 0 at the kink when |g| <= lam
    ctx = StepContext(2.0, Regularizer.l1(1.0), 0.0, 0.5)
    assert prox_step(ctx) == 0.0 and w_hat(ctx) == 0.0


def test_gamma_must_be_positive():
    with pytest.raises(ValueError):
        StepContext(0.0, Regularizer.zero(), 0.0, 1.0)


def test_prox_oracle_examples():
    ctx = StepContext(4.0, Regularizer.zero(), 0.0, 2.0)
    assert prox_oracle(ctx, -10.0, 10.0, 1e-8) == pytest.approx(-0.5, abs=1e-8)
    assert prox_oracle(ctx, 1.0, 1.0 + 1e-9, 1e-8) == 1.0
    with pytest.raises(ValueError):
        prox_oracle(ctx, 0.0, 10.0)
    with pytest.raises(ValueError):
        prox_oracle(ctx, 1.0, -1.0)


@pytest.mark.parametrize("reg", REGS, ids=lambda r: r.kind)
def test_prox_step_matches_oracle(reg):
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        ctx = StepContext(float(rng.uniform(0.5, 5)), Regularizer(reg.kind, float(rng.uniform(0, 5)) if reg.lam else 0.0),
                          float(rng.uniform(-5, 5)), float(rng.uniform(-5, 5)))
        assert abs(prox_step(ctx) - prox_oracle(ctx)) <= 1e-6


@pytest.mark.parametrize("kind", ["zero", "l1", "squared_l2", "hinge"])
def test_invariant_sweep(kind):
    rep = prox_invariant_report(kind, count=20_000, seed=11)
    assert set(rep["checks"]) == set(SWEEP_NAMES)
    assert all(c["ok"] for c in rep["checks"].values()), rep


contexts = st.builds(
    lambda gamma, kind, lam, x, g: StepContext(gamma, Regularizer(kind, lam), x, g),
    st.floats(0.01, 100), st.sampled_from(["zero", "l1", "squared_l2", "hinge"]),
    st.floats(0, 50), st.floats(-100, 100), st.floats(-100, 100))


@settings(max_examples=300, deadline=None)
@given(ctx=contexts)
def test_step_minimizes_w(ctx):
    d = prox_step(ctx)
    w = w_value(d, ctx)
    assert w_hat(ctx) >= -1e-12
    assert w_hat(ctx) >= ctx.gamma / 2 * d * d - 1e-9 * max(1.0, abs(w))
    scale = 1e-9 * max(1.0, abs(w))
    for eps in (1e-3, -1e-3, 0.5, -0.5):
        assert w_value(d + eps, ctx) >= w - scale


@settings(max_examples=300, deadline=None)
@given(ctx=contexts, g2=st.floats(-100, 100), x2=st.floats(-100, 100))
def test_shift_contractions(ctx, g2, x2):
    d = prox_step(ctx)
    dg = prox_step(StepContext(ctx.gamma, ctx.reg, ctx.x, g2))
    dx = prox_step(StepContext(ctx.gamma, ctx.reg, x2, ctx.g))
    tol = 1e-12 * max(1.0, abs(ctx.g), abs(g2), abs(ctx.x), abs(x2))
    assert abs(d - dg) <= abs(ctx.g - g2) / ctx.gamma + tol
    assert abs(d - dx) <= abs(ctx.x - x2) + tol
    wg = w_hat(StepContext(ctx.gamma, ctx.reg, ctx.x, g2))
    lhs = w_hat(ctx)
    rhs = 2 / 3 * wg - 4 / (3 * ctx.gamma) * (ctx.g - g2) ** 2
    assert lhs >= rhs - 1e-9 * max(1.0, abs(lhs), abs(rhs))
    assert math.isfinite(lhs)
