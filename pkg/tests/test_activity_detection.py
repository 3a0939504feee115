import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from ura_scld.activity_detection import (
    ADConfig,
    GammaEstimate,
    _sweep,
    coordinate_descent,
    coordinate_step,
    direct_precision,
    model_covariance,
    nll_objective,
    select_fragments,
    step_size,
)
from ura_scld.channel import simulate_slot
from ura_scld.codebook import SupportSet, full_support, generate_codebook
from ura_scld.errors import NumericalFailure


def instance(seed, n=8, v=4, ka=2, M=200, power=1.0, N0=1.0):
    rng = np.random.default_rng(seed)
    cb = generate_codebook(seed, n, v, power)
    active = rng.choice(cb.size, ka, replace=False)
    obs = simulate_slot(cb, active, M, N0, rng)
    return cb, np.sort(active), obs.cov


def random_state(rng, cb, N0=1.0, nnz=3):
    g = np.zeros(cb.size)
    g[rng.choice(cb.size, nnz, replace=False)] = rng.random(nnz) + 0.2
    return GammaEstimate(g, direct_precision(g, cb, N0))


def test_objective_closed_forms(rng):
    cb = generate_codebook(0, 6, 3, 1.0)
    g = np.zeros(cb.size)
    for N0 in (1.0, 0.3, 4.0):
        assert nll_objective(g, cb, N0 * np.eye(6), N0) == pytest.approx(6 * np.log(N0) + 6, rel=1e-12)
        C = np.cov(rng.standard_normal((6, 30)))
        assert nll_objective(g, cb, C, N0) == pytest.approx(6 * np.log(N0) + np.trace(C) / N0, rel=1e-12)


def test_objective_errors():
    cb = generate_codebook(0, 6, 3, 1.0)
    with pytest.raises(ValueError):
        nll_objective(-np.ones(cb.size), cb, np.eye(6), 1.0)
    with pytest.raises(NumericalFailure):
        nll_objective(np.zeros(cb.size), cb, np.eye(6), 0.0)


def test_step_sign_matches_finite_difference():
    for seed in range(20):
        cb, _, cov = instance(seed, n=6, v=3, M=40)
        rng = np.random.default_rng(seed)
        state = random_state(rng, cb)
        h = 1e-6
        for k in range(cb.size):
            e = np.zeros(cb.size)
            e[k] = h
            lo = state.gamma - e if state.gamma[k] > h else state.gamma
            deriv = (nll_objective(state.gamma + e, cb, cov, 1.0) - nll_objective(lo, cb, cov, 1.0)) / (
                state.gamma[k] + h - lo[k])
            d = step_size(cb.columns[:, k], state.precision, cov)
            if abs(d) > 1e-4:
                assert np.sign(deriv) == -np.sign(d)


def test_step_is_line_minimiser():
    cb, _, cov = instance(4, n=6, v=3, M=40)
    state = random_state(np.random.default_rng(4), cb)
    for k in range(cb.size):
        d = step_size(cb.columns[:, k], state.precision, cov)

        def f(x):
            g = state.gamma.copy()
            g[k] += x
            return nll_objective(g, cb, cov, 1.0)

        lo = -state.gamma[k] + 1e-9
        res = minimize_scalar(f, bounds=(lo, 50.0), method="bounded", options={"xatol": 1e-10})
        if d > lo:
            assert d == pytest.approx(res.x, abs=1e-5)


def test_matched_model_gives_zero_step(rng):
    cb = generate_codebook(1, 6, 3, 1.0)
    state = random_state(rng, cb)
    cov = model_covariance(state.gamma, cb, 1.0)
    before = state.gamma.copy()
    for k in range(cb.size):
        assert abs(step_size(cb.columns[:, k], state.precision, cov)) < 1e-12
    assert np.allclose(state.gamma, before)


def test_clipped_step_leaves_state(rng):
    cb = generate_codebook(1, 6, 3, 1.0)
    state = GammaEstimate.initial(cb.size, 6, 1.0)
    cov = 0.5 * np.eye(6)  # less power than the noise floor: every d* < 0
    P0 = state.precision.copy()
    for k in range(cb.size):
        assert step_size(cb.columns[:, k], state.precision, cov) < 0
        coordinate_step(cb.columns[:, k], k, state, cov)
    assert not state.gamma.any()
    assert np.array_equal(state.precision, P0)


def test_rank_one_update_matches_inverse():
    cb, _, cov = instance(6, n=6, v=3, M=30)
    state = random_state(np.random.default_rng(6), cb)
    for k in range(cb.size):
        f0 = nll_objective(state.gamma, cb, cov, 1.0)
        coordinate_step(cb.columns[:, k], k, state, cov)
        direct = direct_precision(state.gamma, cb, 1.0)
        assert np.linalg.norm(state.precision - direct) / np.linalg.norm(direct) < 1e-10
        assert nll_objective(state.gamma, cb, cov, 1.0) <= f0 + 1e-12 * abs(f0)


@pytest.mark.parametrize("block", [1, 5, 64])
def test_batched_sweep_equals_sequential(block):
    cb, _, cov = instance(8, n=10, v=5, ka=3, M=50)
    rng = np.random.default_rng(8)
    order = rng.permutation(cb.size)
    ref = GammaEstimate.initial(cb.size, 10, 1.0)
    fast = GammaEstimate.initial(cb.size, 10, 1.0)
    for _ in range(3):
        for k in order:
            coordinate_step(cb.columns[:, k], k, ref, cov)
        _sweep(cb.columns, cov, fast, order, block)
        assert np.allclose(fast.gamma, ref.gamma, rtol=1e-9, atol=1e-12)
        assert np.allclose(fast.precision, ref.precision, rtol=1e-9, atol=1e-12)


def test_noise_only_returns_zero():
    for N0 in (1.0, 2.0):
        cb = generate_codebook(3, 8, 4, 1.0)
        est = coordinate_descent(N0 * np.eye(8), cb, full_support(0, 4), ADConfig(), N0, rng=0)
        assert not est.gamma.any()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(4, 20), st.integers(1, 4), st.integers(5, 300))
def test_descent_invariants(seed, n, ka, M):
    cb, _, cov = instance(seed, n=n, v=5, ka=ka, M=M)
    rng = np.random.default_rng(seed)
    support = np.sort(rng.choice(cb.size, 20, replace=False))
    cfg = ADConfig(max_passes=10, rel_tol=0.0, refresh_every=0)
    est = coordinate_descent(cov, cb, SupportSet(0, support), cfg, 1.0, rng=seed)
    obj = np.array(est.objective)
    assert np.all(np.diff(obj) <= 1e-9 * np.abs(obj[:-1]))
    assert (est.gamma >= 0).all()
    outside = np.setdiff1d(np.arange(cb.size), support)
    assert not est.gamma[outside].any()
    direct = direct_precision(est.gamma, cb, 1.0)
    assert np.linalg.norm(est.precision - direct) / np.linalg.norm(direct) < 1e-8


def test_early_stop_and_pass_count():
    cb, _, cov = instance(2, M=4096)
    est = coordinate_descent(cov, cb, full_support(0, 4), ADConfig(max_passes=50, rel_tol=1e-6), 1.0, rng=0)
    assert 1 <= est.passes < 50
    assert len(est.objective) == est.passes + 1
    fixed = coordinate_descent(cov, cb, full_support(0, 4), ADConfig(max_passes=3, rel_tol=0.0), 1.0, rng=0)
    assert fixed.passes == 3


def test_fixed_order_is_deterministic():
    cb, _, cov = instance(5, M=100)
    cfg = ADConfig(order="fixed")
    a = coordinate_descent(cov, cb, full_support(0, 4), cfg, 1.0, rng=1)
    b = coordinate_descent(cov, cb, full_support(0, 4), cfg, 1.0, rng=2)
    assert np.array_equal(a.gamma, b.gamma)


def _detection_rate(supports_for):
    hits = 0
    for seed in range(50):
        cb, active, cov = instance(1000 + seed, n=8, v=4, ka=2, M=4096)
        sup = supports_for(active, np.random.default_rng(seed))
        est = coordinate_descent(cov, cb, SupportSet(0, sup), ADConfig(), 1.0, rng=seed)
        sel, _ = select_fragments(est.gamma, 2, 0)
        hits += set(sel) == set(active)
    return hits / 50


def test_detects_two_of_sixteen():
    assert _detection_rate(lambda a, r: np.arange(16)) >= 0.95


def test_restricted_support_not_worse():
    full = _detection_rate(lambda a, r: np.arange(16))

    def superset(active, r):
        extra = r.choice(np.setdiff1d(np.arange(16), active), 6, replace=False)
        return np.sort(np.concatenate([active, extra]))

    assert _detection_rate(superset) >= full


def test_select_fragments_examples():
    idx, val = select_fragments(np.array([0.5, 0, 2.1, 0.9]), 1, 1)
    assert idx.tolist() == [2, 3] and val.tolist() == [2.1, 0.9]
    assert select_fragments(np.zeros(5), 2, 3)[0].size == 0
    assert select_fragments(np.ones(3), 2, 0)[0].tolist() == [0, 1]
    assert select_fragments(np.array([0, 3.0, 0, 1.0]), 2, 5)[0].tolist() == [1, 3]


@pytest.mark.parametrize("kw", [dict(max_passes=0), dict(rel_tol=-1), dict(delta=-1), dict(order="random")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ADConfig(**kw)


def test_empty_support_rejected():
    cb = generate_codebook(0, 4, 2, 1.0)
    with pytest.raises(ValueError):
        coordinate_descent(np.eye(4), cb, SupportSet(0, np.zeros(0, int)))
