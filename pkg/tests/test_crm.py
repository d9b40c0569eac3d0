import math

import numpy as np
import pytest

from dosefind.core import empty_state
from dosefind.crm import (
    ChevretModel,
    LogNormalPrior,
    PowerModel,
    Skeleton,
    chevret_backcalc,
    crm_mtd_estimate,
    crm_next,
    posterior_theta,
    power_curve,
    PRIOR_PRESETS,
    SKELETON_PRESETS,
)

from oracles import posterior_dense_grid

SIX = Skeleton(SKELETON_PRESETS["six_level"])
PRIOR_A = PRIOR_PRESETS["moderate"]


def test_power_curve_identity():
    sk = Skeleton((0.1, 0.3, 0.5))
    assert power_curve(sk, 1.0) == pytest.approx([0.1, 0.3, 0.5])


def test_power_curve_exact_squares():
    sk = Skeleton((0.25, 0.5))
    assert power_curve(sk, 2.0) == pytest.approx([0.0625, 0.25])


def test_power_curve_monotone_for_random_theta():
    rng = np.random.default_rng(3)
    for _ in range(100):
        theta = float(rng.lognormal(0, 1.2))
        g = power_curve(SIX, theta)
        assert np.all(np.diff(g) > 0)
    with pytest.raises(ValueError):
        power_curve(SIX, -1.0)


def test_skeleton_validation():
    with pytest.raises(ValueError):
        Skeleton((0.3, 0.2))
    with pytest.raises(ValueError):
        Skeleton((0.0, 0.5))


def test_chevret_backcalc_closed_form():
    sk = Skeleton((0.1, 0.5, 0.9))
    xi = chevret_backcalc(sk, beta0=0.0, theta0=1.0)
    assert xi[1] == pytest.approx(0.0, abs=1e-15)
    assert xi[0] == pytest.approx(-math.log(9.0), abs=1e-12)


def test_chevret_roundtrip():
    sk = Skeleton(SKELETON_PRESETS["seven_level"])
    model = ChevretModel(sk, beta0=0.5, theta0=1.7)
    curve = model.curve(1.7)
    assert np.max(np.abs(curve - np.asarray(sk.phi))) < 1e-12
    assert np.all(np.diff(model.xi) > 0)


def test_chevret_monotone_curve():
    sk = Skeleton((0.05, 0.2, 0.4, 0.8))
    model = ChevretModel(sk)
    rng = np.random.default_rng(4)
    for _ in range(50):
        g = model.curve(float(rng.lognormal(0, 1.0)))
        assert np.all(np.diff(g) > 0)


def test_prior_only_posterior_is_lognormal_mean():
    state = empty_state(6, 0.3)
    s = posterior_theta(state, PowerModel(SIX), PRIOR_A)
    assert s.theta_mean == pytest.approx(math.exp(-0.2 + 0.85**2 / 2), rel=1e-8)
    assert sum(s.weights) == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.diff(s.g_hat) > 0)


def test_prior_predictive_weights_moderate_prior():
    state = empty_state(6, 0.3)
    s = posterior_theta(state, PowerModel(SIX), PRIOR_A)
    expected = (0.25, 0.14, 0.20, 0.22, 0.14, 0.05)
    for w, e in zip(s.weights, expected):
        assert abs(w - e) <= 0.01


def test_posterior_single_patient_matches_dense_grid():
    state = empty_state(6, 0.3).with_cohort(1, 1, 0)
    s = posterior_theta(state, PowerModel(SIX), PRIOR_A)
    n, r = state.tallies()
    theta_ref, g_ref, w_ref = posterior_dense_grid(
        PowerModel(SIX), PRIOR_A, 0.3, n, r)
    assert s.theta_mean == pytest.approx(theta_ref, rel=1e-6)
    for w, wr in zip(s.weights, w_ref):
        assert w == pytest.approx(wr, rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("model_kind", ["power", "chevret"])
def test_posterior_matches_dense_grid_randomized(model_kind):
    rng = np.random.default_rng(42 if model_kind == "power" else 43)
    for _ in range(25):
        l = int(rng.integers(3, 7))
        raw = np.sort(rng.uniform(0.02, 0.9, size=l))
        while np.any(np.diff(raw) < 0.02):
            raw = np.sort(rng.uniform(0.02, 0.9, size=l))
        sk = Skeleton(tuple(raw))
        model = PowerModel(sk) if model_kind == "power" else ChevretModel(sk)
        prior = LogNormalPrior(float(rng.uniform(-0.8, 0.4)),
                               float(rng.uniform(0.4, 1.3)))
        state = empty_state(l, 0.3)
        for _ in range(int(rng.integers(1, 4))):
            u = int(rng.integers(1, l + 1))
            size = int(rng.integers(1, 5))
            state = state.with_cohort(u, size, int(rng.integers(0, size + 1)))
        n, r = state.tallies()
        s = posterior_theta(state, model, prior)
        theta_ref, g_ref, w_ref = posterior_dense_grid(model, prior, 0.3, n, r)
        assert s.theta_mean == pytest.approx(theta_ref, rel=1e-6)
        assert np.asarray(s.g_hat) == pytest.approx(g_ref, rel=1e-6)
        for w, wr in zip(s.weights, w_ref):
            assert w == pytest.approx(wr, rel=1e-6, abs=1e-9)


def test_crm_next_moves_toward_target():
    state = empty_state(6, 0.3).with_cohort(1, 2, 0)
    nxt = crm_next(state, PowerModel(SIX), PRIOR_A)
    assert nxt == 2


def test_crm_next_step_constraint_clamps():
    # five DLT-free cohorts at the bottom pull the estimate far above the
    # current dose; the recommendation must still move only one level
    state = empty_state(6, 0.3)
    for _ in range(5):
        state = state.with_cohort(1, 3, 0)
    unconstrained = crm_mtd_estimate(state, PowerModel(SIX), PRIOR_A)
    assert unconstrained >= 3
    assert crm_next(state, PowerModel(SIX), PRIOR_A) == 2
    assert crm_next(state, PowerModel(SIX), PRIOR_A,
                    step_constraint=False) == unconstrained


def test_crm_requires_history_for_next():
    with pytest.raises(ValueError):
        crm_next(empty_state(6, 0.3), PowerModel(SIX), PRIOR_A)


def test_argmin_tie_breaks_low():
    from dosefind.crm import _argmin_level

    assert _argmin_level((0.2, 0.4), 0.3) == 1
    assert _argmin_level((0.1, 0.28, 0.5), 0.3) == 2


def test_mtd_estimate_is_unconstrained_argmin():
    state = empty_state(6, 0.3)
    state = state.with_cohort(2, 2, 0).with_cohort(3, 2, 0).with_cohort(4, 2, 1)
    model = PowerModel(SIX)
    est = crm_mtd_estimate(state, model, PRIOR_A)
    s = posterior_theta(state, model, PRIOR_A, include_weights=False)
    assert est == int(np.argmin(np.abs(np.asarray(s.g_hat) - 0.3))) + 1


def test_coherence_when_current_is_estimate():
    # Whenever the current dose is already the unconstrained argmin, a DLT
    # never pushes the recommendation up and a clean outcome never pushes
    # it down (single-patient cohorts).
    rng = np.random.default_rng(11)
    model = PowerModel(SIX)
    checked = 0
    for _ in range(150):
        state = empty_state(6, 0.3)
        level = 2
        for _ in range(int(rng.integers(1, 12))):
            state = state.with_cohort(level, 1, int(rng.random() < 0.3))
            level = crm_next(state, model, PRIOR_A)
        current = level
        est = crm_mtd_estimate(state, model, PRIOR_A)
        if current != est:
            continue
        checked += 1
        with_dlt = state.with_cohort(current, 1, 1)
        assert crm_next(with_dlt, model, PRIOR_A) <= current
        no_dlt = state.with_cohort(current, 1, 0)
        assert crm_next(no_dlt, model, PRIOR_A) >= current
    assert checked > 30


def test_dlt_never_raises_recommendation():
    # adding toxicities at a fixed dose only ever lowers the power-model
    # estimate
    rng = np.random.default_rng(12)
    model = PowerModel(SIX)
    for _ in range(80):
        state = empty_state(6, 0.3)
        for _ in range(int(rng.integers(1, 8))):
            u = int(rng.integers(1, 7))
            size = int(rng.integers(1, 4))
            state = state.with_cohort(u, size, int(rng.integers(0, size + 1)))
        u = state.last_cohort.level
        base = crm_mtd_estimate(state, model, PRIOR_A)
        worse = state.with_cohort(u, 1, 1)
        assert crm_mtd_estimate(worse, model, PRIOR_A) <= base


def test_prior_weight_columns_all_three():
    state = empty_state(6, 0.3)
    model = PowerModel(SIX)
    expectations = {
        "moderate": (0.25, 0.14, 0.20, 0.22, 0.14, 0.05),
        "diffuse": (0.26, 0.10, 0.15, 0.18, 0.17, 0.15),
        "conservative": (0.33, 0.22, 0.25, 0.16, 0.04, 0.002),
    }
    for name, expected in expectations.items():
        s = posterior_theta(state, model, PRIOR_PRESETS[name])
        for w, e in zip(s.weights, expected):
            assert abs(w - e) <= 0.01, (name, s.weights)
