import numpy as np
import pytest

from dosefind.core import empty_state
from dosefind.isotonic import cir, cir_mtd_select, interpolate_target_dose

from oracles import exhaustive_pava_blocks, isotonic_fit_minimax


def expand_blocks(result):
    """Blockwise-constant per-point values implied by the pooled nodes."""
    out = np.empty(len(result.original_x))
    for (lo, hi), val in zip(result.blocks, result.alg_y):
        out[lo:hi] = val
    return out


def test_monotone_input_unchanged():
    r = cir(np.array([0.1, 0.2, 0.4]), np.array([1.0, 2.0, 3.0]))
    assert np.array_equal(r.output_y, [0.1, 0.2, 0.4])
    assert r.node_count() == 3


def test_two_point_pool_by_hand():
    r = cir(np.array([0.2, 0.1]), np.array([1.0, 2.0]), np.array([1.0, 1.0]))
    assert r.alg_x == pytest.approx([1.5])
    assert r.alg_y == pytest.approx([0.15])
    assert r.alg_wt == pytest.approx([2.0])
    assert r.output_y == pytest.approx([0.15, 0.15])


def test_yes_no_table_conversion():
    table = np.array([[1.0, 3.0], [3.0, 1.0]])
    r = cir(table, np.array([1.0, 2.0]))
    assert r.output_y == pytest.approx([0.25, 0.75])
    assert r.alg_wt == pytest.approx([4.0, 4.0])


def test_yes_no_table_drops_empty_rows():
    table = np.array([[1.0, 3.0], [0.0, 0.0], [3.0, 1.0]])
    r = cir(table, np.array([1.0, 2.0, 3.0]))
    assert r.original_x == pytest.approx([1.0, 3.0])
    assert r.output_y == pytest.approx([0.25, 0.75])


def test_input_validation():
    with pytest.raises(ValueError):
        cir(np.array([0.1, 0.2]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        cir(np.array([0.1, 0.2, 0.3]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        cir(np.array([[0.1, 0.2, 0.3]]).T @ np.ones((1, 3)), np.array([1.0, 2.0, 3.0]))


def test_single_point_returned_unchanged():
    r = cir(np.array([0.42]), np.array([3.0]))
    assert r.output_y == pytest.approx([0.42])
    assert r.alg_x == pytest.approx([3.0])


def test_pooling_example_with_weights():
    # rates (0.2, 0.4, 0.3) at doses (1/3, 2/3, 1), weights (2, 2, 4):
    # the violating pair pools into a node at x = 8/9, y = 1/3.
    x = np.array([1 / 3, 2 / 3, 1.0])
    r = cir(np.array([0.2, 0.4, 0.3]), x, np.array([2.0, 2.0, 4.0]))
    assert r.node_count() == 2
    assert r.alg_x == pytest.approx([1 / 3, 8 / 9])
    assert r.alg_y == pytest.approx([0.2, 1 / 3])
    assert interpolate_target_dose(r, 0.3) == pytest.approx(0.75)


def test_oracle_battery_random_inputs():
    rng = np.random.default_rng(1234)
    for _ in range(2000):
        n = int(rng.integers(2, 9))
        y = rng.random(n)
        wt = rng.uniform(0.25, 4.0, n)
        x = np.sort(rng.choice(np.arange(1, 20), size=n, replace=False)).astype(float)
        r = cir(y, x, wt)
        # pooled blocks equal the exhaustive-search optimum, and the node
        # means over those spans match bitwise
        blocks = exhaustive_pava_blocks(y, wt)
        assert list(r.blocks) == blocks
        oracle_means = np.array(
            [y[lo] if hi - lo == 1 else np.average(y[lo:hi], weights=wt[lo:hi])
             for lo, hi in blocks])
        assert np.array_equal(r.alg_y, oracle_means)
        # the minimax formula agrees up to roundoff
        assert expand_blocks(r) == pytest.approx(
            isotonic_fit_minimax(y, wt), rel=1e-12, abs=1e-12)
        # monotone output
        assert np.all(np.diff(r.output_y) >= 0)
        assert np.all(np.diff(r.alg_y) > 0)
        # pooled nodes are a fixed point
        r2 = cir(r.alg_y, r.alg_x, r.alg_wt)
        assert np.array_equal(r2.output_y, r.alg_y)
        assert np.array_equal(r2.alg_x, r.alg_x)
        # pooling preserves the weighted sum
        assert np.dot(r.alg_y, r.alg_wt) == pytest.approx(np.dot(y, wt))
        assert r.alg_wt.sum() == pytest.approx(wt.sum())


def test_weight_scaling_invariance():
    rng = np.random.default_rng(5)
    y = rng.random(6)
    x = np.arange(1.0, 7.0)
    wt = rng.uniform(0.5, 2.0, 6)
    a = cir(y, x, wt)
    b = cir(y, x, wt * 7.5)
    assert a.output_y == pytest.approx(b.output_y)
    assert a.alg_x == pytest.approx(b.alg_x)


def test_decreasing_case_is_negation():
    rng = np.random.default_rng(6)
    y = rng.random(7)
    x = np.arange(1.0, 8.0)
    wt = rng.uniform(0.5, 2.0, 7)
    dec = cir(y, x, wt, dec=True)
    neg = cir(-y, x, wt)
    assert dec.output_y == pytest.approx(-neg.output_y)
    assert dec.alg_y == pytest.approx(-neg.alg_y)


def test_linear_boundary_extrapolation():
    y = np.array([0.2, 0.1, 0.3, 0.4])
    x = np.array([1.0, 2.0, 3.0, 4.0])
    const = cir(y, x)
    lin = cir(y, x, boundary=1)
    # pooled nodes span [1.5, 4]: constant mode repeats the first node at x=1
    assert const.output_y[0] == pytest.approx(const.alg_y[0])
    # linear mode extends the first segment's slope down to x=1
    slope = (lin.alg_y[1] - lin.alg_y[0]) / (lin.alg_x[1] - lin.alg_x[0])
    assert lin.output_y[0] == pytest.approx(lin.alg_y[0] - slope * (lin.alg_x[0] - 1.0))
    assert lin.output_y[-1] == pytest.approx(const.output_y[-1])


def test_linear_boundary_single_node_uses_bounds():
    # both points pool into one node at (0.3, 0.15); linear boundary mode
    # anchors the interpolant at the configured corner bounds
    r = cir(np.array([0.2, 0.1]), np.array([0.2, 0.4]), boundary=1,
            xbounds=(0.0, 1.0), ybounds=(0.0, 1.0))
    assert r.node_count() == 1
    assert r.output_y == pytest.approx([0.15 * (0.2 / 0.3),
                                        0.15 + 0.85 * (0.1 / 0.7)])


def test_interpolate_target_clamps_outside_range():
    r = cir(np.array([0.35, 0.45]), np.array([1.0, 2.0]))
    assert interpolate_target_dose(r, 0.3) == pytest.approx(1.0)
    assert interpolate_target_dose(r, 0.5) == pytest.approx(2.0)


def test_mtd_select_monotone_rates():
    st = empty_state(3, 0.3)
    st = st.with_cohort(1, 10, 1).with_cohort(2, 10, 3).with_cohort(3, 10, 5)
    # rates (0.1, 0.3, 0.5): crossing is exactly at d2
    assert cir_mtd_select(st) == 2


def test_mtd_select_with_pooling():
    # rates (0.2, 0.4, 0.3) with weights (5, 5, 10): nodes (1/3, 0.2) and
    # (8/9, 1/3); the 0.3 crossing lands at dose 0.75, nearest level 2.
    st = empty_state(3, 0.3)
    st = st.with_cohort(1, 5, 1).with_cohort(2, 5, 2).with_cohort(3, 10, 3)
    assert cir_mtd_select(st) == 2


def test_mtd_select_single_level():
    st = empty_state(4, 0.3).with_cohort(3, 6, 2)
    assert cir_mtd_select(st) == 3


def test_mtd_select_requires_data():
    with pytest.raises(ValueError):
        cir_mtd_select(empty_state(3, 0.3))
