import numpy as np
import pytest

from dosefind.core import (
    DoseGrid,
    NonMonotoneError,
    OutOfRangeError,
    TieForMtdError,
    TrialState,
    empty_state,
    toxicity_outcome,
    validate_scenario,
)


def test_grid_defaults_evenly_spaced():
    g = DoseGrid(6)
    assert g.values == pytest.approx(tuple((u + 1) / 6 for u in range(6)))
    assert g.dose(1) == pytest.approx(1 / 6)
    assert g.clamp(0) == 1 and g.clamp(7) == 6


def test_grid_rejects_bad_values():
    with pytest.raises(ValueError):
        DoseGrid(1)
    with pytest.raises(ValueError):
        DoseGrid(3, (0.1, 0.1, 0.2))
    with pytest.raises(ValueError):
        DoseGrid(3, (0.1, 0.2))


def test_outcome_boundary_counts_as_toxicity():
    sc = validate_scenario((0.2, 0.5, 0.7), 0.5)
    assert toxicity_outcome(0.5, 2, sc) is True
    assert toxicity_outcome(0.99, 2, sc) is False


def test_outcome_monotone_in_level():
    sc = validate_scenario((0.1, 0.3, 0.6), 0.3)
    assert [toxicity_outcome(0.25, u, sc) for u in (1, 2, 3)] == [False, True, True]


def test_outcome_rejects_bad_level_and_threshold():
    sc = validate_scenario((0.1, 0.3, 0.6), 0.3)
    with pytest.raises(IndexError):
        toxicity_outcome(0.2, 4, sc)
    with pytest.raises(ValueError):
        toxicity_outcome(0.0, 1, sc)


def test_outcome_rate_matches_probability():
    sc = validate_scenario((0.1, 0.3, 0.6), 0.3)
    rng = np.random.default_rng(7)
    q = rng.random(10**6)
    for u, f in ((1, 0.1), (2, 0.3), (3, 0.6)):
        rate = np.mean(q <= sc.prob(u))
        se = np.sqrt(f * (1 - f) / len(q))
        assert abs(rate - f) < 3 * se


def test_validate_scenario_finds_mtd():
    sc = validate_scenario((0.05, 0.3, 0.6), 0.3)
    assert sc.true_mtd == 2


def test_validate_scenario_rejections():
    with pytest.raises(NonMonotoneError):
        validate_scenario((0.3, 0.2, 0.5), 0.3)
    with pytest.raises(OutOfRangeError):
        validate_scenario((0.0, 0.2, 0.5), 0.3)
    with pytest.raises(OutOfRangeError):
        validate_scenario((0.1, 0.2, 1.0), 0.3)
    with pytest.raises(TieForMtdError):
        validate_scenario((0.2, 0.4), 0.3)


def test_scenario_roundtrip_and_mismatch():
    sc = validate_scenario((0.05, 0.3, 0.6), 0.3)
    from dosefind.core import Scenario, ScenarioError

    assert Scenario.from_dict(sc.to_dict()) == sc
    bad = sc.to_dict()
    bad["true_mtd"] = 3
    with pytest.raises(ScenarioError):
        Scenario.from_dict(bad)


def test_tallies_reconstruct_from_cohorts():
    st = empty_state(4, 0.3)
    st = st.with_cohort(2, 3, 1).with_cohort(3, 3, 0).with_cohort(2, 3, 2)
    n = [0] * 4
    r = [0] * 4
    for c in st.cohorts:
        n[c.level - 1] += c.size
        r[c.level - 1] += c.dlt_count
    assert list(st.n_patients) == n
    assert list(st.dlt_counts) == r
    assert st.f_hat(2) == pytest.approx(0.5)
    assert st.total_patients == 9


def test_states_are_persistent_snapshots():
    s0 = empty_state(3, 0.3)
    s1 = s0.with_cohort(1, 2, 0)
    s2 = s1.with_cohort(2, 2, 1)
    # branch from the middle snapshot: s1 must not see s2's cohort
    s1b = s1.with_cohort(3, 2, 2)
    assert s0.n_cohorts == 0 and s1.n_cohorts == 1 and s2.n_cohorts == 2
    assert [c.level for c in s2.cohorts] == [1, 2]
    assert [c.level for c in s1b.cohorts] == [1, 3]
    assert s1.cohorts == s2.cohorts[:1]


def test_cohort_record_validation():
    st = empty_state(3, 0.3)
    with pytest.raises(ValueError):
        st.with_cohort(1, 2, 3)
    with pytest.raises(IndexError):
        st.with_cohort(9, 2, 0)
    with pytest.raises(ValueError):
        st.f_hat(3)


def test_threshold_stream_validation():
    from dosefind.core import ThresholdStream

    s = ThresholdStream((0.2, 0.4))
    assert len(s) == 2 and s.provenance == "random-draw"
    with pytest.raises(ValueError):
        ThresholdStream((0.2, 1.0))
