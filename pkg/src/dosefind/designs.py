"""Dose-transition policies.

Every design is a pure function of the trial state (plus an explicit
random source for the randomized ones): given the same history it always
proposes the same action.  Short-memory rules (the up-and-down family)
read only the most recent cohorts; long-memory rules (CCD, the isotonic
allocator, CRM) read the full per-level tallies.

Actions are either the next level to treat or an intrinsic stop carrying
the design's own estimate (only the 3+3 protocol stops by itself).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import TrialState
from . import crm as crm_mod
from .isotonic import cir, cir_mtd_select


@dataclass(frozen=True)
class DesignAction:
    """Either NextDose(level) or Stop(selected or None)."""

    stop: bool = False
    level: int | None = None
    selected: int | None = None

    @staticmethod
    def next_dose(level: int) -> "DesignAction":
        return DesignAction(stop=False, level=level)

    @staticmethod
    def stop_trial(selected: int | None) -> "DesignAction":
        return DesignAction(stop=True, selected=selected)


@dataclass(frozen=True)
class GroupUdRule:
    """Group up-and-down: cohorts of k, escalate when at most `a` DLTs,
    descend when at least `b`."""

    k: int
    a: int = 0
    b: int = 1

    def __post_init__(self):
        if not 0 <= self.a < self.b <= self.k:
            raise ValueError("need 0 <= a < b <= k")


@dataclass(frozen=True)
class CcdRule:
    """Cumulative cohort design's tolerance interval (target +/- half_width)."""

    target: float
    half_width: float

    def __post_init__(self):
        if not 0 < self.half_width < min(self.target, 1 - self.target):
            raise ValueError("half width must satisfy 0 < w < min(p, 1-p)")


def group_ud_next(state: TrialState, rule: GroupUdRule) -> DesignAction:
    """Escalate / stay / descend on the last cohort's DLT count alone."""
    last = state.last_cohort
    if last is None:
        raise ValueError("no cohort treated yet")
    if last.size != rule.k:
        raise ValueError(f"cohort size {last.size} does not match rule k={rule.k}")
    if last.dlt_count <= rule.a:
        nxt = last.level + 1
    elif last.dlt_count >= rule.b:
        nxt = last.level - 1
    else:
        nxt = last.level
    return DesignAction.next_dose(state.grid.clamp(nxt))


def k_in_a_row_next(state: TrialState, k: int = 2) -> DesignAction:
    """Escalate only after k consecutive non-toxicities at the current dose;
    descend after every toxicity; otherwise repeat the dose.

    Single-patient cohorts only.  Needing k consecutive observations at the
    current dose doubles as the start-up condition: no escalation can occur
    before k patients have been treated there.
    """
    last = state.last_cohort
    if last is None:
        raise ValueError("no cohort treated yet")
    tail = state.recent(k)
    if any(c.size != 1 for c in tail):
        raise ValueError("k-in-a-row requires single-patient cohorts")
    if last.dlt_count == 1:
        return DesignAction.next_dose(state.grid.clamp(last.level - 1))
    if len(tail) == k and all(
        c.level == last.level and c.dlt_count == 0 for c in tail
    ):
        return DesignAction.next_dose(state.grid.clamp(last.level + 1))
    return DesignAction.next_dose(last.level)


def ccd_next(state: TrialState, rule: CcdRule) -> DesignAction:
    """Compare the cumulative rate at the current dose to the interval."""
    last = state.last_cohort
    if last is None:
        raise ValueError("no cohort treated yet")
    f_hat = state.f_hat(last.level)
    if f_hat < rule.target - rule.half_width:
        nxt = last.level + 1
    elif f_hat > rule.target + rule.half_width:
        nxt = last.level - 1
    else:
        nxt = last.level
    return DesignAction.next_dose(state.grid.clamp(nxt))


def three_plus_three_estimate(state: TrialState) -> int | None:
    """Highest level with observed rate below 1/3, or None."""
    best = None
    for u in state.observed_levels():
        if state.f_hat(u) < 1.0 / 3.0:
            best = u
    return best


def three_plus_three_step(state: TrialState) -> DesignAction:
    """The classical six-step 3+3 protocol.

    First cohort of 3 at a level: 0 DLTs escalate, 2-3 descend, 1 repeats
    the level.  Second cohort: with 2+ DLTs among the 6 descend, otherwise
    escalate.  Whenever the mandated level would receive a third cohort the
    trial stops, estimating the highest level with observed rate < 1/3.
    """
    last = state.last_cohort
    if last is None:
        raise ValueError("no cohort treated yet")
    if any(c.size != 3 for c in state.cohorts):
        raise ValueError("3+3 requires cohorts of 3")
    visits = state.cohorts_at(last.level)
    if visits > 2:
        raise ValueError(f"malformed history: level {last.level} treated {visits} times")
    if visits == 1:
        if last.dlt_count == 0:
            nxt = last.level + 1
        elif last.dlt_count >= 2:
            nxt = last.level - 1
        else:
            nxt = last.level
    else:
        cum = state.dlt_counts[last.level - 1]
        nxt = last.level - 1 if cum >= 2 else last.level + 1
    nxt = state.grid.clamp(nxt)
    if state.cohorts_at(nxt) >= 2:
        return DesignAction.stop_trial(three_plus_three_estimate(state))
    return DesignAction.next_dose(nxt)


def isotonic_choice(state: TrialState) -> tuple[int, float]:
    """Observed level whose centered-isotonic rate is closest to target.

    Returns (level, fitted value there); ties go to the lower level.
    """
    observed = state.observed_levels()
    x = np.array([state.grid.dose(u) for u in observed])
    y = np.array([state.f_hat(u) for u in observed])
    wt = np.array([state.n_patients[u - 1] for u in observed], dtype=float)
    fit = cir(y, x, wt)
    dist = np.abs(fit.output_y - state.target)
    idx = int(np.argmin(dist))
    return observed[idx], float(fit.output_y[idx])


def rad_next(state: TrialState, rng: np.random.Generator) -> DesignAction:
    """Isotonic allocation with vanishing randomization.

    The base choice is the level whose isotonic rate estimate is closest to
    target.  With probability 1/(n+1), n being the number of patients
    observed so far, the adjacent level on the opposite side of target is
    substituted (no substitution when the estimate hits target exactly).
    """
    if state.n_cohorts == 0:
        raise ValueError("no cohort treated yet")
    level, fitted = isotonic_choice(state)
    n = state.total_patients
    if rng.random() < 1.0 / (n + 1):
        if fitted < state.target:
            level = state.grid.clamp(level + 1)
        elif fitted > state.target:
            level = state.grid.clamp(level - 1)
    return DesignAction.next_dose(level)


@dataclass(frozen=True)
class HybridRule:
    """Up-and-down base with a long-memory override behind a confidence gate.

    beta in (0, 0.5): the override is accepted only when the probability
    weight favoring the base action's side falls below beta.  Smaller beta
    means fewer overrides.
    """

    beta: float

    def __post_init__(self):
        if not 0.0 < self.beta < 0.5:
            raise ValueError("beta must lie in (0, 0.5)")


def binomial_tail(n: int, k: int, p: float, upper: bool) -> float:
    """P(X >= k) (upper) or P(X <= k) for X ~ Binomial(n, p), exactly."""
    ks = range(k, n + 1) if upper else range(0, k + 1)
    return float(sum(
        math.comb(n, i) * p**i * (1 - p) ** (n - i) for i in ks
    ))


def hybrid_confidence_accepts(state: TrialState, base_level: int,
                              override_level: int, beta: float,
                              overlay) -> bool:
    """Does the override pass the confidence gate against the base action?

    With a CRM overlay the gate uses posterior MTD weights: a downward
    override needs the weight of levels at or above the base proposal to be
    below beta (and mirrored upward).  With a CCD overlay an exact binomial
    tail at the current dose stands in for the posterior: the null puts
    F(current) on the interval edge that favors the base action, and the
    override is accepted when that tail probability is below beta.
    """
    if override_level == base_level:
        return True
    downward = override_level < base_level
    if isinstance(overlay, CrmDesign):
        summary = overlay.posterior(state)
        w = np.asarray(summary.weights)
        if downward:
            opposing = float(w[base_level - 1:].sum())
        else:
            opposing = float(w[:base_level].sum())
        return opposing < beta
    if isinstance(overlay, CcdDesign):
        last = state.last_cohort
        n_cur = state.n_patients[last.level - 1]
        r_cur = state.dlt_counts[last.level - 1]
        rule = overlay.rule
        if downward:
            pval = binomial_tail(n_cur, r_cur, rule.target - rule.half_width, upper=True)
        else:
            pval = binomial_tail(n_cur, r_cur, rule.target + rule.half_width, upper=False)
        return pval < beta
    raise TypeError(f"unsupported overlay design {type(overlay).__name__}")


def hybrid_next(state: TrialState, base, overlay, rule: HybridRule,
                rng: np.random.Generator | None = None) -> DesignAction:
    """Base up-and-down action unless a confident overlay disagrees.

    Accepted overrides are still held to coherence with the last cohort:
    never below the current dose after a clean cohort, never above it after
    one with DLTs.  The walk stays the default and the long-memory rule can
    only temper it, not reverse the evidence.
    """
    base_action = base.next_action(state, rng)
    overlay_action = overlay.next_action(state, rng)
    if base_action.stop or overlay_action.stop:
        return base_action
    if overlay_action.level == base_action.level:
        return base_action
    if hybrid_confidence_accepts(state, base_action.level, overlay_action.level,
                                 rule.beta, overlay):
        last = state.last_cohort
        level = overlay_action.level
        if last.dlt_count == 0:
            level = max(level, last.level)
        else:
            level = min(level, last.level)
        return DesignAction.next_dose(level)
    return base_action


# ---------------------------------------------------------------------------
# Policy objects: a uniform surface over the rule functions above, carrying
# the cohort size and the design's end-of-trial estimator.


class GroupUpDownDesign:
    name = "group_ud"

    def __init__(self, rule: GroupUdRule):
        self.rule = rule
        self.cohort_size = rule.k

    def next_action(self, state, rng=None) -> DesignAction:
        return group_ud_next(state, self.rule)

    def select_mtd(self, state) -> int | None:
        return cir_mtd_select(state)


class KInARowDesign:
    name = "kinrow"
    cohort_size = 1

    def __init__(self, k: int = 2):
        self.k = k

    def next_action(self, state, rng=None) -> DesignAction:
        return k_in_a_row_next(state, self.k)

    def select_mtd(self, state) -> int | None:
        return cir_mtd_select(state)


class CcdDesign:
    name = "ccd"

    def __init__(self, rule: CcdRule, cohort_size: int = 1):
        self.rule = rule
        self.cohort_size = cohort_size

    def next_action(self, state, rng=None) -> DesignAction:
        return ccd_next(state, self.rule)

    def select_mtd(self, state) -> int | None:
        return cir_mtd_select(state)


class ThreePlusThreeDesign:
    name = "three_plus_three"
    cohort_size = 3

    def next_action(self, state, rng=None) -> DesignAction:
        return three_plus_three_step(state)

    def select_mtd(self, state) -> int | None:
        return three_plus_three_estimate(state)


class RadDesign:
    name = "rad"

    def __init__(self, cohort_size: int = 1):
        self.cohort_size = cohort_size

    def next_action(self, state, rng=None) -> DesignAction:
        if rng is None:
            raise ValueError("randomized design needs a random source")
        return rad_next(state, rng)

    def select_mtd(self, state) -> int | None:
        return cir_mtd_select(state)


class CrmDesign:
    """CRM policy with a per-instance posterior cache.

    The posterior depends on the tallies only, so repeated states across an
    ensemble (common early in trials) are computed once.
    """

    name = "crm"

    def __init__(self, model, prior, step_constraint: bool = True,
                 cohort_size: int = 1):
        self.model = model
        self.prior = prior
        self.step_constraint = step_constraint
        self.cohort_size = cohort_size
        self._cache: dict = {}

    def posterior(self, state, include_weights: bool = True):
        key = (state.n_patients, state.dlt_counts, state.target, include_weights)
        hit = self._cache.get(key)
        if hit is None:
            hit = crm_mod.posterior_theta(state, self.model, self.prior,
                                          include_weights=include_weights)
            self._cache[key] = hit
        return hit

    def _argmin(self, state) -> int:
        summary = self.posterior(state, include_weights=False)
        return crm_mod._argmin_level(summary.g_hat, state.target)

    def next_action(self, state, rng=None) -> DesignAction:
        last = state.last_cohort
        if last is None:
            raise ValueError("no cohort treated yet")
        candidate = self._argmin(state)
        if self.step_constraint:
            candidate = min(max(candidate, last.level - 1), last.level + 1)
        return DesignAction.next_dose(state.grid.clamp(candidate))

    def select_mtd(self, state) -> int | None:
        return self._argmin(state)


class HybridDesign:
    name = "hybrid"

    def __init__(self, base, overlay, rule: HybridRule):
        if base.cohort_size != overlay.cohort_size:
            raise ValueError("base and overlay must share a cohort size")
        self.base = base
        self.overlay = overlay
        self.rule = rule
        self.cohort_size = base.cohort_size

    def next_action(self, state, rng=None) -> DesignAction:
        return hybrid_next(state, self.base, self.overlay, self.rule, rng)

    def select_mtd(self, state) -> int | None:
        return cir_mtd_select(state)
