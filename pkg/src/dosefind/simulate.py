"""Ensemble simulation with common random numbers, and trajectory metrics.

Per-patient toxicity thresholds are uniform quantiles drawn from
counter-based streams: run i always sees Philox(key=master_seed,
counter=(i, purpose, 0, 0)), so every design evaluated at run i faces the
same simulated patients in the same order, ensembles are reproducible
bit-for-bit from the master seed alone, and runs can execute in any order
or on any number of workers without changing the aggregate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Scenario, ThresholdStream, TrialState, toxicity_outcome


_THRESHOLD_PURPOSE = 0
_DESIGN_PURPOSE = 1


def run_rng(master_seed: int, run_index: int, purpose: int) -> np.random.Generator:
    """Counter-based per-run stream: key = master seed, counter = (run, purpose)."""
    bg = np.random.Philox(key=master_seed, counter=[run_index, purpose, 0, 0])
    return np.random.Generator(bg)


def _open_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniforms guaranteed inside the open interval (0, 1)."""
    return rng.integers(1, 2**53, size=size) / float(2**53)


def random_stream(master_seed: int, run_index: int, n_patients: int) -> ThresholdStream:
    rng = run_rng(master_seed, run_index, _THRESHOLD_PURPOSE)
    return ThresholdStream(tuple(_open_uniform(rng, n_patients)), "random-draw")


def design_rng(master_seed: int, run_index: int) -> np.random.Generator:
    return run_rng(master_seed, run_index, _DESIGN_PURPOSE)


@dataclass(frozen=True)
class Trajectory:
    """One complete simulated trial."""

    scenario: Scenario
    design_name: str
    state: TrialState
    selected: int | None
    planned_cohorts: int
    stopped_early: bool = False

    @property
    def cohorts(self):
        return self.state.cohorts


def run_trial(design, scenario: Scenario, stream: ThresholdStream,
              n_cohorts: int, start_level: int,
              rng: np.random.Generator | None = None) -> Trajectory:
    """Apply a design's transition rule cohort by cohort.

    Thresholds are consumed strictly in patient order, whatever doses get
    assigned — the common-random-numbers contract.  Raises if the stream
    is too short; stops early only on the design's own stop action.
    """
    scenario.grid.check_level(start_level)
    state = TrialState(grid=scenario.grid, target=scenario.target)
    level = start_level
    consumed = 0
    stopped = False
    selected = None
    for _ in range(n_cohorts):
        k = design.cohort_size
        if consumed + k > len(stream.q):
            raise ValueError(
                f"threshold stream exhausted: need {consumed + k}, have {len(stream.q)}"
            )
        dlts = sum(
            toxicity_outcome(stream.q[consumed + j], level, scenario)
            for j in range(k)
        )
        consumed += k
        state = state.with_cohort(level, k, int(dlts))
        action = design.next_action(state, rng)
        if action.stop:
            stopped = True
            selected = action.selected
            break
        level = action.level
    if not stopped:
        selected = design.select_mtd(state)
    return Trajectory(scenario, design.name, state, selected, n_cohorts, stopped)


def perfect_threshold_set(scenario: Scenario, n: int = 32,
                          target: float | None = None) -> ThresholdStream:
    """The near-ideal fixed threshold multiset for order-permutation runs.

    Starts from the quantiles i/(n+1); the largest quantile strictly below
    the target and the smallest strictly above it are knocked out and
    replaced by duplicates of the extreme quantiles 1/(n+1) and n/(n+1),
    so the set is no longer unrealistically well-spaced around the target.
    """
    if target is None:
        target = scenario.target
    lo_q = 1.0 / (n + 1)
    hi_q = n / (n + 1.0)
    if not lo_q < target < hi_q:
        raise ValueError(f"target {target} outside ({lo_q:.4f}, {hi_q:.4f})")
    qs = [i / (n + 1.0) for i in range(1, n + 1)]
    below = max(q for q in qs if q < target)
    above = min(q for q in qs if q > target)
    qs.remove(below)
    qs.remove(above)
    qs.extend([lo_q, hi_q])
    return ThresholdStream(tuple(sorted(qs)), "permuted-fixed-set")


@dataclass(frozen=True)
class RunMetrics:
    """Per-run summary statistics.

    n_star counts cohorts at the true MTD excluding the arbitrary first
    cohort.  settling_cohort is the cohort completing the first window of
    5 consecutive identical assignments (scanning from cohort 2 on),
    settled_level the dose it locked onto.  A transition is incoherent if
    it escalates right after a cohort with a DLT or de-escalates right
    after a DLT-free cohort.
    """

    n_star: int
    settling_cohort: int | None
    settled_level: int | None
    incoherent_count: int
    total_dlts: int
    dlts_excl_first: int
    selected_mtd: int | None
    selected_at_half: int | None
    true_mtd: int
    correct_full: bool
    correct_half: bool
    n_cohorts: int
    run_id: int = 0
    scenario_id: int = 0
    design: str = ""


SETTLE_WINDOW = 5


def _find_settling(levels: tuple[int, ...]) -> tuple[int | None, int | None]:
    # Windows may begin at cohort 2 at the earliest, so the first cohort
    # (the arbitrary starting dose) never counts toward a settling run.
    for c in range(SETTLE_WINDOW + 1, len(levels) + 1):  # 1-based cohort index
        window = levels[c - SETTLE_WINDOW:c]
        if len(set(window)) == 1:
            return c, window[0]
    return None, None


def compute_metrics(traj: Trajectory, true_mtd: int | None = None,
                    design=None) -> RunMetrics:
    """Evaluate one trajectory against the scenario's true MTD."""
    if true_mtd is None:
        true_mtd = traj.scenario.true_mtd
    cohorts = traj.cohorts
    levels = tuple(c.level for c in cohorts)
    n_star = sum(1 for c in cohorts[1:] if c.level == true_mtd)
    settling_cohort, settled_level = _find_settling(levels)
    incoherent = 0
    for prev, nxt in zip(cohorts, cohorts[1:]):
        if nxt.level > prev.level and prev.dlt_count >= 1:
            incoherent += 1
        elif nxt.level < prev.level and prev.dlt_count == 0:
            incoherent += 1
    total_dlts = sum(c.dlt_count for c in cohorts)
    dlts_excl_first = sum(c.dlt_count for c in cohorts[1:])

    selected_half = None
    if design is not None and cohorts:
        half = min(len(cohorts), max(1, traj.planned_cohorts // 2))
        prefix = TrialState(grid=traj.scenario.grid, target=traj.scenario.target)
        for c in cohorts[:half]:
            prefix = prefix.with_cohort(c.level, c.size, c.dlt_count)
        selected_half = design.select_mtd(prefix)

    return RunMetrics(
        n_star=n_star,
        settling_cohort=settling_cohort,
        settled_level=settled_level,
        incoherent_count=incoherent,
        total_dlts=total_dlts,
        dlts_excl_first=dlts_excl_first,
        selected_mtd=traj.selected,
        selected_at_half=selected_half,
        true_mtd=true_mtd,
        correct_full=traj.selected == true_mtd,
        correct_half=selected_half == true_mtd,
        n_cohorts=len(cohorts),
        design=traj.design_name,
    )


def run_permutation_ensemble(design, scenario: Scenario, m: int,
                             rng: np.random.Generator,
                             n_cohorts: int | None = None,
                             start_level: int = 2) -> list[RunMetrics]:
    """Re-run the same fixed threshold multiset in m random orders."""
    base = perfect_threshold_set(scenario)
    if n_cohorts is None:
        n_cohorts = len(base.q) // design.cohort_size
    out = []
    for i in range(m):
        perm = tuple(np.asarray(base.q)[rng.permutation(len(base.q))])
        stream = ThresholdStream(perm, "permuted-fixed-set")
        traj = run_trial(design, scenario, stream, n_cohorts, start_level, rng)
        metrics = compute_metrics(traj, design=design)
        out.append(_with_ids(metrics, run_id=i, scenario_id=0))
    return out


def _with_ids(metrics: RunMetrics, run_id: int, scenario_id: int) -> RunMetrics:
    return RunMetrics(**{**metrics.__dict__, "run_id": run_id,
                         "scenario_id": scenario_id})


# ---------------------------------------------------------------------------
# Ensemble aggregation


_HIGH_TOX_CUTOFFS = {7: 9, 4: 10}


@dataclass(frozen=True)
class EnsembleReport:
    """Operating characteristics of a homogeneous ensemble."""

    design: str
    n_runs: int
    n_cohorts: int
    levels: int
    success_full: float
    success_half: float
    high_nstar_prop: float
    low_nstar_prop: float
    high_tox_prop: float
    incoherent_prop: float
    mean_nstar: float
    nstar_hist: dict[int, int]
    settle_table: dict[str, dict[str, int]]
    high_tox_cutoff: int

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["nstar_hist"] = {str(k): v for k, v in sorted(self.nstar_hist.items())}
        return d


def summarize_ensemble(metrics: list[RunMetrics], n_cohorts: int, levels: int,
                       high_tox_cutoff: int | None = None,
                       settle_bins: tuple[int, int, int] = (8, 12, 16),
                       design: str = "") -> EnsembleReport:
    """Aggregate per-run metrics into the ensemble operating characteristics.

    High-n* means at least half of the cohorts after the first treated the
    true MTD; low-n* means fewer than the (n_cohorts - 1)/levels expected
    under fixed uniform allocation.  High-toxicity counts DLTs after the
    first cohort against a per-grid cutoff.
    """
    if not metrics:
        raise ValueError("empty ensemble")
    if high_tox_cutoff is None:
        high_tox_cutoff = _HIGH_TOX_CUTOFFS.get(
            levels, math.ceil(0.4 * (n_cohorts - 1)))
    m = len(metrics)
    high_bar = math.ceil((n_cohorts - 1) / 2)
    low_bar = (n_cohorts - 1) / levels
    hist: dict[int, int] = {}
    for r in metrics:
        hist[r.n_star] = hist.get(r.n_star, 0) + 1

    b1, b2, b3 = settle_bins
    stages = {f"by_{b1}": (2, b1), f"{b1 + 1}_to_{b2}": (b1 + 1, b2),
              f"{b2 + 1}_to_{b3}": (b2 + 1, b3)}
    settle_table: dict[str, dict[str, int]] = {
        **{k: {"count": 0, "correct": 0} for k in stages},
        "never": {"count": 0, "correct": 0},
    }
    for r in metrics:
        if r.settling_cohort is None or r.settling_cohort > b3:
            cell = settle_table["never"]
            cell["count"] += 1
            cell["correct"] += int(r.correct_full)
            continue
        for key, (lo, hi) in stages.items():
            if lo <= r.settling_cohort <= hi:
                cell = settle_table[key]
                cell["count"] += 1
                cell["correct"] += int(r.settled_level == r.true_mtd)
                break

    return EnsembleReport(
        design=design or metrics[0].design,
        n_runs=m,
        n_cohorts=n_cohorts,
        levels=levels,
        success_full=sum(r.correct_full for r in metrics) / m,
        success_half=sum(r.correct_half for r in metrics) / m,
        high_nstar_prop=sum(r.n_star >= high_bar for r in metrics) / m,
        low_nstar_prop=sum(r.n_star < low_bar for r in metrics) / m,
        high_tox_prop=sum(r.dlts_excl_first > high_tox_cutoff for r in metrics) / m,
        incoherent_prop=sum(r.incoherent_count > 0 for r in metrics) / m,
        mean_nstar=sum(r.n_star for r in metrics) / m,
        nstar_hist=hist,
        settle_table=settle_table,
        high_tox_cutoff=high_tox_cutoff,
    )


# ---------------------------------------------------------------------------
# Parallel ensemble execution (deterministic regardless of worker count)


def _run_one(design, scenario: Scenario, master_seed: int, run_index: int,
             n_cohorts: int, start_level: int) -> Trajectory:
    n_patients = n_cohorts * design.cohort_size
    stream = random_stream(master_seed, run_index, n_patients)
    rng = design_rng(master_seed, run_index)
    return run_trial(design, scenario, stream, n_cohorts, start_level, rng)


def _chunk_worker(args) -> list[RunMetrics]:
    from .configs import design_from_config  # local import: worker entry point

    design_cfg, target, jobs_chunk, n_cohorts, start_level, master_seed = args
    design = design_from_config(design_cfg, target)
    out = []
    for run_index, scenario_dict in jobs_chunk:
        scenario = Scenario.from_dict(scenario_dict)
        traj = _run_one(design, scenario, master_seed, run_index,
                        n_cohorts, start_level)
        metrics = compute_metrics(traj, design=design)
        out.append(_with_ids(metrics, run_id=run_index,
                             scenario_id=scenario_dict.get("_id", run_index)))
    return out


def run_ensemble(design_cfg: dict, target: float, scenarios: list[Scenario],
                 master_seed: int, n_cohorts: int, start_level: int,
                 runs_per_scenario: int = 1, jobs: int = 1) -> list[RunMetrics]:
    """Run every (scenario, replicate) pair under one design.

    Run index is global and determines the threshold stream, so two
    designs given the same spec face identical patients run for run.
    Results are ordered by run index whatever the worker count.
    """
    tasks = []
    run_index = 0
    for s_id, sc in enumerate(scenarios):
        d = sc.to_dict()
        d["_id"] = s_id
        for _ in range(runs_per_scenario):
            tasks.append((run_index, d))
            run_index += 1

    if jobs <= 1:
        args = (design_cfg, target, tasks, n_cohorts, start_level, master_seed)
        return _chunk_worker(args)

    import concurrent.futures as cf

    chunks = [tasks[i::jobs] for i in range(jobs)]
    arglist = [(design_cfg, target, chunk, n_cohorts, start_level, master_seed)
               for chunk in chunks if chunk]
    results: list[RunMetrics] = []
    with cf.ProcessPoolExecutor(max_workers=jobs) as pool:
        for part in pool.map(_chunk_worker, arglist):
            results.extend(part)
    results.sort(key=lambda r: r.run_id)
    return results
