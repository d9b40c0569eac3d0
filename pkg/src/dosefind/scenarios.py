"""Scenario construction: calibrated parametric curves and a random
Dirichlet generator with rejection vetting.

Fixed scenarios take a standard CDF family and solve its location/scale so
the curve passes exactly through the target rate at a chosen MTD level
while keeping both neighbors comfortably outside the indifference band.

Random scenarios are cumulative sums of a Dirichlet increment vector whose
parameters are themselves randomized (uniform baseline plus a Gaussian
bump of random placement and width, over-length padding and asymmetric
subsampling, an optional power warp and constant shift).  Candidates are
rejected until the increments, the distance of the best level from
target, and the runner-up's margin all pass vetting, which guarantees a
unique MTD.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import Scenario, DoseGrid, validate_scenario, ScenarioError


class GeneratorStarvedError(RuntimeError):
    """The rejection loop exhausted its retry budget."""


class InfeasibleScenarioError(ScenarioError):
    """No parameter choice satisfies the calibration constraints."""


# ---------------------------------------------------------------------------
# Fixed parametric scenarios


_FAMILIES = {
    "uniform": (stats.uniform, [()]),
    "normal": (stats.norm, [()]),
    "logistic": (stats.logistic, [()]),
    "gamma": (stats.gamma, [(2.0,), (1.5,), (1.2,), (1.0,), (2.5,), (3.0,), (0.8,), (4.0,)]),
    "lognormal": (stats.lognorm, [(0.8,), (0.6,), (0.5,), (1.0,), (1.2,), (0.4,)]),
    "weibull": (stats.weibull_min, [(1.5,), (2.0,), (1.2,), (2.5,), (1.0,), (3.0,)]),
}


@dataclass(frozen=True)
class ParametricFamily:
    """A named CDF family; shape parameters are scanned during calibration
    unless pinned here."""

    name: str
    shape: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.name not in _FAMILIES:
            raise ValueError(f"unknown family '{self.name}'")

    def candidates(self):
        dist, shapes = _FAMILIES[self.name]
        if self.shape is not None:
            return dist, [tuple(self.shape)]
        return dist, shapes


def _solve_loc_scale(dist, shape, x_main, p_main, x_anchor, p_anchor):
    z_main = dist.ppf(p_main, *shape)
    z_anchor = dist.ppf(p_anchor, *shape)
    if not (np.isfinite(z_main) and np.isfinite(z_anchor)) or z_anchor == z_main:
        return None
    scale = (x_anchor - x_main) / (z_anchor - z_main)
    if scale <= 0 or not np.isfinite(scale):
        return None
    loc = x_main - scale * z_main
    return loc, scale


def calibrate_fixed_scenario(family: ParametricFamily | str, grid: DoseGrid,
                             target: float, mtd_level: int,
                             low_cut: float = 0.2,
                             high_cut: float = 0.4) -> Scenario:
    """Calibrate the family so level `mtd_level` is an unambiguous MTD.

    F(d_mtd) = target exactly; where the neighbors exist they satisfy
    F(d_mtd-1) <= low_cut and F(d_mtd+1) >= high_cut.  The lower neighbor
    is pinned to low_cut when possible, falling back to pinning the upper
    neighbor at high_cut; raises InfeasibleScenarioError when no shape
    admits both constraints.
    """
    if isinstance(family, str):
        family = ParametricFamily(family)
    grid.check_level(mtd_level)
    dist, shapes = family.candidates()
    x_main = grid.dose(mtd_level)
    anchors = []
    if mtd_level > 1:
        anchors.append((grid.dose(mtd_level - 1), low_cut))
    if mtd_level < grid.levels:
        anchors.append((grid.dose(mtd_level + 1), high_cut))

    for shape in shapes:
        for x_anchor, p_anchor in anchors:
            solved = _solve_loc_scale(dist, shape, x_main, target, x_anchor, p_anchor)
            if solved is None:
                continue
            loc, scale = solved
            f = dist.cdf(np.asarray(grid.values), *shape, loc=loc, scale=scale)
            if not np.all((f > 0.0) & (f < 1.0)):
                continue
            if np.any(np.diff(f) <= 0):
                continue
            if abs(f[mtd_level - 1] - target) > 1e-10:
                continue
            if mtd_level > 1 and f[mtd_level - 2] > low_cut + 1e-12:
                continue
            if mtd_level < grid.levels and f[mtd_level] < high_cut - 1e-12:
                continue
            try:
                scenario = validate_scenario(f, target, grid)
            except ScenarioError:
                continue
            if scenario.true_mtd == mtd_level:
                return scenario
    raise InfeasibleScenarioError(
        f"{family.name} family cannot place the MTD at level {mtd_level}"
    )


def standard_scenarios(levels: int = 6, target: float = 0.3) -> dict[str, Scenario]:
    """One calibrated scenario per family, MTD walking up the grid."""
    grid = DoseGrid(levels)
    order = ["uniform", "gamma", "normal", "lognormal", "weibull", "logistic"]
    out = {}
    for i, name in enumerate(order[:levels]):
        out[name] = calibrate_fixed_scenario(name, grid, target, i + 1)
    return out


# ---------------------------------------------------------------------------
# Random scenario generation


@dataclass(frozen=True)
class SceneConfig:
    """Tuning for the Dirichlet scenario generator.

    Defaults follow the reference generator: steps bounded by
    [0.15, 2.5]/nlev, the MTD within 0.5/nlev of target, and a runner-up
    margin of max(minedge + closest, protectfac * maxerr).
    """

    nlev: int
    marg: int | None = None
    baseline: float = 0.25
    peakmean: float = 3.0
    peaksd: float = 4.0
    targ: float = 0.3
    maxstep: float | None = None
    minstep: float | None = None
    maxerr: float | None = None
    minedge: float | None = None
    protectfac: float = 1.5
    warp: bool = True
    shift: float = 0.0
    max_tries: int = 100_000

    def __post_init__(self):
        if self.nlev < 2:
            raise ValueError("need at least two levels")
        if self.marg is None:
            object.__setattr__(self, "marg", round(self.nlev / 2))
        if self.maxstep is None:
            object.__setattr__(self, "maxstep", 2.5 / self.nlev)
        if self.minstep is None:
            object.__setattr__(self, "minstep", 0.15 / self.nlev)
        if self.maxerr is None:
            object.__setattr__(self, "maxerr", 0.5 / self.nlev)
        if self.minedge is None:
            object.__setattr__(self, "minedge", self.maxerr)

    def to_dict(self) -> dict:
        return {
            "nlev": self.nlev, "marg": self.marg, "baseline": self.baseline,
            "peakmean": self.peakmean, "peaksd": self.peaksd, "targ": self.targ,
            "maxstep": self.maxstep, "minstep": self.minstep,
            "maxerr": self.maxerr, "minedge": self.minedge,
            "protectfac": self.protectfac, "warp": self.warp, "shift": self.shift,
        }

    @staticmethod
    def from_dict(d: dict) -> "SceneConfig":
        return SceneConfig(**d)


def _norm_pdf(x, mean, sd):
    z = (np.asarray(x, dtype=float) - mean) / sd
    return np.exp(-0.5 * z * z) / (sd * math.sqrt(2 * math.pi))


def _raw_candidate(cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """One unvetted draw from the randomized-Dirichlet pipeline."""
    peak = rng.lognormal(mean=math.log(cfg.peakmean), sigma=math.log(cfg.peaksd))
    seedlen = cfg.nlev + 2 * int(rng.integers(1, cfg.marg + 1))
    asym = round(2 * seedlen * (cfg.targ - 0.5))

    idx = np.arange(1, seedlen + 1)
    center_w = _norm_pdf(idx, mean=(seedlen - asym) / 2, sd=seedlen)
    mode_loc = int(rng.choice(idx, p=center_w / center_w.sum()))
    mode_sd = cfg.peaksd * rng.uniform(seedlen / 8, seedlen / 2)
    alphas = rng.uniform(cfg.baseline, 2 * cfg.baseline, size=seedlen) \
        + 2.5 * peak * _norm_pdf(idx, mean=mode_loc, sd=mode_sd)

    # Dirichlet via normalized independent Gammas.
    gam = rng.gamma(shape=alphas, scale=1.0)
    total = gam.sum()
    if total <= 0:
        return np.array([])  # vanishing draw; caller retries
    cdf = np.cumsum(gam / total)

    sampasym = int(np.sign(asym)) * min(abs(asym) - 1, seedlen - cfg.nlev - 1)
    lo = max(1, sampasym)
    hi = min(seedlen - 1, seedlen - 1 + sampasym)
    pick = np.sort(rng.choice(np.arange(lo, hi + 1), size=cfg.nlev, replace=False))
    candid = cdf[pick - 1]

    if cfg.warp:
        candid = candid ** rng.uniform(0.1 / cfg.targ, 1.0 / cfg.targ)
    if cfg.shift > 0:
        candid = candid + rng.uniform(
            max(-cfg.shift, -candid[0]), min(1 - candid[-1], cfg.shift)
        )
    return candid


def _vet(candid: np.ndarray, cfg: SceneConfig) -> bool:
    """The generator's inline accept test (see vetting_report for the
    itemized, independently coded predicates)."""
    if candid.size != cfg.nlev:
        return False
    if not np.all((candid > 0.0) & (candid < 1.0)):
        return False
    gaps = np.diff(candid)
    if gaps.min() < cfg.minstep or gaps.max() > cfg.maxstep:
        return False
    dist = np.abs(candid - cfg.targ)
    closest = dist.min()
    if closest > cfg.maxerr:
        return False
    runner = np.delete(dist, dist.argmin()).min()
    if runner < max(cfg.minedge + closest, cfg.protectfac * cfg.maxerr):
        return False
    return True


def vetting_report(f, cfg: SceneConfig) -> dict[str, bool]:
    """Each vetting predicate, spelled out one by one."""
    f = np.asarray(f, dtype=float)
    report: dict[str, bool] = {}
    report["length"] = f.size == cfg.nlev
    report["in_open_unit_interval"] = bool(np.all((f > 0) & (f < 1)))
    steps = np.diff(f)
    report["steps_not_too_small"] = bool(steps.size and steps.min() >= cfg.minstep)
    report["steps_not_too_large"] = bool(steps.size and steps.max() <= cfg.maxstep)
    dist = np.abs(f - cfg.targ)
    closest = float(dist.min())
    report["mtd_close_to_target"] = closest <= cfg.maxerr
    others = np.delete(dist, int(dist.argmin()))
    margin = max(cfg.minedge + closest, cfg.protectfac * cfg.maxerr)
    report["runner_up_far_enough"] = bool(others.min() >= margin)
    report["pass"] = all(v for k, v in report.items() if k != "pass")
    return report


def random_scenario(cfg: SceneConfig, rng: np.random.Generator) -> Scenario:
    """Draw candidates until one passes vetting; the result always carries
    a unique MTD (the runner-up margin rules out ties)."""
    for _ in range(cfg.max_tries):
        candid = _raw_candidate(cfg, rng)
        if candid.size and _vet(candid, cfg):
            return validate_scenario(candid, cfg.targ)
    raise GeneratorStarvedError(
        f"no acceptable scenario within {cfg.max_tries} tries"
    )


def mtd_exclusion_filter(scenario: Scenario, window: tuple[float, float],
                         edge: float) -> bool:
    """Secondary screen used for ensemble runs: the MTD's true rate must
    fall inside `window`, be the only level inside it, and every other
    level must sit at least `edge` further from target."""
    f = np.asarray(scenario.f)
    target = scenario.target
    mtd = scenario.true_mtd - 1
    if not window[0] <= f[mtd] <= window[1]:
        return False
    inside = (f >= window[0]) & (f <= window[1])
    if inside.sum() != 1:
        return False
    dist = np.abs(f - target)
    others = np.delete(dist, mtd)
    return bool(others.min() >= dist[mtd] + edge)


def stratified_ensemble(cfg: SceneConfig, quotas, rng: np.random.Generator,
                        max_draws: int | None = None,
                        post_filter=None) -> list[Scenario]:
    """Random scenarios with an exact per-MTD-level quota.

    Oversamples the generator into per-level pools and then subsamples
    each stratum without replacement to its quota.  `post_filter` is an
    optional extra predicate a scenario must pass to enter its pool.
    """
    quotas = list(quotas)
    if len(quotas) != cfg.nlev:
        raise ValueError("need one quota per level")
    need = sum(quotas)
    if max_draws is None:
        max_draws = max(200 * need, 50_000)
    pools: list[list[Scenario]] = [[] for _ in range(cfg.nlev)]
    draws = 0
    while draws < max_draws:
        if all(len(pool) >= q for pool, q in zip(pools, quotas)):
            break
        sc = random_scenario(cfg, rng)
        draws += 1
        if post_filter is not None and not post_filter(sc):
            continue
        pools[sc.true_mtd - 1].append(sc)
    else:
        short = [u + 1 for u, (pool, q) in enumerate(zip(pools, quotas))
                 if len(pool) < q]
        raise GeneratorStarvedError(
            f"strata {short} unfilled after {max_draws} draws"
        )
    out: list[Scenario] = []
    for pool, q in zip(pools, quotas):
        if q == 0:
            continue
        chosen = rng.choice(len(pool), size=q, replace=False)
        out.extend(pool[int(i)] for i in chosen)
    return out
