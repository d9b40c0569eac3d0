"""Domain types shared by every design: dose grids, toxicity scenarios,
threshold streams, and the chronological trial record.

Outcomes are driven by per-patient uniform quantile thresholds: patient i
with threshold q_i has a dose-limiting toxicity at level u exactly when
q_i <= f[u].  Feeding the same threshold stream to two designs therefore
exposes them to identical "patients", which is what makes design
comparisons paired (common random numbers).

All types here are immutable value objects; levels are 1-based, matching
the d_1..d_l convention used throughout dose-finding practice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ScenarioError(ValueError):
    """Base class for invalid scenario inputs."""


class NonMonotoneError(ScenarioError):
    """Toxicity probabilities are not strictly increasing."""


class OutOfRangeError(ScenarioError):
    """A probability lies outside the open interval (0, 1)."""


class TieForMtdError(ScenarioError):
    """Two levels are exactly equidistant from the target rate.

    Such scenarios have no well-defined correct answer, so they are
    rejected outright rather than resolved by an arbitrary tie-break.
    """


@dataclass(frozen=True)
class DoseGrid:
    """A finite ladder of dose levels d_1 < ... < d_l.

    Numeric dose values default to the evenly spaced u/l grid; they only
    matter to estimators that interpolate on the dose axis.
    """

    levels: int
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"need at least 2 dose levels, got {self.levels}")
        if self.values is None:
            object.__setattr__(
                self, "values",
                tuple((u + 1) / self.levels for u in range(self.levels)),
            )
        else:
            vals = tuple(float(v) for v in self.values)
            if len(vals) != self.levels:
                raise ValueError("dose values length must equal number of levels")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError("dose values must be strictly increasing")
            object.__setattr__(self, "values", vals)

    def dose(self, level: int) -> float:
        self.check_level(level)
        return self.values[level - 1]

    def check_level(self, level: int) -> None:
        if not 1 <= level <= self.levels:
            raise IndexError(f"level {level} outside 1..{self.levels}")

    def clamp(self, level: int) -> int:
        """Replace a mandated but non-existent level with the nearest real one."""
        return min(max(level, 1), self.levels)


@dataclass(frozen=True)
class Scenario:
    """A dose grid with true toxicity probabilities and the implied MTD."""

    grid: DoseGrid
    f: tuple[float, ...]
    target: float
    true_mtd: int

    def prob(self, level: int) -> float:
        self.grid.check_level(level)
        return self.f[level - 1]

    def to_dict(self) -> dict:
        return {
            "levels": self.grid.levels,
            "target": self.target,
            "f": list(self.f),
            "true_mtd": self.true_mtd,
        }

    @staticmethod
    def from_dict(d: dict) -> "Scenario":
        sc = validate_scenario(d["f"], d["target"])
        if "true_mtd" in d and d["true_mtd"] != sc.true_mtd:
            raise ScenarioError(
                f"stored true_mtd={d['true_mtd']} disagrees with recomputed {sc.true_mtd}"
            )
        return sc


def validate_scenario(f: Sequence[float], target: float,
                      grid: DoseGrid | None = None) -> Scenario:
    """Build a Scenario from raw probabilities, rejecting malformed input.

    The true MTD is the level whose toxicity probability is closest to the
    target; an exact distance tie raises TieForMtdError.
    """
    fv = tuple(float(x) for x in f)
    if grid is None:
        grid = DoseGrid(len(fv))
    elif grid.levels != len(fv):
        raise ScenarioError("grid size does not match probability vector")
    if not 0.0 < target < 1.0:
        raise OutOfRangeError(f"target {target} outside (0,1)")
    if any(not 0.0 < x < 1.0 for x in fv):
        raise OutOfRangeError("toxicity probabilities must lie strictly in (0,1)")
    if any(b <= a for a, b in zip(fv, fv[1:])):
        raise NonMonotoneError("toxicity probabilities must be strictly increasing")
    dist = [abs(x - target) for x in fv]
    best = min(dist)
    # exact distance ties up to float roundoff make the MTD ill-defined
    hits = [u for u, d in enumerate(dist) if d <= best + 1e-12]
    if len(hits) > 1:
        raise TieForMtdError(
            f"levels {hits[0] + 1} and {hits[1] + 1} equidistant from target"
        )
    return Scenario(grid=grid, f=fv, target=target, true_mtd=hits[0] + 1)


@dataclass(frozen=True)
class ThresholdStream:
    """Per-patient uniform quantile thresholds driving toxicity outcomes."""

    q: tuple[float, ...]
    provenance: str = "random-draw"  # or "permuted-fixed-set"

    def __post_init__(self):
        qv = tuple(float(x) for x in self.q)
        if any(not 0.0 < x < 1.0 for x in qv):
            raise ValueError("thresholds must lie strictly in (0,1)")
        object.__setattr__(self, "q", qv)

    def __len__(self) -> int:
        return len(self.q)


def toxicity_outcome(q: float, level: int, scenario: Scenario) -> bool:
    """True when a patient with quantile threshold q has a DLT at `level`.

    The boundary q == f[level] counts as a toxicity; with continuous draws
    this is a measure-zero convention fixed for determinism.  For fixed q
    the outcome is monotone nondecreasing in the level.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"threshold {q} outside (0,1)")
    return q <= scenario.prob(level)


@dataclass(frozen=True)
class CohortRecord:
    """One treated cohort: its 1-based index, level, size, and DLT count."""

    index: int
    level: int
    size: int
    dlt_count: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("cohort size must be positive")
        if not 0 <= self.dlt_count <= self.size:
            raise ValueError("DLT count must lie in 0..size")
        if self.level < 1:
            raise ValueError("levels are 1-based")


@dataclass(frozen=True)
class TrialState:
    """Chronological cohort record plus per-level tallies.

    The cohort list is the single source of truth; tallies n_u (patients)
    and r_u (DLTs) are derived at construction.  `with_cohort` shares the
    underlying record list between successive snapshots (append-only), so
    building a long trial costs O(1) amortized per cohort.
    """

    grid: DoseGrid
    target: float
    _records: list = field(default_factory=list, repr=False)
    n_cohorts: int = 0
    n_patients: tuple[int, ...] = None
    dlt_counts: tuple[int, ...] = None

    def __post_init__(self):
        if not 0.0 < self.target < 1.0:
            raise OutOfRangeError(f"target {self.target} outside (0,1)")
        if self.n_patients is None:
            object.__setattr__(self, "n_patients", (0,) * self.grid.levels)
            object.__setattr__(self, "dlt_counts", (0,) * self.grid.levels)

    @property
    def cohorts(self) -> tuple[CohortRecord, ...]:
        return tuple(self._records[: self.n_cohorts])

    @property
    def last_cohort(self) -> CohortRecord | None:
        if self.n_cohorts == 0:
            return None
        return self._records[self.n_cohorts - 1]

    def recent(self, k: int) -> tuple[CohortRecord, ...]:
        """The trailing min(k, n) cohorts, cheapest possible access."""
        lo = max(0, self.n_cohorts - k)
        return tuple(self._records[lo:self.n_cohorts])

    @property
    def total_patients(self) -> int:
        return sum(self.n_patients)

    def levels_sequence(self) -> tuple[int, ...]:
        return tuple(rec.level for rec in self._records[: self.n_cohorts])

    def with_cohort(self, level: int, size: int, dlt_count: int) -> "TrialState":
        self.grid.check_level(level)
        rec = CohortRecord(self.n_cohorts + 1, level, size, dlt_count)
        if len(self._records) == self.n_cohorts:
            self._records.append(rec)  # we are the tip: extend in place
            records = self._records
        else:
            records = list(self._records[: self.n_cohorts]) + [rec]
        n = list(self.n_patients)
        r = list(self.dlt_counts)
        n[level - 1] += size
        r[level - 1] += dlt_count
        return TrialState(self.grid, self.target, records, self.n_cohorts + 1,
                          tuple(n), tuple(r))

    def f_hat(self, level: int) -> float:
        """Observed toxicity rate r_u / n_u; only defined where n_u > 0."""
        self.grid.check_level(level)
        n = self.n_patients[level - 1]
        if n == 0:
            raise ValueError(f"no observations at level {level}")
        return self.dlt_counts[level - 1] / n

    def observed_levels(self) -> list[int]:
        return [u + 1 for u, n in enumerate(self.n_patients) if n > 0]

    def cohorts_at(self, level: int) -> int:
        return sum(1 for rec in self._records[: self.n_cohorts] if rec.level == level)

    def tallies(self) -> tuple[np.ndarray, np.ndarray]:
        """(n_u, r_u) per level as integer arrays."""
        return (np.array(self.n_patients, dtype=int),
                np.array(self.dlt_counts, dtype=int))

    def to_dict(self) -> dict:
        return {
            "levels": self.grid.levels,
            "target": self.target,
            "cohorts": [
                {"index": c.index, "level": c.level, "size": c.size,
                 "dlt_count": c.dlt_count}
                for c in self.cohorts
            ],
            "n_patients": list(self.n_patients),
            "dlt_counts": list(self.dlt_counts),
        }


def empty_state(levels: int, target: float,
                dose_values: Sequence[float] | None = None) -> TrialState:
    grid = DoseGrid(levels, tuple(dose_values) if dose_values is not None else None)
    return TrialState(grid=grid, target=target)
