"""One-parameter Bayesian dose-toxicity models and their posterior.

Two curve families are supported:

* the ``power`` model  G(d_u) = phi_u ** theta, and
* a re-parametrized one-parameter logistic whose skeleton is anchored on a
  transformed dose axis: G(d_u) = 1 / (1 + exp(b0 - theta * xi_u)), the
  xi_u back-calculated so the curve passes through the skeleton at
  theta = theta0.

theta carries a log-Normal prior.  The posterior is one-dimensional, so
everything is computed by deterministic quadrature on t = log(theta):
trapezoid sums on a symmetric grid spanning mu +/- 8 sigma, doubled with
Richardson extrapolation until successive estimates agree to 1e-9.  The
per-level MTD weights integrate the posterior over the theta regions in
which each level minimizes |G - target|; region boundaries are located by
bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .core import TrialState


class QuadratureError(RuntimeError):
    """Raised when the integration tolerance cannot be met."""


@dataclass(frozen=True)
class Skeleton:
    """Prior toxicity guesses phi_1 < ... < phi_l, all strictly in (0,1)."""

    phi: tuple[float, ...]

    def __post_init__(self):
        phi = tuple(float(p) for p in self.phi)
        if len(phi) < 2:
            raise ValueError("skeleton needs at least two levels")
        if any(not 0.0 < p < 1.0 for p in phi):
            raise ValueError("skeleton values must lie strictly in (0,1)")
        if any(b <= a for a, b in zip(phi, phi[1:])):
            raise ValueError("skeleton must be strictly increasing")
        object.__setattr__(self, "phi", phi)

    def __len__(self) -> int:
        return len(self.phi)


@dataclass(frozen=True)
class LogNormalPrior:
    """log(theta) ~ Normal(mu, sigma^2)."""

    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def log_density_t(self, t: np.ndarray) -> np.ndarray:
        """Log density of t = log(theta)."""
        z = (t - self.mu) / self.sigma
        return -0.5 * z * z - math.log(self.sigma) - 0.5 * math.log(2 * math.pi)

    @property
    def mean_theta(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma**2)


@dataclass(frozen=True)
class PowerModel:
    """G(d_u, theta) = phi_u ** theta."""

    skeleton: Skeleton
    _log_phi: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_log_phi", np.log(np.asarray(self.skeleton.phi)))

    @property
    def levels(self) -> int:
        return len(self.skeleton)

    def curve(self, theta) -> np.ndarray:
        """Toxicity curve at every level; shape (l,) or (l, len(theta))."""
        theta = np.asarray(theta, dtype=float)
        if np.any(theta <= 0):
            raise ValueError("theta must be positive")
        return np.exp(np.multiply.outer(self._log_phi, theta))

    def log_curve_pair(self, theta: np.ndarray):
        log_g = np.multiply.outer(self._log_phi, theta)
        with np.errstate(divide="ignore"):
            log_1mg = np.log(-np.expm1(log_g))
        return log_g, log_1mg


def chevret_backcalc(skeleton: Skeleton, beta0: float, theta0: float) -> tuple[float, ...]:
    """Transformed doses xi_u with G(xi_u; theta0) = phi_u.

    Closed-form inversion of the logistic 1 / (1 + exp(beta0 - theta*xi)).
    """
    if theta0 <= 0:
        raise ValueError("theta0 must be positive")
    return tuple(
        (beta0 - math.log(1.0 / p - 1.0)) / theta0 for p in skeleton.phi
    )


@dataclass(frozen=True)
class ChevretModel:
    """One-parameter logistic on back-calculated transformed doses."""

    skeleton: Skeleton
    beta0: float = 0.0
    theta0: float = 1.0
    xi: tuple[float, ...] = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "xi", chevret_backcalc(self.skeleton, self.beta0, self.theta0))

    @property
    def levels(self) -> int:
        return len(self.skeleton)

    def curve(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if np.any(theta <= 0):
            raise ValueError("theta must be positive")
        a = self.beta0 - np.multiply.outer(np.asarray(self.xi), theta)
        return expit(-a)

    def log_curve_pair(self, theta: np.ndarray):
        a = self.beta0 - np.multiply.outer(np.asarray(self.xi), theta)
        log_g = -np.logaddexp(0.0, a)
        log_1mg = -np.logaddexp(0.0, -a)
        return log_g, log_1mg


def power_curve(skeleton: Skeleton, theta: float) -> np.ndarray:
    """phi_u ** theta for a single theta; strictly increasing in u."""
    return PowerModel(skeleton).curve(float(theta))


@dataclass(frozen=True)
class PosteriorSummary:
    """Posterior-mean theta, the plug-in curve, and per-level MTD weights."""

    theta_mean: float
    g_hat: tuple[float, ...]
    weights: tuple[float, ...] | None


def _log_likelihood(model, t: np.ndarray, n: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Binomial log-likelihood of the tallies at each t = log(theta)."""
    theta = np.exp(t)
    log_g, log_1mg = model.log_curve_pair(theta)
    ll = np.zeros_like(t)
    for u in range(len(n)):
        if n[u] == 0:
            continue
        if r[u] > 0:
            ll = ll + r[u] * log_g[u]
        if n[u] - r[u] > 0:
            ll = ll + (n[u] - r[u]) * log_1mg[u]
    return ll


def _refine_trapezoid(f, lo: float, hi: float, rtol: float = 1e-9,
                      init_pow: int = 6, max_pow: int = 22):
    """Integrate the stacked components of f over [lo, hi].

    f maps a t-array to an array (..., len(t)).  Panel counts double each
    step, reusing earlier evaluations; a Richardson-extrapolated trapezoid
    estimate is accepted once consecutive values agree componentwise to
    rtol (relative, with an absolute floor for vanishing components).
    """
    if hi <= lo:
        raise ValueError("empty integration interval")
    npan = 2 ** init_pow
    ts = np.linspace(lo, hi, npan + 1)
    vals = f(ts)
    h = (hi - lo) / npan
    trap = h * (np.sum(vals[..., 1:-1], axis=-1) + 0.5 * (vals[..., 0] + vals[..., -1]))
    rich_prev = None
    prev_trap = trap
    for p in range(init_pow + 1, max_pow + 1):
        npan = 2 ** p
        h = (hi - lo) / npan
        mids = lo + h * (2 * np.arange(npan // 2) + 1)
        mv = f(mids)
        trap = 0.5 * prev_trap + h * np.sum(mv, axis=-1)
        rich = trap + (trap - prev_trap) / 3.0
        if rich_prev is not None:
            scale = np.maximum(np.abs(rich), 1e-300)
            if np.all(np.abs(rich - rich_prev) <= rtol * scale):
                return rich
        rich_prev = rich
        prev_trap = trap
    raise QuadratureError(f"integral did not stabilize within 2^{max_pow} panels")


def _bisect(fn, lo: float, hi: float, tol: float = 1e-13) -> float:
    flo = fn(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol:
            return mid
        fm = fn(mid)
        if (flo <= 0) == (fm <= 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _stable_winners(model, ts: np.ndarray, target: float) -> np.ndarray:
    """Level index minimizing |G - target| at each t, ties to the lower level.

    Comparisons run in log space so the winner stays correct far out in the
    tails, where the curve values themselves underflow to 0 or round to 1:
    among levels at or below target the largest log G wins, among levels
    above it the largest log(1 - G) wins, and only the two finalists are
    compared on the linear scale (where both sit safely near the target).
    """
    log_g, log_1mg = model.log_curve_pair(np.exp(np.atleast_1d(ts)))
    log_t = math.log(target)
    below = log_g <= log_t
    cols = np.arange(log_g.shape[1])
    below_score = np.where(below, log_g, -np.inf)
    b_idx = np.argmax(below_score, axis=0)
    has_below = below.any(axis=0)
    above_score = np.where(~below, log_1mg, -np.inf)
    a_idx = np.argmax(above_score, axis=0)
    has_above = (~below).any(axis=0)
    d_b = target - np.exp(log_g[b_idx, cols])
    d_a = np.exp(log_g[a_idx, cols]) - target
    winner = np.where(d_b <= d_a, b_idx, a_idx)
    winner = np.where(~has_below, a_idx, winner)
    winner = np.where(~has_above, b_idx, winner)
    return winner


def _bisect_winner_change(model, target: float, lo: float, hi: float,
                          tol: float = 1e-13) -> float:
    left = int(_stable_winners(model, np.array([lo]), target)[0])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if int(_stable_winners(model, np.array([mid]), target)[0]) == left:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _region_boundaries(model, target: float, lo: float, hi: float,
                       scan_points: int = 2049) -> list[tuple[float, float, int]]:
    """Partition [lo, hi] into maximal t-intervals with a constant argmin level.

    Candidate cut points come from two sources: roots of
    G_u + G_{u+1} = 2*target for every adjacent pair (the exact boundaries
    whenever each curve is monotone in theta), plus bisected argmin changes
    detected on a scan grid (covers non-monotone curve orderings).
    """
    ts = np.linspace(lo, hi, scan_points)
    curves = model.curve(np.exp(ts))
    winners = _stable_winners(model, ts, target)

    cuts: set[float] = set()
    for u in range(model.levels - 1):
        hvals = curves[u] + curves[u + 1] - 2.0 * target
        sign_change = np.nonzero(np.sign(hvals[:-1]) != np.sign(hvals[1:]))[0]
        for i in sign_change:
            fn = lambda t, u=u: float(
                model.curve(np.exp(np.array([t])))[u, 0]
                + model.curve(np.exp(np.array([t])))[u + 1, 0] - 2.0 * target
            )
            cuts.add(_bisect(fn, float(ts[i]), float(ts[i + 1])))
    for i in np.nonzero(winners[:-1] != winners[1:])[0]:
        cuts.add(_bisect_winner_change(model, target,
                                       float(ts[i]), float(ts[i + 1])))

    edges = [lo] + sorted(c for c in cuts if lo < c < hi) + [hi]
    segments = []
    for a, b in zip(edges, edges[1:]):
        if b - a <= 0:
            continue
        mid = 0.5 * (a + b)
        win = int(_stable_winners(model, np.array([mid]), target)[0])
        if segments and segments[-1][2] == win:
            segments[-1] = (segments[-1][0], b, win)
        else:
            segments.append((a, b, win))
    return segments


def posterior_theta(state: TrialState, model, prior: LogNormalPrior,
                    include_weights: bool = True) -> PosteriorSummary:
    """Posterior summary of theta given the trial tallies.

    theta_mean is the posterior mean of theta; g_hat plugs it into the
    model curve; weights[u] is the posterior probability that level u+1 is
    the |G - target|-minimizer.
    """
    n, r = state.tallies()
    if len(n) != model.levels:
        raise ValueError("model levels do not match trial grid")
    target = state.target
    lo = prior.mu - 8.0 * prior.sigma
    hi = prior.mu + 8.0 * prior.sigma

    # A fixed log-space offset keeps the scaled integrand within range.
    probe = np.linspace(lo, hi, 257)
    log_post_probe = prior.log_density_t(probe) + _log_likelihood(model, probe, n, r)
    offset = float(np.max(log_post_probe))
    if not np.isfinite(offset):
        raise QuadratureError("posterior vanishes everywhere on the support")

    def stacked(ts: np.ndarray) -> np.ndarray:
        lp = prior.log_density_t(ts) + _log_likelihood(model, ts, n, r) - offset
        dens = np.exp(lp)
        return np.stack([dens, np.exp(ts) * dens])

    z, first_moment = _refine_trapezoid(stacked, lo, hi)
    if z <= 0:
        raise QuadratureError("zero posterior mass")
    theta_mean = float(first_moment / z)
    g_hat = tuple(float(g) for g in model.curve(theta_mean))

    weights = None
    if include_weights:
        segments = _region_boundaries(model, target, lo, hi)
        masses = np.zeros(model.levels)
        for a, b, win in segments:
            def dens_only(ts: np.ndarray) -> np.ndarray:
                lp = prior.log_density_t(ts) + _log_likelihood(model, ts, n, r) - offset
                return np.exp(lp)[np.newaxis, :]
            masses[win] += float(_refine_trapezoid(dens_only, a, b)[0])
        total = masses.sum()
        if total <= 0:
            raise QuadratureError("zero posterior mass over MTD regions")
        weights = tuple(float(w) for w in masses / total)
    return PosteriorSummary(theta_mean, g_hat, weights)


def _argmin_level(g_hat, target: float) -> int:
    dist = np.abs(np.asarray(g_hat) - target)
    return int(np.argmin(dist)) + 1


def crm_mtd_estimate(state: TrialState, model, prior: LogNormalPrior) -> int:
    """Unconstrained best-estimate level: argmin over |g_hat - target|."""
    summary = posterior_theta(state, model, prior, include_weights=False)
    return _argmin_level(summary.g_hat, state.target)


def crm_next(state: TrialState, model, prior: LogNormalPrior,
             step_constraint: bool = True) -> int:
    """Next-dose recommendation, clamped to one level of the current dose.

    The single-level restriction applies in both directions; equidistant
    candidates resolve to the lower level.
    """
    last = state.last_cohort
    if last is None:
        raise ValueError("crm_next requires at least one treated cohort")
    candidate = crm_mtd_estimate(state, model, prior)
    if not step_constraint:
        return candidate
    lo = max(last.level - 1, 1)
    hi = min(last.level + 1, state.grid.levels)
    return min(max(candidate, lo), hi)


# Hyperparameter presets in common use with these skeletons: "moderate"
# front-loads the middle of the range, "diffuse" is the flat-predictive
# default favored with convex skeletons, "conservative" shies away from
# the top doses.
PRIOR_PRESETS: dict[str, LogNormalPrior] = {
    "moderate": LogNormalPrior(-0.2, 0.85),
    "diffuse": LogNormalPrior(0.0, math.sqrt(1.34)),
    "conservative": LogNormalPrior(-0.5, 0.6),
}

SKELETON_PRESETS: dict[str, tuple[float, ...]] = {
    "four_level": (0.05, 0.20, 0.40, 0.80),
    "six_level": (0.05, 0.11, 0.22, 0.40, 0.60, 0.78),
    "seven_level": (0.05, 0.10, 0.20, 0.30, 0.50, 0.65, 0.80),
}
