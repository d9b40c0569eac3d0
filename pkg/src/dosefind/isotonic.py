"""Centered isotonic regression (CIR) and the interpolation-based MTD pick.

Plain isotonic regression replaces monotonicity violators with a flat
weighted average, which wastes the dose-axis information inside a pooled
block.  The centered variant also pools the x coordinates (each block
collapses to its weight-centroid), leaving a strictly increasing set of
nodes that can be linearly re-interpolated back to the original doses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CirResult:
    """Fitted values at the original x points plus the pooled nodes."""

    output_y: np.ndarray   # fitted values at the original x
    original_x: np.ndarray
    original_y: np.ndarray
    alg_x: np.ndarray      # pooled node positions (weight centroids)
    alg_y: np.ndarray      # pooled node values, strictly monotone
    alg_wt: np.ndarray     # pooled node weights
    blocks: tuple[tuple[int, int], ...]  # [start, stop) span of each node

    def node_count(self) -> int:
        return len(self.alg_y)


def _as_rates(y, x, wt, wt_overwrite):
    """Accept either a rate vector or a two-column yes/no count table."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.ndim == 2:
        if y.shape[1] != 2:
            raise ValueError("y must be a vector or a two-column yes/no table")
        n_u = y[:, 0] + y[:, 1]
        keep = n_u > 0
        x = x[keep]
        rates = y[keep, 0] / n_u[keep]
        if wt_overwrite or wt is None:
            wt = n_u[keep]
        else:
            wt = np.asarray(wt, dtype=float)[keep]
        return rates, x, np.asarray(wt, dtype=float)
    elif y.ndim != 1:
        raise ValueError("y must be a vector or a two-column yes/no table")
    if wt is None:
        wt = np.ones_like(y)
    return y.copy(), x, np.asarray(wt, dtype=float).copy()


def cir(y, x, wt=None, boundary: int = 2, dec: bool = False,
        wt_overwrite: bool = True,
        xbounds=(0.0, 1.0), ybounds=(0.0, 1.0)) -> CirResult:
    """Centered isotonic regression of y on x.

    y may be a rate vector or a yes/no table whose rows become rates with
    the row counts as weights.  Adjacent nodes whose values do not strictly
    increase are pooled (both y and x are weight-averaged) until the node
    values are strictly increasing; fitted values at the original x come
    from linear interpolation between the nodes.  ``boundary=2`` holds the
    fit constant outside the node range; ``boundary=1`` extrapolates
    linearly (clamped to ``xbounds``/``ybounds`` when only one node is
    left).  ``dec=True`` fits a decreasing function by negation.

    Returns a CirResult; pooled weights always sum to the input total.
    """
    y, x, wt = _as_rates(y, x, wt, wt_overwrite)
    if len(x) != len(y) or len(wt) != len(y):
        raise ValueError("x, y, wt lengths must match")
    if np.any(np.isnan(x)) or np.any(np.isnan(y)):
        raise ValueError("missing values in x or y not allowed")
    if np.any(np.diff(x) <= 0):
        raise ValueError("x must be strictly increasing")

    z = x.copy()
    yy = y.copy()
    n = len(x)
    if n <= 1:
        return CirResult(y.copy(), z, yy, x.copy(), y.copy(), wt.copy(),
                         tuple((i, i + 1) for i in range(n)))

    work_y = -y if dec else y.copy()
    orig_y = work_y.copy()
    orig_wt = wt.copy()
    # Each node is a [start, stop) span of original indices; node values are
    # recomputed from the original arrays at every merge, so a block's mean
    # is the plain weighted average over its span regardless of merge order.
    spans = [(i, i + 1) for i in range(n)]
    node_y = work_y.copy().tolist()
    node_x = x.copy().tolist()
    node_wt = wt.copy().tolist()

    while True:
        diffs = np.diff(node_y)
        viol = np.nonzero(diffs <= 0)[0]
        if viol.size == 0:
            break
        i = int(viol[0])  # pool the first violating pair
        lo, _ = spans[i]
        _, hi = spans[i + 1]
        node_y[i] = float(np.average(orig_y[lo:hi], weights=orig_wt[lo:hi]))
        node_x[i] = float(np.average(x[lo:hi], weights=orig_wt[lo:hi]))
        node_wt[i] = float(np.sum(orig_wt[lo:hi]))
        spans[i] = (lo, hi)
        del node_y[i + 1], node_x[i + 1], node_wt[i + 1], spans[i + 1]
        if len(node_y) <= 1:
            break

    # Interpolation nodes, still in the working (possibly negated) space.
    ax = np.array(node_x)
    ay = np.array(node_y)

    if boundary == 1:
        if len(ax) == 1:
            ax = np.array([xbounds[0], ax[0], xbounds[1]])
            ay = np.array([ybounds[0], ay[0], ybounds[1]])
        else:
            if ax[-1] < z.max():
                slope = (ay[-1] - ay[-2]) / (ax[-1] - ax[-2])
                ay = np.append(ay, ay[-1] + slope * (z.max() - ax[-1]))
                ax = np.append(ax, z.max())
            if ax[0] > z.min():
                slope = (ay[1] - ay[0]) / (ax[1] - ax[0])
                ay = np.insert(ay, 0, ay[0] - slope * (ax[0] - z.min()))
                ax = np.insert(ax, 0, z.min())

    # np.interp clamps outside the node range, matching the constant rule.
    out = np.interp(z, ax, ay)
    if dec:
        out = -out

    alg_y_signed = -np.array(node_y) if dec else np.array(node_y)
    return CirResult(out, z, yy, np.array(node_x), alg_y_signed,
                     np.array(node_wt), tuple(spans))


def interpolate_target_dose(result: CirResult, target: float) -> float:
    """Dose at which the fitted node curve first crosses `target` from below.

    Scans upward through the strictly increasing pooled nodes; outside
    their value range the nearest node position is returned (the constant-
    boundary reading of the fit).
    """
    ax, ay = result.alg_x, result.alg_y
    if len(ax) == 1 or target <= ay[0]:
        return float(ax[0])
    if target >= ay[-1]:
        return float(ax[-1])
    j = int(np.searchsorted(ay, target, side="left"))
    lo_y, hi_y = ay[j - 1], ay[j]
    lo_x, hi_x = ax[j - 1], ax[j]
    return float(lo_x + (target - lo_y) / (hi_y - lo_y) * (hi_x - lo_x))


def cir_mtd_select(state, target: float | None = None) -> int:
    """MTD selection for designs without a model curve.

    Runs centered isotonic regression through the observed per-level rates
    (weights = patient counts), locates the dose where the fitted curve
    crosses the target rate, and returns the grid level nearest that dose
    (ties go to the lower level).
    """
    if target is None:
        target = state.target
    observed = state.observed_levels()
    if not observed:
        raise ValueError("no observations to estimate from")
    x = np.array([state.grid.dose(u) for u in observed])
    y = np.array([state.f_hat(u) for u in observed])
    wt = np.array([state.n_patients[u - 1] for u in observed], dtype=float)
    fit = cir(y, x, wt)
    x_star = interpolate_target_dose(fit, target)
    doses = np.asarray(state.grid.values)
    dist = np.abs(doses - x_star)
    return int(np.argmin(dist)) + 1  # argmin takes the first (lower) on ties
