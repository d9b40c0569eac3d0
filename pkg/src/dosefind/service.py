"""Live trial-conduct HTTP API.

Sessions wrap a design policy around an append-only event log: every
cohort posted is an event, and every recommendation is recomputed from the
log through the same policy objects the simulator uses — the service adds
no statistics of its own, so replaying a log bit-reproduces every number.

Endpoints (JSON in/out, CORS open):

    POST /trials                     create a session, returns the start dose
    GET  /trials                     list session ids
    GET  /trials/{id}                full snapshot
    GET  /trials/{id}/recommendation current recommendation
    GET  /trials/{id}/posterior      fitted curve payload for charting
    POST /trials/{id}/cohorts        record a cohort, get the next dose
    POST /trials/{id}/preview        what-if: same computation, nothing saved

Clinician overrides (treating a different level than recommended) are
accepted and flagged in the log, never rejected.
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .configs import ConfigError, default_start_level, design_from_config
from .core import TrialState, DoseGrid
from .designs import CrmDesign, HybridDesign
from .isotonic import cir
from .simulate import SETTLE_WINDOW, run_rng


class TrialCreate(BaseModel):
    design: dict
    levels: int = Field(ge=2)
    target: float = Field(gt=0.0, lt=1.0)
    start_level: int | None = None
    dose_values: list[float] | None = None
    max_cohorts: int | None = None
    seed: int = 0
    label: str = ""


class CohortPost(BaseModel):
    level: int = Field(ge=1)
    size: int = Field(ge=1)
    dlt_count: int = Field(ge=0)


class TrialSession:
    """One live trial: config, policy, state, and the audit trail."""

    def __init__(self, session_id: str, config: TrialCreate):
        self.id = session_id
        self.config = config
        try:
            self.design = design_from_config(config.design, config.target)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        grid = DoseGrid(config.levels,
                        tuple(config.dose_values) if config.dose_values else None)
        self.start_level = config.start_level or default_start_level(config.levels)
        grid.check_level(self.start_level)
        self.state = TrialState(grid=grid, target=config.target)
        self.status = "active"
        self.selected = None
        self.recommendation = self.start_level
        self.audit: list[dict] = []
        self.lock = threading.Lock()
        self._rng = run_rng(config.seed, 0, purpose=2)

    # -- state machine ------------------------------------------------------

    def _clone_rng(self):
        g = np.random.Generator(type(self._rng.bit_generator)())
        g.bit_generator.state = self._rng.bit_generator.state
        return g

    def apply_cohort(self, post: CohortPost, persist: bool):
        if self.status != "active":
            raise HTTPException(status_code=409, detail="session is stopped")
        if post.dlt_count > post.size:
            raise HTTPException(status_code=422,
                                detail="dlt_count cannot exceed cohort size")
        if not 1 <= post.level <= self.state.grid.levels:
            raise HTTPException(status_code=422, detail="level out of range")
        prev_rec = self.recommendation
        state = self.state.with_cohort(post.level, post.size, post.dlt_count)
        rng = self._rng if persist else self._clone_rng()
        action = self.design.next_action(state, rng)
        stopped = action.stop
        selected = action.selected if stopped else None
        recommendation = None if stopped else action.level
        if self.config.max_cohorts and state.n_cohorts >= self.config.max_cohorts \
                and not stopped:
            stopped = True
            selected = self.design.select_mtd(state)
            recommendation = None
        diag = self._diagnostics(state, post, recommendation, prev_rec)
        result = {
            "recommendation": recommendation,
            "status": "stopped" if stopped else "active",
            "selected": selected,
            "diagnostics": diag,
        }
        if persist:
            self.state = state
            self.recommendation = recommendation
            self.status = "stopped" if stopped else "active"
            self.selected = selected
            self.audit.append({
                "event": "cohort",
                "cohort": post.model_dump(),
                "override": post.level != prev_rec,
                "recommendation": recommendation,
                "status": self.status,
                "selected": selected,
                "coherence_warning": diag["coherence_warning"],
            })
        return result

    def _diagnostics(self, state: TrialState, post: CohortPost,
                     recommendation: int | None, prev_rec: int | None) -> dict:
        warning = None
        if recommendation is not None:
            if recommendation > post.level and post.dlt_count >= 1:
                warning = "escalation recommended right after a cohort with DLTs"
            elif recommendation < post.level and post.dlt_count == 0:
                warning = "de-escalation recommended right after a DLT-free cohort"
        levels = state.levels_sequence()
        settled = False
        for c in range(SETTLE_WINDOW + 1, len(levels) + 1):
            if len(set(levels[c - SETTLE_WINDOW:c])) == 1:
                settled = True
                break
        return {
            "coherence_warning": warning,
            "override": post.level != prev_rec,
            "settled": settled,
            "curve": curve_payload(self.design, state),
        }

    def snapshot(self) -> dict:
        return {
            "id": self.id,
            "label": self.config.label,
            "config": self.config.model_dump(),
            "status": self.status,
            "recommendation": self.recommendation,
            "selected": self.selected,
            "state": self.state.to_dict(),
            "audit": self.audit,
            "curve": curve_payload(self.design, self.state),
        }


def _interp_curve(xs: np.ndarray, ys: np.ndarray, grid_values, points: int = 50):
    """Piecewise-linear curve through (xs, ys) sampled at the dose grid plus
    evenly spaced interpolation points (the chart is drawn server-side)."""
    lo, hi = float(min(grid_values)), float(max(grid_values))
    sample = np.unique(np.concatenate([np.asarray(grid_values, dtype=float),
                                       np.linspace(lo, hi, points)]))
    return {"x": [round(float(v), 10) for v in sample],
            "y": [round(float(v), 10) for v in np.interp(sample, xs, ys)]}


def curve_payload(design, state: TrialState) -> dict:
    grid = state.grid
    n = list(state.n_patients)
    f_hat = [state.f_hat(u) if state.n_patients[u - 1] > 0 else None
             for u in range(1, grid.levels + 1)]
    base = {
        "doses": list(grid.values),
        "target": state.target,
        "n_patients": n,
        "f_hat": f_hat,
    }
    crm = design
    if isinstance(design, HybridDesign) and isinstance(design.overlay, CrmDesign):
        crm = design.overlay
    if isinstance(crm, CrmDesign):
        summary = crm.posterior(state, include_weights=True)
        base.update({
            "kind": "model",
            "g_hat": list(summary.g_hat),
            "theta_mean": summary.theta_mean,
            "mtd_weights": list(summary.weights),
            "curve": _interp_curve(np.asarray(grid.values),
                                   np.asarray(summary.g_hat), grid.values),
        })
        return base
    observed = state.observed_levels()
    if observed:
        x = np.array([grid.dose(u) for u in observed])
        y = np.array([state.f_hat(u) for u in observed])
        wt = np.array([state.n_patients[u - 1] for u in observed], dtype=float)
        fit = cir(y, x, wt)
        base.update({
            "kind": "empirical",
            "fit_doses": [float(v) for v in x],
            "fit_values": [float(v) for v in fit.output_y],
            "curve": _interp_curve(fit.alg_x, fit.alg_y, grid.values),
        })
    else:
        base.update({"kind": "empirical", "fit_doses": [], "fit_values": [],
                     "curve": {"x": [], "y": []}})
    return base


class SessionStore:
    """Sessions persisted as JSON-lines event logs, one file per trial."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, TrialSession] = {}
        self.lock = threading.Lock()
        for path in sorted(self.data_dir.glob("*.jsonl")):
            try:
                self._replay(path)
            except Exception:
                continue  # a corrupt log must not take the service down

    def _log_path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.jsonl"

    def _append_event(self, session_id: str, event: dict) -> None:
        with open(self._log_path(session_id), "a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _replay(self, path: Path) -> None:
        lines = [json.loads(l) for l in path.read_text().splitlines() if l.strip()]
        if not lines or lines[0].get("event") != "created":
            return
        config = TrialCreate(**lines[0]["config"])
        session = TrialSession(lines[0]["id"], config)
        for event in lines[1:]:
            if event.get("event") == "cohort":
                session.apply_cohort(CohortPost(**event["cohort"]), persist=True)
        self.sessions[session.id] = session

    def create(self, config: TrialCreate) -> TrialSession:
        session_id = uuid.uuid4().hex[:12]
        session = TrialSession(session_id, config)
        with self.lock:
            self.sessions[session_id] = session
        self._append_event(session_id, {
            "event": "created", "id": session_id,
            "config": config.model_dump(),
        })
        return session

    def get(self, session_id: str) -> TrialSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown trial id")
        return session

    def record(self, session: TrialSession, post: CohortPost) -> None:
        self._append_event(session.id, {
            "event": "cohort", "cohort": post.model_dump(),
        })


def create_app(data_dir: str | Path = "trial-data") -> FastAPI:
    app = FastAPI(title="dosefind trial service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(Path(data_dir))
    app.state.store = store

    @app.post("/trials", status_code=201)
    def create_trial(config: TrialCreate):
        session = store.create(config)
        return {
            "id": session.id,
            "recommendation": session.recommendation,
            "status": session.status,
        }

    @app.get("/trials")
    def list_trials():
        return {
            "trials": [
                {"id": s.id, "label": s.config.label, "status": s.status,
                 "cohorts": s.state.n_cohorts}
                for s in store.sessions.values()
            ]
        }

    @app.get("/trials/{trial_id}")
    def get_trial(trial_id: str):
        return store.get(trial_id).snapshot()

    @app.get("/trials/{trial_id}/recommendation")
    def get_recommendation(trial_id: str):
        s = store.get(trial_id)
        return {"recommendation": s.recommendation, "status": s.status,
                "selected": s.selected}

    @app.get("/trials/{trial_id}/posterior")
    def get_posterior(trial_id: str):
        s = store.get(trial_id)
        return curve_payload(s.design, s.state)

    @app.post("/trials/{trial_id}/cohorts")
    def post_cohort(trial_id: str, cohort: CohortPost):
        s = store.get(trial_id)
        with s.lock:
            result = s.apply_cohort(cohort, persist=True)
            store.record(s, cohort)
        return result

    @app.post("/trials/{trial_id}/preview")
    def preview_cohort(trial_id: str, cohort: CohortPost):
        s = store.get(trial_id)
        with s.lock:
            return s.apply_cohort(cohort, persist=False)

    return app


def main() -> None:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="dosefind trial service")
    parser.add_argument("--data-dir", default="trial-data")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8425)
    args = parser.parse_args()
    uvicorn.run(create_app(args.data_dir), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
