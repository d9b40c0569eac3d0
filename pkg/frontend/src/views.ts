/**
 * Pure view-model builders: server payloads in, drawable structures out.
 *
 * The trajectory chart puts one column per cohort with a marker per
 * patient (filled = DLT, empty = none).  The curve chart shows the
 * observed rates as X marks whose area tracks the sample size at that
 * dose, the server-fitted curve as a polyline, and the target rate as a
 * horizontal line.  Nothing here aggregates, fits, or rounds beyond
 * placing coordinates.
 */

import type { CurvePayload, Snapshot } from "./api.js";

export interface TrajectoryMarker {
  cohort: number;
  level: number;
  filled: boolean;
  slot: number; // position within the cohort column
}

export interface TrajectoryModel {
  levels: number;
  cohorts: number;
  markers: TrajectoryMarker[];
  recommendation: number | null;
}

export function buildTrajectoryModel(snapshot: Snapshot): TrajectoryModel {
  const markers: TrajectoryMarker[] = [];
  for (const cohort of snapshot.state.cohorts) {
    for (let slot = 0; slot < cohort.size; slot++) {
      markers.push({
        cohort: cohort.index,
        level: cohort.level,
        filled: slot < cohort.dlt_count,
        slot,
      });
    }
  }
  return {
    levels: snapshot.state.levels,
    cohorts: snapshot.state.cohorts.length,
    markers,
    recommendation: snapshot.recommendation,
  };
}

export interface CurveMark {
  dose: number;
  value: number;
  weight: number; // patients at the dose; drives the mark size
}

export interface CurveModel {
  doses: number[];
  target: number;
  xMarks: CurveMark[]; // observed rates, straight from the server
  fitted: { x: number; y: number }[]; // server-sampled curve
  modelPoints: { dose: number; value: number }[]; // per-level curve values
  kind: "model" | "empirical";
}

export function buildCurveModel(curve: CurvePayload): CurveModel {
  const xMarks: CurveMark[] = [];
  curve.f_hat.forEach((value, i) => {
    if (value !== null) {
      xMarks.push({
        dose: curve.doses[i],
        value,
        weight: curve.n_patients[i],
      });
    }
  });
  const fitted = curve.curve.x.map((x, i) => ({ x, y: curve.curve.y[i] }));
  const perLevel =
    curve.kind === "model" ? curve.g_hat ?? [] : curve.fit_values ?? [];
  const perLevelDoses =
    curve.kind === "model" ? curve.doses : curve.fit_doses ?? [];
  return {
    doses: curve.doses,
    target: curve.target,
    xMarks,
    fitted,
    modelPoints: perLevel.map((value, i) => ({
      dose: perLevelDoses[i],
      value,
    })),
    kind: curve.kind,
  };
}

export interface StatusBanner {
  text: string;
  tone: "info" | "warning" | "stopped";
}

export function buildBanner(
  recommendation: number | null,
  status: string,
  selected: number | null,
  coherenceWarning: string | null,
  settled: boolean,
): StatusBanner {
  if (status === "stopped") {
    return {
      text:
        selected === null
          ? "Trial stopped: no admissible dose"
          : `Trial stopped: estimated MTD is level ${selected}`,
      tone: "stopped",
    };
  }
  if (coherenceWarning) {
    return {
      text: `Next dose: level ${recommendation} — caution: ${coherenceWarning}`,
      tone: "warning",
    };
  }
  const settledNote = settled ? " (allocation has settled)" : "";
  return { text: `Next dose: level ${recommendation}${settledNote}`, tone: "info" };
}
