/**
 * Browser wiring: one active session per tab, refreshed from the server
 * after every mutation.  All statistics arrive ready-made; this file only
 * moves them into the DOM.
 */

import { ApiError, TrialApi, type CohortResult, type Snapshot } from "./api.js";
import { validateCohortForm } from "./form.js";
import { curveSvg, trajectorySvg } from "./svg.js";
import { buildBanner, buildCurveModel, buildTrajectoryModel } from "./views.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const state: { api: TrialApi | null; trialId: string | null; levels: number } = {
  api: null,
  trialId: null,
  levels: 0,
};

function setBanner(text: string, tone: string): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = text;
  banner.dataset.tone = tone;
}

function renderSnapshot(snapshot: Snapshot): void {
  state.levels = snapshot.state.levels;
  el<HTMLDivElement>("trajectory").innerHTML = trajectorySvg(
    buildTrajectoryModel(snapshot),
  );
  el<HTMLDivElement>("curve").innerHTML = curveSvg(
    buildCurveModel(snapshot.curve),
  );
  const banner = buildBanner(
    snapshot.recommendation,
    snapshot.status,
    snapshot.selected,
    null,
    false,
  );
  setBanner(banner.text, banner.tone);
  const rows = snapshot.state.cohorts
    .map(
      (c) =>
        `<tr><td>${c.index}</td><td>d${c.level}</td><td>${c.size}</td>` +
        `<td>${c.dlt_count}</td></tr>`,
    )
    .join("");
  el<HTMLTableSectionElement>("cohort-rows").innerHTML = rows;
  const stopped = snapshot.status === "stopped";
  el<HTMLButtonElement>("submit").disabled = stopped;
  el<HTMLButtonElement>("preview").disabled = stopped;
}

async function refresh(): Promise<void> {
  if (!state.api || !state.trialId) return;
  renderSnapshot(await state.api.snapshot(state.trialId));
}

function showErrors(errors: string[]): void {
  el<HTMLUListElement>("errors").innerHTML = errors
    .map((e) => `<li>${e}</li>`)
    .join("");
}

function readForm() {
  return validateCohortForm(
    {
      level: el<HTMLInputElement>("level").value,
      size: el<HTMLInputElement>("size").value,
      dlts: el<HTMLInputElement>("dlts").value,
    },
    state.levels,
  );
}

async function handleCohort(preview: boolean): Promise<void> {
  if (!state.api || !state.trialId) return;
  const form = readForm();
  showErrors(form.errors);
  if (!form.ok || !form.value) return;
  try {
    const result: CohortResult = preview
      ? await state.api.previewCohort(state.trialId, form.value)
      : await state.api.postCohort(state.trialId, form.value);
    const diag = result.diagnostics;
    const banner = buildBanner(
      result.recommendation,
      result.status,
      result.selected,
      diag.coherence_warning,
      diag.settled,
    );
    setBanner((preview ? "what-if: " : "") + banner.text, banner.tone);
    if (preview) {
      el<HTMLDivElement>("curve").innerHTML = curveSvg(
        buildCurveModel(diag.curve),
      );
    } else {
      await refresh();
    }
  } catch (err) {
    if (err instanceof ApiError) showErrors([`${err.status}: ${err.message}`]);
    else throw err;
  }
}

export function boot(): void {
  el<HTMLButtonElement>("connect").addEventListener("click", async () => {
    state.api = new TrialApi(el<HTMLInputElement>("service-url").value);
    state.trialId = el<HTMLInputElement>("trial-id").value.trim();
    try {
      await refresh();
      showErrors([]);
    } catch (err) {
      if (err instanceof ApiError) showErrors([`${err.status}: ${err.message}`]);
      else throw err;
    }
  });
  el<HTMLButtonElement>("submit").addEventListener("click", () =>
    handleCohort(false),
  );
  el<HTMLButtonElement>("preview").addEventListener("click", () =>
    handleCohort(true),
  );
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
