/**
 * Thin typed client for the trial-conduct service.
 *
 * Every number shown in the UI comes from these payloads untouched; the
 * client never recomputes a statistic.
 */

export interface CohortRecord {
  index: number;
  level: number;
  size: number;
  dlt_count: number;
}

export interface TrialStatePayload {
  levels: number;
  target: number;
  cohorts: CohortRecord[];
  n_patients: number[];
  dlt_counts: number[];
}

export interface CurvePayload {
  kind: "model" | "empirical";
  doses: number[];
  target: number;
  n_patients: number[];
  f_hat: (number | null)[];
  curve: { x: number[]; y: number[] };
  g_hat?: number[];
  theta_mean?: number;
  mtd_weights?: number[];
  fit_doses?: number[];
  fit_values?: number[];
}

export interface Diagnostics {
  coherence_warning: string | null;
  override: boolean;
  settled: boolean;
  curve: CurvePayload;
}

export interface CohortResult {
  recommendation: number | null;
  status: "active" | "stopped";
  selected: number | null;
  diagnostics: Diagnostics;
}

export interface Snapshot {
  id: string;
  label: string;
  config: Record<string, unknown>;
  status: "active" | "stopped";
  recommendation: number | null;
  selected: number | null;
  state: TrialStatePayload;
  audit: Record<string, unknown>[];
  curve: CurvePayload;
}

export interface TrialCreate {
  design: Record<string, unknown>;
  levels: number;
  target: number;
  start_level?: number;
  dose_values?: number[];
  max_cohorts?: number;
  seed?: number;
  label?: string;
}

export interface CohortPost {
  level: number;
  size: number;
  dlt_count: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (typeof body.detail === "string") detail = body.detail;
      else if (body.detail) detail = JSON.stringify(body.detail);
    } catch {
      /* plain-text error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class TrialApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.fetchFn(this.url(path), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => asJson<T>(r));
  }

  private get<T>(path: string): Promise<T> {
    return this.fetchFn(this.url(path)).then((r) => asJson<T>(r));
  }

  createTrial(config: TrialCreate) {
    return this.post<{ id: string; recommendation: number; status: string }>(
      "/trials",
      config,
    );
  }

  listTrials() {
    return this.get<{
      trials: { id: string; label: string; status: string; cohorts: number }[];
    }>("/trials");
  }

  snapshot(id: string) {
    return this.get<Snapshot>(`/trials/${id}`);
  }

  recommendation(id: string) {
    return this.get<{
      recommendation: number | null;
      status: string;
      selected: number | null;
    }>(`/trials/${id}/recommendation`);
  }

  posterior(id: string) {
    return this.get<CurvePayload>(`/trials/${id}/posterior`);
  }

  postCohort(id: string, cohort: CohortPost) {
    return this.post<CohortResult>(`/trials/${id}/cohorts`, cohort);
  }

  previewCohort(id: string, cohort: CohortPost) {
    return this.post<CohortResult>(`/trials/${id}/preview`, cohort);
  }
}
