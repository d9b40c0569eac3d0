/** Client-side guards for the cohort form: reject before the wire. */

export interface CohortFormInput {
  level: string | number;
  size: string | number;
  dlts: string | number;
}

export interface CohortFormResult {
  ok: boolean;
  errors: string[];
  value?: { level: number; size: number; dlt_count: number };
}

function asInt(raw: string | number): number | null {
  const n = typeof raw === "number" ? raw : Number(raw.trim());
  return Number.isInteger(n) ? n : null;
}

export function validateCohortForm(
  input: CohortFormInput,
  levels: number,
): CohortFormResult {
  const errors: string[] = [];
  const level = asInt(input.level);
  const size = asInt(input.size);
  const dlts = asInt(input.dlts);
  if (level === null || level < 1 || level > levels) {
    errors.push(`level must be an integer between 1 and ${levels}`);
  }
  if (size === null || size < 1) {
    errors.push("cohort size must be a positive integer");
  }
  if (dlts === null || dlts < 0) {
    errors.push("DLT count must be a non-negative integer");
  }
  if (size !== null && dlts !== null && dlts > size) {
    errors.push("DLT count cannot exceed the cohort size");
  }
  if (errors.length) return { ok: false, errors };
  return {
    ok: true,
    errors: [],
    value: { level: level!, size: size!, dlt_count: dlts! },
  };
}
