import { describe, expect, it } from "vitest";

import { validateCohortForm } from "../src/form.js";

describe("cohort form validation", () => {
  it("accepts a clean entry", () => {
    const r = validateCohortForm({ level: "2", size: "3", dlts: "1" }, 6);
    expect(r.ok).toBe(true);
    expect(r.value).toEqual({ level: 2, size: 3, dlt_count: 1 });
  });

  it("blocks DLT counts above the cohort size client-side", () => {
    const r = validateCohortForm({ level: 2, size: 3, dlts: 4 }, 6);
    expect(r.ok).toBe(false);
    expect(r.errors.join(" ")).toMatch(/cannot exceed/);
  });

  it("rejects out-of-range levels and non-integers", () => {
    expect(validateCohortForm({ level: "7", size: "3", dlts: "0" }, 6).ok).toBe(
      false,
    );
    expect(
      validateCohortForm({ level: "2", size: "2.5", dlts: "0" }, 6).ok,
    ).toBe(false);
    expect(validateCohortForm({ level: "", size: "3", dlts: "0" }, 6).ok).toBe(
      false,
    );
  });

  it("rejects zero-size cohorts and negative counts", () => {
    expect(validateCohortForm({ level: 1, size: 0, dlts: 0 }, 4).ok).toBe(false);
    expect(validateCohortForm({ level: 1, size: 3, dlts: -1 }, 4).ok).toBe(false);
  });
});
