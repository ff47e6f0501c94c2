import { describe, expect, it } from "vitest";

import { DEFAULT_SCHEDULE, activeRatio } from "../src/index.js";

describe("activeRatio", () => {
  it("serves full trajectories through warmup", () => {
    expect(activeRatio(1)).toBe(1.0);
    expect(activeRatio(5000)).toBe(1.0);
  });

  it("runs five pruned steps then one full step after warmup", () => {
    const block = [5001, 5002, 5003, 5004, 5005, 5006].map((s) => activeRatio(s));
    expect(block).toEqual([0.2, 0.2, 0.2, 0.2, 0.2, 1.0]);
  });

  it("keeps the pruned share exact over any aligned window", () => {
    for (let offset = 0; offset < 12; offset++) {
      let pruned = 0;
      for (let s = 5001 + offset; s < 5001 + offset + 6000; s++) {
        if (activeRatio(s) === DEFAULT_SCHEDULE.prunedRatio) {
          pruned += 1;
        }
      }
      expect(pruned).toBe(5000);
    }
  });

  it("supports zero warmup", () => {
    const schedule = { warmupSteps: 0, prunedRatio: 0.5, prunedPerFull: 2 };
    expect([1, 2, 3, 4].map((s) => activeRatio(s, schedule))).toEqual([0.5, 0.5, 1.0, 0.5]);
  });

  it("rejects non-positive and fractional steps", () => {
    expect(() => activeRatio(0)).toThrowError(/step must be >= 1/);
    expect(() => activeRatio(-3)).toThrowError(RangeError);
    expect(() => activeRatio(1.5)).toThrowError(RangeError);
  });

  it("rejects malformed schedules", () => {
    expect(() => activeRatio(1, { warmupSteps: -1, prunedRatio: 0.2, prunedPerFull: 5 }))
      .toThrowError(RangeError);
    expect(() => activeRatio(1, { warmupSteps: 0, prunedRatio: 0, prunedPerFull: 5 }))
      .toThrowError(/prunedRatio/);
    expect(() => activeRatio(1, { warmupSteps: 0, prunedRatio: 1.5, prunedPerFull: 5 }))
      .toThrowError(RangeError);
  });
});
