/** Ratio schedule: full-ratio warmup, then a repeating cycle of pruned
 * steps ending in one full step. */
export interface Schedule {
  warmupSteps: number;
  prunedRatio: number;
  prunedPerFull: number;
}

export const DEFAULT_SCHEDULE: Schedule = Object.freeze({
  warmupSteps: 5000,
  prunedRatio: 0.2,
  prunedPerFull: 5,
});

export function validateSchedule(s: Schedule): void {
  if (!Number.isInteger(s.warmupSteps) || s.warmupSteps < 0) {
    throw new RangeError("warmupSteps must be >= 0");
  }
  if (!(s.prunedRatio > 0 && s.prunedRatio <= 1)) {
    throw new RangeError("prunedRatio must be in (0, 1]");
  }
  if (!Number.isInteger(s.prunedPerFull) || s.prunedPerFull < 0) {
    throw new RangeError("prunedPerFull must be >= 0");
  }
}

/** Ratio in force at a 1-based training step. */
export function activeRatio(step: number, schedule: Schedule = DEFAULT_SCHEDULE): number {
  validateSchedule(schedule);
  if (!Number.isInteger(step) || step < 1) {
    throw new RangeError(`step must be >= 1, got ${step}`);
  }
  if (step <= schedule.warmupSteps) {
    return 1.0;
  }
  const j = (step - schedule.warmupSteps - 1) % (schedule.prunedPerFull + 1);
  return j < schedule.prunedPerFull ? schedule.prunedRatio : 1.0;
}
