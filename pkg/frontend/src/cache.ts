/** Reader for frame-selection cache files.
 *
 * A cache file is a single JSON document produced by the scoring engine:
 * a canonical-config hash, the configuration itself, per-trajectory score
 * vectors with forced-keep frames, one retained-index view per ratio, and
 * per-trajectory anomaly flags.  This module never rescopes or re-prunes;
 * it answers the training-time queries straight from the file.
 */
import { readFileSync } from "node:fs";

import {
  CacheFormatError,
  ConfigMismatchError,
  RatioNotPrecomputedError,
  UnknownTrajectoryError,
} from "./errors.js";
import { DEFAULT_SCHEDULE, type Schedule, activeRatio } from "./schedule.js";

export interface RetentionView {
  readonly targetRatio: number;
  readonly retained: readonly number[];
  readonly numFrames: number;
  readonly actualRatio: number;
  /** Ratio key exactly as the producer wrote it. */
  readonly ratioKey: string;
}

export interface FrameScoreVectors {
  readonly aviRaw: readonly number[];
  readonly aviNorm: readonly number[];
  readonly vacRaw: readonly number[];
  readonly vacNorm: readonly number[];
  readonly tpiNorm: readonly number[];
  readonly gripperSignalNorm: readonly number[];
  readonly gripperTransitions: readonly number[];
  readonly combined: readonly number[];
}

export interface CacheEntry {
  readonly numFrames: number;
  readonly scores: FrameScoreVectors;
  readonly forced: readonly number[];
  readonly views: ReadonlyMap<number, RetentionView>;
}

export interface SampleRecord {
  readonly step: number;
  readonly trajectoryId: string;
  readonly activeRatio: number;
  readonly originalT: number;
  readonly remappedT: number;
}

export interface OpenCacheOptions {
  /** Refuse the cache unless its config hash equals this value. */
  expectedConfigHash?: string;
}

/** Render a ratio the way the producer's float repr does ("1.0", "0.2"). */
export function formatRatio(r: number): string {
  return Number.isInteger(r) ? r.toFixed(1) : String(r);
}

const SCORE_KEYS = [
  "avi_raw",
  "avi_norm",
  "vac_raw",
  "vac_norm",
  "tpi_norm",
  "gripper_signal_norm",
  "gripper_transitions",
  "combined",
] as const;

function corrupt(detail: string): never {
  throw new CacheFormatError(`cache file corrupt: ${detail}`);
}

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null && !Array.isArray(x);
}

function numberVector(x: unknown, what: string): number[] {
  if (!Array.isArray(x) || !x.every((v) => typeof v === "number" && Number.isFinite(v))) {
    corrupt(`${what} must be an array of finite numbers`);
  }
  return x as number[];
}

function frameIndexList(x: unknown, numFrames: number, what: string): number[] {
  const v = numberVector(x, what);
  for (let i = 0; i < v.length; i++) {
    const t = v[i]!;
    if (!Number.isInteger(t) || t < 1 || t > numFrames) {
      corrupt(`${what} holds a frame index outside [1, ${numFrames}]`);
    }
    if (i > 0 && t <= v[i - 1]!) {
      corrupt(`${what} must be strictly increasing`);
    }
  }
  return v;
}

function lowerBound(a: readonly number[], x: number): number {
  let lo = 0;
  let hi = a.length;
  while (lo < hi) {
    const mid = (lo + hi) >> 1;
    if (a[mid]! < x) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return lo;
}

function parseScores(raw: unknown, trajectoryId: string): { scores: FrameScoreVectors; numFrames: number } {
  if (!isRecord(raw)) {
    corrupt(`entry '${trajectoryId}' scores must be an object`);
  }
  for (const key of SCORE_KEYS) {
    if (!(key in raw)) {
      corrupt(`entry '${trajectoryId}' scores missing '${key}'`);
    }
  }
  const combined = numberVector(raw.combined, `entry '${trajectoryId}' combined`);
  const numFrames = combined.length;
  if (numFrames < 2) {
    corrupt(`entry '${trajectoryId}' must score at least 2 frames`);
  }
  const vec = (key: string): number[] => {
    const v = numberVector(raw[key], `entry '${trajectoryId}' ${key}`);
    if (v.length !== numFrames) {
      corrupt(`entry '${trajectoryId}' ${key} length disagrees with combined`);
    }
    return v;
  };
  return {
    numFrames,
    scores: {
      aviRaw: vec("avi_raw"),
      aviNorm: vec("avi_norm"),
      vacRaw: vec("vac_raw"),
      vacNorm: vec("vac_norm"),
      tpiNorm: vec("tpi_norm"),
      gripperSignalNorm: vec("gripper_signal_norm"),
      gripperTransitions: frameIndexList(
        raw.gripper_transitions, numFrames, `entry '${trajectoryId}' gripper_transitions`),
      combined,
    },
  };
}

function parseView(key: string, raw: unknown, numFrames: number, trajectoryId: string): RetentionView {
  if (!isRecord(raw)) {
    corrupt(`entry '${trajectoryId}' view '${key}' must be an object`);
  }
  const targetRatio = raw.target_ratio;
  if (typeof targetRatio !== "number" || !(targetRatio > 0 && targetRatio <= 1)) {
    corrupt(`entry '${trajectoryId}' view '${key}' target_ratio must be in (0, 1]`);
  }
  if (Number(key) !== targetRatio) {
    corrupt(`entry '${trajectoryId}' view key '${key}' disagrees with its target_ratio`);
  }
  if (raw.num_frames !== numFrames) {
    corrupt(`entry '${trajectoryId}' view '${key}' num_frames disagrees with scores`);
  }
  const retained = frameIndexList(raw.retained, numFrames, `entry '${trajectoryId}' view '${key}' retained`);
  if (retained.length === 0) {
    corrupt(`entry '${trajectoryId}' view '${key}' retains no frames`);
  }
  if (raw.actual_ratio !== retained.length / numFrames) {
    corrupt(`entry '${trajectoryId}' view '${key}' actual_ratio disagrees with retained count`);
  }
  return { targetRatio, retained, numFrames, actualRatio: retained.length / numFrames, ratioKey: key };
}

function parseEntry(trajectoryId: string, raw: unknown): CacheEntry {
  if (!isRecord(raw)) {
    corrupt(`entry '${trajectoryId}' must be an object`);
  }
  for (const key of Object.keys(raw)) {
    if (key !== "scores" && key !== "forced" && key !== "views") {
      corrupt(`entry '${trajectoryId}' has unknown key '${key}'`);
    }
  }
  const { scores, numFrames } = parseScores(raw.scores, trajectoryId);
  const forced = frameIndexList(raw.forced, numFrames, `entry '${trajectoryId}' forced`);
  if (!isRecord(raw.views) || Object.keys(raw.views).length === 0) {
    corrupt(`entry '${trajectoryId}' must hold at least one view`);
  }
  const views = new Map<number, RetentionView>();
  for (const [key, view] of Object.entries(raw.views)) {
    views.set(Number(key), parseView(key, view, numFrames, trajectoryId));
  }
  return { numFrames, scores, forced, views };
}

export class FrameSelectionCache {
  readonly configHash: string;
  readonly config: Record<string, unknown>;
  readonly flags: ReadonlyMap<string, readonly string[]>;
  private entriesById: Map<string, CacheEntry> | null;

  constructor(
    configHash: string,
    config: Record<string, unknown>,
    entries: Map<string, CacheEntry>,
    flags: Map<string, readonly string[]>,
  ) {
    this.configHash = configHash;
    this.config = config;
    this.flags = flags;
    this.entriesById = entries;
  }

  private live(): Map<string, CacheEntry> {
    if (this.entriesById === null) {
      throw new Error("cache is closed");
    }
    return this.entriesById;
  }

  trajectoryIds(): string[] {
    return [...this.live().keys()];
  }

  entry(trajectoryId: string): CacheEntry {
    const entry = this.live().get(trajectoryId);
    if (entry === undefined) {
      throw new UnknownTrajectoryError(trajectoryId);
    }
    return entry;
  }

  view(trajectoryId: string, ratio: number): RetentionView {
    const entry = this.entry(trajectoryId);
    const view = entry.views.get(ratio);
    if (view === undefined) {
      const have = [...entry.views.values()]
        .sort((a, b) => a.targetRatio - b.targetRatio)
        .map((v) => v.ratioKey)
        .join(", ");
      throw new RatioNotPrecomputedError(
        `ratio not precomputed: ${formatRatio(ratio)} (cache has ${have})`);
    }
    return view;
  }

  /** Smallest retained index >= t, or the last retained index if none. */
  remap(trajectoryId: string, ratio: number, t: number): number {
    const view = this.view(trajectoryId, ratio);
    if (!Number.isInteger(t) || t < 1 || t > view.numFrames) {
      throw new RangeError(`frame index ${t} outside [1, ${view.numFrames}]`);
    }
    const i = lowerBound(view.retained, t);
    return i < view.retained.length ? view.retained[i]! : view.retained[view.retained.length - 1]!;
  }

  /** Resolve the schedule ratio for a step and remap a frame through it. */
  sample(step: number, trajectoryId: string, t: number, schedule: Schedule = DEFAULT_SCHEDULE): SampleRecord {
    const ratio = activeRatio(step, schedule);
    return {
      step,
      trajectoryId,
      activeRatio: ratio,
      originalT: t,
      remappedT: this.remap(trajectoryId, ratio, t),
    };
  }

  /** Release the entry table; any later query throws. */
  close(): void {
    this.entriesById = null;
  }
}

export function openCache(path: string, options: OpenCacheOptions = {}): FrameSelectionCache {
  let parsed: unknown;
  try {
    parsed = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    if (err instanceof SyntaxError) {
      corrupt(`not valid JSON (${err.message})`);
    }
    throw err;
  }
  if (!isRecord(parsed)) {
    corrupt("top level must be an object");
  }
  for (const key of Object.keys(parsed)) {
    if (!["config", "config_hash", "entries", "flags"].includes(key)) {
      corrupt(`unknown top-level key '${key}'`);
    }
  }
  const configHash = parsed.config_hash;
  if (typeof configHash !== "string" || !/^[0-9a-f]{64}$/.test(configHash)) {
    corrupt("config_hash must be 64 lowercase hex characters");
  }
  if (options.expectedConfigHash !== undefined && options.expectedConfigHash !== configHash) {
    throw new ConfigMismatchError(
      `incompatible cache configuration: cache has ${configHash.slice(0, 12)}..., ` +
      `expected ${options.expectedConfigHash.slice(0, 12)}...`);
  }
  if (!isRecord(parsed.config)) {
    corrupt("config must be an object");
  }
  if (!isRecord(parsed.entries)) {
    corrupt("entries must be an object");
  }
  const entries = new Map<string, CacheEntry>();
  for (const [trajectoryId, raw] of Object.entries(parsed.entries)) {
    entries.set(trajectoryId, parseEntry(trajectoryId, raw));
  }
  const flags = new Map<string, readonly string[]>();
  if (parsed.flags !== undefined) {
    if (!isRecord(parsed.flags)) {
      corrupt("flags must be an object");
    }
    for (const [trajectoryId, raw] of Object.entries(parsed.flags)) {
      if (!entries.has(trajectoryId)) {
        corrupt(`flags reference unknown trajectory '${trajectoryId}'`);
      }
      if (!Array.isArray(raw) || !raw.every((f) => typeof f === "string")) {
        corrupt(`flags for '${trajectoryId}' must be an array of strings`);
      }
      flags.set(trajectoryId, raw as string[]);
    }
  }
  return new FrameSelectionCache(configHash, parsed.config, entries, flags);
}
