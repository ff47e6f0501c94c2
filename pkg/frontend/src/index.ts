export {
  FrameSelectionCache,
  formatRatio,
  openCache,
  type CacheEntry,
  type FrameScoreVectors,
  type OpenCacheOptions,
  type RetentionView,
  type SampleRecord,
} from "./cache.js";
export {
  CacheFormatError,
  ConfigMismatchError,
  RatioNotPrecomputedError,
  UnknownTrajectoryError,
} from "./errors.js";
export {
  DEFAULT_SCHEDULE,
  activeRatio,
  validateSchedule,
  type Schedule,
} from "./schedule.js";
