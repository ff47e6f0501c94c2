/** Error types mirroring the cache producer's failure modes and wording. */

/** The cache file is structurally invalid or internally inconsistent. */
export class CacheFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "CacheFormatError";
  }
}

/** The cache was built under a different configuration than expected. */
export class ConfigMismatchError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ConfigMismatchError";
  }
}

export class UnknownTrajectoryError extends Error {
  constructor(trajectoryId: string) {
    super(`unknown trajectory id '${trajectoryId}'`);
    this.name = "UnknownTrajectoryError";
  }
}

export class RatioNotPrecomputedError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "RatioNotPrecomputedError";
  }
}
