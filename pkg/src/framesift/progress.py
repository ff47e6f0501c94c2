"""Task-progress prior: a small 1-d Gaussian mixture over stage annotations.

Stage centers pooled from an annotated subset are fit with EM; the resulting
density over normalized progress, rescaled so its per-trajectory maximum is
exactly 1, becomes the progress term of the importance score.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class GmmPrior:
    """A normalized 1-d Gaussian mixture.

    Weights are renormalized to sum to 1 at construction, so any positive
    rescaling of the input weights yields the same prior.
    """

    weights: tuple[float, ...]
    means: tuple[float, ...]
    variances: tuple[float, ...]
    fit_log_likelihood: float = 0.0

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        v = np.asarray(self.variances, dtype=np.float64)
        if not (w.shape == m.shape == v.shape) or w.ndim != 1 or w.shape[0] < 1:
            raise ValueError("weights, means, variances must be equal-length, nonempty")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m)) and np.all(np.isfinite(v))):
            raise ValueError("prior parameters must be finite")
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive sum")
        if np.any(v < VARIANCE_FLOOR):
            raise ValueError(f"variances must be >= {VARIANCE_FLOOR}")
        w = w / w.sum()
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        object.__setattr__(self, "means", tuple(float(x) for x in m))
        object.__setattr__(self, "variances", tuple(float(x) for x in v))
        object.__setattr__(self, "fit_log_likelihood", float(self.fit_log_likelihood))

    @property
    def n_components(self) -> int:
        return len(self.weights)


def _log_component_densities(x: np.ndarray, prior_w, prior_m, prior_v) -> np.ndarray:
    """(N, M) matrix of log(pi_m) + log N(x_i; mu_m, var_m)."""
    w = np.asarray(prior_w, dtype=np.float64)
    m = np.asarray(prior_m, dtype=np.float64)
    v = np.asarray(prior_v, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)[:, None]
    return np.log(w)[None, :] - 0.5 * np.log(2.0 * math.pi * v)[None, :] - (x - m[None, :]) ** 2 / (2.0 * v[None, :])


def _logsumexp(rows: np.ndarray) -> np.ndarray:
    hi = rows.max(axis=1, keepdims=True)
    return (hi + np.log(np.exp(rows - hi).sum(axis=1, keepdims=True)))[:, 0]


def mixture_density(prior: GmmPrior, p: np.ndarray) -> np.ndarray:
    """Vectorized q(p) = sum_m pi_m N(p; mu_m, var_m)."""
    comp = _log_component_densities(np.atleast_1d(p), prior.weights, prior.means, prior.variances)
    return np.exp(_logsumexp(comp))


def evaluate_prior(prior: GmmPrior, p: float) -> float:
    """Exact mixture density at one progress value in [0, 1]."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"progress value {p} outside [0, 1]")
    return float(mixture_density(prior, np.array([p]))[0])


def fit_gmm_1d(
    samples: np.ndarray,
    M: int,
    tol: float = 1e-8,
    max_iter: int = 200,
    seed: int = 0,
    ll_history: list[float] | None = None,
) -> GmmPrior:
    """Fit an M-component 1-d mixture with EM.

    Means initialize at the (i + 0.5)/M sample quantiles, weights uniform,
    all variances at the population variance of the samples (floored).  The
    fit is deterministic given (samples, M); `seed` is accepted for
    interface stability but the initialization draws nothing random.
    Iterates until the log-likelihood improvement drops below `tol` or
    `max_iter` EM steps have run.  The log-likelihood is checked to be
    non-decreasing at every iteration (1e-9 slack).

    Pass a list as `ll_history` to receive the per-iteration log-likelihood.
    """
    del seed
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.shape[0] < 1:
        raise ValueError("samples must be nonempty")
    if not np.all(np.isfinite(x)) or x.min() < 0.0 or x.max() > 1.0:
        raise ValueError("samples must be finite values in [0, 1]")
    if M < 1:
        raise ValueError("M must be >= 1")

    q = (np.arange(M, dtype=np.float64) + 0.5) / M
    means = np.quantile(x, q)
    weights = np.full(M, 1.0 / M)
    variances = np.full(M, max(float(x.var()), VARIANCE_FLOOR))
    N = x.shape[0]

    prev_ll = -math.inf
    ll = -math.inf
    for step in range(max_iter + 1):
        comp = _log_component_densities(x, weights, means, variances)
        lse = _logsumexp(comp)
        ll = float(lse.sum())
        if ll < prev_ll - 1e-9:
            raise RuntimeError(f"EM log-likelihood decreased: {prev_ll} -> {ll}")
        if ll_history is not None:
            ll_history.append(ll)
        if step == max_iter or ll - prev_ll < tol:
            break
        prev_ll = ll

        resp = np.exp(comp - lse[:, None])
        nm = resp.sum(axis=0)
        # a starved component keeps its parameters; its weight decays to ~0
        alive = nm > 1e-12
        new_means = means.copy()
        new_vars = variances.copy()
        new_means[alive] = (resp[:, alive] * x[:, None]).sum(axis=0) / nm[alive]
        dev = (x[:, None] - new_means[None, :]) ** 2
        new_vars[alive] = (resp[:, alive] * dev[:, alive]).sum(axis=0) / nm[alive]
        weights = nm / N
        means = new_means
        variances = np.maximum(new_vars, VARIANCE_FLOOR)

    return GmmPrior(
        weights=tuple(weights),
        means=tuple(means),
        variances=tuple(variances),
        fit_log_likelihood=ll,
    )


def compute_tpi_gmm(T: int, prior: GmmPrior) -> np.ndarray:
    """Progress scores q(p_t) / max_s q(p_s) on the trajectory's time grid.

    p_t = (t - 1)/(T - 1).  The maximum entry is exactly 1.
    """
    if T < 2:
        raise ValueError("T must be >= 2")
    p = np.arange(T, dtype=np.float64) / (T - 1)
    q = mixture_density(prior, p)
    return q / q.max()
