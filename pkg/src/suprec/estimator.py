"""Proxy-variance statistic and support selectors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datagen import ObservationBatch, VarianceVector
from .errors import InvalidInputError

# Samples per accumulation chunk; fixed so the reduction order never changes.
CHUNK = 2048


@dataclass(frozen=True, eq=False)
class ProxyVarianceEstimate:
    values: np.ndarray
    n_used: int

    @property
    def d(self) -> int:
        return self.values.shape[0]

    def to_json(self) -> list[float]:
        return self.values.tolist()


@dataclass(frozen=True)
class SupportEstimate:
    indices: tuple[int, ...]
    mode: str
    tie_broken: bool = False

    def to_json(self) -> list[int]:
        return [i + 1 for i in self.indices]


@dataclass(frozen=True)
class ThresholdSpec:
    tau: float

    def __post_init__(self):
        if not math.isfinite(self.tau):
            raise InvalidInputError(f"threshold must be finite, got {self.tau}")


def proxy_variance(obs: ObservationBatch) -> ProxyVarianceEstimate:
    """Per-coordinate mean of ``(phi_ji^T y_j)^2`` over the samples.

    Only the diagonal of ``(1/n) sum_j Phi_j^T y_j y_j^T Phi_j`` is formed,
    accumulated chunk by chunk.
    """
    phi, y = obs.matrices.matrices, obs.observations
    n = y.shape[0]
    if n == 0:
        raise InvalidInputError("empty observation batch")
    acc = np.zeros(phi.shape[2])
    for start in range(0, n, CHUNK):
        z = np.einsum("jmd,jm->jd", phi[start:start + CHUNK], y[start:start + CHUNK])
        acc += np.einsum("jd,jd->d", z, z)
    values = acc / n
    values.setflags(write=False)
    return ProxyVarianceEstimate(values, n)


def topk_support(est: ProxyVarianceEstimate | np.ndarray, k: int) -> SupportEstimate:
    """Indices of the ``k`` largest entries; ties go to the smaller index."""
    values = np.asarray(getattr(est, "values", est))
    d = values.shape[0]
    if not 1 <= k <= d:
        raise InvalidInputError(f"need 1 <= k <= d, got k={k}, d={d}")
    order = np.argsort(-values, kind="stable")
    tie = k < d and values[order[k - 1]] == values[order[k]]
    return SupportEstimate(tuple(sorted(order[:k].tolist())), "topk", bool(tie))


def threshold_support(
    est: ProxyVarianceEstimate | np.ndarray, tau: ThresholdSpec | float
) -> SupportEstimate:
    tau = tau if isinstance(tau, ThresholdSpec) else ThresholdSpec(float(tau))
    values = np.asarray(getattr(est, "values", est))
    return SupportEstimate(tuple(np.flatnonzero(values >= tau.tau).tolist()), "threshold")


def expected_proxy(lam: VarianceVector | np.ndarray, m: int, sigma2: float = 0.0) -> np.ndarray:
    """Mean of the proxy statistic for Gaussian-moment ensembles.

    ``(m+1)/m * lam_i + trace(K_lam)/m + sigma2`` for every coordinate.
    """
    values = np.asarray(getattr(lam, "values", lam), dtype=float)
    return (m + 1) / m * values + values.sum() / m + sigma2


def default_threshold(k: int, m: int, sigma2: float = 0.0, lambda_min: float = 1.0) -> ThresholdSpec:
    """Midpoint between the expected statistic on and off the support."""
    return ThresholdSpec(k / m + sigma2 + (m + 1) / (2 * m) * lambda_min)
