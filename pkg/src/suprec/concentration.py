"""Separation-condition diagnostics and subexponential calculators.

The per-sample quantity ``alpha^2_{ji}`` is the conditional variance of
``phi_ji^T y_j`` given the matrices; its mean over samples is the conditional
mean of the proxy statistic, and its spread drives the tail bounds that the
separation condition compares against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .datagen import Ensemble, MeasurementMatrixBatch, SupportSet
from .errors import InvalidInputError

# Generic constants: the factor 2 from the two-sided tail exponent times the
# square-of-subgaussian parameters (128, 8).
DEFAULT_C1 = 256.0
DEFAULT_C2 = 16.0
# Tightest valid pair for a Gaussian prior: chi-squared(1) - 1 is
# subexp(4, 4), doubled by the tail exponent.
GAUSSIAN_CHI2_C1 = 8.0
GAUSSIAN_CHI2_C2 = 8.0


@dataclass(frozen=True, eq=False)
class AlphaStats:
    values: np.ndarray  # (n,)
    coordinate: int
    in_support: bool

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SubexpParams:
    v2: float
    b: float

    def __post_init__(self):
        if self.v2 < 0 or self.b < 0:
            raise InvalidInputError(f"subexponential parameters must be >= 0, got {self}")


@dataclass(frozen=True)
class SeparationReport:
    pair: tuple[int, int]
    lhs: float
    rhs: float
    nu_in: float
    nu_out: float
    holds: bool
    c1: float
    c2: float
    delta_prime: float


def alpha_squared(
    matrices: MeasurementMatrixBatch, support: SupportSet, sigma2: float, i: int
) -> AlphaStats:
    phi = matrices.matrices
    if not 0 <= i < phi.shape[2]:
        raise InvalidInputError(f"coordinate {i} out of range for d={phi.shape[2]}")
    col = phi[:, :, i]
    norm2 = np.einsum("jm,jm->j", col, col)
    if i in support:
        others = [l for l in support.indices if l != i]
        ip = np.einsum("jml,jm->jl", phi[:, :, others], col)
        values = norm2**2 + (ip**2).sum(axis=1) + sigma2 * norm2
    else:
        ip = np.einsum("jml,jm->jl", phi[:, :, list(support.indices)], col)
        values = (ip**2).sum(axis=1) + sigma2 * norm2
    return AlphaStats(values, i, i in support)


def alpha_squared_all(
    matrices: MeasurementMatrixBatch | np.ndarray, support: SupportSet, sigma2: float
) -> np.ndarray:
    """``(n, d)`` array of ``alpha^2_{ji}`` for every coordinate at once.

    Summing squared inner products against all support columns (including
    the coordinate itself when it lies in the support) reproduces both case
    formulas, since ``(phi_i^T phi_i)^2 = ||phi_i||^4``.
    """
    phi = getattr(matrices, "matrices", matrices)
    g = np.einsum("jmi,jml->jil", phi, phi[:, :, list(support.indices)])
    out = np.einsum("jil,jil->ji", g, g)
    if sigma2:
        out += sigma2 * np.einsum("jmi,jmi->ji", phi, phi)
    return out


def default_delta_prime(delta: float, k: int, d: int) -> float:
    return delta / (4 * max(k, d - k))


def deviation_width(alpha2: np.ndarray, delta_prime: float, c1: float, c2: float) -> np.ndarray:
    """``nu = max(sqrt(c1/n^2 * sum alpha^4 * L), c2/n * max alpha^2 * L)``, ``L = log(1/delta')``.

    ``alpha2`` may be ``(n,)`` or ``(n, d)``; the reduction runs over axis 0.
    """
    n = alpha2.shape[0]
    log_term = math.log(1 / delta_prime)
    quad = np.sqrt(c1 / n**2 * (alpha2**2).sum(axis=0) * log_term)
    lin = c2 / n * alpha2.max(axis=0) * log_term
    return np.maximum(quad, lin)


def separation_holds(
    in_stats: AlphaStats,
    out_stats: AlphaStats,
    delta_prime: float,
    c1: float = DEFAULT_C1,
    c2: float = DEFAULT_C2,
) -> SeparationReport:
    if in_stats.n != out_stats.n:
        raise InvalidInputError(f"sample counts differ: {in_stats.n} vs {out_stats.n}")
    if not 0 < delta_prime < 1:
        raise InvalidInputError(f"delta' must lie in (0, 1), got {delta_prime}")
    nu_in = float(deviation_width(in_stats.values, delta_prime, c1, c2))
    nu_out = float(deviation_width(out_stats.values, delta_prime, c1, c2))
    lhs = float(in_stats.values.mean() - out_stats.values.mean())
    rhs = nu_in + nu_out
    return SeparationReport(
        (in_stats.coordinate, out_stats.coordinate), lhs, rhs, nu_in, nu_out,
        lhs >= rhs, c1, c2, delta_prime,
    )


def separation_event(
    alpha2: np.ndarray,
    support: SupportSet,
    delta_prime: float,
    c1: float = DEFAULT_C1,
    c2: float = DEFAULT_C2,
) -> bool:
    """Whether the separation condition holds for every (in, out) pair.

    For a pair it reads ``mu_i - nu_i >= mu_i' + nu_i'``, so all pairs hold
    exactly when the smallest left side beats the largest right side.
    """
    mask = support.mask()
    if mask.all():
        return True
    mu = alpha2.mean(axis=0)
    nu = deviation_width(alpha2, delta_prime, c1, c2)
    return bool((mu - nu)[mask].min() >= (mu + nu)[~mask].max())


def subexp_tail_bound(params: SubexpParams, t: float) -> float:
    """Two-sided bound ``min(1, 2 exp(-min(t^2/(2 v2), t/(2 b))))``."""
    if t < 0:
        raise InvalidInputError(f"t must be >= 0, got {t}")
    if t == 0:
        return 1.0
    quad = t * t / (2 * params.v2) if params.v2 > 0 else math.inf
    lin = t / (2 * params.b) if params.b > 0 else math.inf
    return min(1.0, 2 * math.exp(-min(quad, lin)))


def subgaussian_square_params(sigma2: float) -> SubexpParams:
    """Parameters of ``X^2`` for a centered ``X ~ subG(sigma2)``."""
    if sigma2 < 0:
        raise InvalidInputError(f"sigma2 must be >= 0, got {sigma2}")
    return SubexpParams(128 * sigma2**2, 8 * sigma2)


def subexp_combine(parts: Sequence[SubexpParams], scale: float = 1.0) -> SubexpParams:
    """Parameters of ``scale * sum(parts)`` for independent parts."""
    if not parts:
        raise InvalidInputError("need at least one subexponential part")
    scaled = [SubexpParams(scale**2 * p.v2, abs(scale) * p.b) for p in parts]
    return SubexpParams(sum(p.v2 for p in scaled), max(p.b for p in scaled))


@dataclass(frozen=True)
class MomentCheck:
    estimate: float
    std_error: float
    bound: float
    passed: bool

    def to_json(self) -> dict:
        return {"estimate": self.estimate, "std_error": self.std_error,
                "bound": self.bound, "pass": self.passed}


@dataclass(frozen=True)
class MomentReport:
    ensemble: Ensemble
    m: int
    trials: int
    norm4: MomentCheck
    inner2: MomentCheck
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.norm4.passed and self.inner2.passed

    def to_json(self) -> dict:
        return {"ensemble": self.ensemble.value, "m": self.m, "trials": self.trials,
                "norm4": self.norm4.to_json(), "inner2": self.inner2.to_json(),
                "pass": self.passed, "notes": self.notes}


def expected_norm4(ensemble: Ensemble | str, m: int) -> float:
    """``E||Z||^4 = m E[z^4] + (m-1)/m`` for i.i.d. entries of variance ``1/m``."""
    fourth = 3 / m**2 if Ensemble(ensemble) is Ensemble.GAUSSIAN else 1 / m**2
    return m * fourth + (m - 1) / m


def moment_suite(
    ensemble: Ensemble | str, m: int, trials: int, rng: np.random.Generator, n_se: float = 4.0
) -> MomentReport:
    """Monte Carlo check of ``E||Z||^4`` and ``E(Z^T W)^2 = 1/m``."""
    ensemble = Ensemble(ensemble)
    if ensemble is Ensemble.GAUSSIAN:
        zw = rng.standard_normal((2, trials, m)) / math.sqrt(m)
    else:
        zw = (2.0 * rng.integers(0, 2, size=(2, trials, m)) - 1.0) / math.sqrt(m)
    z, w = zw
    norm4 = np.einsum("tm,tm->t", z, z) ** 2
    inner2 = np.einsum("tm,tm->t", z, w) ** 2
    notes = []
    if trials < 10_000:
        notes.append("fewer than 1e4 trials; tolerances are loose")
    checks = []
    for sample, target in ((norm4, expected_norm4(ensemble, m)), (inner2, 1 / m)):
        est = float(sample.mean())
        se = float(sample.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
        # A degenerate sample (Rademacher norms) has zero spread: compare exactly.
        ok = abs(est - target) <= max(n_se * se, 1e-12 * max(1.0, abs(target)))
        checks.append(MomentCheck(est, se, target, bool(ok)))
    if ensemble is Ensemble.RADEMACHER:
        notes.append("rademacher fourth moment is 1/m^2, so E||Z||^4 = 1 rather than 1 + 2/m")
    return MomentReport(ensemble, m, trials, checks[0], checks[1], notes)
