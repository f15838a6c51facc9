"""Problem instances: supports, variance vectors, signals, matrices, observations.

Indices are 0-based throughout the library; serialized support sets are
1-based (see :meth:`SupportSet.to_json`).
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import seeding
from .errors import InvalidConfigError, InvalidInputError

FORMAT_VERSION = 1
DEFAULT_MASTER_SEED = 2019


class Prior(str, enum.Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"


class Ensemble(str, enum.Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"


class VarianceMode(str, enum.Enum):
    BINARY = "binary"
    UNIFORM_RANGE = "uniform_range"


@dataclass(frozen=True)
class ProblemConfig:
    """Complete description of the generative model for one experiment."""

    d: int
    k: int
    m: int
    n: int
    sigma2: float = 0.0
    prior: Prior = Prior.GAUSSIAN
    ensemble: Ensemble = Ensemble.GAUSSIAN
    lambda_min: float = 1.0
    lambda_max: float = 1.0
    master_seed: int = DEFAULT_MASTER_SEED

    def __post_init__(self):
        object.__setattr__(self, "prior", _coerce_enum(Prior, self.prior, "prior"))
        object.__setattr__(self, "ensemble", _coerce_enum(Ensemble, self.ensemble, "ensemble"))
        for name in ("d", "k", "m", "n", "master_seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidConfigError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not 1 <= self.k <= self.d:
            raise InvalidConfigError(f"need 1 <= k <= d, got k={self.k}, d={self.d}")
        if self.m < 1 or self.n < 1:
            raise InvalidConfigError(f"need m >= 1 and n >= 1, got m={self.m}, n={self.n}")
        if not 0 <= self.master_seed < 2**64:
            raise InvalidConfigError("master_seed must be a 64-bit unsigned integer")
        for name in ("sigma2", "lambda_min", "lambda_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (math.isfinite(self.sigma2) and self.sigma2 >= 0):
            raise InvalidConfigError(f"sigma2 must be finite and >= 0, got {self.sigma2}")
        if not (0 < self.lambda_min <= self.lambda_max < math.inf):
            raise InvalidConfigError(
                f"need 0 < lambda_min <= lambda_max, got {self.lambda_min}, {self.lambda_max}"
            )

    @property
    def variance_mode(self) -> VarianceMode:
        if self.lambda_min == 1.0 and self.lambda_max == 1.0:
            return VarianceMode.BINARY
        return VarianceMode.UNIFORM_RANGE

    def replace(self, **changes) -> ProblemConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["prior"] = self.prior.value
        out["ensemble"] = self.ensemble.value
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ProblemConfig:
        data = dict(data)
        version = data.pop("format_version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise InvalidConfigError(f"unsupported format_version {version!r}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidConfigError(f"unknown config fields: {', '.join(unknown)}")
        missing = sorted(name for name in ("d", "k", "m", "n") if name not in data)
        if missing:
            raise InvalidConfigError(f"missing config fields: {', '.join(missing)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidConfigError):
                raise
            raise InvalidConfigError(str(exc)) from exc

    def to_json(self) -> str:
        return json.dumps({"format_version": FORMAT_VERSION, **self.to_dict()}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> ProblemConfig:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidConfigError("config JSON must be an object")
        return cls.from_dict(data)


def _coerce_enum(kind, value, name):
    try:
        return kind(value.lower() if isinstance(value, str) else value)
    except ValueError:
        choices = ", ".join(v.value for v in kind)
        raise InvalidConfigError(f"{name} must be one of {choices}, got {value!r}") from None


@dataclass(frozen=True)
class SupportSet:
    indices: tuple[int, ...]
    d: int

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise InvalidInputError("support indices must be distinct")
        if idx and not (0 <= idx[0] and idx[-1] < self.d):
            raise InvalidInputError(f"support indices out of range for d={self.d}")
        object.__setattr__(self, "indices", idx)

    @property
    def k(self) -> int:
        return len(self.indices)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.d, dtype=bool)
        out[list(self.indices)] = True
        return out

    def __contains__(self, i) -> bool:
        return i in self.indices

    def to_json(self) -> list[int]:
        return [i + 1 for i in self.indices]

    @classmethod
    def from_json(cls, one_based: list[int], d: int) -> SupportSet:
        return cls(tuple(int(i) - 1 for i in one_based), d)


@dataclass(frozen=True, eq=False)
class VarianceVector:
    values: np.ndarray
    support: SupportSet

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def trace(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True, eq=False)
class SignalBatch:
    samples: np.ndarray  # (n, d)

    @property
    def n(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True, eq=False)
class MeasurementMatrixBatch:
    matrices: np.ndarray  # (n, m, d)

    @property
    def n(self) -> int:
        return self.matrices.shape[0]

    @property
    def m(self) -> int:
        return self.matrices.shape[1]

    @property
    def d(self) -> int:
        return self.matrices.shape[2]


@dataclass(frozen=True, eq=False)
class ObservationBatch:
    observations: np.ndarray  # (n, m)
    matrices: MeasurementMatrixBatch

    def __post_init__(self):
        obs = self.observations
        if obs.ndim != 2 or obs.shape != self.matrices.matrices.shape[:2]:
            raise InvalidInputError(
                f"observations of shape {obs.shape} do not match matrices "
                f"{self.matrices.matrices.shape}"
            )

    @property
    def n(self) -> int:
        return self.observations.shape[0]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def sample_support(d: int, k: int, rng: np.random.Generator) -> SupportSet:
    """Uniformly random ``k``-subset of ``range(d)``."""
    if not 1 <= k <= d:
        raise InvalidConfigError(f"need 1 <= k <= d, got k={k}, d={d}")
    return SupportSet(tuple(rng.choice(d, size=k, replace=False).tolist()), d)


def make_variance_vector(
    support: SupportSet,
    lambda_min: float = 1.0,
    lambda_max: float = 1.0,
    mode: VarianceMode | str = VarianceMode.BINARY,
    rng: np.random.Generator | None = None,
) -> VarianceVector:
    """Variance vector supported on ``support``.

    Binary mode gives the indicator of the support.  ``UNIFORM_RANGE`` draws
    each on-support variance i.i.d. uniform on ``[lambda_min, lambda_max]``.
    """
    mode = VarianceMode(mode)
    if not 0 < lambda_min <= lambda_max:
        raise InvalidConfigError(f"need 0 < lambda_min <= lambda_max, got {lambda_min}, {lambda_max}")
    values = np.zeros(support.d)
    idx = list(support.indices)
    if mode is VarianceMode.BINARY:
        if lambda_min != 1.0 or lambda_max != 1.0:
            raise InvalidConfigError("binary variance mode requires lambda_min = lambda_max = 1")
        values[idx] = 1.0
    elif lambda_min == lambda_max:
        values[idx] = lambda_min
    else:
        if rng is None:
            raise InvalidInputError("uniform_range mode needs a random stream")
        values[idx] = rng.uniform(lambda_min, lambda_max, size=len(idx))
    return VarianceVector(_readonly(values), support)


def check_variance_ratio(k: int, m: int, lambda_min: float, lambda_max: float) -> bool:
    """Whether ``lambda_min/lambda_max > k/(k+m-1)``; warns when it fails."""
    ok = lambda_min / lambda_max > k / (k + m - 1)
    if not ok:
        warnings.warn(
            f"lambda_min/lambda_max = {lambda_min / lambda_max:.4g} <= k/(k+m-1) = "
            f"{k / (k + m - 1):.4g}; the nonbinary recovery guarantee does not cover this case",
            stacklevel=2,
        )
    return ok


def sample_signals(
    lam: VarianceVector, prior: Prior | str, n: int, rng: np.random.Generator
) -> SignalBatch:
    prior = _coerce_enum(Prior, prior, "prior")
    if n < 1:
        raise InvalidConfigError(f"need n >= 1, got {n}")
    idx = list(lam.support.indices)
    scale = np.sqrt(lam.values[idx])
    x = np.zeros((n, lam.d))
    if prior is Prior.GAUSSIAN:
        x[:, idx] = rng.standard_normal((n, len(idx))) * scale
    else:
        x[:, idx] = (2.0 * rng.integers(0, 2, size=(n, len(idx))) - 1.0) * scale
    return SignalBatch(_readonly(x))


def sample_measurement_matrices(
    m: int, d: int, n: int, ensemble: Ensemble | str, rng: np.random.Generator
) -> MeasurementMatrixBatch:
    """``n`` independent ``m x d`` matrices with entry variance ``1/m``."""
    ensemble = _coerce_enum(Ensemble, ensemble, "ensemble")
    if min(m, d, n) < 1:
        raise InvalidConfigError(f"need m, d, n >= 1, got {m}, {d}, {n}")
    if ensemble is Ensemble.GAUSSIAN:
        phi = rng.standard_normal((n, m, d))
        phi /= math.sqrt(m)
    else:
        phi = (2.0 * rng.integers(0, 2, size=(n, m, d)) - 1.0) / math.sqrt(m)
    return MeasurementMatrixBatch(_readonly(phi))


def observe(
    signals: SignalBatch,
    matrices: MeasurementMatrixBatch,
    sigma2: float,
    rng: np.random.Generator | None = None,
) -> ObservationBatch:
    """``y_j = Phi_j x_j + w_j`` with ``w_j ~ N(0, sigma2 I)``."""
    x, phi = signals.samples, matrices.matrices
    if x.shape[0] != phi.shape[0] or x.shape[1] != phi.shape[2]:
        raise InvalidInputError(
            f"signals {x.shape} incompatible with matrices {phi.shape}"
        )
    if sigma2 < 0:
        raise InvalidInputError(f"sigma2 must be >= 0, got {sigma2}")
    y = np.einsum("jmd,jd->jm", phi, x)
    if sigma2 > 0:
        if rng is None:
            raise InvalidInputError("noisy observations need a random stream")
        y += math.sqrt(sigma2) * rng.standard_normal(y.shape)
    return ObservationBatch(_readonly(y), matrices)


@dataclass(frozen=True, eq=False)
class Instance:
    """Everything generated for one trial, ground truth included."""

    config: ProblemConfig
    lam: VarianceVector
    signals: SignalBatch
    observations: ObservationBatch

    @property
    def support(self) -> SupportSet:
        return self.lam.support


def generate(config: ProblemConfig, trial_index: int = 0, point: int = 0) -> Instance:
    """Generate one full instance from independently derived streams."""
    seed = config.master_seed

    def rng(tag):
        return seeding.stream(seed, point, trial_index, tag)

    if config.variance_mode is VarianceMode.UNIFORM_RANGE:
        check_variance_ratio(config.k, config.m, config.lambda_min, config.lambda_max)
    support = sample_support(config.d, config.k, rng("support"))
    lam = make_variance_vector(
        support, config.lambda_min, config.lambda_max, config.variance_mode, rng("lambda")
    )
    signals = sample_signals(lam, config.prior, config.n, rng("signals"))
    matrices = sample_measurement_matrices(
        config.m, config.d, config.n, config.ensemble, rng("matrices")
    )
    obs = observe(signals, matrices, config.sigma2, rng("noise"))
    return Instance(config, lam, signals, obs)
