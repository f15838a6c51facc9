"""Seeded end-to-end trials, parameter sweeps, and their tabular outputs."""

from __future__ import annotations

import csv
import enum
import io
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Sequence

from . import seeding
from .datagen import FORMAT_VERSION, ProblemConfig, generate
from .errors import BudgetExceededError, InvalidConfigError
from .estimator import default_threshold, proxy_variance, threshold_support, topk_support

DEFAULT_BUDGET = 1e12
DEFAULT_TRIALS = 200
# Two-sided 95% standard normal quantile.
Z95 = 1.959963984540054

SWEEPABLE = ("n", "sigma2", "prior", "ensemble", "m", "k", "d")
CSV_COLUMNS = (
    "d", "k", "m", "n", "sigma2", "prior", "ensemble", "trials", "successes",
    "success_rate", "ci_low", "ci_high", "normalized_n", "master_seed",
)


class Normalization(str, enum.Enum):
    NONE = "none"
    KSQ_OVER_MSQ = "ksq"
    NOISE_AWARE = "noise"
    FANO_LB = "fano"

    @classmethod
    def parse(cls, value: Normalization | str) -> Normalization:
        if isinstance(value, cls):
            return value
        aliases = {
            "none": cls.NONE, "ksqovermsq": cls.KSQ_OVER_MSQ, "ksq": cls.KSQ_OVER_MSQ,
            "noiseaware": cls.NOISE_AWARE, "noise": cls.NOISE_AWARE,
            "fanolb": cls.FANO_LB, "fano": cls.FANO_LB,
        }
        key = str(value).replace("_", "").replace("-", "").lower()
        if key not in aliases:
            raise InvalidConfigError(f"unknown normalization {value!r}")
        return aliases[key]


def normalization_denominator(mode: Normalization | str, d: int, k: int, m: int,
                              sigma2: float = 0.0) -> float:
    mode = Normalization.parse(mode)
    if mode is Normalization.NONE:
        return 1.0
    if k >= d:
        raise InvalidConfigError(f"normalization {mode.value!r} needs k < d, got k={k}, d={d}")
    log_term = math.log(k * (d - k))
    if mode is Normalization.KSQ_OVER_MSQ:
        return k**2 / m**2 * log_term
    if mode is Normalization.NOISE_AWARE:
        return (k / m + 1 + sigma2) ** 2 * log_term
    return k**2 * (1 - m / k) ** 4 / m**2 * log_term


@dataclass(frozen=True)
class TrialResult:
    success: bool
    estimated: tuple[int, ...]
    truth: tuple[int, ...]
    trial_seed: int
    wall_time: float
    threshold_success: bool = False
    tie_broken: bool = False


def run_trial(config: ProblemConfig, trial_index: int, point: int = 0) -> TrialResult:
    """Generate one instance, estimate its support, and score exact recovery.

    ``success`` scores the top-k selector; ``threshold_success`` scores the
    threshold selector at its default level on the same data.
    """
    start = time.perf_counter()
    inst = generate(config, trial_index, point)
    est = proxy_variance(inst.observations)
    chosen = topk_support(est, config.k)
    tau = default_threshold(config.k, config.m, config.sigma2, config.lambda_min)
    truth = inst.support.indices
    return TrialResult(
        success=chosen.indices == truth,
        estimated=chosen.indices,
        truth=truth,
        trial_seed=seeding.derive_seed(config.master_seed, point, trial_index),
        wall_time=time.perf_counter() - start,
        threshold_success=threshold_support(est, tau).indices == truth,
        tie_broken=chosen.tie_broken,
    )


def config_point_key(config: ProblemConfig) -> int:
    """Seed key for a grid point: every config field except the master seed."""
    params = config.to_dict()
    del params["master_seed"]
    return seeding.point_key(params)


@dataclass(frozen=True)
class SweepSpec:
    base: ProblemConfig
    grid: list[tuple[str, list[Any]]]
    trials_per_point: int = DEFAULT_TRIALS
    normalization: Normalization = Normalization.NONE

    def __post_init__(self):
        object.__setattr__(self, "normalization", Normalization.parse(self.normalization))
        grid = [(str(name), list(values)) for name, values in self.grid]
        object.__setattr__(self, "grid", grid)
        if not grid or any(not values for _, values in grid):
            raise InvalidConfigError("sweep grid must be nonempty")
        names = [name for name, _ in grid]
        for name in names:
            if name not in SWEEPABLE:
                raise InvalidConfigError(f"{name!r} is not sweepable; choose from {SWEEPABLE}")
        if len(set(names)) != len(names):
            raise InvalidConfigError("each grid parameter may appear once")
        if isinstance(self.trials_per_point, bool) or not isinstance(self.trials_per_point, int) \
                or self.trials_per_point < 1:
            raise InvalidConfigError(f"trials_per_point must be >= 1, got {self.trials_per_point!r}")

    def points(self) -> list[ProblemConfig]:
        """Cartesian product of the grid, in grid order (last parameter fastest)."""
        names = [name for name, _ in self.grid]
        return [self.base.replace(**dict(zip(names, combo)))
                for combo in itertools.product(*(values for _, values in self.grid))]

    def estimated_ops(self) -> float:
        return float(sum(self.trials_per_point * c.d * c.n * c.m for c in self.points()))

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "base": self.base.to_dict(),
            "grid": [[name, values] for name, values in self.grid],
            "trials_per_point": self.trials_per_point,
            "normalization": self.normalization.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SweepSpec:
        data = dict(data)
        if data.pop("format_version", FORMAT_VERSION) != FORMAT_VERSION:
            raise InvalidConfigError("unsupported format_version")
        unknown = sorted(set(data) - {"base", "grid", "trials_per_point", "normalization"})
        if unknown:
            raise InvalidConfigError(f"unknown sweep fields: {', '.join(unknown)}")
        if "base" not in data or "grid" not in data:
            raise InvalidConfigError("sweep spec needs 'base' and 'grid'")
        grid = data["grid"]
        if isinstance(grid, dict):
            grid = list(grid.items())
        try:
            grid = [(name, list(values)) for name, values in grid]
        except (TypeError, ValueError) as exc:
            raise InvalidConfigError(f"malformed grid: {exc}") from exc
        return cls(
            base=ProblemConfig.from_dict(data["base"]),
            grid=grid,
            trials_per_point=data.get("trials_per_point", DEFAULT_TRIALS),
            normalization=data.get("normalization", "none"),
        )

    @classmethod
    def from_json(cls, text: str) -> SweepSpec:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"sweep spec is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidConfigError("sweep spec JSON must be an object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class SweepRow:
    d: int
    k: int
    m: int
    n: int
    sigma2: float
    prior: str
    ensemble: str
    trials: int
    successes: int
    success_rate: float
    ci_low: float
    ci_high: float
    normalized_n: float
    master_seed: int


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]
    threshold_successes: list[int] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow([_cell(getattr(row, name)) for name in CSV_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "format_version": FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "rows": [asdict(row) for row in self.rows],
        }
        return json.dumps(payload, indent=2)

    def plot_series(self) -> list[dict[str, Any]]:
        """One ``(x, y, y_lo, y_hi)`` series per curve; curves differ in everything but ``n``."""
        curves: dict[tuple, dict[str, Any]] = {}
        for row in self.rows:
            key = (row.d, row.k, row.m, row.sigma2, row.prior, row.ensemble)
            if key not in curves:
                label = dict(zip(("d", "k", "m", "sigma2", "prior", "ensemble"), key))
                curves[key] = {"curve": label, "x": [], "y": [], "y_lo": [], "y_hi": []}
            series = curves[key]
            series["x"].append(row.normalized_n)
            series["y"].append(row.success_rate)
            series["y_lo"].append(row.ci_low)
            series["y_hi"].append(row.ci_high)
        return list(curves.values())


def _cell(value):
    return repr(value) if isinstance(value, float) else value


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise InvalidConfigError("need 0 <= successes <= trials and trials >= 1")
    p = successes / trials
    z2 = z * z
    denom = 1 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials))
    # The limits at 0 and at all successes are exact; rounding would push them inside.
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


def normalize_axis(result: SweepResult, mode: Normalization | str) -> SweepResult:
    """Recompute ``normalized_n`` for every row under ``mode``."""
    mode = Normalization.parse(mode)
    rows = [
        _replace_row(row, normalized_n=row.n / normalization_denominator(
            mode, row.d, row.k, row.m, row.sigma2))
        for row in result.rows
    ]
    spec = SweepSpec(result.spec.base, result.spec.grid, result.spec.trials_per_point, mode)
    return SweepResult(spec, rows, list(result.threshold_successes))


def _replace_row(row: SweepRow, **changes) -> SweepRow:
    return SweepRow(**{**asdict(row), **changes})


def crossing_point(curve: SweepResult | Sequence[tuple[float, float]],
                   level: float = 0.5) -> float | None:
    """First upward crossing of ``level`` by the success rate, linearly interpolated.

    Returns ``None`` if the curve never rises through ``level`` (including a
    curve that starts at or above it).
    """
    if isinstance(curve, SweepResult):
        points = [(r.normalized_n, r.success_rate) for r in curve.rows]
    else:
        points = [(float(x), float(y)) for x, y in curve]
    points.sort(key=lambda p: p[0])
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        if y0 < level <= y1:
            return x0 + (level - y0) * (x1 - x0) / (y1 - y0)
    return None


def run_sweep(spec: SweepSpec, threads: int = 1, force: bool = False,
              budget: float = DEFAULT_BUDGET) -> SweepResult:
    """Run every grid point of ``spec``; rows follow grid order.

    Raises :class:`BudgetExceededError` when the estimated multiply-add count
    exceeds ``budget`` and ``force`` is not set.
    """
    points = spec.points()
    cost = spec.estimated_ops()
    if cost > budget and not force:
        raise BudgetExceededError(cost, budget)
    for cfg in points:
        # Fail fast on configs the normalization cannot handle.
        normalization_denominator(spec.normalization, cfg.d, cfg.k, cfg.m, cfg.sigma2)
    keys = [config_point_key(cfg) for cfg in points]
    work = [(p, t) for p in range(len(points)) for t in range(spec.trials_per_point)]

    def one(item):
        p, t = item
        return item, run_trial(points[p], t, keys[p])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = dict(pool.map(one, work))
    else:
        outcomes = dict(map(one, work))

    rows, thresh = [], []
    for p, cfg in enumerate(points):
        results = [outcomes[(p, t)] for t in range(spec.trials_per_point)]
        wins = sum(r.success for r in results)
        lo, hi = wilson_interval(wins, spec.trials_per_point)
        denom = normalization_denominator(spec.normalization, cfg.d, cfg.k, cfg.m, cfg.sigma2)
        rows.append(SweepRow(
            d=cfg.d, k=cfg.k, m=cfg.m, n=cfg.n, sigma2=cfg.sigma2, prior=cfg.prior.value,
            ensemble=cfg.ensemble.value, trials=spec.trials_per_point, successes=wins,
            success_rate=wins / spec.trials_per_point, ci_low=lo, ci_high=hi,
            normalized_n=cfg.n / denom, master_seed=cfg.master_seed,
        ))
        thresh.append(sum(r.threshold_success for r in results))
    return SweepResult(spec, rows, thresh)


def n_grid(d: int, k: int, m: int, lo: float = 2.0, hi: float = 30.0, points: int = 15,
           mode: Normalization | str = Normalization.KSQ_OVER_MSQ,
           sigma2: float = 0.0) -> list[int]:
    """Sample sizes whose normalized values are evenly spaced over ``[lo, hi]``."""
    denom = normalization_denominator(mode, d, k, m, sigma2)
    step = (hi - lo) / (points - 1) if points > 1 else 0.0
    return [max(1, round((lo + i * step) * denom)) for i in range(points)]


def iter_rows(rows: Iterable[SweepRow], **match) -> list[SweepRow]:
    """Rows whose fields equal every ``match`` value."""
    return [r for r in rows if all(getattr(r, key) == value for key, value in match.items())]
