"""Command-line entry point: ``suprec {gen,recover,sweep,bounds,verify}``.

Exit codes: 0 success, 1 strict-mode recovery failure or failed verification,
2 invalid input, 3 sweep budget refusal.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import suites
from .datagen import (
    DEFAULT_MASTER_SEED, FORMAT_VERSION, MeasurementMatrixBatch, ObservationBatch, ProblemConfig,
    generate,
)
from .errors import BudgetExceededError, InvalidConfigError, InvalidInputError, SuprecError
from .estimator import ThresholdSpec, proxy_variance, threshold_support, topk_support
from .harness import DEFAULT_BUDGET, Normalization, SweepSpec, run_sweep
from .lowerbound import sample_bounds

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_BUDGET = 3
SEED_ENV = "SUPREC_SEED"

PRECEDENCE = (
    "Precedence, lowest to highest: built-in defaults, $SUPREC_SEED (master_seed only), "
    "config file, key=value overrides, --seed."
)


class UsageError(SuprecError):
    """Bad command-line input that argparse itself cannot catch."""


def parse_overrides(items: Sequence[str]) -> dict[str, Any]:
    """``key=value`` pairs; values are parsed as JSON when possible, else kept as strings."""
    out = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise UsageError(f"override must look like key=value, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def env_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_MASTER_SEED
    try:
        return int(raw, 0)
    except ValueError:
        raise UsageError(f"${SEED_ENV} must be an integer, got {raw!r}") from None


def read_json(path: str) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def resolve_config(raw: dict[str, Any], overrides: dict[str, Any], seed: int | None) -> ProblemConfig:
    if not isinstance(raw, dict):
        raise InvalidConfigError("config JSON must be an object")
    data = {"master_seed": env_seed(), **raw, **overrides}
    if seed is not None:
        data["master_seed"] = seed
    return ProblemConfig.from_dict(data)


def emit(payload: str, output: str | None) -> None:
    if output in (None, "-"):
        sys.stdout.write(payload)
        if not payload.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(output).write_text(payload if payload.endswith("\n") else payload + "\n")


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=False)


def cmd_gen(args) -> int:
    config = resolve_config(read_json(args.config), parse_overrides(args.overrides), args.seed)
    inst = generate(config, args.trial)
    obs = inst.observations
    dataset = {
        "format_version": FORMAT_VERSION,
        "kind": "dataset",
        "config": config.to_dict(),
        "master_seed": config.master_seed,
        "trial_index": args.trial,
        "support": inst.support.to_json(),
        "lambda": inst.lam.values.tolist(),
        "observations": obs.observations.tolist(),
        "matrices": obs.matrices.matrices.tolist(),
    }
    emit(json.dumps(dataset), args.output)
    return EXIT_OK


def load_dataset(path: str) -> tuple[dict[str, Any], ObservationBatch]:
    data = read_json(path)
    if not isinstance(data, dict):
        raise InvalidInputError("dataset must be a JSON object")
    if data.get("format_version") != FORMAT_VERSION:
        raise InvalidInputError(f"unsupported dataset format_version {data.get('format_version')!r}")
    try:
        y = np.asarray(data["observations"], dtype=float)
        phi = np.asarray(data["matrices"], dtype=float)
    except KeyError as exc:
        raise InvalidInputError(f"dataset is missing {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"dataset arrays are malformed: {exc}") from None
    if y.ndim != 2 or phi.ndim != 3 or not (np.isfinite(y).all() and np.isfinite(phi).all()):
        raise InvalidInputError("dataset needs finite (n, m) observations and (n, m, d) matrices")
    return data, ObservationBatch(y, MeasurementMatrixBatch(phi))


def cmd_recover(args) -> int:
    data, obs = load_dataset(args.dataset)
    config = data.get("config") or {}
    k = args.k if args.k is not None else config.get("k")
    if k is None and data.get("support") is not None:
        k = len(data["support"])
    est = proxy_variance(obs)
    if args.threshold is not None:
        chosen = threshold_support(est, ThresholdSpec(args.threshold))
    elif k is None:
        raise InvalidInputError("support size unknown: pass --k or --threshold")
    else:
        chosen = topk_support(est, int(k))
    truth = data.get("support")
    if truth is None:
        verdict = "unknown"
    else:
        verdict = "exact" if sorted(truth) == chosen.to_json() else "mismatch"
    values = est.values
    report = {
        "format_version": FORMAT_VERSION,
        "kind": "recovery",
        "config": config,
        "master_seed": data.get("master_seed"),
        "dataset": str(args.dataset),
        "proxy_summary": {"n": est.n_used, "d": est.d, "min": float(values.min()),
                          "max": float(values.max()), "mean": float(values.mean())},
        "proxy_variance": est.to_json(),
        "estimated_support": chosen.to_json(),
        "mode": chosen.mode,
        "tie_broken": chosen.tie_broken,
        "true_support": truth,
        "verdict": verdict,
    }
    emit(dumps(report), args.output)
    if args.strict and verdict == "mismatch":
        return EXIT_FAILURE
    return EXIT_OK


def cmd_sweep(args) -> int:
    raw = read_json(args.spec)
    if not isinstance(raw, dict):
        raise InvalidConfigError("sweep spec JSON must be an object")
    raw = dict(raw)
    overrides = parse_overrides(args.overrides)
    top = {key: overrides.pop(key) for key in ("trials_per_point", "normalization") if key in overrides}
    base = raw.get("base")
    if not isinstance(base, dict):
        raise InvalidConfigError("sweep spec needs a 'base' object")
    raw["base"] = resolve_config(base, overrides, args.seed).to_dict()
    raw.update(top)
    if args.normalize is not None:
        raw["normalization"] = args.normalize
    if args.trials is not None:
        raw["trials_per_point"] = args.trials
    spec = SweepSpec.from_dict(raw)
    result = run_sweep(spec, threads=args.threads, force=args.force, budget=args.budget)
    if args.format == "csv":
        emit(result.to_csv(), args.output)
        if args.output not in (None, "-"):
            # CSV columns are fixed, so the resolved spec travels in a sidecar.
            emit(dumps(spec.to_dict()), str(args.output) + ".spec.json")
    elif args.format == "json":
        emit(result.to_json(), args.output)
    else:
        emit(dumps({"format_version": FORMAT_VERSION, "spec": spec.to_dict(),
                    "series": result.plot_series()}), args.output)
    return EXIT_OK


def cmd_bounds(args) -> int:
    res = sample_bounds(args.m, args.k, args.d, args.sigma2, args.delta, args.c_upper,
                        args.lambda_min, args.lambda_max, args.c_lower)
    inputs = {"m": args.m, "k": args.k, "d": args.d, "sigma2": args.sigma2, "delta": args.delta,
              "c_upper": args.c_upper, "c_lower": args.c_lower,
              "lambda_min": args.lambda_min, "lambda_max": args.lambda_max}
    emit(dumps({"format_version": FORMAT_VERSION, "kind": "bounds", "inputs": inputs,
                **res.to_json()}), args.output)
    return EXIT_OK


def _suite_kwargs(name: str, args) -> dict[str, Any]:
    kw: dict[str, Any] = {"seed": args.seed if args.seed is not None else env_seed()}
    if args.trials is not None:
        kw["trials"] = args.trials
    if name == "wishart" and (args.k is not None or args.m is not None):
        if args.k is None or args.m is None:
            raise UsageError("verify wishart needs both --k and --m")
        kw["points"] = ((args.k, args.m),)
        kw["oracle_k"] = None
    if name == "klchain":
        if args.k is not None:
            kw["k"] = args.k
            kw["d"] = max(20, args.k + 1)
        if args.m is not None:
            kw["m"] = args.m
    return kw


def cmd_verify(args) -> int:
    names = suites.SUITES if args.suite == "all" else (args.suite,)
    results = []
    for name in names:
        results.append(suites.REGISTRY[name](**_suite_kwargs(name, args)))
    ok = all(r.passed for r in results)
    payload = {"format_version": FORMAT_VERSION, "kind": "verify", "suite": args.suite,
               "pass": ok, "results": [r.to_json() for r in results]}
    emit(dumps(payload), args.output)
    for r in results:
        print(f"{r.name}: {'PASS' if r.passed else 'FAIL'} ({r.status})", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAILURE


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="suprec",
        description="Support recovery from low-dimensional sketches of sparse vectors.",
        epilog=PRECEDENCE,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, overrides=True):
        p.add_argument("-o", "--output", help="output path (default: stdout)")
        p.add_argument("--seed", type=_seed, help=f"master seed (default: ${SEED_ENV} or built-in)")
        if overrides:
            p.add_argument("overrides", nargs="*", metavar="key=value",
                           help="config overrides; they win over file values")

    p = sub.add_parser("gen", help="generate a dataset from a config", epilog=PRECEDENCE)
    p.add_argument("config", help="ProblemConfig JSON file")
    p.add_argument("--trial", type=int, default=0, help="trial index (default 0)")
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("recover", help="estimate the support of a dataset")
    p.add_argument("dataset", help="dataset JSON written by 'gen'")
    p.add_argument("--k", type=int, help="support size (default: from the dataset)")
    p.add_argument("--threshold", type=float, help="use the threshold selector at this level")
    p.add_argument("--strict", action="store_true", help="exit 1 when recovery is not exact")
    p.add_argument("-o", "--output", help="output path (default: stdout)")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("sweep", help="run a parameter sweep", epilog=PRECEDENCE)
    p.add_argument("spec", help="SweepSpec JSON file")
    p.add_argument("--normalize", choices=[m.value for m in Normalization],
                   help="x-axis normalization (overrides the sweep file)")
    p.add_argument("--trials", type=int, help="trials per grid point (overrides the sweep file)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--force", action="store_true", help="run even above the operation budget")
    p.add_argument("--budget", type=float, default=DEFAULT_BUDGET,
                   help="operation budget in multiply-adds (default 1e12)")
    p.add_argument("--format", choices=("csv", "json", "plot"), default="csv")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", help="print sample-complexity bounds as JSON")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--sigma2", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=1 / 3)
    p.add_argument("--c-upper", type=float, default=1.0)
    p.add_argument("--c-lower", type=float, default=1 / 8)
    p.add_argument("--lambda-min", type=float, default=1.0)
    p.add_argument("--lambda-max", type=float, default=1.0)
    p.add_argument("-o", "--output", help="output path (default: stdout)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="run Monte Carlo verification suites")
    p.add_argument("suite", choices=(*suites.SUITES, "all"))
    p.add_argument("--trials", type=int, help="trials per check (suite default if omitted)")
    p.add_argument("--k", type=int, help="k for the wishart or klchain suite")
    p.add_argument("--m", type=int, help="m for the wishart or klchain suite")
    common(p, overrides=False)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    # Overrides may follow options, which a trailing positional cannot absorb.
    stray = [item for item in extra if item.startswith("-") or "=" not in item]
    if stray or (extra and not hasattr(args, "overrides")):
        parser.error(f"unrecognized arguments: {' '.join(stray or extra)}")
    if extra:
        args.overrides = [*args.overrides, *extra]
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        print(f"suprec: {exc}; rerun with --force to proceed", file=sys.stderr)
        return EXIT_BUDGET
    except (SuprecError, ValueError) as exc:
        print(f"suprec: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
