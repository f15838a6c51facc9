"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured numbers,
whether or not the assertion holds.  Run directly with
``python3 tests/test_acceptance.py`` to get just the summary lines.
"""

from __future__ import annotations

import json
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from suprec import suites
from suprec.cli import main as cli_main
from suprec.datagen import ProblemConfig
from suprec.harness import (
    SweepSpec, crossing_point, iter_rows, n_grid, normalization_denominator, run_sweep, run_trial,
)

SEED = 2019
D, K, M = 100, 10, 2
TRIALS_PER_POINT = 200


def _line(number, title, ok, detail):
    return f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2} {title}: {detail}"


def criterion_bias():
    start = time.perf_counter()
    res = suites.bias_suite(trials=10_000, seed=SEED, n=10)
    b = res.details["binary"]
    elapsed = time.perf_counter() - start
    ok = b["pass"] and elapsed < 60
    detail = (f"max |mean - expected| / s.e. = {b['max_abs_z']:.2f} over {len(b['estimate'])} "
              f"coordinates (limit 3), {b['n'] * b['trials']} evaluations in {elapsed:.1f} s")
    return ok, detail


def criterion_nonbinary_bias():
    res = suites.bias_suite(trials=10_000, seed=SEED, n=10)
    nb = res.details["nonbinary"]
    z = abs(nb["estimate"] - 7.0) / nb["std_error"]
    return nb["pass"], f"mean = {nb['estimate']:.4f} +/- {nb['std_error']:.4f} vs 7 (|z| = {z:.2f}, limit 3)"


def _phase_sweep(prior):
    spec = SweepSpec(
        base=ProblemConfig(d=D, k=K, m=M, n=1, prior=prior, master_seed=SEED),
        grid=[("n", n_grid(D, K, M, 2.0, 30.0, 15))],
        trials_per_point=TRIALS_PER_POINT,
        normalization="ksq",
    )
    return run_sweep(spec)


def criterion_phase_transition():
    ok, parts = True, []
    for prior in ("gaussian", "rademacher"):
        res = _phase_sweep(prior)
        rates = [r.success_rate for r in res.rows]
        rise = rates[0] < 0.1 and rates[-1] > 0.9
        cross = crossing_point(res, 0.5)
        in_window = cross is not None and 10.0 <= cross <= 25.0
        ok = ok and rise and in_window
        cross_text = "none" if cross is None else f"{cross:.2f}"
        parts.append(f"{prior}: rate {rates[0]:.2f} -> {rates[-1]:.2f} (rise {'ok' if rise else 'bad'}), "
                     f"0.5-crossing {cross_text} (window [10, 25])")
    return ok, "; ".join(parts)


def criterion_noise_collapse():
    crossings = {}
    for sigma2 in (0.0, 0.5, 1.0, 2.0):
        base = ProblemConfig(d=D, k=K, m=M, n=1, sigma2=sigma2, master_seed=SEED)
        grid = n_grid(D, K, M, 1.0, 15.0, 15, mode="noise", sigma2=sigma2)
        spec = SweepSpec(base, [("n", grid)], TRIALS_PER_POINT, "noise")
        crossings[sigma2] = crossing_point(run_sweep(spec), 0.5)
    found = [c for c in crossings.values() if c is not None]
    if len(found) < len(crossings):
        return False, f"missing crossing: {crossings}"
    mean = sum(found) / len(found)
    spread = max(abs(c - mean) / mean for c in found)
    text = ", ".join(f"sigma2={s}: {c:.2f}" for s, c in crossings.items())
    return spread <= 0.2, f"crossings {text}; max relative deviation from mean {spread:.3f} (limit 0.2)"


def criterion_kl_chain():
    res = suites.klchain_suite(trials=100_000, seed=SEED, m=3, k=8, d=20)
    v = res.details["violations"]
    detail = (f"violations over {res.details['trials']} draws: exact<=eig {v['kl_le_eig']}, "
              f"eig<=ratio {v['eig_le_ratio']}, HW {v['hw_holds']} "
              f"(reversed-pairing bound violations {v['kl_le_reversed']}, rejected {res.details['rejected']})")
    return res.passed, detail


def criterion_wishart():
    res = suites.wishart_suite(trials=100_000, seed=SEED)
    ratios = ", ".join(f"({p['k']},{p['m']}): {p['bound_ratio']:.2f}" for p in res.details["points"])
    o = res.details["oracle_m1"]
    z = abs(o["estimate"] - o["exact"]) / o["std_error"]
    detail = (f"bound_ratio {ratios}; spread x{res.details['bound_ratio_spread']:.2f} (limit 3); "
              f"m=1 oracle at k={o['k']} |z| = {z:.2f} (limit 3)")
    return res.passed, detail


def criterion_moments():
    res = suites.moments_suite(trials=100_000, seed=SEED, ms=(1, 4, 16))
    parts = []
    for rep in res.details["reports"]:
        n4 = rep["norm4"]
        parts.append(f"{rep['ensemble'][:3]} m={rep['m']}: E|Z|^4 {n4['estimate']:.4f} vs {n4['bound']:.4f}")
    return res.passed, "; ".join(parts)


def criterion_separation():
    res = suites.separation_suite(trials=200, seed=SEED)
    d = res.details
    freqs = ", ".join(f"n={g['n']}: {g['frequency']:.3f}" for g in d["grid"])
    chi2 = ", ".join(f"{g['frequency_gaussian_chi2_constants']:.3f}" for g in d["grid"])
    detail = (f"frequency at n={d['grid'][2]['n']} is {d['frequency_at_target']:.3f} "
              f"(need >= 0.9, c1={d['c1']:g}, c2={d['c2']:g}); trend {'ok' if d['trend_ok'] else 'bad'} "
              f"[{freqs}]; with c1=c2=8: [{chi2}]")
    return res.passed, detail


def criterion_dominance():
    counter = threshold_exact = topk_exact = 0
    trials = 0
    for n in (10, 30, 100, 300, 1000):
        cfg = ProblemConfig(d=50, k=5, m=2, n=n, master_seed=SEED)
        for t in range(2000):
            res = run_trial(cfg, t, point=n)
            trials += 1
            threshold_exact += res.threshold_success
            topk_exact += res.success
            counter += res.threshold_success and not res.success
    ok = counter == 0 and threshold_exact > 0
    return ok, (f"{counter} counterexamples in {trials} trials "
                f"(threshold exact {threshold_exact}, top-k exact {topk_exact})")


def criterion_determinism():
    spec = {
        "base": {"d": D, "k": K, "m": M, "n": 1, "master_seed": SEED},
        "grid": [["n", n_grid(D, K, M, 2.0, 30.0, 15)]],
        "trials_per_point": 20,
        "normalization": "ksq",
    }
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "spec.json"
        path.write_text(json.dumps(spec))
        outs = []
        for i in range(2):
            out = Path(tmp) / f"run{i}.csv"
            code = cli_main(["sweep", str(path), "-o", str(out)])
            outs.append((code, out.read_bytes()))
    ok = outs[0][0] == outs[1][0] == 0 and outs[0][1] == outs[1][1]
    rows = outs[0][1].count(b"\n") - 1
    return ok, f"two sweeps of {rows} rows, exit codes {outs[0][0]}/{outs[1][0]}, byte-identical: {outs[0][1] == outs[1][1]}"


CRITERIA = [
    (1, "bias formula", criterion_bias),
    (2, "nonbinary bias", criterion_nonbinary_bias),
    (3, "phase transition", criterion_phase_transition),
    (4, "noise collapse", criterion_noise_collapse),
    (5, "KL chain", criterion_kl_chain),
    (6, "Wishart moment", criterion_wishart),
    (7, "moment identities", criterion_moments),
    (8, "separation condition", criterion_separation),
    (9, "estimator dominance", criterion_dominance),
    (10, "determinism", criterion_determinism),
]


@pytest.mark.acceptance
@pytest.mark.parametrize("number, title, check", CRITERIA, ids=[f"c{n:02d}" for n, _, _ in CRITERIA])
def test_criterion(number, title, check, capsys):
    ok, detail = check()
    with capsys.disabled():
        print("\n" + _line(number, title, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for number, title, check in CRITERIA:
        ok, detail = check()
        failed += not ok
        print(_line(number, title, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
