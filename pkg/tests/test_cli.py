import json

import pytest

from suprec.cli import main


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"d": 20, "k": 3, "m": 2, "n": 3000}))
    return path


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestGen:
    def test_writes_dataset(self, tmp_path, config, capsys):
        out = tmp_path / "data.json"
        code, _, _ = _run(capsys, "gen", config, "-o", out)
        data = json.loads(out.read_text())
        assert code == 0
        assert data["format_version"] == 1
        assert data["config"]["n"] == 3000 and data["master_seed"] == data["config"]["master_seed"]
        assert len(data["observations"]) == 3000 and len(data["support"]) == 3

    def test_same_seed_byte_identical(self, tmp_path, config, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        _run(capsys, "gen", config, "-o", a, "--seed", 5)
        _run(capsys, "gen", config, "-o", b, "--seed", 5)
        assert a.read_bytes() == b.read_bytes()

    def test_k_above_d(self, config, capsys):
        code, _, err = _run(capsys, "gen", config, "k=30")
        assert code == 2 and "k" in err

    def test_missing_config(self, tmp_path, capsys):
        assert _run(capsys, "gen", tmp_path / "nope.json")[0] == 2

    def test_override_precedence(self, tmp_path, config, capsys, monkeypatch):
        monkeypatch.setenv("SUPREC_SEED", "77")
        out = tmp_path / "d.json"
        _run(capsys, "gen", config, "n=4", "-o", out)
        data = json.loads(out.read_text())
        assert data["config"]["n"] == 4 and data["master_seed"] == 77
        _run(capsys, "gen", config, "n=4", "master_seed=3", "-o", out)
        assert json.loads(out.read_text())["master_seed"] == 3
        _run(capsys, "gen", config, "n=4", "master_seed=3", "--seed", "9", "-o", out)
        assert json.loads(out.read_text())["master_seed"] == 9

    def test_bad_override_syntax(self, config, capsys):
        assert _run(capsys, "gen", config, "n")[0] == 2


class TestRecover:
    def _dataset(self, tmp_path, config, capsys, *extra):
        out = tmp_path / "data.json"
        _run(capsys, "gen", config, "-o", out, *extra)
        return out

    def test_large_n_exact(self, tmp_path, config, capsys):
        data = self._dataset(tmp_path, config, capsys)
        code, out, _ = _run(capsys, "recover", data, "--strict")
        report = json.loads(out)
        assert code == 0 and report["verdict"] == "exact"
        assert report["estimated_support"] == report["true_support"]
        assert report["config"]["d"] == 20

    def test_strict_mismatch(self, tmp_path, config, capsys):
        # One sample cannot pin down the support for this seed.
        data = self._dataset(tmp_path, config, capsys, "n=1", "d=200", "k=20")
        code, out, _ = _run(capsys, "recover", data, "--strict")
        assert json.loads(out)["verdict"] == "mismatch" and code == 1
        assert _run(capsys, "recover", data)[0] == 0

    def test_missing_truth(self, tmp_path, config, capsys):
        data = self._dataset(tmp_path, config, capsys)
        payload = json.loads(data.read_text())
        del payload["support"]
        data.write_text(json.dumps(payload))
        code, out, _ = _run(capsys, "recover", data, "--strict")
        assert code == 0 and json.loads(out)["verdict"] == "unknown"

    def test_malformed(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"format_version": 1, "observations": [[1.0]]}))
        assert _run(capsys, "recover", bad)[0] == 2
        bad.write_text("{not json")
        assert _run(capsys, "recover", bad)[0] == 2


@pytest.fixture
def sweep_spec(tmp_path):
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps({
        "base": {"d": 100, "k": 10, "m": 2, "n": 1},
        "grid": [["n", [70, 700]]],
        "trials_per_point": 3,
    }))
    return path


class TestSweep:
    def test_fano_normalization(self, tmp_path, sweep_spec, capsys):
        out = tmp_path / "out.csv"
        code, _, _ = _run(capsys, "sweep", sweep_spec, "--normalize", "fano", "-o", out)
        lines = out.read_text().splitlines()
        assert code == 0 and len(lines) == 3
        header = lines[0].split(",")
        for line, n in zip(lines[1:], (70, 700)):
            row = dict(zip(header, line.split(",")))
            assert float(row["normalized_n"]) == pytest.approx(n / 69.6565, rel=1e-5)
        sidecar = json.loads((tmp_path / "out.csv.spec.json").read_text())
        assert sidecar["normalization"] == "fano" and sidecar["base"]["master_seed"] == 2019

    def test_byte_identical_reruns(self, tmp_path, sweep_spec, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        _run(capsys, "sweep", sweep_spec, "-o", a)
        _run(capsys, "sweep", sweep_spec, "-o", b, "--threads", "2")
        assert a.read_bytes() == b.read_bytes()

    def test_budget(self, sweep_spec, capsys):
        code, _, err = _run(capsys, "sweep", sweep_spec, "--budget", "1000")
        assert code == 3 and "--force" in err
        assert _run(capsys, "sweep", sweep_spec, "--budget", "1000", "--force")[0] == 0

    def test_missing_spec(self, tmp_path, capsys):
        assert _run(capsys, "sweep", tmp_path / "missing.json")[0] == 2

    @pytest.mark.parametrize("fmt", ["json", "plot"])
    def test_other_formats(self, sweep_spec, capsys, fmt):
        code, out, _ = _run(capsys, "sweep", sweep_spec, "--format", fmt)
        payload = json.loads(out)
        assert code == 0 and payload["spec"]["base"]["d"] == 100


class TestBounds:
    def test_reference(self, capsys):
        code, out, _ = _run(capsys, "bounds", "--m", 2, "--k", 10, "--d", 100)
        res = json.loads(out)
        assert code == 0
        assert res["n_upper"] == pytest.approx(284.5, abs=0.1)
        assert res["inputs"]["delta"] == pytest.approx(1 / 3)

    def test_ratio_factor(self, capsys):
        _, base, _ = _run(capsys, "bounds", "--m", 2, "--k", 10, "--d", 100)
        _, wide, _ = _run(capsys, "bounds", "--m", 2, "--k", 10, "--d", 100, "--lambda-max", 2)
        for key in ("n_upper", "n_lower"):
            assert json.loads(wide)[key] == pytest.approx(4 * json.loads(base)[key])

    def test_regime_flag(self, capsys):
        _, out, _ = _run(capsys, "bounds", "--m", 5, "--k", 10, "--d", 100)
        assert any("outside lower-bound regime" in f for f in json.loads(out)["flags"])

    def test_k_equals_d(self, capsys):
        assert _run(capsys, "bounds", "--m", 2, "--k", 10, "--d", 10)[0] == 2


class TestVerify:
    def test_moments(self, capsys):
        code, out, _ = _run(capsys, "verify", "moments", "--trials", 20000)
        assert code == 0 and json.loads(out)["pass"]

    def test_wishart_skipped(self, capsys):
        code, out, _ = _run(capsys, "verify", "wishart", "--k", 10, "--m", 5, "--trials", 50)
        result = json.loads(out)["results"][0]
        assert code == 0 and result["status"] == "skipped"

    def test_unknown_suite(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "bogus"])
        assert exc.value.code == 2

    def test_seed_recorded(self, capsys):
        _, out, _ = _run(capsys, "verify", "moments", "--trials", 1000, "--seed", 42)
        assert json.loads(out)["results"][0]["seed"] == 42
