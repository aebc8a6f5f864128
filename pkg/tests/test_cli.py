import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from subplanck import io
from subplanck.cli import main
from subplanck.scenario import (
    ConfigError,
    bundled_path,
    bundled_scenarios,
    compare_report,
    expected_report,
    load_config,
)


def _files(d):
    return {p.name: io.sha256(p) for p in sorted(d.iterdir()) if p.is_file()}


@pytest.fixture
def cat_file(tmp_path):
    assert main(["state", "cat", "--n", "512", "--x0", "2", "--out-dir", str(tmp_path), "-o", "cat.psi"]) == 0
    return tmp_path / "cat.psi"


class TestVerbs:
    @pytest.mark.parametrize("kind", ["gaussian", "cat", "compass", "sparse"])
    def test_state(self, tmp_path, kind):
        assert main(["state", kind, "--n", "1024", "--x0", "2", "--out-dir", str(tmp_path), "--seed", "5"]) == 0
        psi = io.read_psi(tmp_path / "state.psi")
        assert psi.norm() == pytest.approx(1.0, abs=1e-9)

    def test_wigner(self, tmp_path, cat_file):
        assert main(["wigner", str(cat_file), "--out-dir", str(tmp_path)]) == 0
        assert io.read_wigner(tmp_path / "wigner.wig").total() == pytest.approx(1.0, abs=1e-6)

    def test_evolve(self, tmp_path, cat_file):
        out = tmp_path / "ev"
        rc = main(["evolve", str(cat_file), "--snapshots", "0.5,1", "--wigner", "--out-dir", str(out)])
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert [s["t"] for s in manifest["snapshots"]] == [0.5, 1.0]
        for s in manifest["snapshots"]:
            assert io.sha256(out / s["psi"]) == s["sha256"]
            assert (out / s["wigner"]).exists()

    def test_evolve_needs_times(self, tmp_path, cat_file):
        assert main(["evolve", str(cat_file), "--out-dir", str(tmp_path)]) == 2

    def test_classical(self, tmp_path):
        rc = main(["classical", "--n-particles", "200", "--n-seeds", "4", "--t-total", "50",
                   "--snapshots", "2,4", "--out-dir", str(tmp_path)])
        assert rc == 0
        doc = json.loads((tmp_path / "classical.json").read_text())
        assert [r["t"] for r in doc["snapshots"]] == [2.0, 4.0]
        assert doc["lyapunov"]["rate"] > 0

    def test_scan(self, tmp_path, cat_file):
        assert main(["scan", str(cat_file), "--max", "0.2", "--steps", "32", "--out-dir", str(tmp_path)]) == 0
        curve = io.read_curve_csv(tmp_path / "scan.csv")
        assert len(curve.s) == 32 and abs(curve.z[0]) == pytest.approx(1.0)

    def test_scan_rejects_few_steps(self, tmp_path, cat_file):
        assert main(["scan", str(cat_file), "--max", "0.2", "--steps", "4", "--out-dir", str(tmp_path)]) == 1

    def test_report(self, tmp_path, cat_file):
        assert main(["report", str(cat_file), "--out-dir", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "report.json").read_text())
        (entry,) = doc.values()
        assert entry["structure"]["L"] == pytest.approx(np.sqrt(4.08), rel=1e-6)

    def test_report_bad_magic(self, tmp_path):
        bad = tmp_path / "junk.psi"
        bad.write_bytes(b"NOTAGRID" + bytes(64))
        assert main(["report", str(bad), "--out-dir", str(tmp_path)]) == 1

    def test_missing_file(self, tmp_path):
        assert main(["wigner", str(tmp_path / "nope.psi"), "--out-dir", str(tmp_path)]) == 1

    def test_blowup_exit_code(self, tmp_path, cat_file):
        rc = main(["evolve", str(cat_file), "--t-final", "0.1", "--a-h", "1e308", "--out-dir", str(tmp_path)])
        assert rc == 3

    def test_threads_env(self, tmp_path, cat_file, monkeypatch):
        monkeypatch.setenv("SUBPLANCK_THREADS", "2")
        assert main(["wigner", str(cat_file), "--out-dir", str(tmp_path)]) == 0
        monkeypatch.setenv("SUBPLANCK_THREADS", "many")
        assert main(["wigner", str(cat_file), "--out-dir", str(tmp_path)]) == 2

    def test_console_script(self):
        exe = shutil.which("subplanck")
        cmd = [exe] if exe else [sys.executable, "-m", "subplanck.cli"]
        res = subprocess.run(cmd + ["--help"], capture_output=True, text=True)
        assert res.returncode == 0
        for verb in ("state", "wigner", "evolve", "classical", "scan", "report", "run"):
            assert verb in res.stdout


class TestConfig:
    def _write(self, tmp_path, text):
        fp = tmp_path / "cfg.json"
        fp.write_text(text)
        return fp

    def test_unknown_key_located(self, tmp_path, capsys):
        fp = self._write(tmp_path, '{\n  "name": "x",\n  "grid": {"n": 512, "dx": 0.05, "hbar": 0.16},\n'
                                   '  "state": {"kind": "gaussian", "xi": 0.4,\n    "colour": 1}\n}\n')
        assert main(["run", str(fp), "--out-dir", str(tmp_path / "o")]) == 2
        err = capsys.readouterr().err
        assert "cfg.json:5" in err and "colour" in err

    def test_bad_value_located(self, tmp_path):
        fp = self._write(tmp_path, '{\n "name": "x",\n "grid": {"n": 512, "dx": 0.05, "hbar": 0.16},\n'
                                   ' "state": {"kind": "compass", "L": -1, "P": 4, "xi": 0.4}\n}\n')
        with pytest.raises(ConfigError, match=r"cfg\.json:4: state/L"):
            load_config(fp)

    @pytest.mark.parametrize("state", ['{}', '{"kind": "squeezed", "xi": 0.4}'])
    def test_empty_or_unknown_state(self, tmp_path, state):
        fp = self._write(tmp_path, '{"name": "x", "grid": {"n": 512, "dx": 0.05, "hbar": 0.16}, "state": %s}' % state)
        assert main(["run", str(fp), "--out-dir", str(tmp_path / "o")]) == 2

    def test_non_power_of_two(self, tmp_path):
        fp = self._write(tmp_path, '{"name": "x", "grid": {"n": 500, "dx": 0.05, "hbar": 0.16},'
                                   ' "state": {"kind": "gaussian", "xi": 0.4}}')
        with pytest.raises(ConfigError, match="power of two"):
            load_config(fp)

    def test_malformed_json(self, tmp_path):
        fp = self._write(tmp_path, '{"name": "x",\n "grid": {"n": 512,,}}')
        with pytest.raises(ConfigError, match="cfg.json:2"):
            load_config(fp)

    def test_from_file_state(self, tmp_path, cat_file):
        fp = self._write(tmp_path, json.dumps({
            "name": "reuse", "grid": {"n": 512, "dx": 0.05, "hbar": 0.16},
            "state": {"kind": "from-file", "path": cat_file.name},
            "scan": {"direction": [0, 1], "max": 0.2, "steps": 16},
        }))
        assert main(["run", str(fp), "--out-dir", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "scan.csv").exists()
        fp.write_text(fp.read_text().replace("cat.psi", "missing.psi"))
        assert main(["run", str(fp), "--out-dir", str(tmp_path / "o")]) == 2

    def test_bundled_configs_validate(self):
        assert set(bundled_scenarios()) == {"fig1_chaotic", "fig2_compass", "fig3_sparse"}
        for name in bundled_scenarios():
            assert load_config(bundled_path(name))["name"] == name


def _run_and_compare(name, out):
    assert main(["run", name, "--out-dir", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert compare_report(report, expected_report(name)) == []
    manifest = json.loads((out / "manifest.json").read_text())
    for entry in manifest["files"]:
        assert io.sha256(out / entry["path"]) == entry["sha256"]
    return report


@pytest.mark.parametrize("name", ["fig2_compass", "fig3_sparse"])
def test_bundled_scenario_matches_expected(tmp_path, name):
    _run_and_compare(name, tmp_path)


@pytest.mark.slow
def test_chaotic_scenario_matches_expected(tmp_path):
    _run_and_compare("fig1_chaotic", tmp_path)


def test_runs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["run", "fig3_sparse", "--out-dir", str(d)]) == 0
    assert _files(a) == _files(b)
    # a different seed gives a different sparse state
    c = tmp_path / "c"
    assert main(["run", "fig3_sparse", "--seed", "11", "--out-dir", str(c)]) == 0
    assert _files(c)["state.psi"] != _files(a)["state.psi"]


def test_report_json_round_trips(tmp_path):
    _run_and_compare("fig2_compass", tmp_path)
    text = (tmp_path / "report.json").read_text()
    doc = json.loads(text)
    assert json.dumps(doc, sort_keys=True, indent=2) + "\n" == text


def test_compare_report_flags_drift():
    exp = {"scenario": "x", "checks": {"a.b": {"value": 1.0, "rel_tol": 1e-3}, "c": {"value": 2.0, "abs_tol": 0.1}}}
    assert compare_report({"a": {"b": 1.0005}, "c": 2.05}, exp) == []
    problems = compare_report({"a": {"b": 1.1}}, exp)
    assert len(problems) == 2
