import csv
import json

import numpy as np
import pytest

from splinefil.cli import main


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({
        "spline": {"q": 4, "J": [6, 6]},
        "scms": {"seed_grid": 12},
        "credible": {"samples": 30, "grid_n": 16},
        "simulate": {"n": 400},
    }))
    return str(p)


def run(*args):
    return main([str(a) for a in args])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestCommands:
    def test_simulate_preset_defaults(self, tmp_path):
        assert run("simulate", "--preset", "paper-sim", "--out-dir", tmp_path) == 0
        rows = read_rows(tmp_path / "data.csv")
        assert len(rows) == 2000 and list(rows[0]) == ["x1", "x2", "y"]
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["seed"] == 0 and "numpy" in summary["versions"] and "total_seconds" in summary["timings"]

    def test_scms_on_simulated_dataset(self, tmp_path):
        out = tmp_path / "o"
        assert run("simulate", "--preset", "paper-sim", "--out-dir", out) == 0
        assert run("scms", "--preset", "paper-sim", "--data", out / "data.csv", "--out-dir", out) == 0
        rows = read_rows(out / "filament.csv")
        assert list(rows[0]) == ["x1", "x2", "lambda", "status"]
        conv = [r for r in rows if r["status"] == "converged" and float(r["lambda"]) < 0]
        assert len(conv) > 100
        r = np.hypot([float(c["x1"]) for c in conv], [float(c["x2"]) for c in conv])
        assert np.median(np.abs(r - 0.5)) < 0.1

    def test_pipeline(self, tmp_path, small_cfg):
        o = tmp_path
        assert run("simulate", "--config", small_cfg, "--out-dir", o) == 0
        assert run("fit", "--config", small_cfg, "--data", o / "data.csv", "--out-dir", o) == 0
        post = json.loads((o / "posterior.json").read_text())
        assert post["transform"] is not None and len(post["mean_theta"]) == 36
        assert run("scms", "--config", small_cfg, "--posterior", o / "posterior.json", "--out-dir", o) == 0
        assert run("credible", "--config", small_cfg, "--posterior", o / "posterior.json", "--out-dir", o,
                   "--workers", 2) == 0
        man = json.loads((o / "credible_manifest.json").read_text())
        for key in ("gamma", "rho", "r_quantiles", "acceptance_fraction", "radius", "per_sample"):
            assert key in man
        assert man["c_over_eta_source"] == "estimated"
        assert len(man["per_sample"]) == round(man["acceptance_fraction"] * 30)

    def test_select(self, tmp_path, small_cfg):
        assert run("simulate", "--config", small_cfg, "--out-dir", tmp_path) == 0
        cfg = tmp_path / "sel.json"
        cfg.write_text(json.dumps({"spline": {"q": 4}, "select": {"j_min": 4, "j_max": 7}}))
        assert run("select", "--config", cfg, "--data", tmp_path / "data.csv", "--out-dir", tmp_path) == 0
        sel = json.loads((tmp_path / "selection.json").read_text())
        assert sel["selected"][0] in range(4, 8) and len(sel["scores"]) == 4

    def test_fit_with_selection(self, tmp_path, small_cfg):
        assert run("simulate", "--config", small_cfg, "--out-dir", tmp_path) == 0
        cfg = tmp_path / "auto.json"
        cfg.write_text(json.dumps({"spline": {"q": 4, "J": None}, "select": {"j_min": 4, "j_max": 6}}))
        assert run("fit", "--config", cfg, "--data", tmp_path / "data.csv", "--out-dir", tmp_path) == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert len(summary["result"]["selection_scores"]) == 3

    def test_hausdorff_identical(self, tmp_path, capsys):
        assert run("scms", "--surface", "paper", "--out-dir", tmp_path) == 0
        f = tmp_path / "filament.csv"
        assert run("hausdorff", f, f, "--out-dir", tmp_path) == 0
        assert json.loads(capsys.readouterr().out.strip()) == {"hausdorff": 0.0}

    def test_filament_inverse_maps_to_unit_square(self, tmp_path):
        # a dataset on longitude/latitude-like extents
        rng = np.random.default_rng(1)
        u = rng.random((600, 2))
        y = 1 + np.exp(-((np.hypot(u[:, 0], u[:, 1]) - 0.5) ** 2) / 0.02) + 0.05 * rng.normal(size=600)
        lo, hi = np.array([-120.0, 32.0]), np.array([-114.0, 42.0])
        pts = lo + u * (hi - lo)
        with open(tmp_path / "q.csv", "w") as fh:
            fh.write("x1,x2,y\n")
            for (a, b), v in zip(pts, y):
                fh.write(f"{float(a)!r},{float(b)!r},{float(v)!r}\n")
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"spline": {"q": 4, "J": [7, 7]}, "scms": {"tau": 1.5, "seed_grid": 15}}))
        assert run("scms", "--config", cfg, "--data", tmp_path / "q.csv", "--out-dir", tmp_path) == 0
        from splinefil.field import ScalarField
        from splinefil.io import posterior_from_dict, read_filament_csv, read_json
        from splinefil.ridge import ScmsConfig, scms

        post, tr = posterior_from_dict(read_json(tmp_path / "posterior.json"))
        unit = scms(ScalarField(post.spec, post.mean_theta), ScmsConfig(threshold_tau=1.5, seeds=15))
        emitted = read_filament_csv(tmp_path / "filament.csv")
        np.testing.assert_allclose(tr.forward(emitted.points), unit.points, rtol=0, atol=1e-10)


class TestErrors:
    def _err(self, capsys):
        return json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"]

    def test_missing_file(self, tmp_path, capsys):
        assert run("fit", "--data", tmp_path / "none.csv", "--out-dir", tmp_path) != 0
        err = self._err(capsys)
        assert err["command"] == "fit" and err["kind"] == "data"

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"scms": {"alpha": 1}}')
        assert run("simulate", "--config", cfg, "--out-dir", tmp_path) == 2
        assert "scms.alpha" in self._err(capsys)["message"]

    def test_missing_option(self, tmp_path, capsys):
        assert run("credible", "--out-dir", tmp_path) == 2
        assert "--posterior" in self._err(capsys)["message"]

    def test_bad_cell(self, tmp_path, capsys):
        p = tmp_path / "d.csv"
        p.write_text("x1,x2,y\n0.1,0.2,oops\n")
        assert run("fit", "--data", p, "--out-dir", tmp_path) == 1
        err = self._err(capsys)
        assert err["type"] == "DataError" and "row 2" in err["message"]
