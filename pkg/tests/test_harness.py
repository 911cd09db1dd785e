import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from posebench import harness
from posebench.errors import EmptyResults
from posebench.harness import (
    BenchmarkConfig,
    SceneConfig,
    cmd_evaluate,
    cmd_report,
    cmd_sample_pairs,
    run_selfcheck,
)
from posebench.metrics import maa
from posebench.synthetic import SceneSpec, emit_dataset, specs_for_grid


@pytest.fixture(scope="module")
def synthetic_workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    specs = specs_for_grid(21, 3, n_points=80, pixel_noise=0.3, outlier_fraction=0.2)
    manifest = emit_dataset("scene-a", specs, root)
    config = BenchmarkConfig(
        scenes=[SceneConfig("scene-a", manifest["model"], manifest["matches_dir"],
                            manifest["depth_dirs"], group="synthetic")],
        estimators=["B", "H", "R", "GT-H"],
        pair_count=10,
        seed=3,
        ransac_overrides={"max_iterations": 200},
        output_dir=str(root / "out"),
    )
    status = cmd_sample_pairs(config)
    assert status == {"scene-a": "ok"}
    return root, config


class TestSamplePairsCmd:
    def test_deterministic_rows(self, tmp_path):
        manifest = emit_dataset("s", specs_for_grid(5, 3, n_points=40), tmp_path)
        cfg = BenchmarkConfig(
            scenes=[SceneConfig("s", manifest["model"], manifest["matches_dir"], {})],
            pair_count=3,
            seed=7,
            output_dir=str(tmp_path / "o1"),
        )
        assert cmd_sample_pairs(cfg) == {"s": "ok"}
        cfg2 = BenchmarkConfig(scenes=cfg.scenes, pair_count=3, seed=7,
                               output_dir=str(tmp_path / "o2"))
        assert cmd_sample_pairs(cfg2) == {"s": "ok"}
        a = (tmp_path / "o1" / "pairs" / "s.csv").read_bytes()
        b = (tmp_path / "o2" / "pairs" / "s.csv").read_bytes()
        assert a == b

    def test_threshold_too_high_records_failure(self, tmp_path):
        manifest = emit_dataset("s", specs_for_grid(5, 1, n_points=30), tmp_path)
        cfg = BenchmarkConfig(
            scenes=[SceneConfig("s", manifest["model"], manifest["matches_dir"], {})],
            min_overlap=1.1,
            output_dir=str(tmp_path / "o"),
        )
        status = cmd_sample_pairs(cfg)
        assert "NoValidPairs" in status["s"]

    def test_corrupt_scene_does_not_block_others(self, tmp_path):
        manifest = emit_dataset("good", specs_for_grid(5, 1, n_points=30), tmp_path)
        bad_dir = tmp_path / "bad_model"
        bad_dir.mkdir()
        (bad_dir / "cameras.txt").write_text("1 PINHOLE not numbers\n")
        (bad_dir / "images.txt").write_text("")
        (bad_dir / "points3D.txt").write_text("")
        cfg = BenchmarkConfig(
            scenes=[
                SceneConfig("bad", str(bad_dir), str(tmp_path)),
                SceneConfig("good", manifest["model"], manifest["matches_dir"], {}),
            ],
            output_dir=str(tmp_path / "o"),
        )
        status = cmd_sample_pairs(cfg)
        assert status["good"] == "ok"
        assert status["bad"] != "ok"
        assert (tmp_path / "o" / "pairs" / "good.csv").exists()


class TestEvaluateCmd:
    def test_results_cover_every_combo_once(self, synthetic_workspace):
        root, config = synthetic_workspace
        results, dm = cmd_evaluate(config, jobs=1)
        rows = harness.read_results_csv(results)
        combos = {(r["pair"], r["estimator"], r["provenance"]) for r in rows}
        assert len(rows) == len(combos)
        pairs = {r["pair"] for r in rows}
        assert len(pairs) == 3
        for pair in pairs:
            assert (pair, "B", "-") in combos
            assert (pair, "GT-H", "-") in combos
            assert (pair, "H", "synthetic-mde") in combos
            assert (pair, "R", "synthetic-mde") in combos
        for r in rows:
            assert r["status"] == "ok"
            assert float(r["e_p"]) == max(float(r["e_r"]), float(r["e_t"]))
            assert float(r["e_p"]) < 1.5
        assert dm is not None and dm.exists()

    def test_missing_matches_recorded_not_fatal(self, synthetic_workspace, tmp_path):
        root, config = synthetic_workspace
        pairs_csv = Path(config.output_dir) / "pairs" / "scene-a.csv"
        with open(pairs_csv, newline="") as fh:
            rows = list(csv.reader(fh))
        ghost = list(rows[-1])
        ghost[2], ghost[3] = "im9991", "im9992"  # ids stay valid, files do not exist
        rows.append(ghost)
        ghost_pairs = tmp_path / "pairs"
        ghost_pairs.mkdir()
        with open(ghost_pairs / "scene-a.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        cfg = BenchmarkConfig(
            scenes=config.scenes,
            estimators=["H"],
            seed=config.seed,
            ransac_overrides=config.ransac_overrides,
            output_dir=str(tmp_path / "out"),
        )
        results, _ = cmd_evaluate(cfg, jobs=1, pairs_dir=ghost_pairs)
        rows = harness.read_results_csv(results)
        missing = [r for r in rows if r["status"] == "missing_input"]
        assert len(missing) == 1
        assert float(missing[0]["e_p"]) == 180.0

    def test_noiseless_scene_gives_exact_poses(self, tmp_path):
        manifest = emit_dataset("clean", specs_for_grid(31, 2, n_points=120), tmp_path)
        cfg = BenchmarkConfig(
            scenes=[SceneConfig("clean", manifest["model"], manifest["matches_dir"],
                                manifest["depth_dirs"])],
            estimators=["H"],
            pair_count=2,
            seed=1,
            ransac_overrides={"max_iterations": 100},
            output_dir=str(tmp_path / "out"),
        )
        assert cmd_sample_pairs(cfg) == {"clean": "ok"}
        results, _ = cmd_evaluate(cfg, jobs=1)
        rows = harness.read_results_csv(results)
        assert rows and all(r["status"] == "ok" for r in rows)
        assert max(float(r["e_p"]) for r in rows) < 1e-3

    def test_two_surviving_matches_recorded_as_insufficient(self, tmp_path):
        from posebench.ingest import write_matches

        manifest = emit_dataset("tiny", specs_for_grid(32, 1, n_points=60), tmp_path)
        mdir = Path(manifest["matches_dir"])
        mpath = next(iter(mdir.glob("*.d2pm")))
        from posebench.ingest import read_matches

        mf = read_matches(mpath)
        write_matches(mpath, mf.kps1[:2], mf.kps2[:2])  # only 2 matches survive
        cfg = BenchmarkConfig(
            scenes=[SceneConfig("tiny", manifest["model"], manifest["matches_dir"],
                                manifest["depth_dirs"])],
            estimators=["H"],
            pair_count=1,
            seed=1,
            output_dir=str(tmp_path / "out"),
        )
        assert cmd_sample_pairs(cfg) == {"tiny": "ok"}
        results, _ = cmd_evaluate(cfg, jobs=1)
        rows = harness.read_results_csv(results)
        assert len(rows) == 1
        assert rows[0]["status"] == "insufficient_matches"
        assert float(rows[0]["e_p"]) == 180.0

    def test_jobs_do_not_change_bytes(self, synthetic_workspace, tmp_path):
        root, config = synthetic_workspace
        cfg1 = BenchmarkConfig(
            scenes=config.scenes, estimators=["H"], seed=config.seed,
            ransac_overrides={"max_iterations": 60}, output_dir=str(tmp_path / "j1"),
        )
        cfg2 = BenchmarkConfig(
            scenes=config.scenes, estimators=["H"], seed=config.seed,
            ransac_overrides={"max_iterations": 60}, output_dir=str(tmp_path / "j2"),
        )
        pairs_dir = Path(config.output_dir) / "pairs"
        r1, d1 = cmd_evaluate(cfg1, jobs=1, pairs_dir=pairs_dir)
        r2, d2 = cmd_evaluate(cfg2, jobs=3, pairs_dir=pairs_dir)
        assert r1.read_bytes() == r2.read_bytes()
        assert d1.read_bytes() == d2.read_bytes()


class TestReportCmd:
    def _write_results(self, path, rows):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(harness.RESULTS_HEADER)
            w.writerows(rows)

    def test_all_zero_errors_give_unit_maa_and_rank_one(self, tmp_path):
        rows = []
        for pair in ("p1", "p2"):
            for prov in ("mde-a", "mde-b"):
                rows.append(["s", pair, "H", prov, "0", "0", "0", "10", "10", "ok"])
        f = tmp_path / "r.csv"
        self._write_results(f, rows)
        report = cmd_report([f], tmp_path / "rep")
        assert report["overall"]["maa(H,mde-a)"] == 1.0
        assert report["overall"]["maa(H,mde-b)"] == 1.0
        assert report["ranks"]["maa_H"] == {"mde-a": 1, "mde-b": 1}
        assert (tmp_path / "rep" / "report.json").exists()
        assert (tmp_path / "rep" / "report.txt").exists()

    def test_maa_matches_brute_force_from_rows(self, tmp_path):
        errors = [0.5, 2.5, 7.0, 12.0, 180.0]
        rows = [
            ["s", f"p{i}", "H", "m", str(e), str(e), str(e), "5", "5", "ok"]
            for i, e in enumerate(errors)
        ]
        f = tmp_path / "r.csv"
        self._write_results(f, rows)
        report = cmd_report([f], tmp_path / "rep")
        # independent counting oracle
        expected = np.mean([np.mean([e < th for e in errors]) for th in range(1, 11)])
        assert report["overall"]["maa(H,m)"] == pytest.approx(expected, abs=1e-12)
        assert report["overall"]["maa(H,m)"] == pytest.approx(maa(errors), abs=1e-12)

    def test_grouping_mean_of_means(self, tmp_path):
        rows = [
            ["s1", "p", "H", "m", "0", "0", "0", "5", "5", "ok"],       # maa 1.0
            ["s2", "p", "H", "m", "20", "20", "20", "5", "5", "ok"],    # maa 0.0
            ["s3", "p", "H", "m", "0", "0", "0", "5", "5", "ok"],       # maa 1.0
        ]
        f = tmp_path / "r.csv"
        self._write_results(f, rows)
        report = cmd_report([f], tmp_path / "rep", grouping={"s1": "A", "s2": "A", "s3": "B"})
        assert report["group_means"]["A"]["maa(H,m)"] == pytest.approx(0.5)
        assert report["group_means"]["B"]["maa(H,m)"] == pytest.approx(1.0)
        assert report["overall"]["maa(H,m)"] == pytest.approx(0.75)

    def test_tied_provenances_share_rank(self, tmp_path):
        rows = []
        for prov in ("m1", "m2"):
            rows.append(["s", "p", "H", prov, "0.2", "0.3", "0.3", "9", "9", "ok"])
        f = tmp_path / "r.csv"
        self._write_results(f, rows)
        report = cmd_report([f], tmp_path / "rep")
        assert report["ranks"]["maa_H"] == {"m1": 1, "m2": 1}

    def test_empty_results_error(self, tmp_path):
        f = tmp_path / "r.csv"
        self._write_results(f, [])
        with pytest.raises(EmptyResults):
            cmd_report([f], tmp_path / "rep")

    def test_correlation_block_with_depth_metrics(self, tmp_path):
        rows, dm_rows = [], []
        for prov, ep, d1v in (("m1", 0.5, 0.95), ("m2", 3.5, 0.80), ("m3", 8.5, 0.60)):
            rows.append(["s", "p", "H", prov, str(ep), str(ep), str(ep), "9", "9", "ok"])
            dm_rows.append(["s", "p", prov, "40", "0.1", str(d1v), "0.1", str(d1v)])
        f = tmp_path / "r.csv"
        self._write_results(f, rows)
        dmf = tmp_path / "dm.csv"
        with open(dmf, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(harness.DEPTH_METRICS_HEADER)
            w.writerows(dm_rows)
        report = cmd_report([f], tmp_path / "rep", depth_metrics_files=[dmf])
        block = report["correlation_delta1_vs_maa"]["H"]
        assert block["n_methods"] == 3
        assert block["pearson_r"] > 0.9  # higher delta1 goes with higher mAA here

    def test_report_recomputable_from_csv(self, synthetic_workspace, tmp_path):
        root, config = synthetic_workspace
        results = Path(config.output_dir) / "results.csv"
        if not results.exists():
            cmd_evaluate(config, jobs=1)
        report = cmd_report([results], tmp_path / "rep")
        rows = harness.read_results_csv(results)
        groups = {}
        for r in rows:
            key = (r["scene"], f"maa({r['estimator']},{r['provenance']})")
            groups.setdefault(key, []).append(float(r["e_p"]))
        for (scene, metric), errs in groups.items():
            assert report["per_scene"][scene][metric] == pytest.approx(maa(errs), abs=1e-12)


class TestSelfcheckNegativeControl:
    def test_negative_control_fails_and_restores(self):
        from posebench import ransac as r

        checks = run_selfcheck(seed=0, negative_control=True)
        assert not all(c.passed for c in checks)
        assert r._NEGATIVE_CONTROL is False  # flag restored


class TestConfigFile:
    def test_roundtrip_with_env_expansion(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DATA_ROOT", str(tmp_path))
        doc = {
            "scenes": [{
                "name": "s",
                "model": "$DATA_ROOT/model",
                "matches_dir": "$DATA_ROOT/matches",
                "depth_dirs": {"m": "$DATA_ROOT/depth"},
                "group": "g",
            }],
            "estimators": ["H"],
            "pairs": {"min_overlap": 0.2, "count": 5, "seed": 9},
            "ransac": {"max_iterations": 123},
            "output_dir": "$DATA_ROOT/out",
        }
        p = tmp_path / "c.json"
        p.write_text(json.dumps(doc))
        cfg = BenchmarkConfig.from_file(p)
        assert cfg.scenes[0].model == f"{tmp_path}/model"
        assert cfg.scenes[0].depth_dirs["m"] == f"{tmp_path}/depth"
        assert cfg.min_overlap == 0.2 and cfg.pair_count == 5 and cfg.seed == 9
        assert cfg.estimator_config("H").max_iterations == 123
        assert len(cfg.config_hash()) == 16


class TestCliProcess:
    def test_selfcheck_negative_control_exit_code(self):
        # run a cheap slice through the module entry point: bad residuals must
        # flip the exit code; the full positive selfcheck runs in acceptance
        proc = subprocess.run(
            [sys.executable, "-c", (
                "from posebench.harness import check_noiseless_exactness, format_selfcheck\n"
                "import posebench.ransac as r\n"
                "r._NEGATIVE_CONTROL = True\n"
                "checks = check_noiseless_exactness(0, n_pairs=3)\n"
                "print(format_selfcheck(checks))\n"
                "raise SystemExit(0 if all(c.passed for c in checks) else 1)\n"
            )],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 1
        assert "FAIL" in proc.stdout
