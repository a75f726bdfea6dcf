import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hahog.cli import main

SMALL = {
    "synth": {
        "width": 220,
        "height": 180,
        "spacing_mm": [350, 800],
        "n_pedestrians": [2, 4],
        "wall_rate": 0.5,
        "hand_rate": 0.3,
    },
    "train": {"epochs": 8},
}


def run(argv):
    return main([str(a) for a in argv])


def sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def tree_hash(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): sha(p)
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture(scope="module")
def cfg_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "config.json"
    p.write_text(json.dumps(SMALL))
    return p


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory, cfg_file):
    """One small synth -> train -> detect chain shared by read-only tests."""
    root = tmp_path_factory.mktemp("pipe")
    corpus = root / "corpus"
    model = root / "model.mlp"
    assert run(["--config", cfg_file, "synth", "--out", corpus,
                "--frames", 8, "--seed", 5]) == 0
    assert run(["--config", cfg_file, "train", "--corpus", corpus,
                "--store", root / "store", "--model-out", model]) == 0
    return {"root": root, "corpus": corpus, "model": model, "cfg": cfg_file}


class TestSynth:
    def test_same_seed_identical_corpora(self, tmp_path, cfg_file):
        for d in ("a", "b"):
            assert run(["--config", cfg_file, "synth", "--out", tmp_path / d,
                        "--frames", 4, "--seed", 7]) == 0
        assert tree_hash(tmp_path / "a") == tree_hash(tmp_path / "b")

    def test_threads_do_not_change_output(self, tmp_path, cfg_file):
        for d, th in (("t1", 1), ("t4", 4)):
            assert run(["--config", cfg_file, "--threads", th, "synth",
                        "--out", tmp_path / d, "--frames", 4, "--seed", 9]) == 0
        assert tree_hash(tmp_path / "t1") == tree_hash(tmp_path / "t4")

    def test_json_output(self, tmp_path, cfg_file, capsys):
        assert run(["--json", "--config", cfg_file, "synth",
                    "--out", tmp_path / "j", "--frames", 2, "--seed", 1]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["frames"] == 2
        assert out["config"]["synth"]["width"] == 220


class TestDetectAndEval:
    def test_detect_hahog_and_eval(self, pipeline, tmp_path, cfg_file):
        det = tmp_path / "det.jsonl"
        assert run(["--config", cfg_file, "detect", "--corpus",
                    pipeline["corpus"], "--model", pipeline["model"],
                    "--out", det]) == 0
        outdir = tmp_path / "eval"
        assert run(["--config", cfg_file, "eval", "--detections", det,
                    "--annotations", pipeline["corpus"] / "annotations.jsonl",
                    "--corpus", pipeline["corpus"], "--out", outdir]) == 0
        assert (outdir / "report.csv").exists()
        assert (outdir / "report_data.json").exists()
        assert (outdir / "fscore_vs_density.png").exists()

    def test_detect_cluster_no_model(self, pipeline, tmp_path, cfg_file):
        det = tmp_path / "cl.jsonl"
        assert run(["--config", cfg_file, "detect", "--corpus",
                    pipeline["corpus"], "--method", "cluster",
                    "--out", det]) == 0
        first = json.loads(det.read_text().splitlines()[0])
        assert first["method"] == "cluster"

    def test_hog_model_shares_hog_prefix(self, pipeline, tmp_path, cfg_file):
        root = pipeline["root"]
        hog_model = tmp_path / "hog.mlp"
        assert run(["--config", cfg_file, "train", "--store", root / "store",
                    "--model-out", hog_model, "--method", "hog"]) == 0

        dump_ha = tmp_path / "dump_ha"
        dump_hog = tmp_path / "dump_hog"
        assert run(["--config", cfg_file, "detect", "--corpus",
                    pipeline["corpus"], "--model", pipeline["model"],
                    "--out", tmp_path / "d1.jsonl",
                    "--dump-features", dump_ha]) == 0
        assert run(["--config", cfg_file, "detect", "--corpus",
                    pipeline["corpus"], "--model", hog_model,
                    "--method", "hog", "--out", tmp_path / "d2.jsonl",
                    "--dump-features", dump_hog]) == 0
        for f in sorted(dump_ha.glob("*.npz")):
            a = np.load(f)["features"]
            b = np.load(dump_hog / f.name)["features"]
            hog_len = b.shape[-1]
            assert a.shape[-1] == hog_len + 16
            assert np.array_equal(a[..., :hog_len], b)

    def test_method_model_mismatch_rejected(self, pipeline, tmp_path, cfg_file):
        code = run(["--config", cfg_file, "detect", "--corpus",
                    pipeline["corpus"], "--model", pipeline["model"],
                    "--method", "hog", "--out", tmp_path / "x.jsonl"])
        assert code == 1

    def test_detect_threads_identical(self, pipeline, tmp_path, cfg_file):
        outs = []
        for th in (1, 3):
            out = tmp_path / f"det{th}.jsonl"
            assert run(["--config", cfg_file, "--threads", th, "detect",
                        "--corpus", pipeline["corpus"],
                        "--model", pipeline["model"], "--out", out]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestBench:
    def test_bench_reports_both_numbers(self, pipeline, tmp_path, cfg_file,
                                        capsys):
        assert run(["--config", cfg_file, "bench", "--model",
                    pipeline["model"], "--reps", 3]) == 0
        out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert out["fps_single"] > 0 and out["fps_multi"] > 0
        assert out["reps"] == 3


class TestErrorsAndExitCodes:
    def test_usage_error_exit_1(self):
        assert run(["detect"]) == 1  # missing required options

    def test_missing_model_file_exit_1(self, pipeline, tmp_path):
        # click validates path existence -> usage error
        assert run(["detect", "--corpus", pipeline["corpus"],
                    "--model", tmp_path / "absent.mlp",
                    "--out", tmp_path / "o.jsonl"]) == 1

    def test_data_error_exit_2(self, tmp_path, cfg_file):
        bad = tmp_path / "bad.mlp"
        bad.write_bytes(b"not a model")
        empty_corpus = tmp_path / "c"
        (empty_corpus / "frames").mkdir(parents=True)
        (empty_corpus / "frames" / "z.pgm").write_bytes(
            b"P5\n220 180\n65535\n" + b"\x00" * (2 * 220 * 180)
        )
        (empty_corpus / "frames" / "z.json").write_text(
            json.dumps({"frame_id": "z", "sensor_height_mm": 3000,
                        "scale_mm_per_px": 10})
        )
        code = run(["detect", "--corpus", empty_corpus, "--model", bad,
                    "--out", tmp_path / "o.jsonl"])
        assert code == 2

    def test_json_error_on_stderr(self, tmp_path, capsys):
        code = run(["--json", "detect"])
        assert code == 1
        err = capsys.readouterr().err
        assert json.loads(err.strip())["error"] == "usage"

    def test_console_script_runs(self):
        r = subprocess.run(
            [sys.executable, "-m", "hahog.cli", "--help"],
            capture_output=True, text=True,
        )
        assert r.returncode == 0
        assert "synth" in r.stdout and "bench" in r.stdout


class TestDumpScores:
    def test_scores_json_matches_detections(self, pipeline, tmp_path, cfg_file):
        det = tmp_path / "d.jsonl"
        scores = tmp_path / "scores"
        assert run(["--config", cfg_file, "detect", "--corpus",
                    pipeline["corpus"], "--model", pipeline["model"],
                    "--out", det, "--dump-scores", scores]) == 0
        files = sorted(scores.glob("*.scores.json"))
        assert files
        payload = json.loads(files[0].read_text())
        assert payload["window_px"] == 66
        alphas = np.array(payload["alphas"])
        assert alphas.shape == (len(payload["origin_ys"]),
                                len(payload["origin_xs"]))
        assert ((alphas > 0) & (alphas < 1)).all()
        # every emitted detection's center maps back to a window at/above
        # the threshold in the dump
        for line in det.read_text().splitlines():
            obj = json.loads(line)
            dump = json.loads(
                (scores / f"{obj['frame_id']}.scores.json").read_text())
            a = np.array(dump["alphas"])
            half = dump["window_px"] // 2
            for d in obj["detections"]:
                cx = (d["x"] - half) // dump["cell_size"]
                cy = (d["y"] - half) // dump["cell_size"]
                ix = dump["origin_xs"].index(cx)
                iy = dump["origin_ys"].index(cy)
                assert a[iy, ix] >= 0.9 - 1e-9
