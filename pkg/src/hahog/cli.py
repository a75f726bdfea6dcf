"""Command-line entry point: synth | train | detect | eval | bench | serve.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.  With
--json, errors are emitted machine-readable on stderr.  Every numeric default
can be overridden by the config file (--config) and per-command flags; the
effective configuration is echoed so any run is reproducible from
(config, seeds).
"""

from __future__ import annotations

import dataclasses
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import Settings, load_settings
from .cluster import detect_cluster
from .depth import load_annotations, load_calibration, load_frame, to_height_field
from .detector import DetectionSet, detect, save_detections, load_detections
from .errors import ConfigError, HahogError
from .evaluation import (
    evaluate_frames,
    render_fscore_figure,
    write_plot_data,
    write_report_csv,
)
from .features import frame_descriptors
from .mlp import load_model, save_model
from .synth import generate_corpus
from .training import DatasetStore, build_dataset, run_training

log = logging.getLogger("hahog")


def _emit(ctx_obj: dict, payload: dict) -> None:
    if ctx_obj.get("json"):
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        for k, v in payload.items():
            if k == "config":
                continue
            click.echo(f"{k}: {v}")


@click.group()
@click.version_option(version=__version__, prog_name="hahog")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON config file; flags override file values.")
@click.option("--seed", type=int, default=None, help="Global seed override.")
@click.option("--threads", type=int, default=None, help="Worker thread bound.")
@click.option("--verbose", is_flag=True, help="Debug logging.")
@click.option("--json", "json_out", is_flag=True, help="Machine-readable output.")
@click.pass_context
def cli(ctx, config_path, seed, threads, verbose, json_out):
    """Pedestrian localization in overhead depth images."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    settings = load_settings(config_path, seed=seed, threads=threads)
    ctx.obj = {"settings": settings, "json": json_out}
    log.debug("effective config: %s", settings.echo())


def _settings(ctx) -> Settings:
    return ctx.obj["settings"]


@cli.command()
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--frames", "n_frames", type=int, default=80, show_default=True)
@click.option("--seed", type=int, default=None, help="Corpus seed (defaults to global).")
@click.option("--spacing", type=str, default=None,
              help="Target nearest-neighbor spacing band, 'LO,HI' in mm.")
@click.option("--pedestrians", type=str, default=None, help="Count range 'LO,HI'.")
@click.option("--wall-rate", type=float, default=None)
@click.option("--hand-rate", type=float, default=None)
@click.pass_context
def synth(ctx, out_dir, n_frames, seed, spacing, pedestrians, wall_rate, hand_rate):
    """Generate a seeded synthetic corpus with ground-truth annotations."""
    s = _settings(ctx)
    cfg = s.synth
    upd = {}
    if spacing:
        lo, hi = (float(v) for v in spacing.split(","))
        upd["spacing_mm"] = (lo, hi)
    if pedestrians:
        lo, hi = (int(v) for v in pedestrians.split(","))
        upd["n_pedestrians"] = (lo, hi)
    if wall_rate is not None:
        upd["wall_rate"] = wall_rate
    if hand_rate is not None:
        upd["hand_rate"] = hand_rate
    if upd:
        cfg = dataclasses.replace(cfg, **upd)
    seed = s.seed if seed is None else seed
    scenes = generate_corpus(cfg, n_frames, seed, out_dir=out_dir, threads=s.threads)
    _emit(ctx.obj, {
        "corpus": str(out_dir),
        "frames": len(scenes),
        "annotations": sum(len(sc.annotations.points) for sc in scenes),
        "distractor_frames": sum(1 for sc in scenes if sc.has_distractors),
        "seed": seed,
        "config": json.loads(s.echo()),
    })


def _corpus_frames(corpus: Path) -> list[Path]:
    frames = sorted((corpus / "frames").glob("*.pgm"))
    if not frames:
        frames = sorted(corpus.glob("*.pgm"))
    if not frames:
        raise ConfigError(f"no .pgm frames under {corpus}")
    return frames


@cli.command()
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), default=None,
              help="Annotated corpus to extract training windows from.")
@click.option("--store", "store_dir", type=click.Path(), default=None,
              help="Dataset store to fill and/or train from.")
@click.option("--model-out", type=click.Path(), required=True)
@click.option("--method", type=click.Choice(["hahog", "hog"]), default="hahog",
              show_default=True)
@click.option("--epochs", type=int, default=None)
@click.option("--no-augment", is_flag=True, help="Skip rotation/noise augmentation.")
@click.pass_context
def train(ctx, corpus_dir, store_dir, model_out, method, epochs, no_augment):
    """Build a labeled window dataset and train the classifier."""
    s = _settings(ctx)
    fc = s.features
    if method == "hog":
        fc = dataclasses.replace(fc, n_height_bins=0)
    if corpus_dir is None and store_dir is None:
        raise ConfigError("train needs --corpus and/or --store")
    if store_dir is None:
        store_dir = str(Path(model_out).parent / "store")
    store = DatasetStore(store_dir)

    if corpus_dir is not None:
        corpus = Path(corpus_dir)
        anns = load_annotations(corpus / "annotations.jsonl")
        fields = []
        for fp in _corpus_frames(corpus):
            frame = load_frame(fp)
            calib = load_calibration(fp)
            fields.append((to_height_field(frame, calib), anns[frame.frame_id]))
        aug = None if no_augment else s.augment
        counts = build_dataset(store, fields, fc, aug, seed=s.seed)
        log.info("store counts after build: %s", counts)

    tc = s.train if epochs is None else dataclasses.replace(s.train, epochs=epochs)
    report = run_training(store, fc, tc)
    save_model(report.model, model_out)
    _emit(ctx.obj, {
        "model": str(model_out),
        "method": method,
        "feature_len": fc.feature_len,
        "train_samples": report.n_train,
        "holdout_samples": report.n_holdout,
        "holdout_accuracy": round(report.holdout_accuracy, 4),
        "final_loss": round(report.loss_history[-1], 6) if report.loss_history else None,
        "epochs_run": len(report.loss_history),
        "config": json.loads(s.echo()),
    })


@cli.command(name="detect")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--method", type=click.Choice(["hahog", "hog", "cluster"]),
              default="hahog", show_default=True)
@click.option("--dump-features", "dump_dir", type=click.Path(), default=None,
              help="Write per-window descriptors (<frame_id>.npz) per frame.")
@click.option("--dump-scores", "scores_dir", type=click.Path(), default=None,
              help="Write per-window scores (<frame_id>.scores.json) per frame.")
@click.pass_context
def detect_cmd(ctx, corpus_dir, model_path, out_path, method, dump_dir,
               scores_dir):
    """Localize pedestrians in every corpus frame."""
    s = _settings(ctx)
    frames = _corpus_frames(Path(corpus_dir))

    model = None
    fc = s.features
    if method in ("hahog", "hog"):
        if model_path is None:
            raise ConfigError(f"--method {method} needs --model")
        model = load_model(model_path)
        if model.feature_config is not None:
            fc = model.feature_config
        want_height = method == "hahog"
        if (fc.n_height_bins > 0) != want_height:
            raise ConfigError(
                f"model at {model_path} was trained with "
                f"{'a' if fc.n_height_bins else 'no'} height histogram; "
                f"it cannot serve --method {method}"
            )

    def one(fp: Path) -> DetectionSet:
        frame = load_frame(fp)
        calib = load_calibration(fp)
        if method == "cluster":
            ds = detect_cluster(to_height_field(frame, calib), s.cluster,
                                frame_id=frame.frame_id)
        else:
            ds = detect(frame, calib, model, s.detector, fc=fc, method=method)
        if dump_dir is not None:
            feats, xs, ys = frame_descriptors(to_height_field(frame, calib), fc)
            Path(dump_dir).mkdir(parents=True, exist_ok=True)
            np.savez(
                Path(dump_dir) / f"{frame.frame_id}.npz",
                features=feats, origin_xs=xs, origin_ys=ys,
            )
        if scores_dir is not None and method != "cluster":
            from .detector import score_windows

            sm = score_windows(to_height_field(frame, calib), model, fc)
            Path(scores_dir).mkdir(parents=True, exist_ok=True)
            payload = {
                "frame_id": frame.frame_id,
                "cell_size": fc.cell_size,
                "window_px": fc.window_px,
                "origin_xs": sm.origin_xs.tolist(),
                "origin_ys": sm.origin_ys.tolist(),
                "alphas": [
                    [round(float(a), 9) for a in row] for row in sm.alphas
                ],
            }
            (Path(scores_dir) / f"{frame.frame_id}.scores.json").write_text(
                json.dumps(payload)
            )
        return ds

    if s.threads > 1 and len(frames) > 1:
        with ThreadPoolExecutor(max_workers=s.threads) as pool:
            sets = list(pool.map(one, frames))
    else:
        sets = [one(fp) for fp in frames]
    save_detections(sets, out_path)
    _emit(ctx.obj, {
        "detections": str(out_path),
        "method": method,
        "frames": len(sets),
        "total_detections": sum(len(d.detections) for d in sets),
        "config": json.loads(s.echo()),
    })


@cli.command(name="eval")
@click.option("--detections", "det_paths", type=click.Path(exists=True),
              multiple=True, required=True,
              help="Detections JSONL; repeat for method comparison.")
@click.option("--annotations", "ann_path", type=click.Path(exists=True), required=True)
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True,
              help="Corpus directory providing per-frame calibration sidecars.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
def eval_cmd(ctx, det_paths, ann_path, corpus_dir, out_dir):
    """Match detections to ground truth and report per-density-bin scores."""
    s = _settings(ctx)
    annotations = load_annotations(ann_path)
    calibs = {
        fp.stem: load_calibration(fp) for fp in _corpus_frames(Path(corpus_dir))
    }
    reports = []
    for path in det_paths:
        sets = load_detections(path)
        by_method: dict[str, list[DetectionSet]] = {}
        for ds in sets:
            by_method.setdefault(ds.method, []).append(ds)
        for m in sorted(by_method):
            reports.append(
                evaluate_frames(
                    by_method[m], annotations, calibs,
                    match_radius_mm=s.eval.match_radius_mm,
                    bin_edges_rho=s.eval.bin_edges_rho,
                )
            )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(reports, out / "report.csv", s.eval.match_radius_mm)
    write_plot_data(reports, out / "report_data.json", s.eval.match_radius_mm)
    render_fscore_figure(reports, out / "fscore_vs_density.png")
    _emit(ctx.obj, {
        "report": str(out / "report.csv"),
        "figure": str(out / "fscore_vs_density.png"),
        **{
            f"overall_fscore_{r.method}": round(f, 4)
            for r in reports
            if (f := r.overall_fscore()) is not None
        },
        "config": json.loads(s.echo()),
    })


@cli.command()
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--frame", "frame_path", type=click.Path(exists=True), default=None,
              help="Benchmark frame; a synthetic one is generated when omitted.")
@click.option("--reps", type=int, default=30, show_default=True)
@click.pass_context
def bench(ctx, model_path, frame_path, reps):
    """Frames/second of the full detector, single- and multi-thread."""
    s = _settings(ctx)
    model = load_model(model_path)
    if frame_path is not None:
        frame = load_frame(frame_path)
        calib = load_calibration(frame_path)
    else:
        from .synth import generate_scene

        scene = generate_scene(s.synth, s.seed)
        frame, calib = scene.frame, s.synth.calibration

    def run_once():
        return detect(frame, calib, model, s.detector)

    for _ in range(3):
        run_once()

    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        threadpool_limits = None

    if threadpool_limits is not None:
        with threadpool_limits(limits=1):
            t0 = time.perf_counter()
            for _ in range(reps):
                run_once()
            t_single = time.perf_counter() - t0
    else:
        t0 = time.perf_counter()
        for _ in range(reps):
            run_once()
        t_single = time.perf_counter() - t0

    workers = max(2, s.threads)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        t0 = time.perf_counter()
        list(pool.map(lambda _i: run_once(), range(reps)))
        t_multi = time.perf_counter() - t0

    result = {
        "frame": f"{frame.width}x{frame.height}",
        "reps": reps,
        "fps_single": round(reps / t_single, 2),
        "fps_multi": round(reps / t_multi, 2),
        "workers": workers,
        "windows": int(np.prod([
            (frame.width // s.features.cell_size - s.features.window_cells) //
            s.features.stride_cells + 1,
            (frame.height // s.features.cell_size - s.features.window_cells) //
            s.features.stride_cells + 1,
        ])),
    }
    click.echo(json.dumps(result, sort_keys=True))


@cli.command()
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--store", "store_dir", type=click.Path(), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8008, show_default=True)
@click.pass_context
def serve(ctx, corpus_dir, model_path, store_dir, host, port):
    """Start the expert review (hard-mining) HTTP service."""
    s = _settings(ctx)
    from .service import serve as run_service

    run_service(
        corpus_dir, model_path, store_dir,
        host=host, port=port, det_cfg=s.detector, seed=s.seed,
    )


def main(argv: list[str] | None = None) -> int:
    json_mode = "--json" in (argv if argv is not None else sys.argv[1:])

    def fail(code: int, kind: str, message: str) -> int:
        if json_mode:
            click.echo(json.dumps({"error": kind, "message": message}), err=True)
        else:
            click.echo(f"error: {message}", err=True)
        return code

    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return fail(1, "aborted", "aborted")
    except click.UsageError as exc:
        return fail(1, "usage", exc.format_message())
    except ConfigError as exc:
        return fail(1, "config", str(exc))
    except (HahogError, OSError) as exc:
        return fail(2, "data", str(exc))
    except Exception as exc:  # pragma: no cover - defensive
        logging.getLogger("hahog").exception("internal error")
        return fail(3, "internal", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
