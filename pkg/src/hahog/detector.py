"""Sliding-window detector: score, threshold, and non-maximum suppression.

Every window on the stride lattice is scored by the classifier; windows at or
above the score threshold become location candidates at their centers, and
greedy non-maximum suppression removes duplicates of the same person.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .depth import Calibration, DepthFrame, HeightField, to_height_field
from .errors import ConfigError
from .features import FeatureConfig, frame_descriptors
from .mlp import MlpModel, forward


@dataclass(frozen=True)
class DetectorConfig:
    """Score threshold and suppression radius.

    The radius may be given in pixels or millimeters; millimeters take effect
    once a calibration is available to convert them.
    """

    score_threshold: float = 0.9
    nms_radius_px: float | None = 26.0
    nms_radius_mm: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.score_threshold < 1.0):
            raise ConfigError("score_threshold must be in (0, 1)")
        if self.nms_radius_px is None and self.nms_radius_mm is None:
            raise ConfigError("one of nms_radius_px / nms_radius_mm is required")
        for r in (self.nms_radius_px, self.nms_radius_mm):
            if r is not None and r <= 0:
                raise ConfigError("nms radius must be positive")

    def radius_px(self, calib: Calibration | None = None) -> float:
        if self.nms_radius_px is not None:
            return float(self.nms_radius_px)
        if calib is None:
            raise ConfigError("nms radius in mm needs a calibration")
        return float(self.nms_radius_mm) / calib.scale_mm_per_px


@dataclass(frozen=True)
class Candidate:
    """A thresholded window center with its classifier score."""

    x: int
    y: int
    alpha: float


@dataclass(frozen=True)
class ScoreMap:
    """Classifier score for every valid window origin on the stride lattice."""

    alphas: np.ndarray        # (len(origin_ys), len(origin_xs))
    origin_xs: np.ndarray     # origin cells along x
    origin_ys: np.ndarray
    feature_config: FeatureConfig

    def centers_px(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel centers (xs, ys) matching the alpha grid axes."""
        fc = self.feature_config
        half = fc.window_px // 2
        return (
            self.origin_xs * fc.cell_size + half,
            self.origin_ys * fc.cell_size + half,
        )


@dataclass
class DetectionSet:
    """Final pedestrian locations for one frame."""

    frame_id: str
    detections: list[Candidate] = field(default_factory=list)
    method: str = "hahog"


def score_windows(
    field_: HeightField, model: MlpModel, fc: FeatureConfig
) -> ScoreMap:
    """Score every window with shared per-frame cell computation."""
    if model.feature_config is not None and model.feature_config != fc:
        raise ConfigError(
            "model feature_config disagrees with detector feature config"
        )
    if model.input_dim != fc.feature_len:
        raise ConfigError(
            f"model expects {model.input_dim} features, config yields "
            f"{fc.feature_len}"
        )
    feats, xs, ys = frame_descriptors(field_, fc)
    alphas = forward(model, feats.reshape(-1, fc.feature_len))
    return ScoreMap(
        alphas=np.asarray(alphas).reshape(len(ys), len(xs)),
        origin_xs=xs,
        origin_ys=ys,
        feature_config=fc,
    )


def threshold_candidates(scores: ScoreMap, t: float) -> list[Candidate]:
    """Keep windows with alpha >= t; positions are window centers in pixels."""
    if not (0.0 < t < 1.0):
        raise ConfigError("threshold must be in (0, 1)")
    cx, cy = scores.centers_px()
    iy, ix = np.nonzero(scores.alphas >= t)
    return [
        Candidate(x=int(cx[j]), y=int(cy[i]), alpha=float(scores.alphas[i, j]))
        for i, j in zip(iy.tolist(), ix.tolist())
    ]


def nms(
    candidates: list[Candidate], radius: float, frame_id: str = "", method: str = "hahog"
) -> DetectionSet:
    """Greedy non-maximum suppression.

    Candidates are visited by descending score (ties broken by ascending
    (y, x)); each is kept iff no already-kept candidate lies strictly closer
    than `radius`.  The result is deterministic, independent of input order,
    and no surviving pair is closer than the radius.
    """
    order = sorted(candidates, key=lambda c: (-c.alpha, c.y, c.x))
    kept: list[Candidate] = []
    r2 = radius * radius
    for c in order:
        ok = True
        for k in kept:
            dx, dy = c.x - k.x, c.y - k.y
            if dx * dx + dy * dy < r2:
                ok = False
                break
        if ok:
            kept.append(c)
    return DetectionSet(frame_id=frame_id, detections=kept, method=method)


def detect(
    frame: DepthFrame,
    calib: Calibration,
    model: MlpModel,
    det_cfg: DetectorConfig,
    fc: FeatureConfig | None = None,
    method: str | None = None,
) -> DetectionSet:
    """Full pipeline: height field, window scores, threshold, suppression."""
    if fc is None:
        if model.feature_config is None:
            raise ConfigError("model carries no feature_config; pass one")
        fc = model.feature_config
    field_ = to_height_field(frame, calib)
    scores = score_windows(field_, model, fc)
    cands = threshold_candidates(scores, det_cfg.score_threshold)
    if method is None:
        method = "hog" if fc.n_height_bins == 0 else "hahog"
    return nms(cands, det_cfg.radius_px(calib), frame_id=frame.frame_id, method=method)


def min_pairwise_distance(ds: DetectionSet) -> float:
    """Smallest pairwise distance among detections (inf when < 2)."""
    pts = [(c.x, c.y) for c in ds.detections]
    best = math.inf
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            best = min(best, math.dist(pts[i], pts[j]))
    return best


def save_detections(sets: list[DetectionSet], path: str | Path) -> None:
    """JSON-lines output, one object per frame."""
    with open(path, "w", encoding="utf-8") as f:
        for ds in sets:
            obj = {
                "frame_id": ds.frame_id,
                "method": ds.method,
                "detections": [
                    {"x": c.x, "y": c.y, "alpha": round(float(c.alpha), 6)}
                    for c in ds.detections
                ],
            }
            f.write(json.dumps(obj) + "\n")


def load_detections(path: str | Path) -> list[DetectionSet]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(
                DetectionSet(
                    frame_id=obj["frame_id"],
                    method=obj.get("method", "hahog"),
                    detections=[
                        Candidate(x=int(d["x"]), y=int(d["y"]), alpha=float(d["alpha"]))
                        for d in obj["detections"]
                    ],
                )
            )
    return out
