"""Density-dependent detection scoring.

Detections are matched one-to-one to ground-truth annotations by the Voronoi
rule (a detection can only claim its nearest annotation) within a distance
budget.  Every TP/FP/FN is then assigned the nearest-neighbor density of its
closest annotation and counted in density bins, so precision, recall, and
F-score can be read as a function of crowding.  Counts aggregate across
frames before ratios are computed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .depth import AnnotationSet, Calibration
from .detector import DetectionSet
from .errors import ConfigError

DEFAULT_BIN_EDGES_RHO = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0)
DEFAULT_MATCH_RADIUS_MM = 300.0


@dataclass
class MatchResult:
    """One frame's detection/annotation association."""

    frame_id: str
    tp: list[tuple[int, int]]   # (detection index, annotation index)
    fp: list[int]               # unmatched detection indices
    fn: list[int]               # unmatched annotation indices
    detections: DetectionSet
    annotations: AnnotationSet


@dataclass(frozen=True)
class DensityRecord:
    """Nearest-neighbor distance and derived density for one annotation."""

    annotation_index: int
    r_nn_m: float
    rho_nn: float  # 1 / (pi * r_nn^2), pedestrians per square meter


@dataclass
class BinReport:
    """Per-density-bin counts and scores; undefined ratios stay None."""

    bin_edges_rho: tuple[float, ...]
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    method: str = ""

    @property
    def n_bins(self) -> int:
        return len(self.bin_edges_rho) - 1

    def precision(self, i: int) -> float | None:
        d = self.tp[i] + self.fp[i]
        return float(self.tp[i] / d) if d > 0 else None

    def recall(self, i: int) -> float | None:
        d = self.tp[i] + self.fn[i]
        return float(self.tp[i] / d) if d > 0 else None

    def fscore(self, i: int) -> float | None:
        p, r = self.precision(i), self.recall(i)
        if p is None or r is None or (p + r) == 0:
            return None
        return 2.0 * p * r / (p + r)

    def overall_fscore(self) -> float | None:
        agg = BinReport(
            bin_edges_rho=(0.0, math.inf),
            tp=np.array([self.tp.sum()]),
            fp=np.array([self.fp.sum()]),
            fn=np.array([self.fn.sum()]),
            method=self.method,
        )
        return agg.fscore(0)


def match(
    detections: DetectionSet,
    annotations: AnnotationSet,
    calib: Calibration,
    match_radius_mm: float = DEFAULT_MATCH_RADIUS_MM,
) -> MatchResult:
    """Greedy one-to-one matching in ascending distance order.

    A detection may only match the annotation owning the Voronoi cell it
    falls into (its nearest annotation), and only while that annotation is
    unmatched and within the match radius.  Ties break deterministically on
    (distance, annotation index, detection index).
    """
    if detections.frame_id != annotations.frame_id:
        raise ConfigError(
            f"frame mismatch: {detections.frame_id!r} vs {annotations.frame_id!r}"
        )
    dets = detections.detections
    anns = annotations.points
    radius_px = match_radius_mm / calib.scale_mm_per_px

    cands = []
    for di, det in enumerate(dets):
        best_d, best_a = math.inf, -1
        for ai, (ax, ay) in enumerate(anns):
            d = math.hypot(det.x - ax, det.y - ay)
            if d < best_d:
                best_d, best_a = d, ai
        if best_a >= 0 and best_d <= radius_px:
            cands.append((best_d, best_a, di))
    cands.sort()

    used_a: set[int] = set()
    used_d: set[int] = set()
    tp: list[tuple[int, int]] = []
    for _d, ai, di in cands:
        if ai in used_a or di in used_d:
            continue
        used_a.add(ai)
        used_d.add(di)
        tp.append((di, ai))
    fp = [di for di in range(len(dets)) if di not in used_d]
    fn = [ai for ai in range(len(anns)) if ai not in used_a]
    return MatchResult(
        frame_id=detections.frame_id,
        tp=tp,
        fp=fp,
        fn=fn,
        detections=detections,
        annotations=annotations,
    )


def nn_density(annotations: AnnotationSet, calib: Calibration) -> list[DensityRecord]:
    """Nearest-neighbor distance (meters) and density for each annotation.

    Frames with fewer than two annotations produce no records; such
    annotations are binned into the sparsest bin downstream.
    """
    pts = np.asarray(annotations.points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        return []
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(d, np.inf)
    r_px = d.min(axis=1)
    out = []
    for i, r in enumerate(r_px):
        r_m = float(r) * calib.scale_mm_per_px / 1000.0
        out.append(
            DensityRecord(
                annotation_index=i, r_nn_m=r_m, rho_nn=1.0 / (math.pi * r_m * r_m)
            )
        )
    return out


def _bin_index(rho: float | None, edges: tuple[float, ...]) -> int:
    """Right-closed bins (lo, hi]; None (no density) and underflow go to bin
    0, overflow clamps to the top bin."""
    if rho is None:
        return 0
    for i in range(len(edges) - 1):
        if edges[i] < rho <= edges[i + 1]:
            return i
    return 0 if rho <= edges[0] else len(edges) - 2


def bin_and_score(
    result: MatchResult,
    densities: list[DensityRecord],
    bin_edges_rho: tuple[float, ...] = DEFAULT_BIN_EDGES_RHO,
    method: str | None = None,
) -> BinReport:
    """Count TP/FP/FN per density bin for one frame.

    Each item is assigned the density of its nearest annotation: a TP uses
    its matched annotation, an FN uses itself, an FP uses whatever annotation
    is closest to the detection (sparsest bin when the frame has none).
    """
    edges = tuple(bin_edges_rho)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ConfigError("bin edges must be strictly increasing")
    n = len(edges) - 1
    tp = np.zeros(n, dtype=np.int64)
    fp = np.zeros(n, dtype=np.int64)
    fn = np.zeros(n, dtype=np.int64)
    rho_of = {rec.annotation_index: rec.rho_nn for rec in densities}
    anns = result.annotations.points

    def nearest_ann_rho(x: float, y: float) -> float | None:
        best_d, best_a = math.inf, -1
        for ai, (ax, ay) in enumerate(anns):
            d = math.hypot(x - ax, y - ay)
            if d < best_d:
                best_d, best_a = d, ai
        return rho_of.get(best_a) if best_a >= 0 else None

    for di, ai in result.tp:
        tp[_bin_index(rho_of.get(ai), edges)] += 1
    for ai in result.fn:
        fn[_bin_index(rho_of.get(ai), edges)] += 1
    for di in result.fp:
        det = result.detections.detections[di]
        fp[_bin_index(nearest_ann_rho(det.x, det.y), edges)] += 1

    return BinReport(
        bin_edges_rho=edges, tp=tp, fp=fp, fn=fn,
        method=method or result.detections.method,
    )


def aggregate(reports: list[BinReport]) -> BinReport:
    """Sum counts across frames (never average per-frame scores)."""
    if not reports:
        raise ConfigError("nothing to aggregate")
    edges = reports[0].bin_edges_rho
    method = reports[0].method
    for r in reports:
        if r.bin_edges_rho != edges:
            raise ConfigError("cannot aggregate reports with different bins")
    return BinReport(
        bin_edges_rho=edges,
        tp=np.sum([r.tp for r in reports], axis=0),
        fp=np.sum([r.fp for r in reports], axis=0),
        fn=np.sum([r.fn for r in reports], axis=0),
        method=method,
    )


def evaluate_frames(
    detections: list[DetectionSet],
    annotations: dict[str, AnnotationSet],
    calibs: dict[str, Calibration],
    match_radius_mm: float = DEFAULT_MATCH_RADIUS_MM,
    bin_edges_rho: tuple[float, ...] = DEFAULT_BIN_EDGES_RHO,
) -> BinReport:
    """Match, bin, and aggregate a method's detections over many frames."""
    per_frame = []
    for ds in sorted(detections, key=lambda d: d.frame_id):
        ann = annotations.get(ds.frame_id)
        if ann is None:
            raise ConfigError(f"no annotations for frame {ds.frame_id!r}")
        calib = calibs[ds.frame_id]
        res = match(ds, ann, calib, match_radius_mm)
        dens = nn_density(ann, calib)
        per_frame.append(bin_and_score(res, dens, bin_edges_rho))
    return aggregate(per_frame)


def _rnn_bounds_m(lo_rho: float, hi_rho: float) -> tuple[float, float]:
    # higher density = smaller nearest-neighbor distance
    lo_rnn = 1.0 / math.sqrt(math.pi * hi_rho) if hi_rho > 0 else math.inf
    hi_rnn = 1.0 / math.sqrt(math.pi * lo_rho) if lo_rho > 0 else math.inf
    return lo_rnn, hi_rnn


def write_report_csv(
    reports: list[BinReport], path: str | Path, match_radius_mm: float
) -> None:
    """Delimited per-(bin, method) counts and scores.

    Undefined precision/recall/F cells are left empty rather than zeroed.
    The match radius is recorded in the header comment because it is the
    single most consequential evaluation parameter.
    """
    def fmt(v: float | None) -> str:
        return "" if v is None else f"{v:.6f}"

    lines = [
        f"# match_radius_mm={match_radius_mm:g}",
        "bin_lo_rho,bin_hi_rho,bin_lo_rnn_m,bin_hi_rnn_m,tp,fp,fn,"
        "precision,recall,fscore,method",
    ]
    for rep in reports:
        for i in range(rep.n_bins):
            lo, hi = rep.bin_edges_rho[i], rep.bin_edges_rho[i + 1]
            lo_rnn, hi_rnn = _rnn_bounds_m(lo, hi)
            lines.append(
                ",".join(
                    [
                        f"{lo:g}",
                        f"{hi:g}",
                        f"{lo_rnn:.4f}" if math.isfinite(lo_rnn) else "inf",
                        f"{hi_rnn:.4f}" if math.isfinite(hi_rnn) else "inf",
                        str(int(rep.tp[i])),
                        str(int(rep.fp[i])),
                        str(int(rep.fn[i])),
                        fmt(rep.precision(i)),
                        fmt(rep.recall(i)),
                        fmt(rep.fscore(i)),
                        rep.method,
                    ]
                )
            )
    Path(path).write_text("\n".join(lines) + "\n")


def write_plot_data(
    reports: list[BinReport], path: str | Path, match_radius_mm: float
) -> None:
    """Plot-ready JSON: bin centers plus score arrays per method."""
    out = {
        "match_radius_mm": match_radius_mm,
        "bin_edges_rho": list(reports[0].bin_edges_rho) if reports else [],
        "methods": {},
    }
    for rep in reports:
        centers = [
            (rep.bin_edges_rho[i] + rep.bin_edges_rho[i + 1]) / 2.0
            for i in range(rep.n_bins)
        ]
        out["methods"][rep.method] = {
            "bin_center_rho": centers,
            "tp": rep.tp.tolist(),
            "fp": rep.fp.tolist(),
            "fn": rep.fn.tolist(),
            "precision": [rep.precision(i) for i in range(rep.n_bins)],
            "recall": [rep.recall(i) for i in range(rep.n_bins)],
            "fscore": [rep.fscore(i) for i in range(rep.n_bins)],
        }
    Path(path).write_text(json.dumps(out, indent=2, sort_keys=True))


def render_fscore_figure(reports: list[BinReport], path: str | Path) -> None:
    """F-score vs density-bin figure alongside the delimited output."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    markers = {"hahog": "o", "hog": "s", "cluster": "^"}
    for rep in reports:
        xs, ys = [], []
        for i in range(rep.n_bins):
            f = rep.fscore(i)
            if f is None:
                continue
            xs.append((rep.bin_edges_rho[i] + rep.bin_edges_rho[i + 1]) / 2.0)
            ys.append(f)
        ax.plot(xs, ys, marker=markers.get(rep.method, "x"), label=rep.method)
    ax.set_xlabel(r"nearest-neighbor density $\rho_{nn}$ [ped/m$^2$]")
    ax.set_ylabel("F-score")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
