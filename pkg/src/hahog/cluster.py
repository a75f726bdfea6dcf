"""Clustering baseline: height-threshold foreground + complete linkage.

The classic localization approach: pixels above a height threshold form the
foreground, agglomerative complete-linkage clustering groups them, and the
cluster centroids are reported as pedestrian positions.  Foreground points
are grid-subsampled because naive complete linkage is cubic in point count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .depth import HeightField
from .detector import Candidate, DetectionSet
from .errors import ConfigError


@dataclass(frozen=True)
class ClusterConfig:
    h_min_mm: float = 1000.0
    linkage_cutoff_px: float = 70.0
    subsample_step: int = 3

    def __post_init__(self) -> None:
        if self.h_min_mm <= 0 or self.linkage_cutoff_px <= 0 or self.subsample_step <= 0:
            raise ConfigError("cluster parameters must be positive")


def foreground(
    field: HeightField, h_min_mm: float, subsample_step: int = 1
) -> np.ndarray:
    """Pixels (x, y) with valid height >= h_min_mm on the subsample lattice."""
    mask = field.valid & (field.h >= h_min_mm)
    lattice = np.zeros_like(mask)
    lattice[::subsample_step, ::subsample_step] = True
    ys, xs = np.nonzero(mask & lattice)
    return np.column_stack([xs, ys]).astype(np.float64)


def complete_linkage(points: np.ndarray, cutoff: float) -> list[list[int]]:
    """Agglomerative clustering under the maximum inter-point distance.

    Repeatedly merges the pair of clusters with the smallest complete-linkage
    distance while that distance is <= cutoff.  Ties break on the lowest
    cluster-index pair so results are deterministic.  Returns clusters as
    lists of input-point indices, ordered by smallest member index.
    """
    n = len(points)
    if n == 0:
        return []
    if n == 1:
        return [[0]]
    pts = np.asarray(points, dtype=np.float64)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(d, np.inf)
    members: dict[int, list[int]] = {i: [i] for i in range(n)}

    # Cluster labels are original row indices (merges keep the smaller label),
    # so a row-major argmin realizes the lowest-index-pair tie-break directly.
    while len(members) > 1:
        flat = int(np.argmin(d))
        i, j = divmod(flat, n)
        best = d[i, j]
        if not np.isfinite(best) or best > cutoff:
            break
        a, b = (i, j) if i < j else (j, i)
        # Lance-Williams update for complete linkage: d(k, a+b) = max
        merged_row = np.maximum(d[a], d[b])
        d[a, :] = merged_row
        d[:, a] = merged_row
        d[a, a] = np.inf
        d[b, :] = np.inf
        d[:, b] = np.inf
        members[a] = members[a] + members[b]
        del members[b]

    return [sorted(members[k]) for k in sorted(members)]


def cluster_detections(
    clusters: list[list[int]],
    points: np.ndarray,
    frame_id: str = "",
) -> DetectionSet:
    """Cluster centroids as detections; clustering yields no score, so 1.0."""
    dets = []
    for cl in clusters:
        c = np.asarray(points)[cl].mean(axis=0)
        dets.append(Candidate(x=int(round(c[0])), y=int(round(c[1])), alpha=1.0))
    return DetectionSet(frame_id=frame_id, detections=dets, method="cluster")


def detect_cluster(
    field: HeightField, cfg: ClusterConfig, frame_id: str = ""
) -> DetectionSet:
    pts = foreground(field, cfg.h_min_mm, cfg.subsample_step)
    clusters = complete_linkage(pts, cfg.linkage_cutoff_px)
    return cluster_detections(clusters, pts, frame_id=frame_id)
