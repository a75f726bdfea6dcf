"""Labeled window datasets: extraction, augmentation, storage, training.

Samples are stored as raw height patches (not feature vectors) so a feature
configuration change never invalidates collected data.  The store is a plain
directory with per-label subfolders and a manifest whose counts always equal
the stored samples; writers serialize through a file lock and the manifest is
replaced atomically.
"""

from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from filelock import FileLock

from .depth import AnnotationSet, HeightField
from .detector import DetectionSet
from .errors import DataError, DimensionError
from .features import FeatureConfig, patch_features
from .mlp import MlpModel, TrainConfig, init_model, train

log = logging.getLogger(__name__)

PATCH_MAGIC = b"HPATCH01"

POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class NegativePolicy:
    """Where negative windows come from.

    Far negatives keep their center at least `far_min_px` from every
    annotation; near-miss negatives sit in the offset band that teaches the
    classifier "contains a pedestrian but is not centered on one".  Half of
    the far quota prefers windows with tall content when available, so walls
    and other raised structure end up represented in the negative class.
    """

    far_min_px: float
    near_band_px: tuple[float, float]
    near_per_annotation: int = 2
    quota_factor: float = 3.0
    content_min_mm: float = 800.0

    @classmethod
    def default(cls, fc: FeatureConfig) -> "NegativePolicy":
        return cls(
            far_min_px=float(fc.window_px),
            near_band_px=(float(fc.cell_size), fc.window_px / 2.0),
        )


@dataclass
class Sample:
    """One labeled window patch with its provenance."""

    sample_id: str
    patch_h: np.ndarray      # float32 heights, window_px x window_px
    patch_valid: np.ndarray  # bool
    label: str               # POSITIVE or NEGATIVE
    provenance: str          # synthetic | annotated | hard-mined
    frame_id: str
    origin: tuple[int, int]  # window origin in frame pixels
    rotation: int = 0

    def field(self) -> HeightField:
        return HeightField(
            width=self.patch_h.shape[1],
            height=self.patch_h.shape[0],
            h=self.patch_h.astype(np.float64),
            valid=self.patch_valid,
        )


@dataclass(frozen=True)
class AugmentConfig:
    rotations: tuple[int, ...] = (0, 1, 2, 3)
    noise_sigma_mm: float = 15.0

    @property
    def factor(self) -> int:
        return len(self.rotations)


def _snap(v: float, lattice: int) -> int:
    return int(round(v / lattice)) * lattice


def extract_samples(
    field_: HeightField,
    annotations: AnnotationSet,
    fc: FeatureConfig,
    policy: NegativePolicy,
    seed: int = 0,
    provenance: str = "synthetic",
) -> tuple[list[Sample], int]:
    """Positive and negative window patches for one annotated frame.

    Positives are windows centered on each annotation, snapped to the stride
    lattice; annotations too close to the border for a full window are
    skipped and counted.  Returns (samples, skipped_positives).
    """
    annotations.validate_bounds(field_.width, field_.height)
    rng = np.random.default_rng(seed)
    wpx = fc.window_px
    half = wpx // 2
    lat = fc.stride_px
    max_ox = field_.width - wpx
    max_oy = field_.height - wpx
    ann = np.asarray(annotations.points, dtype=np.float64).reshape(-1, 2)

    def cut(ox: int, oy: int) -> tuple[np.ndarray, np.ndarray]:
        return (
            field_.h[oy : oy + wpx, ox : ox + wpx].astype(np.float32),
            field_.valid[oy : oy + wpx, ox : ox + wpx].copy(),
        )

    def center_dists(cx: float, cy: float) -> np.ndarray:
        if ann.size == 0:
            return np.array([np.inf])
        return np.hypot(ann[:, 0] - cx, ann[:, 1] - cy)

    samples: list[Sample] = []
    skipped = 0
    for k, (axp, ayp) in enumerate(annotations.points):
        ox = _snap(axp - half, lat)
        oy = _snap(ayp - half, lat)
        if ox < 0 or oy < 0 or ox > max_ox or oy > max_oy:
            skipped += 1
            continue
        ph, pv = cut(ox, oy)
        samples.append(
            Sample(
                sample_id=f"{annotations.frame_id}-p{k}",
                patch_h=ph,
                patch_valid=pv,
                label=POSITIVE,
                provenance=provenance,
                frame_id=annotations.frame_id,
                origin=(ox, oy),
            )
        )
    n_pos = len(samples)

    # near-miss negatives: offset from an annotation, inside the band, and
    # not accidentally centered on any other annotation
    lo_b, hi_b = policy.near_band_px
    n_near = 0
    for k, (axp, ayp) in enumerate(annotations.points):
        made = 0
        for _ in range(50):
            if made >= policy.near_per_annotation:
                break
            r = rng.uniform(lo_b, hi_b)
            th = rng.uniform(0, 2 * np.pi)
            ox = _snap(axp + r * np.cos(th) - half, lat)
            oy = _snap(ayp + r * np.sin(th) - half, lat)
            if ox < 0 or oy < 0 or ox > max_ox or oy > max_oy:
                continue
            dmin = center_dists(ox + half, oy + half).min()
            if not (lo_b <= dmin <= hi_b):
                continue
            ph, pv = cut(ox, oy)
            samples.append(
                Sample(
                    sample_id=f"{annotations.frame_id}-n{k}.{made}",
                    patch_h=ph,
                    patch_valid=pv,
                    label=NEGATIVE,
                    provenance=provenance,
                    frame_id=annotations.frame_id,
                    origin=(ox, oy),
                )
            )
            made += 1
        n_near += made

    # far negatives fill the per-frame quota, preferring tall content for
    # half of them so distractor structure gets learned
    quota_far = max(0, int(round(policy.quota_factor * n_pos)) - n_near)
    if n_pos == 0:
        quota_far = max(quota_far, 8)
    ox_choices = np.arange(0, max_ox + 1, lat)
    oy_choices = np.arange(0, max_oy + 1, lat)
    far: list[tuple[int, int, float]] = []
    seen: set[tuple[int, int]] = set()
    for _ in range(quota_far * 30):
        if len(far) >= quota_far * 4:
            break
        ox = int(rng.choice(ox_choices))
        oy = int(rng.choice(oy_choices))
        if (ox, oy) in seen:
            continue
        if center_dists(ox + half, oy + half).min() < policy.far_min_px:
            continue
        seen.add((ox, oy))
        hmax = float(field_.h[oy : oy + wpx, ox : ox + wpx].max())
        far.append((ox, oy, hmax))
    tall = [f for f in far if f[2] >= policy.content_min_mm]
    flat = [f for f in far if f[2] < policy.content_min_mm]
    take = tall[: quota_far // 2] + flat[: quota_far - len(tall[: quota_far // 2])]
    if len(take) < quota_far:
        take = take + tall[quota_far // 2 :][: quota_far - len(take)]
    for m, (ox, oy, _h) in enumerate(take):
        ph, pv = cut(ox, oy)
        samples.append(
            Sample(
                sample_id=f"{annotations.frame_id}-f{m}",
                patch_h=ph,
                patch_valid=pv,
                label=NEGATIVE,
                provenance=provenance,
                frame_id=annotations.frame_id,
                origin=(ox, oy),
            )
        )
    return samples, skipped


def augment(sample: Sample, aug: AugmentConfig, seed: int = 0) -> list[Sample]:
    """Right-angle rotations with optional seeded height noise.

    Noise is added to valid pixels only and heights are clamped at the floor;
    invalid pixels are never touched.  Labels and provenance are preserved,
    and rotation 0 with zero sigma reproduces the input patch exactly.
    """
    if sample.patch_h.shape[0] != sample.patch_h.shape[1]:
        raise DimensionError("augmentation requires a square patch")
    rng = np.random.default_rng(seed)
    out: list[Sample] = []
    for k in aug.rotations:
        ph = np.rot90(sample.patch_h, k).copy()
        pv = np.rot90(sample.patch_valid, k).copy()
        if aug.noise_sigma_mm > 0:
            noise = rng.normal(0.0, aug.noise_sigma_mm, ph.shape).astype(np.float32)
            ph[pv] += noise[pv]
            np.clip(ph, 0.0, None, out=ph)
        out.append(
            Sample(
                sample_id=f"{sample.sample_id}-r{k}",
                patch_h=ph,
                patch_valid=pv,
                label=sample.label,
                provenance=sample.provenance,
                frame_id=sample.frame_id,
                origin=sample.origin,
                rotation=k,
            )
        )
    return out


def _write_patch(path: Path, h: np.ndarray, valid: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(PATCH_MAGIC)
        f.write(struct.pack("<HH", h.shape[1], h.shape[0]))
        f.write(np.ascontiguousarray(h, dtype="<f4").tobytes())
        f.write(np.packbits(valid).tobytes())


def _read_patch(path: Path) -> tuple[np.ndarray, np.ndarray]:
    raw = path.read_bytes()
    if not raw.startswith(PATCH_MAGIC):
        raise DataError(f"{path}: bad patch magic")
    w, hgt = struct.unpack_from("<HH", raw, len(PATCH_MAGIC))
    off = len(PATCH_MAGIC) + 4
    n = w * hgt
    h = np.frombuffer(raw, dtype="<f4", count=n, offset=off).reshape(hgt, w)
    off += 4 * n
    bits = np.frombuffer(raw, dtype=np.uint8, offset=off)
    valid = np.unpackbits(bits, count=n).astype(bool).reshape(hgt, w)
    return h.astype(np.float32), valid


class DatasetStore:
    """On-disk sample store: store/{positive,negative}/<id>.bin + manifest."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / POSITIVE).mkdir(parents=True, exist_ok=True)
        (self.root / NEGATIVE).mkdir(parents=True, exist_ok=True)
        self._lock = FileLock(str(self.root / ".store.lock"))
        if not self.manifest_path.exists():
            self._write_manifest({"samples": [], "counts": {}})

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def _write_manifest(self, manifest: dict) -> None:
        tmp = self.manifest_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(manifest, indent=1, sort_keys=True))
        os.replace(tmp, self.manifest_path)

    def manifest(self) -> dict:
        return json.loads(self.manifest_path.read_text())

    def counts(self) -> dict[str, int]:
        m = self.manifest()
        out = {POSITIVE: 0, NEGATIVE: 0}
        for rec in m["samples"]:
            out[rec["label"]] += 1
        return out

    def counts_by_provenance(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for rec in self.manifest()["samples"]:
            by = out.setdefault(rec["provenance"], {POSITIVE: 0, NEGATIVE: 0})
            by[rec["label"]] += 1
        return out

    def add_samples(self, samples: list[Sample]) -> int:
        """Persist samples and update the manifest atomically; skips ids that
        already exist (re-ingest of the same windows is a no-op)."""
        with self._lock:
            manifest = self.manifest()
            known = {rec["id"] for rec in manifest["samples"]}
            added = 0
            for s in samples:
                if s.sample_id in known:
                    continue
                rel = f"{s.label}/{s.sample_id}.bin"
                _write_patch(self.root / rel, s.patch_h, s.patch_valid)
                manifest["samples"].append(
                    {
                        "id": s.sample_id,
                        "label": s.label,
                        "provenance": s.provenance,
                        "frame_id": s.frame_id,
                        "origin": list(s.origin),
                        "rotation": s.rotation,
                        "path": rel,
                    }
                )
                known.add(s.sample_id)
                added += 1
            manifest["counts"] = {
                POSITIVE: sum(1 for r in manifest["samples"] if r["label"] == POSITIVE),
                NEGATIVE: sum(1 for r in manifest["samples"] if r["label"] == NEGATIVE),
            }
            self._write_manifest(manifest)
            return added

    def recount(self) -> dict[str, int]:
        """Count .bin files on disk, independently of the manifest."""
        return {
            POSITIVE: len(list((self.root / POSITIVE).glob("*.bin"))),
            NEGATIVE: len(list((self.root / NEGATIVE).glob("*.bin"))),
        }

    def load_sample(self, rec: dict) -> Sample:
        h, valid = _read_patch(self.root / rec["path"])
        return Sample(
            sample_id=rec["id"],
            patch_h=h,
            patch_valid=valid,
            label=rec["label"],
            provenance=rec["provenance"],
            frame_id=rec["frame_id"],
            origin=tuple(rec["origin"]),
            rotation=rec.get("rotation", 0),
        )

    def iter_samples(self):
        for rec in self.manifest()["samples"]:
            yield self.load_sample(rec)


def ingest_hard_mined(
    store: DatasetStore,
    field_: HeightField,
    detections: DetectionSet,
    judgments: dict[int, str],
    missed: list[tuple[int, int]],
    fc: FeatureConfig,
) -> dict[str, int]:
    """Feed reviewed detections back into the store.

    Detections judged false-positive become negative samples at their window;
    reviewer-added missed positions become positives.  Detections judged
    correct produce no sample (the point of the loop is targeting mistakes).
    Returns counts {positives, negatives, skipped}.
    """
    wpx = fc.window_px
    half = wpx // 2
    lat = fc.stride_px
    max_o = (field_.width - wpx, field_.height - wpx)
    new: list[Sample] = []
    skipped = 0

    for idx, judgment in sorted(judgments.items()):
        if idx < 0 or idx >= len(detections.detections):
            raise DataError(f"verdict references unknown detection id {idx}")
        if judgment != "false-positive":
            continue
        det = detections.detections[idx]
        ox, oy = _snap(det.x - half, lat), _snap(det.y - half, lat)
        if ox < 0 or oy < 0 or ox > max_o[0] or oy > max_o[1]:
            skipped += 1
            continue
        new.append(
            Sample(
                sample_id=f"{detections.frame_id}-mined-fp{idx}",
                patch_h=field_.h[oy : oy + wpx, ox : ox + wpx].astype(np.float32),
                patch_valid=field_.valid[oy : oy + wpx, ox : ox + wpx].copy(),
                label=NEGATIVE,
                provenance="hard-mined",
                frame_id=detections.frame_id,
                origin=(ox, oy),
            )
        )

    for m, (mx, my) in enumerate(missed):
        ox, oy = _snap(mx - half, lat), _snap(my - half, lat)
        if ox < 0 or oy < 0 or ox > max_o[0] or oy > max_o[1]:
            skipped += 1
            continue
        new.append(
            Sample(
                sample_id=f"{detections.frame_id}-mined-miss{m}-{mx}x{my}",
                patch_h=field_.h[oy : oy + wpx, ox : ox + wpx].astype(np.float32),
                patch_valid=field_.valid[oy : oy + wpx, ox : ox + wpx].copy(),
                label=POSITIVE,
                provenance="hard-mined",
                frame_id=detections.frame_id,
                origin=(ox, oy),
            )
        )

    store.add_samples(new)
    return {
        "positives": sum(1 for s in new if s.label == POSITIVE),
        "negatives": sum(1 for s in new if s.label == NEGATIVE),
        "skipped": skipped,
    }


@dataclass
class TrainReport:
    model: MlpModel
    loss_history: list[float]
    holdout_accuracy: float
    n_train: int
    n_holdout: int


def run_training(
    store: DatasetStore,
    fc: FeatureConfig,
    cfg: TrainConfig,
    hidden: tuple[int, ...] = (64, 16),
    holdout_fraction: float = 0.1,
) -> TrainReport:
    """Compute features for every stored sample and train the classifier.

    The held-out split measures plain classification accuracy at the 0.5
    decision point; it is logged, returned, and never used for fitting.
    """
    records = store.manifest()["samples"]
    labels = np.array([1.0 if r["label"] == POSITIVE else 0.0 for r in records])
    if len(records) == 0 or labels.min() == labels.max():
        raise DataError("store must contain samples of both classes")

    feats = np.empty((len(records), fc.feature_len))
    for i, rec in enumerate(records):
        feats[i] = patch_features(store.load_sample(rec).field(), fc)
    if not np.isfinite(feats).all():
        raise DataError("non-finite features in training data")

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(records))
    n_hold = int(len(records) * holdout_fraction)
    hold, fit = perm[:n_hold], perm[n_hold:]
    if labels[fit].min() == labels[fit].max():
        raise DataError("training split lost one class; lower holdout_fraction")

    model = init_model([fc.feature_len, *hidden, 1], seed=cfg.seed, feature_config=fc)
    model, history = train(model, feats[fit], labels[fit], cfg)

    if n_hold:
        from .mlp import forward

        pred = np.asarray(forward(model, feats[hold])) >= 0.5
        acc = float(np.mean(pred == (labels[hold] == 1.0)))
    else:
        acc = float("nan")
    log.info(
        "trained on %d samples (%d held out, accuracy %.4f), final loss %.5f",
        len(fit), n_hold, acc, history[-1] if history else float("nan"),
    )
    return TrainReport(
        model=model,
        loss_history=history,
        holdout_accuracy=acc,
        n_train=len(fit),
        n_holdout=n_hold,
    )


def build_dataset(
    store: DatasetStore,
    fields: list[tuple[HeightField, AnnotationSet]],
    fc: FeatureConfig,
    aug: AugmentConfig | None,
    seed: int = 0,
    provenance: str = "synthetic",
) -> dict[str, int]:
    """Extract, optionally augment, and persist samples for many frames."""
    policy = NegativePolicy.default(fc)
    total_skipped = 0
    all_samples: list[Sample] = []
    root = np.random.SeedSequence(seed)
    for (field_, ann), ss in zip(fields, root.spawn(max(1, len(fields)))):
        child = np.random.default_rng(ss)
        samples, skipped = extract_samples(
            field_, ann, fc, policy,
            seed=int(child.integers(2**63)), provenance=provenance,
        )
        total_skipped += skipped
        if aug is None:
            all_samples.extend(samples)
        else:
            for s in samples:
                all_samples.extend(
                    augment(s, aug, seed=int(child.integers(2**63)))
                )
    added = store.add_samples(all_samples)
    log.info(
        "dataset build: %d samples added (%d positives skipped at borders)",
        added, total_skipped,
    )
    counts = store.counts()
    counts["skipped_positives"] = total_skipped
    return counts
