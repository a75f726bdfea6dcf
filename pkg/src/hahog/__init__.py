"""Trainable pedestrian localization for overhead depth images.

The pipeline: convert a depth raster to a height-above-floor field, slide a
fixed window over it, describe each window by per-cell orientation histograms
plus a window height histogram, score windows with a small trained
classifier, and reduce thresholded candidates to pedestrian locations with
non-maximum suppression.  A clustering baseline, a synthetic scene generator,
a density-binned evaluation harness, and an expert review service round out
the toolkit.
"""

__version__ = "0.1.0"

from .depth import (
    AnnotationSet,
    Calibration,
    DepthFrame,
    HeightField,
    load_annotations,
    load_calibration,
    load_frame,
    save_annotations,
    save_frame,
    to_height_field,
)
from .features import (
    CellGrid,
    FeatureConfig,
    GradientField,
    WindowSpec,
    cell_histograms,
    compute_gradient,
    frame_descriptors,
    hahog,
    height_histogram,
    patch_features,
    precompute_frame_cells,
    to_polar,
    window_descriptor,
)
from .mlp import (
    MlpModel,
    TrainConfig,
    forward,
    grad_check,
    init_model,
    load_model,
    save_model,
    train,
)
from .detector import (
    Candidate,
    DetectionSet,
    DetectorConfig,
    ScoreMap,
    detect,
    load_detections,
    nms,
    save_detections,
    score_windows,
    threshold_candidates,
)
from .cluster import (
    ClusterConfig,
    cluster_detections,
    complete_linkage,
    detect_cluster,
    foreground,
)
from .synth import SceneConfig, SyntheticScene, generate_corpus, generate_scene
from .training import (
    AugmentConfig,
    DatasetStore,
    NegativePolicy,
    Sample,
    augment,
    build_dataset,
    extract_samples,
    ingest_hard_mined,
    run_training,
)
from .evaluation import (
    BinReport,
    DensityRecord,
    MatchResult,
    aggregate,
    bin_and_score,
    evaluate_frames,
    match,
    nn_density,
)
