"""Registration of broadcast football frames onto a top-view pitch model."""

from .dictionary import (
    DEFAULT_RASTER_SIZE,
    Dictionary,
    DictionaryEntry,
    PtzGrid,
    SeedAnnotation,
    build_dictionary,
    entry_from_quad,
    geometric_zooms,
    read_seed_file,
    seed_quad,
    simulate_pan,
    simulate_tilt,
    simulate_zoom,
    symmetric_steps,
    write_seed_file,
)
from .estimators import CameraPathSmoother, FieldRegistrar
from .evaluate import (
    EvalReport,
    GroundTruthRecord,
    apply_noise,
    evaluate,
    format_report_table,
    make_synthetic_testset,
    noise_sweep,
    perturbed_seed_annotations,
    synthetic_seed_annotations,
)
from .features import HogConfig, chamfer_score, check_edge_map, distance_transform, hog
from .geometry import (
    apply_homography,
    canonicalize,
    check_homography,
    check_quad,
    estimate_dlt,
    format_homography,
    invert_homography,
    parse_homography,
    polygon_iou,
    rect_quad,
    warp_quad,
)
from .matcher import Candidate, CandidateSet, knn_chamfer, knn_hog, register_frame
from .pitch import (
    Arc,
    PitchModel,
    Segment,
    load_pitch_file,
    render_camera_view,
    render_topview,
    standard_pitch,
    topview_homography,
)
from .preprocess import (
    PreprocessConfig,
    field_mask,
    load_frame,
    preprocess_frame,
    read_pbm,
    stroke_filtered_edges,
    write_pbm,
)
from .temporal import (
    CameraParams,
    SmoothingWeights,
    StatePath,
    camera_path_to_homographies,
    camera_to_quad,
    homography_distance,
    l1_trend_filter,
    mrf_objective,
    mrf_smooth,
    quad_to_camera,
    stabilize,
    trend_objective,
)

__version__ = "0.1.0"
