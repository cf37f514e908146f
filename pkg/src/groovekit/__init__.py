"""groovekit: V-groove weld seam detection and trajectory generation.

Pipeline: load or synthesize a surface cloud, MLS-smooth it, estimate
viewpoint-oriented normals, build the per-point angular variation map,
threshold and denoise it into a groove point set, and turn that set into an
ordered sequence of 6-DOF welding waypoints. The hot per-point kernels run
on a compiled core when available and fall back to vectorized numpy.
"""

from .cloud import (
    NeighborSet,
    ParseError,
    PointCloud,
    SpatialIndex,
    all_radius_neighbors,
    build_index,
    load_cloud,
    median_spacing,
    point3,
    radius_neighbors,
    read_index_file,
    save_cloud,
    unit_vector3,
    write_index_file,
)
from .config import PipelineConfig, load_config, parse_config, save_config
from .descriptor import (
    GrooveSet,
    VariationMap,
    VariationRecord,
    denoise_groove,
    descriptor_value,
    extract_groove,
    global_gfh,
    histogram_variance,
    local_gfh,
    otsu_threshold,
    pair_angle,
    variation_map,
)
from .evaluation import (
    DeviationStats,
    EvalReport,
    LabeledCloud,
    calibrate_threshold,
    evaluate_detection,
    overlap_counts,
    overlap_rate,
    time_pipeline,
    trajectory_deviation,
)
from .kernels import available_backends, backend_name, set_backend, use_backend
from .pipeline import PipelineResult, run_pipeline
from .preprocess import (
    Diagnostics,
    MlsParams,
    NormalParams,
    benchmark_normal,
    estimate_normals,
    mls_smooth,
)
from .synthgen import (
    ArcCurve,
    LineCurve,
    WorkpieceSample,
    WorkpieceSpec,
    generate_workpiece,
    reference_from_dict,
)
from .trajectory import (
    GdParams,
    GrooveDirection,
    GrooveTooShortError,
    NoDominantDirectionError,
    Segment,
    Trajectory,
    Waypoint,
    estimate_direction,
    generate_trajectory,
    orientation_to_euler,
    segment_groove,
    waypoint_orientation,
    waypoint_position,
    write_trajectory_ascii,
    write_trajectory_json,
)

__version__ = "0.1.0"
