"""SAR back-projection imaging under inertial navigation errors."""

from .nav import (
    G0,
    NavError,
    NavState,
    Trajectory,
    TransitionMatrix,
    apply_corrections,
    correct_trajectory,
    corrupt_trajectory,
    cross_matrix,
    generate_level_trajectory,
    load_trajectory,
    propagate_error,
    save_trajectory,
    state_transition,
)
from .sim import (
    ImageGrid,
    PhaseHistory,
    RadarParams,
    SarImage,
    TargetOutOfWindowError,
    TargetScene,
    backproject,
    form_image_pair,
    load_image,
    save_image,
    simulate_phase_history,
)
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .dataset import (
    COMPONENTS,
    SCENARIO_TABLE,
    DatasetManifest,
    DegenerateImageError,
    SampleRecord,
    Scenario,
    build_dataset,
    load_manifest,
    load_split,
    make_input_tensor,
    mse_metric,
    preprocess_image,
    sample_errors,
    split_by_target,
    standardize_labels,
)
from .distortion import (
    DistortionMeasurement,
    RegistrationError,
    ShiftCalibration,
    baseline_estimate_scenario1,
    calibrate_shift_map,
    classify,
    measure,
    measure_blur,
    measure_shift,
    sensitivity_sweep,
    write_sweep_csv,
)

__version__ = "0.1.0"
