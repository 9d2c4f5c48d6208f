"""Python bindings for the coal domain adaptation lab."""

from ._core import (
    CoalError,
    ConfigError,
    ConsistencyError,
    DimensionError,
    DivergenceError,
    EstimationError,
    FormatError,
    IndexError,
    IoError,
    LengthError,
    MetricError,
    Model,
    NormalizationError,
    ProtocolError,
    SamplerError,
    TableError,
    UsageError,
    adaptive_objective,
    advance_k,
    confusion_matrix,
    entropy_naive,
    generate_twin_domains,
    js_distance,
    js_label_bound,
    load_checkpoint,
    pareto_proportions,
    per_class_mean_accuracy,
    project_features_2d,
    render_table,
    rounding_js_bound,
    run_experiment,
    save_checkpoint,
    select_top_k,
    selection_quota,
    shift_counts,
)

__all__ = [name for name in dir() if not name.startswith("_") and name != "IndexError"]
