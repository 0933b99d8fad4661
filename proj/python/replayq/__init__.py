"""Volume-ratio quality selection for compressed replay buffers."""

from ._core import (
    IoError,
    SyntheticConfig,
    ValidationError,
    class_mean,
    grid_search_synthetic,
    log_volume,
    pack_for_quality,
    rank_by_mean_of_feature,
    read_feature_matrix,
    run_cli,
    select_quality,
    select_synthetic,
    simulate_synthetic,
    volume_ratio,
    write_feature_matrix,
)

__all__ = [
    "IoError",
    "SyntheticConfig",
    "ValidationError",
    "class_mean",
    "grid_search_synthetic",
    "log_volume",
    "pack_for_quality",
    "rank_by_mean_of_feature",
    "read_feature_matrix",
    "run_cli",
    "select_quality",
    "select_synthetic",
    "simulate_synthetic",
    "volume_ratio",
    "write_feature_matrix",
]
