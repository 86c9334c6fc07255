"""Bank segmentation by regression trees over rescaled CAMELS proxies."""

from ._core import (
    ConfigError,
    DegenerateError,
    DomainError,
    EmptyModelError,
    EmptySubsampleError,
    Error,
    IoError,
    ParseError,
    SchemaError,
    Tree,
    UniquenessError,
    cv_prune_tree,
    forest_importance,
    grow_tree,
    kolmogorov_q,
    ks_two_sample,
    pearson,
    quantile_rescale,
    run_study,
    synthetic_panel_csv,
    threshold_rescale,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
