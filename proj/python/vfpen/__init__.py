"""V-fold cross-validation and V-fold penalisation for CART and epsilon-SVR."""

from ._core import (
    ConfigError,
    Dataset,
    DatasetResolutionError,
    FoldPartition,
    ParseError,
    PruneSequence,
    Realisation,
    RegressionTree,
    SelectionError,
    ShapeError,
    SizeError,
    Subsample,
    SvrModel,
    alpha_values,
    cv_constant,
    dataset_registry,
    fit_learning_rate,
    fit_svr,
    generate_synthetic,
    grow_tree,
    load_csv,
    make_realisations,
    make_subsample,
    mean_absolute_error,
    paired_t_test,
    partition_folds,
    prune_sequence,
    rbf_kernel,
    run_experiment,
    select,
    standardize,
)

__all__ = [
    "ConfigError",
    "Dataset",
    "DatasetResolutionError",
    "FoldPartition",
    "ParseError",
    "PruneSequence",
    "Realisation",
    "RegressionTree",
    "SelectionError",
    "ShapeError",
    "SizeError",
    "Subsample",
    "SvrModel",
    "alpha_values",
    "cv_constant",
    "dataset_registry",
    "fit_learning_rate",
    "fit_svr",
    "generate_synthetic",
    "grow_tree",
    "load_csv",
    "make_realisations",
    "make_subsample",
    "mean_absolute_error",
    "paired_t_test",
    "partition_folds",
    "prune_sequence",
    "rbf_kernel",
    "run_experiment",
    "select",
    "standardize",
]
