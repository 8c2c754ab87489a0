"""Multivariate functional group sparse regression."""

from ._core import (
    BasisSystem,
    ConfigError,
    CvResult,
    Dataset,
    FitResult,
    InputError,
    NumericalError,
    Scenario,
    admm_fit,
    cross_validate,
    elastic_soft_threshold,
    evaluate,
    fit_ols,
    fit_oracle,
    fit_ridge,
    generate,
    gmd_fit,
    load_model,
    make_bspline_basis,
    soft_threshold,
    true_coefficient,
)

__all__ = [name for name in dir() if not name.startswith("_")]
