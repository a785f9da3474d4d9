"""Exploratory statistics: correlation, PCA, OLS inference and Q-Q data."""

from .analysis import (CorrelationMatrix, PcaResult, RegressionResult, ols_fit, ols_regress,
                       pca, pearson_matrix, pearson_r, qq_csv, qq_data)
from .eigen import jacobi_eigh
from .special import betainc, norm_cdf, norm_ppf, t_cdf, t_two_sided_p

__all__ = [
    "CorrelationMatrix", "PcaResult", "RegressionResult", "betainc", "jacobi_eigh", "norm_cdf",
    "norm_ppf", "ols_fit", "ols_regress", "pca", "pearson_matrix", "pearson_r", "qq_csv",
    "qq_data", "t_cdf", "t_two_sided_p",
]
