"""Correlation, PCA, multiple regression and Q-Q data on fused tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientData, RankDeficient, ZeroVariance
from .eigen import jacobi_eigh
from .special import norm_ppf, t_two_sided_p


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    channels: tuple
    r: np.ndarray
    n_pairs: np.ndarray  # complete rows used for each pair

    def __getitem__(self, key) -> float:
        i, j = (self.channels.index(k) for k in key)
        return float(self.r[i, j])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["", *self.channels])
        for name, row in zip(self.channels, self.r):
            w.writerow([name, *(_fmt(v) for v in row)])
        return buf.getvalue()


def pearson_r(x, y) -> float:
    """Pearson correlation over rows where both are present."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = ~(np.isnan(x) | np.isnan(y))
    if ok.sum() < 2:
        raise InsufficientData(f"need >= 2 complete rows, got {int(ok.sum())}")
    dx = x[ok] - x[ok].mean()
    dy = y[ok] - y[ok].mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("constant column over the complete rows")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def pearson_matrix(table, channels=None) -> CorrelationMatrix:
    """Pairwise-complete Pearson correlation matrix."""
    channels = tuple(channels or table.channel_names)
    k = len(channels)
    r = np.eye(k)
    n = np.zeros((k, k), dtype=np.int64)
    cols = [table.column(c) for c in channels]
    for i in range(k):
        n[i, i] = int(np.sum(~np.isnan(cols[i])))
        if n[i, i] < 2:
            raise InsufficientData(f"{channels[i]}: fewer than 2 values")
        if np.nanmax(cols[i]) == np.nanmin(cols[i]):
            raise ZeroVariance(f"{channels[i]} is constant")
        for j in range(i + 1, k):
            try:
                r[i, j] = r[j, i] = pearson_r(cols[i], cols[j])
            except ZeroVariance as e:
                raise ZeroVariance(f"{channels[i]} / {channels[j]}: {e}") from None
            except InsufficientData as e:
                raise InsufficientData(f"{channels[i]} / {channels[j]}: {e}") from None
            n[i, j] = n[j, i] = int(np.sum(~(np.isnan(cols[i]) | np.isnan(cols[j]))))
    return CorrelationMatrix(channels, r, n)


def _complete_rows(table, names) -> np.ndarray:
    m = table.matrix(list(names))
    return m[~np.any(np.isnan(m), axis=1)]


@dataclass(frozen=True, eq=False)
class PcaResult:
    channels: tuple
    eigenvalues: np.ndarray
    explained_ratio: np.ndarray
    loadings: np.ndarray  # channels x components, orthonormal columns
    scores: np.ndarray  # rows x components
    contributions: np.ndarray  # squared loading x explained ratio
    mean: np.ndarray
    n_rows: int

    def to_dict(self) -> dict:
        return {
            "channels": list(self.channels),
            "n_rows": self.n_rows,
            "eigenvalues": self.eigenvalues.tolist(),
            "explained_ratio": self.explained_ratio.tolist(),
            "loadings": self.loadings.tolist(),
            "contributions": self.contributions.tolist(),
        }


def pca(table, channels=None) -> PcaResult:
    """Principal components of the covariance of the (already scaled) columns.

    Rows with any missing value are dropped. Components come in descending
    eigenvalue order; each loading column is signed so that its
    largest-magnitude entry is positive.
    """
    channels = tuple(channels or table.channel_names)
    x = _complete_rows(table, channels)
    n, k = x.shape
    if n < k + 1:
        raise InsufficientData(f"PCA on {k} channels needs >= {k + 1} complete rows, got {n}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    w, v = jacobi_eigh(cov)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    w = np.where(w < 0, 0.0, w)  # round-off on rank-deficient data
    total = float(w.sum())
    if total <= 0:
        raise ZeroVariance("all channels are constant over the complete rows")
    for c in range(k):
        i = int(np.argmax(np.abs(v[:, c])))
        if v[i, c] < 0:
            v[:, c] = -v[:, c]
    ratio = w / total
    return PcaResult(channels, w, ratio, v, xc @ v, v ** 2 * ratio, mean, n)


@dataclass(frozen=True, eq=False)
class RegressionResult:
    response: str
    predictors: tuple
    coefficients: np.ndarray  # intercept first
    standard_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    r_squared: float
    df_resid: int

    @property
    def terms(self) -> tuple:
        return ("Intercept", *self.predictors)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["", "Coefficients", "Standard Error", "t Stat", "P-value"])
        for row in zip(self.terms, self.coefficients, self.standard_errors,
                       self.t_stats, self.p_values):
            w.writerow([row[0], *(_fmt(v) for v in row[1:])])
        return buf.getvalue()

    def residuals_csv(self) -> str:
        lines = ["fitted,residual"]
        lines += [f"{_fmt(f)},{_fmt(r)}" for f, r in zip(self.fitted, self.residuals)]
        return "\n".join(lines) + "\n"


def ols_fit(x: np.ndarray, y: np.ndarray, response: str = "y", predictors=None) -> RegressionResult:
    """Multiple linear regression with an intercept on complete arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, p = x.shape
    predictors = tuple(predictors or (f"x{i + 1}" for i in range(p)))
    if n <= p + 1:
        raise InsufficientData(f"{p} predictors need more than {p + 1} complete rows, got {n}")
    design = np.column_stack([np.ones(n), x])
    q, r = np.linalg.qr(design)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise RankDeficient("design matrix is not full rank")
    beta = np.linalg.solve(r, q.T @ y)
    fitted = design @ beta
    resid = y - fitted
    dof = n - p - 1
    sigma2 = float(resid @ resid) / dof
    r_inv = np.linalg.solve(r, np.eye(p + 1))
    se = np.sqrt(sigma2 * np.sum(r_inv ** 2, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.sign(beta) * np.inf)
    t = np.where((se == 0) & (beta == 0), np.nan, t)
    pvals = np.array([t_two_sided_p(float(v), dof) for v in t])
    tss = float(np.sum((y - y.mean()) ** 2))
    rss = float(resid @ resid)
    r2 = 1.0 if tss == 0 else float(np.clip(1.0 - rss / tss, 0.0, 1.0))
    return RegressionResult(response, predictors, beta, se, t, pvals, resid, fitted, r2, dof)


def ols_regress(table, response: str, predictors) -> RegressionResult:
    """Regress one channel on others using rows where all are present.

    Standard errors come from sigma^2 (X'X)^-1 with sigma^2 = RSS / (n-p-1);
    p-values are two-sided under Student's t with n-p-1 degrees of freedom.
    """
    predictors = tuple(predictors)
    data = _complete_rows(table, (response, *predictors))
    return ols_fit(data[:, 1:], data[:, 0], response, predictors)


def qq_data(residuals) -> np.ndarray:
    """Normal Q-Q points as an (n, 2) array of (theoretical, sample) quantiles.

    Sample quantiles are the sorted values standardised to mean 0, sd 1;
    theoretical quantiles are the normal quantiles at (i - 0.5) / n.
    """
    r = np.asarray(residuals, dtype=float)
    r = r[~np.isnan(r)]
    n = r.size
    if n < 3:
        raise InsufficientData(f"Q-Q needs >= 3 values, got {n}")
    sd = r.std(ddof=1)
    if sd == 0:
        raise ZeroVariance("residuals are constant")
    sample = np.sort((r - r.mean()) / sd)
    theory = norm_ppf((np.arange(1, n + 1) - 0.5) / n)
    return np.column_stack([theory, sample])


def qq_csv(points: np.ndarray) -> str:
    lines = ["theoretical,sample"] + [f"{_fmt(a)},{_fmt(b)}" for a, b in points]
    return "\n".join(lines) + "\n"
