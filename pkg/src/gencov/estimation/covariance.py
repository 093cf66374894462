"""Covariance estimates from (possibly zero-filled) binary and discrete data."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import DimensionMismatch, InvalidRho
from ..sampling import Dataset

__all__ = [
    "CovarianceEstimate",
    "RegressionPair",
    "FeatureMoments",
    "sample_covariance",
    "corrected_covariance_missing",
    "nodewise_pair",
    "empirical_correlation",
    "correlation_matrix",
    "MissingDataCovariance",
]


def _check_rho(rho):
    if not 0.0 <= rho < 1.0:
        raise InvalidRho(f"rho must lie in [0, 1), got {rho}")


@dataclass
class CovarianceEstimate:
    matrix: np.ndarray
    provenance: str
    n: int
    degenerate: bool = False


def sample_covariance(x):
    """``X'X / n - xbar xbar'`` (the 1/n normalization)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    mean = x.sum(axis=0) / n
    return (x.T @ x) / n - np.outer(mean, mean)


def corrected_covariance_missing(z, rho):
    """Bias-corrected covariance of zero-filled observations.

    Each entry of ``z`` was erased independently with probability ``rho``
    and replaced by zero. Second moments are divided elementwise by a matrix
    with ``1 - rho`` on the diagonal and ``(1 - rho)**2`` off it; the mean
    term is scaled by ``(1 - rho)**-2``. With ``rho = 0`` the result equals
    :func:`sample_covariance` bit for bit.
    """
    _check_rho(rho)
    if isinstance(z, Dataset):
        z = z.values
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[0] == 0:
        raise DimensionMismatch("need a nonempty (n, p) array")
    n, p = z.shape
    keep = 1.0 - rho
    m = np.full((p, p), keep * keep)
    np.fill_diagonal(m, keep)
    mean = z.sum(axis=0) / n
    sigma = (z.T @ z) / n / m - np.outer(mean, mean) * (1.0 / keep**2)
    provenance = "standard" if rho == 0 else f"missing_corrected({rho:g})"
    return CovarianceEstimate(sigma, provenance, n, degenerate=n <= 1 or np.linalg.matrix_rank(z) <= 1)


class FeatureMoments:
    """Moments of product features ``prod_{v in A} x_v`` from weighted rows.

    With ``rho > 0`` the rows are zero-filled observations and a product
    over ``A`` survives only when every vertex of ``A`` was observed, so the
    moment of a feature set ``U`` is divided by ``(1 - rho)**len(U)``.

    Population moments come from :meth:`from_distribution`, which weights
    every configuration by its probability.
    """

    def __init__(self, values, weights=None, rho=0.0):
        _check_rho(rho)
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 2:
            raise DimensionMismatch("values must be a 2-d array")
        n = self.values.shape[0]
        if weights is None:
            self.weights = np.full(n, 1.0 / n) if n else np.zeros(0)
            self.n = n
        else:
            w = np.asarray(weights, dtype=float)
            self.weights = w / w.sum()
            self.n = np.inf
        self.rho = float(rho)

    @classmethod
    def from_distribution(cls, dist):
        return cls(dist.configurations(), dist.flat)

    @classmethod
    def coerce(cls, data, rho=None):
        if isinstance(data, FeatureMoments):
            return data
        if isinstance(data, Dataset):
            return cls(data.values, rho=data.rho if rho is None else rho)
        return cls(data, rho=rho or 0.0)

    @property
    def p(self):
        return self.values.shape[1]

    def features(self, sets):
        cols = [np.prod(self.values[:, list(a)], axis=1) for a in sets]
        return np.column_stack(cols) if cols else np.zeros((self.values.shape[0], 0))

    def covariance(self, sets):
        """Corrected covariance matrix of the product features ``sets``."""
        sets = [tuple(a) for a in sets]
        if sets and all(len(a) == 1 for a in sets):
            # nodewise fits ask for many singleton slices; compute the full matrix once
            if getattr(self, "_vertex_cov", None) is None:
                self._vertex_cov = self._covariance([(v,) for v in range(self.p)])
            idx = [a[0] for a in sets]
            return self._vertex_cov[np.ix_(idx, idx)]
        return self._covariance(sets)

    def _covariance(self, sets):
        f = self.features(sets)
        w = self.weights
        second = (f * w[:, None]).T @ f
        mean = w @ f
        if self.rho > 0:
            keep = 1.0 - self.rho
            member = np.zeros((len(sets), self.p))
            for i, a in enumerate(sets):
                member[i, list(a)] = 1.0
            sizes = member.sum(axis=1)
            union = sizes[:, None] + sizes[None, :] - member @ member.T
            second = second / keep**union
            mean = mean / keep**sizes
        cov = second - np.outer(mean, mean)
        return (cov + cov.T) / 2


@dataclass
class RegressionPair:
    """Predictor covariance ``gram``, predictor-target covariance ``cross``.

    ``labels[i]`` is the vertex tuple whose product forms predictor ``i``.
    """

    gram: np.ndarray
    cross: np.ndarray
    labels: list
    singular: bool = False

    def __post_init__(self):
        k = len(self.labels)
        if self.gram.shape != (k, k) or self.cross.shape != (k,):
            raise DimensionMismatch("gram, cross and labels disagree in size")
        if len(set(self.labels)) != k:
            raise DimensionMismatch("feature labels must be unique")


def nodewise_pair(data, s, features=None, rho=None):
    """Recentered estimators for regressing ``x_s`` on product features.

    Parameters
    ----------
    data : Dataset, array or FeatureMoments
    s : int
        Target column; it may not appear in any feature.
    features : list of vertex tuples
        Defaults to the singletons of the other vertices.
    rho : float
        Erasure probability for zero-filled arrays; a Dataset carries its own.
    """
    moments = FeatureMoments.coerce(data, rho)
    p = moments.p
    if not 0 <= s < p:
        raise DimensionMismatch(f"target {s} outside 0..{p - 1}")
    if features is None:
        features = [(t,) for t in range(p) if t != s]
    features = [tuple(sorted(a)) for a in features]
    if any(s in a for a in features):
        raise DimensionMismatch("the target may not appear among the predictors")
    cov = moments.covariance(features + [(s,)])
    k = len(features)
    gram, cross = cov[:k, :k], cov[:k, k]
    diag = np.diag(gram)
    singular = bool(k and (diag.min() <= 1e-12 or np.linalg.eigvalsh(gram)[0] <= 1e-12 * max(1.0, diag.max())))
    return RegressionPair(gram, cross, features, singular)


def empirical_correlation(data, s, t, m=None):
    """Sum over value pairs of ``|P(x_s, x_t) - P(x_s) P(x_t)|``; lies in [0, 2]."""
    if isinstance(data, Dataset):
        m = data.m if m is None else m
        data = data.values
    x = np.asarray(data, dtype=np.int64)
    m = int(x.max()) + 1 if m is None else m
    m = max(m, 2)
    n = x.shape[0]
    joint = np.bincount(x[:, s] * m + x[:, t], minlength=m * m).reshape(m, m) / n
    return float(np.abs(joint - np.outer(joint.sum(axis=1), joint.sum(axis=0))).sum())


def correlation_matrix(data, rho=0.0, m=None):
    """All pairwise nodewise correlations.

    For binary data the correlation equals ``4 |cov(x_s, x_t)|``, which lets
    zero-filled data use the corrected covariance instead of the raw counts.
    """
    if isinstance(data, Dataset):
        rho = data.rho if data.mask is not None else rho
        m = data.m
        data = data.values
    x = np.asarray(data, dtype=np.int64)
    p = x.shape[1]
    m = m if m is not None else max(2, int(x.max()) + 1)
    if m == 2:
        r = 4.0 * np.abs(corrected_covariance_missing(x, rho).matrix)
    else:
        r = np.zeros((p, p))
        for s, t in itertools.combinations(range(p), 2):
            r[s, t] = r[t, s] = empirical_correlation(x, s, t, m)
    np.fill_diagonal(r, 0.0)
    return r


class MissingDataCovariance(BaseEstimator):
    """Covariance estimator for zero-filled data with erasure probability ``rho``.

    Attributes
    ----------
    covariance_ : ndarray of shape (p, p)
    location_ : ndarray of shape (p,)
        Corrected mean ``zbar / (1 - rho)``.
    degenerate_ : bool
    """

    def __init__(self, rho=0.0):
        self.rho = rho

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        est = corrected_covariance_missing(X, self.rho)
        self.covariance_ = est.matrix
        self.location_ = X.mean(axis=0) / (1.0 - self.rho)
        self.degenerate_ = est.degenerate
        self.n_features_in_ = X.shape[1]
        return self

    def score(self, X, y=None):
        """Negative max-norm distance between fitted and held-out covariance."""
        check_is_fitted(self)
        other = corrected_covariance_missing(check_array(X, dtype=float), self.rho).matrix
        return -float(np.abs(other - self.covariance_).max())
