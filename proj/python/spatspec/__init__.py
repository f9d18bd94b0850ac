"""Series-based specification tests for regressions with spatially dependent errors."""

import json

import numpy as np

from . import _spatspec
from ._spatspec import DataError, RankDeficientDesign, SingularCovariance, StageError

__all__ = [
    "DataError",
    "RankDeficientDesign",
    "SingularCovariance",
    "StageError",
    "covariance",
    "design",
    "fit",
    "knn_weights",
    "simulate",
    "test",
]

_DEFAULT_BASIS = {"family": "power", "degree": 3}


def _dense_list(weights):
    if weights is None:
        return []
    if isinstance(weights, np.ndarray) and weights.ndim == 2:
        weights = [weights]
    return [np.asarray(w, dtype=float) for w in weights]


def _vector(y):
    return np.asarray(y, dtype=float).reshape(-1)


def _matrix(x):
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, 1) if x.ndim == 1 else x


def knn_weights(coords, k, row_normalize=True):
    """Dense k-nearest-neighbour weight matrix from planar coordinates."""
    return _spatspec.knn_weights(_matrix(coords), int(k), bool(row_normalize))


def design(x, basis=None):
    """Series design matrix for `basis` (a dict such as {"family": "power", "degree": 3})."""
    return _spatspec.design(_matrix(x), json.dumps(basis or _DEFAULT_BASIS))


def covariance(family, gamma, weights, ma_weights=None):
    """Dense Sigma(gamma) for an sem, sma, sarma or mess family."""
    return _spatspec.covariance(family, _vector(gamma), _dense_list(weights), _dense_list(ma_weights))


def fit(y, x, weights=None, family="sem", basis=None, ma_weights=None, sar_weights=None):
    """Profile QMLE of the series alternative; returns a dict."""
    out = _spatspec.fit(_vector(y), _matrix(x), family, _dense_list(weights), _dense_list(ma_weights),
                        _dense_list(sar_weights), json.dumps(basis or _DEFAULT_BASIS))
    return json.loads(out)


def test(y, x, weights=None, family="sem", basis=None, null="linear", boot=0, seed=1, threads=1,
         ma_weights=None, sar_weights=None):
    """Specification test of a parametric null; returns a dict with t_n, t_n_a, p-values and fits."""
    out = _spatspec.test(_vector(y), _matrix(x), family, _dense_list(weights), _dense_list(ma_weights),
                         _dense_list(sar_weights), json.dumps(basis or _DEFAULT_BASIS), null, int(boot),
                         int(seed), int(threads))
    return json.loads(out)


def simulate(design, threads=1):
    """Monte Carlo rejection table; returns (csv_text, sidecar_dict)."""
    csv, sidecar = _spatspec.simulate(json.dumps(design), int(threads))
    return csv, json.loads(sidecar)
