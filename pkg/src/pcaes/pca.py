"""PCA on elite solutions and the maps between full and reduced coordinates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateData, DimensionMismatch, DimensionTooSmallForPca
from .numerics import eig_sym, symmetrize

DEFAULT_TAU = 0.95
RANK_TOL = 1e-12


@dataclass(frozen=True)
class VarianceSpectrum:
    eigenvalues: np.ndarray
    cumulative: np.ndarray


@dataclass(frozen=True)
class ProjectionMap:
    p: np.ndarray  # (k, n), orthonormal rows
    center: np.ndarray
    explained: np.ndarray
    spectrum: VarianceSpectrum

    @property
    def k(self) -> int:
        return self.p.shape[0]

    @property
    def n(self) -> int:
        return self.p.shape[1]


def _canonical_signs(rows: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each row made positive (first one on ties)
    idx = np.argmax(np.abs(rows), axis=1)
    signs = np.sign(rows[np.arange(len(rows)), idx])
    signs[signs == 0] = 1.0
    return rows * signs[:, None]


def choose_k(spectrum: VarianceSpectrum, n: int, k: int | None = None, tau: float | None = None) -> int:
    """Retained dimension: a fixed ``k`` clamped to [1, n-1], or the smallest k
    reaching cumulative fraction ``tau`` clamped to [2, n-1]; never above the
    numerical rank of the data."""
    if k is not None and tau is not None:
        raise ValueError("give either k or tau, not both")
    values = spectrum.eigenvalues
    rank = int(np.sum(values > RANK_TOL * values[0]))
    if k is not None:
        chosen = min(max(int(k), 1), n - 1)
    else:
        tau = DEFAULT_TAU if tau is None else tau
        chosen = int(np.searchsorted(spectrum.cumulative, tau - 1e-15)) + 1
        chosen = min(max(chosen, 2), n - 1)
    return max(1, min(chosen, rank))


def fit_pca(points, k: int | None = None, tau: float | None = None) -> ProjectionMap:
    """Center ``points`` (rows), eigendecompose their covariance (divisor = count)
    and keep the leading directions as the rows of ``p``."""
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DegenerateData("need at least two points")
    n = x.shape[1]
    if n < 3:
        raise DimensionTooSmallForPca(f"PCA needs dimension >= 3, got {n}")
    center = x.mean(axis=0)
    xc = x - center
    if not np.any(xc):
        raise DegenerateData("all points are identical")
    cov = xc.T @ xc / x.shape[0]
    eig = eig_sym(cov)
    values = np.maximum(eig.values, 0.0)
    total = values.sum()
    if total <= 0.0:
        raise DegenerateData("data has zero variance")
    spectrum = VarianceSpectrum(eigenvalues=values, cumulative=np.cumsum(values) / total)
    kk = choose_k(spectrum, n, k=k, tau=tau)
    p = _canonical_signs(eig.basis[:, :kk].T.copy())
    return ProjectionMap(p=p, center=center, explained=values[:kk] / total, spectrum=spectrum)


def _matrix(p) -> np.ndarray:
    return p.p if isinstance(p, ProjectionMap) else np.asarray(p, dtype=float)


def transform_covariance(c_old, p) -> np.ndarray:
    """Covariance of ``P x`` given the covariance of ``x``: ``P C P^T``."""
    pm = _matrix(p)
    c_old = np.asarray(c_old, dtype=float)
    if c_old.ndim != 2 or c_old.shape != (pm.shape[1], pm.shape[1]):
        raise DimensionMismatch(f"projection {pm.shape} vs covariance {c_old.shape}")
    return symmetrize(pm @ c_old @ pm.T)


def project(x, m: ProjectionMap) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.n:
        raise DimensionMismatch(f"vector length {x.shape[-1]} vs map dimension {m.n}")
    return (x - m.center) @ m.p.T


def back_map(y, m: ProjectionMap) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != m.k:
        raise DimensionMismatch(f"vector length {y.shape[-1]} vs reduced dimension {m.k}")
    return y @ m.p + m.center


def lift_displacement(y, m: ProjectionMap) -> np.ndarray:
    """``P^T y`` without the center: displacements are relative to the search mean."""
    return np.asarray(y, dtype=float) @ m.p
