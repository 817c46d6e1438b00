"""Linear-algebra and random-sampling substrate.

Everything here is a pure function of its inputs. Symmetric eigenproblems are
solved with cyclic Jacobi rotations (compiled with numba); random streams are
Philox4x64 counters keyed by ``(seed, stream_id)``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from .errors import DimensionMismatch, InvalidMatrix

JACOBI_MAX_SWEEPS = 100
_MASK64 = (1 << 64) - 1


class EigenDecomposition(NamedTuple):
    basis: np.ndarray  # columns are eigenvectors
    values: np.ndarray  # descending


@numba.njit(cache=True)
def _jacobi(a, v, max_sweeps):
    n = a.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    if scale == 0.0:
        return 0
    tol = (2.220446049250313e-16 ** 2) * scale
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        if off <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return max_sweeps


def symmetrize(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return (m + m.T) / 2.0


def _check_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidMatrix(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix("matrix has non-finite entries")
    return m


def eig_sym(m) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    The input is symmetrized as ``(m + m.T) / 2`` before rotating, so slightly
    asymmetric round-off is tolerated.
    """
    m = _check_square(m)
    a = np.ascontiguousarray(symmetrize(m))
    v = np.eye(a.shape[0])
    _jacobi(a, v, JACOBI_MAX_SWEEPS)
    values = np.diag(a).copy()
    # stable sort on -values keeps ties in their original order
    order = np.argsort(-values, kind="stable")
    return EigenDecomposition(basis=v[:, order], values=values[order])


def clamp_floor(values: np.ndarray) -> float:
    """Eigenvalue floor used before square roots: 1e-12 * max(lambda_max, 1)."""
    return 1e-12 * max(float(np.max(values)), 1.0)


def clamped(values: np.ndarray) -> np.ndarray:
    return np.maximum(values, clamp_floor(values))


def inv_sqrt(m, eig: EigenDecomposition | None = None) -> np.ndarray:
    """``B diag(1/sqrt(max(lambda, eps))) B^T``; singular inputs are absorbed by the floor."""
    if eig is None:
        eig = eig_sym(m)
    b = eig.basis
    out = (b / np.sqrt(clamped(eig.values))) @ b.T
    return symmetrize(out)


def sample_mvn(mean, scale: float, cov, count: int, rng: np.random.Generator,
               eig: EigenDecomposition | None = None) -> np.ndarray:
    """Draw ``count`` rows ``mean + scale * B diag(sqrt(lambda)) z`` with ``z ~ N(0, I)``.

    Returns an array of shape ``(count, n)``. Draws are taken from ``rng`` as a
    single ``(count, n)`` block of standard normals.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or mean.shape != (cov.shape[0],):
        raise DimensionMismatch(f"mean {mean.shape} vs covariance {cov.shape}")
    if eig is None:
        eig = eig_sym(cov)
    n = mean.shape[0]
    z = rng.standard_normal((count, n))
    factor = eig.basis * np.sqrt(clamped(eig.values))
    return mean + scale * (z @ factor.T)


def stable_hash(*parts) -> int:
    """64-bit digest of ``parts`` (blake2b over their ``repr``), stable across runs and platforms."""
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RngStream:
    """A seeded random stream: Philox4x64-10 keyed by ``(seed, stream_id)``.

    The stream is a value; :meth:`generator` returns a fresh generator starting
    at counter zero, so equal streams always yield equal draw sequences.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, label: str) -> "RngStream":
        return RngStream(self.seed, stable_hash(self.stream_id, label))
