"""Seeded multi-modal test functions modelled on the BBOB F15-F24 group.

Each instance evaluates ``f_opt + base(R (x - x_opt)) + penalty(x)`` where the
base function has its global minimum 0 at ``z = 0`` and the penalty is
``sum(max(0, |x_i| - 5)^2)``. The asymmetry and oscillation warps of the
original suite are not applied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionTooSmall, InvalidInput, UnknownFunction
from .numerics import RngStream, stable_hash

BOUND = 5.0

PAPER_MULTIMODAL = (
    "rastrigin-rotated",      # F15
    "weierstrass",            # F16
    "schaffers-f7",           # F17
    "schaffers-f7-ill",       # F18
    "griewank-rosenbrock",    # F19
    "schwefel",               # F20
    "gallagher-101",          # F21
    "gallagher-21",           # F22
    "katsuura",               # F23
    "lunacek-bi-rastrigin",   # F24
)
SANITY = ("sphere", "ellipsoid")

# separable sanity functions keep the identity rotation
_UNROTATED = frozenset(SANITY)


def list_suite(which: str = "paper-multimodal") -> list[str]:
    if which == "paper-multimodal":
        return list(PAPER_MULTIMODAL)
    if which == "sanity":
        return list(SANITY)
    if which == "all":
        return list(PAPER_MULTIMODAL) + list(SANITY)
    raise ValueError(f"unknown suite {which!r}; expected paper-multimodal, sanity or all")


def conditioning(n: int, alpha: float) -> np.ndarray:
    """Diagonal of the BBOB-style scaling ``alpha ** (0.5 * i / (n - 1))``."""
    return alpha ** (0.5 * np.arange(n) / (n - 1))


def sphere(z, data=None):
    return float(z @ z)


def ellipsoid(z, data=None):
    n = z.shape[0]
    w = 10.0 ** (6.0 * np.arange(n) / (n - 1))
    return float(w @ (z * z))


def rastrigin(z, data=None):
    n = z.shape[0]
    return float(10.0 * (n - np.sum(np.cos(2 * np.pi * z))) + z @ z)


_W_K = np.arange(12)
_W_A = 0.5 ** _W_K
_W_B = 3.0 ** _W_K
_W_F0 = float(np.sum(_W_A * np.cos(np.pi * _W_B)))


def weierstrass(z, data=None):
    n = z.shape[0]
    inner = np.cos(2 * np.pi * np.outer(z + 0.5, _W_B)) @ _W_A
    return float(10.0 * (np.sum(inner) / n - _W_F0) ** 3)


def _schaffers(z, scale):
    u = scale * z
    s = np.sqrt(u[:-1] ** 2 + u[1:] ** 2)
    rs = np.sqrt(s)
    return float((np.sum(rs + rs * np.sin(50.0 * s ** 0.2) ** 2) / (len(s))) ** 2)


def schaffers_f7(z, data):
    return _schaffers(z, data["scale"])


def griewank_rosenbrock(z, data=None):
    n = z.shape[0]
    u = max(1.0, math.sqrt(n) / 8.0) * z + 1.0
    s = 100.0 * (u[:-1] ** 2 - u[1:]) ** 2 + (u[:-1] - 1.0) ** 2
    return float(10.0 / (n - 1) * np.sum(s / 4000.0 - np.cos(s)) + 10.0)


SCHWEFEL_OPT = 420.9687462275036
_SCHWEFEL_TERM = SCHWEFEL_OPT * math.sin(math.sqrt(SCHWEFEL_OPT))


def schwefel(z, data=None):
    n = z.shape[0]
    u = 100.0 * z + SCHWEFEL_OPT
    inner = np.sum(_SCHWEFEL_TERM - u * np.sin(np.sqrt(np.abs(u)))) / (100.0 * n)
    outside = np.maximum(0.0, np.abs(u) / 100.0 - 5.0)
    return float(inner + 100.0 * outside @ outside)


def gallagher(z, data):
    diffs = data["peaks"] - z  # (m, n)
    quad = np.einsum("ij,ij->i", diffs * data["precision"], diffs)
    with np.errstate(under="ignore"):  # far-away peaks contribute exactly 0
        best = np.max(data["heights"] * np.exp(-quad / (2.0 * z.shape[0])))
    return float((10.0 - best) ** 2)


_K_POW = 2.0 ** np.arange(1, 33)


def katsuura(z, data=None):
    n = z.shape[0]
    t = np.outer(z, _K_POW)
    sums = np.sum(np.abs(t - np.round(t)) / _K_POW, axis=1)
    prod = np.prod((1.0 + np.arange(1, n + 1) * sums) ** (10.0 / n ** 1.2))
    return float(10.0 / n ** 2 * prod - 10.0 / n ** 2)


LUNACEK_MU0 = 2.5


def lunacek_bi_rastrigin(z, data=None):
    n = z.shape[0]
    d = 1.0
    s = 1.0 - 1.0 / (2.0 * math.sqrt(n + 20.0) - 8.2)
    mu1 = -math.sqrt((LUNACEK_MU0 ** 2 - d) / s)
    u = z + LUNACEK_MU0
    first = np.sum((u - LUNACEK_MU0) ** 2)
    second = d * n + s * np.sum((u - mu1) ** 2)
    return float(min(first, second) + 10.0 * (n - np.sum(np.cos(2 * np.pi * z))))


def _schaffers_data(cond):
    def build(n, rng, rotation, x_opt):
        return {"scale": conditioning(n, cond)}
    return build


def _gallagher_data(peaks, top_condition):
    def build(n, rng, rotation, x_opt):
        local = rng.uniform(-4.9, 4.9, size=(peaks - 1, n))
        # peak locations are drawn in x-space and moved into the rotated frame
        z_peaks = np.vstack([np.zeros(n), (local - x_opt) @ rotation.T])
        local_heights = 1.1 + 8.0 * np.arange(peaks - 1) / (peaks - 2)
        heights = np.concatenate([[10.0], local_heights[::-1]])
        conds = 1000.0 ** (2.0 * np.arange(peaks - 1) / (peaks - 2))
        conds = np.concatenate([[top_condition], rng.permutation(conds)])
        precision = np.empty((peaks, n))
        for i, c in enumerate(conds):
            diag = conditioning(n, c) / c ** 0.25
            precision[i] = rng.permutation(diag)
        return {"peaks": z_peaks, "heights": heights, "precision": precision}
    return build


@dataclass(frozen=True)
class _FunctionDef:
    base: Callable
    build: Callable | None = None


FUNCTIONS: dict[str, _FunctionDef] = {
    "sphere": _FunctionDef(sphere),
    "ellipsoid": _FunctionDef(ellipsoid),
    "rastrigin-rotated": _FunctionDef(rastrigin),
    "weierstrass": _FunctionDef(weierstrass),
    "schaffers-f7": _FunctionDef(schaffers_f7, _schaffers_data(10.0)),
    "schaffers-f7-ill": _FunctionDef(schaffers_f7, _schaffers_data(1000.0)),
    "griewank-rosenbrock": _FunctionDef(griewank_rosenbrock),
    "schwefel": _FunctionDef(schwefel),
    "gallagher-101": _FunctionDef(gallagher, _gallagher_data(101, 1000.0)),
    "gallagher-21": _FunctionDef(gallagher, _gallagher_data(21, 1000.0 ** 2)),
    "katsuura": _FunctionDef(katsuura),
    "lunacek-bi-rastrigin": _FunctionDef(lunacek_bi_rastrigin),
}


def random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal matrix from QR of a Gaussian matrix, column signs fixed by diag(R) > 0."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    function_id: str
    dim: int
    instance_seed: int
    x_opt: np.ndarray
    f_opt: float
    rotation: np.ndarray
    data: dict = field(default_factory=dict, repr=False)

    def base(self, z: np.ndarray) -> float:
        return FUNCTIONS[self.function_id].base(z, self.data)

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (self.function_id, self.dim, self.instance_seed, self.f_opt) == (
            other.function_id, other.dim, other.instance_seed, other.f_opt
        ) and np.array_equal(self.x_opt, other.x_opt) and np.array_equal(self.rotation, other.rotation)

    __hash__ = None


def make_instance(function_id: str, dim: int, instance_seed: int) -> ProblemInstance:
    if function_id not in FUNCTIONS:
        raise UnknownFunction(function_id)
    if dim < 2:
        raise DimensionTooSmall(f"dimension {dim} < 2")
    rng = RngStream(instance_seed, stable_hash("instance", function_id, dim)).generator()
    x_opt = rng.uniform(-4.0, 4.0, dim)
    f_opt = round(float(rng.uniform(-100.0, 100.0)), 2)
    rotation = random_rotation(dim, rng)
    if function_id in _UNROTATED:
        rotation = np.eye(dim)
    spec = FUNCTIONS[function_id]
    data = spec.build(dim, rng, rotation, x_opt) if spec.build else {}
    return ProblemInstance(function_id, dim, int(instance_seed), x_opt, f_opt, rotation, data)


def evaluate(inst: ProblemInstance, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.dim,):
        raise InvalidInput(f"expected a vector of length {inst.dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("non-finite input")
    z = inst.rotation @ (x - inst.x_opt)
    outside = np.maximum(0.0, np.abs(x) - BOUND)
    return inst.f_opt + inst.base(z) + float(outside @ outside)
