"""Quadratic Hamiltonians on quadrature grids.

A Hamiltonian density ``H(xi)`` on ``[a, b]`` together with quadrature
weights ``w_i`` defines the discrete energy space ``X_h`` with

    <x, z>_Xh   = sum_i w_i z_i^* H_i x_i
    <x', z'>_Xh* = sum_i w_i z'_i^* H_i^{-1} x'_i
    <x', x>     = sum_i w_i x_i^* x'_i          (duality pairing)

and Riesz map ``x -> (H_i x_i)_i``.  Densities that are only integrable
(``H, H^{-1}`` in ``L^1`` but possibly unbounded) are handled by replacing
point values with cell averages, which keeps every block finite and
positive definite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from phnode.errors import DensityError, IntegrabilityError, StructureError

__all__ = [
    "Coefficient",
    "Constant",
    "PiecewiseConstant",
    "PowerLaw",
    "Function",
    "as_coefficient",
    "coefficient_from_dict",
    "DensitySpec",
    "EnergyMetric",
    "IsometryReport",
    "cell_average",
    "build_energy_metric",
    "xh_inner",
    "xh_dual_inner",
    "duality_pairing",
    "xh_norm",
    "xh_dual_norm",
    "riesz_map",
    "inverse_riesz_map",
    "hamiltonian",
    "sqrt_isometry_check",
]

QUAD_RTOL = 1e-10
SQRT_CLAMP = 1e-12


# {{{ scalar coefficients


class Coefficient:
    """Positive scalar coefficient ``xi -> c(xi)`` with exact cell integrals."""

    singular = False

    def __call__(self, xi):
        raise NotImplementedError

    def integral(self, lo: float, hi: float) -> float:
        val, err, *flag = integrate.quad(self, lo, hi, epsrel=QUAD_RTOL, limit=200, full_output=1)
        # coefficients are positive, so a nonpositive value is an extrapolation
        # artifact of a divergent integral, as is a flagged large error
        if val <= 0 or (len(flag) > 1 and not err <= 1e-6 * max(1.0, abs(val))):
            return float("inf")
        return float(val)

    def reciprocal(self) -> "Coefficient":
        return Function(lambda xi, f=self: 1.0 / f(xi), singular=self.singular)

    def to_dict(self) -> dict:
        raise TypeError(f"{type(self).__name__} has no model-file representation")


@dataclass(frozen=True)
class Constant(Coefficient):
    value: float

    def __call__(self, xi):
        return np.full(np.shape(xi), float(self.value)) if np.ndim(xi) else float(self.value)

    def integral(self, lo, hi):
        return float(self.value) * (hi - lo)

    def reciprocal(self):
        return Constant(1.0 / self.value)

    def to_dict(self):
        return {"kind": "constant", "value": float(self.value)}


@dataclass(frozen=True)
class PiecewiseConstant(Coefficient):
    """``values[k]`` on the ``k``-th interval delimited by the interior ``breaks``."""

    breaks: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "breaks", tuple(float(b) for b in self.breaks))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != len(self.breaks) + 1:
            raise StructureError("piecewise constant needs len(values) == len(breaks) + 1")
        if any(np.diff(self.breaks) <= 0):
            raise StructureError("breaks must be strictly increasing")

    def __call__(self, xi):
        idx = np.searchsorted(self.breaks, xi, side="right")
        out = np.asarray(self.values)[idx]
        return out if np.ndim(xi) else float(out)

    def integral(self, lo, hi):
        edges = [lo] + [b for b in self.breaks if lo < b < hi] + [hi]
        return float(sum(self(0.5 * (l + r)) * (r - l) for l, r in zip(edges[:-1], edges[1:])))

    def reciprocal(self):
        return PiecewiseConstant(self.breaks, tuple(1.0 / v for v in self.values))

    def to_dict(self):
        return {"kind": "piecewise_constant", "breaks": list(self.breaks), "values": list(self.values)}


@dataclass(frozen=True)
class PowerLaw(Coefficient):
    """``scale * (xi - origin)**exponent``; integrable for ``exponent > -1``."""

    scale: float = 1.0
    exponent: float = 0.0
    origin: float = 0.0

    def __post_init__(self):
        if self.scale <= 0:
            raise DensityError("power-law scale must be positive")
        if self.exponent <= -1:
            raise IntegrabilityError(f"xi^{self.exponent} is not integrable at the origin")

    @property
    def singular(self):
        return self.exponent != 0

    def __call__(self, xi):
        with np.errstate(divide="ignore"):
            return self.scale * np.power(np.asarray(xi, dtype=float) - self.origin, self.exponent)

    def integral(self, lo, hi):
        p = self.exponent + 1.0
        return float(self.scale * ((hi - self.origin) ** p - (lo - self.origin) ** p) / p)

    def reciprocal(self):
        return PowerLaw(1.0 / self.scale, -self.exponent, self.origin)

    def to_dict(self):
        return {"kind": "power_law", "scale": self.scale, "exponent": self.exponent, "origin": self.origin}


class Function(Coefficient):
    """Arbitrary callable; cell integrals by adaptive quadrature."""

    def __init__(self, f: Callable, singular: bool = False):
        self.f = f
        self.singular = singular

    def __call__(self, xi):
        if np.ndim(xi):
            return np.array([float(self.f(t)) for t in np.ravel(xi)]).reshape(np.shape(xi))
        return float(self.f(xi))


def as_coefficient(c) -> Coefficient:
    if isinstance(c, Coefficient):
        return c
    if np.isscalar(c):
        return Constant(float(c))
    if isinstance(c, dict):
        return coefficient_from_dict(c)
    if callable(c):
        return Function(c)
    raise TypeError(f"cannot interpret {c!r} as a coefficient")


def coefficient_from_dict(d: dict) -> Coefficient:
    d = dict(d)
    kind = d.pop("kind")
    if kind == "constant":
        return Constant(**d)
    if kind == "piecewise_constant":
        return PiecewiseConstant(tuple(d["breaks"]), tuple(d["values"]))
    if kind == "power_law":
        return PowerLaw(**d)
    raise StructureError(f"unknown coefficient kind {kind!r}")


# }}}


# {{{ densities


@dataclass(frozen=True)
class DensitySpec:
    """Hamiltonian density ``xi -> H(xi)`` (``m x m``, Hermitian positive definite).

    ``singular`` marks densities with ``H, H^{-1}`` only integrable; those are
    sampled by cell averages.  ``cell_integral(lo, hi)`` and
    ``inverse_cell_integral(lo, hi)`` may supply exact integrals of ``H`` and
    ``H^{-1}``; otherwise adaptive quadrature is used.
    """

    m: int
    evaluator: Callable[[float], np.ndarray]
    singular: bool = False
    cell_integral: Callable[[float, float], np.ndarray] | None = None
    inverse_cell_integral: Callable[[float, float], np.ndarray] | None = None
    coefficients: tuple[Coefficient, ...] | None = field(default=None, compare=False)

    @classmethod
    def diagonal(cls, coefficients: Sequence, singular: bool | None = None) -> "DensitySpec":
        coefs = tuple(as_coefficient(c) for c in coefficients)
        recips = tuple(c.reciprocal() for c in coefs)
        if singular is None:
            singular = any(c.singular for c in coefs)
        return cls(
            m=len(coefs),
            evaluator=lambda xi: np.diag([c(xi) for c in coefs]).astype(complex),
            singular=singular,
            cell_integral=lambda lo, hi: np.diag([c.integral(lo, hi) for c in coefs]).astype(complex),
            inverse_cell_integral=lambda lo, hi: np.diag([c.integral(lo, hi) for c in recips]).astype(complex),
            coefficients=coefs,
        )

    @classmethod
    def constant(cls, H) -> "DensitySpec":
        H = np.atleast_2d(np.asarray(H, dtype=complex))
        Hinv = np.linalg.inv(H)
        return cls(
            m=H.shape[0],
            evaluator=lambda xi: H,
            cell_integral=lambda lo, hi: (hi - lo) * H,
            inverse_cell_integral=lambda lo, hi: (hi - lo) * Hinv,
        )

    def __call__(self, xi) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.evaluator(xi), dtype=complex))

    def integral(self, lo: float, hi: float) -> np.ndarray:
        if self.cell_integral is not None:
            return np.atleast_2d(np.asarray(self.cell_integral(lo, hi), dtype=complex))
        return _quad_matrix(self, lo, hi, self.m)

    def inverse_integral(self, lo: float, hi: float) -> np.ndarray:
        if self.inverse_cell_integral is not None:
            return np.atleast_2d(np.asarray(self.inverse_cell_integral(lo, hi), dtype=complex))
        return _quad_matrix(lambda xi: np.linalg.inv(self(xi)), lo, hi, self.m)

    def sub(self, idx: Sequence[int]) -> "DensitySpec":
        """Restriction to the components ``idx`` (``H`` must be block diagonal)."""
        idx = list(idx)
        if self.coefficients is not None:
            return DensitySpec.diagonal([self.coefficients[i] for i in idx], self.singular)
        ix = np.ix_(idx, idx)
        return DensitySpec(
            m=len(idx),
            evaluator=lambda xi: self(xi)[ix],
            singular=self.singular,
            cell_integral=None if self.cell_integral is None else (lambda lo, hi: self.integral(lo, hi)[ix]),
        )


def _quad_matrix(f, lo, hi, m):
    out = np.empty((m, m), dtype=complex)
    for i in range(m):
        for j in range(m):
            re, _ = integrate.quad(lambda t: np.real(f(t)[i, j]), lo, hi, epsrel=QUAD_RTOL, limit=200)
            im, _ = integrate.quad(lambda t: np.imag(f(t)[i, j]), lo, hi, epsrel=QUAD_RTOL, limit=200)
            out[i, j] = re + 1j * im
    return out


def cell_average(spec: DensitySpec, lo: float, hi: float) -> np.ndarray:
    """Mean of ``H`` over ``[lo, hi]``; raises if the integral is not finite."""
    if not hi > lo:
        raise StructureError(f"empty cell [{lo}, {hi}]")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val = spec.integral(lo, hi)
    if not np.all(np.isfinite(val)):
        raise IntegrabilityError(f"density integral over [{lo}, {hi}] is not finite")
    return val / (hi - lo)


# }}}


# {{{ metric


@dataclass(frozen=True)
class EnergyMetric:
    """Discrete energy metric: entries ``(point_i, w_i, H_i)`` with ``b x b`` blocks.

    Vectors are laid out entry-major, ``x[i*b:(i+1)*b]`` belonging to entry
    ``i``.  The assembled mass matrix is ``blockdiag(w_i H_i)``.
    """

    points: np.ndarray
    weights: np.ndarray
    blocks: np.ndarray

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=complex)
        if blocks.ndim == 2:
            blocks = blocks[:, None, None]
        weights = np.asarray(self.weights, dtype=float)
        points = np.asarray(self.points, dtype=float)
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise StructureError(f"blocks must have shape (K, b, b), got {blocks.shape}")
        if not (weights.shape == points.shape == (blocks.shape[0],)):
            raise StructureError("points, weights and blocks disagree in length")
        if np.any(weights <= 0):
            raise StructureError("quadrature weights must be positive")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "points", points)

    @classmethod
    def single(cls, H) -> "EnergyMetric":
        H = np.atleast_2d(np.asarray(H, dtype=complex))
        return cls(np.zeros(1), np.ones(1), H[None])

    @classmethod
    def identity(cls, n: int) -> "EnergyMetric":
        return cls(np.arange(n, dtype=float), np.ones(n), np.ones((n, 1, 1)))

    @classmethod
    def concat(cls, *metrics: "EnergyMetric") -> "EnergyMetric":
        return cls(
            np.concatenate([m.points for m in metrics]),
            np.concatenate([m.weights for m in metrics]),
            np.concatenate([m.blocks for m in metrics]),
        )

    def subset(self, keep) -> "EnergyMetric":
        keep = np.asarray(keep)
        return EnergyMetric(self.points[keep], self.weights[keep], self.blocks[keep])

    @property
    def nentries(self) -> int:
        return self.blocks.shape[0]

    @property
    def block(self) -> int:
        return self.blocks.shape[1]

    @property
    def size(self) -> int:
        return self.nentries * self.block

    @cached_property
    def inverse_blocks(self) -> np.ndarray:
        return np.linalg.inv(self.blocks)

    @cached_property
    def sqrt_blocks(self) -> np.ndarray:
        """Principal square roots ``H_i^{1/2}`` via Hermitian eigendecomposition."""
        lam, V = np.linalg.eigh(self.blocks)
        scale = np.maximum(1.0, np.abs(lam).max(axis=-1, keepdims=True))
        if np.any(lam < -SQRT_CLAMP * scale):
            raise DensityError(f"block with eigenvalue {lam.min():.3e} has no real square root")
        if np.any(lam < 0):
            warnings.warn("clamping tiny negative eigenvalues before taking square roots", RuntimeWarning)
        lam = np.sqrt(np.clip(lam, 0.0, None))
        return np.einsum("kij,kj,klj->kil", V, lam, V.conj())

    def _split(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.size:
            raise StructureError(f"vector of length {x.shape[-1]} does not match metric of size {self.size}")
        return x.reshape(x.shape[:-1] + (self.nentries, self.block))

    def apply_blocks(self, blocks, x) -> np.ndarray:
        xs = self._split(x)
        return np.einsum("kij,...kj->...ki", blocks, xs).reshape(np.shape(x))

    @cached_property
    def mass(self) -> np.ndarray:
        """Dense ``blockdiag(w_i H_i)``."""
        out = np.zeros((self.size, self.size), dtype=complex)
        b = self.block
        for k in range(self.nentries):
            out[k * b:(k + 1) * b, k * b:(k + 1) * b] = self.weights[k] * self.blocks[k]
        return out

    @cached_property
    def cholesky(self) -> np.ndarray:
        """Lower factor ``L`` with ``mass = L L^*`` (block diagonal)."""
        try:
            Lk = np.linalg.cholesky(self.blocks)
        except np.linalg.LinAlgError as exc:
            raise DensityError("metric is not positive definite") from exc
        Lk = Lk * np.sqrt(self.weights)[:, None, None]
        out = np.zeros((self.size, self.size), dtype=complex)
        b = self.block
        for k in range(self.nentries):
            out[k * b:(k + 1) * b, k * b:(k + 1) * b] = Lk[k]
        return out

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the mass matrix."""
        lam = np.linalg.eigvalsh(self.blocks)[:, 0] * self.weights
        return float(lam.min())

    def __eq__(self, other):
        if not isinstance(other, EnergyMetric):
            return NotImplemented
        return (
            np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.blocks, other.blocks)
        )

    __hash__ = None


def _grid_cells(grid: np.ndarray, rule: str):
    if rule == "trapezoid":
        mids = 0.5 * (grid[1:] + grid[:-1])
        lo = np.concatenate([[grid[0]], mids])
        hi = np.concatenate([mids, [grid[-1]]])
        return grid.copy(), lo, hi
    if rule == "midpoint":
        return 0.5 * (grid[1:] + grid[:-1]), grid[:-1].copy(), grid[1:].copy()
    raise StructureError(f"unknown quadrature rule {rule!r}")


def build_energy_metric(spec: DensitySpec, grid, rule: str = "trapezoid") -> EnergyMetric:
    """Sample ``spec`` on ``grid``.

    ``rule="trapezoid"`` places entries at the grid nodes with dual-cell
    weights; ``rule="midpoint"`` places them at cell centers.  Bounded
    densities are evaluated pointwise, singular ones are averaged over the
    (dual) cell belonging to each entry.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise StructureError("grid must be strictly increasing with at least two nodes")
    points, lo, hi = _grid_cells(grid, rule)
    weights = hi - lo
    if spec.singular:
        blocks = np.array([cell_average(spec, l, r) for l, r in zip(lo, hi)])
        for l, r in zip(lo, hi):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                inv = spec.inverse_integral(l, r)
            if not np.all(np.isfinite(inv)):
                raise IntegrabilityError(f"inverse density integral over [{l}, {r}] is not finite")
    else:
        blocks = np.array([spec(p) for p in points])
    if blocks.shape[1:] != (spec.m, spec.m):
        raise DensityError(f"density returned blocks of shape {blocks.shape[1:]}, expected {(spec.m, spec.m)}")
    herm = np.abs(blocks - np.conj(np.swapaxes(blocks, 1, 2))).max()
    if not np.all(np.isfinite(blocks)) or herm > 1e-12 * max(1.0, np.abs(blocks).max()):
        raise DensityError("density samples are not finite Hermitian matrices")
    lam = np.linalg.eigvalsh(blocks)[:, 0]
    if np.any(lam <= 0):
        k = int(np.argmin(lam))
        raise DensityError(f"density sample at xi={points[k]:.6g} is not positive definite (eig {lam[k]:.3e})")
    return EnergyMetric(points, weights, blocks)


# }}}


# {{{ inner products


def xh_inner(metric: EnergyMetric, x, z) -> complex:
    """Energy inner product ``sum_i w_i z_i^* H_i x_i``."""
    Hx = metric._split(metric.apply_blocks(metric.blocks, x))
    zs = metric._split(z)
    return complex(np.einsum("k,ki,ki->", metric.weights, zs.conj(), Hx))


def xh_dual_inner(metric: EnergyMetric, xp, zp) -> complex:
    Hx = metric._split(metric.apply_blocks(metric.inverse_blocks, xp))
    zs = metric._split(zp)
    return complex(np.einsum("k,ki,ki->", metric.weights, zs.conj(), Hx))


def duality_pairing(metric: EnergyMetric, xp, x) -> complex:
    """Pairing of a dual vector ``xp`` with a state ``x``: ``sum_i w_i x_i^* xp_i``."""
    xs, ps = metric._split(x), metric._split(xp)
    return complex(np.einsum("k,ki,ki->", metric.weights, xs.conj(), ps))


def xh_norm(metric, x) -> float:
    return float(np.sqrt(max(np.real(xh_inner(metric, x, x)), 0.0)))


def xh_dual_norm(metric, xp) -> float:
    return float(np.sqrt(max(np.real(xh_dual_inner(metric, xp, xp)), 0.0)))


def riesz_map(metric: EnergyMetric, x) -> np.ndarray:
    """``x_i -> H_i x_i``: the Riesz isomorphism from ``X_h`` onto its dual."""
    return metric.apply_blocks(metric.blocks, x)


def inverse_riesz_map(metric: EnergyMetric, xp) -> np.ndarray:
    return metric.apply_blocks(metric.inverse_blocks, xp)


def hamiltonian(metric: EnergyMetric, x) -> float:
    """Stored energy ``<x, x>_Xh / 2``."""
    return 0.5 * float(np.real(xh_inner(metric, x, x)))


# }}}


@dataclass(frozen=True)
class IsometryReport:
    """Worst relative defects of the square-root identities over all samples."""

    u_isometry: float
    v_adjoint: float
    vu_riesz: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.u_isometry, self.v_adjoint, self.vu_riesz) <= self.tol


def sqrt_isometry_check(metric: EnergyMetric, samples, tol: float = 1e-11) -> IsometryReport:
    """Check ``U = H^{1/2}`` is an isometry ``X_h -> L^2_w``, ``V = U^*``, ``V U = R``.

    ``samples`` is a sequence of state vectors; consecutive pairs are used
    for the adjoint identity.
    """
    samples = [np.asarray(s, dtype=complex) for s in samples]
    if not samples:
        raise StructureError("need at least one sample")
    root = metric.sqrt_blocks
    w = metric.weights

    def l2w(a, b):
        return complex(np.einsum("k,ki,ki->", w, metric._split(b).conj(), metric._split(a)))

    e_u = e_v = e_r = 0.0
    for k, x in enumerate(samples):
        y = samples[(k + 1) % len(samples)]
        Ux = metric.apply_blocks(root, x)
        nx = xh_norm(metric, x)
        e_u = max(e_u, abs(np.sqrt(np.real(l2w(Ux, Ux))) - nx) / max(nx, 1e-300))
        # V maps L^2_w into X_h^*; test against y in X_h
        Vx = metric.apply_blocks(root, x)
        lhs = duality_pairing(metric, Vx, y)
        rhs = l2w(x, metric.apply_blocks(root, y))
        scale = max(xh_norm(metric, y) * np.sqrt(np.real(l2w(x, x))), 1e-300)
        e_v = max(e_v, abs(lhs - rhs) / scale)
        VU = metric.apply_blocks(root, Ux)
        R = riesz_map(metric, x)
        e_r = max(e_r, np.linalg.norm(VU - R) / max(np.linalg.norm(R), 1e-300))
    return IsometryReport(float(e_u), float(e_v), float(e_r), tol)
