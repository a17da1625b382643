"""Bundled boundary port models.

Every builder returns a :class:`~phnode.discretize.HyperbolicModel` (or a
:class:`~phnode.discretize.DiffusionModel`).  Coefficients may be numbers,
:class:`~phnode.quadham.Coefficient` instances, model-file dictionaries or
plain callables.

State layouts
-------------
vibrating string
    ``(strain, momentum)``; ``H = diag(T, 1/rho)``, co-energy ``(force,
    velocity)``.  Controlled force at the right end, fixed left end,
    velocity output.
transmission line
    ``(charge, flux)``; ``H = diag(1/C, 1/L)``, co-energy ``(voltage,
    current)``.  Voltage applied at the right end, open left end.
Timoshenko beam
    ``(shear strain, momentum, angular strain, angular momentum)``;
    ``H = diag(K, 1/rho, EI, 1/I_rho)``, co-energy ``(shear force,
    velocity, bending moment, angular velocity)``.  ``P1`` couples each
    strain with its velocity, ``P0`` holds the skew shear/rotation coupling.
    Shear force and moment controlled at the right end, clamped left end.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from phnode.analysis import DiscreteNode
from phnode.discretize import (
    DiffusionModel,
    HyperbolicModel,
    assemble_diffusion_node,
    assemble_hyperbolic_node,
    selector_rows,
)
from phnode.errors import DensityError, StructureError
from phnode.quadham import Constant, PowerLaw, DensitySpec, as_coefficient

__all__ = [
    "vibrating_string",
    "transmission_line",
    "timoshenko_beam",
    "diffusion_rod",
    "transport",
    "CatalogEntry",
    "CATALOG",
    "build_model",
    "assemble",
]

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def _positive(c, name, a, b):
    c = as_coefficient(c)
    # interior samples only: power laws may vanish or blow up at an end
    xs = np.linspace(a, b, 33)[1:-1]
    vals = np.asarray(c(xs), dtype=float)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise DensityError(f"{name} must be positive")
    return c


def _unit_rows(m, picks):
    rows = np.zeros((len(picks), 2 * m))
    for r, col in enumerate(picks):
        rows[r, col] = 1.0
    return rows


def vibrating_string(T=1.0, rho=1.0, d=0.0, a: float = 0.0, b: float = 1.0) -> HyperbolicModel:
    """Wave equation ``rho w_tt = (T w_x)_x - d w_t`` in first-order form.

    ``T`` is the elastic modulus (N), ``rho`` the mass density (kg/m),
    ``d`` the viscous damping (kg/(m s)).
    """
    T = _positive(T, "T", a, b)
    rho = _positive(rho, "rho", a, b)
    d = as_coefficient(d)
    if np.any(np.asarray(d(np.linspace(a, b, 33)), dtype=float) < 0):
        raise DensityError("damping must be nonnegative")
    s = 1.0 / np.sqrt(2.0)
    if isinstance(d, Constant):
        P0 = np.diag([0.0, -d.value])
    else:
        P0 = lambda xi: np.diag([0.0, -float(d(xi))])
    return HyperbolicModel(
        density=DensitySpec.diagonal([T, rho.reciprocal()]),
        P1=SWAP,
        WB=s * np.array([[0.0, 1.0, 1.0, 0.0]]),
        WB_hom=s * np.array([[-1.0, 0.0, 0.0, 1.0]]),
        WC=s * np.array([[1.0, 0.0, 0.0, 1.0]]),
        P0=P0,
        a=a,
        b=b,
        name="string",
        params={"T": T, "rho": rho, "d": d},
    )


def transmission_line(L=1.0, C=1.0, a: float = 0.0, b: float = 1.0) -> HyperbolicModel:
    """Lossless telegraph line; ``L`` in H/m, ``C`` in F/m."""
    L = _positive(L, "L", a, b)
    C = _positive(C, "C", a, b)
    # voltage at b is the input, current at a vanishes
    return HyperbolicModel(
        density=DensitySpec.diagonal([C.reciprocal(), L.reciprocal()]),
        P1=SWAP,
        WB=selector_rows(SWAP, _unit_rows(2, [0])),
        WB_hom=selector_rows(SWAP, _unit_rows(2, [3])),
        a=a,
        b=b,
        name="transmission_line",
        params={"L": L, "C": C},
    )


def timoshenko_beam(rho=1.0, I_rho=1.0, EI=1.0, K=1.0, a: float = 0.0, b: float = 1.0) -> HyperbolicModel:
    """Timoshenko beam; ``rho`` mass per length, ``I_rho`` rotary inertia,
    ``EI`` bending stiffness, ``K`` shear stiffness."""
    rho = _positive(rho, "rho", a, b)
    I_rho = _positive(I_rho, "I_rho", a, b)
    EI = _positive(EI, "EI", a, b)
    K = _positive(K, "K", a, b)
    P1 = np.kron(np.eye(2), SWAP)
    P0 = np.zeros((4, 4))
    P0[0, 3], P0[3, 0] = -1.0, 1.0
    return HyperbolicModel(
        density=DensitySpec.diagonal([K, rho.reciprocal(), EI, I_rho.reciprocal()]),
        P1=P1,
        WB=selector_rows(P1, _unit_rows(4, [0, 2])),
        WB_hom=selector_rows(P1, _unit_rows(4, [5, 7])),
        P0=P0,
        a=a,
        b=b,
        name="timoshenko",
        params={"rho": rho, "I_rho": I_rho, "EI": EI, "K": K},
    )


def transport(c=1.0, a: float = 0.0, b: float = 1.0) -> HyperbolicModel:
    """Scalar transport ``x_t = (c x)_x`` with inflow control at ``b``."""
    c = _positive(c, "c", a, b)
    return HyperbolicModel(
        density=DensitySpec.diagonal([c]),
        P1=np.eye(1),
        WB=np.array([[1.0, 0.0]]),
        WC=np.array([[0.0, 1.0]]),
        a=a,
        b=b,
        name="transport",
        params={"c": c},
    )


def diffusion_rod(a_coeff=1.0, lo: float = 0.0, hi: float = 1.0) -> DiffusionModel:
    """Heat conduction with Dirichlet control and flux observation at both ends.

    In one space dimension a divergence-free drift with vanishing normal
    trace is zero, so only the diffusion term remains.
    """
    a_coeff = as_coefficient(a_coeff)
    xs = np.linspace(lo, hi, 33)
    vals = np.asarray(a_coeff(xs), dtype=float)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise DensityError("diffusion coefficient must be positive and bounded")
    return DiffusionModel(a_coeff, lo, hi, params={"a_coeff": a_coeff})


# {{{ catalog


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    builder: Callable
    defaults: dict
    doc: str

    def build(self, **params):
        kw = dict(self.defaults)
        unknown = set(params) - set(kw)
        if unknown:
            raise StructureError(f"{self.name}: unknown parameters {sorted(unknown)}")
        kw.update(params)
        return replace(self.builder(**kw), name=self.name)


CATALOG: dict[str, CatalogEntry] = {
    e.name: e
    for e in [
        CatalogEntry("string", vibrating_string, {"T": 1.0, "rho": 1.0, "d": 0.0},
                     "lossless fixed-free string, force input at the free end"),
        CatalogEntry("damped_string", vibrating_string, {"T": 1.0, "rho": 1.0, "d": 0.3},
                     "string with viscous damping d = 0.3"),
        CatalogEntry("singular_string", vibrating_string,
                     {"T": 1.0, "rho": PowerLaw(1.0, -0.5), "d": 0.0},
                     "string with mass density xi^(-1/2), integrable but unbounded"),
        CatalogEntry("transmission_line", transmission_line, {"L": 1.0, "C": 1.0},
                     "unit telegraph line, voltage input, current output"),
        CatalogEntry("timoshenko", timoshenko_beam, {"rho": 1.0, "I_rho": 1.0, "EI": 1.0, "K": 1.0},
                     "clamped-free Timoshenko beam, force and moment inputs"),
        CatalogEntry("diffusion", diffusion_rod, {"a_coeff": 1.0},
                     "heat equation, Dirichlet input, flux output"),
    ]
}

HYPERBOLIC = ("string", "damped_string", "singular_string", "transmission_line", "timoshenko")


def build_model(name: str, **params):
    try:
        entry = CATALOG[name]
    except KeyError:
        raise StructureError(f"unknown catalog model {name!r}; known: {sorted(CATALOG)}") from None
    return entry.build(**params)


def assemble(model, n_cells: int, scheme: str = "auto") -> DiscreteNode:
    """Discretize a catalog model (or its name) on ``n_cells`` cells."""
    if isinstance(model, str):
        model = build_model(model)
    if isinstance(model, DiffusionModel):
        node = assemble_diffusion_node(model.a_coeff, n_cells, model.lo, model.hi)
        return node.with_blocks(provenance=f"{model.name}/n={n_cells}")
    if isinstance(model, HyperbolicModel):
        return assemble_hyperbolic_node(model, n_cells, scheme=scheme)
    raise TypeError(f"cannot assemble {type(model).__name__}")


# }}}
