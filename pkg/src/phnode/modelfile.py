"""JSON model files.

A model file holds exactly one model plus optional discretization,
simulation and scan blocks::

    {
      "schema_version": 1,
      "model": {"kind": "catalog", "name": "string", "params": {"d": 0.3}},
      "discretization": {"n_cells": 64, "scheme": "auto"},
      "simulation": {"t_final": 10.0, "dt": 0.001,
                     "x0": {"kind": "random", "seed": 1},
                     "input": {"kind": "sinusoid", "amplitude": [1.0], "omega": 6.28}},
      "scan": {"sigma": 1.0, "omega_ranges": [100.0, 10000.0]}
    }

Model kinds are ``ph_matrices``, ``hyperbolic``, ``diffusion`` and
``catalog``.  Matrices are dense row-major nested lists, or
``{"real": [[...]], "imag": [[...]]}`` for complex entries.  Unknown keys
are rejected everywhere.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from phnode.core import PHStructure
from phnode.discretize import DiffusionModel, HyperbolicModel
from phnode.errors import ModelFileError, PHNodeError
from phnode.quadham import Coefficient, Constant, DensitySpec, coefficient_from_dict
from phnode.timeint import InputSignal

__all__ = [
    "ModelFile",
    "load_model_file",
    "parse_model_file",
    "build_model_object",
    "export_model",
    "dump_model_file",
    "same_model",
    "initial_state",
    "input_signal",
]

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ComplexArray(_Strict):
    real: list
    imag: list


ArrayLike = Union[list, ComplexArray, float]


def to_array(v) -> np.ndarray:
    if v is None:
        return None
    if isinstance(v, ComplexArray):
        re, im = np.asarray(v.real, dtype=float), np.asarray(v.imag, dtype=float)
        if re.shape != im.shape:
            raise ModelFileError("real and imaginary parts differ in shape")
        return re + 1j * im
    return np.asarray(v, dtype=complex)


def from_array(a):
    a = np.asarray(a)
    if np.iscomplexobj(a) and np.any(a.imag != 0):
        return {"real": a.real.tolist(), "imag": a.imag.tolist()}
    return np.real(a).astype(float).tolist()


# {{{ coefficients


class ConstantCoef(_Strict):
    kind: Literal["constant"]
    value: float


class PiecewiseCoef(_Strict):
    kind: Literal["piecewise_constant"]
    breaks: list[float]
    values: list[float]


class PowerLawCoef(_Strict):
    kind: Literal["power_law"]
    scale: float = 1.0
    exponent: float = 0.0
    origin: float = 0.0


CoefSpec = Union[float, Annotated[Union[ConstantCoef, PiecewiseCoef, PowerLawCoef], Field(discriminator="kind")]]


def to_coefficient(c) -> Coefficient:
    if isinstance(c, (int, float)):
        return Constant(float(c))
    return coefficient_from_dict(c.model_dump())


def _coef_out(c: Coefficient):
    return c.to_dict()


# }}}


# {{{ model kinds


class PHMatrices(_Strict):
    kind: Literal["ph_matrices"]
    n: int = Field(ge=0)
    m: int = Field(ge=0)
    J: ArrayLike
    H: ArrayLike
    R: ArrayLike | None = None
    B: ArrayLike | None = None
    P: ArrayLike | None = None
    S: ArrayLike | None = None
    N: ArrayLike | None = None


class Hyperbolic(_Strict):
    kind: Literal["hyperbolic"]
    m: int = Field(ge=1)
    interval: tuple[float, float] = (0.0, 1.0)
    density: list[CoefSpec]
    P1: ArrayLike
    P0: ArrayLike | None = None
    WB: ArrayLike
    WB_hom: ArrayLike | None = None
    WC: ArrayLike | None = None
    name: str = "hyperbolic"


class Diffusion(_Strict):
    kind: Literal["diffusion"]
    a_coeff: CoefSpec = 1.0
    interval: tuple[float, float] = (0.0, 1.0)


class Catalog(_Strict):
    kind: Literal["catalog"]
    name: str
    params: dict[str, CoefSpec] = Field(default_factory=dict)


ModelSpec = Annotated[Union[PHMatrices, Hyperbolic, Diffusion, Catalog], Field(discriminator="kind")]


# }}}


class Discretization(_Strict):
    n_cells: int = Field(default=64, ge=4)
    scheme: Literal["auto", "collocated", "staggered"] = "auto"


class InitialState(_Strict):
    kind: Literal["zero", "vector", "random"] = "zero"
    values: ArrayLike | None = None
    seed: int = 0
    scale: float = 1.0


class InputSpec(_Strict):
    kind: Literal["zero", "constant", "sinusoid", "table"] = "zero"
    m: int | None = None
    value: ArrayLike | None = None
    amplitude: ArrayLike | None = None
    omega: float = 1.0
    phase: float = 0.0
    times: list[float] | None = None
    values: ArrayLike | None = None


class Simulation(_Strict):
    t_final: float = Field(default=1.0, gt=0)
    dt: float = Field(default=1e-3, gt=0)
    x0: InitialState = InitialState()
    input: InputSpec = InputSpec()
    snapshot_every: int | None = Field(default=None, ge=1)
    tol: float = 1e-9


class Scan(_Strict):
    re_range: tuple[float, float] = (1e-2, 1e2)
    n_re: int = Field(default=32, ge=1)
    im_range: tuple[float, float] = (-1e2, 1e2)
    n_im: int = Field(default=33, ge=1)
    tol_pr: float = 1e-9
    sigma: float = Field(default=1.0, gt=0)
    omega_ranges: list[float] = Field(default_factory=lambda: [1e2, 1e4])
    omega_step: float = Field(default=0.25, gt=0)
    times: list[float] = Field(default_factory=lambda: [0.1, 1.0, 10.0])
    tol_contraction: float = 1e-8
    lambdas: list[ArrayLike] = Field(default_factory=lambda: [1.0, [1.0, 1.0], 10.0])

    @field_validator("re_range")
    @classmethod
    def _positive_re(cls, v):
        if not 0 < v[0] <= v[1]:
            raise ValueError("re_range must satisfy 0 < lo <= hi")
        return v


class ModelFile(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    model: ModelSpec
    discretization: Discretization = Discretization()
    simulation: Simulation | None = None
    scan: Scan | None = None

    def s_grid(self) -> np.ndarray:
        sc = self.scan or Scan()
        re = np.logspace(np.log10(sc.re_range[0]), np.log10(sc.re_range[1]), sc.n_re)
        im = np.linspace(sc.im_range[0], sc.im_range[1], sc.n_im)
        return (re[:, None] + 1j * im[None, :]).ravel()


def parse_model_file(data: dict) -> ModelFile:
    try:
        return ModelFile.model_validate(data)
    except ValidationError as exc:
        raise ModelFileError(str(exc)) from exc


def load_model_file(path) -> ModelFile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelFileError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: invalid JSON: {exc}") from exc
    return parse_model_file(data)


def build_model_object(spec) -> PHStructure | HyperbolicModel | DiffusionModel:
    """Construct the in-memory model a model block describes."""
    from phnode.models import build_model

    if isinstance(spec, ModelFile):
        spec = spec.model
    try:
        if isinstance(spec, PHMatrices):
            n, m = spec.n, spec.m
            shapes = dict(J=(n, n), H=(n, n), R=(n, n), B=(n, m), P=(n, m), S=(m, m), N=(m, m))
            mats = {}
            for k, shape in shapes.items():
                a = to_array(getattr(spec, k))
                # empty blocks lose their shape in JSON
                mats[k] = a.reshape(shape) if a is not None and a.size == 0 else a
            s = PHStructure(**mats)
            if (s.n, s.m) != (spec.n, spec.m):
                raise ModelFileError(f"declared (n, m) = ({spec.n}, {spec.m}) but matrices give ({s.n}, {s.m})")
            return s
        if isinstance(spec, Hyperbolic):
            if len(spec.density) != spec.m:
                raise ModelFileError(f"density lists {len(spec.density)} entries, expected m = {spec.m}")
            return HyperbolicModel(
                density=DensitySpec.diagonal([to_coefficient(c) for c in spec.density]),
                P1=to_array(spec.P1),
                WB=to_array(spec.WB),
                WB_hom=to_array(spec.WB_hom),
                WC=to_array(spec.WC),
                P0=to_array(spec.P0),
                a=spec.interval[0],
                b=spec.interval[1],
                name=spec.name,
            )
        if isinstance(spec, Diffusion):
            return DiffusionModel(to_coefficient(spec.a_coeff), spec.interval[0], spec.interval[1])
        return build_model(spec.name, **{k: to_coefficient(v) for k, v in spec.params.items()})
    except ModelFileError:
        raise
    except (PHNodeError, ValueError) as exc:
        raise ModelFileError(str(exc)) from exc


def export_model(obj) -> dict:
    """Model block for ``obj``; inverse of :func:`build_model_object`."""
    if isinstance(obj, PHStructure):
        out = {"kind": "ph_matrices", "n": obj.n, "m": obj.m}
        for k in ("J", "H", "R", "B", "P", "S", "N"):
            out[k] = from_array(getattr(obj, k))
        return out
    if isinstance(obj, HyperbolicModel):
        if obj.density.coefficients is None:
            raise ModelFileError("only diagonal coefficient densities can be exported")
        P0 = obj.p0_constant()
        if P0 is None:
            raise ModelFileError("only constant P0 can be exported")
        out = {
            "kind": "hyperbolic",
            "m": obj.m,
            "interval": [obj.a, obj.b],
            "density": [_coef_out(c) for c in obj.density.coefficients],
            "P1": from_array(obj.P1),
            "P0": from_array(P0),
            "WB": from_array(obj.WB),
            "WB_hom": from_array(obj.WB_hom) if obj.WB_hom.size else None,
            "WC": from_array(obj.WC) if obj.WC is not None else None,
            "name": obj.name,
        }
        return {k: v for k, v in out.items() if v is not None}
    if isinstance(obj, DiffusionModel):
        return {"kind": "diffusion", "a_coeff": _coef_out(obj.a_coeff), "interval": [obj.lo, obj.hi]}
    raise ModelFileError(f"cannot export {type(obj).__name__}")


def dump_model_file(obj, path=None, **blocks) -> dict:
    data = {"schema_version": SCHEMA_VERSION, "model": export_model(obj), **blocks}
    parse_model_file(data)
    if path is not None:
        Path(path).write_text(json.dumps(data, indent=2) + "\n")
    return data


def same_model(a, b) -> bool:
    """Field-by-field equality of two in-memory models."""
    if type(a) is not type(b):
        return False
    if isinstance(a, PHStructure):
        return a == b
    if isinstance(a, DiffusionModel):
        return (a.a_coeff.to_dict(), a.lo, a.hi) == (b.a_coeff.to_dict(), b.lo, b.hi)
    if isinstance(a, HyperbolicModel):
        def arr_eq(x, y):
            if x is None or y is None:
                return x is None and y is None
            return np.array_equal(np.asarray(x), np.asarray(y))

        ca, cb = a.density.coefficients, b.density.coefficients
        return (
            ca is not None and cb is not None
            and [c.to_dict() for c in ca] == [c.to_dict() for c in cb]
            and arr_eq(a.P1, b.P1) and arr_eq(a.WB, b.WB) and arr_eq(a.WB_hom, b.WB_hom)
            and arr_eq(a.WC, b.WC) and arr_eq(a.p0_constant(), b.p0_constant())
            and (a.a, a.b, a.name) == (b.a, b.b, b.name)
        )
    raise TypeError(type(a).__name__)


def initial_state(spec: InitialState, n: int) -> np.ndarray:
    if spec.kind == "zero":
        return np.zeros(n, dtype=complex)
    if spec.kind == "vector":
        x = to_array(spec.values)
        if x is None or x.size != n:
            raise ModelFileError(f"x0 must have {n} entries")
        return x.ravel()
    rng = np.random.default_rng(spec.seed)
    return spec.scale * rng.standard_normal(n).astype(complex)


def input_signal(spec: InputSpec, m: int) -> InputSignal:
    if spec.kind == "zero":
        return InputSignal.zero(m)
    if spec.kind == "constant":
        return InputSignal.constant(to_array(spec.value))
    if spec.kind == "sinusoid":
        amp = np.ones(m) if spec.amplitude is None else to_array(spec.amplitude)
        return InputSignal.sinusoid(amp, spec.omega, spec.phase)
    if spec.times is None or spec.values is None:
        raise ModelFileError("table input needs times and values")
    return InputSignal.table(spec.times, to_array(spec.values))


def lambdas(scan: Scan) -> list[complex]:
    out = []
    for v in scan.lambdas:
        a = to_array(v).ravel()
        out.append(complex(a[0]) if a.size == 1 else complex(a[0].real, a[1].real))
    return out


def to_jsonable(x: Any):
    if isinstance(x, dict):
        return {k: to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x
