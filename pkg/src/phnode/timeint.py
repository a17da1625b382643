"""Implicit midpoint time stepping with a per-step energy audit.

For a linear node and the quadratic storage ``H(x) = x^* M x / 2`` the
midpoint rule gives

    H(x_{k+1}) - H(x_k) = tau * Re <A x_mid + B u_mid, x_mid>_M

exactly, so the energy balance can be certified step by step up to the
backward error of the linear solve.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from phnode.analysis import DiscreteNode
from phnode.errors import CompatibilityWarning, StepSizeError, StructureError

__all__ = [
    "InputSignal",
    "Trajectory",
    "EnergyAudit",
    "MidpointStepper",
    "implicit_midpoint_step",
    "simulate",
    "energy_audit",
    "write_trajectory_csv",
    "write_states_csv",
]

TOL_BAL = 1e-9
COMPAT_TOL = 1e-6


@dataclass(frozen=True)
class InputSignal:
    """Input ``t -> u(t)`` of dimension ``m``.

    kinds: ``zero``, ``constant`` (``value``), ``sinusoid``
    (``amplitude * sin(omega t + phase)``), ``table`` (``times``, ``values``,
    linear interpolation, held constant outside the table).
    """

    kind: str
    m: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "sinusoid", "table"):
            raise StructureError(f"unknown input kind {self.kind!r}")

    @classmethod
    def zero(cls, m: int) -> "InputSignal":
        return cls("zero", m)

    @classmethod
    def constant(cls, value) -> "InputSignal":
        v = np.atleast_1d(np.asarray(value, dtype=complex))
        return cls("constant", v.size, {"value": v})

    @classmethod
    def sinusoid(cls, amplitude, omega: float, phase: float = 0.0) -> "InputSignal":
        amp = np.atleast_1d(np.asarray(amplitude, dtype=complex))
        return cls("sinusoid", amp.size, {"amplitude": amp, "omega": float(omega), "phase": float(phase)})

    @classmethod
    def table(cls, times, values) -> "InputSignal":
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        if t.ndim != 1 or v.shape[0] != t.size or t.size < 1 or np.any(np.diff(t) <= 0):
            raise StructureError("table needs strictly increasing times and one value row per time")
        return cls("table", v.shape[1], {"times": t, "values": v})

    def __call__(self, t: float) -> np.ndarray:
        p = self.params
        if self.kind == "zero":
            return np.zeros(self.m, dtype=complex)
        if self.kind == "constant":
            return p["value"].copy()
        if self.kind == "sinusoid":
            return p["amplitude"] * np.sin(p["omega"] * t + p["phase"])
        tt, vv = p["times"], p["values"]
        return np.array([np.interp(t, tt, vv[:, j].real) + 1j * np.interp(t, tt, vv[:, j].imag)
                         for j in range(self.m)])

    def to_dict(self) -> dict:
        def enc(a):
            a = np.asarray(a)
            return a.real.tolist() if not np.any(a.imag) else {"real": a.real.tolist(), "imag": a.imag.tolist()}

        out = {"kind": self.kind}
        if self.kind == "zero":
            out["m"] = self.m
        elif self.kind == "constant":
            out["value"] = enc(self.params["value"])
        elif self.kind == "sinusoid":
            out.update(amplitude=enc(self.params["amplitude"]), omega=self.params["omega"],
                       phase=self.params["phase"])
        else:
            out.update(times=self.params["times"].tolist(), values=enc(self.params["values"]))
        return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Output of :func:`simulate`.

    ``inputs``, ``outputs``, ``supplied``, ``dissipated`` and ``residual``
    belong to the steps ``k -> k+1`` and are evaluated at the midpoint.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    hamiltonian: np.ndarray
    supplied: np.ndarray
    dissipated: np.ndarray
    residual: np.ndarray
    tau: float
    signature: tuple

    @property
    def steps(self) -> int:
        return self.residual.size


@dataclass(frozen=True)
class EnergyAudit:
    max_residual: float
    max_relative_residual: float
    residual_ok: bool
    inequality_ok: bool
    dissipation_ok: bool
    cumulative_supplied: float
    cumulative_dissipated: float
    energy_change: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual_ok and self.inequality_ok and self.dissipation_ok

    def as_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                for k, v in self.__dict__.items()} | {"passed": self.passed}


def _signature(node: DiscreteNode) -> tuple:
    return (node.n, node.m, node.provenance, float(np.linalg.norm(node.A)))


SPARSE_MIN_N = 64
SPARSE_MAX_FILL = 0.05


def _realify(a: np.ndarray) -> np.ndarray:
    """Drop a vanishing imaginary part so products stay in real arithmetic."""
    return a.real.copy() if not np.any(a.imag) else a


def _compact(a: np.ndarray):
    """Real if possible, and CSR if the matrix is large and mostly zero."""
    a = _realify(np.asarray(a))
    if a.ndim == 2 and min(a.shape) >= SPARSE_MIN_N and np.count_nonzero(a) <= SPARSE_MAX_FILL * a.size:
        return sp.csr_matrix(a)
    return a


def _is_real(a) -> bool:
    return not np.iscomplexobj(a.data if sp.issparse(a) else a)


def _mv(a, v: np.ndarray) -> np.ndarray:
    # real matrix times complex vector without casting the matrix
    if _is_real(a) and np.iscomplexobj(v):
        return a @ v.real + 1j * (a @ v.imag)
    return a @ v


class MidpointStepper:
    """Implicit midpoint steps of fixed size with a cached LU factorization.

    Real nodes are factored in real arithmetic; complex right-hand sides are
    then solved as two real columns.  Large, mostly zero generators use a
    sparse factorization.
    """

    def __init__(self, node: DiscreteNode, tau: float):
        tau = float(tau)
        if tau == 0.0 or not np.isfinite(tau):
            raise StepSizeError(f"step size must be finite and nonzero, got {tau}")
        self.node = node
        self.tau = tau
        n = node.n
        A = _compact(node.A)
        self.B = _compact(node.B)
        self.real = _is_real(A)
        self.lu = self.splu = None
        if sp.issparse(A):
            I = sp.identity(n, format="csc")
            self.rhs = (I + 0.5 * tau * A).tocsr()
            try:
                self.splu = splu((I - 0.5 * tau * A).tocsc())
            except RuntimeError as exc:
                raise StepSizeError(f"I - (tau/2) A is singular for tau = {tau}") from exc
            d = np.abs(self.splu.U.diagonal())
        else:
            lhs = np.eye(n) - 0.5 * tau * A
            self.rhs = np.eye(n) + 0.5 * tau * A
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                self.lu = sla.lu_factor(lhs, check_finite=False) if n else None
            d = np.abs(np.diag(self.lu[0])) if n else np.ones(1)
        if d.min() <= 1e-14 * max(d.max(), 1.0):
            raise StepSizeError(f"I - (tau/2) A is singular for tau = {tau}")

    def _solve(self, b):
        if self.splu is not None:
            return self.splu.solve(b)
        return sla.lu_solve(self.lu, b, check_finite=False)

    def step(self, x, u_mid):
        node = self.node
        u_mid = np.atleast_1d(np.asarray(u_mid, dtype=complex))
        if node.n:
            b = _mv(self.rhs, x) + self.tau * _mv(self.B, u_mid)
            if self.real:
                sol = self._solve(np.column_stack([b.real, b.imag]))
                x_next = sol[:, 0] + 1j * sol[:, 1]
            else:
                x_next = self._solve(b)
        else:
            x_next = np.zeros(0, dtype=complex)
        y_mid = node.output(0.5 * (x + x_next), u_mid)
        return x_next, y_mid


def implicit_midpoint_step(node: DiscreteNode, x, u_mid, tau: float):
    """One step ``(I - tau A/2) x_+ = (I + tau A/2) x + tau B u_mid``.

    Returns ``(x_+, y_mid)`` with ``y_mid = C x_mid + D u_mid``.  A negative
    ``tau`` steps backwards in time.
    """
    return MidpointStepper(node, tau).step(np.asarray(x, dtype=complex), u_mid)


def _check_compatibility(node, x0, u0):
    defect = node.extras.get("boundary_defect")
    if defect is None or node.m == 0:
        return
    Mx, Mu = defect
    d = Mx @ x0 + Mu @ u0
    scale = 1.0 + float(np.linalg.norm(Mx @ x0)) + float(np.linalg.norm(u0))
    if np.linalg.norm(d) > COMPAT_TOL * scale:
        warnings.warn(
            f"initial state and input disagree on the boundary (defect {np.linalg.norm(d):.3e})",
            CompatibilityWarning,
            stacklevel=3,
        )


def simulate(node: DiscreteNode, x0, signal: InputSignal | None, t_final: float, tau: float) -> Trajectory:
    """Integrate on the uniform grid ``t_k = k tau``, ``k = 0, ..., ceil(t_final / tau)``.

    Inputs are sampled at step midpoints.
    """
    if not (t_final > 0 and tau > 0):
        raise StepSizeError("t_final and tau must be positive")
    x = np.asarray(x0, dtype=complex).ravel()
    if x.size != node.n:
        raise StructureError(f"x0 has length {x.size}, node has {node.n} states")
    if signal is None:
        signal = InputSignal.zero(node.m)
    if signal.m != node.m:
        raise StructureError(f"input has dimension {signal.m}, node expects {node.m}")
    K = int(np.ceil(t_final / tau - 1e-9))
    times = tau * np.arange(K + 1)
    _check_compatibility(node, x, signal(0.0))

    stepper = MidpointStepper(node, tau)
    MA, MB = _compact(node.mass @ node.A), _compact(node.mass @ node.B)
    states = np.empty((K + 1, node.n), dtype=complex)
    inputs = np.empty((K, node.m), dtype=complex)
    outputs = np.empty((K, node.m), dtype=complex)
    energy = np.empty(K + 1)
    supplied = np.empty(K)
    dissipated = np.empty(K)
    states[0] = x
    energy[0] = node.energy(x)
    for k in range(K):
        u = signal(times[k] + 0.5 * tau)
        x_next, y = stepper.step(x, u)
        xm = 0.5 * (x + x_next)
        sup = float(np.real(np.vdot(u, y)))
        rate = float(np.real(np.vdot(xm, _mv(MA, xm) + _mv(MB, u))))
        inputs[k], outputs[k] = u, y
        supplied[k], dissipated[k] = sup, rate - sup
        states[k + 1] = x_next
        energy[k + 1] = node.energy(x_next)
        x = x_next
    residual = np.diff(energy) - tau * (supplied + dissipated)
    return Trajectory(times, states, inputs, outputs, energy, supplied, dissipated, residual,
                      float(tau), _signature(node))


def energy_audit(traj: Trajectory, node: DiscreteNode, tol_bal: float = TOL_BAL) -> EnergyAudit:
    """Check ``|r_k| <= tol (1 + H_k)`` and ``H_{k+1} - H_k <= tau supplied_k + tol (1 + H_k)``."""
    if traj.signature != _signature(node):
        raise StructureError("trajectory was not produced by this node")
    H = traj.hamiltonian
    bound = tol_bal * (1.0 + H[:-1])
    r = np.abs(traj.residual)
    dH = np.diff(H)
    return EnergyAudit(
        max_residual=float(r.max(initial=0.0)),
        max_relative_residual=float((r / (1.0 + H[:-1])).max(initial=0.0)),
        residual_ok=bool(np.all(r <= bound)),
        inequality_ok=bool(np.all(dH <= traj.tau * traj.supplied + bound)),
        dissipation_ok=bool(np.all(traj.tau * traj.dissipated <= bound)),
        cumulative_supplied=float(traj.tau * traj.supplied.sum()),
        cumulative_dissipated=float(traj.tau * traj.dissipated.sum()),
        energy_change=float(H[-1] - H[0]),
        tol=tol_bal,
    )


def _fmt(v) -> str:
    return "%.17g" % v


def write_trajectory_csv(path, traj: Trajectory) -> None:
    """Columns ``t, H, supplied, dissipated, residual``.

    Row ``k`` carries ``H(x_k)`` and the quantities of step ``k -> k+1``;
    the last row has ``nan`` for the step columns.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "H", "supplied", "dissipated", "residual"])
        K = traj.steps
        for k in range(K + 1):
            step = (traj.supplied[k], traj.dissipated[k], traj.residual[k]) if k < K else (np.nan,) * 3
            w.writerow([_fmt(traj.times[k]), _fmt(traj.hamiltonian[k]), *map(_fmt, step)])


def write_states_csv(path, traj: Trajectory, every: int = 1) -> None:
    """State snapshots every ``every`` steps: ``t, re_x0, im_x0, re_x1, ...``."""
    if every < 1:
        raise ValueError("every must be >= 1")
    n = traj.states.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"{p}_x{i}" for i in range(n) for p in ("re", "im")])
        for k in range(0, traj.times.size, every):
            x = traj.states[k]
            row = [_fmt(traj.times[k])]
            for v in x:
                row += [_fmt(v.real), _fmt(v.imag)]
            w.writerow(row)
