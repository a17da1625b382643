"""Finite-dimensional node analysis.

A :class:`DiscreteNode` is the state-space quadruple ``(A, B, C, D)``
together with the energy metric that defines the state inner product
``<x, z> = z^* M x`` (``M`` the assembled mass matrix).  All dissipativity
statements are made in that metric.  With a Cholesky factor ``M = L L^*``
the map ``x -> L^* x`` is an isometry onto Euclidean space, so the metric
generator ``L^* A L^{-*}`` carries every question back to standard
numerical linear algebra.
"""

from __future__ import annotations

import csv
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Sequence

import numpy as np
import scipy.linalg as sla

from phnode.core import DissipationMatrix, default_tol, hermitian_part
from phnode.errors import ResolventError, StructureError
from phnode.quadham import EnergyMetric
from phnode.quadham import hamiltonian as _metric_hamiltonian

__all__ = [
    "DiscreteNode",
    "TransferSample",
    "MaxDissReport",
    "ContractionReport",
    "ScanReport",
    "main_operator",
    "metric_generator",
    "sym_part_bound",
    "check_maximal_dissipative",
    "contraction_scan",
    "adjoint_node",
    "transfer_eval",
    "transfer_batch",
    "positive_real_scan",
    "vertical_line_scan",
    "wellposedness_proxy",
    "default_s_grid",
    "write_scan_csv",
    "scan_threads",
]

TOL_PR = 1e-9
MODAL_COND_MAX = 1e6


@dataclass(frozen=True, eq=False)
class DiscreteNode:
    """State-space realization ``xdot = A x + B u``, ``y = C x + D u`` on a metric.

    ``extras`` carries optional discretization data (boundary trace maps,
    grid) used for diagnostics; it never enters the dynamics.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    metric: EnergyMetric
    provenance: str = ""
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=complex))
        n = A.shape[0]
        B = np.asarray(self.B, dtype=complex).reshape(n, -1)
        m = B.shape[1]
        C = np.asarray(self.C, dtype=complex).reshape(m, n)
        D = np.asarray(self.D, dtype=complex).reshape(m, m)
        if A.shape != (n, n):
            raise StructureError(f"A must be square, got {A.shape}")
        if self.metric.size != n:
            raise StructureError(f"metric of size {self.metric.size} does not match state dimension {n}")
        for name, val in (("A", A), ("B", B), ("C", C), ("D", D)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    # names used in the operator-node vocabulary
    Aop = property(lambda self: self.A)
    Bop = property(lambda self: self.B)
    Cop = property(lambda self: self.C)
    Dop = property(lambda self: self.D)

    @cached_property
    def mass(self) -> np.ndarray:
        return self.metric.mass

    @cached_property
    def chol(self) -> np.ndarray:
        return self.metric.cholesky

    def energy(self, x) -> float:
        return _metric_hamiltonian(self.metric, x)

    def output(self, x, u) -> np.ndarray:
        return self.C @ x + self.D @ np.atleast_1d(u)

    def power_terms(self, x, u) -> tuple[float, float]:
        """``(supplied, dissipated)`` at ``(x, u)``.

        ``dissipated = Re <A x + B u, x> - Re u^* (C x + D u)`` is the energy
        rate not accounted for by the port; for a node built from a pH
        structure it equals ``Re z^* M z`` with ``z = (Hx; u)``.
        """
        u = np.atleast_1d(np.asarray(u, dtype=complex))
        y = self.output(x, u)
        supplied = float(np.real(np.vdot(u, y)))
        xdot = self.A @ x + self.B @ u
        rate = float(np.real(np.vdot(x, self.mass @ xdot)))
        return supplied, rate - supplied

    def with_blocks(self, **kw) -> "DiscreteNode":
        vals = dict(A=self.A, B=self.B, C=self.C, D=self.D, metric=self.metric,
                    provenance=self.provenance, extras=self.extras)
        vals.update(kw)
        return DiscreteNode(**vals)


def main_operator(blocks, n: int | None = None, riesz=None) -> np.ndarray:
    """Main operator: the ``A&B`` block restricted to ``u = 0``.

    ``blocks`` is either the ``n x (n+m)`` matrix ``[A | B]`` or a
    :class:`~phnode.core.DissipationMatrix`, in which case its ``F&G`` rows
    are used.  With ``riesz`` given the result is ``F @ riesz``, the main
    operator of the pH node generated by a dissipation node.
    """
    if isinstance(blocks, DissipationMatrix):
        n = blocks.n
        blocks = blocks.FG
    blocks = np.atleast_2d(np.asarray(blocks, dtype=complex))
    if n is None:
        n = blocks.shape[0]
    if blocks.shape[0] != n or blocks.shape[1] < n:
        raise StructureError(f"cannot extract an {n}x{n} main operator from shape {blocks.shape}")
    A = blocks[:, :n]
    if riesz is not None:
        A = A @ np.asarray(riesz, dtype=complex)
    return A


def _chol(metric) -> np.ndarray | None:
    if metric is None:
        return None
    if isinstance(metric, EnergyMetric):
        return metric.cholesky
    return np.linalg.cholesky(np.asarray(metric, dtype=complex))


def _mass(metric, n) -> np.ndarray:
    if metric is None:
        return np.eye(n, dtype=complex)
    if isinstance(metric, EnergyMetric):
        return metric.mass
    return np.asarray(metric, dtype=complex)


def metric_generator(A, metric=None) -> np.ndarray:
    """``L^* A L^{-*}``: the generator expressed in metric-orthonormal coordinates."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    L = _chol(metric)
    if L is None:
        return A
    LA = L.conj().T @ A
    # right-multiply by L^{-*}:  X L^* = LA  <=>  L X^* = LA^*
    return sla.solve_triangular(L, LA.conj().T, lower=True).conj().T


def sym_part_bound(node_or_A, metric=None) -> float:
    """Largest eigenvalue of the Hermitian part of the metric generator."""
    if isinstance(node_or_A, DiscreteNode):
        node_or_A, metric = node_or_A.A, node_or_A.metric
    Ah = metric_generator(node_or_A, metric)
    if Ah.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(hermitian_part(Ah))[-1])


# {{{ maximal dissipativity


@dataclass(frozen=True)
class MaxDissReport:
    """Three characterizations of maximal dissipativity, evaluated separately.

    * ``is_dissipative``: ``Re <A x, x> <= tol ||x||^2``;
    * ``resolvent_surjective[k]``: ``lambda_k - A`` is onto with the
      resolvent bound ``||(lambda - A) x|| >= Re(lambda) ||x||``;
    * ``adjoint_dissipative``: the metric adjoint is dissipative.
    """

    is_dissipative: bool
    resolvent_surjective: tuple[bool, ...]
    adjoint_dissipative: bool
    lambdas: tuple[complex, ...]
    herm_max_eig: float
    adjoint_herm_max_eig: float
    resolvent_sigma_min: tuple[float, ...]
    resolvent_cond: tuple[float, ...]
    tol: float

    @property
    def flags(self) -> tuple[bool, ...]:
        return (self.is_dissipative, *self.resolvent_surjective, self.adjoint_dissipative)

    @property
    def consistent(self) -> bool:
        return len(set(self.flags)) == 1

    @property
    def maximal_dissipative(self) -> bool:
        return all(self.flags)

    def as_dict(self) -> dict:
        return {
            "is_dissipative": self.is_dissipative,
            "resolvent_surjective": list(self.resolvent_surjective),
            "adjoint_dissipative": self.adjoint_dissipative,
            "consistent": self.consistent,
            "lambdas": [[float(l.real), float(l.imag)] for l in self.lambdas],
            "herm_max_eig": self.herm_max_eig,
            "adjoint_herm_max_eig": self.adjoint_herm_max_eig,
            "resolvent_sigma_min": list(self.resolvent_sigma_min),
            "resolvent_cond": list(self.resolvent_cond),
            "tol": self.tol,
        }


def check_maximal_dissipative(A, metric=None, lambdas: Sequence[complex] = (1.0, 1.0 + 1.0j, 10.0),
                              tol: float | None = None) -> MaxDissReport:
    """Evaluate the three equivalent maximality conditions independently.

    The first two work in metric-orthonormal coordinates.  The adjoint test
    uses the generalized Hermitian eigenproblem
    ``(A^* M + M A) v = mu M v`` for the adjoint ``M^{-1} A^* M``, which does
    not pass through the Cholesky factor.
    """
    lambdas = tuple(complex(l) for l in lambdas)
    if any(l.real <= 0 for l in lambdas):
        raise ValueError("all test points must lie in the open right half-plane")
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    n = A.shape[0]
    Ah = metric_generator(A, metric)
    if tol is None:
        tol = default_tol(Ah)
    herm = float(np.linalg.eigvalsh(hermitian_part(Ah))[-1]) if n else 0.0

    smin, conds, surj = [], [], []
    for lam in lambdas:
        sv = np.linalg.svd(lam * np.eye(n) - Ah, compute_uv=False) if n else np.array([np.inf])
        s_lo = float(sv[-1])
        smin.append(s_lo)
        conds.append(float(sv[0] / s_lo) if s_lo > 0 else np.inf)
        surj.append(bool(s_lo > 0 and s_lo >= lam.real - tol))

    Mm = _mass(metric, n)
    Ash = np.linalg.solve(Mm, A.conj().T @ Mm)
    S = hermitian_part(Mm @ Ash)
    adj = float(sla.eigh(S, hermitian_part(Mm), eigvals_only=True)[-1]) if n else 0.0

    return MaxDissReport(
        is_dissipative=herm <= tol,
        resolvent_surjective=tuple(surj),
        adjoint_dissipative=adj <= tol,
        lambdas=lambdas,
        herm_max_eig=herm,
        adjoint_herm_max_eig=adj,
        resolvent_sigma_min=tuple(smin),
        resolvent_cond=tuple(conds),
        tol=float(tol),
    )


# }}}


# {{{ contraction


@dataclass(frozen=True)
class ContractionReport:
    times: tuple[float, ...]
    norms: tuple[float, ...]
    tol: float

    @property
    def passed(self) -> bool:
        return all(v <= 1.0 + self.tol for v in self.norms)

    @property
    def worst(self) -> tuple[float, float]:
        k = int(np.argmax(self.norms))
        return self.times[k], self.norms[k]

    @property
    def failures(self) -> list[tuple[float, float]]:
        return [(t, v) for t, v in zip(self.times, self.norms) if v > 1.0 + self.tol]


def contraction_scan(A, metric=None, times: Sequence[float] = (0.1, 1.0, 10.0), tol: float = 1e-8) -> ContractionReport:
    """Metric operator norm of ``exp(t A)`` at each ``t``.

    The norm is the spectral norm of ``exp(t L^* A L^{-*})``, which equals
    ``L^* exp(t A) L^{-*}``.
    """
    times = tuple(float(t) for t in times)
    if any(not np.isfinite(t) or t < 0 for t in times):
        raise ValueError("times must be finite and nonnegative")
    Ah = metric_generator(A, metric)
    norms = []
    for t in times:
        if t == 0.0 or Ah.size == 0:
            norms.append(1.0 if Ah.size else 0.0)
            continue
        norms.append(float(np.linalg.norm(sla.expm(t * Ah), 2)))
    return ContractionReport(times, tuple(norms), tol)


# }}}


def adjoint_node(node: DiscreteNode) -> DiscreteNode:
    """Metric adjoint ``(M^{-1} A^* M, M^{-1} C^*, B^* M, D^*)``.

    Its transfer function satisfies ``G_adj(conj(s)) = G(s)^*``.
    """
    Mm = node.mass
    Minv = _block_inverse(node.metric)
    return DiscreteNode(
        A=Minv @ (node.A.conj().T @ Mm),
        B=Minv @ node.C.conj().T,
        C=node.B.conj().T @ Mm,
        D=node.D.conj().T,
        metric=node.metric,
        provenance=f"adjoint({node.provenance})",
    )


def _block_inverse(metric: EnergyMetric) -> np.ndarray:
    out = np.zeros((metric.size, metric.size), dtype=complex)
    b = metric.block
    inv = metric.inverse_blocks / metric.weights[:, None, None]
    for k in range(metric.nentries):
        out[k * b:(k + 1) * b, k * b:(k + 1) * b] = inv[k]
    return out


# {{{ transfer functions


@dataclass(frozen=True)
class TransferSample:
    s: complex
    G: np.ndarray
    herm_min_eig: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.G, 2)) if self.G.size else 0.0


def _herm_min(G: np.ndarray) -> np.ndarray:
    if G.shape[-1] == 0:
        return np.zeros(G.shape[:-2])
    Gh = 0.5 * (G + np.conj(np.swapaxes(G, -1, -2)))
    return np.linalg.eigvalsh(Gh)[..., 0]


def transfer_eval(node: DiscreteNode, s: complex) -> TransferSample:
    """``G(s) = C (s - A)^{-1} B + D`` by a direct LU solve."""
    s = complex(s)
    n = node.n
    with warnings.catch_warnings():
        # exact singularity is reported below as a ResolventError
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(s * np.eye(n) - node.A, check_finite=False) if n else (None, None)
    if n:
        d = np.abs(np.diag(lu))
        if d.min() <= 1e-14 * max(d.max(), 1.0):
            raise ResolventError(f"s = {s} is (numerically) an eigenvalue of the main operator")
        G = node.C @ sla.lu_solve((lu, piv), node.B) + node.D
    else:
        G = node.D.copy()
    return TransferSample(s, G, float(_herm_min(G)))


class _Modal:
    """Transfer evaluation through an eigendecomposition of the metric generator."""

    def __init__(self, node: DiscreteNode):
        L = node.chol
        Ah = metric_generator(node.A, node.metric)
        Bh = L.conj().T @ node.B
        Ch = sla.solve_triangular(L, node.C.conj().T, lower=True).conj().T
        lam, V = np.linalg.eig(Ah)
        self.cond = float(np.linalg.cond(V))
        self.lam = lam
        self.CV = Ch @ V
        self.VB = np.linalg.solve(V, Bh)
        self.D = node.D

    def __call__(self, s: np.ndarray) -> np.ndarray:
        r = 1.0 / (s[:, None] - self.lam[None, :])
        return np.einsum("in,sn,nj->sij", self.CV, r, self.VB) + self.D


def scan_threads() -> int:
    """Worker count for scans, capped by ``PHNODE_THREADS``."""
    env = os.environ.get("PHNODE_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = max(1, min(n, int(env)))
        except ValueError:
            pass
    return n


def transfer_batch(node: DiscreteNode, s, chunk: int = 512) -> np.ndarray:
    """``G`` at every point of ``s``; returns an array of shape ``(len(s), m, m)``.

    Uses a modal expansion when the eigenvector basis of the metric
    generator is well conditioned (always the case for normal generators),
    and direct solves otherwise.  Chunks run on up to :func:`scan_threads`
    workers; results do not depend on the worker count.
    """
    s = np.asarray(s, dtype=complex).ravel()
    m = node.m
    if node.n == 0 or m == 0:
        return np.broadcast_to(node.D, (s.size, m, m)).copy()
    modal = _Modal(node)
    if modal.cond <= MODAL_COND_MAX:
        d = np.abs(s[:, None] - modal.lam[None, :]).min(axis=1)
        if np.any(d <= 1e-13 * max(1.0, np.abs(modal.lam).max())):
            k = int(np.argmin(d))
            raise ResolventError(f"s = {s[k]} is (numerically) an eigenvalue of the main operator")
        fn = modal
    else:
        def fn(block):
            return np.stack([transfer_eval(node, z).G for z in block])
    chunks = [s[i:i + chunk] for i in range(0, s.size, chunk)]
    workers = min(scan_threads(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True)
class ScanReport:
    """Transfer-function samples with a pass/fail verdict.

    ``kind`` is ``"positive-real"`` (pass iff ``min herm_min_eig >= -tol``)
    or ``"vertical-line"`` (informational; pass iff every sample is finite).
    """

    kind: str
    s: np.ndarray
    herm_min_eig: np.ndarray
    norm_G: np.ndarray
    tol: float

    @property
    def min_herm(self) -> float:
        return float(self.herm_min_eig.min()) if self.s.size else 0.0

    @property
    def argmin_s(self) -> complex:
        return complex(self.s[int(np.argmin(self.herm_min_eig))]) if self.s.size else 0j

    @property
    def sup_norm(self) -> float:
        return float(self.norm_G.max()) if self.s.size else 0.0

    @property
    def argmax_s(self) -> complex:
        return complex(self.s[int(np.argmax(self.norm_G))]) if self.s.size else 0j

    @property
    def passed(self) -> bool:
        if self.kind == "positive-real":
            return self.min_herm >= -self.tol
        return bool(np.all(np.isfinite(self.norm_G)))

    def summary(self) -> str:
        if self.kind == "positive-real":
            return (f"positive-real: {'PASS' if self.passed else 'FAIL'} "
                    f"min herm eig {self.min_herm:.6e} at s = {self.argmin_s:.6g} (tol {self.tol:g})")
        return f"vertical-line: sup |G| = {self.sup_norm:.6e} at s = {self.argmax_s:.6g}"


def _scan(node, s, kind, tol) -> ScanReport:
    G = transfer_batch(node, s)
    norms = np.linalg.norm(G, 2, axis=(1, 2)) if node.m else np.zeros(len(s))
    return ScanReport(kind, np.asarray(s, dtype=complex).ravel(), _herm_min(G), norms, tol)


def default_s_grid() -> np.ndarray:
    """32 x 33 points: ``Re s`` log-spaced on ``[1e-2, 1e2]``, ``Im s`` on ``[-1e2, 1e2]``."""
    re = np.logspace(-2, 2, 32)
    im = np.linspace(-100.0, 100.0, 33)
    return (re[:, None] + 1j * im[None, :]).ravel()


def positive_real_scan(node: DiscreteNode, s_grid=None, tol_pr: float = TOL_PR) -> ScanReport:
    """Smallest eigenvalue of ``(G + G^*)/2`` over ``s_grid`` (default: :func:`default_s_grid`)."""
    s = default_s_grid() if s_grid is None else np.asarray(s_grid, dtype=complex).ravel()
    if np.any(s.real <= 0):
        raise ValueError("positive-real scan points must satisfy Re s > 0")
    return _scan(node, s, "positive-real", tol_pr)


def vertical_line_scan(node: DiscreteNode, sigma: float, omega) -> ScanReport:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    s = sigma + 1j * np.asarray(omega, dtype=float).ravel()
    return _scan(node, s, "vertical-line", 0.0)


def wellposedness_proxy(node: DiscreteNode, sigma: float, omega_grid) -> float:
    """Sampled ``sup |G(sigma + i omega)|`` over ``omega_grid``."""
    return vertical_line_scan(node, sigma, omega_grid).sup_norm


def write_scan_csv(path, report: ScanReport) -> None:
    """Columns ``re_s, im_s, herm_min_eig, norm_G`` at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re_s", "im_s", "herm_min_eig", "norm_G"])
        for s, h, g in zip(report.s, report.herm_min_eig, report.norm_G):
            w.writerow(["%.17g" % v for v in (s.real, s.imag, h, g)])


# }}}
