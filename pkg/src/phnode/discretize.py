"""Structure-preserving semi-discretization of 1-D boundary port systems.

The continuous model is

    x_t = P1 (H x)_xi + P0 H x       on (a, b)
    u   = W_B T (z(b); z(a)) / sqrt(2),   y = W_C T (z(b); z(a)) / sqrt(2)

with co-energy ``z = H x``, ``P1`` Hermitian invertible, ``P0`` dissipative and
``T = [[P1, -P1], [I, I]]``.  Two schemes are provided, both with an exact
discrete energy identity

    d/dt (x^* M x / 2) = Re <z, P0 z>_w + Re u^* y.

``collocated``
    Second-order SBP operator on the nodes; the boundary map
    ``(W_B; W_C)`` is imposed weakly by replacing the discrete boundary
    value of ``W_B T z / sqrt(2)`` with the input.  Works for any ``P1``.

``staggered``
    For ``P1 = [[0, G], [G^*, 0]]`` (after permutation): efforts of the
    first group live on nodes, those of the second group on cells.
    Prescribed node values are eliminated from the state.  Free of the
    spurious boundary mode of the collocated scheme, so the transfer
    function stays bounded on vertical lines uniformly in the mesh.

The diffusion node uses the collocated operator for both gradient and
divergence with Dirichlet data eliminated strongly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from phnode.analysis import DiscreteNode
from phnode.core import ValidationReport, hermitian_part
from phnode.errors import StructureError
from phnode.quadham import DensitySpec, EnergyMetric, as_coefficient, build_energy_metric

__all__ = [
    "SBPOperator",
    "StaggeredOperator",
    "HyperbolicModel",
    "DiffusionModel",
    "build_sbp",
    "build_staggered",
    "port_sigma",
    "boundary_T",
    "selector_rows",
    "check_port_condition",
    "complete_boundary_matrices",
    "staggered_groups",
    "assemble_hyperbolic_node",
    "apply_io_redefinition",
    "assemble_diffusion_node",
    "boundary_traces",
]

PORT_TOL = 1e-12


# {{{ difference operators


@dataclass(frozen=True)
class SBPOperator:
    """Second-order SBP first derivative ``D = P_w^{-1} Q`` on a uniform grid."""

    grid: np.ndarray
    weights: np.ndarray
    Q: np.ndarray
    D: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.grid.size - 1

    @property
    def E(self) -> np.ndarray:
        e = np.zeros(self.grid.size)
        e[0], e[-1] = -1.0, 1.0
        return np.diag(e)


def build_sbp(n_cells: int, a: float = 0.0, b: float = 1.0) -> SBPOperator:
    """Central interior stencil, one-sided closures, trapezoidal norm."""
    if int(n_cells) != n_cells or n_cells < 2:
        raise StructureError(f"n_cells must be an integer >= 2, got {n_cells}")
    if not b > a:
        raise StructureError("interval must satisfy a < b")
    n = int(n_cells)
    grid = np.linspace(a, b, n + 1)
    h = (b - a) / n
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    Q = 0.5 * (np.eye(n + 1, k=1) - np.eye(n + 1, k=-1))
    Q[0, 0], Q[-1, -1] = -0.5, 0.5
    return SBPOperator(grid, w, Q, Q / w[:, None])


@dataclass(frozen=True)
class StaggeredOperator:
    """Node-to-cell difference ``G`` and node/cell averaging on a uniform grid.

    ``node_weights`` are the trapezoidal (dual-cell) weights, ``cell_weights``
    the cell lengths.  The discrete divergence ``-P_n^{-1} G^T P_c`` is the
    weighted adjoint of ``-G``; at the end nodes it carries the boundary
    values of the cell field.
    """

    grid: np.ndarray
    node_weights: np.ndarray
    cell_weights: np.ndarray
    G: np.ndarray
    avg: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.grid[1:] + self.grid[:-1])

    @property
    def avg_adjoint(self) -> np.ndarray:
        """Cell-to-node map ``P_n^{-1} avg^T P_c``."""
        return (self.avg.T * self.cell_weights) / self.node_weights[:, None]


def build_staggered(n_cells: int, a: float = 0.0, b: float = 1.0) -> StaggeredOperator:
    sbp = build_sbp(n_cells, a, b)
    n = sbp.n_cells
    h = np.diff(sbp.grid)
    G = (np.eye(n, n + 1, k=1) - np.eye(n, n + 1)) / h[:, None]
    avg = 0.5 * (np.eye(n, n + 1, k=1) + np.eye(n, n + 1))
    return StaggeredOperator(sbp.grid, sbp.weights, h, G, avg)


# }}}


# {{{ boundary algebra


def port_sigma(m: int) -> np.ndarray:
    I = np.eye(m)
    Z = np.zeros((m, m))
    return np.block([[Z, I], [I, Z]])


def boundary_T(P1) -> np.ndarray:
    """``T = [[P1, -P1], [I, I]]`` acting on ``(z(b); z(a))``."""
    P1 = np.atleast_2d(np.asarray(P1, dtype=complex))
    I = np.eye(P1.shape[0])
    return np.block([[P1, -P1], [I, I]])


def selector_rows(P1, rows) -> np.ndarray:
    """Rows of ``W`` such that ``W T (z(b); z(a)) / sqrt(2) = rows @ (z(b); z(a))``."""
    rows = np.atleast_2d(np.asarray(rows, dtype=complex))
    return np.sqrt(2.0) * rows @ np.linalg.inv(boundary_T(P1))


def _as_rows(W, m) -> np.ndarray:
    if W is None:
        return np.zeros((0, 2 * m), dtype=complex)
    W = np.asarray(W, dtype=complex)
    if W.size == 0:
        return np.zeros((0, 2 * m), dtype=complex)
    W = np.atleast_2d(W)
    if W.shape[1] != 2 * m:
        raise StructureError(f"boundary rows must have {2 * m} columns, got {W.shape}")
    return W


def check_port_condition(WB, WC, tol: float = PORT_TOL) -> tuple[bool, float]:
    """Residual ``||Sigma - [W_B; W_C] Sigma [W_B; W_C]^*||_F`` and whether it is within ``tol``."""
    WB = np.atleast_2d(np.asarray(WB, dtype=complex))
    WC = np.atleast_2d(np.asarray(WC, dtype=complex))
    m = WB.shape[1] // 2
    if WB.shape != (m, 2 * m) or WC.shape != (m, 2 * m):
        raise StructureError(f"W_B and W_C must both be m x 2m, got {WB.shape} and {WC.shape}")
    W = np.vstack([WB, WC])
    S = port_sigma(m)
    res = float(np.linalg.norm(S - W @ S @ W.conj().T))
    return res <= tol, res


def complete_boundary_matrices(WB, WC_partial=None, tol: float = PORT_TOL) -> np.ndarray:
    """Complete ``W_C`` so that ``(W_B; W_C)`` satisfies the port condition.

    The missing rows ``c`` solve ``W_B Sigma c^* = e_k`` and
    ``W_C1 Sigma c^* = 0`` in the least-norm sense; a rank-one style
    correction along the corresponding rows of ``W_B`` then enforces
    ``W_C Sigma W_C^* = 0`` without disturbing the linear constraints.
    For the constraints that matter in practice the correction vanishes and
    the result is the least-norm completion.
    """
    WB = np.atleast_2d(np.asarray(WB, dtype=complex))
    m = WB.shape[1] // 2
    if WB.shape != (m, 2 * m):
        raise StructureError(f"W_B must be m x 2m, got {WB.shape}")
    if np.linalg.matrix_rank(WB) < m:
        raise StructureError("W_B must have full row rank")
    S = port_sigma(m)
    scale = max(1.0, float(np.linalg.norm(WB)) ** 2)
    if np.linalg.norm(WB @ S @ WB.conj().T) > tol * scale:
        raise StructureError("infeasible: W_B Sigma W_B^* must vanish")
    WC1 = _as_rows(WC_partial, m)
    m1 = WC1.shape[0]
    if m1 > m:
        raise StructureError("more W_C rows than ports")
    if m1:
        lin = WB @ S @ WC1.conj().T - np.eye(m)[:, :m1]
        quad = WC1 @ S @ WC1.conj().T
        if max(np.linalg.norm(lin), np.linalg.norm(quad)) > tol * max(scale, 1.0):
            raise StructureError("the given W_C rows are inconsistent with W_B")
    if m1 == m:
        return WC1.copy()
    # unknowns X = (Sigma c^*) columns; constraints  A X = R
    A = np.vstack([WB, WC1])
    R = np.vstack([np.eye(m)[:, m1:], np.zeros((m1, m - m1))])
    X = np.linalg.pinv(A) @ R
    C0 = (S @ X).conj().T
    WB2 = WB[m1:]
    C = C0 - 0.5 * (C0 @ S @ C0.conj().T) @ WB2
    WC = np.vstack([WC1, C])
    ok, res = check_port_condition(WB, WC, tol=tol * scale)
    if not ok:
        raise StructureError(f"completion failed, residual {res:.3e}")
    return WC


# }}}


# {{{ models


def _as_matrix_fn(P, m) -> Callable[[float], np.ndarray]:
    if callable(P):
        return lambda xi: np.atleast_2d(np.asarray(P(xi), dtype=complex)).reshape(m, m)
    mat = np.zeros((m, m), dtype=complex) if P is None else np.atleast_2d(np.asarray(P, dtype=complex))
    if mat.shape != (m, m):
        raise StructureError(f"P0 must be {m}x{m}, got {mat.shape}")
    return lambda xi: mat


@dataclass(frozen=True, eq=False)
class HyperbolicModel:
    """``x_t = P1 (H x)' + P0 H x`` on ``[a, b]`` with boundary port ``(W_B, W_C)``.

    ``WB`` holds the ``m1`` controlled rows, ``WB_hom`` the ``m2 = m - m1``
    rows imposed with zero data.  ``WC`` may list fewer than ``m`` rows (or
    be omitted); the remaining rows are produced by
    :func:`complete_boundary_matrices`.  The first ``m1`` rows of the
    completed ``W_C`` define the output.
    """

    density: DensitySpec
    P1: np.ndarray
    WB: np.ndarray
    WB_hom: np.ndarray | None = None
    WC: np.ndarray | None = None
    P0: Callable[[float], np.ndarray] | np.ndarray | None = None
    a: float = 0.0
    b: float = 1.0
    name: str = "hyperbolic"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        m = self.density.m
        P1 = np.atleast_2d(np.asarray(self.P1, dtype=complex))
        if P1.shape != (m, m):
            raise StructureError(f"P1 must be {m}x{m}, got {P1.shape}")
        object.__setattr__(self, "P1", P1)
        WB = _as_rows(self.WB, m)
        hom = _as_rows(self.WB_hom, m)
        if WB.shape[0] + hom.shape[0] != m:
            raise StructureError(f"need m = {m} boundary rows in total, got {WB.shape[0]} + {hom.shape[0]}")
        object.__setattr__(self, "WB", WB)
        object.__setattr__(self, "WB_hom", hom)
        object.__setattr__(self, "WC", None if self.WC is None else _as_rows(self.WC, m))
        object.__setattr__(self, "_p0", _as_matrix_fn(self.P0, m))
        if not self.b > self.a:
            raise StructureError("interval must satisfy a < b")

    @property
    def m(self) -> int:
        return self.density.m

    @property
    def m1(self) -> int:
        return self.WB.shape[0]

    @property
    def WB_full(self) -> np.ndarray:
        return np.vstack([self.WB, self.WB_hom])

    @property
    def WC_full(self) -> np.ndarray:
        return complete_boundary_matrices(self.WB_full, self.WC)

    def p0(self, xi) -> np.ndarray:
        return self._p0(xi)

    def p0_constant(self) -> np.ndarray | None:
        """``P0`` as a matrix when it was given as one, else ``None``."""
        if callable(self.P0):
            return None
        return self._p0(0.0)

    def validate(self, n_check: int = 64) -> ValidationReport:
        """Check ``P1``, ``P0`` and the port condition; density checks happen at assembly."""
        out = []
        herm = float(np.linalg.norm(self.P1 - self.P1.conj().T))
        if herm > PORT_TOL:
            out.append(("P1 not Hermitian", herm, PORT_TOL))
        sv = np.linalg.svd(self.P1, compute_uv=False)
        if sv[-1] <= 1e-12 * sv[0]:
            out.append(("P1 not invertible", float(sv[0] / max(sv[-1], 1e-300)), 1e12))
        xs = np.linspace(self.a, self.b, n_check + 1)
        lam = max(float(np.linalg.eigvalsh(hermitian_part(self.p0(x)))[-1]) for x in xs)
        tol = 1e-10 * (1.0 + max(np.linalg.norm(self.p0(x)) for x in xs))
        if lam > tol:
            out.append(("P0 not dissipative", lam, tol))
        try:
            ok, res = check_port_condition(self.WB_full, self.WC_full)
        except StructureError:
            ok, res = False, float("inf")
        if not ok:
            out.append(("port condition", res, PORT_TOL))
        return ValidationReport(tuple(out))

    def p1_condition(self) -> float:
        return float(np.linalg.cond(self.P1))


@dataclass(frozen=True, eq=False)
class DiffusionModel:
    """``x_t = (a x')'`` on ``[lo, hi]`` with Dirichlet input and flux output at both ends."""

    a_coeff: object = 1.0
    lo: float = 0.0
    hi: float = 1.0
    name: str = "diffusion"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "a_coeff", as_coefficient(self.a_coeff))


# }}}


# {{{ assembly


def staggered_groups(P1, tol: float = 1e-14):
    """Split indices into ``(e, f)`` with ``P1[e][:, e] = P1[f][:, f] = 0``.

    Returns ``None`` if no such split exists with an invertible coupling
    block.  Each connected component of the coupling graph starts its
    colouring at its smallest index.
    """
    P1 = np.asarray(P1)
    m = P1.shape[0]
    if m % 2 or np.any(np.abs(np.diag(P1)) > tol):
        return None
    adj = np.abs(P1) > tol
    colour = -np.ones(m, dtype=int)
    for start in range(m):
        if colour[start] >= 0:
            continue
        colour[start] = 0
        stack = [start]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(adj[i]):
                if colour[j] < 0:
                    colour[j] = 1 - colour[i]
                    stack.append(j)
                elif colour[j] == colour[i]:
                    return None
    e = np.flatnonzero(colour == 0)
    f = np.flatnonzero(colour == 1)
    if e.size != f.size:
        return None
    if np.linalg.matrix_rank(P1[np.ix_(e, f)]) < e.size:
        return None
    return e, f


def _staggered_plan(model: HyperbolicModel, tol: float = 1e-12):
    """Which group each end prescribes, or ``None`` if the scheme does not apply."""
    groups = staggered_groups(model.P1)
    if groups is None:
        return None
    e, f = groups
    m = model.m
    # H must not couple the groups
    for Hx in (model.density(0.5 * (model.a + model.b)), model.density.integral(model.a, model.b)):
        if np.abs(Hx[np.ix_(e, f)]).max() > tol * max(1.0, np.abs(Hx).max()):
            return None
    Wt = model.WB_full @ boundary_T(model.P1) / np.sqrt(2.0)
    scale = max(1.0, np.abs(Wt).max())
    ends = {}
    for end, off in (("b", 0), ("a", m)):
        ze = np.abs(Wt[:, off + e]).max() <= tol * scale
        zf = np.abs(Wt[:, off + f]).max() <= tol * scale
        if ze == zf:
            return None
        ends[end] = "f" if ze else "e"
    cols = [(0 if g == "b" else m) + (e if ends[g] == "e" else f) for g in ("b", "a")]
    Wp = Wt[:, np.concatenate(cols)]
    if np.linalg.matrix_rank(Wp) < m:
        return None
    return e, f, ends, Wp


def _blockdiag(blocks: np.ndarray) -> np.ndarray:
    K, b, _ = blocks.shape
    out = np.zeros((K * b, K * b), dtype=complex)
    for k in range(K):
        out[k * b:(k + 1) * b, k * b:(k + 1) * b] = blocks[k]
    return out


def _redefine(node: DiscreteNode, m1: int) -> DiscreteNode:
    m = node.m
    if m1 == m:
        return node
    U = np.eye(m)[:, :m1]
    return apply_io_redefinition(node, U)


def _assemble_collocated(model: HyperbolicModel, n_cells: int) -> DiscreteNode:
    m = model.m
    sbp = build_sbp(n_cells, model.a, model.b)
    N1 = sbp.grid.size
    metric = build_energy_metric(model.density, sbp.grid, rule="trapezoid")
    Hd = _blockdiag(metric.blocks)
    WB, WC = model.WB_full, model.WC_full
    T = boundary_T(model.P1)
    Eb = np.zeros((2 * m, N1 * m))
    Eb[:m, (N1 - 1) * m:] = np.eye(m)
    Eb[m:, :m] = np.eye(m)
    LB = WB @ T @ Eb / np.sqrt(2.0)
    LC = WC @ T @ Eb / np.sqrt(2.0)
    pw = np.repeat(sbp.weights, m)
    P0 = _blockdiag(np.array([model.p0(x) for x in sbp.grid]))
    K = P0 + np.kron(sbp.D, model.P1) - (LC.conj().T @ LB) / pw[:, None]
    node = DiscreteNode(
        A=K @ Hd,
        B=LC.conj().T / pw[:, None],
        C=LC @ Hd,
        D=np.zeros((m, m)),
        metric=metric,
        provenance=f"{model.name}/collocated/n={n_cells}",
        extras={
            "scheme": "collocated",
            "grid": sbp.grid,
            "traces_x": Eb @ Hd,
            "traces_u": np.zeros((2 * m, m), dtype=complex),
            "boundary_defect": (LB @ Hd, -np.eye(m)),
            "P1": model.P1,
        },
    )
    return _redefine(node, model.m1)


def _assemble_staggered(model: HyperbolicModel, n_cells: int, plan) -> DiscreteNode:
    e, f, ends, Wp = plan
    m = model.m
    k = e.size
    op = build_staggered(n_cells, model.a, model.b)
    n, N1 = op.G.shape
    Gam = model.P1[np.ix_(e, f)]
    Ik = np.eye(k)

    keep = np.ones(N1, dtype=bool)
    if ends["b"] == "e":
        keep[-1] = False
    if ends["a"] == "e":
        keep[0] = False
    kept = np.flatnonzero(keep)
    nk = kept.size
    ne, nf = nk * k, n * k
    Se = np.kron(np.eye(N1)[:, kept], Ik)            # kept node efforts -> all nodes

    dens_e, dens_f = model.density.sub(e), model.density.sub(f)
    met_n = build_energy_metric(dens_e, op.grid, rule="trapezoid").subset(kept)
    met_c = build_energy_metric(dens_f, op.grid, rule="midpoint")
    metric = EnergyMetric.concat(met_n, met_c)
    Hd = _blockdiag(metric.blocks)

    # prescribed data p = (p_b; p_a), each k long, from the full input
    Wp_inv = np.linalg.inv(Wp)
    pb, pa = Wp_inv[:k], Wp_inv[k:]

    wn = np.repeat(op.node_weights, k)
    div = -np.kron(op.G.T * op.cell_weights, Gam) / wn[:, None]   # node rows, cell cols

    Az = np.zeros((ne + nf, ne + nf), dtype=complex)
    Bu = np.zeros((ne + nf, m), dtype=complex)
    # efforts on nodes
    Az[:ne, ne:] = Se.T @ div
    # flows on cells
    grad = np.kron(op.G, Gam.conj().T)
    Az[ne:, :ne] = grad @ Se
    if ends["b"] == "e":
        Bu[ne:] += grad[:, (N1 - 1) * k:] @ pb
    else:
        row = (N1 - 1) * k
        Bu[:ne] += Se.T[:, row:row + k] @ (Gam @ pb) / op.node_weights[-1]
    if ends["a"] == "e":
        Bu[ne:] += grad[:, :k] @ pa
    else:
        Bu[:ne] -= Se.T[:, :k] @ (Gam @ pa) / op.node_weights[0]

    # lower-order terms
    p0_nodes = np.array([model.p0(x) for x in op.grid[kept]])
    p0_cells = np.array([model.p0(x) for x in op.centers])
    Az[:ne, :ne] += _blockdiag(p0_nodes[:, e][:, :, e])
    Az[ne:, ne:] += _blockdiag(p0_cells[:, f][:, :, f])
    ef = _blockdiag(p0_cells[:, e][:, :, f])
    fe = _blockdiag(p0_cells[:, f][:, :, e])
    if np.abs(ef).max(initial=0.0) > 0 or np.abs(fe).max(initial=0.0) > 0:
        Az[ne:, :ne] += fe @ np.kron(op.avg, Ik) @ Se
        Az[:ne, ne:] += Se.T @ np.kron(op.avg_adjoint, Ik) @ ef

    # boundary traces (z(b); z(a)) in the original component order
    Tx = np.zeros((2 * m, ne + nf), dtype=complex)
    Tu = np.zeros((2 * m, m), dtype=complex)
    for end, off, node, cell, p in (("b", 0, N1 - 1, n - 1, pb), ("a", m, 0, 0, pa)):
        rows_e, rows_f = off + e, off + f
        if ends[end] == "e":
            Tu[rows_e] = p
            Tx[rows_f, ne + cell * k: ne + (cell + 1) * k] = Ik
        else:
            Tu[rows_f] = p
            j = int(np.searchsorted(kept, node))
            Tx[rows_e, j * k:(j + 1) * k] = Ik
    LC = model.WC_full @ boundary_T(model.P1) / np.sqrt(2.0)

    # state layout: efforts on kept nodes, then flows on cells
    node = DiscreteNode(
        A=Az @ Hd,
        B=Bu,
        C=LC @ Tx @ Hd,
        D=LC @ Tu,
        metric=metric,
        provenance=f"{model.name}/staggered/n={n_cells}",
        extras={
            "scheme": "staggered",
            "grid": op.grid,
            "groups": (e, f),
            "ends": dict(ends),
            "kept_nodes": kept,
            "traces_x": Tx @ Hd,
            "traces_u": Tu,
            "P1": model.P1,
        },
    )
    return _redefine(node, model.m1)


def assemble_hyperbolic_node(model: HyperbolicModel, n_cells: int, scheme: str = "auto") -> DiscreteNode:
    """Semi-discretize ``model`` on ``n_cells`` uniform cells.

    ``scheme="auto"`` picks the staggered scheme whenever it applies (the
    coupling ``P1`` is off-diagonal in some grouping, ``H`` does not couple
    the groups, the cross terms of ``P0`` are skew, and every end prescribes
    exactly one group) and the collocated scheme otherwise.
    """
    if int(n_cells) != n_cells or n_cells < 4:
        raise StructureError(f"n_cells must be an integer >= 4, got {n_cells}")
    report = model.validate()
    if not report.passed:
        raise StructureError(f"invalid model: {report.names()}")
    if scheme not in ("auto", "collocated", "staggered"):
        raise StructureError(f"unknown scheme {scheme!r}")
    plan = None
    if scheme != "collocated":
        plan = _staggered_plan(model)
        if plan is not None and not _cross_terms_skew(model, plan[0], plan[1], n_cells):
            plan = None
        if plan is None and scheme == "staggered":
            raise StructureError("the staggered scheme does not apply to this model")
    if plan is None:
        return _assemble_collocated(model, int(n_cells))
    return _assemble_staggered(model, int(n_cells), plan)


def _cross_terms_skew(model, e, f, n_cells) -> bool:
    xs = build_staggered(n_cells, model.a, model.b).centers
    for x in xs:
        P = model.p0(x)
        ef, fe = P[np.ix_(e, f)], P[np.ix_(f, e)]
        if np.abs(ef + fe.conj().T).max() > 1e-14 * max(1.0, np.abs(P).max()):
            return False
    return True


def apply_io_redefinition(node: DiscreteNode, U) -> DiscreteNode:
    """``B -> B U``, ``C -> U^* C``, ``D -> U^* D U``."""
    U = np.atleast_2d(np.asarray(U, dtype=complex))
    if U.shape[0] != node.m:
        raise StructureError(f"U must have {node.m} rows, got {U.shape}")
    Uh = U.conj().T
    extras = dict(node.extras)
    if "traces_u" in extras:
        extras["traces_u"] = extras["traces_u"] @ U
    if "boundary_defect" in extras:
        Mx, Mu = extras["boundary_defect"]
        extras["boundary_defect"] = (Mx, Mu @ U)
    return DiscreteNode(
        A=node.A,
        B=node.B @ U,
        C=Uh @ node.C,
        D=Uh @ node.D @ U,
        metric=node.metric,
        provenance=node.provenance,
        extras=extras,
    )


def boundary_traces(node: DiscreteNode, x, u) -> np.ndarray:
    """Discrete ``(z(b); z(a))`` of a hyperbolic node at state ``x`` and input ``u``."""
    if "traces_x" not in node.extras:
        raise StructureError("node carries no boundary trace data")
    return node.extras["traces_x"] @ x + node.extras["traces_u"] @ np.atleast_1d(u)


def assemble_diffusion_node(a_coeff, n_cells: int, lo: float = 0.0, hi: float = 1.0) -> DiscreteNode:
    """Heat equation with Dirichlet input ``u = (x(lo), x(hi))`` and flux output.

    The state holds interior node values; the end values are the inputs.
    With ``xh = S x + E u`` (full node vector) and
    ``L = D^T P_w diag(a) D``::

        P_w,int xdot = -S^T L xh,       y = E^T L xh

    so that ``d/dt |x|^2/2 = -<D xh, a D xh>_w + u^T y`` exactly.  ``y`` is
    the discrete outward flux ``a x'`` at ``hi`` and ``-a x'`` at ``lo``.
    """
    if int(n_cells) != n_cells or n_cells < 4:
        raise StructureError(f"n_cells must be an integer >= 4, got {n_cells}")
    coef = as_coefficient(a_coeff)
    sbp = build_sbp(int(n_cells), lo, hi)
    av = np.asarray(coef(sbp.grid), dtype=float) * np.ones(sbp.grid.size)
    if not np.all(np.isfinite(av)) or np.any(av <= 0):
        raise StructureError("diffusion coefficient must be positive and finite at every node")
    N1 = sbp.grid.size
    L = sbp.D.T @ ((sbp.weights * av)[:, None] * sbp.D)
    S = np.eye(N1)[:, 1:-1]
    E = np.eye(N1)[:, [0, -1]]
    wi = sbp.weights[1:-1]
    metric = EnergyMetric(sbp.grid[1:-1], wi, np.ones((N1 - 2, 1, 1)))
    return DiscreteNode(
        A=-(S.T @ L @ S) / wi[:, None],
        B=-(S.T @ L @ E) / wi[:, None],
        C=E.T @ L @ S,
        D=E.T @ L @ E,
        metric=metric,
        provenance=f"diffusion/n={n_cells}",
        extras={"scheme": "diffusion", "grid": sbp.grid, "stiffness": L},
    )


# }}}
