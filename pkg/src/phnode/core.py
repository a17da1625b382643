"""Finite-dimensional port-Hamiltonian structures.

A linear port-Hamiltonian system is given by seven matrices ``(J, R, B, P,
S, N, H)`` via

.. math::

    \\dot x = (J - R) H x + (B - P) u, \\qquad
    y = (B + P)^* H x + (S - N) u,

with ``J``, ``N`` skew-Hermitian and ``H``, ``W = [[R, P], [P^*, S]]``
Hermitian positive semi-definite.  Stacking ``z = (Hx; u)`` gives the
compact form ``(xdot; -y) = M z`` with the dissipative block matrix

.. math::

    M = \\begin{bmatrix} J - R & B - P \\\\ -B^* - P^* & N - S \\end{bmatrix}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from phnode.errors import StructureError

__all__ = [
    "PHStructure",
    "DissipationMatrix",
    "ValidationReport",
    "PowerTerms",
    "default_tol",
    "validate_ph_structure",
    "assemble_dissipation_matrix",
    "hamiltonian",
    "power_terms",
    "hermitian_part",
    "random_ph_structure",
    "to_node",
]


def default_tol(*mats) -> float:
    """Structural tolerance ``1e-10 * (1 + ||X||_F)`` for the largest operand."""
    norm = max((np.linalg.norm(np.asarray(a)) for a in mats), default=0.0)
    return 1e-10 * (1.0 + float(norm))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    return 0.5 * (a + a.conj().T)


def _as_matrix(a, shape, name) -> np.ndarray:
    if a is None:
        return np.zeros(shape, dtype=complex)
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    if a.shape != shape:
        raise StructureError(f"{name} has shape {a.shape}, expected {shape}")
    return a


@dataclass(frozen=True)
class PHStructure:
    """The structure matrices of a finite-dimensional pH system.

    ``J`` and ``H`` fix the state dimension ``n``; the input dimension ``m``
    is read from ``B`` (or ``P``, ``S``, ``N``), defaulting to zero inputs.
    Omitted matrices are zero.  All arrays are stored as complex.
    """

    J: np.ndarray
    H: np.ndarray
    R: np.ndarray | None = None
    B: np.ndarray | None = None
    P: np.ndarray | None = None
    S: np.ndarray | None = None
    N: np.ndarray | None = None

    def __post_init__(self):
        J = np.atleast_2d(np.asarray(self.J, dtype=complex))
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise StructureError(f"J must be square, got shape {J.shape}")
        n = J.shape[0]
        m = 0
        for name in ("B", "P"):
            a = getattr(self, name)
            if a is not None:
                a = np.asarray(a)
                m = a.reshape(n, -1).shape[1] if a.size else 0
                break
        else:
            for name in ("S", "N"):
                a = getattr(self, name)
                if a is not None:
                    m = np.atleast_2d(np.asarray(a)).shape[0]
                    break

        def vec2mat(a):
            # allow B given as a flat vector for single-input systems
            if a is not None and np.ndim(a) == 1 and m == 1:
                return np.reshape(a, (-1, 1))
            return a

        object.__setattr__(self, "J", J)
        object.__setattr__(self, "H", _as_matrix(self.H, (n, n), "H"))
        object.__setattr__(self, "R", _as_matrix(self.R, (n, n), "R"))
        object.__setattr__(self, "B", _as_matrix(vec2mat(self.B), (n, m), "B"))
        object.__setattr__(self, "P", _as_matrix(vec2mat(self.P), (n, m), "P"))
        object.__setattr__(self, "S", _as_matrix(self.S, (m, m), "S"))
        object.__setattr__(self, "N", _as_matrix(self.N, (m, m), "N"))

    @property
    def n(self) -> int:
        return self.J.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def W(self) -> np.ndarray:
        """Dissipation weight ``[[R, P], [P^*, S]]``, assembled on demand."""
        return np.block([[self.R, self.P], [self.P.conj().T, self.S]])

    def __eq__(self, other):
        if not isinstance(other, PHStructure):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("J", "H", "R", "B", "P", "S", "N")
        )

    __hash__ = None


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a structural check.

    ``violations`` holds ``(check, measured, threshold)`` triples; the report
    passes iff there are none.
    """

    violations: tuple[tuple[str, float, float], ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.passed

    def names(self) -> list[str]:
        return [v[0] for v in self.violations]

    def merged(self, other: "ValidationReport") -> "ValidationReport":
        return ValidationReport(self.violations + other.violations)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "violations": [
                {"check": c, "measured": float(v), "threshold": float(t)}
                for c, v, t in self.violations
            ],
        }


@dataclass(frozen=True)
class DissipationMatrix:
    """Composite operator ``M = [[F&G], [K&L]]`` with state/input split ``n, m``."""

    M: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=complex))
        if M.shape != (self.n + self.m, self.n + self.m):
            raise StructureError(
                f"M has shape {M.shape}, expected {(self.n + self.m,) * 2}"
            )
        object.__setattr__(self, "M", M)

    @property
    def FG(self) -> np.ndarray:
        return self.M[: self.n]

    @property
    def KL(self) -> np.ndarray:
        return self.M[self.n :]

    @property
    def F(self) -> np.ndarray:
        return self.M[: self.n, : self.n]

    @property
    def G(self) -> np.ndarray:
        return self.M[: self.n, self.n :]

    @property
    def K(self) -> np.ndarray:
        return self.M[self.n :, : self.n]

    @property
    def L(self) -> np.ndarray:
        return self.M[self.n :, self.n :]

    def max_hermitian_eig(self) -> float:
        """Largest eigenvalue of ``M + M^*``; nonpositive iff dissipative."""
        if self.M.size == 0:
            return 0.0
        return float(np.linalg.eigvalsh(self.M + self.M.conj().T)[-1])


@dataclass(frozen=True)
class PowerTerms:
    supplied: float
    dissipated: float
    hamiltonian_rate: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "hamiltonian_rate", self.dissipated + self.supplied)


def _skew_violation(name, a, tol):
    defect = float(np.linalg.norm(a + a.conj().T))
    return [(f"{name} not skew-Hermitian", defect, tol)] if defect > tol else []


def _psd_violations(name, a, tol):
    out = []
    defect = float(np.linalg.norm(a - a.conj().T))
    if defect > tol:
        out.append((f"{name} not Hermitian", defect, tol))
    if a.size:
        lam = float(np.linalg.eigvalsh(hermitian_part(a))[0])
        if lam < -tol:
            out.append((f"{name} not PSD", lam, -tol))
    return out


def validate_ph_structure(s: PHStructure, tol_struct: float | None = None) -> ValidationReport:
    """Check skewness of ``J``, ``N`` and semi-definiteness of ``H`` and ``W``.

    Each check uses ``tol_struct`` if given, else :func:`default_tol` of the
    matrix under test.  PSD checks report the smallest eigenvalue of the
    Hermitian part, so near-singular ``H`` gives a margin rather than an
    opaque factorization failure.
    """
    def tol(a):
        return default_tol(a) if tol_struct is None else tol_struct

    W = s.W
    violations = (
        _skew_violation("J", s.J, tol(s.J))
        + _skew_violation("N", s.N, tol(s.N))
        + _psd_violations("H", s.H, tol(s.H))
        + _psd_violations("W", W, tol(W))
    )
    return ValidationReport(tuple(violations))


def assemble_dissipation_matrix(s: PHStructure, tol_struct: float | None = None) -> DissipationMatrix:
    report = validate_ph_structure(s, tol_struct)
    if not report.passed:
        raise StructureError(f"invalid port-Hamiltonian structure: {report.names()}")
    M = np.block(
        [
            [s.J - s.R, s.B - s.P],
            [-s.B.conj().T - s.P.conj().T, s.N - s.S],
        ]
    )
    return DissipationMatrix(M, s.n, s.m)


def hamiltonian(H: np.ndarray, x: np.ndarray) -> float:
    """Stored energy ``x^* H x / 2``."""
    H = np.atleast_2d(np.asarray(H))
    x = np.asarray(x)
    if H.shape != (x.shape[0], x.shape[0]):
        raise StructureError(f"H {H.shape} does not match state of length {x.shape[0]}")
    return 0.5 * float(np.real(np.vdot(x, H @ x)))


def power_terms(M: DissipationMatrix, H, x, u, y) -> PowerTerms:
    """Split the energy rate into the dissipated and the supplied part.

    ``dissipated = Re z^* M z`` with ``z = (Hx; u)``, ``supplied = Re u^* y``.
    """
    x = np.asarray(x, dtype=complex)
    u = np.atleast_1d(np.asarray(u, dtype=complex)) if M.m else np.zeros(0, complex)
    y = np.atleast_1d(np.asarray(y, dtype=complex)) if M.m else np.zeros(0, complex)
    z = np.concatenate([np.asarray(H) @ x, u])
    return PowerTerms(
        supplied=float(np.real(np.vdot(u, y))),
        dissipated=float(np.real(np.vdot(z, M.M @ z))),
    )


def random_ph_structure(rng: np.random.Generator, n: int, m: int, *, lossless=False, complex_=True) -> PHStructure:
    """Draw a valid structure; ``W`` and ``H`` are random Gram matrices."""

    def rand(*shape):
        a = rng.standard_normal(shape)
        if complex_:
            a = a + 1j * rng.standard_normal(shape)
        return a

    J = rand(n, n)
    J = J - J.conj().T
    N = rand(m, m)
    N = N - N.conj().T
    X = rand(n, n)
    H = X @ X.conj().T / n + 0.1 * np.eye(n)
    B = rand(n, m)
    if lossless:
        return PHStructure(J=J, H=H, B=B, N=N)
    k = rng.integers(1, n + m + 1)
    Y = rand(n + m, k)
    W = Y @ Y.conj().T / (n + m)
    return PHStructure(J=J, H=H, R=W[:n, :n], B=B, P=W[:n, n:], S=W[n:, n:], N=N)


def to_node(s: PHStructure, provenance: str = "ph_matrices"):
    """State-space realization on the metric ``H`` (requires ``H`` definite)."""
    from phnode.analysis import DiscreteNode
    from phnode.quadham import EnergyMetric

    metric = EnergyMetric.single(s.H)
    return DiscreteNode(
        A=(s.J - s.R) @ s.H,
        B=s.B - s.P,
        C=(s.B + s.P).conj().T @ s.H,
        D=s.S - s.N,
        metric=metric,
        provenance=provenance,
    )
