"""Reference values and reference computations used by the tests.

Everything here is written independently of the package: closed-form
continuum results, hand-assembled small matrices, and brute-force
re-evaluations by a different numerical route.
"""

import numpy as np
import scipy.linalg as sla

# mass-spring-damper with m = k = 1, c = 0.5, force input, velocity output
MSD = dict(J=[[0, 1], [-1, 0]], R=[[0, 0], [0, 0.5]], H=np.eye(2), B=[[0], [1]])
MSD_M = np.array([[0, 1, 0], [-1, -0.5, 1], [0, -1, 0]], dtype=float)

# string port rows, fixed left end, force at the right end
S2 = 1 / np.sqrt(2)
STRING_WB1 = S2 * np.array([[0, 1, 1, 0]])
STRING_WB2 = S2 * np.array([[-1, 0, 0, 1]])
STRING_WC1 = S2 * np.array([[1, 0, 0, 1]])
STRING_WC2 = S2 * np.array([[0, 1, -1, 0]])

# lowest eigenvalues of the continuum problems on [0, 1]
STRING_FREQ = np.pi / 2     # fixed-free wave, (k - 1/2) pi
DIFFUSION_RATE = np.pi**2   # Dirichlet heat, k^2 pi^2


def spring_transfer(s):
    """Undamped unit mass-spring, force in, velocity out."""
    return s / (s**2 + 1)


def sigma(m):
    return np.block([[np.zeros((m, m)), np.eye(m)], [np.eye(m), np.zeros((m, m))]])


def port_residual(WB, WC):
    W = np.vstack([WB, WC])
    m = W.shape[0] // 2
    return np.linalg.norm(sigma(m) - W @ sigma(m) @ W.conj().T)


def solve_wc2(WB1, WB2, WC1):
    """Last row of W_C from the linear constraints, written out by hand.

    With c the unknown row, the port condition asks
    W_B1 S c^* = 0, W_B2 S c^* = 1, W_C1 S c^* = 0, c S c^* = 0.
    The three linear equations fix c up to a one-dimensional kernel; the
    least-norm point already satisfies the quadratic one for the string.
    """
    S = sigma(2)
    A = np.vstack([WB1, WB2, WC1]) @ S
    rhs = np.array([0.0, 1.0, 0.0])
    c, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return c.conj()[None, :]


def random_structure(rng, n, m, complex_=False):
    """Draw (J, R, H, B, P, S, N) with W = [[R, P], [P^*, S]] a Gram matrix."""
    def r(*shape):
        a = rng.standard_normal(shape)
        return a + 1j * rng.standard_normal(shape) if complex_ else a

    J = r(n, n)
    J = (J - J.conj().T) / 2
    N = r(m, m)
    N = (N - N.conj().T) / 2
    X = r(n, n)
    H = X @ X.conj().T + np.eye(n)
    Y = r(n + m, n + m)
    W = Y @ Y.conj().T / (n + m)
    return dict(J=J, H=H, R=W[:n, :n], B=r(n, m), P=W[:n, n:], S=W[n:, n:], N=N)


def hand_dissipation_matrix(J, R, B, P, S, N):
    n, m = np.shape(B)
    M = np.zeros((n + m, n + m), dtype=complex)
    M[:n, :n] = np.asarray(J) - R
    M[:n, n:] = np.asarray(B) - P
    M[n:, :n] = -(np.asarray(B) + P).conj().T
    M[n:, n:] = np.asarray(N) - S
    return M


def weighted_expm_norm(A, mass, t):
    """``max ||e^{tA} x||_M / ||x||_M`` as a generalized eigenvalue problem."""
    E = sla.expm(t * np.asarray(A))
    G = E.conj().T @ mass @ E
    G = (G + G.conj().T) / 2
    return float(np.sqrt(sla.eigh(G, mass, eigvals_only=True)[-1]))


def observed_orders(errors):
    e = np.asarray(errors)
    return np.log2(e[:-1] / e[1:])
