import numpy as np
import pytest
from hypothesis import given, strategies as st

from phnode.analysis import adjoint_node, metric_generator, positive_real_scan, sym_part_bound
from phnode.discretize import (
    HyperbolicModel,
    apply_io_redefinition,
    assemble_diffusion_node,
    assemble_hyperbolic_node,
    boundary_T,
    boundary_traces,
    build_sbp,
    build_staggered,
    check_port_condition,
    complete_boundary_matrices,
    selector_rows,
)
from phnode.errors import StructureError
from phnode.models import SWAP, HYPERBOLIC, assemble, build_model, transport, vibrating_string
from phnode.quadham import DensitySpec

from oracles import (
    STRING_WB1,
    STRING_WB2,
    STRING_WC1,
    STRING_WC2,
    port_residual,
    sigma,
    solve_wc2,
)

seeds = st.integers(0, 2**32 - 1)
SCHEMES = ("staggered", "collocated")


def _rand(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# {{{ difference operators


def test_sbp_two_cells():
    op = build_sbp(2)
    np.testing.assert_array_equal(op.weights, [0.25, 0.5, 0.25])
    np.testing.assert_array_equal(op.Q, [[-0.5, 0.5, 0], [-0.5, 0, 0.5], [0, -0.5, 0.5]])
    np.testing.assert_array_equal(op.Q + op.Q.T, np.diag([-1.0, 0, 1]))


@given(st.integers(2, 1024))
def test_sbp_exactness(n):
    op = build_sbp(n)
    assert np.abs(op.D @ np.ones(n + 1)).max() <= 1e-12 * n
    np.testing.assert_allclose(op.D @ op.grid, 1.0, rtol=0, atol=1e-12 * n)


@given(st.integers(2, 1024), seeds)
def test_sbp_summation_by_parts(n, seed):
    op = build_sbp(n, -0.5, 2.0)
    assert np.abs(op.Q + op.Q.T - op.E).max() <= 1e-15
    np.testing.assert_allclose(op.weights[:, None] * op.D, op.Q, rtol=1e-15, atol=1e-15)
    rng = np.random.default_rng(seed)
    xi = op.grid
    v = np.sin(3 * xi) + rng.uniform(-1, 1)
    w = np.exp(xi) * rng.uniform(0.5, 2)
    lhs = np.dot(op.weights * v, op.D @ w) + np.dot(op.weights * (op.D @ v), w)
    assert abs(lhs - (v[-1] * w[-1] - v[0] * w[0])) <= 1e-13


def test_sbp_rejects_small_grids():
    with pytest.raises(StructureError):
        build_sbp(1)
    with pytest.raises(StructureError):
        build_sbp(4, 1.0, 0.0)


@given(st.integers(2, 200), seeds)
def test_staggered_average_adjoint(n, seed):
    op = build_staggered(n)
    rng = np.random.default_rng(seed)
    v, q = rng.standard_normal(n + 1), rng.standard_normal(n)
    lhs = np.dot(op.cell_weights * (op.avg @ v), q)
    rhs = np.dot(op.node_weights * v, op.avg_adjoint @ q)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)
    np.testing.assert_allclose(op.G @ op.grid, 1.0, rtol=1e-12)


# }}}


# {{{ port algebra


def test_port_condition_examples():
    ok, res = check_port_condition([[1, 0]], [[0, 1]])
    assert ok and res == 0
    ok, res = check_port_condition(np.vstack([STRING_WB1, STRING_WB2]), np.vstack([STRING_WC1, STRING_WC2]))
    assert ok and res <= 1e-12
    s = 1 / np.sqrt(2)
    ok, res = check_port_condition([[s, s]], [[s, s]])
    assert not ok and res > 0


def test_completion_examples():
    np.testing.assert_allclose(complete_boundary_matrices([[1, 0]]), [[0, 1]], atol=1e-15)
    WB = np.vstack([STRING_WB1, STRING_WB2])
    WC = complete_boundary_matrices(WB, STRING_WC1)
    np.testing.assert_allclose(WC[1:], STRING_WC2, atol=1e-14)
    np.testing.assert_allclose(solve_wc2(STRING_WB1, STRING_WB2, STRING_WC1), STRING_WC2, atol=1e-14)
    full = np.vstack([STRING_WC1, STRING_WC2])
    np.testing.assert_array_equal(complete_boundary_matrices(WB, full), full)


def test_completion_rejects_infeasible():
    with pytest.raises(StructureError):
        complete_boundary_matrices([[1, 1]])
    with pytest.raises(StructureError):
        complete_boundary_matrices(np.zeros((1, 2)))


@given(st.integers(1, 4), st.integers(0, 4), seeds)
def test_completion_random_lagrangian(m, m1, seed):
    # W_B = first block rows of a Sigma-unitary matrix, so W_B Sigma W_B^* = 0
    rng = np.random.default_rng(seed)
    A = _rand(rng, m, m) + 3 * np.eye(m)
    K = _rand(rng, m, m)
    K = K - K.conj().T
    U1 = np.block([[A, np.zeros((m, m))], [np.zeros((m, m)), np.linalg.inv(A).conj().T]])
    U2 = np.block([[np.eye(m), K], [np.zeros((m, m)), np.eye(m)]])
    U = U1 @ U2
    assert np.allclose(U @ sigma(m) @ U.conj().T, sigma(m))
    WB, WC_true = U[:m], U[m:]
    m1 = min(m1, m)
    WC = complete_boundary_matrices(WB, WC_true[:m1])
    ok, res = check_port_condition(WB, WC, tol=1e-10)
    assert ok, res
    np.testing.assert_allclose(WC[:m1], WC_true[:m1], atol=1e-12)
    np.testing.assert_allclose(complete_boundary_matrices(WB, WC), WC, atol=1e-10)


def test_selector_rows_pick_traces():
    P1 = SWAP
    rows = np.array([[0, 0, 1.0, 0]])
    W = selector_rows(P1, rows)
    z = np.array([1.0, 2.0, 3.0, 4.0])
    assert (W @ boundary_T(P1) @ z / np.sqrt(2))[0] == pytest.approx(3.0)


# }}}


# {{{ hyperbolic nodes


@pytest.mark.parametrize("scheme", SCHEMES)
def test_string_lossless_and_damped(scheme):
    node = assemble(vibrating_string(), 64, scheme)
    assert sym_part_bound(node) <= 1e-12
    damped = assemble(vibrating_string(d=0.3), 64, scheme)
    Ah = metric_generator(damped.A, damped.metric)
    ev = np.linalg.eigvalsh((Ah + Ah.conj().T) / 2)
    assert ev.max() <= 1e-12 and ev.min() >= -0.3 - 1e-12
    assert np.sum(np.isclose(ev, -0.3)) >= 32


def test_transport_positive_real():
    node = assemble_hyperbolic_node(transport(), 32)
    assert node.extras["scheme"] == "collocated"
    assert positive_real_scan(node).passed


def test_auto_scheme_choice():
    assert assemble("string", 8).extras["scheme"] == "staggered"
    with pytest.raises(StructureError):
        assemble_hyperbolic_node(transport(), 8, scheme="staggered")
    with pytest.raises(StructureError):
        assemble_hyperbolic_node(transport(), 3)


@pytest.mark.parametrize("name", HYPERBOLIC)
@pytest.mark.parametrize("scheme", SCHEMES)
def test_discrete_energy_identity(name, scheme):
    # every (x, u) dissipates at least nothing; lossless models dissipate exactly nothing
    node = assemble(name, 24, scheme)
    rng = np.random.default_rng(7)
    for _ in range(5):
        x, u = _rand(rng, node.n), _rand(rng, node.m)
        _, dis = node.power_terms(x, u)
        scale = 1e-12 * (1 + np.abs(node.A).max()) * (np.linalg.norm(x) ** 2 + np.linalg.norm(u) ** 2)
        assert dis <= scale
        if name != "damped_string":
            assert abs(dis) <= scale


@pytest.mark.parametrize("scheme", SCHEMES)
def test_string_eigenfrequency_converges(scheme):
    errs = []
    for n in (32, 64, 128):
        ev = np.linalg.eigvals(assemble("string", n, scheme).A)
        errs.append(abs(np.abs(ev.imag[ev.imag > 1e-8]).min() - np.pi / 2))
    assert np.all(np.log2(np.array(errs[:-1]) / errs[1:]) > 1.8)


def test_staggered_inputs_are_exact_boundary_values():
    model = build_model("string")
    node = assemble(model, 16)
    rng = np.random.default_rng(0)
    x, u = _rand(rng, node.n), _rand(rng, 1)
    tr = boundary_traces(node, x, u)
    lhs = model.WB_full @ boundary_T(model.P1) @ tr / np.sqrt(2)
    np.testing.assert_allclose(lhs, [u[0], 0], atol=1e-13)
    y = model.WC_full[:1] @ boundary_T(model.P1) @ tr / np.sqrt(2)
    np.testing.assert_allclose(node.output(x, u), y, atol=1e-12)


def test_adjoint_matches_reflected_model():
    # reflection: P1 -> -P1, damping unchanged, force now at the left end and fixed right end
    n = 48
    node = assemble(vibrating_string(d=0.3), n)
    unit = lambda k: np.eye(4)[[k]]
    reflected = HyperbolicModel(
        density=DensitySpec.diagonal([1.0, 1.0]),
        P1=-SWAP,
        WB=selector_rows(-SWAP, unit(2)),
        WB_hom=selector_rows(-SWAP, unit(1)),
        P0=np.diag([0.0, -0.3]),
    )
    ref = assemble_hyperbolic_node(reflected, n)
    low = lambda A: np.array(sorted(sorted(np.linalg.eigvals(A), key=abs)[:8], key=lambda z: z.imag))
    np.testing.assert_allclose(low(adjoint_node(node).A), low(ref.A), atol=1e-8)
    assert positive_real_scan(ref).passed


# }}}


# {{{ io redefinition


def test_io_redefinition_identity_and_zero():
    node = assemble("timoshenko", 8)
    same = apply_io_redefinition(node, np.eye(node.m))
    for k in "ABCD":
        np.testing.assert_array_equal(getattr(same, k), getattr(node, k))
    auto = apply_io_redefinition(node, np.zeros((node.m, 0)))
    assert auto.m == 0 and auto.output(np.ones(node.n), np.zeros(0)).size == 0
    zero = apply_io_redefinition(node, np.zeros((node.m, node.m)))
    assert np.all(zero.output(np.ones(node.n), np.ones(node.m)) == 0)


@given(st.integers(1, 4), seeds)
def test_io_redefinition_preserves_dissipation(k, seed):
    rng = np.random.default_rng(seed)
    node = assemble("damped_string", 8, "collocated")
    red = apply_io_redefinition(node, _rand(rng, node.m, k))
    x, u = _rand(rng, red.n), _rand(rng, k)
    _, dis = red.power_terms(x, u)
    assert dis <= 1e-10 * (np.linalg.norm(x) ** 2 + np.linalg.norm(u) ** 2)


# }}}


# {{{ diffusion


def test_diffusion_steady_state():
    node = assemble_diffusion_node(1.0, 16)
    c = 2.5
    x, u = np.full(node.n, c), np.array([c, c])
    np.testing.assert_allclose(node.A @ x + node.B @ u, 0, atol=1e-11)
    np.testing.assert_allclose(node.output(x, u), 0, atol=1e-11)


def test_diffusion_generator():
    node = assemble_diffusion_node(1.0, 64)
    Ah = metric_generator(node.A, node.metric)
    np.testing.assert_allclose(Ah, Ah.conj().T, atol=1e-10)
    ev = np.linalg.eigvalsh((Ah + Ah.conj().T) / 2)
    assert ev.max() < 0
    assert -ev.max() == pytest.approx(np.pi**2, rel=2e-3)


def test_diffusion_variable_coefficient_dissipates():
    node = assemble_diffusion_node(lambda xi: 1 + xi**2, 20)
    rng = np.random.default_rng(2)
    for _ in range(5):
        _, dis = node.power_terms(_rand(rng, node.n), _rand(rng, 2))
        assert dis <= 1e-10
