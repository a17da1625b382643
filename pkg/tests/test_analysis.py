import numpy as np
import pytest
from hypothesis import given, strategies as st

from phnode.analysis import (
    DiscreteNode,
    adjoint_node,
    check_maximal_dissipative,
    contraction_scan,
    main_operator,
    positive_real_scan,
    sym_part_bound,
    transfer_batch,
    transfer_eval,
    vertical_line_scan,
    wellposedness_proxy,
    write_scan_csv,
)
from phnode.core import PHStructure, assemble_dissipation_matrix, to_node
from phnode.errors import ResolventError
from phnode.models import assemble
from phnode.quadham import EnergyMetric

from oracles import MSD, random_structure, spring_transfer, weighted_expm_norm


def _node(A, B=None, C=None, D=None, H=None):
    A = np.atleast_2d(A)
    n = A.shape[0]
    B = np.zeros((n, 1)) if B is None else B
    m = np.shape(B)[1]
    C = np.zeros((m, n)) if C is None else C
    D = np.zeros((m, m)) if D is None else D
    metric = EnergyMetric.identity(n) if H is None else EnergyMetric.single(H)
    return DiscreteNode(A, B, C, D, metric)


@pytest.fixture(scope="module")
def spring():
    return to_node(PHStructure(J=[[0, 1], [-1, 0]], H=np.eye(2), B=[[0], [1]]))


@pytest.fixture(scope="module")
def msd():
    return to_node(PHStructure(**MSD))


def test_main_operator_blocks():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(main_operator(np.hstack([A, np.zeros((2, 1))])), A)
    M = assemble_dissipation_matrix(PHStructure(**MSD))
    np.testing.assert_array_equal(main_operator(M), [[0, 1], [-1, -0.5]])


def test_maxdiss_trivial():
    rep = check_maximal_dissipative(-np.eye(3))
    assert rep.flags == (True,) * 5
    rep = check_maximal_dissipative(np.eye(3))
    assert not rep.is_dissipative and not rep.adjoint_dissipative
    assert not rep.maximal_dissipative


def test_maxdiss_rejects_left_half_plane_points():
    with pytest.raises(ValueError):
        check_maximal_dissipative(-np.eye(2), lambdas=(0.0,))


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_maxdiss_flags_agree_on_random_dissipative(n, seed):
    mats = random_structure(np.random.default_rng(seed), n, 0, complex_=True)
    A = (mats["J"] - mats["R"]) @ mats["H"]
    rep = check_maximal_dissipative(A, EnergyMetric.single(mats["H"]))
    assert rep.maximal_dissipative and rep.consistent


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_maxdiss_flags_agree_on_non_dissipative(n, seed):
    rng = np.random.default_rng(seed)
    mats = random_structure(rng, n, 0)
    A = (mats["J"] + mats["R"] + 0.5 * np.eye(n)) @ mats["H"]
    rep = check_maximal_dissipative(A, EnergyMetric.single(mats["H"]))
    # (ii) is only sampled at finitely many points, so only (i) and (v) must fail
    assert not rep.is_dissipative and not rep.adjoint_dissipative
    assert not rep.maximal_dissipative


def test_contraction_examples():
    rep = contraction_scan(np.zeros((2, 2)), times=(0.0, 1.0, 5.0))
    assert rep.norms == (1.0, 1.0, 1.0)
    rep = contraction_scan(-np.eye(2), times=(1.0,))
    assert rep.norms[0] == pytest.approx(np.exp(-1), rel=1e-14)
    bad = contraction_scan(np.eye(2), times=(1.0,))
    assert not bad.passed and bad.failures[0][0] == 1.0


def test_contraction_lossless_string():
    node = assemble("string", 32)
    rep = contraction_scan(node.A, node.metric)
    assert rep.passed
    for t, v in zip(rep.times, rep.norms):
        assert abs(v - 1) <= 1e-8
        assert weighted_expm_norm(node.A, node.mass, t) == pytest.approx(v, abs=1e-8)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.floats(0, 5))
def test_contraction_at_zero_is_one(n, seed, t):
    mats = random_structure(np.random.default_rng(seed), n, 0)
    A = (mats["J"] - mats["R"]) @ mats["H"]
    rep = contraction_scan(A, EnergyMetric.single(mats["H"]), times=(0.0, t))
    assert rep.norms[0] == 1.0
    assert rep.norms[1] <= 1 + 1e-8


def test_transfer_zero():
    node = _node(-np.eye(2))
    for s in (1.0, 2 + 3j, 0.1 - 5j):
        sample = transfer_eval(node, s)
        assert np.all(sample.G == 0)
        assert sample.herm_min_eig == 0


def test_transfer_spring(spring):
    assert transfer_eval(spring, 1.0).G[0, 0] == pytest.approx(0.5, abs=1e-15)
    for s in (1 + 1j, 0.3 - 2j, 4.0):
        assert transfer_eval(spring, s).G[0, 0] == pytest.approx(spring_transfer(s), rel=1e-13)
    assert transfer_eval(spring, 1 + 1j).herm_min_eig >= 0


def test_transfer_singular_resolvent(spring):
    with pytest.raises(ResolventError):
        transfer_eval(spring, 1j)
    with pytest.raises(ResolventError):
        transfer_batch(spring, np.array([2.0, -1j]))


def test_modal_and_direct_routes_agree():
    node = assemble("damped_string", 16)
    s = np.array([0.5 + 3j, 2 - 7j, 10 + 0j, 0.01 + 40j])
    G = transfer_batch(node, s)
    for k, z in enumerate(s):
        np.testing.assert_allclose(G[k], transfer_eval(node, z).G, rtol=1e-10, atol=1e-12)


def test_scan_is_thread_count_invariant(monkeypatch):
    node = assemble("timoshenko", 16)
    s = np.linspace(0.1, 5, 1500) + 1j * np.linspace(-50, 50, 1500)
    monkeypatch.setenv("PHNODE_THREADS", "1")
    G1 = transfer_batch(node, s)
    monkeypatch.setenv("PHNODE_THREADS", "4")
    G4 = transfer_batch(node, s)
    np.testing.assert_array_equal(G1, G4)


def test_positive_real_scan_msd(msd):
    s = (np.linspace(0.1, 10, 10)[:, None] + 1j * np.linspace(-10, 10, 10)[None, :]).ravel()
    rep = positive_real_scan(msd, s)
    assert rep.passed and rep.min_herm > 0


def test_positive_real_scan_zero_transfer():
    rep = positive_real_scan(_node(-np.eye(2)))
    assert rep.passed and rep.min_herm == 0


def test_flipped_output_sign_fails(msd):
    rep = positive_real_scan(msd.with_blocks(C=-msd.C, D=-msd.D))
    assert not rep.passed and rep.min_herm < 0


def test_positive_real_scan_rejects_imaginary_axis(msd):
    with pytest.raises(ValueError):
        positive_real_scan(msd, np.array([1.0, 2j]))


def test_wellposedness_proxy(msd):
    assert wellposedness_proxy(_node(-np.eye(2)), 1.0, np.linspace(-10, 10, 21)) == 0
    coarse = wellposedness_proxy(msd, 1.0, np.linspace(-20, 20, 401))
    fine = wellposedness_proxy(msd, 1.0, np.linspace(-20, 20, 801))
    assert np.isfinite(coarse) and fine >= coarse
    assert fine == pytest.approx(coarse, rel=1e-2)
    with pytest.raises(ValueError):
        vertical_line_scan(msd, 0.0, [1.0])


def test_diffusion_proxy_grows():
    node = assemble("diffusion", 128)
    small = wellposedness_proxy(node, 1.0, np.arange(-100, 100.25, 0.25))
    large = wellposedness_proxy(node, 1.0, np.arange(-1000, 1000.25, 0.25))
    assert large > 2 * small


def test_adjoint_examples():
    dif = assemble("diffusion", 32)
    np.testing.assert_allclose(adjoint_node(dif).A, dif.A, atol=1e-12 * np.abs(dif.A).max())
    st_ = assemble("string", 32)
    np.testing.assert_allclose(adjoint_node(st_).A, -st_.A, atol=1e-12 * np.abs(st_.A).max())


@given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_adjoint_transfer_identity_and_involution(n, m, seed):
    rng = np.random.default_rng(seed)
    node = to_node(PHStructure(**random_structure(rng, n, m, complex_=True)))
    adj = adjoint_node(node)
    back = adjoint_node(adj)
    for name in "ABCD":
        a, b = getattr(node, name), getattr(back, name)
        np.testing.assert_allclose(b, a, atol=1e-13 * (1 + np.abs(a).max()) * np.linalg.cond(node.mass))
    s = complex(rng.uniform(0.1, 3), rng.uniform(-5, 5))
    G = transfer_eval(node, s).G
    Ga = transfer_eval(adj, np.conj(s)).G
    np.testing.assert_allclose(Ga, G.conj().T, atol=1e-10 * (1 + np.abs(G).max()))


def test_sym_part_bound_string_lossless_and_damped():
    assert sym_part_bound(assemble("string", 64)) <= 1e-12
    assert sym_part_bound(assemble("damped_string", 64)) <= 1e-12


def test_write_scan_csv_is_byte_stable(tmp_path, msd):
    rep = positive_real_scan(msd, np.array([1 + 1j, 2.5 - 0.5j]))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_scan_csv(a, rep)
    write_scan_csv(b, positive_real_scan(msd, np.array([1 + 1j, 2.5 - 0.5j])))
    assert a.read_bytes() == b.read_bytes()
    rows = a.read_text().splitlines()
    assert rows[0] == "re_s,im_s,herm_min_eig,norm_G"
    assert float(rows[1].split(",")[2]) == rep.herm_min_eig[0]
