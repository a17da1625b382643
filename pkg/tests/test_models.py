import numpy as np
import pytest

from phnode.analysis import positive_real_scan, sym_part_bound
from phnode.discretize import DiffusionModel, HyperbolicModel, check_port_condition
from phnode.errors import DensityError, StructureError
from phnode.models import (
    CATALOG,
    HYPERBOLIC,
    assemble,
    build_model,
    diffusion_rod,
    timoshenko_beam,
    transmission_line,
    vibrating_string,
)
from phnode.quadham import PowerLaw
from phnode.timeint import energy_audit, simulate

from oracles import STRING_WB1, STRING_WB2, STRING_WC1, STRING_WC2


def _conserves(node, t_final=10.0, tau=1e-2):
    x0 = np.random.default_rng(5).standard_normal(node.n)
    traj = simulate(node, x0, None, t_final, tau)
    H = traj.hamiltonian
    return np.abs(H - H[0]).max() / H[0]


def test_string_matrices():
    model = vibrating_string()
    assert model.m == 2
    np.testing.assert_array_equal(model.P1, [[0, 1], [1, 0]])
    np.testing.assert_allclose(model.WB, STRING_WB1, atol=0)
    np.testing.assert_allclose(model.WB_hom, STRING_WB2, atol=0)
    np.testing.assert_allclose(model.WC, STRING_WC1, atol=0)
    np.testing.assert_allclose(model.WC_full, np.vstack([STRING_WC1, STRING_WC2]), atol=1e-14)
    np.testing.assert_array_equal(model.p0(0.3), np.zeros((2, 2)))
    np.testing.assert_array_equal(vibrating_string(d=0.2).p0(0.3), np.diag([0, -0.2]))
    np.testing.assert_array_equal(model.density(0.4), np.eye(2))
    np.testing.assert_allclose(vibrating_string(T=2.0, rho=4.0).density(0.4), np.diag([2.0, 0.25]))


def test_string_sign_violations():
    with pytest.raises(DensityError):
        vibrating_string(T=-1.0)
    with pytest.raises(DensityError):
        vibrating_string(rho=0.0)
    with pytest.raises(DensityError):
        vibrating_string(d=-0.1)


def test_singular_string_accepted():
    model = vibrating_string(rho=PowerLaw(1.0, -0.5))
    assert model.validate().passed
    node = assemble(model, 32)
    assert node.metric.min_eigenvalue() > 0
    assert sym_part_bound(node) <= 1e-12


@pytest.mark.parametrize("builder", [transmission_line, timoshenko_beam])
def test_generated_ports(builder):
    model = builder()
    assert model.validate().passed
    ok, res = check_port_condition(model.WB_full, model.WC_full)
    assert ok and res <= 1e-12


def test_transmission_line():
    node = assemble(transmission_line(), 32)
    assert _conserves(node) <= 1e-9
    assert positive_real_scan(node).passed


def test_timoshenko():
    model = timoshenko_beam()
    assert model.m == 4
    P0 = model.p0(0.5)
    np.testing.assert_array_equal(P0 + P0.conj().T, 0)
    node = assemble(model, 32)
    assert sym_part_bound(node) <= 1e-12
    assert _conserves(node) <= 1e-9


def test_timoshenko_variable_coefficients():
    model = timoshenko_beam(rho=lambda x: 1 + x, EI=2.0, K=PowerLaw(1.0, 0.5, -1.0))
    node = assemble(model, 16)
    assert sym_part_bound(node) <= 1e-12


def test_diffusion_rate():
    model = diffusion_rod()
    assert isinstance(model, DiffusionModel)
    rate = -np.linalg.eigvals(assemble(model, 128).A).real.max()
    assert rate == pytest.approx(np.pi**2, rel=1e-3)
    with pytest.raises(DensityError):
        diffusion_rod(a_coeff=-1.0)


def test_catalog():
    assert set(HYPERBOLIC) < set(CATALOG)
    for name in CATALOG:
        model = build_model(name)
        assert model.name == name
        assert isinstance(model, (HyperbolicModel, DiffusionModel))
    assert build_model("string", T=2.0).params["T"](0.5) == 2.0
    with pytest.raises(StructureError):
        build_model("string", L=1.0)
    with pytest.raises(StructureError):
        build_model("membrane")
