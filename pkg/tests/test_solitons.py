"""Closed-form reference solutions."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nilflow import algebras
from nilflow.bundle import BaseGrid, flow_rhs
from nilflow.bundle.geometry import flow_from_geometry, reduced_geometry
from nilflow.curvature import ricci_arrays
from nilflow.errors import (
    DegenerateX,
    InputError,
    NormalizationViolated,
    ParameterOutOfRange,
    WrongFiber,
)
from nilflow.group_flow import group_flow_rhs
from nilflow.lie import MetricState, nil3_model
from nilflow.solitons import (
    SOLITON_GAMMA,
    ExplicitFamily,
    four_dim_soliton_jets,
    four_dim_soliton_rate,
    four_dim_soliton_state,
    nil3_group_closed_form,
    ode_system_residual,
    rigid_scaling_family,
    rigid_scaling_seed,
    soliton_grid,
)

seeds = st.integers(0, 2**32 - 1)


def _five_point(fn, t, h=1e-3):
    vals = [fn(t + k * h) for k in (-2, -1, 1, 2)]
    return (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)


@settings(max_examples=20)
@given(
    st.floats(0.3, 3.0), st.floats(0.3, 3.0), st.floats(0.5, 2.0), st.floats(0.5, 2.0), st.floats(0.01, 5.0)
)
def test_nil3_closed_form_solves_the_flow(a0, b0, t0, gamma, dt):
    t = t0 + dt
    G = nil3_group_closed_form(t, a0, b0, t0, gamma)
    fd = _five_point(lambda s: nil3_group_closed_form(s, a0, b0, t0, gamma).G, t)
    rhs = group_flow_rhs(G)
    assert np.abs(fd - rhs).max() <= 1e-8 * (1 + np.abs(rhs).max())


def test_nil3_closed_form_initial_value_and_errors():
    assert np.allclose(nil3_group_closed_form(1.0, 2.0, 0.5).G, np.diag([2.0, 2.0, 0.5]))
    with pytest.raises(ParameterOutOfRange):
        nil3_group_closed_form(0.5)
    with pytest.raises(ParameterOutOfRange):
        nil3_group_closed_form(2.0, a0=-1.0)


def _normalised_seed(rng, C):
    G = algebras.random_spd(rng, 3)
    R = float(ricci_arrays(nil3_model().c, G).R)
    return MetricState(nil3_model(), G * (-R) * 6 * (1 + C))


@settings(max_examples=25)
@given(seeds, st.floats(0.0, 5.0), st.floats(0.05, 20.0))
def test_rigid_family_is_a_flow_with_the_curvature_law(seed, C, t):
    G1 = _normalised_seed(np.random.default_rng(seed), C)
    Gt = rigid_scaling_family(t, C, G1)
    np.linalg.cholesky(Gt.G)
    R = float(ricci_arrays(nil3_model().c, Gt.G).R)
    assert R == pytest.approx(-1 / (6 * (t + C)), rel=1e-10)
    # the family is singular at t = -C, so the step scales with the distance to it
    fd = _five_point(lambda s: rigid_scaling_family(s, C, G1).G, t, h=1e-3 * (t + C))
    rhs = group_flow_rhs(Gt)
    assert np.abs(fd - rhs).max() <= 1e-7 * (1 + np.abs(rhs).max())


def test_rigid_family_starts_at_the_seed():
    G1 = rigid_scaling_seed(2.0, a=1.5)
    assert np.allclose(rigid_scaling_family(1.0, 2.0, G1).G, G1.G, atol=1e-14)
    assert float(ricci_arrays(G1.algebra.c, G1.G).R) == pytest.approx(-1 / 18, rel=1e-13)


def test_rigid_family_errors():
    with pytest.raises(NormalizationViolated):
        rigid_scaling_family(2.0, 0.0, MetricState(nil3_model(), np.eye(3)))
    with pytest.raises(ParameterOutOfRange):
        rigid_scaling_family(2.0, -1.0, rigid_scaling_seed(0.0))
    with pytest.raises(WrongFiber):
        rigid_scaling_family(2.0, 0.0, MetricState(algebras.heisenberg(2), np.eye(5)))


@pytest.mark.parametrize("x", [1.0, 2.0, -0.5])
@pytest.mark.parametrize("t", [1.0, 2.0, 5.0])
def test_exact_jets_solve_the_flow(x, t):
    jets = four_dim_soliton_jets(x, t, np.linspace(-1, 1, 11))
    v = flow_from_geometry(reduced_geometry(nil3_model(SOLITON_GAMMA).c, jets))
    Gf = jets.G
    expected = np.zeros_like(Gf)
    expected[:, 0, 0] = Gf[:, 0, 0] / (3 * t)
    expected[:, 1, 1] = Gf[:, 1, 1] / (3 * t)
    expected[:, 2, 2] = -Gf[:, 2, 2] / (3 * t)
    assert np.abs(v.dGf - expected).max() <= 1e-12
    assert np.abs(v.dgss - x * x).max() <= 1e-12
    assert np.abs(v.dGamma).max() == 0.0


@pytest.mark.parametrize("t", [1.0, 2.0, 5.0])
def test_grid_rate_matches_exact_rate(t):
    grid = soliton_grid(128)
    v = flow_rhs(four_dim_soliton_state(1.0, t, grid))
    ex = four_dim_soliton_rate(1.0, t, grid)
    sl = grid.interior
    assert np.abs(v.dGf - ex.dGf)[sl].max() <= 1e-6
    assert np.abs(v.dgss - ex.dgss)[sl].max() <= 1e-6


@pytest.mark.parametrize("x", [1.0, 2.0])
def test_ode_system_residuals(x):
    state = four_dim_soliton_state(x, 1.0, soliton_grid(16))
    exact = ode_system_residual(state, four_dim_soliton_jets(x, 1.0, np.linspace(-1, 1, 9)))
    assert max(exact.values()) <= 1e-12
    grid = ode_system_residual(four_dim_soliton_state(x, 1.0, soliton_grid(128)))
    assert max(grid.values()) <= 1e-5


def test_ode_residuals_converge_at_fourth_order():
    coarse = ode_system_residual(four_dim_soliton_state(1.0, 1.0, soliton_grid(128)))
    fine = ode_system_residual(four_dim_soliton_state(1.0, 1.0, soliton_grid(256)))
    for k in coarse:
        # residuals already at rounding level cannot shrink further
        assert fine[k] <= max(coarse[k] / 8, 1e-12), k
    assert coarse["geodesic"] > 1e-12


def test_soliton_errors():
    with pytest.raises(DegenerateX):
        four_dim_soliton_state(0.0, 1.0)
    with pytest.raises(ParameterOutOfRange):
        four_dim_soliton_state(1.0, -1.0)
    with pytest.raises(InputError):
        four_dim_soliton_state(1.0, 1.0, BaseGrid(32, 2.0))
    with pytest.raises(ParameterOutOfRange):
        ode_system_residual(four_dim_soliton_state(1.0, 2.0))
    with pytest.raises(InputError):
        ExplicitFamily("bogus", {})
