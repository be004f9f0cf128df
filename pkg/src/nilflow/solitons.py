"""Closed-form reference solutions and their residual checks.

* ``nil3_group_closed_form``: diagonal Ricci flow on the Heisenberg group.
* ``rigid_scaling_family``: block scalings of a Heisenberg metric with ``R = -1/(6(t+C))``.
* ``four_dim_soliton_state``: the expanding soliton on ``R x Nil3`` whose fibre metric is
  ``t^{1/3} exp(s X) + t^{-1/3}`` with ``X = diag(x, -x)`` and base metric ``t x^2 ds^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bundle.geometry import FlowRHS
from .bundle.grid import BaseGrid
from .bundle.state import BundleState
from .curvature import ricci_arrays
from .errors import DegenerateX, InputError, NormalizationViolated, ParameterOutOfRange, WrongFiber
from .lie import MetricState, NilpotentAlgebra, nil3_model

# the fibre bracket constant forced by the four-dimensional soliton
SOLITON_GAMMA = 1.0 / math.sqrt(3.0)
FAMILIES = ("nil3_group", "rigid_scaling", "four_dim_soliton")


@dataclass(frozen=True)
class ExplicitFamily:
    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise InputError(f"unknown family {self.kind!r}; choose from {FAMILIES}")


def nil3_group_closed_form(
    t: float, a0: float = 1.0, b0: float = 1.0, t0: float = 1.0, gamma: float = 1.0
) -> MetricState:
    """``diag(a, a, b)`` with ``a^3 = a0^3 + 3 gamma^2 a0 b0 (t - t0)`` and ``a b = a0 b0``."""
    if not (t0 > 0 and t >= t0 and a0 > 0 and b0 > 0):
        raise ParameterOutOfRange(f"need t >= t0 > 0 and a0, b0 > 0 (t={t}, t0={t0}, a0={a0}, b0={b0})")
    k = a0 * b0
    a = (a0**3 + 3.0 * gamma**2 * k * (t - t0)) ** (1.0 / 3.0)
    return MetricState(nil3_model(gamma), np.diag([a, a, k / a]))


def _nil3_center(alg: NilpotentAlgebra) -> np.ndarray:
    if alg.dim != 3 or alg.nilpotency_degree != 2:
        raise WrongFiber("expected a three-dimensional Heisenberg algebra")
    return np.asarray(alg.center_basis[0])


def rigid_scaling_family(t: float, C: float, G1: MetricState) -> MetricState:
    """Scale ``G1`` by ``rho^{1/3}`` off the centre and ``rho^{-1/3}`` on it, ``rho = (t+C)/(1+C)``."""
    if C < 0 or t + C <= 0:
        raise ParameterOutOfRange(f"need C >= 0 and t + C > 0, got t={t}, C={C}")
    z = _nil3_center(G1.algebra)
    R1 = float(ricci_arrays(G1.algebra.c, G1.G).R)
    target = -1.0 / (6.0 * (1.0 + C))
    if abs(R1 - target) > 1e-8:
        raise NormalizationViolated(f"initial scalar curvature {R1:.10g}, expected {target:.10g}")
    G = G1.G
    P = np.outer(z, z @ G) / float(z @ G @ z)  # G-orthogonal projector onto the centre
    Q = np.eye(3) - P
    rho = (t + C) / (1.0 + C)
    Gt = rho ** (1 / 3) * Q.T @ G @ Q + rho ** (-1 / 3) * P.T @ G @ P
    return MetricState(G1.algebra, 0.5 * (Gt + Gt.T))


def rigid_scaling_seed(C: float, a: float = 1.0) -> MetricState:
    """A unit-bracket Heisenberg metric ``diag(a, a, b)`` normalised to ``R = -1/(6(1+C))``."""
    b = a * a / (3.0 * (1.0 + C))
    return MetricState(nil3_model(1.0), np.diag([a, a, b]))


def soliton_grid(N: int = 128, half_width: float = 1.0) -> BaseGrid:
    return BaseGrid(N, 2.0 * half_width, periodic=False, origin=-half_width)


def _soliton_fields(x: float, t: float, s: np.ndarray):
    if x == 0:
        raise DegenerateX("x = 0 makes the base metric degenerate")
    if not t > 0:
        raise ParameterOutOfRange(f"t must be positive, got {t}")
    N = s.shape[0]
    Gf = np.zeros((N, 3, 3))
    Gf[:, 0, 0] = t ** (1 / 3) * np.exp(s * x)
    Gf[:, 1, 1] = t ** (1 / 3) * np.exp(-s * x)
    Gf[:, 2, 2] = t ** (-1 / 3)
    return Gf, np.full(N, t * x * x), np.zeros((N, 3))


def four_dim_soliton_state(x: float, t: float, grid: Optional[BaseGrid] = None) -> BundleState:
    grid = soliton_grid() if grid is None else grid
    if grid.periodic:
        raise InputError("the explicit soliton is not periodic; use an interval grid")
    Gf, gss, Gam = _soliton_fields(x, t, grid.s)
    return BundleState(t, grid, nil3_model(SOLITON_GAMMA), Gf, gss, Gam)


def four_dim_soliton_boundary(x: float, grid: BaseGrid):
    """Boundary-data callback for ``integrate_bundle``: the exact family at time t."""

    def data(t):
        Gf, gss, Gam = _soliton_fields(x, t, grid.s)
        return Gf, Gam, gss

    return data


def four_dim_soliton_rate(x: float, t: float, grid: BaseGrid) -> FlowRHS:
    """Exact time derivative of the family."""
    s = grid.s
    N = s.shape[0]
    dG = np.zeros((N, 3, 3))
    dG[:, 0, 0] = t ** (-2 / 3) / 3 * np.exp(s * x)
    dG[:, 1, 1] = t ** (-2 / 3) / 3 * np.exp(-s * x)
    dG[:, 2, 2] = -(t ** (-4 / 3)) / 3
    return FlowRHS(dGf=dG, dGamma=np.zeros((N, 3)), dgss=np.full(N, x * x))


def four_dim_soliton_jets(x: float, t: float, s):
    """Exact fields and s-derivatives, for checks free of stencil error."""
    from .bundle.geometry import Jets

    s = np.atleast_1d(np.asarray(s, dtype=float))
    Gf, gss, Gam = _soliton_fields(x, t, s)
    X = np.diag([x, -x, 0.0])
    return Jets(
        G=Gf,
        G1=X @ Gf,
        G2=X @ X @ Gf,
        gss=gss,
        gss1=np.zeros_like(gss),
        Gamma=Gam,
        Gamma1=np.zeros_like(Gam),
    )


def ode_system_residual(state: BundleState, jets=None) -> dict:
    """Sup-norm residuals of the four conditions characterising the soliton at ``t = 1``.

    ``G33 = 1``, ``det G_uv = 1`` on the ``x1, x2`` block, ``G'' = G' G^{-1} G'``
    on that block and ``2 gss = tr(G^{-1} G' G^{-1} G')``.  Derivatives come
    from the grid unless exact ``jets`` are supplied.
    """
    z = _nil3_center(state.fiber)
    if not np.allclose(np.abs(z), [0, 0, 1], atol=1e-12):
        raise WrongFiber("the centre must be spanned by the third basis vector")
    if abs(state.t - 1.0) > 1e-12:
        raise ParameterOutOfRange(f"the soliton conditions are normalised at t=1, got t={state.t}")
    g = state.grid
    if jets is None:
        sl = g.interior
        G, G1, G2, gss = state.Gf[sl], g.d1(state.Gf)[sl], g.d2(state.Gf)[sl], state.gss[sl]
    else:
        G, G1, G2, gss = jets.G, jets.G1, jets.G2, jets.gss
    B, B1, B2 = G[:, :2, :2], G1[:, :2, :2], G2[:, :2, :2]
    Binv = np.linalg.inv(B)
    M = Binv @ B1
    return {
        "G33_minus_1": float(np.max(np.abs(G[:, 2, 2] - 1.0))),
        "det_minus_1": float(np.max(np.abs(np.linalg.det(B) - 1.0))),
        "geodesic": float(np.max(np.abs(B2 - B1 @ Binv @ B1))),
        "base_metric": float(np.max(np.abs(2 * gss - np.einsum("pij,pji->p", M, M)))),
    }
