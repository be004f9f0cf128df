"""Method-of-lines time stepping for the reduced flow and the backward conjugate heat equation."""
from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import (
    BlowUp,
    InputError,
    MisalignedTrajectories,
    NotPositiveDefinite,
    PositivityLost,
    StiffnessOverflow,
)
from .geometry import Jets, flow_from_geometry, grid_jets, reduced_geometry
from .grid import BaseGrid
from .state import BundleState

MIN_DT = 1e-12

# interval grids need the two outer points on each side prescribed, e.g. by an exact solution
BoundaryData = Callable[[float], tuple]


def _rhs_arrays(c, grid: BaseGrid, Gf, gss, Gam):
    jets = grid_jets(grid, Gf, gss, Gam)
    if grid.periodic:
        rhs = flow_from_geometry(reduced_geometry(c, jets))
        return rhs.dGf, rhs.dGamma, rhs.dgss
    sl = grid.interior
    jets = Jets(*(getattr(jets, k)[sl] for k in Jets.__dataclass_fields__))
    rhs = flow_from_geometry(reduced_geometry(c, jets))
    out = []
    for full, part in ((Gf, rhs.dGf), (Gam, rhs.dGamma), (gss, rhs.dgss)):
        z = np.zeros_like(full)
        z[sl] = part
        out.append(z)
    return tuple(out)


def _apply_boundary(grid, fields, boundary, t):
    if grid.periodic or boundary is None:
        return fields
    Gf, Gam, gss = (np.array(a) for a in fields)
    bG, bGam, bgss = boundary(t)
    for sl in (slice(0, 2), slice(grid.N - 2, grid.N)):
        Gf[sl], Gam[sl], gss[sl] = bG[sl], bGam[sl], bgss[sl]
    return Gf, Gam, gss


def _check(grid, Gf, gss, t):
    bad = ~np.isfinite(gss) | (gss <= 0) | ~np.all(np.isfinite(Gf), axis=(1, 2))
    if not np.any(bad):
        try:
            np.linalg.cholesky(Gf)
            return
        except np.linalg.LinAlgError:
            eig = np.linalg.eigvalsh(Gf)
            bad = eig[:, 0] <= 0
    p = int(np.argmax(bad))
    raise PositivityLost(t, float(grid.s[p]))


def stable_dt(grid: BaseGrid, gss, cfl: float) -> float:
    """``cfl * ds^2 / max(g^ss)``: the diffusion coefficient of the fibre equation is ``g^ss``."""
    return cfl * grid.ds**2 * float(np.min(gss))


def integrate_bundle(
    state0: BundleState,
    t1: float,
    cfl: float = 0.2,
    save_times: Optional[Sequence[float]] = None,
    store_every: Optional[int] = None,
    boundary: Optional[BoundaryData] = None,
) -> list[BundleState]:
    """RK4 integration of ``(Gf, Gamma, gss)`` from ``state0.t`` to ``t1``.

    Snapshots are returned at ``save_times`` (hit exactly) or, with
    ``store_every=k``, after every k-th step; the initial and final states are
    always included.  On interval grids ``boundary(t)`` must return full-size
    ``(Gf, Gamma, gss)`` arrays whose two outer points per side are imposed.
    """
    if not t1 > state0.t:
        raise InputError(f"t1={t1} must exceed the initial time {state0.t}")
    if not 0 < cfl < 1:
        raise InputError(f"cfl must lie in (0, 1), got {cfl}")
    grid, c = state0.grid, state0.fiber.c
    if not grid.periodic and boundary is None:
        raise InputError("interval grids need boundary data")
    targets = sorted({float(x) for x in (save_times or []) if state0.t < x <= t1} | {float(t1)})
    out = [state0.replace(f=None)]
    t = state0.t
    Gf, Gam, gss = np.array(state0.Gf), np.array(state0.Gamma), np.array(state0.gss)
    step = 0

    def rhs(tt, fields):
        fields = _apply_boundary(grid, fields, boundary, tt)
        try:
            return fields, _rhs_arrays(c, grid, fields[0], fields[2], fields[1])
        except NotPositiveDefinite:
            # an intermediate stage left the cone of metrics
            raise PositivityLost(t) from None

    for target in targets:
        while t < target * (1 - 1e-15):
            dt = stable_dt(grid, gss, cfl)
            if dt < MIN_DT:
                raise StiffnessOverflow(f"time step {dt:.3e} underflowed at t={t:.6g}")
            # land exactly on the target; split the remainder evenly to avoid a tiny last step
            rem = target - t
            n_left = math.ceil(rem / dt - 1e-9)
            dt = rem / n_left
            y = (Gf, Gam, gss)
            y0, k1 = rhs(t, y)
            _, k2 = rhs(t + dt / 2, tuple(a + dt / 2 * k for a, k in zip(y0, (k1[0], k1[1], k1[2]))))
            _, k3 = rhs(t + dt / 2, tuple(a + dt / 2 * k for a, k in zip(y0, (k2[0], k2[1], k2[2]))))
            _, k4 = rhs(t + dt, tuple(a + dt * k for a, k in zip(y0, (k3[0], k3[1], k3[2]))))
            Gf, Gam, gss = (
                a + dt / 6 * (p + 2 * q + 2 * r + s)
                for a, p, q, r, s in zip(y0, k1, k2, k3, k4)
            )
            t = target if n_left == 1 else t + dt
            Gf, Gam, gss = _apply_boundary(grid, (Gf, Gam, gss), boundary, t)
            Gf = 0.5 * (Gf + Gf.transpose(0, 2, 1))
            _check(grid, Gf, gss, t)
            step += 1
            if store_every and step % store_every == 0 and t < target:
                out.append(BundleState(t, grid, state0.fiber, Gf, gss, Gam))
        out.append(BundleState(target, grid, state0.fiber, Gf, gss, Gam))
    return out


def _hermite_mid(s0: BundleState, s1: BundleState, r0, r1):
    """Cubic Hermite value at the midpoint of ``[s0.t, s1.t]`` from values and time derivatives."""
    h = s1.t - s0.t

    def mid(a, b, da, db):
        return 0.5 * (a + b) + h / 8.0 * (da - db)

    return (
        mid(s0.Gf, s1.Gf, r0.dGf, r1.dGf),
        mid(s0.gss, s1.gss, r0.dgss, r1.dgss),
    )


def _heat_flux_rhs(grid: BaseGrid, c, Gf, gss, Q):
    """``dQ/dt`` for the density ``Q = u sqrt(gss)`` in conservation form.

    The backward conjugate heat equation for ``u = e^{-f}/(4 pi t)^{1/2}`` is
    equivalent to ``d/dt (u sqrt(gss)) = d/ds [(-u' + h u / 2) / sqrt(gss)]``
    with ``h = d/ds ln det Gf``.  Writing it as a discrete divergence keeps
    ``sum Q ds`` fixed to rounding error.
    """
    rg = np.sqrt(gss)
    u = Q / rg
    logdet = np.linalg.slogdet(Gf)[1]
    h = grid.d1(logdet)
    flux = (-grid.d1(u) + 0.5 * h * u) / rg
    return grid.d1(flux)


def conjugate_heat_backward(
    traj: Sequence[BundleState], f_terminal, normalize: bool = True
) -> list[np.ndarray]:
    """Solve the conjugate heat equation backwards along a stored trajectory.

    ``traj`` must be densely sampled (every integrator step, e.g.
    ``store_every=1``) because each interval is advanced by one RK4 step with
    the metric at the midpoint taken from cubic Hermite interpolation.
    Returns ``f`` at every trajectory time.  With ``normalize`` the terminal
    density is rescaled so that ``integral u dV = 1``.
    """
    if len(traj) < 2:
        raise MisalignedTrajectories("need at least two states")
    times = np.array([s.t for s in traj])
    if np.any(np.diff(times) <= 0):
        raise MisalignedTrajectories("trajectory times must increase strictly")
    grid, c = traj[-1].grid, traj[-1].fiber.c
    if not grid.periodic:
        raise InputError("the conjugate heat solver needs a periodic grid")
    f_T = np.asarray(f_terminal, dtype=float)
    if f_T.shape != (grid.N,):
        raise MisalignedTrajectories(f"terminal potential has shape {f_T.shape}, grid N={grid.N}")
    T = traj[-1].t
    u = np.exp(-f_T) / np.sqrt(4 * np.pi * T)
    Q = u * np.sqrt(traj[-1].gss)
    if normalize:
        Q = Q / grid.integrate(Q)
    from .geometry import flow_rhs

    rates = [None] * len(traj)
    rates[-1] = flow_rhs(traj[-1])
    out = [None] * len(traj)

    def to_f(Q, st):
        uu = Q / np.sqrt(st.gss)
        if not np.all(np.isfinite(uu)) or np.any(uu <= 0):
            raise BlowUp(f"heat density lost positivity at t={st.t:.6g}")
        return -np.log(uu * np.sqrt(4 * np.pi * st.t))

    out[-1] = to_f(Q, traj[-1])
    for i in range(len(traj) - 1, 0, -1):
        s1, s0 = traj[i], traj[i - 1]
        rates[i - 1] = flow_rhs(s0)
        Gm, gm = _hermite_mid(s0, s1, rates[i - 1], rates[i])
        dt = s1.t - s0.t
        # integrate in reversed time tau = T - t, so dQ/dtau = -dQ/dt
        k1 = -_heat_flux_rhs(grid, c, s1.Gf, s1.gss, Q)
        k2 = -_heat_flux_rhs(grid, c, Gm, gm, Q + 0.5 * dt * k1)
        k3 = -_heat_flux_rhs(grid, c, Gm, gm, Q + 0.5 * dt * k2)
        k4 = -_heat_flux_rhs(grid, c, s0.Gf, s0.gss, Q + dt * k3)
        Q = Q + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i - 1] = to_f(Q, s0)
        rates[i] = None
    return out


def heat_mass(state: BundleState, f) -> float:
    """``integral e^{-f} (4 pi t)^{-1/2} dV``."""
    u = np.exp(-np.asarray(f)) / np.sqrt(4 * np.pi * state.t)
    return state.grid.integrate(u * np.sqrt(state.gss))
