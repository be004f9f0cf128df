"""Residuals of the rigidity conditions and the parabolic blowdown driver.

Every residual is a sup-norm over the grid points where the stencils are
valid, so each one vanishes on an expanding soliton of the reduced system.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

from ..curvature import ricci_arrays
from ..errors import InputError, ScaleOutOfRange
from ..lie import bilinear_inner, delta_map, tensor_norm_sq
from .geometry import flow_from_geometry, geometry
from .state import BundleState

RESIDUAL_NAMES = (
    "fibre_harmonic",
    "base_einstein",
    "delta_A",
    "dlogdet",
    "tR_plus_sixth",
    "trace_off_center",
    "DG_center",
    "dGamma",
    "reconstruction",
)


def _sup(a) -> float:
    return float(np.max(np.abs(a)))


def _is_nil3(alg) -> bool:
    return alg.dim == 3 and alg.nilpotency_degree == 2


def _center_blocks(Z, G, DG, A):
    """Trace of ``A`` off the centre and the ``G``-norm of ``DG`` restricted to the centre.

    ``Z`` holds a basis of the centre as rows.  The ``G``-orthogonal projector
    onto the centre is ``Zb M^{-1} Zb^T G`` with ``M = Zb^T G Zb``.
    """
    Zb = np.asarray(Z, dtype=float).T
    M = Zb.T @ G @ Zb
    Minv = np.linalg.inv(M)
    # tr(P_Z A) = tr(M^{-1} Zb^T G A Zb) and G A = DG
    tr_center = np.trace(Minv @ (Zb.T @ DG @ Zb), axis1=-2, axis2=-1)
    off = np.trace(A, axis1=-2, axis2=-1) - tr_center
    block = Zb.T @ DG @ Zb
    norm_sq = bilinear_inner(Minv, block, block)
    return off, np.sqrt(np.maximum(norm_sq, 0.0))


def reconstruct_fiber(reference: BundleState, t: float) -> np.ndarray:
    """``t psi^T Gf(s, 1) psi`` with ``psi = exp(ln t B(s))`` and ``B = -(Rc + 1/2)`` at ``t = 1``.

    This is the fibre metric at time ``t`` of the expanding soliton generated
    by ``reference``.
    """
    if abs(reference.t - 1.0) > 1e-12:
        raise InputError(f"the reference state must sit at t=1, got t={reference.t}")
    n = reference.n
    Rc = ricci_arrays(reference.fiber.c, reference.Gf).Rc
    B = -(Rc + 0.5 * np.eye(n))
    psi = expm(np.log(t) * B)
    return t * np.swapaxes(psi, -1, -2) @ reference.Gf @ psi


def rigidity_diagnostics(state: BundleState, reference: Optional[BundleState] = None) -> dict:
    """Sup-norm residuals of the conditions satisfied by a reduced soliton.

    * ``fibre_harmonic``: ``g^ss (Hess - DG G^{-1} DG)`` in the fibre norm.
    * ``base_einstein``: ``g^ss (gss / 2t - tr(AA) / 4)``; the one-dimensional base is Ricci flat.
    * ``delta_A``: ``|delta(G^{-1} D_s G)|`` in the total metric.
    * ``dlogdet``: ``d/ds ln det Gf`` in the coordinate ``s``.
    * ``tR_plus_sixth``: ``t R_G + 1/6`` (Heisenberg fibre only, otherwise ``None``).
    * ``trace_off_center``: trace of ``G^{-1} D_s G`` over the ``G``-orthogonal complement of the centre.
    * ``DG_center``: ``D_s G`` restricted to the centre.
    * ``dGamma``: the connection velocity ``G^{-1} w``.
    * ``reconstruction``: distance from the soliton generated by ``reference``
      (a state at ``t = 1``); ``None`` when no reference is given.
    """
    g = state.grid
    sl = g.interior
    geo = geometry(state)
    t = state.t
    c = state.fiber.c
    G = state.Gf[sl]
    ginv = geo.ginv[sl]
    Ginv = geo.Ginv[sl]
    DG, A, hess = geo.DG[sl], geo.A[sl], geo.hess[sl]

    S = ginv[:, None, None] * (hess - DG @ Ginv @ DG)
    fibre = np.sqrt(np.maximum(bilinear_inner(Ginv, S, S), 0.0))
    base = ginv * (state.gss[sl] / (2.0 * t) - 0.25 * geo.trAA[sl])
    delta_sq = ginv * tensor_norm_sq(G, delta_map(c, A), Ginv)
    off, center = _center_blocks(state.fiber.center_basis, G, DG, A)
    dGamma = flow_from_geometry(geo).dGamma[sl]
    gamma_norm = np.sqrt(np.maximum(ginv * np.einsum("pi,pij,pj->p", dGamma, G, dGamma), 0.0))

    out = {
        "fibre_harmonic": _sup(fibre),
        "base_einstein": _sup(base),
        "delta_A": float(np.sqrt(np.max(delta_sq))),
        "dlogdet": _sup(geo.h[sl]),
        "tR_plus_sixth": _sup(t * geo.curv.R[sl] + 1.0 / 6.0) if _is_nil3(state.fiber) else None,
        "trace_off_center": _sup(np.sqrt(ginv) * off),
        "DG_center": _sup(np.sqrt(ginv) * center),
        "dGamma": _sup(gamma_norm),
        "reconstruction": None,
    }
    if reference is not None:
        if reference.grid != g or reference.fiber != state.fiber:
            raise InputError("reference state lives on a different grid or fibre")
        diff = state.Gf[sl] - reconstruct_fiber(reference, t)[sl]
        out["reconstruction"] = float(np.max(np.linalg.norm(diff, axis=(1, 2))))
    return out


def state_at_time(traj: Sequence[BundleState], t: float) -> BundleState:
    """The stored state at ``t``, or the linear interpolant between its stored neighbours."""
    times = np.array([s.t for s in traj])
    if not times[0] * (1 - 1e-12) <= t <= times[-1] * (1 + 1e-12):
        raise ScaleOutOfRange(f"time {t} outside the trajectory [{times[0]}, {times[-1]}]")
    j = int(np.argmin(np.abs(times - t)))
    if abs(times[j] - t) <= 1e-12 * max(1.0, t):
        return traj[j]
    k = int(np.searchsorted(times, t))
    s0, s1 = traj[k - 1], traj[k]
    lam = (t - s0.t) / (s1.t - s0.t)

    def mix(a, b):
        return (1 - lam) * a + lam * b

    return BundleState(
        t, s0.grid, s0.fiber, mix(s0.Gf, s1.Gf), mix(s0.gss, s1.gss), mix(s0.Gamma, s1.Gamma)
    )


def rescaled_state(traj: Sequence[BundleState], scale: float, t_ref: float = 1.0) -> BundleState:
    """The parabolic rescaling ``g(scale t) / scale`` evaluated at ``t = t_ref``."""
    scale = float(scale)
    if not scale > 0:
        raise ScaleOutOfRange(f"scale must be positive, got {scale}")
    st = state_at_time(traj, scale * t_ref)
    return st.scaled(1.0 / scale).replace(t=t_ref)


def blowdown_driver(traj: Sequence[BundleState], scales: Sequence[float]) -> list[dict]:
    """Rigidity residuals of the rescaled states at ``t = 1``, one row per scale."""
    if len(traj) == 0:
        raise InputError("empty trajectory")
    rows = []
    for s in scales:
        row = {"scale": float(s)}
        row.update(rigidity_diagnostics(rescaled_state(traj, s)))
        rows.append(row)
    return rows
