"""Covariant derivatives, Ricci components and flow right-hand sides of the reduced system.

Everything is expressed through *jets*: the fields and their first and second
s-derivatives at each grid point.  The grid routines fill jets with finite
differences; tests can fill them with exact derivatives instead.

Conventions (dimension-one base, vanishing bundle curvature):

* ``ad[k, j] = sum_i Gamma_i c[k, i, j]`` is ``ad_Gamma`` in the fibre algebra.
* ``D_s G = G' - ad^T G - G ad``.
* ``Hess = D_s D_s G - Chr DG`` with ``Chr = gss' / (2 gss)``.
* ``A = G^{-1} D_s G``, ``h = tr A`` (= d/ds ln det G), ``|DG|^2 = tr(A A) / gss``.
* ``w_i = DG([x_a, x_i]_frame, x_b) G^{ab}`` is the fibre-base coupling.  The vertical
  frame fields bracket with the opposite sign to the algebra, ``[X_a, X_i] = -c[k, a, i] X_k``,
  and this is the only place where that sign enters.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..curvature import CurvaturePackage, ricci_arrays
from .state import BundleState


@dataclass(frozen=True)
class Jets:
    G: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    gss: np.ndarray
    gss1: np.ndarray
    Gamma: np.ndarray
    Gamma1: np.ndarray


def grid_jets(grid, Gf, gss, Gamma) -> Jets:
    """Jets from finite differences; all first derivatives come from one stacked stencil."""
    N, n = Gamma.shape
    packed = np.concatenate((Gf.reshape(N, n * n), gss[:, None], Gamma), axis=1)
    d1 = grid.d1(packed)
    return Jets(
        G=Gf,
        G1=d1[:, : n * n].reshape(N, n, n),
        G2=grid.d2(Gf.reshape(N, n * n)).reshape(N, n, n),
        gss=gss,
        gss1=d1[:, n * n],
        Gamma=Gamma,
        Gamma1=d1[:, n * n + 1 :],
    )


def state_jets(state: BundleState) -> Jets:
    return grid_jets(state.grid, state.Gf, state.gss, state.Gamma)


def ad_matrices(c, Gamma) -> np.ndarray:
    """``ad[..., k, j] = sum_i Gamma_i c[k, i, j]``."""
    n = c.shape[0]
    flat = Gamma @ c.transpose(1, 0, 2).reshape(n, n * n)
    return flat.reshape(Gamma.shape[:-1] + (n, n))


def _T(a):
    return np.swapaxes(a, -1, -2)


def _tr(a):
    return np.trace(a, axis1=-2, axis2=-1)


@dataclass(frozen=True)
class ReducedGeometry:
    """Intermediate fields shared by the Ricci, flow and functional code."""

    curv: CurvaturePackage
    Ginv: np.ndarray
    ginv: np.ndarray
    chr: np.ndarray
    ad: np.ndarray
    DG: np.ndarray
    DDG: np.ndarray
    hess: np.ndarray
    A: np.ndarray
    h: np.ndarray
    trAA: np.ndarray
    w: np.ndarray

    @property
    def dg_norm_sq(self) -> np.ndarray:
        """``|DG|^2`` including the base index."""
        return self.ginv * self.trAA

    @property
    def hess_trace(self) -> np.ndarray:
        """``G^{ij} Hess_ij``."""
        return _tr(self.Ginv @ self.hess)


def covariant_derivative(c, G, G1, Gamma):
    """``D_s G`` for fibre metric ``G`` with derivative ``G1`` and connection ``Gamma``."""
    ad = ad_matrices(c, Gamma)
    return G1 - _T(ad) @ G - G @ ad, ad


def reduced_geometry(c, jets: Jets) -> ReducedGeometry:
    c = np.asarray(c, dtype=float)
    G = jets.G
    DG, ad = covariant_derivative(c, G, jets.G1, jets.Gamma)
    ad1 = ad_matrices(c, jets.Gamma1)
    # s-derivative of DG, then the connection acting on it again
    dDG = jets.G2 - _T(ad1) @ G - _T(ad) @ jets.G1 - jets.G1 @ ad - G @ ad1
    DDG = dDG - _T(ad) @ DG - DG @ ad
    ginv = 1.0 / jets.gss
    chr_ = 0.5 * jets.gss1 * ginv
    hess = DDG - chr_[:, None, None] * DG
    curv = ricci_arrays(c, G)
    Ginv = curv.Ginv
    A = Ginv @ DG
    n = c.shape[0]
    w = -(DG @ Ginv).reshape(DG.shape[:-2] + (n * n,)) @ c.reshape(n * n, n)
    return ReducedGeometry(
        curv=curv,
        Ginv=Ginv,
        ginv=ginv,
        chr=chr_,
        ad=ad,
        DG=DG,
        DDG=DDG,
        hess=hess,
        A=A,
        h=_tr(A),
        trAA=(A * _T(A)).sum(axis=(-2, -1)),
        w=w,
    )


def geometry(state: BundleState) -> ReducedGeometry:
    return reduced_geometry(state.fiber.c, state_jets(state))


def covariant_dG(state: BundleState) -> np.ndarray:
    g = state.grid
    return covariant_derivative(state.fiber.c, state.Gf, g.d1(state.Gf), state.Gamma)[0]


def fiber_curvature_field(state: BundleState) -> CurvaturePackage:
    return ricci_arrays(state.fiber.c, state.Gf)


@dataclass(frozen=True)
class BundleRicci:
    Ric_ff: np.ndarray
    Ric_fb: np.ndarray
    Ric_bb: np.ndarray
    scalar: np.ndarray


def ricci_from_geometry(geo: ReducedGeometry) -> BundleRicci:
    ginv = geo.ginv[:, None, None]
    Ric_ff = (
        geo.curv.Ric
        - 0.5 * ginv * geo.hess
        - 0.25 * ginv * geo.h[:, None, None] * geo.DG
        + 0.5 * ginv * geo.DG @ geo.Ginv @ geo.DG
    )
    Ric_bb = -0.5 * geo.hess_trace + 0.25 * geo.trAA
    scalar = (
        geo.curv.R
        - geo.ginv * geo.hess_trace
        - 0.25 * geo.ginv * geo.h**2
        + 0.75 * geo.ginv * geo.trAA
    )
    return BundleRicci(
        Ric_ff=0.5 * (Ric_ff + _T(Ric_ff)), Ric_fb=-0.5 * geo.w, Ric_bb=Ric_bb, scalar=scalar
    )


def bundle_ricci(state: BundleState) -> BundleRicci:
    """Ricci of the total metric in the frame (fibre frame, horizontal lift of d/ds)."""
    return ricci_from_geometry(geometry(state))


@dataclass(frozen=True)
class FlowRHS:
    dGf: np.ndarray
    dGamma: np.ndarray
    dgss: np.ndarray
    df: Optional[np.ndarray] = None


def flow_from_geometry(geo: ReducedGeometry) -> FlowRHS:
    ginv = geo.ginv[:, None, None]
    dG = (
        -2.0 * geo.curv.Ric
        + ginv * geo.hess
        - ginv * geo.DG @ geo.Ginv @ geo.DG
        + 0.5 * ginv * geo.h[:, None, None] * geo.DG
    )
    # G dGamma = w, a linear solve per point
    dGamma = (geo.Ginv @ geo.w[..., None])[..., 0]
    dgss = geo.hess_trace - 0.5 * geo.trAA
    return FlowRHS(dGf=0.5 * (dG + _T(dG)), dGamma=dGamma, dgss=dgss)


def flow_rhs(state: BundleState) -> FlowRHS:
    """Time derivatives of ``(Gf, Gamma, gss)`` under Ricci flow of the total metric."""
    return flow_from_geometry(geometry(state))


def gauged_from_geometry(geo: ReducedGeometry, f, f1, f2, t) -> FlowRHS:
    ginv = geo.ginv
    grad = ginv * f1
    dG = (
        -2.0 * geo.curv.Ric
        + ginv[:, None, None] * (geo.hess - geo.DG @ geo.Ginv @ geo.DG)
        - grad[:, None, None] * geo.DG
    )
    dGamma = np.einsum("...ij,...j->...i", geo.Ginv, geo.w)
    hess_f = f2 - geo.chr * f1
    dgss = 0.5 * geo.trAA - 2.0 * hess_f
    lap_f = ginv * hess_f
    df = -lap_f + 0.25 * geo.dg_norm_sq - 0.5 / t
    return FlowRHS(dGf=0.5 * (dG + _T(dG)), dGamma=dGamma, dgss=dgss, df=df)


def gauged_flow_rhs(state: BundleState, f=None) -> FlowRHS:
    """Gauge-modified system whose flow preserves ``u dV`` pointwise; includes ``df``."""
    f = state.f if f is None else np.asarray(f, dtype=float)
    if f is None:
        from ..errors import InputError

        raise InputError("gauged system needs a potential f")
    g = state.grid
    return gauged_from_geometry(geometry(state), f, g.d1(f), g.d2(f), state.t)
