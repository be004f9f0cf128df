"""Ricci and scalar curvature of left-invariant metrics on nilpotent groups.

With an orthonormal frame ``e`` the Ricci form is

    Ric(u, v) = -1/2 sum <[e_u, e_a], e_k><[e_v, e_a], e_k>
                + 1/4 sum <[e_a, e_b], e_u><[e_a, e_b], e_v>

and ``R = -1/4 |[,]|^2``.  The frame comes from a Cholesky factor ``G = L L^T``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NotPositiveDefinite, ShapeMismatch
from .lie import (
    MetricState,
    adjoint,
    as_matrix,
    bilinear_inner,
    delta_map,
    endo_inner,
    tensor_inner,
)


@dataclass(frozen=True)
class CurvaturePackage:
    """Curvature of one metric, or a stack of metrics when arrays carry leading axes."""

    Ric: np.ndarray
    R: np.ndarray
    Rc: np.ndarray
    ric_norm_sq: np.ndarray
    Ginv: np.ndarray


def orthonormal_constants(c, G):
    """Return ``(c_orth, L, E)``: constants in the frame ``E = inv(L).T`` where ``G = L L^T``."""
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("metric matrix is not positive definite") from None
    n = G.shape[-1]
    E = np.swapaxes(np.linalg.inv(L), -1, -2)
    Lt = np.swapaxes(L, -1, -2)
    # matmul chains are much faster than a generic einsum for these tiny sizes
    t1 = (Lt @ c.reshape(c.shape[:-3] + (n, n * n))).reshape(np.broadcast_shapes(
        Lt.shape[:-2], c.shape[:-3]) + (n, n, n))
    t2 = t1 @ E[..., None, :, :]
    cO = np.swapaxes(E, -1, -2)[..., None, :, :] @ t2
    return cO, L, E


def ricci_arrays(c, G) -> CurvaturePackage:
    """Vectorised curvature; ``c`` and ``G`` broadcast over leading axes."""
    c = np.asarray(c, dtype=float)
    G = np.asarray(G, dtype=float)
    if c.shape[-1] != G.shape[-1]:
        raise ShapeMismatch(f"constants {c.shape} vs metric {G.shape}")
    n = G.shape[-1]
    cO, L, E = orthonormal_constants(c, G)
    flat = cO.reshape(cO.shape[:-2] + (n * n,))
    ric_o = -0.5 * (cO @ np.swapaxes(cO, -1, -2)).sum(axis=-3) + 0.25 * (
        flat @ np.swapaxes(flat, -1, -2)
    )
    ric_o = 0.5 * (ric_o + np.swapaxes(ric_o, -1, -2))
    Ric = L @ ric_o @ np.swapaxes(L, -1, -2)
    Ric = 0.5 * (Ric + np.swapaxes(Ric, -1, -2))
    Ginv = E @ np.swapaxes(E, -1, -2)
    return CurvaturePackage(
        Ric=Ric,
        R=-0.25 * (flat * flat).sum(axis=-1).sum(axis=-1),
        Rc=Ginv @ Ric,
        ric_norm_sq=(ric_o * ric_o).sum(axis=(-2, -1)),
        Ginv=Ginv,
    )


def curvature(G: MetricState) -> CurvaturePackage:
    return ricci_arrays(G.algebra.c, G.G)


def rc_delta_pairing(G: MetricState, A) -> tuple[float, float]:
    """Both sides of ``<Rc, A> = 1/4 <delta(A), [,]>``."""
    A = np.asarray(A, dtype=float)
    if A.shape != G.G.shape:
        raise ShapeMismatch(f"endomorphism {A.shape} vs metric {G.G.shape}")
    cp = curvature(G)
    lhs = float(endo_inner(G.G, cp.Rc, A, cp.Ginv))
    rhs = 0.25 * float(tensor_inner(G.G, delta_map(G.algebra.c, A), G.algebra.c, cp.Ginv))
    return lhs, rhs


@dataclass(frozen=True)
class VariationDerivatives:
    """First-order change of curvature quantities along a metric direction ``Gdot``.

    ``dRic(S)`` predicts ``d/dt <Ric_G(t), S>`` and ``dRc(A)`` predicts
    ``d/dt <Rc_G(t), A>``, with the pairing metric held at its initial value.
    """

    dR: float
    dRicNormSq: float
    dRic: Callable[[np.ndarray], float]
    dRc: Callable[[np.ndarray], float]


def variation_derivatives(G: MetricState, Gdot) -> VariationDerivatives:
    Gdot = np.asarray(Gdot, dtype=float)
    Gm = G.G
    if Gdot.shape != Gm.shape:
        raise ShapeMismatch(f"variation {Gdot.shape} vs metric {Gm.shape}")
    if not np.allclose(Gdot, Gdot.T, atol=1e-12 * (1 + np.abs(Gdot).max())):
        raise ShapeMismatch("metric variation must be symmetric")
    c = G.algebra.c
    cp = curvature(G)
    Ginv = cp.Ginv
    d_dot = delta_map(c, Ginv @ Gdot)

    def pair(X):
        return float(tensor_inner(Gm, d_dot, delta_map(c, X), Ginv))

    def d_ric(S):
        S = np.asarray(S, dtype=float)
        return 0.25 * pair(Ginv @ S) + float(bilinear_inner(Ginv, cp.Ric, Gdot @ Ginv @ S))

    def d_rc(A):
        return 0.25 * pair(adjoint(Gm, np.asarray(A, dtype=float), Ginv))

    return VariationDerivatives(
        dR=-float(bilinear_inner(Ginv, cp.Ric, Gdot)),
        dRicNormSq=0.5 * pair(cp.Rc),
        dRic=d_ric,
        dRc=d_rc,
    )


def as_metric(alg, G) -> MetricState:
    return G if isinstance(G, MetricState) else MetricState(alg, as_matrix(G))
