"""Entropy-type functionals on the reduced bundle and their exact time derivatives.

With ``u = e^{-f} / (4 pi tau)^{1/2}`` and ``dV = sqrt(gss) ds``::

    W_L = int [tau (|grad f|^2 - |DG|^2 / 4) - f + 1] u dV
    W_+ = W_L - a int (tau R_G + tau^2 |Ric_G|^2) u dV

Along Ricci flow coupled to the backward conjugate heat equation the rate of
``W_+`` equals a sum of integrals that are nonnegative for ``0 <= a <= 1``;
``theorem_terms`` evaluates each of them.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InputError, MisalignedTrajectories
from ..lie import bilinear_inner, delta_map, tensor_norm_sq
from .geometry import ReducedGeometry, geometry
from .state import BundleState

TERM_NAMES = (
    "fibre_harmonic",
    "base_einstein",
    "delta_DG",
    "bracket_DG",
    "ric_DG",
    "bracket_delta_DG",
    "soliton_defect",
)


def _density(state: BundleState, f, tau):
    return np.exp(-f) / np.sqrt(4 * np.pi * tau) * np.sqrt(state.gss)


def w_plus_density(state: BundleState, f, a: float = 0.0, tau=None, geo=None) -> np.ndarray:
    """Pointwise integrand of ``W_+`` with respect to ``ds`` (density ``u sqrt(gss)`` included)."""
    f = np.asarray(f, dtype=float)
    tau = state.t if tau is None else float(tau)
    geo = geometry(state) if geo is None else geo
    grad_sq = geo.ginv * state.grid.d1(f) ** 2
    integrand = tau * (grad_sq - 0.25 * geo.dg_norm_sq) - f + 1.0
    if a:
        integrand = integrand - a * (tau * geo.curv.R + tau**2 * geo.curv.ric_norm_sq)
    return integrand * _density(state, f, tau)


def w_plus_bundle(state: BundleState, f=None, a: float = 0.0, tau=None) -> float:
    """``W_+`` (``a = 0`` gives ``W_L``); ``tau`` defaults to the state's time."""
    f = state.f if f is None else f
    if f is None:
        raise InputError("a potential f is required")
    return state.grid.integrate(w_plus_density(state, f, a, tau))


def theorem_integrands(state: BundleState, f, a: float, geo: ReducedGeometry = None) -> dict:
    """Pointwise integrands (prefactors and density ``u sqrt(gss)`` included) of the rate of ``W_+``."""
    g = state.grid
    t = state.t
    geo = geometry(state) if geo is None else geo
    c = state.fiber.c
    f = np.asarray(f, dtype=float)
    f1, f2 = g.d1(f), g.d2(f)
    dens = _density(state, f, t)
    ginv = geo.ginv
    Ginv = geo.Ginv

    S = ginv[:, None, None] * (geo.hess - geo.DG @ Ginv @ geo.DG - f1[:, None, None] * geo.DG)
    fibre = bilinear_inner(Ginv, S, S)
    base = (ginv * (state.gss / t - 0.5 * geo.trAA + 2.0 * (f2 - geo.chr * f1))) ** 2
    dA = delta_map(c, geo.A)
    delta_sq = ginv * tensor_norm_sq(state.Gf, dA, Ginv)
    bracket = ginv * np.einsum("pi,pij,pj->p", geo.w, Ginv, geo.w)
    out = {
        "fibre_harmonic": 0.5 * t * fibre * dens,
        "base_einstein": 0.5 * t * base * dens,
        "delta_DG": 0.25 * (1.0 - a) * t * delta_sq * dens,
        "bracket_DG": t * bracket * dens,
    }
    if a:
        ric_dg = ginv * bilinear_inner(Ginv, geo.curv.Ric, geo.DG) ** 2
        mu_sq = tensor_norm_sq(state.Gf, np.broadcast_to(c, dA.shape), Ginv)  # |[,]|^2 per point
        defect = delta_map(c, geo.curv.Rc + np.eye(state.n) / (2.0 * t))
        out["ric_DG"] = 6.0 * a * t**2 * ric_dg * dens
        out["bracket_delta_DG"] = 0.375 * a * t**2 * mu_sq * delta_sq * dens
        out["soliton_defect"] = a * t**2 * tensor_norm_sq(state.Gf, defect, Ginv) * dens
    else:
        zero = np.zeros_like(dens)
        out.update(ric_DG=zero, bracket_delta_DG=zero, soliton_defect=zero)
    return out


def theorem_terms(state: BundleState, f, a: float, geo: ReducedGeometry = None) -> dict:
    """Each integral in the derivative formula for ``W_+`` at ``tau = t``."""
    dens = theorem_integrands(state, f, a, geo)
    return {k: state.grid.integrate(dens[k]) for k in TERM_NAMES}


@dataclass(frozen=True)
class FunctionalReport:
    """Functional values and rates along a coupled run.

    ``W_values`` and ``mass`` are given at every stored time.  Rates are
    evaluated at the nodes ``times[rate_index]``.
    """

    a: float
    times: np.ndarray
    W_values: np.ndarray
    rate_index: np.ndarray
    fd_rates: np.ndarray
    theorem_rates: np.ndarray
    term_breakdown: dict = field(repr=False)
    mass: np.ndarray = field(repr=False, default=None)

    @property
    def rate_times(self) -> np.ndarray:
        return self.times[self.rate_index]

    def to_csv(self, header_lines=()) -> str:
        """One row per stored time; rate columns are empty away from rate nodes."""
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "W", "mass", "fd_rate", "theorem_rate"] + list(TERM_NAMES))
        where = {int(i): j for j, i in enumerate(self.rate_index)}
        for i, t in enumerate(self.times):
            row = [repr(float(v)) for v in (t, self.W_values[i], self.mass[i])]
            j = where.get(i)
            if j is None:
                row += [""] * (2 + len(TERM_NAMES))
            else:
                vals = [self.fd_rates[j], self.theorem_rates[j]]
                vals += [self.term_breakdown[k][j] for k in TERM_NAMES]
                row += [repr(float(v)) for v in vals]
            w.writerow(row)
        return buf.getvalue()


def derivative_weights(nodes, x0) -> np.ndarray:
    """Weights ``w`` with ``sum w_k p(nodes_k) = p'(x0)`` for every polynomial of degree < len(nodes)."""
    nodes = np.asarray(nodes, dtype=float)
    m = nodes.size
    scale = np.max(np.abs(nodes - x0))
    V = ((nodes - x0) / scale)[None, :] ** np.arange(m)[:, None]
    rhs = np.zeros(m)
    rhs[1] = 1.0 / scale
    return np.linalg.solve(V, rhs)


def monotonicity_report(
    traj: Sequence[BundleState], f_traj: Sequence[np.ndarray], a: float = 0.0, stride: int = 1
) -> FunctionalReport:
    """Compare centred differences of ``W_+(t)`` with the derivative formula.

    ``W_+`` is evaluated at every state.  Rates are compared at every
    ``stride``-th interior state; the difference quotient always uses the
    two nearest neighbours on each side (fourth order on a possibly
    non-uniform stencil), so ``traj`` should be stored at every integrator
    step.
    """
    if len(traj) != len(f_traj):
        raise MisalignedTrajectories(f"{len(traj)} states but {len(f_traj)} potentials")
    if not 0.0 <= a <= 1.0:
        raise InputError(f"the weight a must lie in [0, 1], got {a}")
    if len(traj) < 3:
        raise MisalignedTrajectories("need at least three states for centred differences")
    if stride < 1:
        raise InputError(f"stride must be a positive integer, got {stride}")
    times = np.array([s.t for s in traj])
    W = np.array([w_plus_bundle(s, f, a) for s, f in zip(traj, f_traj)])
    mass = np.array(
        [s.grid.integrate(_density(s, f, s.t)) for s, f in zip(traj, f_traj)]
    )
    half = 2 if len(traj) >= 5 else 1
    idx = np.arange(half, len(traj) - half, stride)
    fd, thm = [], []
    breakdown = {k: [] for k in TERM_NAMES}
    for i in idx:
        sl = slice(i - half, i + half + 1)
        fd.append(float(derivative_weights(times[sl], times[i]) @ W[sl]))
        terms = theorem_terms(traj[i], f_traj[i], a)
        thm.append(sum(terms.values()))
        for k in TERM_NAMES:
            breakdown[k].append(terms[k])
    return FunctionalReport(
        a=a,
        times=times,
        W_values=W,
        rate_index=idx,
        fd_rates=np.array(fd),
        theorem_rates=np.array(thm),
        term_breakdown={k: np.array(v) for k, v in breakdown.items()},
        mass=mass,
    )
