"""Ricci flow of left-invariant metrics on nilpotent groups.

The flow is the matrix ODE ``dG/dt = -2 Ric_G``.  Alongside the integrator this
module evaluates the scale-invariant functional ``W_+(G, tau) = tau R + tau^2 |Ric|^2``,
its exact rate, nilsoliton certificates and blowdown diagnostics.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .curvature import ricci_arrays
from .errors import (
    InputError,
    NonpositiveTime,
    NotASoliton,
    NotPositiveDefinite,
    PositivityLost,
    ScaleOutOfRange,
)
from .lie import (
    DERIVATION_TOL,
    MetricState,
    NilpotentAlgebra,
    delta_map,
    tensor_norm_sq,
)

TRACE_CONVENTION = "traces over G-orthonormal frames with ordered index pairs (|[,]|^2=2 for unit Nil3)"


def group_flow_rhs(G: MetricState) -> np.ndarray:
    """``-2 Ric_G``."""
    return -2.0 * ricci_arrays(G.algebra.c, G.G).Ric


@dataclass(frozen=True)
class GroupTrajectory:
    """Fixed-step flow samples.  ``G[i]`` is the metric at ``times[i]``."""

    algebra: NilpotentAlgebra
    times: np.ndarray
    G: np.ndarray
    step_stats: dict = field(default_factory=dict, repr=False)

    @property
    def states(self) -> list[MetricState]:
        return [MetricState(self.algebra, g) for g in self.G]

    def __len__(self):
        return len(self.times)


def _rk4_step(c, G, h):
    k1 = -2.0 * ricci_arrays(c, G).Ric
    k2 = -2.0 * ricci_arrays(c, G + 0.5 * h * k1).Ric
    k3 = -2.0 * ricci_arrays(c, G + 0.5 * h * k2).Ric
    k4 = -2.0 * ricci_arrays(c, G + h * k3).Ric
    out = G + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return 0.5 * (out + out.T)


def _rk4_step_guarded(c, G, h, t):
    try:
        G1 = _rk4_step(c, G, h)
        L = np.linalg.cholesky(G1)
    except (NotPositiveDefinite, np.linalg.LinAlgError):
        raise PositivityLost(t) from None
    if not np.all(np.isfinite(G1)):
        raise PositivityLost(t)
    return G1, float(np.min(np.diag(L)) ** 2)


def integrate_group_flow(
    G0: MetricState, t0: float, t1: float, steps: int, estimate_error: bool = False
) -> GroupTrajectory:
    """Classical RK4 with ``steps`` equal steps on ``[t0, t1]``.

    ``step_stats["margin"]`` holds the squared smallest Cholesky pivot after
    each step.  With ``estimate_error`` each step is repeated as two half
    steps and the difference is stored in ``step_stats["error"]``.
    """
    if not (0 < t0 < t1):
        raise NonpositiveTime(f"need 0 < t0 < t1, got t0={t0}, t1={t1}")
    if steps < 1:
        raise InputError("steps must be positive")
    c = G0.algebra.c
    times = t0 + (t1 - t0) * np.arange(steps + 1) / steps
    h = (t1 - t0) / steps
    out = np.empty((steps + 1,) + G0.G.shape)
    out[0] = G0.G
    margin = np.empty(steps)
    err = np.empty(steps) if estimate_error else None
    G = np.array(G0.G)
    for i in range(steps):
        G_next, margin[i] = _rk4_step_guarded(c, G, h, times[i + 1])
        if estimate_error:
            half, _ = _rk4_step_guarded(c, G, 0.5 * h, times[i] + 0.5 * h)
            half, _ = _rk4_step_guarded(c, half, 0.5 * h, times[i + 1])
            err[i] = float(np.max(np.abs(half - G_next))) / 15.0
        G = G_next
        out[i + 1] = G
    stats = {"h": h, "margin": margin}
    if estimate_error:
        stats["error"] = err
    return GroupTrajectory(G0.algebra, times, out, stats)


def state_at(traj: GroupTrajectory, t: float) -> MetricState:
    """Metric at time ``t``, re-integrating from the last node at or before ``t``."""
    times = traj.times
    if not (times[0] <= t <= times[-1] * (1 + 1e-14)):
        raise ScaleOutOfRange(f"t={t} outside trajectory window [{times[0]}, {times[-1]}]")
    i = int(np.searchsorted(times, t, side="right") - 1)
    i = min(max(i, 0), len(times) - 1)
    G = traj.G[i]
    gap = t - times[i]
    if gap <= 1e-14 * max(1.0, abs(t)):
        return MetricState(traj.algebra, G)
    h_local = times[min(i + 1, len(times) - 1)] - times[i] if i + 1 < len(times) else gap
    n = max(1, math.ceil(gap / h_local * 4))
    sub = integrate_group_flow(MetricState(traj.algebra, G), times[i], t, n)
    return MetricState(traj.algebra, sub.G[-1])


def w_plus_group(G: MetricState, tau: float) -> float:
    """``tau R_G + tau^2 |Ric_G|^2``."""
    cp = ricci_arrays(G.algebra.c, G.G)
    return float(tau * cp.R + tau**2 * cp.ric_norm_sq)


def soliton_defect(G: MetricState, t: float, cp=None) -> float:
    """``|delta(Rc + 1/(2t))|_G``, the distance of G from a normalised soliton at time t."""
    if t <= 0:
        raise NonpositiveTime(f"t must be positive, got {t}")
    cp = ricci_arrays(G.algebra.c, G.G) if cp is None else cp
    n = G.algebra.dim
    d = delta_map(G.algebra.c, cp.Rc + np.eye(n) / (2.0 * t))
    return float(np.sqrt(max(tensor_norm_sq(G.G, d, cp.Ginv), 0.0)))


def w_plus_group_rate(G: MetricState, t: float) -> float:
    """Exact ``dW_+/dt = -t^2 |delta(Rc + 1/(2t))|^2`` along the flow with ``tau = t``."""
    return -(t**2) * soliton_defect(G, t) ** 2


@dataclass(frozen=True)
class SolitonCertificate:
    c: float
    B: np.ndarray
    residual: float
    is_expanding: bool
    flat: bool = False


def nilsoliton_certificate(G: MetricState) -> SolitonCertificate:
    """Soliton constant ``c = -2|Ric|^2/R``, derivation ``B = -(Rc + c/2)`` and its residual."""
    cp = ricci_arrays(G.algebra.c, G.G)
    n = G.algebra.dim
    R = float(cp.R)
    if R == 0.0:
        return SolitonCertificate(0.0, np.zeros((n, n)), 0.0, False, flat=True)
    c = -2.0 * float(cp.ric_norm_sq) / R
    B = -(cp.Rc + 0.5 * c * np.eye(n))
    res = float(np.sqrt(max(tensor_norm_sq(G.G, delta_map(G.algebra.c, B), cp.Ginv), 0.0)))
    return SolitonCertificate(c, B, res, c > 0)


def _certificate_tolerance(G: MetricState, cert: SolitonCertificate) -> float:
    mu = math.sqrt(max(float(tensor_norm_sq(G.G, G.algebra.c)), 0.0))
    return DERIVATION_TOL * (1.0 + float(np.linalg.norm(cert.B)) * mu)


def soliton_flow_eval(G0: MetricState, cert: SolitonCertificate, t: float) -> MetricState:
    """``c t psi_t^T G0 psi_t`` with ``psi_t = exp(ln(c t)/c B)``; equals G0 at ``t = 1/c``."""
    if cert.flat:
        return G0
    if cert.residual > _certificate_tolerance(G0, cert) or not cert.is_expanding:
        raise NotASoliton(f"certificate residual {cert.residual:.3e} is not a derivation")
    if t <= 0:
        raise NonpositiveTime(f"t must be positive, got {t}")
    a = math.log(cert.c * t) / cert.c
    psi = expm(a * cert.B)
    G = cert.c * t * psi.T @ G0.G @ psi
    return MetricState(G0.algebra, 0.5 * (G + G.T))


def _is_nil3(alg: NilpotentAlgebra) -> bool:
    return alg.dim == 3 and alg.nilpotency_degree == 2


def blowdown_group_diagnostics(
    traj: GroupTrajectory, scales, t_ref: float = 1.0
) -> list[dict]:
    """Diagnostics of the parabolic rescalings ``G_s(t) = G(s t)/s`` at ``t = t_ref``."""
    rows = []
    for s in scales:
        s = float(s)
        if s <= 0:
            raise ScaleOutOfRange(f"scale must be positive, got {s}")
        G = state_at(traj, s * t_ref)
        Gs = MetricState(traj.algebra, G.G / s)
        cp = ricci_arrays(Gs.algebra.c, Gs.G)
        row = {
            "scale": s,
            "t": t_ref,
            "soliton_defect": soliton_defect(Gs, t_ref, cp),
            "R": float(cp.R),
        }
        row["tR_defect"] = abs(t_ref * float(cp.R) + 1.0 / 6.0) if _is_nil3(traj.algebra) else None
        rows.append(row)
    return rows


def trajectory_table(traj: GroupTrajectory) -> tuple[list[str], np.ndarray]:
    """Columns t, upper-triangle G entries, R, ric_norm_sq, W_plus, W_plus_rate."""
    n = traj.algebra.dim
    iu = np.triu_indices(n)
    names = ["t"] + [f"G{i + 1}{j + 1}" for i, j in zip(*iu)]
    names += ["R", "ric_norm_sq", "W_plus", "W_plus_rate"]
    cp = ricci_arrays(traj.algebra.c, traj.G)
    t = traj.times
    w = t * cp.R + t**2 * cp.ric_norm_sq
    rate = np.array([w_plus_group_rate(MetricState(traj.algebra, g), ti) for g, ti in zip(traj.G, t)])
    cols = [t[:, None], traj.G[:, iu[0], iu[1]], cp.R[:, None], cp.ric_norm_sq[:, None],
            w[:, None], rate[:, None]]
    return names, np.hstack(cols)


def trajectory_csv(traj: GroupTrajectory, header_lines=()) -> str:
    names, data = trajectory_table(traj)
    buf = io.StringIO()
    stamp = f"convention: {TRACE_CONVENTION}"
    lines = tuple(header_lines)
    for line in lines if stamp in lines else (stamp,) + lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in data:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
