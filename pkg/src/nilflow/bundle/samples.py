"""Seeded random smooth initial data on the circle."""
from __future__ import annotations

import numpy as np

from ..lie import NilpotentAlgebra
from .grid import BaseGrid
from .state import BundleState


def _trig_poly(rng: np.random.Generator, s: np.ndarray, L: float, modes: int, shape=()):
    """Random real trigonometric polynomial with coefficients decaying like 1/k^2."""
    out = np.zeros(s.shape + shape)
    for k in range(1, modes + 1):
        a = rng.normal(size=shape) / k**2
        b = rng.normal(size=shape) / k**2
        arg = 2 * np.pi * k * s / L
        out += np.cos(arg)[(...,) + (None,) * len(shape)] * a
        out += np.sin(arg)[(...,) + (None,) * len(shape)] * b
    return out


def random_smooth_state(
    rng: np.random.Generator,
    grid: BaseGrid,
    fiber: NilpotentAlgebra,
    t: float = 1.0,
    amplitude: float = 0.3,
    modes: int = 2,
    gss_mean: float = 1.0,
    gamma_amplitude: float = 0.2,
) -> BundleState:
    """``Gf = exp(S(s))`` with ``S`` a random constant symmetric matrix plus a small periodic perturbation.

    ``gss`` is ``gss_mean`` times the exponential of a periodic perturbation and
    ``Gamma`` is a small trigonometric polynomial.
    """
    n = fiber.dim
    s = grid.s
    S = _trig_poly(rng, s, grid.L, modes, (n, n)) * amplitude
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    A0 = rng.normal(size=(n, n)) * 0.3
    S = S + 0.5 * (A0 + A0.T)
    w, V = np.linalg.eigh(S)
    Gf = (V * np.exp(w)[:, None, :]) @ np.swapaxes(V, 1, 2)
    gss = gss_mean * np.exp(amplitude * _trig_poly(rng, s, grid.L, modes))
    Gam = gamma_amplitude * _trig_poly(rng, s, grid.L, modes, (n,))
    return BundleState(t, grid, fiber, Gf, gss, Gam)


def random_potential(rng: np.random.Generator, grid: BaseGrid, amplitude: float = 0.3, modes: int = 2):
    return amplitude * _trig_poly(rng, grid.s, grid.L, modes)
