"""Reduced fields of an invariant metric on a nilpotent principal bundle over a 1-d base."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import InputError, NotPositiveDefinite, ShapeMismatch
from ..lie import NilpotentAlgebra, algebra_to_json, load_algebra_json
from .grid import BaseGrid


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BundleState:
    """Fibre metric ``Gf[p]``, base metric ``gss[p]`` and connection ``Gamma[p]`` at grid point p.

    The total metric is ``gss ds^2 + Gf(Gamma ds + theta, Gamma ds + theta)`` where
    ``theta`` is the Maurer-Cartan coframe of the fibre.  ``f`` is an optional
    potential for the conjugate heat density.
    """

    t: float
    grid: BaseGrid
    fiber: NilpotentAlgebra
    Gf: np.ndarray
    gss: np.ndarray
    Gamma: np.ndarray
    f: Optional[np.ndarray] = None

    def __post_init__(self):
        N, n = self.grid.N, self.fiber.dim
        Gf = np.array(self.Gf, dtype=float)
        gss = np.array(self.gss, dtype=float)
        Gam = np.array(self.Gamma, dtype=float)
        if gss.ndim == 0:
            gss = np.full(N, float(gss))
        if Gam.ndim == 1 and Gam.shape == (n,):
            Gam = np.tile(Gam, (N, 1))
        if Gf.shape == (n, n):
            Gf = np.tile(Gf, (N, 1, 1))
        if Gf.shape != (N, n, n) or gss.shape != (N,) or Gam.shape != (N, n):
            raise ShapeMismatch(
                f"fields {Gf.shape}, {gss.shape}, {Gam.shape} do not fit N={N}, n={n}"
            )
        if not self.t > 0:
            raise InputError(f"time must be positive, got {self.t}")
        Gf = 0.5 * (Gf + Gf.transpose(0, 2, 1))
        try:
            np.linalg.cholesky(Gf)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite("fibre metric is not positive definite somewhere") from None
        if not np.all(gss > 0):
            raise NotPositiveDefinite("base metric must be positive")
        object.__setattr__(self, "Gf", _ro(Gf))
        object.__setattr__(self, "gss", _ro(gss))
        object.__setattr__(self, "Gamma", _ro(Gam))
        if self.f is not None:
            f = np.array(self.f, dtype=float)
            if f.ndim == 0:
                f = np.full(N, float(f))
            if f.shape != (N,):
                raise ShapeMismatch(f"potential shape {f.shape} does not fit N={N}")
            object.__setattr__(self, "f", _ro(f))

    @property
    def n(self) -> int:
        return self.fiber.dim

    def replace(self, **changes) -> "BundleState":
        return dataclasses.replace(self, **changes)

    def scaled(self, factor: float, time_factor: Optional[float] = None) -> "BundleState":
        """Multiply the metric by ``factor``; time is scaled by ``time_factor`` (default ``factor``)."""
        tf = factor if time_factor is None else time_factor
        return self.replace(t=self.t * tf, Gf=self.Gf * factor, gss=self.gss * factor)

    def volume_density(self) -> np.ndarray:
        return np.sqrt(self.gss)


HEADER_SUFFIX = ".json"
DATA_SUFFIX = ".bin"


def save_checkpoint(state: BundleState, path) -> tuple[Path, Path]:
    """Write a JSON header and a little-endian float64 blob (Gf, gss, Gamma, then f if present)."""
    path = Path(path)
    head, data = path.with_suffix(HEADER_SUFFIX), path.with_suffix(DATA_SUFFIX)
    header = {
        "t": state.t,
        "grid": state.grid.to_dict(),
        "fiber": algebra_to_json(state.fiber),
        "has_f": state.f is not None,
        "layout": ["Gf[N][n][n]", "gss[N]", "Gamma[N][n]"] + (["f[N]"] if state.f is not None else []),
        "dtype": "<f8",
    }
    head.write_text(json.dumps(header, indent=1, sort_keys=True) + "\n")
    parts = [state.Gf.ravel(), state.gss, state.Gamma.ravel()]
    if state.f is not None:
        parts.append(state.f)
    np.concatenate(parts).astype("<f8").tofile(data)
    return head, data


def load_checkpoint(path) -> BundleState:
    path = Path(path)
    header = json.loads(path.with_suffix(HEADER_SUFFIX).read_text())
    grid = BaseGrid(**header["grid"])
    fiber = load_algebra_json(header["fiber"])
    N, n = grid.N, fiber.dim
    raw = np.fromfile(path.with_suffix(DATA_SUFFIX), dtype="<f8")
    sizes = [N * n * n, N, N * n] + ([N] if header["has_f"] else [])
    if raw.size != sum(sizes):
        raise ShapeMismatch(f"checkpoint holds {raw.size} values, expected {sum(sizes)}")
    chunks = np.split(raw, np.cumsum(sizes)[:-1])
    return BundleState(
        t=header["t"],
        grid=grid,
        fiber=fiber,
        Gf=chunks[0].reshape(N, n, n),
        gss=chunks[1],
        Gamma=chunks[2].reshape(N, n),
        f=chunks[3] if header["has_f"] else None,
    )
