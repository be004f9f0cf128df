"""Uniform grids on a circle or an interval with fourth-order difference stencils."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError

MIN_POINTS = 16
# interval mode loses two points per side to the centred stencil
GHOST = 2


@dataclass(frozen=True)
class BaseGrid:
    """``N`` points of a periodic circle of length ``L``, or of the closed interval ``[origin, origin + L]``."""

    N: int
    L: float
    periodic: bool = True
    origin: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < MIN_POINTS:
            raise InputError(f"grid needs at least {MIN_POINTS} points, got {self.N}")
        if not self.L > 0:
            raise InputError(f"grid length must be positive, got {self.L}")

    @property
    def ds(self) -> float:
        return self.L / self.N if self.periodic else self.L / (self.N - 1)

    @property
    def s(self) -> np.ndarray:
        return self.origin + self.ds * np.arange(self.N)

    @property
    def interior(self) -> slice:
        """Points where both stencils are fully valid."""
        return slice(None) if self.periodic else slice(GHOST, self.N - GHOST)

    def refined(self, factor: int = 2) -> "BaseGrid":
        if self.periodic:
            return BaseGrid(self.N * factor, self.L, True, self.origin)
        return BaseGrid((self.N - 1) * factor + 1, self.L, False, self.origin)

    def _padded(self, f):
        if self.periodic:
            return np.concatenate((f[-GHOST:], f, f[:GHOST]), axis=0)
        return f

    def _place(self, core, like):
        if self.periodic:
            return core
        out = np.full(like.shape, np.nan)
        out[GHOST:-GHOST] = core
        return out

    def d1(self, f: np.ndarray) -> np.ndarray:
        """First derivative along axis 0."""
        f = np.asarray(f, dtype=float)
        p = self._padded(f)
        core = (p[:-4] - p[4:] + 8.0 * (p[3:-1] - p[1:-3])) * (1.0 / (12.0 * self.ds))
        return self._place(core, f)

    def d2(self, f: np.ndarray) -> np.ndarray:
        """Second derivative along axis 0."""
        f = np.asarray(f, dtype=float)
        p = self._padded(f)
        core = (16.0 * (p[3:-1] + p[1:-3]) - (p[4:] + p[:-4]) - 30.0 * p[2:-2]) * (
            1.0 / (12.0 * self.ds**2)
        )
        return self._place(core, f)

    def integrate(self, f: np.ndarray) -> float:
        """Trapezoidal quadrature; on the circle every point has weight ``ds``.

        Summation runs left to right so the result never depends on array layout.
        """
        f = np.asarray(f, dtype=float)
        if self.periodic:
            return float(np.add.reduce(f, axis=0) * self.ds)
        return float((np.add.reduce(f, axis=0) - 0.5 * (f[0] + f[-1])) * self.ds)

    def to_dict(self) -> dict:
        return {"N": self.N, "L": self.L, "periodic": self.periodic, "origin": self.origin}
