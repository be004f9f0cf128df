"""Nilpotent Lie algebras, the delta map and inner products on bracket tensors.

Conventions
-----------
Structure constants are stored as ``c[k, i, j]`` with ``[x_i, x_j] = sum_k c[k, i, j] x_k``.
Endomorphisms act on column vectors, ``A x_i = sum_l A[l, i] x_l``.
Every inner product is taken in a G-orthonormal frame with *ordered* index
tuples, so the unit Heisenberg bracket has squared norm 2.

All array routines broadcast over leading axes so the bundle code can call
them on a whole grid of fibres at once.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AntisymmetryViolation,
    InputError,
    JacobiViolation,
    NotNilpotent,
    NotPositiveDefinite,
    ShapeMismatch,
    ZeroGamma,
)

ANTISYM_TOL = 1e-12
JACOBI_TOL = 1e-10
DERIVATION_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class NilpotentAlgebra:
    """Validated structure constants of a real nilpotent Lie algebra."""

    c: np.ndarray
    nilpotency_degree: int
    center_basis: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    @property
    def is_abelian(self) -> bool:
        return self.nilpotency_degree == 1

    def bracket(self, x, y) -> np.ndarray:
        return np.einsum("kij,i,j->k", self.c, x, y)

    def ad(self, x) -> np.ndarray:
        """Matrix of ``ad_x`` (broadcasts over leading axes of ``x``)."""
        return np.einsum("...i,kij->...kj", x, self.c)

    def __eq__(self, other):
        if not isinstance(other, NilpotentAlgebra):
            return NotImplemented
        return self.c.shape == other.c.shape and np.array_equal(self.c, other.c)

    def __hash__(self):
        return hash(self.c.tobytes())


def _span_rank(vectors: np.ndarray, tol: float) -> tuple[int, np.ndarray]:
    if vectors.size == 0:
        return 0, np.zeros((0, vectors.shape[-1] if vectors.ndim == 2 else 0))
    u, s, vt = np.linalg.svd(vectors, full_matrices=False)
    scale = max(1.0, s[0]) if s.size else 1.0
    r = int(np.sum(s > tol * scale))
    return r, vt[:r]


def _lower_central_series(c: np.ndarray, tol: float = 1e-10) -> tuple[list[int], bool]:
    n = c.shape[0]
    basis = np.eye(n)
    dims = [n]
    for _ in range(n + 1):
        # brackets [x_i, b] for every basis vector x_i and every b in the current term
        prods = np.einsum("kij,mj->imk", c, basis).reshape(-1, n)
        r, basis = _span_rank(prods, tol)
        dims.append(r)
        if r == 0:
            return dims, True
        if r == dims[-2]:
            return dims, False
    return dims, False


def _center(c: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    n = c.shape[0]
    # x is central iff sum_i x_i c[k, i, j] = 0 for all k, j
    M = c.transpose(1, 0, 2).reshape(n, n * n).T
    if not np.any(M):
        return np.eye(n)
    u, s, vt = np.linalg.svd(M)
    r = int(np.sum(s > tol * max(1.0, s[0])))
    return vt[r:]


def validate_algebra(c) -> NilpotentAlgebra:
    """Check antisymmetry, Jacobi and nilpotency and return the algebra.

    Raises
    ------
    ShapeMismatch, AntisymmetryViolation, JacobiViolation, NotNilpotent
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]) or c.shape[0] == 0:
        raise ShapeMismatch(f"structure constants must be a nonempty cube, got {c.shape}")
    scale = max(1.0, float(np.max(np.abs(c))))
    sym = c + c.transpose(0, 2, 1)
    if np.max(np.abs(sym)) > ANTISYM_TOL * scale:
        idx = tuple(int(v) for v in np.unravel_index(np.argmax(np.abs(sym)), sym.shape))
        raise AntisymmetryViolation(idx, float(sym[idx]))
    # J[i,j,k,l] = sum_m c[m,i,j] c[l,m,k] + cyclic
    t = np.einsum("mij,lmk->ijkl", c, c)
    jac = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
    if np.max(np.abs(jac)) > JACOBI_TOL * scale**2:
        idx = tuple(int(v) for v in np.unravel_index(np.argmax(np.abs(jac)), jac.shape))
        raise JacobiViolation(idx, float(jac[idx]))
    dims, ok = _lower_central_series(c)
    if not ok:
        raise NotNilpotent(len(dims) - 1, dims[-1])
    return NilpotentAlgebra(
        c=_frozen(c), nilpotency_degree=len(dims) - 1, center_basis=_frozen(_center(c))
    )


def nil3_model(gamma: float = 1.0) -> NilpotentAlgebra:
    """Heisenberg algebra with the single relation ``[x1, x2] = gamma x3``."""
    if gamma == 0:
        raise ZeroGamma("gamma must be nonzero")
    c = np.zeros((3, 3, 3))
    c[2, 0, 1] = gamma
    c[2, 1, 0] = -gamma
    return validate_algebra(c)


def load_algebra_json(source) -> NilpotentAlgebra:
    """Read ``{"dim": n, "brackets": [{"i":1,"j":2,"k":3,"v":1.0}, ...]}`` (1-based, i<j)."""
    if isinstance(source, (str, Path)) and Path(source).exists():
        doc = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        doc = source
    try:
        n = int(doc["dim"])
        entries = doc["brackets"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"structure-constant document missing key {exc}") from exc
    c = np.zeros((n, n, n))
    for e in entries:
        i, j, k, v = int(e["i"]), int(e["j"]), int(e["k"]), float(e["v"])
        if not (1 <= i < j <= n and 1 <= k <= n):
            raise InputError(f"bracket entry out of range or not i<j: {e}")
        c[k - 1, i - 1, j - 1] += v
        c[k - 1, j - 1, i - 1] -= v
    return validate_algebra(c)


def algebra_to_json(alg: NilpotentAlgebra) -> dict:
    n = alg.dim
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(n):
                v = float(alg.c[k, i, j])
                if v != 0.0:
                    out.append({"i": i + 1, "j": j + 1, "k": k + 1, "v": v})
    return {"dim": n, "brackets": out}


@dataclass(frozen=True)
class MetricState:
    """A positive-definite inner product ``G[i, j] = G(x_i, x_j)`` on an algebra."""

    algebra: NilpotentAlgebra
    G: np.ndarray

    def __post_init__(self):
        G = np.array(self.G, dtype=float)
        n = self.algebra.dim
        if G.shape != (n, n):
            raise ShapeMismatch(f"metric shape {G.shape} does not match algebra dim {n}")
        if not np.allclose(G, G.T, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(G)))):
            raise NotPositiveDefinite("metric matrix is not symmetric")
        G = 0.5 * (G + G.T)
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite("metric matrix is not positive definite") from None
        object.__setattr__(self, "G", _frozen(G))

    def scaled(self, factor: float) -> "MetricState":
        return MetricState(self.algebra, factor * self.G)


def as_matrix(G) -> np.ndarray:
    return G.G if isinstance(G, MetricState) else np.asarray(G, dtype=float)


def delta_map(mu, A) -> np.ndarray:
    """``delta_mu(A)(e1, e2) = A mu(e1, e2) - mu(A e1, e2) - mu(e1, A e2)``."""
    mu = np.asarray(mu, dtype=float)
    A = np.asarray(A, dtype=float)
    n = mu.shape[-1]
    if mu.shape[-3:] != (n, n, n) or A.shape[-2:] != (n, n):
        raise ShapeMismatch(f"bracket {mu.shape} and endomorphism {A.shape} disagree")
    return (
        np.einsum("...kl,...lij->...kij", A, mu)
        - np.einsum("...li,...klj->...kij", A, mu)
        - np.einsum("...lj,...kil->...kij", A, mu)
    )


def _inv(G):
    return np.linalg.inv(G)


def tensor_inner(G, mu1, mu2, Ginv=None) -> np.ndarray:
    """Induced inner product on bracket tensors, summed over ordered index pairs."""
    G = as_matrix(G)
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    if mu1.shape[-3:] != mu2.shape[-3:] or mu1.shape[-1] != G.shape[-1]:
        raise ShapeMismatch(f"shapes {mu1.shape}, {mu2.shape}, {G.shape} disagree")
    if Ginv is None:
        if isinstance(G, np.ndarray) and G.ndim == 2:
            try:
                np.linalg.cholesky(G)
            except np.linalg.LinAlgError:
                raise NotPositiveDefinite("metric matrix is not positive definite") from None
        Ginv = _inv(G)
    lowered = np.einsum("...kl,...lab->...kab", G, mu2)
    raised = np.einsum("...ia,...jb,...kab->...kij", Ginv, Ginv, lowered)
    return np.einsum("...kij,...kij->...", mu1, raised)


def tensor_norm_sq(G, mu, Ginv=None) -> np.ndarray:
    return tensor_inner(G, mu, mu, Ginv=Ginv)


def bilinear_inner(Ginv, S, T) -> np.ndarray:
    """``<S, T>`` for bilinear forms given the inverse metric."""
    return np.einsum("...ia,...jb,...ij,...ab->...", Ginv, Ginv, S, T)


def adjoint(G, A, Ginv=None) -> np.ndarray:
    """G-adjoint ``A* = G^{-1} A^T G``."""
    G = as_matrix(G)
    if Ginv is None:
        Ginv = _inv(G)
    return Ginv @ np.swapaxes(A, -1, -2) @ G


def endo_inner(G, A, B, Ginv=None) -> np.ndarray:
    """``<A, B> = tr(A B*)`` for endomorphisms."""
    return np.einsum("...ii->...", A @ adjoint(G, B, Ginv))


def derivation_residual(alg: NilpotentAlgebra, A, G) -> float:
    """G-norm of ``delta(A)``; zero exactly when A is a derivation."""
    A = np.asarray(A, dtype=float)
    if A.shape != (alg.dim, alg.dim):
        raise ShapeMismatch(f"endomorphism shape {A.shape} vs algebra dim {alg.dim}")
    d = delta_map(alg.c, A)
    return float(np.sqrt(max(tensor_norm_sq(G, d), 0.0)))


def is_derivation(alg: NilpotentAlgebra, A, G=None) -> bool:
    G = np.eye(alg.dim) if G is None else as_matrix(G)
    A = np.asarray(A, dtype=float)
    mu_norm = np.sqrt(tensor_norm_sq(G, alg.c))
    tol = DERIVATION_TOL * (1.0 + np.linalg.norm(A) * mu_norm)
    return derivation_residual(alg, A, G) <= tol
