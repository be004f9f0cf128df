"""Families of nilpotent Lie algebras and random metric data for experiments and tests."""
from __future__ import annotations

import numpy as np

from .errors import InputError
from .lie import NilpotentAlgebra, validate_algebra


def abelian(n: int) -> NilpotentAlgebra:
    return validate_algebra(np.zeros((n, n, n)))


def _set(c, i, j, k, v):
    c[k, i, j] += v
    c[k, j, i] -= v


def heisenberg(m: int, gamma: float = 1.0) -> NilpotentAlgebra:
    """Dimension 2m+1, ``[x_i, x_{m+i}] = gamma z``."""
    if m < 1:
        raise InputError(f"Heisenberg algebras need m >= 1, got {m}")
    n = 2 * m + 1
    c = np.zeros((n, n, n))
    for i in range(m):
        _set(c, i, m + i, n - 1, gamma)
    return validate_algebra(c)


def filiform(n: int) -> NilpotentAlgebra:
    """Standard graded filiform algebra ``[x_1, x_i] = x_{i+1}``, nilpotent of step n-1."""
    if n < 3:
        raise InputError(f"filiform algebras need n >= 3, got {n}")
    c = np.zeros((n, n, n))
    for i in range(1, n - 1):
        _set(c, 0, i, i + 1, 1.0)
    return validate_algebra(c)


def upper_triangular(m: int) -> NilpotentAlgebra:
    """Strictly upper triangular m x m matrices with the commutator bracket."""
    pairs = [(a, b) for a in range(m) for b in range(a + 1, m)]
    index = {p: i for i, p in enumerate(pairs)}
    n = len(pairs)
    c = np.zeros((n, n, n))
    for (a, b), i in index.items():
        for (p, q), j in index.items():
            # E_ab E_pq = delta_bp E_aq
            if b == p:
                c[index[(a, q)], i, j] += 1.0
            if q == a:
                c[index[(p, b)], i, j] -= 1.0
    return validate_algebra(c)


def direct_sum(*algs: NilpotentAlgebra) -> NilpotentAlgebra:
    n = sum(a.dim for a in algs)
    c = np.zeros((n, n, n))
    o = 0
    for a in algs:
        d = a.dim
        c[o:o + d, o:o + d, o:o + d] = a.c
        o += d
    return validate_algebra(c)


def change_basis(alg: NilpotentAlgebra, P) -> NilpotentAlgebra:
    """Constants in the new basis ``y_i = sum_a P[a, i] x_a``."""
    P = np.asarray(P, dtype=float)
    Pinv = np.linalg.inv(P)
    c = np.einsum("kl,lab,ai,bj->kij", Pinv, alg.c, P, P)
    c = 0.5 * (c - c.transpose(0, 2, 1))
    return validate_algebra(c)


def random_two_step(rng: np.random.Generator, p: int, q: int) -> NilpotentAlgebra:
    """Random 2-step algebra on V + Z with ``dim V = p``, ``dim Z = q``."""
    n = p + q
    c = np.zeros((n, n, n))
    for k in range(q):
        M = rng.normal(size=(p, p))
        c[p + k, :p, :p] = M - M.T
    return validate_algebra(c)


def random_spd(rng: np.random.Generator, n: int, spread: float = 0.5) -> np.ndarray:
    """SPD matrix with eigenvalues in ``[exp(-spread), exp(spread)]``."""
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    w = np.exp(rng.uniform(-spread, spread, size=n))
    G = (Q * w) @ Q.T
    return 0.5 * (G + G.T)


def random_nilpotent(rng: np.random.Generator, max_dim: int = 6) -> NilpotentAlgebra:
    """Draw from several families, then apply a random well-conditioned basis change."""
    choices = []
    if max_dim >= 3:
        choices += ["heis", "two_step", "filiform"]
    if max_dim >= 6:
        choices.append("ut4")
    kind = choices[rng.integers(len(choices))]
    if kind == "heis":
        m = int(rng.integers(1, (max_dim - 1) // 2 + 1))
        base = heisenberg(m, gamma=float(rng.uniform(0.5, 2.0)))
    elif kind == "two_step":
        p = int(rng.integers(2, max_dim))
        q = int(rng.integers(1, max_dim - p + 1))
        base = random_two_step(rng, p, q)
    elif kind == "filiform":
        base = filiform(int(rng.integers(3, max_dim + 1)))
    else:
        base = upper_triangular(4)
    extra = max_dim - base.dim
    if extra > 0 and rng.random() < 0.3:
        base = direct_sum(base, abelian(int(rng.integers(1, extra + 1))))
    P = np.eye(base.dim) + 0.3 * rng.normal(size=(base.dim, base.dim))
    return change_basis(base, P)
