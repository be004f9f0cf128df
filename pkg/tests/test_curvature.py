import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nilflow import algebras
from nilflow.curvature import curvature, rc_delta_pairing, ricci_arrays, variation_derivatives
from nilflow.errors import NotPositiveDefinite, ShapeMismatch
from nilflow.lie import MetricState, bilinear_inner, delta_map, endo_inner, nil3_model, tensor_norm_sq

seeds = st.integers(0, 2**32 - 1)


def random_metric(rng, max_dim=6):
    alg = algebras.random_nilpotent(rng, max_dim)
    return MetricState(alg, algebras.random_spd(rng, alg.dim))


def brute_force_ricci(c, G):
    """Two-term formula summed over an orthonormal frame obtained from eigh."""
    w, V = np.linalg.eigh(G)
    E = V / np.sqrt(w)  # columns are G-orthonormal
    n = G.shape[0]
    br = lambda x, y: np.einsum("kij,i,j->k", c, x, y)
    ric = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            x, y = E[:, a], E[:, b]
            val = 0.0
            for i in range(n):
                for j in range(n):
                    ei, ej = E[:, i], E[:, j]
                    val -= 0.5 * (br(x, ei) @ G @ ej) * (br(y, ei) @ G @ ej)
                    val += 0.25 * (br(ei, ej) @ G @ x) * (br(ei, ej) @ G @ y)
            ric[a, b] = val
    Einv = np.linalg.inv(E)
    return Einv.T @ ric @ Einv


def test_nil3_unit():
    cp = curvature(MetricState(nil3_model(), np.eye(3)))
    assert np.allclose(cp.Ric, np.diag([-0.5, -0.5, 0.5]), atol=1e-15)
    assert cp.R == pytest.approx(-0.5, abs=1e-15)
    assert cp.ric_norm_sq == pytest.approx(0.75, abs=1e-15)


@pytest.mark.parametrize("a, b", [(1.0, 1.0), (2.0, 0.5), (0.3, 4.0)])
def test_nil3_diagonal(a, b):
    cp = curvature(MetricState(nil3_model(), np.diag([a, a, b])))
    assert cp.R == pytest.approx(-b / (2 * a * a), rel=1e-13)
    assert np.allclose(cp.Ric, np.diag([-b / (2 * a), -b / (2 * a), b * b / (2 * a * a)]), atol=1e-14)


def test_abelian_is_flat(rng):
    cp = curvature(MetricState(algebras.abelian(4), algebras.random_spd(rng, 4)))
    assert np.allclose(cp.Ric, 0) and cp.R == 0 and cp.ric_norm_sq == 0


def test_not_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        ricci_arrays(nil3_model().c, -np.eye(3))


@given(seeds)
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    G = random_metric(rng, 5)
    cp = curvature(G)
    assert np.allclose(cp.Ric, brute_force_ricci(G.algebra.c, G.G), atol=1e-11)


@given(seeds)
def test_package_invariants(seed):
    rng = np.random.default_rng(seed)
    G = random_metric(rng)
    cp = curvature(G)
    assert cp.R == pytest.approx(-0.25 * tensor_norm_sq(G.G, G.algebra.c), abs=1e-11)
    assert np.allclose(G.G @ cp.Rc, cp.Ric, atol=1e-11)
    assert np.allclose(cp.Ric, cp.Ric.T, atol=0)
    assert cp.ric_norm_sq >= 0
    assert cp.ric_norm_sq == pytest.approx(bilinear_inner(cp.Ginv, cp.Ric, cp.Ric), rel=1e-10, abs=1e-12)
    n = G.algebra.dim
    assert endo_inner(G.G, cp.Rc, np.eye(n)) == pytest.approx(np.trace(cp.Rc), abs=1e-11)
    assert cp.R <= 1e-15


@given(seeds)
def test_frame_invariance(seed):
    rng = np.random.default_rng(seed)
    G = random_metric(rng)
    n = G.algebra.dim
    P = np.eye(n) + 0.3 * rng.normal(size=(n, n))
    alg2 = algebras.change_basis(G.algebra, P)
    G2 = MetricState(alg2, P.T @ G.G @ P)
    cp, cp2 = curvature(G), curvature(G2)
    assert cp2.R == pytest.approx(cp.R, rel=1e-10, abs=1e-12)
    assert cp2.ric_norm_sq == pytest.approx(cp.ric_norm_sq, rel=1e-10, abs=1e-12)
    assert np.allclose(cp2.Ric, P.T @ cp.Ric @ P, atol=1e-10 * (1 + np.abs(cp.Ric).max()))


@given(seeds, st.floats(0.05, 20.0))
def test_scaling_law(seed, lam):
    rng = np.random.default_rng(seed)
    G = random_metric(rng)
    cp, cps = curvature(G), curvature(G.scaled(lam))
    assert np.allclose(cps.Ric, cp.Ric, atol=1e-11 * (1 + np.abs(cp.Ric).max()))
    assert cps.R == pytest.approx(cp.R / lam, rel=1e-11, abs=1e-14)


@given(seeds)
def test_nil3_identities(seed):
    rng = np.random.default_rng(seed)
    alg = nil3_model(float(rng.uniform(0.2, 3)))
    G = MetricState(alg, algebras.random_spd(rng, 3))
    cp = curvature(G)
    R = float(cp.R)
    assert cp.ric_norm_sq == pytest.approx(3 * R * R, rel=1e-11)
    z = alg.center_basis[0]
    # Rc = -R on the centre and R on its G-orthogonal complement
    assert np.allclose(cp.Rc @ z, -R * z, atol=1e-11)
    v = np.linalg.svd((G.G @ z)[None, :])[2][1:]
    for x in v:
        assert np.allclose(cp.Rc @ x, R * x, atol=1e-11)
    resid = tensor_norm_sq(G.G, delta_map(alg.c, cp.Rc - 3 * R * np.eye(3)))
    assert np.sqrt(max(resid, 0)) <= 1e-10


def test_pairing_examples():
    G = MetricState(nil3_model(), np.eye(3))
    assert rc_delta_pairing(G, np.diag([1.0, 0, 0])) == pytest.approx((-0.5, -0.5), abs=1e-15)
    assert rc_delta_pairing(G, np.eye(3)) == pytest.approx((-0.5, -0.5), abs=1e-15)
    A = algebras.abelian(3)
    assert rc_delta_pairing(MetricState(A, np.eye(3)), np.ones((3, 3))) == (0.0, 0.0)
    with pytest.raises(ShapeMismatch):
        rc_delta_pairing(G, np.eye(2))


def test_variation_examples():
    G = MetricState(nil3_model(), np.eye(3))
    v = variation_derivatives(G, np.diag([1.0, 1.0, -1.0]))
    assert v.dR == pytest.approx(1.5, abs=1e-14)
    h = 1e-5
    norm = lambda s: float(curvature(MetricState(G.algebra, np.eye(3) + s * np.diag([1.0, 1, -1]))).ric_norm_sq)
    assert v.dRicNormSq == pytest.approx((norm(h) - norm(-h)) / (2 * h), rel=1e-6)
    z = variation_derivatives(G, np.zeros((3, 3)))
    assert z.dR == 0 and z.dRicNormSq == 0 and z.dRic(np.eye(3)) == 0 and z.dRc(np.eye(3)) == 0
    with pytest.raises(ShapeMismatch):
        variation_derivatives(G, np.eye(2))
    with pytest.raises(ShapeMismatch):
        variation_derivatives(G, np.triu(np.ones((3, 3))))


@given(seeds)
def test_variation_formulas_against_central_differences(seed):
    rng = np.random.default_rng(seed)
    G = random_metric(rng)
    n = G.algebra.dim
    c = G.algebra.c
    Gd = rng.normal(size=(n, n))
    Gd = 0.5 * (Gd + Gd.T)
    S = rng.normal(size=(n, n))
    S = 0.5 * (S + S.T)
    A = rng.normal(size=(n, n))
    v = variation_derivatives(G, Gd)
    h = 1e-5
    plus, minus = (ricci_arrays(c, G.G + s * Gd) for s in (h, -h))
    Ginv0 = np.linalg.inv(G.G)

    def check(pred, fp, fm):
        fd = (fp - fm) / (2 * h)
        assert abs(pred - fd) <= 1e-6 * max(1.0, abs(fd))

    check(v.dR, plus.R, minus.R)
    check(v.dRicNormSq, plus.ric_norm_sq, minus.ric_norm_sq)
    check(v.dRic(S), bilinear_inner(Ginv0, plus.Ric, S), bilinear_inner(Ginv0, minus.Ric, S))
    check(v.dRc(A), endo_inner(G.G, plus.Rc, A), endo_inner(G.G, minus.Rc, A))


@given(seeds)
def test_pairing_identity(seed):
    rng = np.random.default_rng(seed)
    G = random_metric(rng)
    lhs, rhs = rc_delta_pairing(G, rng.normal(size=(G.algebra.dim,) * 2))
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))
