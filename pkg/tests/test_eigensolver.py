import numpy as np
import pytest

from nlsgap.eigensolver import SymmetryError, cluster_multiplicities, top_eigs
from nlsgap.grid import inner_product, make_grid
from nlsgap.operators import make_bs_operator
from nlsgap.special import greens_weights
from oracles import dense_bs_matrix


def gaussian_bs(N):
    g = make_grid(N / 2, N)
    U = np.exp(-g.radius() ** 2 / 2)
    green = greens_weights(g)
    return g, make_bs_operator(None, 1.0, "plus", green, U=U)


def test_identity():
    g = make_grid(4, 6)
    eig = top_eigs(lambda f: f, g, 3)
    np.testing.assert_allclose(eig.values, 1.0, atol=1e-14)
    assert eig.converged


def test_diagonal_operator(rng):
    g = make_grid(4, 6)
    d = rng.uniform(0, 1, g.shape)
    eig = top_eigs(lambda f: d * f, g, 5)
    np.testing.assert_allclose(eig.values, np.sort(d.ravel())[::-1][:5], rtol=1e-12)


@pytest.mark.parametrize("N", [6, 8, 10])
def test_dense_oracle(N):
    g, op = gaussian_bs(N)
    K = dense_bs_matrix(g.L, g.N, op.U, op.scale)
    ref = np.linalg.eigvalsh(K)[::-1][:6]
    eig = top_eigs(op, g, 6)
    assert eig.converged
    np.testing.assert_allclose(eig.values, ref, rtol=1e-10)


def test_pairs_are_accurate_and_orthonormal():
    g, op = gaussian_bs(8)
    eig = top_eigs(op, g, 6)
    for i, v in enumerate(eig.fields):
        rayleigh = inner_product(g, v, op(v)) / inner_product(g, v, v)
        assert rayleigh == pytest.approx(eig.values[i], rel=1e-12)
    gram = np.array([[inner_product(g, a, b) for b in eig.fields] for a in eig.fields])
    np.testing.assert_allclose(gram, np.eye(6), atol=1e-12)
    assert eig.residuals.max() <= 1e-12


def test_lambda1_history_nondecreasing():
    g, op = gaussian_bs(10)
    eig = top_eigs(op, g, 6, block_size=1, ncv=14)
    h = np.array(eig.lambda1_history)
    assert len(h) > 1
    assert np.all(np.diff(h) >= -1e-12 * h[-1])


def test_seed_invariance():
    g, op = gaussian_bs(8)
    a = top_eigs(op, g, 6, seed=1).values
    b = top_eigs(op, g, 6, seed=99).values
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_rejects_asymmetric(rng):
    g = make_grid(4, 6)
    A = rng.standard_normal((216, 216))
    with pytest.raises(SymmetryError):
        top_eigs(lambda f: (A @ f.ravel()).reshape(f.shape), g, 3)


def test_rejects_bad_k():
    g = make_grid(4, 4)
    with pytest.raises(ValueError):
        top_eigs(lambda f: f, g, 0)


@pytest.mark.parametrize("values,expected", [
    ([3.0, 2.0, 2.0, 2.0, 1.5], [(0,), (1, 2, 3), (4,)]),
    ([5.0, 4.0, 3.0, 2.0], [(0,), (1,), (2,), (3,)]),
    ([1.0, 1.0 - 1e-12], [(0, 1)]),
    ([], []),
])
def test_clusters(values, expected):
    assert cluster_multiplicities(values) == expected


def test_triplet_on_radial_problem():
    g, op = gaussian_bs(10)
    eig = top_eigs(op, g, 6)
    assert any(len(c) == 3 for c in eig.clusters)
