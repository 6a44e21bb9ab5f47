import numpy as np
import pytest
from scipy import stats

from mdwelfare import kernels
from mdwelfare.dominance import ModelGrid, build_default_grid
from mdwelfare.harness import make_scenario

BACKENDS = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])


def test_backend_selection():
    assert kernels.BACKEND in ("python", "cython")
    assert kernels.get_backend("python") is kernels.python_backend
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("name", BACKENDS)
@pytest.mark.parametrize("r", [-0.95, -0.3, 0.0, 0.45, 0.99])
def test_bvn_matches_scipy(name, r):
    be = kernels.get_backend(name)
    rng = np.random.default_rng(1)
    h, k = rng.normal(scale=1.5, size=(2, 25))
    ref = stats.multivariate_normal(cov=[[1, r], [r, 1]]).cdf(np.column_stack([h, k]))
    np.testing.assert_allclose(be.bvn_cdf(h, k, r), ref, atol=1e-7)


@pytest.mark.parametrize("name", BACKENDS)
def test_bvn_infinite_arguments(name):
    be = kernels.get_backend(name)
    out = be.bvn_cdf(np.array([np.inf, -np.inf, 0.3, np.inf]), np.array([0.2, 1.0, np.inf, np.inf]), 0.5)
    np.testing.assert_allclose(out, [stats.norm.cdf(0.2), 0.0, stats.norm.cdf(0.3), 1.0], atol=1e-15)


@pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled kernels not built")
def test_backends_agree():
    py, cy = kernels.python_backend, kernels.compiled_backend
    rng = np.random.default_rng(0)
    h, k = rng.normal(size=(2, 500))
    np.testing.assert_allclose(cy.bvn_cdf(h, k, 0.45), py.bvn_cdf(h, k, 0.45), atol=1e-14)

    g = np.array(make_scenario("identical").model_a.correlation.matrix)
    chol = np.linalg.cholesky(g)
    b = np.array([0.3, -0.2, 0.8, 0.1])
    shifts = rng.random((4, 3))
    alpha = np.sqrt(np.array([2.0, 3.0, 5.0])) % 1.0
    np.testing.assert_allclose(cy.mvn_qmc(b, chol, 1024, shifts, alpha),
                               py.mvn_qmc(b, chol, 1024, shifts, alpha), atol=1e-13)

    mg = ModelGrid(make_scenario("identical").model_a, build_default_grid())
    fin1, fin2, n1, cell1, n2, cell2, weights, (coef, s3, s4, rho), _ = mg._layout()
    args = (n1, cell1, n2, cell2, weights, int(fin1.sum()), int(fin2.sum()),
            coef[0].copy(), coef[1].copy(), s3, s4, rho)
    for t3, t4 in ((0.2, -0.4), (np.inf, 0.1), (np.inf, np.inf)):
        np.testing.assert_allclose(cy.grid_cell_integrals(*args, t3, t4),
                                   py.grid_cell_integrals(*args, t3, t4), atol=1e-13)
