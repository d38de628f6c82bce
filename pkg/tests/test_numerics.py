import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wmblow.numerics import (GridRangeError, IntegrationError, RadialGrid, eig_small,
                             fornberg_weights, loglog_slope, solve_ivp)


def test_fornberg_centered_second_derivative():
    w = fornberg_weights(0.0, np.array([-1.0, 0.0, 1.0]), 2)
    print(w[2])
    assert np.allclose(w[2], [1, -2, 1])


def test_quadrature_exact_for_polynomial_weights():
    g = RadialGrid.uniform(0.0, 1.0, 40, d=7)
    val = g.integrate(np.ones(g.n))
    print("int y^6 over [0,1]:", val)
    assert abs(val - 1 / 7) < 1e-14
    g2 = RadialGrid.uniform(0.0, 2.0, 40, d=1)
    val2 = g2.integrate(g2.y**2, power=0)
    assert abs(val2 - 8 / 3) / (8 / 3) < 1e-13


def test_geometric_quadrature_and_range_error():
    g = RadialGrid.geometric(1e-3, 1e3, d=7, order=8)
    f = np.exp(-g.y**2)
    # int_0^inf exp(-y^2) y^6 dy = 15 sqrt(pi)/16
    val = g.integrate(f)
    ref = 15 * np.sqrt(np.pi) / 16
    print("relative error", abs(val - ref) / ref)
    assert abs(val - ref) / ref < 1e-10
    assert np.min(np.abs(g.y - 1.0)) < 1e-12
    with pytest.raises(GridRangeError):
        g.integrate(f, b=2e3)


def test_derivative_orders():
    errs = []
    for n in (50, 100, 200):
        g = RadialGrid.uniform(0.5, 3.0, n, d=1, order=4)
        errs.append(np.max(np.abs(g.d2(np.sin(g.y)) + np.sin(g.y))))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    print("d2 error", errs, "rates", rates)
    assert np.all(rates > 3.5)
    g = RadialGrid.geometric(1e-2, 10.0, d=1, order=8)
    assert np.max(np.abs(g.d1(g.y**3) - 3 * g.y**2) / (3 * g.y**2)) < 1e-10


def test_eig_small_known_spectra():
    assert np.allclose(eig_small(np.eye(4))[0], 1.0)
    vals, _ = eig_small(np.diag([3.0, -1.0, 2.0]))
    assert np.allclose(np.sort(vals), [-1, 2, 3])
    # companion matrix of (x-1)(x-2)(x-3)
    C = np.array([[6.0, -11.0, 6.0], [1, 0, 0], [0, 1, 0]])
    vals, vecs = eig_small(C)
    print("companion eigenvalues", vals)
    assert np.allclose(np.sort(vals.real), [1, 2, 3], atol=1e-10)
    assert np.allclose(C @ vecs, vecs * vals, atol=1e-9)


def test_eig_small_complex_pair():
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    vals, _ = eig_small(R)
    assert np.allclose(np.sort_complex(vals), [-1j, 1j])


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=2, max_value=8), st.integers(min_value=0, max_value=10**6))
def test_eig_small_matches_residual(n, seed):
    A = np.random.default_rng(seed).standard_normal((n, n))
    vals, vecs = eig_small(A)
    res = np.max(np.abs(A @ vecs - vecs * vals))
    assert res < 1e-8 * max(1.0, np.max(np.abs(vals)))
    ref = np.linalg.eigvals(A)
    dist = np.abs(np.asarray(vals, complex)[:, None] - ref[None, :])
    assert np.all(dist.min(axis=0) < 1e-8) and np.all(dist.min(axis=1) < 1e-8)


def test_solve_ivp_exponential_and_failure():
    tr = solve_ivp(lambda t, y: -y, [1.0], (0.0, 2.0), tol=1e-12, t_eval=[2.0])
    assert abs(tr.y[0, -1] - np.exp(-2.0)) < 1e-11
    with pytest.raises(IntegrationError):
        solve_ivp(lambda t, y: y**2, [1.0], (0.0, 2.0), tol=1e-10)


def test_fixed_step_convergence():
    errs = []
    for h in (0.2, 0.1):
        tr = solve_ivp(lambda t, y: np.cos(t) * y, [1.0], (0.0, 4.0), method="RK23",
                       fixed_step=h, t_eval=[4.0])
        errs.append(abs(tr.y[0, -1] - np.exp(np.sin(4.0))))
    print("fixed-step errors", errs)
    assert errs[0] / errs[1] >= 6.0


def test_loglog_slope():
    x = np.linspace(1, 10, 50)
    assert abs(loglog_slope(x, 3 * x**-1.5) + 1.5) < 1e-12
