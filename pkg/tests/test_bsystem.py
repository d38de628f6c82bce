import numpy as np
import pytest

from wmblow.bsystem import (BParams, BState, Shooter, aitken_limit, b_to_U, build_A_ell,
                            blowup_law_fits, change_vars, expected_spectrum,
                            explicit_solution, integrate_trajectory, remaining_time,
                            renormalized_rhs, rhs, shoot_unstable, U_to_b, V_to_b)
from wmblow.ground_state import structural_constants
from wmblow.numerics import ContractError


def test_coefficients_d7_ell3():
    p = BParams.make(3, d=7)
    print(p.c)
    assert np.allclose(p.c, [3.0, -12.0, 24.0])


def test_explicit_solution_solves_system():
    for d, ell in [(7, 3), (8, 2), (9, 2), (10, 3)]:
        p = BParams.make(ell, d=d)
        for s in (10.0, 100.0):
            b = explicit_solution(p, s)
            db, _, _ = rhs(p, b)
            k = np.arange(1, p.L + 1)
            exact = -k * p.c / s ** (k + 1)
            assert np.max(np.abs(db - exact)) < 1e-14 * np.max(np.abs(exact)) + 1e-18


@pytest.mark.parametrize("d,ell", [(7, 3), (8, 2), (9, 2), (10, 3), (12, 4)])
def test_spectrum(d, ell):
    g = structural_constants(d)[0]
    sd = build_A_ell(ell, g)
    ref = expected_spectrum(ell, g)
    print(d, ell, sd.D, ref)
    assert np.max(np.abs(np.sort(sd.D) - np.sort(ref))) < 1e-10
    # diagonalization A = P^-1 D P
    assert np.allclose(np.linalg.inv(sd.P) @ np.diag(sd.D) @ sd.P, sd.A, atol=1e-10)


def test_linearization_matches_finite_differences():
    p = BParams.make(3, d=7)
    f = renormalized_rhs(p)
    A = build_A_ell(3, p.gamma).A
    J = np.zeros((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1e-6
        J[:, j] = (f(e) - f(-e)) / 2e-6
    assert np.allclose(J, A, atol=1e-8)
    assert np.max(np.abs(f(np.zeros(3)))) < 1e-14


def test_variable_changes_roundtrip():
    p = BParams.make(3, d=7)
    b = explicit_solution(p, 30.0) * (1 + np.array([0.01, -0.02, 0.03]))
    U = b_to_U(p, b, 30.0)
    assert np.allclose(U_to_b(p, U, 30.0), b, rtol=1e-14)
    V = change_vars(p, b, 30.0, "V")
    assert np.allclose(V_to_b(p, V, 30.0), b, rtol=1e-12)


@pytest.mark.parametrize("d,ell", [(7, 3), (8, 2), (9, 2)])
def test_blowup_laws(d, ell):
    p = BParams.make(ell, d=d)
    fits = blowup_law_fits(p)
    print(d, ell, fits["slope_s"], fits["expected_s"], fits["slope_t"], fits["expected_t"])
    assert abs(fits["slope_s"] / fits["expected_s"] - 1) < 0.005
    assert abs(fits["slope_t"] / fits["expected_t"] - 1) < 0.01
    # on the explicit solution T = s0 / (c1 - 1)
    assert fits["T"] == pytest.approx(20.0 / (p.c[0] - 1), rel=1e-8)


def test_lambda_decreasing_and_T_monotone():
    p = BParams.make(3, d=7)
    tr = integrate_trajectory(p, BState(20.0, explicit_solution(p, 20.0)), 2000.0)
    assert np.all(np.diff(tr.lam) < 0) and np.all(tr.lam > 0)
    R, T = remaining_time(p, tr)
    assert np.all(np.diff(R) < 0) and np.all(R > 0)


def test_aitken():
    seq = [1 + 0.5**n for n in (3, 4, 5)]
    assert aitken_limit(*seq) == pytest.approx(1.0, abs=1e-14)


def test_contracts():
    with pytest.raises(ContractError):
        BParams.make(1, d=7)  # ell must exceed gamma = 2
    with pytest.raises(ContractError):
        BParams.make(3, L=2, d=7)
    with pytest.raises(ContractError):
        shoot_unstable(BParams.make(2, d=8), 10.0, 100.0, box_exponent=0.0)


def test_shooting_short_horizon():
    p = BParams.make(2, d=8)
    res, sh = shoot_unstable(p, 10.0, 100.0, 0.5)
    w = [float(np.max(x)) for x in res.widths]
    print("bracket widths", w)
    assert sh.shoot(res.V0, 100.0).trapped
    assert all(w[i + 1] <= w[i] / 4 for i in range(len(w) - 2))
    assert all(r.exit_derivative > 0 for _, r in res.rejected)


def test_shooting_nontrivial_target():
    p = BParams.make(2, d=8)
    res, sh = shoot_unstable(p, 10.0, 100.0, 0.5, V1=0.05, tail=None)
    assert sh.shoot(res.V0, 100.0).trapped
    print("V0", res.V0)
    assert res.V0[0] != 0.0


def test_corner_exits_outward():
    p = BParams.make(2, d=8)
    sh = Shooter(p, 10.0, 0.5)
    r = sh.shoot(np.array([10.0 ** -0.5]), 100.0)
    assert not r.trapped and r.exit_derivative > 0
