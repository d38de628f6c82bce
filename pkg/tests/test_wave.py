import warnings

import numpy as np
import pytest

from wmblow import verify
from wmblow.bsystem import BParams, explicit_solution
from wmblow.numerics import ContractError, NumericalError
from wmblow.wave import (BlowupEvent, EnergyDivergenceWarning, ModulationTrack, Projector,
                         SimConfig, bump, energy, evolve, extract_lambda, fit_blowup_time,
                         make_grid, make_state, profile_state, radial_derivatives,
                         rescale, self_similar_test, step)


def test_zero_data_stays_zero():
    g = make_grid(7, 5.0, 200)
    st = evolve(make_state(g, np.zeros(g.n), np.zeros(g.n)), 1.0)
    assert np.all(st.u.values == 0) and np.all(st.ut.values == 0)


def test_derivatives_of_odd_function():
    g = make_grid(7, 4.0, 400)
    r = g.y
    u = np.sin(r) * np.exp(-r**2)
    ur, urr = radial_derivatives(u, r[1] - r[0])
    ex1 = (np.cos(r) - 2 * r * np.sin(r)) * np.exp(-r**2)
    assert np.max(np.abs(ur - ex1)[r < 3]) < 1e-6


def test_ground_state_is_stationary(gs7):
    errs = []
    for N in (200, 400, 800):
        g = make_grid(7, 8.0, N)
        Q, _, _ = gs7.at(g.y)
        st = evolve(make_state(g, Q, np.zeros_like(Q)), 1.0, 0.5)
        errs.append(np.max(np.abs(st.u.values - Q)[g.y <= 6]))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    print("drift", errs, "orders", rates)
    assert np.all(rates >= 3.5)


def test_front_speed():
    g = make_grid(7, 30.0, 3000)
    r = g.y
    u = 1e-6 * bump(r, 10.0, 1.0) * 1e3 / r**3
    ur, _ = radial_derivatives(u, r[1] - r[0])
    st = evolve(make_state(g, u, -ur - 3 * u / r), 5.0)

    def edge(w):
        return r[np.nonzero(w > 1e-3 * w.max())[0][-1]]
    speed = (edge(np.abs(st.u.values) * r**3) - edge(np.abs(u) * r**3)) / 5.0
    print("front speed", speed)
    assert abs(speed - 1) <= 0.02


def _smooth_data(N, amp=0.05):
    g = make_grid(7, 12.0, N)
    u = amp * g.y**3 * np.exp(-(g.y / 1.5) ** 2)
    return make_state(g, u, np.zeros_like(u))


def test_energy_zero_and_conservation():
    g = make_grid(7, 5.0, 100)
    assert energy(make_state(g, np.zeros(g.n), np.zeros(g.n))) == 0.0
    st = _smooth_data(2048)
    E0 = energy(st)
    drift = abs(energy(evolve(st, 5.0)) - E0) / E0
    print("energy drift", drift)
    assert drift <= 1e-6


def test_energy_scaling_law():
    st = _smooth_data(2048)
    ratio = energy(rescale(st, 2.0)) / energy(st)
    print("E ratio", ratio)
    assert abs(ratio / 32 - 1) <= 1e-6


def test_energy_of_raw_Q_diverges(gs7):
    g = make_grid(7, 20.0, 400)
    Q, _, _ = gs7.at(g.y)
    with pytest.warns(EnergyDivergenceWarning):
        energy(make_state(g, Q, np.zeros_like(Q)))


def test_large_focusing_data_blows_up():
    g = make_grid(7, 12.0, 512)
    u = bump(g.y, 5.0, 1.5, 0.5)
    with pytest.raises(BlowupEvent) as info:
        evolve(make_state(g, u, np.zeros_like(u)), 5.0)
    assert info.value.state is not None


def test_cfl_contract():
    g = make_grid(7, 5.0, 100)
    st = make_state(g, np.zeros(g.n), np.zeros(g.n))
    with pytest.raises(ContractError):
        step(st, 0.6 * (g.y[1] - g.y[0]))
    with pytest.raises(ContractError):
        SimConfig(cfl=0.7)
    with pytest.raises(ContractError):
        SimConfig(r_max=60, t_end=20, support=50)


def test_self_similar_solution():
    rep = self_similar_test(7, 2.0, 0.5)
    print("sup error", rep.sup_error, "ODE residual", rep.ode_residual)
    assert rep.sup_error <= 1e-4 and rep.ode_residual <= 1e-7


def test_type_one_rate():
    rep = self_similar_test(7, 2.0, 1.5, grad_times=[0.25, 0.5, 0.75, 1.0, 1.25])
    print("gradient slope", rep.grad_slope, "products", rep.type1_product)
    assert abs(rep.grad_slope + 1) <= 0.02
    assert np.ptp(rep.type1_product) < 1e-4 * rep.type1_product[0]


def test_extract_lambda(gs7):
    g = make_grid(7, 20.0, 2000)
    Q, _, _ = gs7.at(g.y / 0.7)
    st = make_state(g, Q, np.zeros_like(Q))
    assert abs(extract_lambda(st, gs7) - 0.7) < 1e-8
    pert = make_state(g, Q + 1e-4 * bump(g.y, 3.0, 1.0), np.zeros_like(Q))
    assert abs(extract_lambda(pert, gs7) - 0.7) < 1e-3
    with pytest.raises(NumericalError):
        extract_lambda(make_state(g, -Q, np.zeros_like(Q)), gs7)


def test_extract_lambda_from_profile(ps7, gs7):
    p = BParams.make(3, d=7)
    g = make_grid(7, 60.0, 6000)
    st = profile_state(g, ps7, explicit_solution(p, 100.0), 1.0, truncate=25.0)
    lam = extract_lambda(st, gs7)
    print("lambda from Q_b", lam)
    assert abs(lam - 1) <= 0.02


def test_projection_recovers_parameters(ps7):
    p = BParams.make(3, d=7)
    b = explicit_solution(p, 50.0)
    g = make_grid(7, 70.0, 7000)
    st = profile_state(g, ps7, b, 0.9, truncate=25.0)
    proj = Projector(ps7, 10.0)
    lam, bb, q, res = proj.project(st, np.concatenate([[1.0], 1.1 * b]))
    print(lam, bb, res)
    assert abs(lam - 0.9) < 1e-6 and np.max(np.abs(bb - b)) < 1e-6
    # a small perturbation moves the parameters by O(eps)
    shifts = []
    for eps in (1e-4, 2e-4):
        bump_r = eps * bump(g.y, 4.0, 1.5)
        st2 = make_state(g, st.u.values + bump_r, st.ut.values)
        lam2, b2, _, _ = proj.project(st2, np.concatenate([[lam], bb]))
        shifts.append(abs(lam2 - lam) + np.max(np.abs(b2 - bb)))
    print("shifts", shifts)
    assert shifts[1] / shifts[0] == pytest.approx(2.0, rel=0.05)


def test_modulation_track_invariants():
    tr = ModulationTrack()
    tr.append(0.0, 50.0, 1.0, [0.06], 0.0)
    with pytest.raises(ContractError):
        tr.append(0.0, 50.0, 1.0, [0.06], 0.0)
    with pytest.raises(ContractError):
        tr.append(1.0, 51.0, -1.0, [0.06], 0.0)


def test_blowup_time_fit():
    t = np.linspace(0, 8, 40)
    lam = 0.3 * (10.0 - t) ** 1.5
    T, pexp, c = fit_blowup_time(t, lam)
    print(T, pexp, c)
    assert T == pytest.approx(10.0, rel=1e-6) and pexp == pytest.approx(1.5, rel=1e-6)
