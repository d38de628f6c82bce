"""Invariant batteries shared by the CLI and the acceptance tests.

Each ``criterion_*`` function runs one group of checks and returns a
``CheckResult`` with the measured values, the tolerances and a pass flag.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class CheckResult:
    name: str
    passed: bool
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} ({self.seconds:.1f}s)"

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed),
                "seconds": self.seconds, "values": _plain(self.values)}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _timed(fn):
    def wrapper(*a, **k):
        t0 = time.perf_counter()
        res = fn(*a, **k)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


_CACHE = {}


def ground_state(d, y_max=1e3):
    from .ground_state import solve_ground_state
    key = ("gs", d, y_max)
    if key not in _CACHE:
        _CACHE[key] = solve_ground_state(d, y_max=y_max)
    return _CACHE[key]


def context(d, y_max=1e3):
    from .linop import LinOpContext
    key = ("ctx", d, y_max)
    if key not in _CACHE:
        _CACHE[key] = LinOpContext(ground_state(d, y_max))
    return _CACHE[key]


def profile_set(d, L, ell=None):
    from .profiles import build_S_profiles, make_T_profiles
    key = ("ps", d, L, ell)
    if key not in _CACHE:
        _CACHE[key] = build_S_profiles(make_T_profiles(context(d), L, ell))
    return _CACHE[key]


# ---------------------------------------------------------------------------

@_timed
def criterion_1(dims=range(7, 13)):
    """Structural constants against the closed forms."""
    from .ground_state import structural_constants
    vals = {}
    ok = True
    for d in dims:
        g, gt, hb, de = structural_constants(d)
        gt_ref = math.sqrt(d * d - 8 * d + 8)
        g_ref = (d - 2 - gt_ref) / 2
        hb_ref = math.floor(d / 2 - g_ref)
        de_ref = d / 2 - g_ref - hb_ref
        ok &= (g == g_ref and gt == gt_ref and hb == hb_ref and de == de_ref)
        ok &= 1 < g <= 2 and 0 < de < 1
        vals[d] = dict(gamma=g, gamma_tilde=gt, hbar=hb, delta=de)
    if 7 in vals:
        ok &= vals[7]["gamma"] == 2.0
    return CheckResult("1 structural constants", bool(ok), vals)


@_timed
def criterion_2(dims=(7, 8, 9), tol_slope=0.01, tol_Z=1e-6):
    """Tail exponents of pi/2 - Q and Lambda Q, and the Z identity."""
    from .ground_state import Z_identity_defect
    from .numerics import loglog_slope
    vals = {}
    ok = True
    for d in dims:
        gs = ground_state(d)
        y = gs.grid.y
        hi = gs.grid.span[1]
        sQ = loglog_slope(y, 0.5 * np.pi - gs.Q.values, hi / 20, hi / 2)
        sL = loglog_slope(y, gs.LamQ.values, hi / 20, hi / 2)
        zd = Z_identity_defect(gs)
        eQ = abs(sQ + gs.gamma) / gs.gamma
        eL = abs(sL + gs.gamma) / gs.gamma
        ok &= eQ <= tol_slope and eL <= tol_slope and zd <= tol_Z
        vals[d] = dict(slope_Q=sQ, slope_LamQ=sL, gamma=gs.gamma, rel_err_Q=eQ,
                       rel_err_LamQ=eL, Z_defect=zd, a0=gs.a0)
    return CheckResult("2 ground state", bool(ok), vals)


def _adjoint_defect(ctx, apply, apply_adj, fs, gs_):
    worst = 0.0
    for f in fs:
        for g in gs_:
            a = ctx.inner(apply(f), g)
            b = ctx.inner(f, apply_adj(g))
            worst = max(worst, abs(a - b) / max(abs(a) + abs(b), 1e-300))
    return worst


@_timed
def criterion_3(d=7, seed=0, tol_res=1e-5, tol_adj=1e-6, tol_inv=1e-5, tol_phi=0.02):
    """Operator calculus: kernels, adjointness, inversion, phi_k growth."""
    from .linop import RadialPair, random_test_functions
    from .numerics import loglog_slope
    ctx = context(d)
    vals = {}
    vals["L_LamQ"] = ctx.relative_L_residual(ctx.LamQ)
    vals["L_Gamma"] = ctx.relative_L_residual(ctx.kernel_Gamma())
    vals["A_LamQ"] = float(np.max(np.abs(ctx.apply_A(ctx.LamQ))[(ctx.y > 0.1) & (ctx.y < 500)])
                           / np.max(np.abs(ctx.LamQ)))
    fs = random_test_functions(ctx.y, 4, seed=seed)
    gs_ = random_test_functions(ctx.y, 4, seed=seed + 1)
    vals["adj_A"] = _adjoint_defect(ctx, ctx.apply_A, ctx.apply_Astar, fs, gs_)
    vals["adj_L"] = _adjoint_defect(ctx, ctx.apply_L, ctx.apply_L, fs, gs_)
    pairs_f = [RadialPair(f, g) for f, g in zip(fs, gs_)]
    pairs_g = [RadialPair(g, f) for f, g in zip(fs, gs_)]
    vals["adj_H"] = _adjoint_defect(ctx, ctx.apply_H, ctx.apply_Hstar, pairs_f, pairs_g)
    fact = [np.max(np.abs(ctx.apply_Astar(ctx.apply_A(f)) - ctx.apply_L(f)))
            / np.max(np.abs(ctx.apply_L(f))) for f in fs]
    vals["AstarA_minus_L"] = float(max(fact))
    vals["invert_roundtrip"] = float(max(ctx.relative_L_residual(ctx.invert_L(f), f, hi=50.0)
                                         for f in fs))
    # growth of phi_k on a longer grid
    big = context(d, 1e4)
    g = big.gs.gamma
    slopes, errs = {}, {}
    for k in range(0, 4):
        s = loglog_slope(big.y, np.abs(big.phi(k)), 1e3, 5e3)
        slopes[k] = s
        errs[k] = abs(s - (2 * k - g)) / max(abs(2 * k - g), 1.0)
    vals["phi_slopes"] = slopes
    vals["phi_slope_err"] = errs
    ok = (vals["L_LamQ"] <= tol_res and vals["L_Gamma"] <= tol_res
          and max(vals["adj_A"], vals["adj_L"], vals["adj_H"]) <= tol_adj
          and vals["invert_roundtrip"] <= tol_inv
          and max(errs.values()) <= tol_phi)
    return CheckResult("3 operator calculus", bool(ok), vals)


@_timed
def criterion_4(d=7, L=3, M_list=(10, 20, 40), tol_odd=1e-8, tol_diag=1e-4):
    """Structure of Phi_M: odd coefficients and the duality with H^i T_k."""
    ctx = context(d)
    vals = {}
    ok = True
    for M in M_list:
        Phi, c = ctx.build_Phi_M(M, L)
        N = ctx.inner(ctx.lamQ_pair(), Phi)
        odd = max(abs(c[k]) / M ** (2 * k) for k in range(1, L + 1, 2))
        worst = 0.0
        for i in range(L + 1):
            for k in range(L + 1):
                v = ctx.inner(ctx.apply_Hk(ctx.T(k), i), Phi)
                ref = (-1) ** k * N if i == k else 0.0
                worst = max(worst, abs(v - ref) / abs(N))
        ok &= odd <= tol_odd and worst <= tol_diag
        vals[M] = dict(c=c, odd_scaled=odd, diag_defect=worst)
    return CheckResult("4 Phi_M structure", bool(ok), vals)


@_timed
def criterion_5(d=7, count=50, seed=0, M=10.0):
    """Hardy inequalities and coercivity over a random ensemble."""
    from .linop import coercivity_check, hardy_check, random_test_functions
    ctx = context(d)
    grid = ctx.grid
    fs = random_test_functions(ctx.y, count, seed=seed)
    Phi, _ = ctx.build_Phi_M(M, 1)
    phi1 = Phi.f1
    nQ = ctx.inner(ctx.LamQ, phi1)
    slack = {"origin_i0": [], "origin_i1": [], "noncritical": [], "critical": [],
             "weighted": [], "coercive_Astar": [], "coercive_A": []}
    for f in fs:
        slack["origin_i0"].append(hardy_check(grid, f, "origin", i=0)[2])
        slack["origin_i1"].append(hardy_check(grid, f, "origin", i=1)[2])
        slack["noncritical"].append(hardy_check(grid, f, "noncritical", alpha=1.0)[2])
        slack["critical"].append(hardy_check(grid, f, "critical")[2])
        slack["weighted"].append(hardy_check(grid, f, "weighted", k=2, j=1, mu=1.0)[2])
        slack["coercive_Astar"].append(coercivity_check(ctx, f, "Astar", i=0, alpha=1.0))
        fp = f - ctx.inner(f, phi1) / nQ * ctx.LamQ
        slack["coercive_A"].append(coercivity_check(ctx, fp, "A", i=0, alpha=1.0, Phi=phi1))
    mins = {k: float(np.min(v)) for k, v in slack.items()}
    ok = all(v >= 0 for v in mins.values()) and mins["coercive_A"] > 0 \
        and mins["coercive_Astar"] > 0
    return CheckResult("5 Hardy and coercivity", bool(ok), {"min_slack": mins, "count": count})


@_timed
def criterion_6(cases=((7, 3), (8, 2), (9, 2)), tol_spec=1e-10, tol_s=0.005, tol_t=0.01):
    """Spectrum of A_ell and the blowup laws of the b-system."""
    from .bsystem import BParams, blowup_law_fits, build_A_ell, expected_spectrum
    from .ground_state import structural_constants
    vals = {}
    ok = True
    for d, ell in cases:
        g = structural_constants(d)[0]
        sd = build_A_ell(ell, g)
        spec_err = float(np.max(np.abs(np.sort(sd.D) - np.sort(expected_spectrum(ell, g)))))
        fits = blowup_law_fits(BParams.make(ell, d=d))
        es = abs(fits["slope_s"] - fits["expected_s"]) / abs(fits["expected_s"])
        et = abs(fits["slope_t"] - fits["expected_t"]) / abs(fits["expected_t"])
        ok &= spec_err <= tol_spec and es <= tol_s and et <= tol_t
        vals[f"{d},{ell}"] = dict(spectrum=sd.D, spectrum_err=spec_err,
                                  slope_s=fits["slope_s"], expected_s=fits["expected_s"],
                                  slope_t=fits["slope_t"], expected_t=fits["expected_t"],
                                  T=fits["T"])
    return CheckResult("6 b-system", bool(ok), vals)


@_timed
def criterion_7(d=8, ell=2, s0=10.0, factor=100.0, beta=0.5):
    """Nested shooting for ell = 2 with transverse exits."""
    from .bsystem import BParams, shoot_unstable
    p = BParams.make(ell, d=d)
    res, sh = shoot_unstable(p, s0, factor * s0, beta)
    final = sh.shoot(res.V0, factor * s0)
    derivs = [r.exit_derivative for _, r in res.rejected if r.exit_derivative is not None]
    transverse = bool(derivs) and all(dv > 0 for dv in derivs)
    w = [float(np.max(x)) for x in res.widths]
    ok = final.trapped and transverse and res.horizon >= factor * s0 * (1 - 1e-12)
    return CheckResult("7 shooting", bool(ok),
                       dict(V0=res.V0, trapped=final.trapped, n_rejected=len(res.rejected),
                            min_exit_derivative=min(derivs) if derivs else None,
                            widths=w, levels=res.levels))


@_timed
def criterion_8(d=7, L=3, ell=3, s_values=(40.0, 80.0, 160.0, 320.0), M=10.0):
    """Local residual of Q_b scales like b_1^(L+3); ablation without S_k."""
    from .bsystem import BParams
    from .profiles import residual_scaling
    ps = profile_set(d, L, ell)
    p = BParams.make(ell, L, d=d)
    s_full, b1, v_full = residual_scaling(ps, p, s_values, M)
    s_abl, _, v_abl = residual_scaling(ps, p, s_values, M, include_S=False)
    ok = s_full >= L + 2.5 and s_full - s_abl >= 1.0
    return CheckResult("8 profile residual scaling", bool(ok),
                       dict(slope=s_full, slope_ablation=s_abl, b1=b1, norm=v_full,
                            norm_ablation=v_abl, expected=L + 3))


@_timed
def criterion_9(d=7, N_energy=8192):
    """PDE validation: exact self-similar solution, energy, scaling law."""
    from .wave import energy, evolve, make_grid, make_state, rescale, self_similar_test
    rep = self_similar_test(d, 2.0, 0.5)
    g = make_grid(d, 12.0, N_energy)
    r = g.y
    u = 0.05 * r**3 * np.exp(-(r / 1.5) ** 2)
    st = make_state(g, u, np.zeros_like(u))
    E0 = energy(st)
    st5 = evolve(st, 5.0, 0.5)
    drift = abs(energy(st5) - E0) / E0
    ratio = energy(rescale(st, 2.0)) / E0
    scale_err = abs(ratio / 2 ** (d - 2) - 1)
    ok = rep.sup_error <= 1e-4 and drift <= 1e-6 and scale_err <= 1e-6
    return CheckResult("9 PDE validation", bool(ok),
                       dict(self_similar_sup_error=rep.sup_error, energy_drift=drift,
                            scaling_ratio=ratio, scaling_err=scale_err,
                            ode_residual=rep.ode_residual))


@_timed
def criterion_10(d=7, ell=3, L=3, s0=50.0, tol=0.05):
    """Projected b_1(s) from the PDE tracks the b-system over s0/2."""
    from .bsystem import BParams
    from .wave import SimConfig, bsystem_tracking, prepared_run
    ps = profile_set(d, L, ell)
    p = BParams.make(ell, L, d=d)
    cfg = SimConfig(d=d, r_max=70.0, N_r=7000, t_end=15.0, support=50.0)
    track, _, status = prepared_run(ps, p, s0, cfg, ds_max=s0 / 2)
    dev, s, b1, ref = bsystem_tracking(track, p)
    E = np.array(track.energy)
    reached = s[-1] - s0
    ok = dev <= tol and reached >= s0 / 2 * (1 - 1e-9)
    return CheckResult("10 PDE-ODE consistency", bool(ok),
                       dict(max_rel_dev=dev, s_reached=s[-1], status=status,
                            lam_final=track.lam[-1],
                            energy_drift=float(np.max(np.abs(E - E[0])) / abs(E[0]))))


ALL = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
       criterion_7, criterion_8, criterion_9, criterion_10]


def linop_battery(d=7, L=3, seed=0):
    return [criterion_3(d, seed=seed), criterion_4(d, L), criterion_5(d, seed=seed)]
