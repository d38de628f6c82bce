"""Approximate blowup profiles.

Q_b = Q + sum_k b_k T_k + sum_k S_k(b), where T_k are the generalized kernel
elements (H T_{k+1} = -T_k, T_0 = Lambda Q) and the S_k are homogeneous
corrections, polynomial in b, built by

    S_1 = 0,  S_k = -H^{-1} F_k,
    F_k = E_{k-1} + (d-1)/(2 y^2) (0, P_k),

with E_k collecting b_1 b_k [Lambda T_k - (k-gamma) T_k], b_1 Lambda S_k and the
formal substitution (b_j)_s -> -(j-gamma) b_1 b_j + b_{j+1} inside d S_k / ds,
and P_k the weighted-degree-k part of the Taylor remainder

    sin(2Q + 2 Theta_1) - sin(2Q) - 2 cos(2Q) Theta_1 = sum_{j>=2} f^(j)(Q)/j! Theta_1^j,

f(x) = sin(2x).  The sign in front of P_k follows from F(Q + Theta)_2 =
-L Theta_1 - (d-1)/(2y^2) [Taylor remainder].

Monomials in b are stored as exponent tuples (m_1, ..., m_L) mapped to
coefficient pairs on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .linop import LinOpContext, RadialPair, chi, smoothstep
from .numerics import ContractError, NumericalError, loglog_slope


@dataclass(frozen=True)
class DegreeTag:
    p1: int
    p2: float
    iota: int
    p3: int | None = None


def mono_degree(m):
    return sum((k + 1) * e for k, e in enumerate(m))


def b_power(m, b):
    out = 1.0
    for k, e in enumerate(m):
        if e:
            out *= b[k] ** e
    return out


@dataclass(frozen=True, eq=False)
class HomogeneousProfile:
    """Finite sum of monomials b^m times a coefficient pair."""

    terms: dict
    degree: DegreeTag

    def __post_init__(self):
        if self.degree.p3 is not None:
            for m in self.terms:
                if mono_degree(m) != self.degree.p3:
                    raise NumericalError(f"monomial {m} has degree {mono_degree(m)}, "
                                         f"expected {self.degree.p3}")

    def evaluate(self, b):
        it = iter(self.terms.items())
        m, p = next(it)
        out = p * b_power(m, b)
        for m, p in it:
            out = out + p * b_power(m, b)
        return out

    def derivative(self, j, b):
        """d/db_j (0-based j) evaluated at b; None when no monomial contains b_j."""
        out = None
        for m, p in self.terms.items():
            if m[j] == 0:
                continue
            mm = list(m)
            mm[j] -= 1
            term = p * (m[j] * b_power(mm, b))
            out = term if out is None else out + term
        return out

    def depends_on(self, j):
        return any(m[j] for m in self.terms)


@dataclass(frozen=True, eq=False)
class ProfileSet:
    ctx: LinOpContext
    L: int
    ell: int
    T: list
    phi: list
    S: dict = field(default_factory=dict)
    eta: float = 0.05

    @property
    def d(self):
        return self.ctx.d

    @property
    def y(self):
        return self.ctx.y

    def B0(self, b1):
        return 1.0 / b1

    def B1(self, b1):
        return self.B0(b1) ** (1 + self.eta)


# ---------------------------------------------------------------------------
# T_k
# ---------------------------------------------------------------------------

def make_T_profiles(ctx, L, ell=None, eta=0.05):
    """T_0..T_{L+2} with T_{2i} = (phi_i, 0), T_{2i+1} = (0, phi_i)."""
    if L < 1 or L % 2 == 0:
        raise ContractError("L must be odd")
    ell = L if ell is None else ell
    T = [ctx.T(k) for k in range(L + 3)]
    phi = [ctx.phi(i) for i in range((L + 2) // 2 + 1)]
    return ProfileSet(ctx, L, ell, T, phi, {}, eta)


def lambda_vec(ctx, p):
    """Lambda (f1, f2) = (y f1', f2 + y f2')."""
    y = ctx.y
    return RadialPair(y * ctx.d1(p.f1), p.f2 + y * ctx.d1(p.f2))


def recursion_residual(ps, k, lo=0.1, hi=None):
    """|| H T_{k+1} + T_k || / || T_k || on [lo, hi]."""
    ctx = ps.ctx
    hi = ctx.grid.span[1] / 4 if hi is None else hi
    r = ctx.apply_H(ps.T[k + 1]) + ps.T[k]
    m = (ctx.y >= lo) & (ctx.y <= hi)
    num = max(np.max(np.abs(r.f1[m])), np.max(np.abs(r.f2[m])))
    den = max(np.max(np.abs(ps.T[k].f1[m])), np.max(np.abs(ps.T[k].f2[m])))
    return float(num / den)


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

@dataclass
class AdmissibilityReport:
    passed: bool
    position_ok: bool
    origin_slope: float
    origin_expected: int
    far_slope: float
    far_expected: float


def admissibility_check(ctx, p, deg, origin_window=(1e-3, 1e-2), far_window=None,
                        tol=0.1):
    """Numerical version of the admissibility definition.

    position: the component opposite to iota vanishes; origin: the leading
    power (log-log slope near 0) is at least 2*ceil((p1-iota)/2) + 1; far
    field: the fitted decay exponent is at most p2 - gamma - iota (+ tol).
    """
    y = ctx.y
    f = p.f2 if deg.iota else p.f1
    g = p.f1 if deg.iota else p.f2
    scale = max(np.max(np.abs(f)), 1e-300)
    position_ok = bool(np.max(np.abs(g)) <= 1e-12 * scale)
    if not position_ok or np.max(np.abs(f)) == 0.0:
        nan = float("nan")
        return AdmissibilityReport(False, False, nan, 0, nan, nan)
    lo, hi = origin_window
    lo = max(lo, y[0])
    e0 = 2 * math.ceil((deg.p1 - deg.iota) / 2) + 1
    s0 = loglog_slope(y, f, lo, hi)
    ymax = ctx.grid.span[1]
    fw = (ymax / 10, ymax / 2) if far_window is None else far_window
    sf = loglog_slope(y, f, *fw)
    ef = deg.p2 - ctx.gs.gamma - deg.iota
    ok = position_ok and s0 >= e0 - tol and sf <= ef + tol
    return AdmissibilityReport(bool(ok), position_ok, s0, e0, sf, ef)


# ---------------------------------------------------------------------------
# monomial algebra
# ---------------------------------------------------------------------------

def _add(poly, m, val):
    if m in poly:
        poly[m] = poly[m] + val
    else:
        poly[m] = val


def _unit(L, k):
    m = [0] * L
    m[k - 1] = 1
    return tuple(m)


def _poly_mul(a, b, maxdeg):
    out = {}
    for ma, va in a.items():
        da = mono_degree(ma)
        for mb, vb in b.items():
            if da + mono_degree(mb) > maxdeg:
                continue
            m = tuple(x + y for x, y in zip(ma, mb))
            _add(out, m, va * vb)
    return out


def _taylor_P(ps, k):
    """Weighted-degree-k part of sum_{j>=2} f^(j)(Q)/j! Theta_1^j (scalar poly)."""
    L = ps.L
    ctx = ps.ctx
    theta = {}
    for kk in range(2, L + 1, 2):
        _add(theta, _unit(L, kk), ps.T[kk].f1)
    for kk, S in ps.S.items():
        if kk % 2 == 0 and kk <= k - 2:
            for m, pr in S.terms.items():
                _add(theta, m, pr.f1)
    out = {}
    power = dict(theta)
    j = 1
    while True:
        j += 1
        power = _poly_mul(power, theta, k)
        if not power:
            break
        coef = 2.0**j * np.sin(2 * ctx.Q + j * np.pi / 2) / math.factorial(j)
        for m, v in power.items():
            if mono_degree(m) == k:
                _add(out, m, coef * v)
        if 2 * j > k:
            break
    return out


def _E_terms(ps, k):
    """E_k as a dict monomial -> RadialPair."""
    L = ps.L
    ctx = ps.ctx
    g = ctx.gs.gamma
    out = {}
    if k <= L:
        m = [0] * L
        m[0] += 1
        m[k - 1] += 1
        Tk = ps.T[k]
        _add(out, tuple(m), lambda_vec(ctx, Tk) - (k - g) * Tk)
    S = ps.S.get(k)
    if S is not None:
        for m, pr in S.terms.items():
            m1 = list(m)
            m1[0] += 1
            _add(out, tuple(m1), lambda_vec(ctx, pr))
            for j in range(1, L + 1):
                e = m[j - 1]
                if e == 0:
                    continue
                # -(j-gamma) b_1 b_j dS/db_j  ->  monomial m + e_1
                _add(out, tuple(m1), -(j - g) * e * pr)
                # + b_{j+1} dS/db_j           ->  monomial m - e_j + e_{j+1}
                if j + 1 <= L:
                    m2 = list(m)
                    m2[j - 1] -= 1
                    m2[j] += 1
                    _add(out, tuple(m2), e * pr)
    return out


def build_S_profiles(ps, ell=None):
    """Construct S_2 .. S_{L+2} by the tail-computation recursion."""
    ctx = ps.ctx
    L = ps.L
    y = ctx.y
    ps = replace(ps, S={}, ell=ps.ell if ell is None else ell)
    pref = (ps.d - 1) / (2 * y**2)
    zero = np.zeros(ctx.n)
    for k in range(2, L + 3):
        F = _E_terms(ps, k - 1)
        for m, v in _taylor_P(ps, k).items():
            _add(F, m, RadialPair(zero, pref * v))
        terms = {}
        for m, Fm in F.items():
            if mono_degree(m) != k:
                raise NumericalError(f"degree bookkeeping: {m} in F_{k}")
            Sm = -ctx.apply_Hinv(Fm)
            if np.max(np.abs(Sm.f1)) + np.max(np.abs(Sm.f2)) == 0.0:
                continue
            terms[m] = Sm
        ps.S[k] = HomogeneousProfile(terms, DegreeTag(k, k - 1, k % 2, k))
    return ps


# ---------------------------------------------------------------------------
# assembly and residual
# ---------------------------------------------------------------------------

def check_b(b, C=1e3):
    b = np.asarray(b, float)
    if not 0 < b[0] <= 0.1:
        raise ContractError(f"b_1 = {b[0]} outside (0, 0.1]")
    for k in range(1, len(b)):
        if abs(b[k]) > C * b[0] ** (k + 1):
            raise ContractError(f"|b_{k + 1}| exceeds the a-priori bound")


def _theta(ps, b, include_S=True):
    L = ps.L
    n = ps.ctx.n
    th = RadialPair.zeros(n)
    for k in range(1, L + 1):
        th = th + b[k - 1] * ps.T[k]
    if include_S:
        for S in ps.S.values():
            if S.terms:
                th = th + S.evaluate(b)
    return th


def _dtheta_db(ps, b, j, include_S=True):
    """d Theta / d b_j (1-based j)."""
    out = ps.T[j]
    if include_S:
        for S in ps.S.values():
            dS = S.derivative(j - 1, b)
            if dS is not None:
                out = out + dS
    return out


def cutoff_B1(ps, b1, smooth=4):
    return chi(ps.y / ps.B1(b1), smooth)


def assemble_Qb(ps, b, localize=True, include_S=True, check=True, smooth=4):
    """Q_b = (Q, 0) + [chi_{B1}] (sum b_k T_k + sum S_k)."""
    b = np.asarray(b, float)
    if np.all(b == 0):
        return RadialPair(ps.ctx.Q.copy(), np.zeros(ps.ctx.n))
    if check:
        check_b(b)
    th = _theta(ps, b, include_S)
    if localize:
        th = cutoff_B1(ps, b[0], smooth) * th
    return RadialPair(ps.ctx.Q + th.f1, th.f2)


def modulation_vector(ps, b, b_dot):
    """Mod_k = (b_k)_s + (k - gamma) b_1 b_k - b_{k+1}, b_{L+1} = 0."""
    b = np.asarray(b, float)
    k = np.arange(1, ps.L + 1)
    nxt = np.append(b[1:], 0.0)
    return np.asarray(b_dot, float) - (-(k - ps.ctx.gs.gamma) * b[0] * b + nxt)


def residual_Psib(ps, b, b_dot, lam_ratio=None, localize=True, include_S=True,
                  M_list=(5.0, 10.0, 20.0), smooth=4):
    """Psi_b = d_s Q_b + (-lambda_s/lambda) Lambda Q_b - F(Q_b) - [chi_{B1}] Mod.

    d_s acts through the b dependence (chain rule with b_dot, including the
    b_1 dependence of the cutoff).  The ground-state part of F is removed
    analytically and sin(2Q+2T) - sin(2Q) is evaluated as 2 cos(2Q+T) sin(T).
    Returns (Psi, {M: int_{y<=M} |Psi|^2 y^(d-1) dy}).
    """
    ctx = ps.ctx
    y = ctx.y
    d = ps.d
    b = np.asarray(b, float)
    b_dot = np.asarray(b_dot, float)
    lr = b[0] if lam_ratio is None else lam_ratio
    th = _theta(ps, b, include_S)
    ds_th = RadialPair.zeros(ctx.n)
    for j in range(1, ps.L + 1):
        if b_dot[j - 1] != 0.0:
            ds_th = ds_th + b_dot[j - 1] * _dtheta_db(ps, b, j, include_S)
    mod = modulation_vector(ps, b, b_dot)
    mod_pair = RadialPair.zeros(ctx.n)
    for j in range(1, ps.L + 1):
        if mod[j - 1] != 0.0:
            mod_pair = mod_pair + mod[j - 1] * _dtheta_db(ps, b, j, include_S)
    if localize:
        B1 = ps.B1(b[0])
        c = chi(y / B1, smooth)
        # d chi(y/B1)/d b1 with B1 = b1^-(1+eta)
        t = y / B1 - 1.0
        dsm = _smoothstep_prime(t, smooth)
        dchi = -dsm * (y / B1) * (1 + ps.eta) / b[0]
        ds_th = c * ds_th + (b_dot[0] * dchi) * th
        th = c * th
        mod_pair = c * mod_pair
    lam_th = lambda_vec(ctx, th)
    t1 = th.f1
    lap = ctx.d2(t1) + (d - 1) / y * ctx.d1(t1)
    nonlin = (d - 1) / (2 * y**2) * 2.0 * np.cos(2 * ctx.Q + t1) * np.sin(t1)
    psi1 = ds_th.f1 + lr * (ctx.LamQ + lam_th.f1) - th.f2
    psi2 = ds_th.f2 + lr * lam_th.f2 - (lap - nonlin)
    psi = RadialPair(psi1, psi2) - mod_pair
    norms = {float(M): float(ctx.integrate(psi.f1**2 + psi.f2**2, b=M)) for M in M_list}
    return psi, norms


def _smoothstep_prime(t, n):
    tt = np.clip(t, 0.0, 1.0)
    h = 1e-6
    inside = (t > 0) & (t < 1)
    out = np.zeros_like(tt)
    out[inside] = (smoothstep(tt[inside] + h, n) - smoothstep(tt[inside] - h, n)) / (2 * h)
    return out


def residual_scaling(ps, params, s_values=(40.0, 80.0, 160.0, 320.0), M=10.0,
                     include_S=True):
    """Fit sqrt(local norm at M) ~ b_1^p along b = b^e(s) with b_dot = rhs(b^e)."""
    from .bsystem import explicit_solution, rhs
    b1s, vals = [], []
    for s in s_values:
        b = explicit_solution(params, s)
        db, _, _ = rhs(params, b)
        _, norms = residual_Psib(ps, b, db, include_S=include_S, M_list=(M,))
        b1s.append(b[0])
        vals.append(math.sqrt(norms[float(M)]))
    slope = loglog_slope(np.array(b1s), np.array(vals))
    return slope, np.array(b1s), np.array(vals)
