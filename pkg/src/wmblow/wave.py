"""Method-of-lines solver for the radial wave-map equation

    u_tt = u_rr + (d-1)/r u_r - (d-1)/(2 r^2) sin(2u),

with diagnostics: energy, exact self-similar solutions, extraction of the
scale lambda and projection onto the modulated profiles Q_b.

Space: staggered uniform grid r_j = (j + 1/2) h, fourth-order centered
differences on the even field u/r (equivalently, odd extension of u across
r = 0), quartic extrapolation at r_max.  The outer
boundary is never meant to matter: runs are capped so that the support of the
solution (or the observation window) stays inside the light cone of the data.
Time: classical RK4.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.optimize import curve_fit, minimize_scalar

from .linop import chi
from .numerics import (ContractError, NumericalError, RadialField, RadialGrid,
                       loglog_slope)


ANGLE_BOUND = 100.0


class BlowupEvent(NumericalError):
    """Raised when the discrete solution stops being finite or the angle
    leaves [-ANGLE_BOUND, ANGLE_BOUND] (the resolved dynamics stay within a
    few multiples of pi)."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ProjectionError(NumericalError):
    pass


class ResolutionExhausted(NumericalError):
    pass


class EnergyDivergenceWarning(RuntimeWarning):
    pass


# ---------------------------------------------------------------------------
# configuration and state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """Run parameters.  ``initial`` is a descriptor dict with key ``kind`` in
    {ground-state, localized-Qb, self-similar, custom}; ``support`` is the
    radius that must stay out of reach of the outer boundary."""

    d: int = 7
    r_max: float = 80.0
    N_r: int = 8000
    cfl: float = 0.5
    t_end: float = 20.0
    boundary: str = "lightcone"
    initial: dict = field(default_factory=lambda: {"kind": "ground-state", "lam": 1.0})
    support: float = 50.0

    def __post_init__(self):
        if self.cfl <= 0 or self.cfl > 0.5:
            raise ContractError("CFL number must lie in (0, 0.5]")
        if self.N_r < 16:
            raise ContractError("N_r too small")
        if self.boundary != "lightcone":
            raise ContractError("only the light-cone boundary policy is available")
        if self.t_end >= self.r_max - self.support:
            raise ContractError("run horizon violates light-cone safety: "
                                f"t_end={self.t_end} >= r_max - support = "
                                f"{self.r_max - self.support}")

    @property
    def h(self):
        return self.r_max / self.N_r

    @property
    def dt(self):
        return self.cfl * self.h

    @classmethod
    def from_dict(cls, cfg):
        known = {k: cfg[k] for k in ("d", "r_max", "N_r", "cfl", "t_end", "boundary",
                                     "initial", "support") if k in cfg}
        extra = set(cfg) - set(known) - {"ell", "L", "s0", "M", "project_every", "seed"}
        if extra:
            raise ContractError(f"unknown config keys: {sorted(extra)}")
        return cls(**known)


@dataclass(frozen=True, eq=False)
class WaveState:
    t: float
    u: RadialField
    ut: RadialField

    def __post_init__(self):
        if not (np.all(np.isfinite(self.u.values)) and np.all(np.isfinite(self.ut.values))):
            raise BlowupEvent(f"non-finite values at t={self.t}", self)

    @property
    def r(self):
        return self.u.grid.y

    @property
    def h(self):
        return self.r[1] - self.r[0]

    @property
    def d(self):
        return self.u.grid.d


def make_grid(d, r_max, N_r):
    """Staggered nodes r_j = (j + 1/2) h, h = r_max / N_r."""
    h = r_max / N_r
    return RadialGrid.uniform(0.5 * h, r_max - 0.5 * h, N_r - 1, d, order=4)


def make_state(grid, u, ut, t=0.0):
    return WaveState(t, RadialField(grid, np.array(u, float)),
                     RadialField(grid, np.array(ut, float)))


@dataclass
class ModulationTrack:
    t: list = field(default_factory=list)
    s: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    b: list = field(default_factory=list)
    resid: list = field(default_factory=list)
    grad: list = field(default_factory=list)
    energy: list = field(default_factory=list)

    def append(self, t, s, lam, b, resid, grad=float("nan"), energy=float("nan")):
        if not lam > 0:
            raise ContractError("lambda must stay positive")
        if self.t and t <= self.t[-1]:
            raise ContractError("track times must increase")
        self.t.append(float(t))
        self.s.append(float(s))
        self.lam.append(float(lam))
        self.b.append(np.asarray(b, float).copy())
        self.resid.append(float(resid))
        self.grad.append(float(grad))
        self.energy.append(float(energy))

    def arrays(self):
        return (np.array(self.t), np.array(self.s), np.array(self.lam),
                np.array(self.b), np.array(self.resid))

    def __len__(self):
        return len(self.t)


# ---------------------------------------------------------------------------
# spatial operator and time stepping
# ---------------------------------------------------------------------------
#
# Nodes sit at r_j = (j + 1/2) h.  The unknown is stored as u but the spatial
# operator acts on v = u/r, which is even in r:
#
#   v_tt = v_rr + (d+1)/r v_r - (d-1)/(2 r^3) [sin(2 r v) - 2 r v].
#
# Node-centred or u-based fourth-order stencils have axis modes growing like
# 1/h; the staggered even form has an O(1) growth rate which a weak
# Kreiss-Oliger term (KO_EPS h^5 d^6/64) removes.

KO_EPS = 0.1


def _extend(v, nghost=3):
    """Even ghosts across r = 0 (staggered), quartic extrapolation at r_max."""
    n = len(v)
    e = np.empty(n + 2 * nghost)
    e[nghost:n + nghost] = v
    for i in range(nghost):
        e[nghost - 1 - i] = v[i]
    for i in range(nghost):
        j = n + nghost + i
        e[j] = 5 * e[j - 1] - 10 * e[j - 2] + 10 * e[j - 3] - 5 * e[j - 4] + e[j - 5]
    return e


def _d1d2(e, h, g=3):
    c = slice(g, len(e) - g)
    p1 = e[g + 1:len(e) - g + 1]
    m1 = e[g - 1:len(e) - g - 1]
    p2 = e[g + 2:len(e) - g + 2] if g > 2 else e[g + 2:]
    m2 = e[g - 2:len(e) - g - 2]
    d1 = (-p2 + 8 * p1 - 8 * m1 + m2) / (12 * h)
    d2 = (-p2 + 16 * p1 - 30 * e[c] + 16 * m1 - m2) / (12 * h * h)
    return d1, d2


def _ko(e, h, g=3):
    n = len(e) - 2 * g
    out = e[0:n] - 6 * e[1:n + 1] + 15 * e[2:n + 2] - 20 * e[3:n + 3] \
        + 15 * e[4:n + 4] - 6 * e[5:n + 5] + e[6:n + 6]
    return KO_EPS / (64 * h) * out


def _sin_defect(x):
    """sin(x) - x without cancellation for small x."""
    out = np.sin(x) - x
    m = np.abs(x) < 1e-2
    xm = x[m]
    x2 = xm * xm
    out[m] = xm * x2 * (-1 / 6 + x2 * (1 / 120 - x2 / 5040))
    return out


def radial_derivatives(u, h):
    """(u_r, u_rr) on the staggered grid from the even extension of u/r."""
    r = (np.arange(len(u)) + 0.5) * h
    v = u / r
    v1, v2 = _d1d2(_extend(v), h)
    return v + r * v1, 2 * v1 + r * v2


def wave_rhs(u, ut, r, d):
    h = r[1] - r[0]
    v = u / r
    w = ut / r
    ev = _extend(v)
    ew = _extend(w)
    v1, v2 = _d1d2(ev, h)
    vtt = v2 + (d + 1) / r * v1 - (d - 1) / (2 * r**3) * _sin_defect(2 * r * v)
    return r * (w + _ko(ev, h)), r * (vtt + _ko(ew, h))


def step(state, dt):
    """One RK4 step of the first-order system (u, u_t)."""
    h = state.h
    if dt > 0.5 * h * (1 + 1e-12):
        raise ContractError(f"CFL violated: dt/h = {dt / h}")
    r = state.r
    d = state.d
    u0, v0 = state.u.values, state.ut.values
    k1u, k1v = wave_rhs(u0, v0, r, d)
    k2u, k2v = wave_rhs(u0 + 0.5 * dt * k1u, v0 + 0.5 * dt * k1v, r, d)
    k3u, k3v = wave_rhs(u0 + 0.5 * dt * k2u, v0 + 0.5 * dt * k2v, r, d)
    k4u, k4v = wave_rhs(u0 + dt * k3u, v0 + dt * k3v, r, d)
    u = u0 + dt / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
    v = v0 + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise BlowupEvent(f"non-finite values after step at t={state.t}", state)
    if np.max(np.abs(u)) > ANGLE_BOUND:
        raise BlowupEvent(f"angle exceeds {ANGLE_BOUND} after step at t={state.t}", state)
    g = state.u.grid
    return WaveState(state.t + dt, RadialField(g, u), RadialField(g, v))


def evolve(state, t_end, cfl=0.5, callback=None, every=1):
    """Step to t_end with dt <= cfl h (last step shortened)."""
    h = state.h
    nsteps = max(1, int(math.ceil((t_end - state.t) / (cfl * h) - 1e-9)))
    dt = (t_end - state.t) / nsteps
    for i in range(nsteps):
        state = step(state, dt)
        if callback is not None and (i + 1) % every == 0:
            if callback(state) is False:
                break
    return state


# ---------------------------------------------------------------------------
# energy
# ---------------------------------------------------------------------------

def energy_density(state):
    r = state.r
    d = state.d
    u, ut = state.u.values, state.ut.values
    ur, _ = radial_derivatives(u, state.h)
    return ut**2 + ur**2 + (d - 1) * np.sin(u) ** 2 / r**2


def energy(state, tail_fraction=0.05, warn_ratio=1e-3):
    """int (u_t^2 + u_r^2 + (d-1) sin^2(u)/r^2) r^(d-1) dr on the grid.

    Warns when the outermost ``tail_fraction`` of the domain carries more than
    ``warn_ratio`` of the total: the integral then does not converge (raw Q
    data, for instance)."""
    g = state.u.grid
    e = energy_density(state)
    total = g.integrate(e, power=g.d - 1)
    r_max = g.span[1]
    tail = g.integrate(e, power=g.d - 1, a=(1 - tail_fraction) * r_max)
    if total > 0 and tail > warn_ratio * total:
        warnings.warn("energy integral not converged at r_max (divergent tail)",
                      EnergyDivergenceWarning, stacklevel=2)
    return float(total)


def bump(r, center, width, amp=1.0):
    """C-infinity bump supported in |r - center| < width."""
    x = (np.asarray(r, float) - center) / width
    out = np.zeros_like(x)
    m = np.abs(x) < 1
    out[m] = amp * np.exp(1.0 - 1.0 / (1.0 - x[m] ** 2))
    return out


def rescale(state, lam):
    """u_lam(r) = u(r/lam), (u_t)_lam(r) = u_t(r/lam)/lam, by spline interpolation."""
    r = state.r
    su = make_interp_spline(r, state.u.values, k=5)
    sv = make_interp_spline(r, state.ut.values, k=5)
    x = r / lam
    inside = x <= r[-1]
    u = np.zeros_like(r)
    v = np.zeros_like(r)
    u[inside] = su(x[inside])
    v[inside] = sv(x[inside]) / lam
    return make_state(state.u.grid, u, v, state.t)


# ---------------------------------------------------------------------------
# exact self-similar solution
# ---------------------------------------------------------------------------

def self_similar_data(grid, d, T_blow, t=0.0):
    from .ground_state import phi0
    r = grid.y
    tau = T_blow - t
    y = r / tau
    a = 1.0 / math.sqrt(d - 2)
    dphi = 2 * a / (1 + (a * y) ** 2)
    return phi0(y, d), dphi * y / tau


@dataclass
class SelfSimilarReport:
    sup_error: float
    window: float
    grad_slope: float
    ode_residual: float
    times: np.ndarray
    grad0: np.ndarray
    type1_product: np.ndarray


def self_similar_test(d, T_blow, t_end, r_max=4.0, N_r=4000, window=1.0, cfl=0.5,
                      grad_times=None):
    """Evolve the exact solution phi0(r/(T-t)) and compare at t_end.

    Also records d_r u(0, t) at ``grad_times`` for the type-I rate fit and the
    self-similar ODE residual of the initial snapshot."""
    from .ground_state import self_similar_residual
    if t_end >= T_blow:
        raise ContractError("t_end must precede the blowup time")
    if t_end >= r_max - window:
        raise ContractError("observation window inside the boundary light cone")
    grid = make_grid(d, r_max, N_r)
    u0, v0 = self_similar_data(grid, d, T_blow)
    state = make_state(grid, u0, v0)
    res_grid = RadialGrid.uniform(1e-3, 2.0, 2000, d, order=8)
    ode_res = float(np.max(np.abs(self_similar_residual(d, res_grid).values)))
    grad_times = [] if grad_times is None else sorted(grad_times)
    times, grads = [], []
    for tg in grad_times + [t_end]:
        if tg > t_end:
            break
        state = evolve(state, tg, cfl)
        times.append(state.t)
        grads.append(gradient_at_origin(state))
    times = np.array(times)
    grads = np.array(grads)
    ex, _ = self_similar_data(grid, d, T_blow, state.t)
    m = grid.y <= window
    err = float(np.max(np.abs(state.u.values - ex)[m]))
    slope = loglog_slope(T_blow - times, grads) if len(times) >= 2 else float("nan")
    return SelfSimilarReport(err, window, slope, ode_res, times, grads,
                             (T_blow - times) * grads)


# ---------------------------------------------------------------------------
# scale extraction and modulation
# ---------------------------------------------------------------------------

def gradient_at_origin(state):
    """u_r(0) = v(0), interpolated from the even extension of v = u/r."""
    v = state.u.values[:2] / state.r[:2]
    return float((9 * v[0] - v[1]) / 8)


def extract_lambda(state, gs, refine=True, window=10.0):
    """lambda = Q'(0)/u_r(0) = 1/u_r(0), refined by a least-squares fit of u
    against Q(r/lambda) on r <= window*lambda."""
    g0 = gradient_at_origin(state)
    if not g0 > 0:
        raise NumericalError("state not Q-dominated: u_r(0) <= 0")
    lam0 = 1.0 / g0
    if not refine:
        return lam0
    r = state.r
    u = state.u.values

    def cost(loglam):
        lam = math.exp(loglam)
        m = r <= window * lam
        Q, _, _ = gs.at(r[m] / lam)
        return float(np.sum((u[m] - Q) ** 2))

    res = minimize_scalar(cost, bracket=(math.log(lam0) - 0.05, math.log(lam0) + 0.05),
                          tol=1e-12)
    return float(math.exp(res.x))


def profile_state(grid, ps, b, lam=1.0, truncate=None, localize=True, smooth=4):
    """Physical data u(r) = Q_b,1(r/lam), u_t = Q_b,2(r/lam)/lam, optionally
    multiplied by chi(r/truncate) so the data has compact support."""
    from .profiles import assemble_Qb
    Qb = assemble_Qb(ps, b, localize=localize)
    y = ps.y
    s1 = make_interp_spline(y, Qb.f1, k=5)
    s2 = make_interp_spline(y, Qb.f2, k=5)
    r = grid.y
    x = r / lam
    if np.any(x > y[-1]) and truncate is None:
        raise ContractError("profile grid too short for this domain; truncate the data")
    x = np.minimum(x, y[-1])
    u = s1(x)
    v = s2(x) / lam
    if truncate is not None:
        c = chi(r / truncate, smooth)
        u *= c
        v *= c
    return make_state(grid, u, v)


class Projector:
    """Newton solver for (lambda, b) from <w - Q_b, (H*)^k Phi_M> = 0, k=0..L,
    with w(y) = (u(lambda y), lambda u_t(lambda y))."""

    def __init__(self, ps, M=10.0, smooth=None):
        self.ps = ps
        self.ctx = ps.ctx
        self.M = M
        L = ps.L
        Phi, _ = self.ctx.build_Phi_M(M, L) if smooth is None else \
            self.ctx.build_Phi_M(M, L, smooth)
        self.psi = [self.ctx.apply_Hstar_k(Phi, k) for k in range(L + 1)]
        self.N = self.ctx.inner(self.ctx.lamQ_pair(), Phi)
        y = self.ctx.y
        self.mask = y <= 2 * M * 1.05
        self.y = y[self.mask]
        self.w = self.ctx.grid.nodes ** (self.ctx.d - 1)

    def _inner(self, f1, f2, k):
        """<(f1, f2), psi_k> restricted to the support of Phi_M."""
        p = self.psi[k]
        m = self.mask
        v = np.zeros(self.ctx.n)
        v[m] = f1 * p.f1[m] + f2 * p.f2[m]
        return self.ctx.grid.integrate(v, power=self.ctx.d - 1)

    def _w(self, splines, lam):
        su, sv = splines
        x = lam * self.y
        return su(x), lam * sv(x)

    def residual(self, splines, x):
        from .profiles import assemble_Qb
        lam = math.exp(x[0])
        b = x[1:]
        w1, w2 = self._w(splines, lam)
        Qb = assemble_Qb(self.ps, b, check=False)
        m = self.mask
        q1, q2 = w1 - Qb.f1[m], w2 - Qb.f2[m]
        return np.array([self._inner(q1, q2, k) for k in range(self.ps.L + 1)]) / self.N, (q1, q2)

    def project(self, state, guess, tol=1e-8, max_iter=20):
        r = state.r
        lam_g = guess[0]
        if 2.1 * self.M * lam_g > r[-1]:
            raise ProjectionError("Phi_M support leaves the computational domain")
        splines = (make_interp_spline(r, state.u.values, k=5),
                   make_interp_spline(r, state.ut.values, k=5))
        x = np.concatenate([[math.log(lam_g)], np.asarray(guess[1:], float)])
        scale = np.array([abs(self._inner(*self._w(splines, lam_g), k)) / abs(self.N)
                          for k in range(self.ps.L + 1)])
        scale = np.maximum(scale, 1.0)
        for it in range(max_iter):
            G, q = self.residual(splines, x)
            if np.all(np.abs(G) <= tol * scale):
                return math.exp(x[0]), x[1:].copy(), q, float(np.max(np.abs(G) / scale))
            J = np.empty((len(x), len(x)))
            for j in range(len(x)):
                hj = 1e-6 if j == 0 else 1e-7
                xp = x.copy()
                xp[j] += hj
                xm = x.copy()
                xm[j] -= hj
                J[:, j] = (self.residual(splines, xp)[0] - self.residual(splines, xm)[0]) / (2 * hj)
            dx = np.linalg.solve(J, -G)
            x = x + dx
            if not np.all(np.isfinite(x)) or not 0 < x[1] < 0.5:
                break
        raise ProjectionError("Newton projection did not converge (left the trapped regime)")


def modulation_project(state, gs, ps, M=10.0, L=None, guess=None, projector=None):
    """Return (lambda, b, (q1, q2), relative residual); q is on y <= 2.1 M."""
    if L is not None and L != ps.L:
        raise ContractError("L must match the profile set")
    proj = Projector(ps, M) if projector is None else projector
    if guess is None:
        lam = extract_lambda(state, gs, refine=False)
        b = np.zeros(ps.L)
        b[0] = 0.05
        guess = np.concatenate([[lam], b])
    return proj.project(state, guess)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def prepared_run(ps, params, s0, cfg, M=10.0, project_every=None, ds_max=None,
                 truncate=None, stop_lambda_cells=10.0):
    """Evolve Q_{b^e(s0)} (lambda = 1) and project periodically.

    Returns (ModulationTrack, final state, status) where status is 'done',
    'resolution' (lambda below stop_lambda_cells grid cells) or 'projection'.
    The renormalized time is s = s0 + int dt/lambda (trapezoid rule).
    """
    from .bsystem import explicit_solution
    gs = ps.ctx.gs
    grid = make_grid(cfg.d, cfg.r_max, cfg.N_r)
    b0 = explicit_solution(params, s0)
    truncate = cfg.support / 2 if truncate is None else truncate
    state = profile_state(grid, ps, b0, 1.0, truncate=truncate)
    proj = Projector(ps, M)
    track = ModulationTrack()
    lam, b, _, res = proj.project(state, np.concatenate([[1.0], b0]))
    track.append(0.0, s0, lam, b, res, gradient_at_origin(state), energy(state))
    every = project_every or max(1, int(round(0.25 / cfg.dt)))
    status = {"value": "done"}
    h = cfg.h

    def cb(st):
        lam_prev = track.lam[-1]
        try:
            lam, b, _, res = proj.project(st, np.concatenate([[lam_prev], track.b[-1]]))
        except (ProjectionError, NumericalError):
            status["value"] = "projection"
            return False
        dt = st.t - track.t[-1]
        s = track.s[-1] + 0.5 * dt * (1 / lam + 1 / lam_prev)
        track.append(st.t, s, lam, b, res, gradient_at_origin(st), energy(st))
        if ds_max is not None and s - s0 >= ds_max:
            status["value"] = "done"
            return False
        if lam < stop_lambda_cells * h:
            status["value"] = "resolution"
            return False
        return True

    state = evolve(state, cfg.t_end, cfg.cfl, cb, every)
    return track, state, status["value"]


def bsystem_tracking(track, params):
    """max relative deviation of projected b_1(s) from c_1/s along the track."""
    from .bsystem import explicit_solution
    t, s, lam, b, _ = track.arrays()
    ref = np.array([explicit_solution(params, si)[0] for si in s])
    dev = np.abs(b[:, 0] - ref) / ref
    return float(np.max(dev)), s, b[:, 0], ref


def fit_blowup_time(t, lam, window=None):
    """Fit lambda = c (T - t)^p on the window; returns (T, p, c).

    The initial guess extrapolates 1/||u_r|| ~ lambda linearly in t over the
    last third of the window."""
    t = np.asarray(t, float)
    lam = np.asarray(lam, float)
    if window is not None:
        m = (t >= window[0]) & (t <= window[1])
        t, lam = t[m], lam[m]
    k = max(3, len(t) // 3)
    A = np.polyfit(t[-k:], lam[-k:], 1)
    T0 = -A[1] / A[0] if A[0] < 0 else t[-1] * 1.5
    T0 = max(T0, t[-1] * 1.001 + 1e-6)

    def model(tt, logc, p, T):
        return logc + p * np.log(np.maximum(T - tt, 1e-300))

    p0 = [math.log(lam[0]) - 1.0 * math.log(T0 - t[0]), 1.0, T0]
    lower = [-np.inf, 0.1, t[-1] * (1 + 1e-9) + 1e-9]
    try:
        popt, _ = curve_fit(model, t, np.log(lam), p0=p0,
                            bounds=(lower, [np.inf, 10.0, 100 * t[-1] + 100]), maxfev=20000)
    except RuntimeError:
        return T0, float("nan"), float("nan")
    return float(popt[2]), float(popt[1]), float(math.exp(popt[0]))


def run_blowup_experiment(cfg, ell, L=None, s0=50.0, M=10.0, ps=None):
    """Prepared-data run; returns (ModulationTrack, rate report dict)."""
    from .bsystem import BParams
    from .ground_state import solve_ground_state
    from .linop import LinOpContext
    from .profiles import build_S_profiles, make_T_profiles
    L = ell if L is None else L
    if ps is None:
        gs = solve_ground_state(cfg.d)
        ps = build_S_profiles(make_T_profiles(LinOpContext(gs), L, ell))
    params = BParams.make(ell, L, d=cfg.d)
    track, state, status = prepared_run(ps, params, s0, cfg, M)
    t, s, lam, b, _ = track.arrays()
    report = {"d": cfg.d, "ell": ell, "L": L, "s0": s0, "status": status,
              "expected_exponent": ell / ps.ctx.gs.gamma, "n_samples": len(t)}
    if len(t) >= 6:
        T, p, c = fit_blowup_time(t, lam)
        rem = T - t
        decades = float(np.log10(rem[0] / rem[-1])) if rem[-1] > 0 else float("nan")
        grad = np.array(track.grad)
        report.update({"T_hat": T, "exponent": p, "prefactor": c,
                       "window_decades": decades,
                       "short_window": bool(not decades >= 1.0),
                       "lambda_final": float(lam[-1]),
                       "type2_indicator_start": float(rem[0] * grad[0]),
                       "type2_indicator_end": float(rem[-1] * grad[-1])})
    E = np.array(track.energy)
    report["energy_drift"] = float(np.max(np.abs(E - E[0])) / abs(E[0]))
    return track, report
