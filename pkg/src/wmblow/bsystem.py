"""The finite-dimensional modulation system

    (b_k)_s = -(k - gamma) b_1 b_k + b_{k+1},   1 <= k <= L,  b_{L+1} = 0,
    lambda_s / lambda = -b_1,   dt/ds = lambda.

Explicit solution b_k = c_k / s^k with c_1 = l/(l-gamma) and
c_{k+1} = -gamma (l-k) c_k / (l-gamma).

Integration is carried out in tau = log s with the renormalized unknowns
U_k = s^k b_k - c_k (k <= l) and W_k = s^k b_k (k > l).  In these variables the
system is autonomous,

    dU_k/dtau = [k - (k-gamma) c_1] U_k - (k-gamma) c_k U_1 - (k-gamma) U_1 U_k + U_{k+1},

so the linearization is the constant matrix A_l and the explicit solution is
the origin.  The nonlinear terms are kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ground_state import structural_constants
from .numerics import ContractError, NumericalError, eig_small, loglog_slope, solve_ivp


@dataclass(frozen=True)
class BParams:
    ell: int
    L: int
    gamma: float
    c: np.ndarray = field(repr=False)

    @classmethod
    def make(cls, ell, L=None, gamma=None, d=None):
        if gamma is None:
            if d is None:
                raise ContractError("give gamma or d")
            gamma = structural_constants(d)[0]
        L = ell if L is None else L
        if ell <= gamma:
            raise ContractError("need ell > gamma")
        if L < ell:
            raise ContractError("need L >= ell")
        c = np.zeros(L)
        c[0] = ell / (ell - gamma)
        for k in range(1, ell):
            c[k] = -gamma * (ell - k) * c[k - 1] / (ell - gamma)
        return cls(ell, L, float(gamma), c)


@dataclass
class BState:
    s: float
    b: np.ndarray
    lam: float = 1.0
    t: float = 0.0


@dataclass(frozen=True)
class SpectralData:
    A: np.ndarray
    P: np.ndarray
    D: np.ndarray


def explicit_solution(params, s):
    """b^e_k(s) = c_k / s^k."""
    k = np.arange(1, params.L + 1)
    return params.c / float(s) ** k


def rhs(params, b, lam=1.0):
    """(db/ds, dlambda/ds, dt/ds) of the modulation system."""
    b = np.asarray(b, float)
    k = np.arange(1, params.L + 1)
    nxt = np.append(b[1:], 0.0)
    db = -(k - params.gamma) * b[0] * b + nxt
    return db, -b[0] * lam, lam


def build_A_ell(ell, gamma):
    """Linearization matrix around the explicit solution and its diagonalization.

    Entries: a_11 = gamma(ell-1)/(ell-gamma) - (1-gamma) c_1,
    a_ii = gamma(ell-i)/(ell-gamma), a_{i,i+1} = 1, and first-column entries
    a_{i,1} = -(i-gamma) c_i for i >= 2.  P satisfies A = P^-1 D P.
    """
    if ell < 2 or gamma >= ell:
        raise ContractError("need ell >= 2 and gamma < ell")
    p = BParams.make(ell, ell, gamma)
    c = p.c
    A = np.zeros((ell, ell))
    A[0, 0] = gamma * (ell - 1) / (ell - gamma) - (1 - gamma) * c[0]
    for i in range(2, ell + 1):
        A[i - 1, i - 1] = gamma * (ell - i) / (ell - gamma)
        A[i - 1, 0] = -(i - gamma) * c[i - 1]
    for i in range(1, ell):
        A[i - 1, i] = 1.0
    vals, vecs = eig_small(A)
    if np.iscomplexobj(vals):
        raise NumericalError("A_ell has complex spectrum")
    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]
    P = np.linalg.inv(vecs)
    return SpectralData(A, P, vals)


def expected_spectrum(ell, gamma):
    return np.array([-1.0] + [k * gamma / (ell - gamma) for k in range(2, ell + 1)])


# ---------------------------------------------------------------------------
# renormalized variables
# ---------------------------------------------------------------------------

def b_to_U(params, b, s):
    """U_k = s^k b_k - c_k (c_k = 0 beyond ell, so the same formula gives W_k)."""
    k = np.arange(1, params.L + 1)
    return float(s) ** k * np.asarray(b, float) - params.c


def U_to_b(params, U, s):
    k = np.arange(1, params.L + 1)
    return (np.asarray(U, float) + params.c) / float(s) ** k


def change_vars(params, b, s, direction="V", spec=None):
    """Map b to U (first ell entries) or to V = P U; direction 'U', 'V'."""
    U = b_to_U(params, b, s)[: params.ell]
    if direction == "U":
        return U
    if direction == "V":
        spec = build_A_ell(params.ell, params.gamma) if spec is None else spec
        return spec.P @ U
    raise ContractError("direction must be 'U' or 'V'")


def V_to_b(params, V, s, tail=None, spec=None):
    """Inverse of change_vars; ``tail`` gives s^k b_k for k > ell."""
    spec = build_A_ell(params.ell, params.gamma) if spec is None else spec
    U = np.zeros(params.L)
    U[: params.ell] = np.linalg.solve(spec.P, np.asarray(V, float))
    if tail is not None:
        U[params.ell:] = tail
    return U_to_b(params, U, s)


def renormalized_rhs(params):
    """dU/dtau for the full U vector (length L)."""
    L, g, c = params.L, params.gamma, params.c
    k = np.arange(1, L + 1)
    lin = k - (k - g) * c[0]

    def f(U):
        nxt = np.append(U[1:], 0.0)
        return lin * U - (k - g) * c * U[0] - (k - g) * U[0] * U + nxt
    return f


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class BTrajectory:
    s: np.ndarray
    b: np.ndarray          # shape (L, n)
    lam: np.ndarray
    t: np.ndarray
    U: np.ndarray
    exit_s: float | None = None
    sol: object = None


def integrate_trajectory(params, state0, s_end, tol=1e-12, n_out=400, exit_bound=None,
                         fixed_step=None):
    """Integrate the full nonlinear system from state0 to s_end.

    ``exit_bound`` (optional) is a factor C: the run stops when some
    |s^k b_k - c_k| exceeds C * |c_1| (the a-priori region |b_k| <~ b_1^k is left).
    """
    f = renormalized_rhs(params)
    s0 = state0.s
    U0 = b_to_U(params, state0.b, s0)
    z0 = np.concatenate([U0, [math.log(state0.lam), state0.t]])
    L = params.L
    c1 = params.c[0]

    def F(tau, z):
        U = z[:L]
        s = math.exp(tau)
        return np.concatenate([f(U), [-(c1 + U[0]), s * math.exp(z[L])]])

    events = None
    if exit_bound is not None:
        def leave(tau, z):
            return exit_bound * abs(c1) - np.max(np.abs(z[:L]))
        leave.terminal = True
        events = [leave]
    tau0, tau1 = math.log(s0), math.log(s_end)
    t_eval = np.linspace(tau0, tau1, n_out)
    tr = solve_ivp(F, z0, (tau0, tau1), tol=tol, atol=tol * 1e-3, t_eval=t_eval,
                   events=events, dense=True, fixed_step=fixed_step)
    s = np.exp(tr.t)
    U = tr.y[:L]
    b = (U + params.c[:, None]) / s[None, :] ** np.arange(1, L + 1)[:, None]
    exit_s = None
    if tr.t_events is not None and len(tr.t_events[0]):
        exit_s = float(np.exp(tr.t_events[0][0]))
    return BTrajectory(s, b, np.exp(tr.y[L]), tr.y[L + 1], U, exit_s, tr.sol)


def aitken_limit(t1, t2, t3):
    """Aitken/Richardson limit of a geometrically converging sequence."""
    d1, d2 = t2 - t1, t3 - t2
    den = d2 - d1
    if den == 0:
        return t3
    return t3 - d2 * d2 / den


def remaining_time(params, traj):
    """T - t(s) along a trajectory, without cancellation.

    The tail beyond the last point is extrapolated with the local exponent,
    int_s^inf lambda ds ~ lambda s / (c_1 + U_1 - 1), and the remaining time is
    then integrated backward in tau, d(T-t)/dtau = -s lambda.
    """
    L = params.L
    tau_end = math.log(traj.s[-1])
    z_end = traj.sol(tau_end)
    p_end = params.c[0] + z_end[0]
    if p_end <= 1:
        raise NumericalError("lambda does not decay fast enough for a finite T")
    lam_end = math.exp(z_end[L])
    tail = lam_end * traj.s[-1] / (p_end - 1.0)

    def F(tau, R):
        return [-math.exp(tau) * math.exp(traj.sol(tau)[L])]
    taus = np.log(traj.s)
    tr = solve_ivp(F, [tail], (tau_end, taus[0]), tol=1e-13, atol=1e-300,
                   t_eval=taus[::-1])
    return tr.y[0][::-1], traj.t[-1] + tail


def estimate_T(params, traj):
    """Blowup time: last t plus the extrapolated tail of int lambda ds."""
    return remaining_time(params, traj)[1]


def blowup_law_fits(params, s0=20.0, s_end=None, tol=1e-12):
    """Fitted slopes of log lambda vs log s and of log lambda vs log(T - t)."""
    s_end = 1e4 * s0 if s_end is None else s_end
    st = BState(s0, explicit_solution(params, s0))
    tr = integrate_trajectory(params, st, s_end, tol=tol, n_out=2000)
    R, T = remaining_time(params, tr)
    m = tr.s >= 2 * s0
    slope_s = loglog_slope(tr.s[m], tr.lam[m])
    slope_t = loglog_slope(R[m], tr.lam[m])
    return dict(slope_s=slope_s, slope_t=slope_t, T=T, remaining=R, trajectory=tr,
                expected_s=-params.ell / (params.ell - params.gamma),
                expected_t=params.ell / params.gamma)


# ---------------------------------------------------------------------------
# shooting over the unstable directions
# ---------------------------------------------------------------------------

@dataclass
class ShotResult:
    trapped: bool
    exit_s: float | None
    exit_coord: int | None
    exit_sign: int
    exit_derivative: float | None


@dataclass
class ShootingResult:
    V0: np.ndarray
    levels: list
    widths: list
    rejected: list
    horizon: float


class Shooter:
    """Exit analysis for the box |V_k(s)| <= s^-beta, k = 2..ell (unstable).

    Initial data at s0: V_1 (stable) and the tail W_{ell+1..L} are fixed; the
    unstable coordinates are the shooting parameters.  The integration uses a
    fixed step in tau so the end state is a smooth function of the parameters.
    """

    def __init__(self, params, s0, beta, V1=0.0, tail=None, dtau=1e-2):
        self.p = params
        self.s0 = float(s0)
        self.beta = float(beta)
        self.spec = build_A_ell(params.ell, params.gamma)
        self.V1 = float(V1)
        self.tail = np.zeros(params.L - params.ell) if tail is None else np.asarray(tail, float)
        self.dtau = dtau
        self.f = renormalized_rhs(params)

    def U0(self, unstable):
        V = np.concatenate([[self.V1], np.asarray(unstable, float)])
        U = np.zeros(self.p.L)
        U[: self.p.ell] = np.linalg.solve(self.spec.P, V)
        U[self.p.ell:] = self.tail
        return U

    def _V(self, U):
        return self.spec.P @ U[: self.p.ell]

    def exit_derivative(self, U, s):
        """d/ds sum_{k unstable} s^(2 beta) V_k^2 at the state U."""
        V = self._V(U)
        Vdot = self.spec.P @ self.f(U)[: self.p.ell] / s
        b = self.beta
        vu, vdu = V[1:], Vdot[1:]
        return float(np.sum(2 * b * s ** (2 * b - 1) * vu**2 + 2 * s ** (2 * b) * vu * vdu))

    def shoot(self, unstable, s_end):
        ell = self.p.ell
        P = self.spec.P
        b = self.beta
        f = self.f
        n_u = ell - 1

        def F(tau, U):
            return f(U)

        evs = []
        for j in range(n_u):
            for sg in (1.0, -1.0):
                def ev(tau, U, j=j, sg=sg):
                    return np.exp(-b * tau) - sg * (P[j + 1] @ U[:ell])
                ev.terminal = True
                ev.direction = -1
                evs.append(ev)
        tau0, tau1 = math.log(self.s0), math.log(s_end)
        U0 = self.U0(unstable)
        V0 = self._V(U0)[1:]
        edge = np.abs(V0) >= self.s0 ** -b * (1 - 1e-12)
        if edge.any():
            j = int(np.argmax(edge))
            return ShotResult(False, self.s0, j + 2, int(np.sign(V0[j])),
                              self.exit_derivative(U0, self.s0))
        tr = solve_ivp(F, U0, (tau0, tau1), events=evs,
                       fixed_step=self.dtau, dense=False)
        for i, te in enumerate(tr.t_events):
            if len(te):
                s_exit = float(np.exp(te[0]))
                U = tr.y_events[i][0]
                j, sg = divmod(i, 2)
                return ShotResult(False, s_exit, j + 2, 1 if sg == 0 else -1,
                                  self.exit_derivative(U, s_exit))
        return ShotResult(True, None, None, 0, None)


def _bisect_boundary(classify, inside, outside, rtol, max_iter=200):
    """Bisection between an inside point and an outside point."""
    for _ in range(max_iter):
        mid = 0.5 * (inside + outside)
        if mid in (inside, outside) or abs(outside - inside) <= rtol:
            break
        if classify(mid):
            inside = mid
        else:
            outside = mid
    return inside, outside


def shoot_unstable(params, s0, s_end, box_exponent, V1=0.0, tail=None, rtol=1e-4,
                   dtau=1e-2, sweeps=2):
    """Nested search for unstable initial coordinates trapped until s_end.

    Horizons s0 * 2^n (capped at s_end).  At every horizon the trapped set in
    each unstable coordinate is bracketed by bisection inside the previous
    bracket (coordinate-wise for ell = 3).  Returns the centre of the final
    bracket, the bracket widths per level and the rejected candidates with
    their exit data.
    """
    if box_exponent <= 0:
        raise ContractError("box exponent must be positive")
    if params.ell not in (2, 3):
        raise ContractError("shooting is implemented for ell in {2, 3}")
    sh = Shooter(params, s0, box_exponent, V1, tail, dtau)
    n_u = params.ell - 1
    half = s0 ** -box_exponent
    lo = -half * np.ones(n_u)
    hi = half * np.ones(n_u)
    centre = np.zeros(n_u)
    rejected = []
    widths = [hi - lo]
    levels = []
    S = s0
    while S < s_end * (1 - 1e-12):
        S = min(2 * S, s_end)
        for _ in range(sweeps if n_u > 1 else 1):
            for j in reversed(range(n_u)):
                def probe(v, j=j):
                    x = centre.copy()
                    x[j] = v
                    r = sh.shoot(x, S)
                    if not r.trapped:
                        rejected.append((x.copy(), r))
                    return r

                def inside(v, j=j):
                    r = probe(v)
                    return r.trapped or r.exit_coord != j + 2

                # a trapped (for coordinate j) point inside the old bracket
                a, bnd = lo[j], hi[j]
                m = centre[j]
                found = inside(m)
                it = 0
                while not found:
                    r = probe(m)
                    if r.exit_sign > 0:
                        bnd = m
                    else:
                        a = m
                    m = 0.5 * (a + bnd)
                    found = inside(m)
                    it += 1
                    if it > 200:
                        raise NumericalError(
                            f"no trapped trajectory at horizon {S}: bracket [{a}, {bnd}]")
                w = max(hi[j] - lo[j], 1e-300)
                lo_j, _ = _bisect_boundary(inside, m, a, rtol * w)
                hi_j, _ = _bisect_boundary(inside, m, bnd, rtol * w)
                lo[j], hi[j] = lo_j, hi_j
                centre[j] = 0.5 * (lo_j + hi_j)
        levels.append(S)
        widths.append(hi - lo)
    return ShootingResult(centre.copy(), levels, widths, rejected, S), sh
