"""The stationary profile Q and its structural constants.

Q solves  Q'' + (d-1)/y Q' - (d-1)/(2y^2) sin(2Q) = 0,  Q(0)=0, Q'(0)=1.
In x = log y the equation is autonomous,

    Q_xx = -(d-2) Q_x + (d-1)/2 sin(2Q),

and Lambda Q = y Q' = Q_x.  We start from the odd Taylor series at a small
radius and integrate outward in x.  The tail pi/2 - Q decays like a0 y^-gamma
with a first correction of relative size y^-gamma_tilde (the second root of the
linearization around pi/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import (DomainError, NumericalError, RadialField, RadialGrid,
                       loglog_slope, solve_ivp)


def structural_constants(d):
    """(gamma, gamma_tilde, hbar, delta) for dimension d >= 7."""
    if int(d) != d or d < 7:
        raise DomainError(f"dimension must be an integer >= 7, got {d}")
    d = int(d)
    gt = math.sqrt(d * d - 8 * d + 8)
    gamma = 0.5 * (d - 2 - gt)
    hbar = math.floor(d / 2 - gamma)
    delta = d / 2 - gamma - hbar
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta={delta} not in (0,1) for d={d}")
    return gamma, gt, hbar, delta


def series_coefficients(d, nterms=5):
    """Odd Taylor coefficients [1, c1, c2, ...] of Q at the origin.

    Matching y^(2i-1) in the ODE gives
    c_i [(2i+1)(2i+d-1) - (d-1)] = (d-1)/2 * N_i, where N_i is the y^(2i+1)
    coefficient of sin(2Q) computed from the lower terms.
    """
    deg = 2 * nterms + 1
    coef = np.zeros(deg + 1)
    coef[1] = 1.0
    for i in range(1, nterms):
        k = 2 * i + 1
        # sin(2P) truncated at degree k with the unknown c_i set to zero
        z = 2.0 * coef[:k + 1]
        s = np.zeros(k + 1)
        zp = np.zeros(k + 1)
        zp[0] = 1.0
        for n in range(1, k + 1):
            zp = np.polynomial.polynomial.polymul(zp, z)[:k + 1]
            zp = np.pad(zp, (0, k + 1 - len(zp)))
            if n % 2 == 1:
                s += (-1) ** ((n - 1) // 2) * zp / math.factorial(n)
        rhs = 0.5 * (d - 1) * s[k]
        coef[k] = rhs / (k * (k + d - 2) - (d - 1))
    return coef[1::2][:nterms]


def _series_eval(coef, y):
    y = np.asarray(y, float)
    Q = np.zeros_like(y)
    Qx = np.zeros_like(y)
    for i, c in enumerate(coef):
        p = 2 * i + 1
        Q += c * y**p
        Qx += p * c * y**p
    return Q, Qx


@dataclass(frozen=True, eq=False)
class GroundState:
    d: int
    gamma: float
    gamma_tilde: float
    hbar: int
    delta: float
    a0: float
    grid: RadialGrid
    Q: RadialField
    LamQ: RadialField
    V: RadialField = None
    Z: RadialField = None
    LamV: RadialField = None
    a0_lam: float = float("nan")
    tail_b: float = 0.0
    tail_exponent: float = float("nan")
    y_seed: float = 1e-2
    coef: np.ndarray = field(default=None, repr=False)
    sol: object = field(default=None, repr=False)

    # ------------------------------------------------------------------
    def at(self, y):
        """(Q, Lambda Q, Lambda^2 Q) at arbitrary y > 0.

        Series below the seed radius, the integrated solution on the solved
        range, and the fitted two-term tail beyond it.
        """
        y = np.asarray(y, dtype=float)
        Q = np.empty_like(y)
        Qx = np.empty_like(y)
        lo = y < self.y_seed
        hi = y > self.grid.span[1]
        mid = ~(lo | hi)
        if lo.any():
            Q[lo], Qx[lo] = _series_eval(self.coef, y[lo])
        if mid.any():
            v = self.sol(np.log(y[mid]))
            Q[mid], Qx[mid] = v[0], v[1]
        if hi.any():
            g, gt = self.gamma, self.gamma_tilde
            yh = y[hi]
            eps = self.a0 * yh**-g * (1.0 + self.tail_b * yh**-gt)
            Q[hi] = 0.5 * np.pi - eps
            Qx[hi] = self.a0 * yh**-g * (g + (g + gt) * self.tail_b * yh**-gt)
        Qxx = -(self.d - 2) * Qx + 0.5 * (self.d - 1) * np.sin(2 * Q)
        return Q, Qx, Qxx

    def V_at(self, y):
        _, Qx, Qxx = self.at(y)
        return Qxx / Qx

    def Z_at(self, y):
        Q, _, _ = self.at(y)
        return (self.d - 1) * np.cos(2 * Q)


def solve_ground_state(d, y_max=1e3, tol=1e-13, ratio=1.01, y_min=1e-3, order=8):
    """Integrate Q on a geometric grid [y_min, y_max] and fit a0."""
    if y_max < 100:
        raise DomainError("y_max must be at least 100")
    if tol > 1e-8:
        raise DomainError("tol must be <= 1e-8")
    gamma, gt, hbar, delta = structural_constants(d)
    coef = series_coefficients(d)
    y_seed = min(1e-2, y_min * 10)
    Q0, Qx0 = _series_eval(coef, np.array([y_seed]))

    def rhs(x, s):
        return [s[1], -(d - 2) * s[1] + 0.5 * (d - 1) * np.sin(2 * s[0])]

    def bad(x, s):
        return s[1]
    bad.terminal = True

    traj = solve_ivp(rhs, [Q0[0], Qx0[0]], (np.log(y_seed), np.log(y_max) + 1e-9),
                     tol=tol, atol=1e-16, dense=True, events=bad)
    if traj.status == 1:
        raise NumericalError("Lambda Q changed sign: lost monotonicity")
    grid = RadialGrid.geometric(y_min, y_max, d, ratio=ratio, order=order)
    y = grid.y
    gs = GroundState(d, gamma, gt, hbar, delta, float("nan"), grid,
                     None, None, y_seed=y_seed, coef=coef, sol=traj.sol)
    Q, Qx, _ = gs.at(y)
    if np.any(np.diff(Q) <= 0) or np.any(Q >= 0.5 * np.pi):
        raise NumericalError("Q not monotone below pi/2")

    # tail fit: eps y^gamma = a + b y^-gamma_tilde on [y_max/20, y_max/2]
    m = (y >= y_max / 20) & (y <= y_max / 2)
    eps = 0.5 * np.pi - Q
    X = np.column_stack([np.ones(m.sum()), y[m] ** -gt])
    (a0, b0), *_ = np.linalg.lstsq(X, eps[m] * y[m] ** gamma, rcond=None)
    Xl = np.column_stack([gamma * np.ones(m.sum()), (gamma + gt) * y[m] ** -gt])
    (a0l, _), *_ = np.linalg.lstsq(Xl, Qx[m] * y[m] ** gamma, rcond=None)
    slope = loglog_slope(y, eps, y_max / 20, y_max / 2)
    gs = replace(gs, a0=float(a0), a0_lam=float(a0l), tail_b=float(b0 / a0),
                 tail_exponent=slope, Q=RadialField(grid, Q), LamQ=RadialField(grid, Qx))
    return derived_fields(gs)


def derived_fields(gs):
    """Attach V = Lambda log(Lambda Q), Z = (d-1) cos 2Q and Lambda V.

    V uses the closed form Q_xx/Q_x from the ODE.  Lambda V is taken by finite
    differences so that the identity Z = V^2 + Lambda V + (d-2)V is a genuine
    check rather than a rearrangement.
    """
    y = gs.grid.y
    Q, Qx, Qxx = gs.at(y)
    V = Qxx / Qx
    Z = (gs.d - 1) * np.cos(2 * Q)
    LamV = y * gs.grid.d1(V)
    return replace(gs, V=RadialField(gs.grid, V), Z=RadialField(gs.grid, Z),
                   LamV=RadialField(gs.grid, LamV))


def Z_identity_defect(gs, lo=0.1, hi=None):
    """sup |Z - (V^2 + Lambda V + (d-2) V)| over [lo, hi]."""
    hi = gs.grid.span[1] / 2 if hi is None else hi
    y = gs.grid.y
    m = (y >= lo) & (y <= hi)
    V, Z, LV = gs.V.values, gs.Z.values, gs.LamV.values
    return float(np.max(np.abs(Z - (V**2 + LV + (gs.d - 2) * V))[m]))


def phi0(y, d):
    """Explicit self-similar profile 2 arctan(y / sqrt(d-2))."""
    return 2.0 * np.arctan(np.asarray(y, float) / math.sqrt(d - 2))


def self_similar_residual(d, grid):
    """Residual of
    (1-y^2) phi'' + ((d-1)/y - 2y) phi' - (d-1)/(2y^2) sin(2 phi)
    at phi0, with phi0 sampled on the grid and differentiated numerically."""
    y = grid.y
    if np.any(y == 0):
        raise DomainError("grid must avoid y = 0")
    f = phi0(y, d)
    fy = grid.d1(f)
    fyy = grid.d2(f)
    res = (1 - y**2) * fyy + ((d - 1) / y - 2 * y) * fy - (d - 1) / (2 * y**2) * np.sin(2 * f)
    return RadialField(grid, res)
