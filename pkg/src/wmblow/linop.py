"""Linearized operator calculus around the ground state.

    A f    = -f' + (V/y) f                 = -LamQ (f/LamQ)'
    A* f   = y^(1-d) (y^(d-1) f)' + (V/y) f
    L      = A* A = -d^2 - (d-1)/y d + Z/y^2
    L~     = A A* = -d^2 - (d-1)/y d + Z~/y^2,   Z~ = (V+1)^2 + (d-2)(V+1) - Lam V
    H      = [[0, -1], [L, 0]],   H* = [[0, L], [-1, 0]]

Fields are plain nodal arrays on the context grid.  Two-component fields are
:class:`RadialPair`.  The grid starts at a small y_min > 0, so the operators are
evaluated pointwise without parity bookkeeping at y = 0; the only place where
behaviour at the origin enters is the [0, y_min] piece of the quadratures,
which uses the leading power law of the integrand.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .numerics import ContractError, DomainError, RadialGrid


# ---------------------------------------------------------------------------
# cutoff
# ---------------------------------------------------------------------------

def smoothstep(t, n=2):
    """C^n smoothstep: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, float), 0.0, 1.0)
    s = np.zeros_like(t)
    for k in range(n + 1):
        s += comb(n + k, k) * comb(2 * n + 1, n - k) * (-t) ** k
    return s * t ** (n + 1)


def chi(y, n=2):
    """Non-increasing cutoff, 1 on [0,1], 0 on [2, inf), C^n in between."""
    return 1.0 - smoothstep(np.asarray(y, float) - 1.0, n)


# ---------------------------------------------------------------------------
# pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadialPair:
    """Vector field (f1, f2) on a shared grid."""

    f1: np.ndarray
    f2: np.ndarray

    # let numpy arrays defer to __rmul__ (pointwise multiplication by a field)
    __array_ufunc__ = None

    def __post_init__(self):
        a = np.asarray(self.f1, dtype=float)
        b = np.asarray(self.f2, dtype=float)
        if a.shape != b.shape:
            raise ContractError("components must share the grid")
        object.__setattr__(self, "f1", a)
        object.__setattr__(self, "f2", b)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n))

    def __add__(self, o):
        return RadialPair(self.f1 + o.f1, self.f2 + o.f2)

    def __sub__(self, o):
        return RadialPair(self.f1 - o.f1, self.f2 - o.f2)

    def __neg__(self):
        return RadialPair(-self.f1, -self.f2)

    def __mul__(self, c):
        return RadialPair(c * self.f1, c * self.f2)

    __rmul__ = __mul__

    def sup(self):
        return float(max(np.max(np.abs(self.f1)), np.max(np.abs(self.f2))))


# ---------------------------------------------------------------------------
# context
# ---------------------------------------------------------------------------

class LinOpContext:
    """Ground-state potentials sampled on a grid, with the operator calculus.

    By default the ground-state grid is used.
    """

    def __init__(self, gs, grid: RadialGrid | None = None):
        self.gs = gs
        self.grid = gs.grid if grid is None else grid
        self.d = gs.d
        y = self.grid.y
        self.y = y
        Q, Qx, Qxx = gs.at(y)
        self.Q = Q
        self.LamQ = Qx
        self.V = Qxx / Qx
        self.Z = (self.d - 1) * np.cos(2 * Q)
        # Lambda V from the identity Z = V^2 + Lam V + (d-2) V
        self.LamV = self.Z - self.V**2 - (self.d - 2) * self.V
        self.Ztilde = (self.V + 1) ** 2 + (self.d - 2) * (self.V + 1) - self.LamV
        self._phi_cache = {0: self.LamQ}

    @property
    def n(self):
        return len(self.y)

    # scalar operators --------------------------------------------------------
    def d1(self, f):
        return self.grid.d1(f)

    def d2(self, f):
        return self.grid.d2(f)

    def apply_A(self, f):
        return -self.d1(f) + self.V / self.y * f

    def apply_Astar(self, f):
        return self.d1(f) + (self.d - 1 + self.V) / self.y * f

    def apply_L(self, f):
        y = self.y
        return -self.d2(f) - (self.d - 1) / y * self.d1(f) + self.Z / y**2 * f

    def apply_Ltilde(self, f):
        y = self.y
        return -self.d2(f) - (self.d - 1) / y * self.d1(f) + self.Ztilde / y**2 * f

    def apply_Lk(self, f, k):
        for _ in range(k):
            f = self.apply_L(f)
        return f

    def L_residual_scale(self, f):
        """Pointwise size of the individual terms of L f (for relative errors)."""
        y = self.y
        return (np.abs(self.d2(f)) + (self.d - 1) / y * np.abs(self.d1(f))
                + np.abs(self.Z) / y**2 * np.abs(f))

    # inversion ---------------------------------------------------------------
    def invert_L(self, f):
        """Regular solution of L w = f by the two quadratures

        A w = 1/(y^(d-1) LamQ) int_0^y f LamQ x^(d-1) dx,
        w   = -LamQ int_0^y (A w / LamQ) dx.
        """
        f = np.asarray(f, dtype=float)
        g = self.grid
        lq = self.LamQ
        with np.errstate(over="ignore", invalid="ignore"):
            inner = g.cumulative(f * lq, power=self.d - 1)
            Aw = inner / (self.y ** (self.d - 1) * lq)
            outer = g.cumulative(Aw / lq, power=0)
            w = -lq * outer
        if not np.all(np.isfinite(w)):
            warnings.warn("invert_L: quadrature overflow from a growing source",
                          RuntimeWarning, stacklevel=2)
        return w

    def phi(self, k):
        """phi_0 = LamQ, phi_{k+1} = -L^{-1} phi_k."""
        if k not in self._phi_cache:
            self._phi_cache[k] = -self.invert_L(self.phi(k - 1))
        return self._phi_cache[k]

    def kernel_Gamma(self, decaying=False):
        """Second kernel element.

        ``decaying=False``: Gamma = -LamQ int_1^y dx / (x^(d-1) LamQ^2), Gamma(1) = 0.
        ``decaying=True``:  LamQ int_y^inf dx / (x^(d-1) LamQ^2), the representative
        with the y^-(d-2-gamma) far field.
        """
        g = self.grid
        y = self.y
        d = self.d
        # integrand written as (x/LamQ)^2 * x^-(d+1) so the weight carries the power law
        h = (y / self.LamQ) ** 2
        R = g.cumulative(h, power=-(d + 1), from_right=True)
        gs = self.gs
        a = gs.a0 * gs.gamma
        tail = g.span[1] ** (2 * gs.gamma - d + 2) / ((d - 2 - 2 * gs.gamma) * a * a)
        if decaying:
            return self.LamQ * (R + tail)
        R1 = g.integrate(h, power=-(d + 1), a=1.0)
        # int_1^y = R(1) - R(y)
        return -self.LamQ * (R1 - R)

    # pair operators ------------------------------------------------------------
    def lamQ_pair(self):
        return RadialPair(self.LamQ, np.zeros(self.n))

    def apply_H(self, p):
        return RadialPair(-p.f2, self.apply_L(p.f1))

    def apply_Hinv(self, p):
        return RadialPair(self.invert_L(p.f2), -p.f1)

    def apply_Hk(self, p, k):
        if k >= 0:
            for _ in range(k):
                p = self.apply_H(p)
        else:
            for _ in range(-k):
                p = self.apply_Hinv(p)
        return p

    def apply_Hstar(self, p):
        return RadialPair(self.apply_L(p.f2), -p.f1)

    def apply_Hstar_k(self, p, k):
        for _ in range(k):
            p = self.apply_Hstar(p)
        return p

    def H_block_power(self, p, k):
        """H^k p from the closed block form (for cross-checking apply_Hk)."""
        m, odd = divmod(k, 2)
        s = (-1) ** m
        if not odd:
            return RadialPair(s * self.apply_Lk(p.f1, m), s * self.apply_Lk(p.f2, m))
        return RadialPair(-s * self.apply_Lk(p.f2, m), s * self.apply_Lk(p.f1, m + 1))

    def integrate(self, f, a=None, b=None):
        return self.grid.integrate(f, a=a, b=b)

    def inner(self, u, v, a=None, b=None):
        if isinstance(u, RadialPair):
            return self.grid.integrate(u.f1 * v.f1 + u.f2 * v.f2, a=a, b=b)
        return self.grid.integrate(np.asarray(u) * np.asarray(v), a=a, b=b)

    # T_k ------------------------------------------------------------------------
    def T(self, k):
        """T_{2i} = (phi_i, 0), T_{2i+1} = (0, phi_i)."""
        i, odd = divmod(k, 2)
        z = np.zeros(self.n)
        return RadialPair(z, self.phi(i)) if odd else RadialPair(self.phi(i), z)

    # Phi_M ---------------------------------------------------------------------
    def build_Phi_M(self, M, L, smooth=None):
        """Phi_M = sum_k c_k H*^k (chi_M LamQ, 0) with the c_k recursion.

        Returns (Phi pair, coefficient array c_0..c_L).
        """
        if M < 10:
            raise ContractError("M must be >= 10")
        if L < 1 or L % 2 == 0:
            raise ContractError("L must be an odd positive integer")
        smooth = 2 * L + 2 if smooth is None else smooth
        base = RadialPair(chi(self.y / M, smooth) * self.LamQ, np.zeros(self.n))
        powers = [base]
        for _ in range(L):
            powers.append(self.apply_Hstar(powers[-1]))
        norm = self.inner(base, self.lamQ_pair())
        c = np.zeros(L + 1)
        c[0] = 1.0
        for k in range(1, L + 1):
            Tk = self.T(k)
            acc = sum(c[j] * self.inner(powers[j], Tk) for j in range(k))
            c[k] = (-1) ** (k + 1) * acc / norm
        Phi = RadialPair.zeros(self.n)
        for k in range(L + 1):
            Phi = Phi + c[k] * powers[k]
        return Phi, c

    def chi_norm(self, M, smooth=2):
        return self.integrate(chi(self.y / M, smooth) * self.LamQ**2)

    # relative residual helper ----------------------------------------------------
    def relative_L_residual(self, w, f=None, lo=0.1, hi=None):
        """max |L w - f| / (sum of |terms| of L w) on [lo, hi]."""
        hi = self.grid.span[1] / 2 if hi is None else hi
        r = self.apply_L(w) - (0.0 if f is None else f)
        sc = self.L_residual_scale(w)
        m = (self.y >= lo) & (self.y <= hi)
        return float(np.max(np.abs(r[m]) / np.maximum(sc[m], 1e-300)))


# ---------------------------------------------------------------------------
# Hardy and coercivity harnesses
# ---------------------------------------------------------------------------

HARDY_WEIGHTED_CONSTANT = 10.0


def _check_finite(*vals):
    for v in vals:
        if not np.isfinite(v):
            raise DomainError("divergent quadrature")


def hardy_check(grid, f, variant, d=None, i=0, alpha=1.0, k=2, j=1, mu=1.0):
    """Both sides of a Hardy inequality and the slack lhs - rhs.

    variants
      origin      int_{y<=1} f'^2 / y^(2i)  vs  (d-2-2i)^2/4 int_{y<=1} f^2/y^(2+2i) - C f(1)^2
      noncritical int_{y>=1} f'^2 / y^(2a)  vs  beta^2 int_{y>=1} f^2 / y^(2+2a) - |beta| f(1)^2
      critical    int_{y>=1} f'^2 / y^(d-2) vs  1/4 int_{y>=1} f^2/(y^d (1+log y)^2) - f(1)^2/2
      weighted    C int f^(k)^2/(1+y^mu) + C int f^2/(1+y^(mu+2k))  vs  int f^(j)^2/(1+y^(mu+2(k-j)))

    The boundary constants come from one integration by parts plus
    Cauchy-Schwarz (C = (d-2-2i)/2 at the origin, |beta| with
    beta = (d-2-2 alpha)/2 away from it, 1/2 in the critical case).  The
    weighted case has no explicit constant; HARDY_WEIGHTED_CONSTANT is used.
    All integrals carry the measure y^(d-1) dy.
    """
    d = grid.d if d is None else d
    y = grid.y
    f = np.asarray(f, float)
    fp = grid.d1(f)
    p = d - 1
    f1 = float(np.interp(1.0, y, f))
    if variant == "origin":
        lhs = grid.integrate(fp**2, power=p - 2 * i, b=1.0)
        beta = (d - 2 - 2 * i) / 2
        main = beta**2 * grid.integrate(f**2, power=p - 2 - 2 * i, b=1.0)
        rhs = main - beta * f1**2
    elif variant == "noncritical":
        if abs(alpha - (d - 2) / 2) < 1e-12 or alpha <= 0:
            raise DomainError("alpha must be positive and non-critical")
        lhs = grid.integrate(fp**2, power=p - 2 * alpha, a=1.0)
        beta = (d - 2 - 2 * alpha) / 2
        main = beta**2 * grid.integrate(f**2, power=p - 2 - 2 * alpha, a=1.0)
        rhs = main - abs(beta) * f1**2
    elif variant == "critical":
        a = (d - 2) / 2
        lhs = grid.integrate(fp**2, power=p - 2 * a, a=1.0)
        w = np.where(y >= 1, 1.0 / (1.0 + np.log(np.maximum(y, 1.0))) ** 2, 0.0)
        main = 0.25 * grid.integrate(f**2 * w, power=p - 2 - 2 * a, a=1.0)
        rhs = main - 0.5 * f1**2
    elif variant == "weighted":
        if not 1 <= j <= k - 1:
            raise DomainError("need 1 <= j <= k-1")
        dk = f.copy()
        dj = None
        for m in range(1, k + 1):
            dk = grid.d1(dk)
            if m == j:
                dj = dk.copy()
        lhs = grid.integrate(dj**2 / (1 + y ** (mu + 2 * (k - j))), power=p)
        rhs = HARDY_WEIGHTED_CONSTANT * (grid.integrate(dk**2 / (1 + y**mu), power=p)
                                         + grid.integrate(f**2 / (1 + y ** (mu + 2 * k)), power=p))
        lhs, rhs = rhs, lhs
    else:
        raise DomainError(f"unknown variant {variant}")
    _check_finite(lhs, rhs)
    return float(lhs), float(rhs), float(lhs - rhs)


def coercivity_check(ctx, f, op, i=0, alpha=1.0, Phi=None, tol=1e-8):
    """Weighted ||op f||^2 divided by the weighted (||f'||^2 + ||f/y||^2).

    Weight 1/(y^(2i)(1+y^(2 alpha))) and measure y^(d-1).  For op = "A" with
    2i + 2 alpha > d - 2 gamma - 2 the orthogonality <f, Phi> = 0 must hold
    (``Phi`` is the scalar first component of the Phi_M direction).
    """
    y = ctx.y
    f = np.asarray(f, float)
    if op == "A":
        if 2 * i + 2 * alpha > ctx.d - 2 * ctx.gs.gamma - 2:
            if Phi is None:
                raise ContractError("orthogonality direction required for this weight")
            num = ctx.integrate(f * Phi)
            scale = math.sqrt(ctx.integrate(f * f) * ctx.integrate(Phi * Phi))
            if abs(num) > tol * scale:
                raise ContractError(f"<f, Phi_M> = {num:.3e} is not zero")
        g = ctx.apply_A(f)
    elif op == "Astar":
        g = ctx.apply_Astar(f)
    else:
        raise DomainError(f"unknown operator {op}")
    w = 1.0 / (y ** (2 * i) * (1 + y ** (2 * alpha)))
    num = ctx.integrate(g**2 * w)
    den = ctx.integrate(ctx.d1(f) ** 2 * w) + ctx.integrate(f**2 * w / y**2)
    _check_finite(num, den)
    return float(num / den)


def random_test_functions(y, count, seed=0, support=(2.0, 8.0), degree=4):
    """Smooth compactly supported odd-type functions y P(y) chi(y/R)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        R = rng.uniform(*support)
        coef = rng.standard_normal(degree + 1)
        P = np.polynomial.polynomial.polyval(y / R, coef)
        out.append(y * P * chi(y / R, 4))
    return out
