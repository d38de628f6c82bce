"""Grids, weighted quadrature, finite differences, ODE wrapper and a small
eigen-solver.

Every radial quantity in the package lives on a :class:`RadialGrid`.  The grid
is described by a smooth map xi -> y(xi) from the integer index to the node
position, so that finite differences are taken on the uniform index variable
and pushed through the chain rule.  Two policies are supported:

* ``uniform``   y = y_min + h*xi
* ``geometric`` y = y_min * q**xi  (constant ratio, i.e. uniform in log y)

Quadrature is product integration: on every panel [y_i, y_{i+1}] the integrand
is replaced by its local Lagrange interpolant and multiplied by the exact
weight y**p, and the panel integral is evaluated with Gauss-Legendre.  The
interpolant degree follows the grid ``order`` (cubic for order 4).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.integrate


class NumericalError(RuntimeError):
    """Raised when an iterative numerical routine fails to converge."""


class IntegrationError(NumericalError):
    """ODE integration failure; carries the last valid state."""

    def __init__(self, message, t_last=None, y_last=None):
        super().__init__(message)
        self.t_last = t_last
        self.y_last = y_last


class ContractError(ValueError):
    """A documented precondition was violated."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class GridRangeError(ValueError):
    """Requested interval is not covered by the grid."""


# ---------------------------------------------------------------------------
# finite difference weights
# ---------------------------------------------------------------------------

def fornberg_weights(z, x, m):
    """Weights c[k, j] such that f^(k)(z) ~ sum_j c[k, j] f(x_j), k <= m.

    Standard Fornberg recursion, returned for all derivative orders up to m.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def _stencil_tables(n, order, deriv):
    """Index array (n, w) and weight array (n, w) for an index-space derivative.

    Centered stencils in the interior, shifted one-sided stencils near the
    ends.  Near the ends one extra point is used so the formal order is kept.
    """
    w = order + 1
    if deriv == 2 and order % 2 == 0:
        w = order + 1
    w_end = w + 1
    if n < w_end:
        raise ContractError(f"grid needs at least {w_end} nodes for order {order}")
    idx = np.empty((n, w_end), dtype=np.int64)
    wts = np.zeros((n, w_end))
    half = w // 2
    cache = {}
    for i in range(n):
        if half <= i < n - half:
            start, width = i - half, w
        elif i < half:
            start, width = 0, w_end
        else:
            start, width = n - w_end, w_end
        offs = tuple(range(start - i, start - i + width))
        if offs not in cache:
            cache[offs] = fornberg_weights(0.0, np.array(offs, float), deriv)[deriv]
        cols = np.arange(start, start + width)
        idx[i, :width] = cols
        idx[i, width:] = cols[-1]
        wts[i, :width] = cache[offs]
    return idx, wts


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing radial nodes with a smooth index map.

    Build with :meth:`uniform` or :meth:`geometric`.  ``order`` is the finite
    difference / interpolation order (4, 6 or 8).
    """

    nodes: np.ndarray
    d: int
    policy: str
    order: int = 4
    jac: np.ndarray = field(repr=False, default=None)
    jac2: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        y = np.asarray(self.nodes, dtype=float)
        if y.ndim != 1 or len(y) < 5:
            raise ContractError("grid needs at least 5 nodes")
        if np.any(np.diff(y) <= 0):
            raise ContractError("nodes must be strictly increasing")
        if y[0] < 0:
            raise ContractError("nodes must be nonnegative")
        if self.order not in (4, 6, 8):
            raise ContractError("order must be 4, 6 or 8")
        y.setflags(write=False)
        object.__setattr__(self, "nodes", y)

    # constructors -----------------------------------------------------------
    @classmethod
    def uniform(cls, y_min, y_max, n, d, order=4):
        """n+1 equally spaced nodes on [y_min, y_max]."""
        y = np.linspace(y_min, y_max, n + 1)
        h = (y_max - y_min) / n
        return cls(y, d, "uniform", order, np.full(n + 1, h), np.zeros(n + 1))

    @classmethod
    def geometric(cls, y_min, y_max, d, ratio=None, n=None, order=4):
        """Nodes y_min*q**i reaching y_max; give either the ratio or n."""
        if y_min <= 0:
            raise ContractError("geometric grid needs y_min > 0")
        span = np.log(y_max / y_min)
        if n is None:
            if ratio is None:
                ratio = 1.01
            n = int(np.ceil(span / np.log(ratio)))
            n += n % 2
        lq = span / n
        y = y_min * np.exp(lq * np.arange(n + 1))
        y[-1] = y_max
        return cls(y, d, "geometric", order, lq * y, lq * lq * y)

    # basic properties -------------------------------------------------------
    @property
    def n(self):
        return len(self.nodes)

    @property
    def y(self):
        return self.nodes

    @property
    def span(self):
        return float(self.nodes[0]), float(self.nodes[-1])

    def with_order(self, order):
        return RadialGrid(self.nodes, self.d, self.policy, order, self.jac, self.jac2)

    def with_dimension(self, d):
        return RadialGrid(self.nodes, d, self.policy, self.order, self.jac, self.jac2)

    # finite differences -----------------------------------------------------
    @cached_property
    def _d1_tables(self):
        return _stencil_tables(self.n, self.order, 1)

    @cached_property
    def _d2_tables(self):
        return _stencil_tables(self.n, self.order, 2)

    def d_index(self, values, deriv):
        idx, wts = self._d1_tables if deriv == 1 else self._d2_tables
        return np.sum(wts * np.asarray(values)[idx], axis=1)

    def d1(self, values):
        """dy-derivative of nodal values."""
        return self.d_index(values, 1) / self.jac

    def d2(self, values):
        """Second dy-derivative of nodal values."""
        fx = self.d_index(values, 1)
        fxx = self.d_index(values, 2)
        return (fxx - self.jac2 / self.jac * fx) / self.jac**2

    # quadrature -------------------------------------------------------------
    @cached_property
    def _panel_layout(self):
        q = min(self.order, self.n)
        n_pan = self.n - 1
        start = np.clip(np.arange(n_pan) - (q // 2 - 1), 0, self.n - q)
        idx = start[:, None] + np.arange(q)[None, :]
        return q, idx

    def _panel_weights(self, power, a=None, b=None, panels=None):
        """W[i, j]: integral over (part of) panel i of y**power * ell_j(y)."""
        q, idx = self._panel_layout
        y = self.nodes
        if panels is None:
            panels = np.arange(self.n - 1)
        lo = y[panels] if a is None else np.asarray(a, float)
        hi = y[panels + 1] if b is None else np.asarray(b, float)
        ng = max(8, (q + int(abs(power)) + 3) // 2 + 2)
        xg, wg = np.polynomial.legendre.leggauss(ng)
        y0 = y[panels]
        dy = y[panels + 1] - y0
        yg = 0.5 * (hi + lo)[:, None] + 0.5 * (hi - lo)[:, None] * xg[None, :]
        tg = (yg - y0[:, None]) / dy[:, None]
        tn = (y[idx[panels]] - y0[:, None]) / dy[:, None]
        basis = np.ones((len(panels), ng, q))
        for j in range(q):
            for m in range(q):
                if m != j:
                    basis[:, :, j] *= (tg - tn[:, None, m]) / (tn[:, j, None] - tn[:, None, m])
        wy = (0.5 * (hi - lo))[:, None] * wg[None, :] * yg**power
        return np.einsum("pg,pgj->pj", wy, basis), idx[panels]

    def _full_panel_weights(self, power):
        cache = self.__dict__.setdefault("_pw_cache", {})
        key = float(power)
        if key not in cache:
            cache[key] = self._panel_weights(power)[0]
        return cache[key]

    def panel_integrals(self, values, power):
        W = self._full_panel_weights(power)
        _, idx = self._panel_layout
        return np.sum(W * np.asarray(values)[idx], axis=1)

    def origin_piece(self, values, power):
        """Integral of f*y**power over [0, y_0] from a power-law fit of the first nodes.

        The fit f ~ f_0 (y/y_0)**e uses the first two nodes; it is exact for
        the leading odd/even behaviour of the fields used in the package.
        """
        y0 = self.nodes[0]
        if y0 == 0.0:
            return 0.0
        f0, f1 = values[0], values[1]
        y1 = self.nodes[1]
        if f0 == 0.0:
            return 0.0
        ratio = f1 / f0
        if ratio <= 0:
            e = 1.0
        else:
            e = np.log(ratio) / np.log(y1 / y0)
        p = e + power + 1.0
        if p <= 0:
            return 0.0
        return f0 * y0 ** (power + 1.0) / p

    def cumulative(self, values, power=None, origin=True, from_right=False):
        """Running integral of f*y**power.

        Left form returns F(y_i) = int_{0 or y_0}^{y_i}; right form returns
        int_{y_i}^{y_max}.  ``power`` defaults to d-1.
        """
        if power is None:
            power = self.d - 1
        values = np.asarray(values, dtype=float)
        pan = self.panel_integrals(values, power)
        if from_right:
            out = np.zeros(self.n)
            out[:-1] = np.cumsum(pan[::-1])[::-1]
            return out
        out = np.zeros(self.n)
        out[1:] = np.cumsum(pan)
        if origin:
            out += self.origin_piece(values, power)
        return out

    def integrate(self, values, power=None, a=None, b=None, origin=True):
        """Integral of f*y**power over [a, b] (defaults: the whole grid, with
        the [0, y_0] piece when ``origin`` is set)."""
        if power is None:
            power = self.d - 1
        values = np.asarray(values, dtype=float)
        y = self.nodes
        lo, hi = y[0], y[-1]
        tol = 1e-12 * max(1.0, hi)
        a_eff = lo if a is None else float(a)
        b_eff = hi if b is None else float(b)
        if a_eff < -tol or b_eff > hi + tol or a_eff > b_eff:
            raise GridRangeError(f"[{a_eff}, {b_eff}] outside grid span [0, {hi}]")
        if a_eff < lo - tol:
            if a_eff > tol or not origin:
                raise GridRangeError(f"[{a_eff}, {b_eff}] outside grid span [{lo}, {hi}]")
        total = 0.0
        if a_eff < lo:
            total += self.origin_piece(values, power)
            a_eff = lo
        b_eff = min(b_eff, hi)
        if b_eff <= a_eff:
            return total
        i0 = int(np.searchsorted(y, a_eff, side="right") - 1)
        i1 = int(np.searchsorted(y, b_eff, side="left") - 1)
        i0 = min(max(i0, 0), self.n - 2)
        i1 = min(max(i1, 0), self.n - 2)
        if i0 == i1:
            W, idx = self._panel_weights(power, np.array([a_eff]), np.array([b_eff]),
                                         np.array([i0]))
            return total + float(np.sum(W * values[idx]))
        W, idx = self._panel_weights(power, np.array([a_eff, y[i1]]),
                                     np.array([y[i0 + 1], b_eff]), np.array([i0, i1]))
        total += float(np.sum(W * values[idx]))
        pan = self.panel_integrals(values, power)
        total += float(np.sum(pan[i0 + 1:i1]))
        return total


@dataclass(frozen=True, eq=False)
class RadialField:
    """Nodal values on a grid; ``origin`` optionally holds Taylor data at 0."""

    grid: RadialGrid
    values: np.ndarray
    origin: dict | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise ContractError("values do not match grid")
        if not np.all(np.isfinite(v)):
            raise NumericalError("field has non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def y(self):
        return self.grid.nodes

    def __call__(self):
        return self.values


def integrate_weighted(f, a=None, b=None, power=None):
    """int_a^b f(y) y^(d-1) dy for a RadialField (or (grid, values) pair)."""
    grid, values = (f.grid, f.values) if isinstance(f, RadialField) else f
    return grid.integrate(values, power=power, a=a, b=b)


def derivative(f, order=1):
    """First or second y-derivative of a RadialField."""
    if order == 1:
        return RadialField(f.grid, f.grid.d1(f.values))
    if order == 2:
        return RadialField(f.grid, f.grid.d2(f.values))
    raise ContractError("order must be 1 or 2")


# ---------------------------------------------------------------------------
# ODE integration
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    sol: object = None
    t_events: list | None = None
    y_events: list | None = None
    status: int = 0
    nfev: int = 0


def solve_ivp(rhs, y0, span, tol=1e-10, method="DOP853", events=None, dense=False,
              t_eval=None, max_step=np.inf, fixed_step=None, atol=None):
    """Adaptive embedded Runge-Kutta integration (scipy DOP853 by default).

    ``fixed_step`` forces a constant step by loosening the error controller and
    capping the step; it is used for convergence-order checks.  Raises
    :class:`IntegrationError` with the last state when the solver stops early.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    kw = dict(method=method, events=events, dense_output=dense, t_eval=t_eval)
    if fixed_step is not None:
        kw.update(rtol=1e3, atol=1e3, first_step=fixed_step, max_step=fixed_step)
    else:
        kw.update(rtol=tol, atol=tol if atol is None else atol, max_step=max_step)
    res = scipy.integrate.solve_ivp(rhs, span, y0, **kw)
    if res.status == -1:
        t_last = res.t[-1] if len(res.t) else span[0]
        y_last = res.y[:, -1] if res.y.size else y0
        raise IntegrationError(f"integration failed at t={t_last}: {res.message}",
                               t_last, y_last)
    return Trajectory(res.t, res.y, res.sol, res.t_events, res.y_events, res.status,
                      res.nfev)


# ---------------------------------------------------------------------------
# small dense eigenproblems
# ---------------------------------------------------------------------------

def _hessenberg(A):
    H = np.array(A, dtype=complex)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        H[k + 1:, :] -= 2.0 * np.outer(v, v.conj() @ H[k + 1:, :])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v.conj())
    return H


def _givens(a, b):
    r = np.hypot(abs(a), abs(b))
    if r == 0:
        return 1.0, 0.0
    return a / r, b / r


def _hessenberg_qr_eigvals(H, max_iter):
    H = H.copy()
    n = H.shape[0]
    eig = np.zeros(n, dtype=complex)
    scale = max(np.abs(H).max(), 1e-300)
    hi = n - 1
    it = 0
    since = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = H[0, 0]
            break
        # deflation search
        lo = hi
        while lo > 0:
            s = abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])
            if abs(H[lo, lo - 1]) <= 1e-15 * (s if s > 0 else scale):
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eig[hi] = H[hi, hi]
            hi -= 1
            since = 0
            continue
        it += 1
        since += 1
        if it > max_iter:
            raise NumericalError("QR iteration did not converge")
        # Wilkinson shift from trailing 2x2 block
        a, b = H[hi - 1, hi - 1], H[hi - 1, hi]
        c, dd = H[hi, hi - 1], H[hi, hi]
        tr = a + dd
        det = a * dd - b * c
        disc = np.sqrt(tr * tr / 4 - det)
        m1, m2 = tr / 2 + disc, tr / 2 - disc
        mu = m1 if abs(m1 - dd) < abs(m2 - dd) else m2
        if since % 11 == 10:
            mu = mu + abs(H[hi, hi - 1]) * (0.75 + 0.5j)
        # one shifted QR sweep on the active block via Givens rotations
        blk = slice(lo, hi + 1)
        T = H[blk, blk]
        m = T.shape[0]
        T -= mu * np.eye(m)
        rots = []
        for k in range(m - 1):
            cs, sn = _givens(T[k, k], T[k + 1, k])
            G = np.array([[np.conj(cs), np.conj(sn)], [-sn, cs]])
            T[k:k + 2, k:] = G @ T[k:k + 2, k:]
            rots.append(G)
        for k, G in enumerate(rots):
            T[:k + 2, k:k + 2] = T[:k + 2, k:k + 2] @ G.conj().T
        T += mu * np.eye(m)
        H[blk, blk] = T
    return eig


def eig_small(A, max_iter=1000):
    """Eigenvalues and eigenvectors of a real matrix of size <= 10.

    Householder reduction to Hessenberg form, shifted QR with deflation for
    the eigenvalues, inverse iteration for the eigenvectors.  Real spectra
    are returned as real arrays.  Eigenvectors are unit columns.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise ContractError("square matrix required")
    if n > 10:
        raise ContractError("eig_small is limited to n <= 10")
    norm = max(np.linalg.norm(A), 1e-300)
    vals = _hessenberg_qr_eigvals(_hessenberg(A), max_iter)
    vecs = np.zeros((n, n), dtype=complex)
    rng = np.random.default_rng(1234)
    for j, lam in enumerate(vals):
        # perturb repeated eigenvalues slightly so inverse iteration separates them
        pert = 1e-10 * norm * (1 + sum(1 for k in range(j) if abs(vals[k] - lam) < 1e-8 * norm))
        M = A - (lam + pert) * np.eye(n)
        v = rng.standard_normal(n) + 0j
        for k in range(j):
            if abs(vals[k] - lam) < 1e-8 * norm:
                v -= (vecs[:, k].conj() @ v) * vecs[:, k]
        v /= np.linalg.norm(v)
        for _ in range(6):
            try:
                w = np.linalg.solve(M, v)
            except np.linalg.LinAlgError:
                w = v
            for k in range(j):
                if abs(vals[k] - lam) < 1e-8 * norm:
                    w -= (vecs[:, k].conj() @ w) * vecs[:, k]
            nw = np.linalg.norm(w)
            if nw == 0:
                break
            v = w / nw
        # fix phase so the largest component is real positive
        k = np.argmax(np.abs(v))
        v *= np.conj(v[k]) / abs(v[k])
        vecs[:, j] = v
    if np.all(np.abs(vals.imag) <= 1e-12 * norm):
        vals = vals.real
        if np.all(np.abs(vecs.imag) <= 1e-10):
            vecs = vecs.real
    return vals, vecs


# ---------------------------------------------------------------------------
# fitting helpers
# ---------------------------------------------------------------------------

def loglog_slope(x, y, lo=None, hi=None):
    """Least-squares slope of log|y| against log x on lo <= x <= hi."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    mask = np.ones_like(x, dtype=bool)
    if lo is not None:
        mask &= x >= lo
    if hi is not None:
        mask &= x <= hi
    mask &= np.abs(y) > 0
    if mask.sum() < 2:
        raise NumericalError("not enough points for a slope fit")
    p = np.polyfit(np.log(x[mask]), np.log(np.abs(y[mask])), 1)
    return float(p[0])
