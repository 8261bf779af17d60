"""Quadrature, Nyström discretization and discrete positivity checks on (-a, a).

All integral operators in this package have kernels that are smooth on each
side of the diagonal ``y = x`` (and, for the C operator, of the antidiagonal
``y = -x``) but may jump across it.  Plain tensor Gauss-Legendre quadrature
loses its spectral accuracy on such kernels, so every routine here splits the
integration range at the jump lines.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import InvalidArgument, PreconditionViolation

DEFAULT_PANELS = 16
DEFAULT_ORDER = 12
TOL_1D = 1e-10
TOL_2D = 1e-8

_EDGE_TOL = 1e-14


def gauss_rule(order):
    """Gauss-Legendre nodes and weights on (-1, 1), cached per order."""
    if order not in _GAUSS_CACHE:
        _GAUSS_CACHE[order] = leggauss(order)
    return _GAUSS_CACHE[order]


_GAUSS_CACHE: dict = {}


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Composite Gauss-Legendre rule on equal panels covering (-a, a)."""

    a: float
    n_panels: int
    order: int
    panels: np.ndarray  # (n_panels, 2) edges
    nodes: np.ndarray  # (n_panels * order,)
    weights: np.ndarray

    @property
    def size(self):
        return self.nodes.size

    @property
    def key(self):
        return (float(self.a), int(self.n_panels), int(self.order))

    def panel_slice(self, p):
        return slice(p * self.order, (p + 1) * self.order)

    def panel_of(self, y):
        """Index of the panel containing ``y`` (clipped to the valid range)."""
        idx = np.searchsorted(self.panels[:, 0], y, side="right") - 1
        return int(np.clip(idx, 0, self.n_panels - 1))

    def integrate(self, values):
        return np.sum(self.weights * values)

    def reflection(self):
        """Permutation ``r`` with ``nodes[r] == -nodes``; the grid is symmetric."""
        return np.arange(self.size)[::-1]

    def refined(self):
        return make_grid(self.a, 2 * self.n_panels, self.order)

    def describe(self):
        return {"a": float(self.a), "n_panels": int(self.n_panels), "order": int(self.order)}


def make_grid(a, n_panels=DEFAULT_PANELS, order=DEFAULT_ORDER):
    """Composite Gauss-Legendre grid with ``n_panels`` equal panels on (-a, a)."""
    if not np.isfinite(a) or a <= 0:
        raise InvalidArgument(f"half-width must be positive, got {a!r}")
    if int(n_panels) != n_panels or n_panels < 1:
        raise InvalidArgument(f"n_panels must be a positive integer, got {n_panels!r}")
    if int(order) != order or order < 2:
        raise InvalidArgument(f"order must be an integer >= 2, got {order!r}")
    n_panels, order = int(n_panels), int(order)
    edges = np.linspace(-a, a, n_panels + 1)
    # exact symmetry of the edges keeps the node set closed under x -> -x
    edges = 0.5 * (edges - edges[::-1])
    panels = np.column_stack([edges[:-1], edges[1:]])
    t, w = gauss_rule(order)
    mid = panels.mean(axis=1)[:, None]
    half = 0.5 * (panels[:, 1] - panels[:, 0])[:, None]
    nodes = (mid + half * t[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return QuadratureGrid(float(a), n_panels, order, panels, nodes, weights)


def piecewise_rule(a, breaks, panels_per_piece=8, order=DEFAULT_ORDER):
    """Per-row quadrature rules on (-a, a) split at row-dependent breakpoints.

    ``breaks`` has shape (n, m); NaN entries and points outside (-a, a) are
    ignored.  Returns nodes and weights of shape (n, (m+1)*panels_per_piece*order).
    """
    breaks = np.atleast_2d(np.asarray(breaks, dtype=float))
    n = breaks.shape[0]
    b = np.where(np.isfinite(breaks), np.clip(breaks, -a, a), -a)
    pts = np.sort(np.concatenate([np.full((n, 1), -a), b, np.full((n, 1), a)], axis=1), axis=1)
    lo, hi = pts[:, :-1], pts[:, 1:]
    s = np.linspace(0.0, 1.0, panels_per_piece + 1)
    sub_lo = lo[:, :, None] + (hi - lo)[:, :, None] * s[None, None, :-1]
    sub_hi = lo[:, :, None] + (hi - lo)[:, :, None] * s[None, None, 1:]
    t, w = gauss_rule(order)
    mid = 0.5 * (sub_lo + sub_hi)
    half = 0.5 * (sub_hi - sub_lo)
    nodes = mid[..., None] + half[..., None] * t
    weights = half[..., None] * w
    return nodes.reshape(n, -1), weights.reshape(n, -1)


def lagrange_matrix(nodes, t):
    """Matrix ``L`` with ``L[k, j] = l_j(t_k)`` for the Lagrange basis on ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    t = np.asarray(t, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / np.prod(diff, axis=1)
    d = t[:, None] - nodes[None, :]
    exact = d == 0.0
    d[exact] = 1.0
    terms = bw[None, :] / d
    out = terms / terms.sum(axis=1, keepdims=True)
    rows = np.any(exact, axis=1)
    if np.any(rows):
        out[rows] = exact[rows].astype(float)
    return out


@dataclass(frozen=True, eq=False)
class SampledFunction:
    grid: QuadratureGrid
    values: np.ndarray
    derivative: Optional[np.ndarray] = None

    def __post_init__(self):
        if np.shape(self.values) != (self.grid.size,):
            raise InvalidArgument("value count must equal the node count of the grid")
        if self.derivative is not None and np.shape(self.derivative) != (self.grid.size,):
            raise InvalidArgument("derivative count must equal the node count of the grid")

    @classmethod
    def from_callable(cls, grid, f, df=None):
        x = grid.nodes
        values = np.asarray(f(x), dtype=complex) * np.ones(x.shape)
        deriv = None if df is None else np.asarray(df(x), dtype=complex) * np.ones(x.shape)
        return cls(grid, values, deriv)

    def __add__(self, other):
        _same_grid(self, other)
        return SampledFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return SampledFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return SampledFunction(self.grid, scalar * self.values)

    __rmul__ = __mul__


def _same_grid(f, g):
    if f.grid is not g.grid and f.grid.key != g.grid.key:
        raise InvalidArgument("sampled functions live on different grids")


def inner_product(f, g):
    """Discrete L^2 inner product, antilinear in the first argument."""
    _same_grid(f, g)
    return complex(np.sum(f.grid.weights * np.conj(f.values) * g.values))


def norm(f):
    return float(np.sqrt(np.sum(f.grid.weights * np.abs(f.values) ** 2)))


@dataclass(frozen=True, eq=False)
class KernelOperator:
    """Integral operator ``(Kf)(x) = int_{-a}^{a} K(x, y) f(y) dy``.

    ``kernel`` must be vectorized and broadcast over ``x`` and ``y``.  On a
    jump line it should return the mean of the one-sided limits.
    ``diagonal_jump(x)`` is ``K(x, x-0) - K(x, x+0)`` and ``dx`` the classical
    x-derivative off the jump lines; both are only needed for derivatives of
    kernel images.
    """

    kernel: Callable
    a: float
    jump_on_diagonal: bool = False
    jump_on_antidiagonal: bool = False
    dx: Optional[Callable] = None
    diagonal_jump: Optional[Callable] = None
    antidiagonal_jump: Optional[Callable] = None
    name: str = ""
    dy: Optional[Callable] = None
    dxx: Optional[Callable] = None
    dyy: Optional[Callable] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, x, y):
        return self.kernel(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def breakpoints(self, x):
        """Jump locations in ``y`` for each ``x``, shape (len(x), m)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        cols = []
        if self.jump_on_diagonal:
            cols.append(x)
        if self.jump_on_antidiagonal:
            cols.append(-x)
        if not cols:
            return np.empty((x.size, 0))
        return np.column_stack(cols)

    def adjoint(self):
        """Kernel ``conj(K(y, x))``.

        Derivatives carry over when ``dy`` is known.  The diagonal jump of the
        adjoint is ``-conj(J)``, valid for kernels whose only discontinuity
        is through ``sgn(y - x)``.
        """
        k, dx, dy = self.kernel, self.dx, self.dy
        adx = None if dy is None else (lambda x, y: np.conj(dy(y, x)))
        ady = None if dx is None else (lambda x, y: np.conj(dx(y, x)))
        jump = None
        if self.diagonal_jump is not None:
            j = self.diagonal_jump
            jump = lambda x: -np.conj(j(x))  # noqa: E731
        return KernelOperator(
            lambda x, y: np.conj(k(y, x)),
            self.a,
            self.jump_on_diagonal,
            self.jump_on_antidiagonal,
            dx=adx,
            diagonal_jump=jump,
            name=f"{self.name}*" if self.name else "",
            dy=ady,
        )

    def x_derivative(self):
        """Kernel ``dK/dx`` off the jump lines, keeping the jump flags."""
        if self.dx is None:
            raise InvalidArgument(f"kernel {self.name or '<anonymous>'} has no analytic x-derivative")
        return KernelOperator(self.dx, self.a, self.jump_on_diagonal, self.jump_on_antidiagonal)

    def derivative_matrix(self, grid):
        """Matrix ``D`` with ``D @ f ~ (Kf)'`` at the nodes, jump terms included."""
        key = ("dmatrix", grid.key)
        if key in self._cache:
            return self._cache[key]
        d = self.x_derivative().matrix(grid).astype(complex)
        x = grid.nodes
        if self.jump_on_diagonal:
            d[np.diag_indices(grid.size)] += self.diagonal_jump(x)
        if self.jump_on_antidiagonal:
            d[np.arange(grid.size), grid.reflection()] -= self.antidiagonal_jump(x)
        self._cache[key] = d
        return d

    def boundary_row(self, grid, x0):
        """Row vector ``r`` with ``r @ f ~ (Kf)(x0)`` for ``x0 = +-a``."""
        y = grid.nodes
        return grid.weights * self(np.full_like(y, x0), y)

    def __add__(self, other):
        if not isinstance(other, KernelOperator):
            return NotImplemented
        k1, k2 = self.kernel, other.kernel
        derivs = {name: _sum_pair(getattr(self, name), getattr(other, name)) for name in _DERIVATIVES}
        dj = _sum_optional(self.diagonal_jump, other.diagonal_jump, self.jump_on_diagonal, other.jump_on_diagonal)
        aj = _sum_optional(
            self.antidiagonal_jump, other.antidiagonal_jump, self.jump_on_antidiagonal, other.jump_on_antidiagonal
        )
        return KernelOperator(
            lambda x, y: k1(x, y) + k2(x, y),
            self.a,
            self.jump_on_diagonal or other.jump_on_diagonal,
            self.jump_on_antidiagonal or other.jump_on_antidiagonal,
            diagonal_jump=dj,
            antidiagonal_jump=aj,
            **derivs,
        )

    def __rmul__(self, scalar):
        k = self.kernel
        derivs = {name: _scaled(getattr(self, name), scalar) for name in _DERIVATIVES}
        return KernelOperator(
            lambda x, y: scalar * k(x, y),
            self.a,
            self.jump_on_diagonal,
            self.jump_on_antidiagonal,
            diagonal_jump=_scaled(self.diagonal_jump, scalar),
            antidiagonal_jump=_scaled(self.antidiagonal_jump, scalar),
            name=self.name,
            **derivs,
        )

    def __neg__(self):
        return (-1.0) * self

    def __sub__(self, other):
        return self + (-1.0) * other

    def node_values(self, grid):
        x = grid.nodes
        return self(x[:, None], x[None, :])

    def plain_matrix(self, grid):
        """Uncorrected Nyström matrix ``w_j K(x_i, x_j)``."""
        return self.node_values(grid) * grid.weights[None, :]

    def matrix(self, grid):
        """Nyström matrix with panel splitting at the jump lines.

        Rows whose jump point falls inside a panel get that panel's block
        replaced by a split Gauss rule acting through the Lagrange
        interpolant of the panel samples, so ``matrix @ f`` keeps the
        composite rule's order of accuracy for smooth ``f``.
        """
        key = ("matrix", grid.key)
        if key in self._cache:
            return self._cache[key]
        mat = self.plain_matrix(grid).astype(complex)
        if self.jump_on_diagonal or self.jump_on_antidiagonal:
            t_ref, w_ref = gauss_rule(grid.order)
            brk = self.breakpoints(grid.nodes)
            for i, xi in enumerate(grid.nodes):
                per_panel: dict = {}
                for b in brk[i]:
                    if abs(b) >= grid.a - _EDGE_TOL:
                        continue
                    p = grid.panel_of(b)
                    lo, hi = grid.panels[p]
                    if b - lo <= _EDGE_TOL * grid.a or hi - b <= _EDGE_TOL * grid.a:
                        continue
                    per_panel.setdefault(p, []).append(b)
                for p, bs in per_panel.items():
                    lo, hi = grid.panels[p]
                    pts = np.concatenate([[lo], np.sort(bs), [hi]])
                    t = (0.5 * (pts[:-1] + pts[1:])[:, None] + 0.5 * np.diff(pts)[:, None] * t_ref).ravel()
                    w = (0.5 * np.diff(pts)[:, None] * w_ref).ravel()
                    sl = grid.panel_slice(p)
                    interp = lagrange_matrix(grid.nodes[sl], t)
                    kv = self(np.full_like(t, xi), t)
                    mat[i, sl] = (w * kv) @ interp
        self._cache[key] = mat
        return mat


_DERIVATIVES = ("dx", "dy", "dxx", "dyy")


def _sum_pair(f, g):
    if f is None or g is None:
        return None
    return lambda *args: f(*args) + g(*args)


def _scaled(f, scalar):
    if f is None:
        return None
    return lambda *args: scalar * f(*args)


def _sum_optional(j1, j2, has1, has2):
    if (has1 and j1 is None) or (has2 and j2 is None):
        return None
    parts = [j for j in (j1, j2) if j is not None]
    if not parts:
        return None
    if len(parts) == 1:
        return parts[0]
    return lambda x: parts[0](x) + parts[1](x)


def _zeros(x, y):
    return np.zeros(np.broadcast(x, y).shape, dtype=complex)


def zero_kernel(a):
    return KernelOperator(_zeros, a, dx=_zeros, dy=_zeros, dxx=_zeros, dyy=_zeros, name="zero")


def apply_kernel(K, f):
    """Nyström application of ``K`` to grid samples ``f``."""
    if abs(K.a - f.grid.a) > 1e-14 * max(1.0, K.a):
        raise InvalidArgument("kernel and grid live on different intervals")
    return SampledFunction(f.grid, K.matrix(f.grid) @ f.values)


def integrate_kernel(K, f, xs, df=None, panels_per_piece=8, order=DEFAULT_ORDER, derivative=False):
    """Evaluate ``(Kf)(x)`` at arbitrary points for a callable ``f``.

    With ``derivative=True`` also returns ``(Kf)'(x)``, including the
    contribution of the jumps: a jump ``J(x)`` across ``y = x`` adds
    ``J(x) f(x)`` and one across ``y = -x`` adds ``-J(x) f(-x)``.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    nodes, weights = piecewise_rule(K.a, K.breakpoints(xs), panels_per_piece, order)
    fv = f(nodes)
    val = np.sum(weights * K(xs[:, None], nodes) * fv, axis=1)
    if not derivative:
        return val
    if K.dx is None:
        raise InvalidArgument(f"kernel {K.name or '<anonymous>'} has no analytic x-derivative")
    der = np.sum(weights * K.dx(xs[:, None], nodes) * fv, axis=1)
    if K.jump_on_diagonal:
        der = der + K.diagonal_jump(xs) * f(xs)
    if K.jump_on_antidiagonal:
        der = der - K.antidiagonal_jump(xs) * f(-xs)
    return val, der


def compose_kernels(K1, K2, panels_per_piece=6, order=DEFAULT_ORDER, chunk=2048):
    """Kernel of the product ``K1 K2``: ``int K1(x, t) K2(t, y) dt``.

    The integral over ``t`` is split at the jump lines of both factors, so the
    composed kernel is evaluated to quadrature accuracy pointwise.
    """
    a = K1.a
    cols1 = (K1.jump_on_diagonal, K1.jump_on_antidiagonal)
    cols2 = (K2.jump_on_diagonal, K2.jump_on_antidiagonal)

    def kernel(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        shape = x.shape
        xf, yf = x.ravel(), y.ravel()
        out = np.empty(xf.size, dtype=complex)
        for s in range(0, xf.size, chunk):
            xc, yc = xf[s : s + chunk], yf[s : s + chunk]
            brk = []
            if cols1[0]:
                brk.append(xc)
            if cols1[1]:
                brk.append(-xc)
            if cols2[0]:
                brk.append(yc)
            if cols2[1]:
                brk.append(-yc)
            b = np.column_stack(brk) if brk else np.empty((xc.size, 0))
            t, w = piecewise_rule(a, b, panels_per_piece, order)
            out[s : s + chunk] = np.sum(w * K1(xc[:, None], t) * K2(t, yc[:, None]), axis=1)
        return out.reshape(shape)

    name = f"{K1.name}.{K2.name}" if K1.name and K2.name else ""
    return KernelOperator(kernel, a, name=name)


def hs_norm(K, grid, panels_per_piece=8, order=None):
    """Hilbert-Schmidt norm ``(int int |K|^2)^{1/2}``.

    The outer integral uses the grid rule; the inner one is split at the jump
    lines of the row, which keeps the outer integrand smooth.
    """
    order = grid.order if order is None else order
    x = grid.nodes
    nodes, weights = piecewise_rule(grid.a, K.breakpoints(x), panels_per_piece, order)
    inner = np.sum(weights * np.abs(K(x[:, None], nodes)) ** 2, axis=1)
    return float(np.sqrt(max(np.sum(grid.weights * inner), 0.0)))


def hermiticity_defect(K, grid):
    """``max |K(x_i, x_j) - conj K(x_j, x_i)|`` over node pairs."""
    v = K.node_values(grid)
    return float(np.max(np.abs(v - v.conj().T)))


def symmetrized(matrix, grid):
    """Similarity transform ``W^{1/2} A W^{-1/2}`` of a Nyström matrix.

    For a Hermitian kernel this is Hermitian up to the discretization error,
    so its Hermitian part carries the discrete spectrum.
    """
    sw = np.sqrt(grid.weights)
    return sw[:, None] * matrix / sw[None, :]


def min_eigenvalue_of(theta_matrix, grid):
    """Smallest eigenvalue of the Hermitian part of a symmetrized Θ matrix."""
    s = symmetrized(theta_matrix, grid)
    h = 0.5 * (s + s.conj().T)
    return float(np.linalg.eigvalsh(h)[0])


def min_symmetric_eigenvalue(K, grid, tol=TOL_1D):
    """Smallest eigenvalue of the discretized ``I + K`` for a Hermitian kernel.

    Uses the split-panel Nyström matrix in the weight-symmetrized form
    ``delta_ij + sqrt(w_i) M_ij / sqrt(w_j)``, Hermitian part taken; positivity
    of the result certifies discrete positivity of ``I + K``.
    """
    defect = hermiticity_defect(K, grid)
    if defect > tol:
        raise PreconditionViolation(f"kernel is not Hermitian (defect {defect:.2e})")
    return min_eigenvalue_of(np.eye(grid.size) + K.matrix(grid), grid)


def write_kernel_csv(K, grid, fh):
    """Dump ``x,y,re,im`` rows in row-major grid order."""
    vals = K.node_values(grid)
    writer = csv.writer(fh)
    writer.writerow(["x", "y", "re", "im"])
    x = grid.nodes
    for i in range(x.size):
        for j in range(x.size):
            v = vals[i, j]
            writer.writerow([repr(float(x[i])), repr(float(x[j])), repr(float(v.real)), repr(float(v.imag))])


def expansion_kernel(left, right, weights, a, left_dx=None, chunk=4096, name=""):
    """Finite-rank kernel ``sum_n w_n f_n(x) conj(g_n(y))``.

    ``left`` and ``right`` map a 1-D array of points to the matrix of basis
    values, one column per term.
    """
    weights = np.asarray(weights)

    def build(fx):
        def kernel(x, y):
            x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
            if x.ndim == 2 and x.size > 1 and np.all(x == x[:, :1]) and np.all(y == y[:1, :]):
                return (fx(x[:, 0]) * weights) @ np.conj(right(y[0, :])).T
            xf, yf = x.ravel(), y.ravel()
            out = np.empty(xf.size, dtype=complex)
            for s in range(0, xf.size, chunk):
                out[s : s + chunk] = np.sum(fx(xf[s : s + chunk]) * weights * np.conj(right(yf[s : s + chunk])), axis=1)
            return out.reshape(x.shape)

        return kernel

    return KernelOperator(build(left), a, dx=None if left_dx is None else build(left_dx), name=name)


def lattice(a, n):
    """Cell-centered points ``-a + (j + 1/2) 2a/n``, ``j < n``."""
    return -a + (np.arange(n) + 0.5) * (2.0 * a / n)


def endpoint_value(f, x0, derivative=False):
    """Value (or derivative) of grid samples at ``x0 = +-a`` by extrapolating the end panel."""
    grid = f.grid
    p = 0 if x0 < 0 else len(grid.panels) - 1
    sl = grid.panel_slice(p)
    vals = f.values if not derivative else f.derivative
    if vals is None:
        raise InvalidArgument("sampled function carries no derivative values")
    return complex((lagrange_matrix(grid.nodes[sl], np.array([float(x0)])) @ vals[sl])[0])
