"""Dirichlet and Neumann Laplacians on (-a, a): eigenbases, Green's functions and J operators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgument, SpectralPointError
from .numerics import KernelOperator, SampledFunction, norm

SPECTRAL_GUARD = 1e-12


def wavenumber(n, a):
    """k_n = n pi / (2a)."""
    return np.asarray(n) * np.pi / (2.0 * a)


def _check_kind(kind):
    kind = str(kind).upper()
    if kind not in ("D", "N"):
        raise InvalidArgument(f"kind must be 'D' or 'N', got {kind!r}")
    return kind


def chi(kind, n, x, a):
    """Normalized eigenfunction n of the Dirichlet (D) or Neumann (N) Laplacian.

    ``n`` may be an array; it broadcasts against ``x``.  chi_0^D is zero.
    """
    kind = _check_kind(kind)
    n = np.asarray(n)
    x = np.asarray(x, dtype=float)
    k = wavenumber(n, a)
    if kind == "D":
        return np.sin(k * (x + a)) / np.sqrt(a)
    return np.where(n == 0, 1.0 / np.sqrt(2.0 * a), np.cos(k * (x + a)) / np.sqrt(a))


def chi_derivative(kind, n, x, a, order=1):
    """Analytic derivative of :func:`chi` of order 1 or 2."""
    kind = _check_kind(kind)
    n = np.asarray(n)
    x = np.asarray(x, dtype=float)
    k = wavenumber(n, a)
    z = k * (x + a)
    if order == 2:
        return -(k**2) * chi(kind, n, x, a)
    if order != 1:
        raise InvalidArgument("only first and second derivatives are available")
    if kind == "D":
        return k * np.cos(z) / np.sqrt(a)
    return -k * np.sin(z) / np.sqrt(a)


@dataclass(frozen=True)
class ModeFunction:
    kind: str
    n: int
    a: float

    def __post_init__(self):
        object.__setattr__(self, "kind", _check_kind(self.kind))
        if self.n < 0:
            raise InvalidArgument("mode index must be non-negative")

    @property
    def k(self):
        return float(wavenumber(self.n, self.a))

    def __call__(self, x):
        return chi(self.kind, self.n, x, self.a)

    def derivative(self, x, order=1):
        return chi_derivative(self.kind, self.n, x, self.a, order)

    def sample(self, grid, with_derivative=True):
        x = grid.nodes
        d = self.derivative(x).astype(complex) if with_derivative else None
        return SampledFunction(grid, np.asarray(self(x), dtype=complex), d)


def momentum_identity_check(n, a, grid):
    """Residual norms of ``i p chi_n^D = k_n chi_n^N`` and ``i p chi_n^N = -k_n chi_n^D``.

    With the momentum ``p = -i d/dx`` the operator ``i p`` is plain differentiation.
    """
    if n < 0:
        raise InvalidArgument("mode index must be non-negative")
    x = grid.nodes
    k = float(wavenumber(n, a))
    r1 = chi_derivative("D", n, x, a) - k * chi("N", n, x, a)
    r2 = chi_derivative("N", n, x, a) + k * chi("D", n, x, a)
    return norm(SampledFunction(grid, r1.astype(complex))), norm(SampledFunction(grid, r2.astype(complex)))


def _nearest_eigenvalue(kind, k, a):
    n = max(int(np.rint(np.real(2 * k * a / np.pi))), 0 if kind == "N" else 1)
    return float(wavenumber(n, a) ** 2)


def green(kind, k, x, y, a):
    """Kernel of ``(-Delta - k^2)^{-1}`` with Dirichlet or Neumann conditions."""
    kind = _check_kind(kind)
    k = complex(k)
    if k == 0:
        if kind == "D":
            return green_zero_dirichlet(x, y, a)
        raise SpectralPointError("0 is a Neumann eigenvalue", nearest_eigenvalue=0.0)
    s = np.sin(2 * k * a)
    if abs(s) <= SPECTRAL_GUARD:
        raise SpectralPointError(
            f"k^2 = {k * k} is (numerically) a {kind} eigenvalue",
            nearest_eigenvalue=_nearest_eigenvalue(kind, k, a),
        )
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    if kind == "D":
        num = np.sin(k * (lo + a)) * np.sin(k * (hi - a))
    else:
        num = np.cos(k * (lo + a)) * np.cos(k * (hi - a))
    return -num / (k * s)


def green_zero_dirichlet(x, y, a):
    """Kernel of the inverse Dirichlet Laplacian."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    return (lo + a) * (a - hi) / (2 * a)


def green_neumann_reduced(x, y, a):
    """Kernel of the Neumann reduced resolvent at 0 (annihilates constants)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    return (lo + a) ** 2 / (4 * a) + (hi - a) ** 2 / (4 * a) - a / 3


def green_operator(kind, k, a):
    """Green's function of ``(-Delta - k^2)^{-1}`` as a :class:`KernelOperator`."""
    kind = _check_kind(kind)
    green(kind, k, 0.0, 0.0, a)  # spectral-point guard up front
    k = complex(k)
    x_der = _green_dx(kind, k, a)
    # the kernel is continuous with a kink at y = x; flagging the diagonal
    # makes every quadrature split there, and dx genuinely jumps by -1
    return KernelOperator(
        lambda x, y: green(kind, k, x, y, a) + 0j,
        a,
        jump_on_diagonal=True,
        diagonal_jump=lambda x: np.zeros(np.shape(x), dtype=complex),
        dx=x_der,
        name=f"G_{kind}^{k}",
    )


def reduced_neumann_operator(a):
    """Kernel operator of the reduced Neumann resolvent ``(-Delta_N^perp)^{-1}``."""
    return KernelOperator(
        lambda x, y: green_neumann_reduced(x, y, a) + 0j,
        a,
        jump_on_diagonal=True,
        diagonal_jump=lambda x: np.zeros(np.shape(x), dtype=complex),
        dx=lambda x, y: np.where(x < y, x + a, x - a) / (2 * a) + 0j,
        name="G_N_reduced",
    )


def _green_dx(kind, k, a):
    if k == 0:
        return lambda x, y: np.where(x < y, (a - y) / (2 * a), -(y + a) / (2 * a)) + 0j
    s = k * np.sin(2 * k * a)

    def dx(x, y):
        if kind == "D":
            left = -k * np.cos(k * (x + a)) * np.sin(k * (y - a))
            right = -k * np.sin(k * (y + a)) * np.cos(k * (x - a))
        else:
            left = k * np.sin(k * (x + a)) * np.cos(k * (y - a))
            right = k * np.cos(k * (y + a)) * np.sin(k * (x - a))
        return np.where(x < y, left, right) / s

    return dx


@dataclass(frozen=True)
class CoefficientSequence:
    """Positive coefficients ``C_n^2`` with bounds ``m1 < C_n < m2``."""

    squares: Callable[[np.ndarray], np.ndarray]
    m1: float
    m2: float
    name: str = ""

    def __call__(self, n):
        return np.asarray(self.squares(np.asarray(n)), dtype=float)

    def check(self, n_max):
        c = np.sqrt(self(np.arange(n_max + 1)))
        if not (0 < self.m1 < self.m2) or np.any(c <= self.m1) or np.any(c >= self.m2):
            raise InvalidArgument(f"coefficients violate the bounds ({self.m1}, {self.m2}) up to n={n_max}")
        return True


def unit_coefficients():
    return CoefficientSequence(lambda n: np.ones(np.shape(n)), 0.5, 2.0, name="unit")


def cchoice_square(n, alpha, a):
    """C_0^2 = 2 alpha a / sin(2 alpha a) and C_n^2 = k_n^2 / |k_n^2 - alpha^2|."""
    n = np.asarray(n)
    k2 = wavenumber(n, a) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        c0 = 1.0 if alpha == 0 else 2 * alpha * a / np.sin(2 * alpha * a)
        cn = k2 / np.abs(k2 - alpha**2)
    return np.where(n == 0, c0, cn)


def cchoice_coefficients(alpha, a):
    """Coefficient sequence of the C-operator metric; requires 0 < alpha < k_1."""
    if not 0 < alpha < wavenumber(1, a):
        raise InvalidArgument(f"alpha must lie in (0, k_1) = (0, {wavenumber(1, a):.6g})")
    values = cchoice_square(np.arange(3), alpha, a)
    m1 = 0.5 * min(1.0, np.sqrt(values.min()))
    m2 = 2.0 * np.sqrt(max(values.max(), 1.0))
    return CoefficientSequence(lambda n: cchoice_square(n, alpha, a), m1, m2, name="cchoice")


class SeriesOperator:
    """``identity * I + sum_{n<N} w_n f_n(x) conj(g_n(y))`` realized as a kernel.

    For a truncated expansion ``sum C_n^2 chi_n <chi_n, .>`` the plain mode
    uses ``w_n = C_n^2`` with no identity part.  The subtract-identity mode
    stores ``I + sum (C_n^2 - 1) chi_n <chi_n, .>``, which is the same
    operator on the span of the first N modes but converges far faster when
    ``C_n^2 -> 1``.
    """

    def __init__(self, kernel: KernelOperator, identity: float = 0.0, truncation: Optional[int] = None):
        self.kernel = kernel
        self.identity = float(identity)
        self.truncation = truncation
        self.a = kernel.a

    def matrix(self, grid):
        m = self.kernel.matrix(grid)
        if self.identity:
            m = m + self.identity * np.eye(grid.size)
        return m

    def apply(self, f):
        return SampledFunction(f.grid, self.matrix(f.grid) @ f.values)

    def apply_callable(self, f, xs, **kw):
        from .numerics import integrate_kernel

        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        return self.identity * f(xs) + integrate_kernel(self.kernel, f, xs, **kw)


def mode_kernel(kind, weights, a, n_start=0, chunk=128):
    """Smooth kernel ``sum_n weights[n - n_start] chi_n(x) chi_n(y)``."""
    kind = _check_kind(kind)
    weights = np.asarray(weights, dtype=float)
    ns = np.arange(n_start, n_start + weights.size)

    def kernel(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        shape = x.shape
        xf, yf = x.ravel(), y.ravel()
        if xf.size > 1 and _is_outer(x, y):
            xs, ys = x[:, 0], y[0, :]
            out = np.zeros((xs.size, ys.size))
            for s in range(0, ns.size, chunk):
                sl = slice(s, s + chunk)
                cx = chi(kind, ns[sl][None, :], xs[:, None], a)
                cy = chi(kind, ns[sl][None, :], ys[:, None], a)
                out += (cx * weights[sl]) @ cy.T
            return out.astype(complex)
        out = np.zeros(xf.size)
        for s in range(0, ns.size, chunk):
            sl = slice(s, s + chunk)
            cx = chi(kind, ns[sl][None, :], xf[:, None], a)
            cy = chi(kind, ns[sl][None, :], yf[:, None], a)
            out += np.sum(cx * cy * weights[sl], axis=1)
        return out.reshape(shape).astype(complex)

    def dx(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        xf, yf = x.ravel(), y.ravel()
        out = np.zeros(xf.size)
        for s in range(0, ns.size, chunk):
            sl = slice(s, s + chunk)
            cx = chi_derivative(kind, ns[sl][None, :], xf[:, None], a)
            cy = chi(kind, ns[sl][None, :], yf[:, None], a)
            out += np.sum(cx * cy * weights[sl], axis=1)
        return out.reshape(x.shape).astype(complex)

    return KernelOperator(kernel, a, dx=dx, name=f"sum_{kind}")


def _is_outer(x, y):
    """True when broadcast arrays came from ``x[:, None]`` and ``y[None, :]``."""
    if x.ndim != 2:
        return False
    return bool(np.all(x == x[:, :1]) and np.all(y == y[:1, :]))


def j_operator(kind, C, truncation, a, subtract_identity=False):
    """Truncated series ``J = sum_{n<N} C_n^2 chi_n <chi_n, .>`` (Hermitian by construction)."""
    kind = _check_kind(kind)
    if int(truncation) != truncation or truncation < 1:
        raise InvalidArgument("truncation order must be a positive integer")
    C.check(truncation)
    n0 = 1 if kind == "D" else 0
    ns = np.arange(n0, truncation)
    w = C(ns)
    if subtract_identity:
        return SeriesOperator(mode_kernel(kind, w - 1.0, a, n_start=n0), identity=1.0, truncation=truncation)
    return SeriesOperator(mode_kernel(kind, w, a, n_start=n0), identity=0.0, truncation=truncation)


def j_cchoice_resolvent(kind, alpha, a):
    """Closed form of J for the C-choice coefficients via Green's functions.

    J^N = I + alpha^2 G_N^alpha + C_0^2 chi_0 <chi_0, .>,  J^D = I + alpha^2 G_D^alpha.
    """
    kind = _check_kind(kind)
    cchoice_coefficients(alpha, a)
    g = green_operator(kind, alpha, a)
    k = (alpha**2) * g
    if kind == "N":
        c0 = float(cchoice_square(0, alpha, a))
        rank1 = KernelOperator(
            lambda x, y: np.full(np.broadcast(x, y).shape, c0 / (2 * a), dtype=complex),
            a,
            dx=lambda x, y: np.zeros(np.broadcast(x, y).shape, dtype=complex),
            diagonal_jump=lambda x: np.zeros(np.shape(x), dtype=complex),
        )
        k = k + rank1
    return SeriesOperator(k, identity=1.0)


def identity_operator(a):
    from .numerics import zero_kernel

    return SeriesOperator(zero_kernel(a), identity=1.0)
