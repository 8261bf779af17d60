"""Finite-section realization of ``H + V`` and the Liouville transform.

The form ``t[psi] = ||psi'||^2 + c_+ |psi(a)|^2 - c_- |psi(-a)|^2 + <psi, V psi>``
is discretized in an orthonormal basis of L^2(-a, a).  The default basis is
scaled Legendre polynomials, which converge spectrally for Robin problems; the
Neumann cosine basis is available as ``basis="neumann"``.  Boundary terms
enter exactly through the basis boundary values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg
from numpy.polynomial import legendre as npleg
from scipy.interpolate import CubicSpline

from .errors import DegenerateSystemError, InvalidArgument, PreconditionViolation
from .laplacian import chi, wavenumber
from .numerics import gauss_rule
from .spectrum import BoundaryParams

COLLISION_TOL = 1e-9
EXTRA_LEGENDRE = 40


# --------------------------------------------------------------- potentials


@dataclass(frozen=True)
class Potential:
    """A bounded potential ``V(x)`` with a label for reports."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.f(x), dtype=complex) * np.ones(x.shape)

    @property
    def is_zero(self):
        return self.name == "zero"


def zero_potential():
    return Potential("zero", lambda x: np.zeros_like(x))


def named_potential(spec):
    """Built-ins ``zero``, ``constant[:v]``, ``linear[:s]``, ``sin3`` and ``sine[:k]``."""
    name, _, arg = str(spec).partition(":")
    try:
        val = float(arg) if arg else None
    except ValueError:
        raise InvalidArgument(f"bad potential parameter in {spec!r}") from None
    if name == "zero":
        return zero_potential()
    if name == "constant":
        v0 = 1.0 if val is None else val
        return Potential(f"constant:{v0:g}", lambda x: np.full_like(x, v0))
    if name == "linear":
        s = 1.0 if val is None else val
        return Potential(f"linear:{s:g}", lambda x: s * x)
    if name == "sin3":
        return Potential("sin3", lambda x: np.sin(3 * x))
    if name == "sine":
        k = 1.0 if val is None else val
        return Potential(f"sine:{k:g}", lambda x: np.sin(k * x))
    raise InvalidArgument(f"unknown potential {spec!r}")


def read_samples(path):
    """Columns of a CSV file ``x,value[,d1,d2]`` (an optional header row is skipped)."""
    rows = []
    first = True
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if not first:
                    raise InvalidArgument(f"non-numeric row in {path}: {row}") from None
            first = False
    data = np.array(rows, dtype=float)
    if data.ndim != 2 or data.shape[0] < 4 or data.shape[1] < 2:
        raise InvalidArgument(f"{path}: need at least 4 rows of x,value")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise InvalidArgument(f"{path}: x column must be strictly increasing")
    return data


def potential_from_samples(x, values, name="samples"):
    spline = CubicSpline(np.asarray(x, dtype=float), np.asarray(values, dtype=float))
    return Potential(name, spline)


def potential_from_csv(path):
    data = read_samples(path)
    return potential_from_samples(data[:, 0], data[:, 1], name=f"csv:{path}")


def resolve_potential(spec):
    if spec is None:
        return zero_potential()
    if isinstance(spec, Potential):
        return spec
    if callable(spec):
        return Potential("callable", spec)
    s = str(spec)
    if s.endswith(".csv"):
        return potential_from_csv(s)
    return named_potential(s)


# ------------------------------------------------------------------- bases


def _legendre_values(n, t, derivative=False):
    """Orthonormal Legendre functions on (-1, 1) at ``t``: shape (len(t), n)."""
    t = np.asarray(t, dtype=float)
    out = np.empty((t.size, n))
    for j in range(n):
        c = np.zeros(j + 1)
        c[j] = np.sqrt(j + 0.5)
        out[:, j] = npleg.legval(t, npleg.legder(c) if derivative else c)
    return out


class _Basis:
    """Real orthonormal basis on (-a, a) with values, boundary values and stiffness."""

    def __init__(self, kind, n, a):
        self.kind, self.n, self.a = kind, n, a

    def values(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "neumann":
            return chi("N", np.arange(self.n)[None, :], x[:, None], self.a)
        return _legendre_values(self.n, x / self.a) / np.sqrt(self.a)

    def boundary(self, sign):
        if self.kind == "neumann":
            return chi("N", np.arange(self.n), sign * self.a, self.a)
        j = np.arange(self.n)
        return np.sqrt((j + 0.5) / self.a) * float(sign) ** j

    def stiffness(self):
        if self.kind == "neumann":
            return np.diag(wavenumber(np.arange(self.n), self.a) ** 2)
        j = np.arange(self.n)
        mn = np.minimum.outer(j, j)
        even = ((j[:, None] + j[None, :]) % 2) == 0
        scale = np.sqrt(np.outer(2 * j + 1, 2 * j + 1)) / (2 * self.a**2)
        return np.where(even, scale * mn * (mn + 1), 0.0)

    def quadrature(self, extra=0):
        m = self.n + extra + 40
        if self.kind == "neumann":
            m = 2 * self.n + extra + 40
        t, w = np.polynomial.legendre.leggauss(m)
        return self.a * t, self.a * w


# --------------------------------------------------------- Galerkin systems


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """Finite section of ``H + V`` with biorthonormal eigenvectors.

    ``right[:, n]`` and ``left[:, n]`` are basis coefficients of ``xi_n`` and
    ``eta_n`` (eigenfunctions of ``H + V`` and its adjoint), ordered by real
    part, scaled so that ``eta_n(-a) = chi_n^N(-a)`` and ``<eta_n, xi_n> = 1``.
    Only the first ``M`` pairs are reported as resolved.
    """

    params: BoundaryParams
    potential: Potential
    M: int
    basis: str
    matrix: np.ndarray
    all_eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    _basis: _Basis

    @property
    def eigenvalues(self):
        return self.all_eigenvalues[: self.M]

    def biorthogonality_defect(self):
        y, x = self.left[:, : self.M], self.right[:, : self.M]
        return float(np.max(np.abs(y.conj().T @ x - np.eye(self.M))))

    def neumann_projection(self, size=None):
        """Matrix ``B[j, k] = <b_j, chi_k^N>`` from the internal basis to the Neumann basis."""
        size = self.M if size is None else size
        if self.basis == "neumann":
            return np.eye(self._basis.n, size)
        x, w = self._basis.quadrature(extra=2 * size)
        return (self._basis.values(x) * w[:, None]).T @ chi("N", np.arange(size)[None, :], x[:, None], self.params.a)

    def eigenfunction(self, n, x, adjoint=False):
        coef = (self.left if adjoint else self.right)[:, n]
        return self._basis.values(x) @ coef


def galerkin_matrix(p: BoundaryParams, V=None, M=40, basis="legendre", n_basis=None):
    """Assemble and diagonalize the finite section of ``H + V``.

    ``M`` is the number of reported eigenpairs; the Legendre path works in a
    larger internal basis (``2M + 40`` functions by default) so that all of
    them are resolved.
    """
    if int(M) != M or M < 4:
        raise InvalidArgument("M must be an integer >= 4")
    M = int(M)
    if basis not in ("legendre", "neumann"):
        raise InvalidArgument("basis must be 'legendre' or 'neumann'")
    pot = resolve_potential(V)
    n = M if basis == "neumann" else (n_basis or 2 * M + EXTRA_LEGENDRE)
    if n < M:
        raise InvalidArgument("internal basis smaller than M")
    b = _Basis(basis, n, p.a)
    bp, bm = b.boundary(1), b.boundary(-1)
    A = b.stiffness().astype(complex) + p.c_plus * np.outer(bp, bp) - p.c_minus * np.outer(bm, bm)
    if not pot.is_zero:
        x, w = b.quadrature()
        vals = b.values(x)
        A = A + (vals * (w * pot(x))[:, None]).T @ vals
    lam, vl, vr = scipy.linalg.eig(A, left=True, right=True)
    order = np.lexsort((lam.imag, np.round(lam.real, 9)))
    lam, vl, vr = lam[order], vl[:, order], vr[:, order]
    # eta_n(-a) = chi_n^N(-a) fixes the scale of the adjoint family
    target = chi("N", np.arange(n), -p.a, p.a)
    eta_left = bm @ vl
    ok = np.abs(eta_left) > 1e-300
    vl = vl * np.where(ok, target / np.where(ok, eta_left, 1.0), 1.0)[None, :]
    pair = np.sum(np.conj(vl) * vr, axis=0)
    vr = vr / np.where(np.abs(pair) > 0, pair, 1.0)[None, :]
    return GalerkinSystem(p, pot, M, basis, A, lam, vr, vl, b)


def _check_simple(lam, matrix_norm=0.0):
    """Raise on colliding eigenvalues.

    A Jordan block perturbed by rounding splits by about ``sqrt(eps ||A||)``,
    so pairs closer than that are not resolved as simple either.
    """
    tol = max(COLLISION_TOL, np.sqrt(np.finfo(float).eps * matrix_norm))
    d = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(d, np.inf)
    if lam.size > 1 and np.min(d) <= tol:
        i, j = np.unravel_index(np.argmin(d), d.shape)
        raise DegenerateSystemError(f"eigenvalues {lam[i]} and {lam[j]} collide; Omega_V is undefined")


@dataclass(frozen=True)
class OmegaV:
    """``Omega_V`` in the Neumann basis: ``(Omega_V)[m, k] = <eta_m, chi_k^N>``."""

    matrix: np.ndarray
    hs_deviation: float


def omega_v(sys: GalerkinSystem):
    """Similarity map ``xi_n -> chi_n^N`` restricted to the first ``M`` modes."""
    _check_simple(sys.eigenvalues, np.linalg.norm(sys.matrix))
    B = sys.neumann_projection()
    Y = sys.left[:, : sys.M]
    mat = Y.conj().T @ B
    return OmegaV(mat, float(np.linalg.norm(mat - np.eye(sys.M))))


def omega_v_stability(p: BoundaryParams, V, M, basis="legendre"):
    """HS norms of ``Omega_V - I`` at ``M`` and ``2M`` and their relative change."""
    h1 = omega_v(galerkin_matrix(p, V, M, basis)).hs_deviation
    h2 = omega_v(galerkin_matrix(p, V, 2 * M, basis)).hs_deviation
    return {"M": M, "hs_M": h1, "hs_2M": h2, "relative_change": abs(h2 - h1) / max(abs(h2), 1e-300)}


def asymptotic_gap(sys: GalerkinSystem):
    """``lam_n - k_n^2`` for ``n <= M/2``; tends to ``(c_+ - c_-)/a``."""
    if not sys.potential.is_zero:
        raise PreconditionViolation("the eigenvalue asymptotics is stated for V = 0")
    n = np.arange(sys.M // 2 + 1)
    return sys.eigenvalues[n] - wavenumber(n, sys.params.a) ** 2


# ------------------------------------------------------ Liouville transform


@dataclass(frozen=True)
class Coefficient:
    """``rho`` with its first two derivatives as vectorized callables."""

    f: Callable
    d1: Callable
    d2: Callable
    name: str = ""

    @classmethod
    def constant(cls, r):
        return cls(lambda x: np.full(np.shape(x), float(r)), lambda x: np.zeros(np.shape(x)),
                   lambda x: np.zeros(np.shape(x)), name=f"constant:{r:g}")

    @classmethod
    def exponential(cls, k):
        """``rho(x) = exp(k x)``."""
        return cls(lambda x: np.exp(k * np.asarray(x)), lambda x: k * np.exp(k * np.asarray(x)),
                   lambda x: k * k * np.exp(k * np.asarray(x)), name=f"exp:{k:g}")

    @classmethod
    def from_samples(cls, x, values, d1=None, d2=None, name="samples"):
        """Cubic-spline interpolant; supplied derivative columns are interpolated instead."""
        s = CubicSpline(x, values)
        f1 = CubicSpline(x, d1) if d1 is not None else s.derivative(1)
        f2 = CubicSpline(x, d2) if d2 is not None else (f1.derivative(1) if d1 is not None else s.derivative(2))
        return cls(s, f1, f2, name=name)

    @classmethod
    def from_csv(cls, path):
        data = read_samples(path)
        cols = [data[:, j] if data.shape[1] > j else None for j in (2, 3)]
        return cls.from_samples(data[:, 0], data[:, 1], *cols, name=f"csv:{path}")


@dataclass(frozen=True, eq=False)
class LiouvilleData:
    """``-(rho psi')' = lam psi`` with ``rho psi' + c_+- psi = 0`` rewritten as ``-u'' + W u``.

    The new variable ``s = f(x)`` runs over ``(f(-a), f(a))``; ``params`` and
    ``potential`` describe the same problem shifted to ``(-b, b)`` with
    ``b = (f(a) - f(-a))/2``.
    """

    rho: Coefficient
    a: float
    endpoints: tuple
    c_minus: complex
    c_plus: complex
    f: Callable
    f_inv: Callable
    W: Callable

    @property
    def half_width(self):
        return 0.5 * (self.endpoints[1] - self.endpoints[0])

    @property
    def center(self):
        return 0.5 * (self.endpoints[1] + self.endpoints[0])

    @property
    def params(self):
        return BoundaryParams(self.half_width, self.c_minus, self.c_plus)

    @property
    def potential(self):
        m = self.center
        return Potential(f"liouville:{self.rho.name}", lambda t: self.W(np.asarray(t) + m))

    def eigenvalues(self, M=40, basis="legendre"):
        return galerkin_matrix(self.params, self.potential, M, basis).eigenvalues


def _primitive(rho, a, order=40):
    t, w = gauss_rule(order)

    def f(x):
        x = np.asarray(x, dtype=float)
        nodes = 0.5 * x[..., None] * (t + 1)
        return 0.5 * x * np.sum(w / np.sqrt(rho.f(nodes)), axis=-1)

    return f


def _inverse(f, lo, hi, iters=200):
    """Inverse of an increasing function on ``[lo, hi]`` by vectorized bisection."""

    def inv(s):
        s = np.asarray(s, dtype=float)
        a_, b_ = np.full(s.shape, lo), np.full(s.shape, hi)
        for _ in range(iters):
            mid = 0.5 * (a_ + b_)
            below = f(mid) < s
            a_, b_ = np.where(below, mid, a_), np.where(below, b_, mid)
            if np.all(b_ - a_ <= 4 * np.finfo(float).eps * max(abs(lo), abs(hi), 1.0)):
                break
        return 0.5 * (a_ + b_)

    return inv


def liouville_transform(rho: Coefficient, p: BoundaryParams, bound, n_check=2001):
    """Liouville transform of ``-(rho psi')'`` on (-a, a) with Robin constants ``c_+-``.

    ``c~ = (c - rho'/4)/sqrt(rho)`` at the endpoints and
    ``W = (rho''/4 - rho'^2/(16 rho)) o f^-1``.  ``rho`` must satisfy
    ``1/bound <= rho <= bound`` on a check lattice.
    """
    a = p.a
    xs = np.linspace(-a, a, n_check)
    r = np.asarray(rho.f(xs), dtype=float)
    if not np.all(np.isfinite(r)) or r.min() < 1.0 / bound or r.max() > bound:
        raise InvalidArgument(f"rho violates 1/{bound} <= rho <= {bound} (range [{r.min():.3g}, {r.max():.3g}])")
    f = _primitive(rho, a)
    f_inv = _inverse(f, -a, a)

    def W(s):
        x = f_inv(s)
        r0, r1, r2 = rho.f(x), rho.d1(x), rho.d2(x)
        return 0.25 * r2 - r1**2 / (16 * r0)

    def tilde(c, x0):
        return (c - 0.25 * float(rho.d1(x0))) / np.sqrt(float(rho.f(x0)))

    ends = (float(f(np.array(-a))), float(f(np.array(a))))
    return LiouvilleData(rho, a, ends, complex(tilde(p.c_minus, -a)), complex(tilde(p.c_plus, a)), f, f_inv, W)
