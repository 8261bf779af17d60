"""Metric operators for the PT-symmetric Robin Laplacian.

A metric here is an operator ``Theta = I + K`` (or a truncated spectral
series) that is bounded, positive and satisfies ``Theta H = H* Theta``.
The closed-form kernels below are written for ``c_+- = i alpha +- beta``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegeneracyWarning, InvalidArgument
from .laplacian import SeriesOperator, chi, identity_operator, wavenumber
from .numerics import (
    KernelOperator,
    compose_kernels,
    expansion_kernel,
    hermiticity_defect,
    min_eigenvalue_of,
    piecewise_rule,
)
from .spectrum import sample_matrix

HERMITIAN_TOL = 1e-10


def _sgn(d):
    return np.sign(d)


def _const(value):
    return lambda x: np.full(np.shape(x), value, dtype=complex)


# ------------------------------------------------------------ closed kernels


def kernel_constant(alpha, a):
    """Kernel K of the metric ``I + K`` whose spectral coefficients are all 1."""
    al = float(alpha)

    def k(x, y):
        d = y - x
        e = np.exp(1j * al * (x - y))
        return (e - 1) / (2 * a) + 1j * al / (2 * a) * (np.abs(d) - 2 * a) * _sgn(d) + al**2 / (2 * a) * (
            a**2 - x * y - a * np.abs(d)
        )

    def dx(x, y):
        e = np.exp(1j * al * (x - y))
        return 1j * al * (e - 1) / (2 * a) + al**2 / (2 * a) * (-y + a * _sgn(y - x))

    def dy(x, y):
        e = np.exp(1j * al * (x - y))
        return -1j * al * (e - 1) / (2 * a) + al**2 / (2 * a) * (-x - a * _sgn(y - x))

    def dxx(x, y):
        return -(al**2) * np.exp(1j * al * (x - y)) / (2 * a)

    return KernelOperator(
        k, a, jump_on_diagonal=al != 0, dx=dx, dy=dy, dxx=dxx, dyy=dxx,
        diagonal_jump=_const(2j * al), name="constant",
    )


def _check_cchoice(alpha, a):
    if not 0 < alpha < wavenumber(1, a):
        raise InvalidArgument(f"alpha must lie in (0, k_1) = (0, {wavenumber(1, a):.6g}), got {alpha}")


def kernel_cchoice(alpha, a):
    """Kernel of the metric ``P C`` built from the C operator; requires 0 < alpha < k_1."""
    _check_cchoice(alpha, a)
    return kernel_general(alpha, 0.0, alpha * np.tan(alpha * a), a, name="cchoice")


def kernel_general(alpha, beta, c, a, name="general"):
    """``e^{i alpha (x-y) - beta |x-y|} [c + i alpha sgn(x-y)]`` with real ``c``."""
    al, be, c = float(alpha), float(beta), float(c)

    def k(x, y):
        d = x - y
        return np.exp(1j * al * d - be * np.abs(d)) * (c + 1j * al * _sgn(d))

    def rate_x(x, y):
        return 1j * al - be * _sgn(x - y)

    return KernelOperator(
        k,
        a,
        jump_on_diagonal=al != 0,
        dx=lambda x, y: rate_x(x, y) * k(x, y),
        dy=lambda x, y: -rate_x(x, y) * k(x, y),
        dxx=lambda x, y: rate_x(x, y) ** 2 * k(x, y),
        dyy=lambda x, y: rate_x(x, y) ** 2 * k(x, y),
        diagonal_jump=_const(2j * al),
        name=name,
    )


def theta_kernels(alpha, a):
    """The three kernels ``theta_1, theta_2, theta_3`` and the variant ``theta_4``.

    ``theta_1 + theta_2 + theta_3`` is :func:`kernel_constant`, and
    ``-i d/dx theta_4 = theta_3``.
    """
    al = float(alpha)

    def t1(x, y):
        return (np.exp(1j * al * (x - y)) - 1) / (2 * a)

    def t2(x, y):
        return 1j * al / (2 * a) * (y - a * _sgn(y - x))

    def t3(x, y):
        d = y - x
        return al**2 / (2 * a) * (a**2 - x * y) - 1j * al / (2 * a) * x - 0.5j * al * (1 - 1j * al * d) * _sgn(d)

    def t4(x, y):
        d = y - x
        poly = y**2 * (3 - 1j * al * y) + 3 * x**2 * (1 - 1j * al * y) + 2 * a**2 * (1 + 1j * al * (3 * x - y))
        return al / (12 * a) * poly - 0.25 * al * (2 - 1j * al * d) * d * _sgn(d)

    def t4_dx(x, y):
        d = y - x
        return al / (2 * a) * (x * (1 - 1j * al * y) + 1j * al * a**2) - 0.25 * al * _sgn(d) * (2j * al * d - 2)

    return (
        KernelOperator(t1, a, dx=lambda x, y: 1j * al * np.exp(1j * al * (x - y)) / (2 * a), name="theta1"),
        KernelOperator(t2, a, jump_on_diagonal=True, dx=lambda x, y: np.zeros(np.broadcast(x, y).shape, complex),
                       diagonal_jump=_const(1j * al), name="theta2"),
        KernelOperator(t3, a, jump_on_diagonal=True,
                       dx=lambda x, y: -(al**2) / (2 * a) * y - 1j * al / (2 * a) + 0.5 * al**2 * _sgn(y - x),
                       diagonal_jump=_const(1j * al), name="theta3"),
        # continuous with a kink on the diagonal, flagged so quadratures split there
        KernelOperator(t4, a, jump_on_diagonal=True, dx=t4_dx, diagonal_jump=_const(0.0), name="theta4"),
    )


def kernel_c_operator(alpha, a):
    """Kernel ``L`` of the involution ``C = P + L`` (jump across ``y = -x``)."""
    _check_cchoice(alpha, a)
    al = float(alpha)
    t = np.tan(al * a)

    def k(x, y):
        return al * np.exp(-1j * al * (y + x)) * (t - 1j * _sgn(y + x))

    # crossing y = -x from below to above changes sgn(y + x) from -1 to +1
    return COperator(
        KernelOperator(
            k, a, jump_on_antidiagonal=True,
            dx=lambda x, y: -1j * al * k(x, y),
            antidiagonal_jump=_const(2j * al),
            name="C",
        ),
        al,
    )


@dataclass
class COperator:
    """``(C f)(x) = f(-x) + int L(x, y) f(y) dy``."""

    L: KernelOperator
    alpha: float

    @property
    def a(self):
        return self.L.a

    def matrix(self, grid):
        m = self.L.matrix(grid).copy()
        m[np.arange(grid.size), grid.reflection()] += 1.0
        return m

    def apply_callable(self, f, xs):
        from .numerics import integrate_kernel

        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        return f(-xs) + integrate_kernel(self.L, f, xs)


def parity_matrix(grid):
    return np.eye(grid.size)[grid.reflection()]


def d_constants(n, alpha, a):
    """``D_n`` with ``P phi_n = D_n psi_n`` in the explicit PT normalization (beta = 0)."""
    if n < 0:
        raise InvalidArgument("index must be non-negative")
    if n == 0:
        z = 2 * alpha * a
        return 1.0 if z == 0 else float(np.sin(z) / z)
    k2 = wavenumber(n, a) ** 2
    return float((-1) ** n * (k2 - alpha**2) / k2)


def hs_norm_closed(alpha, beta, c, a):
    """Hilbert-Schmidt norm of :func:`kernel_general` in closed form."""
    x = 4 * a * beta
    if abs(x) < 1e-2:
        # (x + e^{-x} - 1) / x^2 = sum_{k>=2} (-x)^{k-2} / k!
        g = sum((-x) ** (k - 2) / np.prod(np.arange(1, k + 1, dtype=float)) for k in range(2, 12))
    else:
        g = (x + np.expm1(-x)) / x**2
    return float(np.sqrt(8 * a**2 * (c**2 + alpha**2) * g))


# ---------------------------------------------------------------- metric specs


@dataclass
class MetricSpec:
    """A realized metric candidate ``Theta = identity * I + kernel``."""

    name: str
    operator: SeriesOperator
    a: float
    claimed_metric: bool = True
    coefficients: Optional[object] = None
    info: dict = field(default_factory=dict)

    @property
    def kernel(self):
        return self.operator.kernel

    def matrix(self, grid):
        return self.operator.matrix(grid)

    def hermiticity_defect(self, grid):
        return hermiticity_defect(self.kernel, grid)

    def positivity_margin(self, grid):
        """Smallest eigenvalue of the symmetrized discrete ``Theta``.

        A truncated series has finite rank, so for it the margin is taken on
        its range: the smallest eigenvalue of ``C B* W B C`` with ``B`` the
        sampled range functions and ``C`` the square roots of the weights.
        """
        rng = self.info.get("range")
        if rng is not None:
            basis, weights = rng
            b = basis(grid.nodes) * np.sqrt(weights)[None, :]
            g = (b.conj() * grid.weights[:, None]).T @ b
            return float(np.linalg.eigvalsh(0.5 * (g + g.conj().T))[0])
        return min_eigenvalue_of(self.matrix(grid), grid)


def metric_constant(alpha, a):
    return MetricSpec("constant", SeriesOperator(kernel_constant(alpha, a), identity=1.0), a,
                      coefficients=lambda n: np.ones(np.shape(n)), info={"alpha": alpha})


def metric_cchoice(alpha, a):
    from .laplacian import cchoice_square

    return MetricSpec("cchoice", SeriesOperator(kernel_cchoice(alpha, a), identity=1.0), a,
                      coefficients=lambda n: cchoice_square(n, alpha, a), info={"alpha": alpha})


def metric_general(alpha, beta, c, a):
    return MetricSpec("general", SeriesOperator(kernel_general(alpha, beta, c, a), identity=1.0), a,
                      coefficients=None, info={"alpha": alpha, "beta": beta, "c": c})


def theta_series(p, C, N, triples):
    """Truncation ``sum_{n<N} C_n^2 phi_n <phi_n, .>`` of the spectral metric series.

    ``triples`` must hold at least ``N`` eigen-triples in index order.
    """
    if len(triples) < N:
        raise InvalidArgument(f"need {N} eigen-triples, got {len(triples)}")
    tr = list(triples[:N])
    idx = np.array([t.index for t in tr])
    w = C(idx)
    k = expansion_kernel(
        lambda x: sample_matrix(tr, x, "phi"),
        lambda y: sample_matrix(tr, y, "phi"),
        w,
        p.a,
        left_dx=lambda x: sample_matrix(tr, x, "phi", 1),
        name=f"theta_series[{N}]",
    )
    return MetricSpec(f"series[{N}]", SeriesOperator(k, identity=0.0, truncation=N), p.a, coefficients=C,
                      info={"range": (lambda x: sample_matrix(tr, x, "phi"), w)})


def series_deviation_kernel(p, C, N, triples):
    """``sum_{n<N} [C_n^2 phi_n(x) conj(phi_n(y)) - chi_n(x) chi_n(y)]``.

    This is the truncated series with the truncated identity removed; it
    converges pointwise (away from the jump lines) to the closed kernel K.
    """
    tr = list(triples[:N])
    idx = np.array([t.index for t in tr])
    w = np.concatenate([C(idx), -np.ones(N)])

    def basis(x):
        return np.hstack([sample_matrix(tr, x, "phi"), chi("N", np.arange(N)[None, :], np.asarray(x)[:, None], p.a)])

    return expansion_kernel(basis, basis, w, p.a, name=f"series_dev[{N}]")


def _is_zero(k):
    return k.name == "zero"


def theta_prop41(alpha, a, C0, J_N: SeriesOperator, J_D: SeriesOperator, variant="theta3"):
    """Assemble ``Theta = J^N + C_0^2 theta_1 + J^N theta_2 + J^D theta_3``.

    With ``variant="theta4"`` the last term is replaced by ``p* J^N theta_4``,
    ``p* = -i d/dx``.  Compositions with the kernel parts of ``J`` are
    evaluated pointwise by split quadrature.
    """
    if variant not in ("theta3", "theta4"):
        raise InvalidArgument("variant must be 'theta3' or 'theta4'")
    claimed = True
    n_near = int(round(abs(alpha) * 2 * a / np.pi))
    if n_near >= 1 and abs(abs(alpha) - wavenumber(n_near, a)) < 1e-10:
        warnings.warn(f"alpha = {alpha} is a Neumann wavenumber; Theta is not a metric there", DegeneracyWarning)
        claimed = False
    t1, t2, t3, t4 = theta_kernels(alpha, a)
    kern = J_N.kernel + (C0**2) * t1
    if J_N.identity:
        kern = kern + J_N.identity * t2
    if not _is_zero(J_N.kernel):
        kern = kern + compose_kernels(J_N.kernel, t2)
    if variant == "theta3":
        if J_D.identity:
            kern = kern + J_D.identity * t3
        if not _is_zero(J_D.kernel):
            kern = kern + compose_kernels(J_D.kernel, t3)
    else:
        kern = kern + J_N.identity * t3
        if not _is_zero(J_N.kernel):
            dk = J_N.kernel.x_derivative()
            kern = kern + (-1j) * compose_kernels(dk, t4)
    op = SeriesOperator(kern, identity=J_N.identity)
    return MetricSpec(f"j-series-{variant}", op, a, claimed_metric=claimed, info={"alpha": alpha, "C0": C0})


# -------------------------------------------------------------- verification


def verify_quasi_hermiticity(theta: MetricSpec, triples, grid, n_test=10, tol=1e-7):
    """Check ``Theta psi_n = C_n^2 phi_n`` on the first ``n_test`` eigenpairs.

    Without known coefficients the best multiple ``c_n`` of ``phi_n`` is fitted
    and must be real and positive.  Non-real eigenvalues are flagged: no
    metric can map their eigenfunctions onto their own adjoint partners.
    """
    x = grid.nodes
    w = grid.weights
    mat = theta.matrix(grid)
    rows = []
    for t in list(triples)[:n_test]:
        psi = t.psi(x)
        phi = t.phi(x)
        img = mat @ psi
        if theta.coefficients is not None:
            c = complex(np.asarray(theta.coefficients(t.index)))
        else:
            c = complex(np.sum(w * np.conj(phi) * img) / np.sum(w * np.abs(phi) ** 2))
        res = float(np.sqrt(np.sum(w * np.abs(img - c * phi) ** 2)))
        nonreal = abs(t.lam.imag) > 1e-9 * (1 + abs(t.lam))
        ok = res <= tol and c.real > 0 and abs(c.imag) <= 1e-6 * abs(c) and not nonreal
        rows.append({"index": t.index, "lam": [t.lam.real, t.lam.imag], "coefficient": [c.real, c.imag],
                     "residual": res, "nonreal": nonreal, "ok": bool(ok)})
    margin = theta.positivity_margin(grid)
    return {
        "name": theta.name,
        "residuals": {"max_eigen_residual": max((r["residual"] for r in rows), default=0.0),
                      "hermiticity_defect": theta.hermiticity_defect(grid)},
        "per_eigenpair": rows,
        "positivity_margin": margin,
        "passed": bool(all(r["ok"] for r in rows) and margin > 0),
        "grid": grid.describe(),
    }


def verify_pde_system(K: KernelOperator, alpha, beta, a, n_lattice=24, degree=4):
    """Residuals of the wave equation and the two boundary conditions for ``K``.

    The condition at ``x = +-a`` carries a Dirac delta, so it is tested weakly
    against polynomials: with ``J`` the diagonal jump of ``K``,
    ``int [K_x(+-a, y) + (-i alpha +- beta) K(+-a, y)] tau(y) dy + (J(+-a) - 2 i alpha) tau(+-a)``
    must vanish.
    """
    for name in ("dx", "dy", "dxx", "dyy"):
        if getattr(K, name) is None:
            raise InvalidArgument(f"kernel needs an analytic {name}")
    s = (np.arange(n_lattice) + 0.5) / n_lattice * 2 * a - a
    X, Y = np.meshgrid(s, s, indexing="ij")
    off = np.abs(X - Y) > 1e-9
    wave = np.abs(K.dxx(X, Y) - K.dyy(X, Y))[off]
    r_wave = float(wave.max()) if wave.size else 0.0
    bc1 = []
    for sign in (1, -1):
        ya = np.full_like(s, sign * a)
        bc1.append(np.abs(K.dy(s, ya) + (1j * alpha + sign * beta) * K(s, ya)))
    r_bc1 = float(np.max(bc1))
    nodes, weights = piecewise_rule(a, np.empty((1, 0)), 16, 12)
    y, w = nodes[0], weights[0]
    r_bc2 = 0.0
    for sign in (1, -1):
        x0 = sign * a
        xa = np.full_like(y, x0)
        g = K.dx(xa, y) + (-1j * alpha + sign * beta) * K(xa, y)
        jump = complex(K.diagonal_jump(np.array([x0]))[0]) if K.jump_on_diagonal else 0.0
        for j in range(degree + 1):
            tau = (y / a) ** j
            val = np.sum(w * g * tau) + (jump - 2j * alpha) * (sign**j)
            r_bc2 = max(r_bc2, float(abs(val)))
    return {"wave": r_wave, "bc1": r_bc1, "bc2": r_bc2}


def involution_residual(theta: MetricSpec, grid, functions):
    """Max relative ``||(P Theta)^2 f - f||`` over sampled test functions."""
    pt = parity_matrix(grid) @ theta.matrix(grid)
    sq = pt @ pt
    w = grid.weights
    worst = 0.0
    for f in functions:
        v = f(grid.nodes).astype(complex)
        r = np.sqrt(np.sum(w * np.abs(sq @ v - v) ** 2) / np.sum(w * np.abs(v) ** 2))
        worst = max(worst, float(r))
    return worst


def identity_metric(a):
    return MetricSpec("identity", identity_operator(a), a, coefficients=lambda n: np.ones(np.shape(n)))
