"""Similarity maps ``Omega = I + L`` and the self-adjoint operator ``h = Omega H Omega^-1``.

The target basis is the Neumann eigenbasis ``e_n = chi_n^N``, so ``Omega``
sends the eigenfunction ``psi_n`` of H to ``chi_n^N`` and ``h`` is diagonal in
that basis.  Closed kernels are written for ``c_+- = i alpha`` (beta = 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePairError, InvalidArgument
from .laplacian import ModeFunction, chi, chi_derivative, wavenumber
from .metric import kernel_constant
from .numerics import (
    KernelOperator,
    SampledFunction,
    compose_kernels,
    endpoint_value,
    expansion_kernel,
    hs_norm,
    lattice,
    make_grid,
    symmetrized,
    zero_kernel,
)
from .spectrum import (
    BoundaryParams,
    find_eigenvalues,
    geometric_multiplicity,
    sample_matrix,
)

DEGENERACY_TOL = 1e-10
RANK_TOL = 1e-6


def _sgn(d):
    return np.sign(d)


def _const(value):
    return lambda x: np.full(np.shape(x), value, dtype=complex)


# ----------------------------------------------------------- closed kernels


@dataclass(frozen=True)
class SimilarityMaps:
    """``Omega = I + L`` and ``Omega^-1 = I + M`` with target basis ``chi_n^N``.

    With this basis the unitary part of ``Omega = U + L`` is the identity.
    """

    alpha: float
    a: float
    L: KernelOperator
    M: KernelOperator
    basis: str = "neumann"
    unitary: str = "identity"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def omega_matrix(self, grid):
        return np.eye(grid.size) + self.L.matrix(grid)

    def omega_inv_matrix(self, grid):
        return np.eye(grid.size) + self.M.matrix(grid)

    def composition_residual(self, grid, n_test=6):
        """Defect of ``(I+L)(I+M) = I`` on a grid.

        ``kernel`` is the max of ``|L + M + LM|`` over node pairs, with the
        product integrated by split quadrature; ``action`` the max relative
        defect of the Nyström product on smooth test functions.
        """
        x = grid.nodes
        X, Y = np.meshgrid(x, x, indexing="ij")
        k = self.L(X, Y) + self.M(X, Y) + compose_kernels(self.L, self.M)(X, Y)
        prod = self.omega_matrix(grid) @ self.omega_inv_matrix(grid)
        w = grid.weights
        act = 0.0
        for j in range(n_test):
            f = np.exp(1j * (j + 1) * x / self.a) * (1 + x**2) ** (j % 3)
            act = max(act, float(np.sqrt(np.sum(w * np.abs(prod @ f - f) ** 2) / np.sum(w * np.abs(f) ** 2))))
        return {"kernel": float(np.max(np.abs(k))), "action": act}

    def lm_identity_residual(self, n_lattice=12):
        """Max of ``|LM + L + M|`` on a lattice (the product identity ``LM = -L - M``)."""
        s = lattice(self.a, n_lattice)
        X, Y = np.meshgrid(s, s, indexing="ij")
        k = self.L(X, Y) + self.M(X, Y) + compose_kernels(self.L, self.M)(X, Y)
        return float(np.max(np.abs(k)))

    def factorization_residual(self, n_lattice=12):
        """Max of ``|L + L* + L*L - K_constant|``, i.e. ``Omega* Omega - (I + K_constant)``."""
        s = lattice(self.a, n_lattice)
        X, Y = np.meshgrid(s, s, indexing="ij")
        ls = self.L.adjoint()
        k = self.L(X, Y) + ls(X, Y) + compose_kernels(ls, self.L)(X, Y)
        return float(np.max(np.abs(k - kernel_constant(self.alpha, self.a)(X, Y))))

    def mapping_residuals(self, triples, grid):
        """Per index: ``||(I+L) psi_n - chi_n||`` and ``||(I+M) chi_n - psi_n||``."""
        x = grid.nodes
        w = grid.weights
        om, omi = self.omega_matrix(grid), self.omega_inv_matrix(grid)
        out = []
        for t in triples:
            psi = t.psi(x)
            ch = chi("N", t.index, x, self.a)
            r1 = np.sqrt(np.sum(w * np.abs(om @ psi - ch) ** 2))
            r2 = np.sqrt(np.sum(w * np.abs(omi @ ch - psi) ** 2))
            out.append((float(r1), float(r2)))
        return out

    def derivative_identity_residual(self, grid, f, df):
        """``||(Mf)' - (-i alpha Mf - i alpha f)||`` for a smooth callable ``f``."""
        x = grid.nodes
        fv = np.asarray(f(x), dtype=complex)
        mf = self.M.matrix(grid) @ fv
        dmf = self.M.derivative_matrix(grid) @ fv
        r = dmf - (-1j * self.alpha * mf - 1j * self.alpha * fv)
        return float(np.sqrt(np.sum(grid.weights * np.abs(r) ** 2)))

    def hs_norms(self, grid):
        return {"L": hs_norm(self.L, grid), "M": hs_norm(self.M, grid)}

    def sigma_min(self, grid):
        """Smallest singular value of the symmetrized discrete ``Omega``."""
        return float(np.linalg.svd(symmetrized(self.omega_matrix(grid), grid), compute_uv=False)[-1])


def _l_kernel(alpha, a):
    al = float(alpha)

    def k(x, y):
        return 1j * al / (2 * a) * (y - a * _sgn(y - x)) + (np.exp(-1j * al * (y + a)) - 1) / (2 * a)

    def dy(x, y):
        return np.broadcast_to(1j * al / (2 * a) * (1 - np.exp(-1j * al * (y + a))), np.broadcast(x, y).shape)

    def zero(x, y):
        return np.zeros(np.broadcast(x, y).shape, dtype=complex)

    return KernelOperator(k, a, jump_on_diagonal=True, dx=zero, dxx=zero, dy=dy,
                          diagonal_jump=_const(1j * al), name="L")


def _m_kernel(alpha, a):
    al = float(alpha)
    s = np.sin(2 * al * a)
    cot = np.cos(2 * al * a) / s

    def k(x, y):
        return (
            al * np.exp(1j * al * (a - x)) / s
            - 0.5 * al * np.exp(-1j * al * (x - y)) * (cot - 1j * _sgn(y - x))
            - al * np.exp(-1j * al * (x + y)) / (2 * s)
        )

    def dx(x, y):
        return -1j * al * k(x, y)

    def dxx(x, y):
        return -(al**2) * k(x, y)

    def dy(x, y):
        return -0.5j * al**2 * np.exp(-1j * al * (x - y)) * (cot - 1j * _sgn(y - x)) + 1j * al**2 * np.exp(
            -1j * al * (x + y)
        ) / (2 * s)

    return KernelOperator(k, a, jump_on_diagonal=True, dx=dx, dxx=dxx, dy=dy,
                          diagonal_jump=_const(-1j * al), name="M")


def omega_kernels(alpha, a):
    """Closed kernels of ``Omega = I + L`` and ``Omega^-1 = I + M`` for ``c_+- = i alpha``.

    Raises :class:`DegeneratePairError` when ``sin(2 alpha a)`` vanishes: there
    ``alpha = k_n``, H has a Jordan block and ``M`` has a pole.
    """
    if not np.isfinite(alpha) or not np.isfinite(a) or a <= 0:
        raise InvalidArgument("alpha must be finite and a positive")
    if alpha == 0:
        return SimilarityMaps(0.0, a, zero_kernel(a), zero_kernel(a))
    if abs(np.sin(2 * alpha * a)) < DEGENERACY_TOL:
        raise DegeneratePairError(f"alpha = {alpha} is a Neumann wavenumber; Omega is not invertible")
    return SimilarityMaps(float(alpha), a, _l_kernel(alpha, a), _m_kernel(alpha, a))


# ------------------------------------------------------------- series maps


@dataclass(frozen=True)
class OmegaSeries:
    """Rank-N truncations ``Omega_N = sum chi_n <phi_n, .>`` and ``Omega_N^-1 = sum psi_n <chi_n, .>``.

    ``L`` and ``M`` are the truncations with the truncated identity
    ``P_N = sum chi_n <chi_n, .>`` removed; they converge to the closed
    kernels away from the jump lines.  ``hs_deviation`` is
    ``||Omega_N - P_N||_HS = (sum ||phi_n - chi_n||^2)^{1/2}``.
    """

    N: int
    L: KernelOperator
    M: KernelOperator
    hs_deviation: float


def _hs_tail(triples, a, chunk=200):
    """``sum_n ||phi_n - chi_n^N||^2`` on a grid resolving the highest mode."""
    n_top = max(t.index for t in triples)
    grid = make_grid(a, max(16, n_top // 2 + 8), 12)
    x, w = grid.nodes, grid.weights
    total = 0.0
    for s in range(0, len(triples), chunk):
        part = triples[s : s + chunk]
        idx = np.array([t.index for t in part])
        diff = sample_matrix(part, x, "phi") - chi("N", idx[None, :], x[:, None], a)
        total += float(np.sum(w[:, None] * np.abs(diff) ** 2))
    return total


def omega_series(p: BoundaryParams, triples, N):
    """Series realization of ``Omega`` and ``Omega^-1`` from ``N`` biorthonormal triples.

    Works for any boundary parameters whose first ``N`` eigenvalues are simple.
    """
    if N < 1 or len(triples) < N:
        raise InvalidArgument(f"need {N} eigen-triples, got {len(triples)}")
    tr = list(triples[:N])
    for t in tr:
        if t.algebraic_multiplicity != 1 or t.A is None:
            raise DegeneratePairError(f"eigen-triple at lam = {t.lam} is degenerate or not normalized")
    idx = np.arange(N)
    a = p.a

    def chis(x):
        return chi("N", idx[None, :], np.asarray(x)[:, None], a).astype(complex)

    ones = np.ones(N)
    L = expansion_kernel(chis, lambda y: sample_matrix(tr, y, "phi") - chis(y), ones, a, name=f"L_series[{N}]")
    M = expansion_kernel(lambda x: sample_matrix(tr, x, "psi") - chis(x), chis, ones, a, name=f"M_series[{N}]")
    return OmegaSeries(N, L, M, float(np.sqrt(_hs_tail(tr, a))))


def omega_series_matrix(triples, size, grid=None):
    """Neumann-basis matrix ``<chi_m, Omega_N chi_k> = <phi_m, chi_k>`` for ``m, k < size``."""
    tr = list(triples[:size])
    if len(tr) < size:
        raise InvalidArgument(f"need {size} eigen-triples")
    a = tr[0].params.a
    grid = grid or make_grid(a, max(16, size), 12)
    x, w = grid.nodes, grid.weights
    phi = sample_matrix(tr, x, "phi")
    ch = chi("N", np.arange(size)[None, :], x[:, None], a)
    return (np.conj(phi) * w[:, None]).T @ ch


# ------------------------------------------------------- similar operator h


@dataclass(frozen=True)
class SimilarOperatorH:
    """``h f = -f'' + alpha^2 chi_0^N <chi_0^N, f>`` with Neumann conditions."""

    alpha: float
    a: float

    def eigenvalue(self, n):
        return float(self.alpha**2) if n == 0 else float(wavenumber(n, self.a) ** 2)

    def spectrum(self, n_max):
        """Eigenvalues indexed like the Neumann basis: ``alpha^2, k_1^2, ..., k_{n_max}^2``."""
        return np.array([self.eigenvalue(n) for n in range(n_max + 1)])

    def eigenfunction(self, n):
        return ModeFunction("N", n, self.a)

    def apply_mode(self, n, x):
        """Analytic action on ``chi_n^N``."""
        x = np.asarray(x, dtype=float)
        out = -chi_derivative("N", n, x, self.a, 2)
        if n == 0:
            out = out + self.alpha**2 * chi("N", 0, x, self.a)
        return out

    def apply(self, f: SampledFunction, n_modes=64):
        """Spectral action on grid samples through the first ``n_modes`` Neumann modes."""
        x, w = f.grid.nodes, f.grid.weights
        basis = chi("N", np.arange(n_modes)[None, :], x[:, None], self.a)
        coef = basis.T @ (w * f.values)
        return SampledFunction(f.grid, basis @ (self.spectrum(n_modes - 1) * coef))

    def form(self, f: SampledFunction):
        """``t_h[f] = ||f'||^2 + alpha^2 |<chi_0^N, f>|^2``."""
        if f.derivative is None:
            raise InvalidArgument("the form needs derivative samples")
        w = f.grid.weights
        c0 = np.sum(w * chi("N", 0, f.grid.nodes, self.a) * f.values)
        return float(np.sum(w * np.abs(f.derivative) ** 2) + self.alpha**2 * abs(c0) ** 2)

    def galerkin_matrix(self, size):
        return np.diag(self.spectrum(size - 1)).astype(complex)


def similar_operator(alpha, a):
    if a <= 0:
        raise InvalidArgument("a must be positive")
    return SimilarOperatorH(float(alpha), float(a))


def th_form_general(psi: SampledFunction, maps: SimilarityMaps, p: BoundaryParams):
    """The form of ``Omega H Omega^-1`` written through ``L*`` and ``M``.

    ``||psi'||^2 + <(L*psi)', psi'> + <psi', (M psi)'> + <(L*psi)', (M psi)'>``
    plus the Robin products at ``+-a``.  Kernel images are differentiated
    analytically, jump terms included.
    """
    if psi.derivative is None:
        raise InvalidArgument("the form needs derivative samples")
    grid = psi.grid
    w = grid.weights
    v, dv = psi.values, psi.derivative
    ls = maps.L.adjoint()
    dl = ls.derivative_matrix(grid) @ v
    dm = maps.M.derivative_matrix(grid) @ v

    def ip(f, g):
        return complex(np.sum(w * np.conj(f) * g))

    val = ip(dv, dv) + ip(dl, dv) + ip(dv, dm) + ip(dl, dm)
    for x0, c, sign in ((grid.a, p.c_plus, 1.0), (-grid.a, p.c_minus, -1.0)):
        u = endpoint_value(psi, x0)
        left = np.conj(u) + np.conj(ls.boundary_row(grid, x0) @ v)
        right = u + maps.M.boundary_row(grid, x0) @ v
        val += sign * c * left * right
    return complex(val)


def similarity_galerkin(maps: SimilarityMaps, size=24, grid=None):
    """Neumann-basis matrix ``<chi_m, Omega H Omega^-1 chi_n>``.

    ``g = (I+M) chi_n`` lies in the domain of H and, by
    ``(Mf)' = -i alpha (Mf + f)``,
    ``-g'' = -chi'' + alpha^2 (M chi + chi) + i alpha chi'``.
    """
    grid = grid or make_grid(maps.a, 16, 12)
    x, w = grid.nodes, grid.weights
    idx = np.arange(size)[None, :]
    ch = chi("N", idx, x[:, None], maps.a).astype(complex)
    d1 = chi_derivative("N", idx, x[:, None], maps.a, 1)
    d2 = chi_derivative("N", idx, x[:, None], maps.a, 2)
    al = maps.alpha
    mch = maps.M.matrix(grid) @ ch
    hg = -d2 + al**2 * (mch + ch) + 1j * al * d1
    img = maps.omega_matrix(grid) @ hg
    return (ch * w[:, None]).T.conj() @ img


def intertwining_residual(maps: SimilarityMaps, triples, grid, rng=None, n_modes=64):
    """``||Omega(H f) - h(Omega f)|| / ||f||`` for a random ``f`` in the span of ``triples``."""
    rng = np.random.default_rng(0) if rng is None else rng
    x = grid.nodes
    coef = rng.normal(size=len(triples)) + 1j * rng.normal(size=len(triples))
    psi = sample_matrix(list(triples), x, "psi")
    lam = np.array([t.lam for t in triples])
    f = psi @ coef
    hf = psi @ (lam * coef)
    om = maps.omega_matrix(grid)
    h = similar_operator(maps.alpha, maps.a)
    r = om @ hf - h.apply(SampledFunction(grid, om @ f), n_modes).values
    w = grid.weights
    return float(np.sqrt(np.sum(w * np.abs(r) ** 2) / np.sum(w * np.abs(f) ** 2)))


# -------------------------------------------------------------- degeneracy


def degeneracy_report(alpha, a, grid=None):
    """Multiplicities at ``alpha = k_m``, where H has a Jordan block and h does not.

    Reports for H the algebraic and geometric multiplicity of ``k_m^2`` and the
    residual of the Jordan chain ``(H - lam) u = psi``; for h the
    eigenfunctions spanning ``k_m^2``; and the smallest singular value of the
    closed-form ``Omega`` (whose inverse does not exist there).
    """
    m = int(np.rint(abs(alpha) * 2 * a / np.pi))
    if m < 1 or abs(abs(alpha) - wavenumber(m, a)) > 1e-8:
        raise InvalidArgument(f"alpha = {alpha} is not a Neumann wavenumber k_m, m >= 1")
    lam0 = float(wavenumber(m, a) ** 2)
    p = BoundaryParams.from_pt(alpha, 0.0, a)
    triples = find_eigenvalues(p, m + 2)
    t = min(triples, key=lambda t: abs(t.lam - lam0))
    grid = grid or make_grid(a, 16, 12)
    x = grid.nodes
    # Jordan chain: -u'' - lam u = psi_hat, with both Robin conditions on u
    u, ddu = t.jordan_vector(x), t.jordan_vector(x, 2)
    chain = -ddu - t.lam * u - t.psi_hat(x)
    ends = [t.jordan_vector(np.array([s * a]), 1)[0] + c * t.jordan_vector(np.array([s * a]))[0]
            for s, c in ((1, p.c_plus), (-1, p.c_minus))]
    chain_res = float(np.sqrt(np.sum(grid.weights * np.abs(chain) ** 2)) + max(abs(e) for e in ends))
    h = similar_operator(alpha, a)
    h_spec = h.spectrum(m + 2)
    h_idx = [int(n) for n in np.nonzero(np.abs(h_spec - lam0) < 1e-8 * (1 + lam0))[0]]
    sig = SimilarityMaps(float(alpha), a, _l_kernel(alpha, a), zero_kernel(a)).sigma_min(grid)
    return {
        "alpha": float(alpha),
        "a": float(a),
        "m": m,
        "eigenvalue": lam0,
        "H": {
            "lam": [t.lam.real, t.lam.imag],
            "algebraic_multiplicity": int(t.algebraic_multiplicity),
            "geometric_multiplicity": int(geometric_multiplicity(p, t.lam)),
            "jordan_chain_residual": chain_res,
        },
        "h": {
            "geometric_multiplicity": len(h_idx),
            "eigenfunctions": [f"chi_{n}^N" for n in h_idx],
        },
        "omega": {"sigma_min": sig, "invertible": bool(sig > RANK_TOL)},
    }
