"""Characteristic function, certified root search, eigenfunctions and symmetry predicates."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fd_eigenvalues, fd_real_eigenvalues, pt_pair, real_roots_by_bisection, richardson
from quasispec import ContourError, DegeneratePairError, InvalidArgument
from quasispec.numerics import make_grid
from quasispec.spectrum import (
    BoundaryParams,
    EigenTriple,
    PTParams,
    biorthonormalize,
    char_fn,
    char_fn_at_zero,
    char_fn_pt,
    count_nonreal,
    count_zeros,
    eigenfunctions,
    find_eigenvalues,
    geometric_multiplicity,
    locate_spectrum,
    pair_integral,
    sample_matrix,
    symmetry_report,
    zero_eigenvalue_predicate,
)

HALF_PI = np.pi / 2

complex_c = st.builds(complex, st.floats(-2, 2), st.floats(-2, 2))


def _phi_reference(lam, cm, cp, a):
    """``F(l)/l`` straight from the eigenvalue equation, for one branch of ``l``."""
    l = np.sqrt(complex(lam))
    return (np.sin(2 * a * l) * (cm * cp + l * l) + (cm - cp) * l * np.cos(2 * a * l)) / l


def _multiset_close(u, v, tol):
    u = sorted(u, key=lambda z: (round(z.real, 6), z.imag))
    v = sorted(v, key=lambda z: (round(z.real, 6), z.imag))
    return len(u) == len(v) and all(abs(x - y) <= tol * (1 + abs(x)) for x, y in zip(u, v))


class TestBoundaryParams:
    def test_invalid(self):
        with pytest.raises(InvalidArgument):
            BoundaryParams(0.0, 1, 1)
        with pytest.raises(InvalidArgument):
            BoundaryParams(1.0, complex("nan"), 1)

    def test_pt_embedding(self):
        p = PTParams(0.7, -0.3, 1.2).boundary()
        assert p.c_minus == complex(0.3, 0.7) and p.c_plus == complex(-0.3, 0.7)
        assert p.is_pt_symmetric
        assert p.pt() == pytest.approx((0.7, -0.3))

    def test_adjoint_conjugates(self):
        p = BoundaryParams(1.0, 1 + 2j, -0.5j)
        q = p.adjoint()
        assert q.c_minus == 1 - 2j and q.c_plus == 0.5j


class TestSymmetryReport:
    def test_pt_parameterization(self):
        r = symmetry_report(BoundaryParams.from_pt(1.3, 0.4, 1.0))
        assert r["PT_symmetric"] and r["P_self_adjoint"] and not r["self_adjoint"]

    @pytest.mark.parametrize("cm, cp, pt", [(1.0, 2.0, False), (-2.0, 2.0, True), (0.0, 0.0, True)])
    def test_real_constants(self, cm, cp, pt):
        r = symmetry_report(BoundaryParams(1.0, cm, cp))
        assert r["self_adjoint"] and r["PT_symmetric"] == pt and r["P_self_adjoint"] == pt

    def test_generic(self):
        r = symmetry_report(BoundaryParams(1.0, 1 + 1j, 2))
        assert r == {"self_adjoint": False, "PT_symmetric": False, "P_self_adjoint": False}


class TestCharFn:
    def test_pt_alpha_squared_is_root(self):
        assert abs(char_fn(1.0, BoundaryParams.from_pt(1.0, 0.0, HALF_PI))) <= 1e-15

    @pytest.mark.parametrize("n", range(6))
    def test_neumann_roots(self, n):
        assert abs(char_fn(float(n * n), BoundaryParams(HALF_PI, 0, 0))) <= 1e-12 * (1 + n * n)

    def test_value_at_zero(self):
        p = BoundaryParams(1.3, 0.2 + 1j, -0.7)
        assert char_fn(0.0, p) == pytest.approx(char_fn_at_zero(p), abs=1e-15)
        assert char_fn_at_zero(p) == pytest.approx(2 * 1.3 * p.c_minus * p.c_plus + p.c_minus - p.c_plus)
        assert abs(char_fn(1e-9, p) - char_fn_at_zero(p)) <= 1e-7

    @given(re=st.floats(-50, 300), im=st.floats(-40, 40), cm=complex_c, cp=complex_c, a=st.floats(0.3, 2.0))
    def test_matches_eigenvalue_equation_on_both_branches(self, re, im, cm, cp, a):
        lam = complex(re, im)
        if abs(lam) < 1e-3:
            return
        p = BoundaryParams(a, cm, cp)
        ref = _phi_reference(lam, cm, cp, a)
        l = np.sqrt(lam)
        other = (np.sin(-2 * a * l) * (cm * cp + l * l) - (cm - cp) * l * np.cos(2 * a * l)) / (-l)
        scale = 1 + abs(ref) + np.exp(2 * a * abs(l.imag)) * (1 + abs(lam))
        assert abs(char_fn(lam, p) - ref) <= 1e-11 * scale
        assert abs(other - ref) <= 1e-11 * scale

    @given(alpha=st.floats(-2, 2), beta=st.floats(-2, 2), re=st.floats(-20, 200), im=st.floats(-20, 20))
    def test_pt_form_agrees(self, alpha, beta, re, im):
        lam = complex(re, im)
        pt = PTParams(alpha, beta, 1.1)
        v, w = char_fn(lam, pt.boundary()), char_fn_pt(lam, pt)
        assert abs(v - w) <= 1e-12 * max(1.0, abs(v))

    def test_pt_beta_zero_factorizes(self):
        pt = PTParams(0.8, 0.0, 1.0)
        for lam in (0.3 + 0.2j, 5.0, -2 + 7j):
            l = np.sqrt(lam)
            assert char_fn_pt(lam, pt) == pytest.approx((lam - 0.64) * np.sin(2 * l) / l, rel=1e-12)

    def test_derivatives(self):
        p = BoundaryParams(1.0, 1 + 0.5j, 2 - 1j)
        for lam in (0.0, 3.3 - 1j, 40 + 2j):
            h = 1e-5 * (1 + abs(lam))
            d1 = (char_fn(lam + h, p) - char_fn(lam - h, p)) / (2 * h)
            d2 = (char_fn(lam + h, p, 1) - char_fn(lam - h, p, 1)) / (2 * h)
            assert abs(char_fn(lam, p, 1) - d1) <= 1e-6 * (1 + abs(d1))
            assert abs(char_fn(lam, p, 2) - d2) <= 1e-6 * (1 + abs(d2))
        with pytest.raises(InvalidArgument):
            char_fn(1.0, p, 3)

    def test_robin_real_roots_against_bisection(self):
        p = BoundaryParams(1.0, 1.0, 2.0)
        found = np.array([t.lam for t in find_eigenvalues(p, 8)])
        assert np.all(np.abs(found.imag) <= 1e-12)
        oracle = real_roots_by_bisection(1.0, 2.0, 1.0, -10.0, found.real.max() + 1.0)
        np.testing.assert_allclose(found.real, oracle, atol=1e-9, rtol=1e-12)
        assert oracle[0] == pytest.approx(-0.974166849, abs=1e-9)
        assert count_nonreal(p, (-10.0, 200.0), 50.0) == 0

    def test_robin_real_roots_against_finite_differences(self):
        p = BoundaryParams(1.0, 1.0, 2.0)
        found = np.array([t.lam.real for t in find_eigenvalues(p, 6)])[:6]
        fd = richardson(lambda n: fd_real_eigenvalues(1.0, 1.0, 2.0, n, 6), 2000)
        np.testing.assert_allclose(found, fd, atol=1e-6)

    def test_self_adjoint_robin_spectrum_is_real(self):
        p = PTParams(0.0, 0.8, HALF_PI).boundary()
        assert count_nonreal(p, (-10.0, 200.0), 50.0) == 0
        assert all(abs(t.lam.imag) <= 1e-12 for t in find_eigenvalues(p, 10))

    def test_pt_complex_pair_count_against_fd(self):
        p = BoundaryParams.from_pt(1.0, -1.0, HALF_PI)
        n = count_nonreal(p, (-5.0, 50.0), 20.0)
        fd = fd_eigenvalues(HALF_PI, p.c_minus, p.c_plus, 4000, 10)
        inside = [z for z in fd if -5 <= z.real <= 50 and abs(z.imag) <= 20]
        assert n == sum(abs(z.imag) > 1e-3 for z in inside) == 2
        pair = [t.lam for t in find_eigenvalues(p, 4) if abs(t.lam.imag) > 1e-6]
        assert len(pair) == 2 and abs(pair[0] - np.conj(pair[1])) <= 1e-9
        # the pair's distance to alpha^2 + beta^2 is reported, not bounded
        assert np.isfinite(abs(pair[0] - 2.0))


class TestZeroEigenvalue:
    def test_neumann(self):
        assert zero_eigenvalue_predicate(BoundaryParams(1.0, 0, 0))

    def test_equal_constants(self):
        assert not zero_eigenvalue_predicate(BoundaryParams(1.0, 0.7, 0.7))

    def test_solved_pair(self):
        p = BoundaryParams(1.0, 1.0, 1.0 / (1 - 2.0))
        assert zero_eigenvalue_predicate(p)
        # the linear function 1 - c_-(x + a) satisfies both conditions
        u = lambda x: 1 - p.c_minus * (x + 1.0)
        du = -p.c_minus
        assert abs(du + p.c_minus * u(-1.0)) <= 1e-15
        assert abs(du + p.c_plus * u(1.0)) <= 1e-15
        lam0 = min(find_eigenvalues(p, 3), key=lambda t: abs(t.lam))
        assert abs(lam0.lam) <= 1e-10
        x = np.linspace(-1, 1, 5)
        np.testing.assert_allclose(lam0.psi_hat(x), u(x), atol=1e-12)


class TestFindEigenvalues:
    def test_pt_beta_zero(self, pt_half):
        lam = np.array([t.lam for t in find_eigenvalues(pt_half, 10)])
        expected = np.array([0.25] + [float(n * n) for n in range(1, lam.size)])
        np.testing.assert_allclose(lam, expected, atol=1e-9)
        assert lam.size >= 10

    def test_neumann(self):
        tr = find_eigenvalues(BoundaryParams(HALF_PI, 0, 0), 6)
        np.testing.assert_allclose([t.lam for t in tr][:7], [n * n for n in range(7)], atol=1e-9)
        assert all(t.algebraic_multiplicity == 1 for t in tr)

    def test_double_root_at_alpha_equal_k1(self):
        p = BoundaryParams.from_pt(1.0, 0.0, HALF_PI)
        tr = find_eigenvalues(p, 5)
        t1 = min(tr, key=lambda t: abs(t.lam - 1))
        assert abs(t1.lam - 1) <= 1e-9
        assert t1.algebraic_multiplicity == 2
        assert geometric_multiplicity(p, t1.lam) == 1
        assert sum(t.algebraic_multiplicity for t in tr) == len(tr) + 1
        with pytest.raises(DegeneratePairError):
            biorthonormalize(tr)

    def test_char_residual_invariant(self):
        p = BoundaryParams(1.2, 0.5 - 0.3j, 1 + 1j)
        for t in find_eigenvalues(p, 12):
            assert t.char_residual() <= 1e-10 * max(1, abs(t.lam))

    def test_certification(self):
        loc = locate_spectrum(BoundaryParams(1.0, 1 + 0.3j, 2.0), 10)
        assert loc.certified()
        assert sum(loc.winding_counts) == len(loc.eigenvalues)

    def test_rectangle_count_matches_roots(self):
        p = BoundaryParams(1.0, 1 + 0.3j, 2.0)
        tr = find_eigenvalues(p, 12)
        rect = (5.3, 61.7, -3.1, 2.9)
        inside = [t for t in tr if rect[0] < t.lam.real < rect[1] and rect[2] < t.lam.imag < rect[3]]
        assert count_zeros(p, rect) == len(inside) > 0

    def test_asymptotics(self):
        p = BoundaryParams(HALF_PI, 1.0, 2.0)
        tr = find_eigenvalues(p, 41)
        t40 = next(t for t in tr if t.index == 40)
        gap = (t40.lam - 40**2).real
        assert abs(gap - 2 / np.pi) <= 0.05 * 2 / np.pi
        assert abs(t40.epsilon) <= 0.01

    def test_contour_through_root_is_reported(self, pt_half):
        with pytest.raises(ContourError):
            count_zeros(pt_half, (1.0, 3.0, -1.0, 1.0))

    def test_invalid(self, pt_half):
        with pytest.raises(InvalidArgument):
            find_eigenvalues(pt_half, 0)
        with pytest.raises(InvalidArgument):
            count_zeros(pt_half, (2.0, 1.0, -1.0, 1.0))

    @pytest.mark.parametrize("alpha", [0.5, 1.5])
    @pytest.mark.parametrize("beta", [0.5, 1.0])
    def test_positive_beta_is_real(self, alpha, beta):
        assert count_nonreal(BoundaryParams.from_pt(alpha, beta, HALF_PI), (-10.0, 200.0), 50.0) == 0

    @settings(max_examples=5)
    @given(cm=complex_c, cp=complex_c)
    def test_conjugation_symmetry(self, cm, cp):
        p = BoundaryParams(1.0, cm, cp)
        u = [t.lam for t in find_eigenvalues(p, 6) for _ in range(t.algebraic_multiplicity)]
        v = [t.lam for t in find_eigenvalues(p.adjoint(), 6) for _ in range(t.algebraic_multiplicity)]
        assert _multiset_close(np.conj(u), v, 1e-9)

    @settings(max_examples=6)
    @given(alpha=st.floats(-2, 2), beta=st.floats(-2, 2))
    def test_pt_spectrum_closed_under_conjugation(self, alpha, beta):
        p = BoundaryParams.from_pt(alpha, beta, HALF_PI)
        u = [t.lam for t in find_eigenvalues(p, 6) for _ in range(t.algebraic_multiplicity)]
        assert _multiset_close(u, np.conj(u), 1e-9)


class TestEigenfunctions:
    def test_pt_functions_match_closed_forms(self, pt_half_triples, grid_pi2):
        x = grid_pi2.nodes
        for t in pt_half_triples[:11]:
            lam, psi, phi = pt_pair(0.5, t.index, HALF_PI)
            assert abs(t.lam - lam) <= 1e-9
            np.testing.assert_allclose(t.phi(x), phi(x), atol=1e-9)
            np.testing.assert_allclose(t.psi(x), psi(x), atol=1e-8)

    def test_ground_state_is_exponential(self, pt_half_triples):
        t0 = pt_half_triples[0]
        x = np.linspace(-HALF_PI, HALF_PI, 7)
        ratio = t0.psi(x) / np.exp(-0.5j * (x + HALF_PI))
        np.testing.assert_allclose(ratio, ratio[0], atol=1e-12)
        np.testing.assert_allclose(t0.phi(x), np.exp(0.5j * (x + HALF_PI)) / np.sqrt(np.pi), atol=1e-12)

    def test_neumann_functions(self):
        p = BoundaryParams(1.0, 0, 0)
        tr = biorthonormalize(find_eigenvalues(p, 6))
        x = np.linspace(-1, 1, 9)
        for t in tr[:6]:
            psi, phi = eigenfunctions(p, t)
            chi = np.full_like(x, 1 / np.sqrt(2)) if t.index == 0 else np.cos(t.index * np.pi / 2 * (x + 1))
            np.testing.assert_allclose(psi(x), chi, atol=1e-12)
            np.testing.assert_allclose(phi(x), chi, atol=1e-12)

    def test_boundary_conditions(self):
        p = BoundaryParams(1.0, 1.0, 2.0)
        t = find_eigenvalues(p, 3)[0]
        for s, c in ((-1.0, p.c_minus), (1.0, p.c_plus)):
            x = np.array([s])
            assert abs(t.psi_hat(x, 1)[0] + c * t.psi_hat(x)[0]) <= 1e-9
            assert abs(t.phi(x, 1)[0] + np.conj(c) * t.phi(x)[0]) <= 1e-9

    def test_second_derivative_is_eigen_equation(self):
        p = BoundaryParams(1.0, 1 + 1j, -0.5)
        x = np.linspace(-1, 1, 13)
        for t in find_eigenvalues(p, 5):
            np.testing.assert_allclose(-t.psi_hat(x, 2), t.lam * t.psi_hat(x), atol=1e-10 * (1 + abs(t.lam)))

    def test_normalization_required(self, pt_half):
        t = find_eigenvalues(pt_half, 2)[1]
        with pytest.raises(InvalidArgument):
            t.psi(0.0)
        with pytest.raises(InvalidArgument):
            sample_matrix([t], np.zeros(2), "psi")


class TestBiorthonormalize:
    def test_pt_constants(self, pt_half_triples):
        assert pt_half_triples[1].A == pytest.approx(4 / 3, abs=1e-12)
        assert pt_half_triples[0].A == pytest.approx(0.5j * np.sqrt(np.pi), abs=1e-12)
        k = np.arange(2, 11)
        np.testing.assert_allclose([t.A for t in pt_half_triples[2:11]], k**2 / (k**2 - 0.25), atol=1e-12)

    def test_neumann_constants(self):
        tr = biorthonormalize(find_eigenvalues(BoundaryParams(1.0, 0, 0), 6))
        np.testing.assert_allclose([t.A for t in tr[1:7]], 1.0, atol=1e-12)
        # the ground state carries the 1/sqrt(2a) of chi_0^N in A_0
        assert tr[0].A == pytest.approx(1 / np.sqrt(2), abs=1e-12)

    def test_gram_matrix(self):
        p = BoundaryParams(1.0, 1 + 0.3j, 2.0)
        tr = biorthonormalize(find_eigenvalues(p, 12)[:12])
        g = make_grid(1.0, 16, 12)
        psi = sample_matrix(tr, g.nodes, "psi")
        phi = sample_matrix(tr, g.nodes, "phi")
        gram = (psi.conj() * g.weights[:, None]).T @ phi
        assert np.max(np.abs(np.diag(gram) - 1)) <= 1e-9
        assert np.max(np.abs(gram - np.diag(np.diag(gram)))) <= 1e-8

    def test_closed_pairing_matches_quadrature(self):
        p = BoundaryParams(1.0, -0.4 + 0.9j, 1.5 - 0.2j)
        tr = find_eigenvalues(p, 8)
        a = biorthonormalize(tr)
        b = biorthonormalize(tr, make_grid(1.0, 16, 12))
        np.testing.assert_allclose([t.A for t in a], [t.A for t in b], rtol=1e-11)

    def test_pairing_series_branch(self):
        t = EigenTriple(1e-4 + 1e-4j, BoundaryParams(1.0, 0.3j, 0.1), index=0)
        g = make_grid(1.0, 8, 12)
        quad = np.sum(g.weights * np.conj(t.psi_hat(g.nodes)) * t.phi(g.nodes))
        assert pair_integral(t) == pytest.approx(quad, abs=1e-13)
