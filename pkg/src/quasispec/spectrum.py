"""Eigenvalues and eigenfunctions of -psi'' on (-a, a) with psi'(+-a) + c+- psi(+-a) = 0.

The eigenvalues are the zeros of the entire function

    Phi(lam) = (c_- c_+ + lam) S(lam) + (c_- - c_+) C(lam),
    S(lam) = sin(2 a l) / l,  C(lam) = cos(2 a l),  l = sqrt(lam),

which does not depend on the branch of the square root.  Zeros are located
with the argument principle on a covering of the region that contains the
numerical range of the operator, then polished by Newton's method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ContourError, DegeneratePairError, InvalidArgument

PHI_TOL = 1e-10
NEWTON_TOL = 1e-13
DOUBLE_ROOT_TOL = 1e-8
DEDUP_TOL = 1e-9
PAIR_TOL = 1e-10
NEAR_ROOT_TOL = 1e-8
ZERO_TOL = 1e-12
MAX_RETRIES = 5

_SERIES_TERMS = 24
# Taylor coefficients of E(lam, z) = sin(sqrt(lam) z)/sqrt(lam) in lam, without the z powers
_FACT = np.array([(-1) ** k / math.factorial(2 * k + 1) for k in range(_SERIES_TERMS)])


def _sinl(lam, z):
    """``sin(l z)/l`` and its first two lam-derivatives, entire in lam."""
    lam = np.asarray(lam, dtype=complex)
    z = np.asarray(z, dtype=float)
    lam, z = np.broadcast_arrays(lam, z)
    shape = lam.shape
    lam, z = lam.ravel(), z.ravel()
    small = np.abs(lam) * z**2 < 1.0
    out = np.empty((3, lam.size), dtype=complex)
    if np.any(small):
        ls, zs = lam[small], z[small]
        q = ls * zs**2
        e0 = np.zeros_like(ls)
        e1 = np.zeros_like(ls)
        e2 = np.zeros_like(ls)
        p = np.ones_like(ls)
        for k in range(_SERIES_TERMS):
            e0 += _FACT[k] * p
            p = p * q
        p1 = np.ones_like(ls)
        for k in range(1, _SERIES_TERMS):
            e1 += _FACT[k] * k * p1 * zs**2
            p1 = p1 * q
        p2 = np.ones_like(ls)
        for k in range(2, _SERIES_TERMS):
            e2 += _FACT[k] * k * (k - 1) * p2 * zs**4
            p2 = p2 * q
        out[0][small] = zs * e0
        out[1][small] = zs * e1
        out[2][small] = zs * e2
    big = ~small
    if np.any(big):
        lb, zb = lam[big], z[big]
        l = np.sqrt(lb)
        e = np.sin(l * zb) / l
        c = np.cos(l * zb)
        e1 = (zb * c - e) / (2 * lb)
        c1 = -0.5 * zb * e
        e2 = (zb * c1 - 3 * e1) / (2 * lb)
        out[0][big] = e
        out[1][big] = e1
        out[2][big] = e2
    return out.reshape((3,) + shape)


def _cosl(lam, z):
    """``cos(l z)`` and its first two lam-derivatives."""
    lam = np.asarray(lam, dtype=complex)
    e = _sinl(lam, z)
    z = np.asarray(z, dtype=float)
    l = np.sqrt(lam)
    c0 = np.cos(l * z)
    c1 = -0.5 * z * e[0]
    c2 = -0.5 * z * e[1]
    return np.stack([c0 * np.ones_like(c1), c1, c2])


@dataclass(frozen=True)
class BoundaryParams:
    """Half-width ``a`` and Robin constants ``c_-``, ``c_+``."""

    a: float
    c_minus: complex
    c_plus: complex

    def __post_init__(self):
        if not np.isfinite(self.a) or self.a <= 0:
            raise InvalidArgument(f"half-width must be positive, got {self.a!r}")
        for c in (self.c_minus, self.c_plus):
            if not np.isfinite(complex(c)):
                raise InvalidArgument("Robin constants must be finite")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "c_minus", complex(self.c_minus))
        object.__setattr__(self, "c_plus", complex(self.c_plus))

    @classmethod
    def from_pt(cls, alpha, beta, a):
        return PTParams(alpha, beta, a).boundary()

    @property
    def is_self_adjoint(self):
        return self.c_minus.imag == 0 and self.c_plus.imag == 0

    @property
    def is_pt_symmetric(self):
        return abs(self.c_minus + self.c_plus.conjugate()) <= 1e-14 * (1 + abs(self.c_plus))

    def adjoint(self):
        """Parameters of the adjoint operator (conjugated constants)."""
        return BoundaryParams(self.a, self.c_minus.conjugate(), self.c_plus.conjugate())

    def pt(self):
        """(alpha, beta) when the constants have the PT form ``i alpha +- beta``."""
        if not self.is_pt_symmetric:
            raise InvalidArgument("parameters are not PT-symmetric")
        return self.c_plus.imag, self.c_plus.real

    def to_dict(self):
        return {
            "a": self.a,
            "c_minus": [self.c_minus.real, self.c_minus.imag],
            "c_plus": [self.c_plus.real, self.c_plus.imag],
        }


@dataclass(frozen=True)
class PTParams:
    alpha: float
    beta: float
    a: float

    def boundary(self):
        return BoundaryParams(self.a, complex(-self.beta, self.alpha), complex(self.beta, self.alpha))


def char_fn(lam, p: BoundaryParams, derivative=0):
    """Characteristic function ``Phi(lam)`` (or its first/second derivative)."""
    e = _sinl(lam, 2 * p.a)
    c = _cosl(lam, 2 * p.a)
    lam = np.asarray(lam, dtype=complex)
    prod = p.c_minus * p.c_plus
    diff = p.c_minus - p.c_plus
    if derivative == 0:
        out = (prod + lam) * e[0] + diff * c[0]
    elif derivative == 1:
        out = e[0] + (prod + lam) * e[1] + diff * c[1]
    elif derivative == 2:
        out = 2 * e[1] + (prod + lam) * e[2] + diff * c[2]
    else:
        raise InvalidArgument("derivative order must be 0, 1 or 2")
    return out[()] if out.ndim == 0 else out


def char_fn_pt(lam, p: PTParams):
    """``(lam - alpha^2 - beta^2) S(lam) - 2 beta C(lam)``."""
    e = _sinl(lam, 2 * p.a)
    c = _cosl(lam, 2 * p.a)
    out = (np.asarray(lam, dtype=complex) - p.alpha**2 - p.beta**2) * e[0] - 2 * p.beta * c[0]
    return out[()] if out.ndim == 0 else out


def char_fn_at_zero(p: BoundaryParams):
    return 2 * p.a * p.c_minus * p.c_plus + p.c_minus - p.c_plus


def zero_eigenvalue_predicate(p: BoundaryParams, tol=ZERO_TOL):
    """Whether 0 is an eigenvalue (eigenfunction ``1 - c_- (x + a)``)."""
    return bool(abs(char_fn_at_zero(p)) <= tol)


def symmetry_report(p: BoundaryParams):
    pt = p.is_pt_symmetric
    return {"self_adjoint": p.is_self_adjoint, "PT_symmetric": pt, "P_self_adjoint": pt}


# ---------------------------------------------------------------- eigen data


@dataclass(frozen=True)
class EigenTriple:
    """Eigenvalue ``lam = l^2`` with its eigenfunction pair.

    ``index`` is the position in the real-part ordering and fixes the scale
    of the adjoint eigenfunction: ``phi_n(-a) = chi_n^N(-a)``.  ``A`` is the
    factor making ``psi_n = A psi_hat_n`` biorthonormal to ``phi_n``; it is
    ``None`` until :func:`biorthonormalize` has run.
    """

    lam: complex
    params: BoundaryParams
    index: int = 0
    algebraic_multiplicity: int = 1
    A: Optional[complex] = None

    @property
    def l(self):
        l = np.sqrt(complex(self.lam))
        return -l if l.real < 0 else l

    @property
    def k(self):
        return self.index * np.pi / (2 * self.params.a)

    @property
    def epsilon(self):
        return self.l - self.k

    @property
    def scale(self):
        """Prefactor of ``phi``: ``1/sqrt(2a)`` for index 0, else ``1/sqrt(a)``."""
        s = 1.0 / np.sqrt(2.0) if self.index == 0 else 1.0
        return s / np.sqrt(self.params.a)

    @property
    def psi_scale(self):
        """Prefactor of ``psi_hat``: 1 for index 0, else ``1/sqrt(a)``."""
        return 1.0 if self.index == 0 else 1.0 / np.sqrt(self.params.a)

    def char_residual(self):
        return float(abs(char_fn(self.lam, self.params)))

    def psi_hat(self, x, derivative=0):
        """Unnormalized eigenfunction of H (``derivative`` = 0, 1 or 2)."""
        return self.psi_scale * _mode(self.lam, self.params.c_minus, self.params.a, x, derivative)

    def phi(self, x, derivative=0):
        """Eigenfunction of the adjoint, ``conj`` of ``psi_hat`` on the real line."""
        p = self.params
        return self.scale * _mode(np.conj(self.lam), np.conj(p.c_minus), p.a, x, derivative)

    def psi(self, x, derivative=0):
        if self.A is None:
            raise InvalidArgument("eigenfunction is not normalized; call biorthonormalize first")
        return self.A * self.psi_hat(x, derivative)

    def jordan_vector(self, x, derivative=0):
        """lam-derivative of ``psi_hat``; solves ``(H - lam) u = psi_hat`` at a double root."""
        return self.psi_scale * _mode_dlam(self.lam, self.params.c_minus, self.params.a, x, derivative)


def _mode(lam, c_minus, a, x, derivative=0):
    z = np.asarray(x, dtype=float) + a
    e = _sinl(lam, z)[0]
    c = np.cos(np.sqrt(np.asarray(lam, dtype=complex)) * z)
    if derivative == 0:
        return c - c_minus * e
    if derivative == 1:
        return -lam * e - c_minus * c
    if derivative == 2:
        return -lam * (c - c_minus * e)
    raise InvalidArgument("derivative order must be 0, 1 or 2")


def _mode_dlam(lam, c_minus, a, x, derivative=0):
    z = np.asarray(x, dtype=float) + a
    e = _sinl(lam, z)
    c = np.cos(np.sqrt(np.asarray(lam, dtype=complex)) * z)
    dc = -0.5 * z * e[0]
    if derivative == 0:
        return dc - c_minus * e[1]
    if derivative == 1:
        # d/dlam of (-lam e - c_- cos)
        return -e[0] - lam * e[1] - c_minus * dc
    if derivative == 2:
        return -(c - c_minus * e[0]) - lam * (dc - c_minus * e[1])
    raise InvalidArgument("derivative order must be 0, 1 or 2")


def sample_matrix(triples, x, which="phi", derivative=0):
    """Matrix with column n holding ``psi_n``, ``psi_hat_n`` or ``phi_n`` at the points ``x``."""
    if not triples:
        return np.zeros((np.size(x), 0), dtype=complex)
    p = triples[0].params
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    lam = np.array([t.lam for t in triples], dtype=complex)[None, :]
    if which == "phi":
        scale = np.array([t.scale for t in triples])
        return scale * _mode(np.conj(lam), np.conj(p.c_minus), p.a, x, derivative)
    scale = np.array([t.psi_scale for t in triples], dtype=complex)
    if which == "psi":
        if any(t.A is None for t in triples):
            raise InvalidArgument("eigenfunctions are not normalized; call biorthonormalize first")
        scale = scale * np.array([t.A for t in triples])
    elif which != "psi_hat":
        raise InvalidArgument(f"unknown eigenfunction family {which!r}")
    return scale * _mode(lam, p.c_minus, p.a, x, derivative)


def eigenfunctions(p: BoundaryParams, t: EigenTriple):
    """Samplers ``(psi, phi)``; ``psi`` falls back to ``psi_hat`` before normalization."""
    if t.params != p:
        t = replace(t, params=p)
    psi = t.psi if t.A is not None else t.psi_hat
    return psi, t.phi


def pair_integral(t: EigenTriple):
    """``<psi_hat, phi>`` in closed form; ``conj(psi_hat)`` is proportional to ``phi``."""
    p = t.params
    m = np.conj(np.sqrt(complex(t.lam)))
    d = np.conj(p.c_minus)
    L = 2 * p.a
    lam_bar = m * m
    half_sin = _sinl(4 * lam_bar, L)[0]  # sin(2 m L)/(2 m)
    i_cc = L / 2 + half_sin / 2
    u = 2 * m * L
    if abs(u) < 0.5:
        terms = sum((-1) ** (k + 1) * u ** (2 * k - 2) / math.factorial(2 * k + 1) for k in range(1, 14))
        i_ss_over = 2 * L**3 * terms
    else:
        i_ss_over = (L - half_sin) / (2 * lam_bar)
    sl = _sinl(lam_bar, L)[0]  # sin(mL)/m
    i_sc_over = sl**2 / 2
    return complex(t.scale * t.psi_scale * (i_cc - 2 * d * i_sc_over + d * d * i_ss_over))


def biorthonormalize(triples, grid=None):
    """Set ``A_n`` so that ``<psi_n, phi_m> = delta_nm``.

    With the inner product antilinear in its first slot this means
    ``A_n = 1 / conj(<psi_hat_n, phi_n>)``.  The pairing is evaluated in
    closed form unless a quadrature grid is given.
    """
    out = []
    for t in triples:
        if t.algebraic_multiplicity != 1:
            raise DegeneratePairError(f"eigenvalue {t.lam} is not simple; no biorthonormal partner exists")
        if grid is None:
            g = pair_integral(t)
        else:
            x = grid.nodes
            g = complex(np.sum(grid.weights * np.conj(t.psi_hat(x)) * t.phi(x)))
        if abs(g) < PAIR_TOL:
            raise DegeneratePairError(f"psi_hat and phi are orthogonal at lam = {t.lam} (|<psi, phi>| = {abs(g):.2e})")
        out.append(replace(t, A=1.0 / np.conj(g)))
    return out


def pt_eigenpair(alpha, n, a):
    """Eigenpair ``(lam, psi, phi)`` of the PT problem with beta = 0 in the explicit normalization.

    ``n = 0`` is the eigenvalue ``alpha^2``; ``n >= 1`` is ``k_n^2``.
    """
    from .laplacian import chi

    if n < 0:
        raise InvalidArgument("index must be non-negative")
    if n == 0:
        a0 = alpha * np.exp(2j * alpha * a) * np.sqrt(2 * a) / np.sin(2 * alpha * a) if alpha != 0 else 1.0

        def psi(x, derivative=0):
            return a0 * (-1j * alpha) ** derivative * np.exp(-1j * alpha * (np.asarray(x) + a))

        def phi(x, derivative=0):
            return (1j * alpha) ** derivative * np.exp(1j * alpha * (np.asarray(x) + a)) / np.sqrt(2 * a)

        return alpha**2, psi, phi
    k = n * np.pi / (2 * a)
    an = k**2 / (k**2 - alpha**2)

    def _comb(x, sign, derivative):
        x = np.asarray(x, dtype=float)
        if derivative == 0:
            return chi("N", n, x, a) + sign * 1j * alpha / k * chi("D", n, x, a)
        from .laplacian import chi_derivative

        return chi_derivative("N", n, x, a, derivative) + sign * 1j * alpha / k * chi_derivative("D", n, x, a, derivative)

    def psi(x, derivative=0):
        return an * _comb(x, -1, derivative)

    def phi(x, derivative=0):
        return _comb(x, 1, derivative)

    return k**2, psi, phi


# ---------------------------------------------------------- root location


class _NearRoot(Exception):
    pass


def _phase_along(p, z0, z1, n0=33, max_points=200000):
    """Total change of ``arg Phi`` along the segment ``z0 -> z1``.

    Steps are refined until neighbouring samples differ by less than pi/4 in
    phase, by less than a factor 3 in modulus, and the logarithmic derivative
    times the step stays below 1, so no full turn can hide between samples.
    """
    t = np.linspace(0.0, 1.0, n0)
    length = abs(z1 - z0)
    f = char_fn(z0 + t * (z1 - z0), p)
    df = char_fn(z0 + t * (z1 - z0), p, derivative=1)
    scale = 1.0 + max(abs(z0), abs(z1))
    for _ in range(80):
        z = z0 + t * (z1 - z0)
        if np.any(np.abs(f) < 1e-13):
            raise _NearRoot(z[np.argmin(np.abs(f))])
        d = np.angle(f[1:] / f[:-1])
        r = np.abs(f[1:]) / np.abs(f[:-1])
        logd = np.abs(df) / np.abs(f)
        step = np.diff(t) * length * np.maximum(logd[1:], logd[:-1])
        bad = (np.abs(d) > np.pi / 4) | (r > 3.0) | (r < 1.0 / 3.0) | (step > 1.0)
        if not np.any(bad):
            with np.errstate(divide="ignore"):
                dist = 1.0 / logd
            if np.any(dist < NEAR_ROOT_TOL * (1 + np.abs(z))):
                raise _NearRoot(z[np.argmin(dist)])
            return float(np.sum(d))
        idx = np.nonzero(bad)[0]
        if np.min(t[idx + 1] - t[idx]) * length < 1e-14 * scale:
            raise _NearRoot(z0 + t[idx[0]] * (z1 - z0))
        tm = 0.5 * (t[idx] + t[idx + 1])
        zm = z0 + tm * (z1 - z0)
        t = np.insert(t, idx + 1, tm)
        f = np.insert(f, idx + 1, char_fn(zm, p))
        df = np.insert(df, idx + 1, char_fn(zm, p, derivative=1))
        if t.size > max_points:
            break
    raise ContourError(f"phase of the characteristic function could not be resolved on [{z0}, {z1}]")


def _initial_points(p, z0, z1):
    l0, l1 = np.sqrt(complex(z0)), np.sqrt(complex(z1))
    osc = abs(l1 - l0) * 2 * p.a / np.pi + abs(z1 - z0) / (1 + abs(z0) + abs(z1))
    return int(min(33 + 8 * osc, 4097))


def _rect_edges(rect):
    re0, re1, im0, im1 = rect
    c = [complex(re0, im0), complex(re1, im0), complex(re1, im1), complex(re0, im1)]
    return [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]


def _winding(p, rect):
    total = 0.0
    for z0, z1 in _rect_edges(rect):
        total += _phase_along(p, z0, z1, _initial_points(p, z0, z1))
    w = total / (2 * np.pi)
    n = int(round(w))
    if abs(w - n) > 0.05:
        raise ContourError(f"non-integer winding number {w:.4f} on {rect}")
    return n


def count_zeros(p: BoundaryParams, rect):
    """Number of zeros of Phi inside ``rect = (re0, re1, im0, im1)`` (argument principle)."""
    re0, re1, im0, im1 = map(float, rect)
    if not (re0 < re1 and im0 < im1):
        raise InvalidArgument("rectangle must have positive width and height")
    try:
        return _winding(p, (re0, re1, im0, im1))
    except _NearRoot as exc:
        raise ContourError(f"a zero lies on or next to the contour near {exc.args[0]}") from None


def _winding_circle(p, center, radius, n=64):
    th = np.linspace(0, 2 * np.pi, n + 1)
    f = char_fn(center + radius * np.exp(1j * th), p)
    if np.any(np.abs(f) == 0):
        return -1
    d = np.angle(f[1:] / f[:-1])
    if np.any(np.abs(d) > np.pi / 2):
        return _winding_circle(p, center, radius, 4 * n) if n < 4096 else -1
    return int(round(np.sum(d) / (2 * np.pi)))


def _newton(p, z, derivative=0, maxit=80):
    for _ in range(maxit):
        f = char_fn(z, p, derivative)
        df = char_fn(z, p, derivative + 1)
        if df == 0:
            return z, False
        step = f / df
        z = z - step
        if not np.isfinite(z):
            return z, False
        if abs(step) <= NEWTON_TOL * (1 + abs(z)):
            return complex(z), True
    return complex(z), False


def _polish(p, z):
    """Newton on Phi, then on Phi' when the zero turns out to be double."""
    z, ok = _newton(p, z)
    scale = 1 + abs(z)
    f = abs(char_fn(z, p))
    if not ok and f > PHI_TOL * max(1.0, abs(z)):
        # slow linear convergence signals a multiple zero
        z2, ok2 = _newton(p, z, derivative=1)
        if ok2 and abs(char_fn(z2, p)) <= PHI_TOL * max(1.0, abs(z2)):
            return z2, True
        return z, False
    if abs(char_fn(z, p, 1)) <= DOUBLE_ROOT_TOL * scale:
        z2, ok2 = _newton(p, z, derivative=1)
        if ok2 and abs(char_fn(z2, p)) <= PHI_TOL * max(1.0, abs(z2)):
            return z2, True
    return z, f <= PHI_TOL * max(1.0, abs(z))


def _multiplicity(p, z):
    df = abs(char_fn(z, p, 1))
    if df > DOUBLE_ROOT_TOL * (1 + abs(z)):
        return 1
    m = _winding_circle(p, z, 1e-4 * (1 + abs(z)))
    return max(m, 1)


def _seeds(p, rect):
    re0, re1, im0, im1 = rect
    cx, cy = 0.5 * (re0 + re1), 0.5 * (im0 + im1)
    seeds = [complex(cx, cy), complex(cx, 0.0) if im0 < 0 < im1 else complex(cx, cy)]
    k_lo = np.sqrt(max(re0, 0.0)) * 2 * p.a / np.pi
    k_hi = np.sqrt(max(re1, 0.0)) * 2 * p.a / np.pi
    for n in range(max(int(k_lo) - 1, 1), int(k_hi) + 2):
        k = n * np.pi / (2 * p.a)
        l = k + (p.c_plus - p.c_minus) / (2 * p.a * k)
        seeds.append(complex(l * l))
    for fx in (0.25, 0.75):
        for fy in (0.25, 0.5, 0.75):
            seeds.append(complex(re0 + fx * (re1 - re0), im0 + fy * (im1 - im0)))
    return seeds


def _inside(z, rect):
    re0, re1, im0, im1 = rect
    return re0 <= z.real <= re1 and im0 <= z.imag <= im1


def _roots_in(p, rect, count, depth=0):
    """Roots (with multiplicities) inside ``rect`` whose winding number is ``count``."""
    if count == 0:
        return [], [rect], [0]
    found = []
    for s in _seeds(p, rect):
        z, ok = _polish(p, s)
        if not ok or not _inside(z, rect):
            continue
        if any(abs(z - w) <= DEDUP_TOL * (1 + abs(z)) for w, _ in found):
            continue
        found.append((z, _multiplicity(p, z)))
    if sum(m for _, m in found) == count:
        return found, [rect], [count]
    if depth > 40:
        raise ContourError(f"could not isolate {count} zeros inside {rect}")
    re0, re1, im0, im1 = rect
    width, height = re1 - re0, im1 - im0
    for frac in (0.5123, 0.4871, 0.5377, 0.4613, 0.5631, 0.4379):
        try:
            if width >= height:
                cut = re0 + frac * width
                halves = [(re0, cut, im0, im1), (cut, re1, im0, im1)]
            else:
                cut = im0 + frac * height
                halves = [(re0, re1, im0, cut), (re0, re1, cut, im1)]
            counts = [_winding(p, h) for h in halves]
            break
        except _NearRoot:
            continue
    else:
        raise ContourError(f"no admissible splitting line for {rect}")
    if sum(counts) != count:
        raise ContourError(f"winding counts of sub-rectangles {counts} do not add up to {count}")
    roots, rects, wind = [], [], []
    for h, c in zip(halves, counts):
        r, rr, ww = _roots_in(p, h, c, depth + 1)
        roots += r
        rects += rr
        wind += ww
    return roots, rects, wind


def find_roots_in_rect(p: BoundaryParams, rect):
    """Certified zeros ``[(lam, multiplicity)]`` inside a rectangle."""
    n = count_zeros(p, rect)
    roots, _, _ = _roots_in(p, tuple(map(float, rect)), n)
    return sorted(roots, key=lambda r: (r[0].real, r[0].imag))


def eigenvalue_region(p: BoundaryParams, re_max):
    """Rectangle containing every eigenvalue with ``Re lam <= re_max``.

    Eigenvalues are values of the form ``t[psi] = |psi'|^2 + c_+ |psi(a)|^2 - c_- |psi(-a)|^2``
    with ``|psi| = 1`` and ``|psi(x)|^2 <= 1/(2a) + 2 |psi'|``, which bounds
    ``Re lam`` from below and ``|Im lam|`` in terms of ``re_max``.
    """
    a = p.a
    s_re = abs(p.c_plus.real) + abs(p.c_minus.real)
    s_im = abs(p.c_plus.imag) + abs(p.c_minus.imag)
    re_min = -(s_re**2) - s_re / (2 * a)
    t_max = s_re + np.sqrt(s_re**2 + s_re / (2 * a) + max(re_max, re_min))
    im_max = s_im * (1 / (2 * a) + 2 * t_max)
    return re_min, im_max


@dataclass
class LocatedSpectrum:
    """Certified eigenvalues with the rectangles and winding numbers that certify them."""

    params: BoundaryParams
    triples: list
    rectangles: list = field(default_factory=list)
    winding_counts: list = field(default_factory=list)
    re_max: float = 0.0

    @property
    def eigenvalues(self):
        return np.array([t.lam for t in self.triples for _ in range(t.algebraic_multiplicity)])

    def certified(self):
        return sum(self.winding_counts) == sum(t.algebraic_multiplicity for t in self.triples)


def _strip_boundaries(p, n_max, re_lo):
    a = p.a
    k = np.arange(n_max + 2) * np.pi / (2 * a)
    shift = (p.c_plus - p.c_minus).real / a
    mids = (0.5 * (k[:-1] + k[1:])) ** 2 + shift
    return [re_lo] + [m for m in mids if m > re_lo + 1.0]


def _place_vertical(p, x, im_lo, im_hi, spacing):
    """Move the line ``Re lam = x`` slightly until no zero lies on it."""
    offsets = [0.0, 0.0123, -0.0271, 0.0419, -0.0533, 0.0677][: MAX_RETRIES + 1]
    for off in offsets:
        xs = x + off * spacing
        try:
            _phase_along(p, complex(xs, im_lo), complex(xs, im_hi), _initial_points(p, complex(xs, im_lo), complex(xs, im_hi)))
            return xs
        except _NearRoot:
            continue
    raise ContourError(f"a zero stays on the contour Re lam = {x} after {MAX_RETRIES} perturbations")


def locate_spectrum(p: BoundaryParams, n_max):
    """All eigenvalues up to about the ``n_max``-th, certified by winding numbers.

    The search region is split into vertical strips whose boundaries sit
    midway between consecutive Neumann eigenvalues (shifted by the leading
    asymptotic correction), so each strip holds about one eigenvalue.
    """
    if int(n_max) != n_max or n_max < 0:
        raise InvalidArgument("n_max must be a non-negative integer")
    n_max = int(n_max)
    re_min, _ = eigenvalue_region(p, 0.0)
    re_lo = re_min - 1.0
    bounds = _strip_boundaries(p, n_max, re_lo)
    _, im_max = eigenvalue_region(p, bounds[-1] + 1.0)
    H = im_max + 1.0
    placed = [bounds[0]]
    for j in range(1, len(bounds)):
        spacing = bounds[j] - bounds[j - 1]
        placed.append(_place_vertical(p, bounds[j], -H, H, spacing))
    roots, rects, winds = [], [], []
    for j in range(len(placed) - 1):
        rect = (placed[j], placed[j + 1], -H, H)
        try:
            n = _winding(p, rect)
        except _NearRoot as exc:
            raise ContourError(f"zero on the contour near {exc.args[0]}") from None
        r, rr, ww = _roots_in(p, rect, n)
        roots += r
        rects += rr
        winds += ww
    roots.sort(key=lambda r: (round(r[0].real, 9), r[0].imag))
    triples = [EigenTriple(complex(z), p, index=i, algebraic_multiplicity=m) for i, (z, m) in enumerate(roots)]
    return LocatedSpectrum(p, triples, rects, winds, re_max=placed[-1])


def find_eigenvalues(p: BoundaryParams, n_max):
    """Certified eigen-triples with real part below the ``n_max``-th strip boundary."""
    if int(n_max) != n_max or n_max < 1:
        raise InvalidArgument("n_max must be a positive integer")
    return locate_spectrum(p, n_max).triples


def count_nonreal(p: BoundaryParams, re_range, im_max, gap=1e-4):
    """Number of zeros with ``gap < |Im lam| <= im_max`` and real part in ``re_range``."""
    re0, re1 = re_range
    upper = count_zeros(p, (re0, re1, gap, im_max))
    lower = count_zeros(p, (re0, re1, -im_max, -gap))
    return upper + lower


def geometric_multiplicity(p: BoundaryParams, lam, tol=1e-8):
    """``2 - rank`` of the boundary-condition matrix on ``{cos(l z), sin(l z)/l}``."""
    L = 2 * p.a
    e = _sinl(lam, L)
    c = np.cos(np.sqrt(complex(lam)) * L)
    # columns: cos(lz), sin(lz)/l ; rows: condition at -a (z = 0) and at +a (z = 2a)
    m = np.array(
        [
            [p.c_minus, 1.0],
            [-lam * e[0] + p.c_plus * c, c + p.c_plus * e[0]],
        ],
        dtype=complex,
    )
    s = np.linalg.svd(m, compute_uv=False)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return 2 - rank
