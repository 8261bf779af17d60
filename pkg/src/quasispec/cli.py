"""Command-line front end.

Every command prints one JSON document (or writes it to ``--out``).  Exit
codes: 0 success, 1 a requested verification failed, 2 invalid arguments,
3 the spectrum could not be certified.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import numpy as np

from . import __version__
from .errors import ContourError, DegeneratePairError, DegenerateSystemError, InvalidArgument, QuasispecError
from .laplacian import unit_coefficients, wavenumber
from .metric import (
    hs_norm_closed,
    metric_cchoice,
    metric_constant,
    metric_general,
    theta_series,
    verify_pde_system,
    verify_quasi_hermiticity,
)
from .numerics import DEFAULT_ORDER, DEFAULT_PANELS, TOL_1D, TOL_2D, hs_norm, make_grid, write_kernel_csv
from .perturbation import Coefficient, asymptotic_gap, galerkin_matrix, liouville_transform, omega_v_stability
from .similarity import (
    degeneracy_report,
    intertwining_residual,
    omega_kernels,
    similar_operator,
    similarity_galerkin,
)
from .spectrum import BoundaryParams, biorthonormalize, count_nonreal, eigenvalue_region, find_eigenvalues, locate_spectrum

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_UNCERTIFIED = 0, 1, 2, 3
SERIES_TRUNCATION = 800
METRIC_TOL = 1e-7
SIMILARITY_TOL = 1e-6
HS_STABILITY_TOL = 0.02


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def defaults():
    return {
        "grid": {"panels": DEFAULT_PANELS, "order": DEFAULT_ORDER},
        "series_truncation": SERIES_TRUNCATION,
        "tolerances": {
            "quadrature_1d": TOL_1D,
            "quadrature_2d": TOL_2D,
            "metric": METRIC_TOL,
            "similarity": SIMILARITY_TOL,
            "hs_stability": HS_STABILITY_TOL,
        },
    }


# ----------------------------------------------------------------- parsing


def parse_complex(text):
    """``re,im`` (or a bare real number) to a complex."""
    parts = str(text).split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected re,im but got {text!r}")


def parse_range(text):
    """``lo:hi:step`` to an inclusive array of values."""
    try:
        lo, hi, step = (float(v) for v in str(text).split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step but got {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 12)


def _add_params(p, pt_only=False):
    p.add_argument("--a", type=float, required=True, help="half-width of the interval")
    p.add_argument("--alpha", type=float, help="PT parameter: c_+- = i alpha +- beta")
    p.add_argument("--beta", type=float, default=None)
    if not pt_only:
        p.add_argument("--c-minus", type=parse_complex, help="Robin constant at -a as re,im")
        p.add_argument("--c-plus", type=parse_complex, help="Robin constant at +a as re,im")


def _add_grid(p):
    p.add_argument("--panels", type=int, default=DEFAULT_PANELS)
    p.add_argument("--order", type=int, default=DEFAULT_ORDER)


def _add_out(p):
    p.add_argument("--out", help="write JSON here instead of stdout")


def build_parser():
    parser = _Parser(prog="quasispec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("spectrum", help="certified eigenvalues")
    _add_params(sp)
    sp.add_argument("--nmax", type=int, default=10)
    _add_out(sp)

    mp = sub.add_parser("metric", help="assemble and verify a metric operator")
    mp.add_argument("kind", choices=["series", "constant", "cchoice", "general"])
    _add_params(mp)
    mp.add_argument("--c", type=float, default=0.0, help="free real constant of the general kernel")
    mp.add_argument("--n", type=int, default=SERIES_TRUNCATION, help="series truncation")
    mp.add_argument("--verify", action="store_true")
    mp.add_argument("--n-verify", type=int, default=10)
    mp.add_argument("--hs", action="store_true", help="Hilbert-Schmidt norm of the kernel")
    mp.add_argument("--csv", help="dump the kernel on the grid as x,y,re,im")
    _add_grid(mp)
    _add_out(mp)

    sm = sub.add_parser("similarity", help="similarity maps and the similar operator h")
    _add_params(sm, pt_only=True)
    sm.add_argument("--size", type=int, default=24)
    sm.add_argument("--verify-all", action="store_true")
    _add_grid(sm)
    _add_out(sm)

    pp = sub.add_parser("perturb", help="Galerkin study of H + V or a Liouville transform")
    _add_params(pp)
    pp.add_argument("--v", default="zero", help="zero | constant[:v] | linear[:s] | sin3 | sine[:k] | file.csv")
    pp.add_argument("--m", type=int, default=40)
    pp.add_argument("--basis", choices=["legendre", "neumann"], default="legendre")
    pp.add_argument("--rho", help="exp:k | constant:r | file.csv (x,value[,d1,d2])")
    pp.add_argument("--bound", type=float, default=10.0, help="positivity bound C with 1/C <= rho <= C")
    pp.add_argument("--verify", action="store_true")
    _add_out(pp)

    sw = sub.add_parser("sweep", help="count non-real eigenvalues over an (alpha, beta) grid")
    sw.add_argument("--alpha", type=parse_range, required=True)
    sw.add_argument("--beta", type=parse_range, required=True)
    sw.add_argument("--a", type=float, required=True)
    sw.add_argument("--re-max", type=float, default=200.0)
    sw.add_argument("--im-max", type=float, default=50.0)
    sw.add_argument("--nmax", type=int, default=8, help="eigenvalues used for min_gap")
    sw.add_argument("--csv", help="write alpha,beta,n_complex_pairs,min_gap here")
    _add_out(sw)
    return parser


def boundary_from_args(args):
    has_pt = getattr(args, "alpha", None) is not None or getattr(args, "beta", None) is not None
    has_c = getattr(args, "c_minus", None) is not None or getattr(args, "c_plus", None) is not None
    if has_pt and has_c:
        raise InvalidArgument("--alpha/--beta and --c-minus/--c-plus are mutually exclusive")
    if has_c:
        if args.c_minus is None or args.c_plus is None:
            raise InvalidArgument("both --c-minus and --c-plus are required")
        return BoundaryParams(args.a, args.c_minus, args.c_plus)
    if args.alpha is None:
        raise InvalidArgument("give --alpha [--beta] or --c-minus and --c-plus")
    return BoundaryParams.from_pt(args.alpha, args.beta or 0.0, args.a)


def _pt_alpha(args):
    if args.alpha is None:
        raise InvalidArgument("--alpha is required")
    if args.beta not in (None, 0.0):
        raise InvalidArgument("this kernel is defined for beta = 0")
    return args.alpha


def _cplx(z):
    return [float(np.real(z)), float(np.imag(z))]


# ---------------------------------------------------------------- commands


def cmd_spectrum(args):
    p = boundary_from_args(args)
    if args.nmax < 1:
        raise InvalidArgument("--nmax must be positive")
    loc = locate_spectrum(p, args.nmax)
    eig = [
        {"re": t.lam.real, "im": t.lam.imag, "multiplicity": t.algebraic_multiplicity, "char_residual": t.char_residual()}
        for t in loc.triples
    ]
    ok = loc.certified()
    out = {
        "params": p.to_dict(),
        "nmax": args.nmax,
        "eigenvalues": eig,
        "certification": {
            "rectangles": [list(map(float, r)) for r in loc.rectangles],
            "winding_counts": [int(w) for w in loc.winding_counts],
            "certified": bool(ok),
        },
    }
    return out, EXIT_OK if ok else EXIT_UNCERTIFIED


def _metric_spec(args, p):
    if args.kind == "constant":
        return metric_constant(_pt_alpha(args), args.a)
    if args.kind == "cchoice":
        return metric_cchoice(_pt_alpha(args), args.a)
    if args.kind == "general":
        if args.alpha is None or args.beta is None:
            raise InvalidArgument("the general kernel needs --alpha and --beta")
        return metric_general(args.alpha, args.beta, args.c, args.a)
    if args.n < 1:
        raise InvalidArgument("--n must be positive")
    triples = biorthonormalize(find_eigenvalues(p, args.n)[: args.n])
    return theta_series(p, unit_coefficients(), args.n, triples)


def cmd_metric(args):
    p = boundary_from_args(args)
    if args.kind == "cchoice" and args.alpha is not None and not 0 < args.alpha < wavenumber(1, args.a):
        raise InvalidArgument(f"cchoice needs 0 < alpha < k_1 = {wavenumber(1, args.a):.6g}")
    theta = _metric_spec(args, p)
    panels = args.panels
    if args.kind == "series":
        # the grid must resolve the highest retained mode
        panels = max(panels, -(-args.n // 4))
    grid = make_grid(args.a, panels, args.order)
    out = {"params": p.to_dict(), "kind": args.kind, "grid": grid.describe()}
    if args.kind == "general":
        out["c"] = args.c
    if args.kind == "series":
        out["truncation"] = args.n
    ok = True
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            write_kernel_csv(theta.kernel, grid, fh)
        out["csv"] = args.csv
    if args.hs:
        q = hs_norm(theta.kernel, grid)
        closed = hs_norm_closed(args.alpha, args.beta, args.c, args.a) if args.kind == "general" else None
        out["hs"] = {
            "quadrature": q,
            "quadrature_squared": q * q,
            "closed": closed,
            "closed_squared": None if closed is None else closed * closed,
        }
        if closed is not None:
            ok &= abs(q - closed) <= 1e-6 * (1 + closed)
    if args.verify:
        triples = biorthonormalize(find_eigenvalues(p, args.n_verify + 1)[: args.n_verify + 1])
        rep = verify_quasi_hermiticity(theta, triples, grid, n_test=args.n_verify + 1, tol=METRIC_TOL)
        out["verification"] = rep
        ok &= rep["passed"]
        K = theta.kernel
        if all(getattr(K, d) is not None for d in ("dx", "dy", "dxx", "dyy")):
            pde = verify_pde_system(K, args.alpha, args.beta or 0.0, args.a)
            out["pde"] = pde
            ok &= max(pde.values()) <= SIMILARITY_TOL
    return out, EXIT_OK if ok else EXIT_FAIL


def cmd_similarity(args):
    alpha = _pt_alpha(args)
    grid = make_grid(args.a, args.panels, args.order)
    h = similar_operator(alpha, args.a)
    out = {"params": BoundaryParams.from_pt(alpha, 0.0, args.a).to_dict(), "grid": grid.describe(),
           "h_spectrum": h.spectrum(args.size - 1).tolist()}
    try:
        maps = omega_kernels(alpha, args.a)
    except DegeneratePairError:
        out["degeneracy"] = degeneracy_report(alpha, args.a, grid)
        out["omega_residuals"] = None
        out["factorization_residual"] = None
        return out, EXIT_FAIL if args.verify_all else EXIT_OK
    out["degeneracy"] = None
    out["hs_norms"] = maps.hs_norms(grid)
    ok = True
    if args.verify_all:
        p = BoundaryParams.from_pt(alpha, 0.0, args.a)
        triples = biorthonormalize(find_eigenvalues(p, 12)[:11])
        comp = maps.composition_residual(grid)
        mapping = maps.mapping_residuals(triples, grid)
        res = {
            "composition_kernel": comp["kernel"],
            "composition_action": comp["action"],
            "mapping": max(r[0] for r in mapping),
            "inverse_mapping": max(r[1] for r in mapping),
            "lm_identity": maps.lm_identity_residual(),
            "derivative_identity": maps.derivative_identity_residual(
                grid, lambda x: np.cos(x) + 1j * x**2, None),
            "intertwining": intertwining_residual(maps, triples[:9], grid),
        }
        G = similarity_galerkin(maps, args.size, grid)
        ev = np.sort(np.linalg.eigvals(G).real)
        gal = {
            "size": args.size,
            "symmetry_defect": float(np.max(np.abs(G - G.T))),
            "imaginary_part": float(np.max(np.abs(G.imag))),
            "spectrum_error": float(np.max(np.abs(ev - np.sort(h.spectrum(args.size - 1))))),
        }
        out["omega_residuals"] = res
        out["factorization_residual"] = maps.factorization_residual()
        out["galerkin"] = gal
        worst = max(list(res.values()) + [out["factorization_residual"]] + [gal["symmetry_defect"],
                                                                              gal["imaginary_part"],
                                                                              gal["spectrum_error"]])
        out["max_residual"] = worst
        ok = worst <= SIMILARITY_TOL
    return out, EXIT_OK if ok else EXIT_FAIL


def _rho_from_spec(spec):
    name, _, arg = spec.partition(":")
    if spec.endswith(".csv"):
        return Coefficient.from_csv(spec)
    try:
        val = float(arg) if arg else 1.0
    except ValueError:
        raise InvalidArgument(f"bad rho parameter in {spec!r}") from None
    if name == "exp":
        return Coefficient.exponential(val)
    if name == "constant":
        return Coefficient.constant(val)
    raise InvalidArgument(f"unknown rho {spec!r}")


def cmd_perturb(args):
    p = boundary_from_args(args)
    out = {"params": p.to_dict(), "M": args.m, "basis": args.basis}
    ok = True
    if args.rho:
        ld = liouville_transform(_rho_from_spec(args.rho), p, args.bound)
        sys_ = galerkin_matrix(ld.params, ld.potential, args.m, args.basis)
        out["liouville"] = {
            "rho": ld.rho.name,
            "endpoints": list(ld.endpoints),
            "transformed_params": ld.params.to_dict(),
        }
        out["potential"] = ld.potential.name
    else:
        sys_ = galerkin_matrix(p, args.v, args.m, args.basis)
        out["potential"] = sys_.potential.name
    out["eigenvalues"] = [_cplx(z) for z in sys_.eigenvalues]
    out["biorthogonality_defect"] = sys_.biorthogonality_defect()
    if sys_.potential.is_zero:
        gap = asymptotic_gap(sys_)
        out["asymptotic_gap"] = {"values": [_cplx(g) for g in gap],
                                 "limit": _cplx((sys_.params.c_plus - sys_.params.c_minus) / sys_.params.a)}
    try:
        stab = omega_v_stability(sys_.params, sys_.potential, args.m, args.basis)
        out["omega_v"] = stab
        ok &= stab["relative_change"] < HS_STABILITY_TOL
    except DegenerateSystemError as exc:
        out["omega_v"] = None
        out["degenerate"] = str(exc)
        ok = False
    ok &= out["biorthogonality_defect"] <= 1e-9
    return out, EXIT_FAIL if (args.verify and not ok) else EXIT_OK


def sweep_point(alpha, beta, a, re_max, im_max, nmax):
    """One sweep row: number of conjugate pairs off the real axis and the smallest eigenvalue gap."""
    p = BoundaryParams.from_pt(alpha, beta, a)
    re_lo = eigenvalue_region(p, 0.0)[0] - 1.0
    n = count_nonreal(p, (re_lo, re_max), im_max)
    lam = []
    for t in find_eigenvalues(p, nmax):
        lam += [t.lam] * t.algebraic_multiplicity
    lam = np.array(lam)
    d = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(d, np.inf)
    return {"alpha": float(alpha), "beta": float(beta), "n_complex_pairs": n // 2, "min_gap": float(d.min())}


def cmd_sweep(args):
    if args.a <= 0:
        raise InvalidArgument("--a must be positive")
    points = [(al, be) for al in args.alpha for be in args.beta]
    workers = max(1, int(os.environ.get("QUASISPEC_THREADS", os.cpu_count() or 1)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda ab: sweep_point(ab[0], ab[1], args.a, args.re_max, args.im_max, args.nmax), points))
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("alpha,beta,n_complex_pairs,min_gap\n")
            for r in rows:
                fh.write(f"{r['alpha']!r},{r['beta']!r},{r['n_complex_pairs']},{r['min_gap']!r}\n")
    out = {"a": args.a, "re_max": args.re_max, "im_max": args.im_max, "threads": workers, "rows": rows}
    if args.csv:
        out["csv"] = args.csv
    return out, EXIT_OK


def load_schema(name):
    """Published JSON schema of a command output (``common`` holds the shared definitions)."""
    return json.loads(resources.files("quasispec").joinpath("schemas", f"{name}.json").read_text())


COMMANDS = {
    "spectrum": cmd_spectrum,
    "metric": cmd_metric,
    "similarity": cmd_similarity,
    "perturb": cmd_perturb,
    "sweep": cmd_sweep,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return _cplx(obj)
    return obj


def _emit(doc, path):
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _glue_negative_ranges(argv):
    """Join ``--beta -1:1:0.1`` into ``--beta=-1:1:0.1`` so argparse does not read an option."""
    out = []
    for tok in argv:
        if out and out[-1] in ("--alpha", "--beta") and tok.startswith("-") and ":" in tok:
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None):
    parser = build_parser()
    argv = _glue_negative_ranges(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"quasispec: error: {exc}\n")
        return EXIT_INVALID
    out_path = getattr(args, "out", None)
    try:
        doc, code = COMMANDS[args.command](args)
    except (InvalidArgument, argparse.ArgumentTypeError) as exc:
        sys.stderr.write(f"quasispec: invalid argument: {exc}\n")
        return EXIT_INVALID
    except ContourError as exc:
        sys.stderr.write(f"quasispec: spectrum not certified: {exc}\n")
        _emit({"command": args.command, "error": str(exc), "defaults": defaults()}, out_path)
        return EXIT_UNCERTIFIED
    except QuasispecError as exc:
        sys.stderr.write(f"quasispec: {type(exc).__name__}: {exc}\n")
        _emit({"command": args.command, "error": str(exc), "defaults": defaults()}, out_path)
        return EXIT_FAIL
    doc = {"command": args.command, "exit_code": code, "defaults": defaults(), **doc}
    _emit(doc, out_path)
    return code


if __name__ == "__main__":
    sys.exit(main())
