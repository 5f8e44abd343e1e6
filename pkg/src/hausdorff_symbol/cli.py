"""Command-line interface: ``hausdorff-symbol <command> --spec FILE ...``.

Floats are written in shortest round-trip form (Python ``repr``), so
identical invocations produce byte-identical output.  ``--plot PATH``
additionally renders a figure with matplotlib when it is installed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .expr import ExprError
from .fixtures import FUNCTIONS, OPERATORS, load_fixture, load_function
from .mellin import LogGrid, apply_hausdorff, sample_function
from .octants import HyperplaneError
from .quadrature import QuadConfig, QuadratureError, discretize_measure
from .spec_model import SpecError, load_spec, parse_function
from .spectral import SGrid, classify, noncompactness_probe, operator_norm, spectrum, symbols

EXIT_OK, EXIT_INPUT, EXIT_CHECK = 0, 1, 2


class InputError(Exception):
    pass


# --------------------------------------------------------------------------
# argument handling


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--spec", required=True, help="operator spec JSON file, or the name of a bundled fixture")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("-o", "--output", help="write the result here instead of stdout")
    p.add_argument("--quad-order", type=int, default=16, help="Gauss-Legendre points per panel")
    p.add_argument("--quad-tol", type=float, default=1e-10, help="quadrature tolerance")


def _add_sgrid(p: argparse.ArgumentParser):
    p.add_argument("--s-max", type=float, help="half-width S of the s-grid [-S, S]^n")
    p.add_argument("--s-count", type=int, help="grid points per axis")
    p.add_argument("--far", default="100,1000,10000", help="comma-separated far-field radii ('' for none)")


def _add_loggrid(p: argparse.ArgumentParser):
    p.add_argument("--t-min", type=float, default=-12.0)
    p.add_argument("--t-max", type=float, default=12.0)
    p.add_argument("--log-m", type=int, help="log-grid points per axis (power of two)")


def _add_plot(p: argparse.ArgumentParser):
    p.add_argument("--plot", metavar="PATH", help="also render a figure to PATH (needs matplotlib)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hausdorff-symbol", description="Matrix symbols of multidimensional Hausdorff operators.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("symbol", help="export the XOR coefficients of the symbol over an s-grid")
    _add_common(p)
    _add_sgrid(p)
    _add_plot(p)

    p = sub.add_parser("norm", help="operator norm, the L1 kernel bound and the maximising s")
    _add_common(p)
    _add_sgrid(p)

    p = sub.add_parser("spectrum", help="eigenvalue cloud and point-spectrum candidates")
    _add_common(p)
    _add_sgrid(p)
    _add_plot(p)
    p.add_argument("--tol", type=float, default=1e-6, help="point-spectrum tolerance")

    p = sub.add_parser("classify", help="self-adjoint / positive / unitary / invertible report")
    _add_common(p)
    _add_sgrid(p)
    p.add_argument("--tol", type=float, default=1e-6)

    p = sub.add_parser("apply", help="apply the operator to a test function at points")
    _add_common(p)
    _add_loggrid(p)
    _add_plot(p)
    p.add_argument("--function", required=True, help="test-function JSON file, or a bundled fixture name")
    p.add_argument("--x", default="0.05:0.95:19", help="START:STOP:COUNT along the diagonal, or a CSV file of points")

    p = sub.add_parser("verify", help="run the residual suite; exit 2 when a check fails")
    _add_common(p)
    _add_sgrid(p)
    _add_loggrid(p)

    p = sub.add_parser("probe-compactness", help="Galerkin singular-value counts above a threshold")
    _add_common(p)
    _add_loggrid(p)
    p.add_argument("--sizes", default="32,64,128")
    p.add_argument("--threshold", type=float, default=0.5)
    return parser


def _load_spec(ref: str):
    path = Path(ref)
    if path.exists():
        return load_spec(path)
    if ref in OPERATORS:
        return load_fixture(ref)
    raise InputError(f"spec file not found: {ref} (bundled fixtures: {', '.join(OPERATORS)})")


def _load_function(ref: str, n: int):
    path = Path(ref)
    if path.exists():
        return parse_function(path.read_text(encoding="utf-8"), n)
    if ref in FUNCTIONS:
        return load_function(ref)
    raise InputError(f"function file not found: {ref} (bundled fixtures: {', '.join(FUNCTIONS)})")


def _sgrid(args, n: int) -> SGrid:
    d = SGrid.default(n)
    far = tuple(float(v) for v in args.far.split(",") if v.strip()) if args.far is not None else d.far
    return SGrid(n, args.s_max if args.s_max is not None else d.S, args.s_count if args.s_count is not None else d.m, far)


def _loggrid(args, n: int) -> LogGrid:
    d = LogGrid.default(n)
    return LogGrid(n, args.t_min, args.t_max, args.log_m if args.log_m is not None else d.m)


def _points(spec_x: str, n: int) -> np.ndarray:
    path = Path(spec_x)
    if path.exists():
        pts = np.loadtxt(path, delimiter=",", ndmin=2)
        if pts.shape[1] != n:
            raise InputError(f"point file has {pts.shape[1]} columns, expected {n}")
        return pts
    try:
        start, stop, count = spec_x.split(":")
        line = np.linspace(float(start), float(stop), int(count))
    except ValueError:
        raise InputError(f"--x must be START:STOP:COUNT or a CSV file, got {spec_x!r}") from None
    return np.repeat(line[:, None], n, axis=1)


# --------------------------------------------------------------------------
# formatting


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _cplx(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def _emit(text: str, args):
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _kv_csv(d: dict) -> str:
    lines = ["key,value"]
    for k in sorted(d):
        v = d[k]
        if isinstance(v, (list, tuple)):
            v = " ".join(repr(float(x)) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k},{v}")
    return "\n".join(lines) + "\n"


def _figure():
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise InputError("--plot needs matplotlib; install the 'plot' extra") from None
    return plt


# --------------------------------------------------------------------------
# commands


def cmd_symbol(args, spec, nodes) -> int:
    grid = _sgrid(args, spec.n)
    sg = symbols(spec, nodes, grid)
    if args.format == "csv":
        _emit(sg.to_csv(), args)
    else:
        pts, C = sg.points(), sg.flat_coeffs()
        doc = {
            "name": spec.name,
            "n": spec.n,
            "structure": sg.tag,
            "grid": {"S": grid.S, "m": grid.m},
            "samples": [{"s": [float(v) for v in p], "c": [_cplx(z) for z in c]} for p, c in zip(pts, C)],
            "far_field": [{"s": [float(v) for v in p], "c": [_cplx(z) for z in c]} for p, c in zip(sg.far_points, sg.far_coeffs)],
        }
        _emit(_json(doc), args)
    if args.plot:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(7, 4))
        if spec.n == 1:
            s = sg.axes[0]
            for d in range(sg.coeffs.shape[-1]):
                ax.plot(s, sg.coeffs[:, d].real, label=f"Re c_{d}")
                ax.plot(s, sg.coeffs[:, d].imag, "--", label=f"Im c_{d}")
            ax.set_xlabel("s")
            ax.legend()
        else:
            lam = np.abs(sg.eigenvalues()).max(axis=1).reshape(*[a.size for a in sg.axes][:2], -1)[..., 0]
            im = ax.imshow(lam.T, origin="lower", extent=[sg.axes[0][0], sg.axes[0][-1], sg.axes[1][0], sg.axes[1][-1]])
            fig.colorbar(im, ax=ax, label="max |lambda|")
            ax.set_xlabel("s_1")
            ax.set_ylabel("s_2")
        ax.set_title(f"{spec.name}: {sg.tag}")
        fig.savefig(args.plot, dpi=120, bbox_inches="tight")
        plt.close(fig)
    return EXIT_OK


def cmd_norm(args, spec, nodes) -> int:
    rep = operator_norm(spec, nodes, _sgrid(args, spec.n)).to_dict()
    _emit(_kv_csv(rep) if args.format == "csv" else _json(rep), args)
    return EXIT_OK


def cmd_spectrum(args, spec, nodes) -> int:
    est = spectrum(spec, nodes, _sgrid(args, spec.n), tol=args.tol)
    if args.format == "csv":
        _emit(est.to_csv(), args)
    else:
        doc = est.to_dict()
        doc["eigenvalues"] = [_cplx(z) for z in est.eigenvalues.ravel()]
        doc["far_eigenvalues"] = [_cplx(z) for z in est.far_eigenvalues.ravel()]
        _emit(_json(doc), args)
    if args.plot:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(5, 5))
        lam = est.eigenvalues.ravel()
        ax.plot(lam.real, lam.imag, ".", ms=2, label="grid")
        far = est.far_eigenvalues.ravel()
        if far.size:
            ax.plot(far.real, far.imag, "x", label="far field")
        for c in est.candidates:
            ax.plot([c.value.real], [c.value.imag], "o", mfc="none", ms=10, label=f"point {c.value.real:.3g}{c.value.imag:+.3g}i")
        ax.set_aspect("equal")
        ax.set_xlabel("Re")
        ax.set_ylabel("Im")
        ax.legend(fontsize=7)
        ax.set_title(f"{spec.name}: spectrum samples")
        fig.savefig(args.plot, dpi=120, bbox_inches="tight")
        plt.close(fig)
    return EXIT_OK


def cmd_classify(args, spec, nodes) -> int:
    rep = classify(spec, nodes, _sgrid(args, spec.n), tol=args.tol)
    if args.format == "csv":
        lines = ["property,holds,value,witness_s"]
        for name in ("self_adjoint", "positive", "unitary", "invertible", "nonzero"):
            p = getattr(rep, name)
            lines.append(f"{name},{str(p.holds).lower()},{p.value!r},{' '.join(repr(v) for v in p.witness_s)}")
        _emit("\n".join(lines) + "\n", args)
    else:
        _emit(rep.to_json() + "\n", args)
    return EXIT_OK


def cmd_apply(args, spec, nodes) -> int:
    fs = _load_function(args.function, spec.n)
    grid = _loggrid(args, spec.n)
    f = sample_function(fs, grid)
    X = _points(args.x, spec.n)
    vals = apply_hausdorff(spec, nodes, f, X, resolve=True)
    if args.format == "csv":
        head = [f"x_{l + 1}" for l in range(spec.n)] + ["re", "im"]
        rows = [",".join([repr(float(v)) for v in x] + [repr(float(y.real)), repr(float(y.imag))]) for x, y in zip(X, vals)]
        _emit("\n".join([",".join(head)] + rows) + "\n", args)
    else:
        _emit(_json({"points": X.tolist(), "values": [_cplx(v) for v in vals]}), args)
    if args.plot:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(X[:, 0], vals.real, label="Re Hf")
        ax.plot(X[:, 0], vals.imag, "--", label="Im Hf")
        ax.set_xlabel("x_1")
        ax.legend()
        fig.savefig(args.plot, dpi=120, bbox_inches="tight")
        plt.close(fig)
    return EXIT_OK


def cmd_verify(args, spec, nodes) -> int:
    from .checks import run_checks

    checks = run_checks(spec, nodes, _sgrid(args, spec.n), _loggrid(args, spec.n), QuadConfig(order=args.quad_order, tol=args.quad_tol))
    if args.format == "json":
        _emit(_json({"name": spec.name, "checks": [c.to_dict() for c in checks]}), args)
    else:
        lines = ["check,value,threshold,passed,detail"]
        lines += [f"{c.name},{c.value!r},{c.threshold!r},{str(c.passed).lower()},{c.detail}" for c in checks]
        _emit("\n".join(lines) + "\n", args)
    for c in checks:
        print(c.line(), file=sys.stderr)
    failed = [c.name for c in checks if not c.passed]
    if failed:
        print(f"violated: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_probe(args, spec, nodes) -> int:
    try:
        sizes = tuple(int(v) for v in args.sizes.split(","))
    except ValueError:
        raise InputError(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
    rep = noncompactness_probe(spec, nodes, sizes, args.threshold, _loggrid(args, spec.n))
    if args.format == "csv":
        lines = ["size,count"] + [f"{N},{c}" for N, c in zip(rep["sizes"], rep["counts"])]
        _emit("\n".join(lines) + "\n", args)
    else:
        _emit(_json(rep), args)
    return EXIT_OK


COMMANDS = {
    "symbol": cmd_symbol,
    "norm": cmd_norm,
    "spectrum": cmd_spectrum,
    "classify": cmd_classify,
    "apply": cmd_apply,
    "verify": cmd_verify,
    "probe-compactness": cmd_probe,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        spec = _load_spec(args.spec)
        nodes = discretize_measure(spec, QuadConfig(order=args.quad_order, tol=args.quad_tol))
        return COMMANDS[args.command](args, spec, nodes)
    except (InputError, SpecError, ExprError, QuadratureError, HyperplaneError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
