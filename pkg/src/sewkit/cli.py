"""Command-line front end.

Every subcommand prints a single self-contained JSON report to stdout
(schema version 1) and diagnostics to stderr.  Exit codes: 0 success,
2 precondition violation (machine-readable reason in the report), 1
internal error, 64 usage errors.  Reports are byte-identical across runs
for the same inputs and seed; timing is only included when ``--timing``
is passed, since it would break that determinism.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .additive import sew
from .control import ControlFunction, logpow_control, power_control, summed_modulus
from .errors import PreconditionError, SewkitError
from .germs import build_area_table, stochastic_germ, stochastic_integral, scalar_field, young_germ
from .matops import expm, operator_norm
from .multiplicative import sew_mul
from .paths import SampledPath, linear_path, poly_path, sample_brownian
from .prodint import MatrixPath, product_germ, trotter_limit
from .signature import (
    GeodesicFunctional,
    decay_constants,
    eval_e_beta,
    extend_functional,
    growth_envelope,
    signature_from_json,
    signature_to_json,
)

SCHEMA = 1


class _Parser(argparse.ArgumentParser):
    """argparse that exits 64 on usage problems instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(64)


def _digest(payload) -> str:
    canon = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _file_digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _parse_control(spec: str) -> ControlFunction:
    try:
        family, alpha = spec.split(":")
        alpha = float(alpha)
    except ValueError as exc:
        raise PreconditionError("control-spec", f"expected FAMILY:ALPHA, got {spec!r}") from exc
    if family == "power":
        return power_control(alpha)
    if family == "logpow":
        return logpow_control(alpha)
    raise PreconditionError("control-spec", f"unknown family {family!r}")


def _control_echo(cf: ControlFunction) -> dict:
    if cf.family == "power":
        formula = (f"{cf.scale:g} * 2^{cf.alpha:g} * t^{cf.alpha:g}"
                   f" / (2^{cf.alpha:g} - base)")
    elif cf.family == "logpow":
        formula = f"series of {cf.scale:g} * t / log(1/t)^{cf.alpha:g} (base 2 only)"
    else:
        formula = "truncated series + observed-ratio tail"
    return {"family": cf.family, "alpha": cf.alpha, "theta": cf.strong_theta(),
            "vbar_formula": formula}


def _parse_matrix(text: str) -> np.ndarray:
    try:
        mat = np.asarray(json.loads(text), dtype=float)
    except (json.JSONDecodeError, ValueError) as exc:
        raise PreconditionError("matrix", f"not a JSON matrix: {text!r}") from exc
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise PreconditionError("matrix", f"need a square matrix, got shape {mat.shape}")
    return mat


def _emit(report: dict, timing: float | None) -> None:
    if timing is not None:
        report["timing_s"] = round(timing, 6)
    print(json.dumps(report, sort_keys=True))


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def _cmd_gen_path(args) -> dict:
    if args.kind == "brownian":
        path = sample_brownian(args.dim, args.points, horizon=args.horizon, seed=args.seed)
    elif args.kind == "linear":
        path = linear_path(n_points=args.points, t_end=args.horizon, dim=args.dim)
    elif args.kind == "poly":
        if args.coeffs:
            coeffs = [float(c) for c in args.coeffs.split(",")]
        else:
            rng = np.random.Generator(np.random.PCG64(args.seed))
            coeffs = rng.uniform(-1.0, 1.0, size=args.degree + 1).tolist()
        path = poly_path(coeffs, n_points=args.points, t_end=args.horizon)
    else:  # pragma: no cover - argparse choices guard this
        raise PreconditionError("kind", args.kind)
    path.to_csv(args.out)
    return {
        "out": args.out,
        "points": len(path.times),
        "dim": path.dim,
        "alpha_est": round(path.alpha_est, 6),
        "norm_est": round(path.norm_est, 6),
        "csv_digest": _file_digest(args.out),
    }


def _cmd_young(args) -> dict:
    x = SampledPath.from_csv(args.x)
    y = SampledPath.from_csv(args.y)
    control = _parse_control(args.control) if args.control else None
    germ = young_germ(x, y, mode=args.mode, control=control)
    res = sew(germ, args.a, args.b, tol=args.tol)
    return {
        "value": np.atleast_1d(res.value).tolist(),
        "alpha_x": round(x.alpha_est, 6),
        "alpha_y": round(y.alpha_est, 6),
        "levels_used": res.levels_used,
        "aposteriori": res.aposteriori,
        "certified_bound": res.certified_bound,
        "converged": res.converged,
        "control": _control_echo(germ.control),
    }


def _cmd_stoch(args) -> dict:
    path = SampledPath.from_csv(args.path)
    if path.dim != 1:
        raise PreconditionError("stoch-dim", "CLI stochastic germs are scalar (m=1)")
    if not args.f.startswith("poly:"):
        raise PreconditionError("f-spec", f"expected poly:c0,c1,..., got {args.f!r}")
    coeffs = np.array([float(c) for c in args.f[5:].split(",")])
    deriv = np.polyder(np.poly1d(coeffs[::-1]))
    fn = np.poly1d(coeffs[::-1])
    f_eval, df_eval = scalar_field(lambda v: float(fn(v)), lambda v: float(deriv(v)))
    area = build_area_table(path, args.convention)
    germ = stochastic_germ(path, f_eval, df_eval, args.convention, area=area)
    res = stochastic_integral(germ, args.a, args.b, tol=args.tol, full_result=True)
    return {
        "value": np.atleast_1d(res.value).tolist(),
        "convention": args.convention,
        "levels_used": res.levels_used,
        "aposteriori": res.aposteriori,
        "certified_bound": res.certified_bound,
        "converged": res.converged,
        "control": _control_echo(germ.control),
    }


def _cmd_prodint(args) -> dict:
    mat_a = _parse_matrix(args.A)
    mat_b = _parse_matrix(args.B) if args.B else None
    dim = mat_a.shape[0]
    if mat_b is not None and mat_b.shape != mat_a.shape:
        raise PreconditionError("matrix", "A and B must share a shape")

    if mat_b is None:
        path = MatrixPath.linear(mat_a, domain_end=args.b + 1.0)
    else:
        def fn(t):
            return t * mat_a + np.sin(t) * mat_b

        path = MatrixPath.from_function(fn, dim=dim, domain_end=args.b + 1.0)
    germ = product_germ(path, form=args.germ_form)
    res = sew_mul(germ, args.a, args.b, tol=args.tol)
    return {
        "value": res.value.tolist(),
        "germ_form": args.germ_form,
        "alpha": round(path.alpha, 6),
        "levels_used": res.levels_used,
        "aposteriori": res.aposteriori,
        "certified_bound": res.certified_bound,
        "converged": res.converged,
        "control": _control_echo(germ.control),
    }


def _cmd_trotter(args) -> dict:
    mat_a = _parse_matrix(args.A)
    mat_b = _parse_matrix(args.B)
    steps = trotter_limit(mat_a, mat_b, args.n)
    target = expm(mat_a + mat_b)
    return {
        "target_norm": operator_norm(target),
        "rows": [{"n": s.n, "distance_to_limit": s.distance} for s in steps],
    }


def _cmd_extend_signature(args) -> dict:
    text = Path(args.input).read_text()
    g, alpha = signature_from_json(text)
    base = GeodesicFunctional(g, span=1.0, alpha=alpha)
    ext = extend_functional(base, args.depth, tol=args.tol)
    y = ext.eval(0.0, 1.0)
    return {
        "input_digest": _file_digest(args.input),
        "input_depth": g.depth,
        "depth": args.depth,
        "signature": json.loads(signature_to_json(y, alpha)),
        "tail_constant": ext.tail_constant([(0.0, 0.5), (0.0, 1.0), (0.25, 0.75)]),
    }


def _cmd_envelope(args) -> dict:
    k = np.array([float(v) for v in args.K.split(",")])
    if args.extend_to and args.extend_to > len(k):
        k = decay_constants(k, args.alpha, args.extend_to)
    fit = growth_envelope(k, args.alpha, args.beta)
    bounds = [fit.c * fit.x**m / math.factorial(m) ** args.beta
              for m in range(1, len(k) + 1)]
    return {
        "K": k.tolist(),
        "c": fit.c,
        "x": fit.x,
        "c_prime": fit.c_prime,
        "sup_ratio": fit.sup_ratio,
        "sup_at": fit.sup_at,
        "envelope": bounds,
        "e_beta_at_x": eval_e_beta(fit.x, args.beta),
    }


# ----------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="sewkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"sewkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-path", help="generate a CSV path")
    p.add_argument("--kind", choices=["brownian", "linear", "poly"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=1025)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--coeffs", type=str, default="")
    p.add_argument("--out", required=True)
    p.set_defaults(run=_cmd_gen_path)

    p = sub.add_parser("young", help="Young integral of x against dy")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--mode", choices=["product", "outer"], default="product")
    p.add_argument("--control", type=str, default="")
    p.set_defaults(run=_cmd_young)

    p = sub.add_parser("stoch", help="pathwise stochastic integral of f(X) dX")
    p.add_argument("--path", required=True)
    p.add_argument("--f", default="poly:0,1", help="poly:c0,c1,... in x")
    p.add_argument("--convention", choices=["ito", "stratonovich"], default="stratonovich")
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(run=_cmd_stoch)

    p = sub.add_parser("prodint", help="product integral of A_t = t A [+ sin(t) B]")
    p.add_argument("--A", required=True, help="JSON rows of the linear coefficient")
    p.add_argument("--B", default="", help="optional JSON rows of the sine coefficient")
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--germ-form", choices=["plus", "exp"], default="plus")
    p.set_defaults(run=_cmd_prodint)

    p = sub.add_parser("trotter", help="splitting table against exp(A+B)")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--n", type=int, default=8)
    p.set_defaults(run=_cmd_trotter)

    p = sub.add_parser("extend-signature", help="extend a stored signature to depth L")
    p.add_argument("--input", required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-11)
    p.set_defaults(run=_cmd_extend_signature)

    p = sub.add_parser("envelope", help="factorial growth envelope for level constants")
    p.add_argument("--K", required=True, help="comma-separated level constants K_1..K_N")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--extend-to", type=int, default=0)
    p.set_defaults(run=_cmd_envelope)

    for sp in sub.choices.values():
        sp.add_argument("--timing", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    started = time.perf_counter()
    inputs = {k: v for k, v in vars(args).items() if k not in ("run", "timing")}
    report = {"schema": SCHEMA, "command": inputs.pop("command"), "inputs": inputs,
              "inputs_digest": _digest(inputs)}
    try:
        report["result"] = args.run(args)
    except PreconditionError as exc:
        report["error"] = {"code": "precondition", "reason": exc.reason, "detail": exc.detail}
        _emit(report, time.perf_counter() - started if args.timing else None)
        print(f"precondition violated: {exc}", file=sys.stderr)
        return 2
    except SewkitError as exc:
        report["error"] = {"code": type(exc).__name__, "detail": str(exc)}
        _emit(report, time.perf_counter() - started if args.timing else None)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 1
    _emit(report, time.perf_counter() - started if args.timing else None)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
