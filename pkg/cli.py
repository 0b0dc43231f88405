#!/usr/bin/env python3
"""
Lattice operator toolkit CLI.

Usage:
    python cli.py lattice-info --Q 1/2 --c1 1 --c2 1 --n 4
    python cli.py op-apply --op dx --poly "0,0,1" --beta 0 --c5 2
    python cli.py family thm1 --Q 1/2 --c1 1 --c2 1 --a 3 --n 5
    python cli.py pearson-solve --phi "0,0,-1/2" --psi "1,0" --c5 2 --n 4
    python cli.py verify thm1 --Q 1/2 --c1 1 --c2 1 --c3 0 --a 3 --n 12 --format json
    python cli.py verify nonexistence --beta 1 --c5 1 --c6 0 --b0 0 --format json
    python cli.py selftest --n 20 --seed 0

Scalar flags take negative values directly (--b0 -1/2, --poly -1/2,0,1) or
in the joined form --b0=-1/2.

Exit codes:
    0: PASS - every requested check holds
    1: FAIL - a check failed or the inputs are mathematically irregular
    2: ERROR - unknown command, malformed flag or a depth whose operator tables
       exceed LATOPS_MAX_DEGREE
"""

import argparse
import json
import sys
import time
from typing import Literal, Optional, TextIO

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError

from ddops import MAX_DEGREE, apply, apply_power, build_tables, pointwise_oracle
from exact_core import LatopsError, ParameterError, Poly
from export_utils import recurrence_rows, render, report_rows, with_approx
from families import (
    AWParams,
    MeixnerParams,
    Thm1Params,
    Thm2Params,
    aw_recurrence,
    classical_recurrence,
    meixner2_recurrence,
    regularity_scan,
    thm1_pearson_data,
    thm1_recurrence,
    thm2_pearson_data,
    thm2_recurrence,
)
from functionals import PearsonData, pearson_moments, recurrence_from_moments
from lattice import Lattice, QQuadraticLattice, QuadraticLattice, lattice_seq, structural_polys
from logging_config import get_logger, setup_logging
from utils import approx, parse_scalar, parse_scalar_list, render_poly
from verify import (
    bzero_forcing_qlattice,
    cross_validate_thm1,
    cross_validate_thm2,
    functional_identity_suite,
    nonexistence_quadratic,
    run_selftest,
    suite_table_degree,
)

load_dotenv()

logger = get_logger(__name__)

# Flags whose values may start with '-' ("-1/2", "-2/3*i", "-1/2,0,1").
SCALAR_FLAGS = frozenset(
    "--" + name
    for name in (
        "Q", "c1", "c2", "c3", "beta", "c5", "c6", "a", "b0", "B0", "C1",
        "a1", "a2", "a3", "a4", "b1", "b2", "poly", "phi", "psi", "at",
    )
)


class LatticeModel(BaseModel):
    """Lattice JSON input; every number is a scalar string."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["q", "quadratic"]
    Q: Optional[str] = None
    c1: str = "1"
    c2: str = "1"
    c3: str = "0"
    beta: str = "0"
    c5: str = "0"
    c6: str = "0"

    def to_lattice(self) -> Lattice:
        if self.kind == "q":
            if self.Q is None:
                raise ParameterError("A q-lattice needs Q")
            return QQuadraticLattice(parse_scalar(self.Q).as_fraction(), parse_scalar(self.c1),
                                     parse_scalar(self.c2), parse_scalar(self.c3))
        return QuadraticLattice(parse_scalar(self.beta), parse_scalar(self.c5), parse_scalar(self.c6))


class ParamsModel(BaseModel):
    """Family parameter JSON input; keys mirror the CLI flags."""

    model_config = ConfigDict(extra="forbid")

    a: Optional[str] = None
    a1: Optional[str] = None
    a2: Optional[str] = None
    a3: Optional[str] = None
    a4: Optional[str] = None
    Q: Optional[str] = None
    b1: Optional[str] = None
    b2: Optional[str] = None
    B0: Optional[str] = None
    C1: Optional[str] = None


def scalar(text: str):
    return parse_scalar(text)


def rational(text: str):
    return parse_scalar(text).as_fraction()


def scalar_list(text: str):
    return parse_scalar_list(text)


def degree(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    if value > MAX_DEGREE:
        raise argparse.ArgumentTypeError(f"exceeds LATOPS_MAX_DEGREE={MAX_DEGREE}")
    return value


def join_signed_values(argv: list) -> list:
    """
    Rewrite "--flag -value" as "--flag=-value" for scalar flags.

    argparse only recognises plain negative numbers as values, so "-1/2"
    would otherwise be read as an unknown option.
    """
    joined = []
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg in SCALAR_FLAGS and i + 1 < len(argv):
            value = argv[i + 1]
            if value.startswith("-") and not value.startswith("--") and value != "-h":
                joined.append(f"{arg}={value}")
                i += 2
                continue
        joined.append(arg)
        i += 1
    return joined


def check_depth(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    """Reject a depth whose operator tables would exceed LATOPS_MAX_DEGREE."""
    if args.command in ("verify", "selftest"):
        suite = args.suite if args.command == "verify" else "selftest"
        needed = suite_table_degree(suite, args.n)
    elif args.command == "pearson-solve":
        needed = 2 * args.n - 1
    elif args.command == "op-apply":
        needed = len(args.poly) - 1
    else:
        return
    if needed > MAX_DEGREE:
        label = f"{args.command} {args.suite}" if args.command == "verify" else args.command
        parser.error(
            f"{label} --n {args.n} needs operator tables of degree {needed}, "
            f"above LATOPS_MAX_DEGREE={MAX_DEGREE}"
        )


def _add_output(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=["table", "csv", "json"], default="table", help="Output format")
    parser.add_argument("--approx", action="store_true", help="Add decimal renderings for reading")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")


def _add_lattice(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("lattice")
    group.add_argument("--lattice", choices=["q", "quadratic"], help="Lattice kind (inferred from --Q)")
    group.add_argument("--lattice-json", help="Lattice as JSON with scalar strings")
    group.add_argument("--Q", type=rational, help="q = Q^2, Q rational, positive, not 1")
    group.add_argument("--c1", type=scalar, default=None)
    group.add_argument("--c2", type=scalar, default=None)
    group.add_argument("--c3", type=scalar, default=None)
    group.add_argument("--beta", type=scalar, default=None, help="Quadratic lattice curvature (c4 = 4 beta)")
    group.add_argument("--c5", type=scalar, default=None)
    group.add_argument("--c6", type=scalar, default=None)


def _add_family_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--params-json", help="Family parameters as JSON with scalar strings")
    parser.add_argument("--a", type=scalar, help="Askey-Wilson seed with r = a^2")
    parser.add_argument("--b0", "--B0", dest="B0", type=scalar, help="B_0")
    parser.add_argument("--C1", dest="C1", type=scalar, help="C_1 of the recurrence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latops",
        description="Divided-difference calculus on nonuniform lattices",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lattice-info", help="Structure sequences and U1, U2", allow_abbrev=False)
    _add_lattice(p)
    p.add_argument("--n", type=degree, default=5)
    p.add_argument("--benchmark", action="store_true", help="Time the table build at degree n")
    _add_output(p)

    p = sub.add_parser("op-apply", help="Apply D_x or S_x to a polynomial", allow_abbrev=False)
    _add_lattice(p)
    p.add_argument("--op", choices=["dx", "sx"], required=True)
    p.add_argument("--poly", type=scalar_list, required=True, help="Ascending coefficients")
    p.add_argument("--power", type=int, default=1)
    p.add_argument("--at", type=rational, help="Also evaluate the pointwise quotient at s")
    _add_output(p)

    p = sub.add_parser("family", help="Recurrence coefficients of a family", allow_abbrev=False)
    p.add_argument("name", choices=["aw", "meixner2", "thm1", "thm2"])
    _add_lattice(p)
    _add_family_params(p)
    for name in ("a1", "a2", "a3", "a4", "b1", "b2"):
        p.add_argument(f"--{name}", type=scalar)
    p.add_argument("--n", type=degree, default=5)
    _add_output(p)

    p = sub.add_parser("pearson-solve", help="Moments and recurrence of a classical functional", allow_abbrev=False)
    _add_lattice(p)
    p.add_argument("--phi", type=scalar_list, required=True, help="Descending a,b,c of phi")
    p.add_argument("--psi", type=scalar_list, required=True, help="Descending d,e of psi")
    p.add_argument("--n", type=degree, default=5)
    _add_output(p)

    p = sub.add_parser("verify", help="Verification suites", allow_abbrev=False)
    p.add_argument("suite", choices=["thm1", "thm2", "nonexistence", "bzero", "identities"])
    _add_lattice(p)
    _add_family_params(p)
    p.add_argument("--family", choices=["thm1", "thm2"], help="Family for the identities suite")
    p.add_argument("--n", type=degree, default=10)
    p.add_argument("--seed", type=int, default=0)
    _add_output(p)

    p = sub.add_parser("selftest", help="Run every invariant suite", allow_abbrev=False)
    p.add_argument("--n", type=degree, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=200)
    _add_output(p)
    return parser


def _merge_params_json(args: argparse.Namespace) -> None:
    raw = getattr(args, "params_json", None)
    if not raw:
        return
    try:
        model = ParamsModel.model_validate_json(raw)
    except ValidationError as e:
        raise ParameterError(f"Invalid --params-json: {e.errors()[0]['msg']}")
    for key, value in model.model_dump(exclude_none=True).items():
        if getattr(args, key, None) is None:
            setattr(args, key, rational(value) if key == "Q" else parse_scalar(value))


def lattice_from_args(args: argparse.Namespace) -> Lattice:
    if args.lattice_json:
        try:
            return LatticeModel.model_validate_json(args.lattice_json).to_lattice()
        except ValidationError as e:
            raise ParameterError(f"Invalid --lattice-json: {e.errors()[0]['msg']}")
    kind = args.lattice or ("q" if args.Q is not None else "quadratic")
    if kind == "q":
        if args.Q is None:
            raise ParameterError("A q-lattice needs --Q")
        return QQuadraticLattice(args.Q, _or(args.c1, 1), _or(args.c2, 1), _or(args.c3, 0))
    return QuadraticLattice(_or(args.beta, 0), _or(args.c5, 0), _or(args.c6, 0))


def _or(value, default):
    return default if value is None else value


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ParameterError("Missing parameter(s): " + ", ".join("--" + m for m in missing))


def _rec_payload(rec, use_approx: bool):
    rows = recurrence_rows(rec)
    if use_approx:
        rows = with_approx(rows, ["B_n", "C_n+1"])
    return rows


def cmd_lattice_info(args):
    L = lattice_from_args(args)
    u1, u2 = structural_polys(L)
    rows = []
    for n in range(-1, args.n + 1):
        seq = lattice_seq(L, n)
        rows.append({"n": n, "alpha_n": str(seq.alpha_n), "beta_n": str(seq.beta_n), "gamma_n": str(seq.gamma_n)})
    if args.approx:
        rows = with_approx(rows, ["alpha_n", "beta_n", "gamma_n"])
    payload = {
        "lattice": L.to_dict(),
        "alpha": str(L.alpha),
        "beta": str(L.beta),
        "U1": render_poly(u1),
        "U2": render_poly(u2),
        "sequences": rows,
    }
    if args.benchmark:
        start = time.perf_counter()
        build_tables.__wrapped__(L, args.n)
        payload["benchmark_seconds"] = f"{time.perf_counter() - start:.6f}"
    return payload, rows, True


def cmd_op_apply(args):
    L = lattice_from_args(args)
    p = Poly(args.poly)
    T = build_tables(L, max(p.degree, 0))
    result = apply_power(args.op, T, p, args.power)
    payload = {"op": args.op, "power": args.power, "input": render_poly(p), "result": render_poly(result)}
    rows = [{"k": k, "coefficient": str(c)} for k, c in enumerate(result.coeffs)]
    if args.at is not None and args.power == 1:
        node = L.x(args.at)
        table_value = apply(args.op, T, p)(node)
        oracle_value = pointwise_oracle(args.op, L, p, args.at)
        payload["at"] = {"s": str(args.at), "x": str(node), "table": str(table_value), "oracle": str(oracle_value)}
        if args.approx:
            payload["at"]["approx"] = approx(table_value)
        return payload, rows, table_value == oracle_value
    if args.approx:
        rows = with_approx(rows, ["coefficient"])
    return payload, rows, True


def cmd_family(args):
    _merge_params_json(args)
    name, N = args.name, args.n
    payload = {"family": name, "n": N}
    if name == "aw":
        _require(args, "a1", "a2", "a3", "a4", "Q")
        rec = aw_recurrence(AWParams(args.a1, args.a2, args.a3, args.a4, args.Q), N)
    elif name == "meixner2":
        _require(args, "b1", "b2")
        rec = meixner2_recurrence(MeixnerParams(args.b1, args.b2), N)
    elif name == "thm1":
        _require(args, "a")
        params = Thm1Params(lattice_from_args(args), args.a)
        rec = thm1_recurrence(params, N)
        payload["pearson"] = thm1_pearson_data(params).to_dict()
        payload["r"] = str(params.r)
    else:
        _require(args, "B0", "C1")
        params = Thm2Params(lattice_from_args(args), args.B0, args.C1)
        rec = thm2_recurrence(params, N)
        payload["pearson"] = thm2_pearson_data(params).to_dict()
    rows = _rec_payload(rec, args.approx)
    payload["rows"] = rows
    return payload, rows, True


def cmd_pearson_solve(args):
    L = lattice_from_args(args)
    pd = PearsonData.from_descending(args.phi, args.psi)
    N = args.n
    violations = regularity_scan(pd, L, N)
    payload = {"pearson": pd.to_dict(), "violations": [v.to_dict() for v in violations]}
    if violations:
        return payload, [v.to_dict() for v in violations], False
    engine = classical_recurrence(pd, L, N)
    u = pearson_moments(pd, build_tables(L, max(2 * N - 1, 0)), 2 * N)
    recovered = recurrence_from_moments(u, N)
    payload["moments"] = u.to_dict()
    payload["engine"] = _rec_payload(engine, args.approx)
    payload["from_moments"] = _rec_payload(recovered, args.approx)
    agree = engine == recovered
    payload["agree"] = agree
    return payload, payload["engine"], agree


def cmd_verify(args):
    _merge_params_json(args)
    suite, N = args.suite, args.n
    if suite == "thm1":
        _require(args, "a")
        report = cross_validate_thm1(Thm1Params(lattice_from_args(args), args.a), N)
    elif suite == "thm2":
        _require(args, "B0", "C1")
        report = cross_validate_thm2(Thm2Params(lattice_from_args(args), args.B0, args.C1), N)
    elif suite == "nonexistence":
        _require(args, "B0")
        L = lattice_from_args(args)
        if not isinstance(L, QuadraticLattice):
            raise ParameterError("nonexistence runs on a quadratic lattice")
        report = nonexistence_quadratic(L, args.B0, _or(args.C1, 1), N)
    elif suite == "bzero":
        _require(args, "B0")
        L = lattice_from_args(args)
        if not isinstance(L, QQuadraticLattice):
            raise ParameterError("bzero runs on a q-quadratic lattice")
        report = bzero_forcing_qlattice(L, args.B0, _or(args.C1, 1), N)
    else:
        _require(args, "family")
        L = lattice_from_args(args)
        if args.family == "thm1":
            _require(args, "a")
            family = Thm1Params(L, args.a)
        else:
            _require(args, "B0", "C1")
            family = Thm2Params(L, args.B0, args.C1)
        report = functional_identity_suite(build_tables(L, 2 * N + 6), family, N, seed=args.seed)
    payload = report.to_payload()
    return payload, report_rows(payload), report.passed


def cmd_selftest(args):
    report = run_selftest(args.n, args.seed, args.instances)
    payload = report.to_payload()
    return payload, report_rows(payload), report.passed


COMMANDS = {
    "lattice-info": cmd_lattice_info,
    "op-apply": cmd_op_apply,
    "family": cmd_family,
    "pearson-solve": cmd_pearson_solve,
    "verify": cmd_verify,
    "selftest": cmd_selftest,
}


def run(argv: Optional[list] = None, stream: Optional[TextIO] = None) -> int:
    """
    Parse argv, execute the command and write its output.

    Returns:
        Exit code: 0 pass, 1 failure or irregular input, 2 usage error
    """
    stream = stream or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(join_signed_values(list(argv if argv is not None else sys.argv[1:])))
        check_depth(parser, args)
    except SystemExit as e:
        return 2 if e.code else 0

    setup_logging(args.log_level)
    try:
        payload, rows, passed = COMMANDS[args.command](args)
    except LatopsError as e:
        logger.error(f"{args.command} failed: {e}")
        error = {"error": type(e).__name__, "message": str(e), "index": getattr(e, "index", None)}
        stream.write(json.dumps(error, sort_keys=True, indent=2) + "\n")
        return 1

    stream.write(render(payload, rows, args.format))
    return 0 if passed else 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
