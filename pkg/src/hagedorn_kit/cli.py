"""Command-line front end.

Subcommands: validate, eval, verify, uncertainty, genfun.  Exit codes: 0 on
success, 1 when a verification check fails (or a warning is escalated by
``--strict``), 2 on invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import FactorizationError, InvalidInputError, QuadratureWarning, TruncationWarning
from .grid import GridFunction, GridSpec, adapted_rule
from .hagedorn import HagedornBasisSpec, generating_eval, generating_series, optimal_tail_bound, packet_eval_all
from .suites import SUITES, gram_table_check
from .symplectic import TOL_SYMPLECTIC, NormalizedPair, pair_residuals, parse_pair_dict
from .uncertainty import ground_covariance, minimal_rotation, theta_1d

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2

DEFAULT_TRIALS = {
    "ladder": 100,
    "orthonormality": 20,
    "correspondence": 3,
    "fourier": 3,
    "genfun": 50,
    "expansion": 2,
    "uncertainty": 100,
    "covariance": 2,
}


class _Escalated(Exception):
    """A warning turned into a failure by ``--strict``."""


def _complex(z: complex) -> dict:
    return {"re": float(z.real), "im": float(z.imag)}


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _rows_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"malformed JSON in {path}: {exc}") from exc


def _load_pair(path: str, tol: float | None) -> NormalizedPair:
    return NormalizedPair.from_dict(_read_json(path), tol=TOL_SYMPLECTIC if tol is None else tol)


def _threads() -> int:
    raw = os.environ.get("HAGEDORN_KIT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise InvalidInputError(f"HAGEDORN_KIT_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise InvalidInputError("HAGEDORN_KIT_THREADS must be positive")
    return n


# ---------------------------------------------------------------------------
# Commands; each returns (exit code, payload as str or bytes)


def cmd_validate(args) -> tuple[int, str | bytes]:
    report: dict = {"command": "validate", "input": args.params}
    try:
        Q, P, q, p, hbar = parse_pair_dict(_read_json(args.params))
    except InvalidInputError as exc:
        report.update(valid=False, violation=str(exc), residuals={})
        return EXIT_INVALID, _format_pairs(args, report)
    res = pair_residuals(Q, P)
    report["residuals"] = {k: float(v) for k, v in res.items()}
    try:
        NormalizedPair(Q, P, q, p, hbar, tol=TOL_SYMPLECTIC if args.tol is None else args.tol)
    except (InvalidInputError, ValueError) as exc:
        report.update(valid=False, violation=str(exc))
        return EXIT_INVALID, _format_pairs(args, report)
    report.update(valid=True, violation=None)
    return EXIT_OK, _format_pairs(args, report)


def _format_pairs(args, report: dict) -> str:
    if args.format == "csv":
        rows = [[k, repr(v)] for k, v in sorted(report.get("residuals", {}).items())]
        rows.append(["valid", str(report["valid"]).lower()])
        if report.get("violation"):
            rows.append(["violation", report["violation"]])
        return _rows_csv(["quantity", "value"], rows)
    if args.format == "bin":
        raise InvalidInputError("binary output is only available for grid evaluations")
    return _dump_json(report)


def _parse_grid(text: str, pair: NormalizedPair, order: int = 0) -> GridSpec:
    """``default`` / ``default:m`` use the packet-adapted width; ``L:m`` gives a box of half-width L around q."""
    parts = text.split(":")
    try:
        m = int(parts[1]) if len(parts) > 1 else None
        if parts[0] == "default":
            return GridSpec.for_pair(pair, m, order)
        return GridSpec.uniform(pair.d, float(parts[0]), m, pair.q)
    except ValueError as exc:
        raise InvalidInputError(f"bad grid specification {text!r}: {exc}") from exc


def _read_points(path: str, d: int) -> np.ndarray:
    try:
        pts = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise InvalidInputError(f"malformed points file {path}: {exc}") from exc
    if pts.shape[1] != d:
        raise InvalidInputError(f"points file has {pts.shape[1]} columns, expected {d}")
    return pts


def cmd_eval(args) -> tuple[int, str | bytes]:
    pair = _load_pair(args.params, args.tol)
    spec = HagedornBasisSpec(pair, args.order)
    sources = sum(x is not None for x in (args.points, args.grid, args.quadrature))
    if sources != 1:
        raise InvalidInputError("give exactly one of --points, --grid, --quadrature")
    weights = None
    grid = None
    if args.points is not None:
        pts = _read_points(args.points, pair.d)
    elif args.grid is not None:
        grid = _parse_grid(args.grid, pair, args.order)
        pts = grid.points().reshape(-1, pair.d)
    else:
        if args.quadrature < 1:
            raise InvalidInputError("--quadrature needs a positive node count")
        rule = adapted_rule(pair, args.quadrature)
        pts, weights = rule.points(), rule.point_weights()
        if 2 * args.quadrature - 1 < 2 * args.order:
            warnings.warn("quadrature degree is below the Gram-matrix degree", QuadratureWarning, stacklevel=2)
    table = packet_eval_all(spec, pts, weights)
    if grid is not None:
        gf = GridFunction(grid, table.matrix().T.reshape((-1,) + grid.shape), pair.hbar)
        if gf.boundary_ratio() > 1e-10:
            warnings.warn(f"packets do not decay at the grid boundary (ratio {gf.boundary_ratio():.2e})",
                          TruncationWarning, stacklevel=2)
    if args.format == "csv":
        return EXIT_OK, table.to_csv()
    if args.format == "json":
        return EXIT_OK, _dump_json(table.to_dict())
    if grid is None:
        raise InvalidInputError("binary output needs --grid")
    n = spec.check(tuple(int(k) for k in args.index.split(","))) if args.index else (0,) * pair.d
    values = table.values[n].reshape(grid.shape)
    return EXIT_OK, GridFunction(grid, values, pair.hbar).to_bytes()


def _load_table(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Values and weights from a packet table written by ``eval`` (JSON or CSV)."""
    if path.endswith(".json"):
        data = _read_json(path)
        try:
            V = np.asarray(data["values"]["re"], float) + 1j * np.asarray(data["values"]["im"], float)
            w = np.asarray(data["weights"], float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"table {path} lacks values or weights: {exc!r}") from exc
        return V, w
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot read table {path}: {exc}") from exc
    if "weight" not in header:
        raise InvalidInputError("table has no weight column; write it with eval --quadrature")
    k = header.index("weight")
    re_cols = [i for i, h in enumerate(header) if h.startswith("re_")]
    return raw[:, re_cols] + 1j * raw[:, [i + 1 for i in re_cols]], raw[:, k]


def cmd_verify(args) -> tuple[int, str | bytes]:
    if args.suite == "gram":
        if not args.table:
            raise InvalidInputError("--suite gram needs --table")
        V, w = _load_table(args.table)
        checks = gram_table_check(V, w, args.tol)
    else:
        if args.table:
            raise InvalidInputError("--table is only used by --suite gram")
        names = sorted(SUITES) if args.suite == "all" else [args.suite]
        if args.trials is not None and args.trials < 1:
            raise InvalidInputError("--trials must be positive")

        def run(name):
            kw = {"trials": args.trials if args.trials is not None else DEFAULT_TRIALS[name], "tol": args.tol}
            if args.d is not None:
                kw["dims"] = (args.d,)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TruncationWarning)
                return SUITES[name](args.seed, **kw)

        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            checks = [c for part in pool.map(run, names) for c in part]
    checks = sorted(checks, key=lambda c: c.name)
    ok = all(c.passed for c in checks)
    report = {
        "command": "verify",
        "suite": args.suite,
        "seed": args.seed,
        "d": args.d,
        "trials": args.trials,
        "passed": ok,
        "checks": [c.to_dict() for c in checks],
    }
    if args.format == "csv":
        out = _rows_csv(["name", "passed", "residual", "threshold"],
                        [[c.name, str(c.passed).lower(), repr(float(c.residual)), repr(float(c.threshold))]
                         for c in checks])
    elif args.format == "bin":
        raise InvalidInputError("binary output is only available for grid evaluations")
    else:
        out = _dump_json(report)
    return (EXIT_OK if ok else EXIT_FAIL), out


def cmd_uncertainty(args) -> tuple[int, str | bytes]:
    pair = _load_pair(args.params, args.tol)
    rep = minimal_rotation(pair)
    cov, cov_im = ground_covariance(pair)
    report = {"command": "uncertainty", **rep.to_dict(), "covariance": cov.tolist(),
              "covariance_imag": cov_im.tolist()}
    if pair.d == 1:
        report["theta"] = theta_1d(pair.Q[0, 0], pair.P[0, 0])
    if args.format == "csv":
        rows = [[j + 1, repr(float(l)), repr(float(a)), repr(float(b)), repr(float(a * b))]
                for j, (l, a, b) in enumerate(zip(rep.lambdas, rep.xi_std, rep.eta_std))]
        return EXIT_OK, _rows_csv(["axis", "lambda", "delta_xi", "delta_eta", "product"], rows)
    if args.format == "bin":
        raise InvalidInputError("binary output is only available for grid evaluations")
    return EXIT_OK, _dump_json(report)


def _parse_vector(text: str, kind=complex) -> np.ndarray:
    try:
        return np.array([kind(t.strip().replace(" ", "")) for t in text.split(",")])
    except ValueError as exc:
        raise InvalidInputError(f"cannot parse vector {text!r}: {exc}") from exc


def cmd_genfun(args) -> tuple[int, str | bytes]:
    pair = _load_pair(args.params, args.tol)
    spec = HagedornBasisSpec(pair, args.order)
    w = _parse_vector(args.w, complex)
    x = _parse_vector(args.x, float) if args.x else pair.q.copy()
    if w.size != pair.d or x.size != pair.d:
        raise InvalidInputError(f"--w and --x need {pair.d} entries")
    G, g = generating_eval(spec, w, x)
    sG, sg = generating_series(spec, w, x)
    report = {
        "command": "genfun",
        "order": args.order,
        "w": [_complex(v) for v in w],
        "x": x.tolist(),
        "packet": {"closed": _complex(complex(G)), "series": _complex(complex(sG)),
                   "error": float(abs(G - sG)), "bound": optimal_tail_bound(spec, args.order, w, x, True)},
        "polynomial": {"closed": _complex(complex(g)), "series": _complex(complex(sg)),
                       "error": float(abs(g - sg)), "bound": optimal_tail_bound(spec, args.order, w, x, False)},
    }
    if args.format == "csv":
        rows = []
        for key in ("packet", "polynomial"):
            r = report[key]
            rows.append([key, repr(r["closed"]["re"]), repr(r["closed"]["im"]), repr(r["series"]["re"]),
                         repr(r["series"]["im"]), repr(r["error"]), repr(r["bound"])])
        return EXIT_OK, _rows_csv(["kind", "closed_re", "closed_im", "series_re", "series_im", "error", "bound"],
                                  rows)
    if args.format == "bin":
        raise InvalidInputError("binary output is only available for grid evaluations")
    return EXIT_OK, _dump_json(report)


# ---------------------------------------------------------------------------


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0.0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_positive_float, default=None, help="tolerance override")
    common.add_argument("--seed", type=int, default=7, help="seed for randomized suites (default 7)")
    common.add_argument("--format", choices=("csv", "json", "bin"), default="json")
    common.add_argument("--strict", action="store_true", help="treat numerical warnings as failures")
    common.add_argument("--output", "-o", default=None, help="output file (default: stdout)")

    parser = argparse.ArgumentParser(prog="hagedorn-kit", description="Hagedorn wave packet toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a parameter file")
    p.add_argument("params")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("eval", parents=[common], help="evaluate packets at points")
    p.add_argument("params")
    p.add_argument("--order", "-N", type=int, default=0)
    p.add_argument("--points", help="CSV file with one point per row")
    p.add_argument("--grid", help="'default', 'default:m' or 'L:m'")
    p.add_argument("--quadrature", type=int, help="adapted Gauss-Hermite nodes per axis (adds weights)")
    p.add_argument("--index", help="multi-index for binary output, e.g. 1,0")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", parents=[common], help="run verification suites")
    p.add_argument("--suite", choices=sorted(SUITES) + ["all", "gram"], default="all")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--table", help="packet table with weights, for --suite gram")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("uncertainty", parents=[common], help="minimal uncertainty report")
    p.add_argument("params")
    p.set_defaults(func=cmd_uncertainty)

    p = sub.add_parser("genfun", parents=[common], help="generating function report")
    p.add_argument("params")
    p.add_argument("--w", required=True, help="comma-separated complex entries, e.g. 0.1+0.2j,0.3")
    p.add_argument("--x", default=None, help="comma-separated point (default: q)")
    p.add_argument("--order", "-N", type=int, default=20)
    p.set_defaults(func=cmd_genfun)
    return parser


def _write(payload: str | bytes, path: str | None) -> None:
    if path is None:
        if isinstance(payload, bytes):
            sys.stdout.buffer.write(payload)
            sys.stdout.buffer.flush()
        else:
            sys.stdout.write(payload)
        return
    mode = "wb" if isinstance(payload, bytes) else "w"
    with open(path, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
        fh.write(payload)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    if getattr(args, "order", 0) is not None and getattr(args, "order", 0) < 0:
        print("error: --order must be non-negative", file=sys.stderr)
        return EXIT_INVALID
    try:
        with warnings.catch_warnings():
            if args.strict:
                warnings.simplefilter("error", TruncationWarning)
                warnings.simplefilter("error", QuadratureWarning)
            try:
                code, payload = args.func(args)
            except (TruncationWarning, QuadratureWarning) as exc:
                raise _Escalated(str(exc)) from exc
        _write(payload, args.output)
        return code
    except _Escalated as exc:
        print(f"error (strict): {exc}", file=sys.stderr)
        return EXIT_FAIL
    except FactorizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (InvalidInputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
