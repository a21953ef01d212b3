"""Command-line interface: solve, verify, exact, sweep, enumerate, repro.

Exit codes: 0 success, 1 bad configuration or unreadable input, 2 the
measure optimization did not converge (diagnostic JSON on stdout).
"""

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .errors import CapacityError, ConvergenceError, DegenerateMeasureError, InvalidInputError
from .exact import ExactDesign, efficiencies, exact_search
from .model import CovarianceSpec, ModelKind, build_kernel
from .repro import run_all
from .sequences import enumerate_blocks
from .solver import AlgorithmConfig, Measure, solve, solve_proportions, verify_measure

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2
CSV_HEADER = ["n", "eff_a", "eff_d", "eff_e", "eff_t"]


class ConfigError(Exception):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


def _threads():
    raw = os.environ.get("INTERFERE_OPT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("INTERFERE_OPT_THREADS", f"not an integer: {raw!r}") from None
    return max(1, n)


def _common(p, n=False):
    p.add_argument("--k", type=int, help="block size (>= 3)")
    p.add_argument("--t", type=int, help="number of treatments (>= 2)")
    if n:
        p.add_argument("--n", type=int, help="number of blocks")
    p.add_argument("--model", default="directional", help="directional | undirectional")
    p.add_argument("--sigma", default="identity", help="covariance: kind name, inline JSON or @file")
    p.add_argument("--eps", type=float, default=AlgorithmConfig.epsilon, help="stopping tolerance on theta*")
    p.add_argument("--omega", type=float, default=AlgorithmConfig.omega, help="step exponent")
    p.add_argument("--max-iters", type=int, default=AlgorithmConfig.max_iters)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--allow-indefinite", action="store_true",
                   help="accept a covariance that is not positive definite (pseudoinverse kernel)")


def build_parser():
    ap = argparse.ArgumentParser(prog="interfere-opt", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("solve", help="optimal measure, x*, y* and support"))
    p = sub.add_parser("verify", help="efficiency or optimality report for a design or measure file")
    _common(p)
    p.add_argument("file", help="design JSON (rows) or measure / solution JSON")
    _common(sub.add_parser("exact", help="search an exact n-block design"), n=True)
    p = sub.add_parser("sweep", help="exact designs and efficiencies over a range of n")
    _common(p)
    p.add_argument("--n-from", type=int, required=True)
    p.add_argument("--n-to", type=int, required=True)
    p = sub.add_parser("enumerate", help="list symmetric blocks as JSON lines")
    p.add_argument("--k", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--out")
    p = sub.add_parser("repro", help="run the worked-example suite")
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    return ap


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise ConfigError(name, "is required")


def _config(args):
    _require(args, "k", "t")
    if args.k < 3:
        raise ConfigError("k", f"must be >= 3, got {args.k}")
    if args.t < 2:
        raise ConfigError("t", f"must be >= 2, got {args.t}")
    if args.seed < 0:
        raise ConfigError("seed", "must be nonnegative")
    try:
        model = ModelKind(args.model)
    except ValueError:
        raise ConfigError("model", f"unknown model {args.model!r}") from None
    try:
        spec = CovarianceSpec.parse(args.sigma)
    except (InvalidInputError, OSError) as exc:
        raise ConfigError("sigma", str(exc)) from None
    try:
        cfg = AlgorithmConfig(epsilon=args.eps, omega=args.omega, max_iters=args.max_iters)
    except InvalidInputError as exc:
        field = "eps" if "epsilon" in str(exc) else "omega" if "omega" in str(exc) else "max-iters"
        raise ConfigError(field, str(exc)) from None
    try:
        kernel = build_kernel(spec, args.k, args.allow_indefinite)
    except InvalidInputError as exc:
        raise ConfigError("sigma", str(exc)) from None
    return model, spec, cfg, kernel


def _solve(args):
    model, spec, cfg, kernel = _config(args)
    try:
        sol = solve(args.k, args.t, model_kind=model, cfg=cfg, kernel=kernel)
    except CapacityError as exc:
        raise ConfigError("k", str(exc)) from None
    return sol, model, spec, kernel


def _emit(args, text):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj):
    return json.dumps(obj, indent=2) + "\n"


def _csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r["n"]] + [f"{r[c]:.10g}" for c in CSV_HEADER[1:]])
    return buf.getvalue()


def cmd_solve(args):
    sol, model, spec, kernel = _solve(args)
    out = sol.to_dict()
    out["covariance"] = spec.to_dict()
    prop = solve_proportions(sol, kernel)
    out["proportions"] = prop.measure.to_list()
    out["proportions_residual"] = prop.residual
    _emit(args, _dump(out))
    return EXIT_OK


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("file", f"cannot read {path}: {exc}") from None


def _measure_from(doc, t):
    items = doc.get("measure") or doc.get("proportions") or doc.get("support")
    if not items:
        raise ConfigError("file", "expected 'rows', 'measure', 'proportions' or 'support'")
    try:
        reps = [tuple(int(v) for v in it["rep"]) for it in items]
        w = [float(it["p"]) for it in items]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("file", f"measure entries need 'rep' and 'p' ({exc})") from None
    return Measure(reps, w, t, doc.get("level", "block"))


def cmd_verify(args):
    doc = _load_json(args.file)
    if not isinstance(doc, dict):
        raise ConfigError("file", "top level must be a JSON object")
    if "design" in doc:  # output of the exact command
        doc = doc["design"]
    if args.k is None:
        args.k = doc.get("k")
    if args.t is None:
        args.t = doc.get("t")
    if args.k is None and "rows" in doc and doc["rows"]:
        args.k = len(doc["rows"][0])
    sol, model, spec, kernel = _solve(args)
    if "rows" in doc:
        try:
            design = ExactDesign.from_dict({**doc, "k": args.k, "t": args.t})
        except InvalidInputError as exc:
            raise ConfigError("file", str(exc)) from None
        rep = efficiencies(design, kernel, model, sol.y_star)
        out = {"kind": "design", "covariance": spec.to_dict(), **rep.to_dict(), "chain_holds": rep.chain_holds()}
    else:
        try:
            measure = _measure_from(doc, args.t)
            rep = verify_measure(measure, kernel, model, solution=sol)
        except InvalidInputError as exc:
            raise ConfigError("file", str(exc)) from None
        except DegenerateMeasureError as exc:
            raise ConfigError("file", f"measure carries no information: {exc}") from None
        out = {"kind": "measure", "covariance": spec.to_dict(), "model": model.value, **rep.to_dict(),
               "efficiency": rep.q_star / rep.y_star}
    _emit(args, _dump(out))
    return EXIT_OK


def _exact_row(sol, kernel, model, n, seed):
    res = exact_search(sol, n, seed=seed, kernel=kernel)
    rep = efficiencies(res.design, kernel, model, sol.y_star)
    return res, rep


def cmd_exact(args):
    _require(args, "n")
    if args.n < 1:
        raise ConfigError("n", f"must be >= 1, got {args.n}")
    sol, model, spec, kernel = _solve(args)
    res, rep = _exact_row(sol, kernel, model, args.n, args.seed)
    if args.format == "csv":
        _emit(args, _csv([{"n": args.n, **rep.to_dict()}]))
    else:
        out = {"design": res.design.to_dict(), "report": rep.to_dict(), "distance": res.distance,
               "seed": args.seed, "covariance": spec.to_dict()}
        _emit(args, _dump(out))
    return EXIT_OK


def cmd_sweep(args):
    if args.n_from < 1:
        raise ConfigError("n-from", "must be >= 1")
    if args.n_to < args.n_from:
        raise ConfigError("n-to", f"must be >= n-from ({args.n_from})")
    workers = _threads()
    sol, model, spec, kernel = _solve(args)

    def one(n):
        _, rep = _exact_row(sol, kernel, model, n, args.seed)
        return {"n": n, **rep.to_dict(), "chain_holds": rep.chain_holds()}

    ns = range(args.n_from, args.n_to + 1)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, ns))
    else:
        rows = [one(n) for n in ns]
    if args.format == "csv":
        _emit(args, _csv(rows))
    else:
        _emit(args, _dump(rows))
    return EXIT_OK


def cmd_enumerate(args):
    _require(args, "k", "t")
    try:
        blocks = enumerate_blocks(args.k, args.t)
    except (InvalidInputError, CapacityError) as exc:
        raise ConfigError("k" if "k" in str(exc).split(",")[0] else "t", str(exc)) from None
    lines = [json.dumps({"rep": list(b.representative), "orbit": b.orbit_size, "h": b.distinct_count})
             for b in blocks]
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_repro(args):
    checks = run_all()
    if args.format == "json":
        _emit(args, _dump([c.to_dict() for c in checks]))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "expected", "got", "status"])
        for c in checks:
            w.writerow([c.name, c.expected, c.got, "PASS" if c.passed else "FAIL"])
        _emit(args, buf.getvalue())
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "exact": cmd_exact, "sweep": cmd_sweep,
            "enumerate": cmd_enumerate, "repro": cmd_repro}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(_dump({"error": "not converged", "message": str(exc), "theta_star": exc.theta_star,
                     "iterations": exc.iterations}), end="")
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
