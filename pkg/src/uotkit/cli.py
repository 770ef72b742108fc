"""Command line interface.

Subcommands: ``gen`` (synthetic measures), ``sinkhorn`` (one regularized
run with trace), ``rates`` (contraction-rate sweep over the KL strength),
``uot1d`` (Frank-Wolfe for the unregularized problem), ``barycenter``
(multimarginal barycenters), and ``certify`` (verify a user-supplied
plan/potential pair). Exit codes: 0 success or converged, 1 usage or I/O
failure, 2 iteration budget exhausted or failed certificate.

Every run is determined by its inputs, flags, and seed; data files carry
no timestamps (a ``.meta.json`` sidecar does). ``UOTKIT_LOG`` in {error,
info, debug} tunes verbosity.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import json
import logging
import os
import sys

import numpy as np

from . import barycenter as bc
from .certify import assemble_certificate
from .duality import DualPair, UotProblem, eval_primal
from .entropies import KL, Berg
from .exceptions import UotError
from .fw import FwConfig, fw_solve, write_gap_csv
from .measures import (
    DiscreteMeasure,
    PowerDistance,
    build_cost_matrix,
    measure_to_csv_text,
    read_measure_csv,
    read_measure_json,
    write_measure_csv,
)
from .ot1d import read_plan_csv, solve_ot_1d
from .sinkhorn import (
    AndersonConfig,
    SinkhornConfig,
    estimate_rate,
    run,
    write_trace_csv,
)
from .synthetic import mixture_measure, uniform_measure

log = logging.getLogger("uotkit")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("UOTKIT_LOG", "error").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.ERROR), stream=sys.stderr)


def _load_measure(path):
    if path.endswith(".json"):
        return read_measure_json(path)
    return read_measure_csv(path)


def _entropy(kind, rho):
    if kind == "kl":
        return KL(rho)
    if kind == "berg":
        return Berg(rho)
    raise ValueError(f"unknown entropy '{kind}'")


def _write_or_stdout(writer, out):
    if out is None:
        writer(sys.stdout)
    else:
        writer(out)


def _sidecar(out, payload):
    if out is None:
        return
    payload = dict(payload)
    payload["written_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(out + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


# -- gen ---------------------------------------------------------------------


def cmd_gen(args):
    if args.n < 1:
        raise ValueError("n must be at least 1")
    if args.kind == "mixture":
        measure, params = mixture_measure(args.n, args.seed, sigma=args.sigma)
    else:
        measure, params = uniform_measure(args.n, args.seed)
    flat = " ".join(f"{k}={v!r}" for k, v in sorted(params.items()))
    comments = [f"uotkit gen kind={args.kind} n={args.n} seed={args.seed} {flat}"]
    if args.out is None:
        sys.stdout.write(measure_to_csv_text(measure, comments))
    else:
        write_measure_csv(measure, args.out, comments)
        _sidecar(args.out, {"command": "gen", "kind": args.kind, "n": args.n, "seed": args.seed, **params})
    return 0


# -- sinkhorn ------------------------------------------------------------------


def _read_dual_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return DualPair(np.asarray(payload["f"], float), np.asarray(payload["g"], float))


def cmd_sinkhorn(args):
    if args.variant == "h" and args.entropy != "kl":
        raise ValueError("h-sinkhorn requires kl")
    alpha = _load_measure(args.alpha)
    beta = _load_measure(args.beta)
    rho2 = args.rho2 if args.rho2 is not None else args.rho1
    prob = UotProblem(
        alpha,
        beta,
        PowerDistance(args.power),
        _entropy(args.entropy, args.rho1),
        _entropy(args.entropy, rho2),
        eps=args.eps,
    )
    anderson = AndersonConfig(args.anderson_depth, args.anderson_reg) if args.anderson else None
    config = SinkhornConfig(args.variant, args.max_iters, args.tol, anderson)
    reference = _read_dual_json(args.ref) if args.ref else None
    report = run(prob, config, reference=reference)
    _write_or_stdout(lambda buf: write_trace_csv(report, buf), args.out)
    _sidecar(args.out, {"command": "sinkhorn", "variant": args.variant, "eps": args.eps})
    log.info("sinkhorn %s: %d iterations, converged=%s", args.variant, report.iterations, report.converged)
    return 0 if report.converged else 2


# -- rates ---------------------------------------------------------------------


def _rate_row(alpha, beta, power, eps, rho, variants, max_iters):
    prob = UotProblem(alpha, beta, PowerDistance(power), KL(rho), KL(rho), eps=eps)
    row = {}
    try:
        ref = run(prob, SinkhornConfig("f", max_iters, 1e-12)).final
    except Exception:
        return {v: float("nan") for v in variants}
    for v in variants:
        try:
            rep = run(prob, SinkhornConfig(v, max_iters, 1e-13), reference=ref)
            errs = rep.trace["err_f"]
            errs = errs[errs > 1e-9]
            row[v] = estimate_rate(errs)
        except Exception:
            row[v] = float("nan")
    return row


def cmd_rates(args):
    alpha = _load_measure(args.alpha)
    beta = _load_measure(args.beta)
    grid = [float(tok) for tok in args.rho_grid.split(",") if tok]
    if not grid:
        raise ValueError("empty rho grid")
    variants = [tok.strip() for tok in args.variants.split(",") if tok.strip()]
    for v in variants:
        if v not in ("f", "g", "h"):
            raise ValueError(f"unknown variant '{v}'")

    def work(rho):
        return _rate_row(alpha, beta, args.power, args.eps, rho, variants, args.max_iters)

    if args.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(work, grid))
    else:
        rows = [work(rho) for rho in grid]

    def emit(buf):
        buf.write("rho,kappa_f,kappa_g,kappa_h\n")
        for rho, row in zip(grid, rows):
            cells = [repr(rho)]
            for v in ("f", "g", "h"):
                val = row.get(v)
                cells.append("" if val is None else repr(val))
            buf.write(",".join(cells) + "\n")

    if args.out is None:
        emit(sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            emit(fh)
        _sidecar(args.out, {"command": "rates", "eps": args.eps, "rho_grid": grid})
    return 0


# -- uot1d ---------------------------------------------------------------------

_METHODS = {"fw": "harmonic", "fw-ls": "linesearch", "pfw": "pairwise"}


def cmd_uot1d(args):
    alpha = _load_measure(args.alpha)
    beta = _load_measure(args.beta)
    rho2 = args.rho2 if args.rho2 is not None else args.rho1
    prob = UotProblem(
        alpha,
        beta,
        PowerDistance(args.power),
        _entropy(args.entropy, args.rho1),
        _entropy(args.entropy, rho2),
        eps=0.0,
    )
    config = FwConfig(_METHODS[args.method], args.max_iters, args.gap_tol)
    report = fw_solve(prob, config)
    if args.out is not None:
        write_gap_csv(report, args.out)
        _sidecar(args.out, {"command": "uot1d", "method": args.method})
    print(report.certificate.to_json())
    log.info(
        "uot1d %s: %d iterations, gap=%.3e, wall=%d ns",
        args.method,
        report.iterations,
        report.certificate.gap,
        int(report.trace["wall_ns"].sum()),
    )
    if report.certificate.passed:
        return 0
    return 2


# -- barycenter ------------------------------------------------------------------


def cmd_barycenter(args):
    inputs = [_load_measure(path) for path in args.measures]
    if len(inputs) < 2:
        raise ValueError("need at least two input measures")
    if args.weights:
        w = np.array([float(tok) for tok in args.weights.split(",")])
    else:
        w = np.full(len(inputs), 1.0 / len(inputs))
    if w.size != len(inputs) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must match the inputs and sum to 1")
    w = w / w.sum()

    if args.balanced:
        plan, duals = bc.solve_mot_1d(inputs, w)
        cert = bc.mot_certificate(inputs, w, plan, duals)
        converged = True
    else:
        if args.rho is None:
            raise ValueError("--rho is required unless --balanced is given")
        problem = bc.BarycenterProblem(tuple(inputs), w, args.rho)
        config = FwConfig("linesearch", args.max_iters, args.gap_tol)
        report, plan = bc.fw_barycenter(problem, config)
        cert = report.certificate
        converged = report.converged
    out_measure = bc.extract_barycenter(plan, inputs, w)
    if args.out is None:
        sys.stdout.write(measure_to_csv_text(out_measure))
    else:
        write_measure_csv(out_measure, args.out)
        _sidecar(args.out, {"command": "barycenter", "balanced": bool(args.balanced)})
    if args.plan_out is not None:
        bc.write_multiplan_csv(plan, args.plan_out)
    print(cert.to_json())
    if not converged:
        return 2
    return 0 if cert.passed else 2


# -- certify ---------------------------------------------------------------------


def cmd_certify(args):
    alpha = _load_measure(args.alpha)
    beta = _load_measure(args.beta)
    plan = read_plan_csv(args.plan)
    duals = _read_dual_json(args.duals)
    C = build_cost_matrix(alpha, beta, PowerDistance(args.power))
    primal = plan.cost_value(C)
    dual = float(np.dot(alpha.weights, duals.f) + np.dot(beta.weights, duals.g))
    spread = duals.f[:, None] + duals.g[None, :] - C
    feas = max(0.0, float(spread.max()))
    marg = max(
        float(np.abs(plan.row_sums(len(alpha)) - alpha.weights).max()),
        float(np.abs(plan.col_sums(len(beta)) - beta.weights).max()),
    )
    slack = float(np.abs(spread[plan.source_idx, plan.target_idx]).max(initial=0.0))
    tol = args.tol * (1.0 + abs(primal))
    cert = assemble_certificate(primal, dual, max(feas, marg, slack), tol)
    print(cert.to_json())
    return 0 if cert.passed else 2


# -- parser ----------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="uotkit",
        description="translation-invariant solvers for 1-D unbalanced transport",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="emit a synthetic measure CSV")
    p.add_argument("--kind", choices=("mixture", "uniform"), default="mixture")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=0.03)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sinkhorn", help="run one regularized solve, emit trace CSV")
    p.add_argument("alpha")
    p.add_argument("beta")
    p.add_argument("--variant", choices=("f", "g", "h"), default="f")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--rho1", type=float, default=1.0)
    p.add_argument("--rho2", type=float, default=None)
    p.add_argument("--entropy", choices=("kl", "berg"), default="kl")
    p.add_argument("--power", type=float, default=2.0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--anderson", action="store_true")
    p.add_argument("--anderson-depth", type=int, default=4)
    p.add_argument("--anderson-reg", type=float, default=1e-7)
    p.add_argument("--ref", help="JSON file with reference potentials {f, g}")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sinkhorn)

    p = sub.add_parser("rates", help="contraction-rate sweep over rho")
    p.add_argument("alpha")
    p.add_argument("beta")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--rho-grid", required=True, help="comma-separated rho values")
    p.add_argument("--variants", default="f,g,h")
    p.add_argument("--power", type=float, default=2.0)
    p.add_argument("--max-iters", type=int, default=20_000)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("uot1d", help="frank-wolfe for the unregularized problem")
    p.add_argument("alpha")
    p.add_argument("beta")
    p.add_argument("--rho1", type=float, default=1.0)
    p.add_argument("--rho2", type=float, default=None)
    p.add_argument("--entropy", choices=("kl", "berg"), default="kl")
    p.add_argument("--method", choices=tuple(_METHODS), default="fw-ls")
    p.add_argument("--power", type=float, default=2.0)
    p.add_argument("--gap-tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_uot1d)

    p = sub.add_parser("barycenter", help="multimarginal barycenter of K measures")
    p.add_argument("measures", nargs="+")
    p.add_argument("--weights", help="comma-separated, sum to 1; default uniform")
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--balanced", action="store_true")
    p.add_argument("--gap-tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--out")
    p.add_argument("--plan-out")
    p.set_defaults(func=cmd_barycenter)

    p = sub.add_parser("certify", help="verify a plan/potential pair for 1-D OT")
    p.add_argument("alpha")
    p.add_argument("beta")
    p.add_argument("--plan", required=True)
    p.add_argument("--duals", required=True, help="JSON file with potentials {f, g}")
    p.add_argument("--power", type=float, default=2.0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_certify)
    return parser


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (UotError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
