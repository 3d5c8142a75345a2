"""Command-line entry point for batch experiments.

Modes:
    campaign          run one sequential campaign from a config file
    baseline-compare  paired sa-optimized vs random-baseline runs, CSV out
    gradcheck         gradient estimator vs central finite differences
    table1            score a list of candidate points on a built model
    serve             run the HTTP service

Exit codes: 0 ok, 1 usage/config error, 2 runtime error, 3 check failure.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import jsonio
from .acquisition import (
    AcquisitionSample,
    acquisition_objective,
    gradient_estimate,
    information_gain,
    local_prediction_impact,
)
from .acquisition import _CandidateWorkspace
from .campaign import (
    config_from_dict,
    initialize,
    lhs_design,
    run,
    summary_dict,
)
from .errors import InvalidConfigurationError, KrigseqError
from .gp import build_design
from .rng import substream

#: Candidate points from the published comparison table (A, B, C, D).
TABLE1_POINTS = [[0.05, 0.1], [0.12, 0.55], [0.05, 0.55], [0.45, 0.5]]

GRADCHECK_REL_TOL = 0.05
GRADCHECK_ABS_TOL = 1e-5


def _load_config(path: str, args) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InvalidConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InvalidConfigurationError(f"config is not valid JSON: {exc}")
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.steps is not None:
        doc["steps"] = args.steps
    if args.oracle is not None:
        doc["oracle"] = {"id": args.oracle}
    return doc


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("KRIGSEQ_OUT") or "krigseq-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out: Path, mode: str, args, doc: dict) -> None:
    manifest = {
        "mode": mode,
        "config_path": args.config,
        "out": str(out),
        "seed": doc.get("seed"),
        "resolved_config": doc,
    }
    (out / "manifest.json").write_text(jsonio.dumps(manifest) + "\n")


def cmd_campaign(args) -> int:
    doc = _load_config(args.config, args)
    config = config_from_dict(doc)
    out = _out_dir(args)
    _write_manifest(out, "campaign", args, doc)
    state = run(config, trace_path=out / "trace.jsonl",
                summary_path=out / "summary.json")
    summary = summary_dict(state, config)
    print(f"final estimate: {summary['final_estimate']:.6f} "
          f"(n = {summary['n_total']}, seed = {summary['seed']})")
    if "abs_error_vs_truth" in summary:
        print(f"abs error vs truth: {summary['abs_error_vs_truth']:.6f}")
    return 0


def cmd_baseline_compare(args) -> int:
    doc = _load_config(args.config, args)
    base = config_from_dict(doc)
    if base.oracle.truth is None:
        raise InvalidConfigurationError(
            "baseline-compare needs an oracle with a declared truth",
            field_path="oracle.id")
    truth = base.oracle.truth
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds \
        else list(range(10))
    out = _out_dir(args)
    _write_manifest(out, "baseline-compare", args, doc)

    errors = {"sa-optimized": [], "random-baseline": []}
    for seed in seeds:
        for mode in errors:
            mdoc = dict(doc)
            mdoc["seed"] = seed
            mdoc["selection_mode"] = mode
            tag = "sa" if mode == "sa-optimized" else "random"
            state = run(config_from_dict(mdoc),
                        trace_path=out / f"trace_{tag}_seed{seed}.jsonl")
            errors[mode].append([abs(e.value - truth)
                                 for e in state.estimates])
            print(f"seed {seed} {mode}: final err "
                  f"{errors[mode][-1][-1]:.5f}")
    mae_sa = np.mean(np.asarray(errors["sa-optimized"]), axis=0)
    mae_rb = np.mean(np.asarray(errors["random-baseline"]), axis=0)
    csv_path = out / "baseline_compare.csv"
    with open(csv_path, "w") as fh:
        fh.write("step,mae_sa,mae_random,n_seeds\n")
        for k in range(len(mae_sa)):
            fh.write(f"{k},{mae_sa[k]:.10g},{mae_rb[k]:.10g},{len(seeds)}\n")
    wins = int(np.sum(mae_sa[1:11] <= mae_rb[1:11]))
    print(f"wrote {csv_path}; sa wins {wins} of first "
          f"{min(10, len(mae_sa) - 1)} steps")
    return 0


def _gradcheck_state(config, trial: int, seed: int):
    """One randomized non-degenerate model state for the check."""
    rng = substream(seed, "gradcheck", trial)
    n = int(rng.integers(4, 16))
    pts = lhs_design(n, config.initial_bounds, rng)
    ys = [float(config.oracle.fn(p)) for p in pts]
    design = build_design(pts, ys, config.params)
    for _ in range(64):
        x = rng.uniform(config.initial_bounds[:, 0],
                        config.initial_bounds[:, 1])
        if not _CandidateWorkspace(design, config.params, x).degenerate:
            break
    m = config.sa.grad_samples
    W = config.env.sample(m, rng)
    z = rng.standard_normal(m)
    samples = [AcquisitionSample(W[i], z[i]) for i in range(m)]
    return design, x, samples


def cmd_gradcheck(args) -> int:
    doc = _load_config(args.config, args)
    config = config_from_dict(doc)
    if config.oracle.fn is None:
        raise InvalidConfigurationError("gradcheck needs an automatic oracle",
                                        field_path="oracle.id")
    if args.trials < 1:
        raise InvalidConfigurationError("trials must be >= 1")
    out = _out_dir(args)
    _write_manifest(out, "gradcheck", args, doc)
    h = 1e-4
    report = []
    failures = 0
    for trial in range(args.trials):
        design, x, samples = _gradcheck_state(config, trial, config.seed)
        grad = gradient_estimate(x, design, config.params, config.gamma,
                                 samples)
        fd = np.zeros_like(x)
        for j in range(x.shape[0]):
            e = np.zeros_like(x)
            e[j] = h
            fp = acquisition_objective(x + e, design, config.params,
                                       config.gamma, samples)
            fm = acquisition_objective(x - e, design, config.params,
                                       config.gamma, samples)
            fd[j] = (fp - fm) / (2.0 * h)
        abs_err = np.abs(grad - fd)
        rel_err = abs_err / np.maximum(np.abs(fd), 1e-300)
        ok = bool(np.all((rel_err <= GRADCHECK_REL_TOL)
                         | (abs_err <= GRADCHECK_ABS_TOL)))
        failures += not ok
        report.append({
            "trial": trial,
            "replay": {"seed": config.seed, "stream": ["gradcheck", trial]},
            "design_size": len(design),
            "x": [float(v) for v in x],
            "gradient": [float(v) for v in grad],
            "finite_difference": [float(v) for v in fd],
            "abs_err": [float(v) for v in abs_err],
            "rel_err": [float(v) for v in rel_err],
            "ok": ok,
        })
        print(f"trial {trial}: max abs err {abs_err.max():.3e} "
              f"{'ok' if ok else 'FAIL'}")
    (out / "gradcheck.json").write_text(jsonio.dumps(report) + "\n")
    if failures:
        print(f"{failures} of {args.trials} trials exceeded tolerance",
              file=sys.stderr)
        return 3
    return 0


def cmd_table1(args) -> int:
    doc = _load_config(args.config, args)
    config = config_from_dict(doc)
    if config.env.dim != 2:
        raise InvalidConfigurationError("table1 needs a 2-D scenario space",
                                        field_path="env")
    points = json.loads(args.points) if args.points else TABLE1_POINTS
    if not points:
        raise InvalidConfigurationError("points list is empty")
    out = _out_dir(args)
    _write_manifest(out, "table1", args, doc)
    state = initialize(config)
    rows = []
    rng = substream(config.seed, "table1")
    inner = max(config.sa.rescore_inner, 4000)
    outer = max(config.sa.rescore_outer, 128)
    for p in points:
        x = np.asarray(p, dtype=float)
        lpi = local_prediction_impact(x, state.design, config.params,
                                      config.gamma)
        assert 0.0 <= lpi <= 0.25, f"lpi out of range at {p}"
        gain = information_gain(x, state.design, config.params, config.gamma,
                                config.env, outer, inner, rng)
        rows.append({"point": [float(v) for v in x], "lpi": lpi,
                     "info_gain": gain})
        print(f"point {p}: lpi = {lpi:.4g}  info_gain = {gain:.4g}")
    order = np.argsort([-r["info_gain"] for r in rows])
    names = [chr(ord('A') + i) for i in range(len(rows))]
    print("gain ordering:", " > ".join(names[i] for i in order))
    (out / "table1.json").write_text(jsonio.dumps(rows) + "\n")
    return 0


def cmd_serve(args) -> int:
    import socket

    import uvicorn

    from .service import create_app

    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        if s.connect_ex(("127.0.0.1", args.port)) == 0:
            print(f"port {args.port} is busy", file=sys.stderr)
            return 1
    app = create_app(args.state_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="krigseq",
        description="sequential kriging-based scenario testing")
    parser.add_argument("--mode", required=True,
                        choices=["campaign", "baseline-compare", "gradcheck",
                                 "table1", "serve"])
    parser.add_argument("--config", help="path to a campaign config JSON")
    parser.add_argument("--out", help="output directory "
                                      "(default $KRIGSEQ_OUT or ./krigseq-out)")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--steps", type=int, help="sequential step override")
    parser.add_argument("--oracle", choices=["toy", "lane-change", "manual"],
                        help="oracle override")
    parser.add_argument("--seeds", help="comma-separated seeds "
                                        "(baseline-compare)")
    parser.add_argument("--trials", type=int, default=10,
                        help="gradcheck trial count")
    parser.add_argument("--points", help="JSON list of points (table1)")
    parser.add_argument("--port", type=int, default=8787, help="serve port")
    parser.add_argument("--host", default="127.0.0.1", help="serve host")
    parser.add_argument("--state-dir", help="session snapshot directory")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors
        return 0 if exc.code in (0, None) else 1
    if args.mode != "serve" and not args.config:
        print("--config is required for this mode", file=sys.stderr)
        return 1
    handlers = {
        "campaign": cmd_campaign,
        "baseline-compare": cmd_baseline_compare,
        "gradcheck": cmd_gradcheck,
        "table1": cmd_table1,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.mode](args)
    except InvalidConfigurationError as exc:
        path = f" at {exc.field_path}" if exc.field_path else ""
        print(f"config error{path}: {exc}", file=sys.stderr)
        return 1
    except KrigseqError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
