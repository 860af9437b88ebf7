"""Command line entry point: ``oscfie <subcommand> [--config FILE] [--set key=value ...]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from ..collocation import CollocationSolution, PiecewiseBasis
from ..multi_grade import GradeStack, compose_solution
from ..nn import load_checkpoint
from ..single_grade import net_evaluator
from ..system import build_M, inv_norm_sweep
from .experiments import MetricsRecord, bound_suite, config_from_dict, run_experiment, write_csv
from .problem import benchmark_terms, fft_relative_error, relative_L2_error


def _parse_value(text: str):
    return yaml.safe_load(text)


def load_config(path, overrides, preset=None) -> dict:
    data = {}
    if path:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: top level must be a mapping")
    if preset:
        data["preset"] = preset
    for item in overrides or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        data[k.strip()] = _parse_value(v)
    return data


def _summary(records):
    for r in records:
        print(f"{r.method} kappa={r.kappa:g} N={r.N} seed={r.seed} relative_L2={r.relative_L2:.6e} "
              f"wall={r.wall_seconds:.2f}s")


def cmd_run(args, method) -> int:
    data = load_config(args.config, args.set, args.preset)
    data["method"] = method
    if args.out:
        data["out_dir"] = args.out
    cfg = config_from_dict(data)
    records, manifest = run_experiment(cfg)
    _summary(records)
    bad = [r["seed"] for r in manifest["runs"]
           if "error_decomposition" in r and not r["error_decomposition"]["holds"]]
    if bad:
        print(f"error decomposition inequality violated for seeds {bad}", file=sys.stderr)
        return 1
    return 0


def cmd_sweep(args) -> int:
    data = load_config(args.config, args.set, args.preset)
    root = Path(args.out or data.get("out_dir", "runs/sweep"))
    kappas = [float(k) for k in args.kappas.split(",")]
    rows = []
    for k in kappas:
        cfg = config_from_dict({**data, "kappa": k, "out_dir": str(root / f"kappa_{k:g}")})
        records, _ = run_experiment(cfg)
        _summary(records)
        rows.extend(r.row() for r in records)
    write_csv(root / "metrics.csv", MetricsRecord.COLUMNS, rows)
    return 0


def cmd_inv_norm(args) -> int:
    data = load_config(args.config, args.set)
    lam = complex(data.get("lam", data.get("lambda", 0.2)))
    gamma, beta, q = float(data.get("gamma", 6)), float(data.get("beta", 1)), int(data.get("q", 1))
    start, stop, step = (float(v) for v in args.kappas.split(":"))
    kappas = np.arange(start, stop + step / 2, step)
    recs = inv_norm_sweep(lam, gamma, beta, q, kappas)
    out = Path(args.out or "runs/inv_norm")
    write_csv(out / "inv_norm.csv", ["lambda", "kappa", "N", "inv_norm", "singular"],
              ([repr(lam.real), repr(float(r.kappa)), r.N, repr(r.inv_norm), int(r.singular)] for r in recs))
    for r in recs:
        print(f"kappa={r.kappa:g} N={r.N} inv_norm={r.inv_norm:.6g}{' SINGULAR' if r.singular else ''}")
    return 0


def cmd_bound_suite(args) -> int:
    rows = bound_suite()
    out = Path(args.out or "runs/bounds")
    write_csv(out / "bounds.csv", ["suite", "case", "measured", "bound", "passed"],
              ([r["suite"], r["case"], repr(float(r["measured"])), repr(float(r["bound"])), int(r["passed"])]
               for r in rows))
    failed = [r for r in rows if not r["passed"]]
    for r in rows:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['suite']:20s} {r['case']:24s} "
              f"measured={float(r['measured']):.6e} bound={float(r['bound']):.6e}")
    if failed:
        print("violated: " + ", ".join(f"({r['suite']}, {r['case']})" for r in failed), file=sys.stderr)
        return 1
    return 0


def _load_evaluators(run: Path):
    with open(run / "manifest.json") as fh:
        manifest = json.load(fh)
    cfg = config_from_dict({k: v for k, v in manifest["config"].items()})
    out = []
    for seed in cfg.seeds:
        if cfg.method in ("cm1", "cm2"):
            basis = PiecewiseBasis(1 if cfg.method == "cm1" else 2, cfg.params.N)
            out.append((seed, CollocationSolution(basis, np.load(run / f"coeffs_seed{seed}.npy"))))
        elif cfg.method == "sgl":
            out.append((seed, net_evaluator(load_checkpoint(run / f"checkpoint_seed{seed}.npz"))))
        else:
            nets = [load_checkpoint(run / f"checkpoint_seed{seed}_grade{g}.npz")
                    for g in range(1, len(cfg.grades) + 1)]
            with np.load(run / f"residuals_seed{seed}.npz") as res:
                residuals = [res[f"arr_{i}"] for i in range(len(res.files))]
            stack = GradeStack(cfg.params.nodes, residuals, nets)
            out.append((seed, lambda t, s=stack: compose_solution(s, t)))
    return cfg, out


def cmd_metrics(args) -> int:
    run = Path(args.run)
    cfg, evaluators = _load_evaluators(run)
    terms = benchmark_terms(cfg.kappa)
    out = Path(args.out or run / "eval")
    rows = []
    for seed, Y in evaluators:
        rel = relative_L2_error(Y, terms)
        fe = fft_relative_error(Y, terms)
        write_csv(out / "traces" / f"fft_error_seed{seed}.csv", ["z", "rel_err"],
                  ([repr(float(z)), "" if f else repr(float(e))] for z, e, f in zip(fe.z, fe.rel_err, fe.flagged)))
        rows.append([cfg.method, repr(float(cfg.kappa)), cfg.params.N, seed, repr(rel)])
        print(f"{cfg.method} kappa={cfg.kappa:g} seed={seed} relative_L2={rel:.6e}")
    write_csv(out / "metrics.csv", ["method", "kappa", "N", "seed", "relative_L2"], rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oscfie", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, preset=True):
        p.add_argument("--config", help="YAML or JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (value parsed as YAML)")
        p.add_argument("--out", help="output directory")
        if preset:
            p.add_argument("--preset", help="named preset: cm1, cm2, desk-sgl, desk-mgdl, full-sgl, full-mgdl")

    p = sub.add_parser("solve", help="collocation solve (cm1 | cm2)")
    p.add_argument("method", choices=["cm1", "cm2"])
    common(p)
    p = sub.add_parser("train", help="neural solve (sgl | mgdl)")
    p.add_argument("method", choices=["sgl", "mgdl"])
    common(p)
    p.add_argument("--validation", help="'midpoints' or 'random:<seed>'")
    p = sub.add_parser("sweep-kappa", help="run one method over several wavenumbers")
    p.add_argument("--kappas", required=True, help="comma-separated list, e.g. 100,150,200")
    common(p)
    p = sub.add_parser("inv-norm-study", help="||M^-1||_2 over a range of wavenumbers")
    p.add_argument("--kappas", default="10:590:20", help="start:stop:step (inclusive)")
    common(p, preset=False)
    p = sub.add_parser("bound-suite", help="check the quadrature, inverse-norm, delta and error bounds")
    p.add_argument("--out", help="output directory")
    p = sub.add_parser("metrics", help="recompute metrics of a finished run from its checkpoints")
    p.add_argument("run", help="run directory containing manifest.json")
    p.add_argument("--out", help="output directory (default RUN/eval)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("solve", "train"):
            if getattr(args, "validation", None):
                args.set.append(f"validation={args.validation}")
            return cmd_run(args, args.method)
        if args.command == "sweep-kappa":
            return cmd_sweep(args)
        if args.command == "inv-norm-study":
            return cmd_inv_norm(args)
        if args.command == "bound-suite":
            return cmd_bound_suite(args)
        return cmd_metrics(args)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
