"""Experiment configuration, end-to-end runs and CSV/JSON artifacts."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..collocation import PiecewiseBasis, assemble_G, solve_collocation
from ..multi_grade import GradeSpec, GradeStack, compose_solution, grade_components, train_multi_grade
from ..nn import init_he, save_checkpoint
from ..quadrature import QuadratureSpec, delta_sequence, eval_polyexp, quad_error_bound, sup_quad_error
from ..single_grade import TrainConfig, full_loss, net_evaluator, train_single_grade, validation_loss
from ..system import SystemParams, build_M, eta_bound, inv_norm, seminorm
from .problem import (
    benchmark_oscillatory_sum,
    benchmark_terms,
    fft_relative_error,
    gen_training_grid,
    gen_validation_grid,
    relative_L2_error,
)

__all__ = [
    "ExperimentConfig",
    "MetricsRecord",
    "PRESETS",
    "config_from_dict",
    "run_experiment",
    "error_decomposition",
    "bound_suite",
    "write_csv",
]

METHODS = ("cm1", "cm2", "sgl", "mgdl")
TRACE_POINTS = 2001


@dataclass
class ExperimentConfig:
    method: str = "cm1"
    kappa: float = 100.0
    lam: complex = 0.2
    q: int = 1
    gamma: float = 6.0
    beta: float = 1.0
    Gamma: float = 2.0
    # sgl: full widths [1, ..., 2]; mgdl: hidden widths per grade
    dims: list = field(default_factory=lambda: [1, 64, 64, 32, 32, 16, 16, 2])
    grades: list = field(default_factory=lambda: [[64, 64], [32, 32], [16, 16]])
    grade_epochs: list = field(default_factory=lambda: [500, 1000, 2000])
    epochs: int = 3500
    batch_size: int = 64
    mu: float = 0.0
    lr0: float = 1e-2
    lrF: float = 1e-7
    seeds: list = field(default_factory=lambda: [0])
    validation: str = "midpoints"
    out_dir: str = "runs/default"
    write_traces: bool = True
    check_bounds: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        self.lam = complex(self.lam)
        self.q = int(self.q)
        if self.q not in (1, 2):
            raise ValueError("q must be 1 or 2")
        if isinstance(self.seeds, int):
            self.seeds = [self.seeds]
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.method == "cm2" and (self.params.N - 1) % 2:
            raise ValueError(f"cm2 needs N - 1 even, got N = {self.params.N}")
        if not (self.validation == "midpoints" or self.validation.startswith("random:")):
            raise ValueError("validation must be 'midpoints' or 'random:<seed>'")

    @property
    def params(self) -> SystemParams:
        return SystemParams(self.lam, self.kappa, self.gamma, self.beta, self.q)

    def train_config(self, seed: int, epochs: int | None = None) -> TrainConfig:
        return TrainConfig(self.epochs if epochs is None else epochs, self.batch_size, self.mu,
                           self.lr0, self.lrF, seed)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lam"] = [self.lam.real, self.lam.imag] if self.lam.imag else self.lam.real
        return d


# Desk presets use kappa = 50 (N = 301) and half the widths of the full
# 256/128/64/32 architecture; hyper-parameters follow the MGDL and deepest
# single-grade rows of the kappa = 100, N = 6 kappa + 1 column.
PRESETS: dict[str, dict] = {
    "cm1": {"method": "cm1", "kappa": 100, "q": 1},
    "cm2": {"method": "cm2", "kappa": 100, "q": 1},
    "desk-mgdl": {
        "method": "mgdl", "kappa": 50, "grades": [[128, 128], [64, 64], [32, 32, 16, 16]],
        "grade_epochs": [500, 1000, 2000], "batch_size": 64, "mu": 1e-6,
    },
    "desk-sgl": {
        "method": "sgl", "kappa": 50, "dims": [1, 128, 128, 64, 64, 32, 32, 16, 16, 2],
        "epochs": 3500, "batch_size": 128, "mu": 1e-4,
    },
    "full-mgdl": {
        "method": "mgdl", "kappa": 100, "grades": [[256, 256], [128, 128], [64, 64, 32, 32]],
        "grade_epochs": [500, 1000, 2000], "batch_size": 64, "mu": 1e-6,
    },
    "full-sgl": {
        "method": "sgl", "kappa": 100, "dims": [1, 256, 256, 128, 128, 2],
        "epochs": 3500, "batch_size": 128, "mu": 1e-5,
    },
}


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    preset = d.pop("preset", None)
    base = dict(PRESETS[preset]) if preset else {}
    if preset and preset not in PRESETS:
        raise KeyError(f"unknown preset {preset!r}")
    base.update(d)
    if "lambda" in base:
        base["lam"] = base.pop("lambda")
    lam = base.get("lam")
    if isinstance(lam, (list, tuple)):
        base["lam"] = complex(*lam)
    elif isinstance(lam, str):
        base["lam"] = complex(lam.replace(" ", ""))
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(base) - known
    if unknown:
        raise KeyError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**base)


@dataclass
class MetricsRecord:
    method: str
    kappa: float
    N: int
    relative_L2: float
    train_loss: float
    val_loss: float
    wall_seconds: float
    seed: int
    extra: dict = field(default_factory=dict)

    COLUMNS = ("method", "kappa", "N", "seed", "relative_L2", "train_loss", "val_loss", "wall_seconds")

    def row(self) -> list:
        return [self.method, repr(float(self.kappa)), self.N, self.seed, repr(self.relative_L2),
                repr(self.train_loss), repr(self.val_loss), f"{self.wall_seconds:.3f}"]


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


def _hist_row(r):
    e, tl, vl, lr, sec = r
    return [e, _fmt(tl), _fmt(vl), _fmt(lr), f"{sec:.6f}"]


def _write_trace(path, s, values):
    write_csv(path, ["s", "re", "im"], ([_fmt(a), _fmt(v.real), _fmt(v.imag)] for a, v in zip(s, values)))


def error_decomposition(Y, cfg: ExperimentConfig, M, residual) -> dict:
    """Measured terms of ||y - Y||_N <= ||M^-1|| (||e||_N + |lam| sup|K y - K_p y|)."""
    params = M.params
    terms = benchmark_terms(cfg.kappa)
    nodes = params.nodes
    lhs = seminorm(eval_polyexp(terms, nodes) - np.asarray(Y(nodes)))
    chi = benchmark_oscillatory_sum(cfg.kappa, Gamma=cfg.Gamma)
    probes = np.union1d(np.linspace(-1.0, 1.0, 201), nodes)
    qerr = sup_quad_error(chi, params.spec, probes)
    minv = inv_norm(M)
    rhs = minv * (seminorm(residual) + abs(params.lam) * qerr)
    return {"lhs": lhs, "rhs": rhs, "inv_norm": minv, "residual_norm": seminorm(residual),
            "sup_quad_error": qerr, "holds": bool(lhs <= rhs + 1e-9)}


def _validation_data(cfg: ExperimentConfig, terms, seed: int):
    rng = None
    if cfg.validation.startswith("random:"):
        rng = np.random.default_rng(int(cfg.validation.split(":", 1)[1]) + seed)
    return gen_validation_grid(terms, cfg.lam, cfg.kappa, rng=rng)


def _run_one(cfg: ExperimentConfig, seed: int, out: Path, M, f, terms,
             history: list) -> tuple[MetricsRecord, dict]:
    params = M.params
    t0 = time.perf_counter()
    info: dict = {"seed": seed}
    val = _validation_data(cfg, terms, seed)
    components = None
    if cfg.method in ("cm1", "cm2"):
        basis = PiecewiseBasis(1 if cfg.method == "cm1" else 2, params.N)
        sol = solve_collocation(basis, cfg.lam, cfg.kappa, f, assemble_G(basis, cfg.lam, cfg.kappa))
        Y = sol
        wall = time.perf_counter() - t0
        np.save(out / f"coeffs_seed{seed}.npy", sol.coeffs)
        v = Y(params.nodes)
        residual = f - M @ v
        train_loss = float(np.mean(np.abs(residual) ** 2))
        val_loss = validation_loss(Y, params, *val)
    elif cfg.method == "sgl":
        net = init_he(cfg.dims, seed)
        net, hist = train_single_grade(net, M, f, cfg.train_config(seed), val)
        wall = time.perf_counter() - t0
        Y = net_evaluator(net)
        history.extend([seed, 1, *_hist_row(r)] for r in hist.rows())
        save_checkpoint(net, out / f"checkpoint_seed{seed}.npz")
        residual = f - M @ Y(params.nodes)
        train_loss, val_loss = hist.train_loss[-1], hist.val_loss[-1]
        info["best_val_epoch"] = hist.best_val_epoch
    else:
        spec = GradeSpec(cfg.grades, cfg.grade_epochs)
        stack, hists = train_multi_grade(spec, M, f, cfg.train_config(seed, 1), val, seed)
        wall = time.perf_counter() - t0
        Y = lambda t: compose_solution(stack, t)  # noqa: E731
        for g, (net, hist) in enumerate(zip(stack.grades, hists), start=1):
            history.extend([seed, g, *_hist_row(r)] for r in hist.rows())
            save_checkpoint(net, out / f"checkpoint_seed{seed}_grade{g}.npz")
        np.savez(out / f"residuals_seed{seed}.npz", *stack.residuals)
        residual = stack.target
        train_loss, val_loss = hists[-1].train_loss[-1], hists[-1].val_loss[-1]
        info["residual_norms"] = stack.residual_norms()
        info["best_val_epoch"] = [h.best_val_epoch for h in hists]
        info["grade_relative_L2"] = []
        components = stack
    rel = relative_L2_error(Y, terms)
    info["relative_L2"] = rel
    if cfg.check_bounds:
        info["error_decomposition"] = error_decomposition(Y, cfg, M, residual)
    if cfg.write_traces:
        _write_traces(cfg, out / "traces", seed, Y, terms, components, info)
    rec = MetricsRecord(cfg.method, cfg.kappa, params.N, rel, train_loss, val_loss, wall, seed)
    return rec, info


def _write_traces(cfg, tdir: Path, seed: int, Y, terms, stack, info):
    s = np.linspace(-1.0, 1.0, TRACE_POINTS)
    yv = np.asarray(Y(s))
    ex = eval_polyexp(terms, s)
    _write_trace(tdir / f"solution_seed{seed}.csv", s, yv)
    write_csv(tdir / f"abs_error_seed{seed}.csv", ["s", "abs_err"],
              ([_fmt(a), _fmt(e)] for a, e in zip(s, np.abs(yv - ex))))
    peak = cfg.kappa / (2 * math.pi)
    evaluators = [("", Y)]
    if stack is not None:
        for g, comp in enumerate(grade_components(stack, s), start=1):
            _write_trace(tdir / f"grade{g}_component_seed{seed}.csv", s, comp)
        evaluators = []
        for g in range(1, stack.n_grades + 1):
            sub = GradeStack(stack.nodes, stack.residuals[: g + 1], stack.grades[:g])
            evaluators.append((f"_grade{g}", lambda t, sub=sub: compose_solution(sub, t)))
    band = []
    for tag, ev in evaluators:
        fe = fft_relative_error(ev, terms)
        rel = np.where(fe.flagged, np.nan, fe.rel_err)
        write_csv(tdir / f"fft_error{tag}_seed{seed}.csv", ["z", "rel_err"],
                  ([_fmt(z), "" if math.isnan(r) else _fmt(r)] for z, r in zip(fe.z, rel)))
        band.append(fe.band_mean(peak - 2.0, peak + 2.0))
        if tag:
            info["grade_relative_L2"].append(relative_L2_error(ev, terms))
    info["fft_peak_band_error"] = band


def run_experiment(cfg: ExperimentConfig) -> tuple[list[MetricsRecord], dict]:
    """Run every seed, write artifacts under ``cfg.out_dir`` and return the metrics and manifest.

    Failures are recorded in the manifest and re-raised after it is written.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": cfg.to_dict(),
        "versions": {"oscfie": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "runs": [],
        "status": "running",
    }
    records: list[MetricsRecord] = []
    history: list[list] = []
    error = None
    try:
        params = cfg.params
        terms = benchmark_terms(cfg.kappa)
        M = build_M(params)
        _, f = gen_training_grid(params, terms)
        for seed in cfg.seeds:
            rec, info = _run_one(cfg, seed, out, M, f, terms, history)
            records.append(rec)
            manifest["runs"].append(info)
        manifest["status"] = "ok"
    except Exception as exc:  # recorded, then re-raised
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        error = exc
    write_csv(out / "metrics.csv", MetricsRecord.COLUMNS, (r.row() for r in records))
    if cfg.method in ("sgl", "mgdl"):
        write_csv(out / "history.csv", ["seed", "grade", "epoch", "train_loss", "val_loss", "lr", "seconds"],
                  history)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
    if error is not None:
        raise error
    return records, manifest


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def bound_suite(kappas_quad=(10, 50, 100), kappas_inv=(1, 2, 5, 10, 25, 50, 100),
                kappas_decomp=(10, 25, 50), lam: float = 0.2, gamma: float = 6.0,
                beta: float = 1.0, Gamma: float = 2.0, m: int = 2, L: int = 50) -> list[dict]:
    """Measured value against bound for every case; each row carries ``passed``."""
    rows = []
    for k in kappas_quad:
        chi = benchmark_oscillatory_sum(k, m=m, Gamma=Gamma)
        spec = QuadratureSpec(gamma, beta, k)
        meas = sup_quad_error(chi, spec)
        bnd = quad_error_bound(chi.r, chi.tau, Gamma, m, gamma, beta, k)
        rows.append({"suite": "quadrature", "case": f"kappa={k},p={spec.p}", "measured": meas,
                     "bound": bnd, "passed": meas <= bnd})
    eta = eta_bound(lam, 1, gamma, Gamma)
    for k in kappas_inv:
        meas = inv_norm(build_M(SystemParams(lam, k, gamma, beta, 1)))
        rows.append({"suite": "inverse_norm", "case": f"kappa={k}", "measured": meas,
                     "bound": 1 / (1 - eta), "passed": meas <= 1 / (1 - eta)})
    _, _, weighted = delta_sequence(L, exact=True)
    rows.append({"suite": "delta_sequence", "case": f"L={L}", "measured": float(weighted),
                 "bound": 1.2, "passed": weighted <= 1.2})
    for k in kappas_decomp:
        cfg = ExperimentConfig(method="cm1", kappa=k, lam=lam, gamma=gamma, beta=beta, Gamma=Gamma,
                               write_traces=False)
        params = cfg.params
        M = build_M(params)
        _, f = gen_training_grid(params, benchmark_terms(k))
        basis = PiecewiseBasis(1, params.N)
        sol = solve_collocation(basis, lam, k, f)
        dec = error_decomposition(sol, cfg, M, f - M @ sol(params.nodes))
        rows.append({"suite": "error_decomposition", "case": f"cm1,kappa={k}", "measured": dec["lhs"],
                     "bound": dec["rhs"], "passed": dec["holds"]})
    return rows
