"""Experiment drivers: replica orchestration and artifact emission.

Every experiment takes one declarative config, fans replicas out over a
process pool (replica i always uses seed XOR i, and results are gathered
in replica order), and writes into a fresh timestamped directory: one or
more CSV files whose bodies are byte-identical across reruns of the same
config and seed, plus a manifest recording the seed schedule, failures,
versions and wall time.  Replica-level errors are contained and counted;
a run fails when more than 10 percent of its replicas fail.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone

import numpy as np

from . import stats
from .extremal import (AcceptanceError, LimitModel, estimate_cox_constants,
                       load_cluster_bank, sample_cluster, sample_limit_partition,
                       save_cluster_bank)
from .field import CorrelatedField, sample_correlated_pair, sample_field
from .gwtree import NODE_BUDGET, sample_tree
from .offspring import OffspringDistribution
from .oracles import (bridge_barrier_bound, gaussian_tail_bound,
                      martingale_second_moment)
from .partition import (ComplexTemperature, SQRT2, additive_martingale,
                        derivative_martingale, m_of_t, rescaled_partition,
                        truncated_partition)
from .phase import GridCell, classify, grid_scan, limiting_free_energy
from .streams import TAG_PAIR_X, TAG_PAIR_Z, make_rng, replica_seed, stream_key

FAILURE_BUDGET = 0.10
DEFAULT_SEED = 20260825


class ConfigError(ValueError):
    """Bad or incomplete experiment configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment run."""

    experiment: str
    seed: int = DEFAULT_SEED
    replicas: int = 1000
    threads: int | None = None
    t: float = 8.0
    t_list: list | None = None
    rho: float = 1.0
    rho_list: list | None = None
    beta_list: list = field(default_factory=lambda: [complex(0.5, 0.0)])
    a_list: list = field(default_factory=lambda: [2.0, 4.0, 6.0, 8.0])
    offspring: list = field(default_factory=lambda: [(2, 1.0)])
    allow_general_offspring: bool = False
    gamma: float = 0.4
    r: float = 1.0
    delta: float = 0.1
    output_dir: str = "runs"
    max_nodes: int = NODE_BUDGET
    path_step: float = 0.05
    bridge_step: float = 0.01
    sigma_range: list | None = None
    tau_range: list | None = None
    resolution: int = 0
    t_cond: float = 6.0
    min_clusters: int = 200
    max_attempts: int = 200000
    cox_c: float = 1.0
    cox_z: float = 1.0
    bank_path: str | None = None
    input_csv: str | None = None
    k_fractions: list = field(default_factory=lambda: [0.02, 0.05, 0.1])

    def dist(self) -> OffspringDistribution:
        return OffspringDistribution.from_pairs(
            self.offspring,
            require_mean_two=not self.allow_general_offspring)

    def ts(self) -> list:
        return [float(v) for v in (self.t_list if self.t_list else [self.t])]

    def rhos(self) -> list:
        return [float(v) for v in
                (self.rho_list if self.rho_list else [self.rho])]

    def betas(self) -> list:
        return [ComplexTemperature.of(parse_complex(b))
                for b in self.beta_list]

    def effective_threads(self) -> int:
        return self.threads if self.threads else (os.cpu_count() or 1)


def parse_complex(value) -> complex:
    """Accept 2.0, "1.2+0.9i", "1.2+0.9j", or [re, im]."""
    if isinstance(value, complex):
        return value
    if isinstance(value, (int, float)):
        return complex(float(value), 0.0)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        try:
            return complex(value.strip().replace("i", "j"))
        except ValueError as exc:
            raise ConfigError(f"cannot parse complex value {value!r}") from exc
    raise ConfigError(f"cannot parse complex value {value!r}")


_CONFIG_KEYS = {f.name for f in fields(ExperimentConfig)}

# fields each experiment insists on seeing explicitly (| marks alternatives)
REQUIRED_KEYS = {
    "tree_moments": ["replicas", "t|t_list"],
    "martingale": ["replicas", "t", "beta_list"],
    "free_energy_scan": ["replicas", "t|t_list", "beta_list|sigma_range"],
    "glassy_tail": ["replicas", "t", "beta_list", "rho"],
    "isotropy": ["input_csv|beta_list"],
    "truncation": ["replicas", "t", "beta_list", "a_list", "rho"],
    "extremal_max": ["replicas", "t|t_list"],
    "bridge_check": ["replicas", "t", "r"],
    "cluster_bank": ["t_cond", "min_clusters"],
    "limit_object": ["replicas", "beta_list", "bank_path|t_cond"],
}


def load_config(path: str | None, overrides: dict) -> tuple[ExperimentConfig, set]:
    """Merge config file and CLI overrides; returns (config, provided keys)."""
    data: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path!r} is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(data)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    provided = set(merged)
    if "experiment" not in merged:
        raise ConfigError("config must name an experiment")
    try:
        cfg = ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc))
    validate_config(cfg, provided)
    return cfg, provided


def validate_config(cfg: ExperimentConfig, provided: set | None = None) -> None:
    if cfg.experiment not in REQUIRED_KEYS:
        raise ConfigError(
            f"unknown experiment {cfg.experiment!r}; choose from "
            f"{sorted(REQUIRED_KEYS)}")
    if cfg.replicas < 1:
        raise ConfigError("replicas must be >= 1")
    if provided is None:
        return
    missing = []
    for req in REQUIRED_KEYS[cfg.experiment]:
        if not any(alt in provided for alt in req.split("|")):
            missing.append(req)
    if missing:
        raise ConfigError(
            f"experiment {cfg.experiment!r} needs explicit config keys: "
            f"{missing}")


@dataclass
class RunnerOutput:
    csvs: dict
    summary: dict
    failures: list
    tasks: int
    extra_outputs: dict = field(default_factory=dict)


@dataclass
class RunResult:
    run_dir: str
    outputs: dict
    summary: dict
    failures: list
    tasks: int
    ok: bool


def _guarded(worker, cfg, task):
    try:
        return True, worker(cfg, task)
    except Exception as exc:  # contained: replica failures are counted
        return False, f"{type(exc).__name__}: {exc}"


def _collect(worker, cfg: ExperimentConfig, tasks: list) -> tuple[list, list]:
    """Run worker(cfg, task) per task; results come back in task order."""
    call = functools.partial(_guarded, worker, cfg)
    threads = cfg.effective_threads()
    if threads <= 1 or len(tasks) <= 1:
        outcomes = [call(task) for task in tasks]
    else:
        chunk = max(1, len(tasks) // (threads * 8))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(call, tasks, chunksize=chunk))
    payloads, failures = [], []
    for i, (ok, val) in enumerate(outcomes):
        if ok:
            payloads.append(val)
        else:
            payloads.append(None)
            failures.append({"task": i, "error": val})
    return payloads, failures


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, ComplexTemperature):
        return [value.sigma, value.tau]
    return value


def _write_csv(path: str, columns: list, rows: list,
               echo: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# config " + json.dumps(_jsonable(echo), sort_keys=True)
                 + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def _fresh_run_dir(cfg: ExperimentConfig) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    for attempt in range(1000):
        stamp = datetime.now(timezone.utc).strftime("%Y%m%d-%H%M%S-%f")
        name = f"{cfg.experiment}-{stamp}" + (f"-{attempt}" if attempt else "")
        path = os.path.join(cfg.output_dir, name)
        try:
            os.makedirs(path, exist_ok=False)
            return path
        except FileExistsError:
            continue
    raise RuntimeError("could not allocate a fresh run directory")


def run(config: ExperimentConfig, provided: set | None = None) -> RunResult:
    """Execute one experiment; outputs land in a fresh timestamped dir."""
    validate_config(config, provided)
    runner = _RUNNERS[config.experiment]
    run_dir = _fresh_run_dir(config)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.monotonic()
    out = runner(config, run_dir)
    wall = time.monotonic() - t0
    echo = asdict(config)
    outputs = dict(out.extra_outputs)
    for name, (columns, rows) in out.csvs.items():
        path = os.path.join(run_dir, name)
        _write_csv(path, columns, rows, echo)
        outputs[name] = path
    ok = len(out.failures) <= FAILURE_BUDGET * max(out.tasks, 1)
    manifest = {
        "experiment": config.experiment,
        "config": _jsonable(echo),
        "started_utc": started,
        "wall_time_s": wall,
        "replica_seeds": [replica_seed(config.seed, i)
                          for i in range(config.replicas)],
        "tasks": out.tasks,
        "failures": out.failures,
        "ok": ok,
        "versions": _versions(),
        "outputs": {k: os.path.basename(v) for k, v in outputs.items()},
        "summary": _jsonable(out.summary),
    }
    with open(os.path.join(run_dir, "manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return RunResult(run_dir=run_dir, outputs=outputs,
                     summary=out.summary, failures=out.failures,
                     tasks=out.tasks, ok=ok)


def _versions() -> dict:
    try:
        from importlib.metadata import version
        own = version("bbmlab")
    except Exception:
        own = "unknown"
    import sys
    return {"bbmlab": own, "numpy": np.__version__,
            "python": sys.version.split()[0]}


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = float(np.mean(values)) if n else math.nan
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return mean, se


# ---------------------------------------------------------------- replicas


def _tree_worker(cfg: ExperimentConfig, task) -> tuple:
    t, index = task
    rs = replica_seed(cfg.seed, index)
    tree = sample_tree(cfg.dist(), t, rs, max_nodes=cfg.max_nodes)
    return t, index, rs, tree.n_leaves


def _run_tree_moments(cfg: ExperimentConfig, run_dir: str) -> RunnerOutput:
    tasks = [(t, i) for t in cfg.ts() for i in range(cfg.replicas)]
    payloads, failures = _collect(_tree_worker, cfg, tasks)
    rows = [p for p in payloads if p is not None]
    summary = {}
    for t in cfg.ts():
        ns = np.array([r[3] for r in rows if r[0] == t], dtype=np.float64)
        mean, se = _mean_se(ns)
        target = math.exp(t)
        summary[f"t={t}"] = {
            "replicas": int(ns.size), "mean": mean, "se": se,
            "target": target,
            "z": (mean - target) / se if se and se > 0 else math.nan,
        }
    return RunnerOutput(
        csvs={"tree_moments.csv":
              (["t", "replica", "seed", "n_leaves"], rows)},
        summary=summary, failures=failures, tasks=len(tasks))


def _pair_on_tree(tree, rho: float, seed: int, x_field, z_field):
    """Correlated view with shared underlying x/z fields."""
    x = x_field.x
    if abs(rho) == 1.0:
        return CorrelatedField(tree=tree, rho=rho, seed=seed, x_field=x_field,
                               z_field=None, x=x,
                               y=math.copysign(1.0, rho) * x, z=None)
    z = z_field.x
    return CorrelatedField(tree=tree, rho=rho, seed=seed, x_field=x_field,
                           z_field=z_field, x=x,
                           y=rho * x + math.sqrt(1.0 - rho * rho) * z, z=z)


def _martingale_worker(cfg: ExperimentConfig, index: int) -> list:
    rs = replica_seed(cfg.seed, index)
    tree = sample_tree(cfg.dist(), cfg.t, rs, max_nodes=cfg.max_nodes)
    x_field = sample_field(tree, stream_key(rs, TAG_PAIR_X))
    need_z = any(abs(r) != 1.0 for r in cfg.rhos())
    z_field = sample_field(tree, stream_key(rs, TAG_PAIR_Z)) if need_z \
        else None
    out = []
    for rho in cfg.rhos():
        fld = _pair_on_tree(tree, rho, rs, x_field, z_field)
        for bt in cfg.betas():
            m = additive_martingale(fld, bt)
            out.append((cfg.t, bt.sigma, bt.tau, rho, index, rs,
                        tree.n_leaves, m.real, m.imag, abs(m) ** 2))
    return out


def _run_martingale(cfg: ExperimentConfig, run_dir: str) -> RunnerOutput:
    tasks = list(range(cfg.replicas))
    payloads, failures = _collect(_martingale_worker, cfg, tasks)
    rows = [row for p in payloads if p is not None for row in p]
    k_fac = cfg.dist().second_factorial_moment
    summary = {}
    for bt in cfg.betas():
        oracle = martingale_second_moment(bt.beta, cfg.t, k_fac,
                                          allow_unbounded=True)
        for rho in cfg.rhos():
            sel = [r for r in rows
                   if r[1] == bt.sigma and r[2] == bt.tau and r[3] == rho]
            re = np.array([r[7] for r in sel])
            im = np.array([r[8] for r in sel])
            a2 = np.array([r[9] for r in sel])
            mean_re, se_re = _mean_se(re)
            mean_im, se_im = _mean_se(im)
            mean_a2, se_a2 = _mean_se(a2)
            summary[f"beta={bt.beta} rho={rho}"] = {
                "replicas": int(re.size),
                "mean_re": mean_re, "se_re": se_re,
                "mean_im": mean_im, "se_im": se_im,
                "mean_abs2": mean_a2, "se_abs2": se_a2,
                "oracle_abs2": oracle,
            }
    cols = ["t", "sigma", "tau", "rho", "replica", "seed", "n_leaves",
            "m_re", "m_im", "m_abs2"]
    return RunnerOutput(csvs={"martingale.csv": (cols, rows)},
                        summary=summary, failures=failures, tasks=len(tasks))


def _free_energy_worker(cfg: ExperimentConfig, task) -> tuple:
    from .accum import scaled_exp_sum
    t, index = task
    rs = replica_seed(cfg.seed, index)
    tree = sample_tree(cfg.dist(), t, rs, max_nodes=cfg.max_nodes)
    fld = sample_correlated_pair(tree, cfg.rho, rs)
    ps = [scaled_exp_sum(bt.sigma * fld.x, bt.tau * fld.y).abs_log / t
          for bt in cfg.betas()]
    return t, index, ps


def _run_free_energy(cfg: ExperimentConfig, run_dir: str) -> RunnerOutput:
    grid_mode = cfg.sigma_range is not None
    cells: list[GridCell] = []
    failures: list = []
    tasks_total = 0
    if grid_mode:
        if cfg.tau_range is None or cfg.resolution < 1:
            raise ConfigError(
                "grid scan needs sigma_range, tau_range and resolution")
        for t in cfg.ts():
            cells.extend(grid_scan(tuple(cfg.sigma_range),
                                   tuple(cfg.tau_range), cfg.resolution,
                                   cfg.dist(), t, cfg.replicas, cfg.rho,
                                   cfg.seed, max_nodes=cfg.max_nodes))
            tasks_total += cfg.replicas
    else:
        betas = cfg.betas()
        for t in cfg.ts():
            tasks = [(t, i) for i in range(cfg.replicas)]
            payloads, fails = _collect(_free_energy_worker, cfg, tasks)
            failures.extend(fails)
            tasks_total += len(tasks)
            good = np.array([p[2] for p in payloads if p is not None])
            for j, bt in enumerate(betas):
                if good.size:
                    mean, se = _mean_se(good[:, j])
                else:
                    mean, se = math.nan, math.nan
                cells.append(GridCell(
                    sigma=bt.sigma, tau=bt.tau,
                    phase=classify(bt).region.value,
                    p_limit=limiting_free_energy(bt),
                    p_hat=mean, stderr=se,
                    n_replicas=int(good.shape[0]) if good.size else 0,
                    t=t))
    rows = [(c.sigma, c.tau, c.phase, c.p_limit, c.p_hat, c.stderr,
             c.n_replicas, c.t) for c in cells]
    cols = ["sigma", "tau", "phase", "p_limit", "p_hat", "stderr",
            "n_replicas", "t"]
    grid_path = os.path.join(run_dir, "phase_grid.csv")
    emit_phase_figure_data(cells, grid_path)
    summary = {"cells": len(cells),
               "max_abs_error": float(np.nanmax(
                   [abs(c.p_hat - c.p_limit) for c in cells]))
               if cells else math.nan}
    return RunnerOutput(csvs={"free_energy.csv": (cols, rows)},
                        summary=summary, failures=failures,
                        tasks=tasks_total,
                        extra_outputs={"phase_grid.csv": grid_path})


def emit_phase_figure_data(cells, path: str) -> None:
    """Contour-ready projection of scan cells: one row per grid cell."""
    cells = list(cells)
    if not cells:
        raise ValueError("empty scan table")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sigma", "tau", "p_limit", "p_hat"])
        for c in cells:
            writer.writerow([c.sigma, c.tau, c.p_limit, c.p_hat])


def _glassy_worker(cfg: ExperimentConfig, index: int) -> tuple:
    rs = replica_seed(cfg.seed, index)
    tree = sample_tree(cfg.dist(), cfg.t, rs, max_nodes=cfg.max_nodes)
    fld = sample_correlated_pair(tree, cfg.rho, rs)
    bt = cfg.betas()[0]
    val = rescaled_partition(fld, bt).real_shift
    return index, rs, tree.n_leaves, val.real, val.imag, abs(val)


def _run_glassy_tail(cfg: ExperimentConfig, run_dir: str) -> RunnerOutput:
    tasks = list(range(cfg.replicas))
    payloads, failures = _collect(_glassy_worker, cfg, tasks)
    rows = [p for p in payloads if p is not None]
    moduli = np.array([r[5] for r in rows])
    bt = cfg.betas()[0]
    target = SQRT2 / abs(bt.sigma) if bt.sigma else math.nan
    summary = {"alpha_target": target, "n": int(moduli.size)}
    for kf in cfg.k_fractions:
        fit = stats.hill_estimator(moduli[moduli > 0], k_fraction=kf)
        summary[f"hill_k={kf}"] = {
            "alpha_hat": fit.alpha_hat, "alpha_se": fit.alpha_se,
            "k_used": fit.k_used,
        }
    cols = ["replica", "seed", "n_leaves", "x_re", "x_im", "abs_x"]
    return RunnerOutput(csvs={"glassy_tail.csv": (cols, rows)},
                        summary=summary, failures=failures,
                        tasks=len(tasks))


def _read_complex_samples(path: str) -> np.ndarray:
    re_vals, im_vals = [], []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh
                                if not line.startswith("#"))
        for rec in reader:
            re_vals.append(float(rec["x_re"]))
            im_vals.append(float(rec["x_im"]))
    if not re_vals:
        raise ConfigError(f"no samples found in {path!r}")
    return np.array(re_vals) + 1j * np.array(im_vals)


def _run_isotropy(cfg: ExperimentConfig, run_dir: str) -> RunnerOutput:
    failures: list = []
    tasks = 0
    if cfg.input_csv:
        samples = _read_complex_samples(cfg.input_csv)
    else:
        payloads, failures = _collect(_glassy_worker, cfg,
                                      list(range(cfg.replicas)))
        tasks = cfg.replicas
        samples = np.array([complex(p[3], p[4]) for p in payloads
                            if p is not None])
    radii = stats.isotropy_radii(samples)
    statistic = stats.isotropy_statistic(samples, radii)
    control = stats.isotropic_resample(samples, stream_key(cfg.seed, 0x150))
    calibration = stats.isotropy_statistic(control, radii)
    rows = []
    n_angles = 16
    for label, data in (("sample", samples), ("calibration", control)):
        for r in radii:
            for j in range(n_angles):
                theta = 2.0 * math.pi * j / n_angles
                phi = stats.empirical_cf(data, r * complex(math.cos(theta),
                                                           math.sin(theta)))
                rows.append((label, r, theta, phi.real, phi.imag))
    summary = {
        "n": int(samples.size),
        "radii": [float(r) for r in radii],
        "statistic": statistic,
        "calibration": calibration,
        "ratio": statistic / calibration if calibration > 0 else math.inf,
    }
    cols = ["source", "radius", "angle", "cf_re", "cf_im"]
    return RunnerOutput(csvs={"isotropy.csv": (cols, rows)},
                        summary=summary, failures=failures, tasks=tasks)


def _truncation_worker(cfg: ExperimentConfig, index: int) -> list:
    rs = replica_seed(cfg.seed, index)
    tree = sample_tree(cfg.dist(), cfg.t, rs, max_nodes=cfg.max_nodes)
    fld = sample_correlated_pair(tree, cfg.rho, rs)
    bt = cfg.betas()[0]
    out = []
    for a in cfg.a_list:
        part = truncated_partition(fld, bt, float(a))
        out.append((index, rs, tree.n_leaves, float(a),
                    part.kept.real, part.kept.imag, abs(part.discarded)))
    return out


def _run_truncation(cfg: ExperimentConfig, run_dir: str) -> RunnerOutput:
    tasks = list(range(cfg.replicas))
    payloads, failures = _collect(_truncation_worker, cfg, tasks)
    rows = [row for p in payloads if p is not None for row in p]
    summary = {"delta": cfg.delta}
    p_by_a = []
    for a in cfg.a_list:
        disc = np.array([r[6] for r in rows if r[3] == float(a)])
        p_exc = float(np.mean(disc > cfg.delta)) if disc.size else math.nan
        se = math.sqrt(max(p_exc * (1 - p_exc), 0.0) / disc.size) \
            if disc.size else math.nan
        p_by_a.append(p_exc)
        summary[f"A={a}"] = {"p_exceed": p_exc, "se": se,
                             "n": int(disc.size)}
    summary["nonincreasing"] = all(
        p_by_a[i + 1] <= p_by_a[i] + 1e-12 for i in range(len(p_by_a) - 1))
    summary["final_p_exceed"] = p_by_a[-1] if p_by_a else math.nan
    cols = ["replica", "seed", "n_leaves", "a", "kept_re", "kept_im",
            "disc_abs"]
    return RunnerOutput(csvs={"truncation.csv": (cols, rows)},
                        summary=summary, failures=failures,
                        tasks=len(tasks))


def _extremal_worker(cfg: ExperimentConfig, task) -> tuple:
    t, index = task
    rs = replica_seed(cfg.seed, index)
    tree = sample_tree(cfg.dist(), t, rs, max_nodes=cfg.max_nodes)
    fld = sample_correlated_pair(tree, 1.0, rs)
    shift = float(np.max(fld.x)) - m_of_t(t)
    return t, index, rs, tree.n_leaves, shift, derivative_martingale(fld)


def _run_extremal_max(cfg: ExperimentConfig, run_dir: str) -> RunnerOutput:
    ts = cfg.ts()
    tasks = [(t, i) for t in ts for i in range(cfg.replicas)]
    payloads, failures = _collect(_extremal_worker, cfg, tasks)
    rows = [p for p in payloads if p is not None]
    summary = {}
    shifts = {}
    zvals = {}
    for t in ts:
        arr = np.array([r[4] for r in rows if r[0] == t])
        shifts[t] = arr
        zvals[t] = np.array([r[5] for r in rows if r[0] == t])
        summary[f"t={t}"] = {"n": int(arr.size),
                             "median": float(np.median(arr)) if arr.size
                             else math.nan,
                             "mean": float(np.mean(arr)) if arr.size
                             else math.nan}
    if len(ts) >= 2 and shifts[ts[0]].size and shifts[ts[-1]].size:
        summary["ks_first_last"] = stats.ks_distance(shifts[ts[0]],
                                                     shifts[ts[-1]])
    last = ts[-1]
    if shifts[last].size >= 2000:
        fit = stats.max_tail_exponent(shifts[last])
        summary["tail"] = {"alpha_hat": fit.alpha_hat,
                           "alpha_se": fit.alpha_se, "k_used": fit.k_used,
                           "prefactor_power": fit.prefactor_power}
    if shifts[last].size >= 500:
        pos = zvals[last][zvals[last] > 0]
        if pos.size >= 500:
            cox = estimate_cox_constants(shifts[last], pos)
            summary["cox"] = {"c_hat": cox.c_hat, "sse": cox.sse}
    cols = ["t", "replica", "seed", "n_leaves", "max_shift", "z_deriv"]
    return RunnerOutput(csvs={"extremal_max.csv": (cols, rows)},
                        summary=summary, failures=failures,
                        tasks=len(tasks))


def _bridge_worker(cfg: ExperimentConfig, task) -> tuple:
    chunk_index, n_paths = task
    rs = replica_seed(cfg.seed, chunk_index)
    rng = make_rng(rs, 0xB1)
    t, a, step = cfg.t, cfg.r, cfg.bridge_step
    n_steps = int(round(t / step))
    s = np.arange(1, n_steps + 1) * step
    window = (s >= a) & (s <= t - a)
    incr = rng.standard_normal((n_paths, n_steps)) * math.sqrt(step)
    w = np.cumsum(incr, axis=1)
    bridge = w - np.outer(w[:, -1], s / t)
    stay = np.all(bridge[:, window] <= 0.0, axis=1)
    return chunk_index, rs, n_paths, int(np.count_nonzero(stay))


def _run_bridge_check(cfg: ExperimentConfig, run_dir: str) -> RunnerOutput:
    if not 0.0 < 2.0 * cfg.r < cfg.t:
        raise ConfigError("bridge_check needs 0 < 2r < t")
    chunk = 2000
    tasks = []
    remaining = cfg.replicas
    i = 0
    while remaining > 0:
        take = min(chunk, remaining)
        tasks.append((i, take))
        remaining -= take
        i += 1
    payloads, failures = _collect(_bridge_worker, cfg, tasks)
    rows = [p for p in payloads if p is not None]
    n_total = sum(r[2] for r in rows)
    n_stay = sum(r[3] for r in rows)
    p_hat = n_stay / n_total if n_total else math.nan
    bound = bridge_barrier_bound(cfg.r, cfg.t)
    se = math.sqrt(max(p_hat * (1 - p_hat), 0.0) / n_total) if n_total \
        else math.nan
    xs = np.linspace(0.1, 10.0, 199)
    from scipy.stats import norm
    tails = norm.sf(xs)
    bounds = gaussian_tail_bound(xs)
    tail_rows = [(float(x), float(b), float(v), bool(b >= v))
                 for x, b, v in zip(xs, bounds, tails)]
    summary = {
        "p_stay": p_hat, "se": se, "paths": n_total,
        "bound": bound, "within_bound": bool(p_hat <= bound),
        "gauss_tail_dominates": bool(np.all(bounds >= tails)),
    }
    return RunnerOutput(
        csvs={"bridge.csv": (["chunk", "seed", "paths", "n_stay"], rows),
              "gauss_tail.csv": (["x", "bound", "exact_tail", "dominates"],
                                 tail_rows)},
        summary=summary, failures=failures, tasks=len(tasks))


def _cluster_worker(cfg: ExperimentConfig, index: int):
    rs = replica_seed(cfg.seed, index)
    cl = sample_cluster(cfg.t_cond, cfg.dist(), rs,
                        max_attempts=cfg.max_attempts)
    return index, rs, cl


def _run_cluster_bank(cfg: ExperimentConfig, run_dir: str) -> RunnerOutput:
    tasks = list(range(cfg.min_clusters))
    payloads, failures = _collect(_cluster_worker, cfg, tasks)
    results = [p for p in payloads if p is not None]
    clusters = [p[2] for p in results]
    if not clusters:
        raise AcceptanceError("no clusters accepted at all")
    bank_path = os.path.join(run_dir, "bank.txt")
    attempts = sum(c.attempts for c in clusters)
    save_cluster_bank(bank_path, clusters, cfg.dist(), attempts=attempts)
    rows = [(p[0], p[1], c.atoms.size, c.attempts, c.max_value,
             float(c.atoms.min())) for p, c in
            ((p, p[2]) for p in results)]
    summary = {
        "accepted": len(clusters),
        "attempts": attempts,
        "acceptance_rate": len(clusters) / attempts,
        "mean_atoms": float(np.mean([c.atoms.size for c in clusters])),
    }
    cols = ["index", "seed", "n_atoms", "attempts", "max_value", "min_atom"]
    return RunnerOutput(csvs={"clusters.csv": (cols, rows)},
                        summary=summary, failures=failures,
                        tasks=len(tasks),
                        extra_outputs={"bank.txt": bank_path})


def _run_limit_object(cfg: ExperimentConfig, run_dir: str) -> RunnerOutput:
    failures: list = []
    tasks = 0
    if cfg.bank_path:
        clusters, _meta = load_cluster_bank(cfg.bank_path)
    else:
        payloads, failures = _collect(_cluster_worker, cfg,
                                      list(range(cfg.min_clusters)))
        tasks = cfg.min_clusters
        clusters = [p[2] for p in payloads if p is not None]
    model = LimitModel(cox_constant=cfg.cox_c, z_weight=cfg.cox_z,
                       clusters=clusters)
    bt = cfg.betas()[0]
    a = float(cfg.a_list[0])
    draws = sample_limit_partition(model, bt, cfg.rho, a, cfg.replicas,
                                   stream_key(cfg.seed, 0x11D))
    moduli = np.abs(draws.values)
    counts = draws.atom_counts.astype(np.float64)
    mean_atoms = float(np.mean(counts))
    dispersion = float(np.var(counts, ddof=1) / mean_atoms) \
        if mean_atoms > 0 else math.nan
    summary = {
        "clusters": len(clusters),
        "threshold": a,
        "mean_atoms": mean_atoms,
        "model_mean_atoms": cfg.cox_c * cfg.cox_z * math.exp(SQRT2 * a)
        / SQRT2,
        "dispersion": dispersion,
        "alpha_target": SQRT2 / abs(bt.sigma) if bt.sigma else math.nan,
        "n_zero": int(np.count_nonzero(moduli == 0.0)),
    }
    pos = moduli[moduli > 0]
    if pos.size >= 100:
        fit = stats.hill_estimator(pos, k_fraction=0.05)
        summary["hill"] = {"alpha_hat": fit.alpha_hat,
                           "alpha_se": fit.alpha_se, "k_used": fit.k_used}
    rows = [(i, v.real, v.imag, float(np.abs(v)), int(c))
            for i, (v, c) in enumerate(zip(draws.values,
                                           draws.atom_counts))]
    cols = ["draw", "value_re", "value_im", "abs", "n_atoms"]
    return RunnerOutput(csvs={"limit_draws.csv": (cols, rows)},
                        summary=summary, failures=failures,
                        tasks=tasks + 1)


_RUNNERS = {
    "tree_moments": _run_tree_moments,
    "martingale": _run_martingale,
    "free_energy_scan": _run_free_energy,
    "glassy_tail": _run_glassy_tail,
    "isotropy": _run_isotropy,
    "truncation": _run_truncation,
    "extremal_max": _run_extremal_max,
    "bridge_check": _run_bridge_check,
    "cluster_bank": _run_cluster_bank,
    "limit_object": _run_limit_object,
}
