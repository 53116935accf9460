"""Experiment driver: scenario pools, algorithm runs, sweeps, evaluation.

Configuration is a flat JSON object; any key can be overridden by the
command-line flag of the same name.  All outputs are UTF-8 CSV with a header
row and floats printed at 9 significant digits; runs are reproducible byte
for byte from (config, seed), except the wallclock_ms trace column.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import itertools
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .discrete import portfolio_from_csv
from .feasible import BudgetPolytope
from .objective import BoundObjective, SensorObjective, sensor_value
from .optimizers import (
    RunParams,
    ScheduleError,
    TraceRecord,
    frank_wolfe_expectation,
    offline_rascal,
    online_rascal,
    stochastic_rascal,
    trace_to_csv,
)
from .risk import empirical_cvar, empirical_var
from .scenarios import (
    generate_er_graph,
    load_edge_list,
    load_pool,
    pool_stream,
    pool_to_csv,
    fresh_stream,
    scenario_pool,
)
from ._util import fmt

ALGORITHMS = ("stochastic-rascal", "online-rascal", "rascal", "fw")
SWEEP_COLUMNS = ("algorithm", "axis", "value", "seed", "train_cvar", "holdout_cvar")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    graph: str = "er:50:0.08"       # 'er:<n>:<edge_prob>' or an edge-list path
    lam: float = 5.0                # mean propagation time
    p: float = 0.01                 # detection probability per unit energy
    alpha: float = 0.1
    budget: float = 5.0
    cap: float | None = None        # per-vertex energy cap; None means = budget
    pool_size: int = 1000
    holdout_size: int = 1000
    online_samples: int = 20000
    algorithm: str = "stochastic-rascal"
    steps: int = 50                 # greedy steps for the offline baselines
    batch_size: int | None = None
    delta: float | None = None
    fpl_rate: float | None = None
    ogd_rate: float | None = None
    u: float | None = None
    r: int | None = None            # portfolio copy count (library pipeline)
    q: int | None = None            # portfolio roundings per point
    stream: str = "pool"            # 'pool' (with replacement) or 'fresh'
    pool_file: str | None = None
    seed: int = 0
    out: str = "."

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.stream not in ("pool", "fresh"):
            raise ConfigError(f"stream must be 'pool' or 'fresh', got {self.stream!r}")
        for key in ("lam", "p", "alpha", "budget"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive")
        if self.alpha > 1:
            raise ConfigError("alpha must be in (0, 1]")
        for key in ("pool_size", "holdout_size", "online_samples", "steps"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be at least 1")
        for key in ("r", "q"):
            value = getattr(self, key)
            if value is not None and value < 1:
                raise ConfigError(f"{key} must be at least 1 when set")
        return self


_FIELD_TYPES = {f.name: f for f in fields(ExperimentConfig)}


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    data = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        unknown = set(data) - set(_FIELD_TYPES)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**data).validate()


def _resolve_graph(cfg: ExperimentConfig, rng):
    spec = cfg.graph
    if spec.startswith("er:"):
        try:
            _, n_s, p_s = spec.split(":")
            return generate_er_graph(int(n_s), float(p_s), rng)
        except ValueError as exc:
            raise ConfigError(f"bad generator spec {spec!r}, expected er:<n>:<p>") from exc
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"graph file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh)


@dataclass
class Instance:
    graph: object
    pool: list
    holdout: list
    objective: SensorObjective
    region: BudgetPolytope


def _build_instance(cfg: ExperimentConfig, budget=None) -> Instance:
    root = np.random.SeedSequence(cfg.seed)
    g_seed, pool_seed, hold_seed = root.spawn(3)
    graph = _resolve_graph(cfg, np.random.default_rng(g_seed))
    if cfg.pool_file is not None:
        path = Path(cfg.pool_file)
        if not path.exists():
            raise ConfigError(f"pool file not found: {path}")
        pool = load_pool(path)
    else:
        pool = scenario_pool(graph, cfg.lam, cfg.pool_size, np.random.default_rng(pool_seed))
    holdout = scenario_pool(graph, cfg.lam, cfg.holdout_size, np.random.default_rng(hold_seed))
    b = cfg.budget if budget is None else budget
    n = pool[0].n if pool else graph.n
    region = BudgetPolytope(n, b, b if cfg.cap is None else cfg.cap)
    return Instance(graph, pool, holdout, SensorObjective(cfg.p), region)


def _resolve_params(cfg: ExperimentConfig, inst: Instance, T: int) -> RunParams:
    alpha = cfg.alpha
    c_alpha = max(1.0, 1.0 / alpha - 1.0)
    B = cfg.batch_size if cfg.batch_size is not None else max(1, min(T, round(alpha * c_alpha * np.sqrt(T))))
    if B < 1 or B > T:
        raise ScheduleError(f"batch size {B} incompatible with horizon {T}")
    delta = cfg.delta if cfg.delta is not None else 1.0 / 32
    u = cfg.u if cfg.u is not None else T ** -0.25 / (1 + 1 / alpha)
    n = inst.region.n
    # Analytic gradient-norm bound for the normalized detection objective.
    g_bound = -np.log(1.0 - inst.objective.p) * np.sqrt(n)
    fpl = cfg.fpl_rate if cfg.fpl_rate is not None else alpha * inst.region.diameter() * n ** 0.25 * np.sqrt(B / T) / g_bound
    ogd = cfg.ogd_rate if cfg.ogd_rate is not None else 1.0 / (c_alpha * np.sqrt(B))
    return RunParams(horizon=T, batch_size=int(B), delta=delta, fpl_rate=float(fpl),
                     ogd_rate=float(ogd), smooth_u=float(u), alpha=alpha, seed=cfg.seed)


def _cvar_of_point(point, pool, objective, alpha) -> tuple[float, float]:
    vals = np.array([objective.value(point, z) for z in pool])
    return empirical_cvar(vals, alpha), float(np.mean(vals))


def _run_algorithm(cfg: ExperimentConfig, inst: Instance, algorithm: str, T: int,
                   run_seed=None):
    """Execute one algorithm; returns (point, trace records)."""
    seed = cfg.seed if run_seed is None else run_seed
    run_root = np.random.SeedSequence((seed, 1))
    stream_rng, alg_rng = (np.random.default_rng(s) for s in run_root.spawn(2))
    if algorithm in ("stochastic-rascal", "online-rascal"):
        params = _resolve_params(cfg, inst, T)
        if cfg.stream == "pool":
            stream = pool_stream(inst.pool, stream_rng)
        else:
            stream = fresh_stream(inst.graph, cfg.lam, stream_rng)
        if algorithm == "stochastic-rascal":
            res = stochastic_rascal(stream, inst.objective, inst.region, params,
                                    alg_rng, holdout=inst.holdout)
            return res.final.point, res.trace
        draws = list(itertools.islice(stream, params.num_batches * params.batch_size))
        sequence = [BoundObjective(inst.objective, z) for z in draws]
        res = online_rascal(sequence, inst.region, params, alg_rng)
        trace = []
        B = params.batch_size
        for b, decomp in enumerate(res.batch_points):
            hc, hm = _cvar_of_point(decomp.point, inst.holdout, inst.objective, cfg.alpha)
            trace.append(TraceRecord(b + 1, (b + 1) * B, float(res.taus[(b + 1) * B - 1]),
                                     hc, hm, res.batch_wallclock_ms[b]))
        return res.batch_points[-1].point, trace
    if algorithm == "rascal":
        u = cfg.u if cfg.u is not None else len(inst.pool) ** -0.25 / (1 + 1 / cfg.alpha)
        steps_log = []
        point = offline_rascal(inst.pool, inst.objective, inst.region, cfg.steps,
                               u, cfg.alpha, trajectory=steps_log)
    elif algorithm == "fw":
        steps_log = []
        point = frank_wolfe_expectation(inst.pool, inst.objective, inst.region,
                                        cfg.steps, trajectory=steps_log)
    else:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    trace = []
    for i, (x, tau, ms) in enumerate(steps_log):
        hc, hm = _cvar_of_point(x, inst.holdout, inst.objective, cfg.alpha)
        trace.append(TraceRecord(i + 1, len(inst.pool), tau, hc, hm, ms))
    return point, trace


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def allocation_to_csv(point) -> str:
    lines = ["vertex,allocation"]
    for v, x in enumerate(point):
        lines.append(f"{v},{fmt(x)}")
    return "\n".join(lines) + "\n"


def allocation_from_csv(text: str) -> np.ndarray:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0] != "vertex,allocation":
        raise ValueError("allocation CSV must start with 'vertex,allocation'")
    entries = {int(v): float(x) for v, x in (ln.split(",") for ln in lines[1:])}
    return np.array([entries[v] for v in range(len(entries))])


def cmd_generate(cfg: ExperimentConfig) -> int:
    root = np.random.SeedSequence(cfg.seed)
    g_seed, pool_seed = root.spawn(3)[:2]
    graph = _resolve_graph(cfg, np.random.default_rng(g_seed))
    pool = scenario_pool(graph, cfg.lam, cfg.pool_size, np.random.default_rng(pool_seed))
    out = Path(cfg.out) / "pool.csv"
    _write(out, pool_to_csv(pool))
    zmaxes = np.array([sc.z_max for sc in pool])
    qs = np.percentile(zmaxes, [0, 25, 50, 75, 100]) if len(pool) else np.zeros(5)
    print(f"graph: n={graph.n} m={graph.m}")
    print(f"pool: {len(pool)} scenarios -> {out}")
    print("z_max quantiles: " + " ".join(fmt(q) for q in qs))
    return 0


def cmd_run(cfg: ExperimentConfig, plot=False) -> int:
    inst = _build_instance(cfg)
    point, trace = _run_algorithm(cfg, inst, cfg.algorithm, cfg.online_samples)
    out = Path(cfg.out)
    _write(out / "trace.csv", trace_to_csv(trace))
    _write(out / "solution.csv", allocation_to_csv(point))
    train_c, train_m = _cvar_of_point(point, inst.pool, inst.objective, cfg.alpha)
    hold_c, hold_m = _cvar_of_point(point, inst.holdout, inst.objective, cfg.alpha)
    print(f"algorithm={cfg.algorithm} train_cvar={fmt(train_c)} train_mean={fmt(train_m)} "
          f"holdout_cvar={fmt(hold_c)} holdout_mean={fmt(hold_m)}")
    if plot:
        from .plotting import plot_trace
        plot_trace(trace, out / "trace.png", title=f"{cfg.algorithm}: holdout CVaR")
        print(f"figure -> {out / 'trace.png'}")
    return 0


def _sweep_cell(cfg_dict: dict, algorithm: str, axis: str, value: float, seed: int):
    cfg = ExperimentConfig(**cfg_dict).validate()
    if axis == "budget":
        inst = _build_instance(cfg, budget=value)
        T = cfg.online_samples
    else:
        inst = _build_instance(cfg)
        T = int(value)
    point, _ = _run_algorithm(cfg, inst, algorithm, T, run_seed=seed)
    train_c, _ = _cvar_of_point(point, inst.pool, inst.objective, cfg.alpha)
    hold_c, _ = _cvar_of_point(point, inst.holdout, inst.objective, cfg.alpha)
    return train_c, hold_c


def sweep_rows_to_csv(rows) -> str:
    lines = [",".join(SWEEP_COLUMNS)]
    for r in rows:
        lines.append(",".join([r["algorithm"], r["axis"], fmt(r["value"]), str(r["seed"]),
                               fmt(r["train_cvar"]), fmt(r["holdout_cvar"])]))
    return "\n".join(lines) + "\n"


def sweep_rows_from_csv(text: str):
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or tuple(lines[0].split(",")) != SWEEP_COLUMNS:
        raise ValueError("unrecognized sweep CSV header")
    rows = []
    for ln in lines[1:]:
        alg, axis, value, seed, train_c, hold_c = ln.split(",")
        rows.append(dict(algorithm=alg, axis=axis, value=float(value), seed=int(seed),
                         train_cvar=float(train_c), holdout_cvar=float(hold_c)))
    return rows


def cmd_sweep(cfg: ExperimentConfig, axis: str, values, algorithms, seeds,
              jobs=1, plot=False) -> int:
    if axis not in ("T", "budget"):
        raise ConfigError(f"sweep axis must be 'T' or 'budget', got {axis!r}")
    for alg in algorithms:
        if alg not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {alg!r}")
    cfg_dict = {f.name: getattr(cfg, f.name) for f in fields(ExperimentConfig)}
    offline = {"rascal", "fw"}
    # Offline baselines ignore both the horizon axis and the run seed, so one
    # computation per distinct (algorithm, instance) is shared across rows.
    cells = {}
    for alg in algorithms:
        for value in values:
            for seed in seeds:
                if alg in offline:
                    key = (alg, value if axis == "budget" else None, None)
                else:
                    key = (alg, value, seed)
                cells.setdefault(key, (alg, value, seed))
    keys = sorted(cells, key=lambda k: (str(k[0]), -1.0 if k[1] is None else float(k[1]), -1 if k[2] is None else k[2]))
    results = {}
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {key: pool.submit(_sweep_cell, cfg_dict, *_cell_args(cells[key], axis, cfg))
                       for key in keys}
            results = {key: fut.result() for key, fut in futures.items()}
    else:
        for key in keys:
            results[key] = _sweep_cell(cfg_dict, *_cell_args(cells[key], axis, cfg))
    rows = []
    for alg in algorithms:
        for value in values:
            for seed in seeds:
                if alg in offline:
                    key = (alg, value if axis == "budget" else None, None)
                else:
                    key = (alg, value, seed)
                train_c, hold_c = results[key]
                rows.append(dict(algorithm=alg, axis=axis, value=value, seed=seed,
                                 train_cvar=train_c, holdout_cvar=hold_c))
    out = Path(cfg.out) / "sweep.csv"
    _write(out, sweep_rows_to_csv(rows))
    print(f"{len(rows)} rows -> {out}")
    if plot:
        from .plotting import plot_sweep
        plot_sweep(rows, axis, Path(cfg.out) / "sweep.png")
        print(f"figure -> {Path(cfg.out) / 'sweep.png'}")
    return 0


def _cell_args(cell, axis, cfg):
    alg, value, seed = cell
    run_seed = cfg.seed if seed is None else seed
    run_value = value if value is not None else (cfg.budget if axis == "budget" else cfg.online_samples)
    return alg, axis, run_value, run_seed


def cmd_eval(solution_path: str, pool_path: str, alpha: float, p: float,
             unit_energy: float = 1.0) -> int:
    sol = Path(solution_path)
    if not sol.exists():
        raise ConfigError(f"solution file not found: {sol}")
    pool_p = Path(pool_path)
    if not pool_p.exists():
        raise ConfigError(f"pool file not found: {pool_p}")
    pool = load_pool(pool_p)
    obj = SensorObjective(p)
    text = sol.read_text(encoding="utf-8")
    header = text.splitlines()[0] if text else ""
    if header == "weight,set":
        portfolio = portfolio_from_csv(text)
        n = pool[0].n
        vals = []
        for z in pool:
            total = 0.0
            for s, w in portfolio.entries:
                x = np.zeros(n)
                x[sorted(s)] = unit_energy
                total += float(w) * sensor_value(x, z, obj)
            vals.append(total)
        vals = np.array(vals)
    elif header == "vertex,allocation":
        x = allocation_from_csv(text)
        vals = np.array([sensor_value(x, z, obj) for z in pool])
    else:
        raise ConfigError(f"unrecognized solution header in {sol}: {header!r}")
    print(f"cvar={fmt(empirical_cvar(vals, alpha))} var={fmt(empirical_var(vals, alpha))} "
          f"mean={fmt(np.mean(vals))} scenarios={len(vals)}")
    return 0


def cmd_plot(trace_path=None, sweep_path=None, out=None) -> int:
    from .plotting import plot_sweep, plot_trace

    if (trace_path is None) == (sweep_path is None):
        raise ConfigError("pass exactly one of --trace or --sweep")
    if trace_path is not None:
        src = Path(trace_path)
        if not src.exists():
            raise ConfigError(f"trace file not found: {src}")
        records = []
        lines = src.read_text(encoding="utf-8").strip().splitlines()
        for ln in lines[1:]:
            parts = ln.split(",")
            records.append(TraceRecord(int(parts[0]), int(parts[1]), float(parts[2]),
                                       float(parts[3]), float(parts[4]),
                                       float(parts[5]) if len(parts) > 5 else 0.0))
        dest = Path(out) if out else src.with_suffix(".png")
        plot_trace(records, dest)
    else:
        src = Path(sweep_path)
        if not src.exists():
            raise ConfigError(f"sweep file not found: {src}")
        rows = sweep_rows_from_csv(src.read_text(encoding="utf-8"))
        axis = rows[0]["axis"] if rows else "T"
        dest = Path(out) if out else src.with_suffix(".png")
        plot_sweep(rows, axis, dest)
    print(f"figure -> {dest}")
    return 0


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="flat JSON config file")
    parser.add_argument("--graph")
    parser.add_argument("--lam", type=float)
    parser.add_argument("--p", type=float)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--budget", type=float)
    parser.add_argument("--cap", type=float)
    parser.add_argument("--pool-size", type=int, dest="pool_size")
    parser.add_argument("--holdout-size", type=int, dest="holdout_size")
    parser.add_argument("--online-samples", type=int, dest="online_samples")
    parser.add_argument("--algorithm", choices=ALGORITHMS)
    parser.add_argument("--steps", type=int)
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--delta", type=float)
    parser.add_argument("--fpl-rate", type=float, dest="fpl_rate")
    parser.add_argument("--ogd-rate", type=float, dest="ogd_rate")
    parser.add_argument("--u", type=float)
    parser.add_argument("--r", type=int)
    parser.add_argument("--q", type=int)
    parser.add_argument("--stream", choices=("pool", "fresh"))
    parser.add_argument("--pool-file", dest="pool_file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")


def _config_from_args(args) -> ExperimentConfig:
    keys = set(_FIELD_TYPES) - {"config"}
    overrides = {k: getattr(args, k, None) for k in keys}
    return load_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvarmax",
                                     description="risk-averse allocation experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write a scenario pool CSV")
    _add_config_flags(p_gen)

    p_run = sub.add_parser("run", help="run one algorithm; write trace and solution")
    _add_config_flags(p_run)
    p_run.add_argument("--plot", action="store_true", help="render trace figure")

    p_sweep = sub.add_parser("sweep", help="grid of runs over T or budget")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=("T", "budget"))
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated axis values")
    p_sweep.add_argument("--algorithms", default="stochastic-rascal,rascal,fw",
                         help="comma-separated algorithm names")
    p_sweep.add_argument("--seeds", default="0", help="comma-separated run seeds")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--plot", action="store_true", help="render sweep figure")

    p_eval = sub.add_parser("eval", help="CVaR of a stored solution against a pool")
    p_eval.add_argument("--solution", required=True)
    p_eval.add_argument("--pool", required=True)
    p_eval.add_argument("--alpha", type=float, default=0.1)
    p_eval.add_argument("--p", type=float, default=0.01)
    p_eval.add_argument("--unit-energy", type=float, default=1.0, dest="unit_energy")

    p_plot = sub.add_parser("plot", help="render a stored trace or sweep CSV")
    p_plot.add_argument("--trace")
    p_plot.add_argument("--sweep")
    p_plot.add_argument("--out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            return cmd_generate(_config_from_args(args))
        if args.command == "run":
            return cmd_run(_config_from_args(args), plot=args.plot)
        if args.command == "sweep":
            cfg = _config_from_args(args)
            values = [float(v) for v in args.values.split(",") if v.strip()]
            algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
            return cmd_sweep(cfg, args.axis, values, algorithms, seeds,
                             jobs=args.jobs, plot=args.plot)
        if args.command == "eval":
            return cmd_eval(args.solution, args.pool, args.alpha, args.p, args.unit_energy)
        if args.command == "plot":
            return cmd_plot(args.trace, args.sweep, args.out)
        raise ConfigError(f"unknown command {args.command!r}")
    except ScheduleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
