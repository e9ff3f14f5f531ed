"""Command line harness for solving, simulating, and sweeping configs.

One executable with subcommands: solve-rp, simulate, hitting-time,
fluid, spectral, oracle-check, experiment. Every run is driven by a
JSON config file plus flags; all randomness flows from --seed. Exit
codes: 0 success, 2 invalid input, 3 computation failure; failures
print a one-line JSON error object to stderr.

Experiment sweeps write three files into --out: rows.csv with one row
per (n, policy, replication), summary.json with per-point means and
standard errors, and plot.csv aggregated for external plotters. Rows
are written in a fixed nested order and floats use repr round-trip
formatting, so reruns with the same master seed produce byte-identical
bodies.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ComputationError,
    ConvergenceError,
    DuplicateKeyError,
    ParseError,
    RangeError,
    ValidationError,
)
from .fluid import assemble_linear, fluid_trajectory, spectral_report
from .index import cost_pair, optimal_thresholds, whittle_index_table
from .model import NetworkConfig, load_config, validate_config
from .oracle import rvi_one_dim
from .relaxed import solve_rp
from .sim import (
    HITTING_CAP,
    POLICY_NAMES,
    PolicyKind,
    greedy_policy,
    hitting_time,
    make_initial_ages,
    rp_policy,
    simulate,
    uniform_policy,
    whittle_policy,
)

CSV_HEADER = "seed,n,policy,horizon,avg_age_per_user,c_rp,rel_gap,hitting_time"
PLOT_HEADER = ("n,policy,replications,avg_age_mean,avg_age_stderr,"
               "rel_gap_mean,rel_gap_stderr,hitting_time_mean,hitting_time_stderr")
INITIAL_KINDS = ("ones", "maxed", "star")
POOL_WORKERS = 4


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: base config rescaled over n_sweep, per policy and seed."""

    base: NetworkConfig
    n_sweep: tuple[int, ...]
    policies: tuple[str, ...]
    replications: int
    horizon: int
    seed: int
    out: str
    epsilon: float | None = None
    initial: str = "ones"


def _config_with_n(base: NetworkConfig, n: int) -> NetworkConfig:
    cfg = NetworkConfig(n=n, alpha=base.alpha, l=base.l, classes=base.classes)
    return validate_config(cfg)


def _policy_from_name(name: str, sol) -> PolicyKind:
    if name == "whittle":
        return whittle_policy()
    if name == "greedy_max_age":
        return greedy_policy()
    if name == "uniform_random":
        return uniform_policy()
    if name == "rp_threshold":
        return rp_policy(sol)
    raise RangeError(f"unknown policy {name!r}")


def _initial_ages(kind: str, cfg: NetworkConfig, sol) -> np.ndarray:
    if kind == "ones":
        return np.ones(cfg.n, dtype=np.int64)
    if kind == "maxed":
        return np.full(cfg.n, cfg.l, dtype=np.int64)
    if kind == "star":
        return make_initial_ages(sol.z_star, cfg)
    raise RangeError(f"unknown initial state kind {kind!r}")


def _initial_occupancy(kind: str, cfg: NetworkConfig, sol) -> np.ndarray:
    z = np.zeros((cfg.k, cfg.l))
    if kind == "ones":
        z[:, 0] = cfg.gamma_vector()
    elif kind == "maxed":
        z[:, -1] = cfg.gamma_vector()
    elif kind == "star":
        z = sol.z_star.z.copy()
    else:
        raise RangeError(f"unknown initial state kind {kind!r}")
    return z


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        # repr of the builtin float is the shortest round-trip form;
        # numpy scalars are coerced so their repr never leaks into CSV.
        return repr(float(value))
    return str(value)


def _mean_stderr(values) -> tuple[float | None, float | None]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    mean = float(np.mean(vals))
    if len(vals) < 2:
        return mean, 0.0
    return mean, float(np.std(vals, ddof=1) / np.sqrt(len(vals)))


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run the sweep and write rows.csv, summary.json, and plot.csv.

    Row order is deterministic: n ascending across the sweep, then
    policies in the given order, then replication index. Replications
    within a point run on a bounded worker pool; each replication r
    draws its generators from SeedSequence([seed, r]) so results do not
    depend on completion order. hitting_time is filled only on whittle
    rows and only when epsilon is set.
    """
    if spec.out is None:
        raise RangeError("experiment requires an output directory")
    if not spec.policies:
        raise RangeError("policy list is empty")
    for name in spec.policies:
        if name not in POLICY_NAMES:
            raise RangeError(f"unknown policy {name!r}")
    if not spec.n_sweep:
        raise RangeError("n sweep is empty")
    if spec.replications < 1:
        raise RangeError(f"replications must be >= 1, got {spec.replications}")
    if spec.epsilon is not None and spec.epsilon <= 0:
        raise RangeError(f"epsilon must be > 0, got {spec.epsilon}")
    if spec.initial not in INITIAL_KINDS:
        raise RangeError(f"unknown initial state kind {spec.initial!r}")
    configs = [_config_with_n(spec.base, n) for n in spec.n_sweep]

    rows = []
    points = []
    for n, cfg in zip(spec.n_sweep, configs):
        sol = solve_rp(cfg)
        init = _initial_ages(spec.initial, cfg, sol)
        for name in spec.policies:
            policy = _policy_from_name(name, sol)
            want_hit = spec.epsilon is not None and name == "whittle"

            def one(r: int):
                root = np.random.SeedSequence([spec.seed, r])
                sim_stream, hit_stream = root.spawn(2)
                rec = simulate(cfg, policy, spec.horizon, seed=r,
                               initial=init, stream=sim_stream)
                hit = None
                if want_hit:
                    hit = hitting_time(cfg, init, spec.epsilon, seed=r,
                                       sol=sol, stream=hit_stream)
                return rec, hit

            with ThreadPoolExecutor(max_workers=POOL_WORKERS) as pool:
                results = list(pool.map(one, range(spec.replications)))
            ages = [rec.per_user_avg_age for rec, _ in results]
            hits = [hit for _, hit in results]
            for r, (rec, hit) in enumerate(results):
                gap = (rec.per_user_avg_age - sol.c_rp) / sol.c_rp
                rows.append((r, n, name, spec.horizon, rec.per_user_avg_age,
                             sol.c_rp, gap, hit))
            age_mean, age_se = _mean_stderr(ages)
            gap_mean, gap_se = _mean_stderr(
                [(a - sol.c_rp) / sol.c_rp for a in ages]
            )
            hit_mean, hit_se = _mean_stderr(
                [float(h) for h in hits if h is not None] if want_hit else []
            )
            points.append({
                "n": n,
                "policy": name,
                "replications": spec.replications,
                "c_rp": sol.c_rp,
                "avg_age_mean": age_mean,
                "avg_age_stderr": age_se,
                "rel_gap_mean": gap_mean,
                "rel_gap_stderr": gap_se,
                "hitting_time_mean": hit_mean,
                "hitting_time_stderr": hit_se,
                "hitting_time_unresolved": sum(h is None for h in hits)
                if want_hit else 0,
            })

    out_dir = Path(spec.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows_path = out_dir / "rows.csv"
    body = "\n".join(
        ",".join(_fmt(v) for v in row) for row in rows
    )
    rows_path.write_text(CSV_HEADER + "\n" + body + "\n")

    summary = {
        "n_sweep": list(spec.n_sweep),
        "policies": list(spec.policies),
        "replications": spec.replications,
        "horizon": spec.horizon,
        "seed": spec.seed,
        "epsilon": spec.epsilon,
        "initial": spec.initial,
        "points": points,
    }
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    plot_path = emit_plot_data(rows_path, out_dir / "plot.csv")
    return {
        "rows": str(rows_path),
        "summary": str(summary_path),
        "plot": str(plot_path),
    }


def emit_plot_data(csv_path, out_path=None) -> Path:
    """Aggregate a rows.csv into per-(n, policy) means and stderrs.

    Output rows are sorted by (n, policy). Raises ParseError on a
    malformed file and DuplicateKeyError when the same (n, policy, seed)
    appears twice.
    """
    csv_path = Path(csv_path)
    if out_path is None:
        out_path = csv_path.with_name(csv_path.stem + "_plot.csv")
    try:
        text = csv_path.read_text()
    except OSError as err:
        raise ParseError(f"cannot read {csv_path}: {err}") from err
    lines = text.splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ParseError(f"bad header in {csv_path}: expected {CSV_HEADER!r}")

    groups: dict[tuple[int, str], dict[str, list]] = {}
    seen = set()
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row:
            continue
        if len(row) != 8:
            raise ParseError(f"{csv_path}:{lineno}: expected 8 fields, got {len(row)}")
        try:
            seed = int(row[0])
            n = int(row[1])
            name = row[2]
            age = float(row[4]) if row[4] else None
            gap = float(row[6]) if row[6] else None
            hit = float(row[7]) if row[7] else None
        except ValueError as err:
            raise ParseError(f"{csv_path}:{lineno}: {err}") from err
        key = (n, name, seed)
        if key in seen:
            raise DuplicateKeyError(f"{csv_path}:{lineno}: duplicate row key {key}")
        seen.add(key)
        bucket = groups.setdefault((n, name), {"age": [], "gap": [], "hit": [], "rows": 0})
        bucket["age"].append(age)
        bucket["gap"].append(gap)
        bucket["hit"].append(hit)
        bucket["rows"] += 1

    out_lines = [PLOT_HEADER]
    for (n, name), bucket in sorted(groups.items()):
        age_mean, age_se = _mean_stderr(bucket["age"])
        gap_mean, gap_se = _mean_stderr(bucket["gap"])
        hit_mean, hit_se = _mean_stderr(bucket["hit"])
        out_lines.append(",".join([
            str(n), name, str(bucket["rows"]),
            _fmt(age_mean), _fmt(age_se),
            _fmt(gap_mean), _fmt(gap_se),
            _fmt(hit_mean), _fmt(hit_se),
        ]))
    out_path = Path(out_path)
    out_path.write_text("\n".join(out_lines) + "\n")
    return out_path


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _solution_payload(sol) -> dict:
    return {
        "w_star": sol.w_star,
        "critical_class": sol.m,
        "theta_star": sol.theta_star,
        "thresholds": [list(pair) for pair in sol.thresholds],
        "effective_thresholds": list(sol.l_star),
        "c_rp": sol.c_rp,
        "z_star": [[float(v) for v in row] for row in sol.z_star.z],
    }


def _cmd_solve_rp(args) -> int:
    cfg = load_config(args.config)
    sol = solve_rp(cfg)
    _emit(_solution_payload(sol), args.out)
    return 0


def _write_rows(rows, out: str | None) -> None:
    body = "\n".join(",".join(_fmt(v) for v in row) for row in rows)
    text = CSV_HEADER + "\n" + body + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    sol = solve_rp(cfg)
    init = _initial_ages(args.initial, cfg, sol)
    names = args.policies.split(",")
    rows = []
    for name in names:
        policy = _policy_from_name(name.strip(), sol)
        for r in range(args.replications):
            stream = np.random.SeedSequence([args.seed, r])
            rec = simulate(cfg, policy, args.horizon, seed=r, initial=init,
                           stream=stream)
            gap = (rec.per_user_avg_age - sol.c_rp) / sol.c_rp
            rows.append((r, cfg.n, name.strip(), args.horizon,
                         rec.per_user_avg_age, sol.c_rp, gap, None))
    _write_rows(rows, args.out)
    return 0


def _cmd_hitting_time(args) -> int:
    cfg = load_config(args.config)
    sol = solve_rp(cfg)
    init = _initial_ages(args.initial, cfg, sol)
    rows = []
    for r in range(args.replications):
        stream = np.random.SeedSequence([args.seed, r])
        hit = hitting_time(cfg, init, args.epsilon, seed=r, cap=args.cap,
                           sol=sol, stream=stream)
        rows.append((r, cfg.n, "whittle", args.cap, None, sol.c_rp, None, hit))
    _write_rows(rows, args.out)
    return 0


def _cmd_fluid(args) -> int:
    cfg = load_config(args.config)
    sol = solve_rp(cfg)
    z0 = _initial_occupancy(args.initial, cfg, sol)
    traj = fluid_trajectory(z0, args.steps, cfg, sol)
    payload = {
        "steps": args.steps,
        "converged": traj.converged,
        "contraction": traj.contraction,
        "final_distance": float(traj.distances[-1]),
        "distances": [float(d) for d in traj.distances],
        "in_region": [bool(b) for b in traj.in_region],
    }
    _emit(payload, args.out)
    return 0


def _cmd_spectral(args) -> int:
    cfg = load_config(args.config)
    sol = solve_rp(cfg)
    report = spectral_report(assemble_linear(cfg, sol))
    report["stable"] = report["rho"] < 1.0
    _emit(report, args.out)
    return 0


def _cmd_oracle_check(args) -> int:
    """Cross-check closed-form costs and thresholds against value iteration."""
    cfg = load_config(args.config)
    worst = 0.0
    checked = 0
    per_class = []
    for k, spec_k in enumerate(cfg.classes):
        table = whittle_index_table(np.array([spec_k.p]), cfg.l)[0]
        grid = sorted({0.0, *table, *(w + 0.5 for w in table[:-1])})
        class_worst = 0.0
        for w in grid:
            res = rvi_one_dim(spec_k.p, cfg.l, float(w))
            l1, l2 = optimal_thresholds(float(w), spec_k.p, cfg.l)
            if res.threshold not in (l1, l2):
                raise ConvergenceError(
                    f"class {k}, w={w}: threshold {res.threshold} not in "
                    f"{{{l1}, {l2}}}"
                )
            best = min(
                cost_pair(n, float(w), spec_k.p, cfg.l).total
                for n in range(1, cfg.l + 2)
            )
            class_worst = max(class_worst, abs(res.avg_cost - best))
            checked += 1
        worst = max(worst, class_worst)
        per_class.append({"class": k, "p": spec_k.p,
                          "max_cost_error": class_worst})
    payload = {
        "grid_points": checked,
        "max_cost_error": worst,
        "per_class": per_class,
        "ok": bool(worst < 1e-6),
    }
    if not payload["ok"]:
        raise ConvergenceError(f"oracle disagreement {worst:.3e} exceeds 1e-6")
    _emit(payload, args.out)
    return 0


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as err:
        raise ParseError(f"bad integer list {text!r}") from err


def _u64(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"seed must be >= 0, got {value}")
    return value


def _cmd_experiment(args) -> int:
    if not args.out:
        raise RangeError("experiment requires --out, a directory for result files")
    spec = ExperimentSpec(
        base=load_config(args.config),
        n_sweep=_parse_int_list(args.n_sweep),
        policies=tuple(p.strip() for p in args.policies.split(",") if p.strip()),
        replications=args.replications,
        horizon=args.horizon,
        seed=args.seed,
        out=args.out,
        epsilon=args.epsilon,
        initial=args.initial,
    )
    paths = run_experiment(spec)
    _emit(paths, None)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoisched",
        description="Age-minimizing scheduling: relaxed optimum, fluid "
                    "stability, and Monte Carlo experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.set_defaults(func=func)
        return p

    add("solve-rp", _cmd_solve_rp, "solve the relaxed problem")

    p = add("simulate", _cmd_simulate, "run seeded policy simulations")
    p.add_argument("--policies", default="whittle",
                   help="comma-separated policy names")
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--initial", choices=INITIAL_KINDS, default="ones")

    p = add("hitting-time", _cmd_hitting_time,
            "measure first entry into the epsilon ball around z_star")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--initial", choices=INITIAL_KINDS, default="ones")
    p.add_argument("--cap", type=int, default=HITTING_CAP,
                   help="give up after this many slots")

    p = add("fluid", _cmd_fluid, "iterate the fluid map toward z_star")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--initial", choices=INITIAL_KINDS, default="ones")

    add("spectral", _cmd_spectral, "spectral certificate of the linear region")

    add("oracle-check", _cmd_oracle_check,
        "closed forms vs value-iteration ground truth")

    p = add("experiment", _cmd_experiment, "sweep n and policies, write CSVs")
    p.add_argument("--n-sweep", required=True, help="comma-separated n values")
    p.add_argument("--policies", default="whittle")
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--replications", type=int, default=5)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--initial", choices=INITIAL_KINDS, default="ones")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as err:
        sys.stderr.write(json.dumps(
            {"error": type(err).__name__, "message": str(err)}
        ) + "\n")
        return 2
    except ComputationError as err:
        sys.stderr.write(json.dumps(
            {"error": type(err).__name__, "message": str(err)}
        ) + "\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
