"""Command-line driver: scenario configs in, plot-ready CSVs out.

Exit codes: 0 success (converged / feasible), 1 configuration or I/O error,
2 diverged / infeasible / bracket failure, 3 iteration cap reached.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import beta_fit, gap_estimate, gap_exact, sample_siso_mmse, sinr_approx_rates
from .balancing import BalanceOptions, balance
from .bc_model import avg_mse_all, avg_rates, with_mmse_receivers
from .channel import ChannelModel, build_ensemble
from .errors import BracketFailure, Diverged, MaxIterations, MisoQosError
from .feasibility import assess_feasibility
from .numerics import SeededRng, from_db, to_db
from .power_min import QosTargets, SolverOptions, solve

__all__ = ["ConfigError", "ScenarioConfig", "RunRecord", "load_config", "main"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_IO, EXIT_FAIL, EXIT_MAXITER = 0, 1, 2, 3


class ConfigError(MisoQosError, ValueError):
    pass


def fmt(x) -> str:
    """Round-trip exact float text (17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


# --------------------------------------------------------------------------- config

def _complex(v, what):
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{what}: expected a number or a [re, im] pair, got {v!r}")


def _complex_array(data, shape, what):
    try:
        flat = [_complex(v, what) for v in _flatten(data, len(shape))]
    except TypeError:
        raise ConfigError(f"{what}: malformed nested list") from None
    if len(flat) != int(np.prod(shape)):
        raise ConfigError(f"{what}: expected shape {shape}")
    return np.array(flat, dtype=complex).reshape(shape)


def _flatten(data, depth):
    if depth == 0:
        return [data]
    if not isinstance(data, list):
        raise TypeError
    out = []
    for item in data:
        out.extend(_flatten(item, depth - 1))
    return out


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Validated scenario; ``raw`` keeps the parsed JSON for hashing."""

    K: int
    N: int
    M: int
    seed: int
    noise_vars: np.ndarray
    means: np.ndarray | None
    channel_seed: int | None
    error_covs: np.ndarray
    targets: QosTargets
    solver: SolverOptions
    balance: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _count(raw, key, minimum):
    v = raw.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise ConfigError(f"'{key}' must be an integer >= {minimum}")
    return v


def parse_config(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    K, N, M = _count(raw, "K", 1), _count(raw, "N", 1), _count(raw, "M", 1)
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("'seed' must be a non-negative integer")

    noise = raw.get("noise_vars", 1.0)
    noise = np.full(K, float(noise)) if isinstance(noise, (int, float)) else np.asarray(noise, float)
    if noise.shape != (K,) or np.any(noise <= 0):
        raise ConfigError("'noise_vars' must be a positive number or a list of K positive numbers")

    channel = raw.get("channel", {"random": {}})
    means = channel_seed = None
    if not isinstance(channel, dict) or len(channel) != 1:
        raise ConfigError("'channel' must contain exactly one of 'means' or 'random'")
    if "means" in channel:
        means = _complex_array(channel["means"], (K, N), "channel.means")
    elif "random" in channel:
        channel_seed = (channel["random"] or {}).get("seed")
        if channel_seed is not None and (not isinstance(channel_seed, int) or channel_seed < 0):
            raise ConfigError("channel.random.seed must be a non-negative integer")
    else:
        raise ConfigError("'channel' must contain 'means' or 'random'")

    err = raw.get("error_cov", {"identity_scale": 1.0})
    if not isinstance(err, dict) or len(err) != 1:
        raise ConfigError("'error_cov' must contain exactly one of 'identity_scale' or 'matrices'")
    if "identity_scale" in err:
        scale = err["identity_scale"]
        if not isinstance(scale, (int, float)) or scale < 0:
            raise ConfigError("error_cov.identity_scale must be non-negative")
        covs = np.broadcast_to(float(scale) * np.eye(N), (K, N, N)).astype(complex)
    elif "matrices" in err:
        covs = _complex_array(err["matrices"], (K, N, N), "error_cov.matrices")
    else:
        raise ConfigError("'error_cov' must contain 'identity_scale' or 'matrices'")

    tg = raw.get("targets")
    if not isinstance(tg, dict) or len(tg) != 1 or not ({"rates", "mmse"} & set(tg)):
        raise ConfigError("'targets' must contain exactly one of 'rates' or 'mmse'")
    values = tg.get("rates", tg.get("mmse"))
    if not isinstance(values, list) or len(values) != K:
        raise ConfigError(f"targets must list {K} values")
    try:
        targets = QosTargets(values) if "rates" in tg else QosTargets.from_mmse(values)
    except MisoQosError as exc:
        raise ConfigError(str(exc)) from None

    s = raw.get("solver", {})
    allowed = {"tolerance", "max_iterations", "power_cap", "init_seed", "growth_window"}
    if not isinstance(s, dict) or set(s) - allowed:
        raise ConfigError(f"'solver' accepts only {sorted(allowed)}")
    try:
        solver = SolverOptions(**{"init_seed": seed, **s})
    except (MisoQosError, TypeError) as exc:
        raise ConfigError(f"solver: {exc}") from None

    b = raw.get("balance", {})
    allowed = {"ptx_db", "sigma_low", "sigma_high", "tolerance", "inner_tolerance"}
    if not isinstance(b, dict) or set(b) - allowed:
        raise ConfigError(f"'balance' accepts only {sorted(allowed)}")

    unknown = set(raw) - {"K", "N", "M", "seed", "noise_vars", "channel", "error_cov",
                          "targets", "solver", "balance", "description"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        ChannelModel(means if means is not None else np.zeros((K, N)), covs, noise)
    except MisoQosError as exc:
        raise ConfigError(str(exc)) from None
    return ScenarioConfig(K, N, M, seed, noise, means, channel_seed, covs, targets, solver, b, raw)


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(raw)


def build_scenario(cfg: ScenarioConfig, seed=None, ensemble_seed=None):
    """Channel model and ensemble for a config; ``seed`` overrides ``cfg.seed``."""
    seed = cfg.seed if seed is None else seed
    if cfg.means is not None:
        means = cfg.means
    else:
        ch_seed = seed if cfg.channel_seed is None else cfg.channel_seed
        means = ChannelModel.random(cfg.K, cfg.N, SeededRng(ch_seed)).means
    model = ChannelModel(means, cfg.error_covs, cfg.noise_vars)
    ens = build_ensemble(model, cfg.M, SeededRng(seed if ensemble_seed is None else ensemble_seed))
    return model, ens


# --------------------------------------------------------------------------- outputs

@dataclass
class RunRecord:
    command: str
    config_digest: str
    seed: int
    status: str
    outputs: list
    timestamp: int | None = None

    def write(self, path: Path):
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        self.timestamp = int(epoch) if epoch and epoch.isdigit() else None
        text = json.dumps(self.__dict__, sort_keys=True, indent=2) + "\n"
        path.write_text(text, encoding="utf-8", newline="\n")


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _write_trajectory(path, ens, trajectory):
    rows = []
    for rec in trajectory.records:
        approx = sinr_approx_rates(rec.precoders, ens)
        for k in range(ens.K):
            rows.append((rec.iteration, k + 1, rec.mmse[k], rec.rate_mc[k], approx[k],
                         rec.xi[k], rec.total_power_db))
    _write_csv(path, ["iter", "user", "mmse", "rate_mc", "rate_sinr_approx", "xi", "total_power_db"],
               rows)


def _write_filters(path, precoders):
    rows = [(k + 1, n + 1, precoders[k, n].real, precoders[k, n].imag)
            for k in range(precoders.shape[0]) for n in range(precoders.shape[1])]
    _write_csv(path, ["user", "antenna", "re", "im"], rows)


def _summary_rows(ens, targets, result, status, feas, extra=()):
    rows = [("status", "", status), ("iterations", "", result.iterations if result else 0)]
    if result is not None:
        P = result.filters.precoders
        mmse = avg_mse_all(ens, result.filters)
        rates = avg_rates(ens, P)
        approx = sinr_approx_rates(P, ens)
        power = result.total_power
        rows.append(("total_power", "", power))
        rows.append(("total_power_db", "", to_db(power) if power > 0 else -math.inf))
        for k in range(ens.K):
            rows += [("mmse", k + 1, mmse[k]), ("mmse_target", k + 1, targets.mmse_targets[k]),
                     ("rate_mc", k + 1, rates[k]), ("rate_target", k + 1, targets.rates[k]),
                     ("rate_sinr_approx", k + 1, approx[k]), ("xi", k + 1, result.xi[k])]
    rows += [("feasibility_trace_bound", "", feas.trace_bound),
             ("feasibility_slack", "", feas.slack),
             ("feasibility_feasible", "", feas.feasible),
             ("feasibility_method", "", feas.method)]
    rows += list(extra)
    return rows


def _run_solver(ens, targets, opts):
    try:
        res = solve(ens, targets, opts)
        return res, "converged", EXIT_OK
    except Diverged as exc:
        log.error("%s", exc)
        return exc.result, "diverged", EXIT_FAIL
    except MaxIterations as exc:
        log.error("%s", exc)
        return exc.result, "max_iterations", EXIT_MAXITER


def _out_dir(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


# --------------------------------------------------------------------------- commands

def run_power_min(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out)
    seed = cfg.seed if args.seed is None else args.seed
    overrides = {}
    if args.tol is not None:
        overrides["tolerance"] = args.tol
    if args.max_iters is not None:
        overrides["max_iterations"] = args.max_iters
    if args.seed is not None and "init_seed" not in cfg.raw.get("solver", {}):
        overrides["init_seed"] = seed
    opts = SolverOptions(**{**cfg.solver.__dict__, **overrides})
    _, ens = build_scenario(cfg, seed)
    feas = assess_feasibility(ens, cfg.targets)
    result, status, code = _run_solver(ens, cfg.targets, opts)

    extra = []
    if args.eval_ensemble_seed is not None and result is not None:
        _, eval_ens = build_scenario(cfg, seed, ensemble_seed=args.eval_ensemble_seed)
        P = result.filters.precoders
        eval_mmse = avg_mse_all(eval_ens, with_mmse_receivers(eval_ens, P))
        eval_rate = avg_rates(eval_ens, P)
        for k in range(cfg.K):
            extra += [("eval_mmse", k + 1, eval_mmse[k]), ("eval_rate_mc", k + 1, eval_rate[k])]

    outputs = ["summary.csv"]
    _write_csv(out / "summary.csv", ["quantity", "user", "value"],
               _summary_rows(ens, cfg.targets, result, status, feas, extra))
    if result is not None:
        _write_trajectory(out / "trajectory.csv", ens, result.trajectory)
        _write_filters(out / "filters.csv", result.filters.precoders)
        outputs += ["trajectory.csv", "filters.csv"]
    RunRecord("power-min", cfg.digest, seed, status, sorted(outputs)).write(out / "run.json")
    print(f"power-min: {status}", file=sys.stderr)
    return code


def run_balance(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out)
    ptx_db = args.ptx_db if args.ptx_db is not None else cfg.balance.get("ptx_db")
    if ptx_db is None:
        raise ConfigError("no power budget: give --ptx-db or balance.ptx_db")
    b = cfg.balance
    solver = SolverOptions(**{**cfg.solver.__dict__,
                              "tolerance": b.get("inner_tolerance", BalanceOptions().solver.tolerance)})
    try:
        opts = BalanceOptions(tolerance=b.get("tolerance", 1e-2), sigma_low=b.get("sigma_low"),
                              sigma_high=b.get("sigma_high"), solver=solver)
    except MisoQosError as exc:
        raise ConfigError(f"balance: {exc}") from None
    _, ens = build_scenario(cfg)
    P_tx = from_db(ptx_db)
    try:
        res = balance(ens, cfg.targets.rates, P_tx, opts)
    except BracketFailure as exc:
        log.error("%s", exc)
        RunRecord("balance", cfg.digest, cfg.seed, "bracket_failure", []).write(out / "run.json")
        print("balance: bracket_failure", file=sys.stderr)
        return EXIT_FAIL

    st = res.state
    _write_csv(out / "balance.csv",
               ["iter", "sigma_low", "sigma_high", "candidate", "total_power_db"],
               [(s.iteration, s.sigma_low, s.sigma_high, s.candidate, s.total_power_db)
                for s in st.steps])
    status = "converged" if st.converged else "max_iterations"
    targets = QosTargets(res.sigma * cfg.targets.rates)
    feas = assess_feasibility(ens, targets)
    extra = [("sigma", "", res.sigma), ("sigma_low", "", st.sigma_low),
             ("sigma_high", "", st.sigma_high), ("sigma_gap", "", st.width),
             ("ptx", "", P_tx), ("bisections", "", len(st.steps))]
    _write_csv(out / "summary.csv", ["quantity", "user", "value"],
               _summary_rows(ens, targets, res.solution, status, feas, extra))
    _write_filters(out / "filters.csv", res.filters.precoders)
    RunRecord("balance", cfg.digest, cfg.seed, status,
              ["balance.csv", "filters.csv", "summary.csv"]).write(out / "run.json")
    print(f"balance: sigma = {res.sigma:.6g} ({status})", file=sys.stderr)
    return EXIT_OK if st.converged else EXIT_MAXITER


def run_feasibility(args) -> int:
    cfg = load_config(args.config)
    _, ens = build_scenario(cfg)
    mac = None
    if args.tau_from_solver:
        result, _, _ = _run_solver(ens, cfg.targets, cfg.solver)
        mac = result.mac if result is not None else None
    rep = assess_feasibility(ens, cfg.targets, mac)
    record = {"K": cfg.K, "sum_mmse_targets": float(cfg.targets.mmse_targets.sum()),
              "tau": "solver" if mac is not None else "ones", **rep.as_dict()}
    print(json.dumps(record, sort_keys=True))
    return EXIT_OK if rep.feasible else EXIT_FAIL


def run_gap(args) -> int:
    if args.alpha is not None or args.beta is not None:
        if args.alpha is None or args.beta is None:
            raise ConfigError("--alpha and --beta go together")
        a, b = args.alpha, args.beta
        record = {"alpha": a, "beta": b}
    else:
        if args.p2 is None or args.sigma2 is None:
            raise ConfigError("give --alpha/--beta or --p2/--sigma2 [--count --seed]")
        count = int(float(args.count))
        samples = sample_siso_mmse(args.p2, args.sigma2, count, SeededRng(args.seed))
        fit = beta_fit(samples)
        a, b = fit.alpha, fit.beta
        record = {"alpha": a, "beta": b, "count": count, "p2": args.p2, "sigma2": args.sigma2,
                  "seed": args.seed, "mean_mmse": float(samples.mean()),
                  "rate_mc": float(np.mean(-np.log2(samples)))}
    record["gap_estimate"] = gap_estimate(a, b)
    record["gap_exact"] = gap_exact(a, b)
    print(json.dumps(record, sort_keys=True))
    return EXIT_OK


def run_compare_sinr(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out)
    _, ens = build_scenario(cfg)
    result, status, code = _run_solver(ens, cfg.targets, cfg.solver)
    if result is None:
        return code
    P = result.filters.precoders
    mc = avg_rates(ens, P)
    approx = sinr_approx_rates(P, ens)
    _write_csv(out / "sinr_comparison.csv",
               ["user", "rate_target", "rate_mc", "rate_sinr_approx", "difference"],
               [(k + 1, cfg.targets.rates[k], mc[k], approx[k], approx[k] - mc[k])
                for k in range(cfg.K)])
    RunRecord("compare-sinr", cfg.digest, cfg.seed, status,
              ["sinr_comparison.csv"]).write(out / "run.json")
    return code


# --------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="misoqos", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    pm = sub.add_parser("power-min", help="minimize power under rate targets")
    pm.add_argument("--config", required=True)
    pm.add_argument("--out", required=True)
    pm.add_argument("--seed", type=int)
    pm.add_argument("--tol", type=float)
    pm.add_argument("--max-iters", type=int)
    pm.add_argument("--eval-ensemble-seed", type=int,
                    help="also evaluate the final precoders on an independent ensemble")
    pm.set_defaults(func=run_power_min)

    bl = sub.add_parser("balance", help="maximize the common rate scaling under a power budget")
    bl.add_argument("--config", required=True)
    bl.add_argument("--out", required=True)
    bl.add_argument("--ptx-db", type=float)
    bl.set_defaults(func=run_balance)

    fe = sub.add_parser("feasibility", help="test whether the MMSE targets are achievable")
    fe.add_argument("--config", required=True)
    fe.add_argument("--tau-from-solver", action="store_true",
                    help="use the solver's final precoders instead of tau = 1")
    fe.set_defaults(func=run_feasibility)

    gp = sub.add_parser("gap", help="beta-model gap between average rate and -log2(E[MMSE])")
    gp.add_argument("--alpha", type=float)
    gp.add_argument("--beta", type=float)
    gp.add_argument("--p2", type=float)
    gp.add_argument("--sigma2", type=float)
    gp.add_argument("--count", default="1e6")
    gp.add_argument("--seed", type=int, default=0)
    gp.set_defaults(func=run_gap)

    cs = sub.add_parser("compare-sinr", help="average rates vs the separate-expectation SINR")
    cs.add_argument("--config", required=True)
    cs.add_argument("--out", required=True)
    cs.set_defaults(func=run_compare_sinr)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MisoQosError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
