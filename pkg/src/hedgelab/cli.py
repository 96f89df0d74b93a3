"""Command-line front end.

Subcommands: simulate, hedge, train, evaluate, table, surface, trace.
Every flag mirrors a key of the JSON config schema (see README); --config
loads a JSON file and explicit flags override it. Exit codes: 0 success,
2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import harness
from . import neuralnet as nn
from .accounting import compute_pnl, pnl_to_csv, summary_to_json
from .config import (COST_REGIMES, NET_CHOICES, OBJECTIVES, SCENARIO_MODELS,
                     STRATEGIES, ExperimentConfig)
from .errors import ConfigError, DomainError, HedgeLabError, TrainingError
from .simulator import sample_scenarios, scenarios_to_csv
from .strategies import delta_hedge, gamma_hedge, schedule_to_csv
from .training import TrainedPolicy, derive_seed, telemetry_to_csv, train


def _add_schema_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--objective", choices=OBJECTIVES)
    p.add_argument("--cost-regime", dest="cost_regime", choices=tuple(COST_REGIMES))
    p.add_argument("--scenario-model", dest="scenario_model",
                   choices=SCENARIO_MODELS + ("auto",))
    p.add_argument("--rate", type=float)
    p.add_argument("--pricing-vol", dest="pricing_vol", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--hedged-strike", dest="hedged_strike", type=float)
    p.add_argument("--second-strike", dest="second_strike", type=float)
    p.add_argument("--option-maturity", dest="option_maturity", type=float)
    p.add_argument("--spot-lo", dest="spot_lo", type=float)
    p.add_argument("--spot-hi", dest="spot_hi", type=float)
    p.add_argument("--fixed-sigma", dest="fixed_sigma", type=float)
    p.add_argument("--fixed-mu", dest="fixed_mu", type=float)
    p.add_argument("--paths", dest="eval_paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--net", dest="net_variant", choices=NET_CHOICES)
    p.add_argument("--sample-size", dest="sample_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--out-dir", default=".", help="output directory")


def _load_config(args) -> ExperimentConfig:
    if args.config:
        try:
            with open(args.config) as f:
                cfg = ExperimentConfig.from_json(f)
        except OSError as err:
            raise ConfigError(f"cannot read config file: {err}") from None
    else:
        cfg = ExperimentConfig()
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    overrides = {k: v for k, v in vars(args).items() if k in names and v is not None}
    return cfg.replace(**overrides) if overrides else cfg


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _eval_seed(cfg: ExperimentConfig) -> int:
    # all evaluation commands of one objective share this sample
    return derive_seed(cfg.seed, f"eval-{cfg.objective}")


def _load_policy(cfg: ExperimentConfig, checkpoint: str) -> TrainedPolicy:
    try:
        with open(checkpoint) as f:
            params, spec, _, meta = nn.load_checkpoint(f)
    except OSError as err:
        raise ConfigError(f"cannot read checkpoint: {err}") from None
    tc = cfg.train_config()
    if spec != tc.net:
        raise ConfigError("checkpoint architecture does not match the config "
                          f"({spec} vs {tc.net})")
    init = meta.get("init") or {}
    return TrainedPolicy(params=params, spec=spec, config=tc, loss_curve=[],
                         epoch_stats=[], initial_loss=float("nan"),
                         init_seed=init.get("seed", 0))


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    seed = _eval_seed(cfg)
    scen = sample_scenarios(cfg.distribution(), cfg.grid(), cfg.eval_paths, seed)
    path = _out(args, "scenarios.csv")
    with harness.atomic_text(path) as f:
        scenarios_to_csv(scen, f, config_hash=cfg.config_hash())
    print(f"wrote {path} ({scen.count} paths, seed {seed})")
    return 0


def cmd_hedge(args) -> int:
    cfg = _load_config(args)
    if cfg.strategy not in harness.CLASSICAL:
        raise ConfigError("hedge runs the classical strategies; "
                          "use --strategy delta or gamma")
    seed = _eval_seed(cfg)
    dist, grid = cfg.distribution(), cfg.grid()
    panel, mkt, costs = cfg.panel(), cfg.market(), cfg.costs()
    hedge = delta_hedge if cfg.strategy == "delta" else gamma_hedge
    schedule_path = _out(args, "schedule.csv")
    reports = []
    with harness.atomic_text(schedule_path) as f:
        for lo in range(0, cfg.eval_paths, harness.CHUNK_PATHS):
            hi = min(lo + harness.CHUNK_PATHS, cfg.eval_paths)
            scen = sample_scenarios(dist, grid, hi - lo, seed, first_path=lo)
            schedule = hedge(scen, panel, mkt)
            schedule_to_csv(schedule, scen, f, config_hash=cfg.config_hash(),
                            header=(lo == 0))
            reports.append(compute_pnl(schedule, scen, panel, mkt, costs))
    report = harness.merge_reports(reports)
    pnl_path = _out(args, "pnl.csv")
    with harness.atomic_text(pnl_path) as f:
        pnl_to_csv(report, f, config_hash=cfg.config_hash(), seed=seed)
    summary_path = _out(args, "summary.json")
    with harness.atomic_text(summary_path) as f:
        summary_to_json(report, f, config_hash=cfg.config_hash(), seed=seed)
    print(f"wrote {schedule_path}, {pnl_path}, {summary_path}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    if not cfg.strategy.startswith("deep"):
        raise ConfigError("train needs --strategy deep-1 or deep-2")
    def progress(epoch, stats):
        print(f"epoch {epoch}: mean {stats.mean_loss:.6g} max {stats.max_loss:.6g} "
              f"({stats.seconds:.1f}s)", file=sys.stderr)
    policy = train(cfg.train_config(), progress=progress if args.verbose else None)
    ckpt_path = _out(args, "checkpoint.json")
    with harness.atomic_text(ckpt_path) as f:
        nn.save_checkpoint(f, policy.params, policy.spec, policy.init_seed,
                           config_hash=cfg.config_hash())
    telemetry_path = _out(args, "telemetry.csv")
    with harness.atomic_text(telemetry_path) as f:
        telemetry_to_csv(policy, f, config_hash=cfg.config_hash())
    print(f"wrote {ckpt_path}, {telemetry_path} "
          f"(final loss {policy.loss_curve[-1]:.6g})")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    if not cfg.strategy.startswith("deep"):
        raise ConfigError("evaluate needs --strategy deep-1 or deep-2")
    policy = _load_policy(cfg, args.checkpoint)
    seed = _eval_seed(cfg)
    report = harness.policy_report(policy, cfg.eval_paths, seed)
    pnl_path = _out(args, "pnl.csv")
    with harness.atomic_text(pnl_path) as f:
        pnl_to_csv(report, f, config_hash=cfg.config_hash(), seed=seed)
    summary_path = _out(args, "summary.json")
    with harness.atomic_text(summary_path) as f:
        summary_to_json(report, f, config_hash=cfg.config_hash(), seed=seed)
    print(f"wrote {pnl_path}, {summary_path}")
    return 0


def cmd_table(args) -> int:
    cfg = _load_config(args)
    objectives = args.objectives.split(",") if args.objectives else ("mean-abs", "batch-max")
    strategies = args.strategies.split(",") if args.strategies else list(harness.CLASSICAL)
    regimes = args.regimes.split(",") if args.regimes else list(COST_REGIMES)
    for s in strategies:
        if s not in STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}")
    policies = {}
    if args.checkpoint_dir:
        for o in objectives:
            for s in strategies:
                if s in harness.CLASSICAL:
                    continue
                for r in regimes:
                    path = os.path.join(args.checkpoint_dir, f"{s}_{o}_{r}.json")
                    if os.path.exists(path):
                        cell_cfg = cfg.replace(strategy=s, objective=o, cost_regime=r)
                        policies[(o, s, r)] = _load_policy(cell_cfg, path)
    table = harness.run_table(cfg, objectives=objectives, strategies=strategies,
                              regimes=regimes, policies=policies,
                              train_missing=args.train_missing, workers=args.workers)
    csv_path = _out(args, "table.csv")
    with harness.atomic_text(csv_path) as f:
        harness.table_to_csv(table, f)
    json_path = _out(args, "table.json")
    with harness.atomic_text(json_path) as f:
        harness.table_to_json(table, f)
    print(f"wrote {csv_path}, {json_path}")
    for c in table.cells:
        tag = f"{c.objective}/{c.strategy}/{c.cost_regime}"
        if c.status == "ok":
            print(f"  {tag}: {c.loss:.6g}")
        else:
            print(f"  {tag}: FAILED ({c.error})")
    if table.failed:
        print("one or more cells failed", file=sys.stderr)
        return 3
    return 0


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise ConfigError(f"expected a comma-separated float list, got {text!r}") from None


def _parse_s_grid(args) -> np.ndarray:
    if args.prices:
        return np.array(_parse_floats(args.prices))
    try:
        lo, hi, count = args.s_range.split(":")
        return np.linspace(float(lo), float(hi), int(count))
    except ValueError:
        raise ConfigError("--s-range must look like lo:hi:count") from None


def cmd_surface(args) -> int:
    cfg = _load_config(args)
    t_values = _parse_floats(args.times)
    s_values = _parse_s_grid(args)
    if args.source in harness.CLASSICAL:
        source = args.source
        panel = cfg.replace(strategy="gamma").panel() if args.source == "gamma" else cfg.panel()
    elif args.source == "deep":
        if not args.checkpoint:
            raise ConfigError("--source deep needs --checkpoint")
        source = _load_policy(cfg, args.checkpoint)
        panel = source.config.panel
    else:
        raise ConfigError("--source must be delta, gamma or deep")
    rows = harness.surface_rows(source, t_values, s_values, panel, cfg.market(),
                                cfg.horizon)
    path = _out(args, "surface.csv")
    with harness.atomic_text(path) as f:
        harness.surface_to_csv(rows, f, config_hash=cfg.config_hash(), seed=cfg.seed)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_trace(args) -> int:
    cfg = _load_config(args)
    if not cfg.strategy.startswith("deep"):
        raise ConfigError("trace needs --strategy deep-1 or deep-2 and a checkpoint")
    policy = _load_policy(cfg, args.checkpoint)
    trace_seed = args.trace_seed if args.trace_seed is not None else \
        derive_seed(cfg.seed, "trace")
    bench_cfg = cfg.replace(strategy="gamma")
    rows = harness.trace_rows(policy, trace_seed,
                              benchmark_panel=bench_cfg.panel(),
                              benchmark_costs=bench_cfg.costs())
    path = _out(args, "trace.csv")
    with harness.atomic_text(path) as f:
        harness.trace_to_csv(rows, f, config_hash=cfg.config_hash(), seed=trace_seed)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hedgelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        _add_schema_flags(p)
        p.set_defaults(fn=fn)
        return p

    add("simulate", cmd_simulate, "emit a scenario-set CSV")
    p = add("hedge", cmd_hedge, "run a classical strategy: schedule + PnL")
    p = add("train", cmd_train, "train a deep policy, write checkpoint + telemetry")
    p.add_argument("--verbose", action="store_true", help="per-epoch progress")
    p = add("evaluate", cmd_evaluate, "evaluate a checkpoint out of sample")
    p.add_argument("--checkpoint", required=True)
    p = add("table", cmd_table, "comparison table over strategies/regimes")
    p.add_argument("--objectives", help="comma list (default both)")
    p.add_argument("--strategies", help="comma list (default delta,gamma)")
    p.add_argument("--regimes", help="comma list (default all three)")
    p.add_argument("--train-missing", action="store_true",
                   help="train deep cells that have no checkpoint")
    p.add_argument("--checkpoint-dir", help="directory of {strategy}_{objective}_{regime}.json")
    p.add_argument("--workers", type=int, default=1)
    p = add("surface", cmd_surface, "greek surfaces on a (t, S) grid")
    p.add_argument("--source", required=True, help="delta, gamma or deep")
    p.add_argument("--checkpoint")
    p.add_argument("--times", required=True, help="comma list of t values")
    p.add_argument("--prices", help="comma list of S values")
    p.add_argument("--s-range", default="0.2:2.0:37", help="lo:hi:count")
    p = add("trace", cmd_trace, "single-path position trace vs gamma benchmark")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--trace-seed", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DomainError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except TrainingError as err:
        print(f"training failure: {err}", file=sys.stderr)
        return 3
    except (HedgeLabError, FloatingPointError, ZeroDivisionError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
