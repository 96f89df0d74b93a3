"""Experiment harness: the strategy comparison table, greek-surface and
path-trace extraction, and chunked streaming evaluation.

Every comparison cell of one objective is evaluated on the same scenario
sample (common random numbers); the counter-based generator makes chunked
streaming identical to one-shot generation, so large path counts never
materialise in memory.
"""

from __future__ import annotations

import concurrent.futures
import contextlib
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import neuralnet as nn
from .accounting import (CostSpec, PnlReport, compute_pnl, loss_max, loss_mean,
                         merge_reports)
from .analytics import MarketParams, greeks_grid
from .config import ExperimentConfig
from .errors import ConfigError, DomainError, HedgeLabError
from .simulator import ScenarioDistribution, ScenarioSet, TimeGrid, sample_scenarios
from .strategies import (GAMMA_FLOOR, InstrumentPanel, delta_hedge, gamma_hedge)
from .training import TrainedPolicy, derive_seed, evaluate, train

CHUNK_PATHS = 4096

CLASSICAL = ("delta", "gamma")


@contextlib.contextmanager
def atomic_text(path):
    """Write a text file atomically (temp file + rename)."""
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        yield f
    os.replace(tmp, path)


def _chunk_ranges(count, chunk):
    for lo in range(0, count, chunk):
        yield lo, min(lo + chunk, count)


def classical_report(strategy: str, dist: ScenarioDistribution, grid: TimeGrid,
                     panel: InstrumentPanel, mkt: MarketParams, costs: CostSpec,
                     count: int, seed: int, chunk: int = CHUNK_PATHS) -> PnlReport:
    """Stream a classical strategy over `count` paths of the sample `seed`."""
    if strategy not in CLASSICAL:
        raise ConfigError(f"classical strategy must be one of {CLASSICAL}")
    hedge = delta_hedge if strategy == "delta" else gamma_hedge
    parts = []
    for lo, hi in _chunk_ranges(count, chunk):
        scen = sample_scenarios(dist, grid, hi - lo, seed, first_path=lo)
        schedule = hedge(scen, panel, mkt)
        parts.append(compute_pnl(schedule, scen, panel, mkt, costs))
    return merge_reports(parts)


def policy_report(policy: TrainedPolicy, count: int, seed: int,
                  chunk: int = CHUNK_PATHS) -> PnlReport:
    """Stream a trained policy over `count` fresh paths of its own law."""
    cfg = policy.config
    parts = []
    for lo, hi in _chunk_ranges(count, chunk):
        scen = sample_scenarios(cfg.dist, cfg.grid, hi - lo, seed, first_path=lo)
        parts.append(evaluate(policy, scen))
    return merge_reports(parts)


# -- comparison table -------------------------------------------------------


@dataclass
class CellResult:
    objective: str
    strategy: str
    cost_regime: str
    loss: float = float("nan")
    paths: int = 0
    eval_seed: int = 0
    status: str = "ok"
    error: str = ""


@dataclass
class ResultTable:
    cells: list[CellResult]
    config_hash: str
    seed: int
    eval_paths: int
    runtime_seconds: float = 0.0

    @property
    def failed(self) -> bool:
        return any(c.status != "ok" for c in self.cells)


def _table_cell(base: ExperimentConfig, objective: str, strategy: str, regime: str,
                policies: dict, train_missing: bool) -> CellResult:
    cfg = base.replace(strategy=strategy, objective=objective, cost_regime=regime)
    eval_seed = derive_seed(base.seed, f"eval-{objective}")
    cell = CellResult(objective=objective, strategy=strategy, cost_regime=regime,
                      paths=cfg.eval_paths, eval_seed=eval_seed)
    try:
        if strategy in CLASSICAL:
            report = classical_report(strategy, cfg.distribution(), cfg.grid(),
                                      cfg.panel(), cfg.market(), cfg.costs(),
                                      cfg.eval_paths, eval_seed)
        else:
            key = (objective, strategy, regime)
            policy = policies.get(key)
            if policy is None:
                if not train_missing:
                    raise ConfigError(f"no trained policy for cell {key}; "
                                      "pass one or enable training")
                policy = train(cfg.train_config())
                policies[key] = policy
            report = policy_report(policy, cfg.eval_paths, eval_seed)
        cell.loss = loss_mean(report) if objective == "mean-abs" else loss_max(report)
    except (HedgeLabError, FloatingPointError) as err:
        cell.status = "failed"
        cell.error = str(err)
    return cell


def run_table(base: ExperimentConfig, objectives=("mean-abs", "batch-max"),
              strategies=CLASSICAL, regimes=("none", "normal", "high"),
              policies: dict | None = None, train_missing: bool = False,
              workers: int = 1) -> ResultTable:
    """Evaluate every requested (objective, strategy, regime) cell.

    All cells of one objective share one evaluation sample. Deep cells use
    policies from ``policies`` (keyed by the cell triple), training them on
    the fly only when ``train_missing`` is set.
    """
    policies = {} if policies is None else policies
    requested = [(o, s, r) for o in objectives for s in strategies for r in regimes]
    tic = time.perf_counter()
    cells = {}
    # train-on-the-fly cells run sequentially (they mutate `policies`);
    # evaluation-only cells can fan out
    deep_cells = [c for c in requested if c[1] not in CLASSICAL]
    for o, s, r in deep_cells:
        cells[(o, s, r)] = _table_cell(base, o, s, r, policies, train_missing)
    rest = [c for c in requested if c[1] in CLASSICAL]
    if workers > 1 and len(rest) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_table_cell, base, o, s, r, policies, False): (o, s, r)
                for o, s, r in rest
            }
            for fut, key in futures.items():
                cells[key] = fut.result()
    else:
        for o, s, r in rest:
            cells[(o, s, r)] = _table_cell(base, o, s, r, policies, False)
    ordered = [cells[key] for key in requested]
    return ResultTable(cells=ordered, config_hash=base.config_hash(), seed=base.seed,
                       eval_paths=base.eval_paths,
                       runtime_seconds=time.perf_counter() - tic)


def table_to_csv(table: ResultTable, fileobj) -> None:
    fileobj.write("# hedgelab table\n")
    fileobj.write(f"# config_hash={table.config_hash}\n")
    fileobj.write(f"# seed={table.seed}\n")
    fileobj.write("objective,strategy,cost_regime,loss,paths,eval_seed,status\n")
    for c in table.cells:
        loss = repr(c.loss) if c.status == "ok" else ""
        fileobj.write(f"{c.objective},{c.strategy},{c.cost_regime},{loss},"
                      f"{c.paths},{c.eval_seed},{c.status}\n")


def table_to_json(table: ResultTable, fileobj) -> None:
    doc = {
        "config_hash": table.config_hash,
        "seed": table.seed,
        "eval_paths": table.eval_paths,
        "runtime_seconds": table.runtime_seconds,
        "cells": [
            {"objective": c.objective, "strategy": c.strategy,
             "cost_regime": c.cost_regime,
             "loss": (c.loss if c.status == "ok" else None),
             "paths": c.paths, "eval_seed": c.eval_seed,
             "status": c.status, "error": c.error}
            for c in table.cells
        ],
    }
    json.dump(doc, fileobj, indent=2, sort_keys=True)
    fileobj.write("\n")


# -- greek surfaces ---------------------------------------------------------


def _check_surface_grid(t_values, s_values, horizon):
    t_values = np.atleast_1d(np.asarray(t_values, dtype=np.float64))
    s_values = np.atleast_1d(np.asarray(s_values, dtype=np.float64))
    if np.any(t_values <= 0.0) or np.any(t_values >= horizon):
        raise DomainError("surface times must lie strictly inside (0, horizon)")
    if np.any(s_values <= 0.0) or np.any(s_values > 2.0):
        raise DomainError("surface prices must lie in (0, 2]")
    return t_values, s_values


def gamma_positions_at(panel: InstrumentPanel, mkt: MarketParams, t: float,
                       s_values: np.ndarray) -> np.ndarray:
    """Gamma-hedge positions (len(s), 2) at one timepoint, with the fallback."""
    tau = panel.hedged.maturity - t
    _, d0, g0 = greeks_grid(s_values, tau, panel.hedged, mkt)
    _, d2, g2 = greeks_grid(s_values, tau, panel.hedgers[1], mkt)
    ok = g2 >= GAMMA_FLOOR
    q2 = np.where(ok, g0 / np.where(ok, g2, 1.0), 0.0)
    q1 = d0 - q2 * d2
    return np.column_stack((q1, q2))


def policy_positions_at(policy: TrainedPolicy, t: float,
                        s_values: np.ndarray) -> np.ndarray:
    """Positions (len(s), M) of a trained policy at one timepoint.

    The feedforward variant is evaluated directly at (t / horizon, S). The
    recurrent variant needs a state: it is produced by running the policy
    along a constant-price prefix at S on the policy's own grid, so ``t``
    must coincide with a grid timepoint.
    """
    grid = policy.config.grid
    s_values = np.asarray(s_values, dtype=np.float64)
    if not policy.spec.recurrent:
        x = np.column_stack((np.full(len(s_values), t / grid.horizon), s_values))
        q, _ = nn.forward(policy.params, policy.spec, x)
        return q
    i = int(round(t / grid.dt))
    if not (0 <= i < grid.steps) or abs(i * grid.dt - t) > 1e-9:
        raise DomainError("recurrent surfaces need t on the policy's trading grid")
    t_norm = np.arange(i + 1) * (grid.dt / grid.horizon)
    prefix = np.repeat(s_values[:, None], i + 2, axis=1)
    q = nn.episode_positions(policy.params, policy.spec, t_norm, prefix)
    return q[:, i, :]


def surface_rows(source, t_values, s_values, panel: InstrumentPanel,
                 mkt: MarketParams, horizon: float):
    """(t, S, portfolio delta, portfolio gamma, delta0, gamma0) rows.

    ``source`` is "delta", "gamma", or a TrainedPolicy.
    """
    t_values, s_values = _check_surface_grid(t_values, s_values, horizon)
    rows = []
    for t in t_values:
        tau = panel.hedged.maturity - t
        _, d0, g0 = greeks_grid(s_values, tau, panel.hedged, mkt)
        if source == "delta":
            q = np.column_stack((d0,) + (np.zeros(len(s_values)),) * (panel.size - 1))
        elif source == "gamma":
            q = gamma_positions_at(panel, mkt, t, s_values)
        elif isinstance(source, TrainedPolicy):
            q = policy_positions_at(source, t, s_values)
        else:
            raise ConfigError(f"unknown surface source {source!r}")
        pdelta = np.zeros(len(s_values))
        pgamma = np.zeros(len(s_values))
        for a, hedger in enumerate(panel.hedgers):
            _, da, ga = greeks_grid(s_values, tau, hedger, mkt)
            pdelta += q[:, a] * da
            pgamma += q[:, a] * ga
        for j, s in enumerate(s_values):
            rows.append((t, s, pdelta[j], pgamma[j], d0[j], g0[j]))
    return rows


def surface_to_csv(rows, fileobj, config_hash=None, seed=None) -> None:
    fileobj.write("# hedgelab surface\n")
    if config_hash is not None:
        fileobj.write(f"# config_hash={config_hash}\n")
    if seed is not None:
        fileobj.write(f"# seed={seed}\n")
    fileobj.write("t,S,portfolio_delta,portfolio_gamma,delta0,gamma0\n")
    for row in rows:
        fileobj.write(",".join(repr(float(v)) for v in row) + "\n")


# -- single-path traces -----------------------------------------------------


def _trace_block(label, schedule, scen, panel, mkt, costs):
    from .strategies import portfolio_greeks

    greeks = portfolio_greeks(schedule, scen, panel, mkt)
    n = scen.grid.steps
    tau = panel.hedged.maturity - np.arange(n + 1) * scen.grid.dt
    values = np.empty((n + 1, panel.size))
    for a, hedger in enumerate(panel.hedgers):
        va, _, _ = greeks_grid(scen.paths, tau, hedger, mkt)
        values[:, a] = va[0]
    q = schedule.q[0]
    dq = np.diff(q, axis=0, prepend=0.0)
    p = np.asarray(costs.fractions)
    step_cost = (np.abs(values) * np.abs(dq) * p[None, :]).sum(axis=1)
    cum_cost = np.cumsum(step_cost)
    rows = []
    for i in range(n + 1):
        q1 = q[i, 0]
        q2 = q[i, 1] if panel.size > 1 else 0.0
        rows.append((label, i * scen.grid.dt, scen.paths[0, i], q1, q2,
                     greeks.delta[0, i], greeks.gamma[0, i],
                     greeks.delta0[0, i], greeks.gamma0[0, i], cum_cost[i]))
    return rows


def trace_rows(policy: TrainedPolicy, trace_seed: int,
               benchmark_panel: InstrumentPanel | None = None,
               benchmark_costs: CostSpec | None = None):
    """Policy and gamma-benchmark behaviour on one sampled price path."""
    cfg = policy.config
    scen = sample_scenarios(cfg.dist, cfg.grid, 1, trace_seed)
    rows = _trace_block("policy", policy.positions(scen), scen, cfg.panel,
                        cfg.market, cfg.costs)
    panel2 = benchmark_panel
    if panel2 is None and cfg.panel.size == 2:
        panel2 = cfg.panel
    if panel2 is not None:
        costs2 = benchmark_costs if benchmark_costs is not None else (
            cfg.costs if panel2.size == len(cfg.costs.fractions)
            else CostSpec.zero(panel2.size))
        bench = gamma_hedge(scen, panel2, cfg.market)
        rows += _trace_block("gamma-benchmark", bench, scen, panel2,
                             cfg.market, costs2)
    return rows


def trace_to_csv(rows, fileobj, config_hash=None, seed=None) -> None:
    fileobj.write("# hedgelab trace\n")
    if config_hash is not None:
        fileobj.write(f"# config_hash={config_hash}\n")
    if seed is not None:
        fileobj.write(f"# seed={seed}\n")
    fileobj.write("source,t,S,q1,q2,portfolio_delta,portfolio_gamma,"
                  "delta0,gamma0,cum_cost\n")
    for row in rows:
        label = row[0]
        fileobj.write(label + "," + ",".join(repr(float(v)) for v in row[1:]) + "\n")
