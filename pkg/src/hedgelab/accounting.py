"""Per-path PnL of a hedging schedule, with proportional transaction costs,
and the two aggregate loss functionals (mean and worst-case absolute PnL).

PnL per path is the written option's initial value, plus the trading gains
of the hedging positions, minus the option's value at the horizon, minus
proportional costs on every position change (including the initial build
and the forced liquidation at the horizon).
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .analytics import MarketParams, greeks_grid
from .errors import ConfigError, ContractError, DomainError
from .simulator import ScenarioSet
from .strategies import InstrumentPanel, PositionSchedule

_CHUNK = 4096


@dataclass(frozen=True)
class CostSpec:
    """Proportional cost fraction per hedging instrument (alpha = 1..M)."""

    fractions: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "fractions", tuple(float(p) for p in self.fractions))
        if any(not math.isfinite(p) or p < 0.0 for p in self.fractions):
            raise DomainError("cost fractions must be finite and >= 0")

    @classmethod
    def zero(cls, instruments: int) -> "CostSpec":
        return cls(fractions=(0.0,) * instruments)

    @property
    def any_cost(self) -> bool:
        return any(p > 0.0 for p in self.fractions)


@dataclass(frozen=True)
class PnlReport:
    """Per-path PnL decomposition and the derived aggregate losses."""

    trading_gain: np.ndarray
    cost_total: np.ndarray
    pnl: np.ndarray
    v0_start: np.ndarray
    v0_end: np.ndarray

    def __post_init__(self):
        if len(self.pnl) < 1:
            raise DomainError("a PnL report needs at least one path")
        for name in ("trading_gain", "cost_total", "pnl", "v0_start", "v0_end"):
            getattr(self, name).setflags(write=False)

    @property
    def count(self) -> int:
        return len(self.pnl)


def loss_mean(report: PnlReport) -> float:
    """Mean absolute PnL over the sample."""
    return float(np.mean(np.abs(report.pnl)))


def loss_max(report: PnlReport) -> float:
    """Worst-case absolute PnL over the sample."""
    return float(np.max(np.abs(report.pnl)))


def merge_reports(reports) -> PnlReport:
    """Concatenate chunked reports over disjoint path ranges."""
    reports = list(reports)
    if not reports:
        raise DomainError("nothing to merge")
    return PnlReport(
        trading_gain=np.concatenate([r.trading_gain for r in reports]),
        cost_total=np.concatenate([r.cost_total for r in reports]),
        pnl=np.concatenate([r.pnl for r in reports]),
        v0_start=np.concatenate([r.v0_start for r in reports]),
        v0_end=np.concatenate([r.v0_end for r in reports]),
    )


def instrument_values(scen: ScenarioSet, panel: InstrumentPanel, mkt: MarketParams,
                      lo: int = 0, hi: int | None = None):
    """Hedged-option values (P, n+1) and hedger values (P, n+1, M) on a path range."""
    hi = scen.count if hi is None else hi
    tau = panel.hedged.maturity - np.arange(scen.grid.steps + 1) * scen.grid.dt
    spots = scen.paths[lo:hi]
    v0, _, _ = greeks_grid(spots, tau, panel.hedged, mkt)
    values = np.empty((hi - lo, scen.grid.steps + 1, panel.size))
    for a, hedger in enumerate(panel.hedgers):
        va, _, _ = greeks_grid(spots, tau, hedger, mkt)
        values[:, :, a] = va
    return v0, values


def compute_pnl(schedule: PositionSchedule, scen: ScenarioSet, panel: InstrumentPanel,
                mkt: MarketParams, costs: CostSpec) -> PnlReport:
    """Evaluate the PnL of a schedule over a scenario set, path by path."""
    n = scen.grid.steps
    if schedule.q.shape != (scen.count, n + 1, panel.size):
        raise DomainError("schedule shape does not match scenarios and panel")
    if len(costs.fractions) != panel.size:
        raise ConfigError("cost spec does not match the panel size")
    if mkt.rate != 0.0 and costs.any_cost:
        raise ConfigError("transaction costs with a nonzero rate are unsupported "
                          "(no cash accrual model)")
    if np.any(schedule.q[:, n, :] != 0.0):
        raise ContractError("terminal positions must be zero (forced liquidation)")
    panel.check_grid(scen.grid)

    p = np.asarray(costs.fractions)
    chunks = []
    for lo in range(0, scen.count, _CHUNK):
        hi = min(lo + _CHUNK, scen.count)
        v0, values = instrument_values(scen, panel, mkt, lo, hi)
        trading, cost = kernels.pnl_terms(schedule.q[lo:hi], values, p)
        pnl = v0[:, 0] + trading - v0[:, n] - cost
        chunks.append(PnlReport(trading_gain=trading, cost_total=cost, pnl=pnl,
                                v0_start=v0[:, 0].copy(), v0_end=v0[:, n].copy()))
    return merge_reports(chunks) if len(chunks) > 1 else chunks[0]


def pnl_to_csv(report: PnlReport, fileobj: io.TextIOBase,
               config_hash: str | None = None, seed: int | None = None,
               first_path: int = 0) -> None:
    """Rows of (path_id, trading_gain, cost_total, pnl)."""
    fileobj.write("# hedgelab pnl\n")
    if config_hash is not None:
        fileobj.write(f"# config_hash={config_hash}\n")
    if seed is not None:
        fileobj.write(f"# seed={seed}\n")
    fileobj.write("path_id,trading_gain,cost_total,pnl\n")
    for i in range(report.count):
        fileobj.write(f"{first_path + i},{float(report.trading_gain[i])!r},"
                      f"{float(report.cost_total[i])!r},{float(report.pnl[i])!r}\n")


def summary_dict(report: PnlReport, config_hash: str | None = None,
                 seed: int | None = None) -> dict:
    out = {
        "paths": report.count,
        "loss_mean": loss_mean(report),
        "loss_max": loss_max(report),
    }
    if config_hash is not None:
        out["config_hash"] = config_hash
    if seed is not None:
        out["seed"] = seed
    return out


def summary_to_json(report: PnlReport, fileobj: io.TextIOBase,
                    config_hash: str | None = None, seed: int | None = None) -> None:
    json.dump(summary_dict(report, config_hash, seed), fileobj, indent=2, sort_keys=True)
    fileobj.write("\n")
