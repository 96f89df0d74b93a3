"""Classical benchmark strategies: delta hedging with the underlying-equivalent
instrument, and gamma hedging with the underlying plus one traded option.

Both emit a full per-path, per-timepoint position schedule over a scenario
set, with the forced liquidation row (all zeros) at the final timepoint.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .analytics import MarketParams, OptionSpec, greeks_grid
from .errors import ConfigError, DomainError
from .simulator import ScenarioSet, TimeGrid

# Below this gamma (per unit price) the gamma ratio is a 0/0-like limit far
# from the money; positions fall back to a pure delta hedge and are flagged.
GAMMA_FLOOR = 1e-12


@dataclass(frozen=True)
class InstrumentPanel:
    """The hedged option (index 0) plus the ordered hedging instruments (1..M)."""

    hedged: OptionSpec
    hedgers: tuple[OptionSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "hedgers", tuple(self.hedgers))
        if len(self.hedgers) < 1:
            raise ConfigError("panel needs at least one hedging instrument")
        maturities = {self.hedged.maturity} | {h.maturity for h in self.hedgers}
        if len(maturities) != 1:
            raise ConfigError("all panel instruments must share one maturity")
        indices = [self.hedged.index] + [h.index for h in self.hedgers]
        if indices != list(range(len(self.hedgers) + 1)):
            raise ConfigError("panel indices must be 0 (hedged), 1..M (hedgers)")

    @classmethod
    def make(cls, hedged_strike: float, hedger_strikes, maturity: float) -> "InstrumentPanel":
        hedged = OptionSpec(strike=hedged_strike, maturity=maturity, index=0)
        hedgers = tuple(
            OptionSpec(strike=k, maturity=maturity, index=i + 1)
            for i, k in enumerate(hedger_strikes)
        )
        return cls(hedged=hedged, hedgers=hedgers)

    @property
    def size(self) -> int:
        return len(self.hedgers)

    def check_grid(self, grid: TimeGrid) -> None:
        if self.hedged.maturity <= grid.horizon:
            raise ConfigError(
                f"maturity {self.hedged.maturity} must exceed trading horizon {grid.horizon}"
            )


@dataclass
class PositionSchedule:
    """Holdings q[path, timepoint, instrument]; the final row is always zero.

    ``fallback`` flags (path, timepoint) entries where a gamma hedge fell
    back to a pure delta hedge because the hedger's gamma underflowed.
    """

    q: np.ndarray
    fallback: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.q.ndim != 3:
            raise DomainError("schedule array must be (paths, timepoints, instruments)")
        if self.fallback is None:
            self.fallback = np.zeros(self.q.shape[:2], dtype=bool)
        if self.fallback.shape != self.q.shape[:2]:
            raise DomainError("fallback mask shape mismatch")

    @property
    def count(self) -> int:
        return self.q.shape[0]

    @property
    def instruments(self) -> int:
        return self.q.shape[2]


def _hedging_times(scen: ScenarioSet) -> tuple[np.ndarray, np.ndarray]:
    """Trading timepoints 0..(n-1)*dt and the prices observed there."""
    n = scen.grid.steps
    t = np.arange(n) * scen.grid.dt
    return t, scen.paths[:, :n]


def delta_hedge(scen: ScenarioSet, panel: InstrumentPanel, mkt: MarketParams) -> PositionSchedule:
    """Hold q1 = delta of the hedged option in the zero-strike instrument."""
    panel.check_grid(scen.grid)
    if panel.hedgers[0].strike != 0.0:
        raise ConfigError("delta hedging needs the zero-strike instrument at index 1")
    t, spots = _hedging_times(scen)
    tau = panel.hedged.maturity - t
    _, delta0, _ = greeks_grid(spots, tau, panel.hedged, mkt)
    n = scen.grid.steps
    q = np.zeros((scen.count, n + 1, panel.size))
    q[:, :n, 0] = delta0
    return PositionSchedule(q=q)


def gamma_hedge(scen: ScenarioSet, panel: InstrumentPanel, mkt: MarketParams,
                gamma_floor: float = GAMMA_FLOOR) -> PositionSchedule:
    """Zero the portfolio gamma with instrument 2, then the delta with instrument 1.

    q2 = gamma0 / gamma2 and q1 = delta0 - q2 * delta2. Where gamma2 drops
    below ``gamma_floor`` the ratio is numerically meaningless; those entries
    revert to the delta hedge (q2 = 0, q1 = delta0) and are flagged.
    """
    panel.check_grid(scen.grid)
    if panel.size != 2:
        raise ConfigError("gamma hedging uses exactly two hedging instruments")
    if panel.hedgers[0].strike != 0.0 or panel.hedgers[1].strike <= 0.0:
        raise ConfigError("gamma hedging needs strikes K1 = 0 and K2 > 0")
    t, spots = _hedging_times(scen)
    tau = panel.hedged.maturity - t
    _, delta0, gamma0 = greeks_grid(spots, tau, panel.hedged, mkt)
    _, delta2, gamma2 = greeks_grid(spots, tau, panel.hedgers[1], mkt)
    n = scen.grid.steps
    ok = gamma2 >= gamma_floor
    with np.errstate(divide="ignore", invalid="ignore"):
        q2 = np.where(ok, gamma0 / np.where(ok, gamma2, 1.0), 0.0)
    q1 = delta0 - q2 * delta2
    q = np.zeros((scen.count, n + 1, 2))
    q[:, :n, 0] = q1
    q[:, :n, 1] = q2
    fallback = np.zeros((scen.count, n + 1), dtype=bool)
    fallback[:, :n] = ~ok
    return PositionSchedule(q=q, fallback=fallback)


@dataclass(frozen=True)
class PortfolioGreeks:
    """Per-path, per-timepoint portfolio greeks next to the hedged option's."""

    delta: np.ndarray
    gamma: np.ndarray
    delta0: np.ndarray
    gamma0: np.ndarray


def portfolio_greeks(schedule: PositionSchedule, scen: ScenarioSet,
                     panel: InstrumentPanel, mkt: MarketParams) -> PortfolioGreeks:
    """Aggregate sum_a q_a * greek_a across the panel at every timepoint."""
    n = scen.grid.steps
    if schedule.q.shape != (scen.count, n + 1, panel.size):
        raise DomainError("schedule shape does not match scenarios and panel")
    t = np.arange(n + 1) * scen.grid.dt
    # greeks are evaluated at trading times and at the horizon; tau stays > 0
    tau = panel.hedged.maturity - t
    _, delta0, gamma0 = greeks_grid(scen.paths, tau, panel.hedged, mkt)
    pdelta = np.zeros((scen.count, n + 1))
    pgamma = np.zeros((scen.count, n + 1))
    for a, hedger in enumerate(panel.hedgers):
        _, da, ga = greeks_grid(scen.paths, tau, hedger, mkt)
        pdelta += schedule.q[:, :, a] * da
        pgamma += schedule.q[:, :, a] * ga
    return PortfolioGreeks(delta=pdelta, gamma=pgamma, delta0=delta0, gamma0=gamma0)


def schedule_to_csv(schedule: PositionSchedule, scen: ScenarioSet,
                    fileobj: io.TextIOBase, config_hash: str | None = None,
                    header: bool = True) -> None:
    """Rows of (path_id, timepoint, q per instrument, fallback flag).

    ``header=False`` appends data rows only, for chunked writes.
    """
    m = schedule.instruments
    if header:
        fileobj.write("# hedgelab schedule\n")
        if config_hash is not None:
            fileobj.write(f"# config_hash={config_hash}\n")
        fileobj.write(f"# seed={scen.seed}\n")
        cols = ["path_id", "timepoint"] + [f"q{a + 1}" for a in range(m)] + ["fallback"]
        fileobj.write(",".join(cols) + "\n")
    ids = scen.path_ids()
    dt = scen.grid.dt
    for p in range(schedule.count):
        for i in range(schedule.q.shape[1]):
            row = [str(ids[p]), repr(float(i * dt))]
            row.extend(repr(float(schedule.q[p, i, a])) for a in range(m))
            row.append("1" if schedule.fallback[p, i] else "0")
            fileobj.write(",".join(row) + "\n")
