"""Batched GBM scenario generation with per-path randomised parameters.

Paths follow the exact log scheme S_{i+1} = S_i * exp((mu - sigma^2/2) dt
+ sigma sqrt(dt) Z_i) on a uniform grid. Drift, volatility and initial
price are drawn per path from uniform laws (degenerate intervals give fixed
values), so a single mechanism covers both the fixed-model and the
model-uncertainty experiments. Generation is keyed by a counter-based RNG:
the same (distribution, grid, count, seed) always yields bit-identical
scenario sets regardless of chunking or thread count.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _as_law(law) -> tuple[float, float]:
    """Normalise a law spec (scalar or (lo, hi) pair) to an ordered pair."""
    if np.isscalar(law):
        v = float(law)
        return (v, v)
    lo, hi = (float(law[0]), float(law[1]))
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainError("law bounds must be finite")
    if lo > hi:
        raise DomainError(f"law bounds out of order: ({lo}, {hi})")
    return (lo, hi)


@dataclass(frozen=True)
class ScenarioDistribution:
    """Joint law of the per-path (drift, volatility, initial price) triple."""

    drift_law: tuple[float, float]
    vol_law: tuple[float, float]
    spot_law: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "drift_law", _as_law(self.drift_law))
        object.__setattr__(self, "vol_law", _as_law(self.vol_law))
        object.__setattr__(self, "spot_law", _as_law(self.spot_law))
        if self.vol_law[0] < 0.0:
            raise DomainError("volatility law must be >= 0")
        if self.spot_law[0] < 0.0:
            raise DomainError("initial price law must be >= 0")


def fixed_model(sigma: float, mu: float = 0.0, spot_law=(0.0, 2.0)) -> ScenarioDistribution:
    """Degenerate drift/vol laws: every path realises exactly (mu, sigma)."""
    if sigma < 0.0:
        raise DomainError("sigma must be >= 0")
    return ScenarioDistribution(drift_law=(mu, mu), vol_law=(sigma, sigma), spot_law=spot_law)


def uncertain_model(spot_law=(0.0, 2.0)) -> ScenarioDistribution:
    """Model-uncertainty law: vol ~ U(0, 0.3), drift ~ U(-0.05, 0.1)."""
    return ScenarioDistribution(
        drift_law=(-0.05, 0.1), vol_law=(0.0, 0.3), spot_law=spot_law
    )


@dataclass(frozen=True)
class TimeGrid:
    """Uniform trading grid: n steps of dt = horizon / n, timepoints 0..n*dt."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not math.isfinite(self.horizon) or self.horizon <= 0.0:
            raise DomainError(f"horizon must be > 0, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise DomainError(f"steps must be an integer >= 1, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def timepoints(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt


@dataclass(frozen=True)
class ScenarioSet:
    """Immutable batch of sampled parameters and generated price paths.

    ``paths`` has one row per path and ``grid.steps + 1`` columns; row p
    starts at its own sampled initial price. ``first_path`` is the global
    index of row 0, which lets chunked generation reassemble one logical
    sample (chunks of the same seed concatenate exactly).
    """

    grid: TimeGrid
    mu: np.ndarray
    sigma: np.ndarray
    paths: np.ndarray
    seed: int
    first_path: int = 0

    def __post_init__(self):
        for name in ("mu", "sigma", "paths"):
            arr = getattr(self, name)
            arr.setflags(write=False)
        if self.paths.shape != (len(self.mu), self.grid.steps + 1):
            raise DomainError("paths shape does not match grid and parameter arrays")

    @property
    def count(self) -> int:
        return self.paths.shape[0]

    @property
    def spot(self) -> np.ndarray:
        return self.paths[:, 0]

    def path_ids(self) -> np.ndarray:
        return np.arange(self.first_path, self.first_path + self.count)


def sample_scenarios(dist: ScenarioDistribution, grid: TimeGrid, count: int,
                     seed: int, first_path: int = 0) -> ScenarioSet:
    """Generate ``count`` paths; same arguments always give identical output."""
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    if first_path < 0:
        raise DomainError(f"first_path must be >= 0, got {first_path}")
    s0, mu, vol, paths = kernels.gbm_scenarios(
        int(seed) & _MASK64, first_path, count, grid.steps, grid.dt,
        dist.spot_law[0], dist.spot_law[1],
        dist.drift_law[0], dist.drift_law[1],
        dist.vol_law[0], dist.vol_law[1],
    )
    return ScenarioSet(grid=grid, mu=mu, sigma=vol, paths=paths,
                       seed=int(seed), first_path=first_path)


def scenarios_to_csv(scen: ScenarioSet, fileobj: io.TextIOBase,
                     config_hash: str | None = None) -> None:
    """Write one row per path: path_id, mu, sigma, then the n+1 prices."""
    n = scen.grid.steps
    fileobj.write("# hedgelab scenarios\n")
    if config_hash is not None:
        fileobj.write(f"# config_hash={config_hash}\n")
    fileobj.write(f"# seed={scen.seed} horizon={scen.grid.horizon!r} steps={n}\n")
    header = ["path_id", "mu", "sigma"] + [f"S{i}" for i in range(n + 1)]
    fileobj.write(",".join(header) + "\n")
    ids = scen.path_ids()
    for p in range(scen.count):
        row = [str(ids[p]), repr(float(scen.mu[p])), repr(float(scen.sigma[p]))]
        row.extend(repr(float(v)) for v in scen.paths[p])
        fileobj.write(",".join(row) + "\n")


def scenarios_from_csv(fileobj: io.TextIOBase) -> ScenarioSet:
    """Rebuild a ScenarioSet written by :func:`scenarios_to_csv`."""
    seed = 0
    horizon = None
    steps = None
    header = None
    rows = []
    for line in fileobj:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("seed="):
                    seed = int(tok[5:])
                elif tok.startswith("horizon="):
                    horizon = float(tok[8:])
                elif tok.startswith("steps="):
                    steps = int(tok[6:])
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append(line.split(","))
    if header is None or not rows:
        raise DomainError("scenario CSV has no data rows")
    n = len(header) - 4
    if steps is not None and steps != n:
        raise DomainError("scenario CSV header/steps mismatch")
    if horizon is None:
        raise DomainError("scenario CSV is missing the horizon comment")
    first = int(rows[0][0])
    mu = np.array([float(r[1]) for r in rows])
    sigma = np.array([float(r[2]) for r in rows])
    paths = np.array([[float(v) for v in r[3:]] for r in rows])
    return ScenarioSet(grid=TimeGrid(horizon=horizon, steps=n), mu=mu, sigma=sigma,
                       paths=paths, seed=seed, first_path=first)
