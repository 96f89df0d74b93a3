"""Training orchestration: fixed scenario sample, epochs of minibatch Adam,
and out-of-sample evaluation of trained policies.

One scenario set is drawn up front and reused for the whole run; each epoch
shuffles it with a seeded permutation. The batch-max objective minimises the
maximum within each minibatch, the only reading compatible with minibatch
Adam.
"""

from __future__ import annotations

import hashlib
import io
import time
from dataclasses import dataclass

import numpy as np

from . import neuralnet as nn
from .accounting import CostSpec, PnlReport, compute_pnl
from .analytics import MarketParams
from .errors import ConfigError, DomainError, TrainingError
from .simulator import ScenarioDistribution, ScenarioSet, TimeGrid, sample_scenarios
from .strategies import InstrumentPanel, PositionSchedule

_EVAL_BATCH = 4096


def derive_seed(seed: int, tag: str) -> int:
    """Stable 64-bit subseed for a named stream of a run."""
    digest = hashlib.blake2b(f"hedgelab:{seed}:{tag}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class TrainConfig:
    net: nn.NetSpec
    dist: ScenarioDistribution
    grid: TimeGrid
    panel: InstrumentPanel
    costs: CostSpec
    objective: str
    sample_size: int
    market: MarketParams = MarketParams()
    epochs: int = 20
    batch_size: int = 256
    seed: int = 0
    lr: float = 1e-3

    def __post_init__(self):
        if self.objective not in nn.OBJECTIVES:
            raise ConfigError(f"objective must be one of {nn.OBJECTIVES}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.sample_size < 1:
            raise ConfigError("sample_size must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.net.outputs != self.panel.size:
            raise ConfigError("network outputs must match the panel size")
        if len(self.costs.fractions) != self.panel.size:
            raise ConfigError("cost spec does not match the panel size")
        if self.market.rate != 0.0 and self.costs.any_cost:
            raise ConfigError("transaction costs with a nonzero rate are unsupported")
        self.panel.check_grid(self.grid)


@dataclass
class EpochStats:
    mean_loss: float
    max_loss: float
    seconds: float


@dataclass
class TrainedPolicy:
    """A trained policy: parameters, architecture and its training record."""

    params: dict
    spec: nn.NetSpec
    config: TrainConfig
    loss_curve: list[float]
    epoch_stats: list[EpochStats]
    initial_loss: float
    init_seed: int
    adam_steps: int = 0

    def positions(self, scen: ScenarioSet) -> PositionSchedule:
        """Run the policy over a scenario set; terminal row forced to zero."""
        if scen.grid != self.config.grid:
            raise DomainError("scenario grid does not match the policy's grid")
        n = scen.grid.steps
        t_norm = np.arange(n) * (scen.grid.dt / scen.grid.horizon)
        q = np.zeros((scen.count, n + 1, self.spec.outputs))
        for lo in range(0, scen.count, _EVAL_BATCH):
            hi = min(lo + _EVAL_BATCH, scen.count)
            q[lo:hi, :n, :] = nn.episode_positions(
                self.params, self.spec, t_norm, scen.paths[lo:hi]
            )
        return PositionSchedule(q=q)


def train(config: TrainConfig, progress=None) -> TrainedPolicy:
    """Run the full recipe; deterministic given the config seed.

    Raises TrainingError carrying the last finite checkpoint when the loss
    or a gradient diverges.
    """
    mkt = config.market
    scen = sample_scenarios(config.dist, config.grid, config.sample_size,
                            derive_seed(config.seed, "train-scenarios"))
    init_seed = derive_seed(config.seed, "init")
    params = nn.init_params(config.net, init_seed)
    state = nn.adam_init(params, lr=config.lr)
    initial_loss = _sample_objective(params, config, mkt, scen)

    loss_curve = []
    stats = []
    size = scen.count
    for epoch in range(config.epochs):
        tic = time.perf_counter()
        order = np.random.default_rng(
            derive_seed(config.seed, f"epoch-{epoch}")
        ).permutation(size)
        batch_losses = []
        batch_sizes = []
        for lo in range(0, size, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            sub = ScenarioSet(grid=scen.grid, mu=scen.mu[idx], sigma=scen.sigma[idx],
                              paths=scen.paths[idx], seed=scen.seed)
            try:
                loss, grads = nn.episode_gradient(params, config.net, sub, config.panel,
                                                  mkt, config.costs, config.objective)
                if not np.isfinite(loss):
                    raise TrainingError("non-finite loss")
                params, state = nn.adam_step(params, grads, state)
            except TrainingError as err:
                err.checkpoint = {"params": params, "adam": state, "epoch": epoch,
                                  "step": state.step}
                raise
            batch_losses.append(loss)
            batch_sizes.append(len(idx))
        mean_loss = float(np.average(batch_losses, weights=batch_sizes))
        max_loss = float(np.max(batch_losses))
        seconds = time.perf_counter() - tic
        stats.append(EpochStats(mean_loss=mean_loss, max_loss=max_loss, seconds=seconds))
        loss_curve.append(max_loss if config.objective == "batch-max" else mean_loss)
        if progress is not None:
            progress(epoch, stats[-1])
    return TrainedPolicy(params=params, spec=config.net, config=config,
                         loss_curve=loss_curve, epoch_stats=stats,
                         initial_loss=initial_loss, init_seed=init_seed,
                         adam_steps=state.step)


def _sample_objective(params, config: TrainConfig, mkt: MarketParams,
                      scen: ScenarioSet) -> float:
    per_batch = []
    sizes = []
    for lo in range(0, scen.count, _EVAL_BATCH):
        hi = min(lo + _EVAL_BATCH, scen.count)
        sub = ScenarioSet(grid=scen.grid, mu=scen.mu[lo:hi], sigma=scen.sigma[lo:hi],
                          paths=scen.paths[lo:hi], seed=scen.seed,
                          first_path=scen.first_path + lo)
        per_batch.append(nn.episode_loss(params, config.net, sub, config.panel,
                                         mkt, config.costs, config.objective))
        sizes.append(hi - lo)
    if config.objective == "batch-max":
        return float(max(per_batch))
    return float(np.average(per_batch, weights=sizes))


def evaluate(policy: TrainedPolicy, scen: ScenarioSet) -> PnlReport:
    """PnL report of a trained policy on a (typically out-of-sample) set."""
    schedule = policy.positions(scen)
    return compute_pnl(schedule, scen, policy.config.panel,
                       policy.config.market, policy.config.costs)


def telemetry_to_csv(policy: TrainedPolicy, fileobj: io.TextIOBase,
                     config_hash: str | None = None) -> None:
    """Per-epoch training telemetry (epoch, mean loss, max loss, wall time)."""
    fileobj.write("# hedgelab telemetry\n")
    if config_hash is not None:
        fileobj.write(f"# config_hash={config_hash}\n")
    fileobj.write(f"# seed={policy.config.seed}\n")
    fileobj.write("epoch,mean_loss,max_loss,wall_time\n")
    for e, s in enumerate(policy.epoch_stats):
        fileobj.write(f"{e},{s.mean_loss!r},{s.max_loss!r},{s.seconds:.3f}\n")
