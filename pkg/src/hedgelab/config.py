"""Experiment configuration: JSON schema, validation, canonical hashing.

Defaults reproduce the common parameter set used in every experiment:
r = 0, sigma = 0.2, horizon 1, hedged strike 1, second strike 1.1,
option maturity 1.4, initial price ~ Uniform(0, 2). The three cost regimes
are stored as fractions: none (0, 0), normal (5e-5, 2.5e-3) and
high (5e-3, 5e-3).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from .accounting import CostSpec
from .analytics import MarketParams
from .errors import ConfigError
from .neuralnet import NetSpec
from .simulator import ScenarioDistribution, TimeGrid, fixed_model, uncertain_model
from .strategies import InstrumentPanel
from .training import TrainConfig

COST_REGIMES = {
    "none": (0.0, 0.0),
    "normal": (5e-5, 2.5e-3),
    "high": (5e-3, 5e-3),
}

STRATEGIES = ("delta", "gamma", "deep-1", "deep-2")
SCENARIO_MODELS = ("fixed", "uncertain")
OBJECTIVES = ("mean-abs", "batch-max")
NET_CHOICES = ("auto", "feedforward", "recurrent")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one cell of the comparison needs, JSON-serialisable."""

    strategy: str = "delta"
    objective: str = "mean-abs"
    cost_regime: str = "none"
    scenario_model: str = "auto"       # auto: fixed for mean-abs, uncertain for batch-max
    rate: float = 0.0
    pricing_vol: float = 0.2
    horizon: float = 1.0
    steps: int = 1000
    hedged_strike: float = 1.0
    second_strike: float = 1.1
    option_maturity: float = 1.4
    spot_lo: float = 0.0
    spot_hi: float = 2.0
    fixed_sigma: float = 0.2
    fixed_mu: float = 0.0
    eval_paths: int = 100000
    seed: int = 0
    # training section (deep strategies only)
    net_variant: str = "auto"          # auto: feedforward without costs, recurrent with
    sample_size: int = 100000
    epochs: int = 20
    batch_size: int = 256
    lr: float = 1e-3

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.cost_regime not in COST_REGIMES:
            raise ConfigError(f"cost_regime must be one of {tuple(COST_REGIMES)}, "
                              f"got {self.cost_regime!r}")
        if self.scenario_model not in SCENARIO_MODELS + ("auto",):
            raise ConfigError(f"scenario_model must be auto or one of {SCENARIO_MODELS}")
        if self.net_variant not in NET_CHOICES:
            raise ConfigError(f"net_variant must be one of {NET_CHOICES}")
        if self.eval_paths < 1:
            raise ConfigError("eval_paths must be >= 1")

    # -- derived pieces ----------------------------------------------------

    def market(self) -> MarketParams:
        return MarketParams(rate=self.rate, pricing_vol=self.pricing_vol)

    def grid(self) -> TimeGrid:
        return TimeGrid(horizon=self.horizon, steps=self.steps)

    def resolved_scenario_model(self) -> str:
        if self.scenario_model != "auto":
            return self.scenario_model
        return "fixed" if self.objective == "mean-abs" else "uncertain"

    def distribution(self) -> ScenarioDistribution:
        spot = (self.spot_lo, self.spot_hi)
        if self.resolved_scenario_model() == "fixed":
            return fixed_model(self.fixed_sigma, self.fixed_mu, spot)
        return uncertain_model(spot)

    def instruments(self) -> int:
        return 1 if self.strategy in ("delta", "deep-1") else 2

    def panel(self) -> InstrumentPanel:
        strikes = [0.0] if self.instruments() == 1 else [0.0, self.second_strike]
        return InstrumentPanel.make(self.hedged_strike, strikes, self.option_maturity)

    def costs(self) -> CostSpec:
        fractions = COST_REGIMES[self.cost_regime][: self.instruments()]
        return CostSpec(fractions=fractions)

    def resolved_net_variant(self) -> str:
        if self.net_variant != "auto":
            return self.net_variant
        return "feedforward" if self.cost_regime == "none" else "recurrent"

    def net_spec(self) -> NetSpec:
        return NetSpec(variant=self.resolved_net_variant(), outputs=self.instruments())

    def train_config(self) -> TrainConfig:
        if not self.strategy.startswith("deep"):
            raise ConfigError("train_config is only defined for deep strategies")
        return TrainConfig(
            net=self.net_spec(), dist=self.distribution(), grid=self.grid(),
            panel=self.panel(), costs=self.costs(), objective=self.objective,
            sample_size=self.sample_size, market=self.market(),
            epochs=self.epochs, batch_size=self.batch_size,
            seed=self.seed, lr=self.lr,
        )

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as err:
            raise ConfigError(str(err)) from None

    @classmethod
    def from_json(cls, fileobj) -> "ExperimentConfig":
        try:
            data = json.load(fileobj)
        except json.JSONDecodeError as err:
            raise ConfigError(f"invalid JSON config: {err}") from None
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(data)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def replace(self, **kwargs) -> "ExperimentConfig":
        return dataclasses.replace(self, **kwargs)
