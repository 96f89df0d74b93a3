"""hedgelab: a desk-scale laboratory for comparing delta hedging, gamma
hedging and learned (deep) hedging strategies under proportional transaction
costs and model uncertainty."""

from .analytics import MarketParams, OptionSpec, bs_delta, bs_gamma, bs_price, d1
from .accounting import CostSpec, PnlReport, compute_pnl, loss_max, loss_mean
from .errors import (ConfigError, ContractError, DomainError, HedgeLabError,
                     TrainingError)
from .kernels import BACKEND as KERNEL_BACKEND
from .neuralnet import NetSpec, adam_init, adam_step, episode_gradient, forward
from .simulator import (ScenarioDistribution, ScenarioSet, TimeGrid, fixed_model,
                        sample_scenarios, uncertain_model)
from .strategies import (InstrumentPanel, PositionSchedule, delta_hedge,
                         gamma_hedge, portfolio_greeks)
from .training import TrainConfig, TrainedPolicy, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "MarketParams", "OptionSpec", "bs_price", "bs_delta", "bs_gamma", "d1",
    "CostSpec", "PnlReport", "compute_pnl", "loss_mean", "loss_max",
    "ScenarioDistribution", "ScenarioSet", "TimeGrid", "fixed_model",
    "uncertain_model", "sample_scenarios",
    "InstrumentPanel", "PositionSchedule", "delta_hedge", "gamma_hedge",
    "portfolio_greeks",
    "NetSpec", "forward", "episode_gradient", "adam_init", "adam_step",
    "TrainConfig", "TrainedPolicy", "train", "evaluate",
    "HedgeLabError", "DomainError", "ConfigError", "ContractError", "TrainingError",
    "KERNEL_BACKEND",
]
