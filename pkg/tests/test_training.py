"""Training loop behaviour at tiny scale: validation, improvement over the
initial parameters, determinism, and out-of-sample evaluation."""

import io

import numpy as np
import pytest

from hedgelab import neuralnet as nn
from hedgelab.accounting import CostSpec, loss_mean
from hedgelab.analytics import bs_price
from hedgelab.errors import ConfigError, DomainError
from hedgelab.neuralnet import NetSpec
from hedgelab.simulator import TimeGrid, fixed_model, sample_scenarios
from hedgelab.strategies import InstrumentPanel
from hedgelab.training import (TrainConfig, TrainedPolicy, derive_seed, evaluate,
                               telemetry_to_csv, train)

PANEL1 = InstrumentPanel.make(1.0, [0.0], 1.4)


def tiny_config(**overrides):
    base = dict(
        net=NetSpec(variant="feedforward", outputs=1, hidden=(16, 16, 16)),
        dist=fixed_model(0.2, 0.0, (0.5, 1.5)),
        grid=TimeGrid(1.0, 5),
        panel=PANEL1,
        costs=CostSpec.zero(1),
        objective="mean-abs",
        sample_size=512,
        epochs=3,
        batch_size=64,
        seed=12,
    )
    base.update(overrides)
    return TrainConfig(**base)


class TestValidation:
    def test_epochs_must_be_positive(self):
        with pytest.raises(ConfigError):
            tiny_config(epochs=0)

    def test_sample_size_must_be_positive(self):
        with pytest.raises(ConfigError):
            tiny_config(sample_size=0)

    def test_outputs_must_match_panel(self):
        with pytest.raises(ConfigError):
            tiny_config(net=NetSpec(variant="feedforward", outputs=2, hidden=(8, 8, 8)))

    def test_horizon_must_precede_maturity(self):
        with pytest.raises(ConfigError):
            tiny_config(grid=TimeGrid(1.5, 5))

    def test_bad_objective(self):
        with pytest.raises(ConfigError):
            tiny_config(objective="cvar")


def test_training_improves_over_initialisation():
    policy = train(tiny_config())
    assert np.isfinite(policy.initial_loss)
    assert all(np.isfinite(x) for x in policy.loss_curve)
    assert policy.loss_curve[-1] < policy.initial_loss
    assert policy.loss_curve[-1] <= policy.loss_curve[0]


def test_training_is_deterministic():
    a = train(tiny_config())
    b = train(tiny_config())
    for k in a.params:
        assert np.array_equal(a.params[k], b.params[k])
    assert a.loss_curve == b.loss_curve
    c = train(tiny_config(seed=13))
    assert any(not np.array_equal(a.params[k], c.params[k]) for k in a.params)


def test_step_count_is_epochs_times_batches():
    config = tiny_config(sample_size=130, batch_size=64, epochs=2)
    # 130 paths with batch 64: 3 batches per epoch, short final batch allowed
    policy = train(config)
    assert policy.adam_steps == 2 * 3
    assert len(policy.epoch_stats) == 2
    # positions shape sanity on the training grid
    scen = sample_scenarios(config.dist, config.grid, 4,
                            derive_seed(config.seed, "train-scenarios"))
    sched = policy.positions(scen)
    assert sched.q.shape == (4, 6, 1)
    assert np.array_equal(sched.q[:, 5, :], np.zeros((4, 1)))


def test_zero_params_policy_loss_is_value_decay():
    config = tiny_config()
    spec = config.net
    params = {k: np.zeros(s) for k, s in nn.param_shapes(spec).items()}
    policy = TrainedPolicy(params=params, spec=spec, config=config, loss_curve=[],
                           epoch_stats=[], initial_loss=float("nan"), init_seed=0)
    scen = sample_scenarios(config.dist, config.grid, 200, seed=999)
    report = evaluate(policy, scen)
    decay = [abs(bs_price(s, PANEL1.hedged, config.market, 0.0)
                 - bs_price(e, PANEL1.hedged, config.market, 1.0))
             for s, e in zip(scen.paths[:, 0], scen.paths[:, -1])]
    assert loss_mean(report) == pytest.approx(float(np.mean(decay)), rel=1e-12)


def test_evaluate_deterministic_and_grid_checked():
    config = tiny_config(epochs=1)
    policy = train(config)
    scen = sample_scenarios(config.dist, config.grid, 64, seed=31)
    r1 = evaluate(policy, scen)
    r2 = evaluate(policy, scen)
    assert np.array_equal(r1.pnl, r2.pnl)
    other = sample_scenarios(config.dist, TimeGrid(1.0, 7), 64, seed=31)
    with pytest.raises(DomainError):
        evaluate(policy, other)


def test_in_sample_loss_matches_training_loss():
    config = tiny_config(epochs=6, sample_size=1024)
    policy = train(config)
    train_set = sample_scenarios(config.dist, config.grid, config.sample_size,
                                 derive_seed(config.seed, "train-scenarios"))
    report = evaluate(policy, train_set)
    final = policy.loss_curve[-1]
    assert loss_mean(report) == pytest.approx(final, rel=0.10)


def test_divergence_aborts_with_last_finite_checkpoint():
    import hedgelab.errors as errors
    config = tiny_config(lr=1e150, epochs=2)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(errors.TrainingError) as info:
            train(config)
    ckpt = info.value.checkpoint
    assert ckpt is not None
    assert set(ckpt["params"]) == set(nn.param_shapes(config.net))
    for arr in ckpt["params"].values():
        assert np.all(np.isfinite(arr))
    assert ckpt["epoch"] == 0


def test_paper_scale_config_is_constructible():
    # the full-size feedforward recipe validates without being run
    config = TrainConfig(
        net=NetSpec(variant="feedforward", outputs=2),
        dist=fixed_model(0.2, 0.0, (0.0, 2.0)),
        grid=TimeGrid(1.0, 40),
        panel=InstrumentPanel.make(1.0, [0.0, 1.1], 1.4),
        costs=CostSpec.zero(2),
        objective="mean-abs",
        sample_size=2560000,
        epochs=20,
        batch_size=256,
    )
    assert config.sample_size == 2560000
    recurrent = TrainConfig(
        net=NetSpec(variant="recurrent", outputs=2),
        dist=fixed_model(0.2, 0.0, (0.0, 2.0)),
        grid=TimeGrid(1.0, 1000),
        panel=InstrumentPanel.make(1.0, [0.0, 1.1], 1.4),
        costs=CostSpec((5e-3, 5e-3)),
        objective="mean-abs",
        sample_size=256000,
    )
    assert recurrent.net.state_size == 2


def test_telemetry_csv():
    policy = train(tiny_config(epochs=2))
    buf = io.StringIO()
    telemetry_to_csv(policy, buf, config_hash="1234")
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# hedgelab telemetry"
    assert lines[3] == "epoch,mean_loss,max_loss,wall_time"
    assert len(lines) == 4 + 2
    first = lines[4].split(",")
    assert first[0] == "0"
    assert float(first[1]) == pytest.approx(policy.epoch_stats[0].mean_loss)
