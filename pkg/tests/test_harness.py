"""Harness-level behaviour: streaming equals whole-set evaluation, table
semantics, surface identities, and trace structure."""

import numpy as np
import pytest

from hedgelab.accounting import CostSpec, compute_pnl, loss_mean
from hedgelab.analytics import MarketParams
from hedgelab.config import ExperimentConfig
from hedgelab.errors import DomainError
from hedgelab.harness import (classical_report, gamma_positions_at,
                              policy_positions_at, run_table, surface_rows,
                              trace_rows)
from hedgelab.neuralnet import NetSpec, init_params, param_shapes
from hedgelab.simulator import TimeGrid, fixed_model, sample_scenarios
from hedgelab.strategies import InstrumentPanel, delta_hedge
from hedgelab.training import TrainConfig, TrainedPolicy, train

MKT = MarketParams()
PANEL2 = InstrumentPanel.make(1.0, [0.0, 1.1], 1.4)


def test_streamed_report_equals_whole_set():
    dist = fixed_model(0.2, 0.0, (0.4, 1.8))
    grid = TimeGrid(1.0, 10)
    streamed = classical_report("delta", dist, grid, PANEL2, MKT,
                                CostSpec.zero(2), 100, seed=5, chunk=17)
    scen = sample_scenarios(dist, grid, 100, seed=5)
    whole = compute_pnl(delta_hedge(scen, PANEL2, MKT), scen, PANEL2, MKT,
                        CostSpec.zero(2))
    assert np.allclose(streamed.pnl, whole.pnl, atol=1e-15)


def test_table_workers_agree_with_serial():
    cfg = ExperimentConfig(eval_paths=64, steps=6, seed=21)
    serial = run_table(cfg, objectives=("mean-abs",), regimes=("none", "high"),
                       workers=1)
    threaded = run_table(cfg, objectives=("mean-abs",), regimes=("none", "high"),
                         workers=4)
    for a, b in zip(serial.cells, threaded.cells):
        assert a.loss == b.loss


def test_table_gamma_beats_delta_without_costs():
    cfg = ExperimentConfig(eval_paths=300, steps=100, seed=8)
    table = run_table(cfg, objectives=("mean-abs",), regimes=("none",))
    by_strategy = {c.strategy: c.loss for c in table.cells}
    assert by_strategy["gamma"] < by_strategy["delta"]


def _tiny_policy(variant="feedforward", n=6, outputs=2, zero=False):
    config = TrainConfig(
        net=NetSpec(variant=variant, outputs=outputs, hidden=(8, 8, 8)),
        dist=fixed_model(0.2, 0.0, (0.5, 1.5)),
        grid=TimeGrid(1.0, n),
        panel=PANEL2 if outputs == 2 else InstrumentPanel.make(1.0, [0.0], 1.4),
        costs=CostSpec.zero(outputs),
        objective="mean-abs",
        sample_size=64, epochs=1, batch_size=32, seed=5,
    )
    if zero:
        params = {k: np.zeros(s) for k, s in param_shapes(config.net).items()}
        return TrainedPolicy(params=params, spec=config.net, config=config,
                             loss_curve=[], epoch_stats=[], initial_loss=0.0,
                             init_seed=0)
    return train(config)


class TestSurfaces:
    def test_gamma_surface_is_neutral(self):
        rows = surface_rows("gamma", [0.25, 0.75], np.linspace(0.7, 1.3, 9),
                            PANEL2, MKT, horizon=1.0)
        for (_, _, pd, pg, d0, g0) in rows:
            assert pg == pytest.approx(g0, abs=1e-10)
            assert pd == pytest.approx(d0, abs=1e-10)

    def test_delta_surface_has_zero_gamma(self):
        rows = surface_rows("delta", [0.5], np.linspace(0.7, 1.3, 5),
                            PANEL2, MKT, horizon=1.0)
        for (_, _, pd, pg, d0, _) in rows:
            assert pg == 0.0
            assert pd == pytest.approx(d0, abs=1e-14)

    def test_policy_surface_feedforward(self):
        policy = _tiny_policy()
        rows = surface_rows(policy, [0.5], np.array([0.9, 1.1]), PANEL2, MKT, 1.0)
        assert len(rows) == 2
        assert all(np.isfinite(v) for row in rows for v in row[2:])

    def test_recurrent_surface_uses_grid_times(self):
        policy = _tiny_policy(variant="recurrent")
        q = policy_positions_at(policy, 0.5, np.array([1.0]))
        assert q.shape == (1, 2)
        with pytest.raises(DomainError):
            policy_positions_at(policy, 0.52, np.array([1.0]))

    def test_constant_prefix_state_convention(self):
        # for a recurrent policy the surface at a grid time equals running
        # the net along a constant-price path up to that time
        policy = _tiny_policy(variant="recurrent")
        from hedgelab import neuralnet as nn
        s = 1.07
        i = 3
        t_norm = np.arange(i + 1) / 6.0
        paths = np.full((1, i + 2), s)
        q_ep = nn.episode_positions(policy.params, policy.spec, t_norm, paths)
        q_surf = policy_positions_at(policy, i / 6.0, np.array([s]))
        assert np.allclose(q_surf[0], q_ep[0, i, :], atol=0.0)

    def test_grid_bounds(self):
        with pytest.raises(DomainError):
            surface_rows("delta", [0.0], np.array([1.0]), PANEL2, MKT, 1.0)
        with pytest.raises(DomainError):
            surface_rows("delta", [0.5], np.array([2.5]), PANEL2, MKT, 1.0)


class TestGammaPositions:
    def test_matches_strategy_module(self):
        svals = np.linspace(0.6, 1.4, 9)
        q = gamma_positions_at(PANEL2, MKT, 0.4, svals)
        from hedgelab.strategies import gamma_hedge
        import dataclasses
        grid = TimeGrid(1.0, 5)  # 0.4 = 2 * 0.2
        base = sample_scenarios(fixed_model(0.0, 0.0, 1.0), grid, 9, seed=0)
        paths = np.repeat(svals[:, None], 6, axis=1)
        scen = dataclasses.replace(base, paths=paths)
        sched = gamma_hedge(scen, PANEL2, MKT)
        assert np.allclose(sched.q[:, 2, :], q, atol=1e-13)


def test_trace_rows_structure():
    policy = _tiny_policy()
    rows = trace_rows(policy, trace_seed=123)
    labels = {r[0] for r in rows}
    assert labels == {"policy", "gamma-benchmark"}
    bench = [r for r in rows if r[0] == "gamma-benchmark"]
    assert len(bench) == 7  # n + 1 timepoints
    # cumulative cost is nondecreasing
    cc = [r[-1] for r in bench]
    assert all(b >= a for a, b in zip(cc, cc[1:]))
    # benchmark rows satisfy the neutrality identity at trading times
    for r in bench[:-1]:
        assert r[6] == pytest.approx(r[8], abs=1e-10)


def test_high_cost_policy_spends_less_than_gamma_benchmark():
    # under high proportional costs the learned strategy trades far less
    # than mechanical gamma hedging; checked in aggregate on 2000 paths
    costs = CostSpec((5e-3, 5e-3))
    config = TrainConfig(
        net=NetSpec(variant="recurrent", outputs=2),
        dist=fixed_model(0.2, 0.0, (0.0, 2.0)),
        grid=TimeGrid(1.0, 20),
        panel=PANEL2,
        costs=costs,
        objective="mean-abs",
        sample_size=20000,
        epochs=10,
        batch_size=256,
        seed=1,
    )
    policy = train(config)
    from hedgelab.harness import policy_report
    rep_policy = policy_report(policy, 2000, seed=555)
    rep_gamma = classical_report("gamma", config.dist, config.grid, PANEL2,
                                 config.market, costs, 2000, seed=555)
    assert rep_policy.cost_total.mean() < rep_gamma.cost_total.mean()
    assert loss_mean(rep_policy) < loss_mean(rep_gamma)


def test_trace_constant_path_positions_move_slowly():
    # zero-vol path: positions drift only through time decay
    config = TrainConfig(
        net=NetSpec(variant="feedforward", outputs=2, hidden=(8, 8, 8)),
        dist=fixed_model(0.0, 0.0, 1.05),
        grid=TimeGrid(1.0, 20),
        panel=PANEL2,
        costs=CostSpec.zero(2),
        objective="mean-abs",
        sample_size=32, epochs=1, batch_size=32, seed=5,
    )
    policy = train(config)
    rows = [r for r in trace_rows(policy, trace_seed=3) if r[0] == "gamma-benchmark"]
    q1 = np.array([r[3] for r in rows[:-1]])
    q2 = np.array([r[4] for r in rows[:-1]])
    assert np.max(np.abs(np.diff(q1))) < 0.08
    assert np.max(np.abs(np.diff(q2))) < 0.08
