"""Minimal neural engine for hedging policies.

Two architectures: a feedforward stack of three ReLU hidden layers with an
identity output head, and a recurrent variant that inserts a GRU layer with
one cell per hedging instrument between the second and third hidden layers.
The network reads (t / horizon, S_t) at each trading timepoint and emits one
position per hedging instrument.

Gradients are hand-written reverse-mode over the fixed episode graph:
network forward at every timepoint, PnL accounting with transaction costs,
then one of the two loss functionals. Subgradient conventions: d|x|/dx = 0
at x = 0 (both in cost terms and in |PnL|), ReLU derivative 0 at the kink,
and the batch-max loss routes gradient only through the first argmax path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .accounting import CostSpec, instrument_values
from .errors import ConfigError, DomainError, TrainingError
from .simulator import ScenarioSet
from .strategies import InstrumentPanel
from .analytics import MarketParams

VARIANTS = ("feedforward", "recurrent")
OBJECTIVES = ("mean-abs", "batch-max")

INIT_SCHEME = "he-uniform dense, uniform(+-1/sqrt(fan_in)) gru, zero bias"

CHECKPOINT_FORMAT = "hedgelab-checkpoint-v1"


@dataclass(frozen=True)
class NetSpec:
    """Architecture descriptor: variant, output count M, hidden widths."""

    variant: str
    outputs: int
    hidden: tuple[int, int, int] = (100, 100, 100)
    inputs: int = 2

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.outputs < 1:
            raise ConfigError("the network needs at least one output")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if len(self.hidden) != 3 or any(h < 1 for h in self.hidden):
            raise ConfigError("hidden must be three positive widths")

    @property
    def recurrent(self) -> bool:
        return self.variant == "recurrent"

    @property
    def state_size(self) -> int:
        # the GRU layer has one cell per output instrument
        return self.outputs if self.recurrent else 0


_GRU_GATES = ("r", "z", "n")


def param_shapes(spec: NetSpec) -> dict[str, tuple[int, ...]]:
    """Parameter names and shapes, in the canonical (checkpoint) order."""
    h1, h2, h3 = spec.hidden
    shapes = {"w1": (spec.inputs, h1), "b1": (h1,), "w2": (h1, h2), "b2": (h2,)}
    if spec.recurrent:
        m = spec.state_size
        for g in _GRU_GATES:
            shapes[f"wx{g}"] = (h2, m)
            shapes[f"wh{g}"] = (m, m)
            shapes[f"b{g}"] = (m,)
        shapes["w3"] = (m, h3)
    else:
        shapes["w3"] = (h2, h3)
    shapes["b3"] = (h3,)
    shapes["w4"] = (h3, spec.outputs)
    shapes["b4"] = (spec.outputs,)
    return shapes


def init_params(spec: NetSpec, seed: int) -> dict[str, np.ndarray]:
    """He-uniform dense weights, uniform(+-1/sqrt(fan_in)) GRU gates, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(spec).items():
        if name.startswith("b"):
            params[name] = np.zeros(shape)
        elif name.startswith(("wx", "wh")):
            k = 1.0 / math.sqrt(shape[0])
            params[name] = rng.uniform(-k, k, size=shape)
        else:
            k = math.sqrt(6.0 / shape[0])
            params[name] = rng.uniform(-k, k, size=shape)
    return params


def zeros_like_params(params: dict) -> dict:
    return {k: np.zeros_like(v) for k, v in params.items()}


def flatten_params(params: dict, spec: NetSpec) -> np.ndarray:
    return np.concatenate([params[k].ravel() for k in param_shapes(spec)])


def unflatten_params(flat: np.ndarray, spec: NetSpec) -> dict:
    out = {}
    pos = 0
    for name, shape in param_shapes(spec).items():
        size = int(np.prod(shape))
        out[name] = flat[pos:pos + size].reshape(shape).copy()
        pos += size
    if pos != flat.size:
        raise DomainError("flat parameter vector has the wrong length")
    return out


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _gru_step(params, x, h):
    """One GRU step; returns the new state and the backward cache."""
    r = _sigmoid(x @ params["wxr"] + h @ params["whr"] + params["br"])
    z = _sigmoid(x @ params["wxz"] + h @ params["whz"] + params["bz"])
    h_whn = h @ params["whn"]
    c = np.tanh(x @ params["wxn"] + r * h_whn + params["bn"])
    h_new = z * h + (1.0 - z) * c
    return h_new, (x, h, r, z, c, h_whn)


def _gru_backward(params, grads, cache, dh):
    """Backprop one GRU step; returns (dx, dh_prev)."""
    x, h_prev, r, z, c, h_whn = cache
    dz = dh * (h_prev - c)
    dc = dh * (1.0 - z)
    dh_prev = dh * z
    dcpre = dc * (1.0 - c * c)
    grads["wxn"] += x.T @ dcpre
    grads["bn"] += dcpre.sum(axis=0)
    dx = dcpre @ params["wxn"].T
    dr = dcpre * h_whn
    d_hwhn = dcpre * r
    grads["whn"] += h_prev.T @ d_hwhn
    dh_prev += d_hwhn @ params["whn"].T
    drpre = dr * r * (1.0 - r)
    grads["wxr"] += x.T @ drpre
    grads["whr"] += h_prev.T @ drpre
    grads["br"] += drpre.sum(axis=0)
    dx += drpre @ params["wxr"].T
    dh_prev += drpre @ params["whr"].T
    dzpre = dz * z * (1.0 - z)
    grads["wxz"] += x.T @ dzpre
    grads["whz"] += h_prev.T @ dzpre
    grads["bz"] += dzpre.sum(axis=0)
    dx += dzpre @ params["wxz"].T
    dh_prev += dzpre @ params["whz"].T
    return dx, dh_prev


def forward(params: dict, spec: NetSpec, x, state=None):
    """Apply the policy at one timepoint.

    ``x`` holds the two features (normalised time, price), shape (2,) or
    (B, 2). Returns (positions, new_state); the state is None for the
    feedforward variant and (B, M) for the recurrent one.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError("network inputs must be finite")
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != spec.inputs:
        raise DomainError(f"expected {spec.inputs} input features, got {x2.shape[1]}")
    a1 = np.maximum(x2 @ params["w1"] + params["b1"], 0.0)
    a2 = np.maximum(a1 @ params["w2"] + params["b2"], 0.0)
    if spec.recurrent:
        if state is None:
            state = np.zeros((x2.shape[0], spec.state_size))
        else:
            state = np.atleast_2d(np.asarray(state, dtype=np.float64))
            if state.shape != (x2.shape[0], spec.state_size):
                raise DomainError("state shape does not match the batch and spec")
        h, _ = _gru_step(params, a2, state)
        a3 = np.maximum(h @ params["w3"] + params["b3"], 0.0)
        q = a3 @ params["w4"] + params["b4"]
        return (q[0], h[0]) if single else (q, h)
    if state is not None:
        raise DomainError("the feedforward variant carries no state")
    a3 = np.maximum(a2 @ params["w3"] + params["b3"], 0.0)
    q = a3 @ params["w4"] + params["b4"]
    return (q[0], None) if single else (q, None)


def episode_positions(params: dict, spec: NetSpec, t_norm: np.ndarray,
                      paths: np.ndarray) -> np.ndarray:
    """Positions (B, n, M) from running the policy at timepoints 0..n-1."""
    q, _ = _episode_forward(params, spec, t_norm, paths, keep_cache=False)
    return q


def _episode_forward(params, spec, t_norm, paths, keep_cache):
    b, cols = paths.shape
    n = len(t_norm)
    if cols != n + 1:
        raise DomainError("paths must have one more column than trading timepoints")
    if spec.recurrent:
        h = np.zeros((b, spec.state_size))
        q = np.empty((b, n, spec.outputs))
        steps = []
        for i in range(n):
            x = np.column_stack((np.full(b, t_norm[i]), paths[:, i]))
            a1 = np.maximum(x @ params["w1"] + params["b1"], 0.0)
            a2 = np.maximum(a1 @ params["w2"] + params["b2"], 0.0)
            h, gru_cache = _gru_step(params, a2, h)
            a3 = np.maximum(h @ params["w3"] + params["b3"], 0.0)
            q[:, i, :] = a3 @ params["w4"] + params["b4"]
            if keep_cache:
                steps.append((x, a1, gru_cache, h, a3))
        return q, steps
    # feedforward: all timepoints are independent, evaluate them in one batch
    x = np.empty((b * n, 2))
    x[:, 0] = np.repeat(t_norm[None, :], b, axis=0).ravel()
    x[:, 1] = paths[:, :n].ravel()
    a1 = np.maximum(x @ params["w1"] + params["b1"], 0.0)
    a2 = np.maximum(a1 @ params["w2"] + params["b2"], 0.0)
    a3 = np.maximum(a2 @ params["w3"] + params["b3"], 0.0)
    q = (a3 @ params["w4"] + params["b4"]).reshape(b, n, spec.outputs)
    return q, ((x, a1, a2, a3) if keep_cache else None)


def _episode_backward(params, spec, cache, dq):
    grads = zeros_like_params(params)
    b, n, m = dq.shape
    if spec.recurrent:
        dh = np.zeros((b, spec.state_size))
        for i in range(n - 1, -1, -1):
            x, a1, gru_cache, h, a3 = cache[i]
            dqi = dq[:, i, :]
            grads["w4"] += a3.T @ dqi
            grads["b4"] += dqi.sum(axis=0)
            dz3 = (dqi @ params["w4"].T) * (a3 > 0.0)
            grads["w3"] += h.T @ dz3
            grads["b3"] += dz3.sum(axis=0)
            dh = dh + dz3 @ params["w3"].T
            da2, dh = _gru_backward(params, grads, gru_cache, dh)
            a2 = gru_cache[0]
            dz2 = da2 * (a2 > 0.0)
            grads["w2"] += a1.T @ dz2
            grads["b2"] += dz2.sum(axis=0)
            dz1 = (dz2 @ params["w2"].T) * (a1 > 0.0)
            grads["w1"] += x.T @ dz1
            grads["b1"] += dz1.sum(axis=0)
        return grads
    x, a1, a2, a3 = cache
    dqf = dq.reshape(b * n, m)
    grads["w4"] = a3.T @ dqf
    grads["b4"] = dqf.sum(axis=0)
    dz3 = (dqf @ params["w4"].T) * (a3 > 0.0)
    grads["w3"] = a2.T @ dz3
    grads["b3"] = dz3.sum(axis=0)
    dz2 = (dz3 @ params["w3"].T) * (a2 > 0.0)
    grads["w2"] = a1.T @ dz2
    grads["b2"] = dz2.sum(axis=0)
    dz1 = (dz2 @ params["w2"].T) * (a1 > 0.0)
    grads["w1"] = x.T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return grads


def _episode_pnl(q, v0, values, cost_frac):
    """PnL per path plus the pieces the adjoint needs."""
    b, n, m = q.shape
    dv = values[:, 1:, :] - values[:, :-1, :]
    trading = np.einsum("pim,pim->p", q, dv)
    if np.any(cost_frac != 0.0):
        absv = np.abs(values)
        q_full = np.concatenate((q, np.zeros((b, 1, m))), axis=1)
        dq = np.diff(q_full, axis=1, prepend=0.0)
        sign = np.sign(dq)
        cost = np.einsum("pim,pim,m->p", absv, np.abs(dq), cost_frac)
        # d cost / d q_i = p * (|V_i| s_i - |V_{i+1}| s_{i+1}) for i < n
        cost_adj = cost_frac[None, None, :] * (
            absv[:, :-1, :] * sign[:, :-1, :] - absv[:, 1:, :] * sign[:, 1:, :]
        )
    else:
        cost = np.zeros(b)
        cost_adj = 0.0
    pnl = v0[:, 0] + trading - v0[:, -1] - cost
    return pnl, dv, cost_adj


def episode_loss(params: dict, spec: NetSpec, scen: ScenarioSet,
                 panel: InstrumentPanel, mkt: MarketParams, costs: CostSpec,
                 objective: str) -> float:
    """Loss of the policy on a batch, without gradients."""
    loss, _ = _episode_run(params, spec, scen, panel, mkt, costs, objective,
                           want_grads=False)
    return loss


def episode_gradient(params: dict, spec: NetSpec, scen: ScenarioSet,
                     panel: InstrumentPanel, mkt: MarketParams, costs: CostSpec,
                     objective: str):
    """Loss and its reverse-mode gradient with respect to every parameter."""
    return _episode_run(params, spec, scen, panel, mkt, costs, objective,
                        want_grads=True)


def _episode_run(params, spec, scen, panel, mkt, costs, objective, want_grads):
    if objective not in OBJECTIVES:
        raise ConfigError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    if spec.outputs != panel.size:
        raise ConfigError("network outputs must match the panel size")
    if len(costs.fractions) != panel.size:
        raise ConfigError("cost spec does not match the panel size")
    panel.check_grid(scen.grid)
    n = scen.grid.steps
    t_norm = np.arange(n) * (scen.grid.dt / scen.grid.horizon)
    q, cache = _episode_forward(params, spec, t_norm, scen.paths, keep_cache=want_grads)
    v0, values = instrument_values(scen, panel, mkt)
    p = np.asarray(costs.fractions)
    pnl, dv, cost_adj = _episode_pnl(q, v0, values, p)
    abs_pnl = np.abs(pnl)
    if not np.all(np.isfinite(abs_pnl)):
        bad = int(np.argmax(~np.isfinite(abs_pnl)))
        raise TrainingError(f"non-finite PnL at batch index {bad}", path_index=bad)
    if objective == "mean-abs":
        loss = float(np.mean(abs_pnl))
        weights = np.sign(pnl) / len(pnl)
    else:
        top = int(np.argmax(abs_pnl))
        loss = float(abs_pnl[top])
        weights = np.zeros(len(pnl))
        weights[top] = np.sign(pnl[top])
    if not want_grads:
        return loss, None
    dq = weights[:, None, None] * (dv - cost_adj)
    grads = _episode_backward(params, spec, cache, dq)
    return loss, grads


@dataclass
class AdamState:
    """Adam optimizer state: step count, first/second moment accumulators."""

    m: dict
    v: dict
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: dict, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(m=zeros_like_params(params), v=zeros_like_params(params),
                     step=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: dict, grads: dict, state: AdamState):
    """Standard Adam update with bias correction; returns (params, state)."""
    if set(grads) != set(params):
        raise DomainError("gradient keys do not match parameters")
    for k, g in grads.items():
        if g.shape != params[k].shape:
            raise DomainError(f"gradient shape mismatch for {k}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in {k}")
    t = state.step + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_m, new_v, new_p = {}, {}, {}
    for k, g in grads.items():
        new_m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        new_v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        new_p[k] = params[k] - state.lr * (new_m[k] / bc1) / (np.sqrt(new_v[k] / bc2) + state.eps)
    return new_p, replace(state, m=new_m, v=new_v, step=t)


def save_checkpoint(fileobj, params: dict, spec: NetSpec, init_seed: int,
                    adam_state: AdamState | None = None,
                    config_hash: str | None = None) -> None:
    """JSON checkpoint with full 64-bit round-trip precision for every array."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "net": {"variant": spec.variant, "outputs": spec.outputs,
                "hidden": list(spec.hidden), "inputs": spec.inputs},
        "init": {"scheme": INIT_SCHEME, "seed": init_seed},
        "params": {k: params[k].ravel().tolist() for k in param_shapes(spec)},
    }
    if adam_state is not None:
        doc["adam"] = {
            "step": adam_state.step, "lr": adam_state.lr,
            "beta1": adam_state.beta1, "beta2": adam_state.beta2, "eps": adam_state.eps,
            "m": {k: adam_state.m[k].ravel().tolist() for k in param_shapes(spec)},
            "v": {k: adam_state.v[k].ravel().tolist() for k in param_shapes(spec)},
        }
    if config_hash is not None:
        doc["config_hash"] = config_hash
    json.dump(doc, fileobj, sort_keys=True)
    fileobj.write("\n")


def load_checkpoint(fileobj):
    """Returns (params, spec, adam_state_or_None, metadata dict)."""
    doc = json.load(fileobj)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError("not a recognised checkpoint file")
    net = doc["net"]
    spec = NetSpec(variant=net["variant"], outputs=net["outputs"],
                   hidden=tuple(net["hidden"]), inputs=net["inputs"])
    shapes = param_shapes(spec)
    params = {k: np.array(doc["params"][k]).reshape(shapes[k]) for k in shapes}
    adam = None
    if "adam" in doc:
        a = doc["adam"]
        adam = AdamState(
            m={k: np.array(a["m"][k]).reshape(shapes[k]) for k in shapes},
            v={k: np.array(a["v"][k]).reshape(shapes[k]) for k in shapes},
            step=a["step"], lr=a["lr"], beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"],
        )
    meta = {"init": doc.get("init"), "config_hash": doc.get("config_hash")}
    return params, spec, adam, meta
