"""Vectorised numpy reference implementations of the hot kernels.

Mirrors ``hedgelab.kernels._native`` (the compiled backend) operation for
operation: same counter layout, same inverse-CDF polynomial, same evaluation
order, so both backends produce the same scenario sets up to last-digit
rounding of the libm calls involved.
"""

import numpy as np
from scipy.special import erfc

BACKEND = "python"

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _mix64(x):
    # splitmix64 finaliser (Steele et al.); bijective on uint64
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


def counter_uniform(seed, counters):
    """Draw number ``counter`` of the uniform(0,1) stream keyed by ``seed``.

    Stateless: output depends only on (seed, counter), which makes path
    generation reproducible independently of chunking or execution order.
    """
    counters = np.asarray(counters, dtype=np.uint64)
    x = np.uint64(seed & _MASK64) + (counters + np.uint64(1)) * _GOLDEN
    h = _mix64(x)
    # top 53 bits, centered half-steps: values lie strictly inside (0, 1)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


# Wichura's AS241 (PPND16) rational approximations for the inverse normal
# CDF; relative error below 1e-15 across the open unit interval.
_NDTRI_A = (
    3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
    3.3430575583588128105e4, 2.5090809287301226727e3,
)
_NDTRI_B = (
    1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
    2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
    5.2264952788528545610e3,
)
_NDTRI_C = (
    1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4,
)
_NDTRI_D = (
    1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
    1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_NDTRI_E = (
    6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
    2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7,
)
_NDTRI_F = (
    1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
    7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _poly8(coef, x):
    r = np.full_like(x, coef[7])
    for c in coef[6::-1]:
        r = r * x + c
    return r


def ndtri(u):
    """Inverse standard normal CDF on (0, 1), AS241 double precision."""
    u = np.asarray(u, dtype=np.float64)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    q = u - 0.5
    out = np.empty_like(u)
    central = np.abs(q) <= 0.425
    if central.any():
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _poly8(_NDTRI_A, r) / _poly8(_NDTRI_B, r)
    tail = ~central
    if tail.any():
        qt = q[tail]
        r = np.where(qt < 0.0, u[tail], 1.0 - u[tail])
        r = np.sqrt(-np.log(r))
        z = np.empty_like(r)
        near = r <= 5.0
        rn = r[near] - 1.6
        z[near] = _poly8(_NDTRI_C, rn) / _poly8(_NDTRI_D, rn)
        rf = r[~near] - 5.0
        z[~near] = _poly8(_NDTRI_E, rf) / _poly8(_NDTRI_F, rf)
        out[tail] = np.where(qt < 0.0, -z, z)
    return out[0] if scalar else out


def counter_normals(seed, counters):
    """Standard normal draws for the given counters of stream ``seed``."""
    return ndtri(counter_uniform(seed, counters))


def gbm_scenarios(seed, first_path, count, n, dt,
                  spot_lo, spot_hi, mu_lo, mu_hi, vol_lo, vol_hi):
    """Sample per-path (spot, drift, vol) and fill exact-scheme GBM paths.

    Path ``p`` (global index ``first_path + p``) owns counters
    ``p * (n + 3) + {0: spot, 1: drift, 2: vol, 3..n+2: increments}``, so a
    chunked generation concatenates to exactly the single-shot result.
    Returns ``(s0, mu, vol, paths)`` with ``paths`` of shape (count, n + 1).
    """
    stride = np.uint64(n + 3)
    pidx = np.arange(first_path, first_path + count, dtype=np.uint64) * stride
    s0 = spot_lo + (spot_hi - spot_lo) * counter_uniform(seed, pidx)
    mu = mu_lo + (mu_hi - mu_lo) * counter_uniform(seed, pidx + np.uint64(1))
    vol = vol_lo + (vol_hi - vol_lo) * counter_uniform(seed, pidx + np.uint64(2))
    counters = pidx[:, None] + np.uint64(3) + np.arange(n, dtype=np.uint64)[None, :]
    z = ndtri(counter_uniform(seed, counters))
    growth = np.exp((mu - 0.5 * vol * vol)[:, None] * dt + (vol * np.sqrt(dt))[:, None] * z)
    paths = np.empty((count, n + 1))
    paths[:, 0] = s0
    for i in range(n):
        # sequential multiply, matching the compiled backend step for step
        np.multiply(paths[:, i], growth[:, i], out=paths[:, i + 1])
    return s0, mu, vol, paths


def bs_grid(spot, tau, strike, rate, vol):
    """Black-Scholes call price/delta/gamma over a (paths, times) grid.

    ``spot`` is (P, m) with spot >= 0, ``tau`` is (m,) with tau > 0.
    strike == 0 returns (spot, 1, 0) exactly; spot == 0 returns (0, 0, 0)
    for positive strikes (absorbed paths).
    """
    spot = np.ascontiguousarray(spot, dtype=np.float64)
    tau = np.ascontiguousarray(tau, dtype=np.float64)
    if strike == 0.0:
        return spot.copy(), np.ones_like(spot), np.zeros_like(spot)
    sig = vol * np.sqrt(tau)
    disc = strike * np.exp(-rate * tau)
    a = (rate + 0.5 * vol * vol) * tau
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(spot / strike) + a) / sig
        d2 = d1 - sig
        nd1 = 0.5 * erfc(-d1 * _INV_SQRT2)
        nd2 = 0.5 * erfc(-d2 * _INV_SQRT2)
        price = spot * nd1 - disc * nd2
        pdf = np.exp(-0.5 * d1 * d1) * _INV_SQRT_2PI
        gamma = np.where(spot > 0.0, pdf / (spot * sig), 0.0)
    dead = spot <= 0.0
    if dead.any():
        price[dead] = 0.0
        nd1[dead] = 0.0
    return price, nd1, gamma


def pnl_terms(q, values, cost_frac):
    """Trading gains and transaction costs of a position schedule.

    ``q`` and ``values`` are (P, n + 1, M); row n of ``q`` must be the forced
    liquidation row (all zeros). Gains sum q_i * (V_{i+1} - V_i); costs sum
    p_alpha * |V_i| * |q_i - q_{i-1}| over i = 0..n with q_{-1} = 0, which
    charges both the initial position build and the final liquidation.
    """
    q = np.asarray(q, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    cost_frac = np.asarray(cost_frac, dtype=np.float64)
    dv = values[:, 1:, :] - values[:, :-1, :]
    trading = np.einsum("pim,pim->p", q[:, :-1, :], dv)
    if np.any(cost_frac != 0.0):
        dq = np.diff(q, axis=1, prepend=0.0)
        cost = np.einsum("pim,pim,m->p", np.abs(values), np.abs(dq), cost_frac)
    else:
        cost = np.zeros(q.shape[0])
    return trading, cost
