# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: counter-based path sampling, fused Black-Scholes grids,
PnL accumulation. Same counter layout and polynomial evaluation order as
``hedgelab.kernels._pyref``."""

from libc.math cimport erfc, exp, fabs, log, sqrt
from libc.stdint cimport int64_t, uint64_t

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "native"

cdef uint64_t GOLDEN = <uint64_t>0x9E3779B97F4A7C15
cdef uint64_t MIX1 = <uint64_t>0xBF58476D1CE4E5B9
cdef uint64_t MIX2 = <uint64_t>0x94D049BB133111EB

cdef double INV_SQRT2 = 0.7071067811865475244008443621
cdef double INV_SQRT_2PI = 0.3989422804014326779399460599

cdef inline uint64_t _mix64(uint64_t x) nogil:
    x = (x ^ (x >> 30)) * MIX1
    x = (x ^ (x >> 27)) * MIX2
    return x ^ (x >> 31)

cdef inline double _uniform(uint64_t seed, uint64_t counter) nogil:
    cdef uint64_t h = _mix64(seed + (counter + 1) * GOLDEN)
    return (<double>(h >> 11) + 0.5) * (2.0 ** -53)

# Wichura's AS241 (PPND16) coefficients, as in _pyref
cdef double[8] NDTRI_A = [
    3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
    3.3430575583588128105e4, 2.5090809287301226727e3]
cdef double[8] NDTRI_B = [
    1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
    2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
    5.2264952788528545610e3]
cdef double[8] NDTRI_C = [
    1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4]
cdef double[8] NDTRI_D = [
    1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
    1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
    1.05075007164441684324e-9]
cdef double[8] NDTRI_E = [
    6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
    2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7]
cdef double[8] NDTRI_F = [
    1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
    7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
    2.04426310338993978564e-15]

cdef inline double _poly8(double* coef, double x) nogil:
    cdef double r = coef[7]
    cdef int i
    for i in range(6, -1, -1):
        r = r * x + coef[i]
    return r

cdef inline double _ndtri(double u) nogil:
    cdef double q = u - 0.5
    cdef double r, z
    if fabs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly8(NDTRI_A, r) / _poly8(NDTRI_B, r)
    if q < 0.0:
        r = u
    else:
        r = 1.0 - u
    r = sqrt(-log(r))
    if r <= 5.0:
        r = r - 1.6
        z = _poly8(NDTRI_C, r) / _poly8(NDTRI_D, r)
    else:
        r = r - 5.0
        z = _poly8(NDTRI_E, r) / _poly8(NDTRI_F, r)
    if q < 0.0:
        return -z
    return z


def counter_uniform(seed, counters):
    """Uniform(0,1) draws for the given counters of stream ``seed``."""
    cdef uint64_t s = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    flat = np.ascontiguousarray(np.asarray(counters, dtype=np.uint64).reshape(-1))
    cdef const uint64_t[::1] cv = flat
    out = np.empty(flat.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(cv.shape[0]):
        ov[i] = _uniform(s, cv[i])
    return out.reshape(np.shape(counters))


def counter_normals(seed, counters):
    """Standard normal draws for the given counters of stream ``seed``."""
    cdef uint64_t s = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    flat = np.ascontiguousarray(np.asarray(counters, dtype=np.uint64).reshape(-1))
    cdef const uint64_t[::1] cv = flat
    out = np.empty(flat.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(cv.shape[0]):
        ov[i] = _ndtri(_uniform(s, cv[i]))
    return out.reshape(np.shape(counters))


def ndtri(u):
    """Inverse standard normal CDF on (0, 1), AS241 double precision."""
    arr = np.ascontiguousarray(np.asarray(u, dtype=np.float64).reshape(-1))
    cdef const double[::1] uv = arr
    out = np.empty(arr.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(uv.shape[0]):
        ov[i] = _ndtri(uv[i])
    if np.ndim(u) == 0:
        return float(out[0])
    return out.reshape(np.shape(u))


def gbm_scenarios(seed, first_path, count, n, double dt,
                  double spot_lo, double spot_hi, double mu_lo, double mu_hi,
                  double vol_lo, double vol_hi):
    """Counterpart of ``_pyref.gbm_scenarios``; see there for the layout."""
    cdef uint64_t s = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    cdef int64_t fp = first_path
    cdef int64_t cnt = count
    cdef int64_t nn = n
    cdef uint64_t stride = <uint64_t>(nn + 3)
    s0 = np.empty(cnt)
    mu = np.empty(cnt)
    vol = np.empty(cnt)
    paths = np.empty((cnt, nn + 1))
    cdef double[::1] s0v = s0
    cdef double[::1] muv = mu
    cdef double[::1] volv = vol
    cdef double[:, ::1] pv = paths
    cdef Py_ssize_t p, i
    cdef uint64_t base
    cdef double drift, sd, x, sqdt = sqrt(dt)
    with nogil:
        for p in range(cnt):
            base = (<uint64_t>(fp + p)) * stride
            s0v[p] = spot_lo + (spot_hi - spot_lo) * _uniform(s, base)
            muv[p] = mu_lo + (mu_hi - mu_lo) * _uniform(s, base + 1)
            volv[p] = vol_lo + (vol_hi - vol_lo) * _uniform(s, base + 2)
            drift = (muv[p] - 0.5 * volv[p] * volv[p]) * dt
            sd = volv[p] * sqdt
            x = s0v[p]
            pv[p, 0] = x
            for i in range(nn):
                x = x * exp(drift + sd * _ndtri(_uniform(s, base + 3 + <uint64_t>i)))
                pv[p, i + 1] = x
    return s0, mu, vol, paths


def bs_grid(spot, tau, double strike, double rate, double vol):
    """Counterpart of ``_pyref.bs_grid``: call price/delta/gamma grids."""
    sp = np.ascontiguousarray(spot, dtype=np.float64)
    tv = np.ascontiguousarray(tau, dtype=np.float64)
    cdef const double[:, ::1] sv = sp
    cdef const double[::1] tauv = tv
    cdef Py_ssize_t np_ = sv.shape[0], m = sv.shape[1]
    if tauv.shape[0] != m:
        raise ValueError("tau length does not match spot columns")
    price = np.empty((np_, m))
    delta = np.empty((np_, m))
    gamma = np.empty((np_, m))
    cdef double[:, ::1] prv = price
    cdef double[:, ::1] dev = delta
    cdef double[:, ::1] gav = gamma
    sig_a = np.empty(m)
    disc_a = np.empty(m)
    drift_a = np.empty(m)
    cdef double[::1] sigv = sig_a
    cdef double[::1] discv = disc_a
    cdef double[::1] driftv = drift_a
    cdef Py_ssize_t i, j
    cdef double x, d1, d2, nd1
    with nogil:
        if strike == 0.0:
            for i in range(np_):
                for j in range(m):
                    prv[i, j] = sv[i, j]
                    dev[i, j] = 1.0
                    gav[i, j] = 0.0
        else:
            for j in range(m):
                sigv[j] = vol * sqrt(tauv[j])
                discv[j] = strike * exp(-rate * tauv[j])
                driftv[j] = (rate + 0.5 * vol * vol) * tauv[j]
            for i in range(np_):
                for j in range(m):
                    x = sv[i, j]
                    if x <= 0.0:
                        prv[i, j] = 0.0
                        dev[i, j] = 0.0
                        gav[i, j] = 0.0
                    else:
                        d1 = (log(x / strike) + driftv[j]) / sigv[j]
                        d2 = d1 - sigv[j]
                        nd1 = 0.5 * erfc(-d1 * INV_SQRT2)
                        prv[i, j] = x * nd1 - discv[j] * (0.5 * erfc(-d2 * INV_SQRT2))
                        dev[i, j] = nd1
                        gav[i, j] = exp(-0.5 * d1 * d1) * INV_SQRT_2PI / (x * sigv[j])
    return price, delta, gamma


def pnl_terms(q, values, cost_frac):
    """Counterpart of ``_pyref.pnl_terms``: trading gains and costs."""
    qa = np.ascontiguousarray(q, dtype=np.float64)
    va = np.ascontiguousarray(values, dtype=np.float64)
    pa = np.ascontiguousarray(cost_frac, dtype=np.float64)
    cdef const double[:, :, ::1] qv = qa
    cdef const double[:, :, ::1] vv = va
    cdef const double[::1] pv = pa
    cdef Py_ssize_t np_ = qv.shape[0], rows = qv.shape[1], m = qv.shape[2]
    if vv.shape[0] != np_ or vv.shape[1] != rows or vv.shape[2] != m or pv.shape[0] != m:
        raise ValueError("pnl_terms shape mismatch")
    trading = np.zeros(np_)
    cost = np.zeros(np_)
    cdef double[::1] trv = trading
    cdef double[::1] cov = cost
    cdef Py_ssize_t p, i, a
    cdef double tr, co, prev, cur
    cdef bint any_cost = False
    for a in range(m):
        if pv[a] != 0.0:
            any_cost = True
    with nogil:
        for p in range(np_):
            tr = 0.0
            co = 0.0
            for a in range(m):
                prev = 0.0
                for i in range(rows - 1):
                    cur = qv[p, i, a]
                    tr += cur * (vv[p, i + 1, a] - vv[p, i, a])
                    if any_cost:
                        co += pv[a] * fabs(vv[p, i, a]) * fabs(cur - prev)
                    prev = cur
                if any_cost:
                    # row n: forced liquidation of the carried position
                    co += pv[a] * fabs(vv[p, rows - 1, a]) * fabs(qv[p, rows - 1, a] - prev)
            trv[p] = tr
            cov[p] = co
    return trading, cost
