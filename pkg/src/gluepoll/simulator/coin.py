"""Compiled engine for the ``glue_coin`` mode.

The server path is advanced one period (glue, visit, switch-over) at a time.
Within a period nothing feeds back into the arrival streams, so all of its
events are drawn up front:

* arrivals: Poisson counts per type over the period, uniform epochs;
* glue at station i: each orbiting type-i customer sticks with probability
  ``1 - exp(-nu_i G_i)``; a sticker's first retrial epoch is drawn from the
  exponential law truncated to the glue period;
* visit: the glued customers' service times, completions at their partial sums.

Events are then replayed in time order so that time integrals of every
coordinate (and of its square) are exact.  Coordinates are laid out as
``[q_1..q_N, o_1..o_N, n_1..n_N, total]`` with ``n_j = q_j + o_j``.
"""

import numpy as np
from numba import njit

EXPONENTIAL, DETERMINISTIC, GAMMA, TWO_POINT = 0, 1, 2, 3


@njit(cache=True)
def _draw(rng, code, a, b):
    if code == EXPONENTIAL:
        return rng.exponential(a)
    if code == DETERMINISTIC:
        return a
    if code == GAMMA:
        return rng.gamma(a, b)
    if rng.random() < b:
        return a
    return 0.0


@njit(cache=True)
def _bump(x, last, area, sq, c, t, d):
    dt = t - last[c]
    v = float(x[c])
    area[c] += v * dt
    sq[c] += v * v * dt
    last[c] = t
    x[c] += d


@njit(cache=True)
def _arrivals(rng, lam, t0, length):
    """Sorted arrival epochs and their types over ``[t0, t0 + length)``."""
    n = lam.size
    counts = np.zeros(n, np.int64)
    total = 0
    for j in range(n):
        if lam[j] > 0.0 and length > 0.0:
            counts[j] = rng.poisson(lam[j] * length)
            total += counts[j]
    times = np.empty(total)
    kinds = np.empty(total, np.int64)
    k = 0
    for j in range(n):
        for _ in range(counts[j]):
            times[k] = t0 + length * rng.random()
            kinds[k] = j
            k += 1
    order = np.argsort(times, kind="mergesort")
    return times[order], kinds[order]


@njit(cache=True)
def run_coin(
    lam, srv_code, srv_a, srv_b, sw_code, sw_a, sw_b, glue, nu, stick, cycles,
    rng_arr, rng_srv, rng_sw, rng_ret,
    glue_obs, visit_q, visit_obs, switch_obs, area_out, sq_out, cycle_len, visit_time, served,
):
    n = lam.size
    tot = 3 * n
    x = np.zeros(tot + 1, np.int64)
    last = np.zeros(tot + 1)
    area = np.zeros(tot + 1)
    sq = np.zeros(tot + 1)
    t = 0.0
    for c in range(cycles):
        t_cycle = t
        for i in range(n):
            # -- glue period of station i
            for j in range(n):
                glue_obs[c, i, j] = x[n + j]
            if x[i] != 0:
                raise RuntimeError("queue not empty at glue start")
            k = 0
            if x[n + i] > 0:
                k = rng_ret.binomial(x[n + i], stick[i])
            joins = np.empty(k)
            for m in range(k):
                joins[m] = t - np.log1p(-rng_ret.random() * stick[i]) / nu[i]
            joins.sort()
            times, kinds = _arrivals(rng_arr, lam, t, glue[i])
            a = 0
            b = 0
            while a < times.size or b < k:
                if b < k and (a >= times.size or joins[b] <= times[a]):
                    _bump(x, last, area, sq, n + i, joins[b], -1)
                    _bump(x, last, area, sq, i, joins[b], 1)
                    b += 1
                else:
                    j = kinds[a]
                    if j == i:
                        _bump(x, last, area, sq, i, times[a], 1)
                    else:
                        _bump(x, last, area, sq, n + j, times[a], 1)
                    _bump(x, last, area, sq, 2 * n + j, times[a], 1)
                    _bump(x, last, area, sq, tot, times[a], 1)
                    a += 1
            t += glue[i]

            # -- visit of station i: serve exactly the glued customers
            q = x[i]
            visit_q[c, i] = q
            for j in range(n):
                visit_obs[c, i, j] = x[n + j]
            done = np.empty(q)
            s = t
            for m in range(q):
                s += _draw(rng_srv, srv_code[i], srv_a[i], srv_b[i])
                done[m] = s
            length = s - t
            times, kinds = _arrivals(rng_arr, lam, t, length)
            a = 0
            b = 0
            while a < times.size or b < q:
                # completion before arrival on ties
                if b < q and (a >= times.size or done[b] <= times[a]):
                    _bump(x, last, area, sq, i, done[b], -1)
                    _bump(x, last, area, sq, 2 * n + i, done[b], -1)
                    _bump(x, last, area, sq, tot, done[b], -1)
                    served[c, i] += 1
                    b += 1
                else:
                    j = kinds[a]
                    _bump(x, last, area, sq, n + j, times[a], 1)
                    _bump(x, last, area, sq, 2 * n + j, times[a], 1)
                    _bump(x, last, area, sq, tot, times[a], 1)
                    a += 1
            t += length
            visit_time[c] += length

            # -- switch-over from station i
            if x[i] != 0:
                raise RuntimeError("queue not empty at switch-over start")
            for j in range(n):
                switch_obs[c, i, j] = x[n + j]
            length = _draw(rng_sw, sw_code[i], sw_a[i], sw_b[i])
            times, kinds = _arrivals(rng_arr, lam, t, length)
            for a in range(times.size):
                _bump(x, last, area, sq, n + kinds[a], times[a], 1)
                _bump(x, last, area, sq, 2 * n + kinds[a], times[a], 1)
                _bump(x, last, area, sq, tot, times[a], 1)
            t += length

        for m in range(tot + 1):
            _bump(x, last, area, sq, m, t, 0)
            area_out[c, m] = area[m]
            sq_out[c, m] = sq[m]
            area[m] = 0.0
            sq[m] = 0.0
        cycle_len[c] = t - t_cycle
