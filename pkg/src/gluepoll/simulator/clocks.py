"""Event-calendar engine for the ``exact_clocks`` mode.

Every orbiting customer carries its own exponential retrial clock.  A retrial
that fires outside the glue period of its station has no effect other than
re-arming the clock.  This engine is slow and exists as a correctness check
for the compiled one; it writes the same trace arrays.

Simultaneous events are processed in the order phase end, service completion,
external arrival, retrial.  So an arrival exactly at the end of a glue period
is already past the glue and goes to orbit.
"""

from __future__ import annotations

import heapq

import numpy as np

PHASE_END, SERVICE, ARRIVAL, RETRIAL = 0, 1, 2, 3
GLUE, VISIT, SWITCH = 0, 1, 2


class _Exponentials:
    """Standard exponential draws served from pre-generated blocks."""

    def __init__(self, rng: np.random.Generator, block: int = 8192):
        self._rng = rng
        self._block = block
        self._buf = rng.standard_exponential(block).tolist()
        self._k = 0

    def __call__(self) -> float:
        if self._k == self._block:
            self._buf = self._rng.standard_exponential(self._block).tolist()
            self._k = 0
        v = self._buf[self._k]
        self._k += 1
        return v


def run_clocks(config, cycles, rngs, trace):
    """Simulate ``cycles`` cycles of ``config`` and fill ``trace`` in place.

    ``rngs`` maps stream names to generators, ``trace`` holds the output
    arrays allocated by the caller.
    """
    n = config.n
    tot = 3 * n
    lam = config.arrival_rates.tolist()
    nu = config.retrial_rates.tolist()
    glue = config.glue.tolist()
    services = [st.service for st in config.stations]
    switches = [st.switchover for st in config.stations]
    arr_exp = _Exponentials(rngs["arrivals"])
    ret_exp = _Exponentials(rngs["retrials"])
    srv_rng, sw_rng = rngs["services"], rngs["switchovers"]

    x = [0] * (tot + 1)
    last = [0.0] * (tot + 1)
    area = [0.0] * (tot + 1)
    sq = [0.0] * (tot + 1)

    def bump(c, t, d):
        v = x[c]
        dt = t - last[c]
        area[c] += v * dt
        sq[c] += v * v * dt
        last[c] = t
        x[c] = v + d

    cal: list = []
    seq = 0

    def push(t, kind, j):
        nonlocal seq
        heapq.heappush(cal, (t, kind, seq, j))
        seq += 1

    for j in range(n):
        if lam[j] > 0:
            push(arr_exp() / lam[j], ARRIVAL, j)

    glue_obs, visit_q, visit_obs = trace["glue"], trace["visit_queue"], trace["visit"]
    switch_obs, served, visit_time = trace["switch"], trace["served"], trace["visit_time"]

    c, station, phase, t_cycle, t_visit = 0, 0, GLUE, 0.0, 0.0
    glue_obs[0, 0] = x[n:2 * n]
    push(glue[0], PHASE_END, 0)

    while True:
        t, kind, _, j = heapq.heappop(cal)
        if kind == ARRIVAL:
            push(t + arr_exp() / lam[j], ARRIVAL, j)
            if phase == GLUE and station == j:
                bump(j, t, 1)
            else:
                bump(n + j, t, 1)
                push(t + ret_exp() / nu[j], RETRIAL, j)
            bump(2 * n + j, t, 1)
            bump(tot, t, 1)
        elif kind == RETRIAL:
            if phase == GLUE and station == j:
                bump(n + j, t, -1)
                bump(j, t, 1)
            else:
                push(t + ret_exp() / nu[j], RETRIAL, j)
        else:
            if kind == SERVICE:
                bump(station, t, -1)
                bump(2 * n + station, t, -1)
                bump(tot, t, -1)
                served[c, station] += 1
                if x[station] > 0:
                    push(t + float(services[station].sample(srv_rng)), SERVICE, station)
                    continue
            # the current phase is over
            if phase == GLUE:
                phase, t_visit = VISIT, t
                visit_q[c, station] = x[station]
                visit_obs[c, station] = x[n:2 * n]
                if x[station] > 0:
                    push(t + float(services[station].sample(srv_rng)), SERVICE, station)
                    continue
            if phase == VISIT:
                if x[station] != 0:
                    raise RuntimeError("queue not empty at switch-over start")
                visit_time[c] += t - t_visit
                phase = SWITCH
                switch_obs[c, station] = x[n:2 * n]
                push(t + float(switches[station].sample(sw_rng)), PHASE_END, station)
                continue
            # switch-over done: move on to the next glue period
            station = (station + 1) % n
            if station == 0:
                for m in range(tot + 1):
                    bump(m, t, 0)
                trace["area"][c] = area
                trace["area_sq"][c] = sq
                trace["cycle_length"][c] = t - t_cycle
                area[:] = [0.0] * (tot + 1)
                sq[:] = [0.0] * (tot + 1)
                t_cycle = t
                c += 1
                if c == cycles:
                    return
            phase = GLUE
            glue_obs[c, station] = x[n:2 * n]
            push(t + glue[station], PHASE_END, station)
