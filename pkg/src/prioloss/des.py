"""Discrete-event simulator of the two-class preemptive-resume loss/queue system.

The event loop lives in a numba-compiled core so that multi-million-event
horizons run in seconds.  Because at most c services plus the two arrival
streams can be pending, the next event is found by a linear scan instead of a
calendar heap.

Semantics:
  * class-1 arrival: lost if all c servers hold class-1 customers; takes an
    idle server if one exists; otherwise preempts a class-2 customer in
    service (victim rule configurable, default: the most recently started).
    The victim's remaining work is frozen and it re-enters at the head of the
    buffer; multiple preempted customers keep their original arrival order.
  * class-2 arrival: starts service on an idle server, else joins the tail.
  * any departure: the freed server takes the buffer head (preempted customers
    first, resuming their remaining work).

Ties between a departure and an arrival at the same instant are resolved in
favor of the departure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit
from scipy import stats as sps

from .model import ServiceDistribution, SystemParams, validate

# trace event codes
EV_ARR1, EV_ARR1_LOST, EV_PREEMPT, EV_ARR2, EV_DEP1, EV_DEP2, EV_RESUME = range(7)
EVENT_NAMES = ("arr1", "arr1_lost", "preempt", "arr2", "dep1", "dep2", "resume")

_INF = np.inf


@njit(cache=True, nogil=True)
def _draw_service(kind, shape, scale, scripted, pool, ptr):
    # scale: mean stage duration (or the full duration for deterministic);
    # returns (duration, new_ptr); pool is the scripted draw array
    if scripted:
        if ptr < pool.shape[0]:
            return pool[ptr], ptr + 1
        return _INF, ptr
    if kind == 0:
        return np.random.exponential(scale), ptr
    elif kind == 1:
        return np.random.gamma(shape, scale), ptr
    else:
        return scale, ptr


@njit(cache=True, nogil=True)
def _sim_core(lam1, lam2, c,
              k1, sh1, p1, k2, sh2, p2,
              horizon, warmup, seed,
              j_cap, kmax, preempt_latest,
              scripted, s_arr1, s_arr2, s_svc1, s_svc2,
              trace_cap):
    np.random.seed(seed)
    # per-draw scales hoisted out of the event loop
    sc1 = p1 if k1 == 2 else 1.0 / p1
    sc2 = p2 if k2 == 2 else 1.0 / p2
    ia_scale1 = 1.0 / lam1 if lam1 > 0 else 0.0
    ia_scale2 = 1.0 / lam2 if lam2 > 0 else 0.0

    # ---- servers
    srv_cls = np.zeros(c, np.int8)          # 0 idle, 1 class-1, 2 class-2
    srv_dep = np.full(c, _INF)
    srv_cust = np.full(c, -1, np.int64)
    srv_start = np.zeros(c)

    # ---- class-2 customer records (freelist-recycled slots)
    cap = 1024
    rec_arr = np.zeros(cap)
    rec_req = np.zeros(cap)
    rec_rem = np.full(cap, -1.0)            # <0: no service drawn yet
    rec_term = np.zeros(cap, np.int64)
    free = np.empty(cap, np.int64)
    for ii in range(cap):
        free[ii] = cap - 1 - ii
    nfree = cap

    # ---- buffer: resume queue (sorted by arrival time) before fresh FIFO ring
    rq = np.empty(64, np.int64)
    rq_n = 0
    fq = np.empty(1024, np.int64)
    fq_head = 0
    fq_n = 0

    # ---- statistics
    occ = np.zeros((c + 1, j_cap + 1))          # time-weighted (i, min(j, j_cap))
    seen = np.zeros((c + 1, j_cap + 1), np.int64)  # state seen by class-2 arrivals
    area_sstar = 0.0
    sum_wait = 0.0
    n_wait = 0
    hist = np.zeros(kmax + 1, np.int64)
    n_arr1 = 0
    n_arr2 = 0
    n_lost = 0
    n_dep1 = 0
    n_dep2 = 0
    n_preempt = 0
    regen_count = 0
    sum_cycle = 0.0
    n_cycle = 0
    last_regen = -1.0

    tr_t = np.zeros(trace_cap)
    tr_ev = np.zeros(trace_cap, np.int8)
    tr_i = np.zeros(trace_cap, np.int64)
    tr_j = np.zeros(trace_cap, np.int64)
    tr_n = 0

    n1 = 0      # class-1 in service
    n2s = 0     # class-2 in service

    ia1 = 0
    ia2 = 0
    is1 = 0
    is2 = 0
    if scripted:
        t1 = s_arr1[0] if s_arr1.shape[0] > 0 else _INF
        t2 = s_arr2[0] if s_arr2.shape[0] > 0 else _INF
        ia1 = 1
        ia2 = 1
    else:
        t1 = np.random.exponential(ia_scale1) if lam1 > 0 else _INF
        t2 = np.random.exponential(ia_scale2) if lam2 > 0 else _INF

    t = 0.0
    while True:
        # next event: min over pending departures and the two arrival streams
        tdep = _INF
        sdep = -1
        for s in range(c):
            if srv_dep[s] < tdep:
                tdep = srv_dep[s]
                sdep = s
        tnext = tdep
        if t1 < tnext:
            tnext = t1
        if t2 < tnext:
            tnext = t2
        if tnext > horizon:
            tnext = horizon

        # accumulate time-weighted state over [t, tnext)
        j = n2s + rq_n + fq_n
        lo = t if t > warmup else warmup
        hi = tnext if tnext < horizon else horizon
        if hi > lo:
            dt = hi - lo
            jj = j if j < j_cap else j_cap
            occ[n1, jj] += dt
            if n1 + j >= c and n1 <= c - 1:
                area_sstar += dt
        if tnext >= horizon:
            break
        t = tnext

        if tdep <= t1 and tdep <= t2:
            # ---------------- departure at server sdep
            s = sdep
            if srv_cls[s] == 1:
                n1 -= 1
                if t >= warmup:
                    n_dep1 += 1
                if trace_cap > tr_n:
                    tr_t[tr_n] = t; tr_ev[tr_n] = EV_DEP1
                    tr_i[tr_n] = n1; tr_j[tr_n] = n2s + rq_n + fq_n; tr_n += 1
            else:
                idd = srv_cust[s]
                n2s -= 1
                if t >= warmup:
                    n_dep2 += 1
                    w = (t - rec_arr[idd]) - rec_req[idd]
                    if w < 0.0:
                        w = 0.0
                    sum_wait += w
                    n_wait += 1
                    k = rec_term[idd]
                    if k > kmax:
                        k = kmax
                    hist[k] += 1
                free[nfree] = idd
                nfree += 1
                if trace_cap > tr_n:
                    tr_t[tr_n] = t; tr_ev[tr_n] = EV_DEP2
                    tr_i[tr_n] = n1; tr_j[tr_n] = n2s + rq_n + fq_n; tr_n += 1
            srv_cls[s] = 0
            srv_dep[s] = _INF
            srv_cust[s] = -1
            # freed server takes the buffer head
            nxt = -1
            if rq_n > 0:
                nxt = rq[0]
                for q in range(rq_n - 1):
                    rq[q] = rq[q + 1]
                rq_n -= 1
            elif fq_n > 0:
                nxt = fq[fq_head]
                fq_head += 1
                if fq_head == fq.shape[0]:
                    fq_head = 0
                fq_n -= 1
            if nxt >= 0:
                if rec_rem[nxt] < 0.0:
                    w, is2 = _draw_service(k2, sh2, sc2, scripted, s_svc2, is2)
                    rec_req[nxt] = w
                    rem = w
                else:
                    rem = rec_rem[nxt]
                    rec_rem[nxt] = -1.0
                    if trace_cap > tr_n:
                        tr_t[tr_n] = t; tr_ev[tr_n] = EV_RESUME
                        tr_i[tr_n] = n1; tr_j[tr_n] = n2s + rq_n + fq_n; tr_n += 1
                srv_cls[s] = 2
                srv_cust[s] = nxt
                srv_dep[s] = t + rem
                srv_start[s] = t
                n2s += 1
        elif t1 <= t2:
            # ---------------- class-1 arrival
            j = n2s + rq_n + fq_n
            if n1 == 0 and j == 0:
                if t >= warmup:
                    regen_count += 1
                    if last_regen >= warmup:
                        sum_cycle += t - last_regen
                        n_cycle += 1
                last_regen = t
            if t >= warmup:
                n_arr1 += 1
            if n1 == c:
                if t >= warmup:
                    n_lost += 1
                if trace_cap > tr_n:
                    tr_t[tr_n] = t; tr_ev[tr_n] = EV_ARR1_LOST
                    tr_i[tr_n] = n1; tr_j[tr_n] = j; tr_n += 1
            else:
                s = -1
                if n1 + n2s < c:
                    for q in range(c):
                        if srv_cls[q] == 0:
                            s = q
                            break
                else:
                    # preempt a class-2 customer in service
                    best = -1.0
                    for q in range(c):
                        if srv_cls[q] == 2:
                            if s == -1:
                                s = q
                                best = srv_start[q]
                            elif (preempt_latest and srv_start[q] > best) or \
                                 (not preempt_latest and srv_start[q] < best):
                                s = q
                                best = srv_start[q]
                    idd = srv_cust[s]
                    rec_rem[idd] = srv_dep[s] - t
                    rec_term[idd] += 1
                    if t >= warmup:
                        n_preempt += 1
                    # insert into the resume queue keeping arrival order
                    if rq_n == rq.shape[0]:
                        rq_new = np.empty(rq.shape[0] * 2, np.int64)
                        rq_new[:rq_n] = rq[:rq_n]
                        rq = rq_new
                    pos = 0
                    while pos < rq_n and rec_arr[rq[pos]] <= rec_arr[idd]:
                        pos += 1
                    for q in range(rq_n, pos, -1):
                        rq[q] = rq[q - 1]
                    rq[pos] = idd
                    rq_n += 1
                    n2s -= 1
                    if trace_cap > tr_n:
                        tr_t[tr_n] = t; tr_ev[tr_n] = EV_PREEMPT
                        tr_i[tr_n] = n1; tr_j[tr_n] = n2s + rq_n + fq_n; tr_n += 1
                w, is1 = _draw_service(k1, sh1, sc1, scripted, s_svc1, is1)
                srv_cls[s] = 1
                srv_cust[s] = -1
                srv_dep[s] = t + w
                srv_start[s] = t
                n1 += 1
                if trace_cap > tr_n:
                    tr_t[tr_n] = t; tr_ev[tr_n] = EV_ARR1
                    tr_i[tr_n] = n1; tr_j[tr_n] = n2s + rq_n + fq_n; tr_n += 1
            if scripted:
                t1 = s_arr1[ia1] if ia1 < s_arr1.shape[0] else _INF
                ia1 += 1
            else:
                t1 = t + np.random.exponential(ia_scale1)
        else:
            # ---------------- class-2 arrival
            j = n2s + rq_n + fq_n
            if n1 == 0 and j == 0:
                if t >= warmup:
                    regen_count += 1
                    if last_regen >= warmup:
                        sum_cycle += t - last_regen
                        n_cycle += 1
                last_regen = t
            if t >= warmup:
                n_arr2 += 1
                jj = j if j < j_cap else j_cap
                seen[n1, jj] += 1
            # allocate a record slot
            if nfree == 0:
                ncap = cap * 2
                na = np.zeros(ncap); na[:cap] = rec_arr; rec_arr = na
                nb = np.zeros(ncap); nb[:cap] = rec_req; rec_req = nb
                nc_ = np.full(ncap, -1.0); nc_[:cap] = rec_rem; rec_rem = nc_
                nd = np.zeros(ncap, np.int64); nd[:cap] = rec_term; rec_term = nd
                free = np.empty(ncap, np.int64)
                for ii in range(cap, ncap):
                    free[nfree] = ii
                    nfree += 1
                cap = ncap
            nfree -= 1
            idd = free[nfree]
            rec_arr[idd] = t
            rec_req[idd] = 0.0
            rec_rem[idd] = -1.0
            rec_term[idd] = 0
            if n1 + n2s < c:
                s = -1
                for q in range(c):
                    if srv_cls[q] == 0:
                        s = q
                        break
                w, is2 = _draw_service(k2, sh2, sc2, scripted, s_svc2, is2)
                rec_req[idd] = w
                srv_cls[s] = 2
                srv_cust[s] = idd
                srv_dep[s] = t + w
                srv_start[s] = t
                n2s += 1
            else:
                if fq_n == fq.shape[0]:
                    fq_new = np.empty(fq.shape[0] * 2, np.int64)
                    for q in range(fq_n):
                        fq_new[q] = fq[(fq_head + q) % fq.shape[0]]
                    fq = fq_new
                    fq_head = 0
                fq[(fq_head + fq_n) % fq.shape[0]] = idd
                fq_n += 1
            if trace_cap > tr_n:
                tr_t[tr_n] = t; tr_ev[tr_n] = EV_ARR2
                tr_i[tr_n] = n1; tr_j[tr_n] = n2s + rq_n + fq_n; tr_n += 1
            if scripted:
                t2 = s_arr2[ia2] if ia2 < s_arr2.shape[0] else _INF
                ia2 += 1
            else:
                t2 = t + np.random.exponential(ia_scale2)

    in_system_2 = n2s + rq_n + fq_n
    return (occ, seen, area_sstar, sum_wait, n_wait, hist,
            n_arr1, n_arr2, n_lost, n_dep1, n_dep2, n_preempt,
            regen_count, sum_cycle, n_cycle, n1, in_system_2,
            tr_t[:tr_n], tr_ev[:tr_n], tr_i[:tr_n], tr_j[:tr_n])


@dataclass(frozen=True)
class Estimate:
    """Replication-mean point estimate with its standard error."""

    value: float
    se: float
    half_width: float   # 95% confidence, Student-t over replications

    def to_dict(self):
        return {"value": self.value, "se": self.se, "half_width": self.half_width}


@dataclass(frozen=True)
class SimConfig:
    params: SystemParams
    service1: ServiceDistribution
    service2: ServiceDistribution
    horizon: float = 1e6
    warmup: float | None = None     # default: 10% of horizon
    seed: int = 1
    replications: int = 10
    preempt_rule: str = "latest_start"   # or "earliest_start"
    j_cap: int | None = None             # occupancy recording cap (default 10c)
    kmax: int = 100                      # termination histogram support cap

    def resolved_warmup(self) -> float:
        return 0.1 * self.horizon if self.warmup is None else self.warmup

    def check(self):
        validate(self.params)
        w = self.resolved_warmup()
        if not (self.horizon > w >= 0):
            raise ValueError("horizon must exceed warmup >= 0")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.preempt_rule not in ("latest_start", "earliest_start"):
            raise ValueError(f"unknown preempt rule {self.preempt_rule!r}")


@dataclass
class SimReport:
    mean_wait: Estimate
    mean_terminations: Estimate
    throughput: Estimate
    lost_class1: Estimate               # class-1 loss fraction
    sstar_fraction: Estimate            # time fraction in S*
    termination_rate: Estimate          # preemption events per unit time
    termination_histogram: np.ndarray   # P(N_T = k), k = 0..
    state_occupancy: np.ndarray         # time-average over (i, min(j, j_cap))
    arrival_seen: np.ndarray            # class-2 arrival-epoch state frequencies
    regen_cycles: int
    mean_cycle_length: float
    counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mean_wait": self.mean_wait.to_dict(),
            "mean_terminations": self.mean_terminations.to_dict(),
            "throughput": self.throughput.to_dict(),
            "lost_class1": self.lost_class1.to_dict(),
            "sstar_fraction": self.sstar_fraction.to_dict(),
            "termination_rate": self.termination_rate.to_dict(),
            "termination_histogram": list(map(float, self.termination_histogram)),
            "regen_cycles": self.regen_cycles,
            "mean_cycle_length": self.mean_cycle_length,
            "counts": self.counts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_EMPTY = np.empty(0)


def _run_replication(config: SimConfig, seed: int):
    p = config.params
    k1, sh1, p1 = config.service1.core_params()
    k2, sh2, p2 = config.service2.core_params()
    j_cap = config.j_cap if config.j_cap is not None else 10 * p.c
    return _sim_core(
        p.lambda1, p.lambda2, p.c,
        k1, sh1, p1, k2, sh2, p2,
        config.horizon, config.resolved_warmup(), seed,
        j_cap, config.kmax, config.preempt_rule == "latest_start",
        False, _EMPTY, _EMPTY, _EMPTY, _EMPTY,
        0,
    )


def _estimate(values) -> Estimate:
    values = np.asarray(values, dtype=float)
    n = len(values)
    mean = float(values.mean())
    if n < 2:
        return Estimate(mean, 0.0, 0.0)
    se = float(values.std(ddof=1) / np.sqrt(n))
    t = float(sps.t.ppf(0.975, n - 1))
    return Estimate(mean, se, t * se)


def simulate(config: SimConfig, max_workers: int | None = None) -> SimReport:
    """Run independent replications and aggregate replication-mean statistics.

    Identical configs (including seed) produce identical reports; replications
    run in a thread pool but each owns an RNG stream derived from
    (seed, replication index).
    """
    config.check()
    seeds = np.random.SeedSequence(config.seed).generate_state(config.replications)
    seeds = [int(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(lambda s: _run_replication(config, s), seeds))

    measured = config.horizon - config.resolved_warmup()
    waits, terms, thrus, losses, sstars, trates = [], [], [], [], [], []
    hist_total = np.zeros(config.kmax + 1)
    occ_total = np.zeros_like(results[0][0])
    seen_total = np.zeros_like(results[0][1], dtype=float)
    regen_total = 0
    cycle_sum = 0.0
    cycle_n = 0
    counts = {"arrivals1": 0, "arrivals2": 0, "lost1": 0,
              "departures1": 0, "departures2": 0, "preemptions": 0,
              "in_system2_end": 0}
    for res in results:
        (occ, seen, area_sstar, sum_wait, n_wait, hist,
         n_arr1, n_arr2, n_lost, n_dep1, n_dep2, n_preempt,
         regen_count, sum_cycle, n_cycle, _n1, _in2, *_t) = res
        waits.append(sum_wait / n_wait if n_wait else 0.0)
        terms.append(n_preempt / n_dep2 if n_dep2 else 0.0)
        thrus.append(n_dep2 / measured)
        losses.append(n_lost / n_arr1 if n_arr1 else 0.0)
        sstars.append(area_sstar / measured)
        trates.append(n_preempt / measured)
        hist_total += hist
        occ_total += occ
        seen_total += seen
        regen_total += regen_count
        cycle_sum += sum_cycle
        cycle_n += n_cycle
        counts["arrivals1"] += int(n_arr1)
        counts["arrivals2"] += int(n_arr2)
        counts["lost1"] += int(n_lost)
        counts["departures1"] += int(n_dep1)
        counts["departures2"] += int(n_dep2)
        counts["preemptions"] += int(n_preempt)
        counts["in_system2_end"] += int(_in2)

    hist_p = hist_total / hist_total.sum() if hist_total.sum() else hist_total
    occ_p = occ_total / occ_total.sum() if occ_total.sum() else occ_total
    seen_p = seen_total / seen_total.sum() if seen_total.sum() else seen_total
    return SimReport(
        mean_wait=_estimate(waits),
        mean_terminations=_estimate(terms),
        throughput=_estimate(thrus),
        lost_class1=_estimate(losses),
        sstar_fraction=_estimate(sstars),
        termination_rate=_estimate(trates),
        termination_histogram=hist_p,
        state_occupancy=occ_p,
        arrival_seen=seen_p,
        regen_cycles=regen_total,
        mean_cycle_length=cycle_sum / cycle_n if cycle_n else float("nan"),
        counts=counts,
    )


@dataclass
class ScriptedResult:
    """Raw outcome of a single scripted (or traced) run, for semantic tests."""

    trace: list                  # (time, event name, i, j) after each event
    counts: dict
    sum_wait: float
    n_wait: int
    histogram: np.ndarray
    regen_cycles: int
    mean_cycle_length: float
    final_class1: int
    final_class2: int
    occupancy: np.ndarray
    sstar_time: float


def run_scripted(params: SystemParams, horizon: float,
                 arrivals1=(), arrivals2=(), services1=(), services2=(),
                 warmup: float = 0.0, preempt_rule: str = "latest_start",
                 trace_cap: int = 10_000, j_cap: int | None = None) -> ScriptedResult:
    """Run the engine on explicit arrival epochs and service durations.

    Service durations are consumed in the order services start (per class).
    Used to pin down the event semantics deterministically.
    """
    p = validate(params)
    jc = j_cap if j_cap is not None else 10 * p.c
    res = _sim_core(
        p.lambda1, p.lambda2, p.c,
        0, 1, 1.0, 0, 1, 1.0,
        horizon, warmup, 0,
        jc, 100, preempt_rule == "latest_start",
        True,
        np.asarray(arrivals1, dtype=float), np.asarray(arrivals2, dtype=float),
        np.asarray(services1, dtype=float), np.asarray(services2, dtype=float),
        trace_cap,
    )
    (occ, seen, area_sstar, sum_wait, n_wait, hist,
     n_arr1, n_arr2, n_lost, n_dep1, n_dep2, n_preempt,
     regen_count, sum_cycle, n_cycle, n1, in2,
     tr_t, tr_ev, tr_i, tr_j) = res
    trace = [(float(tt), EVENT_NAMES[int(ev)], int(i), int(j))
             for tt, ev, i, j in zip(tr_t, tr_ev, tr_i, tr_j)]
    return ScriptedResult(
        trace=trace,
        counts={"arrivals1": int(n_arr1), "arrivals2": int(n_arr2),
                "lost1": int(n_lost), "departures1": int(n_dep1),
                "departures2": int(n_dep2), "preemptions": int(n_preempt)},
        sum_wait=float(sum_wait),
        n_wait=int(n_wait),
        histogram=hist,
        regen_cycles=int(regen_count),
        mean_cycle_length=float(sum_cycle / n_cycle) if n_cycle else float("nan"),
        final_class1=int(n1),
        final_class2=int(in2),
        occupancy=occ,
        sstar_time=float(area_sstar),
    )


def export_trace(result: ScriptedResult, path: str):
    """Write a scripted run's event trace as CSV (time, event, i, j)."""
    with open(path, "w") as fh:
        fh.write("time,event,class1_in_service,class2_in_system\n")
        for t, ev, i, j in result.trace:
            fh.write(f"{t!r},{ev},{i},{j}\n")
