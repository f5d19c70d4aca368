"""Slot-synchronous simulator of N stations sharing an MPR channel.

Time advances one channel slot at a time.  A slot is idle, a success (1..M
transmitters) or a collision (more than M).  Every backlogged station holds
a backoff counter that is decremented after each slot it does not transmit
in; a station whose counter reads 0 transmits in the next slot.

Random numbers come from PCG64 streams spawned from one ``SeedSequence``:
child ``i < N`` drives the Poisson arrivals of station ``i`` and child ``N``
drives all backoff draws, so identical seeds give bit-identical results.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
from numba import njit
from scipy import stats as sps

from .contention import NetworkConfig
from .errors import DomainError
from .timing import SlotTimes

WINDOW_CAP = 2**31
N_BATCHES = 20
RETRY_BINS = 64


@dataclass(frozen=True)
class SimConfig:
    net: NetworkConfig
    st: SlotTimes
    duration_s: float
    warmup_s: float = 0.0
    seed: int = 0
    queue_capacity: int | None = None  # None means unbounded
    saturated: bool = False  # every station always backlogged
    trace: bool = False  # keep per-packet (arrival, hol, departure, retries)

    def __post_init__(self):
        if not self.duration_s > self.warmup_s >= 0:
            raise DomainError("need duration_s > warmup_s >= 0")
        if self.queue_capacity is not None and self.queue_capacity < 1:
            raise DomainError("queue_capacity must be >= 1 or None")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")


@dataclass
class SimStats:
    throughput_pkts_per_s: float
    throughput_bits_per_s: float
    mean_delay_s: float
    delay_std_s: float
    mean_service_s: float
    service_std_s: float
    mean_queue_len: float
    delivered: int
    collided_slots: int
    idle_slots: int
    success_slots: int
    attempts: int
    window_slots: int
    window_attempts: int
    window_collided_tx: int
    sim_time_s: float
    delay_ci_s: float
    arrivals: int
    backlog: int
    dropped: int
    cap_hits: int
    n_stations: int
    retry_hist: np.ndarray = field(repr=False)  # [j]: packets delivered on transmission j, last bin pooled
    batch_mean_delay: np.ndarray = field(repr=False)
    batch_throughput: np.ndarray = field(repr=False)
    per_station_arrivals: np.ndarray = field(repr=False)
    per_station_departures: np.ndarray = field(repr=False)
    per_station_backlog: np.ndarray = field(repr=False)
    per_packet_delays: np.ndarray | None = field(default=None, repr=False)

    @property
    def total_slots(self) -> int:
        return self.idle_slots + self.collided_slots + self.success_slots

    @property
    def measured_pc(self) -> float:
        if self.window_attempts == 0:
            return 0.0
        return self.window_collided_tx / self.window_attempts

    def summary(self) -> dict:
        """Scalar statistics as a plain dict (JSON friendly)."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray) or v is None:
                continue
            out[f.name] = v.item() if isinstance(v, np.generic) else v
        out["total_slots"] = self.total_slots
        out["measured_tau"] = measured_tau(self)
        out["measured_pc"] = self.measured_pc
        return out


@njit(cache=True, nogil=True)
def _draw(rng, w):
    return rng.integers(0, w) if w > 1 else 0


@njit(cache=True, nogil=True)
def _kernel(n, m, r, w0, t_idle, t_coll, t_succ, arr, offsets, duration, warmup,
            capacity, saturated, rng, n_batches, trace):
    n_arr = arr.shape[0]
    dropped = np.zeros(n_arr, dtype=np.bool_)
    tr_hol = np.full(n_arr if trace else 0, np.nan)
    tr_dep = np.full(n_arr if trace else 0, np.nan)
    tr_ret = np.full(n_arr if trace else 0, -1, dtype=np.int64)

    head = offsets[:-1].copy()  # oldest undeparted packet
    nxt = offsets[:-1].copy()  # first packet not yet ingested
    qlen = np.zeros(n, dtype=np.int64)
    active = np.zeros(n, dtype=np.bool_)
    counter = np.zeros(n, dtype=np.int64)
    window = np.full(n, w0, dtype=np.int64)
    hol = np.zeros(n, dtype=np.float64)
    retries = np.zeros(n, dtype=np.int64)
    tx = np.zeros(n, dtype=np.bool_)
    departed = np.zeros(n, dtype=np.int64)
    accepted = np.zeros(n, dtype=np.int64)

    if saturated:
        for i in range(n):
            active[i] = True
            counter[i] = _draw(rng, w0)

    n_idle = 0
    n_coll = 0
    n_succ = 0
    attempts = 0
    w_slots = 0
    w_att = 0
    w_coll_tx = 0
    cap_hits = 0
    n_drop = 0
    span = duration - warmup

    d_n = 0
    d_sum = 0.0
    d_sq = 0.0
    x_n = 0
    x_sum = 0.0
    x_sq = 0.0
    q_int = 0.0
    delivered_w = 0
    b_sum = np.zeros(n_batches)
    b_cnt = np.zeros(n_batches, dtype=np.int64)
    b_dep = np.zeros(n_batches, dtype=np.int64)
    rhist = np.zeros(RETRY_BINS + 1, dtype=np.int64)

    now = 0.0
    while now < duration:
        k = 0
        for i in range(n):
            tx[i] = active[i] and counter[i] == 0
            if tx[i]:
                k += 1
        if k == 0:
            n_idle += 1
        elif k <= m:
            n_succ += 1
        else:
            n_coll += 1
        t0 = now
        t1 = n_idle * t_idle + n_succ * t_succ + n_coll * t_coll
        attempts += k
        if t0 >= warmup:
            w_slots += 1
            w_att += k
            if k > m:
                w_coll_tx += k

        for i in range(n):
            if not saturated:
                end = offsets[i + 1]
                while nxt[i] < end and arr[nxt[i]] <= t1:
                    if capacity > 0 and qlen[i] >= capacity:
                        dropped[nxt[i]] = True
                        n_drop += 1
                    else:
                        qlen[i] += 1
                        accepted[i] += 1
                    nxt[i] += 1

            if active[i] and tx[i]:
                if k <= m:
                    service = t1 - hol[i]
                    if hol[i] >= warmup:
                        x_n += 1
                        x_sum += service
                        x_sq += service * service
                    if t1 > warmup:
                        delivered_w += 1
                        b = int((t1 - warmup) / span * n_batches)
                        if b < n_batches:
                            b_dep[b] += 1
                    j = retries[i] + 1
                    rhist[j if j < RETRY_BINS else RETRY_BINS] += 1
                    if not saturated:
                        while dropped[head[i]]:
                            head[i] += 1
                        p = head[i]
                        a = arr[p]
                        if a >= warmup:
                            d = t1 - a
                            d_n += 1
                            d_sum += d
                            d_sq += d * d
                            b = int((a - warmup) / span * n_batches)
                            if b < n_batches:
                                b_sum[b] += d
                                b_cnt[b] += 1
                        lo = a if a > warmup else warmup
                        if t1 > lo:
                            q_int += t1 - lo
                        if trace:
                            tr_hol[p] = hol[i]
                            tr_dep[p] = t1
                            tr_ret[p] = retries[i]
                        head[i] += 1
                        qlen[i] -= 1
                    departed[i] += 1
                    if saturated or qlen[i] > 0:
                        hol[i] = t1
                        window[i] = w0
                        retries[i] = 0
                        counter[i] = _draw(rng, w0)
                    else:
                        active[i] = False
                else:
                    retries[i] += 1
                    w = int(math.floor(window[i] * r + 0.5))
                    if w < 1:
                        w = 1
                    if w > WINDOW_CAP:
                        w = WINDOW_CAP
                        cap_hits += 1
                    window[i] = w
                    counter[i] = _draw(rng, w)
            elif active[i]:
                counter[i] -= 1
            elif qlen[i] > 0:
                active[i] = True
                hol[i] = t1
                window[i] = w0
                retries[i] = 0
                counter[i] = _draw(rng, w0)
        now = t1

    # packets still queued at the end contribute to the queue-length integral
    backlog = np.zeros(n, dtype=np.int64)
    if not saturated:
        for i in range(n):
            backlog[i] = qlen[i]
            p = head[i]
            left = qlen[i]
            while left > 0:
                if not dropped[p]:
                    a = arr[p]
                    lo = a if a > warmup else warmup
                    if now > lo:
                        q_int += now - lo
                    left -= 1
                p += 1

    counts = np.array([n_idle, n_coll, n_succ, attempts, w_slots, w_att, w_coll_tx,
                       cap_hits, n_drop, d_n, x_n, delivered_w])
    sums = np.array([now, d_sum, d_sq, x_sum, x_sq, q_int])
    return (counts, sums, b_sum, b_cnt, b_dep, rhist, accepted, departed, backlog,
            tr_hol, tr_dep, tr_ret)


def _arrival_times(cfg: SimConfig, children) -> tuple[np.ndarray, np.ndarray]:
    lam = cfg.net.arrival_rate
    n = cfg.net.n_stations
    chunks = []
    for i in range(n):
        if cfg.saturated or lam == 0:
            chunks.append(np.empty(0))
            continue
        g = np.random.Generator(np.random.PCG64(children[i]))
        count = g.poisson(lam * cfg.duration_s)
        chunks.append(np.sort(g.uniform(0.0, cfg.duration_s, count)))
    offsets = np.zeros(n + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([c.size for c in chunks])
    return np.concatenate(chunks) if chunks else np.empty(0), offsets


def _mean_std(n, s, sq):
    if n == 0:
        return math.nan, math.nan
    mean = s / n
    var = max(sq / n - mean * mean, 0.0) * n / (n - 1) if n > 1 else 0.0
    return mean, math.sqrt(var)


def _batch_ci(b_sum, b_cnt) -> tuple[np.ndarray, float]:
    ok = b_cnt > 0
    means = np.full(b_sum.shape, np.nan)
    means[ok] = b_sum[ok] / b_cnt[ok]
    good = means[ok]
    if good.size < 2:
        return means, math.nan
    half = sps.t.ppf(0.975, good.size - 1) * good.std(ddof=1) / math.sqrt(good.size)
    return means, float(half)


def run_simulation(cfg: SimConfig) -> SimStats:
    """Run one simulation.  Unstable loads grow queues without bound; memory is the caller's risk."""
    net, st = cfg.net, cfg.st
    children = np.random.SeedSequence(cfg.seed).spawn(net.n_stations + 1)
    arr, offsets = _arrival_times(cfg, children)
    rng = np.random.Generator(np.random.PCG64(children[net.n_stations]))
    out = _kernel(
        net.n_stations, net.mpr_capability, float(net.backoff_factor), net.min_window,
        st.t_idle, st.t_coll, st.t_succ, arr, offsets, cfg.duration_s, cfg.warmup_s,
        cfg.queue_capacity or 0, cfg.saturated, rng, N_BATCHES, cfg.trace,
    )
    counts, sums, b_sum, b_cnt, b_dep, rhist, accepted, departed, backlog, tr_hol, tr_dep, tr_ret = out
    (n_idle, n_coll, n_succ, attempts, w_slots, w_att, w_coll_tx,
     cap_hits, n_drop, d_n, x_n, delivered_w) = (int(c) for c in counts)
    now, d_sum, d_sq, x_sum, x_sq, q_int = (float(v) for v in sums)

    window = now - cfg.warmup_s
    mean_d, std_d = _mean_std(d_n, d_sum, d_sq)
    mean_x, std_x = _mean_std(x_n, x_sum, x_sq)
    batch_means, ci = _batch_ci(b_sum, b_cnt)
    thr = delivered_w / window
    batch_thr = b_dep / ((cfg.duration_s - cfg.warmup_s) / N_BATCHES)
    trace = None
    if cfg.trace:
        trace = np.column_stack([arr, tr_hol, tr_dep, tr_ret.astype(float)])
    return SimStats(
        throughput_pkts_per_s=thr,
        throughput_bits_per_s=thr * net.payload_bits,
        mean_delay_s=mean_d,
        delay_std_s=std_d,
        mean_service_s=mean_x,
        service_std_s=std_x,
        mean_queue_len=math.nan if cfg.saturated else q_int / (window * net.n_stations),
        delivered=d_n if not cfg.saturated else x_n,
        collided_slots=n_coll,
        idle_slots=n_idle,
        success_slots=n_succ,
        attempts=attempts,
        window_slots=w_slots,
        window_attempts=w_att,
        window_collided_tx=w_coll_tx,
        sim_time_s=now,
        delay_ci_s=ci,
        arrivals=int(accepted.sum() + n_drop),
        backlog=int(backlog.sum()),
        dropped=n_drop,
        cap_hits=cap_hits,
        n_stations=net.n_stations,
        retry_hist=rhist,
        batch_mean_delay=batch_means,
        batch_throughput=batch_thr,
        per_station_arrivals=accepted,
        per_station_departures=departed,
        per_station_backlog=backlog,
        per_packet_delays=trace,
    )


def measured_tau(stats: SimStats) -> float:
    """Transmission attempts per station per slot after warm-up."""
    if stats.window_slots == 0:
        return 0.0
    return stats.window_attempts / (stats.n_stations * stats.window_slots)


def write_trace_csv(stats: SimStats, path) -> None:
    if stats.per_packet_delays is None:
        raise DomainError("run was made without trace=True")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["arrival_s", "hol_s", "departure_s", "retries"])
        for a, h, d, k in stats.per_packet_delays:
            if math.isnan(d):
                continue
            w.writerow([repr(float(a)), repr(float(h)), repr(float(d)), int(k)])


@dataclass
class ReplicateStats:
    runs: list[SimStats]
    means: dict[str, float]
    ci95: dict[str, float]
    delay_spread_s: float
    within_ci_s: float
    non_converged: bool


_AGG_FIELDS = ("throughput_pkts_per_s", "throughput_bits_per_s", "mean_delay_s", "delay_std_s",
               "mean_service_s", "mean_queue_len")


def replicate(cfg: SimConfig, n_runs: int, workers: int | None = None) -> ReplicateStats:
    """Independent runs with seeds spawned from ``cfg.seed``.

    Non-convergence is flagged when the spread (max - min) of the per-run
    mean delays exceeds three times the average within-run 95% half-width.
    """
    if n_runs < 1:
        raise DomainError("n_runs must be >= 1")
    if n_runs == 1:
        seeds = [cfg.seed]
    else:
        seeds = [int(c.generate_state(1, np.uint64)[0]) for c in np.random.SeedSequence(cfg.seed).spawn(n_runs)]
    cfgs = [replace(cfg, seed=s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        runs = list(pool.map(run_simulation, cfgs))

    means, ci = {}, {}
    for name in _AGG_FIELDS:
        vals = np.array([getattr(s, name) for s in runs], dtype=float)
        means[name] = float(vals.mean())
        if n_runs > 1:
            ci[name] = float(sps.t.ppf(0.975, n_runs - 1) * vals.std(ddof=1) / math.sqrt(n_runs))
        else:
            ci[name] = runs[0].delay_ci_s if name == "mean_delay_s" else math.nan
    delays = np.array([s.mean_delay_s for s in runs])
    spread = float(delays.max() - delays.min())
    within = float(np.nanmean([s.delay_ci_s for s in runs]))
    flag = n_runs > 1 and (math.isnan(within) or spread > 3 * within)
    return ReplicateStats(runs, means, ci, spread, within, flag)
