"""Per-station queue as an M/G/1 queue with multiple vacations.

When a station's queue empties, the channel keeps producing slots (idle or
used by others); each such slot acts as a vacation.  A packet arriving to an
empty queue first waits out the residual of the slot in progress, then
starts a regular service.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .access_delay import (
    DIVERGENT,
    AccessDelayModel,
    BackoffConstants,
    ServiceMoments,
    is_divergent,
    mean_service_time,
)
from .contention import AccessMode, NetworkConfig, SlotProbabilities
from .errors import DomainError, NoSolution, UnstableSystem
from .throughput import offered_load_roots, packet_rate_per_station
from .timing import SlotTimes


def vacation_moments(consts: BackoffConstants) -> tuple[float, float]:
    """Mean and second moment of the forward recurrence time of a slot."""
    if consts.a1 <= 0:
        raise DomainError("a1 must be positive")
    return consts.a2 / (2 * consts.a1), consts.a3 / (3 * consts.a1)


def vacation_recurrence_transform(s, consts: BackoffConstants, probs_b: SlotProbabilities, st: SlotTimes):
    """Laplace transform of the forward recurrence time of a slot."""
    if np.all(s == 0):
        return 1.0
    one_minus_l = -(
        np.expm1(-s * st.t_idle) * probs_b.p_idle
        + np.expm1(-s * st.t_coll) * probs_b.p_coll
        + np.expm1(-s * st.t_succ) * probs_b.p_succ
    )
    return one_minus_l / (s * consts.a1)


def _rho_tilde(lam: float, moments: ServiceMoments) -> float:
    if lam == 0:
        return 0.0
    return lam * moments.m1


def delay_transform(s, lam: float, model: AccessDelayModel, vacations: bool = True):
    """Laplace transform of the packet delay (system time).

    With ``vacations=False`` the recurrence-time factor is dropped and the
    classic Pollaczek-Khinchine system-time transform results.
    """
    rho_t = _rho_tilde(lam, model.moments)
    if not rho_t < 1:
        raise UnstableSystem(f"rho_tilde = {rho_t:.6g} >= 1")
    if np.all(s == 0):
        return 1.0
    x = model.transform(s)
    y = vacation_recurrence_transform(s, model.consts, model.probs_b, model.st) if vacations else 1.0
    return (1 - rho_t) * x * s * y / (lam * x - lam + s)


def queue_size_pgf(z: float, lam: float, model: AccessDelayModel):
    """PGF of the number of packets left behind by a departing packet."""
    rho_t = _rho_tilde(lam, model.moments)
    if not rho_t < 1:
        raise UnstableSystem(f"rho_tilde = {rho_t:.6g} >= 1")
    if not 0 <= z <= 1:
        raise DomainError(f"z must lie in [0, 1], got {z}")
    if z == 1:
        return 1.0
    s = lam - lam * z
    x = model.transform(s)
    y = vacation_recurrence_transform(s, model.consts, model.probs_b, model.st)
    return (1 - rho_t) * x * (1 - z) * y / (x - z)


def mean_delay(lam: float, moments: ServiceMoments, ey: float) -> float:
    """Mean packet delay; divergent unless rho_tilde < 1 and E[X^2] is finite."""
    rho_t = _rho_tilde(lam, moments)
    if not rho_t < 1 or is_divergent(moments.m2):
        return DIVERGENT
    return moments.m1 + ey + lam * moments.m2 / (2 * (1 - rho_t))


def delay_jitter(lam: float, moments: ServiceMoments, ey: float, ey2: float) -> float:
    """Packet delay variance; divergent unless rho_tilde < 1 and E[X^3] is finite."""
    rho_t = _rho_tilde(lam, moments)
    if not rho_t < 1 or is_divergent(moments.m3):
        return DIVERGENT
    var_y = ey2 - ey**2
    return (
        moments.variance
        + var_y
        + lam**2 * moments.m2**2 / (4 * (1 - rho_t) ** 2)
        + lam * moments.m3 / (3 * (1 - rho_t))
    )


def utilization(lam: float, rho_tilde: float, consts: BackoffConstants, probs_b: SlotProbabilities, st: SlotTimes) -> float:
    """Server utilization including vacations, 1 - Pr{queue empty at departure}."""
    if lam < 0:
        raise DomainError(f"lam must be >= 0, got {lam}")
    if rho_tilde >= 1:
        return 1.0
    return float(1 - (1 - rho_tilde) * vacation_recurrence_transform(lam, consts, probs_b, st))


@dataclass(frozen=True)
class StabilityCheck:
    stable: bool
    lhs: float
    rho_tilde: float

    @property
    def agrees(self) -> bool:
        return self.stable == (self.rho_tilde < 1)


def stability_condition(
    lam: float, p_c: float, consts: BackoffConstants, st: SlotTimes, cfg: NetworkConfig
) -> StabilityCheck:
    """Stability test written directly in terms of p_c and lambda.

    Equivalent to ``lam * E[X] < 1``; both are returned for cross-checking.
    """
    r, w0, a1 = cfg.backoff_factor, cfg.min_window, consts.a1
    denom = 2 * (1 - p_c) - 2 * lam * st.t_succ * (1 - p_c) - 2 * lam * st.t_coll * p_c + lam * a1
    if lam == 0:
        lhs = p_c * r
    elif denom <= 0:
        lhs = math.inf
    else:
        lhs = p_c * r + lam * a1 * w0 * (1 - p_c) / denom

    m1 = mean_service_time(p_c, consts, st, cfg)
    rho_t = 0.0 if lam == 0 else lam * m1
    return StabilityCheck(lhs < 1, lhs, rho_t)


@dataclass(frozen=True)
class Verdict:
    stable: bool
    bounded_mean: bool
    bounded_jitter: bool
    scope: str = "large-N exact"


@dataclass(frozen=True)
class DelayStats:
    rho_tilde: float
    rho: float
    ey: float
    ey2: float
    mean_delay: float
    jitter_var: float
    verdict: Verdict
    tau: float | None = None
    p_c: float | None = None
    service: ServiceMoments | None = None

    @property
    def delay_std(self) -> float:
        return math.sqrt(self.jitter_var) if not is_divergent(self.jitter_var) else DIVERGENT


def delay_stats(lam: float, model: AccessDelayModel, tau: float | None = None) -> DelayStats:
    """Delay summary for per-station rate ``lam`` and a given service model."""
    moments = model.moments
    ey, ey2 = vacation_moments(model.consts)
    rho_t = _rho_tilde(lam, moments)
    rho = utilization(lam, rho_t, model.consts, model.probs_b, model.st)
    ed = mean_delay(lam, moments, ey)
    var = delay_jitter(lam, moments, ey, ey2)
    stable = rho_t < 1
    verdict = Verdict(stable, stable and not is_divergent(ed), stable and not is_divergent(var))
    return DelayStats(rho_t, rho, ey, ey2, ed, var, verdict, tau, model.p_c, moments)


def analyze_delay(cfg: NetworkConfig, st: SlotTimes) -> DelayStats:
    """Delay at the low-contention operating point for the configured load.

    Loads above the maximum throughput yield an unstable verdict.
    """
    lam = cfg.arrival_rate
    try:
        points = offered_load_roots(cfg, st)
    except NoSolution:
        nan = math.nan
        return DelayStats(math.inf, 1.0, nan, nan, DIVERGENT, DIVERGENT, Verdict(False, False, False))
    tau = points.tau_l
    model = AccessDelayModel.at_tau(tau, cfg, st)
    return delay_stats(lam, model, tau)


def rho_tilde_at(tau: float, cfg: NetworkConfig, st: SlotTimes) -> float:
    """HOL occupancy lambda(tau) * E[X](tau) with lambda set by the load equation."""
    model = AccessDelayModel.at_tau(tau, cfg, st)
    lam = packet_rate_per_station(tau, cfg, st)
    if lam == 0:
        return 0.0
    return lam * model.moments.m1


def aloha_rho_tilde_derivative(tau: float, cfg: NetworkConfig) -> float:
    """d rho_tilde / d tau for slotted ALOHA with M = 1 and equal slots.

    Here rho_tilde = tau*((W0 + r) q + 1 - r) / (2 (1 - r + r q)) with
    q = (1 - tau)**(N-1); the slot length cancels.
    """
    n, r, w0 = cfg.n_stations, cfg.backoff_factor, cfg.min_window
    q = (1 - tau) ** (n - 1)
    one_minus_rpc = 1 - r + r * q
    numerator = w0 * r * q**2 + w0 * (1 - tau) ** (n - 2) * (1 - n * tau) * (1 - r) + one_minus_rpc**2
    return numerator / (2 * one_minus_rpc**2)


def aloha_rho_tilde(tau: float, cfg: NetworkConfig) -> float:
    n, r, w0 = cfg.n_stations, cfg.backoff_factor, cfg.min_window
    q = (1 - tau) ** (n - 1)
    return tau * ((w0 + r) * q + 1 - r) / (2 * (1 - r + r * q))


@dataclass
class MonotonicityReport:
    taus: list[float]
    rho_tilde: list[float]
    violations: list[int] = field(default_factory=list)
    closed_form_checked: bool = False
    derivative_sign_ok: bool | None = None
    derivative_max_rel_err: float | None = None

    @property
    def ok(self) -> bool:
        return not self.violations and self.derivative_sign_ok is not False


def rho_tilde_monotonicity_check(cfg: NetworkConfig, st: SlotTimes, taus) -> MonotonicityReport:
    """Check that rho_tilde(tau) never decreases along an increasing tau grid.

    For slotted ALOHA with M = 1 the closed-form derivative is also checked
    for sign (where p_c < 1/r and N tau > 1) and against a central finite
    difference of rho_tilde.
    """
    taus = sorted(float(t) for t in taus)
    values = [rho_tilde_at(t, cfg, st) for t in taus]
    violations = [i for i in range(1, len(values)) if values[i] < values[i - 1] * (1 - 1e-12)]
    report = MonotonicityReport(taus, values, violations)

    if cfg.access_mode is AccessMode.SLOTTED_ALOHA and cfg.mpr_capability == 1:
        r = cfg.backoff_factor
        sign_ok = True
        worst = 0.0
        for t in taus:
            q = (1 - t) ** (cfg.n_stations - 1)
            if not (1 - q) * r < 1 or not 0 < t < 1:
                continue
            d = aloha_rho_tilde_derivative(t, cfg)
            if cfg.n_stations * t > 1 and d <= 0:
                sign_ok = False
            h = 1e-6 * min(t, 1 - t)
            fd = (rho_tilde_at(t + h, cfg, st) - rho_tilde_at(t - h, cfg, st)) / (2 * h)
            worst = max(worst, abs(fd - d) / abs(d))
        report.closed_form_checked = True
        report.derivative_sign_ok = sign_ok
        report.derivative_max_rel_err = worst
    return report
