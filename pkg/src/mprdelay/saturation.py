"""Saturated attempt probability from the backoff fixed-point system."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .contention import NetworkConfig, collision_prob_pc
from .errors import DomainError, MprDelayError, NoFixedPoint
from .throughput import bisect, throughput
from .timing import SlotTimes


@dataclass(frozen=True)
class SaturationPoint:
    tau_s: float
    p_c: float
    s_s: float
    residual: float
    iterations: int
    payload_bits: float = 1.0

    @property
    def s_s_pkts(self) -> float:
        return self.s_s / self.payload_bits


def attempt_prob_from_pc(p_c: float, backoff_factor: float, min_window: int) -> float:
    """Saturated attempt probability for a given collision probability.

    Requires ``r * p_c < 1``; at ``r == 1`` the expression is the constant
    2 / (W0 + 1).
    """
    r, w0 = backoff_factor, min_window
    if r == 1.0:
        return 2.0 / (w0 + 1.0)
    q = 1.0 - r * p_c
    if q <= 0:
        return 0.0
    return 2.0 * q / (w0 * (1.0 - p_c) + q)


def fixed_point_residual(tau: float, cfg: NetworkConfig) -> float:
    p_c = collision_prob_pc(tau, cfg)
    return tau - attempt_prob_from_pc(p_c, cfg.backoff_factor, cfg.min_window)


def solve_saturation(cfg: NetworkConfig, st: SlotTimes) -> SaturationPoint:
    """Solve the saturated (tau_s, p_c) pair by bracketed root finding on the scalar residual.

    The residual ``tau - f(p_c(tau))`` is increasing on the interval where
    ``r * p_c(tau) < 1`` and changes sign there, so a bracketed solve is robust where
    plain fixed-point iteration can oscillate.
    """
    r, w0 = cfg.backoff_factor, cfg.min_window
    if r < 1 or w0 < 1:
        raise DomainError("need backoff_factor >= 1 and min_window >= 1")

    if cfg.mpr_capability >= cfg.n_stations:
        tau_s = 2.0 / (w0 + 1.0)
        return SaturationPoint(tau_s, 0.0, throughput(tau_s, cfg, st), 0.0, 0, cfg.payload_bits)
    if r == 1.0:
        # no window growth: tau does not depend on p_c, which may round to 1 for large N
        tau_s = 2.0 / (w0 + 1.0)
        p_c = collision_prob_pc(tau_s, cfg)
        return SaturationPoint(tau_s, p_c, throughput(tau_s, cfg, st), 0.0, 0, cfg.payload_bits)

    # upper end of the valid region: r * p_c(tau) = 1
    hi = 1.0
    if r > 1.0 and collision_prob_pc(1.0, cfg) * r >= 1.0:
        hi = bisect(lambda t: r * collision_prob_pc(t, cfg) - 1.0, 0.0, 1.0, tol=1e-16)

    iterations = 0

    def g(t):
        nonlocal iterations
        iterations += 1
        return fixed_point_residual(t, cfg)

    if g(hi) < 0:
        raise NoFixedPoint(f"no sign change of the fixed-point residual below tau={hi:.6g}")
    tau_s = bisect(g, 0.0, hi, tol=1e-16)
    p_c = collision_prob_pc(tau_s, cfg)
    if r * p_c >= 1.0:
        raise NoFixedPoint(f"solution at the boundary r*p_c = 1 (tau={tau_s:.6g})")
    residual = abs(fixed_point_residual(tau_s, cfg))
    return SaturationPoint(tau_s, p_c, throughput(tau_s, cfg, st), residual, iterations, cfg.payload_bits)


@dataclass(frozen=True)
class SaturationRow:
    cfg: NetworkConfig
    point: SaturationPoint | None
    error: str | None = None


def saturation_sweep(
    cfgs: Sequence[NetworkConfig],
    st_source: SlotTimes | Callable[[NetworkConfig], SlotTimes],
) -> list[SaturationRow]:
    """Solve every configuration; failures are recorded per row."""
    if not cfgs:
        raise DomainError("saturation_sweep needs at least one configuration")
    rows = []
    for cfg in cfgs:
        try:
            st = st_source(cfg) if callable(st_source) else st_source
            rows.append(SaturationRow(cfg, solve_saturation(cfg, st)))
        except MprDelayError as exc:
            rows.append(SaturationRow(cfg, None, f"{type(exc).__name__}: {exc}"))
    return rows
