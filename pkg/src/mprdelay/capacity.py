"""Bounded-delay operating boundaries, safe throughputs and backoff-factor tuning.

Finite-N reports use exact binomial slot probabilities.  The backoff-factor
optimizer works in the large-N limit, where the number of attempts per slot
is Poisson with rate ``eta`` and saturation pins ``p_c`` at ``1/r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import special

from .contention import NetworkConfig, collision_prob_pc
from .errors import DomainError, MprDelayError, NoCrossing
from .saturation import solve_saturation
from .throughput import bisect, tau_star, throughput
from .timing import SlotTimes

R_MAX = 64.0
LARGE_N_FALLBACK = 500
_R_MIN = 1.0 + 1e-9


class Scenario(str, Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"
    BOUNDARY = "Boundary"


class Target(str, Enum):
    SBMD = "SBMD"  # bounded mean delay, p_c < 1/r^2
    SBDJ = "SBDJ"  # bounded delay jitter, p_c < 1/r^3

    @property
    def exponent(self) -> int:
        return 2 if self is Target.SBMD else 3

    @classmethod
    def parse(cls, value) -> Target:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise DomainError(f"unknown target {value!r}, expected SBMD or SBDJ") from None


class PoissonSum(str, Enum):
    """Which attempt counts enter the large-N success sums.

    ``EXACT`` sums k = 0..M-1, which makes ``eta * sum`` equal to
    sum_{k=1..M} k Pr{X = k} and the sum equal to 1 - p_c.  ``PRINTED``
    starts at k = 1 and is kept for comparison.
    """

    EXACT = "exact"
    PRINTED = "printed"


@dataclass(frozen=True)
class CapacityReport:
    tau_bbmd: float
    tau_bbdj: float
    s_bbmd: float
    s_bbdj: float
    tau_s: float
    s_s: float
    tau_star: float
    s_star: float
    s_sbmd: float
    s_sbdj: float
    scenario: Scenario
    no_eb_regime: bool = False
    clamped_bbmd: bool = False
    clamped_bbdj: bool = False


def _boundary_tau(target_pc: float, cfg: NetworkConfig, tau_s: float) -> tuple[float, bool]:
    """tau where p_c reaches ``target_pc``, clamped to tau_s (small-N regime)."""
    if target_pc >= collision_prob_pc(tau_s, cfg):
        return tau_s, True
    tau = bisect(lambda t: collision_prob_pc(t, cfg) - target_pc, 0.0, tau_s, tol=1e-16)
    return tau, False


def boundary_taus(cfg: NetworkConfig, st: SlotTimes | None = None, tau_s: float | None = None) -> tuple[float, float]:
    """Attempt probabilities where p_c equals 1/r^2 (BBMD) and 1/r^3 (BBDJ).

    Both are clamped to the saturated attempt probability when the bound is
    never reached below saturation, and at r = 1 (no exponential backoff).
    """
    if tau_s is None:
        tau_s = solve_saturation(cfg, st or SlotTimes.uniform()).tau_s
    r = cfg.backoff_factor
    if r == 1.0:
        return tau_s, tau_s
    return _boundary_tau(r**-2, cfg, tau_s)[0], _boundary_tau(r**-3, cfg, tau_s)[0]


def classify_scenario(
    tau_bbmd: float,
    tau_s: float,
    tau_star_value: float,
    s_bbmd: float,
    s_s: float,
    rel_tol: float = 1e-9,
) -> Scenario:
    """Position of the BBMD point relative to saturation and peak throughput."""
    if abs(s_bbmd - s_s) <= rel_tol * max(s_s, 1e-300) or tau_bbmd >= tau_s:
        return Scenario.BOUNDARY
    if tau_s <= tau_star_value:
        return Scenario.S1
    if tau_bbmd < tau_star_value:
        return Scenario.S2 if s_bbmd < s_s else Scenario.S3
    return Scenario.S4


def safe_throughputs(s_bbmd: float, s_bbdj: float, s_s: float) -> tuple[float, float]:
    """Highest loads sustainable with bounded mean delay / jitter, capped at S_s."""
    return min(s_bbmd, s_s), min(s_bbdj, s_s)


def capacity_report(cfg: NetworkConfig, st: SlotTimes) -> CapacityReport:
    sat = solve_saturation(cfg, st)
    t_star, s_star = tau_star(cfg, st)
    r = cfg.backoff_factor
    no_eb = r == 1.0
    if no_eb:
        (tau_bbmd, c_md), (tau_bbdj, c_dj) = (sat.tau_s, True), (sat.tau_s, True)
    else:
        tau_bbmd, c_md = _boundary_tau(r**-2, cfg, sat.tau_s)
        tau_bbdj, c_dj = _boundary_tau(r**-3, cfg, sat.tau_s)
    s_bbmd = sat.s_s if c_md else throughput(tau_bbmd, cfg, st)
    s_bbdj = sat.s_s if c_dj else throughput(tau_bbdj, cfg, st)
    s_sbmd, s_sbdj = safe_throughputs(s_bbmd, s_bbdj, sat.s_s)
    scenario = classify_scenario(tau_bbmd, sat.tau_s, t_star, s_bbmd, sat.s_s)
    return CapacityReport(
        tau_bbmd, tau_bbdj, s_bbmd, s_bbdj, sat.tau_s, sat.s_s, t_star, s_star,
        s_sbmd, s_sbdj, scenario, no_eb, c_md, c_dj,
    )


# -- large-N (Poisson) machinery ------------------------------------------------


def _success_sum(eta: float, m: int, variant: PoissonSum) -> float:
    total = float(special.pdtr(m - 1, eta)) if m >= 1 else 0.0
    if variant is PoissonSum.PRINTED:
        total -= math.exp(-eta)
    return total


def poisson_throughput(eta: float, m: int, st: SlotTimes, payload_bits: float = 1.0,
                       variant: PoissonSum = PoissonSum.EXACT) -> float:
    """Throughput with Poisson(eta) attempts per slot."""
    p_idle = math.exp(-eta)
    p_le_m = float(special.pdtr(m, eta))
    p_succ = p_le_m - p_idle
    p_coll = 1.0 - p_le_m
    busy = p_idle * st.t_idle + p_coll * st.t_coll + p_succ * st.t_succ
    return payload_bits * eta * _success_sum(eta, m, variant) / busy


def attempt_rate_at(p_c: float, m: int, variant: PoissonSum = PoissonSum.EXACT) -> float:
    """Attempt rate eta whose success sum equals 1 - p_c.

    For the exact sum the solution is unique.  The printed sum rises then
    falls, and the root on the falling (heavier-contention) branch is used.
    """
    if not 0 < p_c < 1:
        raise DomainError(f"p_c must lie in (0, 1), got {p_c}")
    goal = 1.0 - p_c

    def f(eta):
        return _success_sum(eta, m, variant) - goal

    lo = 0.0
    if variant is PoissonSum.PRINTED:
        if m < 2:
            raise NoCrossing("the printed success sum is empty for M = 1")
        # sum_{k=1}^{M-1} eta^k e^-eta / k! peaks where eta^{M-1}/(M-1)! = 1 - ... ; scan for the peak
        grid = np.linspace(1e-6, 4.0 * m + 10.0, 4000)
        vals = np.array([f(e) for e in grid])
        lo = float(grid[int(np.argmax(vals))])
        if f(lo) < 0:
            raise NoCrossing(f"printed success sum never reaches {goal:.6g} at M = {m}")
    hi = max(1.0, lo * 2)
    while f(hi) > 0:
        hi *= 2
    return bisect(f, lo, hi, tol=1e-14 * hi)


@dataclass(frozen=True)
class OptimalBackoff:
    m: int
    target: Target
    r_star: float
    s_star: float
    eta_s: float
    eta_bound: float
    variant: PoissonSum = PoissonSum.EXACT

    @property
    def normalized(self) -> float:
        return self.s_star / self.m


def large_n_throughputs(r: float, m: int, st: SlotTimes, payload_bits: float = 1.0,
                        variant: PoissonSum = PoissonSum.EXACT) -> dict[str, float]:
    """Large-N S_s, S_BBMD, S_BBDJ and the safe variants at backoff factor r."""
    if not r > 1:
        raise DomainError(f"large-N boundaries need r > 1, got {r}")
    out = {}
    for name, p in (("s_s", 1 / r), ("s_bbmd", r**-2), ("s_bbdj", r**-3)):
        out[name] = poisson_throughput(attempt_rate_at(p, m, variant), m, st, payload_bits, variant)
    out["s_sbmd"], out["s_sbdj"] = safe_throughputs(out["s_bbmd"], out["s_bbdj"], out["s_s"])
    return out


def _finite_n_optimal(m: int, st: SlotTimes, payload_bits: float, target: Target, n_stations: int,
                      min_window: int, r_max: float) -> OptimalBackoff:
    """Exact-binomial crossing S_bound(r) = S_s(r) for a finite population."""
    k = target.exponent

    def diff(r):
        cfg = NetworkConfig(n_stations, m, r, min_window, 0.0, payload_bits)
        sat = solve_saturation(cfg, st)
        tau_b, clamped = _boundary_tau(r**-k, cfg, sat.tau_s)
        s_b = sat.s_s if clamped else throughput(tau_b, cfg, st)
        return s_b - sat.s_s, sat, tau_b

    def signed(r):
        d, sat, _ = diff(r)
        return d if abs(d) > 1e-13 * sat.s_s else 0.0

    grid = np.geomspace(1.0 + 1e-6, r_max, 200)
    values = [signed(r) for r in grid]
    for lo, hi, v_lo, v_hi in zip(grid, grid[1:], values, values[1:]):
        if v_lo > 0 and v_hi < 0:
            r_star = float(bisect(lambda r: diff(r)[0], lo, hi, tol=1e-12))
            _, sat, tau_b = diff(r_star)
            return OptimalBackoff(m, target, r_star, sat.s_s, n_stations * sat.tau_s, n_stations * tau_b)
    raise NoCrossing(f"no crossing of S_{target.value} and S_s for r in (1, {r_max}] at M = {m}")


def optimal_backoff_factor(
    m: int,
    st: SlotTimes,
    payload_bits: float = 1.0,
    target: Target | str = Target.SBMD,
    large_n: bool = True,
    variant: PoissonSum | str = PoissonSum.EXACT,
    r_max: float = R_MAX,
    n_stations: int | None = None,
    min_window: int = 16,
) -> OptimalBackoff:
    """Backoff factor that maximizes the safe throughput for MPR capability M.

    The safe throughput min(S_bound, S_s) peaks where the boundary throughput
    (p_c = 1/r^2 or 1/r^3) equals the saturation throughput (p_c = 1/r).  In
    the large-N limit both are Poisson attempt-rate solves and the crossing
    is found by a bracketed root solve on r in (1, r_max].  ``large_n=False`` uses exact
    binomials for ``n_stations`` stations instead.
    """
    target = Target.parse(target)
    variant = PoissonSum(variant)
    if m < 1:
        raise DomainError(f"M must be >= 1, got {m}")
    if variant is PoissonSum.PRINTED and m == 1 and large_n:
        # the printed sums are empty at M = 1; fall back to exact binomials at large N
        large_n, n_stations = False, LARGE_N_FALLBACK
    if not large_n:
        if n_stations is None:
            raise DomainError("finite-N optimization needs n_stations")
        return _finite_n_optimal(m, st, payload_bits, target, n_stations, min_window, r_max)

    k = target.exponent

    def parts(r):
        eta_s = attempt_rate_at(1 / r, m, variant)
        eta_b = attempt_rate_at(r**-k, m, variant)
        s_s = poisson_throughput(eta_s, m, st, payload_bits, variant)
        s_b = poisson_throughput(eta_b, m, st, payload_bits, variant)
        return s_b - s_s, eta_s, eta_b, s_s

    def diff(r):
        return parts(r)[0]

    grid = np.geomspace(_R_MIN, r_max, 400)
    prev_r, prev_v = None, None
    for r in grid:
        try:
            v = diff(r)
        except NoCrossing:
            prev_r, prev_v = None, None
            continue
        if prev_v is not None and prev_v > 0 >= v:
            r_star = float(bisect(diff, prev_r, r, tol=1e-13))
            _, eta_s, eta_b, s_s = parts(r_star)
            return OptimalBackoff(m, target, r_star, s_s, eta_s, eta_b, variant)
        prev_r, prev_v = r, v
    raise NoCrossing(f"S_{target.value} never crosses S_s for r in (1, {r_max}] at M = {m}")


@dataclass(frozen=True)
class ScalingRow:
    m: int
    r_star: float | None
    s_star: float | None
    normalized: float | None
    error: str | None = None


def scaling_sweep(
    m_values: Sequence[int],
    st: SlotTimes | callable,
    payload_bits: float = 1.0,
    target: Target | str = Target.SBMD,
    **kwargs,
) -> list[ScalingRow]:
    """Optimal r and safe throughput per MPR capability.

    ``st`` may be a callable of M when slot times depend on it.
    """
    if not m_values:
        raise DomainError("scaling_sweep needs at least one M value")
    rows = []
    for m in m_values:
        try:
            slot = st(m) if callable(st) else st
            opt = optimal_backoff_factor(m, slot, payload_bits, target, **kwargs)
            rows.append(ScalingRow(m, opt.r_star, opt.s_star, opt.normalized))
        except MprDelayError as exc:
            rows.append(ScalingRow(m, None, None, None, f"{type(exc).__name__}: {exc}"))
    return rows


@dataclass(frozen=True)
class ThroughputVsRRow:
    r: float
    s_s: float | None
    s_bbmd: float | None
    s_bbdj: float | None
    s_sbmd: float | None
    s_sbdj: float | None
    error: str | None = None


def throughput_vs_r_sweep(
    m: int,
    st: SlotTimes,
    r_grid: Sequence[float],
    payload_bits: float = 1.0,
    variant: PoissonSum | str = PoissonSum.EXACT,
    r_max: float = R_MAX,
) -> list[ThroughputVsRRow]:
    """Large-N saturation, boundary and safe throughputs across backoff factors."""
    variant = PoissonSum(variant)
    rows = []
    for r in r_grid:
        try:
            if not 1 < r <= r_max:
                raise DomainError(f"r must lie in (1, {r_max}], got {r}")
            t = large_n_throughputs(r, m, st, payload_bits, variant)
            rows.append(ThroughputVsRRow(r, t["s_s"], t["s_bbmd"], t["s_bbdj"], t["s_sbmd"], t["s_sbdj"]))
        except MprDelayError as exc:
            rows.append(ThroughputVsRRow(r, None, None, None, None, None, f"{type(exc).__name__}: {exc}"))
    return rows
