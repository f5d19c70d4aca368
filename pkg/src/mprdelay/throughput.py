"""Throughput as a function of the attempt probability and its operating points."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from scipy import optimize

from .contention import NetworkConfig, generic_slot_probs, mean_successes
from .errors import NoSolution
from .timing import SlotTimes

_EDGE = 1e-12
_TAU_TOL = 1e-12
_TANGENCY = 1e-9


class LoadCase(str, Enum):
    """Relative position of the offered-load roots and the saturation point."""

    CASE_I = "i"  # tau_l < tau_s < tau_r
    CASE_II = "ii"  # tau_l < tau_r < tau_s
    CASE_III = "iii"  # tau_s < tau_l < tau_r


@dataclass(frozen=True)
class OperatingPoints:
    tau_l: float | None
    tau_r: float | None
    tau_star: float
    s_star: float
    relationship: LoadCase | None = None
    tau_s: float | None = None

    def operating(self) -> list[float]:
        """Roots that can be steady-state operating points (tau <= tau_s)."""
        roots = [t for t in (self.tau_l, self.tau_r) if t is not None]
        if self.tau_s is None:
            return roots
        return [t for t in roots if t <= self.tau_s * (1 + 1e-12)]


def mean_slot_length(tau: float, cfg: NetworkConfig, st: SlotTimes) -> float:
    probs = generic_slot_probs(tau, cfg)
    return probs.p_idle * st.t_idle + probs.p_coll * st.t_coll + probs.p_succ * st.t_succ


def throughput(tau: float, cfg: NetworkConfig, st: SlotTimes) -> float:
    """Successfully delivered payload bits per second."""
    return cfg.payload_bits * mean_successes(tau, cfg) / mean_slot_length(tau, cfg, st)


def packet_rate_per_station(tau: float, cfg: NetworkConfig, st: SlotTimes) -> float:
    """Per-station arrival rate (packets/s) whose total load equals S(tau)."""
    return mean_successes(tau, cfg) / mean_slot_length(tau, cfg, st) / cfg.n_stations


def _bounded_max(f, lo: float, hi: float, tol: float = 1e-13) -> float:
    res = optimize.minimize_scalar(lambda t: -f(t), bounds=(lo, hi), method="bounded",
                                   options={"xatol": tol, "maxiter": 500})
    return float(res.x)


def tau_star(cfg: NetworkConfig, st: SlotTimes) -> tuple[float, float]:
    """Attempt probability maximizing throughput, and the maximum throughput.

    With ``N <= M`` collisions are impossible and throughput is monotone in
    tau, so the maximizer is 1.
    """
    if cfg.n_stations <= cfg.mpr_capability:
        return 1.0, throughput(1.0, cfg, st)

    def s(t):
        return throughput(t, cfg, st)

    # coarse log-spaced bracket first; S can be sharply peaked near 0 for large N
    grid = [10 ** (-k / 8) for k in range(8 * 12, 0, -1)]
    grid = [g for g in grid if g < 1.0] + [1.0 - _EDGE]
    values = [s(g) for g in grid]
    i = max(range(len(grid)), key=values.__getitem__)
    lo = grid[i - 1] if i > 0 else _EDGE
    hi = grid[i + 1] if i + 1 < len(grid) else 1.0 - _EDGE
    t = _bounded_max(s, lo, hi)
    return t, s(t)


def bisect(f, lo: float, hi: float, tol: float = _TAU_TOL, max_iter: int = 200) -> float:
    """Root of ``f`` on a sign-changing bracket [lo, hi] (Brent's method)."""
    return optimize.brentq(f, lo, hi, xtol=tol, maxiter=max_iter)


def classify_load_case(tau_l, tau_r, tau_s) -> LoadCase | None:
    if tau_s is None or tau_l is None:
        return None
    if tau_l < tau_s and (tau_r is None or tau_r > tau_s):
        return LoadCase.CASE_I
    if tau_r is not None and tau_r <= tau_s:
        return LoadCase.CASE_II
    return LoadCase.CASE_III


def offered_load_roots(cfg: NetworkConfig, st: SlotTimes, tau_s: float | None = None) -> OperatingPoints:
    """Attempt probabilities at which throughput equals the offered load.

    ``tau_s`` is computed with the saturation solver when not supplied.
    Raises :class:`NoSolution` when the load exceeds the maximum throughput.
    """
    load = cfg.offered_load_bps
    t_star, s_max = tau_star(cfg, st)
    if tau_s is None:
        from .saturation import solve_saturation

        tau_s = solve_saturation(cfg, st).tau_s

    if load == 0:
        return OperatingPoints(0.0, None, t_star, s_max, LoadCase.CASE_I, tau_s)
    if load > s_max * (1 + 1e-12):
        raise NoSolution(f"offered load {load:.6g} bit/s exceeds maximum throughput {s_max:.6g} bit/s")

    def g(t):
        return throughput(t, cfg, st) - load

    if abs(load - s_max) <= 1e-12 * s_max:
        tau_l = tau_r = t_star
    else:
        tau_l = bisect(g, _EDGE, t_star)
        tau_r = None
        if cfg.n_stations > cfg.mpr_capability and g(1.0 - _EDGE) < 0:
            tau_r = bisect(g, t_star, 1.0 - _EDGE)

    if tau_r is not None and abs(tau_r - tau_l) < _TANGENCY:
        tau_r = tau_l
    case = classify_load_case(tau_l, tau_r, tau_s)
    return OperatingPoints(tau_l, tau_r, t_star, s_max, case, tau_s)
