"""Medium-access (service) delay of a head-of-line packet at a backlogged station.

The service time of a packet is a sequence of backoff periods, one per
transmission attempt, each followed by a collision slot except the last,
which ends in a success slot.  Backoff period ``i`` is a sum of ``B_i``
countdown slots, where ``B_i`` is uniform on ``{0, ..., W_i - 1}`` with
``W_i = r**(i-1) * W0`` and the countdown slot length ``L`` has the
backoff-view slot distribution.

Moments are exact closed forms.  The n-th moment of the service time started
with window ``W`` is a degree-n polynomial in ``W``; matching coefficients of
``m_n(W) = E[(C(W) + tail)^n]`` with the tail restarting at window ``r*W``
gives each coefficient as a ratio with denominator ``1 - p_c * r**k``.  That
is where the convergence conditions ``p_c < r**-n`` come from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np
from numpy.polynomial import Polynomial

from .contention import (
    NetworkConfig,
    SlotProbabilities,
    SlotView,
    backoff_view_slot_probs,
    collision_prob_pc,
)
from .errors import DomainError, SeriesDivergent
from .timing import SlotTimes

DIVERGENT = math.inf


def is_divergent(value: float) -> bool:
    return math.isinf(value)


@dataclass(frozen=True)
class BackoffConstants:
    """Raw moments E[L], E[L^2], E[L^3] of a countdown slot."""

    a1: float
    a2: float
    a3: float

    def __post_init__(self):
        if not self.a1 > 0:
            raise DomainError(f"a1 must be > 0, got {self.a1}")
        if self.a2 < self.a1**2 * (1 - 1e-12) - 1e-15:
            raise DomainError("a2 < a1**2 violates Cauchy-Schwarz")


@dataclass(frozen=True)
class ServiceMoments:
    m1: float
    m2: float
    m3: float
    conditions: tuple[bool, bool, bool]

    @property
    def variance(self) -> float:
        if is_divergent(self.m2):
            return DIVERGENT
        return self.m2 - self.m1**2


def backoff_constants(probs_b: SlotProbabilities, st: SlotTimes) -> BackoffConstants:
    if probs_b.view is not SlotView.BACKOFF:
        raise DomainError("backoff constants need backoff-view slot probabilities")
    pairs = ((probs_b.p_idle, st.t_idle), (probs_b.p_coll, st.t_coll), (probs_b.p_succ, st.t_succ))
    a1, a2, a3 = (sum(p * t**j for p, t in pairs) for j in (1, 2, 3))
    return BackoffConstants(a1, a2, a3)


def countdown_slot_transform(s, probs_b: SlotProbabilities, st: SlotTimes):
    """Laplace transform E[exp(-s L)] of a countdown slot (real or complex s)."""
    return (
        np.exp(-s * st.t_idle) * probs_b.p_idle
        + np.exp(-s * st.t_coll) * probs_b.p_coll
        + np.exp(-s * st.t_succ) * probs_b.p_succ
    )


def window_size(i: int, cfg: NetworkConfig) -> float:
    """Real-valued contention window of attempt ``i`` (1-based)."""
    if i < 1:
        raise DomainError(f"stage index must be >= 1, got {i}")
    return cfg.backoff_factor ** (i - 1) * cfg.min_window


def _uniform_pgf(w: float, z):
    """PGF of the uniform distribution on {0, ..., w-1}, evaluated at z."""
    if w == 1:
        return np.ones_like(z) if isinstance(z, np.ndarray) else 1.0
    if z == 1:
        return 1.0
    if z == 0:
        return 1.0 / w
    log_z = np.log(z)
    return np.expm1(w * log_z) / (w * np.expm1(log_z))


def backoff_window_transform(i: int, z, cfg: NetworkConfig):
    """Z-transform of the number of countdown slots before attempt ``i``."""
    return _uniform_pgf(window_size(i, cfg), z)


def backoff_period_moments(i: int, consts: BackoffConstants, cfg: NetworkConfig) -> tuple[float, float, float]:
    """Mean, variance and third central moment of backoff period ``i``."""
    w = window_size(i, cfg)
    a1, a2, a3 = consts.a1, consts.a2, consts.a3
    mean = a1 * (w - 1) / 2
    var = a1**2 * (w - 1) * (w - 5) / 12 + a2 * (w - 1) / 2
    m3 = (
        a1**3 / 4 * (-(w**2) + 4 * w - 3)
        + a1 * a2 / 4 * (w**2 - 6 * w + 5)
        + a3 * (w - 1) / 2
    )
    return mean, var, m3


def retry_count_prob(j: int, p_c: float) -> float:
    """Probability that the j-th transmission is the first successful one."""
    if int(j) != j or j < 1:
        raise DomainError(f"j must be a positive integer, got {j}")
    if not 0 <= p_c < 1:
        raise DomainError(f"p_c must lie in [0, 1), got {p_c}")
    return p_c ** (j - 1) * (1 - p_c)


def _backoff_raw_moment_polys(consts: BackoffConstants, deterministic: bool = False) -> list[Polynomial]:
    """E[C(W)^k] for k = 0..3 as polynomials in the window W."""
    a1, a2, a3 = consts.a1, consts.a2, consts.a3
    w = Polynomial([0.0, 1.0])
    mean = a1 * (w - 1) / 2
    if deterministic:
        var = Polynomial([0.0])
        m3 = Polynomial([0.0])
    else:
        var = a1**2 * (w - 1) * (w - 5) / 12 + a2 * (w - 1) / 2
        m3 = a1**3 / 4 * (-(w**2) + 4 * w - 3) + a1 * a2 / 4 * (w**2 - 6 * w + 5) + a3 * (w - 1) / 2
    return [Polynomial([1.0]), mean, var + mean**2, m3 + 3 * mean * var + mean**3]


def _window_moment_polys(
    p_c: float, r: float, t_coll: float, t_succ: float, c_moments: list[Polynomial], order: int
) -> list[Polynomial | None]:
    """Raw service-time moments as polynomials in the starting window.

    Entry ``n`` is None when ``p_c * r**n >= 1`` (the moment diverges).
    """
    polys: list[Polynomial | None] = [Polynomial([1.0])]
    for n in range(1, order + 1):
        if p_c * r**n >= 1 or polys[-1] is None:
            polys.append(None)
            continue

        def scaled(poly: Polynomial) -> Polynomial:
            coef = poly.coef * r ** np.arange(len(poly.coef))
            return Polynomial(coef)

        # known part of E[(T_coll + X(rW))^m] for m < n, and full one otherwise
        rhs = Polynomial([0.0])
        for k in range(n + 1):
            m = n - k
            tail = (1 - p_c) * t_succ**m
            collided = Polynomial([0.0])
            for l in range(m + 1):
                if l == n:
                    continue  # unknown m_n(rW) moved to the left-hand side
                collided = collided + comb(m, l) * t_coll ** (m - l) * scaled(polys[l])
            rhs = rhs + comb(n, k) * c_moments[k] * (tail + p_c * collided)
        coef = np.zeros(n + 1)
        rhs_coef = np.zeros(n + 1)
        rhs_coef[: len(rhs.coef)] = rhs.coef[: n + 1]
        for k in range(n + 1):
            coef[k] = rhs_coef[k] / (1 - p_c * r**k)
        polys.append(Polynomial(coef))
    return polys


def mean_service_time(p_c: float, consts: BackoffConstants, st: SlotTimes, cfg: NetworkConfig) -> float:
    """Closed-form mean service time; divergent unless p_c < 1/r."""
    r, w0 = cfg.backoff_factor, cfg.min_window
    if not p_c * r < 1:
        return DIVERGENT
    a1 = consts.a1
    return (
        a1 * (w0 * (1 - p_c) - (1 - r * p_c)) / (2 * (1 - p_c) * (1 - r * p_c))
        + st.t_coll * p_c / (1 - p_c)
        + st.t_succ
    )


def theta_terms(p_c: float, consts: BackoffConstants, st: SlotTimes, cfg: NetworkConfig) -> tuple[float, float, float]:
    """Pieces of the third raw moment, m3 = theta1 + 3*theta2 + theta3.

    theta1 sums the third central moments of the backoff periods, theta2
    pairs the conditional mean with the summed variances, and theta3 is the
    third moment of the conditional mean.  Requires p_c < 1/r**3.
    """
    r, w0 = cfg.backoff_factor, cfg.min_window
    if not p_c * r**3 < 1:
        return DIVERGENT, DIVERGENT, DIVERGENT
    p = p_c
    a1, a2, a3 = consts.a1, consts.a2, consts.a3
    tc, ts = st.t_coll, st.t_succ
    q1, q2, q3 = 1 - r * p, 1 - r**2 * p, 1 - r**3 * p
    u = 1 - p

    theta1 = (
        a1**3 / 4 * (-(w0**2) / q2 + 4 * w0 / q1 - 3 / u)
        + a1 * a2 / 4 * (w0**2 / q2 - 6 * w0 / q1 + 5 / u)
        + a3 / 2 * (w0 / q1 - 1 / u)
    )

    theta2 = (
        a1**3
        / 12
        * (
            w0**3 / 2 * (1 - r**3 * p**2) / (q1 * q2 * q3)
            - 3 * w0**2 * (1 + r * p) / (q1 * q2)
            + 11 * w0 / 2 * (1 - r * p**2) / (u * q1**2)
            - w0**2 / 2 * (1 - r**2 * p**2) / (u * q2**2)
            - 5 * (1 + p) / (2 * u**2)
        )
        + a1**2
        / 12
        * (
            tc
            * (
                w0**2 * p * (1 + r**2 - 2 * r**2 * p) / (u * q2**2)
                - 6 * w0 * p * (1 + r - 2 * r * p) / (u * q1**2)
                + 10 * p / u**2
            )
            + ts * (w0**2 / q2 - 6 * w0 / q1 + 5 / u)
        )
        + a1 * a2 * (w0**2 / 4 * (1 + r * p) / (q1 * q2) - w0 / 2 * (1 - r * p**2) / (u * q1**2) + (1 + p) / (4 * u**2))
        + a2
        * (
            tc * p / 2 * (w0 * (1 + r - 2 * r * p) * u - 2 * q1**2) / (u**2 * q1**2)
            + ts / 2 * (w0 * u - q1) / (u * q1)
        )
    )

    # third moment of the conditional mean path: same recursion, deterministic periods
    c_det = _backoff_raw_moment_polys(consts, deterministic=True)
    theta3 = _window_moment_polys(p, r, tc, ts, c_det, 3)[3](w0)
    return float(theta1), float(theta2), float(theta3)


def service_moments(p_c: float, consts: BackoffConstants, st: SlotTimes, cfg: NetworkConfig) -> ServiceMoments:
    """First three raw moments of the service time, with convergence flags."""
    if not 0 <= p_c < 1:
        raise DomainError(f"p_c must lie in [0, 1), got {p_c}")
    r = cfg.backoff_factor
    conditions = tuple(bool(p_c * r**n < 1) for n in (1, 2, 3))

    m1 = mean_service_time(p_c, consts, st, cfg)
    polys = _window_moment_polys(p_c, r, st.t_coll, st.t_succ, _backoff_raw_moment_polys(consts), 2)
    m2 = float(polys[2](cfg.min_window)) if conditions[1] else DIVERGENT
    if conditions[2]:
        theta1, theta2, theta3 = theta_terms(p_c, consts, st, cfg)
        m3 = theta1 + 3 * theta2 + theta3
    else:
        m3 = DIVERGENT
    return ServiceMoments(m1, m2, m3, conditions)


def service_transform(
    s,
    p_c: float,
    probs_b: SlotProbabilities,
    st: SlotTimes,
    cfg: NetworkConfig,
    tol: float = 1e-14,
    max_terms: int = 1000,
):
    """Laplace transform of the service time by partial sums over attempts.

    ``s`` may be complex with non-negative real part.  Raises
    :class:`SeriesDivergent` when ``max_terms`` terms do not meet ``tol``.
    """
    if not 0 <= p_c < 1:
        raise DomainError(f"p_c must lie in [0, 1), got {p_c}")
    z = countdown_slot_transform(s, probs_b, st)
    coll = np.exp(-s * st.t_coll)
    total = 0.0
    product = 1.0
    weight = 1 - p_c
    shift = np.exp(-s * st.t_succ)
    for j in range(1, max_terms + 1):
        product = product * backoff_window_transform(j, z, cfg)
        term = weight * product * shift
        total = total + term
        if abs(term) <= tol * abs(total):
            return total
        weight *= p_c
        shift = shift * coll
    raise SeriesDivergent(f"service transform did not converge within {max_terms} terms at s={s}")


@dataclass(frozen=True)
class AccessDelayModel:
    """Everything needed to evaluate service-time moments and transforms."""

    cfg: NetworkConfig
    st: SlotTimes
    p_c: float
    probs_b: SlotProbabilities
    consts: BackoffConstants
    moments: ServiceMoments

    @classmethod
    def at_tau(cls, tau: float, cfg: NetworkConfig, st: SlotTimes) -> AccessDelayModel:
        return cls.from_parts(collision_prob_pc(tau, cfg), backoff_view_slot_probs(tau, cfg), st, cfg)

    @classmethod
    def from_parts(
        cls, p_c: float, probs_b: SlotProbabilities, st: SlotTimes, cfg: NetworkConfig
    ) -> AccessDelayModel:
        consts = backoff_constants(probs_b, st)
        return cls(cfg, st, p_c, probs_b, consts, service_moments(p_c, consts, st, cfg))

    def transform(self, s, tol: float = 1e-14):
        return service_transform(s, self.p_c, self.probs_b, self.st, self.cfg, tol)

    def countdown_transform(self, s):
        return countdown_slot_transform(s, self.probs_b, self.st)
