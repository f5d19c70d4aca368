"""Slot-outcome probabilities for N stations contending on an MPR channel.

A slot carrying ``k`` simultaneous transmissions is idle when ``k == 0``,
successful when ``1 <= k <= M`` and a collision when ``k > M``.  Every
station transmits independently with the same average probability ``tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special

from .errors import DomainError


class AccessMode(str, Enum):
    SLOTTED_ALOHA = "aloha"
    DCF_BASIC = "basic"
    DCF_RTS_CTS = "rtscts"

    @classmethod
    def parse(cls, value: str | AccessMode) -> AccessMode:
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "").replace("/", "")
        aliases = {
            "aloha": cls.SLOTTED_ALOHA,
            "slottedaloha": cls.SLOTTED_ALOHA,
            "basic": cls.DCF_BASIC,
            "dcfbasic": cls.DCF_BASIC,
            "rtscts": cls.DCF_RTS_CTS,
            "dcfrtscts": cls.DCF_RTS_CTS,
        }
        try:
            return aliases[key]
        except KeyError:
            raise DomainError(f"unknown access mode {value!r}") from None


class SlotView(str, Enum):
    GENERIC = "generic"
    BACKOFF = "backoff"


@dataclass(frozen=True)
class NetworkConfig:
    n_stations: int
    mpr_capability: int
    backoff_factor: float
    min_window: int
    arrival_rate: float = 0.0
    payload_bits: float = 1.0
    access_mode: AccessMode = AccessMode.SLOTTED_ALOHA

    def __post_init__(self):
        if int(self.n_stations) != self.n_stations or self.n_stations < 1:
            raise DomainError(f"n_stations must be a positive integer, got {self.n_stations}")
        if int(self.mpr_capability) != self.mpr_capability or self.mpr_capability < 1:
            raise DomainError(f"mpr_capability must be a positive integer, got {self.mpr_capability}")
        if int(self.min_window) != self.min_window or self.min_window < 1:
            raise DomainError(f"min_window must be a positive integer, got {self.min_window}")
        if not self.backoff_factor >= 1:
            raise DomainError(f"backoff_factor must be >= 1, got {self.backoff_factor}")
        if not self.arrival_rate >= 0:
            raise DomainError(f"arrival_rate must be >= 0, got {self.arrival_rate}")
        if not self.payload_bits > 0:
            raise DomainError(f"payload_bits must be > 0, got {self.payload_bits}")
        object.__setattr__(self, "n_stations", int(self.n_stations))
        object.__setattr__(self, "mpr_capability", int(self.mpr_capability))
        object.__setattr__(self, "min_window", int(self.min_window))
        object.__setattr__(self, "backoff_factor", float(self.backoff_factor))
        object.__setattr__(self, "access_mode", AccessMode.parse(self.access_mode))

    @property
    def offered_load_bps(self) -> float:
        """Aggregate offered load N * lambda * PL in bits per second."""
        return self.n_stations * self.arrival_rate * self.payload_bits

    def with_(self, **changes) -> NetworkConfig:
        fields = {
            "n_stations": self.n_stations,
            "mpr_capability": self.mpr_capability,
            "backoff_factor": self.backoff_factor,
            "min_window": self.min_window,
            "arrival_rate": self.arrival_rate,
            "payload_bits": self.payload_bits,
            "access_mode": self.access_mode,
        }
        fields.update(changes)
        return NetworkConfig(**fields)


@dataclass(frozen=True)
class SlotProbabilities:
    p_idle: float
    p_coll: float
    p_succ: float
    view: SlotView

    def as_tuple(self) -> tuple[float, float, float]:
        return self.p_idle, self.p_coll, self.p_succ


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau must lie in [0, 1], got {tau}")
    return tau


def _binomial_tail(n: int, k_min: int, tau: float) -> float:
    """Pr{Binomial(n, tau) >= k_min} via the regularized incomplete beta."""
    if k_min <= 0:
        return 1.0
    if k_min > n:
        return 0.0
    if tau == 0.0:
        return 0.0
    if tau == 1.0:
        return 1.0
    return float(special.betainc(k_min, n - k_min + 1, tau))


def _slot_probs(n: int, m: int, tau: float, view: SlotView) -> SlotProbabilities:
    p_idle = (1.0 - tau) ** n
    p_coll = _binomial_tail(n, m + 1, tau)
    p_succ = max(0.0, 1.0 - p_idle - p_coll)
    return SlotProbabilities(p_idle, p_coll, p_succ, view)


def generic_slot_probs(tau: float, cfg: NetworkConfig) -> SlotProbabilities:
    """Idle/collision/success probabilities of a randomly chosen slot."""
    tau = _check_tau(tau)
    return _slot_probs(cfg.n_stations, cfg.mpr_capability, tau, SlotView.GENERIC)


def backoff_view_slot_probs(tau: float, cfg: NetworkConfig) -> SlotProbabilities:
    """Slot probabilities seen by a tagged station while it counts down.

    Only the other ``N - 1`` stations can transmit, and a slot is a
    collision when more than ``M`` of them do.
    """
    tau = _check_tau(tau)
    return _slot_probs(cfg.n_stations - 1, cfg.mpr_capability, tau, SlotView.BACKOFF)


def log_binom_pmf(n: int, k, tau: float):
    k = np.asarray(k, dtype=float)
    return (
        special.gammaln(n + 1)
        - special.gammaln(k + 1)
        - special.gammaln(n - k + 1)
        + special.xlogy(k, tau)
        + special.xlog1py(n - k, -tau)
    )


def attempt_count_prob(tau: float, cfg: NetworkConfig, k: int) -> float:
    """Pr{exactly k of the N stations transmit in a generic slot}."""
    tau = _check_tau(tau)
    if int(k) != k or not 0 <= k <= cfg.n_stations:
        raise DomainError(f"k must be an integer in [0, {cfg.n_stations}], got {k}")
    return float(np.exp(log_binom_pmf(cfg.n_stations, int(k), tau)))


def attempt_count_pmf(tau: float, n: int) -> np.ndarray:
    """Vector of Pr{X = k} for k = 0..n."""
    tau = _check_tau(tau)
    return np.exp(log_binom_pmf(n, np.arange(n + 1), tau))


def collision_prob_pc(tau: float, cfg: NetworkConfig) -> float:
    """Probability that a transmission from a tagged station collides.

    This is the chance that at least ``M`` of the other ``N - 1`` stations
    transmit in the same slot.
    """
    tau = _check_tau(tau)
    return _binomial_tail(cfg.n_stations - 1, cfg.mpr_capability, tau)


def mean_successes(tau: float, cfg: NetworkConfig) -> float:
    """Expected number of packets decoded per generic slot.

    Uses sum_{k=1..M} k Pr{X=k} = N tau Pr{Binomial(N-1, tau) <= M-1}.
    """
    tau = _check_tau(tau)
    return cfg.n_stations * tau * (1.0 - collision_prob_pc(tau, cfg))


def poisson_attempt_prob(eta: float, k: int) -> float:
    """Poisson approximation to Pr{X = k} with attempt rate ``eta``."""
    if not eta >= 0:
        raise DomainError(f"eta must be >= 0, got {eta}")
    if int(k) != k or k < 0:
        raise DomainError(f"k must be a non-negative integer, got {k}")
    k = int(k)
    return math.exp(special.xlogy(k, eta) - eta - special.gammaln(k + 1))
