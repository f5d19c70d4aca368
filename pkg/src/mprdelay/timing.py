"""Backoff-slot durations (idle, collision, success) per access mode."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .contention import AccessMode
from .errors import DomainError

# Values published for the reference system.  ACK duration, the idle slot
# sigma and the payload length are not among them and must be supplied.
TABLE1 = {
    "phy_header_s": 20e-6,
    "mac_header_bits": 244.0,
    "data_rate_bps": 6e6,
    "sifs_s": 16e-6,
    "difs_s": 34e-6,
    "min_window": 16,
}

DEFAULT_IDLE_SLOT_S = 9e-6


@dataclass(frozen=True)
class PhyParams:
    phy_header_s: float
    mac_header_bits: float
    data_rate_bps: float
    sifs_s: float
    difs_s: float
    ack_s: float
    idle_slot_s: float = DEFAULT_IDLE_SLOT_S
    rts_s: float | None = None
    cts_s: float | None = None
    prop_delay_s: float = 0.0

    def __post_init__(self):
        if not self.data_rate_bps > 0:
            raise DomainError(f"data_rate_bps must be > 0, got {self.data_rate_bps}")
        for name, value in asdict(self).items():
            if value is None or name == "data_rate_bps":
                continue
            if not value >= 0:
                raise DomainError(f"{name} must be >= 0, got {value}")

    @property
    def header_s(self) -> float:
        """PHY plus MAC header airtime."""
        return self.phy_header_s + self.mac_header_bits / self.data_rate_bps

    @classmethod
    def table1(cls, ack_s: float, idle_slot_s: float = DEFAULT_IDLE_SLOT_S, **extra) -> PhyParams:
        values = {k: v for k, v in TABLE1.items() if k != "min_window"}
        values.update(extra)
        return cls(ack_s=ack_s, idle_slot_s=idle_slot_s, **values)


@dataclass(frozen=True)
class SlotTimes:
    t_idle: float
    t_coll: float
    t_succ: float

    def __post_init__(self):
        for name in ("t_idle", "t_coll", "t_succ"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")

    @classmethod
    def uniform(cls, t: float = 1.0) -> SlotTimes:
        return cls(t, t, t)

    def as_tuple(self) -> tuple[float, float, float]:
        return self.t_idle, self.t_coll, self.t_succ

    def scaled(self, factor: float) -> SlotTimes:
        return SlotTimes(self.t_idle * factor, self.t_coll * factor, self.t_succ * factor)


def slot_times(mode: AccessMode | str, phy: PhyParams, payload_bits: float) -> SlotTimes:
    if not payload_bits > 0:
        raise DomainError(f"payload_bits must be > 0, got {payload_bits}")
    mode = AccessMode.parse(mode)
    frame = phy.header_s + payload_bits / phy.data_rate_bps

    if mode is AccessMode.SLOTTED_ALOHA:
        return SlotTimes(frame, frame, frame)

    if mode is AccessMode.DCF_BASIC:
        t_coll = frame + phy.difs_s + phy.prop_delay_s
        t_succ = frame + phy.sifs_s + phy.ack_s + phy.difs_s + phy.prop_delay_s
        return SlotTimes(phy.idle_slot_s, t_coll, t_succ)

    if phy.rts_s is None or phy.cts_s is None:
        raise DomainError("RTS/CTS access needs explicit rts_s and cts_s durations")
    t_coll = phy.rts_s + phy.difs_s + phy.prop_delay_s
    t_succ = (
        phy.rts_s + phy.cts_s + frame + 3 * phy.sifs_s + phy.ack_s + phy.difs_s + phy.prop_delay_s
    )
    return SlotTimes(phy.idle_slot_s, t_coll, t_succ)
