import sys

import pytest

from mprdelay.contention import AccessMode, NetworkConfig
from mprdelay.timing import PhyParams, SlotTimes, slot_times

# ACK sent at the basic rate like a 112-bit control frame behind the PHY header
ACK_S = 20e-6 + 112 / 6e6
SIGMA_S = 9e-6
# RTS (160 bits) and CTS (112 bits) control frames, same convention
RTS_S = 20e-6 + 160 / 6e6
CTS_S = ACK_S


@pytest.fixture
def unit():
    return SlotTimes.uniform()


@pytest.fixture
def aloha50():
    return NetworkConfig(50, 1, 2.0, 16)


@pytest.fixture
def table1_phy():
    return PhyParams.table1(ack_s=ACK_S, idle_slot_s=SIGMA_S)


def reference_setup(mode: str, payload_bits: float = 8000.0, n: int = 50, m: int = 1, r: float = 2.0):
    phy = PhyParams.table1(ack_s=ACK_S, idle_slot_s=SIGMA_S, rts_s=RTS_S, cts_s=CTS_S)
    cfg = NetworkConfig(n, m, r, 16, 0.0, payload_bits, AccessMode.parse(mode))
    return cfg, slot_times(mode, phy, payload_bits)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
