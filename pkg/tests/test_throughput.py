import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mprdelay.contention import NetworkConfig
from mprdelay.errors import NoSolution
from mprdelay.throughput import LoadCase, bisect, offered_load_roots, tau_star, throughput
from mprdelay.timing import SlotTimes
from conftest import reference_setup

U = SlotTimes.uniform()


def test_throughput_examples():
    c = NetworkConfig(2, 1, 2, 16)
    assert throughput(0.0, c, U) == 0
    assert throughput(1.0, c, U) == 0
    assert throughput(0.1, c, U) == pytest.approx(0.18, rel=1e-14)


def test_tau_star_calculus_oracles():
    t, s = tau_star(NetworkConfig(2, 1, 2, 16), U)
    assert t == pytest.approx(0.5, abs=1e-7)
    assert s == pytest.approx(0.5, rel=1e-12)
    t, s = tau_star(NetworkConfig(50, 1, 2, 16), U)
    assert t == pytest.approx(1 / 50, rel=1e-6)
    assert s == pytest.approx((1 - 1 / 50) ** 49, rel=1e-12)
    assert tau_star(NetworkConfig(3, 5, 2, 16), U)[0] == 1.0


def test_tau_star_is_grid_max():
    for mode in ("basic", "rtscts"):
        if mode == "rtscts":
            continue
        cfg, st_ = reference_setup(mode)
        t, s = tau_star(cfg, st_)
        grid = np.linspace(1e-5, 0.2, 20001)
        assert s >= max(throughput(x, cfg, st_) for x in grid) * (1 - 1e-12)
        h = 1e-7
        assert abs(throughput(t + h, cfg, st_) - throughput(t - h, cfg, st_)) / (2 * h) <= 1e-3 * s / t


def test_roots_quadratic_oracle():
    c = NetworkConfig(2, 1, 2, 16, arrival_rate=0.09)
    pts = offered_load_roots(c, U)
    assert pts.tau_l == pytest.approx(0.1, abs=1e-11)
    assert pts.tau_r == pytest.approx(0.9, abs=1e-11)


def test_roots_zero_load_tangency_and_excess():
    c = NetworkConfig(50, 1, 2, 16)
    assert offered_load_roots(c, U).tau_l == 0
    t, s = tau_star(c, U)
    pts = offered_load_roots(c.with_(arrival_rate=s / 50), U)
    assert pts.tau_l == pts.tau_r == pytest.approx(t)
    with pytest.raises(NoSolution):
        offered_load_roots(c.with_(arrival_rate=1.01 * s / 50), U)


def test_roots_reproduce_load_and_cases():
    c = NetworkConfig(50, 1, 2, 16)
    for load in (0.05, 0.2, 0.3, 0.36):
        pts = offered_load_roots(c.with_(arrival_rate=load / 50), U)
        assert pts.tau_l <= pts.tau_r
        for t in (pts.tau_l, pts.tau_r):
            assert throughput(t, c, U) == pytest.approx(load, rel=1e-9)
        # ALOHA with binary EB saturates below the throughput peak
        assert pts.relationship in (LoadCase.CASE_I, LoadCase.CASE_III)
        assert all(t <= pts.tau_s * (1 + 1e-12) for t in pts.operating())
    # DCF basic saturates beyond the peak, so loads above S_s give two roots below tau_s
    cfg, st_ = reference_setup("basic")
    from mprdelay.saturation import solve_saturation

    sat = solve_saturation(cfg, st_)
    pts = offered_load_roots(cfg.with_(arrival_rate=1.1 * sat.s_s / 8000 / 50), st_)
    assert pts.relationship is LoadCase.CASE_II
    assert pts.tau_r < pts.tau_s


def test_bisect_requires_sign_change():
    with pytest.raises(ValueError):
        bisect(lambda x: x * x + 1, -1, 1)
    assert bisect(lambda x: x - 0.25, 0, 1) == pytest.approx(0.25, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 120), m=st.integers(1, 6))
def test_property_unimodal(n, m):
    if m >= n:
        return
    c = NetworkConfig(n, m, 2, 16)
    s = np.array([throughput(t, c, U) for t in np.linspace(0, 1, 400)])
    assert (s >= 0).all()
    diff = np.diff(s)
    d = np.sign(diff[np.abs(diff) > 1e-12 * s.max()])
    assert np.count_nonzero(np.diff(d)) <= 1
