import math

import pytest

import roughflow as rf


def test_params_tie_constants_to_beta():
    g = rf.ApproxParams(0.05, math.pi)
    assert g.beta == pytest.approx(math.sqrt(27 * math.pi / 32), rel=1e-15)
    assert 4 * g.beta == pytest.approx(3 * g.alpha, abs=0)
    assert g.gamma == g.beta
    with pytest.raises(ValueError):
        rf.ApproxParams(-1.0, 1.0)


def test_field_values():
    assert rf.eval_b((0, 0, 0.5)) == pytest.approx((0, 0, -4))
    assert rf.eval_b((1, 0, 0.5)) == pytest.approx((0, 0, 0), abs=0)
    g = rf.ApproxParams(0.1, math.pi)
    bz = rf.eval_b_eps(g, (0, 0, 0))[2]
    assert bz == pytest.approx(-27 / (16 * g.beta * 0.1), rel=1e-14)
    assert rf.classify_eps(g, (0, 0, 0)) == "C_eps"
    assert rf.classify_limit((0.3, 0.4, -1)) == "P-"


def test_flow_round_trip():
    theta = 1.1
    p = (0.2, 0.1, -0.8)
    for t in (0.1, 0.6):
        q = rf.flow_limit_inverse(theta, t, p)
        back = rf.flow_limit(theta, t, q)
        assert back == pytest.approx(p, abs=1e-12)


def test_breakpoint_identities():
    g = rf.ApproxParams(0.05, math.pi / 2)
    bp = rf.breakpoints(g, 1.0)
    assert bp.t3 - bp.t2 == pytest.approx(math.pi / 2 * 0.05**2, abs=1e-14)
    assert bp.t2 - bp.t1 == pytest.approx(bp.t4 - bp.t3, abs=1e-16)


def test_engine_matches_closed_form():
    g = rf.ApproxParams(0.05, math.pi / 2)
    x0 = (0.3, 0.0, 1.0)
    rec = rf.integrate_eps(g, x0, 0.5)
    assert rec["status"] == "completed"
    closed = rf.flow_eps_closed(g, 0.5, x0)
    final = rec["states"][-1]
    err = max(abs(a - b) for a, b in zip(final, closed))
    assert err <= 1e-6
    assert len(rec["events"]) == 4


def test_transport_point_solves():
    theta, phi = math.pi / 2, math.pi
    p = (0.0, 0.4, -1.8)
    u_theta = rf.solve_exact(theta, 1.0, p)
    u_phi = rf.solve_exact(phi, 1.0, p)
    assert u_theta == pytest.approx(0.12047839791650786, abs=1e-10)
    assert abs(u_phi) < 1e-12
    g = rf.ApproxParams(0.1, theta)
    u_eps = rf.solve_eps(g, 1.0, p)
    assert abs(u_eps - u_theta) < 0.5  # same ballpark; converges as eps -> 0


def test_dpl2d_pair_splits():
    x, y = 0.5, 1.0
    before = rf.dpl2d_flows(0.3, x, y)
    assert before[0] == pytest.approx(before[1], abs=1e-14)
    after = rf.dpl2d_flows(1.0, x, y)
    assert after[0][0] == pytest.approx(0.5, rel=1e-12)
    assert after[1][0] == pytest.approx(-0.5, rel=1e-12)
