import math

import numpy as np
import pytest

from egma.action import (
    ActionReport,
    InfeasibleEnergy,
    action_report,
    fw_action,
    geometric_action,
    implied_transition_time,
    lambda_profile,
    local_minima,
)
from egma.models import QuadraticModel, TwoChannelModel
from egma.oracles import quad_graph_limit, quad_solution
from egma.path import Path, linear_initial_path, waypoint_initial_path


class ConstantU:
    """Stub model with a flat path potential."""

    kind = "gradient"
    dim = 2

    def path_potential(self, x):
        x = np.atleast_2d(x)
        return np.full(x.shape[0], -1.0)


def straight(n=100):
    return linear_initial_path([1.0, 0.0], [2.0, 0.0], n)


# -- geometric action ---------------------------------------------------------


def test_straight_path_action():
    assert geometric_action(QuadraticModel(0.1), straight(), 0.2) == pytest.approx(1.5, abs=1e-13)


@pytest.mark.parametrize("n", [30, 31, 100, 193])
def test_graph_limit_action(n):
    s = geometric_action(QuadraticModel(0.1), quad_graph_limit(1.0, 2.0, n), 0.2)
    assert abs(s - 2.5) <= 2.0 / n


def test_zero_length_path_action():
    m = QuadraticModel(0.1)
    p = Path(np.tile([1.0, 0.0], (4, 1)))
    assert geometric_action(m, p, float(m.path_potential([1.0, 0.0]))) == 0.0


def test_infeasible_energy_gives_inf():
    assert geometric_action(QuadraticModel(0.1), quad_graph_limit(1.0, 2.0, 30), 0.1) == np.inf


def test_geometric_action_refinement_is_second_order():
    m = TwoChannelModel(0.05)
    t = np.linspace(0.0, np.pi, 20001)
    dense = np.column_stack([-np.cos(t), 0.6 * np.sin(t)])
    e = float(m.path_potential(dense).max()) + 0.5

    def s(n):
        return geometric_action(m, waypoint_initial_path(dense, n), e)

    d1 = abs(s(100) - s(200))
    d2 = abs(s(200) - s(400))
    assert d2 < d1 / 3.0


# -- FW action ----------------------------------------------------------------


def test_fw_straight_and_corner():
    m = QuadraticModel(0.0)
    assert fw_action(m, straight()) == pytest.approx(3.0, abs=1e-13)
    n = 90
    assert abs(fw_action(m, quad_graph_limit(1.0, 2.0, n)) - 4.0) <= 2.0 / n


def test_fw_ignores_epsilon():
    p = quad_graph_limit(1.0, 2.0, 60)
    assert fw_action(QuadraticModel(0.0), p) == fw_action(QuadraticModel(0.7), p)


# -- lambda indicator ---------------------------------------------------------


def test_lambda_zero_at_max_node():
    m = TwoChannelModel(0.05)
    p = waypoint_initial_path([(-1, 0), (0, 0.5), (1, 0)], 64)
    u = m.path_potential(p.nodes)
    j = int(np.argmax(u))
    prof = lambda_profile(m, p)
    assert prof.values[j] == 0.0
    assert j in prof.critical_indices
    assert np.all(prof.values >= 0.0)


def test_lambda_graph_limit_single_interior_zero():
    n = 30  # corner alpha* = 1/3 sits on node 10
    prof = lambda_profile(QuadraticModel(0.1), quad_graph_limit(1.0, 2.0, n), 0.2)
    zeros = np.flatnonzero(prof.values == 0.0)
    np.testing.assert_array_equal(zeros, [10])
    assert 10 in prof.critical_indices


def test_lambda_constant_potential():
    prof = lambda_profile(ConstantU(), linear_initial_path([0, 0], [1, 1], 20), 0.0)
    np.testing.assert_allclose(prof.values, prof.values[0], rtol=1e-12)
    assert prof.critical_indices.size == 0


@pytest.mark.parametrize(
    "values,expected",
    [
        ([3, 1, 2], [1]),
        ([3, 1, 1, 1, 2], [2]),
        ([1, 2, 3], [0]),
        ([2, 2, 2], []),
        ([0, 1, 0, 1, 0], [0, 2, 4]),
        ([1, 0, 0, 1, 0, 2], [1, 4]),
    ],
)
def test_local_minima(values, expected):
    np.testing.assert_array_equal(local_minima(values), expected)


# -- implied time -------------------------------------------------------------


def test_implied_time_infinite_when_max_attained():
    m = QuadraticModel(0.1)
    assert implied_transition_time(m, quad_graph_limit(1.0, 2.0, 30), 0.2) == np.inf


def test_implied_time_matches_closed_form_solution():
    # a fast transition stays on the segment [1, 2]; its energy and duration
    # must be reproduced by the straight path
    m = QuadraticModel(0.1)
    sol = quad_solution(0.1, [1.0, 0.0], [2.0, 0.0], 0.1)
    assert sol.turning_time is None
    t = implied_transition_time(m, straight(2000), sol.energy)
    assert t == pytest.approx(0.1, rel=1e-6)


def test_implied_time_infeasible():
    with pytest.raises(InfeasibleEnergy):
        implied_transition_time(QuadraticModel(0.1), quad_graph_limit(1.0, 2.0, 30), 0.1)


def test_action_derivative_in_energy_is_time():
    m = QuadraticModel(0.1)
    p = straight(400)
    for e in (0.5, 2.0, 10.0):
        h = 1e-4 * e
        ds = (geometric_action(m, p, e + h) - geometric_action(m, p, e - h)) / (2 * h)
        assert ds == pytest.approx(implied_transition_time(m, p, e), rel=1e-4)


def test_implied_time_zero_length():
    m = QuadraticModel(0.1)
    assert implied_transition_time(m, Path(np.tile([1.0, 0.0], (3, 1))), 0.0) == 0.0


# -- report -------------------------------------------------------------------


def test_report_on_graph_limit():
    n = 300
    r = action_report(QuadraticModel(0.1), quad_graph_limit(1.0, 2.0, n))
    assert r.energy == pytest.approx(0.2, abs=1e-15)
    assert abs(r.geometric_action - 2.5) <= 2.0 / n
    assert r.implied_time == np.inf
    assert r.om_action == -np.inf


def test_report_on_degenerate_path():
    m = QuadraticModel(0.1)
    r = action_report(m, Path(np.tile([1.0, 0.0], (3, 1))))
    assert r.energy == pytest.approx(-0.3)
    assert (r.geometric_action, r.fw_geometric_action, r.implied_time, r.om_action) == (0, 0, 0, 0)


def test_report_decomposition_with_finite_time():
    m = TwoChannelModel(0.05)
    p = waypoint_initial_path([(-1, 0), (0, 0.5), (1, 0)], 64)
    # shift the node maximum off the path by using an explicit higher energy
    e = float(m.path_potential(p.nodes).max()) + 1.0
    s = geometric_action(m, p, e)
    t = implied_transition_time(m, p, e)
    assert math.isfinite(t) and t > 0
    r = action_report(m, p)
    assert r.implied_time == np.inf and r.om_action == -np.inf
    assert s - e * t < s


def test_report_round_trip():
    r = ActionReport(0.2, 2.5, 4.0, np.inf, -np.inf)
    d = r.to_dict()
    assert d["implied_time"] == "inf" and d["om_action"] == "-inf"
    assert ActionReport.from_dict(d) == r
