from fractions import Fraction

import numpy as np
import pytest

from transience.chains import analyze_policy
from transience.ems import EmsParams, EMS5, build_ems, ems_closed_forms
from transience.hierarchy import (
    HierarchyError, ascent_component, partition_actions, restricted_growth_rate,
    transience_bounds, verify_ascending_improper,
)
from transience.model import Action, Smdp, enumerate_policies, reduce_costs
from transience.trajectory import measure_catchup, simulate_bulk

from helpers import cyc3_sink

CHI1 = 7 / 156 - 0.025
CHI3 = 3.5 / 66 - 0.025


@pytest.fixture
def red5(ems5):
    return reduce_costs(ems5, 0.025)


@pytest.fixture
def part5(red5):
    return partition_actions(red5, red5.ranks)


def test_partition_ems5(part5):
    assert part5.desc == ((), (0,), (0,), (0,), (0,), (0,))
    assert part5.asc == ((0,), (1,), (), (1,), (), ())


def test_partition_cyc3(cyc3):
    part = partition_actions(cyc3, {0: 0, 1: 1, 2: 2})
    assert part.desc[1] == (0,) and part.asc[1] == (1,)
    assert part.desc[2] == (0,)


def test_partition_equal_ranks(red5):
    with pytest.raises(HierarchyError, match="desc"):
        partition_actions(red5, {i: 0 for i in range(6)})


def test_partition_unclassifiable():
    m = Smdp(states=["0", "1", "2"], actions=[
        [Action("s", 0.0, 1, {0: 1.0})],
        [Action("d", 0.0, 1, {0: 1.0}), Action("mix", 0.0, 1, {0: 0.5, 2: 0.5})],
        [Action("d2", 0.0, 1, {1: 1.0})]], sink_lambda=0.0)
    with pytest.raises(HierarchyError, match="neither"):
        partition_actions(m, {0: 0, 1: 1, 2: 2})


def test_partition_shift_stable(red5, part5):
    shifted = partition_actions(red5, {i: r + 7 for i, r in red5.ranks.items()})
    assert (shifted.desc, shifted.asc) == (part5.desc, part5.asc)


def test_ascending_improper(red5, part5, cyc3):
    assert verify_ascending_improper(red5, part5)
    for sigma in enumerate_policies(red5):
        uses_asc = any(sigma[i] in part5.asc[i] for i in range(1, 6))
        assert analyze_policy(red5, sigma).proper == (not uses_asc)
    assert verify_ascending_improper(cyc3, partition_actions(cyc3, {0: 0, 1: 1, 2: 2}))


def test_ascending_reaching_sink():
    # "up" climbs to 2, whose descent 2 -> 0 makes a proper policy through it
    m = Smdp(states=["0", "1", "2"], actions=[
        [Action("s", 0.0, 1, {0: 1.0})],
        [Action("d", 1.0, 1, {0: 1.0}), Action("up", 1.0, 1, {2: 1.0})],
        [Action("d2", 1.0, 1, {0: 1.0})]], sink_lambda=0.0)
    part = partition_actions(m, {0: 0, 1: 1, 2: 2})
    assert not verify_ascending_improper(m, part)


def test_ascent_components(red5, part5, cyc3):
    _, c1 = ascent_component(red5, part5, 1)
    assert c1 == {1, 2, 3, 4, 5}
    _, c3 = ascent_component(red5, part5, 3)
    assert c3 == {3, 4, 5}
    _, cc = ascent_component(cyc3, partition_actions(cyc3, {0: 0, 1: 1, 2: 2}), 1)
    assert cc == {1, 2}


def test_ascent_literal_flag(red5, part5):
    adj, comp = ascent_component(red5, part5, 1, literal=True)
    # literal reading keeps only ascending edges everywhere, so no cycle survives
    assert comp == {1}
    assert not adj[3, 1]


def test_restricted_rates(red5, part5, cyc3):
    assert restricted_growth_rate(red5, part5, 1) == pytest.approx(CHI1, abs=1e-12)
    assert restricted_growth_rate(red5, part5, 3) == pytest.approx(CHI3, abs=1e-12)
    assert restricted_growth_rate(cyc3, partition_actions(cyc3, {0: 0, 1: 1, 2: 2}), 1) == pytest.approx(0.5)


def test_bounds_ems5(red5, part5):
    b = transience_bounds(red5, part5, 10.0)
    expected = 10 / CHI1 + 150 + 10 / CHI3 + 20 + 200
    assert b.max_bound == pytest.approx(expected, abs=1e-9)
    assert b.max_bound == pytest.approx(1229.98256320837, abs=1e-9)
    assert (b.d, b.d_plus) == (4, 2)
    assert b.coarse == pytest.approx(4 * 200 + 2 * 10 / CHI1, abs=1e-9)
    assert b.theta_bound[0] == 0.0
    b0 = transience_bounds(red5, part5, 0.0)
    np.testing.assert_allclose(b0.theta_bound, [0, 0, 150, 150, 170, 370], atol=1e-12)


def test_restricted_rate_dominates_chi_lower(red5, part5):
    b = transience_bounds(red5, part5, 1.0)
    for v in b.chi_i_map.values():
        assert v >= b.chi_lower - 1e-9


def test_bounds_refuse_congested(ems4):
    red = reduce_costs(ems4, 0.025)
    part = partition_actions(red, ems4.ranks)
    with pytest.raises(HierarchyError, match="chi_lower"):
        transience_bounds(red, part, 1.0)


@pytest.mark.parametrize("M", [0.0, 1.0, 10.0, 100.0])
@pytest.mark.parametrize("which", ["ems5", "cyc3"])
def test_measured_catchup_within_bounds(M, which):
    if which == "ems5":
        m = build_ems(EmsParams(**EMS5))[0]
    else:
        m = cyc3_sink()
    lam = m.sink_lambda
    red = reduce_costs(m, lam)
    part = partition_actions(red, m.ranks)
    b = transience_bounds(red, part, M)
    t_bar = Fraction(20) if which == "ems5" else Fraction(2)
    tr = simulate_bulk(m, M, t_bar, t_bar + 2 * int(b.max_bound) + 50)
    h = float(tr.grid.h)
    from transience.ssp import solve_u_star
    theta = measure_catchup(tr, lam, solve_u_star(red), M, t_bar=t_bar) - float(t_bar)
    assert np.all(theta <= b.theta_bound + h)
    for i, chi in b.chi_i_map.items():
        _, comp = ascent_component(red, part, i)
        for j in comp:
            assert theta[j] >= theta[i] - h


def test_bounds_match_closed_form_random():
    rng = np.random.default_rng(41)
    done = 0
    while done < 100:
        p = EmsParams(lam=float(rng.uniform(0.005, 0.05)), pi=float(rng.uniform(0.05, 0.95)),
                      t1=int(rng.integers(1, 30)) * 10, t2=int(rng.integers(1, 30)) * 10,
                      t3=int(rng.integers(1, 30)) * 10,
                      N_A=float(rng.uniform(0.5, 20)), N_P=float(rng.uniform(0.5, 20)))
        cf = ems_closed_forms(p)
        if min(cf.lambda_A, cf.lambda_P) <= p.lam * 1.01:
            continue
        m, ranks = build_ems(p)
        red = reduce_costs(m, p.lam)
        b = transience_bounds(red, partition_actions(red, ranks), 10.0)
        assert b.max_bound == pytest.approx(cf.bound(10.0), rel=1e-9, abs=1e-9)
        done += 1
