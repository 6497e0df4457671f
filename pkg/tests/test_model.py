import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from transience.model import (
    Action, ModelError, PolicyCapExceeded, Smdp, dump_model, enumerate_policies,
    load_model, parse_rational, reduce_costs, restrict_consistent, validate,
)

from helpers import DATA, load, random_model


def test_toy1_loads(toy1):
    assert toy1.n == 2
    assert toy1.t_max == 1
    assert toy1.sink_lambda == 1.0
    assert toy1.actions[0][0].cost == 1.0  # generated sink action, lambda * t0


def test_ems5_file(ems5):
    m = load("ems5.json")
    assert m.n == 6
    assert m.num_actions == 8
    assert m.t_max == 200
    assert m.ranks == {0: 0, 1: 1, 2: 2, 3: 2, 4: 3, 5: 4}
    assert dump_model(m) == dump_model(ems5)


def test_bad_mass_message():
    with pytest.raises(ModelError, match="transition mass 0.9 ≠ 1"):
        load("bad_mass.json")


@pytest.mark.parametrize("text, fragment", [
    ("[]", "JSON object"),
    ("{", "invalid JSON"),
    ('{"states": ["0"], "actions": {"0": []}}', "nonempty action list"),
    ('{"states": ["0"], "actions": {"0": [{"id": "a", "cost": 0, "sojourn": "-1", "to": {"0": 1}}]}}',
     "negative sojourn"),
    ('{"states": ["0"], "actions": {"0": [{"id": "a", "cost": 0, "sojourn": "x/y", "to": {"0": 1}}]}}',
     "malformed rational"),
    ('{"states": ["0"], "actions": {"0": [{"id": "a", "cost": 0, "sojourn": "1", "to": {"9": 1}}]}}',
     "unknown state"),
    ('{"states": ["0", "0"], "actions": {}}', "duplicate"),
])
def test_schema_errors(text, fragment):
    with pytest.raises(ModelError, match=fragment):
        load_model(text)


@pytest.mark.parametrize("raw, expected", [
    ("150", Fraction(150)), ("1.5", Fraction(3, 2)), ("3/2", Fraction(3, 2)), (7, Fraction(7)),
    ("0.1", Fraction(1, 10)),
])
def test_parse_rational(raw, expected):
    assert parse_rational(raw) == expected


def test_validate_passes(toy1, ems5):
    for m in (toy1, ems5):
        rep = validate(m)
        assert rep.ok
        assert [n for n, _, _ in rep.checks] == [
            "probability-normalization", "lambda-sink-shape", "non-zeno", "access-to-sink"]


def test_validate_zero_sink_sojourn():
    m = Smdp(states=["0", "1"], actions=[[Action("s", 0.0, 0, {0: 1.0})],
                                         [Action("b", 2.0, 1, {0: 1.0})]], sink_lambda=1.0)
    failed = dict(validate(m).failed())
    assert "non-zeno" in failed
    assert "lambda-sink-shape" in failed


def test_validate_no_access():
    m = Smdp(states=["0", "1"], actions=[[Action("s", 1.0, 1, {0: 1.0})],
                                         [Action("b", 2.0, 1, {1: 1.0})]], sink_lambda=1.0)
    assert [n for n, _ in validate(m).failed()] == ["access-to-sink"]


def test_reduce_costs(toy1, ems5):
    red = reduce_costs(toy1, 1.0)
    assert red.actions[1][0].cost == 1.0
    assert red.actions[0][0].cost == 0.0
    red5 = reduce_costs(ems5, 0.025)
    assert red5.actions[2][0].cost == pytest.approx(-3.75, abs=1e-12)
    for (_, _, a), (_, _, b) in zip(ems5.all_actions(), red5.all_actions()):
        assert a.sojourn == b.sojourn and a.transitions == b.transitions


def test_reduce_costs_zero_lambda_identity(cyc3):
    assert reduce_costs(cyc3, 0.0) == cyc3


def test_reduce_costs_idempotent(ems5):
    red = reduce_costs(ems5, 0.025)
    assert reduce_costs(red, 0.0) == red


def test_reduce_costs_needs_sink():
    m = Smdp(states=["0"], actions=[[Action("a", 1.0, 1, {0: 1.0})]])
    with pytest.raises(ModelError):
        reduce_costs(m, 1.0)


def test_restrict_ems_class(ems5):
    sub = restrict_consistent(ems5, {3, 4, 5}, {3: [1]})
    assert sub.n == 3
    assert sub.origin == (3, 4, 5)
    assert [a.id for a in sub.actions[0]] == ["a3+"]
    assert not sub.has_sink
    assert validate(sub).ok


def test_restrict_leak(toy1):
    with pytest.raises(ModelError, match="leaks"):
        restrict_consistent(toy1, {1}, {1: [0]})


def test_restrict_identity(ems5):
    assert restrict_consistent(ems5, range(ems5.n)) is ems5


def test_restrict_reembedding_preserves_data():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 50:
        m = random_model(rng)
        keep = [i for i in range(m.n) if rng.random() < 0.7] or [0]
        acts = {}
        ok = True
        for i in keep:
            inside = [k for k, a in enumerate(m.actions[i]) if a.support <= set(keep)]
            if not inside:
                ok = False
                break
            acts[i] = inside
        if not ok:
            continue
        sub = restrict_consistent(m, keep, acts)
        for s, i in enumerate(sub.origin):
            for a, k in zip(sub.actions[s], acts[i]):
                orig = m.actions[i][k]
                assert (a.cost, a.sojourn) == (orig.cost, orig.sojourn)
                assert {sub.origin[j]: p for j, p in a.transitions.items()} == orig.transitions
        checked += 1


def test_enumerate_policies(toy1, ems5, cyc3):
    assert enumerate_policies(toy1) == [(0, 0)]
    pols = enumerate_policies(ems5)
    assert pols == [(0, 0, 0, 0, 0, 0), (0, 0, 0, 1, 0, 0), (0, 1, 0, 0, 0, 0), (0, 1, 0, 1, 0, 0)]
    assert len(enumerate_policies(cyc3)) == 2


def test_enumerate_count_matches_product():
    rng = np.random.default_rng(3)
    for _ in range(100):
        m = random_model(rng)
        assert len(enumerate_policies(m)) == math.prod(len(a) for a in m.actions)


def test_policy_cap(ems5, monkeypatch):
    with pytest.raises(PolicyCapExceeded):
        enumerate_policies(ems5, cap=3)
    monkeypatch.setenv("TRANSIENCE_POLICY_CAP", "2")
    with pytest.raises(PolicyCapExceeded):
        enumerate_policies(ems5)


def test_roundtrip_random():
    rng = np.random.default_rng(11)
    for _ in range(50):
        m = random_model(rng, sink=True)
        back = load_model(dump_model(m))
        assert back.actions == m.actions
        assert back.sink_lambda == m.sink_lambda


def test_loaded_rows_sum_to_one():
    for path in DATA.glob("*.json"):
        if path.name == "bad_mass.json":
            continue
        m = load_model(path.read_text())
        for _, _, a in m.all_actions():
            assert abs(sum(a.transitions.values()) - 1.0) <= 1e-12


def test_kind_tag_must_agree(ems5):
    from transience.hierarchy import HierarchyError, partition_actions
    bad = [list(r) for r in ems5.actions]
    bad[1][0] = replace(bad[1][0], kind="asc")
    m = replace(ems5, actions=bad)
    with pytest.raises(HierarchyError, match="tagged"):
        partition_actions(m, m.ranks)
