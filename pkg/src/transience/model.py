"""Semi-Markov decision process data model.

An :class:`Smdp` holds, for every state, a nonempty list of actions. Each
action carries a cost, an exact rational sojourn time and a transition
distribution. When a sink is designated it is always state 0.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12
DEFAULT_POLICY_CAP = 10**6

Policy = tuple  # one action index per state


class ModelError(ValueError):
    """Raised for malformed or inconsistent model input."""


class PolicyCapExceeded(RuntimeError):
    pass


def parse_rational(value) -> Fraction:
    """Parse ``"150"``, ``"1.5"``, ``"3/2"`` or an int into a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ModelError(f"malformed rational {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        value = repr(value)
    if not isinstance(value, str):
        raise ModelError(f"malformed rational {value!r}")
    try:
        return Fraction(value.strip())
    except (ValueError, ZeroDivisionError):
        raise ModelError(f"malformed rational {value!r}") from None


@dataclass(frozen=True)
class Action:
    id: str
    cost: float
    sojourn: Fraction
    transitions: Mapping[int, float]
    kind: str | None = None  # "desc" / "asc" hint from the model file

    def __post_init__(self):
        object.__setattr__(self, "sojourn", parse_rational(self.sojourn))
        object.__setattr__(self, "cost", float(self.cost))
        trans = {int(j): float(p) for j, p in self.transitions.items() if p != 0}
        object.__setattr__(self, "transitions", trans)

    @property
    def support(self) -> frozenset:
        return frozenset(j for j, p in self.transitions.items() if p > 0)

    def row(self, n: int) -> np.ndarray:
        r = np.zeros(n)
        for j, p in self.transitions.items():
            r[j] = p
        return r


@dataclass(frozen=True)
class Smdp:
    """Immutable SMDP. ``sink_lambda`` is None when no sink is designated.

    ``sink_lambda == 0`` denotes a stochastic shortest path configuration.
    ``origin`` maps local state indices back to a parent model after
    :func:`restrict_consistent`.
    """

    states: tuple
    actions: tuple
    sink_lambda: float | None = None
    ranks: Mapping[int, int] | None = None
    origin: tuple | None = None
    _check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(tuple(a) for a in self.actions))
        if len(self.actions) != len(self.states):
            raise ModelError("one action list per state is required")
        for i, acts in enumerate(self.actions):
            if not acts:
                raise ModelError(f"state {self.states[i]!r} has no action")
            for a in acts:
                if a.sojourn < 0:
                    raise ModelError(f"negative sojourn {a.sojourn} for action {a.id!r}")
                for j, p in a.transitions.items():
                    if not 0 <= j < self.n:
                        raise ModelError(f"action {a.id!r} targets unknown state {j}")
                    if not -PROB_TOL <= p <= 1 + PROB_TOL:
                        raise ModelError(f"probability {p} out of [0,1] in action {a.id!r}")
                mass = math.fsum(a.transitions.values())
                if abs(mass - 1.0) > PROB_TOL:
                    raise ModelError(f"transition mass {mass:.12g} ≠ 1 in action {a.id!r}")
        if self.sink_lambda is not None and self.sink_lambda < 0:
            raise ModelError("sink lambda must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def has_sink(self) -> bool:
        return self.sink_lambda is not None

    def all_actions(self):
        for i, acts in enumerate(self.actions):
            for k, a in enumerate(acts):
                yield i, k, a

    @property
    def num_actions(self) -> int:
        return sum(len(a) for a in self.actions)

    def positive_sojourns(self, skip_sink: bool = False) -> list:
        return [a.sojourn for i, _, a in self.all_actions()
                if a.sojourn > 0 and not (skip_sink and self.has_sink and i == 0)]

    @property
    def t_max(self) -> Fraction:
        pos = self.positive_sojourns()
        return max(pos) if pos else Fraction(0)

    @property
    def t_min(self) -> Fraction:
        pos = self.positive_sojourns()
        return min(pos) if pos else Fraction(0)

    # -- policy-level views -------------------------------------------------

    def transition_matrix(self, policy: Sequence[int]) -> np.ndarray:
        return np.array([self.actions[i][k].row(self.n) for i, k in enumerate(policy)])

    def cost_vector(self, policy: Sequence[int]) -> np.ndarray:
        return np.array([self.actions[i][k].cost for i, k in enumerate(policy)])

    def sojourn_vector(self, policy: Sequence[int]) -> np.ndarray:
        return np.array([float(self.actions[i][k].sojourn) for i, k in enumerate(policy)])

    def index(self, name) -> int:
        if isinstance(name, int):
            return name
        return self.states.index(name)


# -- construction helpers ------------------------------------------------------

def make_action(id, cost, sojourn, to: Mapping[int, float], kind=None) -> Action:
    return Action(id=id, cost=cost, sojourn=parse_rational(sojourn), transitions=dict(to), kind=kind)


def sink_action(lam: float, t0) -> Action:
    t0 = parse_rational(t0)
    return Action(id="sink", cost=lam * float(t0), sojourn=t0, transitions={0: 1.0})


# -- file format ---------------------------------------------------------------

def load_model(text: str) -> Smdp:
    """Build a validated :class:`Smdp` from model-file JSON text."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelError("model file must be a JSON object")
    names = doc.get("states")
    if not isinstance(names, list) or not names or not all(isinstance(s, str) for s in names):
        raise ModelError("'states' must be a nonempty list of names")
    if len(set(names)) != len(names):
        raise ModelError("duplicate state names")
    idx = {s: i for i, s in enumerate(names)}
    raw_actions = doc.get("actions")
    if not isinstance(raw_actions, dict):
        raise ModelError("'actions' must map state names to action lists")
    for s in raw_actions:
        if s not in idx:
            raise ModelError(f"actions given for unknown state {s!r}")

    sink = doc.get("sink")
    lam = None
    if sink is not None:
        if not isinstance(sink, dict) or "lambda" not in sink:
            raise ModelError("'sink' must be an object with a 'lambda' entry")
        lam = float(sink["lambda"])

    actions = []
    for i, s in enumerate(names):
        entries = raw_actions.get(s)
        if entries is None and i == 0 and sink is not None:
            if "sojourn" not in sink:
                raise ModelError("sink needs a 'sojourn' when state 0 lists no action")
            actions.append([sink_action(lam, parse_rational(sink["sojourn"]))])
            continue
        if not isinstance(entries, list) or not entries:
            raise ModelError(f"state {s!r} needs a nonempty action list")
        acts = []
        for e in entries:
            if not isinstance(e, dict):
                raise ModelError(f"action entry of {s!r} must be an object")
            missing = {"id", "cost", "sojourn", "to"} - set(e)
            if missing:
                raise ModelError(f"action of {s!r} lacks {sorted(missing)}")
            to = e["to"]
            if not isinstance(to, dict):
                raise ModelError(f"'to' of action {e['id']!r} must be an object")
            trans = {}
            for tgt, p in to.items():
                if tgt not in idx:
                    raise ModelError(f"action {e['id']!r} targets unknown state {tgt!r}")
                trans[idx[tgt]] = float(p)
            kind = e.get("kind")
            if kind not in (None, "desc", "asc"):
                raise ModelError(f"unknown kind {kind!r}")
            acts.append(Action(id=str(e["id"]), cost=float(e["cost"]),
                               sojourn=parse_rational(e["sojourn"]), transitions=trans, kind=kind))
        actions.append(acts)

    ranks = None
    order = doc.get("order")
    if order is not None:
        try:
            ranks = {idx[s]: int(r) for s, r in order["ranks"].items()}
        except (KeyError, TypeError, ValueError):
            raise ModelError("'order' must be {\"ranks\": {state: int}}") from None
        if set(ranks) != set(range(len(names))):
            raise ModelError("'order.ranks' must rank every state")
    return Smdp(states=names, actions=actions, sink_lambda=lam, ranks=ranks)


def _fmt_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def dump_model(m: Smdp) -> str:
    """Serialize to the model-file schema (round-trips through load_model)."""
    doc = {"states": list(m.states)}
    if m.has_sink:
        doc["sink"] = {"lambda": m.sink_lambda, "sojourn": _fmt_rational(m.actions[0][0].sojourn)}
    acts = {}
    for i, s in enumerate(m.states):
        lst = []
        for a in m.actions[i]:
            e = {"id": a.id, "cost": a.cost, "sojourn": _fmt_rational(a.sojourn),
                 "to": {m.states[j]: p for j, p in sorted(a.transitions.items())}}
            if a.kind:
                e["kind"] = a.kind
            lst.append(e)
        acts[s] = lst
    doc["actions"] = acts
    if m.ranks is not None:
        doc["order"] = {"ranks": {m.states[i]: r for i, r in sorted(m.ranks.items())}}
    return json.dumps(doc, indent=2)


# -- validation ----------------------------------------------------------------

@dataclass
class ValidationReport:
    checks: list  # (name, passed, detail)

    @property
    def ok(self) -> bool:
        return all(p for _, p, _ in self.checks)

    def failed(self) -> list:
        return [(n, d) for n, p, d in self.checks if not p]

    def to_dict(self) -> dict:
        return {"ok": self.ok,
                "checks": [{"name": n, "pass": p, "detail": d} for n, p, d in self.checks]}


def sink_shape_problem(m: Smdp) -> str | None:
    if not m.has_sink:
        return None
    acts = m.actions[0]
    if len(acts) != 1:
        return f"sink has {len(acts)} actions, expected 1"
    a = acts[0]
    if a.transitions.get(0, 0.0) != 1.0:
        return "sink action must loop on state 0 with probability 1"
    if a.sojourn <= 0:
        return "sink action needs a positive sojourn"
    expect = m.sink_lambda * float(a.sojourn)
    if abs(a.cost - expect) > PROB_TOL * max(1.0, abs(expect)):
        return f"sink cost {a.cost:.12g} ≠ lambda·t0 = {expect:.12g}"
    return None


def validate(m: Smdp) -> ValidationReport:
    from .chains import reaches_target, zeno_check

    checks = []
    worst = max(abs(math.fsum(a.transitions.values()) - 1.0) for _, _, a in m.all_actions())
    checks.append(("probability-normalization", worst <= PROB_TOL, f"max deviation {worst:.3g}"))

    if m.has_sink:
        prob = sink_shape_problem(m)
        checks.append(("lambda-sink-shape", prob is None, prob or f"lambda={m.sink_lambda:.12g}"))
    else:
        checks.append(("lambda-sink-shape", True, "skipped: no sink designated"))

    z = zeno_check(m)
    detail = ("zeno core empty" if z.non_zeno
              else f"zero-sojourn closed set {sorted(m.states[i] for i in z.zeno_core)}")
    checks.append(("non-zeno", z.non_zeno, detail))

    if m.has_sink:
        reach = reaches_target(m, {0})
        stuck = [m.states[i] for i in range(m.n) if i not in reach]
        checks.append(("access-to-sink", not stuck,
                       "all states reach 0" if not stuck else f"no access from {stuck}"))
    else:
        checks.append(("access-to-sink", True, "skipped: no sink designated"))
    return ValidationReport(checks)


# -- transformations -----------------------------------------------------------

def reduce_costs(m: Smdp, lam: float) -> Smdp:
    """Replace every cost by ``c - lam * t``; the result is an SSP configuration."""
    if not m.has_sink:
        raise ModelError("reduce_costs needs a model with a designated sink")
    if lam == 0:
        return m if m.sink_lambda == 0 else replace(m, sink_lambda=0.0)
    acts = [[replace(a, cost=a.cost - lam * float(a.sojourn)) for a in row] for row in m.actions]
    if m.sink_lambda == lam:
        # exact zero on the sink, not a float residue
        acts[0] = [replace(a, cost=0.0) for a in acts[0]]
    return replace(m, actions=acts, sink_lambda=0.0)


def restrict_consistent(m: Smdp, states, actions: Mapping[int, Sequence[int]] | None = None) -> Smdp:
    """Sub-SMDP on ``states`` keeping ``actions[i]`` (indices into A_i).

    Kept states are re-indexed in increasing original order; ``origin`` of the
    result maps them back.
    """
    keep = sorted(set(states))
    if not keep:
        raise ModelError("empty state subset")
    pos = {s: k for k, s in enumerate(keep)}
    new_actions = []
    for s in keep:
        chosen = range(len(m.actions[s])) if actions is None or s not in actions else actions[s]
        chosen = list(chosen)
        if not chosen:
            raise ModelError(f"no action kept at state {m.states[s]!r}")
        row = []
        for k in chosen:
            a = m.actions[s][k]
            leak = [j for j in a.support if j not in pos]
            if leak:
                raise ModelError(f"inconsistent restriction: action {a.id!r} of "
                                 f"{m.states[s]!r} leaks to {[m.states[j] for j in leak]}")
            row.append(replace(a, transitions={pos[j]: p for j, p in a.transitions.items()}))
        new_actions.append(row)
    lam = m.sink_lambda if keep[0] == 0 else None
    ranks = {pos[s]: m.ranks[s] for s in keep} if m.ranks is not None else None
    base = m.origin or tuple(range(m.n))
    if len(keep) == m.n and actions is None:
        return m
    return Smdp(states=[m.states[s] for s in keep], actions=new_actions, sink_lambda=lam,
                ranks=ranks, origin=tuple(base[s] for s in keep))


def policy_cap() -> int:
    env = os.environ.get("TRANSIENCE_POLICY_CAP")
    return int(env) if env else DEFAULT_POLICY_CAP


def count_policies(action_sets) -> int:
    return math.prod(len(a) for a in action_sets)


def enumerate_policies(m: Smdp, action_sets=None, cap: int | None = None) -> list:
    """All policies in lexicographic order (optionally within per-state subsets)."""
    sets = action_sets if action_sets is not None else [range(len(a)) for a in m.actions]
    sets = [sorted(s) for s in sets]
    cap = policy_cap() if cap is None else cap
    total = count_policies(sets)
    if total > cap:
        raise PolicyCapExceeded(f"{total} policies exceed the cap of {cap}")
    return list(itertools.product(*sets))
