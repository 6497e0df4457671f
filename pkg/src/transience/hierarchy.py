"""Hierarchical structure of actions and the resulting transience bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .chains import reachable_from, strong_components
from .model import Smdp, restrict_consistent
from .rates import chi_lower, growth_rate_vector

UNIFORM_TOL = 1e-9


class HierarchyError(ValueError):
    pass


@dataclass(frozen=True)
class HierarchyPartition:
    ranks: Mapping[int, int]
    desc: tuple  # per-state tuples of action indices
    asc: tuple

    def descending_policy(self) -> tuple:
        return tuple(d[0] if d else a[0] for d, a in zip(self.desc, self.asc))


@dataclass(frozen=True)
class BoundReport:
    theta_bound: np.ndarray
    chi_i_map: dict
    d: int
    d_plus: int
    coarse: float
    chi_lower: float

    @property
    def max_bound(self) -> float:
        return float(self.theta_bound.max())


def partition_actions(m: Smdp, ranks: Mapping[int, int]) -> HierarchyPartition:
    desc, asc = [], []
    for i in range(m.n):
        lo, hi = [], []
        for k, a in enumerate(m.actions[i]):
            rs = [ranks[j] for j in a.support]
            if all(r < ranks[i] for r in rs):
                kind = "desc"
                lo.append(k)
            elif all(r >= ranks[i] for r in rs):
                kind = "asc"
                hi.append(k)
            else:
                raise HierarchyError(f"action {a.id!r} of {m.states[i]!r} neither descends nor ascends")
            if a.kind is not None and a.kind != kind:
                raise HierarchyError(f"action {a.id!r} is tagged {a.kind} but classifies as {kind}")
        if i != 0 and not lo:
            raise HierarchyError(f"state {m.states[i]!r} has no descending action")
        desc.append(tuple(lo))
        asc.append(tuple(hi))
    return HierarchyPartition(ranks=dict(ranks), desc=tuple(desc), asc=tuple(asc))


def _grows_to_everything(m: Smdp, allowed) -> bool:
    reached = {0}
    grew = True
    while grew:
        grew = False
        for i in range(m.n):
            if i not in reached and any(m.actions[i][k].support & reached for k in allowed[i]):
                reached.add(i)
                grew = True
    return len(reached) == m.n


def verify_ascending_improper(m: Smdp, part: HierarchyPartition) -> bool:
    """True iff no proper policy plays an ascending action (the sink is exempt)."""
    full = [range(len(a)) for a in m.actions]
    for i in range(1, m.n):
        for k in part.asc[i]:
            allowed = list(full)
            allowed[i] = [k]
            if _grows_to_everything(m, allowed):
                return False
    return True


def ascent_graph(m: Smdp, part: HierarchyPartition, i: int, literal: bool = False) -> np.ndarray:
    adj = np.zeros((m.n, m.n), dtype=bool)
    for k in range(m.n):
        keep = part.asc[k] if (k == i or literal) else range(len(m.actions[k]))
        for a in keep:
            for j in m.actions[k][a].support:
                adj[k, j] = True
    return adj


def ascent_component(m: Smdp, part: HierarchyPartition, i: int, literal: bool = False) -> tuple:
    """Graph G^(i) and the strongly connected class C^(i) of i."""
    if not part.asc[i]:
        raise HierarchyError(f"state {m.states[i]!r} has no ascending action")
    adj = ascent_graph(m, part, i, literal)
    comp = next(c for c in strong_components(adj) if i in c)
    if not literal:
        reach = reachable_from(adj, {i})
        if 0 in reach:
            raise HierarchyError(f"0 is reachable from {m.states[i]!r} in its ascent graph")
        if reach != set(comp):
            raise HierarchyError(f"ascent graph of {m.states[i]!r} leaves its class")
    return adj, frozenset(comp)


def restricted_growth_rate(m: Smdp, part: HierarchyPartition, i: int) -> float:
    _, comp = ascent_component(m, part, i)
    keep = {i: part.asc[i]}
    sub = restrict_consistent(m, comp, keep)
    chi = growth_rate_vector(sub)
    if np.ptp(chi) > UNIFORM_TOL * max(1.0, float(np.max(np.abs(chi)))):
        raise HierarchyError(f"growth rate on C^({m.states[i]}) is not uniform: {chi}")
    return float(chi[0])


def _descending_order(part: HierarchyPartition, n: int) -> list:
    return sorted(range(n), key=lambda s: part.ranks[s])


def transience_bounds(m: Smdp, part: HierarchyPartition, M: float,
                      check: bool = True) -> BoundReport:
    """Per-state catch-up bounds on a reduced (SSP configuration) model."""
    if M < 0:
        raise HierarchyError("bulk M must be nonnegative")
    low = chi_lower(m)
    if not low > 0:
        raise HierarchyError(f"chi_lower {low:.6g} <= 0 on the reduced model")
    if check and not verify_ascending_improper(m, part):
        raise HierarchyError("an ascending action belongs to a proper policy")

    chi_i = {i: restricted_growth_rate(m, part, i) for i in range(1, m.n) if part.asc[i]}
    n = m.n
    B = np.zeros(n)
    depth = np.zeros(n, dtype=int)
    plus = np.zeros(n, dtype=int)
    for i in _descending_order(part, n):
        if i == 0:
            continue
        best, dep, pl = -math.inf, 0, 0
        for k in part.desc[i]:
            a = m.actions[i][k]
            sup = list(a.support)
            best = max(best, float(a.sojourn) + max(B[j] for j in sup))
            dep = max(dep, 1 + max(depth[j] for j in sup))
            pl = max(pl, max(plus[j] for j in sup))
        extra = M / chi_i[i] if i in chi_i else 0.0
        B[i] = best + extra
        depth[i] = dep
        plus[i] = pl + (1 if i in chi_i else 0)
    d = int(depth.max())
    d_plus = int(plus.max())
    coarse = d * float(m.t_max) + (d_plus * M / low if d_plus else 0.0)
    return BoundReport(theta_bound=B, chi_i_map=chi_i, d=d, d_plus=d_plus,
                       coarse=coarse, chi_lower=low)
