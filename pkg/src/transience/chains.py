"""Markov-chain analytics for the chains induced by policies."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .model import Smdp

SUM_TOL = 1e-10


@dataclass(frozen=True)
class ChainAnalysis:
    policy: tuple
    final_classes: list  # list of sorted tuples of states
    stationary: list  # one normalized measure per final class, aligned with the class
    absorption: np.ndarray  # shape (len(final_classes), n): phi^F_i
    proper: bool

    def class_of(self, i: int) -> int | None:
        for k, F in enumerate(self.final_classes):
            if i in F:
                return k
        return None


@dataclass(frozen=True)
class ZenoReport:
    zeno_states: frozenset
    zeno_core: frozenset

    @property
    def non_zeno(self) -> bool:
        return not self.zeno_core


# -- graph helpers -------------------------------------------------------------

def strong_components(adj: np.ndarray) -> list:
    """Strongly connected components of a boolean adjacency matrix, as sorted tuples."""
    _, labels = connected_components(adj.astype(np.int8), directed=True, connection="strong")
    groups = {}
    for v, lab in enumerate(labels):
        groups.setdefault(lab, []).append(v)
    return sorted(tuple(g) for g in groups.values())


def reachable_from(adj: np.ndarray, start) -> set:
    seen = set(start)
    queue = deque(seen)
    while queue:
        v = queue.popleft()
        for w in np.flatnonzero(adj[v]):
            w = int(w)
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


def union_graph(m: Smdp, action_sets=None) -> np.ndarray:
    adj = np.zeros((m.n, m.n), dtype=bool)
    for i in range(m.n):
        ks = range(len(m.actions[i])) if action_sets is None else action_sets[i]
        for k in ks:
            for j in m.actions[i][k].support:
                adj[i, j] = True
    return adj


def reaches_target(m: Smdp, target, action_sets=None) -> set:
    """States that can reach ``target`` with positive probability under some policy."""
    return reachable_from(union_graph(m, action_sets).T, target)


def greedy_proper_policy(m: Smdp, action_sets=None) -> tuple | None:
    """Proper policy grown backward from {0}: each state picks an action that can
    step into the already-reached set. None if some state cannot be reached."""
    sets = [range(len(a)) for a in m.actions] if action_sets is None else action_sets
    reached = {0}
    choice = {0: min(sets[0])}
    frontier = True
    while frontier:
        frontier = False
        for i in range(m.n):
            if i in reached:
                continue
            for k in sorted(sets[i]):
                if m.actions[i][k].support & reached:
                    choice[i] = k
                    frontier = True
                    break
        reached |= set(choice)
    if len(reached) < m.n:
        return None
    return tuple(choice[i] for i in range(m.n))


# -- chain analysis ------------------------------------------------------------

def stationary_measure(P: np.ndarray) -> np.ndarray:
    """Normalized invariant measure of an irreducible stochastic matrix."""
    k = P.shape[0]
    A = (P - np.eye(k)).T
    A[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    return np.linalg.solve(A, b)


def analyze_policy(m: Smdp, sigma: Sequence[int]) -> ChainAnalysis:
    P = m.transition_matrix(sigma)
    adj = P > 0
    comps = strong_components(adj)
    finals = []
    for comp in comps:
        inside = np.zeros(m.n, dtype=bool)
        inside[list(comp)] = True
        if not adj[np.ix_(inside, ~inside)].any():
            finals.append(comp)

    stationary = [stationary_measure(P[np.ix_(F, F)]) for F in finals]

    recurrent = sorted(s for F in finals for s in F)
    transient = [s for s in range(m.n) if s not in set(recurrent)]
    phi = np.zeros((len(finals), m.n))
    if transient:
        Q = P[np.ix_(transient, transient)]
        lu = np.eye(len(transient)) - Q
        rhs = np.column_stack([P[np.ix_(transient, list(F))].sum(axis=1) for F in finals])
        sol = np.linalg.solve(lu, rhs)
        phi[:, transient] = sol.T
    for k, F in enumerate(finals):
        phi[k, list(F)] = 1.0

    proper = m.has_sink and finals == [(0,)]
    return ChainAnalysis(policy=tuple(sigma), final_classes=finals, stationary=stationary,
                         absorption=phi, proper=proper)


def is_proper_by_reachability(m: Smdp, sigma: Sequence[int]) -> bool:
    if not m.has_sink:
        return False
    adj = m.transition_matrix(sigma) > 0
    return len(reachable_from(adj.T, {0})) == m.n


def zeno_check(m: Smdp) -> ZenoReport:
    """Greatest set of states that can keep playing zero-sojourn actions forever."""
    zero = {i: [a for a in m.actions[i] if a.sojourn == 0] for i in range(m.n)}
    S_Z = frozenset(i for i, acts in zero.items() if acts)
    J = set(S_Z)
    changed = True
    while changed:
        changed = False
        for j in sorted(J):
            if not any(a.support <= J for a in zero[j]):
                J.discard(j)
                changed = True
    return ZenoReport(zeno_states=S_Z, zeno_core=frozenset(J))


def zeno_brute_force(m: Smdp, cap: int | None = None) -> bool:
    """Assumption check by enumeration: every final class of every policy
    contains a positive-sojourn action."""
    from .model import enumerate_policies

    for sigma in enumerate_policies(m, cap=cap):
        ca = analyze_policy(m, sigma)
        for F in ca.final_classes:
            if all(m.actions[i][sigma[i]].sojourn == 0 for i in F):
                return False
    return True


def longest_path_ranks(adj: np.ndarray) -> dict | None:
    """Ranks with rank[j] < rank[i] for every edge i -> j, or None when cyclic.

    Rank of a node is the edge length of its longest outgoing path.
    """
    n = adj.shape[0]
    out_deg = adj.sum(axis=1).astype(int)
    rank = {}
    ready = deque(v for v in range(n) if out_deg[v] == 0)
    for v in ready:
        rank[v] = 0
    preds = [np.flatnonzero(adj[:, v]) for v in range(n)]
    while ready:
        v = ready.popleft()
        for u in preds[v]:
            u = int(u)
            rank[u] = max(rank.get(u, 0), rank[v] + 1)
            out_deg[u] -= 1
            if out_deg[u] == 0:
                ready.append(u)
    if len(rank) < n or (out_deg > 0).any():
        return None
    return rank


def support_acyclic(m: Smdp, action_sets=None) -> tuple:
    """Acyclicity of the union support graph on S∖{0} (sink excluded when present).

    Returns ``(acyclic, ranks)``; ranks realize the order with the sink at the
    bottom, and are None when a cycle exists.
    """
    adj = union_graph(m, action_sets)
    if m.has_sink:
        adj[0, :] = False
    ranks = longest_path_ranks(adj)
    if ranks is None:
        return False, None
    return True, ranks
