"""Stochastic shortest path layer: the stationary offset u*, optimal actions,
geometric rate and finite-time certification."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chains import greedy_proper_policy, support_acyclic
from .model import Smdp, enumerate_policies
from .rates import chi_lower, has_access_to_sink

IMPROVE_TOL = 1e-12
OPTIMAL_RTOL = 1e-9
SSP_TOL = 1e-12


class SspError(ValueError):
    pass


@dataclass(frozen=True)
class SspSolution:
    u_star: np.ndarray
    optimal_actions: tuple  # per-state tuples of action indices
    nu: float
    finite_time: bool
    witness_order: dict | None


def check_ssp_configuration(m: Smdp) -> bool:
    if not m.has_sink:
        return False
    return all(abs(a.cost) <= SSP_TOL and a.transitions.get(0, 0.0) == 1.0 for a in m.actions[0])


def q_values(m: Smdp, u: np.ndarray, i: int) -> np.ndarray:
    return np.array([a.cost + sum(p * u[j] for j, p in a.transitions.items())
                     for a in m.actions[i]])


def bellman(m: Smdp, u: np.ndarray) -> np.ndarray:
    return np.array([q_values(m, u, i).min() for i in range(m.n)])


def fixed_point_residual(m: Smdp, u: np.ndarray) -> float:
    return float(np.max(np.abs(u - bellman(m, u))))


def evaluate_policy(m: Smdp, sigma) -> np.ndarray:
    """Total reduced cost until absorption in 0 for a proper policy."""
    P = m.transition_matrix(sigma)[1:, 1:]
    c = m.cost_vector(sigma)[1:]
    u = np.zeros(m.n)
    u[1:] = np.linalg.solve(np.eye(m.n - 1) - P, c)
    return u


def solve_u_star(m: Smdp, start=None, check: bool = True) -> np.ndarray:
    """Policy iteration on an SSP configuration.

    ``start`` is an optional proper initial policy (e.g. all-descending).
    With ``check`` the well-posedness conditions are verified first.
    """
    if not check_ssp_configuration(m):
        raise SspError("model is not in SSP configuration")
    if check:
        if not has_access_to_sink(m):
            raise SspError("no proper policy: some state has no access to 0")
        low = chi_lower(m)
        if low <= 0:
            raise SspError(f"ill-posed SSP: chi_lower {low:.6g} <= 0")
    sigma = tuple(start) if start is not None else greedy_proper_policy(m)
    if sigma is None:
        raise SspError("no proper policy: some state has no access to 0")
    if m.n == 1:
        return np.zeros(1)
    limit = math.prod(len(a) for a in m.actions) + 1
    for _ in range(limit):
        u = evaluate_policy(m, sigma)
        new = list(sigma)
        for i in range(1, m.n):
            q = q_values(m, u, i)
            k = int(np.argmin(q))
            if q[k] < u[i] - IMPROVE_TOL * max(1.0, abs(u[i])):
                new[i] = k
        if tuple(new) == sigma:
            return u
        sigma = tuple(new)
    raise SspError("policy iteration did not converge")


def optimal_action_sets(m: Smdp, u: np.ndarray) -> tuple:
    sets = []
    for i in range(m.n):
        q = q_values(m, u, i)
        tol = OPTIMAL_RTOL * max(1.0, abs(u[i]))
        sets.append(tuple(int(k) for k in np.flatnonzero(q <= u[i] + tol)))
    return tuple(sets)


def spectral_radius(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def geometric_rate_nu(m: Smdp, optimal_actions, cap: int | None = None) -> float:
    acyclic, _ = support_acyclic(m, optimal_actions)
    if acyclic:
        return 0.0
    nu = 0.0
    for sigma in enumerate_policies(m, optimal_actions, cap=cap):
        nu = max(nu, spectral_radius(m.transition_matrix(sigma)[1:, 1:]))
    return nu


def finite_time_check(m: Smdp, optimal_actions) -> tuple:
    return support_acyclic(m, optimal_actions)


def solve(m: Smdp, start=None, check: bool = True) -> SspSolution:
    u = solve_u_star(m, start=start, check=check)
    A = optimal_action_sets(m, u)
    ok, ranks = finite_time_check(m, A)
    nu = geometric_rate_nu(m, A)
    return SspSolution(u_star=u, optimal_actions=A, nu=nu, finite_time=ok, witness_order=ranks)
