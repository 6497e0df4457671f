"""Growth rates of the value function and congestion-regime classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .chains import analyze_policy, reaches_target
from .model import Smdp, enumerate_policies

CRITICAL_RTOL = 1e-9


class Regime(enum.Enum):
    CONGESTION_FREE = "congestion-free"
    CONGESTED = "congested"
    CRITICAL = "critical"


@dataclass(frozen=True)
class GrowthReport:
    chi: np.ndarray
    chi_lower: float
    witnesses: tuple  # argmin policy per state
    regime: Regime | None = None


def class_rate(m: Smdp, sigma, F, mu) -> float:
    c = np.array([m.actions[i][sigma[i]].cost for i in F])
    t = np.array([float(m.actions[i][sigma[i]].sojourn) for i in F])
    den = mu @ t
    if den <= 0:
        raise ValueError(f"final class {F} has zero mean sojourn (Zeno)")
    return float(mu @ c / den)


def policy_rates(m: Smdp, sigma) -> tuple:
    """Per-state mixed rate of one policy and the rates of its non-sink classes."""
    ca = analyze_policy(m, sigma)
    rates = [class_rate(m, sigma, F, mu) for F, mu in zip(ca.final_classes, ca.stationary)]
    per_state = np.asarray(rates) @ ca.absorption
    lower = [r for F, r in zip(ca.final_classes, rates) if not (m.has_sink and F == (0,))]
    return per_state, lower


def growth_report(m: Smdp, cap: int | None = None) -> GrowthReport:
    chi = np.full(m.n, np.inf)
    witness = [None] * m.n
    lower = math.inf
    for sigma in enumerate_policies(m, cap=cap):
        per_state, others = policy_rates(m, sigma)
        better = per_state < chi
        chi[better] = per_state[better]
        for i in np.flatnonzero(better):
            witness[i] = sigma
        if others:
            lower = min(lower, min(others))
    regime = classify_regime(m, lower) if m.has_sink else None
    return GrowthReport(chi=chi, chi_lower=lower, witnesses=tuple(witness), regime=regime)


def growth_rate_vector(m: Smdp, cap: int | None = None) -> np.ndarray:
    return growth_report(m, cap).chi


def chi_lower(m: Smdp, cap: int | None = None) -> float:
    lower = math.inf
    for sigma in enumerate_policies(m, cap=cap):
        _, others = policy_rates(m, sigma)
        if others:
            lower = min(lower, min(others))
    return lower


def has_access_to_sink(m: Smdp) -> bool:
    return len(reaches_target(m, {0})) == m.n


def classify_regime(m: Smdp, lower: float | None = None) -> Regime:
    if not m.has_sink:
        raise ValueError("regime classification needs a lambda-sink model")
    lam = m.sink_lambda
    if lower is None:
        lower = chi_lower(m)
    if math.isfinite(lower) and abs(lower - lam) <= CRITICAL_RTOL * max(1.0, lam):
        return Regime.CRITICAL
    if has_access_to_sink(m) and lower > lam:
        return Regime.CONGESTION_FREE
    return Regime.CONGESTED
