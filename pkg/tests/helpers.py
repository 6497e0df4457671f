"""Shared fixtures and random model generation for the test suite."""

from fractions import Fraction
from pathlib import Path

import numpy as np

from transience.chains import zeno_check
from transience.model import Action, Smdp, load_model

DATA = Path(__file__).parent / "data"

SOJOURNS = [Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2)]

# one line per acceptance criterion, printed by the terminal summary hook
ACCEPTANCE = {}


def load(name):
    return load_model((DATA / name).read_text())


def random_model(rng, n_max=5, a_max=3, sink=False, zeno_ok=False, p_zero=0.2):
    """Random SMDP with at most n_max states and a_max actions per state.

    Sojourns are drawn from {0, 1/2, 1, 3/2, 2}; Zeno draws are rejected
    unless zeno_ok. With sink=True state 0 is a lambda-sink.
    """
    while True:
        n = int(rng.integers(2 if sink else 1, n_max + 1))
        acts = []
        for i in range(n):
            row = []
            for k in range(int(rng.integers(1, a_max + 1))):
                sup = rng.choice(n, size=int(rng.integers(1, min(n, 3) + 1)), replace=False)
                w = rng.integers(1, 5, size=len(sup)).astype(float)
                w /= w.sum()
                to = {int(j): float(p) for j, p in zip(sup, w)}
                if rng.random() < p_zero:
                    t = Fraction(0)
                else:
                    t = SOJOURNS[int(rng.integers(len(SOJOURNS)))]
                cost = float(np.round(rng.uniform(-1, 2), 3))
                row.append(Action(f"a{i}{k}", cost, t, to))
            acts.append(row)
        lam = None
        if sink:
            lam = float(np.round(rng.uniform(0, 1), 3))
            acts[0] = [Action("sink", lam, Fraction(1), {0: 1.0})]
        m = Smdp(states=[str(i) for i in range(n)], actions=acts, sink_lambda=lam)
        if zeno_ok or zeno_check(m).non_zeno:
            return m


def two_cycle(extra_action=True):
    """SSP configuration whose optimal chain cycles 1 <-> 2 with probability 1/2."""
    a1 = [Action("x", 1.0, 1, {2: 0.5, 0: 0.5})]
    if extra_action:
        a1.append(Action("y", 3.0, 1, {0: 1.0}))
    acts = [[Action("loop", 0.0, 1, {0: 1.0})], a1, [Action("x2", 1.0, 1, {1: 0.5, 0: 0.5})]]
    return Smdp(states=["0", "1", "2"], actions=acts, sink_lambda=0.0)


def cyc3_sink(lam=0.25):
    """lambda-sink variant of CYC3 whose access to 0 has zero sojourn."""
    acts = [[Action("sink", lam, 1, {0: 1.0})],
            [Action("d", 0.0, 0, {0: 1.0}), Action("u", 1.0, 1, {2: 1.0})],
            [Action("d2", 0.0, 1, {1: 1.0})]]
    return Smdp(states=["0", "1", "2"], actions=acts, sink_lambda=lam,
                ranks={0: 0, 1: 1, 2: 2})


def hann_slope(times, values, frac=0.5):
    """Slope of values against times over the final fraction of samples,
    by least squares with Hann weights (suppresses periodic ripples)."""
    k = len(times)
    s = int(k * (1 - frac))
    t = times[s:]
    x = (t - t[0]) / (t[-1] - t[0])
    w = np.sin(np.pi * x) ** 2
    tc = t - np.sum(w * t) / np.sum(w)
    return (w * tc) @ values[s:] / np.sum(w * tc * tc)
