"""Medical emergency call center: SMDP builder and closed-form references.

States: 0 call arrivals (sink), 1 calls waiting for an assistant, 2 and 3
calls handled by an assistant (resp. not and to be passed to a physician),
4 calls waiting for a physician, 5 calls handled by a physician.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import Action, Smdp, parse_rational
from .trajectory import Trajectory, rational_gcd

RANKS = {0: 0, 1: 1, 2: 2, 3: 2, 4: 3, 5: 4}
STATE_NAMES = ("0", "1", "2", "3", "4", "5")


@dataclass(frozen=True)
class EmsParams:
    lam: float
    pi: float
    t1: Fraction
    t2: Fraction
    t3: Fraction
    N_A: float
    N_P: float
    t0: Fraction | None = None

    def __post_init__(self):
        for name in ("t1", "t2", "t3"):
            object.__setattr__(self, name, parse_rational(getattr(self, name)))
        if not 0 < self.pi < 1:
            raise ValueError(f"pi must lie in (0, 1), got {self.pi}")
        if min(self.t1, self.t2, self.t3) <= 0:
            raise ValueError("task durations must be positive")
        if self.lam < 0 or self.N_A <= 0 or self.N_P <= 0:
            raise ValueError("lambda must be nonnegative and staffing positive")
        if self.t0 is None:
            object.__setattr__(self, "t0", default_t0(self.t1, self.t2, self.t3))
        else:
            object.__setattr__(self, "t0", parse_rational(self.t0))
            if self.t0 <= 0:
                raise ValueError("t0 must be positive")


def default_t0(t1, t2, t3) -> Fraction:
    """Largest divisor g/k of gcd(t1, t2, t3) not exceeding min(t1, t2, t3)/10."""
    g = rational_gcd([t1, t2, t3])
    cap = min(t1, t2, t3) / 10
    k = 1
    while g / k > cap:
        k += 1
    return g / k


# staffed and understaffed reference centers
EMS5 = dict(lam=0.025, pi=0.3, t1=150, t2=20, t3=200, N_A=7.0, N_P=3.5)
EMS4 = dict(lam=0.025, pi=0.3, t1=150, t2=20, t3=200, N_A=3.0, N_P=1.375)


def build_ems(p: EmsParams) -> tuple:
    pi = p.pi
    acts = [
        [Action("sink", p.lam * float(p.t0), p.t0, {0: 1.0})],
        [Action("a1-", 0.0, 0, {0: 1.0}, kind="desc"),
         Action("a1+", p.N_A, 0, {2: 1.0 - pi, 4: pi}, kind="asc")],
        [Action("b2", 0.0, p.t1, {1: 1.0}, kind="desc")],
        [Action("a3-", 0.0, p.t1, {1: 1.0}, kind="desc"),
         Action("a3+", p.N_P / pi, 0, {5: 1.0}, kind="asc")],
        [Action("b4", 0.0, p.t2, {3: 1.0}, kind="desc")],
        [Action("b5", 0.0, p.t3, {4: 1.0}, kind="desc")],
    ]
    m = Smdp(states=STATE_NAMES, actions=acts, sink_lambda=p.lam, ranks=dict(RANKS))
    return m, dict(RANKS)


@dataclass(frozen=True)
class EmsClosedForms:
    lambda_A: float
    lambda_P: float
    u_star: np.ndarray
    e: np.ndarray
    params: EmsParams

    @property
    def chi_lower(self) -> float:
        return min(self.lambda_A, self.lambda_P)

    def bound(self, M: float) -> float:
        p = self.params
        if not (self.lambda_A > p.lam and self.lambda_P > p.lam):
            raise ValueError("closed-form bound needs lambda_A, lambda_P > lambda")
        return (M / (self.chi_lower - p.lam) + float(p.t1)
                + M / (self.lambda_P - p.lam) + float(p.t2) + float(p.t3))


def ems_closed_forms(p: EmsParams) -> EmsClosedForms:
    t1, t2, t3 = float(p.t1), float(p.t2), float(p.t3)
    lam_A = p.N_A / (t1 + p.pi * t2)
    lam_P = p.N_P / (p.pi * (t2 + t3))
    u = -p.lam * np.array([0.0, 0.0, t1, t1, t1 + t2, t1 + t2 + t3])
    e = np.array([1.0, 1.0, 1.0 - p.pi, p.pi, p.pi, p.pi])
    return EmsClosedForms(lambda_A=lam_A, lambda_P=lam_P, u_star=u, e=e, params=p)


def counter_residuals(traj: Trajectory, p: EmsParams) -> float:
    """Max violation of the Petri net counter equations by z_i = e_i v(i, .) on [0, T]."""
    e = ems_closed_forms(p).e
    z = traj.values * e[None, :]
    g = traj.grid
    W = g.W
    l1, l2, l3 = (int(t / g.h) for t in (p.t1, p.t2, p.t3))
    if max(l1, l2, l3) > W:
        raise ValueError("trajectory window shorter than the task durations")
    r = np.arange(W, z.shape[0])
    res = [
        z[r, 1] - np.minimum(z[r, 0], p.N_A + z[r, 2] + z[r, 4]),
        z[r, 2] - (1 - p.pi) * z[r - l1, 1],
        z[r, 3] - np.minimum(p.pi * z[r - l1, 1], p.N_P + z[r, 5]),
        z[r, 4] - z[r - l2, 3],
        z[r, 5] - z[r - l3, 4],
    ]
    return float(max(np.max(np.abs(x)) for x in res))
