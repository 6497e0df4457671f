"""Exact evaluation of the dynamic programming recursion on a rational time grid.

With rational sojourn times every lag t^a is an integer number of grid steps,
so the recursion only ever reads values stored at earlier grid points. States
with zero-sojourn actions are solved jointly at each step.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .chains import zeno_check
from .model import ModelError, Smdp, parse_rational, reduce_costs


class TrajectoryError(ValueError):
    pass


def rational_gcd(values) -> Fraction:
    vals = [parse_rational(v) for v in values if parse_rational(v) != 0]
    if not vals:
        raise TrajectoryError("no positive time to build a grid from")
    den = math.lcm(*(v.denominator for v in vals))
    return Fraction(math.gcd(*(int(v * den) for v in vals)), den)


def grid_step(m: Smdp, extra: Sequence = (), skip_sink: bool = False) -> Fraction:
    """Largest rational step dividing every positive sojourn and every extra time."""
    return rational_gcd(list(m.positive_sojourns(skip_sink=skip_sink)) + [abs(parse_rational(e)) for e in extra])


@dataclass(frozen=True)
class Grid:
    h: Fraction
    window: Fraction  # history length, the initial data live on [-window, 0)
    T: Fraction

    @property
    def W(self) -> int:
        return int(self.window / self.h)

    @property
    def K(self) -> int:
        return int(self.T / self.h)

    def times(self) -> np.ndarray:
        return np.arange(-self.W, self.K + 1) * float(self.h)

    def row(self, t) -> int:
        q = parse_rational(t) / self.h
        if q.denominator != 1:
            raise TrajectoryError(f"time {t} is not on the grid of step {self.h}")
        return int(q) + self.W


@dataclass(frozen=True)
class InputProfile:
    """Prescribed sink value lam*t + M*H(t - t_bar) for t >= 0, with H(0) = 1."""
    lam: float
    M: float = 0.0
    t_bar: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "t_bar", parse_rational(self.t_bar))

    @property
    def ahead_of_input(self) -> bool:
        return self.M < 0

    def value(self, t: Fraction) -> float:
        return self.lam * float(t) + (self.M if t >= self.t_bar else 0.0)


@dataclass(frozen=True)
class InitialCondition:
    """Initial data on [-window, 0).

    kind is one of "zero", "stationary" (lam*s + u), "offset" (u + r off the
    sink) or "samples" (explicit array of shape (W, n)).
    """
    kind: str = "zero"
    lam: float = 0.0
    u: np.ndarray | None = None
    r: float = 0.0
    samples: np.ndarray | None = None

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def stationary(cls, lam, u):
        return cls("stationary", lam=lam, u=np.asarray(u, float))

    @classmethod
    def offset(cls, u, r):
        return cls("offset", u=np.asarray(u, float), r=r)

    @classmethod
    def from_samples(cls, samples):
        return cls("samples", samples=np.asarray(samples, float))

    def shifted(self, alpha: float, grid: Grid, n: int) -> "InitialCondition":
        return InitialCondition.from_samples(self.sample(grid, n) + alpha)

    def sample(self, grid: Grid, n: int) -> np.ndarray:
        W = grid.W
        s = np.arange(-W, 0) * float(grid.h)
        if self.kind == "zero":
            return np.zeros((W, n))
        if self.kind == "stationary":
            return self.lam * s[:, None] + self.u[None, :]
        if self.kind == "offset":
            base = self.u.copy()
            base[1:] += self.r
            return np.tile(base, (W, 1))
        if self.kind == "samples":
            if self.samples.shape != (W, n):
                raise TrajectoryError(f"samples must have shape {(W, n)}, got {self.samples.shape}")
            return self.samples.copy()
        raise TrajectoryError(f"unknown initial condition {self.kind!r}")


@dataclass(frozen=True)
class Trajectory:
    grid: Grid
    values: np.ndarray  # shape (W + K + 1, n); row r holds v(., (r - W) h)
    input: InputProfile | None = None
    states: tuple = field(default=())

    @property
    def times(self) -> np.ndarray:
        return self.grid.times()

    def at(self, t) -> np.ndarray:
        return self.values[self.grid.row(t)]

    def forward(self) -> np.ndarray:
        """Values on [0, T]."""
        return self.values[self.grid.W:]

    def deviation(self, lam: float) -> np.ndarray:
        return self.values - lam * self.times[:, None]

    def tail_window(self) -> np.ndarray:
        """History window [T - window, T) usable as restart samples."""
        end = self.values.shape[0] - 1
        return self.values[end - self.grid.W:end].copy()

    def write_csv(self, path, deviation: bool = False, lam: float = 0.0):
        n = self.values.shape[1]
        prefix = "dev" if deviation else "state"
        data = self.deviation(lam) if deviation else self.values
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"{prefix}_{i}" for i in range(n)])
            for t, row in zip(self.times, data):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in row])


class _Engine:
    """Pre-digested model: actions grouped by lag, Zeno options pre-factorized."""

    def __init__(self, m: Smdp, h: Fraction, prescribe_sink: bool):
        self.m = m
        self.n = m.n
        self.prescribed = {0} if prescribe_sink else set()
        z = zeno_check(m)
        self.Z = [i for i in sorted(z.zeno_states) if i not in self.prescribed]
        zpos = {s: k for k, s in enumerate(self.Z)}

        # positive-sojourn actions of free states, grouped by lag
        groups = {}
        for i, _, a in m.all_actions():
            if i in self.prescribed or a.sojourn == 0:
                continue
            lag = a.sojourn / h
            if lag.denominator != 1:
                raise TrajectoryError(f"sojourn {a.sojourn} is not a multiple of step {h}")
            groups.setdefault(int(lag), []).append((i, a))
        self.lag_groups = []
        for lag, items in sorted(groups.items()):
            P = np.array([a.row(self.n) for _, a in items])
            c = np.array([a.cost for _, a in items])
            owner = np.array([i for i, _ in items])
            self.lag_groups.append((lag, P, c, owner))
        self.free = [i for i in range(self.n) if i not in self.prescribed]

        # zero-sojourn options: each Zeno state picks a zero action or stops at w_i
        has_pos = {i: any(a.sojourn > 0 for a in m.actions[i]) for i in self.Z}
        zero_rows, zero_cost, zero_inner, opts = [], [], [], []
        for i in self.Z:
            own = []
            for a in m.actions[i]:
                if a.sojourn != 0:
                    continue
                row = a.row(self.n)
                inner = np.zeros(len(self.Z))
                for j in self.Z:
                    inner[zpos[j]] = row[j]
                    row[j] = 0.0
                own.append(len(zero_rows))
                zero_rows.append(row)
                zero_cost.append(a.cost)
                zero_inner.append(inner)
            opts.append(own + ([-1 - zpos[i]] if has_pos[i] else []))
        self.nz = len(self.Z)
        if self.nz:
            self.zero_P = np.array(zero_rows)
            self.zero_c = np.array(zero_cost)
            nzero = len(zero_rows)
            combos = list(itertools.product(*opts))
            inv = np.empty((len(combos), self.nz, self.nz))
            idx = np.empty((len(combos), self.nz), dtype=int)
            for k, combo in enumerate(combos):
                A = np.eye(self.nz)
                for r, o in enumerate(combo):
                    if o >= 0:
                        A[r] -= zero_inner[o]
                        idx[k, r] = o
                    else:
                        idx[k, r] = nzero + r  # stop: take w_r
                try:
                    inv[k] = np.linalg.inv(A)
                except np.linalg.LinAlgError:
                    raise TrajectoryError("singular Zeno subsystem") from None
            self.zinv, self.zidx = inv, idx

    def step(self, V: np.ndarray, r: int, sink_value: float | None):
        best = np.full(self.n, np.inf)
        for lag, P, c, owner in self.lag_groups:
            np.minimum.at(best, owner, c + P @ V[r - lag])
        out = V[r]
        if self.prescribed:
            best[0] = sink_value
        if self.nz:
            Zi = self.Z
            w = best[Zi]
            rest = best.copy()
            rest[Zi] = 0.0
            rhs = np.concatenate([self.zero_c + self.zero_P @ rest, w])
            cand = np.einsum("kij,kj->ki", self.zinv, rhs[self.zidx])
            best[Zi] = cand.min(axis=0)
        out[:] = best


def evolve(m: Smdp, init: InitialCondition, input: InputProfile | None, T,
           h=None, window=None) -> Trajectory:
    """March the recursion over the grid 0, h, ..., T."""
    T = parse_rational(T)
    core = zeno_check(m).zeno_core
    if core:
        raise TrajectoryError(f"Zeno core {sorted(core)} makes the dynamics ill-posed")
    prescribe = input is not None and m.has_sink
    extra = []
    if input is not None and input.t_bar:
        extra.append(input.t_bar)
    if h is None:
        # with every free action instantaneous the sink sojourn sets the pace
        skip = prescribe and bool(m.positive_sojourns(skip_sink=True))
        h = grid_step(m, extra, skip_sink=skip)
    h = parse_rational(h)
    if window is None:
        pos = m.positive_sojourns(skip_sink=prescribe)
        window = max(pos) if pos else h
    window = parse_rational(window)
    T = math.ceil(T / h) * h
    grid = Grid(h=h, window=window, T=T)
    if (window / h).denominator != 1 or (T / h).denominator != 1:
        raise TrajectoryError(f"window {window} and horizon {T} must be multiples of {h}")
    if input is not None and (input.t_bar / h).denominator != 1:
        raise TrajectoryError(f"bulk time {input.t_bar} is off the grid of step {h}")

    eng = _Engine(m, h, prescribe)
    W, K = grid.W, grid.K
    V = np.empty((W + K + 1, m.n))
    V[:W] = init.sample(grid, m.n)
    for k in range(K + 1):
        sink = input.value(k * h) if prescribe else None
        eng.step(V, W + k, sink)
    if not np.all(np.isfinite(V)):
        raise TrajectoryError("non-finite values produced")
    return Trajectory(grid=grid, values=V, input=input, states=tuple(m.states))


def simulate_bulk(m: Smdp, M: float, t_bar, T, u_star=None, h=None) -> Trajectory:
    """Stationary regime hit by a bulk of size M at time t_bar."""
    from .rates import Regime, classify_regime
    from .ssp import solve_u_star

    if not m.has_sink:
        raise ModelError("bulk simulation needs a lambda-sink model")
    regime = classify_regime(m)
    if regime is not Regime.CONGESTION_FREE:
        raise TrajectoryError(f"regime is {regime.value}, not congestion-free")
    lam = m.sink_lambda
    if u_star is None:
        u_star = solve_u_star(reduce_costs(m, lam))
    init = InitialCondition.stationary(lam, u_star)
    return evolve(m, init, InputProfile(lam, M, parse_rational(t_bar)), T, h=h)


def default_eps(lam: float, M: float, t_max) -> float:
    return 1e-6 * max(1.0, abs(M), lam * float(t_max))


def measure_catchup(traj: Trajectory, lam: float, u_star, M: float, eps: float | None = None,
                    t_bar=0) -> np.ndarray:
    """First grid time t >= t_bar with |v(i,t) - lam t - u*(i) - M| <= eps (inf if none)."""
    t_bar = parse_rational(t_bar)
    if eps is None:
        eps = default_eps(lam, M, traj.grid.window)
    start = traj.grid.row(t_bar)
    times = traj.times[start:]
    dev = traj.values[start:] - lam * times[:, None] - np.asarray(u_star)[None, :] - M
    hit = np.abs(dev) <= eps
    theta = np.full(dev.shape[1], np.inf)
    for i in range(dev.shape[1]):
        k = np.flatnonzero(hit[:, i])
        if k.size:
            theta[i] = times[k[0]]
    return theta


def stationary_residual(traj: Trajectory, lam: float, u_star, M: float = 0.0) -> float:
    rows = traj.values.shape[0]
    tail = max(1, math.ceil(0.1 * rows))
    times = traj.times[-tail:]
    dev = traj.values[-tail:] - lam * times[:, None] - np.asarray(u_star)[None, :] - M
    return float(np.max(np.abs(dev)))
