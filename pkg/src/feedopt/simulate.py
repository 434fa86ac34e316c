"""Closed-loop integration, trajectories and tracking metrics."""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import numpy as np
from scipy.integrate import solve_ivp

from .errors import Diverged, InvalidInput
from .manifold import PolyMap
from .problems import Problem
from .synthesis import StaticLaw, SynthesizedController

DIVERGENCE_BOUND = 1e6
TAIL_FRACTION = 0.2


@dataclass(frozen=True)
class ClosedLoop:
    """Plant, exosystem and controller wired together.

    State layout is ``(x, z, w)``; static laws have no ``z`` block and read
    ``(x, w)`` directly (state feedback); dynamic controllers only see
    ``y = c(x, w)`` (output feedback).
    """

    problem: Problem
    controller: Union[SynthesizedController, StaticLaw]

    @cached_property
    def _static(self) -> bool:
        return isinstance(self.controller, StaticLaw)

    @property
    def wiring(self) -> str:
        return "state-feedback" if self._static else "output-feedback"

    @cached_property
    def n_c(self) -> int:
        return 0 if self._static else self.controller.n_c

    @property
    def dim(self) -> int:
        return self.problem.n + self.n_c + self.problem.p

    def split(self, state):
        n, nc = self.problem.n, self.n_c
        state = np.asarray(state, float)
        return state[..., :n], state[..., n:n + nc], state[..., n + nc:]

    def _signals(self, x, z, w):
        y = np.asarray(self.problem.plant.c(x, w), float)
        u = self.controller.H_c(x, w) if self._static else self.controller.output(z, y)
        return np.asarray(u, float), y

    def signals(self, state):
        """``(u, y)`` at a state (batched)."""
        return self._signals(*self.split(state))

    def rhs(self, state):
        state = np.asarray(state, float)
        n, nc = self.problem.n, self.n_c
        x, z, w = state[..., :n], state[..., n:n + nc], state[..., n + nc:]
        u, y = self._signals(x, z, w)
        out = np.empty(state.shape)
        out[..., :n] = self.problem.plant.f(x, u, w)
        if nc:
            out[..., n:n + nc] = self.controller.F_c(z, y)
        out[..., n + nc:] = self.problem.exo.s(w)
        return out

    def equilibrium(self) -> np.ndarray:
        pl = self.problem.plant
        z_eq = np.zeros(0) if self._static else self.controller.z_eq
        return np.concatenate([pl.x_eq, z_eq, np.zeros(self.problem.p)])

    def initial_state(self, x0=None, z0=None, w0=None) -> np.ndarray:
        """Assemble a state; omitted parts default to the equilibrium and ``exo.w0``."""
        pl, exo = self.problem.plant, self.problem.exo
        eq = self.equilibrium()
        x0 = pl.x_eq if x0 is None else np.asarray(x0, float)
        z0 = eq[pl.n:pl.n + self.n_c] if z0 is None else np.asarray(z0, float)
        w0 = exo.w0 if w0 is None else np.asarray(w0, float)
        if x0.shape != (pl.n,) or z0.shape != (self.n_c,) or w0.shape != (exo.p,):
            raise InvalidInput("initial condition has the wrong dimensions")
        return np.concatenate([x0, z0, w0])


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    u: np.ndarray
    y: np.ndarray
    g: np.ndarray
    meta: dict = field(default_factory=dict)

    def header(self) -> list[str]:
        cols = ["t"]
        for name, arr in (("x", self.x), ("z", self.z), ("w", self.w), ("u", self.u), ("y", self.y), ("g", self.g)):
            cols += [f"{name}{i + 1}" for i in range(arr.shape[1])]
        return cols

    def table(self) -> np.ndarray:
        return np.hstack([self.t[:, None], self.x, self.z, self.w, self.u, self.y, self.g])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.header()) + "\n")
        for row in self.table():
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()


def _record(loop: ClosedLoop, ts: np.ndarray, states: np.ndarray, meta: dict) -> Trajectory:
    x, z, w = loop.split(states)
    u, y = loop.signals(states)
    g = loop.problem.gradient(u, w, strict=False)
    return Trajectory(t=ts, x=x, z=z, w=w, u=u, y=y, g=np.asarray(g, float), meta=meta)


def _rk4_step(rhs, s, dt):
    h = 0.5 * dt
    k1 = rhs(s)
    k2 = rhs(s + h * k1)
    k3 = rhs(s + h * k2)
    k4 = rhs(s + dt * k3)
    k2 += k3
    k2 *= 2.0
    k2 += k1
    k2 += k4
    k2 *= dt / 6.0
    return s + k2


def integrate(loop: ClosedLoop, init, horizon: float, step: float = 1e-3, method: str = "rk4",
              record_every: int = 10, bound: float = DIVERGENCE_BOUND,
              rtol: float = 1e-8, atol: float = 1e-10) -> Trajectory:
    """Integrate the closed loop from ``init`` over ``[0, horizon]``.

    ``method="rk4"`` takes fixed steps of size ``step``; ``"adaptive"``
    uses an embedded Runge-Kutta 4(5) pair with the given tolerances and
    dense output on the same recording grid. Samples are recorded every
    ``record_every`` steps. A state norm above ``bound`` (or a non-finite
    state) raises :class:`Diverged` carrying the trajectory so far.
    """
    s0 = np.asarray(init, float)
    if s0.shape != (loop.dim,):
        raise InvalidInput(f"initial state must have length {loop.dim}")
    if not step > 0 or not horizon > 0 or record_every < 1:
        raise InvalidInput("step, horizon and record_every must be positive")
    n_steps = int(round(horizon / step))
    if not math.isclose(n_steps * step, horizon, rel_tol=1e-9):
        raise InvalidInput("horizon must be an integer multiple of the step")
    idx = np.arange(0, n_steps + 1, record_every)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    grid = idx * step
    meta = {"integrator": method, "step": step, "record_every": record_every, "horizon": horizon}

    if method == "rk4":
        out = np.empty((len(idx), loop.dim))
        out[0] = s0
        s = s0
        k = 1
        rhs = loop.rhs
        for i in range(1, n_steps + 1):
            s = _rk4_step(rhs, s, step)
            # NaN fails the comparison, so this also catches non-finite states.
            if not math.sqrt(s @ s) <= bound:
                part = _record(loop, grid[:k], out[:k], {**meta, "diverged_at": i * step})
                raise Diverged(f"state left the bound {bound:g} at t={i * step:.4g}", partial=part)
            if k < len(idx) and i == idx[k]:
                out[k] = s
                k += 1
        return _record(loop, grid, out, meta)

    if method == "adaptive":
        def escape(t, s):
            n = np.linalg.norm(s)
            return bound - n if np.isfinite(n) else -1.0

        escape.terminal = True
        sol = solve_ivp(lambda t, s: loop.rhs(s), (0.0, grid[-1]), s0, method="RK45",
                        t_eval=grid, rtol=rtol, atol=atol, events=escape)
        meta.update(rtol=rtol, atol=atol)
        if sol.status == 1 or not sol.success:
            k = sol.y.shape[1]
            part = _record(loop, grid[:k], sol.y.T, {**meta, "diverged_at": float(sol.t[-1]) if k else 0.0})
            raise Diverged(f"state left the bound {bound:g} ({sol.message})", partial=part)
        return _record(loop, sol.t, sol.y.T, meta)

    raise InvalidInput(f"unknown integration method {method!r}")


@dataclass(frozen=True)
class TrackingMetrics:
    tail_sup_g: float
    rate_fit: Optional[float]
    settled: bool
    state_tail: Optional[float]
    tail_start: float
    tolerance: float

    def lines(self) -> list[str]:
        rate = "n/a" if self.rate_fit is None else f"{self.rate_fit:.6g}"
        st = "n/a" if self.state_tail is None else f"{self.state_tail:.6g}"
        return [
            f"tail_sup_g: {self.tail_sup_g:.6g}",
            f"rate_fit: {rate}",
            f"settled: {str(self.settled).lower()}",
            f"state_tail: {st}",
            f"tail_start: {self.tail_start:.6g}",
            f"tolerance: {self.tolerance:.6g}",
        ]


def _decay_rate(t: np.ndarray, gn: np.ndarray) -> Optional[float]:
    """Exponential rate of the envelope ``sup_{s >= t} |g(s)|``.

    ``None`` unless the envelope falls by two decades from its peak to the
    last tenth of the record; zero crossings of an oscillating signal do
    not count as decay.
    """
    ok = np.isfinite(gn)
    if np.count_nonzero(ok) < 3 or not np.all(ok):
        return None
    env = np.maximum.accumulate(gn[::-1])[::-1]
    peak = env[0]
    last = env[int(0.9 * (len(env) - 1))]
    if not peak > 0 or (last > 0 and np.log10(peak / last) < 2.0):
        return None
    i_peak = int(np.argmax(gn))
    t, env = t[i_peak:], env[i_peak:]
    floor = max(last, 1e-13 * peak)
    # Skip the first decade, where faster modes still contribute.
    mask = (env <= 0.1 * peak) & (env >= 10 * floor)
    if np.count_nonzero(mask) < 3:
        mask = env > floor
    if np.count_nonzero(mask) < 3:
        return None
    slope = np.polyfit(t[mask], np.log(env[mask]), 1)[0]
    return float(-slope)


def metrics(traj: Trajectory, tol: float = 1e-6, pi: Optional[PolyMap] = None,
            tail_fraction: float = TAIL_FRACTION) -> TrackingMetrics:
    """Tail statistics of ``|g|`` (and of ``|x - pi(w)|`` when ``pi`` is given).

    The tail window is the final ``tail_fraction`` of the horizon. An
    undefined gradient anywhere in the tail makes ``tail_sup_g`` infinite.
    """
    t0 = traj.t[0] + (1.0 - tail_fraction) * (traj.t[-1] - traj.t[0])
    tail = traj.t >= t0
    gn = np.linalg.norm(traj.g, axis=1) if traj.g.shape[1] else np.zeros(len(traj.t))
    gt = gn[tail]
    sup = float(np.max(gt)) if np.all(np.isfinite(gt)) else math.inf
    state_tail = None
    if pi is not None:
        state_tail = float(np.max(np.linalg.norm(traj.x[tail] - pi(traj.w[tail]), axis=1)))
    return TrackingMetrics(tail_sup_g=sup, rate_fit=_decay_rate(traj.t, gn), settled=bool(sup <= tol),
                           state_tail=state_tail, tail_start=float(t0), tolerance=tol)


def loop_jacobian(loop: ClosedLoop, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the ``(x, z)`` dynamics at the equilibrium with ``w = 0``."""
    eq = loop.equilibrium()
    k = loop.problem.n + loop.n_c
    J = np.zeros((k, k))
    for j in range(k):
        e = np.zeros(loop.dim)
        e[j] = h
        J[:, j] = (loop.rhs(eq + e)[:k] - loop.rhs(eq - e)[:k]) / (2 * h)
    return J


@dataclass(frozen=True)
class StabilityReport:
    max_real_eig: float
    eigenvalues: np.ndarray
    trials: int
    decayed: tuple
    contraction: tuple

    @property
    def all_decay(self) -> bool:
        return all(self.decayed)

    @property
    def locally_stable(self) -> bool:
        return self.max_real_eig < 0 and self.all_decay


def local_stability_check(loop: ClosedLoop, eps: float = 0.05, trials: int = 8, horizon: float = 10.0,
                          step: float = 1e-3, seed: int = 0, workers: int = 1,
                          decay_factor: float = 1e-2) -> StabilityReport:
    """Monte-Carlo perturbations of ``(x, z)`` around the equilibrium with ``w = 0``.

    A trial decays when the final deviation is below ``decay_factor`` times
    the initial one. Trials run on ``workers`` threads; results are
    ordered by trial index regardless of completion order.
    """
    eq = loop.equilibrium()
    k = loop.problem.n + loop.n_c
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((trials, k))
    dirs *= eps / np.linalg.norm(dirs, axis=1, keepdims=True)

    def run(i):
        s0 = eq.copy()
        s0[:k] += dirs[i]
        try:
            tr = integrate(loop, s0, horizon, step=step, record_every=max(1, int(round(horizon / step)) // 50))
        except Diverged:
            return False, math.inf
        final = np.linalg.norm(np.hstack([tr.x[-1], tr.z[-1]]) - eq[:k])
        ratio = float(final / eps)
        return ratio < decay_factor, ratio

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(trials)))
    else:
        results = [run(i) for i in range(trials)]
    ev = np.linalg.eigvals(loop_jacobian(loop))
    return StabilityReport(max_real_eig=float(np.max(ev.real)), eigenvalues=ev, trials=trials,
                           decayed=tuple(r[0] for r in results), contraction=tuple(r[1] for r in results))
