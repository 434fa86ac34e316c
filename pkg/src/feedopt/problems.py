"""Plants, exosystems and objectives, plus the built-in benchmark instances.

Every model map is written to broadcast over leading batch axes: ``f``
accepts ``x`` of shape ``(..., n)``, ``u`` of shape ``(..., m)`` and ``w``
of shape ``(..., p)`` and returns shape ``(..., n)``. Jacobian callables
return ``(..., rows, cols)``. Maps that are undefined at a point (no real
steady state, say) return NaN there; the strict single-point entry points
turn that into :class:`DomainError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, InvalidInput, NumericalFailure
from .linalg import LinearizationData

Array = np.ndarray


def _vec(v, dim: int, name: str) -> Array:
    v = np.asarray(v, dtype=float)
    if v.shape[-1:] != (dim,):
        raise InvalidInput(f"{name} must have trailing dimension {dim}, got shape {v.shape}")
    return v


def _fd_jacobian(fun: Callable[[Array], Array], x: Array, step: Optional[float] = None) -> Array:
    """Central-difference Jacobian of ``fun`` at ``x`` (batched over leading axes).

    The default step is ``1e-6 * (1 + |x_j|)`` per component.
    """
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.shape[-1]):
        h = np.asarray(step if step is not None else 1e-6 * (1.0 + np.abs(x[..., j])), dtype=float)
        e = np.zeros(x.shape[-1])
        e[j] = 1.0
        hh = h[..., None]
        fp = np.asarray(fun(x + hh * e))
        fm = np.asarray(fun(x - hh * e))
        cols.append((fp - fm) / (2 * hh))
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------------------
# Plant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlantModel:
    """Nonlinear plant ``x' = f(x, u, w)``, ``y = c(x, w)``.

    ``jacobians``, when supplied, returns the tuple
    ``(df/dx, df/du, df/dw, dc/dx, dc/dw)``; otherwise central finite
    differences are used.
    """

    n: int
    m: int
    q: int
    p: int
    f: Callable
    c: Callable
    x_eq: Array
    u_eq: Array
    jacobians_fn: Optional[Callable] = None
    name: str = "plant"
    full_state_output: bool = False

    def __post_init__(self):
        object.__setattr__(self, "x_eq", _vec(self.x_eq, self.n, "x_eq"))
        object.__setattr__(self, "u_eq", _vec(self.u_eq, self.m, "u_eq"))

    @property
    def y_eq(self) -> Array:
        return np.asarray(self.c(self.x_eq, np.zeros(self.p)), dtype=float)

    def jacobians(self, x, u, w):
        x, u, w = (np.asarray(a, dtype=float) for a in (x, u, w))
        if self.jacobians_fn is not None:
            return tuple(np.asarray(J, dtype=float) for J in self.jacobians_fn(x, u, w))
        return self.fd_jacobians(x, u, w)

    def fd_jacobians(self, x, u, w, step=None):
        x, u, w = (np.asarray(a, dtype=float) for a in (x, u, w))
        fx = _fd_jacobian(lambda v: self.f(v, u, w), x, step)
        fu = _fd_jacobian(lambda v: self.f(x, v, w), u, step)
        fw = _fd_jacobian(lambda v: self.f(x, u, v), w, step)
        cx = _fd_jacobian(lambda v: self.c(v, w), x, step)
        cw = _fd_jacobian(lambda v: self.c(x, v), w, step)
        return fx, fu, fw, cx, cw


# ---------------------------------------------------------------------------
# Exosystem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Exosystem:
    """Disturbance generator ``w' = s(w)`` with a sampling box for fitting.

    The box ``(region_lo, region_hi)`` stands in for the limit set of the
    exosystem when fitting the regulator maps.
    """

    p: int
    s: Callable
    S: Array
    w0: Array
    region_lo: Array
    region_hi: Array
    name: str = "exosystem"
    frequencies: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "S", np.asarray(self.S, dtype=float).reshape(self.p, self.p))
        object.__setattr__(self, "w0", _vec(self.w0, self.p, "w0"))
        object.__setattr__(self, "region_lo", _vec(self.region_lo, self.p, "region_lo"))
        object.__setattr__(self, "region_hi", _vec(self.region_hi, self.p, "region_hi"))

    def is_linear(self) -> bool:
        probe = np.linspace(-1.0, 1.0, self.p) + 0.3
        return bool(np.allclose(self.s(probe), self.S @ probe, atol=1e-12))

    def flow(self, t: float | Array, w0=None) -> Array:
        """Exact flow for linear exosystems: ``expm(S t) w0``."""
        from scipy.linalg import expm

        w0 = self.w0 if w0 is None else _vec(w0, self.p, "w0")
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.stack([expm(self.S * ti) @ w0 for ti in ts])
        return out if np.ndim(t) else out[0]

    def sample_orbit(self, count: int, horizon: Optional[float] = None) -> Array:
        """Points on the trajectory from ``w0``, evenly spaced in time."""
        if horizon is None:
            freqs = [f for f in self.frequencies if f > 0]
            horizon = 2 * math.pi / min(freqs) if freqs else 1.0
        return self.flow(np.linspace(0.0, horizon, count, endpoint=False))


def harmonic_exosystem(frequencies: Sequence[float], amplitudes: Sequence[float] = None,
                       w0=None, margin: float = 0.2) -> Exosystem:
    """Block-diagonal harmonic exosystem, one 2x2 block ``[[0,1],[-w^2,0]]`` per frequency.

    A frequency of ``0`` yields a one-dimensional constant-disturbance block
    (``S = 0``). ``amplitudes`` set the initial cosine amplitude of each
    block; ``w0`` overrides the initial condition entirely.
    """
    freqs = [float(f) for f in frequencies]
    if any(f < 0 for f in freqs):
        raise InvalidInput("frequencies must be nonnegative")
    sizes = [2 if f > 0 else 1 for f in freqs]
    p = sum(sizes)
    S = np.zeros((p, p))
    i = 0
    for f, k in zip(freqs, sizes):
        if k == 2:
            S[i, i + 1] = 1.0
            S[i + 1, i] = -f * f
        i += k
    if w0 is None:
        amps = [1.0] * len(freqs) if amplitudes is None else [float(a) for a in amplitudes]
        if len(amps) != len(freqs):
            raise InvalidInput("one amplitude per frequency is required")
        w0 = []
        for a, k in zip(amps, sizes):
            w0 += [a, 0.0] if k == 2 else [a]
    w0 = np.asarray(w0, dtype=float)
    # Box around the orbit: block ellipse semi-axes a and a*omega, inflated by margin.
    hi = np.zeros(p)
    i = 0
    for f, k in zip(freqs, sizes):
        if k == 2:
            a = math.hypot(w0[i], w0[i + 1] / f)
            hi[i], hi[i + 1] = a, a * f
        else:
            hi[i] = abs(w0[i])
        i += k
    hi = (1.0 + margin) * np.maximum(hi, 1e-3)
    S_frozen = S.copy()
    return Exosystem(p=p, s=lambda w: np.asarray(w) @ S_frozen.T, S=S, w0=w0,
                     region_lo=-hi, region_hi=hi, name="harmonic", frequencies=tuple(freqs))


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectiveSpec:
    """Loss ``phi0(u, x)`` reduced through the steady-state map ``x = h(u, w)``.

    Either the steady-state form (``phi0``, ``grad_phi0``, ``h``) is given,
    or, for problems whose loss is stated directly in ``(u, w)``, the
    reduced pair (``phi``, ``grad``). ``h_u`` is the Jacobian of ``h`` in
    ``u``; it falls back to finite differences. ``gradient_jacobians``, if
    present, returns the exact ``(d g/du, d g/dw)``.
    ``h_hat_jac`` marks the additive structure ``h(u, w) = hhat(u) + d(w)``
    required by the gradient-flow baseline and returns ``J_hhat(u)``.
    """

    m: int
    n: int
    phi0: Optional[Callable] = None
    grad_phi0: Optional[Callable] = None
    h: Optional[Callable] = None
    h_u: Optional[Callable] = None
    phi_direct: Optional[Callable] = None
    grad_direct: Optional[Callable] = None
    gradient_jacobians: Optional[Callable] = None
    h_hat_jac: Optional[Callable] = None
    name: str = "objective"
    extras: dict = field(default_factory=dict)

    def steady_state(self, u, w) -> Array:
        if self.h is None:
            raise InvalidInput(f"objective {self.name!r} has no steady-state map")
        return np.asarray(self.h(np.asarray(u, float), np.asarray(w, float)), dtype=float)

    def phi(self, u, w) -> Array:
        u, w = np.asarray(u, float), np.asarray(w, float)
        if self.phi_direct is not None:
            return np.asarray(self.phi_direct(u, w), dtype=float)
        return np.asarray(self.phi0(u, self.steady_state(u, w)), dtype=float)

    def gradient(self, u, w) -> Array:
        """Reduced gradient; NaN where the steady-state map is undefined."""
        u, w = np.asarray(u, float), np.asarray(w, float)
        if self.grad_direct is not None:
            return np.asarray(self.grad_direct(u, w), dtype=float)
        x = self.steady_state(u, w)
        g1, g2 = self.grad_phi0(u, x)
        if self.h_u is not None:
            Hu = np.asarray(self.h_u(u, w), dtype=float)
        else:
            Hu = _fd_jacobian(lambda v: self.steady_state(v, w), u)
        return np.asarray(g1, float) + np.einsum("...nm,...n->...m", Hu, np.asarray(g2, float))

    def gradient_u_jacobian(self, u, w) -> Array:
        if self.gradient_jacobians is not None:
            Ju, _ = self.gradient_jacobians(u, w)
            return np.broadcast_to(np.asarray(Ju, float), np.shape(u)[:-1] + (self.m, self.m))
        return _fd_jacobian(lambda v: self.gradient(v, w), np.asarray(u, float))

    def gradient_w_jacobian(self, u, w) -> Array:
        if self.gradient_jacobians is not None:
            _, Jw = self.gradient_jacobians(u, w)
            return np.asarray(Jw, float)
        return _fd_jacobian(lambda v: self.gradient(u, v), np.asarray(w, float))


def reduced_gradient(obj: ObjectiveSpec, u, w, strict: bool = True) -> Array:
    """``g(u, w) = grad_1 phi0(u, h) + (dh/du)^T grad_2 phi0(u, h)``.

    With ``strict`` (the default) a point where ``h`` is undefined raises
    :class:`DomainError`; otherwise NaN is returned there.
    """
    g = obj.gradient(u, w)
    if strict and not np.all(np.isfinite(g)):
        raise DomainError(f"reduced gradient of {obj.name!r} undefined at u={u}, w={w}")
    return g


# ---------------------------------------------------------------------------
# Problem bundle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    """A plant, its disturbance generator and the loss it should minimize."""

    name: str
    plant: PlantModel
    exo: Exosystem
    objective: ObjectiveSpec
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.plant.p != self.exo.p:
            raise InvalidInput("plant and exosystem disagree on the disturbance dimension")
        if self.plant.m != self.objective.m:
            raise InvalidInput("plant and objective disagree on the input dimension")

    @property
    def n(self):
        return self.plant.n

    @property
    def m(self):
        return self.plant.m

    @property
    def q(self):
        return self.plant.q

    @property
    def p(self):
        return self.plant.p

    def gradient(self, u, w, strict: bool = True) -> Array:
        return reduced_gradient(self.objective, u, w, strict=strict)

    def linearization(self) -> LinearizationData:
        """Jacobians at the equilibrium, analytic where the models provide them."""
        pl = self.plant
        w0 = np.zeros(self.p)
        fx, fu, fw, cx, cw = pl.jacobians(pl.x_eq, pl.u_eq, w0)
        R = self.objective.gradient_u_jacobian(pl.u_eq, w0)
        T = self.objective.gradient_w_jacobian(pl.u_eq, w0)
        return LinearizationData(A=fx, B=fu, C=cx, P=fw, Q=cw, S=self.exo.S, T=T, R=R)

    def check_equilibrium(self, tol: float = 1e-10) -> float:
        pl = self.plant
        w0 = np.zeros(self.p)
        resid = max(np.max(np.abs(pl.f(pl.x_eq, pl.u_eq, w0)), initial=0.0),
                    np.max(np.abs(self.gradient(pl.u_eq, w0)), initial=0.0))
        if resid > tol:
            raise InvalidInput(f"equilibrium anchor violates f=0, g=0 by {resid:.3g}")
        return float(resid)


def finite_difference_jacobians(problem: Problem, point=None, step: Optional[float] = None) -> LinearizationData:
    """Central-difference linearization at ``point = (x, u, w)`` (default: the equilibrium).

    The step defaults to ``1e-6 * (1 + |point|)`` componentwise. ``T`` and
    ``R`` are the Jacobians of the reduced gradient in ``w`` and ``u``.
    """
    pl = problem.plant
    if point is None:
        x, u, w = pl.x_eq, pl.u_eq, np.zeros(problem.p)
    else:
        x, u, w = (np.asarray(a, dtype=float) for a in point)
    fx, fu, fw, cx, cw = pl.fd_jacobians(x, u, w, step)
    S = _fd_jacobian(problem.exo.s, w, step)
    obj = problem.objective
    R = _fd_jacobian(lambda v: obj.gradient(v, w), u, step)
    T = _fd_jacobian(lambda v: obj.gradient(u, v), w, step)
    mats = (fx, fu, fw, cx, cw, S, R, T)
    if not all(np.all(np.isfinite(M)) for M in mats):
        raise NumericalFailure("NaN encountered while differencing the model")
    return LinearizationData(A=fx, B=fu, C=cx, P=fw, Q=cw, S=S, T=T, R=R)


# ---------------------------------------------------------------------------
# Linear-quadratic instance
# ---------------------------------------------------------------------------


def lq_problem(A, B, P, C, Q, lam: float):
    """Linear plant with the state-regulation loss ``|x|^2/2 + lam |u|^2/2``.

    Returns ``(plant, objective)``. The steady-state map is
    ``h(u, w) = T_xu u + T_xw w`` with ``T_xu = -A^-1 B`` and
    ``T_xw = -A^-1 P``; the reduced gradient is ``R u + T w`` with
    ``R = T_xu^T T_xu + lam I`` and ``T = T_xu^T T_xw``.
    """
    A, B, P, C, Q = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, P, C, Q))
    n, m, p, q = A.shape[0], B.shape[1], P.shape[1], C.shape[0]
    if np.linalg.matrix_rank(A) < n:
        raise InvalidInput("A is singular: no unique steady-state map exists")
    Txu = -np.linalg.solve(A, B)
    Txw = -np.linalg.solve(A, P)
    R = Txu.T @ Txu + lam * np.eye(m)
    T = Txu.T @ Txw

    plant = PlantModel(
        n=n, m=m, q=q, p=p,
        f=lambda x, u, w: x @ A.T + u @ B.T + w @ P.T,
        c=lambda x, w: x @ C.T + w @ Q.T,
        x_eq=np.zeros(n), u_eq=np.zeros(m),
        jacobians_fn=lambda x, u, w: (A, B, P, C, Q),
        name="lq",
        full_state_output=bool(q == n and np.allclose(C, np.eye(n)) and not np.any(Q)),
    )
    objective = ObjectiveSpec(
        m=m, n=n,
        phi0=lambda u, x: 0.5 * np.sum(x * x, axis=-1) + 0.5 * lam * np.sum(u * u, axis=-1),
        grad_phi0=lambda u, x: (lam * u, x),
        h=lambda u, w: u @ Txu.T + w @ Txw.T,
        h_u=lambda u, w: np.broadcast_to(Txu, np.shape(u)[:-1] + Txu.shape),
        gradient_jacobians=lambda u, w: (R, T),
        h_hat_jac=lambda u: Txu,
        name="lq-quadratic",
        extras={"R": R, "T": T, "T_xu": Txu, "T_xw": Txw, "lam": lam},
    )
    return plant, objective


def lq_instance(A, B, P, C, Q, lam: float, frequencies=(1.0,), amplitudes=None) -> Problem:
    plant, objective = lq_problem(A, B, P, C, Q, lam)
    exo = harmonic_exosystem(frequencies, amplitudes)
    if exo.p != plant.p:
        raise InvalidInput(f"exosystem dimension {exo.p} does not match P with {plant.p} columns")
    return Problem("lq", plant, exo, objective,
                   params={"A": A, "B": B, "P": P, "C": C, "Q": Q, "lam": lam})


# ---------------------------------------------------------------------------
# Scalar example with a static output-feedback solution
# ---------------------------------------------------------------------------


def scalar_example5() -> Problem:
    """Plant ``x' = x + u``, ``y = -2x + w``, constant ``w``, gradient ``g = u + w``."""
    plant = PlantModel(
        n=1, m=1, q=1, p=1,
        f=lambda x, u, w: x + u,
        c=lambda x, w: -2.0 * x + w,
        x_eq=[0.0], u_eq=[0.0],
        jacobians_fn=lambda x, u, w: (np.eye(1), np.eye(1), np.zeros((1, 1)), -2 * np.eye(1), np.eye(1)),
        name="example5",
    )
    exo = harmonic_exosystem([0.0], amplitudes=[0.25])
    exo = Exosystem(p=1, s=lambda w: np.zeros(np.shape(w)), S=np.zeros((1, 1)), w0=exo.w0,
                    region_lo=[-1.0], region_hi=[1.0], name="constant", frequencies=(0.0,))
    objective = ObjectiveSpec(
        m=1, n=1,
        h=lambda u, w: -np.asarray(u) + 0.0 * np.asarray(w),
        phi_direct=lambda u, w: 0.5 * np.sum((u + w) ** 2, axis=-1),
        grad_direct=lambda u, w: u + w,
        gradient_jacobians=lambda u, w: (np.eye(1), np.eye(1)),
        name="example5",
    )
    return Problem("example5", plant, exo, objective)


# ---------------------------------------------------------------------------
# Balancing robot
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PendulumParams:
    """Physical constants of the balancing robot (SI units)."""

    ell: float = 0.023
    mass: float = 0.316
    friction: float = 0.1
    gravity: float = 9.81
    inertia: float = 0.000444

    def __post_init__(self):
        for name in ("ell", "mass", "friction", "gravity", "inertia"):
            if not getattr(self, name) > 0:
                raise InvalidInput(f"pendulum parameter {name} must be positive")

    @property
    def alpha(self) -> float:
        return self.mass * self.gravity * self.ell / self.inertia

    @property
    def beta(self) -> float:
        return self.friction * self.ell ** 2 / self.inertia

    @property
    def gamma_p(self) -> float:
        return self.mass * self.ell / self.inertia

    @property
    def eta_p(self) -> float:
        return 1.0 / self.inertia


def pendulum_plant(params: PendulumParams = PendulumParams()) -> PlantModel:
    """Upright balancing robot with ``w = (w_x, w_x', w_y, w_y')``.

    ``x1' = x2``, ``x2' = alpha sin x1 - beta x2 - gamma u cos x1 + eta w1``,
    ``y = x2 + w3``.
    """
    al, be, ga, et = params.alpha, params.beta, params.gamma_p, params.eta_p

    def f(x, u, w):
        x, u, w = np.asarray(x, float), np.asarray(u, float), np.asarray(w, float)
        x1, x2 = x[..., 0], x[..., 1]
        dx2 = al * np.sin(x1) - be * x2 - ga * u[..., 0] * np.cos(x1) + et * w[..., 0]
        return np.stack(np.broadcast_arrays(x2, dx2), axis=-1)

    def c(x, w):
        x, w = np.asarray(x, float), np.asarray(w, float)
        return (x[..., 1] + w[..., 2])[..., None]

    def jac(x, u, w):
        x1 = x[..., 0]
        batch = np.broadcast_shapes(x.shape[:-1], u.shape[:-1], w.shape[:-1])
        fx = np.zeros(batch + (2, 2))
        fx[..., 0, 1] = 1.0
        fx[..., 1, 0] = al * np.cos(x1) + ga * u[..., 0] * np.sin(x1)
        fx[..., 1, 1] = -be
        fu = np.zeros(batch + (2, 1))
        fu[..., 1, 0] = -ga * np.cos(x1)
        fw = np.zeros(batch + (2, 4))
        fw[..., 1, 0] = et
        cx = np.zeros(batch + (1, 2))
        cx[..., 0, 1] = 1.0
        cw = np.zeros(batch + (1, 4))
        cw[..., 0, 2] = 1.0
        return fx, fu, fw, cx, cw

    return PlantModel(n=2, m=1, q=1, p=4, f=f, c=c, x_eq=[0.0, 0.0], u_eq=[0.0],
                      jacobians_fn=jac, name="pendulum")


def pendulum_steady_state(u, w, params: PendulumParams = PendulumParams(),
                          branch: str = "closed-form", strict: bool = True) -> Array:
    """Equilibrium ``(x1, 0)`` of the robot for constant ``u`` and ``w``.

    ``branch="closed-form"`` is the textbook arctangent root, returning ``[pi, 0]``
    when ``eta w1 + gamma u = 0``. ``branch="continuous"`` selects the root
    continuous at the origin, written in a cancellation-free form. Without
    a real root (negative discriminant) a :class:`DomainError` is raised
    when ``strict``; otherwise NaN is returned.
    """
    al, ga, et = params.alpha, params.gamma_p, params.eta_p
    u = np.asarray(u, float)[..., 0]
    w1 = np.asarray(w, float)[..., 0]
    disc = al ** 2 - et ** 2 * w1 ** 2 + ga ** 2 * u ** 2
    if strict and np.any(disc < 0):
        raise DomainError("no real equilibrium: alpha^2 - eta^2 w1^2 + gamma^2 u^2 < 0")
    with np.errstate(invalid="ignore", divide="ignore"):
        root = np.sqrt(disc)
        if branch == "closed-form":
            den = et * w1 + ga * u
            safe = np.where(den == 0, 1.0, den)
            x1 = np.where(den == 0, np.pi, -2.0 * np.arctan((al - root) / safe))
        elif branch == "continuous":
            x1 = 2.0 * np.arctan((ga * u - et * w1) / (al + root))
        else:
            raise InvalidInput(f"unknown branch {branch!r}")
    return np.stack(np.broadcast_arrays(x1, np.zeros_like(x1)), axis=-1)


def pendulum_problem(objective: str = "quadratic", params: PendulumParams = PendulumParams(),
                     frequencies=(1.0, 10.0), amplitudes=(1.0, 0.5),
                     kappa: float = 1.0, mu: float = 0.5) -> Problem:
    """Balancing robot with either the quadratic or the logistic loss.

    The reduced loss uses the steady-state branch continuous at the origin.
    """
    plant = pendulum_plant(params)
    exo = harmonic_exosystem(frequencies, amplitudes)
    if exo.p != 4:
        raise InvalidInput("the pendulum needs two harmonic disturbance blocks (p = 4)")
    al, ga, et = params.alpha, params.gamma_p, params.eta_p

    def h(u, w):
        return pendulum_steady_state(u, w, params, branch="continuous", strict=False)

    def h_u(u, w):
        x1 = h(u, w)[..., 0]
        uu = np.asarray(u, float)[..., 0]
        with np.errstate(invalid="ignore", divide="ignore"):
            d1 = ga * np.cos(x1) / (al * np.cos(x1) + ga * uu * np.sin(x1))
        return np.stack([d1, np.zeros_like(d1)], axis=-1)[..., None]

    if objective == "quadratic":
        def phi0(u, x):
            return 0.5 * np.sum(np.asarray(x) ** 2, axis=-1)

        def grad_phi0(u, x):
            return np.zeros_like(np.asarray(u, float)), np.asarray(x, float)
    elif objective == "logistic":
        if kappa <= 0 or mu <= 0:
            raise InvalidInput("logistic loss needs kappa > 0 and mu > 0")

        def phi0(u, x):
            uu = np.asarray(u, float)[..., 0]
            return (0.5 * np.sum(np.asarray(x) ** 2, axis=-1)
                    + 0.5 * kappa * (np.logaddexp(0.0, mu * uu) + np.logaddexp(0.0, -mu * uu)))

        def grad_phi0(u, x):
            return 0.5 * kappa * mu * np.tanh(0.5 * mu * np.asarray(u, float)), np.asarray(x, float)
    else:
        raise InvalidInput(f"unknown pendulum objective {objective!r}")

    obj = ObjectiveSpec(m=1, n=2, phi0=phi0, grad_phi0=grad_phi0, h=h, h_u=h_u,
                        name=f"pendulum-{objective}")
    return Problem(f"pendulum-{objective}", plant, exo, obj,
                   params={"objective": objective, "kappa": kappa, "mu": mu})


# ---------------------------------------------------------------------------
# Constraints via Lagrange multipliers
# ---------------------------------------------------------------------------


def lagrangian_augment(obj: ObjectiveSpec, constraints: Optional[Callable] = None, r: int = 0,
                       constraint_jacobian: Optional[Callable] = None) -> ObjectiveSpec:
    """Objective over ``(u, lambda)`` whose gradient is the Lagrangian's.

    ``constraints(u, w)`` returns the ``r`` equality-constraint values. The
    augmented gradient stacks ``grad_u phi + J_psi^T lambda`` and ``psi``,
    so it vanishes exactly at stationary, feasible points.
    """
    if r == 0:
        return obj
    if constraints is None:
        raise InvalidInput("r > 0 constraints declared but no constraint map given")
    m = obj.m

    def jac(u, w):
        if constraint_jacobian is not None:
            return np.asarray(constraint_jacobian(u, w), float)
        return _fd_jacobian(lambda v: constraints(v, w), u)

    def split(ut):
        ut = np.asarray(ut, float)
        return ut[..., :m], ut[..., m:]

    def phi(ut, w):
        u, lam = split(ut)
        return obj.phi(u, w) + np.sum(lam * np.asarray(constraints(u, w), float), axis=-1)

    def grad(ut, w):
        u, lam = split(ut)
        gu = obj.gradient(u, w) + np.einsum("...rm,...r->...m", jac(u, w), lam)
        return np.concatenate([gu, np.asarray(constraints(u, w), float)], axis=-1)

    return ObjectiveSpec(m=m + r, n=obj.n, h=obj.h, phi_direct=phi, grad_direct=grad,
                         name=f"{obj.name}+lagrangian", extras={"base_m": m, "r": r})


# ---------------------------------------------------------------------------
# Built-in registry
# ---------------------------------------------------------------------------

DEFAULT_LQ = {
    "A": [[-1.0, 0.5], [0.0, -2.0]],
    "B": [[0.0], [1.0]],
    "P": [[1.0, 0.0], [0.0, 1.0]],
    "C": [[1.0, 0.0], [0.0, 1.0]],
    "Q": [[0.0, 0.0], [0.0, 0.0]],
    "lam": 0.1,
    "frequencies": [1.0],
    "amplitudes": [1.0],
}

BUILTIN_NAMES = ("lq", "pendulum-quadratic", "pendulum-logistic", "example5")


def builtin(name: str, **params) -> Problem:
    """Construct a named built-in problem, overriding defaults with ``params``."""
    if name == "lq":
        cfg = {**DEFAULT_LQ, **params}
        return lq_instance(cfg["A"], cfg["B"], cfg["P"], cfg["C"], cfg["Q"], cfg["lam"],
                           cfg["frequencies"], cfg["amplitudes"])
    if name in ("pendulum-quadratic", "pendulum-logistic"):
        phys = {k: params[k] for k in ("ell", "mass", "friction", "gravity", "inertia") if k in params}
        return pendulum_problem(
            objective=name.split("-", 1)[1],
            params=PendulumParams(**phys),
            frequencies=params.get("frequencies", (1.0, 10.0)),
            amplitudes=params.get("amplitudes", (1.0, 0.5)),
            kappa=params.get("kappa", 1.0),
            mu=params.get("mu", 0.5),
        )
    if name == "example5":
        return scalar_example5()
    raise InvalidInput(f"unknown built-in problem {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
