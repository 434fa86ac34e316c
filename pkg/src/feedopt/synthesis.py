"""Executable controllers built from a fitted manifold and pole-placement gains."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInput, PreconditionError, SynthesisError, UnsupportedProblem
from .linalg import eigendecompose, solve_sylvester_kron
from .manifold import ManifoldSolution, PolyMap
from .problems import Problem

EQUILIBRIUM_TOL = 1e-8


def _hurwitz_or_raise(M, what):
    spec = eigendecompose(M)
    if not spec.is_hurwitz:
        raise SynthesisError(f"{what} is not Hurwitz (max real part {spec.max_real:.3g})")


@dataclass(frozen=True)
class StaticLaw:
    """Full-information law ``u = gamma(w) + K (x - pi(w))``."""

    K: np.ndarray
    pi: PolyMap
    gamma: PolyMap

    def H_c(self, x, w) -> np.ndarray:
        x, w = np.asarray(x, float), np.asarray(w, float)
        return self.gamma(w) + (x - self.pi(w)) @ self.K.T

    __call__ = H_c


@dataclass(frozen=True)
class SynthesizedController:
    """Controller ``z' = F_c(z, y)``, ``u = G_c(z)``.

    ``kind`` is ``"dynamic"`` (observer-based internal model), ``"baseline"``
    (gradient flow) or ``"output"``, a memoryless law ``u = D y`` with
    ``n_c = 0``.
    """

    kind: str
    n_c: int
    F_c: Callable
    G_c: Callable
    z_eq: np.ndarray
    gains: dict = field(default_factory=dict)
    manifold: Optional[ManifoldSolution] = None
    feedthrough: Optional[np.ndarray] = None

    def output(self, z, y) -> np.ndarray:
        """Plant input for controller state ``z`` and measurement ``y``."""
        if self.kind == "output":
            return np.asarray(y, float) @ self.feedthrough.T
        return self.G_c(z)

    def linear_matrices(self, y_eq, step: float = 1.0):
        """``(A_c, B_c, C_c)`` by differences around the equilibrium.

        With the default unit step the result is exact for affine
        controllers; pass a small step for a local linearization.
        """
        if self.kind == "output":
            raise InvalidInput("a memoryless law has no state-space realization")
        z0, y0 = self.z_eq, np.asarray(y_eq, float)
        F0, G0 = self.F_c(z0, y0), self.G_c(z0)
        Ez, Ey = np.eye(self.n_c) * step, np.eye(len(y0)) * step
        A_c = ((self.F_c(z0 + Ez, y0) - F0) / step).T
        B_c = ((self.F_c(z0, y0 + Ey) - F0) / step).T
        C_c = ((self.G_c(z0 + Ez) - G0) / step).T
        return A_c, B_c, C_c


def _check_equilibrium(ctrl: SynthesizedController, problem: Problem):
    pl = problem.plant
    y_eq = pl.y_eq
    scale = 1.0 + float(np.max(np.abs(np.concatenate([pl.x_eq, pl.u_eq, y_eq])), initial=0.0))
    du = np.max(np.abs(ctrl.output(ctrl.z_eq, y_eq) - pl.u_eq), initial=0.0)
    dz = np.max(np.abs(ctrl.F_c(ctrl.z_eq, y_eq)), initial=0.0) if ctrl.n_c else 0.0
    if max(du, dz) > EQUILIBRIUM_TOL * scale:
        raise SynthesisError(f"controller equilibrium inconsistent (|du|={du:.3g}, |F_c|={dz:.3g})")


def synthesize_static(problem: Problem, manifold: ManifoldSolution, K) -> StaticLaw:
    """Law ``H_c(x, w) = gamma(w) + K (x - pi(w))`` for measured state and disturbance."""
    lin = problem.linearization()
    K = np.atleast_2d(np.asarray(K, float)).reshape(lin.m, lin.n)
    _hurwitz_or_raise(lin.A + lin.B @ K, "A + B K")
    return StaticLaw(K=K, pi=manifold.pi, gamma=manifold.gamma)


def synthesize_dynamic(problem: Problem, manifold: ManifoldSolution, K, L1, L2) -> SynthesizedController:
    """Observer-based controller with state ``z = (z1, z2)`` of size ``n + p``.

    ``G_c(z) = gamma(z2) + K (z1 - pi(z2))`` and ``F_c`` runs a copy of the
    plant and exosystem corrected by the output error ``c(z1, z2) - y``.
    """
    lin = problem.linearization()
    n, m, q, p = lin.n, lin.m, lin.q, lin.p
    K = np.atleast_2d(np.asarray(K, float)).reshape(m, n)
    L1 = np.asarray(L1, float).reshape(n, q)
    L2 = np.asarray(L2, float).reshape(p, q)
    _hurwitz_or_raise(lin.A + lin.B @ K, "A + B K")
    _hurwitz_or_raise(lin.A_L - np.vstack([L1, L2]) @ lin.C_L, "A_L - L C_L")
    pl, exo = problem.plant, problem.exo
    pi, gamma = manifold.pi, manifold.gamma

    def G_c(z):
        z = np.asarray(z, float)
        z1, z2 = z[..., :n], z[..., n:]
        return gamma(z2) + (z1 - pi(z2)) @ K.T

    def F_c(z, y):
        z, y = np.asarray(z, float), np.asarray(y, float)
        z1, z2 = z[..., :n], z[..., n:]
        e_y = np.asarray(pl.c(z1, z2), float) - y
        d1 = np.asarray(pl.f(z1, G_c(z), z2), float) - e_y @ L1.T
        d2 = np.asarray(exo.s(z2), float) - e_y @ L2.T
        if d1.shape[:-1] == d2.shape[:-1]:
            return np.concatenate([d1, d2], axis=-1)
        lead = np.broadcast_shapes(d1.shape[:-1], d2.shape[:-1])
        return np.concatenate([np.broadcast_to(d1, lead + d1.shape[-1:]),
                               np.broadcast_to(d2, lead + d2.shape[-1:])], axis=-1)

    ctrl = SynthesizedController(
        kind="dynamic", n_c=n + p, F_c=F_c, G_c=G_c,
        z_eq=np.concatenate([pl.x_eq, np.zeros(p)]),
        gains={"K": K, "L1": L1, "L2": L2}, manifold=manifold,
    )
    _check_equilibrium(ctrl, problem)
    return ctrl


def baseline_gradient_flow(problem: Problem, eta: float) -> SynthesizedController:
    """Gradient flow ``u' = -eta [grad_1 phi0(u, y) + J_hhat(u)^T grad_2 phi0(u, y)]``.

    Needs a steady-state map of the form ``hhat(u) + d(w)``, full-state
    measurement and an asymptotically stable plant.
    """
    obj, pl = problem.objective, problem.plant
    if eta < 0:
        raise InvalidInput("eta must be nonnegative")
    if obj.h_hat_jac is None or obj.grad_phi0 is None:
        raise UnsupportedProblem(f"{problem.name}: steady-state map lacks the hhat(u) + d(w) structure")
    if not pl.full_state_output:
        raise UnsupportedProblem(f"{problem.name}: the gradient flow needs the measured output y = x")
    lin = problem.linearization()
    if not eigendecompose(lin.A).is_hurwitz:
        raise PreconditionError("the gradient-flow baseline requires a pre-stabilized plant")

    def F_c(z, y):
        z, y = np.asarray(z, float), np.asarray(y, float)
        g1, g2 = obj.grad_phi0(z, y)
        g2 = np.asarray(g2, float)
        J = np.asarray(obj.h_hat_jac(z), float)
        J = np.broadcast_to(J, g2.shape[:-1] + J.shape[-2:])
        return -eta * (np.asarray(g1, float) + np.einsum("...nm,...n->...m", J, g2))

    def G_c(z):
        return np.asarray(z, float)

    ctrl = SynthesizedController(kind="baseline", n_c=pl.m, F_c=F_c, G_c=G_c,
                                 z_eq=pl.u_eq.copy(), gains={"eta": float(eta)})
    _check_equilibrium(ctrl, problem)
    return ctrl


def static_output_feedback(problem: Problem, D) -> SynthesizedController:
    """Memoryless output feedback ``u = D y``."""
    pl = problem.plant
    D = np.atleast_2d(np.asarray(D, float)).reshape(pl.m, pl.q)
    ctrl = SynthesizedController(kind="output", n_c=0, F_c=lambda z, y: np.zeros(np.shape(z)),
                                 G_c=lambda z: np.zeros(pl.m), z_eq=np.zeros(0),
                                 gains={"D": D}, feedthrough=D)
    _check_equilibrium(ctrl, problem)
    return ctrl


@dataclass(frozen=True)
class InternalModelReport:
    residual_controller: float
    residual_plant: float
    residual_gradient: float
    fd_jacobian_error: float
    samples: int

    @property
    def max_residual(self) -> float:
        return max(self.residual_controller, self.residual_plant, self.residual_gradient)


def _linear_sigma(ctrl: SynthesizedController, problem: Problem):
    """Linear maps ``(Pi, Sigma)`` making the first two identities hold for the linearized loop."""
    lin = problem.linearization()
    A_c, B_c, C_c = ctrl.linear_matrices(problem.plant.y_eq, step=1e-6)
    M = np.block([[lin.A, lin.B @ C_c], [B_c @ lin.C, A_c]])
    N = np.vstack([lin.P, B_c @ lin.Q])
    X, _ = solve_sylvester_kron(M, lin.S, N)
    n = lin.n
    return PolyMap.linear(X[:n], 1, problem.plant.x_eq), PolyMap.linear(X[n:], 1, ctrl.z_eq)


def verify_internal_model(ctrl: SynthesizedController, problem: Problem, samples) -> InternalModelReport:
    """Evaluate the internal-model identities on disturbance samples.

    With ``sigma`` the controller-state map and ``pi`` the plant-state map:

        d sigma/dw s(w) = F_c(sigma(w), c(pi(w), w))
        d pi/dw s(w)    = f(pi(w), G_c(sigma(w)), w)
        0               = grad_u phi(G_c(sigma(w)), w)

    Dynamic controllers use ``sigma = (pi, id)`` from their manifold; other
    kinds use the linear maps solving the first two identities of the
    linearized loop. Returned values are maxima of Euclidean norms.
    """
    w = np.atleast_2d(np.asarray(samples, float))
    pl, exo = problem.plant, problem.exo
    if ctrl.kind == "dynamic":
        pi = ctrl.manifold.pi
        p = problem.p

        def sigma(v):
            return np.concatenate([pi(v), v], axis=-1)

        def dsigma(v):
            return np.concatenate([pi.jacobian(v), np.broadcast_to(np.eye(p), v.shape[:-1] + (p, p))], axis=-2)
    elif ctrl.kind == "output":
        raise InvalidInput("memoryless laws carry no internal model")
    else:
        pi, sig = _linear_sigma(ctrl, problem)
        sigma, dsigma = sig, sig.jacobian

    s = np.asarray(exo.s(w), float)
    x = pi(w)
    z = sigma(w)
    y = np.asarray(pl.c(x, w), float)
    u = ctrl.G_c(z)
    lhs_c = np.einsum("...ap,...p->...a", dsigma(w), s)
    r_c = lhs_c - ctrl.F_c(z, y)
    r_p = np.einsum("...np,...p->...n", pi.jacobian(w), s) - np.asarray(pl.f(x, u, w), float)
    r_g = problem.gradient(u, w, strict=False)

    # Cross-check the analytic sigma Jacobian against central differences.
    h = 1e-6
    fd_err = 0.0
    J = dsigma(w)
    for j in range(w.shape[-1]):
        e = np.zeros(w.shape[-1])
        e[j] = h
        col = (sigma(w + e) - sigma(w - e)) / (2 * h)
        fd_err = max(fd_err, float(np.max(np.abs(col - J[..., j]) / (1.0 + np.abs(J[..., j])), initial=0.0)))

    def mx(r):
        return float(np.max(np.linalg.norm(r, axis=-1), initial=0.0))

    return InternalModelReport(mx(r_c), mx(r_p), mx(r_g), fd_err, len(w))
