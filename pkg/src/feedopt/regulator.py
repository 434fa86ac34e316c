"""Exact synthesis for linear plants with quadratic costs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInput, PreconditionError, SynthesisError, UnsupportedProblem
from .linalg import (
    STABILITY_MARGIN,
    LinearizationData,
    LinearRegulatorSolution,
    eigendecompose,
    is_detectable,
    solve_regulator_linear,
)


@dataclass(frozen=True)
class LinearController:
    """``z' = A_c z + B_c y``, ``u = C_c z``."""

    A_c: np.ndarray
    B_c: np.ndarray
    C_c: np.ndarray
    kind: str = "dynamic"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        A_c, B_c, C_c = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (self.A_c, self.B_c, self.C_c))
        nc = A_c.shape[0]
        if A_c.shape != (nc, nc) or B_c.shape[0] != nc or C_c.shape[1] != nc:
            raise InvalidInput("controller matrices have inconsistent dimensions")
        object.__setattr__(self, "A_c", A_c)
        object.__setattr__(self, "B_c", B_c)
        object.__setattr__(self, "C_c", C_c)

    @property
    def n_c(self) -> int:
        return self.A_c.shape[0]


def solve_static_linear(lin: LinearizationData) -> LinearRegulatorSolution:
    """Solve the linear regulator equations for ``(Pi, Gamma)``."""
    if lin.R is None:
        raise InvalidInput("linearization lacks the gradient Jacobian R")
    return solve_regulator_linear(lin.A, lin.B, lin.P, lin.S, lin.R, lin.T)


def _require_hurwitz(M, what: str):
    spec = eigendecompose(M)
    if not spec.is_hurwitz:
        raise SynthesisError(f"{what} is not Hurwitz (max real part {spec.max_real:.3g})")


def assemble_linear_controller(lin: LinearizationData, Pi, Gamma, K, L1, L2) -> LinearController:
    """Observer-based controller with ``n_c = n + p`` states.

    ``z1`` estimates the plant state and ``z2`` the disturbance; the
    input is ``K z1 + (Gamma - K Pi) z2``.
    """
    A, B, C, P, Q, S = lin.A, lin.B, lin.C, lin.P, lin.Q, lin.S
    Pi, Gamma, K = (np.atleast_2d(np.asarray(M, float)) for M in (Pi, Gamma, K))
    L1 = np.asarray(L1, float).reshape(lin.n, lin.q)
    L2 = np.asarray(L2, float).reshape(lin.p, lin.q)
    if K.shape != (lin.m, lin.n) or Pi.shape != (lin.n, lin.p) or Gamma.shape != (lin.m, lin.p):
        raise InvalidInput("gain or regulator matrix dimensions do not match the plant")
    _require_hurwitz(A + B @ K, "A + B K")
    L = np.vstack([L1, L2])
    _require_hurwitz(lin.A_L - L @ lin.C_L, "A_L - L C_L")
    G = Gamma - K @ Pi
    A_c = np.block([[A + B @ K - L1 @ C, P + B @ G - L1 @ Q], [-L2 @ C, S - L2 @ Q]])
    return LinearController(
        A_c=A_c,
        B_c=L,
        C_c=np.hstack([K, G]),
        kind="dynamic",
        provenance={"K": K, "L1": L1, "L2": L2, "Pi": Pi, "Gamma": Gamma},
    )


def closed_loop_matrix(lin: LinearizationData, ctrl: LinearController, include_w: bool = False) -> np.ndarray:
    """State matrix of the plant/controller interconnection in ``(x, z[, w])``."""
    A, B, C = lin.A, lin.B, lin.C
    if ctrl.C_c.shape[0] != lin.m or ctrl.B_c.shape[1] != lin.q:
        raise InvalidInput("controller does not fit the plant dimensions")
    top = np.hstack([A, B @ ctrl.C_c])
    mid = np.hstack([ctrl.B_c @ C, ctrl.A_c])
    if not include_w:
        return np.vstack([top, mid])
    n, nc, p = lin.n, ctrl.n_c, lin.p
    return np.block([
        [A, B @ ctrl.C_c, lin.P],
        [ctrl.B_c @ C, ctrl.A_c, ctrl.B_c @ lin.Q],
        [np.zeros((p, n)), np.zeros((p, nc)), lin.S],
    ])


def spectra_match(a, b, tol: float) -> tuple[bool, float]:
    """Multiset comparison of two eigenvalue lists by optimal matching."""
    a, b = np.asarray(a, complex), np.asarray(b, complex)
    if a.shape != b.shape:
        return False, np.inf
    if a.size == 0:
        return True, 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    err = float(cost[rows, cols].max())
    return err <= tol * (1.0 + np.abs(a).max()), err


def baseline_linear_gradient_controller(lin: LinearizationData, eta: float) -> LinearController:
    """Gradient-flow baseline on an LQ plant with full-state output.

    ``u = z``, ``z' = -eta (Lam z + T_xu^T y)`` where ``Lam = R - T_xu^T T_xu``
    is the input weight and ``T_xu = -A^-1 B``.
    """
    if eta < 0:
        raise InvalidInput("eta must be nonnegative")
    if not eigendecompose(lin.A).is_hurwitz:
        raise PreconditionError("the gradient-flow baseline requires a pre-stabilized plant (A Hurwitz)")
    if lin.q != lin.n or not np.allclose(lin.C, np.eye(lin.n)) or np.any(lin.Q):
        raise UnsupportedProblem("the linear baseline assumes full-state output y = x")
    if lin.R is None:
        raise InvalidInput("linearization lacks the gradient Jacobian R")
    Txu = -np.linalg.solve(lin.A, lin.B)
    Lam = lin.R - Txu.T @ Txu
    return LinearController(
        A_c=-eta * Lam,
        B_c=-eta * Txu.T,
        C_c=np.eye(lin.m),
        kind="baseline",
        provenance={"eta": eta, "T_xu": Txu},
    )


def steady_state_gradient_amplitude(lin: LinearizationData, ctrl: LinearController, omega: float, v) -> float:
    """Peak of ``|g(t)|`` in steady state under ``w(t) = Re(v exp(j omega t))``.

    Uses the frequency response of the linear loop from ``w`` to
    ``g = R u + T w``; the closed loop must be asymptotically stable.
    """
    M = closed_loop_matrix(lin, ctrl)
    if not eigendecompose(M).is_hurwitz:
        raise SynthesisError("closed loop is not asymptotically stable; no steady state exists")
    N = np.vstack([lin.P, ctrl.B_c @ lin.Q])
    H = np.hstack([np.zeros((lin.m, lin.n)), lin.R @ ctrl.C_c])
    G = H @ np.linalg.solve(1j * omega * np.eye(M.shape[0]) - M, N) + lin.T
    c = G @ np.asarray(v, dtype=complex)
    # sup over phase of |Re(c e^{j theta})| is the top singular value of [Re c, Im c].
    return float(np.linalg.svd(np.column_stack([c.real, c.imag]), compute_uv=False)[0])


# ---------------------------------------------------------------------------
# Random solvable instances
# ---------------------------------------------------------------------------


def random_harmonic_S(rng: np.random.Generator, p: int, freq_range=(0.5, 3.0)) -> np.ndarray:
    """Block-diagonal harmonic generator; an odd ``p`` gets one constant mode."""
    S = np.zeros((p, p))
    for i in range(0, p - 1, 2):
        w = rng.uniform(*freq_range)
        S[i, i + 1] = 1.0
        S[i + 1, i] = -w * w
    return S


def random_hurwitz(rng: np.random.Generator, n: int, spectrum=(-3.0, -0.5)) -> np.ndarray:
    """Random ``n x n`` matrix with real eigenvalues drawn from ``spectrum``."""
    lam = rng.uniform(*spectrum, size=n)
    V = rng.standard_normal((n, n)) + 2.0 * np.eye(n)
    while np.linalg.cond(V) > 50:
        V = rng.standard_normal((n, n)) + 2.0 * np.eye(n)
    return V @ np.diag(lam) @ np.linalg.inv(V)


@dataclass(frozen=True)
class RandomInstance:
    lin: LinearizationData
    lam: float
    seed: int


def pbh_distance(A, B) -> float:
    """Smallest ``sigma_min([A - lam I, B])`` over the eigenvalues of ``A``.

    Zero means some mode is uncontrollable; small values flag pairs that
    need very large gains.
    """
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    n = A.shape[0]
    return float(min(np.linalg.svd(np.hstack([A - lam * np.eye(n), B]), compute_uv=False)[-1]
                     for lam in np.linalg.eigvals(A)))


def random_lq_instance(rng: np.random.Generator, max_dim: int = 4, gap: float = 1e-3,
                       min_pbh: float = 0.1, max_tries: int = 500) -> RandomInstance:
    """Draw a solvable LQ instance with ``n, m, q, p <= max_dim``.

    ``A`` has spectrum in ``[-3, -0.5]`` and ``S`` is harmonic. Draws whose
    spectra of ``A`` and ``S`` lie within ``gap`` of each other, or whose
    extended pair is not detectable, are rejected. So are draws whose
    ``(A, B)`` or ``(C_L, A_L)`` PBH distance is below ``min_pbh``: they are
    solvable but need gains so large that eigenvalues lose all accuracy.
    """
    from .problems import lq_problem

    for _ in range(max_tries):
        seed = int(rng.integers(2**31))
        sub = np.random.default_rng(seed)
        n, m, q = (int(sub.integers(1, max_dim + 1)) for _ in range(3))
        p = int(sub.integers(1, max_dim + 1))
        A = random_hurwitz(sub, n)
        B = sub.standard_normal((n, m))
        C = sub.standard_normal((q, n))
        P = sub.standard_normal((n, p))
        Q = sub.standard_normal((q, p))
        S = random_harmonic_S(sub, p)
        lam = float(sub.uniform(0.1, 1.0))
        eA, eS = np.linalg.eigvals(A), np.linalg.eigvals(S)
        if np.min(np.abs(eA[:, None] - eS[None, :])) < gap:
            continue
        _, obj = lq_problem(A, B, P, C, Q, lam)
        lin = LinearizationData(A=A, B=B, C=C, P=P, Q=Q, S=S, T=obj.extras["T"], R=obj.extras["R"])
        if not is_detectable(lin.C_L, lin.A_L, margin=1e-4):
            continue
        if min(pbh_distance(A, B), pbh_distance(lin.A_L.T, lin.C_L.T)) < min_pbh:
            continue
        return RandomInstance(lin=lin, lam=lam, seed=seed)
    raise SynthesisError("could not draw a solvable instance")


def design_gains(lin: LinearizationData, k_region=(-3.0, -2.0), l_region=(-2.0, -1.0),
                 method: str = "auto"):
    """Pole-placement gains ``(K, L1, L2)`` for the observer-based controller."""
    from .linalg import place_observer_gain, place_state_feedback

    K = place_state_feedback(lin.A, lin.B, region=k_region, method=method)
    L = place_observer_gain(lin.A_L, lin.C_L, region=l_region, method=method)
    return K, L[: lin.n], L[lin.n:]


def synthesize_linear(lin: LinearizationData, k_region=(-3.0, -2.0), l_region=(-2.0, -1.0),
                      method: str = "auto"):
    """Full linear pipeline: regulator equations, gains, controller."""
    sol = solve_static_linear(lin)
    K, L1, L2 = design_gains(lin, k_region, l_region, method)
    return sol, assemble_linear_controller(lin, sol.Pi, sol.Gamma, K, L1, L2)


__all__ = [
    "LinearController",
    "RandomInstance",
    "STABILITY_MARGIN",
    "assemble_linear_controller",
    "baseline_linear_gradient_controller",
    "closed_loop_matrix",
    "design_gains",
    "random_lq_instance",
    "solve_static_linear",
    "spectra_match",
    "steady_state_gradient_amplitude",
    "synthesize_linear",
]
