"""Dense real linear algebra for regulator design.

Spectra and invariant subspaces, PBH tests, the necessary conditions for
exact tracking, pole placement for state feedback and observers, and
Kronecker-vectorized solvers for the linear regulator equations

    Pi S = A Pi + B Gamma + P,        0 = R Gamma + T.

All functions are pure; inputs are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg as sla
from scipy import signal

from .errors import InvalidInput, NoSolution, NumericalFailure, SynthesisError

#: Eigenvalues with real part below ``-STABILITY_MARGIN`` count as stable.
STABILITY_MARGIN = 1e-9
#: Relative singular-value cutoff used for every numerical rank decision.
RANK_TOL = 1e-9
#: Tolerance for "lies in Ker[0 T]" in the inclusion test.
INCLUSION_TOL = 1e-8


def _as_matrix(M, name="matrix") -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise InvalidInput(f"{name} must be two-dimensional, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInput(f"{name} has non-finite entries")
    return M


def _square(M, name="matrix") -> np.ndarray:
    M = _as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {M.shape}")
    return M


def _rank(M: np.ndarray, scale: float = 1.0) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > RANK_TOL * max(scale, 1.0)))


def _orth(M: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Orthonormal basis of the column span of ``M`` (may have zero columns)."""
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > RANK_TOL * max(scale, 1.0)))
    return U[:, :r]


def _complement(V: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of span(V)."""
    n = V.shape[0]
    if V.shape[1] == 0:
        return np.eye(n)
    return sla.null_space(V.T, rcond=RANK_TOL)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    stable_count: int
    marginal_count: int
    unstable_count: int
    margin: float = STABILITY_MARGIN

    @property
    def max_real(self) -> float:
        if self.eigenvalues.size == 0:
            return -np.inf
        return float(np.max(self.eigenvalues.real))

    @property
    def is_hurwitz(self) -> bool:
        return self.marginal_count == 0 and self.unstable_count == 0


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis stored column-wise, tagged with what it spans."""

    columns: np.ndarray
    kind: str

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]

    def projector(self) -> np.ndarray:
        return self.columns @ self.columns.T

    def contains(self, other: "SubspaceBasis | np.ndarray", tol: float = 1e-8) -> bool:
        V = other.columns if isinstance(other, SubspaceBasis) else np.asarray(other)
        if V.size == 0:
            return True
        resid = V - self.columns @ (self.columns.T @ V)
        return bool(np.linalg.norm(resid) <= tol * max(1.0, np.linalg.norm(V)))


@dataclass(frozen=True)
class LinearizationData:
    """Jacobians of plant, exosystem and gradient at the equilibrium.

    ``R`` is the Jacobian of the reduced gradient in ``u`` (the Hessian of
    the reduced loss); it is ``None`` when not available.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    T: np.ndarray
    R: Optional[np.ndarray] = None

    def __post_init__(self):
        names = ("A", "B", "C", "P", "Q", "S", "T")
        for name in names:
            object.__setattr__(self, name, _as_matrix(getattr(self, name), name))
        if self.R is not None:
            object.__setattr__(self, "R", _square(self.R, "R"))
        n, m, q, p = self.n, self.m, self.q, self.p
        expected = {
            "A": (n, n), "B": (n, m), "C": (q, n), "P": (n, p),
            "Q": (q, p), "S": (p, p), "T": (m, p),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise InvalidInput(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.R is not None and self.R.shape != (m, m):
            raise InvalidInput(f"R has shape {self.R.shape}, expected {(m, m)}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def q(self) -> int:
        return self.C.shape[0]

    @property
    def p(self) -> int:
        return self.S.shape[0]

    @property
    def A_L(self) -> np.ndarray:
        return np.block([[self.A, self.P], [np.zeros((self.p, self.n)), self.S]])

    @property
    def C_L(self) -> np.ndarray:
        return np.hstack([self.C, self.Q])


@dataclass(frozen=True)
class NecessaryConditionsReport:
    stabilizable: bool
    detectable_plant: bool
    detectable_extended: bool
    inclusion_holds: bool
    witnesses: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return self.stabilizable and self.detectable_plant and self.inclusion_holds

    def lines(self) -> list[str]:
        def mark(ok):
            return "pass" if ok else "FAIL"

        out = [
            f"1) (A,B) stabilizable ............ {mark(self.stabilizable)}",
            f"2) (C,A) detectable .............. {mark(self.detectable_plant)}",
            f"3) O^c(C_L,A_L) & X>=(A_L) in Ker[0 T] {mark(self.inclusion_holds)}",
            f"   (C_L,A_L) detectable .......... {mark(self.detectable_extended)}",
        ]
        for key, value in self.witnesses.items():
            out.append(f"   witness[{key}]: {value}")
        return out


@dataclass(frozen=True)
class LinearRegulatorSolution:
    """Solution of the linear regulator equations with its residuals."""

    Pi: np.ndarray
    Gamma: np.ndarray
    residual_sylvester: float
    residual_gradient: float
    non_unique: bool = False


@dataclass(frozen=True)
class DynamicTrackingCheck:
    """Outcome of checking a linear dynamic controller for exact tracking."""

    Pi: np.ndarray
    Sigma: np.ndarray
    residual_plant: float
    residual_controller: float
    residual_gradient: float
    tracking: bool
    non_unique: bool = False

    @property
    def residuals(self) -> tuple[float, float, float]:
        return (self.residual_plant, self.residual_controller, self.residual_gradient)


# ---------------------------------------------------------------------------
# Spectra and subspaces
# ---------------------------------------------------------------------------


def eigendecompose(M, margin: float = STABILITY_MARGIN) -> Spectrum:
    """Eigenvalues of ``M`` classified against the open left half-plane.

    An eigenvalue is stable iff its real part is below ``-margin``,
    unstable iff above ``+margin``, and marginal otherwise.
    """
    M = _square(M, "M")
    try:
        lam = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigenvalue iteration failed: {exc}") from exc
    re = lam.real
    stable = int(np.sum(re < -margin))
    unstable = int(np.sum(re > margin))
    return Spectrum(lam, stable, lam.size - stable - unstable, unstable, margin)


def _schur_subspace(M: np.ndarray, select, kind: str) -> SubspaceBasis:
    n = M.shape[0]
    if n == 0:
        return SubspaceBasis(np.zeros((0, 0)), kind)
    try:
        _, Z, sdim = sla.schur(M, output="real", sort=select)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"Schur reordering failed: {exc}") from exc
    return SubspaceBasis(Z[:, :sdim], kind)


def unstable_subspace(M, margin: float = STABILITY_MARGIN) -> SubspaceBasis:
    """Real invariant subspace of the eigenvalues with Re >= -margin."""
    M = _square(M, "M")
    return _schur_subspace(M, lambda re, im: re >= -margin, "unstable")


def stable_subspace(M, margin: float = STABILITY_MARGIN) -> SubspaceBasis:
    M = _square(M, "M")
    return _schur_subspace(M, lambda re, im: re < -margin, "stable")


def controllable_subspace(A, B) -> SubspaceBasis:
    """Orthonormal basis of Im[B, AB, ..., A^(n-1) B] (Krylov iteration)."""
    A = _square(A, "A")
    B = _as_matrix(B, "B")
    if B.shape[0] != A.shape[0]:
        raise InvalidInput(f"B has {B.shape[0]} rows, A is {A.shape[0]}x{A.shape[0]}")
    scale = max(np.linalg.norm(A), np.linalg.norm(B), 1.0)
    V = _orth(B, scale)
    for _ in range(A.shape[0]):
        W = _orth(np.hstack([V, A @ V]), scale)
        if W.shape[1] == V.shape[1]:
            break
        V = W
    return SubspaceBasis(V, "controllable")


def unobservable_subspace(C, A) -> SubspaceBasis:
    """Orthonormal basis of the intersection of Ker(C A^(i-1)), i = 1..n."""
    A = _square(A, "A")
    C = _as_matrix(C, "C")
    if C.shape[1] != A.shape[0]:
        raise InvalidInput(f"C has {C.shape[1]} columns, A is {A.shape[0]}x{A.shape[0]}")
    observable = controllable_subspace(A.T, C.T).columns
    return SubspaceBasis(_complement(observable), "unobservable")


def _pbh_failures(A: np.ndarray, B: np.ndarray, margin: float) -> list[tuple[complex, np.ndarray]]:
    """Eigenvalues in the closed right half-plane where rank[A - lam I, B] < n."""
    n = A.shape[0]
    scale = max(np.linalg.norm(A), np.linalg.norm(B), 1.0)
    failures = []
    for lam in eigendecompose(A, margin).eigenvalues:
        if lam.real < -margin:
            continue
        M = np.hstack([A - lam * np.eye(n), B.astype(complex)])
        U, s, _ = np.linalg.svd(M)
        if s[-1] <= 10 * RANK_TOL * scale:
            failures.append((complex(lam), U[:, -1]))
    return failures


def is_stabilizable(A, B, margin: float = STABILITY_MARGIN) -> bool:
    """PBH test: rank[A - lam I, B] = n at every eigenvalue with Re(lam) >= 0."""
    A = _square(A, "A")
    B = _as_matrix(B, "B")
    if B.shape[0] != A.shape[0]:
        raise InvalidInput("A and B have inconsistent row counts")
    return not _pbh_failures(A, B, margin)


def is_detectable(C, A, margin: float = STABILITY_MARGIN) -> bool:
    """PBH test on the dual pair (A^T, C^T)."""
    A = _square(A, "A")
    C = _as_matrix(C, "C")
    if C.shape[1] != A.shape[0]:
        raise InvalidInput("C and A have inconsistent dimensions")
    return not _pbh_failures(A.T, C.T, margin)


def subspace_intersection(U: SubspaceBasis, V: SubspaceBasis, kind: str = "intersection") -> SubspaceBasis:
    n = U.ambient_dim
    if U.dim == 0 or V.dim == 0:
        return SubspaceBasis(np.zeros((n, 0)), kind)
    N = sla.null_space(np.hstack([U.columns, -V.columns]), rcond=RANK_TOL)
    return SubspaceBasis(_orth(U.columns @ N[: U.dim]), kind)


def check_necessary_conditions(lin: LinearizationData, margin: float = STABILITY_MARGIN) -> NecessaryConditionsReport:
    """Evaluate the three necessary conditions for exact asymptotic tracking.

    Also reports detectability of the extended pair (C_L, A_L), which is
    the standing assumption used by the observer-based design.
    """
    if not isinstance(lin, LinearizationData):
        raise InvalidInput("check_necessary_conditions expects LinearizationData")
    A, B, C, T = lin.A, lin.B, lin.C, lin.T
    A_L, C_L = lin.A_L, lin.C_L
    witnesses = {}

    stab_fail = _pbh_failures(A, B, margin)
    if stab_fail:
        lam, v = stab_fail[0]
        witnesses["stabilizable"] = f"uncontrollable mode lambda={lam:.6g}"
    det_fail = _pbh_failures(A.T, C.T, margin)
    if det_fail:
        lam, v = det_fail[0]
        witnesses["detectable_plant"] = f"unobservable mode lambda={lam:.6g}"
    ext_fail = _pbh_failures(A_L.T, C_L.T, margin)
    if ext_fail:
        lam, v = ext_fail[0]
        witnesses["detectable_extended"] = f"unobservable mode lambda={lam:.6g}"

    # Ker[0 T] as a subspace of R^(n+p): x part free, w part in Ker T.
    n, p = lin.n, lin.p
    kernel_map = np.hstack([np.zeros((lin.m, n)), T])
    bad = subspace_intersection(unobservable_subspace(C_L, A_L), unstable_subspace(A_L, margin))
    inclusion = True
    if bad.dim:
        ker = SubspaceBasis(sla.null_space(kernel_map, rcond=RANK_TOL) if kernel_map.size else np.eye(n + p),
                            "kernel")
        inclusion = ker.contains(bad, INCLUSION_TOL)
        if not inclusion:
            resid = bad.columns - ker.projector() @ bad.columns
            j = int(np.argmax(np.linalg.norm(resid, axis=0)))
            witnesses["inclusion"] = "direction " + np.array2string(bad.columns[:, j], precision=4)
    return NecessaryConditionsReport(
        stabilizable=not stab_fail,
        detectable_plant=not det_fail,
        detectable_extended=not ext_fail,
        inclusion_holds=inclusion,
        witnesses=witnesses,
    )


# ---------------------------------------------------------------------------
# Pole placement
# ---------------------------------------------------------------------------


def _normalize_region(region) -> tuple[float, float]:
    lo, hi = sorted(float(r) for r in region)
    if hi >= 0:
        raise InvalidInput(f"placement region {region} must lie in the open left half-plane")
    return lo, hi


def _spread(region: tuple[float, float], k: int) -> np.ndarray:
    lo, hi = region
    if k == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(hi, lo, k)


def _ackermann(A: np.ndarray, b: np.ndarray, poles: np.ndarray) -> np.ndarray:
    """Row gain k with eig(A + b k) = poles (single input, controllable)."""
    n = A.shape[0]
    ctrb = np.hstack([np.linalg.matrix_power(A, i) @ b for i in range(n)])
    coeffs = np.real(np.poly(poles))
    pA = np.zeros_like(A)
    for c in coeffs:
        pA = pA @ A + c * np.eye(n)
    last = np.linalg.solve(ctrb.T, np.eye(n)[:, -1])
    return -(last @ pA)[None, :]


def _riccati_gain(A: np.ndarray, B: np.ndarray, region: tuple[float, float]) -> np.ndarray:
    """Riccati gain with the state weight bisected to keep poles inside ``region``.

    The shift by -hi guarantees Re eig < hi; the weight is the largest for
    which the fastest pole is still no faster than ``lo``.
    """
    lo, hi = region
    n, m = B.shape
    As = A - hi * np.eye(n)

    def gain(log_rho):
        X = sla.solve_continuous_are(As, B, 10.0 ** log_rho * np.eye(n), np.eye(m))
        return -B.T @ X

    def fastest(K):
        return float(np.min(np.linalg.eigvals(A + B @ K).real))

    a, b = -10.0, 10.0
    K = gain(a)
    if fastest(K) < lo:
        return K
    if fastest(gain(b)) >= lo:
        return gain(b)
    for _ in range(60):
        mid = 0.5 * (a + b)
        Km = gain(mid)
        if fastest(Km) >= lo:
            a, K = mid, Km
        else:
            b = mid
        if b - a < 1e-3:
            break
    return K


def place_state_feedback(A, B, region: Sequence[float] = (-2.0, -1.0), targets=None,
                         method: str = "auto") -> np.ndarray:
    """Gain ``K`` such that ``A + B K`` is Hurwitz.

    Parameters
    ----------
    A, B
        Plant pair; must be stabilizable.
    region
        Interval of desired closed-loop real parts (either endpoint order).
    targets
        Explicit closed-loop poles for the controllable part. When omitted,
        single-input systems get real poles spread uniformly over ``region``
        and multi-input systems a shifted Riccati gain.
    method
        ``"auto"`` as described above, or ``"riccati"`` to use the shifted
        Riccati gain regardless of the input count. The Riccati design keeps
        closed-loop eigenvalues well conditioned on high-order single-input
        systems, at the price of only approximate pole locations.

    Returns
    -------
    K : ndarray, shape (m, n)

    Raises
    ------
    SynthesisError
        If (A, B) is not stabilizable or the result is not Hurwitz.
    """
    A = _square(A, "A")
    B = _as_matrix(B, "B")
    n, m = B.shape
    if A.shape[0] != n:
        raise InvalidInput("A and B have inconsistent row counts")
    region = _normalize_region(region)
    if method not in ("auto", "riccati"):
        raise InvalidInput(f"unknown placement method {method!r}")
    if not is_stabilizable(A, B):
        raise SynthesisError("(A, B) is not stabilizable; no Hurwitz state feedback exists")

    eig_A = np.linalg.eigvals(A) if n else np.zeros(0)
    if targets is None and n and np.all((eig_A.real >= region[0] - 1e-12) & (eig_A.real <= region[1] + 1e-12)):
        return np.zeros((m, n))

    Vc = controllable_subspace(A, B).columns
    r = Vc.shape[1]
    Tm = np.hstack([Vc, _complement(Vc)])
    A11 = Vc.T @ A @ Vc
    B1 = Vc.T @ B
    K1 = np.zeros((m, r))
    if r:
        if targets is not None:
            poles = np.asarray(targets, dtype=complex).ravel()
            if poles.size != r:
                raise InvalidInput(f"expected {r} target poles for the controllable part, got {poles.size}")
            K1 = _place_exact(A11, B1, poles)
        elif m == 1 and method == "auto":
            K1 = _place_exact(A11, B1, _spread(region, r))
        else:
            K1 = _riccati_gain(A11, B1, region)
    K = np.hstack([K1, np.zeros((m, n - r))]) @ Tm.T
    if not eigendecompose(A + B @ K).is_hurwitz:
        raise SynthesisError("pole placement produced a non-Hurwitz closed loop")
    return K


def _place_exact(A: np.ndarray, B: np.ndarray, poles: np.ndarray) -> np.ndarray:
    if B.shape[1] == 1:
        K = _ackermann(A, B, poles)
        got = np.sort_complex(np.linalg.eigvals(A + B @ K))
        want = np.sort_complex(poles)
        if np.max(np.abs(got - want)) <= 1e-6 * max(1.0, np.max(np.abs(want))):
            return K
    try:
        res = signal.place_poles(A, B, poles)
    except ValueError as exc:
        raise SynthesisError(f"pole placement failed: {exc}") from exc
    return -res.gain_matrix


def place_observer_gain(A_L, C_L, region: Sequence[float] = (-2.0, -1.0), targets=None,
                        method: str = "auto") -> np.ndarray:
    """Gain ``L`` such that ``A_L - L C_L`` is Hurwitz, by duality.

    ``L = -K^T`` where ``K = place_state_feedback(A_L^T, C_L^T)``.
    """
    A_L = _square(A_L, "A_L")
    C_L = _as_matrix(C_L, "C_L")
    if not is_detectable(C_L, A_L):
        raise SynthesisError("(C_L, A_L) is not detectable; no Hurwitz observer exists")
    K = place_state_feedback(A_L.T, C_L.T, region, targets, method)
    return -K.T


# ---------------------------------------------------------------------------
# Regulator equations
# ---------------------------------------------------------------------------


def _kron_solve(M: np.ndarray, rhs: np.ndarray, what: str) -> tuple[np.ndarray, bool]:
    """Solve ``M v = rhs``; min-norm with a consistency check if ``M`` is singular."""
    if M.size == 0:
        return np.zeros(M.shape[1]), False
    scale = max(np.linalg.norm(M), 1.0)
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] > 1e-12 * scale:
        return np.linalg.solve(M, rhs), False
    v, *_ = np.linalg.lstsq(M, rhs, rcond=1e-12)
    if np.linalg.norm(M @ v - rhs) > 1e-9 * (1.0 + np.linalg.norm(rhs)) * scale:
        raise NoSolution(f"{what}: operator is singular and the right-hand side is inconsistent")
    return v, True


def solve_sylvester_kron(A: np.ndarray, S: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, bool]:
    """Solve ``X S - A X = rhs`` for ``X`` via column-major vectorization."""
    n, p = A.shape[0], S.shape[0]
    M = np.kron(S.T, np.eye(n)) - np.kron(np.eye(p), A)
    v, non_unique = _kron_solve(M, rhs.reshape(-1, order="F"), "Sylvester equation")
    return v.reshape((n, p), order="F"), non_unique


def solve_regulator_linear(A, B, P, S, R, T) -> LinearRegulatorSolution:
    """Solve ``Pi S = A Pi + B Gamma + P`` and ``0 = R Gamma + T``."""
    A, B, P, S = _square(A, "A"), _as_matrix(B, "B"), _as_matrix(P, "P"), _square(S, "S")
    R, T = _square(R, "R"), _as_matrix(T, "T")
    n, m, p = A.shape[0], B.shape[1], S.shape[0]
    if B.shape[0] != n or P.shape != (n, p) or R.shape != (m, m) or T.shape != (m, p):
        raise InvalidInput("regulator equation inputs have inconsistent dimensions")
    Gamma_vec, nu_g = _kron_solve(np.kron(np.eye(p), R), -T.reshape(-1, order="F"), "gradient equation")
    Gamma = Gamma_vec.reshape((m, p), order="F")
    Pi, nu_s = solve_sylvester_kron(A, S, B @ Gamma + P)
    return LinearRegulatorSolution(
        Pi=Pi,
        Gamma=Gamma,
        residual_sylvester=float(np.linalg.norm(Pi @ S - A @ Pi - B @ Gamma - P)),
        residual_gradient=float(np.linalg.norm(R @ Gamma + T)),
        non_unique=nu_g or nu_s,
    )


def verify_linear_dynamic_tracking(A, B, C, P, Q, S, A_c, B_c, C_c, R, T, tol: float = 1e-9) -> DynamicTrackingCheck:
    """Check whether a linear controller (A_c, B_c, C_c) tracks exactly.

    Solves the coupled equations

        Pi S    = A Pi + B C_c Sigma + P
        Sigma S = A_c Sigma + B_c (C Pi + Q)

    for (Pi, Sigma) and reports the gradient residual ``R C_c Sigma + T``.
    Tracking is declared iff every residual is below ``tol * (1 + scale)``.
    """
    A, S, A_c = _square(A, "A"), _square(S, "S"), _square(A_c, "A_c")
    B, C, P, Q = (_as_matrix(M, k) for M, k in ((B, "B"), (C, "C"), (P, "P"), (Q, "Q")))
    B_c, C_c, R, T = _as_matrix(B_c, "B_c"), _as_matrix(C_c, "C_c"), _square(R, "R"), _as_matrix(T, "T")
    n, nc = A.shape[0], A_c.shape[0]
    if B_c.shape != (nc, C.shape[0]) or C_c.shape != (B.shape[1], nc):
        raise InvalidInput("controller matrices have inconsistent dimensions")
    M = np.block([[A, B @ C_c], [B_c @ C, A_c]])
    N = np.vstack([P, B_c @ Q])
    X, non_unique = solve_sylvester_kron(M, S, N)
    Pi, Sigma = X[:n], X[n:]
    r_plant = float(np.linalg.norm(Pi @ S - A @ Pi - B @ C_c @ Sigma - P))
    r_ctrl = float(np.linalg.norm(Sigma @ S - A_c @ Sigma - B_c @ (C @ Pi + Q)))
    r_grad = float(np.linalg.norm(R @ C_c @ Sigma + T))
    scale = 1.0 + max(np.linalg.norm(M), np.linalg.norm(N), np.linalg.norm(T))
    tracking = max(r_plant, r_ctrl, r_grad) < tol * scale
    return DynamicTrackingCheck(Pi, Sigma, r_plant, r_ctrl, r_grad, tracking, non_unique)
