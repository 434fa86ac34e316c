"""Polynomial solutions of the nonlinear regulator (invariance) equations.

The maps ``pi(w)`` and ``gamma(w)`` are expanded in graded monomials
without a constant term; the equilibrium values ``x_eq`` and ``u_eq`` are
stored as explicit offsets. Coefficients are fitted by trust-region
least squares on collocation points covering the exosystem's limit set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import qmc

from .errors import FitFailure, InvalidInput, NoSolution
from .problems import Problem

MONOMIAL_ORDER = "graded-lex"


@lru_cache(maxsize=None)
def _exponents_of_degree(p: int, ell: int) -> np.ndarray:
    rows = []
    for combo in itertools.combinations_with_replacement(range(p), ell):
        e = np.zeros(p, dtype=int)
        for k in combo:
            e[k] += 1
        rows.append(e)
    return np.array(rows, dtype=int).reshape(-1, p)


@lru_cache(maxsize=None)
def exponents(p: int, degree: int) -> np.ndarray:
    """Exponent table for all monomials of degrees ``1..degree``, graded order."""
    if degree < 1:
        return np.zeros((0, p), dtype=int)
    return np.vstack([_exponents_of_degree(p, ell) for ell in range(1, degree + 1)])


def _monomials(w: np.ndarray, E: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if E.shape[0] == 0:
        return np.zeros(w.shape[:-1] + (0,))
    return np.multiply.reduce(w[..., None, :] ** E, axis=-1)


def poly_basis(w, ell: int) -> np.ndarray:
    """All degree-``ell`` monomials of ``w``: ``[w1^ell, w1^(ell-1) w2, ...]``."""
    if ell < 1:
        raise InvalidInput("monomial degree must be at least 1")
    w = np.asarray(w, dtype=float)
    return _monomials(w, _exponents_of_degree(w.shape[-1], ell))


def basis_size(p: int, ell: int) -> int:
    return math.comb(ell + p - 1, ell)


def _monomial_jacobian(w: np.ndarray, E: np.ndarray) -> np.ndarray:
    """``d Theta / d w`` with shape ``(..., N, p)``."""
    w = np.asarray(w, dtype=float)
    N, p = E.shape
    out = np.zeros(w.shape[:-1] + (N, p))
    for j in range(p):
        Ej = E.copy()
        Ej[:, j] = np.maximum(Ej[:, j] - 1, 0)
        out[..., j] = E[:, j] * _monomials(w, Ej)
    return out


@dataclass(frozen=True)
class PolyMap:
    """``offset + sum_l <psi_l, Theta_l(w)>`` with coefficients ``(out_dim, N)``."""

    p: int
    out_dim: int
    degree: int
    coeffs: np.ndarray
    offset: Optional[np.ndarray] = None

    def __post_init__(self):
        N = exponents(self.p, self.degree).shape[0]
        c = np.asarray(self.coeffs, dtype=float).reshape(self.out_dim, N)
        off = np.zeros(self.out_dim) if self.offset is None else self.offset
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "offset", np.asarray(off, dtype=float).reshape(self.out_dim))

    @classmethod
    def zeros(cls, p: int, out_dim: int, degree: int, offset=None) -> "PolyMap":
        N = exponents(p, degree).shape[0]
        return cls(p, out_dim, degree, np.zeros((out_dim, N)),
                   np.zeros(out_dim) if offset is None else offset)

    @classmethod
    def linear(cls, M, degree: int = 1, offset=None) -> "PolyMap":
        """Map ``w -> offset + M w`` embedded at the requested degree."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        out = cls.zeros(M.shape[1], M.shape[0], degree, offset)
        c = out.coeffs.copy()
        c[:, : M.shape[1]] = M
        return cls(out.p, out.out_dim, degree, c, out.offset)

    @property
    def exponents(self) -> np.ndarray:
        return exponents(self.p, self.degree)

    def block(self, ell: int) -> np.ndarray:
        """Coefficient block ``psi_ell`` multiplying ``Theta_ell``."""
        start = sum(basis_size(self.p, k) for k in range(1, ell))
        return self.coeffs[:, start:start + basis_size(self.p, ell)]

    def __call__(self, w) -> np.ndarray:
        if self.degree == 1:
            # Degree-one exponents are the identity, so the monomials are w itself.
            return self.offset + np.asarray(w, dtype=float) @ self.coeffs.T
        return self.offset + _monomials(w, self.exponents) @ self.coeffs.T

    def jacobian(self, w) -> np.ndarray:
        """Analytic ``d map / d w``, shape ``(..., out_dim, p)``."""
        return np.einsum("on,...np->...op", self.coeffs, _monomial_jacobian(w, self.exponents))

    def with_coeffs(self, coeffs) -> "PolyMap":
        return PolyMap(self.p, self.out_dim, self.degree, coeffs, self.offset)


@dataclass(frozen=True)
class FitReport:
    relative_residual: float
    train_residual: float
    per_equation: np.ndarray
    collocation_count: int
    validation_count: int
    iterations: int
    status: str
    scale: float
    seed: int
    domain_violations: int = 0


@dataclass(frozen=True)
class ManifoldSolution:
    pi: PolyMap
    gamma: PolyMap
    report: FitReport
    meta: dict = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return self.report.relative_residual


def invariance_residual(problem: Problem, pi: PolyMap, gamma: PolyMap, w, strict: bool = True) -> np.ndarray:
    """``[d pi/dw s(w) - f(pi(w), gamma(w), w); grad_u phi(gamma(w), w)]``."""
    w = np.asarray(w, dtype=float)
    x, u = pi(w), gamma(w)
    s = np.asarray(problem.exo.s(w), dtype=float)
    r1 = np.einsum("...np,...p->...n", pi.jacobian(w), s) - np.asarray(problem.plant.f(x, u, w), float)
    r2 = problem.gradient(u, w, strict=strict)
    return np.concatenate([r1, np.broadcast_to(r2, r1.shape[:-1] + r2.shape[-1:])], axis=-1)


def _broadcast_jac(J, batch, shape):
    return np.broadcast_to(np.asarray(J, dtype=float), batch + shape)


def residual_scale(problem: Problem, w: np.ndarray) -> float:
    """RMS of ``|f(x_eq, u_eq, w)|`` and ``|g(u_eq, w)|`` over samples (NaN ignored)."""
    pl = problem.plant
    f0 = np.asarray(pl.f(pl.x_eq, pl.u_eq, w), float)
    g0 = problem.gradient(np.broadcast_to(pl.u_eq, w.shape[:-1] + (pl.m,)), w, strict=False)
    sq = np.nansum(f0 ** 2, axis=-1) + np.nansum(np.asarray(g0) ** 2, axis=-1)
    return float(np.sqrt(np.mean(sq)))


def relative_residual(problem: Problem, pi: PolyMap, gamma: PolyMap, w: np.ndarray,
                      scale: Optional[float] = None) -> tuple[float, np.ndarray, int]:
    """RMS residual norm over samples divided by ``1 + scale``.

    Undefined residuals (outside the steady-state domain) count as
    violations and are excluded from the RMS; the returned tuple is
    ``(relative, per-equation RMS, violations)``.
    """
    r = invariance_residual(problem, pi, gamma, w, strict=False)
    ok = np.all(np.isfinite(r), axis=-1)
    if scale is None:
        scale = residual_scale(problem, w)
    if not np.any(ok):
        return math.inf, np.full(r.shape[-1], np.inf), int(r.shape[0])
    rr = r[ok]
    rel = float(np.sqrt(np.mean(np.sum(rr ** 2, axis=-1)))) / (1.0 + scale)
    per = np.sqrt(np.mean(rr ** 2, axis=0))
    return rel, per, int(np.count_nonzero(~ok))


def sample_region(problem: Problem, count: int, seed: int, orbit: int = 0) -> np.ndarray:
    """Scrambled Halton points in the exosystem box plus orbit samples."""
    exo = problem.exo
    pts = qmc.Halton(d=exo.p, scramble=True, seed=seed).random(count)
    pts = qmc.scale(pts, exo.region_lo, exo.region_hi) if exo.p else pts
    if orbit:
        # Random phases keep orbit points off any other sample set.
        rng = np.random.default_rng(seed)
        freqs = [f for f in exo.frequencies if f > 0]
        horizon = 2 * math.pi / min(freqs) if freqs else 1.0
        ts = np.sort(rng.uniform(0.0, horizon, orbit))
        pts = np.vstack([pts, exo.flow(ts)])
    return pts


def _linear_initial(problem: Problem) -> tuple[np.ndarray, np.ndarray]:
    from .regulator import solve_static_linear

    try:
        sol = solve_static_linear(problem.linearization())
        return sol.Pi, sol.Gamma
    except (NoSolution, InvalidInput):
        return np.zeros((problem.n, problem.p)), np.zeros((problem.m, problem.p))


def fit_manifold(problem: Problem, d_pi: int = 4, d_gamma: int = 4, count: Optional[int] = None,
                 seed: int = 0, tol: Optional[float] = None, max_iter: int = 200,
                 validation_count: Optional[int] = None, init: Optional[ManifoldSolution] = None) -> ManifoldSolution:
    """Collocation least-squares fit of ``(pi, gamma)``.

    Parameters
    ----------
    d_pi, d_gamma
        Polynomial degrees (at least 1).
    count
        Halton collocation points; default ``50 * (#coefficients)``. A
        further 10% are drawn from the exosystem orbit.
    tol
        If given, a validation residual above ``tol`` raises
        :class:`FitFailure` carrying the fitted solution as ``best``.

    The degree-1 blocks start from the linear regulator solution. The
    residual is weighted per equation so the plant and gradient rows
    contribute on comparable scales.
    """
    if d_pi < 1 or d_gamma < 1:
        raise InvalidInput("polynomial degrees must be at least 1")
    n, m, p = problem.n, problem.m, problem.p
    pl = problem.plant
    if p == 0:
        pi = PolyMap.zeros(0, n, d_pi, pl.x_eq)
        ga = PolyMap.zeros(0, m, d_gamma, pl.u_eq)
        rep = FitReport(0.0, 0.0, np.zeros(n + m), 0, 0, 0, "trivial", 0.0, seed)
        return ManifoldSolution(pi, ga, rep)

    Epi, Ega = exponents(p, d_pi), exponents(p, d_gamma)
    Npi, Nga = Epi.shape[0], Ega.shape[0]
    n_coef = n * Npi + m * Nga
    count = 50 * n_coef if count is None else int(count)
    validation_count = max(200, count // 5) if validation_count is None else int(validation_count)
    W = sample_region(problem, count, seed, orbit=max(1, count // 10))
    V = sample_region(problem, validation_count, seed + 7919, orbit=max(1, validation_count // 10))

    if init is not None:
        pi0 = PolyMap(p, n, d_pi, _resize(init.pi, d_pi), pl.x_eq)
        ga0 = PolyMap(p, m, d_gamma, _resize(init.gamma, d_gamma), pl.u_eq)
    else:
        Pi, Gamma = _linear_initial(problem)
        pi0 = PolyMap.linear(Pi, d_pi, pl.x_eq)
        ga0 = PolyMap.linear(Gamma, d_gamma, pl.u_eq)

    Th_pi, Th_ga = _monomials(W, Epi), _monomials(W, Ega)
    dTh_pi = _monomial_jacobian(W, Epi)
    sW = np.asarray(problem.exo.s(W), float)
    ds_pi = np.einsum("snp,sp->sn", dTh_pi, sW)
    batch = W.shape[:-1]

    scale = residual_scale(problem, W)
    f0 = np.asarray(pl.f(pl.x_eq, pl.u_eq, W), float)
    g0 = problem.gradient(np.broadcast_to(pl.u_eq, batch + (m,)), W, strict=False)
    wf = 1.0 / (1.0 + float(np.sqrt(np.mean(np.sum(f0 ** 2, axis=-1)))))
    gfin = np.asarray(g0)[np.all(np.isfinite(g0), axis=-1)]
    wg = 1.0 / (1.0 + (float(np.sqrt(np.mean(np.sum(gfin ** 2, axis=-1)))) if gfin.size else 0.0))
    weights = np.concatenate([np.full(n, wf), np.full(m, wg)])
    penalty = 10.0 * max(1.0, float(np.max(weights)) * (1.0 + scale))

    def unpack(theta):
        return theta[: n * Npi].reshape(n, Npi), theta[n * Npi:].reshape(m, Nga)

    def maps(theta):
        cp, cg = unpack(theta)
        return pi0.with_coeffs(cp), ga0.with_coeffs(cg)

    def residual(theta):
        pi, ga = maps(theta)
        r = invariance_residual(problem, pi, ga, W, strict=False) * weights
        bad = ~np.isfinite(r)
        if np.any(bad):
            r = np.where(bad, penalty, r)
        return r.ravel()

    def jacobian(theta):
        pi, ga = maps(theta)
        x, u = pi(W), ga(W)
        fx, fu, _, _, _ = pl.jacobians(x, u, W)
        fx = _broadcast_jac(fx, batch, (n, n))
        fu = _broadcast_jac(fu, batch, (n, m))
        Ru = problem.objective.gradient_u_jacobian(u, W)
        Ru = _broadcast_jac(Ru, batch, (m, m))
        S_ = len(W)
        J = np.zeros((S_, n + m, n_coef))
        Jpi = np.einsum("ai,sk->saik", np.eye(n), ds_pi) - np.einsum("sai,sk->saik", fx, Th_pi)
        J[:, :n, : n * Npi] = Jpi.reshape(S_, n, n * Npi)
        J[:, :n, n * Npi:] = -np.einsum("saj,sk->sajk", fu, Th_ga).reshape(S_, n, m * Nga)
        J[:, n:, n * Npi:] = np.einsum("sbj,sk->sbjk", Ru, Th_ga).reshape(S_, m, m * Nga)
        J *= weights[None, :, None]
        J[~np.isfinite(J)] = 0.0
        return J.reshape(S_ * (n + m), n_coef)

    theta0 = np.concatenate([pi0.coeffs.ravel(), ga0.coeffs.ravel()])
    r0 = residual(theta0)
    if np.sqrt(np.mean(r0 ** 2)) < 1e-15:
        theta, iterations, status = theta0, 0, "exact initial guess"
    else:
        res = least_squares(residual, theta0, jac=jacobian, method="trf", x_scale="jac",
                            gtol=1e-12, xtol=1e-14, ftol=1e-15, max_nfev=max_iter)
        theta, iterations, status = res.x, int(res.nfev), str(res.message)

    pi, ga = maps(theta)
    train, _, _ = relative_residual(problem, pi, ga, W, scale)
    rel, per, bad = relative_residual(problem, pi, ga, V, scale)
    report = FitReport(relative_residual=rel, train_residual=train, per_equation=per,
                       collocation_count=len(W), validation_count=len(V), iterations=iterations,
                       status=status, scale=scale, seed=seed, domain_violations=bad)
    sol = ManifoldSolution(pi, ga, report, meta={"d_pi": d_pi, "d_gamma": d_gamma,
                                                 "monomial_order": MONOMIAL_ORDER})
    if tol is not None and not rel <= tol:
        raise FitFailure(f"manifold fit residual {rel:.3g} exceeds tolerance {tol:.3g}", best=sol)
    return sol


def _resize(pm: PolyMap, degree: int) -> np.ndarray:
    """Coefficients of ``pm`` truncated or zero-padded to ``degree``."""
    N = exponents(pm.p, degree).shape[0]
    out = np.zeros((pm.out_dim, N))
    k = min(N, pm.coeffs.shape[1])
    out[:, :k] = pm.coeffs[:, :k]
    return out


@dataclass(frozen=True)
class SolvabilityReport:
    verdict: str
    degrees: tuple
    residuals: tuple
    tol: float

    @property
    def solvable(self) -> bool:
        return self.verdict == "solvable"


def solvability_probe(problem: Problem, max_degree: int = 4, tol: float = 1e-8,
                      plateau: float = 0.5, seed: int = 0, count: Optional[int] = None) -> SolvabilityReport:
    """Fit increasing degrees and classify the trend of the validation residual.

    ``solvable`` once a fit reaches ``tol``; ``obstructed`` when the
    residual stops improving by at least the factor ``plateau`` between
    consecutive degrees; ``inconclusive`` otherwise. This is an empirical
    indication, not a proof.
    """
    if problem.p == 0:
        return SolvabilityReport("solvable", (0,), (0.0,), tol)
    degrees, residuals = [], []
    prev = None
    for d in range(1, max_degree + 1):
        sol = fit_manifold(problem, d, d, count=count, seed=seed, init=prev)
        degrees.append(d)
        residuals.append(sol.residual)
        if sol.residual <= tol:
            return SolvabilityReport("solvable", tuple(degrees), tuple(residuals), tol)
        if len(residuals) >= 2 and residuals[-1] > plateau * residuals[-2]:
            return SolvabilityReport("obstructed", tuple(degrees), tuple(residuals), tol)
        prev = sol
    return SolvabilityReport("inconclusive", tuple(degrees), tuple(residuals), tol)
