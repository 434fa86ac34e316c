"""End-to-end orchestration from a resolved scenario to metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bundle as bundle_io
from .errors import InvalidInput
from .linalg import place_observer_gain, place_state_feedback
from .manifold import MONOMIAL_ORDER, FitReport, ManifoldSolution, PolyMap, fit_manifold
from .problems import Problem
from .regulator import solve_static_linear
from .scenario import build_problem, initial_state, scenario_hash
from .simulate import ClosedLoop, TrackingMetrics, Trajectory, integrate, metrics
from .synthesis import (
    StaticLaw,
    SynthesizedController,
    baseline_gradient_flow,
    static_output_feedback,
    synthesize_dynamic,
    synthesize_static,
)


def design_gains(sc: dict, problem: Problem):
    """``(K, L1, L2)`` from explicit poles when given, else from the pole regions."""
    lin = problem.linearization()
    g = sc["gains"]
    K = place_state_feedback(lin.A, lin.B, region=g["k_region"], targets=g.get("k_poles"))
    L = place_observer_gain(lin.A_L, lin.C_L, region=g["l_region"], targets=g.get("l_poles"))
    return K, L[: lin.n], L[lin.n:]


def fit(sc: dict, problem: Problem) -> ManifoldSolution:
    f = sc["fit"]
    return fit_manifold(problem, int(f["d_pi"]), int(f["d_gamma"]), count=f.get("count"),
                        seed=int(f["seed"]), tol=f.get("tol"), max_iter=int(f.get("max_iter") or 200))


def linear_manifold(problem: Problem) -> ManifoldSolution:
    """Degree-one maps from the linear regulator equations."""
    sol = solve_static_linear(problem.linearization())
    pl = problem.plant
    rep = FitReport(relative_residual=0.0, train_residual=0.0, per_equation=np.zeros(problem.n + problem.m),
                    collocation_count=0, validation_count=0, iterations=0, status="linear regulator solve",
                    scale=0.0, seed=0)
    return ManifoldSolution(PolyMap.linear(sol.Pi, 1, pl.x_eq), PolyMap.linear(sol.Gamma, 1, pl.u_eq), rep)


@dataclass
class Synthesis:
    problem: Problem
    controller: object
    manifold: Optional[ManifoldSolution]


def synthesize(sc: dict, manifold: Optional[ManifoldSolution] = None) -> Synthesis:
    """Build the controller requested by ``sc['controller']``."""
    problem = build_problem(sc)
    kind = sc["controller"].get("kind", "dynamic")
    if kind == "output":
        return Synthesis(problem, static_output_feedback(problem, sc["controller"]["D"]), None)
    if kind == "baseline":
        return Synthesis(problem, baseline_gradient_flow(problem, float(sc["controller"]["eta"])), None)
    if kind not in ("dynamic", "static"):
        raise InvalidInput(f"unknown controller kind {kind!r}")
    if manifold is None:
        manifold = fit(sc, problem)
    K, L1, L2 = design_gains(sc, problem)
    if kind == "static":
        return Synthesis(problem, synthesize_static(problem, manifold, K), manifold)
    return Synthesis(problem, synthesize_dynamic(problem, manifold, K, L1, L2), manifold)


def manifold_bundle(man: ManifoldSolution, sc_hash: str = "") -> bundle_io.Bundle:
    b = bundle_io.Bundle(meta={"content": "manifold", "scenario_hash": sc_hash,
                               "monomial_order": MONOMIAL_ORDER,
                               "pi.degree": man.pi.degree, "gamma.degree": man.gamma.degree})
    b.add("pi.coeffs", man.pi.coeffs).add("pi.offset", man.pi.offset)
    b.add("gamma.coeffs", man.gamma.coeffs).add("gamma.offset", man.gamma.offset)
    return b


def manifold_from_bundle(b: bundle_io.Bundle) -> ManifoldSolution:
    def pm(prefix):
        C = b.matrices[f"{prefix}.coeffs"]
        off = b.matrices[f"{prefix}.offset"].ravel()
        deg = int(b.meta[f"{prefix}.degree"])
        p = int(round(_dim_from_count(C.shape[1], deg)))
        return PolyMap(p, C.shape[0], deg, C, off)

    rep = FitReport(float("nan"), float("nan"), np.zeros(0), 0, 0, 0, "loaded from bundle", 0.0, 0)
    return ManifoldSolution(pm("pi"), pm("gamma"), rep)


def _dim_from_count(N: int, degree: int) -> int:
    from .manifold import exponents

    for p in range(1, 64):
        if exponents(p, degree).shape[0] == N:
            return p
    raise InvalidInput("coefficient count matches no disturbance dimension")


def controller_bundle(syn: Synthesis, sc_hash: str) -> bundle_io.Bundle:
    ctrl = syn.controller
    kind = "static" if isinstance(ctrl, StaticLaw) else ctrl.kind
    b = bundle_io.Bundle(meta={"content": "controller", "kind": kind, "problem": syn.problem.name,
                               "scenario_hash": sc_hash})
    if kind == "output":
        b.add("D", ctrl.gains["D"])
        return b
    if kind == "baseline":
        b.meta["eta"] = repr(ctrl.gains["eta"])
        return b
    gains = {"K": ctrl.K} if kind == "static" else ctrl.gains
    for k in ("K", "L1", "L2"):
        if k in gains:
            b.add(k, gains[k])
    mb = manifold_bundle(syn.manifold)
    for k in ("monomial_order", "pi.degree", "gamma.degree"):
        b.meta[k] = mb.meta[k]
    b.matrices.update(mb.matrices)
    return b


def controller_from_bundle(b: bundle_io.Bundle, problem: Problem):
    kind = b.meta.get("kind")
    if kind == "output":
        return static_output_feedback(problem, b.matrices["D"])
    if kind == "baseline":
        return baseline_gradient_flow(problem, float(b.meta["eta"]))
    man = manifold_from_bundle(b)
    if kind == "static":
        return synthesize_static(problem, man, b.matrices["K"])
    if kind == "dynamic":
        return synthesize_dynamic(problem, man, b.matrices["K"], b.matrices["L1"], b.matrices["L2"])
    raise InvalidInput(f"bundle has unknown controller kind {kind!r}")


def simulate(sc: dict, problem: Problem, controller, pi: Optional[PolyMap] = None) -> tuple[Trajectory, TrackingMetrics]:
    """Integrate per ``sc['simulation']``; raises :class:`Diverged` with partial data."""
    sim = sc["simulation"]
    loop = ClosedLoop(problem, controller)
    s0 = initial_state(sc, loop)
    traj = integrate(loop, s0, float(sim["horizon"]), step=float(sim["step"]), method=sim.get("method", "rk4"),
                     record_every=int(sim["record_every"]))
    traj.meta["scenario_hash"] = scenario_hash(sc)
    return traj, metrics(traj, tol=float(sim["tolerance"]), pi=pi)


@dataclass(frozen=True)
class ComparisonRow:
    controller: str
    eta: Optional[float]
    tail_sup_g: float
    settled: bool


def compare_baseline(sc: dict) -> list[ComparisonRow]:
    """Internal-model controller and gradient-flow baselines on the same disturbance."""
    problem = build_problem(sc)
    baselines = [(float(eta), baseline_gradient_flow(problem, float(eta))) for eta in sc["compare"]["etas"]]
    rows = []
    syn = synthesize({**sc, "controller": {"kind": "dynamic"}})
    _, met = simulate(sc, problem, syn.controller, pi=syn.manifold.pi)
    rows.append(ComparisonRow("internal-model", None, met.tail_sup_g, met.settled))
    for eta, ctrl in baselines:
        _, met = simulate(sc, problem, ctrl)
        rows.append(ComparisonRow("gradient-flow", eta, met.tail_sup_g, met.settled))
    return rows
