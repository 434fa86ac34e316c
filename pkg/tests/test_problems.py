import math

import numpy as np
import pytest
from scipy.optimize import brentq

from feedopt.errors import DomainError, InvalidInput, NumericalFailure
from feedopt.linalg import check_necessary_conditions
from feedopt.problems import (
    BUILTIN_NAMES,
    PendulumParams,
    PlantModel,
    Problem,
    builtin,
    finite_difference_jacobians,
    harmonic_exosystem,
    lagrangian_augment,
    lq_instance,
    lq_problem,
    pendulum_plant,
    pendulum_steady_state,
    reduced_gradient,
    scalar_example5,
)

PP = PendulumParams()


def _samples(problem, count, seed):
    """(u, w) pairs inside the domain of the steady-state map."""
    rng = np.random.default_rng(seed)
    lo, hi = problem.exo.region_lo, problem.exo.region_hi
    if problem.name.startswith("pendulum"):
        # Keep the discriminant positive: small w1 relative to alpha/eta.
        w = rng.uniform(lo, hi, size=(count, problem.p)) * 0.05
        u = rng.uniform(-0.2, 0.2, size=(count, problem.m))
    else:
        w = rng.uniform(lo, hi, size=(count, problem.p))
        u = rng.uniform(-1, 1, size=(count, problem.m))
    return u, w


def test_pendulum_alpha_value():
    assert PP.alpha == pytest.approx(0.316 * 9.81 * 0.023 / 0.000444, rel=1e-14)
    assert PP.beta == pytest.approx(0.1 * 0.023**2 / 0.000444)
    assert PP.gamma_p == pytest.approx(0.316 * 0.023 / 0.000444)
    assert PP.eta_p == pytest.approx(1 / 0.000444)


def test_pendulum_params_positive():
    with pytest.raises(InvalidInput):
        PendulumParams(mass=0.0)


def test_pendulum_rhs_and_jacobian():
    plant = pendulum_plant(PP)
    assert np.all(plant.f(np.zeros(2), np.zeros(1), np.zeros(4)) == 0)
    A, B, P, C, Q = plant.jacobians(np.zeros(2), np.zeros(1), np.zeros(4))
    assert A[1, 0] == pytest.approx(PP.alpha)
    assert B[1, 0] == pytest.approx(-PP.gamma_p)
    np.testing.assert_allclose(C, [[0.0, 1.0]])
    np.testing.assert_allclose(Q, [[0.0, 0.0, 1.0, 0.0]])
    np.testing.assert_allclose(P[:, 0], [0.0, PP.eta_p])
    # Off-origin, analytic versus central differences.
    rng = np.random.default_rng(1)
    for _ in range(20):
        x, u, w = rng.normal(size=2), rng.normal(size=1), rng.normal(size=4)
        for an, fd in zip(plant.jacobians(x, u, w), plant.fd_jacobians(x, u, w)):
            assert np.allclose(an, fd, rtol=1e-5, atol=1e-5 * (1 + np.abs(an).max()))


def test_closed_form_branch_degenerate_denominator():
    u = np.array([1e-3])
    w = np.array([-PP.gamma_p * 1e-3 / PP.eta_p, 0, 0, 0])
    np.testing.assert_allclose(pendulum_steady_state(u, w, PP, branch="closed-form"), [np.pi, 0.0])


@pytest.mark.parametrize("branch", ["closed-form", "continuous"])
def test_steady_state_substitutes_back(branch):
    plant = pendulum_plant(PP)
    rng = np.random.default_rng(2)
    for _ in range(200):
        u = rng.uniform(-1, 1, 1)
        w = rng.uniform(-0.05, 0.05, 4)
        x = pendulum_steady_state(u, w, PP, branch=branch)
        assert np.abs(plant.f(x, u, w)).max() < 1e-9 * (1 + PP.eta_p)


def test_continuous_branch_matches_root_finder():
    for u in (1e-3, 1e-2, 0.1):
        x1 = pendulum_steady_state([u], np.zeros(4), PP, branch="continuous")[0]
        ref = brentq(lambda t: PP.alpha * math.sin(t) - PP.gamma_p * u * math.cos(t), -1.0, 1.0)
        assert x1 == pytest.approx(ref, abs=1e-12)
        assert 0 < x1 < 0.1


def test_steady_state_domain_error():
    w = np.array([1.0, 0, 0, 0])
    with pytest.raises(DomainError):
        pendulum_steady_state([0.0], w, PP)
    assert np.isnan(pendulum_steady_state([0.0], w, PP, strict=False)[0])


def test_harmonic_exosystem_flow():
    exo = harmonic_exosystem([2.0], [1.0])
    np.testing.assert_allclose(exo.flow(np.pi / 4), [0.0, -2.0], atol=1e-12)
    exo = harmonic_exosystem([1.0, 10.0], [1.0, 0.5])
    np.testing.assert_allclose(exo.w0, [1.0, 0.0, 0.5, 0.0])
    assert exo.S[3, 2] == -100.0


def test_constant_exosystem_block():
    exo = harmonic_exosystem([0.0], [0.7])
    assert exo.p == 1 and exo.S[0, 0] == 0
    np.testing.assert_allclose(exo.flow(5.0), [0.7])


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtin_exosystems_marginal(name):
    exo = builtin(name).exo
    assert np.max(np.abs(np.linalg.eigvals(exo.S).real)) < 1e-10
    assert np.all(exo.s(np.zeros(exo.p)) == 0)
    orbit = exo.sample_orbit(50)
    assert np.all(orbit >= exo.region_lo - 1e-12) and np.all(orbit <= exo.region_hi + 1e-12)


def test_lq_scalar_arithmetic():
    _, obj = lq_problem([[-1.0]], [[1.0]], [[1.0]], [[1.0]], [[0.0]], 0.0)
    for key in ("T_xu", "T_xw", "R", "T"):
        np.testing.assert_allclose(obj.extras[key], [[1.0]])


def test_lq_singular_a():
    with pytest.raises(InvalidInput):
        lq_problem([[0.0]], [[1.0]], [[1.0]], [[1.0]], [[0.0]], 0.1)


def test_lq_positive_definite_r():
    rng = np.random.default_rng(4)
    for _ in range(20):
        A = rng.normal(size=(3, 3)) - 4 * np.eye(3)
        _, obj = lq_problem(A, rng.normal(size=(3, 2)), rng.normal(size=(3, 1)), np.eye(3), np.zeros((3, 1)), 0.05)
        assert np.min(np.linalg.eigvalsh(obj.extras["R"])) > 0


def test_lq_gradient_two_paths():
    problem = builtin("lq")
    R, T = problem.objective.extras["R"], problem.objective.extras["T"]
    u, w = _samples(problem, 30, 5)
    via_chain = reduced_gradient(problem.objective, u, w)
    np.testing.assert_allclose(via_chain, u @ R.T + w @ T.T, atol=1e-12)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_gradient_zero_at_equilibrium(name):
    problem = builtin(name)
    g = problem.gradient(problem.plant.u_eq, np.zeros(problem.p))
    assert np.abs(g).max() < 1e-12


def test_example5_gradient_and_conditions():
    problem = scalar_example5()
    for w in (-0.3, 0.0, 0.9):
        assert problem.gradient([-w], [w])[0] == 0
    assert check_necessary_conditions(problem.linearization()).all_pass


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_steady_state_map_is_equilibrium(name):
    problem = builtin(name)
    u, w = _samples(problem, 100, 6)
    x = problem.objective.steady_state(u, w)
    res = problem.plant.f(x, u, w)
    assert np.abs(res).max() < 1e-8 * (1 + np.abs(problem.linearization().P).max())


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_reduced_gradient_matches_finite_difference(name):
    problem = builtin(name)
    obj = problem.objective
    u, w = _samples(problem, 40, 7)
    for ui, wi in zip(u, w):
        g = problem.gradient(ui, wi)
        fd = np.empty_like(ui)
        for k in range(ui.size):
            h = 1e-6 * (1 + abs(ui[k]))
            e = np.zeros_like(ui)
            e[k] = h
            fd[k] = (obj.phi(ui + e, wi) - obj.phi(ui - e, wi)) / (2 * h)
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize("name", ["lq", "pendulum-quadratic", "pendulum-logistic"])
def test_loss_midpoint_convexity_in_x(name):
    problem = builtin(name)
    rng = np.random.default_rng(8)
    obj = problem.objective
    for _ in range(50):
        u1, u2 = rng.normal(size=(2, problem.m))
        x1, x2 = rng.normal(size=(2, problem.n))
        mid = obj.phi0(0.5 * (u1 + u2), 0.5 * (x1 + x2))
        assert mid <= 0.5 * (obj.phi0(u1, x1) + obj.phi0(u2, x2)) + 1e-12


def test_reduced_gradient_domain_error():
    problem = builtin("pendulum-quadratic")
    with pytest.raises(DomainError):
        reduced_gradient(problem.objective, np.zeros(1), np.array([1.0, 0, 0, 0]))


def test_fd_jacobians_recover_lq():
    problem = builtin("lq")
    fd = finite_difference_jacobians(problem)
    an = problem.linearization()
    for k in ("A", "B", "P", "C", "Q", "R", "T"):
        np.testing.assert_allclose(getattr(fd, k), getattr(an, k), atol=1e-6)


def test_fd_jacobians_pendulum_origin():
    problem = builtin("pendulum-quadratic")
    fd = finite_difference_jacobians(problem)
    an = problem.linearization()
    for k in ("A", "B", "P", "C", "Q"):
        M = getattr(an, k)
        assert np.allclose(getattr(fd, k), M, rtol=1e-5, atol=1e-5 * (1 + np.abs(M).max()))


def _zero_problem():
    base = builtin("lq")
    plant = PlantModel(n=2, m=1, q=2, p=2, f=lambda x, u, w: 0 * x, c=lambda x, w: 0 * x,
                       x_eq=np.zeros(2), u_eq=np.zeros(1))
    return Problem("zero", plant, base.exo, base.objective)


def test_fd_jacobians_zero_map():
    fd = finite_difference_jacobians(_zero_problem())
    for k in ("A", "B", "P", "C", "Q"):
        assert np.all(getattr(fd, k) == 0)


def test_fd_jacobians_nan():
    base = builtin("lq")
    plant = PlantModel(n=2, m=1, q=2, p=2, f=lambda x, u, w: np.full_like(x, np.nan), c=lambda x, w: x,
                       x_eq=np.zeros(2), u_eq=np.zeros(1))
    with pytest.raises(NumericalFailure):
        finite_difference_jacobians(Problem("bad", plant, base.exo, base.objective))


def test_lagrangian_identity_without_constraints():
    obj = builtin("lq").objective
    assert lagrangian_augment(obj) is obj


def test_lagrangian_kkt_on_affine_lq():
    A = [[-1.0, 0.2, 0.0], [0.0, -2.0, 0.3], [0.1, 0.0, -1.5]]
    B = [[1.0, 0.0], [0.0, 1.0], [0.5, -0.5]]
    problem = lq_instance(A, B, np.eye(3)[:, :2], np.eye(3), np.zeros((3, 2)), 0.2)
    R, T = problem.objective.extras["R"], problem.objective.extras["T"]
    a = np.array([1.0, 2.0])
    c = np.array([0.3, -0.7])
    aug = lagrangian_augment(problem.objective, lambda u, w: (u @ a - w @ c)[..., None], r=1,
                             constraint_jacobian=lambda u, w: a[None, :])
    w = np.array([0.4, -1.1])
    # Direct KKT solve: [R a; a^T 0][u; l] = [-T w; c^T w].
    M = np.block([[R, a[:, None]], [a[None, :], np.zeros((1, 1))]])
    sol = np.linalg.solve(M, np.concatenate([-T @ w, [c @ w]]))
    g = aug.gradient(sol, w)
    assert np.abs(g).max() < 1e-12
    off = sol + np.array([1e-3, 0.0, 0.0])
    assert np.abs(aug.gradient(off, w)).max() > 1e-4
    # The multiplier block is exactly the constraint value.
    u = np.array([0.2, 0.5])
    assert aug.gradient(np.concatenate([u, [3.0]]), w)[-1] == u @ a - w @ c


def test_lagrangian_needs_constraint_map():
    with pytest.raises(InvalidInput):
        lagrangian_augment(builtin("lq").objective, None, r=1)


def test_builtin_equilibria():
    for name in BUILTIN_NAMES:
        assert builtin(name).check_equilibrium() < 1e-10


def test_unknown_builtin():
    with pytest.raises(InvalidInput):
        builtin("nope")
