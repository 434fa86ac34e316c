import math

import numpy as np
import pytest

from feedopt import pipeline, scenario
from feedopt.errors import Diverged, InvalidInput
from feedopt.pipeline import linear_manifold
from feedopt.problems import builtin
from feedopt.regulator import (
    baseline_linear_gradient_controller,
    closed_loop_matrix,
    design_gains,
    steady_state_gradient_amplitude,
)
from feedopt.simulate import ClosedLoop, integrate, local_stability_check, loop_jacobian, metrics
from feedopt.synthesis import (
    StaticLaw,
    baseline_gradient_flow,
    static_output_feedback,
    synthesize_dynamic,
    synthesize_static,
)


def _lq_dynamic():
    problem = builtin("lq")
    K, L1, L2 = design_gains(problem.linearization())
    return problem, synthesize_dynamic(problem, linear_manifold(problem), K, L1, L2)


def test_exosystem_returns_after_one_period():
    problem, ctrl = _lq_dynamic()
    loop = ClosedLoop(problem, ctrl)
    steps = 6283
    traj = integrate(loop, loop.initial_state(), 2 * math.pi, step=2 * math.pi / steps, record_every=steps)
    assert np.abs(traj.w[-1] - problem.exo.w0).max() < 1e-8


def test_example5_matches_closed_form():
    problem = builtin("example5")
    loop = ClosedLoop(problem, static_output_feedback(problem, [[1.0]]))
    assert loop.wiring == "output-feedback" and loop.dim == 2
    w = 0.25
    traj = integrate(loop, loop.initial_state([0.0], None, [w]), 20.0)
    x_exact = w + (0.0 - w) * np.exp(-traj.t)
    assert np.abs(traj.x[:, 0] - x_exact).max() < 1e-8
    g_exact = -2.0 * (0.0 - w) * np.exp(-traj.t)
    assert np.abs(traj.g[:, 0] - g_exact).max() < 1e-8
    met = metrics(traj, tol=1e-7)
    assert met.settled and met.tail_sup_g <= 1e-7
    assert met.rate_fit == pytest.approx(1.0, rel=0.05)


def test_equilibrium_is_stationary():
    problem, ctrl = _lq_dynamic()
    loop = ClosedLoop(problem, ctrl)
    s0 = loop.equilibrium()
    traj = integrate(loop, s0, 5.0)
    assert np.abs(traj.table()[:, 1:]).max() <= 1e-12


def test_static_law_wiring():
    problem = builtin("lq")
    K, _, _ = design_gains(problem.linearization())
    loop = ClosedLoop(problem, synthesize_static(problem, linear_manifold(problem), K))
    assert loop.wiring == "state-feedback" and loop.dim == problem.n + problem.p
    traj = integrate(loop, loop.initial_state(), 30.0)
    assert metrics(traj, tol=1e-8).settled


def test_gradient_single_code_path():
    problem, ctrl = _lq_dynamic()
    traj = integrate(ClosedLoop(problem, ctrl), ClosedLoop(problem, ctrl).initial_state(), 3.0)
    assert np.array_equal(traj.g, problem.gradient(traj.u, traj.w))
    assert np.all(np.diff(traj.t) > 0)


def test_rate_fit_matches_slowest_pole():
    problem, ctrl = _lq_dynamic()
    loop = ClosedLoop(problem, ctrl)
    lin = problem.linearization()
    A_c, B_c, C_c = ctrl.linear_matrices(problem.plant.y_eq)
    from feedopt.regulator import LinearController

    ev, V = np.linalg.eig(closed_loop_matrix(lin, LinearController(A_c, B_c, C_c)))
    k = int(np.argmax(ev.real))
    v = np.real(V[:, k]) * 0.5 / np.abs(np.real(V[:, k])).max()
    s0 = np.concatenate([v, np.zeros(problem.p)])
    traj = integrate(loop, s0, 12.0, step=2e-3)
    assert metrics(traj).rate_fit == pytest.approx(-ev[k].real, rel=0.2)


def test_rate_fit_absent_without_two_decades():
    problem = builtin("lq")
    loop = ClosedLoop(problem, baseline_gradient_flow(problem, 1.0))
    traj = integrate(loop, loop.initial_state(), 10.0)
    assert metrics(traj).rate_fit is None


def test_baseline_floor_matches_frequency_response():
    problem = builtin("lq")
    lin = problem.linearization()
    loop = ClosedLoop(problem, baseline_gradient_flow(problem, 1.0))
    traj = integrate(loop, loop.initial_state(), 40.0)
    met = metrics(traj, tol=1e-6)
    amp = steady_state_gradient_amplitude(lin, baseline_linear_gradient_controller(lin, 1.0), 1.0, [1.0, 1j])
    assert not met.settled
    assert met.tail_sup_g == pytest.approx(amp, rel=0.02)


def test_state_tail_on_manifold():
    problem, ctrl = _lq_dynamic()
    loop = ClosedLoop(problem, ctrl)
    traj = integrate(loop, loop.initial_state(), 30.0, step=2e-3)
    met = metrics(traj, tol=1e-8, pi=ctrl.manifold.pi)
    assert met.settled and met.state_tail < 1e-8


@pytest.fixture(scope="module")
def pendulum_loop():
    sc = scenario.load("pendulum-quadratic")
    syn = pipeline.synthesize(sc)
    return sc, ClosedLoop(syn.problem, syn.controller)


def test_rk4_fourth_order_on_pendulum(pendulum_loop):
    sc, loop = pendulum_loop
    s0 = scenario.initial_state(sc, loop)
    ref = integrate(loop, s0, 1.0, method="adaptive", rtol=1e-12, atol=1e-14, record_every=1000)
    errs = []
    for h in (4e-3, 2e-3, 1e-3):
        tr = integrate(loop, s0, 1.0, step=h, record_every=int(round(1 / h)))
        errs.append(np.linalg.norm(tr.table()[-1, 1:] - ref.table()[-1, 1:]))
    for a, b in zip(errs, errs[1:]):
        assert 16 / 1.5 <= a / b <= 16 * 1.5


def test_adaptive_matches_rk4():
    problem, ctrl = _lq_dynamic()
    loop = ClosedLoop(problem, ctrl)
    a = integrate(loop, loop.initial_state(), 5.0, method="adaptive")
    b = integrate(loop, loop.initial_state(), 5.0)
    np.testing.assert_allclose(a.t, b.t)
    assert np.abs(a.table() - b.table()).max() < 1e-7


def test_divergence_carries_partial_data():
    problem = builtin("pendulum-quadratic")
    law = StaticLaw(K=np.zeros((1, 2)), pi=linear_manifold(problem).pi, gamma=linear_manifold(problem).gamma)
    loop = ClosedLoop(problem, law)
    with pytest.raises(Diverged) as exc:
        integrate(loop, loop.initial_state(), 30.0, bound=50.0)
    part = exc.value.partial
    assert part is not None and 0 < len(part.t) and part.t[-1] < 30.0
    assert exc.value.exit_code == 4


def test_integrate_rejects_bad_inputs():
    problem, ctrl = _lq_dynamic()
    loop = ClosedLoop(problem, ctrl)
    with pytest.raises(InvalidInput):
        integrate(loop, np.zeros(3), 1.0)
    with pytest.raises(InvalidInput):
        integrate(loop, loop.initial_state(), 1.0, step=0.0)
    with pytest.raises(InvalidInput):
        integrate(loop, loop.initial_state(), 1.0005, step=1e-3)


def test_csv_header_and_values():
    problem, ctrl = _lq_dynamic()
    loop = ClosedLoop(problem, ctrl)
    traj = integrate(loop, loop.initial_state(), 0.1)
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,x1,x2,z1,z2,z3,z4,w1,w2,u1,y1,y2,g1"
    assert len(lines) == len(traj.t) + 1
    np.testing.assert_array_equal(np.array(lines[-1].split(","), float), traj.table()[-1])


def test_local_stability_linear_instance():
    problem, ctrl = _lq_dynamic()
    rep = local_stability_check(ClosedLoop(problem, ctrl), eps=0.05, trials=4, horizon=10.0, step=2e-3)
    assert rep.max_real_eig < 0 and rep.all_decay and rep.locally_stable


def test_local_stability_parallel_is_deterministic():
    problem, ctrl = _lq_dynamic()
    loop = ClosedLoop(problem, ctrl)
    a = local_stability_check(loop, trials=4, horizon=2.0, step=2e-3, workers=1)
    b = local_stability_check(loop, trials=4, horizon=2.0, step=2e-3, workers=3)
    assert a.contraction == b.contraction


def test_local_stability_pendulum_dynamic(pendulum_loop):
    _, loop = pendulum_loop
    assert np.max(np.linalg.eigvals(loop_jacobian(loop)).real) < 0
    # The linearization amplifies transients about 1e4-fold, so the
    # perturbations are kept well inside the linear regime.
    rep = local_stability_check(loop, eps=1e-7, trials=2, horizon=25.0, step=2e-3, workers=2)
    assert rep.locally_stable


def test_unstabilized_pendulum_detected():
    problem = builtin("pendulum-quadratic")
    man = linear_manifold(problem)
    loop = ClosedLoop(problem, StaticLaw(K=np.zeros((1, 2)), pi=man.pi, gamma=man.gamma))
    rep = local_stability_check(loop, eps=0.05, trials=2, horizon=5.0)
    assert rep.max_real_eig > 0
    assert not rep.locally_stable
