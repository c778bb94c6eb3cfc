import numpy as np
import pytest

from rpisynth.closed_loop import (
    GainSchedule, build_grids, closed_loop_matrices, control_law_step, step_closed_loop,
)
from rpisynth.plant import augment
from rpisynth.polytope_algebra import Simplex

THETA1_GAINS = GainSchedule([[[0.0]]], [[[-1.0]]], [[[-0.75]]])


def random_gains(problem, r, scale=0.3):
    n_v, n_u, n_y = problem.n_v, problem.n_u, problem.n_y
    return GainSchedule(scale * r.normal(size=(n_v, n_u, n_y)),
                        scale * r.normal(size=(n_v, n_u, n_u)),
                        scale * r.normal(size=(n_v, n_u, n_y)))


def test_hand_evaluated_block(ex1):
    grids = build_grids(augment(ex1), THETA1_GAINS)
    np.testing.assert_allclose(grids.Acl.blocks[0, 0],
                               [[1, 1, 2], [0, 1, 1], [-0.75, -0.75, -1.5]], atol=1e-15)


def test_zero_gains_give_open_loop(ex2):
    aug = augment(ex2)
    grids = build_grids(aug, GainSchedule.zeros(4, ex2.n_u, ex2.n_y))
    for j in range(4):
        for i in range(4):
            np.testing.assert_array_equal(grids.Acl.blocks[j, i], aug.Aaug[i])
    assert not np.any(grids.Bdu.blocks)


def test_example2_grid_shapes(ex2, ex2_solution):
    grids = build_grids(augment(ex2), ex2_solution["gains"])
    assert grids.Acl.blocks.shape == (4, 4, 3, 3)
    # the disturbance block has n_d = n_p + 2 n_eta = 5 columns; 10 is the row count of its set
    assert grids.Bcl.blocks.shape == (4, 4, 3, ex2.n_d) == (4, 4, 3, 5)
    assert augment(ex2).l_d == 10


def test_grid_sandwich_matches_direct_evaluation(ex2, rng):
    gains = random_gains(ex2, rng)
    grids = build_grids(augment(ex2), gains)
    for _ in range(25):
        a, ap = Simplex.random(4, rng), Simplex.random(4, rng)
        Acl, Bcl, Adu, Bdu = closed_loop_matrices(ex2, gains, a, ap)
        np.testing.assert_allclose(grids.Acl.evaluate(ap, a), Acl, atol=1e-12)
        np.testing.assert_allclose(grids.Bcl.evaluate(ap, a), Bcl, atol=1e-12)
        np.testing.assert_allclose(grids.Adu.evaluate(ap, a), Adu, atol=1e-12)


def test_equilibrium(ex1):
    grids = build_grids(augment(ex1), THETA1_GAINS)
    nxt, du = step_closed_loop(grids, np.zeros(3), np.zeros(ex1.n_d), [1.0], [1.0])
    assert not np.any(nxt) and not np.any(du)


def test_hand_computed_step(ex1):
    grids = build_grids(augment(ex1), THETA1_GAINS)
    nxt, du = step_closed_loop(grids, np.array([0.1, 0.0, 0.0]), np.zeros(ex1.n_d), [1.0], [1.0])
    np.testing.assert_allclose(nxt, [0.1, 0.0, -0.075], atol=1e-15)
    np.testing.assert_allclose(du, [-0.075], atol=1e-15)


def test_control_law_examples():
    zero = GainSchedule.zeros(1, 1, 1)
    assert control_law_step(zero, [0.3], [1.0], [2.0], [1.0], [1.0])[0] == 0.3
    assert control_law_step(THETA1_GAINS, [0.0], [0.0], [1.0], [1.0], [1.0])[0] == pytest.approx(-0.75)


@pytest.mark.parametrize("fixture", ["ex1_lpv", "ex2"])
def test_output_law_reproduces_state_space_rollout(fixture, request, rng):
    """Iterating the deployable law on measured outputs gives the same inputs."""
    prob = request.getfixturevalue(fixture)
    gains = random_gains(prob, rng, scale=0.1)
    grids = build_grids(augment(prob), gains)
    n_x, n_u = prob.n_x, prob.n_u
    x = rng.normal(size=n_x)
    u = np.zeros(n_u)
    alpha = Simplex.random(prob.n_v, rng)
    eta = rng.uniform(-0.1, 0.1, prob.n_eta)
    y = prob.C @ x + prob.Deta @ eta
    # u_0 from the law at k = 0 (zero history)
    u = control_law_step(gains, np.zeros(n_u), np.zeros(prob.n_y), y, alpha, alpha)
    xi = np.concatenate([x, u])
    y_prev, a_prev = y, alpha
    for _ in range(30):
        ap = Simplex.random(prob.n_v, rng)
        p = rng.uniform(-0.1, 0.1, prob.n_p)
        eta_next = rng.uniform(-0.1, 0.1, prob.n_eta)
        xi_next, _ = step_closed_loop(grids, xi, np.concatenate([p, eta, eta_next]), a_prev, ap)
        y_now = prob.C @ xi_next[:n_x] + prob.Deta @ eta_next
        u_law = control_law_step(gains, xi[n_x:], y_prev, y_now, a_prev, ap)
        np.testing.assert_allclose(xi_next[n_x:], u_law, atol=1e-10)
        xi, eta, y_prev, a_prev = xi_next, eta_next, y_now, ap


def test_gain_shape_checks(ex2):
    with pytest.raises(ValueError):
        GainSchedule(np.zeros((2, 1, 1)), np.zeros((1, 1, 1)), np.zeros((2, 1, 1)))
    with pytest.raises(ValueError):
        GainSchedule.zeros(2, 1, 1).check_against(ex2)
