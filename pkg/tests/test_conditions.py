import numpy as np
import pytest

from rpisynth.certification import certify
from rpisynth.closed_loop import GainSchedule
from rpisynth.conditions import (
    CandidateSolution, pair_block, residuals, residuals_vertex_pair_form,
)
from rpisynth.errors import InvalidDimension
from rpisynth.plant import augment


@pytest.fixture(scope="module")
def ex2_candidate(ex2, ex2_solution):
    s = ex2_solution
    return certify(ex2, s["gains"], s["L"], s["rho"], tol=1e-2).candidate


def assert_same_report(a, b, atol=1e-10):
    assert a.values.keys() == b.values.keys()
    for k in a.values:
        assert a.values[k] == pytest.approx(b.values[k], abs=atol), k


def random_candidate(problem, r, l_r=6):
    n_v, n_xi = problem.n_v, problem.n_xi
    l_d = augment(problem).l_d
    l_xi = augment(problem).l_xi
    gains = GainSchedule(0.3 * r.normal(size=(n_v, problem.n_u, problem.n_y)),
                         0.3 * r.normal(size=(n_v, problem.n_u, problem.n_u)),
                         0.3 * r.normal(size=(n_v, problem.n_u, problem.n_y)))
    Q = T = None
    if problem.Udelta is not None:
        l_du = problem.Udelta.shape[0]
        Q = r.uniform(-0.01, 0.2, (n_v * l_du, n_v * l_r))
        T = r.uniform(-0.01, 0.2, (n_v * l_du, n_v * l_d))
    return CandidateSolution(
        L=r.normal(size=(l_r, n_xi)), rho=r.uniform(-0.05, 1.05, l_r), lam=r.uniform(0.5, 1.1),
        eps1=0.995, gains=gains,
        H=r.uniform(-0.01, 0.3, (n_v * l_r, n_v * l_r)),
        V=r.uniform(-0.01, 0.3, (n_v * l_r, n_v * l_d)),
        G=r.uniform(-0.01, 0.3, (l_xi, l_r)), Q=Q, T=T,
    )


def test_published_design_feasible_at_loose_tolerance(ex2, ex2_candidate):
    rep = residuals(ex2, ex2_candidate)
    assert rep.ok(1e-2)
    assert rep.max_equality < 1e-8  # recovered multipliers solve the equalities


def test_perturbed_shape_breaks_invariance_equality(ex2, ex2_candidate):
    L = ex2_candidate.L.copy()
    L[3, 1] += 0.1
    bad = CandidateSolution(L, ex2_candidate.rho, ex2_candidate.lam, ex2_candidate.eps1,
                            ex2_candidate.gains, ex2_candidate.H, ex2_candidate.V,
                            ex2_candidate.G, ex2_candidate.Q, ex2_candidate.T)
    assert residuals(ex2, bad).values["eq:invariance"] > 1e-3


def test_pair_form_matches_big_form_on_published_design(ex2, ex2_candidate):
    big = residuals(ex2, ex2_candidate)
    pair = residuals_vertex_pair_form(ex2, ex2_candidate)
    assert_same_report(big, pair)
    j, i = pair.worst_pair
    assert 0 <= j < 4 and 0 <= i < 4


def test_single_vertex_forms_identical(ex1):
    r = np.random.default_rng(4)
    cand = random_candidate(ex1, r)
    assert residuals(ex1, cand).values == residuals_vertex_pair_form(ex1, cand).values


@pytest.mark.parametrize("fixture", ["ex1_lpv", "ex2"])
def test_forms_agree_on_random_candidates(fixture, request):
    prob = request.getfixturevalue(fixture)
    r = np.random.default_rng(21)
    for _ in range(10):
        cand = random_candidate(prob, r)
        a, b = residuals(prob, cand), residuals_vertex_pair_form(prob, cand)
        assert_same_report(a, b)
        for tol in (1e-6, 1e-1, 10.0):
            assert a.ok(tol) == b.ok(tol)


def test_pair_block_extracts_blocks():
    M = np.arange(36.0).reshape(6, 6)
    np.testing.assert_array_equal(pair_block(M, 1, 2, 2, 2, 3), M[2:4, 4:6])


def test_left_inverse_defaults_to_pseudo_inverse():
    L = np.vstack([np.eye(3), -np.eye(3)])
    cand = CandidateSolution(L, np.ones(6), 0.9, 0.995, GainSchedule.zeros(1, 1, 1),
                             np.zeros((6, 6)), np.zeros((6, 1)), np.zeros((1, 6)))
    np.testing.assert_allclose(cand.J @ L, np.eye(3), atol=1e-12)
    with pytest.raises(InvalidDimension):
        CandidateSolution(L, np.ones(5), 0.9, 0.995, GainSchedule.zeros(1, 1, 1),
                          np.zeros((6, 6)), np.zeros((6, 1)), np.zeros((1, 6)))


def test_rate_problem_needs_rate_multipliers(ex1_lpv):
    cand = random_candidate(ex1_lpv, np.random.default_rng(1))
    cand.Q = None
    with pytest.raises(InvalidDimension):
        residuals(ex1_lpv, cand)
