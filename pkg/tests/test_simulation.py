import numpy as np
import pytest

from rpisynth import io
from rpisynth.closed_loop import control_law_step
from rpisynth.errors import InvalidConfig, SamplingFailure
from rpisynth.polyhedra import HPolyhedron, box
from rpisynth.simulation import (
    CHECK_TOL, ScenarioConfig, chebyshev_center, export_trajectory, hit_and_run,
    import_trajectory, rollout,
)


@pytest.fixture(scope="module")
def theta1():
    return io.load_fixture("example1_lti_theta1_solution.json")


def run(problem, sol, **kw):
    return rollout(problem, sol["gains"], sol["L"], sol["rho"], ScenarioConfig(**kw))


def test_origin_stays_at_rest(ex1, theta1):
    summary = run(ex1, theta1, horizon=20, rollouts=2, init=np.zeros((1, 3)),
                  disturbance=np.zeros((1, 2)))
    for res in summary.results:
        assert not np.any(res.xi) and not np.any(res.du)
        assert res.entry == 0


def test_certified_design_has_no_violations(ex1, theta1):
    summary = run(ex1, theta1, horizon=200, rollouts=500, disturbance="extreme")
    assert summary.total_violations == 0
    assert summary.max_margin <= 1 + 1e-8
    assert summary.never_entered == 0


def test_published_design_respects_rate_bounds(ex2, ex2_solution):
    summary = run(ex2, ex2_solution, horizon=200, rollouts=50, alpha="vertex-hop",
                  disturbance="extreme")
    assert summary.violations["Udelta"] == 0
    du = np.concatenate([r.du for r in summary.results])
    assert np.all(np.abs(du) <= 2 + 1e-8)


@pytest.mark.parametrize("scenario", [dict(alpha="uniform", disturbance="uniform"),
                                      dict(alpha="vertex-hop", disturbance="uniform",
                                           init="hit-and-run")])
def test_random_scenarios_satisfy_certificate(ex1, theta1, scenario):
    summary = run(ex1, theta1, horizon=100, rollouts=50, **scenario)
    assert summary.total_violations == 0


def test_flags_recompute_from_trajectories(ex2, ex2_solution):
    L, rho = ex2_solution["L"], ex2_solution["rho"]
    summary = run(ex2, ex2_solution, horizon=60, rollouts=10)
    for res in summary.results:
        lvl = res.xi @ L.T
        np.testing.assert_array_equal(res.in_inner, np.all(lvl <= rho + CHECK_TOL, axis=1))
        assert res.margin == lvl.max()
        x_bad = np.sum(np.any(res.x @ ex2.X.T > 1 + CHECK_TOL, axis=1))
        assert res.violations["X"] == x_bad
        if res.entry is not None:
            assert not np.any(res.in_inner[:res.entry])


def test_inputs_match_deployable_law(ex1_lpv):
    sol = io.load_fixture("example1_lpv_solution.json")
    summary = run(ex1_lpv, sol, horizon=50, rollouts=5, alpha="uniform", disturbance="uniform")
    C, D = ex1_lpv.C, ex1_lpv.Deta
    for res in summary.results:
        y = res.x @ C.T + res.eta @ D.T
        for k in range(50):
            u_next = control_law_step(sol["gains"], res.u[k], y[k], y[k + 1],
                                      res.alpha[k], res.alpha[k + 1])
            np.testing.assert_allclose(res.u[k + 1], u_next, atol=1e-10)
            np.testing.assert_allclose(res.u[k + 1] - res.u[k], res.du[k], atol=1e-12)


def test_rollouts_reproducible_and_independent_of_count(ex1, theta1):
    a = run(ex1, theta1, horizon=30, rollouts=3, seed=5)
    b = run(ex1, theta1, horizon=30, rollouts=6, seed=5)
    for ra, rb in zip(a.results, b.results):
        np.testing.assert_array_equal(ra.xi, rb.xi)
    c = run(ex1, theta1, horizon=30, rollouts=3, seed=6)
    assert any(not np.array_equal(ra.xi, rc.xi) for ra, rc in zip(a.results, c.results))


def test_trajectory_csv(ex2, ex2_solution, tmp_path):
    one = run(ex2, ex2_solution, horizon=1, rollouts=1).results[0]
    path = tmp_path / "one.csv"
    export_trajectory(one, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,x1,x2,u1,du1,in_inner"
    assert len(lines) == 3

    res = run(ex2, ex2_solution, horizon=25, rollouts=1, alpha="uniform").results[0]
    export_trajectory(res, path)
    back = import_trajectory(path)
    np.testing.assert_array_equal(back["k"], np.arange(26))
    np.testing.assert_array_equal(np.column_stack([back["x1"], back["x2"]]), res.x)
    np.testing.assert_array_equal(back["u1"], res.u[:, 0])
    np.testing.assert_array_equal(back["du1"][:-1], res.du[:, 0])
    assert np.isnan(back["du1"][-1])
    np.testing.assert_array_equal(back["in_inner"].astype(bool), res.in_inner)


def test_hit_and_run_stays_inside():
    poly = box([-1, -2], [3, 1])
    center, radius = chebyshev_center(poly)
    assert radius == pytest.approx(1.5)
    pts = hit_and_run(poly, 500, np.random.default_rng(0))
    assert np.all(pts @ poly.P.T <= poly.phi + 1e-12)
    assert pts[:, 0].mean() == pytest.approx(1.0, abs=0.3)


def test_sampling_failure_on_unbounded_set():
    with pytest.raises(SamplingFailure):
        hit_and_run(HPolyhedron([[1.0, 0.0], [-1.0, 0.0]]), 5, np.random.default_rng(0))


def test_scenario_validation():
    with pytest.raises(InvalidConfig):
        ScenarioConfig(rollouts=0)
    with pytest.raises(InvalidConfig):
        ScenarioConfig(horizon=0)
    with pytest.raises(InvalidConfig):
        ScenarioConfig(alpha="sometimes")
