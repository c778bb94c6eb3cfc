import math
from types import SimpleNamespace

import numpy as np
import pytest

from rpisynth import io
from rpisynth.certification import certify, finite_step_bound, one_step_worst_case
from rpisynth.closed_loop import GainSchedule, build_grids
from rpisynth.errors import RankDeficientL, ZeroRho
from rpisynth.plant import LpvProblem, augment
from rpisynth.polyhedra import HPolyhedron, check_containment
from rpisynth.polytope_algebra import BlockGrid


@pytest.fixture(scope="module")
def theta1():
    return io.load_fixture("example1_lti_theta1_solution.json")


@pytest.fixture(scope="module")
def lpv_solution():
    return io.load_fixture("example1_lpv_solution.json")


def _certify(problem, sol, **kw):
    return certify(problem, sol["gains"], sol["L"], sol["rho"], eps1=sol["eps1"],
                   gammas=sol["gammas"], psis=sol["psis"], **kw)


def test_published_design_certifies_at_loose_tolerance(ex2, ex2_solution):
    cert = _certify(ex2, ex2_solution, tol=1e-2)
    assert cert.certified
    assert cert.lam_star < 1.0
    assert cert.lam_star == pytest.approx(ex2_solution["lam"], abs=1e-5)
    assert cert.k_tilde == 674
    assert cert.du_margin > 0


def test_published_design_fails_at_tight_tolerance(ex2, ex2_solution):
    cert = _certify(ex2, ex2_solution, tol=1e-9)
    assert not cert.certified
    conds = {f[0] for f in cert.failures}
    assert "inner" in conds
    assert cert.inner_excess == pytest.approx(2.46e-4, rel=0.05)  # effect of 5-decimal rounding


def test_own_design_certifies_tightly(ex1, theta1):
    cert = _certify(ex1, theta1, tol=1e-6)
    assert cert.certified
    assert max(cert.residual.values()) <= 1e-6
    assert cert.containment.contained


def test_scaled_gains_violate_rate_condition(ex1_lpv, lpv_solution):
    assert _certify(ex1_lpv, lpv_solution, tol=1e-6).certified
    bad = dict(lpv_solution, gains=lpv_solution["gains"].scaled(10.0))
    cert = _certify(ex1_lpv, bad, tol=1e-6)
    assert not cert.certified
    assert "rate" in {f[0] for f in cert.failures}


def test_rank_deficient_shape_rejected(ex1, theta1):
    L = np.hstack([theta1["L"][:, :2], np.zeros((theta1["L"].shape[0], 1))])
    with pytest.raises(RankDeficientL):
        certify(ex1, theta1["gains"], L, theta1["rho"])


def test_finite_step_bound_examples(ex2_solution):
    assert finite_step_bound(np.eye(2), np.ones(2), 0.995) == 0
    # eta = 20 from rho = 1/20
    assert finite_step_bound(np.eye(2), [0.05, 1.0], 0.995) == math.ceil(
        math.log(1 / 20) / math.log(0.995)) == 598
    rho = ex2_solution["rho"]
    assert 1 / rho.min() == pytest.approx(29.28, abs=0.01)
    assert finite_step_bound(ex2_solution["L"], rho, 0.995) == 674
    with pytest.raises(ZeroRho):
        finite_step_bound(np.eye(2), [0.0, 1.0], 0.995)


def test_scalar_contraction_one_step():
    grids = SimpleNamespace(n_v=1, Acl=BlockGrid([[[[0.5]]]]), Bcl=BlockGrid([[[[0.0]]]]))
    rep = one_step_worst_case(grids, [[1.0], [-1.0]], [1.0, 1.0], 0.5, [[1.0], [-1.0]])
    assert rep.worst_outer == pytest.approx(0.5)
    assert rep.holds(1e-12)
    assert not one_step_worst_case(grids, [[1.0], [-1.0]], [1.0, 1.0], 0.49,
                                   [[1.0], [-1.0]]).holds(1e-12)


def test_one_step_path_agrees_on_published_design(ex2, ex2_solution):
    cert = _certify(ex2, ex2_solution, tol=1e-2)
    aug = augment(ex2)
    rep = one_step_worst_case(build_grids(aug, ex2_solution["gains"]), ex2_solution["L"],
                              ex2_solution["rho"], cert.lam_star, aug.Dbig)
    assert rep.holds(1e-2)
    assert rep.worst_outer <= cert.lam_star + 1e-2
    assert rep.worst_outer == pytest.approx(cert.lam_star, abs=1e-6)
    assert rep.inner_excess == pytest.approx(cert.inner_excess, abs=1e-6)


def test_certify_agrees_with_multiplier_free_check(ex1, theta1):
    aug = augment(ex1)
    outer_ok = check_containment(HPolyhedron(theta1["L"]), aug.Xi, tol=1e-6).contained
    r = np.random.default_rng(0)
    g = theta1["gains"]
    verdicts = []
    for _ in range(50):
        s = r.choice([0.0, 1e-4, 1e-2, 0.1])
        gains = GainSchedule(g.K + s * r.normal(size=g.K.shape),
                             g.Kbar + s * r.normal(size=g.Kbar.shape),
                             g.Khat + s * r.normal(size=g.Khat.shape))
        rho = np.clip(theta1["rho"] * r.uniform(0.9, 1.5), 0.0, 1.0)
        cert = certify(ex1, gains, theta1["L"], rho, tol=1e-6)
        rep = one_step_worst_case(build_grids(aug, gains), theta1["L"], rho, 1.0, aug.Dbig)
        direct = rep.worst_outer < 1.0 and rep.inner_excess <= 1e-6 and outer_ok
        assert cert.certified == direct
        verdicts.append(cert.certified)
    assert 5 < sum(verdicts) < 45


def test_smaller_disturbances_keep_certificate(ex1, theta1):
    base = _certify(ex1, theta1, tol=1e-6)
    small = LpvProblem(ex1.A, ex1.B, ex1.Bp, ex1.C, ex1.Deta, ex1.X, ex1.U, ex1.Udelta,
                       ex1.P * 2.0, ex1.N * 2.0)
    cert = _certify(small, theta1, tol=1e-6)
    assert cert.certified
    assert cert.lam_star <= base.lam_star + 1e-9
    assert cert.inner_excess <= base.inner_excess + 1e-9


def test_summary_round_trips_through_json(ex1, theta1):
    import json
    s = _certify(ex1, theta1).summary()
    assert json.loads(json.dumps(s)) == s
