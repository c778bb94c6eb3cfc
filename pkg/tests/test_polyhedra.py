import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from rpisynth.errors import UnboundedSet, UnsupportedDimension
from rpisynth.polyhedra import (
    HPolyhedron, box, check_containment, enumerate_vertices, hull_volume, polygon, project,
    remove_redundant, volume, volume_mc,
)

EX1_STATE_BOX = box([-1.0, -1.0], [1.25, 1.0])


def random_polygon(r, k=None):
    k = k or int(r.integers(4, 9))
    # jittered equispaced normals: every angular gap stays below pi, so the set is bounded
    ang = np.linspace(0, 2 * np.pi, k, endpoint=False) + r.uniform(0, 0.9 * 2 * np.pi / k, k)
    P = np.column_stack([np.cos(ang), np.sin(ang)])
    return HPolyhedron(P, r.uniform(0.5, 1.5, k))


def random_bounded(r, n):
    P = np.vstack([np.eye(n), -np.eye(n), r.normal(size=(int(r.integers(1, 6)), n))])
    return HPolyhedron(P, r.uniform(0.5, 2.0, P.shape[0]))


def brute_force_contained(inner, outer):
    V = enumerate_vertices(inner)
    return bool(np.all(V @ outer.P.T <= outer.phi + 1e-9))


def test_identity_multiplier_for_equal_sets():
    sq = box([-1, -1], [1, 1])
    cert = check_containment(sq, sq)
    assert cert.contained
    np.testing.assert_allclose(cert.Q @ sq.P, sq.P, atol=1e-12)
    assert np.all(cert.Q @ sq.phi <= sq.phi + 1e-12)


def test_unit_box_in_double_box():
    unit = HPolyhedron(np.vstack([np.eye(2), -np.eye(2)]))
    double = HPolyhedron(np.vstack([np.eye(2), -np.eye(2)]) / 2)
    cert = check_containment(unit, double)
    assert cert.contained
    np.testing.assert_allclose(cert.Q, 0.5 * np.eye(4), atol=1e-12)
    assert not check_containment(double, unit).contained


def test_containment_matches_vertex_brute_force():
    r = np.random.default_rng(3)
    verdicts = []
    for _ in range(100):
        outer = random_polygon(r)
        inner = random_polygon(r)
        inner = HPolyhedron(inner.P, inner.phi * r.uniform(0.2, 1.2))
        cert = check_containment(inner, outer)
        assert cert.contained == brute_force_contained(inner, outer)
        verdicts.append(cert.contained)
        if cert.contained:
            assert np.all(cert.Q >= -1e-12)
            np.testing.assert_allclose(cert.Q @ inner.P, outer.P, atol=1e-8)
            assert np.all(cert.Q @ inner.phi <= outer.phi + 1e-8)
    assert 10 < sum(verdicts) < 90  # both outcomes exercised


def test_unit_square_vertices_and_volume():
    sq = box([-1, -1], [1, 1])
    V = enumerate_vertices(sq)
    assert {tuple(v) for v in V} == {(-1, -1), (-1, 1), (1, -1), (1, 1)}
    assert volume(sq) == pytest.approx(4.0, abs=1e-12)


def test_state_box_vertices_and_area():
    V = enumerate_vertices(EX1_STATE_BOX)
    assert {tuple(np.round(v, 12)) for v in V} == {(-1, -1), (-1, 1), (1.25, -1), (1.25, 1)}
    assert volume(EX1_STATE_BOX) == pytest.approx(4.5, abs=1e-12)


def exact_vertices(P, phi):
    """Vertices by exact rational elimination over all row triples."""
    Pf = [[Fraction(x) for x in row] for row in P]
    phif = [Fraction(x) for x in phi]
    n = len(Pf[0])
    found = set()
    for rows in itertools.combinations(range(len(Pf)), n):
        M = [Pf[r][:] + [phif[r]] for r in rows]
        ok = True
        for c in range(n):
            piv = next((k for k in range(c, n) if M[k][c] != 0), None)
            if piv is None:
                ok = False
                break
            M[c], M[piv] = M[piv], M[c]
            for k in range(n):
                if k != c and M[k][c] != 0:
                    f = M[k][c] / M[c][c]
                    M[k] = [a - f * b for a, b in zip(M[k], M[c])]
        if not ok:
            continue
        x = [M[k][n] / M[k][k] for k in range(n)]
        if all(sum(a * b for a, b in zip(row, x)) <= rhs for row, rhs in zip(Pf, phif)):
            found.add(tuple(x))
    return found


def test_vertex_count_matches_exact_arithmetic():
    r = np.random.default_rng(5)
    for _ in range(10):
        # Rounded data are exactly representable, so the rational recount is exact.
        poly = random_bounded(r, 3)
        P, phi = np.round(poly.P, 3), np.round(poly.phi, 3)
        assert len(enumerate_vertices(HPolyhedron(P, phi))) == len(exact_vertices(P, phi))


def test_simplex_volume_matches_determinant():
    r = np.random.default_rng(9)
    for _ in range(10):
        V = r.normal(size=(4, 3))
        V -= V.mean(axis=0)  # origin strictly inside
        hull = ConvexHull(V)
        poly = HPolyhedron(hull.equations[:, :3], -hull.equations[:, 3])
        expected = abs(np.linalg.det(V[1:] - V[0])) / math.factorial(3)
        assert volume(poly) == pytest.approx(expected, rel=1e-9)


def test_monte_carlo_volume_in_four_dimensions():
    cube = box(-np.ones(4), np.ones(4))
    est, err = volume_mc(cube, samples=20_000, seed=1)
    assert est == pytest.approx(16.0)
    assert err == pytest.approx(0.0)
    cross = HPolyhedron(np.array(list(itertools.product([-1, 1], repeat=4)), dtype=float))
    est, err = volume_mc(cross, samples=200_000, seed=1)
    assert abs(est - 16 / 24) < 5 * err + 1e-3


def test_geometry_limited_to_four_dimensions():
    with pytest.raises(UnsupportedDimension):
        enumerate_vertices(box(-np.ones(5), np.ones(5)))


def test_unbounded_set_detected():
    half = HPolyhedron([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    assert not half.is_bounded()
    with pytest.raises(UnboundedSet):
        enumerate_vertices(half)


def test_support_and_bounding_box():
    lo, up = EX1_STATE_BOX.bounding_box()
    np.testing.assert_allclose(lo, [-1, -1], atol=1e-9)
    np.testing.assert_allclose(up, [1.25, 1], atol=1e-9)
    assert EX1_STATE_BOX.support([1.0, 1.0]) == pytest.approx(2.25)


def test_remove_redundant_drops_implied_rows():
    P = np.vstack([np.eye(2), -np.eye(2), [[1.0, 1.0]], [[1.0, 0.0]]])
    reduced = remove_redundant(HPolyhedron(P, [1, 1, 1, 1, 5, 2]))
    assert reduced.n_rows == 4


def test_project_cube_onto_square():
    sq = project(box(-np.ones(3), np.ones(3)), [0, 1])
    assert volume(sq) == pytest.approx(4.0, abs=1e-9)


def test_projection_matches_hull_of_projected_vertices():
    r = np.random.default_rng(11)
    for _ in range(10):
        poly = random_bounded(r, 3)
        proj = project(poly, [0, 2])
        expected = hull_volume(enumerate_vertices(poly)[:, [0, 2]])
        assert volume(proj) == pytest.approx(expected, rel=1e-7)


def test_published_outer_set_projection_area(ex2_solution):
    poly = HPolyhedron(ex2_solution["L"])
    assert hull_volume(polygon(project(poly, [0, 1]))) == pytest.approx(99.5904, rel=1e-2)


def test_polygon_is_counter_clockwise():
    V = polygon(random_polygon(np.random.default_rng(2)))
    area2 = np.sum(V[:, 0] * np.roll(V[:, 1], -1) - np.roll(V[:, 0], -1) * V[:, 1])
    assert area2 > 0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.floats(0.1, 0.99))
def test_scaled_set_is_contained(seed, s):
    poly = random_polygon(np.random.default_rng(seed))
    assert check_containment(HPolyhedron(poly.P, s * poly.phi), poly).contained
    assert not check_containment(poly, HPolyhedron(poly.P, s * poly.phi)).contained
