import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holoverify.lattice import (
    build_domain,
    contour_integral,
    domain_from_dict,
    iter_domains,
    winding_angle,
)

angles = st.floats(0.2, math.pi - 0.2)
shapes = st.tuples(st.integers(1, 3), st.integers(1, 3))
kinds = st.sampled_from(["rhombi-only", "triangles", "pentagons"])


def signed_area(vs):
    return 0.5 * sum((a.conjugate() * b).imag for a, b in zip(vs, vs[1:] + vs[:1]))


def make(shape, alpha, kind):
    rows, cols = shape
    beta = 0.5 * (alpha + math.pi) if kind == "pentagons" else None
    return build_domain(rows, cols, alpha, kind, beta=beta)


@given(shapes, angles, kinds)
@settings(max_examples=40, deadline=None)
def test_faces_counter_clockwise(shape, alpha, kind):
    dom = make(shape, alpha, kind)
    for f in dom.faces:
        assert signed_area(list(f.vertices)) > 0


@given(shapes, angles)
@settings(max_examples=40, deadline=None)
def test_rhombi_are_unit_with_angle_alpha(shape, alpha):
    dom = make(shape, alpha, "rhombi-only")
    for f in dom.faces:
        for k in range(4):
            assert abs(abs(f.side(k)) - 1) < 1e-12
        assert f.corner_angle(0) == pytest.approx(alpha)
        assert f.corner_angle(1) == pytest.approx(math.pi - alpha)


@given(shapes, angles, kinds)
@settings(max_examples=40, deadline=None)
def test_midedges_shared_by_at_most_two_faces(shape, alpha, kind):
    dom = make(shape, alpha, kind)
    for e, inc in dom.incidence.items():
        assert 1 <= len(inc) <= 2
        for fi, k in inc:
            f = dom.faces[fi]
            a, b = f.vertices[k], f.vertices[(k + 1) % f.n_sides]
            assert abs((a + b) / 2 - dom.midedges[e]) < 1e-8


@given(shapes, angles)
@settings(max_examples=30, deadline=None)
def test_linear_functions_integrate_to_zero(shape, alpha):
    # midpoint rule is exact for polynomials of degree one
    dom = make(shape, alpha, "rhombi-only")
    F = {e: 2.5 - 1j + (0.3 + 0.7j) * z for e, z in enumerate(dom.midedges)}
    for i in range(len(dom.faces)):
        assert abs(contour_integral(dom, i, F)) < 1e-12


@given(shapes, angles, st.sampled_from(["rhombi-only", "triangles"]))
@settings(max_examples=30, deadline=None)
def test_conjugate_gives_twice_area(shape, alpha, kind):
    dom = make(shape, alpha, kind)
    F = {e: z.conjugate() for e, z in enumerate(dom.midedges)}
    for i, f in enumerate(dom.faces):
        assert contour_integral(dom, i, F) == pytest.approx(2j * signed_area(list(f.vertices)), abs=1e-12)


def test_row_direction_vertical():
    dom = build_domain(2, 1, 0.9)
    a, b = dom.faces[0].vertices[0], dom.faces[1].vertices[0]
    assert abs((b - a).real) < 1e-12 and (b - a).imag > 0


def test_triangles_line_the_left_side():
    dom = build_domain(3, 2, 1.0, "triangles")
    tri = [dom.faces[i] for i in dom.faces_of_kind("triangle")]
    assert len(tri) == 3 and all(f.cell[0] == f.cell[1] for f in tri)
    xs = [f.vertices[0].real for f in tri]
    assert max(xs) - min(xs) < 1e-12


def test_pentagon_degenerates_to_rhombus_at_beta_alpha():
    alpha = 1.1
    rh = build_domain(1, 1, alpha)
    pe = build_domain(1, 1, alpha, "pentagons", beta=alpha)
    v = pe.faces[0].vertices
    assert abs(v[3] - v[4]) < 1e-12
    assert abs(v[3] - rh.faces[0].vertices[3]) < 1e-12
    assert pe.faces[0].contributing == (0, 1, 2, 4)


@given(angles, st.floats(0.05, 1.0))
def test_pentagon_convex_for_beta_above_alpha(alpha, t):
    beta = alpha + t * (math.pi - 0.05 - alpha)
    f = build_domain(1, 1, alpha, "pentagons", beta=beta).faces[0]
    assert sum(f.corner_angle(k) for k in range(5)) == pytest.approx(3 * math.pi)


def test_pentagon_beta_below_alpha_rejected():
    with pytest.raises(ValueError):
        build_domain(1, 1, 1.0, "pentagons", beta=0.5)


def test_default_marked_point_is_on_a_rhombus_boundary():
    dom = build_domain(2, 3, 1.0, "triangles")
    a = dom.boundary_point_a
    assert dom.is_boundary(a)
    fi, k = dom.incidence[a][0]
    assert dom.faces[fi].kind == "rhombus"
    assert abs(dom.initial_direction()) == pytest.approx(1)


def test_marked_point_override_validated():
    dom = build_domain(1, 2, 1.0)
    interior = [e for e in dom.incidence if not dom.is_boundary(e)][0]
    with pytest.raises(ValueError):
        build_domain(1, 2, 1.0, a=interior)


@pytest.mark.parametrize(
    "kw",
    [dict(rows=0, cols=1, alpha=1.0), dict(rows=1, cols=1, alpha=0.0), dict(rows=1, cols=1, alpha=1.0, boundary_kind="x"),
     dict(rows=1, cols=1, alpha=1.0, boundary_kind="pentagons")],
)
def test_invalid_domains(kw):
    with pytest.raises(ValueError):
        build_domain(**kw)


def test_winding_of_closed_loops():
    square = [1, 1j, -1, -1j, 1]
    assert winding_angle(square) == pytest.approx(2 * math.pi)
    assert winding_angle(square[::-1]) == pytest.approx(-2 * math.pi)
    assert winding_angle([1, 1, 1]) == 0.0
    with pytest.raises(ValueError):
        winding_angle([1, 0])


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=8))
def test_winding_additive(turns):
    d = [1 + 0j]
    for t in turns:
        d.append(d[-1] * np.exp(1j * t))
    assert winding_angle(d) == pytest.approx(sum(turns), abs=1e-9)


def test_json_round_trip():
    dom = build_domain(2, 2, 0.8, "pentagons", beta=1.4)
    back = domain_from_dict(__import__("json").loads(dom.to_json()))
    assert back["alpha"] == 0.8
    assert len(back["faces"]) == 4 and back["faces"][0]["kind"] == "pentagon"
    assert np.allclose(back["midedges"], dom.midedges)


def test_iter_domains_respects_face_budget():
    shapes = list(iter_domains(8, ["rhombi-only"]))
    assert all(r * c <= 8 for r, c, _ in shapes)
    assert (2, 4, "rhombi-only") in shapes and (3, 3, "rhombi-only") not in shapes
    assert all(c <= 2 for _, c, _ in iter_domains(8, ["triangles"], max_cols=2))
