import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holoverify import on_model as O
from holoverify.lattice import build_domain

lams = st.floats(0.15, 1.3)
alphas = st.floats(0.1, math.pi - 0.1)


# --- weights -----------------------------------------------------------------


def test_bulk_weights_at_zero_spectral_parameter():
    lam = 0.55
    w = O.bulk_weights(lam, 0.0)
    s2, s3 = math.sin(2 * lam), math.sin(3 * lam)
    assert (w.u2, w.v, w.w2) == (0.0, 0.0, 0.0) or np.allclose([w.u2, w.v, w.w2], 0)
    assert w.t == pytest.approx(s2 * s3)
    assert w.u1 == pytest.approx(-s3 * s2)
    assert w.w1 == pytest.approx(s3 * s2)


def test_bulk_weights_independent_evaluation():
    lam, u = 0.6, 0.45
    sn = np.sin
    ref = {
        "t": sn(3 * lam - u) * sn(u) + sn(2 * lam) * sn(3 * lam),
        "u1": -sn(3 * lam - u) * sn(2 * lam),
        "u2": -sn(u) * sn(2 * lam),
        "v": sn(3 * lam - u) * sn(u),
        "w1": sn(3 * lam - u) * sn(2 * lam - u),
        "w2": -sn(lam - u) * sn(u),
        "n": -2 * np.cos(4 * lam),
    }
    got = O.bulk_weights(lam, u).as_dict()
    for k, v in ref.items():
        assert got[k] == pytest.approx(v, abs=1e-14)


def test_loop_fugacity_two_at_quarter_pi():
    assert O.bulk_weights(math.pi / 4, 0.3).n == pytest.approx(2.0)


def test_boundary_weights_examples():
    lam = 0.5
    b0 = O.boundary_weights(lam, 0.0)
    assert b0.y == pytest.approx(-b0.r)
    bh = O.boundary_weights(lam, lam)
    assert bh.r == pytest.approx(-math.cos(5 * lam / 2))
    assert bh.y == pytest.approx(math.cos(lam / 2))
    b = O.boundary_weights(0.5, 0.3)
    assert (b.r, b.y) == pytest.approx((-math.cos((1.5 + 0.6) / 2), math.cos((1.5 - 0.6) / 2)))


def test_honeycomb_angle_gives_u_equal_lambda():
    for lam in (0.4, 0.7, 1.0):
        assert O.bulk_u(lam, math.pi / 3) == pytest.approx(lam)
        assert O.boundary_u(lam, math.pi / 3) == pytest.approx(lam / 2)


def test_ordinary_transition_branch():
    lam, u = 0.5, 0.3
    assert O.ordinary_transition_weights(lam, u) == O.boundary_weights(lam + math.pi, u)
    a, b = O.bulk_weights(lam, u).as_dict(), O.bulk_weights(lam + math.pi, u).as_dict()
    # sign pattern under lam -> lam + pi, read off term by term
    signs = {"t": -1, "u1": -1, "u2": 1, "v": -1, "w1": -1, "w2": -1, "n": 1}
    for k, sg in signs.items():
        assert b[k] == pytest.approx(sg * a[k], abs=1e-14)


# --- local CR systems ------------------------------------------------------------


@given(lams, alphas)
@settings(max_examples=80, deadline=None)
def test_integrable_weights_solve_bulk_system(lam, alpha):
    s, w, _ = O.integrable_point(lam, alpha)
    assert np.max(np.abs(O.cr_system_residuals(w, s, alpha))) < 1e-12


@given(lams, alphas)
@settings(max_examples=80, deadline=None)
def test_integrable_weights_solve_boundary_relation(lam, alpha):
    assert O.boundary_cr_residual(lam, alpha) < 1e-12


def test_only_t_survives():
    w = O.OnWeightSet(1, 0, 0, 0, 0, 0, 0.7)
    assert np.allclose(O.cr_system_residuals(w, 0.3, 1.1), [1, 0, 0, 0])


def test_wrong_spin_breaks_bulk_system():
    lam, alpha = 0.7, 1.1
    s, w, _ = O.integrable_point(lam, alpha)
    assert np.max(np.abs(O.cr_system_residuals(w, s + 0.1, alpha))) > 1e-3


def test_system_rank_drops_at_integrable_spin():
    # the CR system is linear in the six weights; at the integrable spin the
    # integrable weights lie in its null space
    lam, alpha = 0.7, 1.1
    s, w, _ = O.integrable_point(lam, alpha)
    cols = []
    for k in ("t", "u1", "u2", "v", "w1", "w2"):
        e = O.OnWeightSet(**{**dict.fromkeys(("t", "u1", "u2", "v", "w1", "w2"), 0.0), k: 1.0, "n": w.n})
        cols.append(O.cr_system_residuals(e, s, alpha))
    M = np.array(cols).T
    x = np.array([w.t, w.u1, w.u2, w.v, w.w1, w.w2])
    assert np.linalg.norm(M @ x) < 1e-12 * np.linalg.norm(x)


@pytest.mark.parametrize("lam,alpha", [(0.5, math.pi / 3), (0.8, 1.2)])
def test_boundary_relation_examples(lam, alpha):
    assert O.boundary_cr_residual(lam, alpha) < 1e-12
    s, _, bw = O.integrable_point(lam, alpha)
    flipped = O.OnBoundaryWeights(bw.r, -bw.y)
    if (lam, alpha) == (0.5, math.pi / 3):
        assert abs(O.boundary_relation(flipped, s, alpha).real) > 0.1


# --- enumeration ----------------------------------------------------------------


def brute_force_counts(dom, a=None):
    """Independent count over all face-state assignments, no pruning."""
    S = [O.face_states(f) for f in dom.faces]
    closed, opened = 0, {}
    for asg in itertools.product(*[range(len(s)) for s in S]):
        occ = {}
        for fi, si in enumerate(asg):
            used = {k for p in S[fi][si][0] for k in p}
            for k, e in enumerate(dom.faces[fi].midedges):
                if e is not None:
                    occ.setdefault(e, []).append(k in used)
        defects = [e for e, o in occ.items() if (o[0] if len(o) == 1 else o[0] != o[1])]
        if not defects:
            closed += 1
        elif a is not None and len(defects) == 2 and a in defects:
            z = defects[0] if defects[1] == a else defects[1]
            opened[z] = opened.get(z, 0) + 1
    return closed, opened


@pytest.mark.parametrize("rows,cols,kind", [(1, 1, "rhombi-only"), (1, 2, "rhombi-only"), (2, 2, "rhombi-only"), (2, 2, "triangles"), (1, 3, "triangles")])
def test_enumeration_matches_brute_force(rows, cols, kind):
    dom = build_domain(rows, cols, 1.0, kind)
    a = dom.boundary_point_a
    closed, opened = brute_force_counts(dom, a)
    assert sum(1 for _ in O.enumerate_configs(dom)) == closed
    got = {}
    for c in O.enumerate_configs(dom, (a, None)):
        got[c.endpoint] = got.get(c.endpoint, 0) + 1
    assert got == opened


def test_single_face_hand_count():
    dom = build_domain(1, 1, 1.0)
    closed = list(O.enumerate_configs(dom))
    assert len(closed) == 1 and closed[0].labels == ("empty",)
    a = dom.boundary_point_a
    for z in dom.boundary_midedges:
        if z == a:
            continue
        cs = list(O.enumerate_configs(dom, (a, z)))
        assert len(cs) == 1
        kz = dom.faces[0].side_of(z)
        ka = dom.faces[0].side_of(a)
        assert cs[0].labels[0] == ("straight" if abs(kz - ka) == 2 else cs[0].labels[0])
        assert cs[0].open_path.midedges == (a, z)


def test_vacuum_always_present_and_weighted():
    dom = build_domain(2, 2, 0.9)
    w = O.bulk_weights(0.7, 0.4)
    vac = [c for c in O.enumerate_configs(dom) if not c.occupied_midedges]
    assert len(vac) == 1
    assert O.config_weight(vac[0], w) == pytest.approx(w.t ** len(dom.faces))


def test_closed_loop_weight_and_dense_zero():
    dom = build_domain(2, 3, 1.0)
    loops = [c for c in O.enumerate_configs(dom) if c.closed_loop_count]
    assert loops
    c = loops[0]
    w = O.bulk_weights(math.pi / 8, 0.2)
    assert abs(w.n) < 1e-15
    assert O.config_weight(c, w) == pytest.approx(0.0, abs=1e-15)
    w2 = O.bulk_weights(0.7, 0.2)
    tab = w2.as_dict()
    expect = w2.n ** c.closed_loop_count * np.prod([tab[O._WEIGHT_OF[l]] for l in c.labels])
    assert O.config_weight(c, w2) == pytest.approx(expect)


def test_triangle_needs_boundary_weights():
    dom = build_domain(1, 2, 1.0, "triangles")
    c = next(O.enumerate_configs(dom))
    with pytest.raises(ValueError):
        O.config_weight(c, O.bulk_weights(0.7, 0.3))


def test_cap_enforced():
    dom = build_domain(3, 3, 1.0)
    with pytest.raises(O.CapExceeded):
        next(O.enumerate_configs(dom, max_faces=8))


def test_occupancy_consistent_across_shared_midedges():
    dom = build_domain(2, 2, 1.0, "triangles")
    for c in O.enumerate_configs(dom, (dom.boundary_point_a, None)):
        ends = {dom.boundary_point_a, c.endpoint}
        for e, inc in dom.incidence.items():
            if len(inc) == 2 and e not in ends:
                occ = []
                for fi, k in inc:
                    pairs = O.face_states(dom.faces[fi])[c.face_state[fi]][0]
                    occ.append(k in {x for p in pairs for x in p})
                assert occ[0] == occ[1]


# --- observables ------------------------------------------------------------------


def test_spin_zero_observable_is_positive_for_positive_weights():
    dom = build_domain(2, 2, 1.0)
    w = O.OnWeightSet(1.0, 0.3, 0.4, 0.2, 0.1, 0.15, 1.0)
    F = O.Ensemble(dom).observables(0.0, w)
    for v in F.values():
        assert abs(v.imag) < 1e-14 and v.real >= 0


def test_observable_at_a_counts_empty_path():
    dom = build_domain(1, 2, 1.0)
    w = O.bulk_weights(0.7, O.bulk_u(0.7, 1.0))
    s = O.spin(0.7)
    Fa = O.observable(dom, dom.boundary_point_a, s, w)
    th = np.angle(dom.initial_direction())
    assert Fa == pytest.approx(np.exp(-1j * s * th))


def test_observable_ratio_by_hand():
    # two faces: the open paths from a are enumerated by hand via brute force
    dom = build_domain(1, 2, 1.0)
    w = O.OnWeightSet(1.0, 0.3, 0.4, 0.2, 0.1, 0.15, 1.5)
    Z = sum(O.config_weight(c, w) for c in O.enumerate_configs(dom))
    a = dom.boundary_point_a
    for z in dom.boundary_midedges:
        if z == a:
            continue
        num = sum(O.config_weight(c, w) for c in O.enumerate_configs(dom, (a, z)))
        assert O.observable(dom, z, 0.0, w) == pytest.approx(num / Z)


@pytest.mark.parametrize("shape", [(2, 2), (1, 3), (2, 3), (3, 2)])
@pytest.mark.parametrize("lam", [0.4, 0.7, 1.0])
def test_bulk_holomorphicity(shape, lam):
    alpha = 1.1
    dom = build_domain(*shape, alpha)
    s, w, _ = O.integrable_point(lam, alpha)
    assert O.verify_bulk_holomorphicity(dom, s, w) < 1e-10


def test_bulk_holomorphicity_detects_perturbation():
    dom = build_domain(2, 2, 1.1)
    s, w, _ = O.integrable_point(0.7, 1.1)
    assert O.verify_bulk_holomorphicity(dom, s, w.replace(t=w.t + 0.1)) > 1e-3


@pytest.mark.parametrize("shape", [(2, 2), (3, 2), (1, 4), (4, 2)])
def test_boundary_holomorphicity(shape):
    alpha = 0.9
    dom = build_domain(*shape, alpha, "triangles")
    s, w, bw = O.integrable_point(0.7, alpha)
    assert O.verify_boundary_holomorphicity(dom, s, w, bw) < 1e-10
    assert O.verify_bulk_holomorphicity(dom, s, w, bw) < 1e-10


def test_boundary_holomorphicity_detects_wrong_weights():
    dom = build_domain(2, 2, 0.9, "triangles")
    s, w, bw = O.integrable_point(0.7, 0.9)
    assert O.verify_boundary_holomorphicity(dom, s, w, O.OnBoundaryWeights(bw.r, -bw.y)) > 1e-3


def test_boundary_holomorphicity_needs_triangles():
    dom = build_domain(2, 2, 0.9)
    s, w, bw = O.integrable_point(0.7, 0.9)
    with pytest.raises(ValueError):
        O.verify_boundary_holomorphicity(dom, s, w, bw)


def test_wide_triangle_strips_break_the_real_part_condition():
    # paths that reach a triangle from below have wound once around its lower
    # right corner; the real-part condition only holds for the unwound lift
    dom = build_domain(2, 3, 0.9, "triangles")
    s, w, bw = O.integrable_point(0.7, 0.9)
    assert O.verify_bulk_holomorphicity(dom, s, w, bw) < 1e-10
    assert O.verify_boundary_holomorphicity(dom, s, w, bw) > 1e-3


@given(lams, alphas)
@settings(max_examples=40, deadline=None)
def test_triangle_local_relation_for_direct_arrival(lam, alpha):
    assert O.triangle_local_residual(lam, alpha) < 1e-12
    assert O.triangle_local_residual(lam, alpha, from_second_side=True) < 1e-12


# --- reflection -------------------------------------------------------------------


def test_reflection_example_point():
    assert O.reflection_identity_residual(0.6, 0.4, 0.1) < 1e-10


@given(st.floats(0.3, 1.2), st.floats(-1, 1), st.floats(-1, 1))
@settings(max_examples=30, deadline=None)
def test_reflection_identity(lam, u, v):
    assert O.reflection_identity_residual(lam, u, v) < 1e-10


def test_reflection_trivial_at_equal_arguments():
    assert O.reflection_identity_residual(0.7, 0.3, 0.3) < 1e-14


def test_reflection_detects_perturbed_boundary():
    def shifted(lam, u):
        b = O.boundary_weights(lam, u)
        return O.OnBoundaryWeights(b.r, b.y + 0.1)

    assert O.reflection_identity_residual(0.6, 0.4, 0.1, bw_fn=shifted) > 1e-3


def test_face_labelling_fails_reflection():
    # the contour-integral labelling (y empty, r strand) is not the reflection operator
    assert O.reflection_identity_residual(0.6, 0.4, 0.1, slot=O.face_labelling) > 1e-3


def test_reflection_two_strand_unitarity():
    # R(u) R(-u) is proportional to the identity pattern on two strands
    lam, u = 0.7, 0.35
    n = -2 * math.cos(4 * lam)
    pat = O._diagram([("R", O.bulk_weights(lam, u)), ("R", O.bulk_weights(lam, -u))], n)
    ident = {k: v for k, v in pat.items() if abs(v) > 1e-12}
    for (occ, pairs), v in ident.items():
        # only straight-through connections survive
        assert occ[:2] == occ[2:]
        for p in pairs:
            if len(p) == 2:
                assert p[0][1] == p[1][1]
