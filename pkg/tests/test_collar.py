import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kglue.collar import (
    CollarSystem,
    boundary_samples,
    check_collars,
    check_width_bookkeeping,
    combine_collars,
    delta_collar,
    local_collar,
    uncollar,
)
from kglue.errors import DomainError, MembershipRejection, PreconditionError
from kglue.thickening import Simplex, embed_ev, t_dot_e

A = (1, 2)


def _rot(a):
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def twisted(product, twist=0.7):
    """Same face data, but x is rotated by an angle proportional to |f|."""
    def phi(f, y):
        f = np.asarray(f, dtype=float)
        return np.concatenate([f, _rot(twist * np.linalg.norm(f)) @ y[2:]])

    def project(v):
        f = v[:2].copy()
        return f, np.concatenate([np.zeros(2), _rot(-twist * np.linalg.norm(f)) @ v[2:]])

    return replace(product, phi=phi, project=project, name=product.name + "_twisted")


def _face_point(pipe, k=0, scale=0.4):
    at, red = pipe.atlas, pipe.reduction
    z = red.zero_points((1,), 16, 0)[k]
    x = at.change((1,), A).lifts(z)[0]
    e2 = scale * red.eps[(1,)] * np.array([math.cos(k + 0.3), math.sin(k + 0.3)])
    return embed_ev(at, red, (1,), A, e2, x)


def test_delta_collar_formula():
    assert np.allclose(delta_collar(A, [1.0, 0.0], 0.1), [0.9, 0.1])
    assert np.array_equal(delta_collar(A, [1.0, 0.0], 0.0), [1.0, 0.0])
    out = delta_collar((1, 2, 3), [0.5, 0.5, 0.0], 0.05)
    # on the segment from b_12 to b_123
    b12, b123 = np.array([0.5, 0.5, 0.0]), np.full(3, 1 / 3)
    lam = (out - b12)[2] / (b123 - b12)[2]
    assert np.allclose(out, b12 + lam * (b123 - b12))
    with pytest.raises(DomainError):
        delta_collar(A, [1.0, 0.0], 0.3)


def test_local_collar_identity_at_zero(sphere):
    at = sphere.atlas
    y = _face_point(sphere)
    out = local_collar(at, at.product((1,), A), y, 0.0)
    assert np.array_equal(out.x, y.x) and np.array_equal(out.t, y.t) and np.allclose(out.e, y.e)


def test_zero_free_component_leaves_x_fixed(sphere):
    at = sphere.atlas
    y = _face_point(sphere, scale=0.0)
    out = local_collar(at, at.product((1,), A), y, 0.07)
    assert np.array_equal(out.x, y.x)
    assert np.allclose(out.t, delta_collar(A, y.t, 0.07))
    assert np.allclose(out.e, y.e)


def test_two_chart_collar_moves_section_by_r_times_e2(sphere):
    at = sphere.atlas
    y = _face_point(sphere, scale=0.8)
    r = 0.09
    out = local_collar(at, at.product((1,), A), y, r)
    e2 = at.layout.restrict(y.e, at.basic, (2,))
    s2 = at.section_block(A, out.x, (2,))
    assert math.isclose(np.linalg.norm(s2), r * np.linalg.norm(e2), rel_tol=1e-12)


def test_local_collar_rejects_other_faces(sphere):
    at = sphere.atlas
    y = _face_point(sphere)
    with pytest.raises(MembershipRejection):
        local_collar(at, at.product((2,), A), y, 0.05)


def test_uncollar_inverts_local_collar(sphere):
    at = sphere.atlas
    ps = at.product((1,), A)
    y = _face_point(sphere, scale=0.6)
    base, depth = uncollar(at, ps, local_collar(at, ps, y, 0.08))
    assert math.isclose(depth, 0.08, rel_tol=1e-12)
    assert np.allclose(base.x, y.x, atol=1e-14) and np.allclose(base.e, y.e, atol=1e-14)


def test_single_piece_combination_is_the_local_collar(sphere):
    at = sphere.atlas
    ps = at.product((1,), A)
    y = _face_point(sphere)
    a = combine_collars(at, [ps], [1.0], y, 0.06)
    b = local_collar(at, ps, y, 0.06)
    assert np.allclose(a.x, b.x, atol=1e-15) and np.allclose(a.e, b.e, atol=1e-15)


def test_full_weight_on_first_piece(sphere):
    at = sphere.atlas
    ps = at.product((1,), A)
    other = twisted(ps)
    y = _face_point(sphere)
    a = combine_collars(at, [ps, other], [1.0, 0.0], y, 0.06)
    b = local_collar(at, ps, y, 0.06)
    assert np.allclose(a.x, b.x, atol=1e-15)


def test_half_and_half_combination_lifts_the_simplex_collar(sphere):
    at = sphere.atlas
    ps = at.product((1,), A)
    other = twisted(ps)
    y = _face_point(sphere, scale=0.9)
    r = 0.07
    out = combine_collars(at, [ps, other], [0.5, 0.5], y, r)
    assert np.allclose(out.t, delta_collar(A, y.t, r), atol=1e-14)
    # the two pieces really disagree, so the blend differs from either one
    assert not np.allclose(out.x, local_collar(at, ps, y, r).x, atol=1e-9)
    assert not np.allclose(out.x, local_collar(at, other, y, r).x, atol=1e-9)
    # still a point of Y_J
    assert np.allclose(at.charts[A].section(out.x), t_dot_e(at, A, out.t, out.e), atol=1e-13)
    # corner control: the off-face obstruction is untouched
    assert np.allclose(at.layout.restrict(out.e, at.basic, (2,)), at.layout.restrict(y.e, at.basic, (2,)))


def test_partition_must_sum_to_one(sphere):
    at = sphere.atlas
    ps = at.product((1,), A)
    with pytest.raises(PreconditionError):
        combine_collars(at, [ps, twisted(ps)], [0.5, 0.6], _face_point(sphere), 0.05)


def test_system_with_custom_partition(sphere):
    at = sphere.atlas
    ps = at.product((1,), A)
    pieces = list(sphere.cover.pieces)
    pieces.append(replace(pieces[0], product=twisted(ps)))
    system = CollarSystem(at, sphere.reduction, type(sphere.cover)(pieces), partition=lambda prods, y: [0.25, 0.75])
    y = _face_point(sphere, scale=0.5)
    out = system.evaluate(A, y, 0.05)
    assert np.allclose(out.t, delta_collar(A, y.t, 0.05), atol=1e-14)


def test_collar_depth_is_bounded_by_width(sphere):
    system = sphere.collars
    with pytest.raises(DomainError):
        system.evaluate(A, _face_point(sphere), system.width(A))


def test_collar_checks_pass(sphere, football, toy):
    for pipe in (sphere, football, toy):
        rep = check_collars(pipe.collars, 24)
        assert rep.passed, rep.to_text()
        assert all(r.samples > 0 for r in rep.rows)


def test_width_bookkeeping(sphere, football, toy):
    for pipe in (sphere, football, toy):
        assert check_width_bookkeeping(pipe.collars).passed


def test_widths_below_quarter_over_size(toy):
    for J in toy.atlas.poset:
        if len(J) > 1:
            assert toy.collars.width(J) < 1.0 / (4 * len(J))


def test_boundary_samples_live_on_the_face(football):
    pts = boundary_samples(football.collars, (2,), A, 16, 3)
    assert pts
    for y in pts:
        assert Simplex(A).support(y.t) == (2,)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.12), st.floats(0.0, 0.99), st.floats(0.0, 0.99))
def test_mixed_collar_delta_lift(sphere, r, lam, scale):
    at = sphere.atlas
    ps = at.product((1,), A)
    y = _face_point(sphere, scale=scale)
    out = combine_collars(at, [ps, twisted(ps)], [lam, 1.0 - lam], y, r)
    assert np.allclose(out.t, delta_collar(A, y.t, r), atol=1e-14)
