import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kglue.errors import CollarOverflowError, DomainError, MembershipRejection
from kglue.thickening import (
    Simplex,
    boundary_chart,
    chain_and_star,
    embed_ev,
    in_star,
    rescale,
    t_dot_e,
    y_membership,
)

A = (1, 2)


def _zero_point(pipe, J):
    return pipe.reduction.zero_points(J, 8, 0)[0]


def test_simplex_basics():
    s = Simplex((1, 2, 3))
    assert np.allclose(s.barycenter, [1 / 3] * 3)
    assert np.allclose(s.face_barycenter((1, 3)), [0.5, 0.0, 0.5])
    assert s.on_boundary([0.5, 0.0, 0.5]) and not s.on_boundary(s.barycenter)
    assert s.support([0.5, 0.0, 0.5]) == (1, 3)
    assert not s.contains([0.6, 0.6, -0.2])


def test_interior_point_from_zero(sphere):
    at = sphere.atlas
    x = _zero_point(sphere, A)
    y = y_membership(at, sphere.reduction, A, np.zeros(4), x, Simplex(A).barycenter)
    assert y.stratum == A and y.support == ()


def test_oversized_e_is_rejected_by_name(sphere):
    at, red = sphere.atlas, sphere.reduction
    x = _zero_point(sphere, A)
    e = np.array([0.0, 0.0, 1.0, 0.0]) * 3 * at.kappa * red.eps_empty
    with pytest.raises(MembershipRejection) as info:
        y_membership(at, red, A, e, x, np.array([1.0, 0.0]))
    assert info.value.conditions == ["|e| < kappa eps_I(x)"]


def test_wrong_defining_equation_is_rejected(sphere):
    at, red = sphere.atlas, sphere.reduction
    x = _zero_point(sphere, A).copy()
    x[0] = 1e-3  # nonzero section, but e = 0
    with pytest.raises(MembershipRejection) as info:
        y_membership(at, red, A, np.zeros(4), x, Simplex(A).barycenter)
    assert "s_J(x) = t.e" in info.value.conditions


def test_t_dot_e_matches_blockwise_product(sphere):
    e = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.allclose(t_dot_e(sphere.atlas, A, [0.25, 0.75], e), [0.25, 0.5, 2.25, 3.0])


def test_embed_ev_zero_case(sphere):
    at, red = sphere.atlas, sphere.reduction
    z = _zero_point(sphere, (1,))
    x = at.change((1,), A).lifts(z)[0]
    y = embed_ev(at, red, (1,), A, np.zeros(2), x)
    assert np.allclose(y.e, 0.0) and np.allclose(y.t, [1.0, 0.0]) and y.stratum == (1,)


def test_embed_ev_keeps_free_components_and_lands_on_barycenter(sphere):
    at, red = sphere.atlas, sphere.reduction
    z = _zero_point(sphere, (1,))
    x = at.change((1,), A).lifts(z)[0]
    e2 = np.array([0.3, -0.2]) * red.eps[(1,)]
    y = embed_ev(at, red, (1,), A, e2, x)
    assert np.array_equal(at.layout.restrict(y.e, at.basic, (2,)), e2)
    assert np.array_equal(y.t, Simplex(A).face_barycenter((1,)))
    # |I| = 1 so the I component equals s_I(x) exactly
    assert np.array_equal(at.layout.restrict(y.e, at.basic, (1,)), at.section_block(A, x, (1,)))


def test_embed_ev_norm_bound(sphere):
    at, red = sphere.atlas, sphere.reduction
    x = at.change((1,), A).lifts(_zero_point(sphere, (1,)))[0]
    with pytest.raises(DomainError):
        embed_ev(at, red, (1,), A, np.array([2.0, 0.0]) * red.eps[(1,)], x)


def _face_point(pipe, e2=(0.4, 0.1)):
    at, red = pipe.atlas, pipe.reduction
    x = at.change((1,), A).lifts(_zero_point(pipe, (1,)))[0]
    return embed_ev(at, red, (1,), A, np.asarray(e2) * red.eps[(1,)], x)


def test_rescale_identity_and_inverse(sphere):
    at = sphere.atlas
    y = _face_point(sphere)
    same = rescale(at, y, {1: 1.0, 2: 1.0})
    assert np.array_equal(same.e, y.e) and np.array_equal(same.t, y.t)
    with pytest.raises(DomainError):
        rescale(at, y, {1: 2.0})


def test_rescale_group_property(toy):
    at, red = toy.atlas, toy.reduction
    J = (1, 2, 3)
    x = toy.reduction.zero_points(J, 4, 0)[0]
    t = np.array([0.2, 0.3, 0.5])
    y = y_membership(at, red, J, np.zeros(at.layout.size(at.basic)), x, t)
    mu = {1: 1.5, 2: 1.0 / 3.0 * 2.0}
    mu[3] = (1.0 - 0.2 * mu[1] - 0.3 * mu[2]) / 0.5
    back = {j: 1.0 / v for j, v in mu.items()}
    round_trip = rescale(at, rescale(at, y, mu), back)
    assert np.allclose(round_trip.t, y.t, atol=1e-14) and np.allclose(round_trip.e, y.e, atol=1e-14)


def test_boundary_chart_at_zero_is_identity(sphere):
    at, red = sphere.atlas, sphere.reduction
    y = _face_point(sphere)
    own = at.layout.restrict(y.e, at.basic, (2,))
    out = boundary_chart(at, red, at.product((1,), A), own, {2: 0.0}, y)
    assert np.allclose(out.x, y.x) and np.allclose(out.t, y.t) and np.allclose(out.e, y.e)


def test_boundary_chart_positive_r_is_interior(sphere):
    at, red = sphere.atlas, sphere.reduction
    y = _face_point(sphere)
    e2 = np.array([0.5, 0.2]) * red.eps[(1,)]
    out = boundary_chart(at, red, at.product((1,), A), e2, {2: 0.05}, y)
    assert out.stratum == A
    s = at.charts[A].section(out.x)
    assert np.allclose(s, t_dot_e(at, A, out.t, out.e), atol=1e-12)


def test_boundary_chart_overflow(sphere):
    at, red = sphere.atlas, sphere.reduction
    y = _face_point(sphere)
    with pytest.raises(CollarOverflowError):
        boundary_chart(at, red, at.product((1,), A), np.array([50.0, 0.0]), {2: 0.5}, y)


def test_boundary_chart_at_a_corner(toy):
    # face (1,2) of Y_123 where only s_1 is nonzero; r on index 3 moves into the interior
    at, red = toy.atlas, toy.reduction
    J = (1, 2, 3)
    ps = at.product((1, 2), J)
    x = toy.reduction.zero_points(J, 16, 0)[0]
    t = np.array([0.5, 0.5, 0.0])
    e = np.zeros(at.layout.size(at.basic))
    y = y_membership(at, red, J, e, x, t)
    e3 = 0.3 * red.eps[(1, 2)] * np.array([1.0, -1.0])
    out = boundary_chart(at, red, ps, e3, {3: 0.04}, y)
    assert out.stratum == J
    assert np.allclose(at.charts[J].section(out.x), t_dot_e(at, J, out.t, out.e), atol=1e-12)


def test_chain_and_star_in_single_chart_region(sphere):
    at = sphere.atlas
    z = np.zeros(2)  # the pole of chart 1
    point = chain_and_star(sphere.reduction, (1,), z)
    assert point.chain == [(1,)] and point.star == []
    assert not in_star(point, [1.0])


def test_chain_at_football_equator(football):
    at, red = football.atlas, football.reduction
    J = (1, 2)
    x = next(x for x in red.zero_points(J, 64, 0) if red.in_base((1,), at.charts[J].footprint(x)))
    point = chain_and_star(red, J, x)
    assert point.chain[0] in ((1,), (2,)) and point.maximal == J
    assert in_star(point, point.star[0])


def test_chain_on_toy_origin(toy):
    J = (1, 2, 3)
    x = toy.atlas.change((1,), J).lifts(np.zeros(2))[0]
    point = chain_and_star(toy.reduction, J, x, level=1)
    assert point.chain == [(1,), (1, 2), (1, 2, 3)]
    mid = 0.5 * (point.star[0] + point.star[1])
    assert in_star(point, mid)
    assert not in_star(point, Simplex(J).barycenter)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0))
def test_rescale_composes(sphere, a, b):
    at, red = sphere.atlas, sphere.reduction
    y = y_membership(at, red, A, np.zeros(4), _zero_point(sphere, A), np.array([0.5, 0.5]))
    mu = {1: 2.0 * a / (a + b), 2: 2.0 * b / (a + b)}
    nu = {1: 0.8 / mu[1], 2: 1.2 / mu[2]}
    both = rescale(at, rescale(at, y, mu), nu)
    once = rescale(at, y, {j: mu[j] * nu[j] for j in A})
    assert np.allclose(both.t, [0.4, 0.6], atol=1e-12)
    assert np.allclose(both.t, once.t, atol=1e-12) and np.allclose(both.e, once.e, atol=1e-12)
