import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kglue.atlas import is_proper_subset
from kglue.errors import CoverError, PreconditionError
from kglue.examples import get_example
from kglue.reduction import (
    ShrinkingChain,
    build_overlap_cover,
    build_reduction,
    check_compatibility,
    choose_epsilons,
    smoothstep,
)


def _equator(n):
    ang = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    return np.column_stack([np.cos(ang), np.sin(ang), np.zeros(n)])


def test_overlap_region_is_an_equatorial_band(sphere):
    red = sphere.reduction
    assert all(red.in_base((1, 2), xi, 1) for xi in _equator(24))
    assert not red.in_base((1, 2), np.array([0.0, 0.0, 1.0]), 1)
    assert not red.in_base((1, 2), np.array([0.0, 0.0, -1.0]), 1)
    band = [xi[2] for xi in sphere.atlas.space_sampler(800, 1) if red.in_base((1, 2), xi, 1)]
    assert band and max(abs(z) for z in band) < 0.5


def test_incomparable_base_regions_never_meet(sphere):
    red = sphere.reduction
    for xi in sphere.atlas.space_sampler(400, 2):
        assert not (red.in_base((1,), xi) and red.in_base((2,), xi))


def test_eps_inequalities_two_charts(sphere):
    eps = sphere.reduction.eps
    kappa = sphere.atlas.kappa
    assert kappa == 2
    for i in (1, 2):
        # kappa * eps_i < eps_12 and (kappa + 1) eps_i below the unit product radius
        assert kappa * eps[(i,)] < eps[(1, 2)]
        assert eps[(i,)] < 1.0 / 3.0


def test_eps_ordering_on_chain(toy):
    eps, kappa = toy.reduction.eps, toy.atlas.kappa
    for I in eps:
        for J in eps:
            if is_proper_subset(I, J):
                assert kappa * eps[I] / eps[J] < 1.0


def test_symmetric_data_gives_symmetric_constants(sphere):
    eps = choose_epsilons(sphere.atlas)
    assert eps[(1,)] == eps[(2,)]


def test_single_chart_constant_bounds_section():
    at = get_example("bundle-point").atlas
    red = build_reduction(at)
    ch = at.charts[(1,)]
    pts = ch.domain.sample(64, 3)
    sup = max(at.layout.norm(ch.section(x), (1,)) for x in pts if red.in_base((1,), ch.footprint(x)))
    assert red.eps[(1,)] >= sup


def test_single_chart_has_empty_cover_and_vacuous_pass():
    at = get_example("bundle-point").atlas
    red = build_reduction(at)
    cover = build_overlap_cover(at, red)
    assert cover.pieces == []
    rep = check_compatibility(at, red, cover, 32)
    assert rep.passed
    assert rep.row("collar_compatibility").samples == 0


def test_aggressive_shrink_reports_uncovered_points(football):
    with pytest.raises(CoverError) as info:
        build_reduction(football.atlas, 0.999)
    assert len(info.value.uncovered) > 0
    assert info.value.exit_code == 7


def test_shrink_factor_range(sphere):
    with pytest.raises(PreconditionError):
        build_reduction(sphere.atlas, 1.0)


def test_compatibility_passes_on_builtins(sphere, football, toy):
    for pipe in (sphere, football, toy):
        rep = check_compatibility(pipe.atlas, pipe.reduction, pipe.cover, 64)
        assert rep.passed, rep.to_text()


def test_two_pieces_on_sphere(sphere):
    assert [(p.lower, p.upper) for p in sphere.cover.pieces] == [((1,), (1, 2)), ((2,), (1, 2))]


def test_chain_cover_is_ordered_by_lower_size(toy):
    sizes = [len(p.lower) for p in toy.cover.pieces]
    assert set(sizes) == {1, 2}
    assert sizes == sorted(sizes)


def test_chain_at_origin_is_strict(toy):
    chain = toy.reduction.chain(np.zeros(2), level=1)
    assert chain == [(1,), (1, 2), (1, 2, 3)]


def test_inflated_eps_breaks_collar_compatibility(sphere):
    red = sphere.reduction.scaled((1,), 10.0)
    row = check_compatibility(sphere.atlas, red, sphere.cover, 32).row("collar_compatibility")
    assert not row.passed
    assert math.sqrt(red.eps[(1,)]) > sphere.cover.width((1, 2))


def test_further_shrinking_stays_compatible_with_same_cover(sphere):
    tighter = build_reduction(sphere.atlas, 0.25)
    rep = check_compatibility(sphere.atlas, tighter, sphere.cover, 48)
    assert rep.passed, rep.to_text()


def test_levels_nest(sphere, toy):
    for pipe in (sphere, toy):
        rep = ShrinkingChain(pipe.reduction).check_nesting(64)
        assert rep.passed


def test_level_constants_increase(toy):
    red = toy.reduction
    for I in red.eps:
        vals = [red.eps_at(I, m) for m in range(1, red.levels + 1)]
        assert vals == sorted(vals) and vals[-1] < red.eps[I]


@given(st.floats(-1.0, 2.0), st.floats(-1.0, 2.0))
def test_smoothstep_is_monotone_and_clamped(a, b):
    lo, hi = min(a, b), max(a, b)
    assert 0.0 <= smoothstep(lo) <= smoothstep(hi) <= 1.0


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 2 * math.pi), st.floats(-1.0, 1.0))
def test_cutoffs_lie_in_unit_interval(sphere, angle, height):
    r = math.sqrt(max(0.0, 1.0 - height * height))
    xi = np.array([r * math.cos(angle), r * math.sin(angle), height])
    for I in sphere.atlas.poset:
        assert 0.0 <= sphere.reduction.chi(I, xi) <= 1.0
