import math

import numpy as np
import pytest

from kglue.atlas import (
    FiniteGroup,
    KuranishiAtlas,
    ObstructionLayout,
    index_set,
    is_proper_subset,
    sup_norm,
    support_index,
    validate_atlas,
)
from kglue.config import Mutation, mutate_atlas
from kglue.errors import DomainError, StructuralError
from kglue.examples import get_example


def test_sup_norm_of_blocks():
    assert sup_norm({1: [3.0], 2: [-4.0]}, (1, 2)) == 4.0


def test_index_set_sorts_and_dedups():
    assert index_set([3, 1, 3, 2]) == (1, 2, 3)
    assert is_proper_subset((1,), (1, 2))
    assert not is_proper_subset((1, 2), (1, 2))


def test_support_index_at_zero_section_is_empty(sphere):
    at = sphere.atlas
    x = at.charts[(1, 2)].zero_sampler(1, 0)[0]
    assert support_index(at, (1, 2), x, 1e-9) == ()


def test_support_index_with_both_components_nonzero(sphere):
    at = sphere.atlas
    # transition point (e2, x): both section blocks are e2 up to a unitary factor
    v = np.array([0.1, -0.05, 0.8, 0.0])
    assert support_index(at, (1, 2), v, 1e-9) == (1, 2)


def test_support_index_threshold_is_strict(sphere):
    at = sphere.atlas
    tol = 1e-3
    v = np.array([tol / 2, 0.0, 0.8, 0.0])
    assert support_index(at, (1, 2), v, tol) == ()
    assert support_index(at, (1, 2), v, tol / 4) == (1, 2)


def test_support_index_outside_domain(sphere):
    with pytest.raises(DomainError):
        support_index(sphere.atlas, (1,), np.array([2.0, 0.0]), 1e-9)


def test_finite_group_rejects_non_group_tables():
    with pytest.raises(StructuralError):
        FiniteGroup([[0, 1], [0, 1]])
    g = FiniteGroup.cyclic(5)
    assert g.order == 5
    assert all(g.mul(a, g.inverse(a)) == g.identity for a in g.elements())


def test_layout_split_join_round_trip():
    lay = ObstructionLayout({1: 2, 2: 1, 3: 3})
    vec = np.arange(6.0)
    parts = lay.split(vec, (1, 2, 3))
    assert np.array_equal(lay.join(parts, (1, 2, 3)), vec)
    assert np.array_equal(lay.restrict(vec, (1, 2, 3), (2,)), [2.0])
    assert np.array_equal(lay.embed([7.0], (2,), (1, 2, 3)), [0, 0, 7, 0, 0, 0])


def test_empty_atlas_is_structural_error(sphere):
    at = sphere.atlas
    with pytest.raises(StructuralError):
        KuranishiAtlas(name="empty", dim=0, layout=at.layout, groups=at.groups, reps=at.reps, charts={},
                       changes={}, products=[], space_sampler=at.space_sampler)


@pytest.mark.parametrize("name,params", [
    ("tangent-sphere", {}), ("football", {"p": 2, "q": 3}), ("football", {"p": 3, "q": 5}),
    ("tangent-sphere-redundant", {}), ("toy-chain", {}), ("bundle-point", {}),
])
def test_builtin_atlases_validate(name, params):
    rep = validate_atlas(get_example(name, **params).atlas, 48)
    assert rep.passed, rep.to_text()
    assert max(r.max_residual for r in rep.rows) < 1e-9


def test_validation_is_deterministic(sphere):
    a = validate_atlas(sphere.atlas, 32, seed=4).as_dict()
    b = validate_atlas(sphere.atlas, 32, seed=4).as_dict()
    assert a == b


def test_translated_rho_breaks_section_compatibility(sphere):
    broken = mutate_atlas(sphere.atlas, Mutation("translate_rho", {"lower": [1], "upper": [1, 2], "amount": 0.1}))
    rep = validate_atlas(broken, 32)
    row = rep.row("section_compatibility")
    assert not row.passed
    assert row.max_residual >= 0.1 - 1e-9


def test_translated_rho_breaks_cocycle(toy):
    broken = mutate_atlas(toy.atlas, Mutation("translate_rho", {"lower": [1], "upper": [1, 2], "amount": 0.1}))
    row = validate_atlas(broken, 32).row("cocycle")
    assert not row.passed
    assert row.max_residual >= 0.1 - 1e-9


def test_football_relative_action_is_free(football):
    row = validate_atlas(football.atlas, 32).row("free_action")
    assert row.samples > 0 and row.passed


def test_equivariance_of_changes(football):
    at = football.atlas
    ch = at.change((1,), (1, 2))
    z = np.array([0.7 * math.cos(0.3), 0.7 * math.sin(0.3)])
    for x in ch.lifts(z):
        for g in at.group_elements((1, 2)):
            lhs = ch.rho(at.charts[(1, 2)].act(g, x))
            rhs = at.charts[(1,)].act(at.restrict_element(g, (1, 2), (1,)), ch.rho(x))
            assert np.allclose(lhs, rhs, atol=1e-12)
