import math
from fractions import Fraction

import numpy as np
import pytest

from kglue.atlas import validate_atlas
from kglue.errors import PreconditionError
from kglue.examples import TwoCircleBranched, get_example
from kglue.reduction import build_overlap_cover, build_reduction, check_compatibility

ATLAS_NAMES = ["tangent-sphere", "football", "tangent-sphere-redundant", "toy-chain", "bundle-point", "bundle-offset"]


@pytest.mark.parametrize("name", ATLAS_NAMES)
def test_atlas_examples_pass_structural_checks(name):
    spec = get_example(name)
    assert spec.atlas is not None and spec.base_fields is not None
    assert validate_atlas(spec.atlas, 24).passed
    red = build_reduction(spec.atlas)
    cover = build_overlap_cover(spec.atlas, red)
    assert check_compatibility(spec.atlas, red, cover, 24).passed


@pytest.mark.parametrize("p,q,count", [(2, 3, Fraction(5, 6)), (3, 5, Fraction(8, 15)), (1, 1, Fraction(2))])
def test_football_expected_count_is_one_over_p_plus_one_over_q(p, q, count):
    spec = get_example("football", p=p, q=q)
    assert spec.expected_count == count == Fraction(1, p) + Fraction(1, q)
    assert spec.expected_weights == {"M_12": Fraction(1, p * q), "branch_1": Fraction(1, p), "branch_2": Fraction(1, q)}


def test_football_isotropy_orders():
    at = get_example("football", p=3, q=5).atlas
    assert [at.gamma_order(J) for J in ((1,), (2,), (1, 2))] == [3, 5, 15]


@pytest.mark.parametrize("p,q", [(0, 3), (-1, 2), (2, 4), (2, 2), (1.5, 2)])
def test_football_parameter_guards(p, q):
    with pytest.raises(PreconditionError):
        get_example("football", p=p, q=q)


def test_unknown_example():
    with pytest.raises(PreconditionError, match="unknown example"):
        get_example("klein-bottle")


def test_bundle_examples_carry_expected_values():
    assert get_example("sphere-euler").expected_count == 2
    assert get_example("torus-trivial").expected_count == 0
    assert get_example("tangent-sphere").expected_count == 2
    assert get_example("tangent-sphere-redundant").expected_count == 2


def test_two_circle_weights():
    tc = get_example("two-circle").branched
    mid = 0.5 * (tc.arc[0] + tc.arc[1])
    assert tc.weight("a", mid) == 1 and tc.weight("b", mid) == 1
    assert tc.weight("a", mid + math.pi) == Fraction(1, 2)
    # closed arc: both endpoints count as glued
    assert tc.weight("b", tc.arc[0]) == 1 and tc.weight("a", tc.arc[1]) == 1
    assert tc.weight("a", tc.arc[1] + 1e-9) == Fraction(1, 2)


def test_two_circle_branch_sum():
    assert TwoCircleBranched().check_weighting(50, 3).passed


def test_two_circle_guards():
    with pytest.raises(PreconditionError):
        TwoCircleBranched(1.0, 0.5)
    with pytest.raises(PreconditionError):
        TwoCircleBranched().weight("c", 0.1)


def test_football_footprints_cover_the_sphere():
    at = get_example("football", p=2, q=3).atlas
    pts = at.space_sampler(200, 0)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    for xi in pts[:50]:
        assert any(at.charts[I].locate(xi) is not None for I in ((1,), (2,)))
