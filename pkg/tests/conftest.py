from __future__ import annotations

import functools
from dataclasses import dataclass
from pathlib import Path

import pytest

from kglue.collar import CollarSystem, build_collars
from kglue.examples import ExampleSpec, get_example
from kglue.gluing import GluedCategory
from kglue.reduction import OverlapCover, Reduction, build_overlap_cover, build_reduction

FIXTURES = Path(__file__).parent / "fixtures"

# Filled by the acceptance module and echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


@dataclass
class Pipeline:
    spec: ExampleSpec
    reduction: Reduction
    cover: OverlapCover
    collars: CollarSystem
    glued: GluedCategory

    @property
    def atlas(self):
        return self.spec.atlas


@functools.lru_cache(maxsize=None)
def pipeline(name: str, **params) -> Pipeline:
    spec = get_example(name, **params)
    red = build_reduction(spec.atlas)
    cover = build_overlap_cover(spec.atlas, red)
    collars = build_collars(spec.atlas, red, cover)
    return Pipeline(spec, red, cover, collars, GluedCategory(spec.atlas, red, cover, collars))


@pytest.fixture(scope="session")
def sphere() -> Pipeline:
    return pipeline("tangent-sphere")


@pytest.fixture(scope="session")
def football() -> Pipeline:
    return pipeline("football", p=2, q=3)


@pytest.fixture(scope="session")
def toy() -> Pipeline:
    return pipeline("toy-chain")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
