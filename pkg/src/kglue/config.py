"""YAML run configurations and the mutation fixtures used to exercise failure paths.

A config file looks like::

    example: toy-chain          # built-in example name
    params: {}                  # constructor parameters, e.g. {p: 2, q: 3}
    mutation:                   # optional
      kind: translate_rho       # translate_rho | offset_section | scale_epsilon | perturb_tau
      lower: [1]
      upper: [1, 2]
      amount: 0.1
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .atlas import KuranishiAtlas, index_set
from .errors import ConfigError, KGlueError
from .examples import ExampleSpec, get_example

MUTATION_KINDS = ("translate_rho", "offset_section", "scale_epsilon", "perturb_tau")


@dataclass
class Mutation:
    kind: str
    options: dict = field(default_factory=dict)

    def indices(self, key: str, default=None):
        raw = self.options.get(key, default)
        if raw is None:
            raise ConfigError(f"mutation {self.kind} needs '{key}'")
        try:
            return index_set(raw if isinstance(raw, (list, tuple)) else [raw])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"mutation field '{key}' must be a list of integers") from exc

    def number(self, key: str, default: float) -> float:
        try:
            return float(self.options.get(key, default))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"mutation field '{key}' must be a number") from exc


@dataclass
class RunConfig:
    example: str
    params: dict = field(default_factory=dict)
    mutation: Mutation | None = None


def parse_config(data: Any) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(data) - {"example", "params", "mutation"}
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    name = data.get("example")
    if not isinstance(name, str) or not name:
        raise ConfigError("config needs an 'example' name")
    params = data.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError("'params' must be a mapping")
    mutation = None
    raw = data.get("mutation")
    if raw is not None:
        if not isinstance(raw, dict) or raw.get("kind") not in MUTATION_KINDS:
            raise ConfigError(f"mutation.kind must be one of {', '.join(MUTATION_KINDS)}")
        mutation = Mutation(raw["kind"], {k: v for k, v in raw.items() if k != "kind"})
    return RunConfig(name, params, mutation)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return parse_config(data)


def build_example(cfg: RunConfig) -> ExampleSpec:
    try:
        spec = get_example(cfg.example, **cfg.params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {cfg.example}: {exc}") from exc
    except KGlueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.mutation is not None and spec.atlas is not None:
        spec = replace(spec, atlas=mutate_atlas(spec.atlas, cfg.mutation))
    return spec


def mutate_atlas(atlas: KuranishiAtlas, mutation: Mutation) -> KuranishiAtlas:
    if mutation.kind == "translate_rho":
        lower, upper = mutation.indices("lower"), mutation.indices("upper")
        if (lower, upper) not in atlas.changes:
            raise ConfigError(f"atlas has no coordinate change {lower} -> {upper}")
        amount = mutation.number("amount", 0.1)
        rho = atlas.change(lower, upper).rho
        return atlas.replace_change(lower, upper, rho=lambda x, rho=rho: rho(x) + amount)
    if mutation.kind == "offset_section":
        chart = mutation.indices("chart")
        if chart not in atlas.charts:
            raise ConfigError(f"atlas has no chart {chart}")
        amount = mutation.number("amount", 0.1)
        section = atlas.charts[chart].section
        return atlas.replace_chart(chart, section=lambda x, s=section: np.asarray(s(x)) + amount)
    return atlas


def mutate_reduction(reduction, mutation: Mutation | None):
    if mutation is None or mutation.kind != "scale_epsilon":
        return reduction
    index = mutation.indices("index")
    if index not in reduction.eps:
        raise ConfigError(f"reduction has no constant for {index}")
    return reduction.scaled(index, mutation.number("factor", 10.0))


def mutate_glued(glued, mutation: Mutation | None):
    if mutation is None or mutation.kind != "perturb_tau":
        return glued
    glued.tau_shift = mutation.number("amount", 1e-3)
    return glued
