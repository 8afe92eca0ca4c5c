"""Command-line front end.

Exit status: 0 when every check passes, 1 when a check fails, and the
error's own code (2 to 11) when a stage cannot run at all.
"""

from __future__ import annotations

import functools
import math
import sys
from collections import Counter
from fractions import Fraction
from pathlib import Path

import click
import numpy as np

from .atlas import validate_atlas
from .collar import build_collars, check_collars, check_width_bookkeeping
from .config import RunConfig, build_example, load_config, mutate_glued, mutate_reduction
from .errors import ConfigError, KGlueError, PreconditionError
from .examples import ExampleSpec
from .gluing import GluedCategory, check_category
from .reduction import ShrinkingChain, build_overlap_cover, build_reduction, check_compatibility
from .report import Report
from .vfc import count_report, count_zeros, euler_number, perturb, zero_set


def _options(fn):
    opts = [
        click.option("--example", "example", default=None, help="Built-in example name."),
        click.option("--p", "p", type=int, default=None, help="First cone order (football)."),
        click.option("--q", "q", type=int, default=None, help="Second cone order (football)."),
        click.option("--file", "file", type=click.Path(dir_okay=False), default=None, help="YAML run config."),
        click.option("--tol", type=float, default=1e-9, show_default=True, help="Residual tolerance."),
        click.option("--grid", type=int, default=None, help="Grid points per axis for zero search."),
        click.option("--shrink-factor", type=float, default=0.2, show_default=True),
        click.option("--eps-safety", type=float, default=0.5, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--magnitude", type=float, default=0.5, show_default=True, help="Perturbation size in (0, 1)."),
        click.option("--samples", type=int, default=64, show_default=True, help="Samples per check."),
        click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the report here."),
        click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="text", show_default=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)

    @functools.wraps(fn)
    def wrapper(**kw):
        try:
            if kw["tol"] <= 0 or kw["samples"] <= 0 or (kw["grid"] is not None and kw["grid"] < 3):
                raise ConfigError("--tol and --samples must be positive, --grid at least 3")
            report = fn(_resolve(kw), kw)
        except KGlueError as exc:
            click.echo(f"error ({type(exc).__name__}): {exc}", err=True)
            sys.exit(exc.exit_code)
        _emit(report, kw)
        sys.exit(0 if report.passed else 1)

    return wrapper


def _resolve(kw) -> RunConfig:
    if kw["file"]:
        cfg = load_config(kw["file"])
        if kw["example"]:
            cfg.example = kw["example"]
    elif kw["example"]:
        cfg = RunConfig(kw["example"])
    else:
        raise ConfigError("give --example or --file")
    for key in ("p", "q"):
        if kw[key] is not None:
            cfg.params[key] = kw[key]
    return cfg


def _emit(report: Report, kw) -> None:
    body = report.to_json() if kw["fmt"] == "json" else report.to_text()
    if kw["out"]:
        Path(kw["out"]).write_text(body + "\n")
        click.echo(report.to_text() if kw["fmt"] == "json" else body)
    else:
        click.echo(body)


def _atlas_spec(cfg: RunConfig) -> ExampleSpec:
    spec = build_example(cfg)
    if spec.atlas is None:
        raise PreconditionError(f"example {cfg.example} has no atlas")
    return spec


def _pipeline(spec: ExampleSpec, cfg: RunConfig, kw):
    atlas = spec.atlas
    red = build_reduction(atlas, kw["shrink_factor"], kw["eps_safety"])
    red = mutate_reduction(red, cfg.mutation)
    cover = build_overlap_cover(atlas, red)
    collars = build_collars(atlas, red, cover)
    glued = mutate_glued(GluedCategory(atlas, red, cover, collars), cfg.mutation)
    return red, cover, collars, glued


def _count(spec: ExampleSpec, glued: GluedCategory, kw, title: str) -> Report:
    pert = perturb(glued, spec.base_fields, kw["seed"], kw["magnitude"])
    result = count_zeros(glued, pert, kw["grid"], seed=kw["seed"])
    return count_report(result, title, spec.expected_count)


@click.group()
def main():
    """Gluing Kuranishi charts into weighted branched manifolds and counting zeros."""


@main.command()
@_options
def validate(cfg: RunConfig, kw) -> Report:
    """Check the atlas axioms at deterministic samples."""
    spec = _atlas_spec(cfg)
    return validate_atlas(spec.atlas, kw["samples"], kw["tol"], kw["seed"])


@main.command()
@_options
def reduce(cfg: RunConfig, kw) -> Report:
    """Build a reduction, constants and overlap cover, and check their compatibility."""
    spec = _atlas_spec(cfg)
    red, cover, collars, _ = _pipeline(spec, cfg, kw)
    rep = check_compatibility(spec.atlas, red, cover, kw["samples"], kw["seed"], kw["tol"])
    rep.merge(ShrinkingChain(red).check_nesting(kw["samples"], kw["seed"]))
    rep.extra["eps"] = {"".join(map(str, I)): v for I, v in red.eps.items()}
    rep.extra["cover_pieces"] = [p.product.name or f"{list(p.lower)}->{list(p.upper)}" for p in cover.pieces]
    return rep


@main.command()
@_options
def glue(cfg: RunConfig, kw) -> Report:
    """Build collars and the glued category and check their identities."""
    spec = _atlas_spec(cfg)
    red, cover, collars, glued = _pipeline(spec, cfg, kw)
    rep = Report(f"glue {spec.atlas.name}")
    rep.merge(check_width_bookkeeping(collars))
    rep.merge(check_collars(collars, kw["samples"], kw["seed"], kw["tol"]))
    rep.merge(check_category(glued, kw["samples"], kw["seed"], kw["tol"]))
    rep.merge(zero_set(glued, kw["samples"], kw["seed"], kw["tol"]))
    return rep


@main.command()
@_options
def weights(cfg: RunConfig, kw) -> Report:
    """Tabulate the weighting at sampled points."""
    spec = build_example(cfg)
    if spec.branched is not None:
        return _branched_weights(spec, kw)
    if spec.atlas is None:
        raise PreconditionError(f"example {cfg.example} has no weighting")
    _, _, _, glued = _pipeline(spec, cfg, kw)
    at = glued.atlas
    rep = Report(f"weights {at.name}")
    table = {}
    res = []
    for k, J in enumerate(at.poset):
        counts: Counter = Counter()
        for e, x in glued.component_samples(J, kw["samples"], kw["seed"] + 11 * k):
            w = glued.weight(J, e, x)
            counts[str(w)] += 1
            allowed = {Fraction(1, at.gamma_order(H)) for H in at.poset if set(H) <= set(J)}
            res.append(0.0 if w in allowed else 1.0)
        table["".join(map(str, J))] = dict(counts)
    rep.add("weight_values", res, 0.5, note="each weight is 1/|Gamma_H| for some H below the component")
    cat = check_category(glued, max(kw["samples"] // 2, 8), kw["seed"], kw["tol"])
    rep.add_row(cat.row("weighting"))
    rep.extra["weights"] = table
    return rep


def _branched_weights(spec: ExampleSpec, kw) -> Report:
    br = spec.branched
    rep = Report(f"weights {spec.name}")
    rng = np.random.default_rng(kw["seed"])
    a0, a1 = br.arc
    on = rng.uniform(a0, a1, 10)
    off = rng.uniform(a1, a0 + 2 * math.pi, 10) % (2 * math.pi)
    rows = []
    for th in on:
        rows.append({"theta": float(th), "weight": br.weight("a", th)})
    for th in off:
        rows.append({"theta": float(th), "weight": br.weight("a", th)})
    exp_on, exp_off = spec.expected_weights["arc"], spec.expected_weights["off_arc"]
    rep.add("arc_weight", [float(abs(r["weight"] - exp_on)) for r in rows[:10]], 1e-15, note=f"expected {exp_on}")
    rep.add("off_arc_weight", [float(abs(r["weight"] - exp_off)) for r in rows[10:]], 1e-15,
            note=f"expected {exp_off}")
    rep.merge(br.check_weighting(samples=50, seed=kw["seed"]))
    rep.extra["points"] = rows
    return rep


@main.command()
@_options
def count(cfg: RunConfig, kw) -> Report:
    """Weighted signed count of perturbed zeros (virtual dimension zero)."""
    spec = _atlas_spec(cfg)
    _, _, _, glued = _pipeline(spec, cfg, kw)
    return _count(spec, glued, kw, f"count {spec.atlas.name}")


@main.command()
@_options
def euler(cfg: RunConfig, kw) -> Report:
    """Euler number of a framed bundle spec (atlas examples use the glued count)."""
    spec = build_example(cfg)
    if spec.bundle is not None:
        result = euler_number(spec.bundle, kw["seed"], kw["magnitude"], kw["grid"],
                              kw["shrink_factor"], kw["eps_safety"])
        return count_report(result, f"euler {spec.name}", spec.expected_count)
    if spec.atlas is None:
        raise PreconditionError(f"example {cfg.example} has no bundle or atlas")
    _, _, _, glued = _pipeline(spec, cfg, kw)
    rep = _count(spec, glued, kw, f"euler {spec.atlas.name}")
    rep.extra["route"] = "glued atlas count"
    return rep


@main.command()
@_options
def example(cfg: RunConfig, kw) -> Report:
    """Run a named example end to end and compare with its expected values."""
    spec = build_example(cfg)
    rep = Report(f"example {spec.name}")
    if spec.branched is not None:
        rep.merge(_branched_weights(spec, kw))
        return rep
    if spec.bundle is not None:
        result = euler_number(spec.bundle, kw["seed"], kw["magnitude"], kw["grid"],
                              kw["shrink_factor"], kw["eps_safety"])
        sub = count_report(result, "euler", spec.expected_count)
        rep.merge(sub)
        rep.extra.update(total=sub.extra["total"], total_str=sub.extra["total_str"])
        return rep
    at = spec.atlas
    rep.merge(validate_atlas(at, kw["samples"], kw["tol"], kw["seed"]), "validate.")
    red, cover, collars, glued = _pipeline(spec, cfg, kw)
    rep.merge(check_compatibility(at, red, cover, kw["samples"], kw["seed"], kw["tol"]), "reduce.")
    rep.merge(check_collars(collars, kw["samples"], kw["seed"], kw["tol"]), "glue.")
    rep.merge(check_category(glued, kw["samples"], kw["seed"], kw["tol"]), "glue.")
    sub = _count(spec, glued, kw, "count")
    rep.merge(sub, "count.")
    rep.extra.update(total=sub.extra["total"], total_str=sub.extra["total_str"])
    return rep


if __name__ == "__main__":  # pragma: no cover
    main()
