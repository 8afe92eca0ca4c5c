"""Perturbed zero counting on the glued category and Euler numbers of bundles.

Each component M_J is searched on its own: a grid over a box around the
reduced zero set picks local minima of |S + nu|, damped Newton refines them,
and zeros that also lie in the attaching domain of a larger component are
left to that component. Each surviving zero contributes sign / |Gamma_J|.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import sampling
from .atlas import Chart, FiniteGroup, IndexSet, KuranishiAtlas, ObstructionLayout, is_proper_subset
from .errors import DomainError, EvaluationError, PreconditionError, StructuralError, TransversalityError
from .gluing import GluedCategory, build_glued
from .reduction import build_overlap_cover, build_reduction, smoothstep
from .report import Report

GRID_BUDGET = 20_000
CONDITION_LIMIT = 1e6


@dataclass
class Perturbation:
    glued: GluedCategory
    fields: dict[int, Callable[[np.ndarray], np.ndarray]]
    scale: float
    magnitude: float
    seed: int

    def mixing(self, I: IndexSet, xi) -> dict[int, float]:
        """Smooth weights over the members of I, favouring the deepest basic chart."""
        if len(I) == 1:
            return {I[0]: 1.0}
        red = self.glued.reduction
        sc = red.scores(xi)
        vals = sorted((max(v, 0.0) for v in sc.values()), reverse=True) + [0.0]
        gap = max(a - b for a, b in zip(vals, vals[1:])) or 1.0
        width = 2.0 * red.gap(red.levels) * gap
        raw = {i: smoothstep((sc[i] - max(sc[j] for j in I if j != i)) / width + 0.5) for i in I}
        total = sum(raw.values())
        if total <= 0.0:
            return {i: 1.0 / len(I) for i in I}
        return {i: v / total for i, v in raw.items()}

    def chart_value(self, I: IndexSet, x) -> np.ndarray:
        """nu_I(x) in E_I."""
        at = self.glued.atlas
        lay = at.layout
        x = np.asarray(x, dtype=float)
        out = lay.zeros(I)
        if self.scale == 0.0:
            return out
        weights = self.mixing(I, at.charts[I].footprint(x))
        for i, w in weights.items():
            if w == 0.0:
                continue
            if I == (i,):
                y = x
            else:
                _, base = at.product((i,), I).project(x)
                y = at.change((i,), I).rho(base)
            out = out + w * lay.embed(np.asarray(self.fields[i](y), dtype=float), (i,), I)
        return self.scale * out

    def value(self, J: IndexSet, e, x) -> np.ndarray:
        at = self.glued.atlas
        return at.layout.embed(self.chart_value(J, x), J, at.basic)


def perturb(glued: GluedCategory, base_fields: Callable[[int], dict], seed: int = 0, magnitude: float = 0.5,
            samples: int = 64) -> Perturbation:
    """Scale the base fields so that |nu| stays below ``magnitude`` times the smallest basic constant."""
    if not 0.0 <= magnitude < 1.0:
        raise PreconditionError("perturbation magnitude must lie in [0, 1)")
    at = glued.atlas
    red = glued.reduction
    fields = base_fields(seed)
    missing = [i for i in at.basic if i not in fields]
    if missing:
        raise StructuralError(f"no base field for basic charts {missing}")
    peak = 0.0
    for k, i in enumerate(at.basic):
        ch = at.charts[(i,)]
        pts = list(ch.zero_sampler(samples, seed + k)) + list(
            sampling.where(ch.domain.contains, ch.domain.lower, ch.domain.upper, samples, seed + 17 * k, max_rounds=2))
        for x in pts:
            peak = max(peak, at.layout.norm(fields[i](x), (i,)))
    floor = min(red.eps[(i,)] for i in at.basic if (i,) in red.eps)
    scale = 0.0 if magnitude == 0.0 or peak == 0.0 else magnitude * floor / peak
    return Perturbation(glued, fields, scale, float(magnitude), int(seed))


# ---------------------------------------------------------------- zero search


@dataclass
class ZeroRecord:
    component: IndexSet
    e: np.ndarray
    x: np.ndarray
    sign: int
    weight: Fraction
    residual: float
    condition: float
    footprint: np.ndarray

    def as_dict(self) -> dict:
        return {"component": list(self.component), "e": self.e.tolist(), "x": self.x.tolist(),
                "sign": self.sign, "weight": self.weight, "residual": self.residual,
                "condition": self.condition, "footprint": self.footprint.tolist()}


@dataclass
class VfcResult:
    total: Fraction
    zeros: list[ZeroRecord]
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"total": self.total, "total_str": str(self.total),
                "zeros": [z.as_dict() for z in self.zeros], "diagnostics": self.diagnostics}


def _search_box(glued: GluedCategory, J: IndexSet, seed: int) -> tuple[np.ndarray, np.ndarray]:
    at = glued.atlas
    red = glued.reduction
    ch = at.charts[J]
    zeros = red.zero_points(J, 256, seed, level=len(J))
    if zeros:
        pts = np.array(zeros)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pad = np.maximum(0.1 * (hi - lo), 2.0 * red.eps_at(J, len(J)))
        lo, hi = np.maximum(lo - pad, ch.domain.lower), np.minimum(hi + pad, ch.domain.upper)
    else:
        lo, hi = np.array(ch.domain.lower, dtype=float), np.array(ch.domain.upper, dtype=float)
    d = glued.delta(J)
    ne = at.layout.size(at.complement(J))
    return np.concatenate([np.full(ne, -d), lo]), np.concatenate([np.full(ne, d), hi])


def _grid_axis(count: int) -> int:
    return count if count % 2 else count + 1


def _local_minima(values: np.ndarray) -> np.ndarray:
    """Flat indices of grid points not exceeding any axis neighbour."""
    keep = np.isfinite(values)
    for ax in range(values.ndim):
        for step in (1, -1):
            nb = np.roll(values, step, axis=ax)
            edge = [slice(None)] * values.ndim
            edge[ax] = 0 if step == 1 else -1
            nb[tuple(edge)] = np.inf
            keep &= values <= nb
    return np.flatnonzero(keep)


def _jacobian(fn, z: np.ndarray, steps: np.ndarray) -> np.ndarray:
    cols = []
    for k in range(z.size):
        h = np.zeros_like(z)
        h[k] = steps[k]
        cols.append((fn(z + h) - fn(z - h)) / (2.0 * steps[k]))
    return np.column_stack(cols)


def _newton(fn, z0, steps, tol, max_iter: int = 60):
    z = np.asarray(z0, dtype=float)
    fz = fn(z)
    nz = float(np.linalg.norm(fz))
    for _ in range(max_iter):
        if not math.isfinite(nz):
            return None
        if nz < tol:
            return z
        jac = _jacobian(fn, z, steps)
        if not np.all(np.isfinite(jac)):
            return None
        try:
            dz = np.linalg.lstsq(jac, -fz, rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        while lam > 1e-6:
            cand = z + lam * dz
            fc = fn(cand)
            nc = float(np.linalg.norm(fc))
            if math.isfinite(nc) and nc < nz:
                z, fz, nz = cand, fc, nc
                break
            lam *= 0.5
        else:
            return z if nz < tol else None
    return z if nz < tol else None


def component_zeros(glued: GluedCategory, pert: Perturbation | None, J: IndexSet, grid: int | None = None,
                    refine_tol: float = 1e-10, seed: int = 0, max_starts: int = 200) -> tuple[list[ZeroRecord], dict]:
    at = glued.atlas
    lay = at.layout
    rest = at.complement(J)
    ne = lay.size(rest)
    lo, hi = _search_box(glued, J, seed)
    dim = lo.size
    if dim != lay.size(at.basic) + at.dim:
        raise PreconditionError("zero counting needs virtual dimension zero")
    per_axis = _grid_axis(grid or max(3, int(round(GRID_BUDGET ** (1.0 / dim)))))
    extent = np.maximum(hi - lo, 1e-12)

    def F(z):
        e, x = z[:ne], z[ne:]
        if not at.charts[J].domain.contains(x):
            return np.full(lay.size(at.basic), np.inf)
        try:
            val = glued.section(J, e, x)
            if pert is not None:
                val = val + pert.value(J, e, x)
        except (DomainError, EvaluationError):
            return np.full(lay.size(at.basic), np.inf)
        return val

    axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
    pts = np.array(list(itertools.product(*axes)))
    norms = np.array([float(np.linalg.norm(F(z))) for z in pts]).reshape((per_axis,) * dim)
    starts = _local_minima(norms)
    starts = starts[np.argsort(norms.ravel()[starts])][:max_starts]
    steps = 1e-6 * extent
    found: list[ZeroRecord] = []
    rejected = {"outside": 0, "attached_higher": 0}
    for idx in starts:
        z = _newton(F, pts[idx], steps, refine_tol)
        if z is None:
            continue
        e, x = z[:ne], z[ne:]
        if not glued.in_component(J, e, x):
            rejected["outside"] += 1
            continue
        if any(is_proper_subset(J, K) and glued.in_overlap(J, K, e, x) for K in at.poset):
            rejected["attached_higher"] += 1
            continue
        if any(float(np.max(np.abs(z - np.concatenate([r.e, r.x])) / extent)) < 1e-6 for r in found):
            continue
        jac = _jacobian(F, z, steps)
        cond = float(np.linalg.cond(jac))
        if not math.isfinite(cond) or cond > CONDITION_LIMIT:
            raise TransversalityError(
                f"zero in component {J} has Jacobian condition {cond:.3g}; try another seed")
        sign = int(np.sign(np.linalg.det(jac))) * at.charts[J].orientation
        found.append(ZeroRecord(J, e, x, sign, Fraction(1, at.gamma_order(J)),
                                float(np.linalg.norm(F(z))), cond, at.charts[J].footprint(x)))
    diag = {"grid_per_axis": per_axis, "grid_points": int(pts.shape[0]), "starts": int(len(starts)),
            "box_lower": lo.tolist(), "box_upper": hi.tolist(), **rejected}
    return found, diag


def count_zeros(glued: GluedCategory, pert: Perturbation | None, grid: int | None = None,
                refine_tol: float = 1e-10, seed: int = 0) -> VfcResult:
    zeros: list[ZeroRecord] = []
    diags = {}
    results = sampling.pmap(lambda J: component_zeros(glued, pert, J, grid, refine_tol, seed),
                            glued.atlas.poset)
    for J, (found, diag) in zip(glued.atlas.poset, results):
        zeros.extend(found)
        diags["".join(map(str, J))] = diag
    total = sum((z.sign * z.weight for z in zeros), Fraction(0))
    diags["perturbation_scale"] = None if pert is None else pert.scale
    return VfcResult(total, zeros, diags)


def count_report(result: VfcResult, title: str, expected: Fraction | None = None,
                 tol: float = 1e-8) -> Report:
    rep = Report(title)
    rep.add("zero_residual", [z.residual for z in result.zeros], tol)
    if expected is not None:
        rep.add("expected_total", [float(abs(result.total - expected))], 1e-15,
                note=f"total {result.total} expected {expected}")
    rep.extra["total"] = result.total
    rep.extra["total_str"] = str(result.total)
    rep.extra["zeros"] = [z.as_dict() for z in result.zeros]
    rep.extra["diagnostics"] = result.diagnostics
    return rep


# ------------------------------------------------------------ unperturbed set


def zero_set(glued: GluedCategory, samples: int = 100, seed: int = 0, tol: float = 1e-9) -> Report:
    """Zero set of the glued section: confinement, footprint cover of X, injectivity mod the group."""
    from .reduction import _zero_over

    at = glued.atlas
    red = glued.reduction
    lay = at.layout
    rep = Report(f"zero set {at.name}")
    conf, cover, inj = [], [], []
    for k, J in enumerate(at.poset):
        for x in red.zero_points(J, samples, seed + k, level=len(J)):
            e = np.zeros(lay.size(at.complement(J)))
            conf.append(float(np.max(np.abs(glued.section(J, e, x)))))
    for xi in at.space_sampler(samples, seed + 99):
        best = math.inf
        for J in at.poset:
            x = _zero_over(red, J, xi)
            if x is None or not red.contains(J, x, len(J)):
                continue
            best = min(best, float(np.linalg.norm(at.charts[J].footprint(x) - xi)))
        cover.append(best)
    for i in at.basic:
        ch = at.charts[(i,)]
        if ch.locate is None:
            continue
        for x in red.zero_points((i,), samples // 4, seed + 7 * i, level=1):
            y = ch.locate(ch.footprint(x))
            inj.append(math.inf if y is None else min(
                float(np.linalg.norm(ch.act(g, x) - y)) for g in at.group_elements((i,))))
    rep.add("zero_confinement", conf, tol)
    rep.add("footprint_cover", cover, tol, note="every X sample is the footprint of a reduced zero")
    rep.add("quotient_injective", inj, 1e-7)
    return rep


# ---------------------------------------------------------------- Euler route


def bundle_atlas(spec) -> tuple[KuranishiAtlas, dict]:
    """Single-chart atlas for a framed bundle spec; the frame must be invertible at zero samples."""
    dom = spec.domain
    zs = spec.zero_sampler(64, 0)
    if len(zs) == 0:
        zs = dom.sample(16, 0)
    rank = None
    for v in zs:
        s = np.asarray(spec.section(v), dtype=float)
        frame = np.asarray(spec.frame(v), dtype=float)
        rank = s.size
        if frame.shape != (rank, rank) or abs(np.linalg.det(frame)) <= 1e-9:
            raise StructuralError(f"frame of {spec.name} is not an isomorphism at a zero sample")
    if rank is None:
        rank = int(np.asarray(spec.section(dom.sample(1, 0)[0])).size)
    layout = ObstructionLayout({1: rank})
    chart = Chart(index=(1,), domain=dom, section=lambda v: np.asarray(spec.section(v), dtype=float),
                  footprint=spec.footprint, act=lambda g, v: v, zero_sampler=spec.zero_sampler, locate=spec.locate)
    atlas = KuranishiAtlas(
        name=spec.name, dim=dom.dim - rank, layout=layout, groups={1: FiniteGroup.cyclic(1)},
        reps={1: [np.eye(rank)]}, charts={(1,): chart}, changes={}, products=[],
        space_sampler=spec.space_sampler)
    return atlas, {1: lambda v, seed: np.asarray(spec.field(v, seed), dtype=float)}


def euler_number(spec, seed: int = 0, magnitude: float = 0.5, grid: int | None = None,
                 shrink_factor: float = 0.2, eps_safety: float = 0.5) -> VfcResult:
    atlas, fields = bundle_atlas(spec)
    red = build_reduction(atlas, shrink_factor, eps_safety)
    glued = build_glued(atlas, red, build_overlap_cover(atlas, red))
    pert = perturb(glued, lambda s: {1: (lambda v, s=s: fields[1](v, s))}, seed, magnitude)
    return count_zeros(glued, pert, grid, seed=seed)


def virtual_count(atlas: KuranishiAtlas, base_fields, seed: int = 0, magnitude: float = 0.5,
                  grid: int | None = None, shrink_factor: float = 0.2, eps_safety: float = 0.5) -> VfcResult:
    red = build_reduction(atlas, shrink_factor, eps_safety)
    glued = build_glued(atlas, red, build_overlap_cover(atlas, red))
    return count_zeros(glued, perturb(glued, base_fields, seed, magnitude), grid, seed=seed)
