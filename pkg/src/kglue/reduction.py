"""Shrinkings of chart domains, constant systems and overlap covers.

Every reduced domain is carved out by a "top-set" test on the base: each
basic chart contributes a normalized depth score, shrunk by a fixed amount,
and an index set I is selected at a base point when the scores of its members
exceed all other scores by a fixed fraction of the largest score gap. Sets
selected this way at one point are nested, so closures of incomparable
selections never meet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import sampling
from .atlas import IndexSet, KuranishiAtlas, ProductStructure, is_proper_subset
from .errors import CoverError, InfeasibleError, PreconditionError
from .report import Report


def smoothstep(u: float) -> float:
    u = min(max(float(u), 0.0), 1.0)
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0)


def width_budget(atlas: KuranishiAtlas, J: IndexSet) -> float:
    """Collar width w_J: half the smallest piece width ending at J, capped below 1/(4|J|)."""
    widths = [ps.radius / 4.0 for ps in atlas.products if ps.upper == J]
    cap = 0.99 / (4 * len(J))
    return min(min(widths) / 2.0, cap) if widths else cap


@dataclass
class Reduction:
    atlas: KuranishiAtlas
    shrink_factor: float
    eps: dict[IndexSet, float]
    safety: float = 0.5
    levels: int = 0
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.levels = self.atlas.kappa + 1
        self._score_cache: dict[bytes, dict[int, float]] = {}

    # ---------------------------------------------------------- base scores
    def scores(self, xi) -> dict[int, float]:
        xi = np.asarray(xi, dtype=float)
        key = xi.tobytes()
        hit = self._score_cache.get(key)
        if hit is not None:
            return hit
        if len(self._score_cache) > 50_000:
            self._score_cache.clear()
        out = self._score_cache[key] = self._compute_scores(xi)
        return out

    def _compute_scores(self, xi: np.ndarray) -> dict[int, float]:
        out = {}
        for i in self.atlas.basic:
            ch = self.atlas.charts.get((i,))
            x = None if ch is None or ch.locate is None else ch.locate(np.asarray(xi, dtype=float))
            depth = 0.0 if x is None or not ch.domain.contains(x) else float(ch.domain.depth(x))
            out[i] = max(depth, 0.0) - self.shrink_factor
        return out

    def top_value(self, I: IndexSet, xi, scores: dict[int, float] | None = None) -> float:
        sc = self.scores(xi) if scores is None else scores
        vals = sorted((max(v, 0.0) for v in sc.values()), reverse=True) + [0.0]
        gap = max(a - b for a, b in zip(vals, vals[1:]))
        if gap <= 0.0:
            return -math.inf
        inside = min(sc[i] for i in I)
        outside = max((sc[j] for j in sc if j not in I), default=0.0)
        return (inside - max(outside, 0.0)) / gap

    def gap(self, level: int) -> float:
        if not 1 <= level <= self.levels:
            raise PreconditionError(f"level {level} outside 1..{self.levels}")
        return 0.45 - 0.25 * (level - 1) / self.atlas.kappa

    def eps_at(self, I: IndexSet, level: int | None = None) -> float:
        """Level-m constant eps^m_I; the outermost level stays strictly below eps_I."""
        m = self.levels if level is None else level
        return self.eps[I] * (m + 1) / (self.atlas.kappa + 3)

    def delta(self, I: IndexSet) -> float:
        """Obstruction radius of the thickened component M_I."""
        return self.eps_at(I, len(I))

    @property
    def eps_empty(self) -> float:
        return max(self.eps.values())

    def in_base(self, I: IndexSet, xi, level: int | None = None) -> bool:
        m = self.levels if level is None else level
        return self.top_value(I, xi) > self.gap(m)

    def chi(self, I: IndexSet, xi) -> float:
        """Cutoff: 1 on the level-|I| base region, 0 outside the level-(|I|+1) region."""
        lo, hi = self.gap(len(I) + 1), self.gap(len(I))
        return smoothstep((self.top_value(I, xi) - lo) / (hi - lo))

    def margin(self, level: int) -> float:
        return 0.005 * (self.levels + 1 - level)

    def contains(self, I: IndexSet, x, level: int | None = None) -> bool:
        m = self.levels if level is None else level
        ch = self.atlas.charts[I]
        x = np.asarray(x, dtype=float)
        if not ch.domain.contains(x) or ch.domain.depth(x) <= self.margin(m):
            return False
        if self.atlas.layout.norm(ch.section(x), I) >= self.eps_at(I, m):
            return False
        return self.in_base(I, ch.footprint(x), m)

    def overlap(self, I: IndexSet, J: IndexSet, x, level: int | None = None) -> bool:
        """x in V_I whose base point also lies in the level-|J| region of J, with a lift."""
        m = self.levels if level is None else level
        if not self.contains(I, x, m):
            return False
        xi = self.atlas.charts[I].footprint(np.asarray(x, dtype=float))
        return self.in_base(J, xi, max(len(J), 1) if level is None else level) and bool(
            self.atlas.change(I, J).lifts(x))

    def chain(self, xi, within: IndexSet | None = None, level: int | None = None) -> list[IndexSet]:
        m = self.levels if level is None else level
        sc = self.scores(xi)
        out = [H for H in self.atlas.poset
               if (within is None or set(H) <= set(within)) and self.top_value(H, xi, sc) > self.gap(m)]
        return sorted(out, key=len)

    def scaled(self, I: IndexSet, factor: float) -> "Reduction":
        eps = dict(self.eps)
        eps[I] = eps[I] * factor
        return replace(self, eps=eps, notes=dict(self.notes))

    def zero_points(self, I: IndexSet, n: int, seed: int, level: int | None = None) -> list[np.ndarray]:
        ch = self.atlas.charts[I]
        return [x for x in ch.zero_sampler(n, seed) if self.contains(I, x, level)]


# ----------------------------------------------------------------- epsilons


def choose_epsilons(atlas: KuranishiAtlas, reduction: Reduction | None = None, safety: float = 0.5,
                    samples: int = 256, seed: int = 0, shrink_factor: float = 0.2) -> dict[IndexSet, float]:
    """Downward scan on |I|: each constant is ``safety`` times the tightest bound above it."""
    if not 0.0 < safety < 1.0:
        raise PreconditionError("eps safety must lie in (0, 1)")
    kappa = atlas.kappa
    for ps in atlas.products:
        if not ps.radius > 0.0:
            raise InfeasibleError(f"product structure {ps.name or (ps.lower, ps.upper)} has radius {ps.radius}")
    probe = reduction or Reduction(atlas, shrink_factor, {I: 1.0 for I in atlas.poset})
    eps: dict[IndexSet, float] = {}
    for I in sorted(atlas.poset, key=lambda S: (-len(S), S)):
        bounds: list[tuple[float, str]] = []
        for J in atlas.poset:
            if is_proper_subset(I, J):
                bounds.append((eps[J] / kappa, f"eps{J}/kappa"))
                bounds.append((width_budget(atlas, J) ** 2, f"collar width of {J}"))
        for ps in atlas.products:
            if ps.lower == I:
                bounds.append((ps.radius / (kappa + 1), f"product {ps.name or (ps.lower, ps.upper)}"))
        if bounds:
            val, who = min(bounds)
            if not val > 0.0:
                raise InfeasibleError(f"no admissible eps for {I}: blocked by {who}")
            eps[I] = safety * val
        else:
            ch = atlas.charts[I]
            sup = 0.0
            for x in sampling.where(ch.domain.contains, ch.domain.lower, ch.domain.upper, samples, seed):
                if probe.in_base(I, ch.footprint(x)):
                    sup = max(sup, atlas.layout.norm(ch.section(x), I))
            eps[I] = 1.25 * sup if sup > 0.0 else 1.0
    return eps


def build_reduction(atlas: KuranishiAtlas, shrink_factor: float = 0.2, eps_safety: float = 0.5,
                    samples: int = 128, seed: int = 0) -> Reduction:
    if not 0.0 < shrink_factor < 1.0:
        raise PreconditionError("shrink factor must lie in (0, 1)")
    red = Reduction(atlas, float(shrink_factor), {I: 1.0 for I in atlas.poset}, eps_safety)
    red.eps = choose_epsilons(atlas, red, eps_safety, samples, seed)
    uncovered = []
    for xi in atlas.space_sampler(samples, seed + 1):
        if not _covered(red, xi):
            uncovered.append(np.asarray(xi, dtype=float))
    if uncovered:
        raise CoverError(
            f"shrinking by {shrink_factor} leaves {len(uncovered)} of {samples} zero samples uncovered",
            uncovered)
    return red


def _zero_over(red: Reduction, I: IndexSet, xi) -> np.ndarray | None:
    at = red.atlas
    for i in I:
        ch = at.charts.get((i,))
        if ch is None or ch.locate is None:
            continue
        x = ch.locate(np.asarray(xi, dtype=float))
        if x is None or not ch.domain.contains(x):
            continue
        if I == (i,):
            return x
        lifts = at.change((i,), I).lifts(x)
        if lifts:
            return lifts[0]
    return None


def _covered(red: Reduction, xi) -> bool:
    for I in red.chain(xi, level=1):
        x = _zero_over(red, I, xi)
        if x is not None and red.contains(I, x, 1):
            return True
    return False


# ------------------------------------------------------------------- cover


@dataclass
class CoverPiece:
    lower: IndexSet
    upper: IndexSet
    product: ProductStructure
    width: float
    contains: Callable[[np.ndarray], bool]


@dataclass
class OverlapCover:
    pieces: list[CoverPiece]

    def width(self, J: IndexSet) -> float:
        ws = [p.width for p in self.pieces if p.upper == J]
        cap = 0.99 / (4 * len(J))
        return min(min(ws) / 2.0, cap) if ws else cap


def build_overlap_cover(atlas: KuranishiAtlas, reduction: Reduction, samples: int = 128,
                        seed: int = 0) -> OverlapCover:
    """One piece per product structure, restricted to base points whose chain runs from its lower to its upper index."""
    red = reduction
    pieces = []
    for ps in sorted(atlas.products, key=lambda p: (len(p.lower), p.lower, p.upper)):
        def lift_pred(y, ps=ps):
            if not ps.contains(y) or not red.contains(ps.upper, y):
                return False
            ch = red.chain(atlas.charts[ps.upper].footprint(y))
            return bool(ch) and ch[0] == ps.lower and ch[-1] == ps.upper
        pieces.append(CoverPiece(ps.lower, ps.upper, ps, ps.radius / 4.0, lift_pred))
    cover = OverlapCover(pieces)
    have = {(p.lower, p.upper) for p in pieces}
    for xi in atlas.space_sampler(samples, seed + 5):
        ch = red.chain(xi)
        if len(ch) < 2:
            continue
        key = (ch[0], ch[-1])
        if key not in have:
            raise PreconditionError(f"overlap point {np.round(xi, 6).tolist()} has no product structure for {key}")
        y = _zero_over(red, ch[-1], xi)
        if y is not None and red.contains(ch[-1], y) and not atlas.product(*key).contains(y):
            raise PreconditionError(f"overlap point {np.round(xi, 6).tolist()} lies outside product structure {key}")
    return cover


def check_compatibility(atlas: KuranishiAtlas, reduction: Reduction, cover: OverlapCover,
                        samples: int = 128, seed: int = 0, tol: float = 1e-9) -> Report:
    red = reduction
    kappa = atlas.kappa
    rep = Report(f"compatibility {atlas.name}")
    P = atlas.poset

    # (a') separation of incomparable footprints
    feet = {I: [atlas.charts[I].footprint(x) for x in red.zero_points(I, samples, seed + 3 * k)]
            for k, I in enumerate(P)}
    dists = []
    for I in P:
        for J in P:
            if I < J and not (set(I) <= set(J) or set(J) <= set(I)) and feet[I] and feet[J]:
                a, b = np.array(feet[I]), np.array(feet[J])
                d = np.min(np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2))
                dists.append(float(d))
    sep = min(dists) if dists else math.inf
    rep.add("separation", [0.0 if d > 1e-9 else 1.0 for d in dists], tol,
            note=f"delta0={sep / 2:.4g}" if dists else "no incomparable pairs")
    rep.extra["delta0"] = sep / 2 if dists else None

    # (b') constant ordering
    ratios = [kappa * red.eps[I] / red.eps[J] for I in P for J in P if is_proper_subset(I, J)]
    rep.add("eps_ordering", [max(0.0, r - 1.0 + 1e-12) for r in ratios], tol,
            note=f"max kappa*eps_I/eps_J={max(ratios):.4g}" if ratios else "")

    # (c') section bound on reduced domains
    res = []
    for k, I in enumerate(P):
        ch = atlas.charts[I]
        pts = sampling.where(lambda x: red.contains(I, x), ch.domain.lower, ch.domain.upper, samples // 2,
                             seed + 7 * k, max_rounds=2)
        for x in list(pts) + red.zero_points(I, samples // 4, seed + 11 * k):
            res.append(max(0.0, atlas.layout.norm(ch.section(x), I) / red.eps[I] - 1.0 + 1e-12))
    rep.add("section_bound", res, tol)

    # (d') thickened product neighbourhoods stay inside the reduced domain
    res = []
    for k, ps in enumerate(atlas.products):
        I, K = ps.lower, ps.upper
        rest = tuple(j for j in K if j not in I)
        ys = []
        for x in red.zero_points(I, samples, seed + 13 * k):
            if red.in_base(K, atlas.charts[I].footprint(x)):
                ys.extend(y for y in atlas.change(I, K).lifts(x) if red.contains(K, y))
        fs = sampling.ball(atlas.layout.size(rest), (kappa + 1) * red.eps[I], max(len(ys), 1), seed + 17 * k)
        for y, f in zip(ys, fs):
            res.append(0.0 if red.contains(K, ps.phi(f, y)) else 1.0)
    rep.add("product_containment", res, tol)

    # collar compatibility: sqrt(eps_I) <= w_J
    res, worst = [], ""
    for I in P:
        for J in P:
            if is_proper_subset(I, J):
                gap = math.sqrt(red.eps[I]) - cover.width(J)
                res.append(max(0.0, gap))
                if gap > 0 and not worst:
                    worst = f"sqrt(eps{I})={math.sqrt(red.eps[I]):.4g} > w{J}={cover.width(J):.4g}"
    rep.add("collar_compatibility", res, tol, note=worst)

    # cover ordering and locality
    sizes = [len(p.lower) for p in cover.pieces]
    rep.add("cover_order", [0.0 if a <= b else 1.0 for a, b in zip(sizes, sizes[1:])], tol)
    res = []
    for k, piece in enumerate(cover.pieces):
        for H in P:
            for x in red.zero_points(H, samples // 4, seed + 19 * k):
                xi = atlas.charts[H].footprint(x)
                y = _zero_over(red, piece.upper, xi)
                if y is None or not piece.contains(y):
                    continue
                res.append(0.0 if set(piece.lower) <= set(H) <= set(piece.upper) else 1.0)
    rep.add("cover_locality", res, tol)
    return rep


@dataclass
class ShrinkingChain:
    """Nested level views of one reduction; level m uses gap c_m and constants eps^m."""

    reduction: Reduction

    @property
    def levels(self) -> list[int]:
        return list(range(1, self.reduction.levels + 1))

    def contains(self, I: IndexSet, x, level: int) -> bool:
        return self.reduction.contains(I, x, level)

    def check_nesting(self, samples: int = 128, seed: int = 0) -> Report:
        red = self.reduction
        rep = Report("shrinking chain nesting")
        res = []
        for k, I in enumerate(red.atlas.poset):
            ch = red.atlas.charts[I]
            pts = sampling.where(ch.domain.contains, ch.domain.lower, ch.domain.upper, samples, seed + k)
            for x in pts:
                for m in self.levels[:-1]:
                    if red.contains(I, x, m) and not red.contains(I, x, m + 1):
                        res.append(1.0)
                    else:
                        res.append(0.0)
        rep.add("nested_levels", res, 1e-12)
        eps_ok = [0.0 if red.eps_at(I, m) <= red.eps_at(I, m + 1) else 1.0
                  for I in red.atlas.poset for m in self.levels[:-1]]
        rep.add("eps_monotone", eps_ok, 1e-12)
        return rep

