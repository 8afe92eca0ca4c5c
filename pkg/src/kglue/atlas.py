"""Evaluable Kuranishi atlases and numerical axiom validation.

Index sets are sorted tuples of basic indices. Composite obstruction vectors
are flat arrays whose blocks follow the sorted index order; group elements of
a product group are tuples aligned with the same order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import sampling
from .errors import DomainError, EvaluationError, StructuralError
from .report import Report

IndexSet = tuple[int, ...]


def index_set(items: Iterable[int]) -> IndexSet:
    return tuple(sorted(set(int(i) for i in items)))


def is_proper_subset(a: IndexSet, b: IndexSet) -> bool:
    return len(a) < len(b) and set(a) <= set(b)


class FiniteGroup:
    """A finite group given by its multiplication table on elements 0..n-1."""

    def __init__(self, table: Sequence[Sequence[int]], name: str = ""):
        tab = np.asarray(table, dtype=int)
        n = tab.shape[0]
        if tab.shape != (n, n) or n == 0:
            raise StructuralError("group table must be a non-empty square array")
        if tab.min() < 0 or tab.max() >= n:
            raise StructuralError("group table entries out of range")
        idents = [e for e in range(n) if all(tab[e, a] == a and tab[a, e] == a for a in range(n))]
        if len(idents) != 1:
            raise StructuralError("group table has no unique identity")
        self.identity = idents[0]
        for row in tab:
            if len(set(row.tolist())) != n:
                raise StructuralError("group table rows are not permutations")
        for a, b, c in itertools.product(range(n), repeat=3):
            if tab[tab[a, b], c] != tab[a, tab[b, c]]:
                raise StructuralError("group table is not associative")
        self.table = tab
        self.order = n
        self.name = name or f"G{n}"
        self._inv = [int(np.flatnonzero(tab[a] == self.identity)[0]) for a in range(n)]

    @classmethod
    def cyclic(cls, n: int) -> "FiniteGroup":
        if n < 1:
            raise StructuralError("cyclic group order must be positive")
        return cls([[(a + b) % n for b in range(n)] for a in range(n)], name=f"Z/{n}")

    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def inverse(self, a: int) -> int:
        return self._inv[a]

    def elements(self) -> range:
        return range(self.order)


class ObstructionLayout:
    """Block layout of composite obstruction spaces E_I = prod_{i in I} E_i."""

    def __init__(self, dims: Mapping[int, int]):
        if not dims:
            raise StructuralError("no basic indices")
        self.dims = {int(k): int(v) for k, v in sorted(dims.items())}
        self.basic: IndexSet = tuple(self.dims)

    def size(self, I: IndexSet) -> int:
        return sum(self.dims[i] for i in I)

    def slices(self, I: IndexSet) -> dict[int, slice]:
        out, pos = {}, 0
        for i in I:
            out[i] = slice(pos, pos + self.dims[i])
            pos += self.dims[i]
        return out

    def zeros(self, I: IndexSet) -> np.ndarray:
        return np.zeros(self.size(I))

    def block(self, vec, I: IndexSet, i: int) -> np.ndarray:
        return np.asarray(vec, dtype=float)[self.slices(I)[i]]

    def restrict(self, vec, I: IndexSet, K: IndexSet) -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        sl = self.slices(I)
        if not K:
            return np.zeros(0)
        return np.concatenate([vec[sl[k]] for k in K])

    def embed(self, vec, K: IndexSet, I: IndexSet) -> np.ndarray:
        out = self.zeros(I)
        sl_i, sl_k = self.slices(I), self.slices(K)
        vec = np.asarray(vec, dtype=float)
        for k in K:
            out[sl_i[k]] = vec[sl_k[k]]
        return out

    def join(self, parts: Mapping[int, np.ndarray], I: IndexSet) -> np.ndarray:
        if not I:
            return np.zeros(0)
        return np.concatenate([np.asarray(parts[i], dtype=float).reshape(self.dims[i]) for i in I])

    def split(self, vec, I: IndexSet) -> dict[int, np.ndarray]:
        vec = np.asarray(vec, dtype=float)
        return {i: vec[s] for i, s in self.slices(I).items()}

    def norm(self, vec, I: IndexSet) -> float:
        vec = np.asarray(vec, dtype=float)
        return max((float(np.linalg.norm(vec[s])) for s in self.slices(I).values()), default=0.0)


def sup_norm(e: Mapping[int, Sequence[float]], J: Iterable[int]) -> float:
    """Sup over i in J of the Euclidean norm of the component e[i]."""
    best = 0.0
    for i in J:
        if i not in e:
            raise StructuralError(f"composite vector has no component for index {i}")
        best = max(best, float(np.linalg.norm(np.atleast_1d(np.asarray(e[i], dtype=float)))))
    return best


@dataclass(frozen=True)
class Domain:
    """Open subset of R^n: positive ``depth`` means inside; box bounds the set."""

    depth: Callable[[np.ndarray], float]
    lower: np.ndarray
    upper: np.ndarray

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != np.shape(self.lower) or not np.all(np.isfinite(x)):
            return False
        return bool(self.depth(x) > 0.0)

    @property
    def dim(self) -> int:
        return int(np.size(self.lower))

    def sample(self, n: int, seed: int) -> np.ndarray:
        return sampling.where(self.contains, self.lower, self.upper, n, seed)


@dataclass(frozen=True)
class Chart:
    index: IndexSet
    domain: Domain
    section: Callable[[np.ndarray], np.ndarray]
    footprint: Callable[[np.ndarray], np.ndarray]
    act: Callable[[tuple, np.ndarray], np.ndarray]
    zero_sampler: Callable[[int, int], np.ndarray]
    locate: Callable[[np.ndarray], np.ndarray | None] | None = None
    orientation: int = 1

    @property
    def dim(self) -> int:
        return self.domain.dim


@dataclass(frozen=True)
class CoordinateChange:
    lower: IndexSet
    upper: IndexSet
    contains: Callable[[np.ndarray], bool]
    rho: Callable[[np.ndarray], np.ndarray]
    lifts: Callable[[np.ndarray], list[np.ndarray]]
    overlap: Callable[[np.ndarray], bool]


@dataclass(frozen=True)
class ProductStructure:
    """phi(f, y) thickens y in the lower-index stratum by f in E_{upper \\ lower}."""

    lower: IndexSet
    upper: IndexSet
    base_point: np.ndarray
    radius: float
    phi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    project: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    contains: Callable[[np.ndarray], bool]
    name: str = ""


@dataclass
class KuranishiAtlas:
    name: str
    dim: int
    layout: ObstructionLayout
    groups: dict[int, FiniteGroup]
    reps: dict[int, list[np.ndarray]]
    charts: dict[IndexSet, Chart]
    changes: dict[tuple[IndexSet, IndexSet], CoordinateChange]
    products: list[ProductStructure]
    space_sampler: Callable[[int, int], np.ndarray]
    oriented: bool = True
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.charts:
            raise StructuralError("atlas has no charts")
        basic = self.layout.basic
        for i in basic:
            if i not in self.groups or i not in self.reps:
                raise StructuralError(f"basic index {i} has no group data")
            if len(self.reps[i]) != self.groups[i].order:
                raise StructuralError(f"representation of index {i} has wrong length")
        for I, chart in self.charts.items():
            if chart.index != I or not set(I) <= set(basic) or not I:
                raise StructuralError(f"chart key {I} is not a valid index set")
            if chart.dim - self.layout.size(I) != self.dim:
                raise StructuralError(f"chart {I} has dimension {chart.dim - self.layout.size(I)} != {self.dim}")
        for I in self.poset:
            for J in self.poset:
                if is_proper_subset(I, J) and (I, J) not in self.changes:
                    raise StructuralError(f"missing coordinate change {I} -> {J}")

    @property
    def basic(self) -> IndexSet:
        return self.layout.basic

    @property
    def poset(self) -> list[IndexSet]:
        return sorted(self.charts, key=lambda I: (len(I), I))

    @property
    def kappa(self) -> int:
        return max(len(I) for I in self.charts)

    def complement(self, J: IndexSet) -> IndexSet:
        return tuple(i for i in self.basic if i not in J)

    def gamma_order(self, I: IndexSet) -> int:
        return math.prod(self.groups[i].order for i in I)

    def group_elements(self, I: IndexSet) -> list[tuple]:
        return list(itertools.product(*(self.groups[i].elements() for i in I)))

    def identity(self, I: IndexSet) -> tuple:
        return tuple(self.groups[i].identity for i in I)

    def inverse(self, g: tuple, I: IndexSet) -> tuple:
        return tuple(self.groups[i].inverse(a) for i, a in zip(I, g))

    def restrict_element(self, g: tuple, J: IndexSet, I: IndexSet) -> tuple:
        pos = {j: k for k, j in enumerate(J)}
        return tuple(g[pos[i]] for i in I)

    def relative_elements(self, I: IndexSet, J: IndexSet) -> list[tuple]:
        """Elements of Gamma_J acting trivially on the I factors, i.e. Gamma_{J\\I}."""
        return [g for g in self.group_elements(J)
                if self.restrict_element(g, J, I) == self.identity(I)]

    def act_e(self, g: tuple, vec, I: IndexSet) -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        out = np.empty_like(vec)
        for (i, s), a in zip(self.layout.slices(I).items(), g):
            out[s] = self.reps[i][a] @ vec[s]
        return out

    def act_m(self, g: tuple, J: IndexSet, e, x) -> tuple[np.ndarray, np.ndarray]:
        """Action of g in Gamma_A on a point (e_{A\\J}, x) of a thickened component."""
        A = self.basic
        rest = self.complement(J)
        return (self.act_e(self.restrict_element(g, A, rest), e, rest),
                self.charts[J].act(self.restrict_element(g, A, J), np.asarray(x, dtype=float)))

    def change(self, I: IndexSet, J: IndexSet) -> CoordinateChange:
        try:
            return self.changes[(I, J)]
        except KeyError:
            raise StructuralError(f"no coordinate change {I} -> {J}") from None

    def products_for(self, I: IndexSet, K: IndexSet) -> list[ProductStructure]:
        return [p for p in self.products if p.lower == I and p.upper == K]

    def product(self, I: IndexSet, K: IndexSet) -> ProductStructure:
        found = self.products_for(I, K)
        if not found:
            raise StructuralError(f"no product structure for {I} -> {K}")
        return found[0]

    def section_block(self, J: IndexSet, x, K: IndexSet) -> np.ndarray:
        return self.layout.restrict(self.charts[J].section(np.asarray(x, dtype=float)), J, K)

    def replace_change(self, I: IndexSet, J: IndexSet, **kw) -> "KuranishiAtlas":
        changes = dict(self.changes)
        changes[(I, J)] = replace(changes[(I, J)], **kw)
        return replace(self, changes=changes)

    def replace_chart(self, I: IndexSet, **kw) -> "KuranishiAtlas":
        charts = dict(self.charts)
        charts[I] = replace(charts[I], **kw)
        return replace(self, charts=charts)


def support_index(atlas: KuranishiAtlas, J: IndexSet, x, tol: float) -> IndexSet:
    """Indices j in J whose section component exceeds ``tol`` strictly."""
    chart = atlas.charts.get(J)
    if chart is None:
        raise StructuralError(f"no chart {J}")
    if not chart.domain.contains(x):
        raise DomainError(f"point is not in the domain of chart {J}")
    s = chart.section(np.asarray(x, dtype=float))
    blocks = atlas.layout.split(s, J)
    return tuple(j for j in J if float(np.linalg.norm(blocks[j])) > tol)


# ---------------------------------------------------------------- validation


def _eval(fn, *args, where: str):
    try:
        out = fn(*args)
    except (DomainError, StructuralError):
        raise
    except Exception as exc:  # user code
        raise EvaluationError(f"evaluation failed in {where}: {exc}") from exc
    if isinstance(out, np.ndarray) and not np.all(np.isfinite(out)):
        raise EvaluationError(f"non-finite value from {where}")
    return out


def sample_chart(atlas: KuranishiAtlas, I: IndexSet, n: int, seed: int) -> np.ndarray:
    return atlas.charts[I].domain.sample(n, seed)


def sample_lifts(atlas: KuranishiAtlas, I: IndexSet, J: IndexSet, n: int, seed: int) -> list[np.ndarray]:
    """Points of the tilde domain of the change I -> J, obtained by lifting overlap samples."""
    ch = atlas.change(I, J)
    dom = atlas.charts[I].domain
    base = sampling.where(lambda x: dom.contains(x) and ch.overlap(x), dom.lower, dom.upper, n, seed)
    out = []
    for x in base:
        out.extend(_eval(ch.lifts, x, where=f"lifts {I}->{J}"))
    return out[: max(n, 1) * 4]


def _pairs(atlas):
    P = atlas.poset
    return [(I, J) for I in P for J in P if is_proper_subset(I, J)]


def _triples(atlas):
    P = atlas.poset
    return [(I, J, K) for I in P for J in P for K in P
            if is_proper_subset(I, J) and is_proper_subset(J, K)]


def validate_atlas(atlas: KuranishiAtlas, sample_budget: int = 64, tol: float = 1e-9,
                   seed: int = 0, free_margin: float = 1e-6) -> Report:
    """Check the atlas axioms at deterministic samples; one report row per axiom."""
    if not atlas.charts:
        raise StructuralError("empty poset")
    n = max(int(sample_budget), 1)
    rep = Report(f"validate {atlas.name}")
    lay = atlas.layout

    # footprint cover
    res = []
    for xi in atlas.space_sampler(n, seed):
        best = math.inf
        for i in atlas.basic:
            ch = atlas.charts.get((i,))
            if ch is None or ch.locate is None:
                continue
            x = ch.locate(xi)
            if x is None or not ch.domain.contains(x):
                continue
            r = np.linalg.norm(_eval(ch.footprint, x, where=f"footprint {(i,)}") - xi)
            r += np.linalg.norm(_eval(ch.section, x, where=f"section {(i,)}"))
            best = min(best, float(r))
        res.append(best)
    rep.add("footprint_cover", res, tol)

    # footprint homeomorphism (partial: invariance and injectivity modulo the group)
    res = []
    for k, (I, ch) in enumerate(sorted(atlas.charts.items())):
        groups = atlas.group_elements(I)
        for x in ch.zero_sampler(n, seed + 17 * k):
            if not ch.domain.contains(x):
                continue
            psi = _eval(ch.footprint, x, where=f"footprint {I}")
            r = float(np.linalg.norm(_eval(ch.section, x, where=f"section {I}")))
            for g in groups:
                r = max(r, float(np.linalg.norm(ch.footprint(ch.act(g, x)) - psi)))
            if ch.locate is not None:
                y = ch.locate(psi)
                if y is None:
                    r = math.inf
                else:
                    r = max(r, min(float(np.linalg.norm(ch.act(g, x) - y)) for g in groups))
            res.append(r)
    rep.add("footprint_homeomorphism", res, tol, note="partial: invariance and injectivity mod group at zero samples")

    # cocycle
    res = []
    for t, (I, J, K) in enumerate(_triples(atlas)):
        cIK, cIJ, cJK = atlas.change(I, K), atlas.change(I, J), atlas.change(J, K)
        for x in sample_lifts(atlas, I, K, n, seed + 31 * t):
            if not (cIK.contains(x) and cJK.contains(x)):
                continue
            mid = cJK.rho(x)
            if not cIJ.contains(mid):
                continue
            res.append(float(np.linalg.norm(cIK.rho(x) - cIJ.rho(mid))))
    rep.add("cocycle", res, tol)

    # tameness: tilde domain equals the zero locus of the complementary section
    res = []
    for t, (I, J) in enumerate(_pairs(atlas)):
        ch, cJ = atlas.change(I, J), atlas.charts[J]
        rest = tuple(j for j in J if j not in I)
        for x in sample_lifts(atlas, I, J, n, seed + 37 * t):
            r = float(np.linalg.norm(atlas.section_block(J, x, rest)))
            res.append(r if ch.contains(x) and cJ.domain.contains(x) else math.inf)
        for x in sample_chart(atlas, J, n, seed + 41 * t):
            off = float(np.linalg.norm(atlas.section_block(J, x, rest)))
            if off > 1e3 * tol and ch.contains(x):
                res.append(off)
    rep.add("tameness", res, tol)

    # section and footprint compatibility along coordinate changes
    res = []
    for t, (I, J) in enumerate(_pairs(atlas)):
        ch, cI, cJ = atlas.change(I, J), atlas.charts[I], atlas.charts[J]
        for x in sample_lifts(atlas, I, J, n, seed + 43 * t):
            y = _eval(ch.rho, x, where=f"rho {I}->{J}")
            r = np.linalg.norm(_eval(cI.section, y, where=f"section {I}") - atlas.section_block(J, x, I))
            r = max(r, np.linalg.norm(cI.footprint(y) - cJ.footprint(x)))
            res.append(float(r))
    rep.add("section_compatibility", res, tol)

    # equivariance of representations, sections, changes and product structures
    res = []
    for i in atlas.basic:
        G, R = atlas.groups[i], atlas.reps[i]
        for a in G.elements():
            res.append(float(np.linalg.norm(R[a].T @ R[a] - np.eye(R[a].shape[0]))))
            for b in G.elements():
                res.append(float(np.linalg.norm(R[a] @ R[b] - R[G.mul(a, b)])))
    for k, (I, ch) in enumerate(sorted(atlas.charts.items())):
        for x in sample_chart(atlas, I, max(n // 4, 4), seed + 47 * k):
            s = ch.section(x)
            for g in atlas.group_elements(I):
                res.append(float(np.linalg.norm(ch.section(ch.act(g, x)) - atlas.act_e(g, s, I))))
    for t, (I, J) in enumerate(_pairs(atlas)):
        ch = atlas.change(I, J)
        cJ = atlas.charts[J]
        for x in sample_lifts(atlas, I, J, max(n // 4, 4), seed + 53 * t):
            for g in atlas.group_elements(J):
                gx = cJ.act(g, x)
                if not ch.contains(gx):
                    res.append(math.inf)
                    continue
                gi = atlas.restrict_element(g, J, I)
                res.append(float(np.linalg.norm(ch.rho(gx) - atlas.charts[I].act(gi, ch.rho(x)))))
    for t, ps in enumerate(atlas.products):
        rest = tuple(j for j in ps.upper if j not in ps.lower)
        cK = atlas.charts[ps.upper]
        ys = [y for y in sample_lifts(atlas, ps.lower, ps.upper, max(n // 4, 4), seed + 59 * t) if ps.contains(y)]
        fs = sampling.ball(lay.size(rest), 0.5 * ps.radius, max(len(ys), 1), seed + 61 * t)
        for y, f in zip(ys, fs):
            for g in atlas.group_elements(ps.upper):
                gr = atlas.restrict_element(g, ps.upper, rest)
                lhs = cK.act(g, ps.phi(f, y))
                rhs = ps.phi(atlas.act_e(gr, f, rest), cK.act(g, y))
                res.append(float(np.linalg.norm(lhs - rhs)))
    rep.add("equivariance", res, tol)

    # submersion identity
    res = []
    for t, ps in enumerate(atlas.products):
        rest = tuple(j for j in ps.upper if j not in ps.lower)
        cK = atlas.charts[ps.upper]
        ys = [y for y in sample_lifts(atlas, ps.lower, ps.upper, n, seed + 67 * t) if ps.contains(y)]
        fs = sampling.ball(lay.size(rest), 0.9 * ps.radius, max(len(ys), 1), seed + 71 * t)
        for y, f in zip(ys, fs):
            x = _eval(ps.phi, f, y, where=f"product {ps.lower}->{ps.upper}")
            r = np.linalg.norm(atlas.section_block(ps.upper, x, rest) - f)
            r = max(r, np.linalg.norm(ps.phi(np.zeros_like(f), y) - y))
            f2, y2 = ps.project(x)
            r = max(r, np.linalg.norm(f2 - f), np.linalg.norm(y2 - y))
            res.append(float(r) if cK.domain.contains(x) else math.inf)
    rep.add("submersion_identity", res, tol)

    # free action of Gamma_{J\I} on the tilde domain
    res = []
    for t, (I, J) in enumerate(_pairs(atlas)):
        cJ = atlas.charts[J]
        rel = [g for g in atlas.relative_elements(I, J) if g != atlas.identity(J)]
        if not rel:
            continue
        for x in sample_lifts(atlas, I, J, n, seed + 73 * t):
            gap = min(float(np.linalg.norm(cJ.act(g, x) - x)) for g in rel)
            res.append(max(0.0, free_margin - gap))
    rep.add("free_action", res, tol, note=f"margin {free_margin:g}")
    return rep
