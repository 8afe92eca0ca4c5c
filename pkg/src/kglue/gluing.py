"""The glued category: thickened components M_J and the maps attaching them.

A point of M_J is a pair (e, x) with e in E_{A\\J} (sup norm below delta_J)
and x in the reduced domain V_J. For I below J the attaching map alpha_IJ
lifts x into U_J and then walks up the chain of index sets between I and J
that are active at the footprint of x, pushing one block of e at a time
through the product structures with square-root lengths. tau_IJ peels the
blocks off again from the top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import sampling
from .atlas import IndexSet, KuranishiAtlas, is_proper_subset
from .collar import CollarSystem, face_push, sample_near
from .errors import CollarOverflowError, DomainError, StructuralError
from .reduction import OverlapCover, Reduction
from .report import Report

Point = tuple[np.ndarray, np.ndarray]


@dataclass
class TransitionPath:
    chain: list[IndexSet]
    cutoffs: list[float]
    blocks: list[float]
    lengths: list[float]


def path_lengths(cutoffs: list[float], blocks: list[float]) -> list[float]:
    """r_n = chi_n * max_{j <= n} lambda_j a_j with lambda_j = prod_{j <= i < n} (1 - chi_i)."""
    out = []
    for n in range(len(cutoffs)):
        best = 0.0
        for j in range(n + 1):
            lam = math.prod(1.0 - cutoffs[i] for i in range(j, n))
            best = max(best, lam * blocks[j])
        out.append(cutoffs[n] * best)
    return out


@dataclass
class GluedCategory:
    atlas: KuranishiAtlas
    reduction: Reduction
    cover: OverlapCover
    collars: CollarSystem
    tau_shift: float = 0.0
    notes: dict = field(default_factory=dict)

    # ------------------------------------------------------------ components
    def delta(self, J: IndexSet) -> float:
        return self.reduction.delta(J)

    def e_norm(self, e, J: IndexSet) -> float:
        return self.atlas.layout.norm(e, self.atlas.complement(J))

    def in_component(self, J: IndexSet, e, x, closed: bool = False) -> bool:
        n = self.e_norm(e, J)
        if closed:
            return n <= self.delta(J) and self.in_reduced_closure(J, x)
        return n < self.delta(J) and self.reduction.contains(J, x, len(J))

    def in_reduced_closure(self, J: IndexSet, x) -> bool:
        red = self.reduction
        m = len(J)
        ch = self.atlas.charts[J]
        x = np.asarray(x, dtype=float)
        if not ch.domain.contains(x) or ch.domain.depth(x) < red.margin(m):
            return False
        if self.atlas.layout.norm(ch.section(x), J) > red.eps_at(J, m):
            return False
        return red.top_value(J, ch.footprint(x)) >= red.gap(m)

    def footprint(self, J: IndexSet, x) -> np.ndarray:
        return self.atlas.charts[J].footprint(np.asarray(x, dtype=float))

    def in_overlap(self, I: IndexSet, J: IndexSet, e, x) -> bool:
        """(e, x) lies in the domain M_IJ of alpha_IJ."""
        if not self.in_component(I, e, x):
            return False
        if not self.reduction.in_base(J, self.footprint(I, x), len(J)):
            return False
        return bool(self.atlas.change(I, J).lifts(np.asarray(x, dtype=float)))

    # ---------------------------------------------------------------- paths
    def chain_between(self, I: IndexSet, J: IndexSet, xi) -> tuple[list[IndexSet], list[float]]:
        red = self.reduction
        mids = [H for H in self.atlas.poset
                if is_proper_subset(I, H) and is_proper_subset(H, J) and red.chi(H, xi) > 0.0]
        chain = [I] + sorted(mids, key=len) + [J]
        for a, b in zip(chain, chain[1:]):
            if not is_proper_subset(a, b):
                raise StructuralError(f"active index sets {a} and {b} are not nested")
        cutoffs = [red.chi(H, xi) for H in chain[1:-1]] + [1.0]
        return chain, cutoffs

    def transition_path(self, I: IndexSet, J: IndexSet, e, x) -> TransitionPath:
        chain, cutoffs = self.chain_between(I, J, self.footprint(I, x))
        lay = self.atlas.layout
        rest = self.atlas.complement(I)
        blocks = []
        for lo, hi in zip(chain, chain[1:]):
            new = tuple(j for j in hi if j not in lo)
            blocks.append(math.sqrt(lay.norm(lay.restrict(e, rest, new), new)))
        return TransitionPath(chain, cutoffs, blocks, path_lengths(cutoffs, blocks))

    # ----------------------------------------------------------------- alpha
    def alpha(self, I: IndexSet, J: IndexSet, e, x, branch: int = 0) -> Point:
        at = self.atlas
        lay = at.layout
        e = np.asarray(e, dtype=float)
        x = np.asarray(x, dtype=float)
        lifts = at.change(I, J).lifts(x)
        if not lifts:
            raise DomainError(f"point has no lift from {I} to {J}")
        path = self.transition_path(I, J, e, x)
        rest = at.complement(I)
        cur = lifts[branch % len(lifts)]
        for (lo, hi), r in zip(zip(path.chain, path.chain[1:]), path.lengths):
            if r >= self.collars.width(hi):
                raise CollarOverflowError(
                    f"path length {r:.4g} reaches the collar width of {hi}; shrink the constants")
            up = tuple(j for j in J if j not in lo)
            new = set(hi) - set(lo)
            f = lay.join({j: r * lay.restrict(e, rest, (j,)) if j in new
                          else np.zeros(lay.dims[j]) for j in up}, up)
            cur = face_push(at, at.product(lo, J), cur, f)
        return lay.restrict(e, rest, at.complement(J)), cur

    # ------------------------------------------------------------------- tau
    def tau(self, I: IndexSet, J: IndexSet, e, x) -> Point:
        at = self.atlas
        lay = at.layout
        e = np.asarray(e, dtype=float)
        x = np.asarray(x, dtype=float)
        chain, cutoffs = self.chain_between(I, J, self.footprint(J, x))
        pushed: list[dict[int, np.ndarray]] = []
        cur = x
        for lo, hi in reversed(list(zip(chain, chain[1:]))):
            f, cur = at.product(lo, J).project(cur)
            up = tuple(j for j in J if j not in lo)
            parts = lay.split(f, up)
            pushed.append({j: parts[j] for j in hi if j not in lo})
        pushed.reverse()
        base = at.change(I, J).rho(cur)
        solved: dict[int, np.ndarray] = {}
        amps: list[float] = []
        for n, blocks in enumerate(pushed):
            size = max(float(np.linalg.norm(b)) for b in blocks.values())
            prior = max((math.prod(1.0 - cutoffs[i] for i in range(j, n)) * amps[j] for j in range(n)),
                        default=0.0)
            chi = cutoffs[n]
            if size == 0.0:
                norm = 0.0
            elif size <= chi * prior ** 3:
                norm = size / (chi * prior)
            else:
                norm = (size / chi) ** (2.0 / 3.0)
            r = chi * max(prior, math.sqrt(norm))
            for j, b in blocks.items():
                solved[j] = b / r if r > 0.0 else np.zeros_like(b)
            amps.append(math.sqrt(norm))
        top = lay.split(e, at.complement(J))
        solved.update(top)
        out_e = lay.join(solved, at.complement(I))
        if self.tau_shift:
            base = base + self.tau_shift
        return out_e, base

    # ---------------------------------------------------------------- action
    def act(self, g: tuple, J: IndexSet, e, x) -> Point:
        return self.atlas.act_m(g, J, e, x)

    def relative_group(self, I: IndexSet, J: IndexSet) -> list[tuple]:
        """Elements of the full group that act trivially away from J minus I."""
        at = self.atlas
        A = at.basic
        keep = tuple(j for j in J if j not in I)
        out = []
        for g in at.group_elements(A):
            if all(g[k] == at.groups[a].identity for k, a in enumerate(A) if a not in keep):
                out.append(g)
        return out

    def gamma_star(self, g: tuple, I: IndexSet, J: IndexSet, e, x) -> Point:
        """g * m = g . alpha(g^{-1} . tau(m)) for g in the relative group of I -> J."""
        at = self.atlas
        ginv = at.inverse(g, at.basic)
        e1, x1 = self.tau(I, J, e, x)
        e2, x2 = self.act(ginv, I, e1, x1)
        e3, x3 = self.alpha(I, J, e2, x2)
        return self.act(g, J, e3, x3)

    # --------------------------------------------------------------- section
    def _section_prime(self, K: IndexSet, e, x) -> np.ndarray:
        at = self.atlas
        lay = at.layout
        out = lay.embed(e, at.complement(K), at.basic)
        return out + lay.embed(at.charts[K].section(np.asarray(x, dtype=float)), K, at.basic)

    def section(self, J: IndexSet, e, x) -> np.ndarray:
        """Blend of the section of J with the sections above J pulled back along alpha."""
        red = self.reduction
        xi = self.footprint(J, x)
        ups = sorted((K for K in self.atlas.poset if is_proper_subset(J, K) and red.chi(K, xi) > 0.0), key=len)
        chis = [red.chi(K, xi) for K in ups]
        total = math.prod(1.0 - c for c in chis) * self._section_prime(J, e, x)
        for n, K in enumerate(ups):
            w = chis[n] * math.prod(1.0 - c for c in chis[n + 1:])
            if w == 0.0:
                continue
            e2, x2 = self.alpha(J, K, e, x)
            total = total + w * self._section_prime(K, e2, x2)
        return total

    # ---------------------------------------------------------------- weight
    def in_image_closure(self, H: IndexSet, I: IndexSet, e, x, tol: float = 1e-9) -> bool:
        """Whether (e, x) in M_I lies in the closure of the image of M_HI."""
        red = self.reduction
        try:
            if red.top_value(I, self.footprint(I, x)) < red.gap(len(I)):
                return False
            eh, xh = self.tau(H, I, e, x)
            if not self.in_component(H, eh, xh, closed=True):
                return False
            lifts = self.atlas.change(H, I).lifts(xh)
            for k in range(len(lifts)):
                e2, x2 = self.alpha(H, I, eh, xh, branch=k)
                if max(float(np.max(np.abs(x2 - x))), float(np.max(np.abs(e2 - e), initial=0.0))) < tol:
                    return True
        except (DomainError, StructuralError):
            return False
        return False

    def weight(self, I: IndexSet, e, x, tol: float = 1e-9) -> Fraction:
        """Lambda at the image of (e, x): 1/|Gamma_H| for the smallest H whose image closure contains it."""
        below = sorted((H for H in self.atlas.poset if is_proper_subset(H, I)), key=lambda H: (len(H), H))
        for H in below:
            if self.in_image_closure(H, I, e, x, tol):
                return Fraction(1, self.atlas.gamma_order(H))
        return Fraction(1, self.atlas.gamma_order(I))

    # --------------------------------------------------------------- samples
    def overlap_samples(self, I: IndexSet, J: IndexSet, n: int, seed: int, rounds: int = 6) -> list[Point]:
        """Points (e, x) of M_IJ: x near the zero set of V_I in the active region of J, small random e."""
        at = self.atlas
        red = self.reduction
        xs: list[np.ndarray] = []
        for k in range(rounds):
            batch = sample_near(red, I, 4 * n * (k + 1), seed + 7919 * k, level=len(I))
            xs.extend(x for x in batch if red.in_base(J, self.footprint(I, x), len(J)) and at.change(I, J).lifts(x))
            if len(xs) >= n:
                break
        xs = xs[:n]
        es = sampling.ball(at.layout.size(at.complement(I)), 0.9 * self.delta(I), max(len(xs), 1), seed + 3)
        out = []
        for x, e in zip(xs, es):
            e = e * min(1.0, 0.9 * self.delta(I) / max(at.layout.norm(e, at.complement(I)), 1e-300))
            if self.in_overlap(I, J, e, x):
                out.append((e, x))
        return out

    def component_samples(self, J: IndexSet, n: int, seed: int) -> list[Point]:
        at = self.atlas
        xs = sample_near(self.reduction, J, n, seed, level=len(J))
        es = sampling.ball(at.layout.size(at.complement(J)), 0.9 * self.delta(J), max(len(xs), 1), seed + 5)
        return [(e, x) for e, x in zip(es, xs) if self.in_component(J, e, x)]


def build_glued(atlas: KuranishiAtlas, reduction: Reduction, cover: OverlapCover,
                collars: CollarSystem | None = None) -> GluedCategory:
    from .collar import build_collars

    collars = collars or build_collars(atlas, reduction, cover)
    return GluedCategory(atlas, reduction, cover, collars)


def _gap(p: Point, q: Point) -> float:
    return max(float(np.max(np.abs(p[0] - q[0]), initial=0.0)), float(np.max(np.abs(p[1] - q[1]), initial=0.0)))


def check_category(glued: GluedCategory, samples: int = 64, seed: int = 0, tol: float = 1e-9) -> Report:
    at = glued.atlas
    red = glued.reduction
    lay = at.layout
    rep = Report(f"glued category {at.name}")
    P = at.poset
    pairs = [(I, J) for I in P for J in P if is_proper_subset(I, J)]
    rows: dict[str, list[float]] = {k: [] for k in (
        "round_trip", "composition", "equivariance", "product_form", "tau_restriction",
        "section_coherence", "section_restriction", "zero_confinement", "gamma_star", "weighting")}
    overflow = 0
    data = {pair: glued.overlap_samples(*pair, samples, seed + 13 * k) for k, pair in enumerate(pairs)}
    for (I, J), pts in data.items():
        rel = glued.relative_group(I, J)
        degree = at.gamma_order(J) // at.gamma_order(I)
        for e, x in pts:
            try:
                m = glued.alpha(I, J, e, x)
            except CollarOverflowError:
                overflow += 1
                continue
            back = glued.tau(I, J, *m)
            rows["round_trip"].append(_gap(back, (e, x)))
            rows["product_form"].append(float(np.max(np.abs(
                lay.restrict(back[0], at.complement(I), at.complement(J)) - m[0]), initial=0.0)))
            zero = glued.tau(I, J, m[0] * 0.0, glued.alpha(I, J, e * 0.0, x)[1])
            rows["tau_restriction"].append(max(float(np.max(np.abs(zero[1] - x))),
                                               float(np.max(np.abs(zero[0]), initial=0.0))))
            rows["section_coherence"].append(float(np.max(np.abs(glued.section(I, *back) - glued.section(J, *m)))))
            for g in at.group_elements(at.basic):
                gm = glued.act(g, J, *m)
                lhs = glued.tau(I, J, *gm)
                rhs = glued.act(g, I, *back)
                rows["equivariance"].append(_gap(lhs, rhs))
            fiber = [glued.gamma_star(g, I, J, *m) for g in rel]
            images = [glued.tau(I, J, *f) for f in fiber]
            rows["gamma_star"].append(max(_gap(im, back) for im in images))
            distinct = []
            for f in fiber:
                if all(_gap(f, d) > 1e-7 for d in distinct):
                    distinct.append(f)
            rows["gamma_star"].append(0.0 if len(distinct) == degree else 1.0)
            lam = glued.weight(J, *m)
            branch_sum = sum((Fraction(1, at.gamma_order(J)) for _ in distinct), Fraction(0))
            if red.top_value(I, glued.footprint(J, m[1])) >= red.gap(len(I)):
                rows["weighting"].append(float(abs(branch_sum - lam)))
    # composition along triples with the middle set fully active
    for t, (I, J) in enumerate(pairs):
        for H in P:
            if not (is_proper_subset(I, H) and is_proper_subset(H, J)):
                continue
            for e, x in data[(I, J)]:
                if red.chi(H, glued.footprint(I, x)) < 1.0 or not glued.in_overlap(I, H, e, x):
                    continue
                try:
                    m = glued.alpha(I, J, e, x)
                    direct = glued.tau(I, J, *m)
                    via = glued.tau(I, H, *glued.tau(H, J, *m))
                except (CollarOverflowError, DomainError):
                    overflow += 1
                    continue
                rows["composition"].append(_gap(direct, via))
    for k, J in enumerate(P):
        for e, x in glued.component_samples(J, max(samples // 2, 8), seed + 31 * k):
            s0 = glued.section(J, e * 0.0, x)
            ref = lay.embed(at.charts[J].section(x), J, at.basic)
            rows["section_restriction"].append(float(np.max(np.abs(s0 - ref))))
            val = glued.section(J, e, x)
            if float(np.max(np.abs(val))) < tol:
                rows["zero_confinement"].append(max(glued.e_norm(e, J), lay.norm(at.charts[J].section(x), J)))
            else:
                rows["zero_confinement"].append(0.0)
    notes = {"equivariance": "full group on both sides",
             "section_coherence": "principal branch of alpha",
             "gamma_star": "tau-fibre equality and fibre size |Gamma_J|/|Gamma_I|",
             "weighting": "branch sums over tau-fibres inside the closure of the lower image"}
    for name, vals in rows.items():
        rep.add(name, vals, tol, note=notes.get(name, ""))
    if overflow:
        rep.extra["collar_overflows"] = overflow
    return rep
