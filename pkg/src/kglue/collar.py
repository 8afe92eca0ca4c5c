"""Boundary collars of the thickened spaces.

A boundary point of Y_J sits on the face H = supp(t). Its collar image at
depth r moves t along the simplex collar and x by the product structure of
H -> J, thickening x by r times the off-face obstruction components. Several
product structures over the same face are combined by successive partial
translations weighted by a partition of unity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import sampling
from .atlas import IndexSet, KuranishiAtlas, ProductStructure, is_proper_subset
from .errors import CollarOverflowError, DomainError, MembershipRejection, PreconditionError
from .reduction import OverlapCover, Reduction
from .report import Report
from .thickening import Simplex, YPoint, eps_for, mass_preserving_factors, rescale, y_membership


def delta_collar(J: IndexSet, t, r: float, width: float | None = None) -> np.ndarray:
    """(1 - r|J|) t + r |J| b_J."""
    w = 1.0 / (4 * len(J)) if width is None else width
    if not 0.0 <= r < w:
        raise DomainError(f"collar parameter {r} outside [0, {w:.4g})")
    t = np.asarray(t, dtype=float)
    return (1.0 - r * len(J)) * t + r


def face_push(atlas: KuranishiAtlas, product: ProductStructure, x, displacement) -> np.ndarray:
    """x' = phi(f, x) for f in E_{upper \\ lower}; fails loudly when the image leaves the chart."""
    x_new = product.phi(np.asarray(displacement, dtype=float), np.asarray(x, dtype=float))
    if not atlas.charts[product.upper].domain.contains(x_new):
        raise CollarOverflowError(
            f"collar step along {product.name or (product.lower, product.upper)} leaves chart "
            f"{product.upper}; shrink the constants")
    return x_new


def local_collar(atlas: KuranishiAtlas, product: ProductStructure, y: YPoint, r: float,
                 tol: float = 1e-12) -> YPoint:
    """Collar of one product structure at a point on its lower face."""
    H, J = product.lower, product.upper
    if y.J != J:
        raise PreconditionError("point lives in a different thickened space")
    face = Simplex(J).support(y.t, tol)
    if face != H:
        raise MembershipRejection([f"point lies on face {face}, not on {H}"])
    if not product.contains(y.x):
        raise MembershipRejection([f"point outside product structure {product.name}"])
    lay = atlas.layout
    rest = tuple(j for j in J if j not in H)
    parts = lay.split(y.e, atlas.basic)
    x_new = face_push(atlas, product, y.x, lay.join({j: r * parts[j] for j in rest}, rest))
    t_new = delta_collar(J, y.t, r, width=1.0 / (4 * len(J)))
    s = lay.split(atlas.charts[J].section(x_new), J)
    for k, j in enumerate(J):
        if j in H:
            parts[j] = s[j] / t_new[k]
    return YPoint(J, lay.join(parts, atlas.basic), x_new, t_new, J, y.support)


def uncollar(atlas: KuranishiAtlas, product: ProductStructure, y: YPoint) -> tuple[YPoint, float]:
    """Inverse of :func:`local_collar`: the boundary point and depth producing ``y``."""
    H, J = product.lower, product.upper
    lay = atlas.layout
    rest = tuple(j for j in J if j not in H)
    depth = float(y.t[J.index(rest[0])])
    if depth <= 0.0:
        return y, 0.0
    f, x0 = product.project(y.x)
    t0 = (y.t - depth) / (1.0 - depth * len(J))
    for k, j in enumerate(J):
        if j in rest:
            t0[k] = 0.0
    parts = lay.split(y.e, atlas.basic)
    fp = lay.split(f, rest)
    s = lay.split(atlas.charts[J].section(x0), J)
    for k, j in enumerate(J):
        if j in rest:
            parts[j] = fp[j] / depth
        else:
            parts[j] = s[j] / t0[k]
    return YPoint(J, lay.join(parts, atlas.basic), x0, t0, H, y.support), depth


def combine_collars(atlas: KuranishiAtlas, products: Sequence[ProductStructure], weights: Sequence[float],
                    y: YPoint, r: float) -> YPoint:
    """Compose partial collars: piece l advances the depth by weights[l] * r in its own coordinates."""
    weights = [float(w) for w in weights]
    if len(weights) != len(products) or not products:
        raise PreconditionError("one weight per product structure is required")
    if abs(sum(weights) - 1.0) > 1e-12 or min(weights) < 0.0:
        raise PreconditionError(f"partition weights must be non-negative and sum to 1, got {sum(weights):.6g}")
    point, depth = y, 0.0
    for ps, lam in zip(products, weights):
        if lam == 0.0:
            continue
        base, depth = uncollar(atlas, ps, point) if depth > 0.0 else (point, 0.0)
        depth += lam * r
        point = local_collar(atlas, ps, base, depth)
    return point


@dataclass
class CollarSystem:
    atlas: KuranishiAtlas
    reduction: Reduction
    cover: OverlapCover
    partition: Callable[[Sequence[ProductStructure], YPoint], list[float]] | None = None
    notes: dict = field(default_factory=dict)

    def width(self, J: IndexSet) -> float:
        return self.cover.width(J)

    def pieces_at(self, J: IndexSet, y: YPoint, tol: float = 1e-12) -> list[ProductStructure]:
        face = Simplex(J).support(y.t, tol)
        return [p.product for p in self.cover.pieces
                if p.lower == face and p.upper == J and p.product.contains(y.x)]

    def weights(self, products: Sequence[ProductStructure], y: YPoint) -> list[float]:
        if self.partition is not None:
            return list(self.partition(products, y))
        return [1.0 / len(products)] * len(products)

    def evaluate(self, J: IndexSet, y: YPoint, r: float) -> YPoint:
        """Global collar c^Y_J at depth r < w_J."""
        w = self.width(J)
        if not 0.0 <= r < w:
            raise DomainError(f"collar depth {r} outside [0, w_J={w:.4g})")
        if not Simplex(J).on_boundary(y.t):
            raise MembershipRejection(["point is not on the boundary of Y_J"])
        found = self.pieces_at(J, y)
        if not found:
            raise MembershipRejection([f"no cover piece ends at {J} on this face"])
        if len(found) == 1:
            return local_collar(self.atlas, found[0], y, r)
        return combine_collars(self.atlas, found, self.weights(found, y), y, r)


def build_collars(atlas: KuranishiAtlas, reduction: Reduction, cover: OverlapCover) -> CollarSystem:
    system = CollarSystem(atlas, reduction, cover)
    system.notes["widths"] = {"".join(map(str, J)): system.width(J) for J in atlas.poset if len(J) > 1}
    return system


# ----------------------------------------------------------------- sampling


def sample_near(reduction: Reduction, I: IndexSet, n: int, seed: int, scale: float | None = None,
                level: int | None = None) -> list[np.ndarray]:
    """Points of the reduced domain V_I: zero-set samples displaced by at most ``scale``."""
    at = reduction.atlas
    ch = at.charts[I]
    zeros = reduction.zero_points(I, n, seed, level)
    if not zeros:
        return []
    scale = reduction.eps_at(I, level or reduction.levels) if scale is None else scale
    moves = sampling.ball(ch.dim, scale, n, seed + 1)
    out = []
    for k, mv in enumerate(moves):
        x = zeros[k % len(zeros)] + mv
        if reduction.contains(I, x, level):
            out.append(x)
    return out


def boundary_samples(system: CollarSystem, H: IndexSet, J: IndexSet, n: int, seed: int,
                     tol: float = 1e-9) -> list[YPoint]:
    """Points on the face H of Y_J: lifted reduced points, random t on the face, free e components."""
    at, red = system.atlas, system.reduction
    lay = at.layout
    rng = np.random.default_rng(seed)
    change = at.change(H, J)
    out: list[YPoint] = []
    rest_A = at.complement(H)
    for k, xh in enumerate(sample_near(red, H, n, seed)):
        lifts = change.lifts(xh)
        if not lifts:
            continue
        x = lifts[k % len(lifts)]
        th = rng.dirichlet(np.ones(len(H))) * 0.8 + 0.2 / len(H)
        t = Simplex(J).include(H, th)
        sH = lay.split(at.section_block(J, x, H), H)
        parts = {j: sH[j] / th[H.index(j)] for j in H}
        bound = 0.5 * min(red.delta(H), eps_for(red, H))
        free = sampling.ball(lay.size(rest_A), bound, 1, seed + 7 * k + 3)[0]
        parts.update(lay.split(free, rest_A))
        try:
            out.append(y_membership(at, red, J, lay.join(parts, at.basic), x, t, tol))
        except MembershipRejection:
            continue
    return out


# ----------------------------------------------------------------- checks


def check_collars(system: CollarSystem, samples: int = 64, seed: int = 0, tol: float = 1e-9) -> Report:
    at, red = system.atlas, system.reduction
    lay = at.layout
    rep = Report(f"collars {at.name}")
    rng = np.random.default_rng(seed)
    ident, dlift, corner, resc, equiv, cover_sq, overflow = [], [], [], [], [], [], 0
    for k, ps in enumerate(system.atlas.products):
        H, J = ps.lower, ps.upper
        w = system.width(J)
        pts = boundary_samples(system, H, J, samples, seed + 101 * k, tol)
        for y in pts:
            r = float(rng.uniform(0.0, w))
            try:
                out = system.evaluate(J, y, r)
            except CollarOverflowError:
                overflow += 1
                continue
            zero = system.evaluate(J, y, 0.0)
            ident.append(max(float(np.max(np.abs(zero.x - y.x))), float(np.max(np.abs(zero.e - y.e)))))
            dlift.append(float(np.max(np.abs(out.t - delta_collar(J, y.t, r, w)))))
            rest_A = at.complement(H)
            corner.append(float(np.max(np.abs(lay.restrict(out.e, at.basic, rest_A)
                                              - lay.restrict(y.e, at.basic, rest_A)), initial=0.0)))
            # rescaling invariance: move t inside the face H, keep the total mass
            if len(H) > 1:
                target = rng.dirichlet(np.ones(len(H))) + 0.1
                y2 = rescale(at, y, mass_preserving_factors(y, H, target))
                out2 = system.evaluate(J, y2, r)
                resc.append(max(float(np.max(np.abs(out2.x - out.x))),
                                float(np.max(np.abs(lay.restrict(out2.e, at.basic, rest_A)
                                                    - lay.restrict(out.e, at.basic, rest_A)), initial=0.0))))
            else:
                y2 = rescale(at, y, {H[0]: 1.0})
                resc.append(float(np.max(np.abs(system.evaluate(J, y2, r).x - out.x))))
            # equivariance under the full group, and the covering square for the relative group
            for g in at.group_elements(at.basic):
                gJ = at.restrict_element(g, at.basic, J)
                gy = YPoint(J, at.act_e(g, y.e, at.basic), at.charts[J].act(gJ, y.x), y.t, y.stratum, y.support)
                gout = system.evaluate(J, gy, r)
                res = max(float(np.max(np.abs(gout.x - at.charts[J].act(gJ, out.x)))),
                          float(np.max(np.abs(gout.e - at.act_e(g, out.e, at.basic)))))
                if at.restrict_element(g, at.basic, H) == at.identity(H):
                    cover_sq.append(res)
                equiv.append(res)
    note = f"{overflow} samples overflowed the chart" if overflow else ""
    rep.add("collar_identity_at_zero", ident, tol)
    rep.add("collar_delta_lift", dlift, tol)
    rep.add("collar_corner_control", corner, tol)
    rep.add("collar_rescaling_invariance", resc, tol)
    rep.add("collar_equivariance", equiv, tol)
    rep.add("collar_covering_square", cover_sq, tol, note="relative group of each face")
    if overflow:
        rep.rows[-1].note += "; " + note
    return rep


def check_width_bookkeeping(system: CollarSystem) -> Report:
    """Widths: w_J <= min piece width / 2 and sqrt(eps_I) <= w_J for I below J."""
    rep = Report("collar widths")
    at, red = system.atlas, system.reduction
    res = []
    for J in at.poset:
        pieces = [p.width for p in system.cover.pieces if p.upper == J]
        if pieces:
            res.append(max(0.0, system.width(J) - min(pieces) / 2.0))
    rep.add("width_below_pieces", res, 1e-15)
    res = [max(0.0, math.sqrt(red.eps[I]) - system.width(J))
           for I in at.poset for J in at.poset if is_proper_subset(I, J)]
    rep.add("sqrt_eps_below_width", res, 1e-15)
    return rep

