"""Simplex combinatorics and points of the thickened spaces Y_J.

A point of Y_J is a triple (e, x; t): e is a composite obstruction vector
over all basic indices, x a point of the chart U_J and t a barycentric point
of the simplex on J, subject to s_J(x) = t . e blockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .atlas import IndexSet, KuranishiAtlas, ProductStructure, index_set
from .errors import CollarOverflowError, DomainError, MembershipRejection, PreconditionError
from .reduction import Reduction


class Simplex:
    """The standard simplex on an index set; points are arrays aligned with ``J``."""

    def __init__(self, J: IndexSet):
        if not J:
            raise PreconditionError("simplex needs a non-empty index set")
        self.J = index_set(J)

    @property
    def barycenter(self) -> np.ndarray:
        return np.full(len(self.J), 1.0 / len(self.J))

    def face_barycenter(self, I: IndexSet) -> np.ndarray:
        """b_I pushed into this simplex by the face inclusion."""
        return self.include(I, Simplex(I).barycenter)

    def include(self, I: IndexSet, t_face) -> np.ndarray:
        if not set(I) <= set(self.J):
            raise PreconditionError(f"{I} is not a face of {self.J}")
        out = np.zeros(len(self.J))
        for k, i in enumerate(I):
            out[self.J.index(i)] = t_face[k]
        return out

    def contains(self, t, tol: float = 1e-12) -> bool:
        t = np.asarray(t, dtype=float)
        return t.shape == (len(self.J),) and bool(np.all(t >= -tol)) and abs(t.sum() - 1.0) <= tol * len(self.J)

    def support(self, t, tol: float = 1e-12) -> IndexSet:
        return tuple(j for j, v in zip(self.J, t) if v > tol)

    def on_boundary(self, t, tol: float = 1e-12) -> bool:
        return len(self.support(t, tol)) < len(self.J)


@dataclass(frozen=True)
class YPoint:
    J: IndexSet
    e: np.ndarray
    x: np.ndarray
    t: np.ndarray
    stratum: IndexSet
    support: IndexSet

    def as_dict(self) -> dict:
        return {"J": list(self.J), "e": self.e.tolist(), "x": self.x.tolist(), "t": self.t.tolist(),
                "stratum": list(self.stratum)}


def eps_for(reduction: Reduction, I: IndexSet) -> float:
    """Constant attached to a support set; the empty set uses the largest constant."""
    if not I:
        return reduction.eps_empty
    if I in reduction.eps:
        return reduction.eps[I]
    above = [v for K, v in reduction.eps.items() if set(I) <= set(K)]
    return min(above) if above else reduction.eps_empty


def t_dot_e(atlas: KuranishiAtlas, J: IndexSet, t, e) -> np.ndarray:
    """The E_J vector (t_j e_j)_j from a full composite vector e over all basic indices."""
    lay = atlas.layout
    parts = lay.split(e, atlas.basic)
    return lay.join({j: t[k] * parts[j] for k, j in enumerate(J)}, J)


def y_membership(atlas: KuranishiAtlas, reduction: Reduction, J: IndexSet, e, x, t,
                 tol: float = 1e-9) -> YPoint:
    """Certify (e, x; t) as a point of Y_J or raise a rejection listing every failed condition."""
    lay = atlas.layout
    A = atlas.basic
    e = np.asarray(e, dtype=float)
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if J not in atlas.charts:
        raise PreconditionError(f"no chart {J}")
    if e.shape != (lay.size(A),) or t.shape != (len(J),) or x.shape != np.shape(atlas.charts[J].domain.lower):
        raise MembershipRejection(["shape"])
    failed = []
    simplex = Simplex(J)
    if not simplex.contains(t, tol):
        failed.append("t in simplex")
    chart = atlas.charts[J]
    if not chart.domain.contains(x):
        raise MembershipRejection(failed + ["x in chart domain"])
    s = chart.section(x)
    if float(np.max(np.abs(s - t_dot_e(atlas, J, t, e)), initial=0.0)) >= tol:
        failed.append("s_J(x) = t.e")
    blocks = lay.split(s, J)
    supp_x = tuple(j for j in J if float(np.linalg.norm(blocks[j])) > tol)
    eps = eps_for(reduction, supp_x)
    if not lay.norm(e, A) < atlas.kappa * eps:
        failed.append("|e| < kappa eps_I(x)")
    if not max((float(np.linalg.norm(b)) for b in blocks.values()), default=0.0) < eps:
        failed.append("|s_i(x)| < eps_I(x)")
    stratum = simplex.support(t, tol)
    if not set(supp_x) <= set(stratum):
        failed.append("I(x) in I(t)")
    if failed:
        raise MembershipRejection(failed)
    return YPoint(J, e, x, t, stratum, supp_x)


def rescale(atlas: KuranishiAtlas, y: YPoint, mu: Mapping[int, float], tol: float = 1e-12) -> YPoint:
    """Act by positive scalars on the H components: e_h / mu_h and mu_h t_h."""
    if any(not v > 0 for v in mu.values()):
        raise DomainError("rescaling factors must be positive")
    t = y.t.copy()
    for k, j in enumerate(y.J):
        t[k] *= mu.get(j, 1.0)
    if abs(t.sum() - 1.0) > tol:
        raise DomainError(f"rescaled barycentric point sums to {t.sum():.6g}")
    lay = atlas.layout
    parts = lay.split(y.e, atlas.basic)
    e = lay.join({j: parts[j] / mu.get(j, 1.0) for j in atlas.basic}, atlas.basic)
    return YPoint(y.J, e, y.x.copy(), t, y.stratum, y.support)


def mass_preserving_factors(y: YPoint, H: IndexSet, target) -> dict[int, float]:
    """Factors mu_H moving t restricted to H onto ``target`` (same total mass on H)."""
    target = np.asarray(target, dtype=float)
    mass = sum(y.t[y.J.index(h)] for h in H)
    target = target * mass / target.sum()
    return {h: float(target[k] / y.t[y.J.index(h)]) for k, h in enumerate(H)}


def embed_ev(atlas: KuranishiAtlas, reduction: Reduction, I: IndexSet, J: IndexSet, e_rest, x,
             tol: float = 1e-9) -> YPoint:
    """Image of (e_{A\\I}, x) with x in the tilde domain of I -> J: the point (e + b_I^{-1} s_I(x), x; b_I)."""
    lay = atlas.layout
    rest = atlas.complement(I)
    e_rest = np.asarray(e_rest, dtype=float)
    if not lay.norm(e_rest, rest) < reduction.eps[I]:
        raise DomainError(f"|e| must stay below eps{I} = {reduction.eps[I]:.4g}")
    x = np.asarray(x, dtype=float)
    e = lay.embed(e_rest, rest, atlas.basic)
    sI = atlas.section_block(J, x, I)
    e = e + lay.embed(len(I) * sI, I, atlas.basic)
    t = Simplex(J).face_barycenter(I)
    return y_membership(atlas, reduction, J, e, x, t, tol)


def boundary_chart(atlas: KuranishiAtlas, reduction: Reduction, product: ProductStructure, e_new,
                   r: Mapping[int, float], y: YPoint, tol: float = 1e-9) -> YPoint:
    """Move a point on the face I of Y_J into the interior: x' = phi(r . e_{J\\I}, x), t'' = lam t' + r."""
    I, J = product.lower, product.upper
    if y.J != J:
        raise PreconditionError("boundary point lives in a different thickened space")
    lay = atlas.layout
    rest = tuple(j for j in J if j not in I)
    if any(j not in rest for j in r) or any(r.get(j, 0.0) < 0 for j in rest):
        raise DomainError("collar parameters must be non-negative and supported off the face")
    e_new = np.asarray(e_new, dtype=float)
    parts = lay.split(e_new, rest)
    f = lay.join({j: r.get(j, 0.0) * parts[j] for j in rest}, rest)
    x_new = product.phi(f, y.x)
    if not (product.contains(y.x) and atlas.charts[J].domain.contains(x_new)):
        raise CollarOverflowError(f"boundary chart {product.name} leaves the chart; shrink the collar radius")
    lam = 1.0 - sum(r.get(j, 0.0) for j in rest)
    t = y.t.copy() * lam
    for k, j in enumerate(J):
        if j in rest:
            t[k] += r.get(j, 0.0)
    e = lay.split(y.e, atlas.basic)
    for j in rest:
        e[j] = parts[j]
    s = lay.split(atlas.charts[J].section(x_new), J)
    for k, j in enumerate(J):
        if j in I:
            e[j] = s[j] / t[k]
    return y_membership(atlas, reduction, J, lay.join(e, atlas.basic), x_new, t, tol)


@dataclass(frozen=True)
class ChainAtPoint:
    J: IndexSet
    chain: list[IndexSet]
    star: list[np.ndarray]

    @property
    def minimal(self) -> IndexSet:
        return self.chain[0]

    @property
    def maximal(self) -> IndexSet:
        return self.chain[-1]


def chain_and_star(reduction: Reduction, J: IndexSet, x, level: int | None = None) -> ChainAtPoint:
    """Nested chain of index sets below J whose reduced base region contains the footprint of x."""
    at = reduction.atlas
    xi = at.charts[J].footprint(np.asarray(x, dtype=float))
    chain = reduction.chain(xi, within=J, level=level)
    if J not in chain:
        chain = chain + [J]
    simplex = Simplex(J)
    star = [simplex.face_barycenter(H) for H in chain if H != J]
    return ChainAtPoint(J, chain, star)


def in_star(point: ChainAtPoint, t, tol: float = 1e-9) -> bool:
    """Whether t lies in the convex hull of the star vertices (least squares with non-negativity)."""
    if not point.star:
        return False
    from scipy.optimize import nnls

    V = np.column_stack(point.star)
    M = np.vstack([V, np.ones(V.shape[1])])
    rhs = np.append(np.asarray(t, dtype=float), 1.0)
    _, res = nnls(M, rhs)
    return res < math.sqrt(tol)
