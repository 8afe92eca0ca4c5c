"""Built-in atlases and branched spaces used as the golden corpus.

Complex coordinates are stored as real pairs. The football atlas uses two
discs with cyclic isotropy glued over an annulus that covers both punctured
discs; the tangent sphere is its (1, 1) case.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import sampling
from .atlas import (
    Chart,
    CoordinateChange,
    Domain,
    FiniteGroup,
    IndexSet,
    KuranishiAtlas,
    ObstructionLayout,
    ProductStructure,
    index_set,
)
from .errors import PreconditionError, StructuralError
from .report import Report

TAME_TOL = 1e-11

BaseFields = Callable[[int], dict[int, Callable[[np.ndarray], np.ndarray]]]


@dataclass
class BundleSpec:
    """Single-chart model for an Euler number: total-space domain plus a framed section."""

    name: str
    domain: Domain
    section: Callable[[np.ndarray], np.ndarray]
    frame: Callable[[np.ndarray], np.ndarray]
    field: Callable[[np.ndarray, int], np.ndarray]
    footprint: Callable[[np.ndarray], np.ndarray]
    locate: Callable[[np.ndarray], np.ndarray | None]
    space_sampler: Callable[[int, int], np.ndarray]
    zero_sampler: Callable[[int, int], np.ndarray]
    expected: Fraction | None = None


@dataclass
class ExampleSpec:
    name: str
    params: dict
    atlas: KuranishiAtlas | None = None
    branched: "TwoCircleBranched | None" = None
    bundle: BundleSpec | None = None
    expected_count: Fraction | None = None
    expected_weights: dict = field(default_factory=dict)
    base_fields: BaseFields | None = None


def _c(v) -> complex:
    return complex(float(v[0]), float(v[1]))


def _r(z: complex) -> np.ndarray:
    return np.array([z.real, z.imag])


def _rot(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def _root(z: complex, n: int) -> complex:
    """Principal n-th root."""
    if z == 0:
        return 0j
    return abs(z) ** (1.0 / n) * cmath.exp(1j * cmath.phase(z) / n)


def _sphere_from_ratio(zeta: complex) -> np.ndarray:
    d = 1.0 + abs(zeta) ** 2
    return np.array([2 * zeta.real / d, 2 * zeta.imag / d, (abs(zeta) ** 2 - 1.0) / d])


def _sphere_from_inverse(eta: complex) -> np.ndarray:
    d = 1.0 + abs(eta) ** 2
    eb = eta.conjugate()
    return np.array([2 * eb.real / d, 2 * eb.imag / d, (1.0 - abs(eta) ** 2) / d])


def _sphere_points(n: int, seed: int) -> np.ndarray:
    pts = sampling.ball(3, 1.0, 2 * n + 4, seed)
    norms = np.linalg.norm(pts, axis=1)
    pts = pts[norms > 0.1]
    return (pts / np.linalg.norm(pts, axis=1)[:, None])[:n]


def _crt(a: int, p: int, b: int, q: int) -> int:
    """m mod pq with m = a (mod p) and m = b (mod q); p, q coprime."""
    for m in range(p * q):
        if m % p == a % p and m % q == b % q:
            return m
    raise StructuralError("orders are not coprime")


def _annulus_depth(r: float, inner: float, outer: float) -> float:
    return min(r - inner, outer - r) / (outer - inner) * 2.0


# ------------------------------------------------------------------ football


def make_football_atlas(p: int = 2, q: int = 3, neck: float = 0.5) -> ExampleSpec:
    """Teardrop-style sphere with cone points of orders p and q.

    Chart 1 is the unit disc z with Z/p acting by rotation, chart 2 the unit
    disc w with Z/q. The transition chart lives on the annulus neck < |x| < 1
    with z = x^q and w = (neck/x)^p, and a single free obstruction coordinate
    e2; its E_1 component is the unitary clutching -(x/|x|)^(p+q) e2.
    """
    if int(p) != p or int(q) != q or p < 1 or q < 1:
        raise PreconditionError("p and q must be positive integers")
    p, q = int(p), int(q)
    if math.gcd(p, q) != 1:
        raise PreconditionError("p and q must be coprime")
    c = float(neck)
    s0 = c ** (p * q / 2.0)
    wp, wq = 2 * math.pi / p, 2 * math.pi / q
    A: IndexSet = (1, 2)
    layout = ObstructionLayout({1: 2, 2: 2})
    groups = {1: FiniteGroup.cyclic(p), 2: FiniteGroup.cyclic(q)}
    reps = {1: [_rot(wp * k) for k in range(p)], 2: [_rot(wq * k) for k in range(q)]}

    def foot1(z):
        return _sphere_from_ratio(_c(z) ** p / s0)

    def foot2(w):
        return _sphere_from_inverse(_c(w) ** q / s0)

    def locate1(xi):
        X, Y, Z = (float(v) for v in xi)
        if Z >= 1.0 - 1e-15:
            return None
        u = complex(X, Y) / (1.0 - Z) * s0
        return _r(_root(u, p)) if abs(u) < 1.0 else None

    def locate2(xi):
        X, Y, Z = (float(v) for v in xi)
        if Z <= -1.0 + 1e-15:
            return None
        eta = (complex(X, Y) / (1.0 + Z)).conjugate()
        wq_ = eta * s0
        return _r(_root(wq_, q)) if abs(wq_) < 1.0 else None

    disc = lambda v: 1.0 - float(np.hypot(v[0], v[1]))  # noqa: E731
    box2 = (np.array([-1.0, -1.0]), np.array([1.0, 1.0]))

    def zero_disc(n, seed):
        return sampling.ball(2, 1.0, n, seed)

    chart1 = Chart(
        index=(1,), domain=Domain(disc, *box2), section=lambda z: np.zeros(2), footprint=foot1,
        act=lambda g, z: reps[1][g[0]] @ z, zero_sampler=zero_disc, locate=locate1)
    chart2 = Chart(
        index=(2,), domain=Domain(disc, *box2), section=lambda w: np.zeros(2), footprint=foot2,
        act=lambda g, w: reps[2][g[0]] @ w, zero_sampler=zero_disc, locate=locate2)

    def clutch(x) -> complex:
        xc = _c(x)
        return -((xc / abs(xc)) ** (p + q))

    def s12(v):
        e2, x = _c(v[:2]), v[2:]
        return np.concatenate([_r(clutch(x) * e2), _r(e2)])

    def depth12(v):
        r = float(np.hypot(v[2], v[3]))
        return min(1.0 - float(np.hypot(v[0], v[1])), _annulus_depth(r, c, 1.0))

    def act12(g, v):
        m = _crt(g[0], p, -g[1], q)
        ang = 2 * math.pi * m / (p * q)
        return np.concatenate([reps[2][g[1]] @ v[:2], _rot(ang) @ v[2:]])

    def zero12(n, seed):
        xs = sampling.where(lambda x: _annulus_depth(float(np.hypot(*x)), c, 1.0) > 0, *box2, n, seed)
        return np.hstack([np.zeros((len(xs), 2)), xs])

    chart12 = Chart(
        index=A, domain=Domain(depth12, np.full(4, -1.0), np.full(4, 1.0)), section=s12,
        footprint=lambda v: _sphere_from_ratio(_c(v[2:]) ** (p * q) / s0),
        act=act12, zero_sampler=zero12)

    def on_zero_slice(v):
        return float(np.hypot(v[0], v[1])) <= TAME_TOL and chart12.domain.contains(v)

    def lifts1(z):
        zc = _c(z)
        if not (c ** q < abs(zc) < 1.0):
            return []
        x0 = _root(zc, q)
        return [np.concatenate([np.zeros(2), _r(x0 * cmath.exp(1j * wq * j))]) for j in range(q)]

    def lifts2(w):
        wc = _c(w)
        if not (c ** p < abs(wc) < 1.0):
            return []
        x0 = c / _root(wc, p)
        return [np.concatenate([np.zeros(2), _r(x0 * cmath.exp(1j * wp * j))]) for j in range(p)]

    ch1 = CoordinateChange(
        (1,), A, contains=on_zero_slice, rho=lambda v: _r(_c(v[2:]) ** q), lifts=lifts1,
        overlap=lambda z: c ** q < float(np.hypot(*z)) < 1.0)
    ch2 = CoordinateChange(
        (2,), A, contains=on_zero_slice, rho=lambda v: _r((c / _c(v[2:])) ** p), lifts=lifts2,
        overlap=lambda w: c ** p < float(np.hypot(*w)) < 1.0)

    def phi1(f, y):
        return np.concatenate([np.asarray(f, dtype=float), y[2:]])

    def proj1(v):
        return v[:2].copy(), np.concatenate([np.zeros(2), v[2:]])

    def phi2(f, y):
        return np.concatenate([_r(_c(f) / clutch(y[2:])), y[2:]])

    def proj2(v):
        return _r(clutch(v[2:]) * _c(v[:2])), np.concatenate([np.zeros(2), v[2:]])

    mid = np.array([0.0, 0.0, (1.0 + c) / 2, 0.0])
    products = [
        ProductStructure((1,), A, mid, 1.0, phi1, proj1, chart12.domain.contains, "phi_1_12"),
        ProductStructure((2,), A, mid, 1.0, phi2, proj2, chart12.domain.contains, "phi_2_12"),
    ]

    atlas = KuranishiAtlas(
        name="tangent-sphere" if (p, q) == (1, 1) else f"football-{p}-{q}",
        dim=0, layout=layout, groups=groups, reps=reps,
        charts={(1,): chart1, (2,): chart2, A: chart12},
        changes={((1,), A): ch1, ((2,), A): ch2},
        products=products, space_sampler=_sphere_points,
        notes={"neck": c, "p": p, "q": q})

    eta = 0.2 * min(c ** p, c ** q)

    def base_fields(seed: int):
        rng = np.random.default_rng(seed)
        b1, b2 = (sampling.ball(2, 1.0, 1, int(rng.integers(1 << 30)))[0] for _ in range(2))
        return {1: lambda z: np.asarray(z, dtype=float) + eta * b1,
                2: lambda w: np.asarray(w, dtype=float) + eta * b2}

    expected = Fraction(1, p) + Fraction(1, q)
    return ExampleSpec(
        name=atlas.name, params={"p": p, "q": q, "neck": c}, atlas=atlas,
        expected_count=expected,
        expected_weights={"M_12": Fraction(1, p * q), "branch_1": Fraction(1, p), "branch_2": Fraction(1, q)},
        base_fields=base_fields)


def make_tangent_sphere_atlas() -> ExampleSpec:
    spec = make_football_atlas(1, 1)
    spec.name = "tangent-sphere"
    spec.params = {}
    return spec


def make_redundant_sphere_atlas(radius: float = 0.4) -> ExampleSpec:
    """Tangent sphere with a third basic chart nested in the first disc."""
    base = make_football_atlas(1, 1)
    at = base.atlas
    c = at.notes["neck"]
    if not 0 < radius < c:
        raise PreconditionError("redundant chart must stay inside the first disc away from the neck")
    r3 = float(radius)
    layout = ObstructionLayout({1: 2, 2: 2, 3: 2})
    groups = dict(at.groups)
    groups[3] = FiniteGroup.cyclic(1)
    reps = dict(at.reps)
    reps[3] = [np.eye(2)]
    first = at.charts[(1,)]
    box2 = (np.array([-r3, -r3]), np.array([r3, r3]))
    chart3 = Chart(
        index=(3,), domain=Domain(lambda z: 1.0 - float(np.hypot(*z)) / r3, *box2),
        section=lambda z: np.zeros(2), footprint=first.footprint, act=lambda g, z: z,
        zero_sampler=lambda n, seed: sampling.ball(2, r3, n, seed),
        locate=lambda xi: (lambda z: z if z is not None and np.hypot(*z) < r3 else None)(first.locate(xi)))

    def depth13(v):
        return min(1.0 - float(np.hypot(v[0], v[1])), 1.0 - float(np.hypot(v[2], v[3])) / r3)

    chart13 = Chart(
        index=(1, 3), domain=Domain(depth13, np.array([-1.0, -1.0, -r3, -r3]), np.array([1.0, 1.0, r3, r3])),
        section=lambda v: np.concatenate([-v[:2], v[:2]]), footprint=lambda v: first.footprint(v[2:]),
        act=lambda g, v: v,
        zero_sampler=lambda n, seed: np.hstack([np.zeros((n, 2)), sampling.ball(2, r3, n, seed)]))

    def slice13(v):
        return float(np.hypot(v[0], v[1])) <= TAME_TOL and chart13.domain.contains(v)

    def lift13(z):
        return [np.concatenate([np.zeros(2), z])] if np.hypot(*z) < r3 else []

    inner = lambda z: float(np.hypot(*z)) < r3  # noqa: E731
    changes = dict(at.changes)
    changes[((1,), (1, 3))] = CoordinateChange((1,), (1, 3), slice13, lambda v: v[2:].copy(), lift13, inner)
    changes[((3,), (1, 3))] = CoordinateChange((3,), (1, 3), slice13, lambda v: v[2:].copy(), lift13, inner)
    zero_y = lambda v: np.concatenate([np.zeros(2), v[2:]])  # noqa: E731
    products = list(at.products) + [
        ProductStructure((1,), (1, 3), np.zeros(4), 1.0, lambda f, y: np.concatenate([f, y[2:]]),
                         lambda v: (v[:2].copy(), zero_y(v)), chart13.domain.contains, "phi_1_13"),
        ProductStructure((3,), (1, 3), np.zeros(4), 1.0, lambda f, y: np.concatenate([-np.asarray(f), y[2:]]),
                         lambda v: (-v[:2], zero_y(v)), chart13.domain.contains, "phi_3_13"),
    ]
    charts = dict(at.charts)
    charts[(3,)] = chart3
    charts[(1, 3)] = chart13
    atlas = KuranishiAtlas(
        name="tangent-sphere-redundant", dim=0, layout=layout, groups=groups, reps=reps,
        charts=charts, changes=changes, products=products, space_sampler=at.space_sampler,
        notes=dict(at.notes, redundant_radius=r3))
    inner_fields = base.base_fields

    def base_fields(seed):
        fl = inner_fields(seed)
        fl[3] = fl[1]
        return fl

    return ExampleSpec(name=atlas.name, params={"radius": r3}, atlas=atlas,
                       expected_count=Fraction(2), base_fields=base_fields)


# ------------------------------------------------------------- bundle builder


@dataclass
class BundleAtlasSpec:
    """Vector bundle over a planar base with local surjections onto its fibre.

    ``opens`` are the chart footprints in the base, ``lambdas[i](x)`` the
    fibrewise isomorphism E_i -> fibre over x, ``section`` the bundle section.
    Isotropy is trivial.
    """

    name: str
    rank: int
    opens: Sequence[Domain]
    lambdas: Sequence[Callable[[np.ndarray], np.ndarray]]
    section: Callable[[np.ndarray], np.ndarray]
    space_sampler: Callable[[int, int], np.ndarray]
    poset: Sequence[Sequence[int]] | None = None
    e_bound: float = 1.0
    expected: Fraction | None = None


def make_bundle_atlas(spec: BundleAtlasSpec, probe: int = 64, seed: int = 0) -> ExampleSpec:
    k = int(spec.rank)
    n_open = len(spec.opens)
    if n_open == 0 or len(spec.lambdas) != n_open:
        raise StructuralError("bundle spec needs one surjection per open set")
    basic = tuple(range(1, n_open + 1))
    opens = dict(zip(basic, spec.opens))
    lam = dict(zip(basic, spec.lambdas))
    base_dim = spec.opens[0].dim
    layout = ObstructionLayout({i: k for i in basic})

    for i in basic:
        for x in opens[i].sample(probe, seed + i):
            L = np.asarray(lam[i](x), dtype=float)
            if L.shape != (k, k) or abs(np.linalg.det(L)) < 1e-12:
                raise StructuralError(f"surjection of chart {i} is singular at a sample")
            if np.linalg.det(L) < 0:
                raise StructuralError(f"surjection of chart {i} reverses orientation")

    def meet_depth(I, x):
        return min(opens[i].depth(x) for i in I)

    if spec.poset is None:
        members = []
        for r in range(1, n_open + 1):
            for I in itertools.combinations(basic, r):
                lo = np.max([opens[i].lower for i in I], axis=0)
                hi = np.min([opens[i].upper for i in I], axis=0)
                if np.any(lo >= hi):
                    continue
                pts = sampling.where(lambda x: meet_depth(I, x) > 0, lo, hi, 8, seed + 101 * r)
                if len(pts):
                    members.append(I)
    else:
        members = [index_set(I) for I in spec.poset]

    def full_e(I, v):
        """Recover (e_i)_{i in I} from coordinates (e_{I without min I}, x)."""
        free = I[1:]
        x = v[k * len(free):]
        parts = {j: v[k * n: k * (n + 1)] for n, j in enumerate(free)}
        rhs = np.asarray(spec.section(x), dtype=float) - sum((lam[j](x) @ parts[j] for j in free), np.zeros(k))
        parts[I[0]] = np.linalg.solve(lam[I[0]](x), rhs)
        return parts, x

    def coords(I, parts, x):
        return np.concatenate([np.concatenate([parts[j] for j in I[1:]]) if len(I) > 1 else np.zeros(0), x])

    charts, changes, products = {}, {}, []
    for I in members:
        nfree = k * (len(I) - 1)
        lo = np.concatenate([np.full(nfree, -spec.e_bound), np.max([opens[i].lower for i in I], axis=0)])
        hi = np.concatenate([np.full(nfree, spec.e_bound), np.min([opens[i].upper for i in I], axis=0)])

        def depth(v, I=I, nfree=nfree):
            d = meet_depth(I, v[nfree:])
            if nfree:
                d = min(d, 1.0 - np.max(np.abs(v[:nfree])) / spec.e_bound)
            return d

        def section(v, I=I):
            parts, _ = full_e(I, v)
            return layout.join(parts, I)

        def zero_sampler(n, sd, I=I, nfree=nfree):
            xs = [x for x in spec.space_sampler(n, sd) if meet_depth(I, x) > 0]
            out = []
            for x in xs:
                parts = {j: np.zeros(k) for j in I}
                out.append(coords(I, parts, np.asarray(x, dtype=float)))
            return np.array(out) if out else np.zeros((0, nfree + base_dim))

        locate = None
        if len(I) == 1:
            locate = (lambda xi, I=I: np.asarray(xi, dtype=float) if opens[I[0]].contains(xi) else None)
        charts[I] = Chart(index=I, domain=Domain(depth, lo, hi), section=section,
                          footprint=lambda v, nfree=nfree: np.asarray(v[nfree:], dtype=float),
                          act=lambda g, v: v, zero_sampler=zero_sampler, locate=locate)

    for I in members:
        for J in members:
            if not (len(I) < len(J) and set(I) <= set(J)):
                continue
            rest = tuple(j for j in J if j not in I)

            def contains(v, I=I, J=J, rest=rest):
                if not charts[J].domain.contains(v):
                    return False
                parts, _ = full_e(J, v)
                return max(float(np.linalg.norm(parts[j])) for j in rest) <= TAME_TOL

            def rho(v, I=I, J=J):
                parts, x = full_e(J, v)
                return coords(I, {i: parts[i] for i in I}, x)

            def lifts(v, I=I, J=J, rest=rest):
                parts, x = full_e(I, v)
                if min(opens[j].depth(x) for j in J) <= 0:
                    return []
                parts.update({j: np.zeros(k) for j in rest})
                out = coords(J, parts, x)
                return [out] if charts[J].domain.contains(out) else []

            changes[(I, J)] = CoordinateChange(
                I, J, contains, rho, lifts,
                overlap=lambda v, I=I, J=J: charts[I].domain.contains(v)
                and min(opens[j].depth(v[k * (len(I) - 1):]) for j in J) > 0)

            def split_push(I, parts, x, f_parts, sign):
                v = sum((lam[j](x) @ f_parts[j] for j in f_parts), np.zeros(k))
                for i in I:
                    parts[i] = parts[i] - sign * np.linalg.solve(lam[i](x), v) / len(I)

            def phi(f, y, I=I, J=J, rest=rest):
                parts, x = full_e(J, y)
                fp = {j: np.asarray(f[k * n: k * (n + 1)], dtype=float) for n, j in enumerate(rest)}
                split_push(I, parts, x, fp, +1.0)
                parts.update(fp)
                return coords(J, parts, x)

            def project(v, I=I, J=J, rest=rest):
                parts, x = full_e(J, v)
                fp = {j: parts[j] for j in rest}
                split_push(I, parts, x, fp, -1.0)
                parts.update({j: np.zeros(k) for j in rest})
                return np.concatenate([fp[j] for j in rest]), coords(J, parts, x)

            def near(y, J=J):
                parts, _ = full_e(J, y)
                return charts[J].domain.contains(y) and all(
                    float(np.max(np.abs(parts[j]))) <= 0.5 * spec.e_bound for j in J[1:])

            products.append(ProductStructure(
                I, J, np.zeros(charts[J].dim), 0.5 * spec.e_bound / len(J), phi, project,
                near, f"phi_{''.join(map(str, I))}_{''.join(map(str, J))}"))

    atlas = KuranishiAtlas(
        name=spec.name, dim=base_dim - k, layout=layout,
        groups={i: FiniteGroup.cyclic(1) for i in basic}, reps={i: [np.eye(k)] for i in basic},
        charts=charts, changes=changes, products=products, space_sampler=spec.space_sampler)

    def base_fields(seed_: int):
        rng = np.random.default_rng(seed_)
        v = sampling.ball(k, 1.0, 1, int(rng.integers(1 << 30)))[0]
        return {i: (lambda x, i=i: np.linalg.solve(lam[i](x[-base_dim:]), v)) for i in basic}

    return ExampleSpec(name=spec.name, params={"rank": k, "charts": n_open}, atlas=atlas,
                       expected_count=spec.expected, base_fields=base_fields)


def _disc_domain(center, radius) -> Domain:
    center = np.asarray(center, dtype=float)
    return Domain(lambda x: 1.0 - float(np.linalg.norm(np.asarray(x) - center)) / radius,
                  center - radius, center + radius)


def _origin_sampler(n, seed):
    return np.zeros((n, 2))


def make_point_bundle_atlas() -> ExampleSpec:
    """Rank-2 trivial bundle over the unit disc with section x: one zero of sign +1."""
    spec = BundleAtlasSpec(
        name="bundle-point", rank=2, opens=[_disc_domain((0.0, 0.0), 1.0)],
        lambdas=[lambda x: np.eye(2)], section=lambda x: np.asarray(x, dtype=float),
        space_sampler=_origin_sampler, expected=Fraction(1))
    return make_bundle_atlas(spec)


def make_toy_chain_atlas() -> ExampleSpec:
    """Three overlapping discs around the single zero of x -> x in a trivial rank-2 bundle.

    The discs are offset so that at the origin the depth ordering is strict,
    placing the origin on the chain {1} < {1,2} < {1,2,3}.
    """
    centers = [0.2 * np.array([1.0, 0.0]),
               0.4 * np.array([math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3)]),
               0.6 * np.array([math.cos(4 * math.pi / 3), math.sin(4 * math.pi / 3)])]
    spec = BundleAtlasSpec(
        name="toy-chain", rank=2, opens=[_disc_domain(cc, 1.0) for cc in centers],
        lambdas=[lambda x: np.eye(2)] * 3, section=lambda x: np.asarray(x, dtype=float),
        space_sampler=_origin_sampler, expected=Fraction(1))
    return make_bundle_atlas(spec)


def make_offset_bundle_atlas(offset: float = 3.0) -> ExampleSpec:
    """Section bounded away from zero on the chart: empty zero set, count 0."""
    spec = BundleAtlasSpec(
        name="bundle-offset", rank=2, opens=[_disc_domain((0.0, 0.0), 1.0)],
        lambdas=[lambda x: np.eye(2)], section=lambda x: np.asarray(x, dtype=float) + np.array([offset, 0.0]),
        space_sampler=lambda n, seed: np.zeros((0, 2)), expected=Fraction(0))
    return make_bundle_atlas(spec)


# --------------------------------------------------------- one-chart Euler specs


def _tangent_basis(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(u, ref)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(u, t1)


def make_sphere_euler_spec() -> BundleSpec:
    """Tangent bundle of the unit sphere: complement is the normal line plus a trivial line.

    Total space coordinates (y, s) with y in the shell 1/2 < |y| < 3/2 and
    |s| < 1/2; the section is (y - y/|y|, s) in R^4.
    """

    def depth(v):
        r = float(np.linalg.norm(v[:3]))
        return min(1.0 - abs(r - 1.0) / 0.5, 1.0 - abs(v[3]) / 0.5)

    def section(v):
        y = v[:3]
        return np.concatenate([y - y / np.linalg.norm(y), v[3:]])

    def frame(v):
        u = v[:3] / np.linalg.norm(v[:3])
        t1, t2 = _tangent_basis(u)
        cols = [np.append(t1, 0.0), np.append(t2, 0.0), np.append(u, 0.0), np.array([0, 0, 0, 1.0])]
        return np.column_stack(cols)

    def field_(v, seed):
        rng = np.random.default_rng(seed)
        a = np.array([0.0, 0.0, 1.0]) + 0.3 * rng.standard_normal(3)
        a /= np.linalg.norm(a)
        u = v[:3] / np.linalg.norm(v[:3])
        return np.append(a - (a @ u) * u, 0.0)

    def zero_sampler(n, seed):
        return np.hstack([_sphere_points(n, seed), np.zeros((n, 1))])

    return BundleSpec(
        name="sphere-euler", domain=Domain(depth, np.array([-1.5, -1.5, -1.5, -0.5]), np.array([1.5, 1.5, 1.5, 0.5])),
        section=section, frame=frame, field=field_,
        footprint=lambda v: v[:3] / np.linalg.norm(v[:3]),
        locate=lambda xi: np.append(np.asarray(xi, dtype=float), 0.0),
        space_sampler=_sphere_points, zero_sampler=zero_sampler, expected=Fraction(2))


def make_torus_trivial_spec() -> BundleSpec:
    """Trivial rank-2 bundle over the torus with the zero section.

    The chart is an open square overlapping the fundamental square [0, 2pi)^2
    by a margin of 1 on each side, so every torus point sits deep inside it;
    footprints reduce modulo 2pi.
    """
    two_pi = 2 * math.pi
    lo, hi = np.array([-1.0, -1.0]), np.array([two_pi + 1.0, two_pi + 1.0])

    def depth(v):
        return float(min(1.0, np.min(v - lo), np.min(hi - v)))

    def field_(v, seed):
        rng = np.random.default_rng(seed)
        ang = rng.uniform(0, 2 * math.pi)
        return np.array([math.cos(ang), math.sin(ang)])

    def torus_points(n, seed):
        return sampling.box(np.zeros(2), np.full(2, two_pi), n, seed)

    return BundleSpec(
        name="torus-trivial", domain=Domain(depth, lo, hi), section=lambda v: np.zeros(2),
        frame=lambda v: np.eye(2), field=field_, footprint=lambda v: np.mod(np.asarray(v, dtype=float), two_pi),
        locate=lambda xi: np.mod(np.asarray(xi, dtype=float), two_pi), space_sampler=torus_points,
        zero_sampler=torus_points, expected=Fraction(0))


# --------------------------------------------------------------- two circles


class TwoCircleBranched:
    """Two weight-1/2 circles glued along a closed arc [arc_start, arc_end] of angles."""

    components = ("a", "b")

    def __init__(self, arc_start: float = 0.0, arc_end: float = math.pi / 2):
        if not 0.0 <= arc_start < arc_end < 2 * math.pi:
            raise PreconditionError("arc must be a proper closed subarc")
        self.arc = (float(arc_start), float(arc_end))
        self.component_weight = Fraction(1, 2)

    def on_arc(self, theta: float) -> bool:
        t = float(theta) % (2 * math.pi)
        return self.arc[0] <= t <= self.arc[1]

    def local_branches(self, component: str, theta: float) -> list[tuple[str, float]]:
        if component not in self.components:
            raise PreconditionError(f"unknown component {component}")
        if self.on_arc(theta):
            return [(c, float(theta)) for c in self.components]
        return [(component, float(theta))]

    def weight(self, component: str, theta: float) -> Fraction:
        """Sum of the weights of the components passing through the point."""
        return sum((self.component_weight for _ in self.local_branches(component, theta)), Fraction(0))

    def check_weighting(self, samples: int = 50, seed: int = 0, eps: float = 1e-7) -> Report:
        rep = Report("two-circle weighting")
        rng = np.random.default_rng(seed)
        res = []
        ends = list(self.arc)
        for k in range(samples):
            base = ends[k % 2]
            theta = base + float(rng.uniform(-eps, eps))
            comp = self.components[k % 2]
            branches = self.local_branches(comp, theta)
            total = sum((self.component_weight for _ in branches), Fraction(0))
            res.append(float(abs(total - self.weight(comp, theta))))
        rep.add("branch_sum", res, 1e-12, note="samples straddle both arc endpoints")
        return rep


def make_two_circle_branched() -> ExampleSpec:
    return ExampleSpec(name="two-circle", params={}, branched=TwoCircleBranched(),
                       expected_weights={"arc": Fraction(1), "off_arc": Fraction(1, 2)})


# ------------------------------------------------------------------- registry

ATLAS_EXAMPLES = {
    "tangent-sphere": lambda **kw: make_tangent_sphere_atlas(),
    "football": lambda p=2, q=3, **kw: make_football_atlas(p, q),
    "tangent-sphere-redundant": lambda **kw: make_redundant_sphere_atlas(),
    "toy-chain": lambda **kw: make_toy_chain_atlas(),
    "bundle-point": lambda **kw: make_point_bundle_atlas(),
    "bundle-offset": lambda **kw: make_offset_bundle_atlas(),
}

BUNDLE_EXAMPLES = {
    "sphere-euler": make_sphere_euler_spec,
    "torus-trivial": make_torus_trivial_spec,
}


def get_example(name: str, **params) -> ExampleSpec:
    if name == "two-circle":
        return make_two_circle_branched()
    if name in BUNDLE_EXAMPLES:
        b = BUNDLE_EXAMPLES[name]()
        return ExampleSpec(name=name, params={}, bundle=b, expected_count=b.expected)
    if name not in ATLAS_EXAMPLES:
        known = sorted(list(ATLAS_EXAMPLES) + list(BUNDLE_EXAMPLES) + ["two-circle"])
        raise PreconditionError(f"unknown example {name!r}; known: {', '.join(known)}")
    return ATLAS_EXAMPLES[name](**params)
