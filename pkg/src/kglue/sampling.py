"""Deterministic low-discrepancy sampling and a small order-preserving parallel map."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
from scipy.stats import qmc

T = TypeVar("T")
R = TypeVar("R")


def unit_cube(n: int, dim: int, seed: int) -> np.ndarray:
    """First ``n`` points of a scrambled Sobol sequence in [0, 1)^dim."""
    if n <= 0 or dim <= 0:
        return np.zeros((max(n, 0), max(dim, 0)))
    engine = qmc.Sobol(d=dim, scramble=True, seed=seed)
    m = max(1, math.ceil(math.log2(n)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pts = engine.random_base2(m)
    return pts[:n]


def box(lower, upper, n: int, seed: int) -> np.ndarray:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    return lower + (upper - lower) * unit_cube(n, lower.size, seed)


def ball(dim: int, radius: float, n: int, seed: int) -> np.ndarray:
    """Points of the open Euclidean ball of the given radius."""
    if dim == 0:
        return np.zeros((n, 0))
    out: list[np.ndarray] = []
    attempt = 0
    while sum(len(o) for o in out) < n:
        cube = 2.0 * unit_cube(4 * n + 8, dim, seed + 7919 * attempt) - 1.0
        keep = cube[np.einsum("ij,ij->i", cube, cube) < 1.0]
        out.append(keep)
        attempt += 1
    return radius * np.concatenate(out)[:n]


def where(predicate: Callable[[np.ndarray], bool], lower, upper, n: int, seed: int,
          max_rounds: int = 8) -> np.ndarray:
    """Rejection-sample ``n`` points of a box satisfying ``predicate`` (fewer if rare)."""
    lower = np.asarray(lower, dtype=float)
    found: list[np.ndarray] = []
    batch = max(4 * n, 64)
    for rnd in range(max_rounds):
        cand = box(lower, upper, batch, seed + 104729 * rnd)
        found.extend(p for p in cand if predicate(p))
        if len(found) >= n:
            break
        batch *= 2
    if not found:
        return np.zeros((0, lower.size))
    return np.array(found[:n])


def thread_budget() -> int:
    raw = os.environ.get("KGLUE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def pmap(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Map preserving input order; threads are capped by ``KGLUE_THREADS``."""
    items = list(items)
    workers = min(thread_budget(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def pick(rng: np.random.Generator, seq: Sequence[T], k: int) -> list[T]:
    if not seq:
        return []
    idx = rng.integers(0, len(seq), size=k)
    return [seq[i] for i in idx]
