"""Deterministic maximisation over products of probability simplices.

Two stages: a coarse lattice scan (plus optional seeded random points) over
every block, then Nelder-Mead refinement from the best few candidates. The
refinement runs in unconstrained coordinates and every evaluation goes
through a Euclidean projection onto the simplex product, so the objective is
only ever called on feasible points.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

Blocks = list[np.ndarray]
Objective = Callable[[Blocks], float]

MAX_LATTICE = 200_000


def default_threads() -> int:
    env = os.environ.get("STALEBC_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SearchSpec:
    dims: tuple[int, ...]
    grid_resolution: int | None = None
    restarts: int = 4
    max_iters: int = 4000
    max_rounds: int = 12
    tol: float = 1e-12
    seed: int = 0
    random_points: int = 0
    min_separation: float | None = None
    threads: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not self.dims or min(self.dims) < 1:
            raise ValueError("dims must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")

    def resolution(self, dim: int) -> int:
        if self.grid_resolution is not None:
            return self.grid_resolution
        return 20 if dim <= 3 else 8


@dataclass
class OptResult:
    best_value: float
    best_point: Blocks
    evaluations: int
    exhausted: bool = False
    trace: list[tuple[int, float]] = field(default_factory=list)

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate(self.best_point)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based).

    The descending sort is stable, so ties are resolved by lowest index.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    u = -np.sort(-v, kind="stable")
    css = np.cumsum(u) - 1.0
    j = np.arange(1, n + 1)
    rho = np.nonzero(u - css / j > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    w = np.maximum(v - theta, 0.0)
    return w / w.sum()


def simplex_lattice(dim: int, res: int) -> np.ndarray:
    """All points of the simplex with coordinates in multiples of 1/res."""
    if dim == 1:
        return np.ones((1, 1))
    pts = []
    for bars in itertools.combinations(range(res + dim - 1), dim - 1):
        prev, counts = -1, []
        for b in bars:
            counts.append(b - prev - 1)
            prev = b
        counts.append(res + dim - 2 - prev)
        pts.append(counts)
    return np.asarray(pts, dtype=float) / res


def _lattice_count(dim: int, res: int) -> int:
    return math.comb(res + dim - 1, dim - 1)


def _split(flat: np.ndarray, dims: Sequence[int]) -> Blocks:
    out, i = [], 0
    for d in dims:
        out.append(flat[i:i + d])
        i += d
    return out


def project_blocks(flat: np.ndarray, dims: Sequence[int]) -> Blocks:
    return [project_simplex(b) for b in _split(np.asarray(flat, float), dims)]


def _eval_many(objective: Objective, points: list[Blocks], threads: int) -> list[float]:
    if threads <= 1 or len(points) < 64:
        return [float(objective(p)) for p in points]
    # contiguous chunks, concatenated in index order
    n = len(points)
    step = -(-n // threads)
    chunks = [points[i:i + step] for i in range(0, n, step)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = ex.map(lambda ch: [float(objective(p)) for p in ch], chunks)
        return [v for part in parts for v in part]


def maximize(objective: Objective, spec: SearchSpec) -> OptResult:
    """Maximise ``objective`` over the product of simplices ``spec.dims``."""
    dims = spec.dims
    threads = spec.threads or default_threads()
    res = [spec.resolution(d) for d in dims]
    while math.prod(_lattice_count(d, r) for d, r in zip(dims, res)) > MAX_LATTICE:
        k = int(np.argmax(res))
        if res[k] <= 2:
            break
        res[k] -= 1
    grids = [simplex_lattice(d, r) for d, r in zip(dims, res)]
    candidates: list[Blocks] = [list(combo) for combo in itertools.product(*grids)]
    if spec.random_points:
        rng = np.random.default_rng(spec.seed)
        for _ in range(spec.random_points):
            candidates.append([rng.dirichlet(np.ones(d)) for d in dims])

    values = _eval_many(objective, candidates, threads)
    evals = len(candidates)
    order = np.argsort(-np.asarray(values), kind="stable")
    best_i = int(order[0])
    best_val, best_pt = values[best_i], candidates[best_i]
    trace = [(0, best_val)]

    # best candidates that are pairwise separated, so restarts explore
    # different basins instead of one cluster of lattice neighbours
    starts: list[np.ndarray] = []
    sep = spec.min_separation if spec.min_separation is not None else 2.0 / max(res)
    for i in order:
        x = np.concatenate(candidates[i])
        if all(np.abs(x - y).sum() > sep for y in starts):
            starts.append(x)
        if len(starts) >= spec.restarts:
            break

    def neg(z):
        return -float(objective(project_blocks(z, dims)))

    exhausted = False
    step = 0.5 / max(res)
    n = sum(dims)
    for it, start in enumerate(starts, 1):
        x = start
        fx = neg(x)
        evals += 1
        # Nelder-Mead stalls on ridges (min of two terms) and on the projected
        # boundary; restart from the incumbent with a fresh simplex until a
        # round gains less than tol.
        for rnd in range(spec.max_rounds):
            scale = step / (1 + rnd % 4) ** 2
            simplex = np.vstack([x] + [x + scale * e for e in np.eye(n)])
            r = minimize(neg, x, method="Nelder-Mead",
                         options={"initial_simplex": simplex, "xatol": spec.tol,
                                  "fatol": spec.tol, "maxiter": spec.max_iters,
                                  "maxfev": 2 * spec.max_iters, "adaptive": n > 4})
            evals += int(r.nfev)
            gain = fx - float(r.fun)
            if gain > 0:
                x, fx = np.concatenate(project_blocks(r.x, dims)), float(r.fun)
            if gain <= spec.tol and rnd >= 1:
                break
        exhausted |= r.status != 0
        val = float(objective(_split(x, dims)))
        evals += 1
        if val > best_val:
            best_val, best_pt = val, _split(x, dims)
        trace.append((it, best_val))

    return OptResult(best_val, [np.array(b) for b in best_pt], evals, exhausted, trace)
