"""NSGA-II over binary feature masks.

All objectives are maximized. The engine keeps an archive of every
non-dominated (mask, objectives) pair seen so far, deduplicated by mask.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

PENALTY = (0.0, 0.0, -1.0)


class ObjectiveMode:
    SUPPRESS_IDENTITY = "suppress_identity"
    SUPPRESS_ACTIVITY = "suppress_activity"
    ALL = (SUPPRESS_IDENTITY, SUPPRESS_ACTIVITY)


@dataclass
class GaConfig:
    population_size: int = 50
    max_generations: int = 50
    crossover_rate: float = 0.9
    mutation_rate: Optional[float] = None  # None -> 1/N
    seed: int = 0
    objective_mode: str = ObjectiveMode.SUPPRESS_IDENTITY
    normalized_crowding: bool = False

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.max_generations < 0:
            raise ValueError("max_generations must be >= 0")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.objective_mode not in ObjectiveMode.ALL:
            raise ValueError(f"unknown objective_mode {self.objective_mode!r}")


@dataclass
class Individual:
    mask: np.ndarray
    objectives: tuple
    rank: int = 0
    crowding: float = 0.0

    @property
    def key(self) -> bytes:
        return np.packbits(self.mask).tobytes() + bytes([self.mask.shape[0] % 8])

    def to_dict(self, names: Optional[Sequence[str]] = None) -> dict:
        d = {
            "mask": "".join("1" if b else "0" for b in self.mask),
            "objectives": [float(v) for v in self.objectives],
            "n_selected": int(self.mask.sum()),
        }
        if names is not None:
            d["features"] = [names[i] for i in np.flatnonzero(self.mask)]
        return d


def dominates(a, b) -> bool:
    """``a`` is at least as good everywhere and strictly better somewhere."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("objective vectors must have equal arity")
    return bool(np.all(a >= b) and np.any(a > b))


def dominance_matrix(objs) -> np.ndarray:
    """``D[i, j]`` is True when row i dominates row j."""
    F = np.asarray(objs, dtype=float)
    ge = np.all(F[:, None, :] >= F[None, :, :], axis=2)
    gt = np.any(F[:, None, :] > F[None, :, :], axis=2)
    return ge & gt


def fast_nondominated_sort(objs) -> list[list[int]]:
    """Partition row indices into successive non-dominated fronts."""
    F = np.asarray(objs, dtype=float)
    if F.ndim != 2 or F.shape[0] == 0:
        raise ValueError("need a nonempty (n, m) objective array")
    D = dominance_matrix(F)
    dominated_count = D.sum(axis=0)
    dominates_list = [np.flatnonzero(D[i]) for i in range(F.shape[0])]
    front = [int(i) for i in np.flatnonzero(dominated_count == 0)]
    fronts = []
    while front:
        fronts.append(front)
        nxt = []
        for p in front:
            for q in dominates_list[p]:
                dominated_count[q] -= 1
                if dominated_count[q] == 0:
                    nxt.append(int(q))
        front = sorted(nxt)
    return fronts


def crowding_distance(objs, normalized: bool = False) -> np.ndarray:
    """Sum over objectives of the gap between each member's sorted neighbours.

    Boundary members get ``inf``. Gaps are raw objective differences unless
    ``normalized`` divides them by the objective's range on the front.
    """
    F = np.asarray(objs, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    n, m = F.shape
    if n == 0:
        raise ValueError("empty front")
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, math.inf)
    for j in range(m):
        order = np.argsort(F[:, j], kind="stable")
        vals = F[order, j]
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        gaps = vals[2:] - vals[:-2]
        if normalized:
            span = vals[-1] - vals[0]
            gaps = gaps / span if span > 0 else np.zeros_like(gaps)
        dist[order[1:-1]] += gaps
    return dist


def assign_rank_and_crowding(pop: list[Individual], normalized: bool = False) -> list[list[int]]:
    objs = np.array([ind.objectives for ind in pop], dtype=float)
    fronts = fast_nondominated_sort(objs)
    for r, front in enumerate(fronts, start=1):
        cd = crowding_distance(objs[front], normalized)
        for i, c in zip(front, cd):
            pop[i].rank = r
            pop[i].crowding = float(c)
    return fronts


def binary_tournament(pop: Sequence[Individual], rng: np.random.Generator) -> Individual:
    """Two distinct contestants: lower rank wins, then larger crowding, then a coin flip."""
    i, j = rng.choice(len(pop), 2, replace=False)
    a, b = pop[i], pop[j]
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return a if rng.random() < 0.5 else b


def crossover(p1, p2, rng: np.random.Generator, rate: float = 0.5):
    """Uniform crossover: each bit is exchanged with probability ``rate``."""
    p1 = np.asarray(p1, dtype=bool)
    p2 = np.asarray(p2, dtype=bool)
    if p1.shape != p2.shape:
        raise ValueError("parents must have equal length")
    swap = rng.random(p1.shape[0]) < rate
    return np.where(swap, p2, p1), np.where(swap, p1, p2)


def mutate(mask, rng: np.random.Generator, rate: float) -> np.ndarray:
    """Independent bit flips with probability ``rate``."""
    mask = np.asarray(mask, dtype=bool)
    flip = rng.random(mask.shape[0]) < rate
    return mask ^ flip


class ParetoArchive:
    """Non-dominated individuals, unique by mask (first evaluation kept)."""

    def __init__(self):
        self.members: list[Individual] = []

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def update(self, candidates: Sequence[Individual]) -> None:
        keys = {m.key for m in self.members}
        pool = list(self.members)
        for c in candidates:
            if c.key not in keys:
                keys.add(c.key)
                pool.append(Individual(c.mask.copy(), tuple(c.objectives)))
        objs = np.array([p.objectives for p in pool], dtype=float)
        dominated = dominance_matrix(objs).any(axis=0)
        self.members = [p for p, d in zip(pool, dominated) if not d]

    def is_pure(self) -> bool:
        if not self.members:
            return True
        objs = np.array([m.objectives for m in self.members], dtype=float)
        return not dominance_matrix(objs).any()

    def best(self) -> Individual:
        """Member with the largest third objective, ties by the first."""
        if not self.members:
            raise ValueError("empty archive")
        return max(self.members, key=lambda m: (m.objectives[2], m.objectives[0]))

    def to_dict(self, names: Optional[Sequence[str]] = None) -> dict:
        members = sorted(self.members, key=lambda m: (-m.objectives[2], -m.objectives[0], m.to_dict()["mask"]))
        return {"members": [m.to_dict(names) for m in members]}


def _evaluate(masks, fitness, cache, executor):
    todo = []
    for m in masks:
        k = np.packbits(m).tobytes()
        if k not in cache and k not in [t[0] for t in todo]:
            todo.append((k, m))
    if todo:
        def safe(m):
            if not m.any():
                return PENALTY
            try:
                return tuple(float(v) for v in fitness(m))
            except Exception as exc:  # a failed evaluation is penalized, not fatal
                log.warning("fitness failed on mask with %d features: %s", int(m.sum()), exc)
                return PENALTY
        mapper = executor.map if executor is not None else map
        for (k, _), res in zip(todo, mapper(safe, [m for _, m in todo])):
            cache[k] = res
    return [cache[np.packbits(m).tobytes()] for m in masks]


@dataclass
class EvolutionResult:
    archive: ParetoArchive
    population: list
    telemetry: list = field(default_factory=list)
    n_evaluations: int = 0


def evolve(config: GaConfig, fitness: Callable[[np.ndarray], Sequence[float]], n_features: int,
           telemetry_path=None, executor=None, on_generation=None) -> EvolutionResult:
    """Run NSGA-II and return the archive of non-dominated masks.

    ``fitness`` maps a boolean mask to an objective triple and must be pure;
    results are cached per mask. Empty masks and masks whose evaluation
    raises receive ``PENALTY``. ``executor`` (anything with an ordered
    ``map``) may evaluate a generation concurrently without changing the
    outcome.
    """
    rng = np.random.default_rng(config.seed)
    P = config.population_size
    mut_rate = config.mutation_rate if config.mutation_rate is not None else 1.0 / n_features
    cache: dict = {}
    t0 = time.perf_counter()

    masks = [rng.random(n_features) < 0.5 for _ in range(P)]
    objs = _evaluate(masks, fitness, cache, executor)
    pop = [Individual(m, o) for m, o in zip(masks, objs)]
    assign_rank_and_crowding(pop, config.normalized_crowding)
    archive = ParetoArchive()
    archive.update([ind for ind in pop if ind.rank == 1])
    records = [_telemetry(0, archive, time.perf_counter() - t0, len(cache))]
    if on_generation is not None:
        on_generation(0, archive, pop)

    for gen in range(1, config.max_generations + 1):
        tg = time.perf_counter()
        parents = [binary_tournament(pop, rng) for _ in range(P + (P % 2))]
        children = []
        for a, b in zip(parents[0::2], parents[1::2]):
            if rng.random() < config.crossover_rate:
                c1, c2 = crossover(a.mask, b.mask, rng, 0.5)
            else:
                c1, c2 = a.mask.copy(), b.mask.copy()
            children.append(mutate(c1, rng, mut_rate))
            children.append(mutate(c2, rng, mut_rate))
        children = children[:P]
        objs = _evaluate(children, fitness, cache, executor)
        merged = pop + [Individual(m, o) for m, o in zip(children, objs)]
        fronts = assign_rank_and_crowding(merged, config.normalized_crowding)

        nxt = []
        for front in fronts:
            if len(nxt) + len(front) <= P:
                nxt.extend(front)
            else:
                by_crowd = sorted(front, key=lambda i: -merged[i].crowding)
                nxt.extend(by_crowd[:P - len(nxt)])
                break
        pop = [merged[i] for i in nxt]
        assign_rank_and_crowding(pop, config.normalized_crowding)
        archive.update([ind for ind in pop if ind.rank == 1])
        records.append(_telemetry(gen, archive, time.perf_counter() - tg, len(cache)))
        if on_generation is not None:
            on_generation(gen, archive, pop)

    if telemetry_path is not None:
        with open(telemetry_path, "w") as fh:
            for r in records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
    return EvolutionResult(archive, pop, records, len(cache))


def _telemetry(gen, archive, wall, n_eval):
    objs = np.array([m.objectives for m in archive], dtype=float)
    best = objs.max(axis=0) if objs.size else [math.nan] * 3
    return {
        "generation": gen,
        "best_o1": float(best[0]),
        "best_o2": float(best[1]),
        "best_o3": float(best[2]),
        "archive_size": len(archive),
        "evaluations": n_eval,
        "wall_time_s": wall,
    }
