"""Integer-coded genetic search over tiling words.

Chromosomes are tiling words, so every individual is a complete tiling.
Offspring that break the edge rules are regenerated from the same parents
until they are admissible (bounded retries, then a parent copy).  All random
draws happen on the generation loop; only cost evaluation fans out to
threads, which keeps runs reproducible for any thread count.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .enumeration import _bounds_for, cardinality
from .lattice import HexAperture
from .tiling import heights_are_valid, maximal_word, minimal_heights, word_to_heights

log = logging.getLogger(__name__)

Word = tuple[int, ...]


@dataclass(frozen=True)
class GAConfig:
    population: int = 542
    iterations: int = 1000
    crossover: float = 0.9
    mutation: float = 0.01
    stall_window: int = 50
    stall_threshold: float = 1e-4
    seed: int = 0
    diversity: float = 0.1  # minimum normalised Hamming distance at start
    retries: int = 100
    epsilon: float = 1e-12  # roulette weight is 1 / (chi + epsilon)

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not (0.0 <= self.crossover <= 1.0 and 0.0 <= self.mutation <= 1.0):
            raise ValueError("crossover and mutation probabilities must lie in [0, 1]")
        if self.stall_window < 2:
            raise ValueError("stall_window must be at least 2")
        if self.stall_threshold < 0 or self.retries < 1 or self.epsilon <= 0:
            raise ValueError("stall_threshold >= 0, retries >= 1 and epsilon > 0 required")


@dataclass
class Individual:
    word: Word
    chi: float


@dataclass
class RunTrace:
    best: list[float] = field(default_factory=list)
    mean: list[float] = field(default_factory=list)
    evaluations: list[int] = field(default_factory=list)
    reason: str = ""
    wall_time: float = 0.0

    @property
    def iterations(self) -> int:
        """Index of the last generation (generation 0 is the initial population)."""
        return len(self.best) - 1

    def rows(self):
        for k, (b, m, e) in enumerate(zip(self.best, self.mean, self.evaluations)):
            yield k, b, m, e


@dataclass
class CDMResult:
    best: Individual
    trace: RunTrace
    population: list[Individual]


# --------------------------------------------------------------------------
# Feasibility helpers


class WordSpace:
    """Letter bounds and validity for one aperture."""

    def __init__(self, aperture: HexAperture):
        self.aperture = aperture
        self.L = aperture.n_internal
        self.depth = maximal_word(aperture)
        self._b = _bounds_for(aperture.rings)
        self._h1 = minimal_heights(aperture).astype(float)

    def is_valid(self, word: Sequence[int]) -> bool:
        w = np.asarray(word)
        if np.any(w < 0) or np.any(w > self.depth):
            return False
        return heights_are_valid(self.aperture, word_to_heights(self.aperture, w))

    def sample(self, rng: np.random.Generator) -> Word:
        """Draw letters in index order, each uniformly among the values that
        still admit a completion of the remaining letters."""
        h = self._h1.copy()
        L, dist = self.L, self._b.dist
        rim = np.arange(L, self._b.V)
        word = []
        for l in range(L):
            fixed = np.r_[0:l, rim]
            lo = np.max(h[fixed] - dist[l, fixed])
            hi = np.min(h[fixed] + dist[fixed, l])
            w_lo = int(round((lo - self._h1[l]) / 3))
            w_hi = int(round((hi - self._h1[l]) / 3))
            w = int(rng.integers(w_lo, w_hi + 1))
            h[l] = self._h1[l] + 3 * w
            word.append(w)
        return tuple(word)


def _hamming(a: Word, b: Word) -> float:
    return sum(x != y for x, y in zip(a, b)) / len(a)


def init_population(aperture: HexAperture, config: GAConfig, rng: np.random.Generator) -> list[Word]:
    """``P`` distinct admissible words, spread out in Hamming distance.

    The minimal and maximal words always come first.  Candidates closer
    than ``config.diversity`` to an accepted word are skipped while the
    attempt budget lasts; after that any new distinct word is accepted.
    """
    space = WordSpace(aperture)
    n = aperture.rings
    P = config.population
    T = cardinality(n, n, n)
    if P > T:
        raise ValueError(f"population {P} exceeds the {T} tilings of this aperture")
    words: list[Word] = [tuple([0] * space.L)]
    top = tuple(int(x) for x in space.depth)
    if P >= 2 and top != words[0]:
        words.append(top)
    seen = set(words)
    budget = 200 * P
    attempts = 0
    while len(words) < P:
        if attempts > 2 * budget:
            raise RuntimeError(f"could not draw {P} distinct admissible words")
        attempts += 1
        w = space.sample(rng)
        if w in seen:
            continue
        if attempts <= budget and any(_hamming(w, u) < config.diversity for u in words):
            continue
        words.append(w)
        seen.add(w)
    return words[:P]


# --------------------------------------------------------------------------
# Operators


def roulette(chis: np.ndarray, k: int, rng: np.random.Generator, epsilon: float) -> np.ndarray:
    fitness = 1.0 / (np.asarray(chis, dtype=float) + epsilon)
    cdf = np.cumsum(fitness)
    draws = rng.random(k) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, draws, side="right"), len(chis) - 1)


def crossover(a: Word, b: Word, rng: np.random.Generator, p: float) -> tuple[Word, Word]:
    if len(a) < 2 or rng.random() >= p:
        return a, b
    cut = int(rng.integers(1, len(a)))
    return a[:cut] + b[cut:], b[:cut] + a[cut:]


def mutate(w: Word, depth: np.ndarray, rng: np.random.Generator, p: float) -> Word:
    hits = rng.random(len(w)) < p
    if not hits.any():
        return w
    signs = rng.choice((-1, 1), size=len(w))
    out = np.asarray(w) + np.where(hits, signs, 0)
    return tuple(int(x) for x in np.clip(out, 0, depth))


def breed(
    parents: tuple[Word, Word],
    space: WordSpace,
    config: GAConfig,
    rng: np.random.Generator,
) -> tuple[Word, Word]:
    """Two admissible children; each failing child is redrawn from the parents."""
    children: list[Word | None] = [None, None]
    for attempt in range(config.retries):
        c1, c2 = crossover(parents[0], parents[1], rng, config.crossover)
        for k, c in enumerate((c1, c2)):
            if children[k] is None:
                c = mutate(c, space.depth, rng, config.mutation)
                if space.is_valid(c):
                    children[k] = c
        if children[0] is not None and children[1] is not None:
            break
    for k in range(2):
        if children[k] is None:
            log.debug("retry budget exhausted, copying parent %d", k)
            children[k] = parents[k]
    return children[0], children[1]


def step(
    population: list[Individual],
    space: WordSpace,
    config: GAConfig,
    rng: np.random.Generator,
) -> list[Word]:
    """Chromosomes of the next generation; the best individual survives as is."""
    chis = np.array([ind.chi for ind in population])
    elite = population[int(np.argmin(chis))].word
    nxt = [elite]
    while len(nxt) < config.population:
        i, j = roulette(chis, 2, rng, config.epsilon)
        c1, c2 = breed((population[i].word, population[j].word), space, config, rng)
        nxt.append(c1)
        if len(nxt) < config.population:
            nxt.append(c2)
    return nxt


def stagnated(best: Sequence[float], window: int, threshold: float) -> bool:
    """Relative spread of the best cost over the trailing ``window`` iterations."""
    k = len(best) - 1
    if k <= window:
        return False
    current = best[-1]
    if current == 0:
        return True
    recent = best[-window:]
    return abs(window * current - sum(recent)) / current <= threshold


# --------------------------------------------------------------------------
# Driver


class _CostCache:
    def __init__(self, cost: Callable[[Word], float], threads: int):
        self.cost = cost
        self.threads = max(1, int(threads))
        self.table: dict[Word, float] = {}
        self.evaluations = 0

    def __call__(self, words: list[Word]) -> list[float]:
        todo = list(dict.fromkeys(w for w in words if w not in self.table))
        if todo:
            if self.threads > 1 and len(todo) > 1:
                with ThreadPoolExecutor(max_workers=self.threads) as pool:
                    values = list(pool.map(self.cost, todo))
            else:
                values = [self.cost(w) for w in todo]
            for w, v in zip(todo, values):
                self.table[w] = float(v)
            self.evaluations += len(todo)
        return [self.table[w] for w in words]


def run_cdm(
    aperture: HexAperture,
    cost: Callable[[Word], float],
    config: GAConfig,
    threads: int = 1,
) -> CDMResult:
    """Run the GA until the mask is met, ``K`` generations pass, or progress stalls."""
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    space = WordSpace(aperture)
    evaluate = _CostCache(cost, threads)
    trace = RunTrace()

    words = init_population(aperture, config, rng)
    population = [Individual(w, c) for w, c in zip(words, evaluate(words))]
    best = min(population, key=lambda ind: ind.chi)
    k = 0
    while True:
        chis = [ind.chi for ind in population]
        gen_best = min(population, key=lambda ind: ind.chi)
        if gen_best.chi < best.chi:
            best = gen_best
        trace.best.append(best.chi)
        trace.mean.append(float(np.mean(chis)))
        trace.evaluations.append(evaluate.evaluations)
        if best.chi == 0.0:
            trace.reason = "mask-satisfied"
            break
        if k >= config.iterations:
            trace.reason = "max-iterations"
            break
        if stagnated(trace.best, config.stall_window, config.stall_threshold):
            trace.reason = "stagnation"
            break
        words = step(population, space, config, rng)
        population = [Individual(w, c) for w, c in zip(words, evaluate(words))]
        k += 1
    trace.wall_time = time.perf_counter() - start
    return CDMResult(best, trace, population)
