"""Synthesis pipelines: cost of a tiling, exhaustive search and GA runs."""

from __future__ import annotations

import itertools
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from .enumeration import EnumerationCursor, cardinality, iter_heights
from .iga import CDMResult, GAConfig, run_cdm
from .lattice import HexAperture
from .pattern import (
    ArrayModel,
    CostEvaluator,
    ExcitationSet,
    PatternMetrics,
    PowerMask,
    SubarrayCoefficients,
    UVGrid,
    isotropic,
    metrics,
    subarray_coefficients,
    tiled_excitation,
    tiled_weights_batch,
)
from .tiling import Tiling, decode, encode, minimal_heights, tile_pairs_batch, word_to_heights

log = logging.getLogger(__name__)

THREADS_ENV = "HEXTILE_THREADS"
TIE_TOLERANCE = 1e-12


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            n = int(value)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {value!r}") from None
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
        return n
    return os.cpu_count() or 1


class Problem:
    """Aperture, reference excitation, mask and grid bound into a cost oracle."""

    def __init__(
        self,
        aperture: HexAperture,
        reference: ExcitationSet,
        mask: PowerMask,
        grid: UVGrid | int = 201,
        element: Callable = isotropic,
    ):
        if len(reference) != aperture.n_triangles:
            raise ValueError(f"reference has {len(reference)} elements, aperture has {aperture.n_triangles}")
        self.aperture = aperture
        self.reference = reference
        self.mask = mask
        self.grid = grid if isinstance(grid, UVGrid) else UVGrid(int(grid))
        self.model = ArrayModel.for_aperture(aperture, self.grid, element)
        self.evaluator = CostEvaluator(self.model, mask)

    def chi_heights(self, heights: np.ndarray) -> np.ndarray:
        """Costs of a ``(B, V)`` stack of height fields."""
        a, b = tile_pairs_batch(self.aperture, heights)
        return np.atleast_1d(self.evaluator(tiled_weights_batch(a, b, self.reference)))

    def chi_word(self, word) -> float:
        # one tiling per call, so the value never depends on batch layout
        return float(self.chi_heights(word_to_heights(self.aperture, word)[None, :])[0])

    def chi_tiling(self, tiling: Tiling) -> float:
        return float(self.evaluator(self.tiled(tiling).weights))

    def tiled(self, tiling: Tiling) -> ExcitationSet:
        return tiled_excitation(tiling, subarray_coefficients(tiling, self.reference))

    def solution(self, tiling: Tiling, provenance: dict | None = None) -> "SolutionRecord":
        coeffs = subarray_coefficients(tiling, self.reference)
        pattern = self.model.pattern(tiled_excitation(tiling, coeffs).weights)
        return SolutionRecord(
            tiling=tiling,
            word=tuple(int(x) for x in encode(self.aperture, tiling)),
            coefficients=coeffs,
            chi=self.chi_tiling(tiling),
            metrics=metrics(pattern, self.mask),
            provenance=dict(provenance or {}),
        )


@dataclass
class SolutionRecord:
    tiling: Tiling
    word: tuple[int, ...]
    coefficients: SubarrayCoefficients
    chi: float
    metrics: PatternMetrics
    provenance: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# Exhaustive search


@dataclass
class EDMResult:
    costs: np.ndarray  # chi per tiling index t - 1
    best: list[tuple[int, tuple[int, ...]]]  # (t, word) of co-optima, first ones only
    worst: tuple[int, tuple[int, ...]]
    evaluations: int
    elapsed: float

    @property
    def best_chi(self) -> float:
        return float(np.min(self.costs))

    @property
    def worst_chi(self) -> float:
        return float(self.costs[self.worst[0] - 1])

    @property
    def n_best(self) -> int:
        """Number of tilings tied with the optimum (all of them, not only stored ones)."""
        return int(np.count_nonzero(self.costs <= self.best_chi + TIE_TOLERANCE))

    def sorted_curve(self) -> np.ndarray:
        """Costs from the worst tiling to the best one."""
        return np.sort(self.costs)[::-1]


def _batches(heights: Iterator[np.ndarray], size: int) -> Iterator[np.ndarray]:
    buf = []
    for h in heights:
        buf.append(h)
        if len(buf) == size:
            yield np.array(buf)
            buf = []
    if buf:
        yield np.array(buf)


class _Tracker:
    """Running arg-min (with ties) and arg-max over the cost stream.

    Only the first ``MAX_TIES`` co-optimal words are kept; the total number
    of ties is recovered from the cost array.
    """

    MAX_TIES = 64

    def __init__(self, state: dict | None = None):
        state = state or {}
        self.best_chi = float(state.get("best_chi", np.inf))
        self.best = [(int(t), tuple(w)) for t, w in state.get("best", [])]
        self.worst_chi = float(state.get("worst_chi", -np.inf))
        w = state.get("worst")
        self.worst = (int(w[0]), tuple(w[1])) if w else None

    def update(self, t0: int, chis: np.ndarray, words: np.ndarray) -> None:
        lo = float(chis.min())
        if lo < self.best_chi:
            self.best_chi = lo
            self.best = [(t, w) for t, w in self.best if self._costs[t - 1] <= lo + TIE_TOLERANCE]
        for k in np.flatnonzero(chis <= self.best_chi + TIE_TOLERANCE):
            if len(self.best) >= self.MAX_TIES:
                break
            self.best.append((t0 + int(k), tuple(int(x) for x in words[k])))
        hi = int(np.argmax(chis))
        if chis[hi] > self.worst_chi:
            self.worst_chi = float(chis[hi])
            self.worst = (t0 + hi, tuple(int(x) for x in words[hi]))

    def bind(self, costs: np.ndarray) -> None:
        self._costs = costs

    def state(self) -> dict:
        return {
            "best_chi": self.best_chi,
            "best": [[t, list(w)] for t, w in self.best],
            "worst_chi": self.worst_chi,
            "worst": [self.worst[0], list(self.worst[1])] if self.worst else None,
        }


def run_edm(
    problem: Problem,
    batch_size: int = 256,
    threads: int | None = None,
    checkpoint_dir: Path | None = None,
    checkpoint_every: int = 200,
    resume: bool = False,
    progress: Callable[[int, int], None] | None = None,
) -> EDMResult:
    """Evaluate every tiling of the aperture and keep the extremes.

    Heights come off the sequential enumerator in fixed-size batches; batches
    are costed on a thread pool and reduced in order, so the result does not
    depend on the number of threads.
    """
    ap = problem.aperture
    n = ap.rings
    T = cardinality(n, n, n)
    costs = np.full(T, np.nan)
    L = ap.n_internal
    h1 = minimal_heights(ap)[:L]
    cursor = EnumerationCursor(ap)
    tracker = _Tracker()
    done = 0
    ckpt = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if resume:
        if ckpt is None:
            raise ValueError("resume needs a checkpoint directory")
        cursor, done, tracker = _load_checkpoint(ap, ckpt, costs)
    tracker.bind(costs)
    threads = threads or default_threads()
    start = time.perf_counter()

    stream = _batches(iter_heights(ap, cursor) if not cursor.exhausted else iter(()), batch_size)
    since_checkpoint = 0
    with ThreadPoolExecutor(max_workers=threads) as pool:
        while True:
            chunk = list(itertools.islice(stream, 4 * threads))
            if not chunk:
                break
            for h, chis in zip(chunk, pool.map(problem.chi_heights, chunk)):
                costs[done : done + len(h)] = chis
                tracker.update(done + 1, chis, (h[:, :L] - h1) // 3)
                done += len(h)
            if progress:
                progress(done, T)
            since_checkpoint += len(chunk)
            if ckpt is not None and done < T and since_checkpoint >= checkpoint_every:
                _save_checkpoint(ckpt, done, chunk[-1][-1], ap, costs, tracker)
                since_checkpoint = 0
    if done != T:
        raise RuntimeError(f"enumeration produced {done} tilings, expected {T}")
    if ckpt is not None:
        _save_checkpoint(ckpt, done, None, ap, costs, tracker)
    return EDMResult(costs, sorted(tracker.best), tracker.worst, done, time.perf_counter() - start)


def _save_checkpoint(path: Path, done: int, last_heights, ap: HexAperture, costs, tracker: _Tracker) -> None:
    path.mkdir(parents=True, exist_ok=True)
    np.save(path / "costs.npy", costs[:done])
    (path / "tracker.json").write_text(json.dumps(tracker.state()))
    if last_heights is not None:
        L = ap.n_internal
        word = (last_heights[:L] - minimal_heights(ap)[:L]) // 3
        cur = EnumerationCursor(ap, word, done)
        cur.save(path / "cursor.txt")
    else:
        (path / "cursor.txt").unlink(missing_ok=True)


def _load_checkpoint(ap: HexAperture, path: Path, costs: np.ndarray):
    prev = np.load(path / "costs.npy")
    costs[: len(prev)] = prev
    tracker = _Tracker(json.loads((path / "tracker.json").read_text()))
    cursor_file = path / "cursor.txt"
    if not cursor_file.exists():
        # finished run: nothing left to enumerate
        cursor = EnumerationCursor(ap)
        cursor.exhausted = True
        return cursor, len(prev), tracker
    cursor = EnumerationCursor.load(ap, cursor_file)
    if cursor.t != len(prev):
        raise ValueError("checkpoint cursor and cost file disagree")
    # the checkpointed word is already costed; continue after it
    if not cursor.advance():
        cursor.exhausted = True
    return cursor, len(prev), tracker


def estimate_edm_seconds(problem: Problem, warmup: int = 100, batch_size: int = 256) -> float:
    """Wall-time estimate for a full exhaustive run, from a short warm-up."""
    ap = problem.aperture
    T = cardinality(ap.rings, ap.rings, ap.rings)
    n = min(warmup, T)
    start = time.perf_counter()
    heights = []
    for k, h in enumerate(iter_heights(ap)):
        heights.append(h)
        if k + 1 == n:
            break
    problem.chi_heights(np.array(heights))
    per = (time.perf_counter() - start) / n
    return per * T


# --------------------------------------------------------------------------
# GA


def run_cdm_problem(problem: Problem, config: GAConfig, threads: int | None = None) -> CDMResult:
    return run_cdm(problem.aperture, problem.chi_word, config, threads=threads or default_threads())


def best_tiling(problem: Problem, word) -> Tiling:
    return decode(problem.aperture, word)
