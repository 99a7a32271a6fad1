"""Batched multi-guiding spark fireworks algorithm.

All state carries a leading batch axis: B independent replicas of a
μ-firework population are advanced in lock step, and every operator works on
the full ``(B, N, ...)`` arrays at once. Per iteration:

    explode -> map sparks -> evaluate sparks -> guiding vector
    -> guiding sparks -> map guides -> evaluate guides
    -> select -> amplitude update -> loser-out

Randomness comes only from the counter-based source in :mod:`mgfwa.rng`, so
a run is a pure function of ``(config, space, objective, seed)`` whenever the
budget is counted in evaluations. Batches never exchange information.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import EvalBackend, Objective, argmin_per_population
from .rng import Stream, uniform_block


@dataclass(frozen=True)
class SearchSpace:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=np.float64).reshape(-1)
        hi = np.array(self.upper, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError("lower and upper must be non-empty and of equal length")
        if not np.all(lo < hi):
            raise ValueError("search space needs lower < upper in every dimension")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("search space bounds must be finite")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def box(cls, dim: int, lo: float, hi: float) -> "SearchSpace":
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def range(self) -> float:
        """Widest side of the box."""
        return float(np.max(self.upper - self.lower))

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all((x >= self.lower) & (x <= self.upper)))


@dataclass(frozen=True)
class MgfwaConfig:
    """Algorithm parameters and budget.

    ``boosts`` scales the guiding vector once per guiding spark, so its length
    sets the number of guiding sparks M; ``boosts=()`` disables guiding.
    ``initial_amplitude=None`` means half the widest side of the search box.
    At least one of ``max_evaluations`` and ``wall_clock_ms`` must be set.
    """

    batches: int = 8
    fireworks: int = 5
    sparks: int = 30
    boosts: tuple[float, ...] = (1.0, 2.0, 4.0)
    sigma: float = 0.2
    amp_amplify: float = 1.2
    amp_reduce: float = 0.9
    initial_amplitude: float | None = None
    max_evaluations: int | None = None
    wall_clock_ms: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "boosts", tuple(float(b) for b in self.boosts))
        if min(self.batches, self.fireworks, self.sparks) < 1:
            raise ValueError("batches, fireworks and sparks must be positive")
        if not 0.0 < self.sigma <= 0.5:
            raise ValueError("sigma must lie in (0, 0.5]")
        if self.sparks < 2 * self.top_count:
            raise ValueError(
                f"sparks={self.sparks} is too few for two disjoint sets of {self.top_count}")
        if any(b <= 0 for b in self.boosts):
            raise ValueError("boost coefficients must be positive")
        if self.boosts and self.boosts[0] != 1.0:
            raise ValueError("the first boost coefficient must be 1")
        if not self.amp_amplify > 1.0:
            raise ValueError("amp_amplify must exceed 1")
        if not 0.0 < self.amp_reduce < 1.0:
            raise ValueError("amp_reduce must lie in (0, 1)")
        if self.initial_amplitude is not None and not self.initial_amplitude > 0:
            raise ValueError("initial_amplitude must be positive")
        if self.max_evaluations is None and self.wall_clock_ms is None:
            raise ValueError("set max_evaluations and/or wall_clock_ms")
        if self.max_evaluations is not None and self.max_evaluations < 1:
            raise ValueError("max_evaluations must be positive")
        if self.wall_clock_ms is not None and not self.wall_clock_ms > 0:
            raise ValueError("wall_clock_ms must be positive")

    @property
    def guides(self) -> int:
        return len(self.boosts)

    @property
    def top_count(self) -> int:
        return max(1, math.ceil(self.sigma * self.sparks - 1e-9))

    @property
    def wave_size(self) -> int:
        """Candidate evaluations per iteration, loser restarts excluded."""
        return self.batches * self.fireworks * (self.sparks + self.guides)

    def amplitude0(self, space: SearchSpace) -> float:
        if self.initial_amplitude is not None:
            return float(self.initial_amplitude)
        return 0.5 * space.range

    def to_dict(self) -> dict:
        d = asdict(self)
        d["boosts"] = list(self.boosts)
        return d


@dataclass
class FireworkState:
    positions: np.ndarray          # (B, N, D)
    fitness: np.ndarray            # (B, N)
    amplitudes: np.ndarray         # (B, N)
    last_improvement: np.ndarray   # (B, N)
    batch_evaluations: np.ndarray  # (B,) evaluations spent by each batch

    @property
    def evaluations_used(self) -> int:
        return int(self.batch_evaluations.sum())


@dataclass
class RunRecord:
    """Best-so-far traces, one sample per evaluation wave.

    ``evals[t, b]`` counts evaluations spent by batch ``b`` alone; all batches
    share the wall-clock stamp ``wall_ms[t]``.
    """

    evals: np.ndarray
    wall_ms: np.ndarray
    best_fitness: np.ndarray
    best_positions: np.ndarray
    final_fitness: np.ndarray
    config: dict
    seed: int
    iterations: int
    nan_count: int = 0
    restarts: int = 0

    @property
    def batches(self) -> int:
        return self.best_fitness.shape[1]

    @property
    def total_evaluations(self) -> int:
        return int(self.evals[-1].sum())

    def batch_trace(self, b: int) -> list[tuple[int, float, float]]:
        return [(int(e), float(w), float(f))
                for e, w, f in zip(self.evals[:, b], self.wall_ms, self.best_fitness[:, b])]


def _evaluate(objective: Objective, backend: EvalBackend, cand: np.ndarray) -> np.ndarray:
    B, N, K, D = cand.shape
    return backend.evaluate(objective, cand.reshape(-1, D), group=K).reshape(B, N, K)


def initialize(config: MgfwaConfig, space: SearchSpace, seed: int, objective: Objective,
               backend: EvalBackend) -> FireworkState:
    B, N, D = config.batches, config.fireworks, space.dim
    u = uniform_block(seed, Stream.INIT, 0, (B, N, 1, D))[:, :, 0, :]
    pos = _in_box(space.lower + u * (space.upper - space.lower), space.lower, space.upper)
    fit = _evaluate(objective, backend, pos[:, :, None, :])[:, :, 0]
    return FireworkState(
        positions=pos,
        fitness=fit,
        amplitudes=np.full((B, N), config.amplitude0(space)),
        last_improvement=np.zeros((B, N)),
        batch_evaluations=np.full(B, N, dtype=np.int64),
    )


def _in_box(x, lo, hi):
    return np.minimum(np.maximum(x, lo), hi)


def explode(state: FireworkState, config: MgfwaConfig, iteration: int, space: SearchSpace,
            seed: int) -> np.ndarray:
    """``sparks`` uniform offsets per firework inside its amplitude box; may leave the space."""
    B, N, D = state.positions.shape
    u = uniform_block(seed, Stream.EXPLODE, iteration, (B, N, config.sparks, D))
    offsets = (2.0 * u - 1.0) * state.amplitudes[:, :, None, None]
    return state.positions[:, :, None, :] + offsets


def random_mapping(candidates: np.ndarray, state: FireworkState, space: SearchSpace,
                   iteration: int, seed: int, k_offset: int = 0) -> np.ndarray:
    """Resample out-of-bounds coordinates inside the population's current span.

    A coordinate ``(b, n, k, d)`` outside ``[lower[d], upper[d]]`` is replaced
    by a uniform draw between the smallest and largest firework coordinate of
    batch ``b`` along ``d``. ``k_offset`` shifts the candidate index used in the
    random key, so sparks and guides of one iteration draw different numbers.
    """
    B, N, K, D = candidates.shape
    out = (candidates < space.lower) | (candidates > space.upper)
    if not out.any():
        return candidates.copy()
    pop_min = state.positions.min(axis=1)[:, None, None, :]
    pop_max = state.positions.max(axis=1)[:, None, None, :]
    u = uniform_block(seed, Stream.MAPPING, iteration, (B, N, K, D), k_offset=k_offset)
    fresh = np.minimum(pop_min + u * (pop_max - pop_min), pop_max)
    return np.where(out, fresh, candidates)


def guiding_vector(spark_positions: np.ndarray, spark_fitness: np.ndarray,
                   config: MgfwaConfig) -> np.ndarray:
    """Mean of the best ``top_count`` sparks minus mean of the worst ``top_count``."""
    t = config.top_count
    if spark_positions.shape[2] < 2 * t:
        raise ValueError(f"need at least {2 * t} sparks for top_count={t}")
    order = np.argsort(spark_fitness, axis=2, kind="stable")
    top = np.take_along_axis(spark_positions, order[:, :, :t, None], axis=2)
    bottom = np.take_along_axis(spark_positions, order[:, :, -t:, None], axis=2)
    return top.mean(axis=2) - bottom.mean(axis=2)


def multi_guiding_sparks(state: FireworkState, delta: np.ndarray, config: MgfwaConfig) -> np.ndarray:
    boosts = np.asarray(config.boosts, dtype=np.float64)
    return state.positions[:, :, None, :] + boosts[None, None, :, None] * delta[:, :, None, :]


def select_best(state: FireworkState, spark_positions: np.ndarray, spark_fitness: np.ndarray,
                guide_positions: np.ndarray, guide_fitness: np.ndarray
                ) -> tuple[FireworkState, np.ndarray]:
    """Per firework, keep the best of itself, its sparks and its guides.

    Ties resolve to the firework, then sparks by index, then guides by index.
    Returns the new state and the boolean ``improved`` mask.
    """
    B, N, D = state.positions.shape
    pos = np.concatenate([state.positions[:, :, None, :], spark_positions, guide_positions], axis=2)
    fit = np.concatenate([state.fitness[:, :, None], spark_fitness, guide_fitness], axis=2)
    idx = np.argmin(fit, axis=2)
    new_fit = np.take_along_axis(fit, idx[:, :, None], axis=2)[:, :, 0]
    new_pos = np.take_along_axis(pos, idx[:, :, None, None], axis=2)[:, :, 0, :]
    improved = new_fit < state.fitness
    gain = np.where(improved, state.fitness - new_fit, 0.0)
    new_state = replace(state, positions=new_pos, fitness=new_fit, last_improvement=gain)
    return new_state, improved


def update_amplitudes(amplitudes: np.ndarray, improved: np.ndarray, config: MgfwaConfig,
                      space: SearchSpace) -> np.ndarray:
    """Amplify on success, reduce on failure, clamp to ``[1e-12 * range, range]``."""
    r = space.range
    scaled = np.where(improved, config.amp_amplify * amplitudes, config.amp_reduce * amplitudes)
    return np.clip(scaled, 1e-12 * r, r)


def loser_out(state: FireworkState, config: MgfwaConfig, evaluations_remaining, space: SearchSpace,
              objective: Objective, backend: EvalBackend, seed: int, iteration: int
              ) -> tuple[FireworkState, np.ndarray]:
    """Restart fireworks that cannot reach their batch's best in the remaining budget.

    The horizon is ``evaluations_remaining / (B * μ * (λ + M))`` iterations;
    ``evaluations_remaining`` may be a scalar or one value per batch. A
    firework loses when ``fitness - last_improvement * horizon`` still exceeds
    the batch best. The batch leader is never restarted. Losers are redrawn
    uniformly in the space, evaluated, and get a fresh amplitude.
    """
    B, N, D = state.positions.shape
    per_iter = B * N * (config.sparks + config.guides)
    horizon = np.broadcast_to(np.asarray(evaluations_remaining, dtype=np.float64) / per_iter, (B,))
    leader, best = argmin_per_population(state.fitness)
    with np.errstate(invalid="ignore"):
        projected = state.fitness - state.last_improvement * horizon[:, None]
        losers = projected > best[:, None]
    losers[np.arange(B), leader] = False
    if not losers.any():
        return state, losers
    u = uniform_block(seed, Stream.REINIT, iteration, (B, N, 1, D))[:, :, 0, :]
    fresh = _in_box(space.lower + u * (space.upper - space.lower), space.lower, space.upper)
    bi, ni = np.nonzero(losers)
    fresh_fit = backend.evaluate(objective, fresh[bi, ni], group=1)
    pos = state.positions.copy()
    fit = state.fitness.copy()
    amp = state.amplitudes.copy()
    gain = state.last_improvement.copy()
    pos[bi, ni] = fresh[bi, ni]
    fit[bi, ni] = fresh_fit
    amp[bi, ni] = config.amplitude0(space)
    gain[bi, ni] = 0.0
    used = state.batch_evaluations + losers.sum(axis=1)
    return FireworkState(pos, fit, amp, gain, used), losers


def _iterate(state: FireworkState, config: MgfwaConfig, space: SearchSpace, objective: Objective,
             backend: EvalBackend, seed: int, t: int) -> FireworkState:
    B, N, _ = state.positions.shape
    sparks = explode(state, config, t, space, seed)
    sparks = random_mapping(sparks, state, space, t, seed)
    spark_fit = _evaluate(objective, backend, sparks)
    if config.guides:
        delta = guiding_vector(sparks, spark_fit, config)
        guides = multi_guiding_sparks(state, delta, config)
        guides = random_mapping(guides, state, space, t, seed, k_offset=config.sparks)
        guide_fit = _evaluate(objective, backend, guides)
    else:
        guides = np.empty((B, N, 0, space.dim))
        guide_fit = np.empty((B, N, 0))
    new_state, improved = select_best(state, sparks, spark_fit, guides, guide_fit)
    new_state.amplitudes = update_amplitudes(state.amplitudes, improved, config, space)
    new_state.batch_evaluations = state.batch_evaluations + N * (config.sparks + config.guides)
    return new_state


def run(config: MgfwaConfig, space: SearchSpace, objective: Objective,
        backend: EvalBackend | None = None, seed: int = 0) -> RunRecord:
    """Optimize ``objective`` over ``space`` until the budget is spent.

    With an evaluation budget the loser-out horizon of batch ``b`` is computed
    as if every batch had spent what ``b`` spent, which keeps batches
    independent: batch ``b`` of a B-batch run with budget ``B * E`` follows
    the same path as a one-batch run with budget ``E`` and the same seed.
    With only a wall-clock budget the horizon comes from the mean iteration
    time, so the path depends on timing.
    """
    backend = backend or EvalBackend.serial()
    B, N = config.batches, config.fireworks
    if config.max_evaluations is not None and config.max_evaluations < B * N:
        raise ValueError(f"budget too small: initialization needs {B * N} evaluations, "
                         f"max_evaluations={config.max_evaluations}")
    nan_before = backend.nan_count
    budget_ms = config.wall_clock_ms
    start = time.perf_counter()

    def elapsed_ms() -> float:
        return (time.perf_counter() - start) * 1e3

    state = initialize(config, space, seed, objective, backend)
    leader, best_fit = argmin_per_population(state.fitness)
    best_pos = state.positions[np.arange(B), leader].copy()
    evals_hist = [state.batch_evaluations.copy()]
    wall_hist = [elapsed_ms()]
    best_hist = [best_fit.copy()]
    t = 0
    restarts = 0
    init_ms = wall_hist[0]

    def exhausted(now_ms: float) -> bool:
        if config.max_evaluations is not None and state.evaluations_used >= config.max_evaluations:
            return True
        return budget_ms is not None and now_ms >= budget_ms

    while not exhausted(wall_hist[-1]):
        t += 1
        state = _iterate(state, config, space, objective, backend, seed, t)
        if config.max_evaluations is not None:
            remaining = config.max_evaluations - B * state.batch_evaluations
            if state.evaluations_used < config.max_evaluations:
                state, losers = loser_out(state, config, remaining, space, objective,
                                          backend, seed, t)
                restarts += int(losers.sum())
        else:
            now = elapsed_ms()
            per_iter = max((now - init_ms) / t, 1e-9)
            iters_left = max(budget_ms - now, 0.0) / per_iter
            if iters_left > 0:
                state, losers = loser_out(state, config, iters_left * config.wave_size, space,
                                          objective, backend, seed, t)
                restarts += int(losers.sum())
        leader, cur = argmin_per_population(state.fitness)
        better = cur < best_fit
        best_fit = np.where(better, cur, best_fit)
        best_pos[better] = state.positions[np.arange(B), leader][better]
        evals_hist.append(state.batch_evaluations.copy())
        wall_hist.append(elapsed_ms())
        best_hist.append(best_fit.copy())

    return RunRecord(
        evals=np.array(evals_hist),
        wall_ms=np.array(wall_hist),
        best_fitness=np.array(best_hist),
        best_positions=best_pos,
        final_fitness=best_fit.copy(),
        config=config.to_dict(),
        seed=seed,
        iterations=t,
        nan_count=backend.nan_count - nan_before,
        restarts=restarts,
    )
