"""Batched array primitives and the evaluation backends.

Candidates live in ``(B, N, D)`` cubes: B independent batches, N individuals,
D dimensions. Fitness is one value per individual, shape ``(B, N)``.

Objectives are callables mapping one length-D row to a float. An objective may
also expose ``evaluate_rows(rows) -> values`` for a 2-D block of rows; that
method must return, for every row, exactly the value the scalar call returns.
Backends rely on it only to amortize call overhead, so serial and data-parallel
runs stay bit-identical.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]


def batch_cube(data) -> np.ndarray:
    """Validate and freeze a ``(B, N, D)`` array of finite reals."""
    cube = np.array(data, dtype=np.float64)
    if cube.ndim != 3:
        raise ValueError(f"batch cube must be rank 3 (B, N, D), got shape {cube.shape}")
    if not np.all(np.isfinite(cube)):
        raise ValueError("batch cube entries must be finite")
    cube.flags.writeable = False
    return cube


def _eval_rows(objective: Objective, rows: np.ndarray) -> np.ndarray:
    if rows.shape[0] == 0:
        return np.empty(0)
    batch = getattr(objective, "evaluate_rows", None)
    if batch is not None:
        return np.asarray(batch(rows), dtype=np.float64)
    return np.array([objective(row) for row in rows], dtype=np.float64)


class EvalBackend:
    """Evaluates objectives over many candidates.

    ``serial`` walks the candidates group by group on the calling thread.
    ``data_parallel`` splits them into contiguous slices handed to a thread
    pool; objective kernels in this package release the GIL.
    """

    def __init__(self, kind: str = "serial", workers: int = 1):
        if kind not in ("serial", "data_parallel"):
            raise ValueError(f"unknown backend kind {kind!r}")
        if workers < 1:
            raise ValueError("workers must be positive")
        if kind == "serial" and workers != 1:
            raise ValueError("serial backend uses exactly one worker")
        self.kind = kind
        self.workers = int(workers)
        self.nan_count = 0
        self._pool: ThreadPoolExecutor | None = None
        self._lock = threading.Lock()

    @classmethod
    def serial(cls) -> "EvalBackend":
        return cls("serial", 1)

    @classmethod
    def data_parallel(cls, workers: int) -> "EvalBackend":
        return cls("data_parallel", workers)

    def __repr__(self) -> str:
        return f"EvalBackend(kind={self.kind!r}, workers={self.workers})"

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def _get_pool(self) -> ThreadPoolExecutor:
        with self._lock:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(max_workers=self.workers,
                                                thread_name_prefix="mgfwa-eval")
            return self._pool

    def evaluate(self, objective: Objective, rows: np.ndarray, group: int | None = None) -> np.ndarray:
        """Fitness of every row of a 2-D ``(R, D)`` block.

        ``group`` is the number of consecutive rows that belong to one firework;
        the serial backend evaluates one group at a time.
        """
        rows = np.ascontiguousarray(rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ValueError(f"rows must be 2-D, got shape {rows.shape}")
        n_rows = rows.shape[0]
        if self.kind == "serial":
            step = n_rows if not group else int(group)
            parts = [_eval_rows(objective, rows[i:i + step]) for i in range(0, n_rows, max(step, 1))]
        elif self.workers == 1 or n_rows <= 1:
            parts = [_eval_rows(objective, rows)]
        else:
            bounds = np.linspace(0, n_rows, min(self.workers, n_rows) + 1).astype(int)
            slices = [rows[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])]
            parts = list(self._get_pool().map(lambda s: _eval_rows(objective, s), slices))
        values = np.concatenate(parts) if parts else np.empty(0)
        bad = np.isnan(values)
        if bad.any():
            count = int(bad.sum())
            self.nan_count += count
            logger.debug("objective returned NaN for %d candidates; treating as +inf", count)
            values = np.where(bad, np.inf, values)
        return values


def batched_apply(objective: Objective, candidates, backend: EvalBackend | None = None,
                  group: int | None = None) -> np.ndarray:
    """Evaluate ``objective`` on every row of a candidate array.

    ``candidates`` has shape ``(..., D)``; the result has the leading shape,
    so a ``(B, N, D)`` cube yields ``(B, N)`` fitness. NaN results become
    ``+inf`` and are counted in ``backend.nan_count``.
    """
    backend = backend or EvalBackend.serial()
    arr = np.asarray(candidates, dtype=np.float64)
    lead = arr.shape[:-1]
    values = backend.evaluate(objective, arr.reshape(-1, arr.shape[-1]), group=group)
    return values.reshape(lead)


def argmin_per_population(fitness) -> tuple[np.ndarray, np.ndarray]:
    """Index and value of the best individual in each batch.

    Ties go to the lowest index; a batch that is all ``+inf`` yields index 0.
    """
    fit = np.asarray(fitness, dtype=np.float64)
    if fit.ndim != 2:
        raise ValueError(f"fitness must have shape (B, N), got {fit.shape}")
    idx = np.argmin(fit, axis=1)
    return idx, fit[np.arange(fit.shape[0]), idx]
