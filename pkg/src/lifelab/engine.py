"""Batched toroidal simulation of Life-like cellular automata.

Grids are plain numpy arrays of shape (n, 1, h, w) with values in {0, 1};
index order is (batch, channel, row, col).  Edges wrap: the top row
neighbors the bottom row and the left column the right.
"""
from __future__ import annotations

import time

import numpy as np

from . import _accel
from .rules import RuleSet


def backend() -> str:
    """Name of the active update kernel: 'numba' or 'numpy'."""
    return _accel.BACKEND


def make_grid(n: int, h: int, w: int) -> np.ndarray:
    """All-dead grid batch."""
    if n < 1 or h < 3 or w < 3:
        raise ValueError(f"grid batch needs n>=1, h>=3, w>=3; got {(n, h, w)}")
    return np.zeros((n, 1, h, w), np.uint8)


def validate_grid(cells: np.ndarray) -> np.ndarray:
    """Check shape and binary values; returns the array unchanged."""
    if cells.ndim != 4 or cells.shape[1] != 1:
        raise ValueError(f"grid batch must have shape (n,1,h,w), got {cells.shape}")
    n, _, h, w = cells.shape
    if n < 1 or h < 3 or w < 3:
        raise ValueError(f"grid batch needs n>=1, h>=3, w>=3; got {cells.shape}")
    if cells.dtype != np.uint8:
        raise ValueError(f"grid batch must be uint8, got {cells.dtype}")
    if cells.max(initial=0) > 1:
        raise ValueError("grid cells must be 0 or 1")
    return cells


def moore_sums(cells: np.ndarray) -> np.ndarray:
    """Sum of the 8 toroidal neighbors of every cell (self excluded)."""
    out = np.zeros(cells.shape, np.uint8)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            out += np.roll(cells, (dr, dc), axis=(2, 3))
    return out


def step(cells: np.ndarray, rule: RuleSet, steps: int = 1) -> np.ndarray:
    """Apply `steps` synchronous rule updates; returns a new array.

    A dead cell turns alive when its neighbor sum is in the birth set; a
    live cell stays alive when its sum is in the survival set; everything
    else dies.  All cells read the pre-update state.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if _accel.HAVE_NUMBA:
        return _accel.step_numba(cells, rule.birth, rule.survival, steps)
    lut = _accel.rule_tables(rule.birth, rule.survival)
    return _accel.step_numpy(cells, lut, steps)


def benchmark(h: int, w: int, rule: RuleSet, duration: float,
              batch: int = 1, seed: int = 0) -> dict:
    """Measure sustained updates/sec on random soup of the given size.

    Updates are counted per grid instance; cell_updates_per_second is
    updates_per_second * h * w.  `duration` is a soft wall-clock budget.
    """
    if duration <= 0:
        raise ValueError("duration must be > 0")
    rng = np.random.default_rng(seed)
    cells = (rng.random((batch, 1, h, w)) < 0.375).astype(np.uint8)
    # Warm the jit cache outside the timed section.
    cells = step(cells, rule, 1)
    chunk = 16
    total = 0
    start = time.perf_counter()
    while True:
        cells = step(cells, rule, chunk)
        total += chunk * batch
        elapsed = time.perf_counter() - start
        if elapsed >= duration:
            break
        # Aim chunks at ~1/50 of the budget so the loop overhead stays low
        # without badly overshooting the duration.
        rate = total / elapsed
        chunk = max(1, min(int(rate * duration / 50) or 1, 4096))
    ups = total / elapsed
    return {
        "updates_per_second": ups,
        "cell_updates_per_second": ups * h * w,
        "updates": total,
        "elapsed": elapsed,
        "backend": backend(),
    }
