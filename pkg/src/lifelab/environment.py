"""RL-style interface around the engine: toggle actions, observations,
the all-toggle reset, and episode bookkeeping.

Calling convention is gym-flavored::

    observation, reward, done, info = env.step(action)

The base environment always returns a reward of 0.0 per instance; reward
wrappers are the only reward source.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine
from .errors import ShapeMismatch
from .rules import RuleSet, parse_rule_string


@dataclass
class EnvConfig:
    """Observation/action geometry, rule, batching, and episode length.

    The action region is axis-aligned and centered in the observation
    grid; `episode_steps` of 0 means an unbounded episode.
    """

    obs_h: int = 128
    obs_w: int = 128
    act_h: int = 64
    act_w: int = 64
    rule: RuleSet = field(default_factory=lambda: parse_rule_string("B3/S23"))
    batch_n: int = 1
    episode_steps: int = 0

    def __post_init__(self):
        if self.obs_h < 3 or self.obs_w < 3:
            raise ValueError("observation grid must be at least 3x3")
        if not (1 <= self.act_h <= self.obs_h and 1 <= self.act_w <= self.obs_w):
            raise ValueError("action region must fit inside the observation grid")
        if self.batch_n < 1:
            raise ValueError("batch_n must be >= 1")
        if self.episode_steps < 0:
            raise ValueError("episode_steps must be >= 0")

    @property
    def act_offset(self) -> tuple[int, int]:
        """Top-left (row, col) of the centered action region."""
        return (self.obs_h - self.act_h) // 2, (self.obs_w - self.act_w) // 2


class ToggleEnv:
    """Life-like CA universe driven by cell-toggle actions.

    Each step XORs the action mask into the centered action region and
    applies one rule update.  An all-ones mask instead clears that
    instance (no rule update that tick) and flags the reset in info.
    """

    def __init__(self, config: EnvConfig | None = None):
        self.config = config or EnvConfig()
        self._cells = engine.make_grid(
            self.config.batch_n, self.config.obs_h, self.config.obs_w)
        self._step_count = 0

    def reset(self) -> np.ndarray:
        """Clear all cells and the step counter; returns the observation."""
        self._cells[:] = 0
        self._step_count = 0
        return self.observe()

    def observe(self) -> np.ndarray:
        """Copy of the current (n, 1, h, w) cell grid."""
        return self._cells.copy()

    def step(self, action: np.ndarray):
        """Toggle, update, and report.

        Returns (observation, reward, done, info); reward is 0.0 per
        instance, info carries the step index, per-instance live-cell
        counts, and per-instance reset flags.
        """
        cfg = self.config
        action = np.asarray(action)
        expected = (cfg.batch_n, 1, cfg.act_h, cfg.act_w)
        if action.shape != expected:
            raise ShapeMismatch(
                f"action shape {action.shape} != expected {expected}")
        mask = action.astype(np.uint8)
        if mask.max(initial=0) > 1:
            raise ValueError("action mask entries must be 0 or 1")

        resets = mask.reshape(cfg.batch_n, -1).all(axis=1)
        r0, c0 = cfg.act_offset
        live = ~resets
        if live.any():
            region = self._cells[:, :, r0:r0 + cfg.act_h, c0:c0 + cfg.act_w]
            region[live] ^= mask[live]
            stepped = engine.step(self._cells[live], cfg.rule)
            self._cells[live] = stepped
        if resets.any():
            self._cells[resets] = 0

        self._step_count += 1
        done_flag = cfg.episode_steps > 0 and self._step_count >= cfg.episode_steps
        obs = self.observe()
        info = {
            "step": self._step_count,
            "live_counts": obs.reshape(cfg.batch_n, -1).sum(axis=1).astype(np.int64),
            "reset_flags": resets.copy(),
        }
        reward = np.zeros(cfg.batch_n, np.float64)
        done = np.full(cfg.batch_n, done_flag)
        return obs, reward, done, info
