"""Reward wrappers that interpose on environment steps and synthesize the
scalar rewards the base environment never provides.

Wrappers nest gym-style; each adds ``weight * bonus`` to the reward
passing through and records its weighted bonus in ``info['bonuses']`` so
traces and chain-linearity checks need no recomputation.
"""
from __future__ import annotations

import copy

import numpy as np

from . import nn


class RewardWrapper:
    """Base wrapper: delegates to the wrapped env, adds a weighted bonus."""

    name = "base"

    def __init__(self, env, weight: float = 1.0):
        self.env = env
        self.weight = float(weight)

    @property
    def config(self):
        return self.env.config

    def reset(self):
        obs = self.env.reset()
        self._reset_state(obs)
        return obs

    def step(self, action):
        obs, reward, done, info = self.env.step(action)
        bonus = self.weight * self._score(obs, info)
        info.setdefault("bonuses", {})[self.name] = bonus
        return obs, reward + bonus, done, info

    def _reset_state(self, obs):
        pass

    def _score(self, obs, info) -> np.ndarray:
        raise NotImplementedError

    def wrappers(self):
        """Innermost-first list of wrappers in this chain."""
        inner = self.env.wrappers() if isinstance(self.env, RewardWrapper) else []
        return inner + [self]


class SpeedReward(RewardWrapper):
    """Distance the live-cell center of mass moved since the last step.

    Coordinates are centered (grid center = (0,0)).  In 'map_zero' mode
    every live cell inside the action region contributes its mass at
    (0,0); in 'ignore' mode those cells are excluded entirely.  An empty
    grid has center (0,0) by convention, so clearing a populated board
    scores one spike equal to the previous center's norm.
    """

    name = "speed"

    def __init__(self, env, weight: float = 1.0, mode: str = "map_zero"):
        super().__init__(env, weight)
        if mode not in ("map_zero", "ignore"):
            raise ValueError("mode must be 'map_zero' or 'ignore'")
        self.mode = mode
        cfg = self.config
        rr = np.arange(cfg.obs_h) - (cfg.obs_h - 1) / 2.0
        cc = np.arange(cfg.obs_w) - (cfg.obs_w - 1) / 2.0
        self._row_coord = np.broadcast_to(rr[:, None], (cfg.obs_h, cfg.obs_w)).copy()
        self._col_coord = np.broadcast_to(cc[None, :], (cfg.obs_h, cfg.obs_w)).copy()
        r0, c0 = cfg.act_offset
        inside = np.zeros((cfg.obs_h, cfg.obs_w), bool)
        inside[r0:r0 + cfg.act_h, c0:c0 + cfg.act_w] = True
        self._inside = inside
        self._prev = np.zeros((cfg.batch_n, 2))

    def centers(self, obs) -> np.ndarray:
        """Per-instance (row, col) center of mass under the configured mode."""
        grid = obs[:, 0].astype(np.float64)
        if self.mode == "ignore":
            grid = grid * ~self._inside
            row = self._row_coord
            col = self._col_coord
        else:
            row = np.where(self._inside, 0.0, self._row_coord)
            col = np.where(self._inside, 0.0, self._col_coord)
        mass = grid.sum(axis=(1, 2))
        out = np.zeros((obs.shape[0], 2))
        nz = mass > 0
        if nz.any():
            out[nz, 0] = (grid * row).sum(axis=(1, 2))[nz] / mass[nz]
            out[nz, 1] = (grid * col).sum(axis=(1, 2))[nz] / mass[nz]
        return out

    def _reset_state(self, obs):
        self._prev = self.centers(obs)

    def _score(self, obs, info):
        center = self.centers(obs)
        reward = np.linalg.norm(center - self._prev, axis=1)
        self._prev = center
        return reward


class CornerReward(RewardWrapper):
    """+1 per live cell in the top-left corner square and in the diagonal
    band from the action-region corner to the grid corner; -1 per live
    cell in the top-right and bottom-right corner squares.

    Corner squares are (obs_h/8) x (obs_w/8); the band is every cell
    within Chebyshev distance `band_halfwidth` of the segment joining the
    action region's top-left corner to the grid's top-left corner,
    excluding cells already inside a corner square.
    """

    name = "corner"

    def __init__(self, env, weight: float = 1.0, band_halfwidth: int = 2):
        super().__init__(env, weight)
        cfg = self.config
        h, w = cfg.obs_h, cfg.obs_w
        sq_h, sq_w = max(1, h // 8), max(1, w // 8)
        rows = np.arange(h)[:, None]
        cols = np.arange(w)[None, :]
        top_left = (rows < sq_h) & (cols < sq_w)
        top_right = (rows < sq_h) & (cols >= w - sq_w)
        bottom_right = (rows >= h - sq_h) & (cols >= w - sq_w)

        r0, c0 = cfg.act_offset
        ts = np.linspace(0.0, 1.0, 513)
        seg_r = ts * r0
        seg_c = ts * c0
        cheb = np.maximum(
            np.abs(rows[:, :, None] - seg_r[None, None, :]),
            np.abs(cols[:, :, None] - seg_c[None, None, :]),
        ).min(axis=2)
        band = (cheb <= band_halfwidth) & ~top_left & ~top_right & ~bottom_right

        self._weights = (top_left.astype(np.float64) + band
                         - top_right - bottom_right)

    def _score(self, obs, info):
        return (obs[:, 0] * self._weights).sum(axis=(1, 2))


def _rnd_specs(obs_h: int, obs_w: int, channels=(8, 16, 16), pool: int = 4,
               embed_dim: int = 16):
    specs = []
    prev = 1
    for ch in channels:
        specs.append(f"conv2d in={prev} out={ch} kernel=3 padding=toroidal")
        specs.append("relu")
        prev = ch
    specs.append(f"avgpool factor={pool}")
    specs.append("flatten")
    flat = prev * (obs_h // pool) * (obs_w // pool)
    specs.append(f"dense in={flat} out={embed_dim}")
    return specs


def _ae_specs(channels=(8, 4)):
    specs = []
    prev = 1
    for ch in channels:
        specs.append(f"conv2d in={prev} out={ch} kernel=3 padding=toroidal")
        specs.append("relu")
        prev = ch
    specs.append(f"conv2d in={prev} out=1 kernel=3 padding=toroidal")
    specs.append("sigmoid")
    return specs


class _LearnedBonus(RewardWrapper):
    """Shared machinery for online-learned novelty bonuses.

    Batched instances keep independent model copies (identical at init)
    unless `shared` is set, so candidate fitnesses stay comparable.
    """

    def __init__(self, env, weight: float, lr: float, seed: int, shared: bool):
        super().__init__(env, weight)
        if lr <= 0:
            raise ValueError("lr must be > 0")
        self.lr = lr
        self.seed = seed
        self.shared = shared

    def _replicas(self, prototype):
        n = 1 if self.shared else self.config.batch_n
        return [copy.deepcopy(prototype) for _ in range(n)]


class RndReward(_LearnedBonus):
    """Random-network-distillation bonus: a trainable predictor's error at
    matching a frozen random network's embedding of the observation.

    Both networks share a conv trunk topology with a fully connected
    final layer, so the bonus is *not* translation-equivariant: patterns
    re-entering across the toroidal seam look novel again.
    """

    name = "rnd"

    def __init__(self, env, weight: float = 1.0, lr: float = 0.1,
                 seed: int = 0, embed_dim: int = 16, channels=(8, 16, 16),
                 pool: int = 4, shared: bool = False):
        super().__init__(env, weight, lr, seed, shared)
        cfg = self.config
        if cfg.obs_h % pool or cfg.obs_w % pool:
            raise ValueError(f"observation dims must divide by pool={pool}")
        specs = _rnd_specs(cfg.obs_h, cfg.obs_w, channels, pool, embed_dim)
        self.targets = self._replicas(nn.build(specs, seed=seed))
        self.predictors = self._replicas(nn.build(specs, seed=seed + 1))

    def _score(self, obs, info):
        x = obs.astype(np.float64)
        n = obs.shape[0]
        reward = np.zeros(n)
        if self.shared:
            embed = self.targets[0].forward(x)
            pred = self.predictors[0].forward(x)
            reward = np.mean((pred - embed) ** 2, axis=1)
            nn.sgd_step(self.predictors[0], x, embed, self.lr)
        else:
            for i in range(n):
                xi = x[i:i + 1]
                embed = self.targets[i].forward(xi)
                reward[i] = nn.sgd_step(self.predictors[i], xi, embed, self.lr)
        return reward


class AutoencoderReward(_LearnedBonus):
    """Reconstruction-error bonus from a fully convolutional autoencoder.

    No dense layers and no pooling anywhere, so with toroidal padding the
    bonus for a pattern is identical wherever it sits on the grid.
    """

    name = "autoencoder"

    def __init__(self, env, weight: float = 1.0, lr: float = 0.5,
                 seed: int = 0, channels=(8, 4), shared: bool = False):
        super().__init__(env, weight, lr, seed, shared)
        self.models = self._replicas(nn.build(_ae_specs(channels), seed=seed))

    def _score(self, obs, info):
        x = obs.astype(np.float64)
        n = obs.shape[0]
        if self.shared:
            y = self.models[0].forward(x)
            reward = np.mean((y - x) ** 2, axis=(1, 2, 3))
            nn.sgd_step(self.models[0], x, x, self.lr)
            return reward
        reward = np.zeros(n)
        for i in range(n):
            xi = x[i:i + 1]
            reward[i] = nn.sgd_step(self.models[i], xi, xi, self.lr)
        return reward


WRAPPERS = {
    "speed": SpeedReward,
    "corner": CornerReward,
    "rnd": RndReward,
    "autoencoder": AutoencoderReward,
}


_INT_KEYS = {"seed", "embed_dim", "pool", "band_halfwidth"}
_FLOAT_KEYS = {"lr"}
_BOOL_KEYS = {"shared"}


def _parse_item(item: str):
    """``name[:weight][(key=value;...)]`` -> (name, weight, kwargs)."""
    params = {}
    if "(" in item:
        head, _, rest = item.partition("(")
        body = rest.rstrip()
        if not body.endswith(")"):
            raise ValueError(f"unbalanced parens in wrapper spec {item!r}")
        for pair in body[:-1].split(";"):
            if not pair.strip():
                continue
            key, _, value = pair.partition("=")
            key = key.strip()
            value = value.strip()
            if key in _INT_KEYS:
                params[key] = int(value)
            elif key in _FLOAT_KEYS:
                params[key] = float(value)
            elif key in _BOOL_KEYS:
                params[key] = value.lower() in ("1", "true", "yes")
            elif key == "channels":
                params[key] = tuple(int(c) for c in value.split("-"))
            elif key == "mode":
                params[key] = value
            else:
                raise ValueError(f"unknown wrapper parameter {key!r}")
        item = head
    name, _, wtext = item.partition(":")
    weight = float(wtext) if wtext.strip() else 1.0
    return name.strip(), weight, params


def build_chain(env, spec: str, seed: int = 0):
    """Wrap `env` per a chain spec like ``"speed:1.0,rnd:0.5(lr=0.1;pool=8)"``.

    Items are comma-separated ``name[:weight]`` with optional
    semicolon-separated hyperparameters in parentheses.  Learned wrappers
    get deterministic seeds derived from `seed` and their position unless
    the item names its own.  An empty spec returns the env unchanged.
    """
    chain = env
    spec = spec.strip()
    if not spec:
        return chain
    for i, item in enumerate(part.strip() for part in spec.split(",")):
        if not item:
            continue
        name, weight, params = _parse_item(item)
        if name not in WRAPPERS:
            raise ValueError(f"unknown reward wrapper {name!r}")
        cls = WRAPPERS[name]
        if issubclass(cls, _LearnedBonus):
            params.setdefault("seed", seed + 1000 * i)
        chain = cls(chain, weight=weight, **params)
    return chain
