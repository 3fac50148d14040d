"""Evolvable policy families emitting toggle actions.

* TogglePolicy      -- a static pattern, fired once at the first step of
                       an episode; one real logit per action cell.
* NeuralCAPolicy    -- a continuous-valued neural cellular automaton over
                       a hidden channel grid at action-space resolution.
* HebbianCAPolicy   -- the same CA whose kernel weights self-modify each
                       step by evolved per-weight Hebbian coefficients.

All policies expose a flat real genome (get_params/set_params) for the
evolution-strategy optimizer, and are deterministic given (params,
observation history since reset).
"""
from __future__ import annotations

import numpy as np

from . import nn
from .environment import EnvConfig
from .errors import LengthMismatch, ShapeMismatch


class Agent:
    """Common surface: act / reset_policy / get_params / set_params."""

    family = "base"

    def __init__(self, config: EnvConfig):
        self.config = config

    def act(self, obs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def reset_policy(self) -> None:
        raise NotImplementedError

    def num_params(self) -> int:
        raise NotImplementedError

    def get_params(self) -> np.ndarray:
        raise NotImplementedError

    def set_params(self, params: np.ndarray) -> None:
        raise NotImplementedError

    def _check_obs(self, obs):
        cfg = self.config
        expected = (cfg.batch_n, 1, cfg.obs_h, cfg.obs_w)
        if obs.shape != expected:
            raise ShapeMismatch(f"observation {obs.shape} != expected {expected}")

    def _take_params(self, params) -> np.ndarray:
        params = np.asarray(params, np.float64)
        if params.shape != (self.num_params(),):
            raise LengthMismatch(
                f"{self.family} expects {self.num_params()} params, "
                f"got shape {params.shape}")
        return params.copy()

    def manifest(self) -> dict:
        return {"family": self.family,
                "act_h": self.config.act_h, "act_w": self.config.act_w}


class TogglePolicy(Agent):
    """One logit per action cell; cells with positive logits are toggled
    at the first step after a reset, and never again that episode."""

    family = "toggle"

    def __init__(self, config: EnvConfig, seed: int = 0):
        super().__init__(config)
        rng = np.random.default_rng(seed)
        self.logits = rng.normal(0.0, 0.1, config.act_h * config.act_w)
        self._fired = False

    def num_params(self):
        return self.config.act_h * self.config.act_w

    def act(self, obs):
        self._check_obs(obs)
        cfg = self.config
        mask = np.zeros((cfg.batch_n, 1, cfg.act_h, cfg.act_w), np.uint8)
        if not self._fired:
            pattern = (self.logits > 0).reshape(cfg.act_h, cfg.act_w)
            mask[:, 0] = pattern
            self._fired = True
        return mask

    def pattern(self) -> np.ndarray:
        """The (act_h, act_w) toggle mask this genome encodes."""
        return (self.logits > 0).reshape(
            self.config.act_h, self.config.act_w).astype(np.uint8)

    def reset_policy(self):
        self._fired = False

    def get_params(self):
        return self.logits.copy()

    def set_params(self, params):
        self.logits = self._take_params(params)
        self._fired = False


class NeuralCAPolicy(Agent):
    """Continuous neural CA over `hidden` channels at action resolution.

    Each env step: the central action-sized observation window enters
    through a 3x3 toroidal conv; `iters` internal updates then apply
    [3x3 conv -> relu -> 1x1 conv -> tanh] with a residual add; a 1x1
    sigmoid head reads the toggle mask out (strict > threshold).
    """

    family = "neural_ca"

    def __init__(self, config: EnvConfig, hidden: int = 8, expand: int = 16,
                 iters: int = 4, threshold: float = 0.5, seed: int = 0):
        super().__init__(config)
        if iters < 1:
            raise ValueError("iters must be >= 1")
        self.hidden, self.expand, self.iters = hidden, expand, iters
        self.threshold = threshold
        rng = np.random.default_rng(seed)
        self.conv_in = nn.Conv2d(1, hidden, 3, "toroidal", rng)
        self.conv_a = nn.Conv2d(hidden, expand, 3, "toroidal", rng)
        self.conv_b = nn.Conv2d(expand, hidden, 1, "toroidal", rng)
        self.head = nn.Conv2d(hidden, 1, 1, "toroidal", rng)
        self._relu = nn.Relu()
        self._tanh = nn.Tanh()
        self._sig = nn.Sigmoid()
        self.state = np.zeros((config.batch_n, hidden, config.act_h, config.act_w))

    def _conv_layers(self):
        return [self.conv_in, self.conv_a, self.conv_b, self.head]

    def _base_param_count(self):
        return sum(w.size + b.size for w, b in
                   ((l.w, l.b) for l in self._conv_layers()))

    def num_params(self):
        return self._base_param_count()

    def _obs_window(self, obs):
        cfg = self.config
        r0, c0 = cfg.act_offset
        window = obs[:, :, r0:r0 + cfg.act_h, c0:c0 + cfg.act_w]
        return window.astype(np.float64)

    def act(self, obs):
        self._check_obs(obs)
        x = self._obs_window(obs)
        inj = self.conv_in.forward(x)
        self.state = self.state + inj
        for _ in range(self.iters):
            a = self._relu.forward(self.conv_a.forward(self.state))
            d = self._tanh.forward(self.conv_b.forward(a))
            self.state = self.state + d
        out = self._sig.forward(self.head.forward(self.state))
        # post-activation outputs per conv layer, from the last internal
        # iteration, for the plastic variant's correlation terms
        self._posts = [inj, a, d, out]
        return (out > self.threshold).astype(np.uint8)

    def reset_policy(self):
        self.state = np.zeros_like(self.state)

    def get_params(self):
        return np.concatenate([a.ravel() for l in self._conv_layers()
                               for a in (l.w, l.b)])

    def _apply_base_params(self, params):
        i = 0
        for layer in self._conv_layers():
            for arr in (layer.w, layer.b):
                arr[:] = params[i:i + arr.size].reshape(arr.shape)
                i += arr.size

    def set_params(self, params):
        self._apply_base_params(self._take_params(params))
        self.reset_policy()


class HebbianCAPolicy(NeuralCAPolicy):
    """NeuralCAPolicy whose conv kernels update after every environment
    step by the ABCD Hebbian rule

        w += eta * (A*<pre*post> + B*<pre> + C*<post> + D)

    with one evolved (eta, A, B, C, D) per kernel element, the averages
    taken over batch and spatial positions (conv weight sharing kept),
    and the result clamped to +-w_max.  Biases stay fixed.  The genome is
    the initial kernel weights and biases followed by the coefficients;
    reset_policy restores the initial weights.
    """

    family = "hebbian_ca"

    COEFFS = 5  # eta, A, B, C, D

    def __init__(self, config: EnvConfig, hidden: int = 8, expand: int = 16,
                 iters: int = 4, threshold: float = 0.5, w_max: float = 3.0,
                 seed: int = 0):
        super().__init__(config, hidden, expand, iters, threshold, seed)
        self.w_max = w_max
        self.plastic = [np.zeros((self.COEFFS,) + l.w.shape)
                        for l in self._conv_layers()]
        self._initial = [l.w.copy() for l in self._conv_layers()]

    def num_params(self):
        return self._base_param_count() + sum(p.size for p in self.plastic)

    def act(self, obs):
        mask = super().act(obs)
        for idx, layer in enumerate(self._conv_layers()):
            # layer._cache holds the shifted input stack of the layer's
            # most recent forward (the last internal iteration)
            self._hebbian_update(idx, layer, layer._cache[1], self._posts[idx])
        return mask

    def _hebbian_update(self, idx, layer, xs, post):
        eta, ca, cb, cc, cd = self.plastic[idx]
        n, _, h, w = post.shape
        norm = 1.0 / (n * h * w)
        corr = np.tensordot(post, xs, axes=([0, 2, 3], [0, 2, 3])) \
            .reshape(layer.w.shape) * norm
        pre_mean = xs.mean(axis=(0, 2, 3)).reshape(1, *layer.w.shape[1:])
        post_mean = post.mean(axis=(0, 2, 3)).reshape(-1, 1, 1, 1)
        delta = eta * (ca * corr + cb * pre_mean + cc * post_mean + cd)
        np.clip(layer.w + delta, -self.w_max, self.w_max, out=layer.w)

    def reset_policy(self):
        super().reset_policy()
        for layer, w0 in zip(self._conv_layers(), self._initial):
            layer.w[:] = w0

    def get_params(self):
        # report the evolved *initial* weights, not the drifted ones
        base = super().get_params()
        i = 0
        for layer, w0 in zip(self._conv_layers(), self._initial):
            base[i:i + layer.w.size] = w0.ravel()
            i += layer.w.size + layer.b.size
        return np.concatenate([base] + [p.ravel() for p in self.plastic])

    def set_params(self, params):
        params = self._take_params(params)
        base_len = self._base_param_count()
        self._apply_base_params(params[:base_len])
        i = base_len
        for p in self.plastic:
            p[:] = params[i:i + p.size].reshape(p.shape)
            i += p.size
        self._initial = [l.w.copy() for l in self._conv_layers()]
        self.reset_policy()


FAMILIES = {
    "toggle": TogglePolicy,
    "neural_ca": NeuralCAPolicy,
    "hebbian_ca": HebbianCAPolicy,
}


def make_agent(family: str, config: EnvConfig, seed: int = 0, **kwargs) -> Agent:
    if family not in FAMILIES:
        raise ValueError(f"unknown agent family {family!r}")
    return FAMILIES[family](config, seed=seed, **kwargs)


def save_genome(path: str, agent: Agent) -> None:
    """Genome as raw little-endian float64 plus a plain-text manifest.

    The manifest records the family, the env geometry the genome was
    evolved for, and family hyperparameters, so a genome file is
    self-describing.
    """
    agent.get_params().astype("<f8").tofile(path)
    manifest = agent.manifest()
    manifest.update(obs_h=agent.config.obs_h, obs_w=agent.config.obs_w)
    if isinstance(agent, NeuralCAPolicy):
        manifest.update(hidden=agent.hidden, expand=agent.expand,
                        iters=agent.iters, threshold=agent.threshold)
    if isinstance(agent, HebbianCAPolicy):
        manifest.update(w_max=agent.w_max)
    with open(path + ".manifest", "w", encoding="utf-8") as fh:
        for key, value in manifest.items():
            fh.write(f"{key}={value}\n")


def read_genome_manifest(path: str) -> dict:
    with open(path + ".manifest", "r", encoding="utf-8") as fh:
        return dict(line.strip().split("=", 1) for line in fh if line.strip())


def load_genome(path: str, config: EnvConfig | None = None) -> Agent:
    """Rebuild an agent from a genome file.

    With a `config`, its action geometry is cross-checked against the
    manifest; without one, the env geometry is taken from the manifest
    itself (default rule, batch of one).
    """
    manifest = read_genome_manifest(path)
    family = manifest.pop("family")
    act = (int(manifest.pop("act_h")), int(manifest.pop("act_w")))
    obs = (int(manifest.pop("obs_h", 0)), int(manifest.pop("obs_w", 0)))
    if config is None:
        config = EnvConfig(obs_h=obs[0] or 128, obs_w=obs[1] or 128,
                           act_h=act[0], act_w=act[1])
    elif act != (config.act_h, config.act_w):
        raise ShapeMismatch("genome action geometry differs from the env config")
    kwargs = {}
    for key, value in manifest.items():
        kwargs[key] = float(value) if key in ("threshold", "w_max") else int(value)
    agent = make_agent(family, config, **kwargs)
    agent.set_params(np.fromfile(path, dtype="<f8"))
    return agent
