"""Run configuration: plain-text INI with nested sections.

A persisted config re-runs bit-identically; every knob the harness knows
is representable.  Unknown keys are rejected so typos fail loudly.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields

from .environment import EnvConfig
from .rules import format_rule_string, parse_rule_string


@dataclass
class RunConfig:
    # [env]
    obs_h: int = 128
    obs_w: int = 128
    act_h: int = 64
    act_w: int = 64
    rule: str = "B3/S23"
    batch_n: int = 1
    episode_steps: int = 0
    # [wrappers]
    wrappers: str = ""
    persistent_novelty: bool = False
    # [agent]
    family: str = "toggle"
    hidden: int = 8
    expand: int = 16
    iters: int = 4
    threshold: float = 0.5
    w_max: float = 3.0
    # [optimizer]
    population: int = 0          # 0 = CMA-ES default 4 + floor(3 ln n)
    sigma0: float = 0.5
    mean0: float = 0.0
    # [run]
    steps: int = 256
    episodes: int = 1
    generations: int = 50
    seed: int = 0
    stop_fitness: float = float("inf")
    out_dir: str = "runs/out"

    _SECTIONS = {
        "env": ("obs_h", "obs_w", "act_h", "act_w", "rule", "batch_n",
                "episode_steps"),
        "wrappers": ("wrappers", "persistent_novelty"),
        "agent": ("family", "hidden", "expand", "iters", "threshold", "w_max"),
        "optimizer": ("population", "sigma0", "mean0"),
        "run": ("steps", "episodes", "generations", "seed", "stop_fitness",
                "out_dir"),
    }

    def env_config(self) -> EnvConfig:
        return EnvConfig(obs_h=self.obs_h, obs_w=self.obs_w,
                         act_h=self.act_h, act_w=self.act_w,
                         rule=parse_rule_string(self.rule),
                         batch_n=self.batch_n,
                         episode_steps=self.episode_steps)

    def agent_kwargs(self) -> dict:
        if self.family == "toggle":
            return {}
        kw = {"hidden": self.hidden, "expand": self.expand,
              "iters": self.iters, "threshold": self.threshold}
        if self.family == "hebbian_ca":
            kw["w_max"] = self.w_max
        return kw

    def to_text(self) -> str:
        parser = configparser.ConfigParser()
        for section, keys in self._SECTIONS.items():
            parser[section] = {k: str(getattr(self, k)) for k in keys}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser()
        parser.read_string(text)
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        known = {k: sec for sec, keys in cls._SECTIONS.items() for k in keys}
        for section in parser.sections():
            if section not in cls._SECTIONS:
                raise ValueError(f"unknown config section [{section}]")
            for key, value in parser[section].items():
                if known.get(key) != section:
                    raise ValueError(f"unknown key {key!r} in [{section}]")
                kind = types[key]
                if kind == "int":
                    kwargs[key] = int(value)
                elif kind == "float":
                    kwargs[key] = float(value)
                elif kind == "bool":
                    kwargs[key] = value.strip().lower() in ("1", "true", "yes", "on")
                else:
                    kwargs[key] = value
        cfg = cls(**kwargs)
        # round-trip the rule string through the canonical form early so
        # malformed rules fail at load time, not mid-run
        cfg.rule = format_rule_string(parse_rule_string(cfg.rule))
        return cfg

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())
