"""Experiment harness: evolution runs, mobility detection, replays, and
throughput benchmarking, all reproducible from a RunConfig and a seed.
"""
from __future__ import annotations

import csv
import io
import os

import numpy as np

from . import agents, engine, patterns, rewards
from .cmaes import CmaEs, NonFiniteFitness
from .config import RunConfig
from .environment import ToggleEnv
from .errors import ShapeMismatch
from .rules import RuleSet, parse_rule_string


class UsageError(ValueError):
    """Invalid harness invocation (bad flag values, impossible requests)."""


def _build_chain(env, cfg: RunConfig):
    return rewards.build_chain(env, cfg.wrappers, seed=cfg.seed + 777)


def rollout(chain, agent, steps: int):
    """One episode: reset, act/step `steps` times.

    Returns (fitness, trace) where fitness is cumulative reward averaged
    over batch instances and trace is the per-step list of
    (reward_mean, {wrapper: weighted bonus mean}).
    """
    obs = chain.reset()
    agent.reset_policy()
    total = 0.0
    trace = []
    for _ in range(steps):
        action = agent.act(obs)
        obs, reward, done, info = chain.step(action)
        step_mean = float(np.mean(reward))
        total += step_mean
        bonuses = {name: float(np.mean(b))
                   for name, b in info.get("bonuses", {}).items()}
        trace.append((step_mean, bonuses))
        if done.all():
            break
    return total, trace


def evaluate(cfg: RunConfig, env, agent, genome) -> float:
    """Fitness of one genome: cumulative chain reward over `cfg.steps`,
    averaged over `cfg.episodes` rollouts with fresh wrapper state."""
    agent.set_params(genome)
    total = 0.0
    for _ in range(cfg.episodes):
        chain = _build_chain(env, cfg)
        fitness, _ = rollout(chain, agent, cfg.steps)
        total += fitness
    return total / cfg.episodes


def evolve(cfg: RunConfig, progress=None) -> list[dict]:
    """CMA-ES loop; returns per-generation history and persists artifacts.

    History rows: generation, best fitness, mean fitness, best genome.
    The best genome, its first-board pattern (toggle family), a mobility
    report, and an optimizer checkpoint are written to cfg.out_dir on
    every improvement.
    """
    out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    cfg.save(os.path.join(out_dir, "config.cfg"))

    history: list[dict] = []
    if cfg.generations < 1:
        return history

    env = ToggleEnv(cfg.env_config())
    agent = agents.make_agent(cfg.family, env.config, seed=cfg.seed,
                              **cfg.agent_kwargs())
    n = agent.num_params()
    opt = CmaEs(np.full(n, cfg.mean0), sigma=cfg.sigma0, seed=cfg.seed,
                population=cfg.population or None)
    persistent_chain = _build_chain(env, cfg) if cfg.persistent_novelty else None

    best_overall = -np.inf
    for gen in range(cfg.generations):
        X = opt.ask()
        fits = np.empty(opt.lam)
        for i, cand in enumerate(X):
            if cfg.persistent_novelty:
                agent.set_params(cand)
                fits[i], _ = rollout(persistent_chain, agent, cfg.steps)
            else:
                fits[i] = evaluate(cfg, env, agent, cand)
        if not np.isfinite(fits).all():
            raise NonFiniteFitness(
                f"non-finite fitness in generation {gen}: {fits!r}")
        opt.tell(X, fits)
        ibest = int(np.argmax(fits))
        row = {
            "generation": gen,
            "best_fitness": float(fits[ibest]),
            "mean_fitness": float(fits.mean()),
            "best_genome": X[ibest].copy(),
        }
        history.append(row)
        if progress:
            progress(row)
        if row["best_fitness"] > best_overall:
            best_overall = row["best_fitness"]
            _write_champion(cfg, env, agent, row, out_dir)
            opt.save(os.path.join(out_dir, "optimizer.ckpt"))
        if best_overall >= cfg.stop_fitness:
            break

    with open(os.path.join(out_dir, "history.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "best_fitness", "mean_fitness"])
        for row in history:
            writer.writerow([row["generation"], repr(row["best_fitness"]),
                             repr(row["mean_fitness"])])
    return history


def _write_champion(cfg, env, agent, row, out_dir):
    agent.set_params(row["best_genome"])
    agents.save_genome(os.path.join(out_dir, "champion.f64"), agent)
    if isinstance(agent, agents.TogglePolicy):
        board = first_board(agent, env.config)
        patterns.save_pattern(os.path.join(out_dir, "champion.rle"), board,
                              env.config.rule)
        report = detect_mobility(agent.pattern(), env.config.rule, horizon=64)
        with open(os.path.join(out_dir, "champion_mobility.txt"), "w",
                  encoding="utf-8") as fh:
            fh.write(f"generation={row['generation']} {report}\n")


def first_board(agent, env_config) -> np.ndarray:
    """The observation grid after a toggle agent fires on an empty board."""
    board = np.zeros((env_config.obs_h, env_config.obs_w), np.uint8)
    r0, c0 = env_config.act_offset
    board[r0:r0 + env_config.act_h, c0:c0 + env_config.act_w] = agent.pattern()
    return board


def detect_mobility(pattern: np.ndarray, rule: RuleSet, horizon: int = 64):
    """Classify a pattern as mobile by simulating it on an oversized empty
    grid and looking for a recurrence of its shape at a shifted origin.

    Returns {'mobile', 'period', 'displacement'}: the smallest period at
    which the live-cell shape recurs, with the origin shift over that
    period.  Zero-displacement recurrences (still lifes, oscillators) and
    patterns with no recurrence within `horizon` are not mobile.
    """
    if horizon < 1:
        raise UsageError("horizon must be >= 1")
    pattern = np.asarray(pattern, np.uint8)
    live = np.argwhere(pattern)
    if live.size == 0:
        return {"mobile": False, "period": 0, "displacement": (0, 0)}
    trimmed = pattern[live[:, 0].min():live[:, 0].max() + 1,
                      live[:, 1].min():live[:, 1].max() + 1]
    ph, pw = trimmed.shape
    # influence spreads at most one cell per step; pad so nothing wraps
    gh, gw = ph + 2 * (horizon + 2), pw + 2 * (horizon + 2)
    grid = engine.make_grid(1, gh, gw)
    grid[0, 0, horizon + 2:horizon + 2 + ph, horizon + 2:horizon + 2 + pw] = trimmed

    seen: dict[bytes, tuple[int, tuple[int, int]]] = {}
    for t in range(horizon + 1):
        cells = np.argwhere(grid[0, 0])
        if cells.size == 0:
            return {"mobile": False, "period": 0, "displacement": (0, 0)}
        origin = cells.min(axis=0)
        key = (cells - origin).astype(np.int32).tobytes()
        if key in seen:
            t0, origin0 = seen[key]
            disp = (int(origin[0] - origin0[0]), int(origin[1] - origin0[1]))
            return {"mobile": disp != (0, 0), "period": t - t0,
                    "displacement": disp}
        seen[key] = (t, (int(origin[0]), int(origin[1])))
        grid = engine.step(grid, rule)
    return {"mobile": False, "period": 0, "displacement": (0, 0)}


def replay(cfg: RunConfig, steps: int, out_dir: str | None = None,
           genome_path: str | None = None, pattern_path: str | None = None,
           frame_format: str = "plaintext"):
    """Deterministic rollout of a genome or a pattern file.

    Writes per-step frames and a per-wrapper reward CSV when `out_dir` is
    given.  Returns (total reward, trace rows).
    """
    if (genome_path is None) == (pattern_path is None):
        raise UsageError("provide exactly one of genome_path / pattern_path")
    env = ToggleEnv(cfg.env_config())
    chain = _build_chain(env, cfg)

    if genome_path:
        agent = agents.load_genome(genome_path, env.config)
    else:
        cells, file_rule = patterns.load_pattern(pattern_path)
        agent = _PatternInjector(env.config, cells)

    obs = chain.reset()
    agent.reset_policy()
    names = [w.name for w in chain.wrappers()] if isinstance(
        chain, rewards.RewardWrapper) else []
    rows = []
    frames = []
    total = 0.0
    for t in range(steps):
        action = agent.act(obs)
        obs, reward, done, info = chain.step(action)
        step_mean = float(np.mean(reward))
        total += step_mean
        bonuses = info.get("bonuses", {})
        rows.append([t, step_mean] + [float(np.mean(bonuses[n])) for n in names])
        frames.append(obs[0, 0].copy())
        if done.all():
            break

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "rewards.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "total"] + names)
            for row in rows:
                writer.writerow([row[0]] + [repr(v) for v in row[1:]])
        for t, frame in enumerate(frames):
            name = f"frame_{t:05d}"
            if frame_format == "rle":
                patterns.save_pattern(os.path.join(out_dir, name + ".rle"),
                                      frame, env.config.rule)
            else:
                patterns.save_pattern(os.path.join(out_dir, name + ".cells"),
                                      frame, fmt="plaintext")
    return total, rows


class _PatternInjector(agents.Agent):
    """Replay helper: toggles a fixed pattern (centered) at step 0."""

    family = "pattern"

    def __init__(self, config, cells):
        super().__init__(config)
        if cells.shape[0] > config.act_h or cells.shape[1] > config.act_w:
            raise ShapeMismatch(
                f"pattern {cells.shape} exceeds the action region "
                f"{(config.act_h, config.act_w)}")
        mask = np.zeros((config.act_h, config.act_w), np.uint8)
        r0 = (config.act_h - cells.shape[0]) // 2
        c0 = (config.act_w - cells.shape[1]) // 2
        mask[r0:r0 + cells.shape[0], c0:c0 + cells.shape[1]] = cells
        self._mask = mask
        self._fired = False

    def act(self, obs):
        self._check_obs(obs)
        cfg = self.config
        out = np.zeros((cfg.batch_n, 1, cfg.act_h, cfg.act_w), np.uint8)
        if not self._fired:
            out[:, 0] = self._mask
            self._fired = True
        return out

    def reset_policy(self):
        self._fired = False


def bench_report(sizes, rule_strings, seconds: float, batch: int = 1,
                 compare_backends: bool = True):
    """Throughput table across sizes/rules, optionally for both kernels.

    Returns (rows, csv_text, table_text); rows are dicts with size, rule,
    batch, backend, updates_per_second, cell_updates_per_second.
    """
    if seconds <= 0:
        raise UsageError("seconds must be > 0")
    from . import _accel

    backends = [engine.backend()]
    if compare_backends and _accel.HAVE_NUMBA:
        backends.append("numpy")
    rows = []
    for size in sizes:
        for rs in rule_strings:
            rule = parse_rule_string(rs)
            for be in backends:
                if be == engine.backend():
                    res = engine.benchmark(size, size, rule, seconds, batch)
                else:
                    res = _numpy_benchmark(size, size, rule, seconds, batch)
                rows.append({
                    "size": size, "rule": rs, "batch": batch, "backend": be,
                    "updates_per_second": res["updates_per_second"],
                    "cell_updates_per_second": res["cell_updates_per_second"],
                })
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)

    lines = [f"{'size':>6} {'rule':>12} {'batch':>5} {'backend':>7} "
             f"{'updates/s':>14} {'cell-updates/s':>16}"]
    for r in rows:
        lines.append(f"{r['size']:>6} {r['rule']:>12} {r['batch']:>5} "
                     f"{r['backend']:>7} {r['updates_per_second']:>14,.0f} "
                     f"{r['cell_updates_per_second']:>16,.0f}")
    return rows, buf.getvalue(), "\n".join(lines)


def _numpy_benchmark(h, w, rule, duration, batch):
    """Benchmark the fallback kernel while numba is the active backend."""
    import time as _time

    from . import _accel

    rng = np.random.default_rng(0)
    cells = (rng.random((batch, 1, h, w)) < 0.375).astype(np.uint8)
    lut = _accel.rule_tables(rule.birth, rule.survival)
    total = 0
    chunk = 16
    start = _time.perf_counter()
    while True:
        cells = _accel.step_numpy(cells, lut, chunk)
        total += chunk * batch
        elapsed = _time.perf_counter() - start
        if elapsed >= duration:
            break
        chunk = max(1, min(int(total / elapsed * duration / 50) or 1, 4096))
    ups = total / elapsed
    return {"updates_per_second": ups, "cell_updates_per_second": ups * h * w}
