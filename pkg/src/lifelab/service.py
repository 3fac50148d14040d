"""Session server for human-directed evolution.

HTTP + JSON over stdlib ``http.server`` (localhost tool, no auth):

* ``POST /sessions``                        body: RunConfig fields (+ optional
                                            ``stride``); returns the session id
                                            and the first generation of clips
* ``GET  /sessions/{id}``                   session summary
* ``GET  /sessions/{id}/candidates/{cid}``  one rollout clip
  (``?format=plaintext`` returns frames as '.'/'O' text for decoder checks)
* ``POST /sessions/{id}/votes``             body: {"ranking": [cid, ...]};
                                            advances one generation
* ``GET  /healthz``

Clip frames are bit-packed rows (MSB-first within each byte, rows padded
to whole bytes), base64-encoded per frame, with width/height/stride
metadata.  Sessions persist to disk on every state change and are
recoverable after a restart; votes are only accepted for the current
generation.  Human ranking maps to fitness ``k - r`` for the candidate at
0-based rank ``r`` of ``k`` selected, ``-1`` for unselected candidates
(the optimizer consumes ranks only, so any order-preserving map is
equivalent).
"""
from __future__ import annotations

import base64
import json
import os
import re
import secrets
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from . import agents, harness, rewards
from .cmaes import CmaEs
from .config import RunConfig
from .environment import ToggleEnv


class ServiceError(Exception):
    def __init__(self, status: int, error: str, detail: str = ""):
        super().__init__(detail or error)
        self.status = status
        self.error = error
        self.detail = detail


class InvalidConfig(ServiceError):
    def __init__(self, detail):
        super().__init__(400, "invalid_config", detail)


class InvalidVote(ServiceError):
    def __init__(self, detail, status=400):
        super().__init__(status, "invalid_vote", detail)


class NotFound(ServiceError):
    def __init__(self, detail):
        super().__init__(404, "not_found", detail)


MAX_POPULATION = 32


def pack_frame(frame: np.ndarray) -> bytes:
    """Row-major bit packing, MSB-first, each row padded to whole bytes."""
    return np.packbits(frame, axis=1).tobytes()


class Session:
    """One evolution run: optimizer state, current candidates, vote ledger."""

    def __init__(self, session_id: str, cfg: RunConfig, stride: int,
                 data_dir: str):
        self.id = session_id
        self.cfg = cfg
        self.stride = stride
        self.dir = os.path.join(data_dir, session_id)
        self.lock = threading.RLock()
        self.status = "awaiting_votes"
        self.votes: list[list[str]] = []

        env_config = cfg.env_config()
        self._env = ToggleEnv(env_config)
        self._agent = agents.make_agent(cfg.family, env_config, seed=cfg.seed,
                                        **cfg.agent_kwargs())
        self.opt = CmaEs(np.full(self._agent.num_params(), cfg.mean0),
                         sigma=cfg.sigma0, seed=cfg.seed,
                         population=cfg.population)
        self.candidates = self.opt.ask()
        self._clips: dict[str, dict] = {}
        self._persist()

    # -- identity ---------------------------------------------------------

    @property
    def generation(self) -> int:
        return self.opt.generation

    def candidate_ids(self) -> list[str]:
        return [f"g{self.generation}c{i}" for i in range(len(self.candidates))]

    def summary(self) -> dict:
        return {
            "id": self.id,
            "generation": self.generation,
            "status": self.status,
            "population": len(self.candidates),
            "candidates": self.candidate_ids(),
            "votes_cast": len(self.votes),
            "steps": self.cfg.steps,
            "rule": self.cfg.rule,
            "obs_h": self.cfg.obs_h,
            "obs_w": self.cfg.obs_w,
        }

    # -- clips -------------------------------------------------------------

    def clip(self, cid: str) -> dict:
        with self.lock:
            if cid not in self.candidate_ids():
                raise NotFound(f"unknown candidate {cid!r}")
            if cid not in self._clips:
                idx = int(cid.rsplit("c", 1)[1])
                self._clips[cid] = self._render(cid, self.candidates[idx])
            return self._clips[cid]

    def _render(self, cid: str, genome: np.ndarray) -> dict:
        cfg = self.cfg
        self._agent.set_params(genome)
        chain = rewards.build_chain(self._env, cfg.wrappers, seed=cfg.seed + 777)
        obs = chain.reset()
        self._agent.reset_policy()
        names = [w.name for w in chain.wrappers()] if isinstance(
            chain, rewards.RewardWrapper) else []
        traces: dict[str, list[float]] = {n: [] for n in names}
        frames = []
        total = 0.0
        for t in range(cfg.steps):
            action = self._agent.act(obs)
            obs, reward, done, info = chain.step(action)
            total += float(np.mean(reward))
            for n in names:
                traces[n].append(float(np.mean(info["bonuses"][n])))
            if t % self.stride == 0:
                frames.append(obs[0, 0].copy())
            if done.all():
                break
        if isinstance(self._agent, agents.TogglePolicy):
            mobility = harness.detect_mobility(
                self._agent.pattern(), self._env.config.rule, horizon=32)
        else:
            mobility = harness.detect_mobility(
                frames[-1], self._env.config.rule, horizon=16)
        return {
            "candidate": cid,
            "width": self._env.config.obs_w,
            "height": self._env.config.obs_h,
            "stride": self.stride,
            "steps": len(frames),
            "frames": [base64.b64encode(pack_frame(f)).decode("ascii")
                       for f in frames],
            "rewards": traces,
            "total_reward": total,
            "mobility": mobility,
        }

    def plaintext_frames(self, cid: str) -> dict:
        with self.lock:
            clip = self.clip(cid)
            idx = int(cid.rsplit("c", 1)[1])
            cfg = self.cfg
            self._agent.set_params(self.candidates[idx])
            chain = rewards.build_chain(self._env, cfg.wrappers,
                                        seed=cfg.seed + 777)
            obs = chain.reset()
            self._agent.reset_policy()
            frames = []
            for t in range(cfg.steps):
                action = self._agent.act(obs)
                obs, _, done, _ = chain.step(action)
                if t % self.stride == 0:
                    frames.append("\n".join(
                        "".join("O" if v else "." for v in row)
                        for row in obs[0, 0]))
                if done.all():
                    break
        return {"candidate": cid, "stride": self.stride, "frames": frames,
                "packed_frames": clip["frames"]}

    # -- voting -------------------------------------------------------------

    def submit_votes(self, ranking: list[str]) -> dict:
        with self.lock:
            if self.status != "awaiting_votes":
                raise InvalidVote(f"session is {self.status}", status=409)
            if not ranking:
                raise InvalidVote("ranking must name at least one candidate")
            ids = self.candidate_ids()
            if len(set(ranking)) != len(ranking):
                raise InvalidVote("duplicate candidate in ranking")
            for cid in ranking:
                if cid not in ids:
                    raise InvalidVote(f"unknown candidate {cid!r}")
            self.status = "advancing"
            try:
                k = len(ranking)
                fitness = np.full(len(ids), -1.0)
                for rank, cid in enumerate(ranking):
                    fitness[ids.index(cid)] = float(k - rank)
                self.votes.append(list(ranking))
                self.opt.tell(self.candidates, fitness)
                self.candidates = self.opt.ask()
                self._clips = {}
            finally:
                self.status = "awaiting_votes"
            self._persist()
            return self.summary()

    # -- persistence ---------------------------------------------------------

    def _persist(self):
        os.makedirs(self.dir, exist_ok=True)
        self.cfg.save(os.path.join(self.dir, "config.cfg"))
        self.opt.save(os.path.join(self.dir, "optimizer.ckpt"))
        self.candidates.astype("<f8").tofile(
            os.path.join(self.dir, "candidates.f64"))
        meta = {"id": self.id, "stride": self.stride, "status": "awaiting_votes",
                "votes": self.votes, "generation": self.generation,
                "population": len(self.candidates)}
        with open(os.path.join(self.dir, "meta.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(meta, fh)

    @classmethod
    def restore(cls, session_id: str, data_dir: str) -> "Session":
        sdir = os.path.join(data_dir, session_id)
        with open(os.path.join(sdir, "meta.json"), "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        cfg = RunConfig.from_file(os.path.join(sdir, "config.cfg"))
        session = cls.__new__(cls)
        session.id = session_id
        session.cfg = cfg
        session.stride = meta["stride"]
        session.dir = sdir
        session.lock = threading.RLock()
        session.status = "awaiting_votes"
        session.votes = [list(v) for v in meta["votes"]]
        env_config = cfg.env_config()
        session._env = ToggleEnv(env_config)
        session._agent = agents.make_agent(cfg.family, env_config,
                                           seed=cfg.seed, **cfg.agent_kwargs())
        session.opt = CmaEs.load(os.path.join(sdir, "optimizer.ckpt"))
        raw = np.fromfile(os.path.join(sdir, "candidates.f64"), dtype="<f8")
        session.candidates = raw.reshape(meta["population"], -1)
        session._clips = {}
        return session


class SessionStore:
    def __init__(self, data_dir: str):
        self.data_dir = data_dir
        os.makedirs(data_dir, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, body: dict) -> Session:
        body = dict(body)
        stride = int(body.pop("stride", 1))
        if stride < 1:
            raise InvalidConfig("stride must be >= 1")
        try:
            cfg = RunConfig(**body)
            cfg.env_config()   # validate geometry and rule
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(str(exc)) from exc
        if cfg.population < 1:
            raise InvalidConfig("population must be >= 1")
        if cfg.population > MAX_POPULATION:
            raise InvalidConfig(f"population must be <= {MAX_POPULATION}")
        session_id = secrets.token_hex(8)
        session = Session(session_id, cfg, stride, self.data_dir)
        with self._lock:
            self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            if session_id in self._sessions:
                return self._sessions[session_id]
        sdir = os.path.join(self.data_dir, session_id)
        if os.path.isdir(sdir):
            session = Session.restore(session_id, self.data_dir)
            with self._lock:
                self._sessions.setdefault(session_id, session)
                return self._sessions[session_id]
        raise NotFound(f"unknown session {session_id!r}")


class _Handler(BaseHTTPRequestHandler):
    store: SessionStore = None
    protocol_version = "HTTP/1.1"

    def log_message(self, *args):   # quiet by default
        pass

    def _send(self, status: int, payload: dict):
        blob = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(blob)

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        if length == 0:
            return {}
        try:
            return json.loads(self.rfile.read(length).decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise ServiceError(400, "bad_json", str(exc)) from exc

    def _route(self, method: str):
        path, _, query = self.path.partition("?")
        try:
            if method == "GET" and path == "/healthz":
                return self._send(200, {"ok": True})
            if method == "POST" and path == "/sessions":
                session = self.store.create(self._body())
                return self._send(200, {
                    "id": session.id,
                    **session.summary(),
                    "clips": [session.clip(c) for c in session.candidate_ids()],
                })
            m = re.match(r"^/sessions/([0-9a-f]+)$", path)
            if method == "GET" and m:
                return self._send(200, self.store.get(m.group(1)).summary())
            m = re.match(r"^/sessions/([0-9a-f]+)/candidates/([\w-]+)$", path)
            if method == "GET" and m:
                session = self.store.get(m.group(1))
                if "format=plaintext" in query:
                    return self._send(200, session.plaintext_frames(m.group(2)))
                return self._send(200, session.clip(m.group(2)))
            m = re.match(r"^/sessions/([0-9a-f]+)/votes$", path)
            if method == "POST" and m:
                session = self.store.get(m.group(1))
                ranking = self._body().get("ranking", [])
                if not isinstance(ranking, list):
                    raise InvalidVote("ranking must be a list")
                summary = session.submit_votes([str(c) for c in ranking])
                return self._send(200, {
                    **summary,
                    "clips": [session.clip(c) for c in session.candidate_ids()],
                })
            raise NotFound(f"no route for {method} {path}")
        except ServiceError as exc:
            self._send(exc.status, {"error": exc.error, "detail": exc.detail})
        except Exception as exc:   # pragma: no cover - defensive
            self._send(500, {"error": "internal", "detail": str(exc)})

    def do_GET(self):
        self._route("GET")

    def do_POST(self):
        self._route("POST")

    def do_OPTIONS(self):
        # CORS preflight for browser clients on another origin
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()


def make_server(host: str, port: int, data_dir: str) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {"store": SessionStore(data_dir)})
    return ThreadingHTTPServer((host, port), handler)


def serve(host: str = "127.0.0.1", port: int = 8765,
          data_dir: str = "runs/service") -> None:
    server = make_server(host, port, data_dir)
    print(f"lifelab service on http://{host}:{server.server_address[1]} "
          f"(sessions in {data_dir})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
