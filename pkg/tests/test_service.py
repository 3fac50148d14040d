import base64
import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from lifelab import agents, rewards
from lifelab.config import RunConfig
from lifelab.environment import ToggleEnv
from lifelab.service import make_server, pack_frame

SESSION_BODY = {
    "obs_h": 32, "obs_w": 32, "act_h": 16, "act_w": 16,
    "rule": "B3/S23", "family": "toggle",
    "population": 4, "sigma0": 0.5, "steps": 12, "seed": 42,
    "wrappers": "speed:1.0",
}


@pytest.fixture
def server(tmp_path):
    srv = make_server("127.0.0.1", 0, str(tmp_path / "sessions"))
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}"
    srv.shutdown()
    srv.server_close()


def call(base, path, body=None, method=None):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(
        base + path, data=data, method=method or ("POST" if body else "GET"),
        headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=60) as resp:
            return resp.status, json.loads(resp.read().decode())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read().decode())


def unpack_frames(clip):
    h, w = clip["height"], clip["width"]
    frames = []
    for b64 in clip["frames"]:
        raw = np.frombuffer(base64.b64decode(b64), np.uint8)
        bits = np.unpackbits(raw.reshape(h, -1), axis=1)[:, :w]
        frames.append(bits)
    return frames


def test_healthz(server):
    status, body = call(server, "/healthz")
    assert status == 200 and body == {"ok": True}


def test_create_session_returns_clips(server):
    status, body = call(server, "/sessions", SESSION_BODY)
    assert status == 200
    assert body["generation"] == 0
    assert body["status"] == "awaiting_votes"
    assert len(body["clips"]) == 4
    clip = body["clips"][0]
    assert clip["width"] == 32 and clip["height"] == 32
    assert len(clip["frames"]) == 12
    assert "speed" in clip["rewards"]
    assert "mobility" in clip


def test_population_bounds(server):
    status, body = call(server, "/sessions", {**SESSION_BODY, "population": 0})
    assert status == 400 and body["error"] == "invalid_config"
    status, body = call(server, "/sessions", {**SESSION_BODY, "population": 33})
    assert status == 400 and body["error"] == "invalid_config"


def test_unknown_config_key_rejected(server):
    status, body = call(server, "/sessions", {**SESSION_BODY, "bogus": 1})
    assert status == 400 and body["error"] == "invalid_config"


def test_clip_fetch_idempotent_and_404(server):
    _, created = call(server, "/sessions", SESSION_BODY)
    sid = created["id"]
    cid = created["candidates"][0]
    s1, clip1 = call(server, f"/sessions/{sid}/candidates/{cid}")
    s2, clip2 = call(server, f"/sessions/{sid}/candidates/{cid}")
    assert s1 == s2 == 200 and clip1 == clip2
    status, body = call(server, f"/sessions/{sid}/candidates/g0c99")
    assert status == 404 and body["error"] == "not_found"
    status, _ = call(server, "/sessions/deadbeef")
    assert status == 404


def test_served_clip_matches_local_resimulation(server):
    _, created = call(server, "/sessions", SESSION_BODY)
    clip = created["clips"][2]
    frames = unpack_frames(clip)

    cfg = RunConfig(**SESSION_BODY)
    env = ToggleEnv(cfg.env_config())
    agent = agents.make_agent("toggle", env.config, seed=cfg.seed)
    opt_genomes = _regenerate_candidates(cfg, agent.num_params())
    agent.set_params(opt_genomes[2])
    chain = rewards.build_chain(env, cfg.wrappers, seed=cfg.seed + 777)
    obs = chain.reset()
    agent.reset_policy()
    for frame in frames:
        action = agent.act(obs)
        obs, _, _, _ = chain.step(action)
        assert np.array_equal(frame, obs[0, 0])


def _regenerate_candidates(cfg, n):
    from lifelab.cmaes import CmaEs
    opt = CmaEs(np.full(n, cfg.mean0), sigma=cfg.sigma0, seed=cfg.seed,
                population=cfg.population)
    return opt.ask()


def test_vote_advances_generation(server):
    _, created = call(server, "/sessions", SESSION_BODY)
    sid = created["id"]
    ranking = created["candidates"][:2]
    status, body = call(server, f"/sessions/{sid}/votes", {"ranking": ranking})
    assert status == 200
    assert body["generation"] == 1
    assert all(c.startswith("g1c") for c in body["candidates"])
    status, summary = call(server, f"/sessions/{sid}")
    assert summary["generation"] == 1
    assert summary["votes_cast"] == 1


def test_vote_validation(server):
    _, created = call(server, "/sessions", SESSION_BODY)
    sid = created["id"]
    ids = created["candidates"]
    status, body = call(server, f"/sessions/{sid}/votes", {"ranking": []})
    assert status == 400 and body["error"] == "invalid_vote"
    status, body = call(server, f"/sessions/{sid}/votes",
                        {"ranking": [ids[0], ids[0]]})
    assert status == 400 and body["error"] == "invalid_vote"
    status, body = call(server, f"/sessions/{sid}/votes",
                        {"ranking": ["g9c9"]})
    assert status == 400 and body["error"] == "invalid_vote"
    # stale ids from the previous generation are invalid after a vote
    call(server, f"/sessions/{sid}/votes", {"ranking": [ids[0]]})
    status, body = call(server, f"/sessions/{sid}/votes", {"ranking": [ids[0]]})
    assert status == 400 and body["error"] == "invalid_vote"


def test_rank_order_changes_outcome(server):
    _, a = call(server, "/sessions", SESSION_BODY)
    _, b = call(server, "/sessions", SESSION_BODY)
    ranking = a["candidates"]
    _, after_fwd = call(server, f"/sessions/{a['id']}/votes",
                        {"ranking": ranking})
    _, after_rev = call(server, f"/sessions/{b['id']}/votes",
                        {"ranking": list(reversed(ranking))})
    fwd = after_fwd["clips"][0]["frames"]
    rev = after_rev["clips"][0]["frames"]
    assert fwd != rev


def test_vote_determinism_identical_scripts(server):
    champions = []
    for _ in range(2):
        _, created = call(server, "/sessions", SESSION_BODY)
        sid = created["id"]
        body = created
        for _ in range(3):
            ranking = [body["candidates"][1], body["candidates"][0]]
            _, body = call(server, f"/sessions/{sid}/votes",
                           {"ranking": ranking})
        champions.append(json.dumps(body["clips"], sort_keys=True))
    assert champions[0] == champions[1]


def test_session_isolation_interleaved(server):
    _, a = call(server, "/sessions", SESSION_BODY)
    _, b = call(server, "/sessions", {**SESSION_BODY, "seed": 7})
    assert a["id"] != b["id"]
    a_clip_before = call(server,
                         f"/sessions/{a['id']}/candidates/{a['candidates'][0]}")
    call(server, f"/sessions/{b['id']}/votes", {"ranking": b["candidates"][:1]})
    a_clip_after = call(server,
                        f"/sessions/{a['id']}/candidates/{a['candidates'][0]}")
    assert a_clip_before == a_clip_after
    _, sa = call(server, f"/sessions/{a['id']}")
    assert sa["generation"] == 0


def test_plaintext_rendering_matches_packed(server):
    _, created = call(server, "/sessions", SESSION_BODY)
    sid = created["id"]
    cid = created["candidates"][0]
    _, plain = call(server, f"/sessions/{sid}/candidates/{cid}?format=plaintext")
    _, clip = call(server, f"/sessions/{sid}/candidates/{cid}")
    frames = unpack_frames(clip)
    assert len(plain["frames"]) == len(frames)
    for text, bits in zip(plain["frames"], frames):
        rendered = "\n".join("".join("O" if v else "." for v in row)
                             for row in bits)
        assert text == rendered


def test_persistence_survives_restart(tmp_path):
    data_dir = str(tmp_path / "sessions")
    srv = make_server("127.0.0.1", 0, data_dir)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{srv.server_address[1]}"
    _, created = call(base, "/sessions", SESSION_BODY)
    sid = created["id"]
    call(base, f"/sessions/{sid}/votes", {"ranking": created["candidates"][:1]})
    _, before = call(base, f"/sessions/{sid}")
    clip_before = call(base,
                       f"/sessions/{sid}/candidates/g1c0")[1]
    srv.shutdown()
    srv.server_close()

    srv2 = make_server("127.0.0.1", 0, data_dir)
    thread2 = threading.Thread(target=srv2.serve_forever, daemon=True)
    thread2.start()
    base2 = f"http://127.0.0.1:{srv2.server_address[1]}"
    status, after = call(base2, f"/sessions/{sid}")
    assert status == 200
    assert after["generation"] == before["generation"] == 1
    assert after["votes_cast"] == 1
    clip_after = call(base2, f"/sessions/{sid}/candidates/g1c0")[1]
    assert clip_after == clip_before
    srv2.shutdown()
    srv2.server_close()


def test_cors_preflight(server):
    req = urllib.request.Request(server + "/sessions", method="OPTIONS")
    with urllib.request.urlopen(req, timeout=10) as resp:
        assert resp.status == 204
        assert resp.headers["Access-Control-Allow-Origin"] == "*"
        assert "POST" in resp.headers["Access-Control-Allow-Methods"]


def test_pack_frame_layout():
    frame = np.zeros((2, 10), np.uint8)
    frame[0, 0] = 1   # first bit of first byte, MSB-first
    frame[1, 9] = 1   # second bit of the second row's second byte
    packed = pack_frame(frame)
    assert len(packed) == 4   # two rows, two bytes per row
    assert packed[0] == 0b10000000
    assert packed[3] == 0b01000000
