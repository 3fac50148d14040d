"""Regenerate the decoder reference fixture from the service code.

Writes tests/fixtures/clip.json: one candidate's packed frames next to
the server's own plaintext rendering of the same rollout.
"""
import json
import os
import sys
import tempfile

from lifelab.service import SessionStore

BODY = {
    "obs_h": 24, "obs_w": 20, "act_h": 10, "act_w": 10,
    "rule": "B3/S23", "family": "toggle",
    "population": 2, "sigma0": 0.5, "steps": 8, "seed": 12345,
    "wrappers": "speed:1.0",
}


def main():
    out_path = os.path.join(os.path.dirname(__file__), "..",
                            "tests", "fixtures", "clip.json")
    with tempfile.TemporaryDirectory() as tmp:
        store = SessionStore(tmp)
        session = store.create(dict(BODY))
        cid = session.candidate_ids()[0]
        clip = session.clip(cid)
        plain = session.plaintext_frames(cid)
    fixture = {
        "config": BODY,
        "width": clip["width"],
        "height": clip["height"],
        "packed_frames": clip["frames"],
        "plaintext_frames": plain["frames"],
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(fixture, fh, indent=1)
    print(f"wrote {out_path} ({len(fixture['packed_frames'])} frames)")


if __name__ == "__main__":
    sys.exit(main())
