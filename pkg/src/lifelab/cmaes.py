"""Covariance Matrix Adaptation Evolution Strategy (maximization).

Standard rank-mu/rank-one update with cumulative step-size adaptation and
log-rank recombination weights.  Updates depend on candidate fitnesses
only through their ranks (ties broken by candidate index), so any
strictly increasing transform of the fitnesses yields a bit-identical
state trajectory.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .errors import LengthMismatch


class NonFiniteFitness(ValueError):
    """A candidate fitness was NaN or infinite."""


class DecompositionFailure(RuntimeError):
    """The covariance matrix could not be repaired to positive definite."""


_MAGIC = b"LIFELABCMA1\n"


class CmaEs:
    """ask/tell optimizer state over an n-dimensional real genome."""

    def __init__(self, mean, sigma: float = 0.5, seed: int = 0,
                 population: int | None = None,
                 c_sigma=None, d_sigma=None, c_c=None, c_1=None, c_mu=None):
        self.mean = np.asarray(mean, np.float64).copy()
        if self.mean.ndim != 1:
            raise ValueError("mean must be a 1-D vector")
        if sigma <= 0:
            raise ValueError("sigma must be > 0")
        n = self.mean.size
        self.n = n
        self.sigma = float(sigma)
        self.rng = np.random.default_rng(seed)

        self.lam = population if population else 4 + int(3 * np.log(n))
        if self.lam < 2:
            raise ValueError("population must be >= 2")
        self.mu = self.lam // 2
        w = np.log((self.lam + 1) / 2.0) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mu_eff = 1.0 / np.sum(self.weights ** 2)

        me, nn_ = self.mu_eff, float(n)
        self.c_sigma = (me + 2) / (nn_ + me + 5) if c_sigma is None else c_sigma
        self.d_sigma = (1 + 2 * max(0.0, np.sqrt((me - 1) / (nn_ + 1)) - 1)
                        + self.c_sigma) if d_sigma is None else d_sigma
        self.c_c = ((4 + me / nn_) / (nn_ + 4 + 2 * me / nn_)
                    if c_c is None else c_c)
        self.c_1 = 2 / ((nn_ + 1.3) ** 2 + me) if c_1 is None else c_1
        self.c_mu = (min(1 - self.c_1,
                         2 * (me - 2 + 1 / me) / ((nn_ + 2) ** 2 + me))
                     if c_mu is None else c_mu)
        self.chi_n = np.sqrt(nn_) * (1 - 1 / (4 * nn_) + 1 / (21 * nn_ ** 2))

        self.C = np.eye(n)
        self.p_sigma = np.zeros(n)
        self.p_c = np.zeros(n)
        self.generation = 0
        self._eig_cache = None

    def _decompose(self):
        try:
            eigvals, eigvecs = np.linalg.eigh(self.C)
        except np.linalg.LinAlgError as exc:
            raise DecompositionFailure(str(exc)) from exc
        if not np.isfinite(eigvals).all():
            raise DecompositionFailure("non-finite covariance eigenvalues")
        floor = 1e-20 * max(eigvals.max(), 1e-300)
        eigvals = np.maximum(eigvals, floor)
        self._eig_cache = (eigvals, eigvecs)
        return eigvals, eigvecs

    def ask(self) -> np.ndarray:
        """Sample a (lambda, n) matrix of candidates from N(mean, sigma^2 C)."""
        eigvals, eigvecs = self._decompose()
        z = self.rng.standard_normal((self.lam, self.n))
        y = z * np.sqrt(eigvals)[None, :] @ eigvecs.T
        return self.mean[None, :] + self.sigma * y

    def tell(self, candidates: np.ndarray, fitnesses) -> None:
        """Rank by fitness (descending, ties by candidate index) and apply
        the standard mean / path / covariance / step-size updates."""
        candidates = np.asarray(candidates, np.float64)
        fitnesses = np.asarray(fitnesses, np.float64)
        if candidates.shape != (self.lam, self.n):
            raise LengthMismatch(
                f"expected {(self.lam, self.n)} candidates, got {candidates.shape}")
        if fitnesses.shape != (self.lam,):
            raise LengthMismatch(f"expected {self.lam} fitnesses")
        if not np.isfinite(fitnesses).all():
            raise NonFiniteFitness("fitnesses must be finite")

        order = np.argsort(-fitnesses, kind="stable")
        elite = candidates[order[:self.mu]]
        y = (elite - self.mean[None, :]) / self.sigma
        y_w = self.weights @ y

        eigvals, eigvecs = self._eig_cache or self._decompose()
        inv_sqrt = eigvecs @ (eigvecs / np.sqrt(eigvals)[None, :]).T

        self.mean = self.mean + self.sigma * y_w
        self.p_sigma = ((1 - self.c_sigma) * self.p_sigma
                        + np.sqrt(self.c_sigma * (2 - self.c_sigma) * self.mu_eff)
                        * (inv_sqrt @ y_w))
        gen1 = self.generation + 1
        denom = np.sqrt(1 - (1 - self.c_sigma) ** (2 * gen1)) if self.c_sigma > 0 else 1.0
        h_sigma = float(np.linalg.norm(self.p_sigma) / denom
                        < (1.4 + 2 / (self.n + 1)) * self.chi_n)
        self.p_c = ((1 - self.c_c) * self.p_c
                    + h_sigma * np.sqrt(self.c_c * (2 - self.c_c) * self.mu_eff) * y_w)

        rank_mu = np.einsum("i,ij,ik->jk", self.weights, y, y)
        self.C = ((1 - self.c_1 - self.c_mu) * self.C
                  + self.c_1 * (np.outer(self.p_c, self.p_c)
                                + (1 - h_sigma) * self.c_c * (2 - self.c_c) * self.C)
                  + self.c_mu * rank_mu)
        self.C = (self.C + self.C.T) / 2.0

        if self.c_sigma > 0:
            self.sigma *= np.exp((self.c_sigma / self.d_sigma)
                                 * (np.linalg.norm(self.p_sigma) / self.chi_n - 1))
        self.generation = gen1
        self._eig_cache = None

    def save(self, path: str) -> None:
        """Checkpoint: version-tagged manifest plus little-endian float64
        payload; resuming is bit-exact (the rng state is included)."""
        manifest = {
            "n": self.n, "lambda": self.lam, "mu": self.mu,
            "sigma": self.sigma, "generation": self.generation,
            "c_sigma": self.c_sigma, "d_sigma": self.d_sigma,
            "c_c": self.c_c, "c_1": self.c_1, "c_mu": self.c_mu,
            "mu_eff": self.mu_eff, "chi_n": self.chi_n,
            "rng_state": _jsonable(self.rng.bit_generator.state),
        }
        payload = np.concatenate([
            self.mean, self.weights, self.p_sigma, self.p_c, self.C.ravel(),
        ]).astype("<f8")
        blob = json.dumps(manifest).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            fh.write(payload.tobytes())

    @classmethod
    def load(cls, path: str) -> "CmaEs":
        with open(path, "rb") as fh:
            if fh.read(len(_MAGIC)) != _MAGIC:
                raise ValueError(f"{path} is not a checkpoint file")
            (blob_len,) = struct.unpack("<I", fh.read(4))
            manifest = json.loads(fh.read(blob_len).decode("utf-8"))
            payload = np.frombuffer(fh.read(), dtype="<f8")
        n = manifest["n"]
        state = cls.__new__(cls)
        state.n = n
        state.lam = manifest["lambda"]
        state.mu = manifest["mu"]
        state.sigma = manifest["sigma"]
        state.generation = manifest["generation"]
        for key in ("c_sigma", "d_sigma", "c_c", "c_1", "c_mu", "mu_eff", "chi_n"):
            setattr(state, key, manifest[key])
        i = 0
        state.mean = payload[i:i + n].copy(); i += n
        state.weights = payload[i:i + state.mu].copy(); i += state.mu
        state.p_sigma = payload[i:i + n].copy(); i += n
        state.p_c = payload[i:i + n].copy(); i += n
        state.C = payload[i:i + n * n].reshape(n, n).copy()
        state.rng = np.random.default_rng()
        state.rng.bit_generator.state = _unjsonable(manifest["rng_state"])
        state._eig_cache = None
        return state


def _jsonable(state):
    if isinstance(state, dict):
        return {k: _jsonable(v) for k, v in state.items()}
    if isinstance(state, np.ndarray):
        return {"__ndarray__": state.tolist(), "dtype": str(state.dtype)}
    if isinstance(state, (np.integer,)):
        return int(state)
    return state


def _unjsonable(state):
    if isinstance(state, dict):
        if "__ndarray__" in state:
            return np.array(state["__ndarray__"], dtype=state["dtype"])
        return {k: _unjsonable(v) for k, v in state.items()}
    return state
