"""Parameter vectors, splittable random streams, and checkpoint I/O.

Every model parameter, gradient, and update in this package is a flat
float64 vector ("param vector").  All reductions over such vectors run
in index-ascending order so that serial and concurrent schedules produce
bit-identical results.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ConfigError, NumericError

# Below this norm a requested perturbation direction is treated as the
# zero vector (the server pseudo-gradient starts at exactly zero).
TOL_ZERO_NORM = 1e-12

CHECKPOINT_MAGIC = b"FPGN"
CHECKPOINT_VERSION = 1


def as_params(values) -> np.ndarray:
    """Coerce ``values`` to a float64 1-D array without copying when possible."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1:
        raise ConfigError(f"param vector must be 1-D, got shape {vec.shape}")
    return vec


def check_finite(vec: np.ndarray, context: str = "param vector") -> None:
    if not np.all(np.isfinite(vec)):
        raise NumericError(f"non-finite values in {context}")


def _check_same_length(u: np.ndarray, v: np.ndarray) -> None:
    if u.shape[0] != v.shape[0]:
        raise ConfigError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")


def add(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    _check_same_length(u, v)
    return u + v


def scale(u: np.ndarray, a: float) -> np.ndarray:
    return a * u


def dot(u: np.ndarray, v: np.ndarray) -> float:
    """Inner product accumulated sequentially in index-ascending order."""
    _check_same_length(u, v)
    total = 0.0
    for a, b in zip(u.tolist(), v.tolist()):
        total += a * b
    return total


def l2_norm(u: np.ndarray) -> float:
    """Euclidean norm with index-ascending accumulation of squares."""
    total = 0.0
    for a in u.tolist():
        total += a * a
    return total**0.5


def stream(seed: int, *path: int) -> np.random.Generator:
    """Independent random stream for a (seed, stream-id) pair.

    Uses the counter-based Philox generator keyed by the full id path,
    so streams can be opened in any order, on any thread, and still
    yield identical draws.  Path components name the draw site, e.g.
    (purpose, round, client).
    """
    seq = np.random.SeedSequence((int(seed),) + tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic 63-bit child seed for namespacing one seed into several."""
    seq = np.random.SeedSequence((int(seed),) + tuple(int(p) for p in path))
    return int(seq.generate_state(1, np.uint64)[0] >> 1)


def save_checkpoint(path, x: np.ndarray) -> None:
    """Write a param vector: magic "FPGN", u16 version, u64 length, f64 LE data."""
    vec = as_params(x)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHQ", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, vec.shape[0]))
        fh.write(vec.astype("<f8").tobytes())


def load_checkpoint(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(struct.calcsize("<4sHQ"))
        if len(header) < struct.calcsize("<4sHQ"):
            raise ConfigError(f"checkpoint {path!s} is truncated")
        magic, version, d = struct.unpack("<4sHQ", header)
        if magic != CHECKPOINT_MAGIC:
            raise ConfigError(f"checkpoint {path!s} has bad magic {magic!r}")
        if version != CHECKPOINT_VERSION:
            raise ConfigError(f"checkpoint {path!s} has unsupported version {version}")
        payload = fh.read(8 * d)
        if len(payload) != 8 * d:
            raise ConfigError(f"checkpoint {path!s} is truncated")
        return np.frombuffer(payload, dtype="<f8").astype(np.float64)
