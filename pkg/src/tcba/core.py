"""Model parameters, initial configurations, reaction tapes and seeded streams."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._kernel import velocities_from_uniforms

DEFAULT_MAX_QUEUE = 64


class InvalidParams(ValueError):
    pass


class Velocity(enum.IntEnum):
    LEFT = -1
    STILL = 0
    RIGHT = 1


class Outcome(enum.IntEnum):
    ANNIHILATE = 0
    SURVIVE_LEFT = 1
    SURVIVE_RIGHT = 2
    MAKE_BLOCKADE = 3


@dataclass(frozen=True)
class ModelParams:
    """Reaction probabilities of the coalescing system plus the blockade density.

    ``a`` is the chance that one arrow survives an arrow-arrow collision (split
    evenly between the two directions), ``b`` that the collision leaves a
    blockade behind, ``x`` that an arrow survives hitting a blockade and ``p``
    the probability an initial particle is a blockade.
    """

    a: float
    b: float
    x: float
    p: float

    def __post_init__(self):
        for name in ("a", "b", "x"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0) or math.isnan(v):
                raise InvalidParams(f"{name}={v!r} must lie in [0, 1)")
        if self.a + self.b > 1.0 + 1e-15:
            raise InvalidParams(f"a + b = {self.a + self.b!r} exceeds 1")
        if not (0.0 <= self.p <= 1.0) or math.isnan(self.p):
            raise InvalidParams(f"p={self.p!r} must lie in [0, 1]")

    @property
    def c(self) -> float:
        """Probability of mutual annihilation in an arrow-arrow collision."""
        return max(0.0, 1.0 - (self.a + self.b))

    def with_p(self, p: float) -> "ModelParams":
        return ModelParams(self.a, self.b, self.x, p)


def validate_params(a, b, x, p) -> ModelParams:
    return ModelParams(float(a), float(b), float(x), float(p))


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.exponential(1.0 / self.rate, size=size)


@dataclass(frozen=True)
class Uniform:
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi):
            raise ValueError("need 0 <= lo < hi")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # 1 - U lies in (0, 1], keeping spacings strictly positive when lo == 0
        return self.lo + (self.hi - self.lo) * (1.0 - rng.random(size))


SpacingDistribution = Exponential | Uniform


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Configuration:
    """Ordered initial particles. ``index[k]`` is the label of the particle at
    ``position[k]``; labels are consecutive integers."""

    index: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    interval: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        idx = _frozen(np.asarray(self.index, dtype=np.int64))
        pos = _frozen(np.asarray(self.position, dtype=np.float64))
        vel = _frozen(np.asarray(self.velocity, dtype=np.int8))
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "velocity", vel)
        if not (idx.shape == pos.shape == vel.shape) or idx.ndim != 1:
            raise ValueError("index, position and velocity must be 1-d of equal length")
        if len(idx) and np.any(np.diff(idx) != 1):
            raise ValueError("indices must be consecutive")
        if len(pos) > 1 and not np.all(np.diff(pos) > 0):
            raise ValueError("positions must be strictly increasing")
        if not np.all(np.isin(vel, (-1, 0, 1))):
            raise ValueError("velocities must be -1, 0 or +1")
        lo, hi = self.interval
        if len(pos) and not (lo < pos[0] and pos[-1] < hi):
            raise ValueError("positions must lie inside the interval")

    @classmethod
    def from_particles(
        cls, particles: Iterable[tuple[float, int]], first_index: int = 1
    ) -> "Configuration":
        """Build from ``(position, velocity)`` pairs listed left to right."""
        particles = list(particles)
        pos = [float(p) for p, _ in particles]
        vel = [int(v) for _, v in particles]
        idx = np.arange(first_index, first_index + len(pos))
        return cls(idx, pos, vel)

    def __len__(self) -> int:
        return len(self.index)

    def row(self, k: int) -> int:
        """Array row holding particle ``k``."""
        r = k - int(self.index[0])
        if not (0 <= r < len(self)):
            raise KeyError(k)
        return r

    def restrict(self, lo_index: int, hi_index: int) -> "Configuration":
        """Particles with labels in ``[lo_index, hi_index]``."""
        r0, r1 = self.row(lo_index), self.row(hi_index)
        if r1 < r0:
            raise ValueError("empty restriction")
        sl = slice(r0, r1 + 1)
        return Configuration(
            self.index[sl], self.position[sl], self.velocity[sl], self.interval
        )


def sample_velocities(p: float, n: int, rng: np.random.Generator) -> np.ndarray:
    return velocities_from_uniforms(rng.random(n), float(p))


def sample_configuration(
    params: ModelParams,
    n: int,
    spacing: SpacingDistribution | None = None,
    rng: np.random.Generator | None = None,
) -> Configuration:
    """One-sided configuration ``x_1 < ... < x_n`` on ``(0, inf)`` with ``x_0 = 0``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    spacing = spacing or Exponential()
    rng = rng if rng is not None else np.random.default_rng()
    pos = np.cumsum(spacing.sample(rng, n))
    vel = sample_velocities(params.p, n, rng)
    return Configuration(np.arange(1, n + 1), pos, vel, (0.0, math.inf))


def sample_two_sided(
    params: ModelParams,
    n: int,
    spacing: SpacingDistribution | None = None,
    rng: np.random.Generator | None = None,
    center: Velocity | None = Velocity.STILL,
) -> Configuration:
    """Particles ``x_{-n} .. x_n`` with ``x_0 = 0``; the type at the origin is
    forced to ``center`` unless ``center`` is None."""
    if n < 1:
        raise ValueError("n must be >= 1")
    spacing = spacing or Exponential()
    rng = rng if rng is not None else np.random.default_rng()
    right = np.cumsum(spacing.sample(rng, n))
    left = -np.cumsum(spacing.sample(rng, n))[::-1]
    pos = np.concatenate([left, [0.0], right])
    vel = sample_velocities(params.p, 2 * n + 1, rng)
    if center is not None:
        vel[n] = center
    return Configuration(np.arange(-n, n + 1), pos, vel)


def outcome_from_uniform(u, a: float, b: float):
    """Map uniforms to arrow-arrow outcomes with probabilities (a/2, a/2, b, c)."""
    u = np.asarray(u)
    out = np.full(u.shape, Outcome.ANNIHILATE, dtype=np.int8)
    out[u < a + b] = Outcome.MAKE_BLOCKADE
    out[u < a] = Outcome.SURVIVE_RIGHT
    out[u < a / 2.0] = Outcome.SURVIVE_LEFT
    return out


@dataclass(frozen=True)
class ReactionTape:
    """Pre-sampled reaction randomness keyed by particle label.

    ``quiver[r]`` is the number of blockades the arrow labelled ``index[r]``
    may destroy; ``queue[r, :queue_len[r]]`` is the ordered list of outcomes
    for the arrow-arrow collisions that particle meets while moving left.
    Entries exist for every label, whatever its velocity.
    """

    index: np.ndarray
    quiver: np.ndarray
    queue: np.ndarray
    queue_len: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "index", _frozen(np.asarray(self.index, dtype=np.int64)))
        object.__setattr__(self, "quiver", _frozen(np.asarray(self.quiver, dtype=np.int64)))
        q = np.asarray(self.queue, dtype=np.int8)
        if q.ndim == 1:
            q = q.reshape(len(self.index), -1)
        object.__setattr__(self, "queue", _frozen(q))
        object.__setattr__(
            self, "queue_len", _frozen(np.asarray(self.queue_len, dtype=np.int64))
        )
        m = len(self.index)
        if self.quiver.shape != (m,) or self.queue.shape[0] != m or self.queue_len.shape != (m,):
            raise ValueError("tape arrays disagree in length")
        if m and np.any(np.diff(self.index) != 1):
            raise ValueError("tape indices must be consecutive")
        if np.any(self.quiver < 1):
            raise ValueError("quiver sizes must be >= 1")
        if np.any(self.queue_len > self.queue.shape[1]):
            raise ValueError("queue_len exceeds queue width")

    @classmethod
    def from_entries(
        cls,
        index: Sequence[int],
        quiver: Sequence[int] | None = None,
        queues: Sequence[Sequence[int]] | None = None,
    ) -> "ReactionTape":
        """Hand-built tape; missing quivers default to 1 and queues to empty."""
        m = len(index)
        quiver = [1] * m if quiver is None else list(quiver)
        queues = [[] for _ in range(m)] if queues is None else [list(q) for q in queues]
        width = max([len(q) for q in queues] + [1])
        arr = np.zeros((m, width), dtype=np.int8)
        for r, q in enumerate(queues):
            arr[r, : len(q)] = q
        return cls(index, quiver, arr, [len(q) for q in queues])

    def __len__(self) -> int:
        return len(self.index)

    def _row(self, k: int) -> int:
        r = k - int(self.index[0])
        if not (0 <= r < len(self)):
            raise KeyError(k)
        return r

    def quiver_of(self, k: int) -> int:
        return int(self.quiver[self._row(k)])

    def queue_of(self, k: int) -> list[Outcome]:
        r = self._row(k)
        return [Outcome(int(v)) for v in self.queue[r, : self.queue_len[r]]]

    def covers(self, lo_index: int, hi_index: int) -> bool:
        return len(self) > 0 and self.index[0] <= lo_index and hi_index <= self.index[-1]

    def restrict(self, lo_index: int, hi_index: int) -> "ReactionTape":
        r0, r1 = self._row(lo_index), self._row(hi_index)
        sl = slice(r0, r1 + 1)
        return ReactionTape(self.index[sl], self.quiver[sl], self.queue[sl], self.queue_len[sl])


def sample_tape_arrays(
    m: int, params: ModelParams, max_queue: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Quiver sizes then instruction queues for ``m`` consecutive labels."""
    quiver = rng.geometric(1.0 - params.x, size=m)
    queue = outcome_from_uniform(rng.random((m, max_queue)), params.a, params.b)
    return quiver, queue


def sample_tape(
    config: Configuration,
    params: ModelParams,
    max_queue: int = DEFAULT_MAX_QUEUE,
    rng: np.random.Generator | None = None,
) -> ReactionTape:
    if max_queue < 1:
        raise ValueError("max_queue must be >= 1")
    m = len(config)
    rng = rng if rng is not None else np.random.default_rng()
    quiver, queue = sample_tape_arrays(m, params, max_queue, rng)
    return ReactionTape(config.index, quiver, queue, np.full(m, max_queue))


PURPOSES = {"config": 0, "tape": 1, "lazy": 2, "params": 3, "split": 4}


@dataclass(frozen=True)
class RngContract:
    """Deterministic substreams keyed by ``(master_seed, trial, purpose)``.

    Each stream is an independent PCG64 generator seeded through
    ``SeedSequence(master_seed, spawn_key=(purpose, trial))``, so draws never
    depend on execution order or on how trials are split between workers.
    """

    master_seed: int = 0
    _codes: dict = field(default_factory=lambda: dict(PURPOSES), repr=False, compare=False)

    def stream(self, trial: int, purpose: str) -> np.random.Generator:
        code = self._codes[purpose]
        ss = np.random.SeedSequence(self.master_seed % 2**64, spawn_key=(code, int(trial)))
        return np.random.Generator(np.random.PCG64(ss))
