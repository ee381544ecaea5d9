"""Monte Carlo estimators with standard errors and truncation bookkeeping.

Trial ``t`` of every estimator draws its configuration from
``RngContract(seed).stream(t, "config")`` exactly as :func:`sample_configuration`
would, and its lazy reaction draws from ``stream(t, "lazy")`` exactly as
:class:`engine.Lazy` would. Any single trial can therefore be replayed through
the engine, and results do not depend on chunking or thread count.
"""

from __future__ import annotations

import enum
import logging
import math
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernel as K
from .core import (
    DEFAULT_MAX_QUEUE,
    Configuration,
    Exponential,
    ModelParams,
    ReactionTape,
    RngContract,
    SpacingDistribution,
    Velocity,
    sample_tape_arrays,
)
from .engine import lazy_pool_size, run_restricted

log = logging.getLogger(__name__)

DISCARD_CAP = 1e-4
CHUNK = 256
CSV_HEADER = ("estimand", "a", "b", "x", "p", "n", "trials", "value", "stderr", "bias")


class Bias(str, enum.Enum):
    LOWER = "LowerBound"
    UPPER = "UpperBound"
    UNKNOWN = "Unknown"


class TooManyDiscards(RuntimeError):
    pass


def fmt(v) -> str:
    """Fixed six-significant-digit rendering used by every CSV writer."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    trials: int
    truncation_n: int
    bias: Bias = Bias.UNKNOWN
    discarded: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("an estimate needs at least one trial")

    def within(self, target: float, sigmas: float = 4.0, floor: float = 0.0) -> bool:
        return abs(self.value - target) <= max(floor, sigmas * self.stderr)

    def csv_row(self, estimand: str, params: ModelParams) -> list[str]:
        return [
            estimand, fmt(params.a), fmt(params.b), fmt(params.x), fmt(params.p),
            str(self.truncation_n), str(self.trials), fmt(self.value), fmt(self.stderr),
            self.bias.value,
        ]


def bernoulli(hits: int, trials: int, n: int, bias: Bias = Bias.UNKNOWN, discarded: int = 0) -> Estimate:
    if trials < 1:
        raise ValueError("an estimate needs at least one trial")
    v = hits / trials
    return Estimate(v, math.sqrt(v * (1 - v) / trials), trials, n, bias, discarded)


def sample_mean(values: np.ndarray, n: int, bias: Bias = Bias.UNKNOWN, discarded: int = 0) -> Estimate:
    values = np.asarray(values, dtype=np.float64)
    t = len(values)
    return Estimate(float(values.mean()), float(values.std() / math.sqrt(t)), t, n, bias, discarded)


# ---------------------------------------------------------------- batching


def _ranges(trials: int, chunk: int = CHUNK):
    return [(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]


def _map(fn: Callable, trials: int, threads: int = 1) -> np.ndarray:
    """Apply ``fn(lo, hi)`` over trial chunks and stack the results in trial order."""
    ranges = _ranges(trials)
    if threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda r: fn(*r), ranges))
    else:
        parts = [fn(lo, hi) for lo, hi in ranges]
    return np.concatenate(parts, axis=0)


def _screen(status: np.ndarray, what: str) -> tuple[np.ndarray, int]:
    """Mask of usable trials; failed trials are logged and capped."""
    bad = status != K.OK
    nbad = int(bad.sum())
    if nbad:
        codes = {int(c): int((status == c).sum()) for c in np.unique(status[bad])}
        log.warning("%s: discarded %d of %d trials (status counts %s)", what, nbad, len(status), codes)
        if nbad > DISCARD_CAP * len(status):
            raise TooManyDiscards(f"{what}: {nbad} of {len(status)} trials failed")
    return ~bad, nbad


def one_sided_inputs(params: ModelParams, n: int, spacing, contract: RngContract, lo: int, hi: int):
    """Positions, velocities and lazy pools of trials ``lo..hi-1``."""
    rows = hi - lo
    gaps = np.empty((rows, n))
    u = np.empty((rows, n))
    pool = np.empty((rows, lazy_pool_size(n)))
    for r in range(rows):
        g = contract.stream(lo + r, "config")
        gaps[r] = spacing.sample(g, n)
        u[r] = g.random(n)
        pool[r] = contract.stream(lo + r, "lazy").random(pool.shape[1])
    return np.cumsum(gaps, axis=1), K.velocities_from_uniforms(u, params.p), pool


def _tape_inputs(params: ModelParams, n: int, spacing, contract: RngContract, lo: int, hi: int, max_queue: int):
    rows = hi - lo
    gaps = np.empty((rows, n))
    u = np.empty((rows, n))
    sigma = np.empty((rows, n), np.int64)
    queue = np.empty((rows, n, max_queue), np.int8)
    for r in range(rows):
        g = contract.stream(lo + r, "config")
        gaps[r] = spacing.sample(g, n)
        u[r] = g.random(n)
        sigma[r], queue[r] = sample_tape_arrays(n, params, max_queue, contract.stream(lo + r, "tape"))
    qlen = np.full((rows, n), max_queue, np.int64)
    return np.cumsum(gaps, axis=1), K.velocities_from_uniforms(u, params.p), sigma, queue, qlen


_MODES = {"visit": (True, -1), "fate": (True, 0), "full": (False, -1)}


def one_sided_summary(
    params: ModelParams,
    n: int,
    trials: int,
    spacing: SpacingDistribution | None = None,
    seed: int = 0,
    mode: str = "visit",
    threads: int = 1,
) -> tuple[np.ndarray, int]:
    """Per-trial summary rows (columns ``K.S_*``) of lazy one-sided runs.

    ``mode`` picks how far each run is resolved: up to the first visit of 0
    ("visit"), until both the first visit and the death of the first particle
    are known ("fate"), or completely ("full").
    """
    if n < 1 or trials < 1:
        raise ValueError("need n >= 1 and trials >= 1")
    stop, watch = _MODES[mode]
    spacing = spacing or Exponential()
    contract = RngContract(seed)

    def chunk(lo, hi):
        pos, vel, pool = one_sided_inputs(params, n, spacing, contract, lo, hi)
        return K.batch_one_sided(pos, vel, pool, params.a, params.b, params.x, stop, watch)

    out = _map(chunk, trials, threads)
    ok, nbad = _screen(out[:, K.S_STATUS], "one-sided runs")
    return out[ok], nbad


def estimate_q(
    params: ModelParams,
    n: int,
    trials: int,
    spacing: SpacingDistribution | None = None,
    seed: int = 0,
    backend: str = "lazy",
    max_queue: int = DEFAULT_MAX_QUEUE,
    threads: int = 1,
) -> Estimate:
    """Fraction of one-sided runs on ``x_1..x_n`` whose probe 0 gets visited."""
    if backend == "lazy":
        summary, nbad = one_sided_summary(params, n, trials, spacing, seed, "visit", threads)
        visited = summary[:, K.S_VISITED]
    elif backend == "tape":
        visited, nbad = _tape_visits(params, n, trials, spacing, seed, max_queue, threads)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return bernoulli(int(visited.sum()), len(visited), n, Bias.LOWER, nbad)


def _tape_visits(params, n, trials, spacing, seed, max_queue, threads):
    spacing = spacing or Exponential()
    contract = RngContract(seed)

    def chunk(lo, hi):
        return K.batch_tape_visits(*_tape_inputs(params, n, spacing, contract, lo, hi, max_queue))

    out = _map(chunk, trials, threads)
    ok, nbad = _screen(out[:, 0], "tape runs")
    return out[ok, 1], nbad


def estimate_theta(
    params: ModelParams,
    n: int,
    trials: int,
    spacing: SpacingDistribution | None = None,
    seed: int = 0,
    threads: int = 1,
) -> Estimate:
    """Survival frequency of a blockade forced at the origin, ``n`` particles per side."""
    if n < 1 or trials < 1:
        raise ValueError("need n >= 1 and trials >= 1")
    spacing = spacing or Exponential()
    contract = RngContract(seed)
    m = 2 * n + 1

    def chunk(lo, hi):
        rows = hi - lo
        pos = np.empty((rows, m))
        u = np.empty((rows, m))
        pool = np.empty((rows, lazy_pool_size(m)))
        for r in range(rows):
            # same draw order as core.sample_two_sided
            g = contract.stream(lo + r, "config")
            pos[r, n + 1:] = np.cumsum(spacing.sample(g, n))
            pos[r, :n] = -np.cumsum(spacing.sample(g, n))[::-1]
            u[r] = g.random(m)
            pool[r] = contract.stream(lo + r, "lazy").random(pool.shape[1])
        pos[:, n] = 0.0
        vel = K.velocities_from_uniforms(u, params.p)
        vel[:, n] = Velocity.STILL
        return K.batch_watch(pos, vel, pool, params.a, params.b, params.x, n)

    out = _map(chunk, trials, threads)
    ok, nbad = _screen(out[:, 0], "two-sided runs")
    survived = out[ok, 1]
    return bernoulli(int(survived.sum()), len(survived), n, Bias.UPPER, nbad)


# ------------------------------------------------------- collision fates


class CollisionProbs(Mapping):
    """Per-trial samples of the first particle's fate and the probe visit.

    Keys (all unconditional, i.e. joint with the first particle's type):

    - ``q``, ``sharp``: probe visited; first visit by an arrow that would
      survive its next blockade
    - ``visit_left``, ``visit_blockade``, ``visit_right``: visit and type of particle 1
    - ``rml``: particle 1 is a right arrow annihilated together with a left arrow
    - ``lkr``: particle 1 is a right arrow destroyed by a left arrow that survives
    - ``rkl``: expected number of left arrows destroyed by a surviving right arrow 1
    - ``p_hat``: right arrow 1 and a left arrow produce a blockade
    - ``s``, ``r``: right arrow 1 dies on a blockade (original or generated),
      with and without a visit to 0
    - ``right_alive``: right arrow 1 outlives the truncated run
    """

    def __init__(self, params: ModelParams, n: int, samples: dict[str, np.ndarray], discarded: int = 0):
        self.params = params
        self.n = n
        self.samples = {k: np.asarray(v, dtype=np.float64) for k, v in samples.items()}
        self.discarded = discarded
        self.trials = len(next(iter(self.samples.values())))
        self.means = {k: float(v.mean()) for k, v in self.samples.items()}

    def __getitem__(self, key: str) -> Estimate:
        bias = Bias.LOWER if key == "q" else Bias.UNKNOWN
        return sample_mean(self.samples[key], self.n, bias, self.discarded)

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)

    def delta(self, fun: Callable[[dict], float], keys: Sequence[str], h: float = 1e-6) -> tuple[float, float]:
        """Value of ``fun(means)`` and its first-order standard error.

        The gradient is taken numerically; the variance comes from the
        per-trial linearisation, so correlations between keys measured on the
        same trials are accounted for.
        """
        base = dict(self.means)
        value = fun(base)
        lin = np.zeros(self.trials)
        for k in keys:
            up, dn = dict(base), dict(base)
            up[k] += h
            dn[k] -= h
            lin += (fun(up) - fun(dn)) / (2 * h) * self.samples[k]
        return value, float(lin.std() / math.sqrt(self.trials))


def collision_samples(summary: np.ndarray) -> dict[str, np.ndarray]:
    vis = summary[:, K.S_VISITED] == 1
    vel1 = summary[:, K.S_VEL1]
    fate = summary[:, K.S_FATE1]
    right = vel1 == 1
    on_blockade = right & ((fate == K.F_ANNIHILATE_B) | (fate == K.F_ANNIHILATE_HAT))
    return {
        "q": vis,
        "sharp": summary[:, K.S_SHARP] == 1,
        "visit_left": vis & (vel1 == -1),
        "visit_blockade": vis & (vel1 == 0),
        "visit_right": vis & right,
        "rml": right & (fate == K.F_ANNIHILATE_L),
        "lkr": right & (fate == K.F_KILLED_BY_L),
        "rkl": np.where(right, summary[:, K.S_KILLS1], 0),
        "p_hat": right & (fate == K.F_HAT_L),
        "s": vis & on_blockade,
        "r": ~vis & on_blockade,
        "right_alive": right & (fate == K.F_ALIVE),
    }


def estimate_collision_probs(
    params: ModelParams,
    n: int,
    trials: int,
    spacing: SpacingDistribution | None = None,
    seed: int = 0,
    threads: int = 1,
) -> CollisionProbs:
    summary, nbad = one_sided_summary(params, n, trials, spacing, seed, "fate", threads)
    return CollisionProbs(params, n, collision_samples(summary), nbad)


# ---------------------------------------------------------- block counts


@dataclass(frozen=True)
class BlockCounts:
    B: int
    A: int

    @property
    def N(self) -> int:
        return self.B - self.A


def block_counts(config: Configuration, params: ModelParams, tape: ReactionTape, j: int, k: int) -> BlockCounts:
    """Surviving original blockades and sharp arrows of the run restricted to ``j..k``."""
    log_ = run_restricted(config, params, tape, j, k)
    generated = set(log_.generated)
    B = sum(1 for s in log_.survivors if s.velocity == Velocity.STILL and s.particle not in generated)
    A = sum(s.quiver for s in log_.survivors if s.velocity != Velocity.STILL)
    return BlockCounts(B, A)


def estimate_EN(
    params: ModelParams,
    k: int,
    trials: int,
    spacing: SpacingDistribution | None = None,
    seed: int = 0,
    max_queue: int = DEFAULT_MAX_QUEUE,
    threads: int = 1,
) -> Estimate:
    """Sample mean of ``N(1, k)`` on tape-backed runs."""
    if k < 1 or trials < 1:
        raise ValueError("need k >= 1 and trials >= 1")
    spacing = spacing or Exponential()
    contract = RngContract(seed)

    def chunk(lo, hi):
        return K.batch_block_counts(*_tape_inputs(params, k, spacing, contract, lo, hi, max_queue))

    out = _map(chunk, trials, threads)
    ok, nbad = _screen(out[:, 0], "block counts")
    return sample_mean(out[ok, 1] - out[ok, 2], k, Bias.UNKNOWN, nbad)


def en_curve(
    params: ModelParams,
    kmax: int,
    trials: int,
    spacing: SpacingDistribution | None = None,
    seed: int = 0,
    max_queue: int = DEFAULT_MAX_QUEUE,
) -> list[Estimate]:
    """Estimates of ``E N_k`` for ``k = 1..kmax`` from shared prefixes of each trial."""
    spacing = spacing or Exponential()
    contract = RngContract(seed)
    vals = np.empty((trials, kmax), np.int64)
    status = np.zeros(trials, np.int64)
    for lo, hi in _ranges(trials):
        pos, vel, sigma, queue, qlen = _tape_inputs(params, kmax, spacing, contract, lo, hi, max_queue)
        for r in range(hi - lo):
            status[lo + r], vals[lo + r] = K.prefix_block_counts(pos[r], vel[r], sigma[r], queue[r], qlen[r], kmax)
    ok, nbad = _screen(status, "prefix block counts")
    return [sample_mean(vals[ok, k], k + 1, Bias.UNKNOWN, nbad) for k in range(kmax)]


def coupled_visits(
    params: ModelParams,
    kmax: int,
    trials: int,
    spacing: SpacingDistribution | None = None,
    seed: int = 0,
    max_queue: int = DEFAULT_MAX_QUEUE,
) -> np.ndarray:
    """Visit indicators of the runs on ``x_1..x_k``, ``k = 1..kmax``, on one shared tape per trial."""
    spacing = spacing or Exponential()
    contract = RngContract(seed)
    out = np.zeros((trials, kmax), bool)
    status = np.zeros(trials, np.int64)
    for lo, hi in _ranges(trials):
        pos, vel, sigma, queue, qlen = _tape_inputs(params, kmax, spacing, contract, lo, hi, max_queue)
        for r in range(hi - lo):
            status[lo + r], out[lo + r] = K.prefix_visits(pos[r], vel[r], sigma[r], queue[r], qlen[r], kmax)
    ok, _ = _screen(status, "coupled visits")
    return out[ok]
