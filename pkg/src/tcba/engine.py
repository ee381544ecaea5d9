"""Exact event-driven resolution of a finite configuration."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from . import _kernel as K
from .core import Configuration, ModelParams, Outcome, ReactionTape, Velocity


class TieError(RuntimeError):
    """Two collisions coincide in time and place (a triple collision)."""


class QueueExhausted(RuntimeError):
    """A left arrow met more right arrows than its tape queue holds."""


class EventKind(enum.IntEnum):
    ARROW_ARROW = K.ARROW_ARROW
    ARROW_BLOCKADE = K.ARROW_BLOCKADE


class VisitClass(enum.Enum):
    SHARP = "sharp"
    BLUNT = "blunt"
    NONE = "none"


_KIND_NAMES = {EventKind.ARROW_ARROW: "ArrowArrow", EventKind.ARROW_BLOCKADE: "ArrowBlockade"}
_OUTCOME_NAMES = {
    Outcome.ANNIHILATE: "Annihilate",
    Outcome.SURVIVE_LEFT: "SurviveLeft",
    Outcome.SURVIVE_RIGHT: "SurviveRight",
    Outcome.MAKE_BLOCKADE: "MakeBlockade",
}


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    location: float
    kind: EventKind
    left: int
    right: int
    outcome: Outcome
    generated: int | None = None

    def casualties(self) -> tuple[int, ...]:
        # a surviving left-mover always sits on the right of the pair, and vice versa
        if self.outcome == Outcome.SURVIVE_LEFT:
            return (self.left,)
        if self.outcome == Outcome.SURVIVE_RIGHT:
            return (self.right,)
        return (self.left, self.right)

    def to_json(self) -> str:
        return json.dumps(
            {
                "t": self.time,
                "loc": self.location,
                "kind": _KIND_NAMES[self.kind],
                "left_id": self.left,
                "right_id": self.right,
                "outcome": _OUTCOME_NAMES[self.outcome],
                "generated_id": self.generated,
            }
        )


@dataclass(frozen=True)
class Survivor:
    particle: int
    velocity: Velocity
    quiver: int


@dataclass(frozen=True)
class ProbeVisit:
    time: float
    particle: int
    sharp: bool


@dataclass(frozen=True)
class CollisionLog:
    """Everything that happened in one run.

    ``quiver_sizes`` holds, per original particle, the quiver size the run
    was resolved with (read from the tape, or the smallest size consistent
    with the lazy draws). ``complete`` is False for runs stopped early by the
    batch estimators.
    """

    events: tuple[CollisionEvent, ...]
    survivors: tuple[Survivor, ...]
    probe_visits: tuple[ProbeVisit, ...]
    labels: tuple[int, ...]
    generated: tuple[int, ...]
    quiver_sizes: tuple[int, ...]
    complete: bool = True

    @property
    def first_visit_sharp(self) -> bool | None:
        return self.probe_visits[0].sharp if self.probe_visits else None

    def dump_jsonl(self, fh: IO[str]) -> None:
        for ev in self.events:
            fh.write(ev.to_json())
            fh.write("\n")


@dataclass
class Lazy:
    """Outcomes drawn while the run proceeds, one uniform per decision."""

    rng: np.random.Generator


@dataclass(frozen=True)
class Tape:
    """Outcomes read from a pre-sampled :class:`ReactionTape`."""

    tape: ReactionTape


RandomnessBackend = Lazy | Tape

_EMPTY_F = np.empty(0, np.float64)
_ONE_I = np.ones(1, np.int64)
_EMPTY_Q = np.zeros((1, 1), np.int8)
_ZERO_I = np.zeros(1, np.int64)


def lazy_pool_size(n: int) -> int:
    # at most one draw per collision (< n) and one per arrow crossing the probe
    return 2 * n + 2


def raise_for_status(status: int) -> None:
    if status == K.TIE:
        raise TieError("simultaneous collisions at the same location")
    if status == K.QUEUE_EXHAUSTED:
        raise QueueExhausted("arrow-arrow instruction queue exhausted")
    if status == K.POOL_EXHAUSTED:
        raise RuntimeError("lazy draw pool exhausted")


def _tape_arrays(config: Configuration, tape: ReactionTape):
    lo, hi = int(config.index[0]), int(config.index[-1])
    if not tape.covers(lo, hi):
        raise ValueError(f"tape does not cover indices {lo}..{hi}")
    sub = tape.restrict(lo, hi)
    return sub.quiver, sub.queue, sub.queue_len


def run(
    config: Configuration,
    params: ModelParams,
    backend: RandomnessBackend,
    probe: float | None = None,
) -> CollisionLog:
    """Resolve all collisions of ``config`` in time order.

    With a probe, every arrow trajectory crossing it is recorded, including an
    arrow that dies on a blockade sitting exactly at the probe.
    """
    n = len(config)
    if n == 0:
        raise ValueError("empty configuration")
    if probe is not None:
        hit = config.position == probe
        if np.any(hit & (config.velocity != 0)):
            raise ValueError("probe coincides with an arrow")
    if isinstance(backend, Tape):
        sigma, queue, qlen = _tape_arrays(config, backend.tape)
        mode, pool = K.MODE_TAPE, _EMPTY_F
    elif isinstance(backend, Lazy):
        sigma, queue, qlen = _ONE_I, _EMPTY_Q, _ZERO_I
        mode, pool = K.MODE_LAZY, backend.rng.random(lazy_pool_size(n))
    else:
        raise TypeError(f"unknown backend {backend!r}")

    res = K.resolve(
        config.position, config.velocity, sigma, queue, qlen, mode, pool,
        params.a, params.b, params.x,
        0.0 if probe is None else float(probe), probe is not None, False, -1,
    )
    raise_for_status(res[0])
    return _build_log(config, res)


def _build_log(config: Configuration, res) -> CollisionLog:
    (_, complete, m, ev_t, ev_loc, ev_kind, ev_l, ev_r, ev_out, ev_gen,
     vis_t, vis_id, vis_sharp, alive, _x0, vel, hits, sigma_used, _qpos) = res
    n = len(config)
    # generated blockades get fresh labels above the configuration's last one
    labels = np.concatenate([config.index, config.index[-1] + 1 + np.arange(m - n)])
    events = tuple(
        CollisionEvent(
            float(ev_t[e]), float(ev_loc[e]), EventKind(int(ev_kind[e])),
            int(labels[ev_l[e]]), int(labels[ev_r[e]]), Outcome(int(ev_out[e])),
            None if ev_gen[e] < 0 else int(labels[ev_gen[e]]),
        )
        for e in range(len(ev_t))
    )
    survivors = []
    for k in np.flatnonzero(alive):
        q = int(sigma_used[k] - hits[k]) if (k < n and vel[k] != 0) else 0
        survivors.append(Survivor(int(labels[k]), Velocity(int(vel[k])), q))
    visits = tuple(
        ProbeVisit(float(vis_t[v]), int(labels[vis_id[v]]), bool(vis_sharp[v]))
        for v in range(len(vis_t))
    )
    return CollisionLog(
        events, tuple(survivors), visits,
        tuple(int(v) for v in labels), tuple(int(v) for v in labels[n:]),
        tuple(int(s) for s in sigma_used), bool(complete),
    )


def run_restricted(
    config: Configuration,
    params: ModelParams,
    tape: ReactionTape,
    lo_index: int,
    hi_index: int,
    probe: float | None = None,
) -> CollisionLog:
    """Run only the particles labelled ``lo_index..hi_index`` on the shared tape."""
    if not tape.covers(lo_index, hi_index):
        raise ValueError("tape does not cover the requested indices")
    return run(config.restrict(lo_index, hi_index), params, Tape(tape), probe)


def classify_first_visit(log: CollisionLog) -> VisitClass:
    """Sharp if the first arrow across the probe would survive its next
    blockade, blunt if it would be annihilated by it."""
    if not log.probe_visits:
        return VisitClass.NONE
    return VisitClass.SHARP if log.probe_visits[0].sharp else VisitClass.BLUNT


def record_tape(config: Configuration, log: CollisionLog) -> ReactionTape:
    """Tape that makes a tape-backed rerun reproduce ``log`` exactly."""
    n = len(config)
    first = int(config.index[0])
    queues: list[list[int]] = [[] for _ in range(n)]
    for ev in log.events:
        if ev.kind == EventKind.ARROW_ARROW:
            queues[ev.right - first].append(int(ev.outcome))
    return ReactionTape.from_entries(config.index, log.quiver_sizes, queues)


def casualties(log: CollisionLog) -> list[int]:
    dead: list[int] = []
    for ev in log.events:
        dead.extend(ev.casualties())
    return dead


def write_jsonl(events: Iterable[CollisionEvent], fh: IO[str]) -> None:
    for ev in events:
        fh.write(ev.to_json())
        fh.write("\n")
