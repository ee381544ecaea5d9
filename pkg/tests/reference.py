"""Slow, obviously-correct simulator used as an oracle for the event engine.

Every step scans all adjacent live pairs for the earliest meeting, so a run
costs O(n^2). Randomness is drawn per collision from ``random.Random``.
"""

from __future__ import annotations

import random

R, S, L = 1, 0, -1  # right arrow, blockade, left arrow


def _meet(p, q):
    # time for p (left) and q (right) to meet, None if they never do
    dv = p[1] - q[1]
    if dv <= 0:
        return None
    return (q[0] - p[0]) / dv


def simulate(positions, velocities, a, b, x, rng: random.Random):
    """Resolve a configuration; returns ``(survivors, events)``.

    ``survivors`` is a list of (position at t=0 or creation, velocity) of the
    survivors, ``events`` the list of (time, loc, left_vel, right_vel, outcome).
    Outcomes: 'A' annihilate, 'SL' the left-mover survives, 'SR' the
    right-mover survives, 'B' both die and a blockade appears, 'X' the arrow
    passes the blockade, 'K' both die at a blockade.
    """
    # particle: [pos at time 0 (virtual), vel]
    parts = [[float(p), int(v)] for p, v in zip(positions, velocities)]
    events = []
    now = 0.0
    while True:
        best = None
        for i in range(len(parts) - 1):
            t = _meet(parts[i], parts[i + 1])
            if t is not None and t >= now - 1e-12 and (best is None or t < best[0]):
                best = (t, i)
        if best is None:
            break
        t, i = best
        now = t
        lp, rp = parts[i], parts[i + 1]
        loc = lp[0] + lp[1] * t
        lv, rv = lp[1], rp[1]
        if lv == R and rv == L:
            u = rng.random()
            if u < a / 2:
                out, keep = "SR", [lp]
            elif u < a:
                out, keep = "SL", [rp]
            elif u < a + b:
                out, keep = "B", [[loc, S]]
            else:
                out, keep = "A", []
        else:
            arrow = lp if lv != S else rp
            if rng.random() < x:
                out, keep = "X", [arrow]
            else:
                out, keep = "K", []
        events.append((t, loc, lv, rv, out))
        parts[i:i + 2] = keep
    return [(p[0], p[1]) for p in parts], events


def visited(positions, velocities, a, b, x, rng) -> bool:
    """One-sided process on (0, inf): 0 is reached iff a left arrow survives."""
    survivors, _ = simulate(positions, velocities, a, b, x, rng)
    return any(v == L for _, v in survivors)


def simulate_tape(positions, velocities, labels, quiver, queues):
    """Same dynamics with outcomes read from a tape.

    ``quiver[label]`` counts the arrow itself, so an arrow survives a blockade
    iff at least two remain before the hit. ``queues[label]`` lists the
    arrow-arrow outcomes (as ``Outcome`` ints) for the left-mover ``label``.
    Returns ``(survivors, events)`` with survivors as (label, vel, remaining).
    Generated blockades get labels ``('g', k)``.
    """
    from tcba.core import Outcome

    parts = [[float(p), int(v), lab] for p, v, lab in zip(positions, velocities, labels)]
    left = {lab: int(quiver[lab]) for lab in labels}
    qpos = {lab: 0 for lab in labels}
    events = []
    now = 0.0
    gen = 0
    while True:
        best = None
        for i in range(len(parts) - 1):
            t = _meet(parts[i], parts[i + 1])
            if t is not None and t >= now - 1e-12 and (best is None or t < best[0]):
                best = (t, i)
        if best is None:
            break
        t, i = best
        now = t
        lp, rp = parts[i], parts[i + 1]
        loc = lp[0] + lp[1] * t
        if lp[1] == R and rp[1] == L:
            q = queues[rp[2]]
            out = Outcome(q[qpos[rp[2]]])
            qpos[rp[2]] += 1
            if out == Outcome.SURVIVE_LEFT:
                keep = [rp]
            elif out == Outcome.SURVIVE_RIGHT:
                keep = [lp]
            elif out == Outcome.MAKE_BLOCKADE:
                keep = [[loc, S, ("g", gen)]]
                gen += 1
            else:
                keep = []
            events.append((t, loc, lp[2], rp[2], out))
        else:
            arrow = lp if lp[1] != S else rp
            if left[arrow[2]] >= 2:
                left[arrow[2]] -= 1
                keep = [arrow]
                out = Outcome.SURVIVE_RIGHT if arrow[1] == R else Outcome.SURVIVE_LEFT
            else:
                keep = []
                out = Outcome.ANNIHILATE
            events.append((t, loc, lp[2], rp[2], out))
        parts[i:i + 2] = keep
    surv = [(p[2], p[1], left.get(p[2], 0) if p[1] != S else 0) for p in parts]
    return surv, events
