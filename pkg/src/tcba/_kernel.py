"""Compiled collision resolution.

Live particles form a doubly linked list ordered by position. Only adjacent
pairs can meet next, so each adjacent approaching pair gets one candidate in a
binary min-heap of (time, left id, right id). Candidates are validated lazily
on pop: a pair is current iff both particles are alive and still neighbours.
Trajectories never change (survivors keep their velocity), so nothing else can
go stale.

Probe crossings use the same heap with ``right id == -1``. Only the live
particles immediately left and right of the probe can cross it next, so at
most two crossing candidates are pending. Crossings sort before collisions
at the same instant, so an arrow dying on a blockade at the probe still counts
as a visit.
"""

import numpy as np
from numba import njit

OK = 0
TIE = 1
QUEUE_EXHAUSTED = 2
POOL_EXHAUSTED = 3

MODE_TAPE = 0
MODE_LAZY = 1

ARROW_ARROW = 0
ARROW_BLOCKADE = 1

ANNIHILATE = 0
SURVIVE_LEFT = 1
SURVIVE_RIGHT = 2
MAKE_BLOCKADE = 3

TIE_TOL = 1e-12

# summary columns of batch_one_sided
S_STATUS = 0
S_VISITED = 1
S_SHARP = 2
S_VEL1 = 3
S_FATE1 = 4
S_KILLS1 = 5
S_NCOLS = 6

# fates of the first particle when it is a right arrow
F_ALIVE = 0
F_ANNIHILATE_L = 1
F_KILLED_BY_L = 2
F_HAT_L = 3
F_ANNIHILATE_B = 4
F_ANNIHILATE_HAT = 5
F_OTHER = 6


@njit(cache=True)
def _meet(x0, vel, i, j):
    """Meeting time and place of left particle ``i`` and right particle ``j``."""
    vi = vel[i]
    vj = vel[j]
    if vi <= vj:
        return np.inf, 0.0
    t = (x0[j] - x0[i]) / (vi - vj)
    if vi == 0:
        loc = x0[i]
    elif vj == 0:
        loc = x0[j]
    else:
        loc = 0.5 * (x0[i] + x0[j])
    return t, loc


@njit(cache=True)
def _tie_less(ht, ha, hb, x0, vel, i, j):
    """Order of heap slots with equal times: crossings first, then by place."""
    ci = hb[i] >= 0
    cj = hb[j] >= 0
    if ci != cj:
        return cj
    if ci:
        li = _meet(x0, vel, ha[i], hb[i])[1]
        lj = _meet(x0, vel, ha[j], hb[j])[1]
        if li != lj:
            return li < lj
    return ha[i] < ha[j]


@njit(cache=True)
def _add_pair(x0, vel, pt, pa, pb, npend, i, j):
    if i < 0 or j < 0:
        return npend
    t = _meet(x0, vel, i, j)[0]
    if t == np.inf:
        return npend
    pt[npend] = t
    pa[npend] = i
    pb[npend] = j
    return npend + 1


@njit(cache=True)
def _add_cross(x0, vel, pt, pa, pb, npend, k, probe, moving):
    """Queue the probe crossing of ``k`` if it moves in direction ``moving``."""
    if k < 0 or vel[k] != moving:
        return npend
    pt[npend] = abs(x0[k] - probe)
    pa[npend] = k
    pb[npend] = -1
    return npend + 1


@njit(cache=True)
def _conflicts(x0, vel, i, j, t, loc):
    ti, li = _meet(x0, vel, i, j)
    return ti != np.inf and abs(ti - t) <= TIE_TOL and abs(li - loc) <= TIE_TOL


@njit(cache=True)
def resolve(
    x0_in, vel_in, sigma, queue, queue_len, mode, pool, a, b, x,
    probe, has_probe, stop_on_visit, watch,
):
    """Resolve every collision of the configuration ``(x0_in, vel_in)``.

    Tape mode reads arrow-blockade decisions from ``sigma`` (quiver sizes)
    and arrow-arrow outcomes from the left-moving participant's row of
    ``queue``. Lazy mode draws one value from ``pool`` per decision.
    ``stop_on_visit`` stops after the first probe crossing and ``watch >= 0``
    once that particle dies; with both set the run stops when both happened.
    """
    n = x0_in.shape[0]
    cap = n + n // 2 + 2
    x0 = np.empty(cap, np.float64)
    vel = np.zeros(cap, np.int8)
    x0[:n] = x0_in
    vel[:n] = vel_in
    alive = np.zeros(cap, np.bool_)
    alive[:n] = True
    prv = np.empty(cap, np.int64)
    nxt = np.empty(cap, np.int64)
    for i in range(n):
        prv[i] = i - 1
        nxt[i] = i + 1
    nxt[n - 1] = -1

    hits = np.zeros(n, np.int64)
    survived = np.zeros(n, np.int64)
    pending = np.full(n, -1, np.int8)
    qpos = np.zeros(n, np.int64)
    upos = 0
    a_half = 0.5 * a

    ev_t = np.empty(n, np.float64)
    ev_loc = np.empty(n, np.float64)
    ev_kind = np.empty(n, np.int8)
    ev_l = np.empty(n, np.int64)
    ev_r = np.empty(n, np.int64)
    ev_out = np.empty(n, np.int8)
    ev_gen = np.empty(n, np.int64)
    nev = 0

    vis_t = np.empty(n, np.float64)
    vis_id = np.empty(n, np.int64)
    vis_sharp = np.empty(n, np.bool_)
    nvis = 0

    # pair pushes: < n initially, <= 2 per collision; crossings: <= 2 per event
    hcap = 7 * n + 8
    ht = np.empty(hcap, np.float64)
    ha = np.empty(hcap, np.int64)
    hb = np.empty(hcap, np.int64)
    # pending pushes, flushed into the heap at the top of each step
    pt = np.empty(8, np.float64)
    pa = np.empty(8, np.int64)
    pb = np.empty(8, np.int64)
    npend = 0

    hsize = 0
    for i in range(n - 1):
        hsize = _add_pair(x0, vel, ht, ha, hb, hsize, i, i + 1)
    # bottom-up heapify
    for start in range(hsize // 2 - 1, -1, -1):
        k = start
        while True:
            lc = 2 * k + 1
            if lc >= hsize:
                break
            best = lc
            rc = lc + 1
            if rc < hsize and (
                ht[rc] < ht[lc] or (ht[rc] == ht[lc] and _tie_less(ht, ha, hb, x0, vel, rc, lc))
            ):
                best = rc
            if ht[best] < ht[k] or (
                ht[best] == ht[k] and _tie_less(ht, ha, hb, x0, vel, best, k)
            ):
                ht[k], ht[best] = ht[best], ht[k]
                ha[k], ha[best] = ha[best], ha[k]
                hb[k], hb[best] = hb[best], hb[k]
                k = best
            else:
                break

    # live neighbours of the probe
    gl = -1
    gr = -1
    if has_probe:
        gr = 0
        while gr < n and x0[gr] <= probe:
            gr += 1
        gl = gr - 1
        if gr == n:
            gr = -1
        npend = _add_cross(x0, vel, pt, pa, pb, npend, gl, probe, 1)
        npend = _add_cross(x0, vel, pt, pa, pb, npend, gr, probe, -1)

    m = n
    status = OK
    complete = True
    while True:
        # heap operations are written out here: calls passing these arrays
        # are far slower than the loops themselves
        for c in range(npend):
            k = hsize
            ht[k] = pt[c]
            ha[k] = pa[c]
            hb[k] = pb[c]
            hsize += 1
            while k > 0:
                par = (k - 1) >> 1
                if ht[k] < ht[par] or (
                    ht[k] == ht[par] and _tie_less(ht, ha, hb, x0, vel, k, par)
                ):
                    ht[k], ht[par] = ht[par], ht[k]
                    ha[k], ha[par] = ha[par], ha[k]
                    hb[k], hb[par] = hb[par], hb[k]
                    k = par
                else:
                    break
        npend = 0
        if hsize == 0:
            break
        t = ht[0]
        i = ha[0]
        j = hb[0]
        hsize -= 1
        ht[0] = ht[hsize]
        ha[0] = ha[hsize]
        hb[0] = hb[hsize]
        k = 0
        while True:
            lc = 2 * k + 1
            if lc >= hsize:
                break
            best = lc
            rc = lc + 1
            if rc < hsize and (
                ht[rc] < ht[lc] or (ht[rc] == ht[lc] and _tie_less(ht, ha, hb, x0, vel, rc, lc))
            ):
                best = rc
            if ht[best] < ht[k] or (
                ht[best] == ht[k] and _tie_less(ht, ha, hb, x0, vel, best, k)
            ):
                ht[k], ht[best] = ht[best], ht[k]
                ha[k], ha[best] = ha[best], ha[k]
                hb[k], hb[best] = hb[best], hb[k]
                k = best
            else:
                break

        if j < 0:
            if not alive[i] or (i != gr and i != gl):
                continue
            if mode == MODE_TAPE:
                sharp = sigma[i] - hits[i] >= 2
            else:
                if pending[i] < 0:
                    if upos >= pool.shape[0]:
                        status = POOL_EXHAUSTED
                        break
                    if pool[upos] < x:
                        pending[i] = 1
                        survived[i] += 1
                    else:
                        pending[i] = 0
                    upos += 1
                sharp = pending[i] == 1
            vis_t[nvis] = t
            vis_id[nvis] = i
            vis_sharp[nvis] = sharp
            nvis += 1
            if stop_on_visit and (watch < 0 or not alive[watch]):
                complete = False
                break
            if vel[i] == -1:
                gl = i
                gr = nxt[i]
                npend = _add_cross(x0, vel, pt, pa, pb, npend, gr, probe, -1)
            else:
                gr = i
                gl = prv[i]
                npend = _add_cross(x0, vel, pt, pa, pb, npend, gl, probe, 1)
            continue

        if not (alive[i] and alive[j] and nxt[i] == j):
            continue
        loc = _meet(x0, vel, i, j)[1]
        left = prv[i]
        right = nxt[j]
        if (left >= 0 and _conflicts(x0, vel, left, i, t, loc)) or (
            right >= 0 and _conflicts(x0, vel, j, right, t, loc)
        ):
            status = TIE
            break

        gen = -1
        if vel[i] == 1 and vel[j] == -1:
            kind_ev = ARROW_ARROW
            if mode == MODE_TAPE:
                if qpos[j] >= queue_len[j]:
                    status = QUEUE_EXHAUSTED
                    break
                out = queue[j, qpos[j]]
            else:
                if upos >= pool.shape[0]:
                    status = POOL_EXHAUSTED
                    break
                u = pool[upos]
                upos += 1
                if u < a_half:
                    out = SURVIVE_LEFT
                elif u < a:
                    out = SURVIVE_RIGHT
                elif u < a + b:
                    out = MAKE_BLOCKADE
                else:
                    out = ANNIHILATE
            qpos[j] += 1
            if out == SURVIVE_LEFT:
                alive[i] = False
            elif out == SURVIVE_RIGHT:
                alive[j] = False
            else:
                alive[i] = False
                alive[j] = False
                if out == MAKE_BLOCKADE:
                    gen = m
                    m += 1
                    x0[gen] = loc
                    vel[gen] = 0
                    alive[gen] = True
        else:
            kind_ev = ARROW_BLOCKADE
            arrow = i if vel[i] != 0 else j
            blockade = j if arrow == i else i
            if mode == MODE_TAPE:
                keep = sigma[arrow] - hits[arrow] >= 2
            else:
                if pending[arrow] >= 0:
                    keep = pending[arrow] == 1
                    pending[arrow] = -1
                else:
                    if upos >= pool.shape[0]:
                        status = POOL_EXHAUSTED
                        break
                    keep = pool[upos] < x
                    upos += 1
                    if keep:
                        survived[arrow] += 1
            hits[arrow] += 1
            alive[blockade] = False
            if keep:
                out = SURVIVE_RIGHT if vel[arrow] == 1 else SURVIVE_LEFT
            else:
                out = ANNIHILATE
                alive[arrow] = False

        ev_t[nev] = t
        ev_loc[nev] = loc
        ev_kind[nev] = kind_ev
        ev_l[nev] = i
        ev_r[nev] = j
        ev_out[nev] = out
        ev_gen[nev] = gen
        nev += 1

        if gen >= 0:
            prv[gen] = left
            nxt[gen] = right
            if left >= 0:
                nxt[left] = gen
            if right >= 0:
                prv[right] = gen
            npend = _add_pair(x0, vel, pt, pa, pb, npend, left, gen)
            npend = _add_pair(x0, vel, pt, pa, pb, npend, gen, right)
        elif not alive[i] and not alive[j]:
            if left >= 0:
                nxt[left] = right
            if right >= 0:
                prv[right] = left
            npend = _add_pair(x0, vel, pt, pa, pb, npend, left, right)
        elif not alive[i]:
            prv[j] = left
            if left >= 0:
                nxt[left] = j
            npend = _add_pair(x0, vel, pt, pa, pb, npend, left, j)
        else:
            nxt[i] = right
            if right >= 0:
                prv[right] = i
            npend = _add_pair(x0, vel, pt, pa, pb, npend, i, right)

        if has_probe:
            # participants all sit at loc, on one side of the probe
            if loc < probe:
                if gl == j and not alive[j]:
                    gl = gen if gen >= 0 else (i if alive[i] else left)
                    npend = _add_cross(x0, vel, pt, pa, pb, npend, gl, probe, 1)
            elif gr == i and not alive[i]:
                gr = gen if gen >= 0 else (j if alive[j] else right)
                npend = _add_cross(x0, vel, pt, pa, pb, npend, gr, probe, -1)

        if watch >= 0 and not alive[watch] and (nvis > 0 or not stop_on_visit):
            complete = False
            break

    if mode == MODE_TAPE:
        sigma_used = sigma[:n].copy()
    else:
        sigma_used = survived + 1
    return (
        status, complete, m,
        ev_t[:nev], ev_loc[:nev], ev_kind[:nev], ev_l[:nev], ev_r[:nev], ev_out[:nev], ev_gen[:nev],
        vis_t[:nvis], vis_id[:nvis], vis_sharp[:nvis],
        alive[:m].copy(), x0[:m].copy(), vel[:m].copy(), hits, sigma_used, qpos,
    )


@njit(cache=True)
def _first_fate(n_orig, ev_kind, ev_l, ev_r, ev_out):
    """Fate code of right-moving particle 0 and how many left arrows it
    destroyed while surviving."""
    kills = 0
    for e in range(ev_kind.shape[0]):
        i = ev_l[e]
        j = ev_r[e]
        if i != 0:
            continue
        o = ev_out[e]
        if ev_kind[e] == ARROW_ARROW:
            if o == SURVIVE_RIGHT:
                kills += 1
            elif o == SURVIVE_LEFT:
                return F_KILLED_BY_L, kills
            elif o == MAKE_BLOCKADE:
                return F_HAT_L, kills
            else:
                return F_ANNIHILATE_L, kills
        elif o == ANNIHILATE:
            if j < n_orig:
                return F_ANNIHILATE_B, kills
            return F_ANNIHILATE_HAT, kills
    return F_ALIVE, kills


@njit(cache=True, nogil=True)
def batch_one_sided(pos, vel, pool, a, b, x, stop_on_visit, watch):
    """Lazy-mode runs of one-sided configurations with the probe at 0."""
    trials, n = pos.shape
    out = np.zeros((trials, S_NCOLS), np.int64)
    dummy_sigma = np.ones(1, np.int64)
    dummy_queue = np.zeros((1, 1), np.int8)
    dummy_qlen = np.zeros(1, np.int64)
    for tr in range(trials):
        res = resolve(
            pos[tr], vel[tr], dummy_sigma, dummy_queue, dummy_qlen, MODE_LAZY, pool[tr],
            a, b, x, 0.0, True, stop_on_visit, watch,
        )
        out[tr, S_STATUS] = res[0]
        vis_sharp = res[12]
        out[tr, S_VISITED] = 1 if vis_sharp.shape[0] > 0 else 0
        out[tr, S_SHARP] = 1 if (vis_sharp.shape[0] > 0 and vis_sharp[0]) else 0
        out[tr, S_VEL1] = vel[tr, 0]
        if vel[tr, 0] == 1:
            fate, kills = _first_fate(n, res[5], res[6], res[7], res[8])
            out[tr, S_FATE1] = fate
            out[tr, S_KILLS1] = kills
        else:
            out[tr, S_FATE1] = F_OTHER
    return out


@njit(cache=True, nogil=True)
def batch_watch(pos, vel, pool, a, b, x, watch):
    """Lazy-mode runs; returns (status, watched particle survived) per trial."""
    trials = pos.shape[0]
    out = np.zeros((trials, 2), np.int64)
    dummy_sigma = np.ones(1, np.int64)
    dummy_queue = np.zeros((1, 1), np.int8)
    dummy_qlen = np.zeros(1, np.int64)
    for tr in range(trials):
        res = resolve(
            pos[tr], vel[tr], dummy_sigma, dummy_queue, dummy_qlen, MODE_LAZY, pool[tr],
            a, b, x, 0.0, False, False, watch,
        )
        out[tr, 0] = res[0]
        out[tr, 1] = 1 if res[13][watch] else 0
    return out


@njit(cache=True)
def block_count(x0, vel, sigma, queue, queue_len):
    """(status, B, A) for a tape-backed run of the given particles."""
    n = x0.shape[0]
    res = resolve(
        x0, vel, sigma, queue, queue_len, MODE_TAPE, np.empty(0), 0.0, 0.0, 0.0,
        0.0, False, False, -1,
    )
    alive = res[13]
    hits = res[16]
    nb = 0
    na = 0
    for k in range(n):
        if alive[k]:
            if vel[k] == 0:
                nb += 1
            else:
                na += sigma[k] - hits[k]
    return res[0], nb, na


@njit(cache=True)
def prefix_block_counts(x0, vel, sigma, queue, queue_len, kmax):
    """N(1, k) for k = 1..kmax on a shared tape; status is the worst seen."""
    out = np.zeros(kmax, np.int64)
    worst = OK
    for k in range(1, kmax + 1):
        st, nb, na = block_count(x0[:k], vel[:k], sigma[:k], queue[:k], queue_len[:k])
        if st != OK:
            worst = st
        out[k - 1] = nb - na
    return worst, out


@njit(cache=True)
def prefix_visits(x0, vel, sigma, queue, queue_len, kmax):
    """Probe-0 visit indicator of the one-sided run on the first k particles."""
    out = np.zeros(kmax, np.bool_)
    worst = OK
    for k in range(1, kmax + 1):
        res = resolve(
            x0[:k], vel[:k], sigma[:k], queue[:k], queue_len[:k], MODE_TAPE, np.empty(0),
            0.0, 0.0, 0.0, 0.0, True, True, -1,
        )
        if res[0] != OK:
            worst = res[0]
        out[k - 1] = res[10].shape[0] > 0
    return worst, out


@njit(cache=True, nogil=True)
def batch_tape_visits(pos, vel, sigma, queue, queue_len):
    """Tape-mode one-sided runs; (status, visited, sharp) per trial."""
    trials = pos.shape[0]
    out = np.zeros((trials, 3), np.int64)
    pool = np.empty(0)
    for tr in range(trials):
        res = resolve(
            pos[tr], vel[tr], sigma[tr], queue[tr], queue_len[tr], MODE_TAPE, pool,
            0.0, 0.0, 0.0, 0.0, True, True, -1,
        )
        out[tr, 0] = res[0]
        if res[12].shape[0] > 0:
            out[tr, 1] = 1
            out[tr, 2] = 1 if res[12][0] else 0
    return out


@njit(cache=True, nogil=True)
def batch_block_counts(pos, vel, sigma, queue, queue_len):
    """(status, B, A) of full tape-mode runs, one row per trial."""
    trials = pos.shape[0]
    out = np.zeros((trials, 3), np.int64)
    for tr in range(trials):
        st, nb, na = block_count(pos[tr], vel[tr], sigma[tr], queue[tr], queue_len[tr])
        out[tr, 0] = st
        out[tr, 1] = nb
        out[tr, 2] = na
    return out


@njit(cache=True, nogil=True)
def velocities_from_uniforms(u, p):
    """Still below ``p``, Left below ``p + (1 - p)/2``, Right otherwise."""
    flat = u.ravel()
    out = np.empty(flat.shape[0], np.int8)
    t_left = p + (1.0 - p) / 2.0
    for k in range(flat.shape[0]):
        if flat[k] < p:
            out[k] = 0
        elif flat[k] < t_left:
            out[k] = -1
        else:
            out[k] = 1
    return out.reshape(u.shape)
