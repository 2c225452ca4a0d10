"""Compiled inner loop of the annealing chain.

All grids are flat arrays over the working window.  ``src[k]`` is the cell
of slot ``k`` and ``sink[k]`` its private target; ``owner`` inverts ``sink``.
The boundary cells of E are kept in ``blist[:nb]`` with positions ``bpos``.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def pair_cost(a, b, strides, p):
    s = 0.0
    for k in range(strides.shape[0]):
        qa = a // strides[k]
        a -= qa * strides[k]
        qb = b // strides[k]
        b -= qb * strides[k]
        t = qa - qb
        s += t * t
    if p == 2.0:
        return s
    if p == 1.0:
        return math.sqrt(s)
    return s ** (0.5 * p)


@njit(cache=True)
def nearest_free(f, occ, owner, off_flat, off_cost):
    for o in range(off_flat.shape[0]):
        g = f + off_flat[o]
        if occ[g] == 0 and owner[g] < 0:
            return g, off_cost[o]
    return -1, 0.0


@njit(cache=True)
def _is_boundary(f, occ, nbr):
    for s in nbr:
        if occ[f + s] == 0:
            return True
    return False


@njit(cache=True)
def _occupied_neighbors(f, occ, nbr):
    c = 0
    for s in nbr:
        c += occ[f + s]
    return c


@njit(cache=True)
def _refresh(f, occ, nbr, bpos, blist, nb):
    want = occ[f] == 1 and _is_boundary(f, occ, nbr)
    if want and bpos[f] < 0:
        bpos[f] = nb
        blist[nb] = f
        nb += 1
    elif not want and bpos[f] >= 0:
        i = bpos[f]
        last = blist[nb - 1]
        blist[i] = last
        bpos[last] = i
        bpos[f] = -1
        nb -= 1
    return nb


@njit(cache=True)
def _near_border(f, strides, shape, pad):
    for k in range(strides.shape[0]):
        q = f // strides[k]
        f -= q * strides[k]
        if q < pad or q >= shape[k] - pad:
            return True
    return False


@njit(cache=True)
def run_block(n_moves, temp, teleport_prob, swaps_only, rng,
              occ, slot_at, owner, src, sink, bpos, blist, state,
              strides, shape, nbr, off_flat, off_cost, center, tele_r, pad,
              hd1, wscale, p):
    """Run up to ``n_moves`` Metropolis moves.

    ``state`` holds ``[faces, cost, nb]``.  Returns ``(moves_done, accepted,
    grow)``; ``grow`` is set when an accepted cell lands within ``pad`` of
    the window border, in which case the block stops early.
    """
    d = strides.shape[0]
    faces = state[0]
    cost = state[1]
    nb = int(state[2])
    two_d = nbr.shape[0]
    cand = np.empty(two_d, dtype=np.int64)
    x_cell = np.empty(d)
    inv_p = 1.0 / p
    current = faces * hd1 + (wscale * max(cost, 0.0)) ** inv_p
    accepted = 0
    done = 0
    grow = False
    while done < n_moves:
        done += 1
        new = current
        b = blist[rng.integers(0, nb)]
        a = -1
        if swaps_only or rng.random() >= teleport_prob:
            c = blist[rng.integers(0, nb)]
            m = 0
            for s in nbr:
                if occ[c + s] == 0:
                    cand[m] = c + s
                    m += 1
            if m > 0:
                a = cand[rng.integers(0, m)]
        else:
            for _ in range(64):
                r2 = 0.0
                for k in range(d):
                    x_cell[k] = rng.uniform(-tele_r, tele_r)
                    r2 += x_cell[k] * x_cell[k]
                if r2 > tele_r * tele_r:
                    continue
                f = 0
                ok = True
                for k in range(d):
                    q = int(math.floor(center[k] + x_cell[k] + 0.5))
                    if q < pad or q >= shape[k] - pad:
                        ok = False
                        break
                    f += q * strides[k]
                if ok and occ[f] == 0:
                    a = f
                    break
        if a < 0:
            continue

        # tentative move b -> a
        k = slot_at[b]
        dfaces = 2 * _occupied_neighbors(b, occ, nbr) - two_d
        sk = sink[k]
        dcost = -pair_cost(b, sk, strides, p)
        owner[sk] = -1
        occ[b] = 0
        slot_at[b] = -1
        dfaces += two_d - 2 * _occupied_neighbors(a, occ, nbr)
        x = owner[a]
        occ[a] = 1
        src[k] = a
        slot_at[a] = k
        gx = -1
        failed = False
        if x >= 0:
            dcost -= pair_cost(src[x], a, strides, p)
            owner[a] = -1
            gx, cx = nearest_free(src[x], occ, owner, off_flat, off_cost)
            if gx < 0:
                failed = True
            else:
                sink[x] = gx
                owner[gx] = x
                dcost += cx
        gk = -1
        if not failed:
            gk, ck = nearest_free(a, occ, owner, off_flat, off_cost)
            if gk < 0:
                failed = True
            else:
                sink[k] = gk
                owner[gk] = k
                dcost += ck

        take = False
        if not failed:
            new = (faces + dfaces) * hd1 + (wscale * max(cost + dcost, 0.0)) ** inv_p
            delta = new - current
            if delta <= 0.0:
                take = True
            elif temp > 0.0 and rng.random() < math.exp(-delta / temp):
                take = True
        if take:
            faces += dfaces
            cost += dcost
            current = new
            accepted += 1
            nb = _refresh(b, occ, nbr, bpos, blist, nb)
            nb = _refresh(a, occ, nbr, bpos, blist, nb)
            for s in nbr:
                nb = _refresh(b + s, occ, nbr, bpos, blist, nb)
                nb = _refresh(a + s, occ, nbr, bpos, blist, nb)
            if _near_border(a, strides, shape, pad):
                grow = True
                break
        else:
            if gk >= 0:
                owner[gk] = -1
            occ[a] = 0
            slot_at[a] = -1
            occ[b] = 1
            slot_at[b] = k
            src[k] = b
            if x >= 0:
                if gx >= 0:
                    owner[gx] = -1
                sink[x] = a
                owner[a] = x
            sink[k] = sk
            owner[sk] = k
    state[0] = faces
    state[1] = cost
    state[2] = nb
    return done, accepted, grow
