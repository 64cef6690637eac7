"""Compiled level-set expansion.

Positions are packed into rows of ``uint64`` words (one bit per valid cell,
in :attr:`Board.ordered_cells` order).  A game row holds the blue words then
the red words.  Each level is generated into an open-addressing hash table,
then sealed into a lexicographically sorted array, so level contents and order
never depend on generation order.

Row order matches ``board.position_key``: blue words from most to least
significant, then red words likewise.
"""

from __future__ import annotations

import logging
import os
import tempfile
import threading
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .board import Board, Position, RuleSet, mirror, reflect_x_minus_y
from .errors import ResourceLimitError
from .metrics import distance

log = logging.getLogger(__name__)

_GIB = 1 << 30
DEFAULT_MEMORY_CAP = 8 * _GIB
SATURATED = np.uint64(np.iinfo(np.uint64).max)


def default_memory_cap() -> int:
    """8 GiB, capped at 3/4 of physical memory; ``HALMA_MEMORY_CAP`` overrides."""
    env = os.environ.get("HALMA_MEMORY_CAP")
    if env:
        return parse_size(env)
    try:
        phys = os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES")
    except (ValueError, OSError, AttributeError):
        return DEFAULT_MEMORY_CAP
    return min(DEFAULT_MEMORY_CAP, phys * 3 // 4)


def parse_size(text: str) -> int:
    text = str(text).strip().upper()
    mult = 1
    for suffix, m in (("GIB", _GIB), ("G", _GIB), ("MIB", 1 << 20), ("M", 1 << 20),
                      ("KIB", 1 << 10), ("K", 1 << 10)):
        if text.endswith(suffix):
            text, mult = text[: -len(suffix)], m
            break
    return int(float(text) * mult)


def default_threads() -> int:
    """``HALMA_THREADS`` if set, else 1."""
    env = os.environ.get("HALMA_THREADS")
    return max(1, int(env)) if env else 1


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True, inline="always")
def _bit(i):
    return np.uint64(1) << np.uint64(i & 63)


@njit(cache=True, nogil=True)
def _hash(key, kw):
    h = np.uint64(0x9E3779B97F4A7C15)
    for w in range(kw):
        h ^= key[w]
        h *= np.uint64(0xBF58476D1CE4E5B9)
        h ^= h >> np.uint64(29)
    h *= np.uint64(0x94D049BB133111EB)
    h ^= h >> np.uint64(32)
    return h


@njit(cache=True, nogil=True)
def _insert(hkeys, hused, key, kw):
    """Return (slot, is_new)."""
    mask = hkeys.shape[0] - 1
    s = np.int64(_hash(key, kw) & np.uint64(mask))
    while True:
        if hused[s] == 0:
            hused[s] = 1
            for w in range(kw):
                hkeys[s, w] = key[w]
            return s, True
        same = True
        for w in range(kw):
            if hkeys[s, w] != key[w]:
                same = False
                break
        if same:
            return s, False
        s = (s + 1) & mask


@njit(cache=True, nogil=True)
def _less(a, b, nw, kw):
    """Row order: each army block compared from its most significant word."""
    for base in range(0, kw, nw):
        for w in range(nw - 1, -1, -1):
            x = a[base + w]
            y = b[base + w]
            if x != y:
                return x < y
    return False


@njit(cache=True, nogil=True)
def _permute_row(row, out, perm, nw, kw):
    for w in range(kw):
        out[w] = np.uint64(0)
    for base in range(0, kw, nw):
        for w in range(nw):
            word = row[base + w]
            b = 0
            while word != 0:
                if word & np.uint64(1):
                    c = perm[w * 64 + b]
                    out[base + (c >> 6)] |= _bit(c)
                word >>= np.uint64(1)
                b += 1


@njit(cache=True, nogil=True)
def _unpack(row, base, nw, men):
    s = 0
    for w in range(nw):
        word = row[base + w]
        b = 0
        while word != 0:
            if word & np.uint64(1):
                men[s] = w * 64 + b
                s += 1
            word >>= np.uint64(1)
            b += 1
    return s


@njit(cache=True, nogil=True)
def _dests(o, occ, nbr, land, jumps_only, visited, stamp, queue, out):
    """Destinations of the man on ``o``: steps first, then chain endpoints."""
    D = nbr.shape[1]
    k = 0
    if not jumps_only:
        for d in range(D):
            t = nbr[o, d]
            if t >= 0 and occ[t] == 0:
                out[k] = t
                k += 1
    occ[o] = 0
    visited[o] = stamp
    queue[0] = o
    head = 0
    tail = 1
    while head < tail:
        c = queue[head]
        head += 1
        for d in range(D):
            mid = nbr[c, d]
            if mid < 0 or occ[mid] == 0:
                continue
            t = land[c, d]
            if t < 0 or occ[t] != 0 or visited[t] == stamp:
                continue
            visited[t] = stamp
            queue[tail] = t
            tail += 1
            out[k] = t
            k += 1
    occ[o] = 1
    return k


@njit(cache=True, nogil=True)
def _expand_transfer(frontier, start, nw, nbr, land, cent, use_canon, cperm, jumps_only,
                     mcc, thresh, remaining, ell, sym_on, sym_min, mperm,
                     hkeys, hused, fill, max_fill, stats):
    F = frontier.shape[0]
    n = nbr.shape[0]
    occ = np.zeros(n, np.uint8)
    men = np.empty(n, np.int32)
    dests = np.empty(n, np.int32)
    visited = np.zeros(n, np.int64)
    queue = np.empty(n, np.int32)
    key = np.empty(nw, np.uint64)
    pkey = np.empty(nw, np.uint64)
    alt = np.empty(nw, np.uint64)
    stamp = 0
    i = start
    while i < F and fill < max_fill:
        row = frontier[i]
        s = _unpack(row, 0, nw, men)
        ctot = 0
        for q in range(s):
            occ[men[q]] = 1
            ctot += cent[men[q]]
        if use_canon:
            _permute_row(row, pkey, cperm, nw, nw)
        for j in range(s):
            o = men[j]
            omax = -(1 << 30)
            omin = 1 << 30
            for q in range(s):
                if q != j:
                    c = cent[men[q]]
                    if c > omax:
                        omax = c
                    if c < omin:
                        omin = c
            stamp += 1
            k = _dests(o, occ, nbr, land, jumps_only, visited, stamp, queue, dests)
            for t in range(k):
                d = dests[t]
                stats[0] += 1
                c2 = ctot - cent[o] + cent[d]
                if mcc:
                    hi = omax if omax > cent[d] else cent[d]
                    lo = omin if omin < cent[d] else cent[d]
                    delta = hi - lo + ell
                    if c2 + remaining * delta + ell * remaining * (remaining - 1) // 2 < thresh:
                        stats[1] += 1
                        continue
                if sym_on:
                    occ[o] = 0
                    occ[d] = 1
                    sy = 0
                    for q in range(s):
                        m = d if q == j else men[q]
                        if occ[mperm[m]] != 0:
                            sy += 1
                    occ[d] = 0
                    occ[o] = 1
                    if sy < sym_min:
                        stats[2] += 1
                        continue
                for w in range(nw):
                    key[w] = row[w]
                key[o >> 6] ^= _bit(o)
                key[d >> 6] ^= _bit(d)
                if use_canon:
                    for w in range(nw):
                        alt[w] = pkey[w]
                    po = cperm[o]
                    pd = cperm[d]
                    alt[po >> 6] ^= _bit(po)
                    alt[pd >> 6] ^= _bit(pd)
                    if _less(alt, key, nw, nw):
                        for w in range(nw):
                            key[w] = alt[w]
                slot, new = _insert(hkeys, hused, key, nw)
                if new:
                    fill += 1
        for q in range(s):
            occ[men[q]] = 0
        i += 1
    return i, fill


@njit(cache=True, nogil=True)
def _lookup(hkeys, hused, key, kw):
    mask = hkeys.shape[0] - 1
    s = np.int64(_hash(key, kw) & np.uint64(mask))
    while hused[s] != 0:
        same = True
        for w in range(kw):
            if hkeys[s, w] != key[w]:
                same = False
                break
        if same:
            return s
        s = (s + 1) & mask
    return -1


@njit(cache=True, nogil=True)
def _side_summary(xs, sx, ys, sy, mover, dist, dbase, inbase, mdist):
    """Men of ``mover`` outside its target base, the same for the opponent, and the
    opponent's distance to its target base; fills ``mdist`` with army distances."""
    big = 1 << 30
    opp = 1 - mover
    out_x = 0
    for q in range(sx):
        c = xs[q]
        if inbase[mover, c] == 0:
            out_x += 1
        best = big
        for r in range(sy):
            v = dist[c, ys[r]]
            if v < best:
                best = v
        mdist[q] = best
    out_y = 0
    ybase = big
    for r in range(sy):
        c = ys[r]
        if inbase[opp, c] == 0:
            out_y += 1
        if dbase[opp, c] < ybase:
            ybase = dbase[opp, c]
    return out_x, out_y, ybase


@njit(cache=True, nogil=True)
def _others(j, sx, xs, mdist, dbase, mover):
    big = 1 << 30
    other_d = big
    other_b = big
    for q in range(sx):
        if q != j:
            if mdist[q] < other_d:
                other_d = mdist[q]
            v = dbase[mover, xs[q]]
            if v < other_b:
                other_b = v
    return other_d, other_b


@njit(cache=True, nogil=True)
def _game_h(d, sy, ys, mover, other_d, other_b, ybase, out2, out_y, dist, dbase):
    """Remaining bound after a man of ``mover`` lands on ``d``."""
    dxy = other_d
    for r in range(sy):
        v = dist[d, ys[r]]
        if v < dxy:
            dxy = v
    dx = dxy
    if other_b < dx:
        dx = other_b
    if dbase[mover, d] < dx:
        dx = dbase[mover, d]
    dy = dxy if dxy < ybase else ybase
    hx = (dx - 2 if dx > 2 else 0) + 2 * out2 - 1
    hy = (dy - 2 if dy > 2 else 0) + 2 * out_y - 1
    return hx if hx < hy else hy


@njit(cache=True, nogil=True)
def _viable(key, mover, level, max_len, nw, nbr, land, dist, dbase, inbase,
            occ, xs, ys, dests, visited, queue, mdist, stamp):
    """Does ``mover`` have a move from ``key`` that wins or survives the bound at ``level``?"""
    opp = 1 - mover
    sx = _unpack(key, mover * nw, nw, xs)
    sy = _unpack(key, opp * nw, nw, ys)
    for q in range(sx):
        occ[xs[q]] = 1
    for q in range(sy):
        occ[ys[q]] = 1
    out_x, out_y, ybase = _side_summary(xs, sx, ys, sy, mover, dist, dbase, inbase, mdist)
    ok = False
    for j in range(sx):
        o = xs[j]
        other_d, other_b = _others(j, sx, xs, mdist, dbase, mover)
        stamp += 1
        k = _dests(o, occ, nbr, land, False, visited, stamp, queue, dests)
        for t in range(k):
            d = dests[t]
            out2 = out_x - (1 - inbase[mover, o]) + (1 - inbase[mover, d])
            if out2 == 0:
                ok = level <= max_len
            else:
                h = _game_h(d, sy, ys, mover, other_d, other_b, ybase, out2, out_y, dist, dbase)
                ok = level + h <= max_len
            if ok:
                break
        if ok:
            break
    for q in range(sx):
        occ[xs[q]] = 0
    for q in range(sy):
        occ[ys[q]] = 0
    return ok, stamp


@njit(cache=True, nogil=True)
def _expand_game(frontier, counts, start, nw, nbr, land, cent, use_canon, cperm,
                 dist, dbase, inbase, mover, level_next, max_len, prune,
                 jumps_only, p4_need, p5_on, kmin, kmax, look,
                 hkeys, hused, hval, fill, max_fill, stats):
    """Expand game rows where army ``mover`` (0 blue, 1 red) moves.

    ``dbase[a, c]`` is the distance from cell ``c`` to the base army ``a`` must
    fill and ``inbase[a, c]`` flags membership of that base.  With ``look`` a
    new non-winning successor is kept only if the opponent has a reply that
    wins or survives the bound one level further on.
    """
    F = frontier.shape[0]
    n = nbr.shape[0]
    kw = 2 * nw
    opp = 1 - mover
    occ = np.zeros(n, np.uint8)
    xs = np.empty(n, np.int32)
    ys = np.empty(n, np.int32)
    dests = np.empty(n, np.int32)
    visited = np.zeros(n, np.int64)
    queue = np.empty(n, np.int32)
    mdist = np.empty(n, np.int32)
    key = np.empty(kw, np.uint64)
    pkey = np.empty(kw, np.uint64)
    alt = np.empty(kw, np.uint64)
    occ2 = np.zeros(n, np.uint8)
    xs2 = np.empty(n, np.int32)
    ys2 = np.empty(n, np.int32)
    dests2 = np.empty(n, np.int32)
    visited2 = np.zeros(n, np.int64)
    queue2 = np.empty(n, np.int32)
    mdist2 = np.empty(n, np.int32)
    stamp2 = 0
    stamp = 0
    i = start
    while i < F and fill < max_fill:
        row = frontier[i]
        pc = counts[i]
        sx = _unpack(row, mover * nw, nw, xs)
        sy = _unpack(row, opp * nw, nw, ys)
        for q in range(sx):
            occ[xs[q]] = 1
        for q in range(sy):
            occ[ys[q]] = 1
        if use_canon:
            _permute_row(row, pkey, cperm, nw, kw)
        out_x, out_y, ybase = _side_summary(xs, sx, ys, sy, mover, dist, dbase, inbase, mdist)
        for j in range(sx):
            o = xs[j]
            other_d, other_b = _others(j, sx, xs, mdist, dbase, mover)
            stamp += 1
            k = _dests(o, occ, nbr, land, jumps_only, visited, stamp, queue, dests)
            for t in range(k):
                d = dests[t]
                stats[0] += 1
                out2 = out_x - (1 - inbase[mover, o]) + (1 - inbase[mover, d])
                if out2 > 0:
                    if prune:
                        h = _game_h(d, sy, ys, mover, other_d, other_b, ybase, out2,
                                    out_y, dist, dbase)
                        if level_next + h > max_len:
                            stats[1] += 1
                            continue
                    if p4_need > 0 and sx - out2 < p4_need:
                        stats[2] += 1
                        continue
                    if p5_on:
                        seen = np.uint64(0)
                        for q in range(sx):
                            c = d if q == j else xs[q]
                            kk = cent[c] - kmin
                            if kk >= 0 and cent[c] <= kmax:
                                seen |= _bit(kk)
                        for r in range(sy):
                            kk = cent[ys[r]] - kmin
                            if kk >= 0 and cent[ys[r]] <= kmax:
                                seen |= _bit(kk)
                        full = (np.uint64(1) << np.uint64(kmax - kmin + 1)) - np.uint64(1)
                        if seen != full:
                            stats[2] += 1
                            continue
                for w in range(kw):
                    key[w] = row[w]
                b = mover * nw
                key[b + (o >> 6)] ^= _bit(o)
                key[b + (d >> 6)] ^= _bit(d)
                if use_canon:
                    for w in range(kw):
                        alt[w] = pkey[w]
                    po = cperm[o]
                    pd = cperm[d]
                    alt[b + (po >> 6)] ^= _bit(po)
                    alt[b + (pd >> 6)] ^= _bit(pd)
                    if _less(alt, key, nw, kw):
                        for w in range(kw):
                            key[w] = alt[w]
                if look and out2 > 0 and _lookup(hkeys, hused, key, kw) < 0:
                    ok, stamp2 = _viable(key, opp, level_next + 1, max_len, nw, nbr, land, dist,
                                         dbase, inbase, occ2, xs2, ys2, dests2, visited2,
                                         queue2, mdist2, stamp2)
                    if not ok:
                        stats[3] += 1
                        continue
                slot, new = _insert(hkeys, hused, key, kw)
                if new:
                    fill += 1
                    hval[slot] = pc
                else:
                    v = hval[slot] + pc
                    hval[slot] = v if v >= pc else np.uint64(0xFFFFFFFFFFFFFFFF)
        for q in range(sx):
            occ[xs[q]] = 0
        for q in range(sy):
            occ[ys[q]] = 0
        i += 1
    return i, fill


@njit(cache=True, nogil=True)
def _compact(hkeys, hused, hvals, out, outvals):
    k = 0
    for s in range(hkeys.shape[0]):
        if hused[s]:
            out[k] = hkeys[s]
            if outvals.shape[0]:
                outvals[k] = hvals[s]
            k += 1


@njit(cache=True, nogil=True)
def _swap_rows(keys, vals, i, j):
    for w in range(keys.shape[1]):
        t = keys[i, w]
        keys[i, w] = keys[j, w]
        keys[j, w] = t
    if vals.shape[0]:
        t = vals[i]
        vals[i] = vals[j]
        vals[j] = t


@njit(cache=True, nogil=True)
def _sort_rows_inplace(keys, vals, nw):
    """Quicksort of distinct rows (and their values) in ``_less`` order."""
    kw = keys.shape[1]
    n = keys.shape[0]
    stack = np.empty((128, 2), np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = n - 1
    pivot = np.empty(kw, np.uint64)
    while top >= 0:
        lo = stack[top, 0]
        hi = stack[top, 1]
        top -= 1
        while hi - lo > 16:
            mid = (lo + hi) // 2
            # median of three moved to hi
            if _less(keys[mid], keys[lo], nw, kw):
                _swap_rows(keys, vals, mid, lo)
            if _less(keys[hi], keys[lo], nw, kw):
                _swap_rows(keys, vals, hi, lo)
            if _less(keys[mid], keys[hi], nw, kw):
                _swap_rows(keys, vals, mid, hi)
            pivot[:] = keys[hi]
            i = lo - 1
            for j in range(lo, hi):
                if _less(keys[j], pivot, nw, kw):
                    i += 1
                    _swap_rows(keys, vals, i, j)
            _swap_rows(keys, vals, i + 1, hi)
            p = i + 1
            # recurse into the smaller side, loop on the larger
            if p - lo < hi - p:
                top += 1
                stack[top, 0] = p + 1
                stack[top, 1] = hi
                hi = p - 1
            else:
                top += 1
                stack[top, 0] = lo
                stack[top, 1] = p - 1
                lo = p + 1
        for i in range(lo + 1, hi + 1):
            j = i
            while j > lo and _less(keys[j], keys[j - 1], nw, kw):
                _swap_rows(keys, vals, j, j - 1)
                j -= 1


@njit(cache=True, nogil=True)
def _sift_down(data, pos, heap, hsize, i, nw, kw):
    while True:
        small = i
        for c in (2 * i + 1, 2 * i + 2):
            if c < hsize and _less(data[pos[heap[c]]], data[pos[heap[small]]], nw, kw):
                small = c
        if small == i:
            return
        t = heap[i]
        heap[i] = heap[small]
        heap[small] = t
        i = small


@njit(cache=True, nogil=True)
def _heapify(data, pos, heap, hsize, nw):
    for i in range(hsize // 2 - 1, -1, -1):
        _sift_down(data, pos, heap, hsize, i, nw, data.shape[1])


@njit(cache=True, nogil=True)
def _merge_runs(data, pos, ends, heap, hsize, out, k, last, nw):
    """K-way merge of sorted runs into ``out[k:]``, dropping repeats of ``last``.

    Returns (rows written so far, heap size); stops early when ``out`` is full.
    """
    kw = data.shape[1]
    while hsize > 0 and k < out.shape[0]:
        r = heap[0]
        row = data[pos[r]]
        fresh = k == 0
        if not fresh:
            for w in range(kw):
                if row[w] != last[w]:
                    fresh = True
                    break
        if fresh:
            for w in range(kw):
                out[k, w] = row[w]
                last[w] = row[w]
            k += 1
        pos[r] += 1
        if pos[r] == ends[r]:
            hsize -= 1
            heap[0] = heap[hsize]
        _sift_down(data, pos, heap, hsize, 0, nw, kw)
    # drain repeats so an exactly full ``out`` still reports completion
    while hsize > 0:
        r = heap[0]
        row = data[pos[r]]
        for w in range(kw):
            if row[w] != last[w]:
                return k, hsize
        pos[r] += 1
        if pos[r] == ends[r]:
            hsize -= 1
            heap[0] = heap[hsize]
        _sift_down(data, pos, heap, hsize, 0, nw, kw)
    return k, hsize


@njit(cache=True, nogil=True)
def _rehash(okeys, oused, oval, nkeys, nused, nval, kw):
    for s in range(okeys.shape[0]):
        if oused[s]:
            slot, _ = _insert(nkeys, nused, okeys[s], kw)
            if nval.shape[0]:
                nval[slot] = oval[s]


@njit(cache=True, nogil=True)
def _search_sorted(level, key, nw, kw):
    lo = 0
    hi = level.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if _less(level[mid], key, nw, kw):
            lo = mid + 1
        else:
            hi = mid
    if lo < level.shape[0]:
        for w in range(kw):
            if level[lo, w] != key[w]:
                return -1
        return lo
    return -1


@njit(cache=True, nogil=True)
def _mirror_hits(level, nw, mperm, use_canon, cperm):
    """Indices of rows whose mirror image (canonicalized) is also in ``level``."""
    F = level.shape[0]
    m = np.empty(nw, np.uint64)
    alt = np.empty(nw, np.uint64)
    out = np.empty(F, np.int64)
    k = 0
    for i in range(F):
        _permute_row(level[i], m, mperm, nw, nw)
        if use_canon:
            _permute_row(m, alt, cperm, nw, nw)
            if _less(alt, m, nw, nw):
                for w in range(nw):
                    m[w] = alt[w]
        if _search_sorted(level, m, nw, nw) >= 0:
            out[k] = i
            k += 1
    return out[:k]


@njit(cache=True, nogil=True)
def _odd_meets(level, nw, nbr, land, jumps_only, mperm, use_canon, cperm, limit):
    """Rows P with a move P -> Q such that mirror(Q), canonicalized, is in ``level``.

    Returns (row index, origin, destination) triples, at most ``limit``.
    """
    F = level.shape[0]
    n = nbr.shape[0]
    occ = np.zeros(n, np.uint8)
    men = np.empty(n, np.int32)
    dests = np.empty(n, np.int32)
    visited = np.zeros(n, np.int64)
    queue = np.empty(n, np.int32)
    q = np.empty(nw, np.uint64)
    m = np.empty(nw, np.uint64)
    alt = np.empty(nw, np.uint64)
    out = np.empty((limit, 3), np.int64)
    found = 0
    stamp = 0
    for i in range(F):
        row = level[i]
        s = _unpack(row, 0, nw, men)
        for j in range(s):
            occ[men[j]] = 1
        for j in range(s):
            o = men[j]
            stamp += 1
            k = _dests(o, occ, nbr, land, jumps_only, visited, stamp, queue, dests)
            for t in range(k):
                d = dests[t]
                for w in range(nw):
                    q[w] = row[w]
                q[o >> 6] ^= _bit(o)
                q[d >> 6] ^= _bit(d)
                _permute_row(q, m, mperm, nw, nw)
                if use_canon:
                    _permute_row(m, alt, cperm, nw, nw)
                    if _less(alt, m, nw, nw):
                        for w in range(nw):
                            m[w] = alt[w]
                if _search_sorted(level, m, nw, nw) >= 0:
                    out[found, 0] = i
                    out[found, 1] = o
                    out[found, 2] = d
                    found += 1
                    if found >= limit:
                        for jj in range(s):
                            occ[men[jj]] = 0
                        return out[:found]
        for j in range(s):
            occ[men[j]] = 0
    return out[:found]


@njit(cache=True, nogil=True)
def _row_stats(keys, nw, cent, mperm, want_sym):
    """Per-row centroid and (optionally) mirror symmetry count."""
    F = keys.shape[0]
    n = cent.shape[0]
    occ = np.zeros(n, np.uint8)
    men = np.empty(n, np.int32)
    cs = np.empty(F, np.int64)
    ss = np.zeros(F, np.int64)
    for i in range(F):
        s = _unpack(keys[i], 0, nw, men)
        c = 0
        for j in range(s):
            c += cent[men[j]]
            occ[men[j]] = 1
        cs[i] = c
        if want_sym:
            y = 0
            for j in range(s):
                if occ[mperm[men[j]]]:
                    y += 1
            ss[i] = y
        for j in range(s):
            occ[men[j]] = 0
    return cs, ss




@njit(cache=True, nogil=True)
def _dedupe_sorted(keys, vals, kw):
    """First index of each run of equal rows, with saturating value sums."""
    F = keys.shape[0]
    idx = np.empty(F, np.int64)
    out = np.empty(F, np.uint64)
    k = -1
    for i in range(F):
        same = i > 0
        if same:
            for w in range(kw):
                if keys[i, w] != keys[i - 1, w]:
                    same = False
                    break
        if not same:
            k += 1
            idx[k] = i
            out[k] = vals[i]
        else:
            v = out[k] + vals[i]
            out[k] = v if v >= vals[i] else np.uint64(0xFFFFFFFFFFFFFFFF)
    return idx[: k + 1], out[: k + 1]


# ---------------------------------------------------------------------------
# python side

MIN_CHUNK = 4096
SPILL_MIN = 64 << 20


def spill(rows: np.ndarray) -> np.ndarray:
    """Move a large finished level into a read-only map of an unlinked temp file.

    The pages stay on disk until touched, so the level no longer counts
    against the memory cap.
    """
    if not rows.nbytes or rows.nbytes < SPILL_MIN or not rows.flags.writeable:
        return rows
    with tempfile.TemporaryFile() as tmp:
        rows.tofile(tmp)
        tmp.flush()
        mm = np.memmap(tmp, rows.dtype, "r", shape=rows.shape)
    return np.asarray(mm)




def _sig_columns(nw: int, kw: int) -> list[int]:
    """Columns for ``np.lexsort``: least significant first."""
    cols = []
    for base in reversed(range(0, kw, nw)):
        cols.extend(base + w for w in range(nw))
    return cols


def sort_rows(keys: np.ndarray, nw: int) -> np.ndarray:
    return np.lexsort([keys[:, c] for c in _sig_columns(nw, keys.shape[1])])


@dataclass
class LevelStats:
    depth: int
    size: int
    generated: int = 0
    pruned: int = 0
    filtered: int = 0
    cmax: int | None = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {"depth": self.depth, "size": self.size, "cmax": self.cmax,
             "pruned": self.pruned, "generated": self.generated}
        if self.filtered:
            d["filtered"] = self.filtered
        d.update(self.extra)
        return d


class HashLevel:
    """Growable hash set of rows, optionally carrying a uint64 per row."""

    def __init__(self, kw: int, capacity: int = 1 << 12, with_values: bool = False):
        cap = 1 << max(10, int(capacity - 1).bit_length())
        self.kw = kw
        self.with_values = with_values
        self.keys = np.zeros((cap, kw), np.uint64)
        self.used = np.zeros(cap, np.uint8)
        self.vals = np.zeros(cap if with_values else 0, np.uint64)
        self.fill = 0

    @property
    def capacity(self) -> int:
        return self.keys.shape[0]

    @property
    def max_fill(self) -> int:
        return self.capacity * 5 // 8

    def nbytes(self, capacity: int | None = None) -> int:
        return (capacity or self.capacity) * (self.kw * 8 + 1 + 8 * self.with_values)

    def grow(self) -> None:
        cap = self.capacity * 2
        keys = np.zeros((cap, self.kw), np.uint64)
        used = np.zeros(cap, np.uint8)
        vals = np.zeros(cap if self.with_values else 0, np.uint64)
        _rehash(self.keys, self.used, self.vals, keys, used, vals, self.kw)
        self.keys, self.used, self.vals = keys, used, vals

    def sealed(self, nw: int) -> tuple[np.ndarray, np.ndarray]:
        """Sorted copies of the stored rows and values, built without temporaries."""
        n = int(np.count_nonzero(self.used))
        keys = np.empty((n, self.kw), np.uint64)
        vals = np.empty(n if self.with_values else 0, np.uint64)
        _compact(self.keys, self.used, self.vals, keys, vals)
        _sort_rows_inplace(keys, vals, nw)
        if not self.with_values:
            vals = np.broadcast_to(np.uint64(0), (n,))
        return keys, vals

    def reset_with(self, rows: np.ndarray, vals: np.ndarray | None = None) -> None:
        self.used[:] = 0
        v = vals if vals is not None else np.zeros(len(rows) if self.with_values else 0,
                                                   np.uint64)
        _rehash(np.ascontiguousarray(rows), np.ones(len(rows), np.uint8), v,
                self.keys, self.used, self.vals, self.kw)
        self.fill = len(rows)


class SpillRuns:
    """Sorted, deduplicated runs appended to an unlinked temp file.

    A level whose hash table outgrows the budget is sealed in pieces; the
    pieces are merged back with duplicates removed.
    """

    def __init__(self, kw: int):
        self.kw = kw
        self.file = None
        self.bounds: list[tuple[int, int]] = []
        self.rows = 0
        self.lock = threading.Lock()

    def add(self, keys: np.ndarray) -> None:
        if not len(keys):
            return
        with self.lock:
            if self.file is None:
                self.file = tempfile.TemporaryFile()
            keys.tofile(self.file)
            self.bounds.append((self.rows, self.rows + len(keys)))
            self.rows += len(keys)

    def merge(self, nw: int, limit: int) -> np.ndarray | None:
        """All rows in ``_less`` order without repeats, or None past ``limit`` rows."""
        self.file.flush()
        data = np.asarray(np.memmap(self.file, np.uint64, "r", shape=(self.rows, self.kw)))
        pos = np.array([b[0] for b in self.bounds], np.int64)
        ends = np.array([b[1] for b in self.bounds], np.int64)
        heap = np.arange(len(pos), dtype=np.int64)
        _heapify(data, pos, heap, len(heap), nw)
        # untouched pages of ``out`` cost nothing, so size it for the worst case
        out = np.empty((min(self.rows, limit), self.kw), np.uint64)
        last = np.zeros(self.kw, np.uint64)
        k, hsize = _merge_runs(data, pos, ends, heap, len(heap), out, 0, last, nw)
        del data
        self.file.close()
        if hsize:
            return None
        return out[:k]


class Engine:
    """Board tables plus packing helpers for one (board, rules) instance."""

    def __init__(self, board: Board, rules: RuleSet, game: bool = False,
                 canonicalize: bool = False, mirror_kind: str = "xy",
                 memory_cap: int | None = None, threads: int | None = None):
        self.board = board
        self.rules = rules
        self.game = game
        self.cells = board.ordered_cells
        n = len(self.cells)
        self.n = n
        self.nw = max(1, (n + 63) // 64)
        self.kw = 2 * self.nw if game else self.nw
        self.canonicalize = canonicalize
        self.mirror_kind = mirror_kind
        self.memory_cap = memory_cap if memory_cap is not None else default_memory_cap()
        self.threads = max(1, min(int(threads or default_threads()), os.cpu_count() or 1))
        idx = {c: i for i, c in enumerate(self.cells)}
        D = len(rules.directions)
        self.nbr = np.full((n, D), -1, np.int32)
        self.land = np.full((n, D), -1, np.int32)
        for c, i in idx.items():
            for k, (dx, dy) in enumerate(rules.directions):
                a = type(c)(c.x + dx, c.y + dy)
                b = type(c)(c.x + 2 * dx, c.y + 2 * dy)
                if a in idx:
                    self.nbr[i, k] = idx[a]
                    if b in idx:
                        self.land[i, k] = idx[b]
        self.cent = np.array([c.x - c.y for c in self.cells], np.int32)
        if canonicalize:
            self.cperm = np.array([idx[reflect_x_minus_y(c, board)] for c in self.cells], np.int32)
        else:
            self.cperm = np.arange(n, dtype=np.int32)
        try:
            self.mperm = np.array([idx[mirror(c, board, mirror_kind)] for c in self.cells],
                                  np.int32)
        except (ValueError, KeyError):
            self.mperm = np.arange(n, dtype=np.int32)
        if game:
            self.dist = np.array([[distance(a, b, rules) for b in self.cells] for a in self.cells],
                                 np.int32)
            bases = (board.red_base, board.blue_base)  # what blue / red must fill
            self.inbase = np.array([[1 if c in base else 0 for c in self.cells] for base in bases],
                                   np.uint8)
            self.dbase = np.array([[min(distance(c, t, rules) for t in base) for c in self.cells]
                                   for base in bases], np.int32)
            self.base_rows = np.array([self.words(board.mask(b)) for b in bases], np.uint64)

    # -- packing ------------------------------------------------------------------
    def words(self, mask: int) -> list[int]:
        return [(mask >> (64 * w)) & 0xFFFFFFFFFFFFFFFF for w in range(self.nw)]

    def row(self, p: Position) -> np.ndarray:
        ws = self.words(self.board.mask(p.blue))
        if self.game:
            ws += self.words(self.board.mask(p.red))
        return np.array(ws, np.uint64)

    def mask_of(self, row, army: int = 0) -> int:
        m = 0
        for w in range(self.nw):
            m |= int(row[army * self.nw + w]) << (64 * w)
        return m

    def position(self, row, to_move: str | None = None) -> Position:
        blue = self.board.cells_of(self.mask_of(row, 0))
        red = self.board.cells_of(self.mask_of(row, 1)) if self.game else frozenset()
        return Position(blue, red, to_move)

    def canonical_row(self, p: Position) -> np.ndarray:
        r = self.row(p)
        if not self.canonicalize:
            return r
        alt = np.empty_like(r)
        _permute_row(r, alt, self.cperm, self.nw, self.kw)
        return alt if _less(alt, r, self.nw, self.kw) else r

    def find(self, level: np.ndarray, row: np.ndarray) -> int:
        if len(level) == 0:
            return -1
        return int(_search_sorted(level, np.ascontiguousarray(row, np.uint64), self.nw, self.kw))

    def rows(self, positions) -> np.ndarray:
        rows = [self.canonical_row(p) for p in positions]
        if not rows:
            return np.zeros((0, self.kw), np.uint64)
        arr = np.array(rows, np.uint64)
        arr = arr[sort_rows(arr, self.nw)]
        idx, _ = _dedupe_sorted(arr, np.zeros(len(arr), np.uint64), self.kw)
        return np.ascontiguousarray(arr[idx])

    def wins(self, keys: np.ndarray, army: int) -> np.ndarray:
        """Mask of game rows in which ``army`` (0 blue, 1 red) fills its target base."""
        if len(keys) == 0:
            return np.zeros(0, bool)
        sl = slice(army * self.nw, (army + 1) * self.nw)
        return np.all(keys[:, sl] == self.base_rows[army], axis=1)

    # -- chunked expansion ------------------------------------------------------------
    def _run_table(self, table: HashLevel, step, budget: int, info: dict,
                   runs: SpillRuns | None = None) -> None:
        start = 0
        while True:
            nxt = step(table, start)
            if nxt is None:
                return
            start = nxt
            need = table.nbytes(table.capacity * 2) + table.nbytes()
            if need > budget and runs is not None:
                keys, _ = table.sealed(self.nw)
                runs.add(keys)
                del keys
                table.used[:] = 0
                table.fill = 0
                continue
            if need > budget:
                raise ResourceLimitError(
                    f"memory cap {self.memory_cap} bytes exceeded",
                    dict(info, partial_size=table.fill, memoryCap=self.memory_cap))
            table.grow()

    def _chunked(self, F: int, work, retained: int, info: dict):
        """Run ``work(lo, hi, budget)`` over frontier slices, merged afterwards.

        Each slice fills its own table; the union is sorted and deduplicated,
        so the result does not depend on how many slices were used.
        """
        avail = self.memory_cap - retained
        if avail <= 0:
            raise ResourceLimitError(f"memory cap {self.memory_cap} bytes exceeded",
                                     dict(info, memoryCap=self.memory_cap))
        T = min(self.threads, max(1, F // MIN_CHUNK))
        cuts = [F * k // T for k in range(T + 1)]
        if T == 1:
            return [work(0, F, avail)]
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(T) as ex:
            futs = [ex.submit(work, cuts[k], cuts[k + 1], avail // (2 * T)) for k in range(T)]
            return [f.result() for f in futs]

    def _merge(self, parts):
        if len(parts) == 1:
            return parts[0]
        keys = np.concatenate([p[0] for p in parts])
        vals = np.concatenate([p[1] for p in parts])
        stats = sum(p[2] for p in parts)
        order = sort_rows(keys, self.nw)
        keys, vals = keys[order], vals[order]
        idx, vals = _dedupe_sorted(keys, vals, self.kw)
        return np.ascontiguousarray(keys[idx]), vals, stats

    def top_rows(self, keys: np.ndarray, m: int, beta: int = 0) -> np.ndarray:
        """The ``m`` rows with largest ``c + beta * sym``, ties by row order."""
        if len(keys) <= m:
            return keys
        c, s = self.row_stats(keys, beta != 0)
        score = c + beta * s
        order = np.lexsort([keys[:, col] for col in _sig_columns(self.nw, self.kw)] + [-score])
        keep = np.sort(order[:m])  # keys arrive sorted, so index order is row order
        return np.ascontiguousarray(keys[keep])

    # -- transfer expansion -------------------------------------------------------------
    def expand_transfer(self, frontier: np.ndarray, *, depth: int, jumps_only=False, mcc=False,
                        thresh=0, remaining=0, sym_min=None, beam: int | None = None,
                        beta: int = 0, retained: int = 0):
        """One level of single-army expansion; returns (sorted rows, LevelStats).

        With ``mcc`` a successor survives only if its centroid plus the
        ``remaining``-move bound reaches ``thresh``; ``sym_min`` drops
        successors whose mirror symmetry is below it; ``beam`` keeps the best
        rows by ``c + beta * sym``.
        """
        sym_on = sym_min is not None
        ell = self.rules.ell
        info = {"depth": depth}

        # exact levels spill sorted runs to disk instead of failing at the cap
        runs = SpillRuns(self.kw) if beam is None else None

        def work(lo, hi, budget):
            sub = frontier[lo:hi]
            F = len(sub)
            stats = np.zeros(3, np.int64)
            cap = 4 * (hi - lo) + 1024
            if beam is not None:
                cap = max(cap, 4 * beam)
            row = self.kw * 8 + 1
            table = HashLevel(self.kw, min(cap, 1 << 24, budget // (4 * row)))

            def step(tab, start):
                i = start
                while True:
                    i, fill = _expand_transfer(
                        sub, i, self.nw, self.nbr, self.land, self.cent, self.canonicalize,
                        self.cperm, jumps_only, mcc, int(thresh), int(remaining), ell, sym_on,
                        int(sym_min or 0), self.mperm, tab.keys, tab.used, tab.fill,
                        tab.max_fill, stats)
                    tab.fill = fill
                    if i >= F:
                        return None
                    if beam is not None and beam < tab.max_fill // 2:
                        keys, _ = tab.sealed(self.nw)
                        tab.reset_with(self.top_rows(keys, beam, beta))
                        continue
                    return i

            if F:
                self._run_table(table, step, budget, info, runs)
            keys, vals = table.sealed(self.nw)
            if runs is not None and runs.rows:
                del table
                runs.add(keys)
                keys = keys[:0]
            return keys, vals, stats

        keys, _, stats = self._merge(self._chunked(len(frontier), work, retained, info))
        if runs is not None and runs.rows:
            runs.add(keys)  # chunks sealed before the first spill
            keys = None
            log.info("level %d: merging %d spilled runs", depth, len(runs.bounds))
            keys = runs.merge(self.nw, (self.memory_cap - retained) // (self.kw * 8))
            if keys is None:
                raise ResourceLimitError(f"memory cap {self.memory_cap} bytes exceeded",
                                         dict(info, partial_size=runs.rows,
                                              memoryCap=self.memory_cap))
        st = LevelStats(depth, len(keys), int(stats[0]), int(stats[1]) + int(stats[2]))
        if sym_on:
            st.extra["symPruned"] = int(stats[2])
        if beam is not None and len(keys) > beam:
            st.extra["truncated"] = len(keys) - beam
            keys = self.top_rows(keys, beam, beta)
            st.size = len(keys)
        return keys, st

    # -- game expansion ----------------------------------------------------------------
    def expand_game(self, frontier: np.ndarray, counts: np.ndarray, *, depth: int, max_len: int,
                    prune=True, jumps_only=False, p4_need=0, p5=None, lookahead=False,
                    retained=0):
        """Expand game rows with ``depth`` moves made by one more move."""
        mover = depth % 2
        kmin, kmax = p5 if p5 is not None else (0, -1)
        info = {"depth": depth + 1}

        def work(lo, hi, budget):
            sub, sc = frontier[lo:hi], counts[lo:hi]
            F = len(sub)
            stats = np.zeros(4, np.int64)
            table = HashLevel(self.kw, min(4 * F + 1024, 1 << 24, budget // (4 * (self.kw * 8 + 9))),
                              with_values=True)

            def step(tab, start):
                i, fill = _expand_game(
                    sub, sc, start, self.nw, self.nbr, self.land, self.cent,
                    self.canonicalize, self.cperm, self.dist, self.dbase, self.inbase, mover,
                    depth + 1, int(max_len), prune, jumps_only, int(p4_need), p5 is not None,
                    int(kmin), int(kmax), bool(lookahead and prune), tab.keys, tab.used, tab.vals,
                    tab.fill, tab.max_fill, stats)
                tab.fill = fill
                return None if i >= F else i

            if F:
                self._run_table(table, step, budget, info)
            keys, vals = table.sealed(self.nw)
            return keys, vals, stats

        keys, vals, stats = self._merge(self._chunked(len(frontier), work, retained, info))
        st = LevelStats(depth + 1, len(keys), int(stats[0]), int(stats[1]), int(stats[2]))
        if lookahead and prune:
            st.extra["deadEnds"] = int(stats[3])
        return keys, vals, st

    # -- level queries ------------------------------------------------------------------
    def row_stats(self, keys: np.ndarray, want_sym: bool = False):
        if len(keys) == 0:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        return _row_stats(keys, self.nw, self.cent, self.mperm, want_sym)

    def max_centroid(self, keys: np.ndarray) -> int | None:
        """Largest centroid in a level, computed in slices to keep memory flat."""
        best = None
        for lo in range(0, len(keys), 1 << 20):
            c, _ = self.row_stats(keys[lo:lo + (1 << 20)])
            m = int(c.max())
            best = m if best is None else max(best, m)
        return best

    def mirror_hits(self, level: np.ndarray) -> np.ndarray:
        if len(level) == 0:
            return np.zeros(0, np.int64)
        return _mirror_hits(level, self.nw, self.mperm, self.canonicalize, self.cperm)

    def odd_meets(self, level: np.ndarray, jumps_only=False, limit=1 << 16) -> np.ndarray:
        if len(level) == 0:
            return np.zeros((0, 3), np.int64)
        return _odd_meets(level, self.nw, self.nbr, self.land, jumps_only, self.mperm,
                          self.canonicalize, self.cperm, limit)
