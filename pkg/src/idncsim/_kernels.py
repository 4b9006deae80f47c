"""Compiled inner loops: bitset Bron-Kerbosch and lazy greedy selection.

Bitsets are uint64, so enumeration handles at most 64 vertices.
"""
import numpy as np
from numba import njit

MAX_BITS = 64


@njit(cache=True)
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True)
def _pivot_candidates(free, p, x, n):
    best_u, best_c = -1, -1
    px = p | x
    one = np.uint64(1)
    for u in range(n):
        if (px >> np.uint64(u)) & one:
            c = _popcount(free[u] & p)
            if c > best_c:
                best_u, best_c = u, c
    return p & ~free[best_u]


@njit(cache=True)
def mis_masks(free):
    """Maximal independent sets as bitmasks; ``free[v]`` holds the non-neighbours of v.

    Iterative Bron-Kerbosch with Tomita pivoting on the complement graph.
    """
    n = free.size
    one = np.uint64(1)
    out = np.empty(64, dtype=np.uint64)
    count = 0
    full = (one << np.uint64(n)) - one if n < 64 else ~np.uint64(0)
    rs = np.zeros(n + 2, dtype=np.uint64)
    ps = np.zeros(n + 2, dtype=np.uint64)
    xs = np.zeros(n + 2, dtype=np.uint64)
    cs = np.zeros(n + 2, dtype=np.uint64)
    ps[0] = full
    cs[0] = _pivot_candidates(free, full, np.uint64(0), n)
    depth = 0
    while depth >= 0:
        c = cs[depth]
        if c == 0:
            depth -= 1
            continue
        bit = c & (~c + one)
        cs[depth] = c ^ bit
        v = 0
        while (bit >> np.uint64(v)) != one:
            v += 1
        r, p, x = rs[depth], ps[depth], xs[depth]
        nr, np_, nx = r | bit, p & free[v], x & free[v]
        ps[depth] = p & ~bit
        xs[depth] = x | bit
        if np_ == 0:
            if nx == 0:
                if count == out.size:
                    grown = np.empty(out.size * 2, dtype=np.uint64)
                    grown[:count] = out
                    out = grown
                out[count] = nr
                count += 1
            continue
        depth += 1
        rs[depth], ps[depth], xs[depth] = nr, np_, nx
        cs[depth] = _pivot_candidates(free, np_, nx, n)
    return out[:count]


@njit(cache=True, inline="always")
def pair_kind(links, fmat, a, b, p, c, d, q):
    if a == c:
        if p == q:
            return 0
        if b == d:
            return 1
        if fmat[d, p] or fmat[b, q]:
            return 2
        return 0
    if b == d:
        return 3
    if a == d or c == b:
        return 5
    if links[c, b] or links[a, d]:
        return 4
    return 0


@njit(cache=True, inline="always")
def conflicts(links, fmat, a, b, p, c, d, q):
    """Branch-free ``pair_kind(...) != 0`` for hot loops (callers skip u == v)."""
    same_tx = a == c
    coding = same_tx & (p != q) & ((b == d) | (fmat[d, p] != 0) | (fmat[b, q] != 0))
    cross = (not same_tx) & ((b == d) | (a == d) | (c == b) | links[c, b] | links[a, d])
    return coding | cross


@njit(cache=True)
def greedy_lazy(links, fmat, tx, rx, pkt, order):
    """Walk ``order`` and keep each vertex not in conflict with those kept so far."""
    n = tx.size
    alive = np.ones(n, dtype=np.bool_)
    chosen = np.empty(n, dtype=np.intp)
    k = 0
    for v in order:
        if not alive[v]:
            continue
        chosen[k] = v
        k += 1
        alive[v] = False
        a, b, p = tx[v], rx[v], pkt[v]
        for u in range(n):
            alive[u] = alive[u] & ~conflicts(links, fmat, a, b, p, tx[u], rx[u], pkt[u])
    return np.sort(chosen[:k])


@njit(cache=True)
def greedy_dense(adj, order):
    n = adj.shape[0]
    alive = np.ones(n, dtype=np.bool_)
    chosen = np.empty(n, dtype=np.intp)
    k = 0
    for v in order:
        if not alive[v]:
            continue
        chosen[k] = v
        k += 1
        alive[v] = False
        for u in range(n):
            if adj[v, u]:
                alive[u] = False
    return np.sort(chosen[:k])


@njit(cache=True)
def _better(v, best, deg, tiebreak):
    if best < 0 or deg[v] < deg[best]:
        return True
    if deg[v] == deg[best] and tiebreak[v] > tiebreak[best]:
        return True
    return False


@njit(cache=True)
def min_degree_lazy(links, fmat, tx, rx, pkt, tiebreak):
    """Greedy: repeatedly take the live vertex of least live degree (best tiebreak, then lowest index).

    Cross-transmitter conflicts only depend on the (tx, rx) pair, so live
    degrees are tracked as pair-conflict counts plus in-block coding counts.
    """
    n = tx.size
    pid = np.zeros(n, dtype=np.intp)
    ptx = np.empty(n, dtype=np.intp)
    prx = np.empty(n, dtype=np.intp)
    npairs = 0
    for v in range(n):
        if v == 0 or tx[v] != tx[v - 1] or rx[v] != rx[v - 1]:
            ptx[npairs], prx[npairs] = tx[v], rx[v]
            npairs += 1
        pid[v] = npairs - 1
    pc = np.zeros((npairs, npairs), dtype=np.int64)
    for i in range(npairs):
        for j in range(npairs):
            pc[i, j] = (ptx[i] != ptx[j]) & conflicts(links, fmat, ptx[i], prx[i], 0, ptx[j], prx[j], 0)
    live_in_pair = np.zeros(npairs, dtype=np.int64)
    for v in range(n):
        live_in_pair[pid[v]] += 1
    start = np.empty(n, dtype=np.intp)
    stop = np.empty(n, dtype=np.intp)
    s = 0
    for v in range(1, n + 1):
        if v == n or tx[v] != tx[v - 1]:
            for u in range(s, v):
                start[u], stop[u] = s, v
            s = v
    coding = np.zeros(n, dtype=np.int64)
    for v in range(n):
        for u in range(start[v], stop[v]):
            coding[v] += (u != v) & conflicts(links, fmat, tx[v], rx[v], pkt[v], tx[u], rx[u], pkt[u])

    alive = np.ones(n, dtype=np.bool_)
    deg = np.zeros(n, dtype=np.int64)
    chosen = np.empty(n, dtype=np.intp)
    k = 0
    left = n
    while left > 0:
        live = np.flatnonzero(live_in_pair)
        cross = np.zeros(npairs, dtype=np.int64)
        for i in live:
            for j in live:
                cross[i] += pc[i, j] * live_in_pair[j]
        best = -1
        for v in range(n):
            if alive[v]:
                deg[v] = cross[pid[v]] + coding[v]
                if _better(v, best, deg, tiebreak):
                    best = v
        chosen[k] = best
        k += 1
        a, b, p = tx[best], rx[best], pkt[best]
        for u in range(n):
            if alive[u] and (u == best or conflicts(links, fmat, a, b, p, tx[u], rx[u], pkt[u])):
                alive[u] = False
                left -= 1
                live_in_pair[pid[u]] -= 1
                for w in range(start[u], stop[u]):
                    coding[w] -= alive[w] & conflicts(links, fmat, tx[u], rx[u], pkt[u], tx[w], rx[w], pkt[w])
    return np.sort(chosen[:k])


@njit(cache=True)
def min_degree_dense(adj, tiebreak):
    n = adj.shape[0]
    alive = np.ones(n, dtype=np.bool_)
    deg = np.zeros(n, dtype=np.int64)
    for v in range(n):
        for u in range(n):
            if adj[v, u]:
                deg[v] += 1
    chosen = np.empty(n, dtype=np.intp)
    k = 0
    left = n
    while left > 0:
        best = -1
        for v in range(n):
            if alive[v] and _better(v, best, deg, tiebreak):
                best = v
        chosen[k] = best
        k += 1
        for u in range(n):
            if alive[u] and (u == best or adj[best, u]):
                alive[u] = False
                left -= 1
                for w in range(n):
                    if adj[u, w]:
                        deg[w] -= 1
    return np.sort(chosen[:k])


@njit(cache=True)
def free_masks_lazy(links, fmat, tx, rx, pkt):
    n = tx.size
    one = np.uint64(1)
    full = (one << np.uint64(n)) - one if n < 64 else ~np.uint64(0)
    free = np.empty(n, dtype=np.uint64)
    for v in range(n):
        taken = one << np.uint64(v)
        for u in range(n):
            if u != v and conflicts(links, fmat, tx[v], rx[v], pkt[v], tx[u], rx[u], pkt[u]):
                taken |= one << np.uint64(u)
        free[v] = full & ~taken
    return free


@njit(cache=True)
def best_mask(masks, w, tol):
    """Highest weight (relative tolerance ``tol``), then more members, then lexicographically smallest."""
    n = w.size
    one = np.uint64(1)
    best = np.uint64(0)
    best_w = -np.inf
    best_c = -1
    for m in masks:
        s = 0.0
        c = 0
        for v in range(n):
            if (m >> np.uint64(v)) & one:
                s += w[v]
                c += 1
        scale = max(1.0, abs(best_w)) if best_c >= 0 else 1.0
        if best_c < 0 or s > best_w + tol * scale:
            best, best_w, best_c = m, s, c
        elif abs(s - best_w) <= tol * scale:
            diff = m ^ best
            low = diff & (~diff + one)
            if c > best_c or (c == best_c and (m & low) != 0):
                best, best_w, best_c = m, max(s, best_w), c
    return best


@njit(cache=True)
def any_conflict(links, fmat, tx, rx, pkt):
    n = tx.size
    for v in range(n):
        for u in range(v + 1, n):
            if conflicts(links, fmat, tx[v], rx[v], pkt[v], tx[u], rx[u], pkt[u]):
                return True
    return False
