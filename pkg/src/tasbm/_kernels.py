"""Compiled sliding-window tallies behind the fast exact 3-edge motif counter.

Every kernel walks a time-sorted event stream with a window of events no
older than ``delta`` before the current timestamp. Events sharing a timestamp
are handled as a group: a group never pairs with itself, which keeps the
strict ``t1 < t2 < t3`` requirement exact when timestamps tie.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def pair_triples(ptr, times, labels, delta, out):
    """Per-pair streams with direction labels; out[a, b, c] += ordered triples."""
    c1 = np.zeros(2, np.int64)
    c2 = np.zeros((2, 2), np.int64)
    for p in range(len(ptr) - 1):
        lo, hi = ptr[p], ptr[p + 1]
        if hi - lo < 3:
            continue
        c1[:] = 0
        c2[:, :] = 0
        front = lo
        g = lo
        while g < hi:
            tau = times[g]
            ge = g
            while ge < hi and times[ge] == tau:
                ge += 1
            # expire groups older than tau - delta
            while front < g and times[front] < tau - delta:
                fe = front
                ft = times[front]
                while fe < g and times[fe] == ft:
                    c1[labels[fe]] -= 1
                    fe += 1
                for i in range(front, fe):
                    a = labels[i]
                    for b in range(2):
                        c2[a, b] -= c1[b]
                front = fe
            for i in range(g, ge):
                c = labels[i]
                for a in range(2):
                    for b in range(2):
                        out[a, b, c] += c2[a, b]
            for i in range(g, ge):
                c = labels[i]
                for a in range(2):
                    c2[a, c] += c1[a]
            for i in range(g, ge):
                c1[labels[i]] += 1
            g = ge


@njit(cache=True, nogil=True)
def star_triples(ptr, times, nbrs, labels, n, delta, same12, same13, same23):
    """Per-center streams; label 0 = out of the center, 1 = into it.

    sameXY[a, b, c] counts ordered triples where edges X and Y reach the same
    neighbour (the third edge is unconstrained).
    """
    c1 = np.zeros(2, np.int64)
    s2 = np.zeros((2, 2), np.int64)
    cum = np.zeros(2, np.int64)
    popped = np.zeros(2, np.int64)
    cnt = np.zeros((n, 2), np.int64)
    sum_after = np.zeros((n, 2, 2), np.int64)   # sum of cum[b] after own group
    sum_before = np.zeros((n, 2, 2), np.int64)  # sum of cum[a] before own group
    at_after = np.zeros((len(times), 2), np.int64)
    at_before = np.zeros((len(times), 2), np.int64)
    for p in range(len(ptr) - 1):
        lo, hi = ptr[p], ptr[p + 1]
        if hi - lo < 3:
            continue
        c1[:] = 0
        s2[:, :] = 0
        cum[:] = 0
        popped[:] = 0
        front = lo
        g = lo
        while g < hi:
            tau = times[g]
            ge = g
            while ge < hi and times[ge] == tau:
                ge += 1
            while front < g and times[front] < tau - delta:
                fe = front
                ft = times[front]
                while fe < g and times[fe] == ft:
                    c1[labels[fe]] -= 1
                    cnt[nbrs[fe], labels[fe]] -= 1
                    fe += 1
                for i in range(front, fe):
                    a = labels[i]
                    w = nbrs[i]
                    for b in range(2):
                        s2[a, b] -= cnt[w, b]
                        sum_after[w, a, b] -= at_after[i, b]
                        sum_before[w, a, b] -= at_before[i, b]
                    popped[a] += 1
                front = fe
            for i in range(g, ge):
                c = labels[i]
                w = nbrs[i]
                for a in range(2):
                    for b in range(2):
                        same12[a, b, c] += s2[a, b]
                        same13[a, b, c] += cnt[w, a] * cum[b] - sum_after[w, a, b]
                        same23[a, b, c] += sum_before[w, b, a] - cnt[w, b] * popped[a]
            for i in range(g, ge):
                c = labels[i]
                w = nbrs[i]
                for a in range(2):
                    s2[a, c] += cnt[w, a]
                at_before[i, 0] = cum[0]
                at_before[i, 1] = cum[1]
            for i in range(g, ge):
                c = labels[i]
                c1[c] += 1
                cnt[nbrs[i], c] += 1
                cum[c] += 1
            for i in range(g, ge):
                c = labels[i]
                w = nbrs[i]
                at_after[i, 0] = cum[0]
                at_after[i, 1] = cum[1]
                for b in range(2):
                    sum_after[w, c, b] += cum[b]
                    sum_before[w, c, b] += at_before[i, b]
            g = ge
        # clear per-neighbour state still held by the window
        for i in range(front, hi):
            w = nbrs[i]
            cnt[w, 0] = 0
            cnt[w, 1] = 0
            for a in range(2):
                for b in range(2):
                    sum_after[w, a, b] = 0
                    sum_before[w, a, b] = 0


@njit(cache=True, nogil=True)
def _merge3(ptr, times, dirs, pa, pb, pc, buf_t, buf_l):
    ia, ea = ptr[pa], ptr[pa + 1]
    ib, eb = ptr[pb], ptr[pb + 1]
    ic, ec = ptr[pc], ptr[pc + 1]
    big = np.iinfo(np.int64).max
    k = 0
    while ia < ea or ib < eb or ic < ec:
        ta = times[ia] if ia < ea else big
        tb = times[ib] if ib < eb else big
        tc = times[ic] if ic < ec else big
        if ta <= tb and ta <= tc:
            buf_t[k] = ta
            buf_l[k] = dirs[ia]
            ia += 1
        elif tb <= tc:
            buf_t[k] = tb
            buf_l[k] = 2 + dirs[ib]
            ib += 1
        else:
            buf_t[k] = tc
            buf_l[k] = 4 + dirs[ic]
            ic += 1
        k += 1
    return k


@njit(cache=True, nogil=True)
def triangle_triples(ptr, times, dirs, nbr_ptr, nbr_node, nbr_pair, delta, out):
    """Static triangles a < b < c; labels 0/1 = a->b / b->a, 2/3 = a->c / c->a,
    4/5 = b->c / c->b. out[x, y, z] counts triples on three distinct pairs."""
    maxlen = 0
    for p in range(len(ptr) - 1):
        maxlen = max(maxlen, ptr[p + 1] - ptr[p])
    buf_t = np.empty(3 * maxlen, np.int64)
    buf_l = np.empty(3 * maxlen, np.int64)
    c1 = np.zeros(6, np.int64)
    c2 = np.zeros((6, 6), np.int64)
    n = len(nbr_ptr) - 1
    for a in range(n):
        for ka in range(nbr_ptr[a], nbr_ptr[a + 1]):
            b = nbr_node[ka]
            if b <= a:
                continue
            pab = nbr_pair[ka]
            # common neighbours c > b of a and b
            i = ka + 1
            j = nbr_ptr[b]
            je = nbr_ptr[b + 1]
            ie = nbr_ptr[a + 1]
            while j < je and nbr_node[j] <= b:
                j += 1
            while i < ie and j < je:
                ci = nbr_node[i]
                cj = nbr_node[j]
                if ci < cj:
                    i += 1
                elif cj < ci:
                    j += 1
                else:
                    m = _merge3(ptr, times, dirs, pab, nbr_pair[i], nbr_pair[j], buf_t, buf_l)
                    if m >= 3:
                        _count6(buf_t, buf_l, m, delta, c1, c2, out)
                    i += 1
                    j += 1


@njit(cache=True, nogil=True)
def _count6(times, labels, m, delta, c1, c2, out):
    c1[:] = 0
    c2[:, :] = 0
    front = 0
    g = 0
    while g < m:
        tau = times[g]
        ge = g
        while ge < m and times[ge] == tau:
            ge += 1
        while front < g and times[front] < tau - delta:
            fe = front
            ft = times[front]
            while fe < g and times[fe] == ft:
                c1[labels[fe]] -= 1
                fe += 1
            for i in range(front, fe):
                x = labels[i]
                for y in range(6):
                    c2[x, y] -= c1[y]
            front = fe
        for i in range(g, ge):
            z = labels[i]
            pz = z >> 1
            for x in range(6):
                px = x >> 1
                if px == pz:
                    continue
                for y in range(6):
                    py = y >> 1
                    if py != px and py != pz:
                        out[x, y, z] += c2[x, y]
        for i in range(g, ge):
            z = labels[i]
            for x in range(6):
                c2[x, z] += c1[x]
        for i in range(g, ge):
            c1[labels[i]] += 1
        g = ge


@njit(cache=True, nogil=True)
def window_pair_bound(times, delta):
    """Sum over edges i of C(w_i, 2), w_i = edges strictly later within delta.

    An upper bound on the number of 3-edge delta-instances of any motif, as a
    float so the caller can test it against the int64 range."""
    m = len(times)
    total = 0.0
    j = 0
    for i in range(m):
        if j < i:
            j = i
        while j + 1 < m and times[j + 1] - times[i] <= delta:
            j += 1
        w = float(j - i)
        total += w * (w - 1.0) / 2.0
    return total
