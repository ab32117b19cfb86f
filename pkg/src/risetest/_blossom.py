"""Maximum-weight matching on a dense graph (primal-dual blossom, O(n^3)).

Array-based variant of Edmonds' weighted blossom algorithm with vertex and
blossom dual labels and per-blossom slack tracking. Vertices are 1..n,
blossoms n+1..2n, index 0 means "none". Integer weights only; ``w == 0``
marks a missing edge.
"""

import numpy as np
from numba import njit

# meta slots
_N, _NX, _STAMP, _QHEAD, _QTAIL = 0, 1, 2, 3, 4
_INF = np.iinfo(np.int64).max


@njit(cache=True)
def _e_delta(gu, gv, gw, lab, a, b):
    u = gu[a, b]
    v = gv[a, b]
    return lab[u] + lab[v] - gw[u, v] * 2


@njit(cache=True)
def _update_slack(gu, gv, gw, lab, slack, u, x):
    if slack[x] == 0 or _e_delta(gu, gv, gw, lab, u, x) < _e_delta(gu, gv, gw, lab, slack[x], x):
        slack[x] = u


@njit(cache=True)
def _set_slack(gu, gv, gw, lab, slack, st, S, n, x):
    slack[x] = 0
    for u in range(1, n + 1):
        if gw[u, x] > 0 and st[u] != x and S[st[u]] == 0:
            _update_slack(gu, gv, gw, lab, slack, u, x)


@njit(cache=True)
def _q_push(flower, flen, q, meta, x, stack):
    n = meta[_N]
    top = 0
    stack[top] = x
    top += 1
    while top > 0:
        top -= 1
        y = stack[top]
        if y <= n:
            tail = meta[_QTAIL]
            q[tail % q.shape[0]] = y
            meta[_QTAIL] = tail + 1
            if meta[_QTAIL] - meta[_QHEAD] > q.shape[0]:
                raise RuntimeError("blossom queue overflow")
        else:
            # push children in reverse so they pop in order
            for i in range(flen[y] - 1, -1, -1):
                stack[top] = flower[y, i]
                top += 1


@njit(cache=True)
def _set_st(flower, flen, st, n, x, b, stack):
    top = 0
    stack[top] = x
    top += 1
    while top > 0:
        top -= 1
        y = stack[top]
        st[y] = b
        if y > n:
            for i in range(flen[y]):
                stack[top] = flower[y, i]
                top += 1


@njit(cache=True)
def _get_pr(flower, flen, b, xr):
    size = flen[b]
    pr = 0
    while flower[b, pr] != xr:
        pr += 1
    if pr % 2 == 1:
        lo = 1
        hi = size - 1
        while lo < hi:
            t = flower[b, lo]
            flower[b, lo] = flower[b, hi]
            flower[b, hi] = t
            lo += 1
            hi -= 1
        return size - pr
    return pr


@njit(cache=True)
def _set_match(gu, gv, match, ffrom, flower, flen, n, u, v):
    match[u] = gv[u, v]
    if u > n:
        eu = gu[u, v]
        xr = ffrom[u, eu]
        pr = _get_pr(flower, flen, u, xr)
        for i in range(pr):
            _set_match(gu, gv, match, ffrom, flower, flen, n, flower[u, i], flower[u, i ^ 1])
        _set_match(gu, gv, match, ffrom, flower, flen, n, xr, v)
        size = flen[u]
        tmp = np.empty(size, dtype=np.int64)
        for i in range(size):
            tmp[i] = flower[u, (i + pr) % size]
        for i in range(size):
            flower[u, i] = tmp[i]


@njit(cache=True)
def _augment(gu, gv, match, st, pa, ffrom, flower, flen, n, u, v):
    while True:
        xnv = st[match[u]]
        _set_match(gu, gv, match, ffrom, flower, flen, n, u, v)
        if xnv == 0:
            return
        _set_match(gu, gv, match, ffrom, flower, flen, n, xnv, st[pa[xnv]])
        u = st[pa[xnv]]
        v = xnv


@njit(cache=True)
def _get_lca(match, st, pa, vis, meta, u, v):
    meta[_STAMP] += 1
    t = meta[_STAMP]
    while u != 0 or v != 0:
        if u != 0:
            if vis[u] == t:
                return u
            vis[u] = t
            u = st[match[u]]
            if u != 0:
                u = st[pa[u]]
        u, v = v, u
    return 0


@njit(cache=True)
def _add_blossom(state, u, lca, v):
    (gu, gv, gw, lab, match, slack, st, pa, ffrom, S, vis, flower, flen, q, meta, stack) = state
    n = meta[_N]
    b = n + 1
    while b <= meta[_NX] and st[b] != 0:
        b += 1
    if b > meta[_NX]:
        meta[_NX] += 1
    n_x = meta[_NX]
    lab[b] = 0
    S[b] = 0
    match[b] = match[lca]
    flen[b] = 0
    flower[b, flen[b]] = lca
    flen[b] += 1
    x = u
    while x != lca:
        flower[b, flen[b]] = x
        flen[b] += 1
        y = st[match[x]]
        flower[b, flen[b]] = y
        flen[b] += 1
        _q_push(flower, flen, q, meta, y, stack)
        x = st[pa[y]]
    lo = 1
    hi = flen[b] - 1
    while lo < hi:
        t = flower[b, lo]
        flower[b, lo] = flower[b, hi]
        flower[b, hi] = t
        lo += 1
        hi -= 1
    x = v
    while x != lca:
        flower[b, flen[b]] = x
        flen[b] += 1
        y = st[match[x]]
        flower[b, flen[b]] = y
        flen[b] += 1
        _q_push(flower, flen, q, meta, y, stack)
        x = st[pa[y]]
    _set_st(flower, flen, st, n, b, b, stack)
    for x in range(1, n_x + 1):
        gw[b, x] = 0
        gw[x, b] = 0
    for x in range(1, n + 1):
        ffrom[b, x] = 0
    for i in range(flen[b]):
        xs = flower[b, i]
        for x in range(1, n_x + 1):
            if gw[xs, x] > 0 and (gw[b, x] == 0 or _e_delta(gu, gv, gw, lab, xs, x)
                                  < _e_delta(gu, gv, gw, lab, b, x)):
                gu[b, x] = gu[xs, x]
                gv[b, x] = gv[xs, x]
                gw[b, x] = gw[xs, x]
                gu[x, b] = gu[x, xs]
                gv[x, b] = gv[x, xs]
                gw[x, b] = gw[x, xs]
        for x in range(1, n + 1):
            if ffrom[xs, x] != 0:
                ffrom[b, x] = xs
    _set_slack(gu, gv, gw, lab, slack, st, S, n, b)


@njit(cache=True)
def _expand_blossom(state, b):
    (gu, gv, gw, lab, match, slack, st, pa, ffrom, S, vis, flower, flen, q, meta, stack) = state
    n = meta[_N]
    for i in range(flen[b]):
        _set_st(flower, flen, st, n, flower[b, i], flower[b, i], stack)
    xr = ffrom[b, gu[b, pa[b]]]
    pr = _get_pr(flower, flen, b, xr)
    for i in range(0, pr, 2):
        xs = flower[b, i]
        xns = flower[b, i + 1]
        pa[xs] = gu[xns, xs]
        S[xs] = 1
        S[xns] = 0
        slack[xs] = 0
        _set_slack(gu, gv, gw, lab, slack, st, S, n, xns)
        _q_push(flower, flen, q, meta, xns, stack)
    S[xr] = 1
    pa[xr] = pa[b]
    for i in range(pr + 1, flen[b]):
        xs = flower[b, i]
        S[xs] = -1
        _set_slack(gu, gv, gw, lab, slack, st, S, n, xs)
    st[b] = 0


@njit(cache=True)
def _on_found_edge(state, a, c):
    (gu, gv, gw, lab, match, slack, st, pa, ffrom, S, vis, flower, flen, q, meta, stack) = state
    n = meta[_N]
    eu = gu[a, c]
    ev = gv[a, c]
    u = st[eu]
    v = st[ev]
    if S[v] == -1:
        pa[v] = eu
        S[v] = 1
        nu = st[match[v]]
        slack[v] = 0
        slack[nu] = 0
        S[nu] = 0
        _q_push(flower, flen, q, meta, nu, stack)
    elif S[v] == 0:
        lca = _get_lca(match, st, pa, vis, meta, u, v)
        if lca == 0:
            _augment(gu, gv, match, st, pa, ffrom, flower, flen, n, u, v)
            _augment(gu, gv, match, st, pa, ffrom, flower, flen, n, v, u)
            return True
        _add_blossom(state, u, lca, v)
    return False


@njit(cache=True)
def _matching_phase(state, perfect):
    (gu, gv, gw, lab, match, slack, st, pa, ffrom, S, vis, flower, flen, q, meta, stack) = state
    n = meta[_N]
    n_x = meta[_NX]
    for x in range(1, n_x + 1):
        S[x] = -1
        slack[x] = 0
    meta[_QHEAD] = 0
    meta[_QTAIL] = 0
    for x in range(1, n_x + 1):
        if st[x] == x and match[x] == 0:
            pa[x] = 0
            S[x] = 0
            _q_push(flower, flen, q, meta, x, stack)
    if meta[_QTAIL] == meta[_QHEAD]:
        return False
    while True:
        while meta[_QTAIL] > meta[_QHEAD]:
            u = q[meta[_QHEAD] % q.shape[0]]
            meta[_QHEAD] += 1
            if S[st[u]] == 1:
                continue
            for v in range(1, n + 1):
                if gw[u, v] > 0 and st[u] != st[v]:
                    if _e_delta(gu, gv, gw, lab, u, v) == 0:
                        if _on_found_edge(state, u, v):
                            return True
                    else:
                        _update_slack(gu, gv, gw, lab, slack, u, st[v])
        n_x = meta[_NX]
        d = _INF
        for b in range(n + 1, n_x + 1):
            if st[b] == b and S[b] == 1:
                d = min(d, lab[b] // 2)
        for x in range(1, n_x + 1):
            if st[x] == x and slack[x] != 0:
                if S[x] == -1:
                    d = min(d, _e_delta(gu, gv, gw, lab, slack[x], x))
                elif S[x] == 0:
                    d = min(d, _e_delta(gu, gv, gw, lab, slack[x], x) // 2)
        if d == _INF:
            # no augmenting path can ever appear
            return False
        for u in range(1, n + 1):
            if S[st[u]] == 0:
                if not perfect and lab[u] <= d:
                    return False
                lab[u] -= d
            elif S[st[u]] == 1:
                lab[u] += d
        for b in range(n + 1, n_x + 1):
            if st[b] == b:
                if S[st[b]] == 0:
                    lab[b] += d * 2
                elif S[st[b]] == 1:
                    lab[b] -= d * 2
        meta[_QHEAD] = 0
        meta[_QTAIL] = 0
        for x in range(1, n_x + 1):
            if (st[x] == x and slack[x] != 0 and st[slack[x]] != x
                    and _e_delta(gu, gv, gw, lab, slack[x], x) == 0):
                if _on_found_edge(state, slack[x], x):
                    return True
        for b in range(n + 1, n_x + 1):
            if st[b] == b and S[b] == 1 and lab[b] == 0:
                _expand_blossom(state, b)
    return False


@njit(cache=True)
def _alloc(n):
    m = 2 * n + 1
    gu = np.zeros((m, m), dtype=np.int64)
    gv = np.zeros((m, m), dtype=np.int64)
    gw = np.zeros((m, m), dtype=np.int64)
    lab = np.zeros(m, dtype=np.int64)
    match = np.zeros(m, dtype=np.int64)
    slack = np.zeros(m, dtype=np.int64)
    st = np.zeros(m, dtype=np.int64)
    pa = np.zeros(m, dtype=np.int64)
    ffrom = np.zeros((m, n + 1), dtype=np.int64)
    S = np.zeros(m, dtype=np.int64)
    vis = np.zeros(m, dtype=np.int64)
    flower = np.zeros((m, m), dtype=np.int64)
    flen = np.zeros(m, dtype=np.int64)
    q = np.zeros(4 * m + 8, dtype=np.int64)
    meta = np.zeros(5, dtype=np.int64)
    stack = np.zeros(4 * m + 8, dtype=np.int64)
    meta[_N] = n
    meta[_NX] = n
    for u in range(1, n + 1):
        for v in range(1, n + 1):
            gu[u, v] = u
            gv[u, v] = v
        st[u] = u
        ffrom[u, u] = u
    return (gu, gv, gw, lab, match, slack, st, pa, ffrom, S, vis, flower, flen, q, meta, stack)


@njit(cache=True)
def _mates(state):
    match = state[4]
    n = state[14][_N]
    mate = np.full(n, -1, dtype=np.int64)
    for u in range(1, n + 1):
        if match[u] != 0:
            mate[u - 1] = match[u] - 1
    return mate


@njit(cache=True)
def max_weight_matching(w):
    """Maximum-weight matching for a symmetric int64 weight matrix (0-based, w==0: no edge).

    Returns ``mate`` with ``mate[i] = j`` for matched pairs and ``-1`` for
    unmatched vertices.
    """
    n = w.shape[0]
    state = _alloc(n)
    gw = state[2]
    lab = state[3]
    w_max = 0
    for u in range(1, n + 1):
        for v in range(1, n + 1):
            if u != v:
                gw[u, v] = w[u - 1, v - 1]
                if gw[u, v] > w_max:
                    w_max = gw[u, v]
    for u in range(1, n + 1):
        lab[u] = w_max
    while _matching_phase(state, False):
        pass
    return _mates(state)


@njit(cache=True)
def assignment_duals(cost):
    """Min-cost bipartite assignment with dual potentials (shortest augmenting paths).

    ``cost`` is a square int64 matrix. Returns ``(col_of_row, u, v)`` with
    ``u[i] + v[j] <= cost[i, j]`` everywhere and equality on the assignment.
    """
    n = cost.shape[0]
    inf = np.iinfo(np.int64).max
    u = np.zeros(n + 1, dtype=np.int64)
    v = np.zeros(n + 1, dtype=np.int64)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1, dtype=np.int64)
    used = np.zeros(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row, u[1:].copy(), v[1:].copy()


@njit(cache=True)
def min_cost_perfect_matching(cost, present, forbid):
    """Minimum-cost perfect matching on the graph of ``present`` edges.

    ``cost`` holds nonnegative int64 edge costs; ``forbid`` is a cost larger
    than any perfect matching could need, used for absent pairs in the
    bipartite warm start. The blossom search starts from the halved
    bipartite-relaxation duals with every doubly tight pair pre-matched;
    for Euclidean inputs that relaxation is almost always integral, leaving
    few or no augmentations.

    Returns ``mate`` (``-1`` where the graph has no perfect matching).
    """
    n = cost.shape[0]
    c_max = 0
    for i in range(n):
        for j in range(n):
            if present[i, j] and cost[i, j] > c_max:
                c_max = cost[i, j]
    big = c_max + 1
    bip = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            bip[i, j] = cost[i, j] if present[i, j] else forbid
    col, du, dv = assignment_duals(bip)
    state = _alloc(n)
    gw = state[2]
    lab = state[3]
    match = state[4]
    # blossom weights are 2 * (big - cost); labels satisfy lab_i + lab_j >= 2 * gw
    for i in range(n):
        for j in range(n):
            if present[i, j] and i != j:
                gw[i + 1, j + 1] = 2 * (big - cost[i, j])
    s = du + dv
    for i in range(n):
        lab[i + 1] = 2 * big - 2 * s[i]
    for i in range(n):
        j = col[i]
        if j > i and col[j] == i and present[i, j] and s[i] + s[j] == 2 * cost[i, j]:
            match[i + 1] = j + 1
            match[j + 1] = i + 1
    while _matching_phase(state, True):
        pass
    return _mates(state)
