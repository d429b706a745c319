"""Kernel bodies, loaded twice by mobgossip._kernels.

The loader injects MOBGOSSIP_JIT before executing this file: one instance is
compiled with numba, the twin stays interpreted.  Keeping each instance
self-contained makes the interpreted fallback reproduce the compiled kernels
bit for bit (the uint64 rng state never crosses between differently typed
code).
"""

import numpy as np

MOBGOSSIP_JIT = globals().get("MOBGOSSIP_JIT", False)

if MOBGOSSIP_JIT:
    from numba import njit

    def _jit(fn):
        return njit(cache=True, nogil=True)(fn)
else:
    def _jit(fn):
        return fn

# mobility kind codes shared with the mobility module
K_STATIC = 0
K_FULL = 1
K_HORIZONTAL = 2
K_VERTICAL = 3
K_LOCAL = 4
K_ROW_WALK = 5

# splitmix64 constants
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_U53 = 1.0 / 9007199254740992.0  # 2**-53


@_jit
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@_jit
def _next_u64(state):
    state = state + _GOLD
    return state, _mix64(state)


@_jit
def _u01(state):
    state, z = _next_u64(state)
    return state, float(z >> _S11) * _U53


@_jit
def _randint(state, n):
    # floor(u * n); u < 1 strictly, so the result is in [0, n)
    state, u = _u01(state)
    return state, int(u * n)


# ---------------------------------------------------------------------------
# discrete topologies (torus side_r x side_c; a cycle is 1 x n)
# ---------------------------------------------------------------------------


@_jit
def _wrap_dist(a, b, side):
    d = a - b
    if d < 0:
        d = -d
    if d > side - d:
        d = side - d
    return d


@_jit
def _adjacent_discrete(r1, c1, r2, c2, side_r, side_c):
    # co-location counts as adjacency: torus L1 distance <= 1
    return _wrap_dist(r1, r2, side_r) + _wrap_dist(c1, c2, side_c) <= 1


@_jit
def _resample_discrete(rows, cols, kinds, home_r, home_c, param, side_r, side_c, state):
    n = kinds.shape[0]
    for a in range(n):
        k = kinds[a]
        if k == K_STATIC:
            continue
        elif k == K_FULL:
            state, r = _randint(state, side_r)
            state, c = _randint(state, side_c)
            rows[a] = r
            cols[a] = c
        elif k == K_HORIZONTAL:
            state, c = _randint(state, side_c)
            cols[a] = c
        elif k == K_VERTICAL:
            state, r = _randint(state, side_r)
            rows[a] = r
        elif k == K_LOCAL:
            m = param[a]
            w = 2 * m + 1
            state, dr = _randint(state, w)
            state, dc = _randint(state, w)
            rows[a] = (home_r[a] - m + dr) % side_r
            cols[a] = (home_c[a] - m + dc) % side_c
        else:  # K_ROW_WALK: lazy simple random walk within the agent's row
            c = cols[a]
            steps = param[a]
            for _ in range(steps):
                state, u = _u01(state)
                if u < 0.5:
                    continue
                elif u < 0.75:
                    c = (c - 1) % side_c
                else:
                    c = (c + 1) % side_c
            cols[a] = c
    return state


@_jit
def _pick_pair_discrete(rows, cols, side_r, side_c, nbuf, state):
    """Select agent i uniformly, then j uniformly from i's neighbors.

    Returns (state, i, j); j == -1 when i has no neighbors this tick.
    """
    n = rows.shape[0]
    state, i = _randint(state, n)
    cnt = 0
    for k in range(n):
        if k == i:
            continue
        if _adjacent_discrete(rows[i], cols[i], rows[k], cols[k], side_r, side_c):
            nbuf[cnt] = k
            cnt += 1
    if cnt == 0:
        return state, i, -1
    state, pick = _randint(state, cnt)
    return state, i, nbuf[pick]


@_jit
def _deviation_norm(x, mean):
    sq = 0.0
    for a in range(x.shape[0]):
        d = x[a] - mean
        sq += d * d
    return np.sqrt(sq)


@_jit
def gossip_trace_discrete(
    rows, cols, kinds, home_r, home_c, param, side_r, side_c, x, mean, norm0, err, state
):
    """Run len(err)-1 gossip ticks, filling err[t] = ||x(t) - mean|| / norm0.

    Positions and values are updated in place; returns the final rng state.
    """
    n = rows.shape[0]
    nbuf = np.empty(n, np.int64)
    err[0] = _deviation_norm(x, mean) / norm0
    for t in range(1, err.shape[0]):
        state = _resample_discrete(
            rows, cols, kinds, home_r, home_c, param, side_r, side_c, state
        )
        state, i, j = _pick_pair_discrete(rows, cols, side_r, side_c, nbuf, state)
        if j >= 0:
            avg = 0.5 * (x[i] + x[j])
            x[i] = avg
            x[j] = avg
        err[t] = _deviation_norm(x, mean) / norm0
    return state


@_jit
def gossip_crossing_discrete(
    rows, cols, kinds, home_r, home_c, param, side_r, side_c, x, mean, norm0,
    eps, max_ticks, state,
):
    """First tick t with ||x(t) - mean||/norm0 < eps, or -1 within max_ticks.

    Valid because the normalized error never increases along a trace.
    """
    n = rows.shape[0]
    nbuf = np.empty(n, np.int64)
    if _deviation_norm(x, mean) / norm0 < eps:
        return state, 0
    for t in range(1, max_ticks + 1):
        state = _resample_discrete(
            rows, cols, kinds, home_r, home_c, param, side_r, side_c, state
        )
        state, i, j = _pick_pair_discrete(rows, cols, side_r, side_c, nbuf, state)
        if j >= 0:
            avg = 0.5 * (x[i] + x[j])
            x[i] = avg
            x[j] = avg
            if _deviation_norm(x, mean) / norm0 < eps:
                return state, t
    return state, -1


@_jit
def contact_mc_discrete(
    rows, cols, kinds, home_r, home_c, param, side_r, side_c, samples, p_sum, p_sq, state
):
    """Accumulate Monte Carlo estimates of contact probabilities.

    For each sampled placement, agent i contacts j with probability
    1/(n * |N_i|) for every j in N_i; p_sum/p_sq hold per-entry sums of the
    sampled values and their squares (for standard errors).
    """
    n = rows.shape[0]
    nbuf = np.empty(n, np.int64)
    inv_n = 1.0 / n
    for _ in range(samples):
        state = _resample_discrete(
            rows, cols, kinds, home_r, home_c, param, side_r, side_c, state
        )
        for i in range(n):
            cnt = 0
            for k in range(n):
                if k == i:
                    continue
                if _adjacent_discrete(
                    rows[i], cols[i], rows[k], cols[k], side_r, side_c
                ):
                    nbuf[cnt] = k
                    cnt += 1
            if cnt == 0:
                continue
            val = inv_n / cnt
            vsq = val * val
            for t in range(cnt):
                j = nbuf[t]
                p_sum[i, j] += val
                p_sq[i, j] += vsq
    return state


# ---------------------------------------------------------------------------
# continuous unit torus (RGG)
# ---------------------------------------------------------------------------


@_jit
def _wrap_dist_unit(a, b):
    d = a - b
    if d < 0.0:
        d = -d
    if d > 1.0 - d:
        d = 1.0 - d
    return d


@_jit
def _adjacent_continuous(u1, v1, u2, v2, radius_sq):
    du = _wrap_dist_unit(u1, u2)
    dv = _wrap_dist_unit(v1, v2)
    return du * du + dv * dv < radius_sq


@_jit
def _resample_continuous(ys, xs, kinds, state):
    # component 0 (ys) is the vertical coordinate, component 1 (xs) horizontal,
    # matching (row, col) on the lattice
    n = kinds.shape[0]
    for a in range(n):
        k = kinds[a]
        if k == K_STATIC:
            continue
        elif k == K_FULL:
            state, y = _u01(state)
            state, x = _u01(state)
            ys[a] = y
            xs[a] = x
        elif k == K_HORIZONTAL:
            state, x = _u01(state)
            xs[a] = x
        else:  # K_VERTICAL
            state, y = _u01(state)
            ys[a] = y
    return state


@_jit
def _pick_pair_continuous(ys, xs, radius_sq, nbuf, state):
    n = ys.shape[0]
    state, i = _randint(state, n)
    cnt = 0
    for k in range(n):
        if k == i:
            continue
        if _adjacent_continuous(ys[i], xs[i], ys[k], xs[k], radius_sq):
            nbuf[cnt] = k
            cnt += 1
    if cnt == 0:
        return state, i, -1
    state, pick = _randint(state, cnt)
    return state, i, nbuf[pick]


@_jit
def gossip_trace_continuous(ys, xs, kinds, radius_sq, x, mean, norm0, err, state):
    n = ys.shape[0]
    nbuf = np.empty(n, np.int64)
    err[0] = _deviation_norm(x, mean) / norm0
    for t in range(1, err.shape[0]):
        state = _resample_continuous(ys, xs, kinds, state)
        state, i, j = _pick_pair_continuous(ys, xs, radius_sq, nbuf, state)
        if j >= 0:
            avg = 0.5 * (x[i] + x[j])
            x[i] = avg
            x[j] = avg
        err[t] = _deviation_norm(x, mean) / norm0
    return state


@_jit
def gossip_crossing_continuous(ys, xs, kinds, radius_sq, x, mean, norm0, eps, max_ticks, state):
    n = ys.shape[0]
    nbuf = np.empty(n, np.int64)
    if _deviation_norm(x, mean) / norm0 < eps:
        return state, 0
    for t in range(1, max_ticks + 1):
        state = _resample_continuous(ys, xs, kinds, state)
        state, i, j = _pick_pair_continuous(ys, xs, radius_sq, nbuf, state)
        if j >= 0:
            avg = 0.5 * (x[i] + x[j])
            x[i] = avg
            x[j] = avg
            if _deviation_norm(x, mean) / norm0 < eps:
                return state, t
    return state, -1


@_jit
def contact_mc_continuous(ys, xs, kinds, radius_sq, samples, p_sum, p_sq, state):
    n = ys.shape[0]
    nbuf = np.empty(n, np.int64)
    inv_n = 1.0 / n
    for _ in range(samples):
        state = _resample_continuous(ys, xs, kinds, state)
        for i in range(n):
            cnt = 0
            for k in range(n):
                if k == i:
                    continue
                if _adjacent_continuous(ys[i], xs[i], ys[k], xs[k], radius_sq):
                    nbuf[cnt] = k
                    cnt += 1
            if cnt == 0:
                continue
            val = inv_n / cnt
            vsq = val * val
            for t in range(cnt):
                j = nbuf[t]
                p_sum[i, j] += val
                p_sq[i, j] += vsq
    return state
