"""JIT-compiled inner loops with a pure-numpy fallback.

The hot kernels (tiling ground-state searches) run under numba's ``@njit``
by default.  Setting the environment variable ``SIMFORGE_NO_NUMBA=1`` before
import selects the pure-numpy implementations instead; both paths produce
identical results and ``benchmarks/benchmark_kernels.py`` compares their
throughput.

Energies are handled as integers equal to twice the physical energy, so the
half-integer site bonuses of the counter tileset stay exact.
"""

import os

import numpy as np

USE_NUMBA = os.environ.get("SIMFORGE_NO_NUMBA", "") not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is an install requirement
        USE_NUMBA = False

if not USE_NUMBA:
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


INF = np.int64(2**62)


# ---------------------------------------------------------------------------
# Exhaustive ground search.  Configurations of a W x H grid over ``ntiles``
# labels are enumerated as base-``ntiles`` integers, cell (row, col) holding
# digit row*W + col.


@njit(cache=True)
def _exhaust_jit(ntiles, W, H, hpen, vpen, wt2, bound2, total):
    best = INF
    count = np.int64(0)
    best_cfg = np.zeros(W * H, dtype=np.int64)
    digits = np.zeros(W * H, dtype=np.int64)
    for cfg in range(total):
        x = cfg
        for k in range(W * H):
            digits[k] = x % ntiles
            x //= ntiles
        e = np.int64(0)
        for r in range(H):
            for c in range(W):
                t = digits[r * W + c]
                e += wt2[t] + bound2[r * W + c, t]
                if c + 1 < W:
                    e += hpen[t, digits[r * W + c + 1]]
                if r + 1 < H:
                    e += vpen[t, digits[(r + 1) * W + c]]
        if e < best:
            best = e
            count = np.int64(1)
            for k in range(W * H):
                best_cfg[k] = digits[k]
        elif e == best:
            count += np.int64(1)
    return best, count, best_cfg


def _exhaust_numpy(ntiles, W, H, hpen, vpen, wt2, bound2, total):
    best = INF
    count = np.int64(0)
    best_cfg = np.zeros(W * H, dtype=np.int64)
    powers = ntiles ** np.arange(W * H, dtype=np.int64)
    chunk = 1 << 18
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = (idx[:, None] // powers[None, :]) % ntiles
        e = wt2[digits].sum(axis=1)
        for cell in range(W * H):
            e += bound2[cell][digits[:, cell]]
        grid = digits.reshape(-1, H, W)
        e += hpen[grid[:, :, :-1], grid[:, :, 1:]].sum(axis=(1, 2))
        e += vpen[grid[:, :-1, :], grid[:, 1:, :]].sum(axis=(1, 2))
        m = np.int64(e.min())
        if m < best:
            best = m
            count = np.int64(0)
            best_cfg = digits[int(e.argmin())].copy()
        if m == best:
            count += np.int64((e == best).sum())
    return best, count, best_cfg


def tiling_exhaustive(ntiles, W, H, hpen, vpen, wt2, bound2):
    """Exact minimum over all tile assignments.

    Returns ``(twice_min_energy, minimizer_count, one_minimizer)``; the
    minimizer is a flat array of tile indices in row-major cell order.
    """
    total = ntiles ** (W * H)
    args = (ntiles, W, H,
            np.ascontiguousarray(hpen.astype(np.int64)),
            np.ascontiguousarray(vpen.astype(np.int64)),
            np.ascontiguousarray(wt2.astype(np.int64)),
            np.ascontiguousarray(bound2.astype(np.int64)),
            total)
    if USE_NUMBA:
        return _exhaust_jit(*args)
    return _exhaust_numpy(*args)


# ---------------------------------------------------------------------------
# Row-profile dynamic program.  The state is one completed row encoded as a
# base-``ntiles`` integer (digit c = tile at column c).  Rows after the first
# are built cell by cell; while column c is being replaced, digit c of the
# profile still holds the tile directly above.


@njit(cache=True)
def _transfer_jit(ntiles, W, H, hpen, vpen, wt2, bound2):
    nstates = ntiles**W
    powc = np.zeros(W, dtype=np.int64)
    p = np.int64(1)
    for c in range(W):
        powc[c] = p
        p *= ntiles
    dp = np.zeros(nstates, dtype=np.int64)
    cnt = np.zeros(nstates, dtype=np.int64)
    for s in range(nstates):
        e = np.int64(0)
        for c in range(W):
            t = (s // powc[c]) % ntiles
            e += wt2[t] + bound2[c, t]
            if c > 0:
                e += hpen[(s // powc[c - 1]) % ntiles, t]
        dp[s] = e
        cnt[s] = 1
    prev = np.zeros((H, nstates), dtype=np.int64)
    for r in range(1, H):
        cdp = dp.copy()
        ccnt = cnt.copy()
        cprev = np.arange(nstates).astype(np.int64)
        for c in range(W):
            edp = np.full(nstates, INF, dtype=np.int64)
            ecnt = np.zeros(nstates, dtype=np.int64)
            eprev = np.full(nstates, -1, dtype=np.int64)
            for s in range(nstates):
                if cdp[s] >= INF:
                    continue
                above = (s // powc[c]) % ntiles
                left = (s // powc[c - 1]) % ntiles if c > 0 else -1
                for t in range(ntiles):
                    e = cdp[s] + wt2[t] + bound2[r * W + c, t] + vpen[above, t]
                    if c > 0:
                        e += hpen[left, t]
                    ns = s + (t - above) * powc[c]
                    if e < edp[ns]:
                        edp[ns] = e
                        ecnt[ns] = ccnt[s]
                        eprev[ns] = cprev[s]
                    elif e == edp[ns]:
                        ecnt[ns] += ccnt[s]
            cdp = edp
            ccnt = ecnt
            cprev = eprev
        dp = cdp
        cnt = ccnt
        for s in range(nstates):
            prev[r, s] = cprev[s]
    best = INF
    for s in range(nstates):
        if dp[s] < best:
            best = dp[s]
    count = np.int64(0)
    bs = np.int64(-1)
    for s in range(nstates):
        if dp[s] == best:
            count += cnt[s]
            if bs < 0:
                bs = np.int64(s)
    rows = np.zeros(H, dtype=np.int64)
    rows[H - 1] = bs
    for r in range(H - 1, 0, -1):
        rows[r - 1] = prev[r, rows[r]]
    return best, count, rows


def _transfer_numpy(ntiles, W, H, hpen, vpen, wt2, bound2):
    nstates = ntiles**W
    powc = ntiles ** np.arange(W, dtype=np.int64)
    digits = (np.arange(nstates, dtype=np.int64)[:, None] // powc[None, :]) % ntiles

    def intra_row_cost(r):
        e = wt2[digits].sum(axis=1)
        for c in range(W):
            e += bound2[r * W + c][digits[:, c]]
        for c in range(1, W):
            e += hpen[digits[:, c - 1], digits[:, c]]
        return e

    dp = intra_row_cost(0)
    cnt = np.ones(nstates, dtype=np.int64)
    prev = np.zeros((H, nstates), dtype=np.int64)
    for r in range(1, H):
        cdp = dp
        ccnt = cnt
        cprev = np.arange(nstates, dtype=np.int64)
        for c in range(W):
            lo = int(powc[c])
            hi = nstates // (lo * ntiles)
            sdp = cdp.reshape(hi, ntiles, lo)
            scnt = ccnt.reshape(hi, ntiles, lo)
            sprev = cprev.reshape(hi, ntiles, lo)
            cand = sdp[..., None] + vpen[None, :, None, :]    # (hi, above, lo, t)
            emin = cand.min(axis=1)                           # (hi, lo, t)
            ties = cand == emin[:, None, :, :]
            ncnt = np.where(ties, scnt[..., None], 0).sum(axis=1)
            amin = cand.argmin(axis=1)
            hi_i = np.arange(hi)[:, None, None]
            lo_i = np.arange(lo)[None, :, None]
            nprev = sprev[hi_i, amin, lo_i]                   # (hi, lo, t)
            cdp = np.transpose(emin, (0, 2, 1)).reshape(-1)
            ccnt = np.transpose(ncnt, (0, 2, 1)).reshape(-1)
            cprev = np.transpose(nprev, (0, 2, 1)).reshape(-1)
            t_here = digits[:, c]
            add = wt2[t_here] + bound2[r * W + c][t_here]
            if c > 0:
                add = add + hpen[digits[:, c - 1], t_here]
            cdp = cdp + add
        dp = cdp
        cnt = ccnt
        prev[r] = cprev
    best = np.int64(dp.min())
    mask = dp == best
    count = np.int64(cnt[mask].sum())
    rows = np.zeros(H, dtype=np.int64)
    rows[H - 1] = int(np.flatnonzero(mask)[0])
    for r in range(H - 1, 0, -1):
        rows[r - 1] = prev[r, rows[r]]
    return best, count, rows


def tiling_transfer(ntiles, W, H, hpen, vpen, wt2, bound2):
    """Row-profile DP giving exact ``(twice_min_energy, count, row_states)``.

    ``row_states`` encodes one minimizing configuration as one base-``ntiles``
    integer per row (digit c = tile at column c).
    """
    args = (ntiles, W, H,
            np.ascontiguousarray(hpen.astype(np.int64)),
            np.ascontiguousarray(vpen.astype(np.int64)),
            np.ascontiguousarray(wt2.astype(np.int64)),
            np.ascontiguousarray(bound2.astype(np.int64)))
    if USE_NUMBA:
        return _transfer_jit(*args)
    return _transfer_numpy(*args)
