"""Hot sampling loops: typed walks, neighbor layers, negative draws.

Each kernel exists twice with bit-identical output: a numba ``@njit``
version (``*_numba``) and a vectorized numpy version (``*_numpy``). The
dispatchers at the bottom pick one according to the active backend.

All randomness is counter-based: callers pass one uint64 stream key per
independent unit of work (walk row, batch node, training pair) and kernels
consume consecutive counters in a documented order, so output never depends
on scheduling.
"""

from __future__ import annotations

import numpy as np

from ..rng import GOLDEN, MIX_A, MIX_B
from .backend import HAS_NUMBA, resolve_backend

_INV53 = 1.0 / 9007199254740992.0  # 2**-53
_INV32 = 1.0 / 4294967296.0  # 2**-32

# Negative sampling: counter layout is slot * ATTEMPT_STRIDE + attempt.
ATTEMPT_STRIDE = 1 << 21
MAX_ATTEMPTS = 1 << 20

_U = np.uint64
_G = _U(GOLDEN)
_A = _U(MIX_A)
_B = _U(MIX_B)
_S30, _S27, _S31 = _U(30), _U(27), _U(31)
_S11, _S32 = _U(11), _U(32)
_M32 = _U(0xFFFFFFFF)


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _mix_np(z):
    z = z + _G
    z = (z ^ (z >> _S30)) * _A
    z = (z ^ (z >> _S27)) * _B
    return z ^ (z >> _S31)


def _draw_np(keys, counters):
    return _mix_np(keys + counters.astype(np.uint64) * _G)


def _pick_np(u, n):
    """floor(u53 * n) with the same rounding as the scalar kernels."""
    f = (u >> _S11).astype(np.float64) * _INV53
    idx = (f * n.astype(np.float64)).astype(np.int64)
    return np.minimum(idx, np.maximum(n - 1, 0))


def walks_numpy(nbr_by_type, type_ptr_r, cyc_types, starts, keys, walk_len):
    """Typed random walks, one row per (start, walk) pair.

    ``type_ptr_r`` is the (V, T+1) absolute-offset table of one relationship,
    ``cyc_types`` the scheme's node types o_0..o_{n-1} applied cyclically.
    Dead ends truncate the row; remaining cells stay -1. Counter = position.
    """
    n_rows = len(starts)
    out = np.full((n_rows, walk_len), -1, dtype=np.int32)
    out[:, 0] = starts
    v = starts.astype(np.int64)
    active = np.ones(n_rows, dtype=bool)
    n_cyc = len(cyc_types)
    limit = len(nbr_by_type) - 1
    for t in range(1, walk_len):
        tau = int(cyc_types[t % n_cyc])
        lo = type_ptr_r[v, tau]
        deg = type_ptr_r[v, tau + 1] - lo
        active = active & (deg > 0)
        if not active.any():
            break
        u = _draw_np(keys, np.full(n_rows, t, dtype=np.uint64))
        idx = _pick_np(u, np.maximum(deg, 1))
        nxt = nbr_by_type[np.minimum(lo + idx, limit)].astype(np.int64)
        v = np.where(active, nxt, v)
        out[active, t] = nxt[active]
    return out


def context_pairs_numpy(walks, window):
    """Expand a padded walk matrix into (center, context) id arrays.

    Emission order: for each offset 1..window, all forward pairs in
    row-major scan order, then all backward pairs.
    """
    centers, contexts = [], []
    for off in range(1, window + 1):
        if off >= walks.shape[1]:
            break
        left = walks[:, :-off]
        right = walks[:, off:]
        valid = (left >= 0) & (right >= 0)
        centers.append(left[valid])
        contexts.append(right[valid])
        centers.append(right[valid])
        contexts.append(left[valid])
    if not centers:
        empty = np.empty(0, dtype=np.int32)
        return empty, empty.copy()
    return np.concatenate(centers), np.concatenate(contexts)


def metapath_layers_numpy(steps_indptr, steps_indices, starts, fanouts, keys):
    """Scheme-guided neighbor layers, flattened per-row into one matrix.

    ``steps_indptr[j]`` indexes the step-(j+1) adjacency, already filtered
    to template-completable targets, in ``steps_indices``. An origin with no
    first-step candidate starts no complete instance and repeats itself
    through every layer; live branches never dead-end because sampled nodes
    are completable by construction. Counters run p-major within each layer.
    """
    n_rows = len(starts)
    k = len(fanouts)
    sizes = [1]
    for f in fanouts:
        sizes.append(sizes[-1] * int(f))
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    out = np.empty((n_rows, offsets[-1]), dtype=np.int32)
    out[:, 0] = starts
    s64 = starts.astype(np.int64)
    dead = (steps_indptr[0][s64 + 1] - steps_indptr[0][s64]) <= 0
    cnt_base = 0
    limit = max(len(steps_indices) - 1, 0)
    for j in range(k):
        f = int(fanouts[j])
        parents = out[:, offsets[j]: offsets[j + 1]].astype(np.int64)
        lo = steps_indptr[j][parents]
        deg = steps_indptr[j][parents + 1] - lo
        n_draws = sizes[j] * f
        counters = cnt_base + np.arange(n_draws, dtype=np.uint64)
        u = _draw_np(keys[:, None, None], counters.reshape(1, sizes[j], f))
        idx = _pick_np(u, np.maximum(deg, 1)[:, :, None])
        child = steps_indices[np.minimum(lo[:, :, None] + idx, limit)]
        child = np.where((deg > 0)[:, :, None], child, parents[:, :, None])
        out[:, offsets[j + 1]: offsets[j + 2]] = child.reshape(n_rows, n_draws)
        cnt_base += n_draws
    if dead.any():
        out[dead] = starts[dead, None]
    return out, offsets


def random_layers_numpy(rel_indptr, nbr_sorted, avail_list, avail_count,
                        starts, fanouts, keys):
    """Two-phase exploration layers: draw a relationship, then a neighbor.

    Isolated nodes repeat themselves. Each expansion consumes two counters
    (relationship, neighbor), p-major within each layer.
    """
    n_rows = len(starts)
    k = len(fanouts)
    sizes = [1]
    for f in fanouts:
        sizes.append(sizes[-1] * int(f))
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    out = np.empty((n_rows, offsets[-1]), dtype=np.int32)
    out[:, 0] = starts
    cnt_base = 0
    limit = len(nbr_sorted) - 1
    for j in range(k):
        f = int(fanouts[j])
        parents = out[:, offsets[j]: offsets[j + 1]].astype(np.int64)
        n_draws = sizes[j] * f
        c0 = cnt_base + 2 * np.arange(n_draws, dtype=np.uint64).reshape(1, sizes[j], f)
        u1 = _draw_np(keys[:, None, None], c0)
        u2 = _draw_np(keys[:, None, None], c0 + _U(1))
        kav = avail_count[parents][:, :, None]
        r_slot = _pick_np(u1, np.maximum(kav, 1))
        rel = avail_list[parents[:, :, None], r_slot]
        lo = rel_indptr[rel, parents[:, :, None]]
        deg = rel_indptr[rel, parents[:, :, None] + 1] - lo
        idx = _pick_np(u2, np.maximum(deg, 1))
        child = nbr_sorted[np.minimum(lo + idx, limit)]
        child = np.where(kav > 0, child, parents[:, :, None])
        out[:, offsets[j + 1]: offsets[j + 2]] = child.reshape(n_rows, n_draws)
        cnt_base += 2 * n_draws
    return out, offsets


def scatter_add_numpy(target, rows, values):
    """target[rows] += values via one bincount pass."""
    n, width = target.shape
    rows = np.asarray(rows).reshape(-1)
    flat = rows.astype(np.int64)[:, None] * width + np.arange(width, dtype=np.int64)
    acc = np.bincount(
        flat.ravel(), weights=np.asarray(values, dtype=np.float64).ravel(),
        minlength=n * width,
    )
    target += acc.reshape(n, width).astype(target.dtype)


def negatives_numpy(members, type_off, alias_idx, alias_thr, weights,
                    type_total_w, pos_in_type, node_type, contexts, count, keys):
    """Per-type unigram^0.75 draws, rejecting the context node.

    A context holding all of its type's mass switches that row to uniform
    rejection over the other members. Counter = slot * ATTEMPT_STRIDE +
    attempt; every attempt consumes exactly one counter.
    """
    n = len(contexts)
    out = np.full((n, count), -1, dtype=np.int32)
    ctype = node_type[contexts].astype(np.int64)
    toff = type_off[ctype]
    m = type_off[ctype + 1] - toff
    w_ctx = weights[toff + pos_in_type[contexts]]
    uniform_mode = (type_total_w[ctype] - w_ctx) <= 0.0

    for slot in range(count):
        remaining = np.arange(n)
        attempt = 0
        while len(remaining) and attempt < MAX_ATTEMPTS:
            counters = np.full(
                len(remaining), slot * ATTEMPT_STRIDE + attempt, dtype=np.uint64
            )
            u = _draw_np(keys[remaining], counters)
            mm = m[remaining]
            tt = toff[remaining]
            in_uniform = uniform_mode[remaining]
            # alias draw: high 32 bits pick the column, low 32 the coin
            col = (
                ((u >> _S32).astype(np.float64) * _INV32) * mm.astype(np.float64)
            ).astype(np.int64)
            col = np.minimum(col, mm - 1)
            take_alias = (u & _M32) < alias_thr[tt + col]
            cand_alias = members[
                tt + np.where(take_alias, col, alias_idx[tt + col].astype(np.int64))
            ]
            # uniform draw shares the same 64-bit variate
            cand_unif = members[tt + _pick_np(u, mm)]
            cand = np.where(in_uniform, cand_unif, cand_alias)
            ok = cand != contexts[remaining]
            out[remaining[ok], slot] = cand[ok]
            remaining = remaining[~ok]
            attempt += 1
        for row in remaining:  # pathological rejection streak: first non-context
            tt, mm = toff[row], m[row]
            block = members[tt: tt + mm]
            out[row, slot] = block[block != contexts[row]][0]
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAS_NUMBA:
    import numba as nb
    from numba import njit, prange

    @njit(nb.uint64(nb.uint64), cache=True, inline="always")
    def _mix_nb(z):
        z = z + _G
        z = (z ^ (z >> _S30)) * _A
        z = (z ^ (z >> _S27)) * _B
        return z ^ (z >> _S31)

    @njit(nb.uint64(nb.uint64, nb.uint64), cache=True, inline="always")
    def _draw_nb(key, counter):
        return _mix_nb(key + counter * _G)

    @njit(nb.int64(nb.uint64, nb.int64), cache=True, inline="always")
    def _pick_nb(u, n):
        f = np.float64(u >> _S11) * _INV53
        idx = np.int64(f * np.float64(n))
        if idx >= n:
            idx = n - 1
        return idx

    @njit(cache=True, parallel=True)
    def walks_numba(nbr_by_type, type_ptr_r, cyc_types, starts, keys, walk_len):
        n_rows = len(starts)
        n_cyc = len(cyc_types)
        out = np.full((n_rows, walk_len), -1, dtype=np.int32)
        for row in prange(n_rows):
            key = keys[row]
            v = np.int64(starts[row])
            out[row, 0] = v
            for t in range(1, walk_len):
                tau = cyc_types[t % n_cyc]
                lo = type_ptr_r[v, tau]
                deg = type_ptr_r[v, tau + 1] - lo
                if deg <= 0:
                    break
                u = _draw_nb(key, np.uint64(t))
                v = np.int64(nbr_by_type[lo + _pick_nb(u, deg)])
                out[row, t] = v
        return out

    @njit(cache=True)
    def context_pairs_numba(walks, window):
        n_rows, slen = walks.shape
        total = 0
        for off in range(1, window + 1):
            if off >= slen:
                break
            for row in range(n_rows):
                for i in range(slen - off):
                    if walks[row, i] >= 0 and walks[row, i + off] >= 0:
                        total += 2
        centers = np.empty(total, dtype=np.int32)
        contexts = np.empty(total, dtype=np.int32)
        pos = 0
        for off in range(1, window + 1):
            if off >= slen:
                break
            for row in range(n_rows):
                for i in range(slen - off):
                    if walks[row, i] >= 0 and walks[row, i + off] >= 0:
                        centers[pos] = walks[row, i]
                        contexts[pos] = walks[row, i + off]
                        pos += 1
            for row in range(n_rows):
                for i in range(slen - off):
                    if walks[row, i] >= 0 and walks[row, i + off] >= 0:
                        centers[pos] = walks[row, i + off]
                        contexts[pos] = walks[row, i]
                        pos += 1
        return centers, contexts

    @njit(cache=True, parallel=True)
    def metapath_layers_numba(steps_indptr, steps_indices, starts, fanouts, keys):
        n_rows = len(starts)
        k = len(fanouts)
        offsets = np.zeros(k + 2, dtype=np.int64)
        offsets[1] = 1
        size = 1
        for j in range(k):
            size = size * fanouts[j]
            offsets[j + 2] = offsets[j + 1] + size
        out = np.empty((n_rows, offsets[-1]), dtype=np.int32)
        for row in prange(n_rows):
            key = keys[row]
            start = np.int64(starts[row])
            out[row, 0] = start
            if steps_indptr[0, start + 1] - steps_indptr[0, start] <= 0:
                for q in range(1, offsets[-1]):
                    out[row, q] = start
                continue
            cnt = np.uint64(0)
            for j in range(k):
                f = fanouts[j]
                n_par = offsets[j + 1] - offsets[j]
                for p in range(n_par):
                    parent = np.int64(out[row, offsets[j] + p])
                    lo = steps_indptr[j, parent]
                    deg = steps_indptr[j, parent + 1] - lo
                    for c in range(f):
                        u = _draw_nb(key, cnt)
                        cnt += np.uint64(1)
                        if deg > 0:
                            child = steps_indices[lo + _pick_nb(u, deg)]
                        else:
                            child = np.int32(parent)
                        out[row, offsets[j + 1] + p * f + c] = child
        return out, offsets

    @njit(cache=True, parallel=True)
    def random_layers_numba(rel_indptr, nbr_sorted, avail_list, avail_count,
                            starts, fanouts, keys):
        n_rows = len(starts)
        k = len(fanouts)
        offsets = np.zeros(k + 2, dtype=np.int64)
        offsets[1] = 1
        size = 1
        for j in range(k):
            size = size * fanouts[j]
            offsets[j + 2] = offsets[j + 1] + size
        out = np.empty((n_rows, offsets[-1]), dtype=np.int32)
        for row in prange(n_rows):
            key = keys[row]
            out[row, 0] = starts[row]
            cnt = np.uint64(0)
            for j in range(k):
                f = fanouts[j]
                n_par = offsets[j + 1] - offsets[j]
                for p in range(n_par):
                    parent = np.int64(out[row, offsets[j] + p])
                    kav = np.int64(avail_count[parent])
                    for c in range(f):
                        u1 = _draw_nb(key, cnt)
                        u2 = _draw_nb(key, cnt + np.uint64(1))
                        cnt += np.uint64(2)
                        if kav > 0:
                            rel = np.int64(avail_list[parent, _pick_nb(u1, kav)])
                            lo = rel_indptr[rel, parent]
                            deg = rel_indptr[rel, parent + 1] - lo
                            child = nbr_sorted[lo + _pick_nb(u2, deg)]
                        else:
                            child = np.int32(parent)
                        out[row, offsets[j + 1] + p * f + c] = child
        return out, offsets

    @njit(cache=True)
    def _scatter_add_nb(target, rows, values):
        for i in range(len(rows)):
            r = rows[i]
            for j in range(values.shape[1]):
                target[r, j] += values[i, j]

    def scatter_add_numba(target, rows, values):
        rows = np.ascontiguousarray(np.asarray(rows).reshape(-1))
        values = np.ascontiguousarray(np.asarray(values, dtype=target.dtype))
        _scatter_add_nb(target, rows, values)

    @njit(cache=True, parallel=True)
    def negatives_numba(members, type_off, alias_idx, alias_thr, weights,
                        type_total_w, pos_in_type, node_type, contexts, count, keys):
        n = len(contexts)
        out = np.full((n, count), -1, dtype=np.int32)
        for row in prange(n):
            ctx = np.int64(contexts[row])
            t = np.int64(node_type[ctx])
            toff = type_off[t]
            m = type_off[t + 1] - toff
            w_ctx = weights[toff + pos_in_type[ctx]]
            uniform_mode = (type_total_w[t] - w_ctx) <= 0.0
            key = keys[row]
            for slot in range(count):
                found = False
                for attempt in range(MAX_ATTEMPTS):
                    u = _draw_nb(key, np.uint64(slot * ATTEMPT_STRIDE + attempt))
                    if uniform_mode:
                        cand = members[toff + _pick_nb(u, m)]
                    else:
                        col = np.int64(
                            np.float64(u >> _S32) * _INV32 * np.float64(m)
                        )
                        if col >= m:
                            col = m - 1
                        if (u & _M32) < alias_thr[toff + col]:
                            cand = members[toff + col]
                        else:
                            cand = members[toff + np.int64(alias_idx[toff + col])]
                    if np.int64(cand) != ctx:
                        out[row, slot] = cand
                        found = True
                        break
                if not found:
                    for i in range(m):
                        if np.int64(members[toff + i]) != ctx:
                            out[row, slot] = members[toff + i]
                            break
        return out


# ---------------------------------------------------------------------------
# dispatchers
# ---------------------------------------------------------------------------

def walks(nbr_by_type, type_ptr_r, cyc_types, starts, keys, walk_len, backend=None):
    if resolve_backend(backend) == "numba":
        return walks_numba(nbr_by_type, type_ptr_r, cyc_types, starts, keys, walk_len)
    return walks_numpy(nbr_by_type, type_ptr_r, cyc_types, starts, keys, walk_len)


def context_pairs_arrays(walks_matrix, window, backend=None):
    if resolve_backend(backend) == "numba":
        return context_pairs_numba(walks_matrix, window)
    return context_pairs_numpy(walks_matrix, window)


def metapath_layers(steps_indptr, steps_indices, starts, fanouts, keys, backend=None):
    if resolve_backend(backend) == "numba":
        return metapath_layers_numba(steps_indptr, steps_indices, starts, fanouts, keys)
    return metapath_layers_numpy(steps_indptr, steps_indices, starts, fanouts, keys)


def random_layers(rel_indptr, nbr_sorted, avail_list, avail_count, starts,
                  fanouts, keys, backend=None):
    if resolve_backend(backend) == "numba":
        return random_layers_numba(
            rel_indptr, nbr_sorted, avail_list, avail_count, starts, fanouts, keys
        )
    return random_layers_numpy(
        rel_indptr, nbr_sorted, avail_list, avail_count, starts, fanouts, keys
    )


def negatives(members, type_off, alias_idx, alias_thr, weights, type_total_w,
              pos_in_type, node_type, contexts, count, keys, backend=None):
    args = (members, type_off, alias_idx, alias_thr, weights, type_total_w,
            pos_in_type, node_type, contexts, count, keys)
    if resolve_backend(backend) == "numba":
        return negatives_numba(*args)
    return negatives_numpy(*args)


def scatter_add(target, rows, values, backend=None):
    """In-place ``target[rows[i]] += values[i]``; the training hot path.

    The numba path accumulates in the target dtype, the numpy fallback
    reduces through a float64 bincount and casts once; for float32 targets
    the two can differ in the last bits (each backend is deterministic).
    """
    if resolve_backend(backend) == "numba":
        scatter_add_numba(target, rows, values)
    else:
        scatter_add_numpy(target, rows, values)
