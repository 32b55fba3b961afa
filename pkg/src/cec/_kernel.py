"""Compiled inner loop of the Hartigan energy minimizer.

Everything in this module is numba-jitted and operates on flat arrays; the
public engine API in :mod:`cec.engine` builds the arrays, calls
:func:`run_restart` once per restart and converts the winner back into
result objects. The Python-level partition operations in the engine module
implement the same arithmetic independently and serve as the from-scratch
oracle in the test suite.

Cluster coding families are encoded as integer codes plus three parameter
slots per cluster:

* ``fmat[c]`` - inverse covariance for FIXED_COV, unused otherwise
* ``fvec[c]`` - radius in slot 0 for FIXED_RADIUS, descending eigenvalues
  for FIXED_EIGS, unused otherwise
* ``fscal[c]`` - log-determinant of the fixed covariance for FIXED_COV

All randomness (balanced initialization, per-sweep point order) comes from
an explicit splitmix64 stream, so results are bitwise reproducible for a
given (points, seed) on any platform.
"""

import numpy as np
from numba import njit

FIXED_COV = 0
FIXED_RADIUS = 1
SPHERICAL = 2
DIAGONAL = 3
FULL = 4
FIXED_EIGS = 5

STATUS_OK = 0
STATUS_DEGENERATE = 1

_LN_2PI = 1.8378770664093453


@njit(cache=True)
def _mix_next(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True)
def _shuffle(arr, state):
    """Fisher-Yates using the splitmix64 stream; returns the advanced state."""
    n = arr.shape[0]
    for i in range(n - 1, 0, -1):
        state, z = _mix_next(state)
        j = np.int64(z % np.uint64(i + 1))
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp
    return state


@njit(cache=True)
def _chol_logdet(m):
    """log det of an SPD matrix via in-place Cholesky; NaN if not SPD."""
    nd = m.shape[0]
    ld = 0.0
    for j in range(nd):
        s = m[j, j]
        for k in range(j):
            s -= m[j, k] * m[j, k]
        if s <= 0.0:
            return np.nan
        ljj = np.sqrt(s)
        ld += np.log(ljj)
        m[j, j] = ljj
        for i in range(j + 1, nd):
            t = m[i, j]
            for k in range(j):
                t -= m[i, k] * m[j, k]
            m[i, j] = t / ljj
    return 2.0 * ld


@njit(cache=True)
def _entropy(count, scat, code, fmat_c, fvec_c, fscal_c, eps, tmp):
    """Cross-entropy of one cluster given its unnormalized scatter.

    Evaluates the family formula on scat/count + eps*I. Returns NaN when the
    (regularized) covariance cannot support the family, which only happens
    with eps == 0.
    """
    nd = scat.shape[0]
    half = 0.5 * nd
    inv_cnt = 1.0 / count

    if code == FULL:
        if nd == 1:
            v = scat[0, 0] * inv_cnt + eps
            if v <= 0.0:
                return np.nan
            return half * (_LN_2PI + 1.0) + 0.5 * np.log(v)
        if nd == 2:
            a = scat[0, 0] * inv_cnt + eps
            d = scat[1, 1] * inv_cnt + eps
            b = scat[0, 1] * inv_cnt
            det = a * d - b * b
            if det <= 0.0:
                return np.nan
            return half * (_LN_2PI + 1.0) + 0.5 * np.log(det)
        for i in range(nd):
            for j in range(nd):
                tmp[i, j] = scat[i, j] * inv_cnt
            tmp[i, i] += eps
        ld = _chol_logdet(tmp)
        if np.isnan(ld):
            return np.nan
        return half * (_LN_2PI + 1.0) + 0.5 * ld

    if code == DIAGONAL:
        acc = 0.0
        for i in range(nd):
            di = scat[i, i] * inv_cnt + eps
            if di <= 0.0:
                return np.nan
            acc += np.log(di)
        return half * (_LN_2PI + 1.0) + 0.5 * acc

    if code == SPHERICAL:
        tr = 0.0
        for i in range(nd):
            tr += scat[i, i] * inv_cnt + eps
        if tr <= 0.0:
            return np.nan
        return half * (_LN_2PI + 1.0 - np.log(nd)) + half * np.log(tr)

    if code == FIXED_RADIUS:
        r = fvec_c[0]
        tr = 0.0
        for i in range(nd):
            tr += scat[i, i] * inv_cnt + eps
        return half * _LN_2PI + tr / (2.0 * r) + half * np.log(r)

    if code == FIXED_COV:
        acc = 0.0
        tri = 0.0
        for i in range(nd):
            tri += fmat_c[i, i]
            for j in range(nd):
                acc += fmat_c[i, j] * scat[j, i]
        return half * _LN_2PI + 0.5 * (acc * inv_cnt + eps * tri) + 0.5 * fscal_c

    # FIXED_EIGS: pair descending data eigenvalues with descending prescribed ones
    ratio = 0.0
    logs = 0.0
    if nd == 1:
        v = scat[0, 0] * inv_cnt + eps
        ratio = v / fvec_c[0]
        logs = np.log(fvec_c[0])
    elif nd == 2:
        a = scat[0, 0] * inv_cnt + eps
        d = scat[1, 1] * inv_cnt + eps
        b = scat[0, 1] * inv_cnt
        mid = 0.5 * (a + d)
        disc = np.sqrt(0.25 * (a - d) * (a - d) + b * b)
        ratio = (mid + disc) / fvec_c[0] + (mid - disc) / fvec_c[1]
        logs = np.log(fvec_c[0]) + np.log(fvec_c[1])
    else:
        for i in range(nd):
            for j in range(nd):
                tmp[i, j] = scat[i, j] * inv_cnt
            tmp[i, i] += eps
        w = np.linalg.eigvalsh(tmp)  # ascending
        for i in range(nd):
            ratio += w[nd - 1 - i] / fvec_c[i]
            logs += np.log(fvec_c[i])
    return half * _LN_2PI + 0.5 * ratio + 0.5 * logs


@njit(cache=True)
def _contrib(count, n, h):
    if count == 0:
        return 0.0
    p = count / n
    return p * (h - np.log(p))


@njit(cache=True)
def _candidate_add(means, scats, counts, c, x, out_mean, out_scat):
    """Candidate mean/scatter of cluster c with x added (no mutation)."""
    nd = x.shape[0]
    cnt = counts[c]
    newc = cnt + 1
    f = cnt / newc
    for a in range(nd):
        out_mean[a] = means[c, a] + (x[a] - means[c, a]) / newc
    for a in range(nd):
        da = x[a] - means[c, a]
        for b in range(nd):
            out_scat[a, b] = scats[c, a, b] + f * da * (x[b] - means[c, b])


@njit(cache=True)
def _candidate_remove(means, scats, counts, c, x, out_mean, out_scat):
    nd = x.shape[0]
    cnt = counts[c]
    newc = cnt - 1
    for a in range(nd):
        out_mean[a] = means[c, a] + (means[c, a] - x[a]) / newc
    f = newc / cnt
    for a in range(nd):
        da = x[a] - out_mean[a]
        for b in range(nd):
            out_scat[a, b] = scats[c, a, b] - f * da * (x[b] - out_mean[b])


@njit(cache=True)
def _store(means, scats, counts, c, new_count, mean_buf, scat_buf):
    nd = mean_buf.shape[0]
    counts[c] = new_count
    for a in range(nd):
        means[c, a] = mean_buf[a]
        for b in range(nd):
            scats[c, a, b] = scat_buf[a, b]


@njit(cache=True)
def run_restart(pts, k, codes, fmat, fvec, fscal, min_size, eps, min_weight,
                max_sweeps, seed, record_history):
    """One seeded restart: balanced init, Hartigan sweeps, underweight removal.

    Returns (labels, energy, sweeps_used, trace, history, status, bad_cluster):
    ``trace[j]`` is the tracked energy after sweep j (entry 0 is the
    initialization energy), ``history[j]`` the matching label snapshot when
    ``record_history`` is set. ``status`` is nonzero when a cluster's family
    could not be evaluated; ``bad_cluster`` then names it.
    """
    n, nd = pts.shape
    labels = np.empty(n, np.int64)
    counts = np.zeros(k, np.int64)
    means = np.zeros((k, nd))
    scats = np.zeros((k, nd, nd))
    alive = np.ones(k, np.bool_)
    hs = np.zeros(k)
    contribs = np.zeros(k)
    flagged = np.zeros(k, np.bool_)
    trace = np.zeros(max_sweeps + 1)
    if record_history:
        history = np.zeros((max_sweeps + 1, n), np.int64)
    else:
        history = np.zeros((1, 1), np.int64)

    src_mean = np.empty(nd)
    src_scat = np.empty((nd, nd))
    dst_mean = np.empty(nd)
    dst_scat = np.empty((nd, nd))
    tmp = np.empty((nd, nd))

    # seeded balanced initialization
    order = np.arange(n)
    state = _shuffle(order, np.uint64(seed))
    for i in range(n):
        labels[order[i]] = i % k
    for i in range(n):
        c = labels[i]
        _candidate_add(means, scats, counts, c, pts[i], src_mean, src_scat)
        _store(means, scats, counts, c, counts[c] + 1, src_mean, src_scat)

    energy = 0.0
    for c in range(k):
        h = _entropy(counts[c], scats[c], codes[c], fmat[c], fvec[c], fscal[c], eps, tmp)
        if np.isnan(h):
            return labels, energy, 0, trace[:1], history, STATUS_DEGENERATE, c
        hs[c] = h
        contribs[c] = _contrib(counts[c], n, h)
        energy += contribs[c]
    trace[0] = energy
    if record_history:
        for i in range(n):
            history[0, i] = labels[i]

    sweeps_used = 0
    for sweep in range(max_sweeps):
        state = _shuffle(order, state)
        moves = 0
        for oi in range(n):
            i = order[oi]
            s = labels[i]
            if counts[s] - 1 < min_size[s]:
                continue
            x = pts[i]
            _candidate_remove(means, scats, counts, s, x, src_mean, src_scat)
            h_src = _entropy(counts[s] - 1, src_scat, codes[s], fmat[s], fvec[s],
                             fscal[s], eps, tmp)
            if np.isnan(h_src):
                return labels, energy, sweeps_used, trace[:sweep + 1], history, STATUS_DEGENERATE, s
            c_src = _contrib(counts[s] - 1, n, h_src)
            base = c_src - contribs[s]
            best_delta = 0.0
            best_t = -1
            best_h = 0.0
            best_c = 0.0
            for t in range(k):
                if t == s or not alive[t]:
                    continue
                _candidate_add(means, scats, counts, t, x, dst_mean, dst_scat)
                h_dst = _entropy(counts[t] + 1, dst_scat, codes[t], fmat[t], fvec[t],
                                 fscal[t], eps, tmp)
                if np.isnan(h_dst):
                    return labels, energy, sweeps_used, trace[:sweep + 1], history, STATUS_DEGENERATE, t
                c_dst = _contrib(counts[t] + 1, n, h_dst)
                delta = base + c_dst - contribs[t]
                if delta < best_delta:
                    best_delta = delta
                    best_t = t
                    best_h = h_dst
                    best_c = c_dst
            if best_t >= 0:
                _candidate_add(means, scats, counts, best_t, x, dst_mean, dst_scat)
                _store(means, scats, counts, s, counts[s] - 1, src_mean, src_scat)
                _store(means, scats, counts, best_t, counts[best_t] + 1, dst_mean, dst_scat)
                hs[s] = h_src
                contribs[s] = c_src
                hs[best_t] = best_h
                contribs[best_t] = best_c
                labels[i] = best_t
                energy += best_delta
                moves += 1

        # kill underweight clusters and redistribute their points
        removed = False
        thr = min_weight * n
        n_alive = 0
        n_flag = 0
        for t in range(k):
            if alive[t]:
                n_alive += 1
                flagged[t] = counts[t] < thr
                if flagged[t]:
                    n_flag += 1
            else:
                flagged[t] = False
        if n_flag == n_alive and n_flag > 0:
            keep = -1
            best_count = np.int64(-1)
            for t in range(k):
                if alive[t] and counts[t] > best_count:
                    best_count = counts[t]
                    keep = t
            flagged[keep] = False
            n_flag -= 1
        if n_flag > 0:
            removed = True
            for t in range(k):
                if flagged[t]:
                    alive[t] = False
                    energy -= contribs[t]
                    contribs[t] = 0.0
                    hs[t] = 0.0
            for i in range(n):
                dcl = labels[i]
                if alive[dcl]:
                    continue
                x = pts[i]
                best_t = -1
                best_inc = np.inf
                best_h = 0.0
                best_c = 0.0
                for t in range(k):
                    if not alive[t]:
                        continue
                    _candidate_add(means, scats, counts, t, x, dst_mean, dst_scat)
                    h_dst = _entropy(counts[t] + 1, dst_scat, codes[t], fmat[t], fvec[t],
                                     fscal[t], eps, tmp)
                    if np.isnan(h_dst):
                        return labels, energy, sweeps_used, trace[:sweep + 1], history, STATUS_DEGENERATE, t
                    c_dst = _contrib(counts[t] + 1, n, h_dst)
                    inc = c_dst - contribs[t]
                    if inc < best_inc:
                        best_inc = inc
                        best_t = t
                        best_h = h_dst
                        best_c = c_dst
                _candidate_add(means, scats, counts, best_t, x, dst_mean, dst_scat)
                _store(means, scats, counts, best_t, counts[best_t] + 1, dst_mean, dst_scat)
                hs[best_t] = best_h
                contribs[best_t] = best_c
                labels[i] = best_t
                energy += best_inc
            for t in range(k):
                if flagged[t]:
                    counts[t] = 0
                    for a in range(nd):
                        means[t, a] = 0.0
                        for b in range(nd):
                            scats[t, a, b] = 0.0

        sweeps_used = sweep + 1
        trace[sweeps_used] = energy
        if record_history:
            for i in range(n):
                history[sweeps_used, i] = labels[i]
        if moves == 0 and not removed:
            break

    if record_history:
        history = history[:sweeps_used + 1]
    return labels, energy, sweeps_used, trace[:sweeps_used + 1], history, STATUS_OK, -1
