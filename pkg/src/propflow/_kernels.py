"""Numba kernels: exact greedy tree building, forest prediction, TreeSHAP.

Trees are flat parallel arrays (feature, threshold, left, right, value,
cover); feature < 0 marks a leaf. Children always have larger indices than
their parent (level-wise construction), which the bottom-up cover pass and
the serializer rely on.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, nogil=True)
def build_tree(vals_sorted, rows_sorted, X, g, h, max_depth, lam, gamma, min_child_h, eta):
    """Level-wise exact greedy builder under second-order gain.

    vals_sorted/rows_sorted: (d, n) per-feature presorted values and the row
    order achieving them. Candidates are midpoints between consecutive
    distinct values within a node; gain ties keep the first candidate seen
    (lowest feature index, then lowest threshold). Leaf value is the
    eta-scaled Newton step -G/(H+lam).
    """
    n, d = X.shape
    max_nodes = 2 ** (max_depth + 1) - 1 if max_depth < 24 else 2 ** 24
    feature = np.full(max_nodes, -1, np.int32)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int32)
    right = np.full(max_nodes, -1, np.int32)
    value = np.zeros(max_nodes)
    cover = np.zeros(max_nodes)

    node_of_row = np.zeros(n, np.int32)
    Gtot = np.zeros(max_nodes)
    Htot = np.zeros(max_nodes)
    for i in range(n):
        Gtot[0] += g[i]
        Htot[0] += h[i]
    n_nodes = 1
    level_start = 0
    level_end = 1

    best_gain = np.zeros(max_nodes)
    best_feat = np.full(max_nodes, -1, np.int32)
    best_thr = np.zeros(max_nodes)
    run_g = np.zeros(max_nodes)
    run_h = np.zeros(max_nodes)
    last_val = np.zeros(max_nodes)
    has_last = np.zeros(max_nodes, np.uint8)

    for depth in range(max_depth):
        for nd in range(level_start, level_end):
            best_gain[nd] = 0.0
            best_feat[nd] = -1
        for j in range(d):
            for nd in range(level_start, level_end):
                run_g[nd] = 0.0
                run_h[nd] = 0.0
                has_last[nd] = 0
            for p in range(n):
                r = rows_sorted[j, p]
                nd = node_of_row[r]
                if nd < level_start or nd >= level_end:
                    continue
                v = vals_sorted[j, p]
                if has_last[nd] == 1 and v > last_val[nd]:
                    GL = run_g[nd]
                    HL = run_h[nd]
                    GR = Gtot[nd] - GL
                    HR = Htot[nd] - HL
                    if HL >= min_child_h and HR >= min_child_h:
                        gain = 0.5 * (
                            GL * GL / (HL + lam)
                            + GR * GR / (HR + lam)
                            - (GL + GR) * (GL + GR) / (HL + HR + lam)
                        ) - gamma
                        if gain > best_gain[nd]:
                            thr = 0.5 * (last_val[nd] + v)
                            # adjacent floats can round the midpoint up to v,
                            # which would send the whole node left
                            if thr >= v:
                                thr = last_val[nd]
                            best_gain[nd] = gain
                            best_feat[nd] = j
                            best_thr[nd] = thr
                run_g[nd] += g[r]
                run_h[nd] += h[r]
                last_val[nd] = v
                has_last[nd] = 1
        created = False
        for nd in range(level_start, level_end):
            if best_feat[nd] >= 0 and best_gain[nd] > 0.0:
                feature[nd] = best_feat[nd]
                threshold[nd] = best_thr[nd]
                left[nd] = n_nodes
                right[nd] = n_nodes + 1
                n_nodes += 2
                created = True
        if not created:
            break
        for r in range(n):
            nd = node_of_row[r]
            if level_start <= nd < level_end and feature[nd] >= 0:
                if X[r, feature[nd]] <= threshold[nd]:
                    child = left[nd]
                else:
                    child = right[nd]
                node_of_row[r] = child
                Gtot[child] += g[r]
                Htot[child] += h[r]
        level_start = level_end
        level_end = n_nodes

    for nd in range(n_nodes):
        if feature[nd] < 0:
            value[nd] = -Gtot[nd] / (Htot[nd] + lam) * eta
            cover[nd] = Htot[nd]
    # bottom-up so parent cover equals left + right exactly in floats
    for nd in range(n_nodes - 1, -1, -1):
        if feature[nd] >= 0:
            cover[nd] = cover[left[nd]] + cover[right[nd]]
    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
        cover[:n_nodes],
    )


@njit(cache=True, nogil=True)
def tree_leaf_values(feature, threshold, left, right, value, X):
    """Leaf value reached by each row of X (single tree)."""
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        nd = 0
        while feature[nd] >= 0:
            if X[i, feature[nd]] <= threshold[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] = value[nd]
    return out


@njit(cache=True, nogil=True, parallel=True)
def forest_margins(X, base_margin, tf, tt, tl, tr, tv, offsets):
    """Margins for all rows: base + sum of leaf values over packed trees.

    Each row is independent, so the result is identical for any thread
    count.
    """
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.empty(n)
    for i in prange(n):
        m = base_margin
        for t in range(n_trees):
            nd = offsets[t]
            # child indices are tree-local, so shift them by the tree offset
            while tf[nd] >= 0:
                if X[i, tf[nd]] <= tt[nd]:
                    nd = offsets[t] + tl[nd]
                else:
                    nd = offsets[t] + tr[nd]
            m += tv[nd]
        out[i] = m
    return out


@njit(cache=True, nogil=True)
def forest_height(tf, tl, tr, offsets):
    """Tallest tree in the packed forest (children follow their parents)."""
    n_trees = offsets.shape[0] - 1
    height = 0
    for t in range(n_trees):
        a, b = offsets[t], offsets[t + 1]
        depth = np.zeros(b - a, np.int64)
        for nd in range(b - a):
            if tf[a + nd] >= 0:
                depth[tl[a + nd]] = depth[nd] + 1
                depth[tr[a + nd]] = depth[nd] + 1
            elif depth[nd] > height:
                height = depth[nd]
    return height


@njit(cache=True, nogil=True)
def _shap_row(x, tf, tt, tl, tr, tv, tc, offsets, max_path, phi):
    """Path-dependent per-tree attribution (EXTEND/UNWIND, cover weights).

    Iterative depth-first walk with an explicit frame stack; each frame
    snapshots the decision path it was spawned with, so sibling subtrees
    never observe each other's in-place path edits. max_path must be at
    least (tallest tree height + 2).
    """
    n_trees = offsets.shape[0] - 1
    cap = 2 * max_path + 2
    # per-frame path snapshots
    sd = np.empty((cap, max_path), np.int32)
    sz = np.empty((cap, max_path), np.float64)
    so = np.empty((cap, max_path), np.float64)
    sw = np.empty((cap, max_path), np.float64)
    # per-frame scalars: node, path length, one-weight... laid out as arrays
    fnode = np.empty(cap, np.int64)
    fplen = np.empty(cap, np.int64)
    fzero = np.empty(cap, np.float64)
    fone = np.empty(cap, np.float64)
    ffeat = np.empty(cap, np.int64)
    # working path of the frame being expanded
    d_ = np.empty(max_path, np.int32)
    z_ = np.empty(max_path, np.float64)
    o_ = np.empty(max_path, np.float64)
    w_ = np.empty(max_path, np.float64)

    for t in range(n_trees):
        base = offsets[t]
        top = 0
        fnode[0] = 0
        fplen[0] = 0
        fzero[0] = 1.0
        fone[0] = 1.0
        ffeat[0] = -1
        while top >= 0:
            node = base + fnode[top]
            plen = fplen[top]
            pzero = fzero[top]
            pone = fone[top]
            pfeat = ffeat[top]
            for i in range(plen):
                d_[i] = sd[top, i]
                z_[i] = sz[top, i]
                o_[i] = so[top, i]
                w_[i] = sw[top, i]
            top -= 1

            # EXTEND the path with (pzero, pone, pfeat)
            d_[plen] = pfeat
            z_[plen] = pzero
            o_[plen] = pone
            w_[plen] = 1.0 if plen == 0 else 0.0
            for i in range(plen - 1, -1, -1):
                w_[i + 1] += pone * w_[i] * (i + 1.0) / (plen + 1.0)
                w_[i] = pzero * w_[i] * (plen - i) / (plen + 1.0)
            l = plen + 1

            if tf[node] < 0:
                for i in range(1, l):
                    # UNWIND element i and sum the remaining weights
                    total = 0.0
                    nxt = w_[l - 1]
                    if o_[i] != 0.0:
                        for j in range(l - 2, -1, -1):
                            tmp = nxt * l / ((j + 1.0) * o_[i])
                            total += tmp
                            nxt = w_[j] - tmp * z_[i] * (l - 1.0 - j) / l
                    else:
                        for j in range(l - 2, -1, -1):
                            total += w_[j] * l / (z_[i] * (l - 1.0 - j))
                    phi[d_[i]] += total * (o_[i] - z_[i]) * tv[node]
                continue

            f = tf[node]
            if x[f] <= tt[node]:
                hot, cold = tl[node], tr[node]
            else:
                hot, cold = tr[node], tl[node]
            iz = 1.0
            io = 1.0
            k = -1
            for i in range(1, l):
                if d_[i] == f:
                    k = i
                    break
            if k >= 0:
                # feature already on the path: UNWIND it before descending
                iz = z_[k]
                io = o_[k]
                nxt = w_[l - 1]
                if io != 0.0:
                    for j in range(l - 2, -1, -1):
                        tmp = nxt * l / ((j + 1.0) * io)
                        nxt = w_[j] - tmp * iz * (l - 1.0 - j) / l
                        w_[j] = tmp
                else:
                    for j in range(l - 2, -1, -1):
                        w_[j] = w_[j] * l / (iz * (l - 1.0 - j))
                for j in range(k, l - 1):
                    d_[j] = d_[j + 1]
                    z_[j] = z_[j + 1]
                    o_[j] = o_[j + 1]
                l -= 1

            rh = tc[base + hot] / tc[node]
            rc = tc[base + cold] / tc[node]
            # push cold then hot; order only affects accumulation sequence
            for child in range(2):
                top += 1
                fnode[top] = cold if child == 0 else hot
                fplen[top] = l
                fzero[top] = iz * (rc if child == 0 else rh)
                fone[top] = 0.0 if child == 0 else io
                ffeat[top] = f
                for i in range(l):
                    sd[top, i] = d_[i]
                    sz[top, i] = z_[i]
                    so[top, i] = o_[i]
                    sw[top, i] = w_[i]


@njit(cache=True, nogil=True, parallel=True)
def shap_matrix_kernel(X, tf, tt, tl, tr, tv, tc, offsets):
    """Per-row SHAP values for the packed forest; rows are independent."""
    n, d = X.shape
    max_path = forest_height(tf, tl, tr, offsets) + 2
    out = np.zeros((n, d))
    for i in prange(n):
        _shap_row(X[i], tf, tt, tl, tr, tv, tc, offsets, max_path, out[i])
    return out


@njit(cache=True, nogil=True)
def expected_leaf_value(feature, left, right, value, cover):
    """Cover-weighted mean leaf value (iterative: children follow parents)."""
    n_nodes = feature.shape[0]
    w = np.zeros(n_nodes)
    w[0] = 1.0
    total = 0.0
    for nd in range(n_nodes):
        if feature[nd] >= 0:
            w[left[nd]] += w[nd] * cover[left[nd]] / cover[nd]
            w[right[nd]] += w[nd] * cover[right[nd]] / cover[nd]
        else:
            total += w[nd] * value[nd]
    return total
