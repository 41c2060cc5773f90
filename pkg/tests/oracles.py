"""Independent reference computations for the tests.

Nothing here imports the package: every function works from plain
(row, col, value) triples so the tests compare two separate routes.
"""

import numpy as np


def by_row(entries, n):
    rows = [[] for _ in range(n)]
    for r, c, v in sorted(entries):
        rows[r].append((c, v))
    return rows


def by_col(entries, n):
    cols = [[] for _ in range(n)]
    for r, c, v in sorted(entries, key=lambda e: (e[1], e[0])):
        cols[c].append((r, v))
    return cols


def prefix_offsets(lengths):
    out = [0]
    for n in lengths:
        out.append(out[-1] + n)
    return out


def coo(entries):
    e = sorted(entries)
    return [r for r, _, _ in e], [c for _, c, _ in e], [v for _, _, v in e]


def csr(entries, n_rows):
    groups = by_row(entries, n_rows)
    cols = [c for g in groups for c, _ in g]
    vals = [v for g in groups for _, v in g]
    return vals, cols, prefix_offsets(len(g) for g in groups)


def ccs(entries, n_cols):
    groups = by_col(entries, n_cols)
    rows = [r for g in groups for r, _ in g]
    vals = [v for g in groups for _, v in g]
    return vals, rows, prefix_offsets(len(g) for g in groups)


def ellpack(entries, n_rows):
    """Column-major padded arrays; pads carry value 0.0 and column 0."""
    groups = by_row(entries, n_rows)
    width = max((len(g) for g in groups), default=0)
    vals, cols = [], []
    for k in range(width):
        for g in groups:
            c, v = g[k] if k < len(g) else (0, 0.0)
            vals.append(v)
            cols.append(c)
    return width, vals, cols


def stable_length_perm(lengths):
    return sorted(range(len(lengths)), key=lambda i: (-lengths[i], i))


def jds(entries, n_rows):
    groups = by_row(entries, n_rows)
    perm = stable_length_perm([len(g) for g in groups])
    width = max((len(g) for g in groups), default=0)
    vals, cols, ptr = [], [], [0]
    for k in range(width):
        for i in perm:
            if k < len(groups[i]):
                c, v = groups[i][k]
                vals.append(v)
                cols.append(c)
        ptr.append(len(vals))
    return perm, vals, cols, ptr


def ceil_blocks(m, x):
    return [(s, min(s + x, m)) for s in range(0, m, x)]


def dense_of(entries, n_rows, n_cols):
    a = np.zeros((n_rows, n_cols))
    for r, c, v in entries:
        a[r, c] = v
    return a


def spmv(entries, n_rows, x):
    y = [0.0] * n_rows
    for r, c, v in entries:
        y[r] += v * x[c]
    return np.array(y)


def back_substitution(a, b):
    n = len(b)
    x = np.zeros(n)
    for i in reversed(range(n)):
        x[i] = (b[i] - a[i, i + 1:] @ x[i + 1:]) / a[i, i]
    return x


def brute_coverage(times, routines, matrices, t):
    """Coverage by scanning every routine subset membership directly."""
    top = {}
    for m in matrices:
        best = min(times[(r, m)] for r in routines)
        top[m] = {r for r in routines if times[(r, m)] <= best * (1 + t / 100.0) * (1 + 1e-12)}
    weight = {r: sum(r in top[m] for m in matrices) for r in routines}
    cov = max(weight.values())
    return top, weight, cov, {r for r in routines if weight[r] == cov}


def all_within(times, routines, matrices, t):
    """Routines within t percent of the per-matrix best on every matrix."""
    out = set()
    for r in routines:
        ok = True
        for m in matrices:
            best = min(times[(q, m)] for q in routines)
            ok &= times[(r, m)] <= best * (1 + t / 100.0) * (1 + 1e-12)
        if ok:
            out.add(r)
    return out
