"""Numba kernels for boundary-matrix reduction and the dim-0 union-find pass.

Rows and columns are ranks inside a fixed total order on cells of one
dimension: ascending (filtration value, lexicographic cell coordinate).
Coefficients are Z/2; a column is the sorted list of its nonzero row ranks
and column addition is symmetric difference by linear merge.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def unionfind_pairs(edge_vertices, n_vertices):
    """Elder-rule pairing of vertices with edges.

    `edge_vertices` is (n_edges, 2) vertex ranks per edge, edges already in
    filtration order. Returns paired vertex rank per edge, -1 for edges that
    close a cycle (positive edges), plus the final root array.
    """
    n_edges = edge_vertices.shape[0]
    parent = np.arange(n_vertices)
    paired = np.full(n_edges, -1, np.int64)
    for j in range(n_edges):
        a = edge_vertices[j, 0]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = edge_vertices[j, 1]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a == b:
            continue
        # the younger root (larger rank = later birth) dies at this edge
        if a < b:
            parent[b] = a
            paired[j] = b
        else:
            parent[a] = b
            paired[j] = a
    for v in range(n_vertices):
        r = v
        while parent[r] != r:
            r = parent[r]
        parent[v] = r
    return paired, parent


@njit(cache=True)
def reduce_columns(bnd, skip, n_rows):
    """Twist-style column reduction of one boundary-matrix block.

    `bnd` holds the 2d facet row ranks per column (sorted ascending), columns
    in filtration order. `skip[j]` clears columns already known positive.
    Returns the pivot row rank per column (-1 when the column reduces to 0).
    """
    n_cols, width = bnd.shape
    pivot_owner = np.full(n_rows, -1, np.int64)
    pair_row = np.full(n_cols, -1, np.int64)

    cap = max(1024, n_cols * width)
    data = np.empty(cap, np.int64)
    starts = np.empty(n_cols + 1, np.int64)
    lens = np.empty(n_cols + 1, np.int64)
    top = 0
    n_slots = 0

    bufcap = 1024
    cur = np.empty(bufcap, np.int64)
    tmp = np.empty(bufcap, np.int64)

    for j in range(n_cols):
        if skip[j]:
            continue
        m = width
        for t in range(width):
            cur[t] = bnd[j, t]
        while m > 0:
            piv = cur[m - 1]
            slot = pivot_owner[piv]
            if slot == -1:
                if top + m > cap:
                    newcap = cap * 2
                    while newcap < top + m:
                        newcap *= 2
                    grown = np.empty(newcap, np.int64)
                    grown[:top] = data[:top]
                    data = grown
                    cap = newcap
                for t in range(m):
                    data[top + t] = cur[t]
                starts[n_slots] = top
                lens[n_slots] = m
                top += m
                pivot_owner[piv] = n_slots
                n_slots += 1
                pair_row[j] = piv
                break
            s = starts[slot]
            length = lens[slot]
            if m + length > bufcap:
                newbuf = bufcap * 2
                while newbuf < m + length:
                    newbuf *= 2
                ncur = np.empty(newbuf, np.int64)
                ncur[:m] = cur[:m]
                cur = ncur
                tmp = np.empty(newbuf, np.int64)
                bufcap = newbuf
            i1 = 0
            i2 = 0
            k = 0
            while i1 < m and i2 < length:
                a = cur[i1]
                b = data[s + i2]
                if a < b:
                    tmp[k] = a
                    k += 1
                    i1 += 1
                elif b < a:
                    tmp[k] = b
                    k += 1
                    i2 += 1
                else:
                    i1 += 1
                    i2 += 1
            while i1 < m:
                tmp[k] = cur[i1]
                k += 1
                i1 += 1
            while i2 < length:
                tmp[k] = data[s + i2]
                k += 1
                i2 += 1
            swap = cur
            cur = tmp
            tmp = swap
            m = k
    return pair_row
