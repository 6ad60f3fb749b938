"""Exact linear assignment.

``solve_lap`` minimises sum_i C[i, perm[i]] over permutations. The default
solver is a shortest-augmenting-path method in the Jonker-Volgenant style
(column reduction, then one Dijkstra search per free row over reduced costs).
A textbook Hungarian method is kept as an independent cross-check, and
``brute_force_lap`` enumerates permutations for tiny problems.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numba
import numpy as np

BRUTE_FORCE_MAX = 9


@dataclass(frozen=True)
class Assignment:
    perm: np.ndarray
    value: float


def _check_cost(cost) -> np.ndarray:
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix has non-finite entries")
    return np.ascontiguousarray(C)


@numba.njit(cache=True)
def _sap_kernel(C):
    n = C.shape[0]
    u = np.zeros(n)
    v = np.empty(n)
    col4row = np.full(n, -1, dtype=np.int64)
    row4col = np.full(n, -1, dtype=np.int64)

    # column reduction: v_j = min_i C[i, j]; assign the argmin row if still free
    for j in range(n):
        best = 0
        for i in range(1, n):
            if C[i, j] < C[best, j]:
                best = i
        v[j] = C[best, j]
        if col4row[best] == -1:
            col4row[best] = j
            row4col[j] = best

    shortest = np.empty(n)
    pred = np.empty(n, dtype=np.int64)
    row_done = np.zeros(n, dtype=np.bool_)
    col_done = np.zeros(n, dtype=np.bool_)

    for cur in range(n):
        if col4row[cur] != -1:
            continue
        shortest[:] = np.inf
        row_done[:] = False
        col_done[:] = False
        i = cur
        min_val = 0.0
        sink = -1
        while sink == -1:
            row_done[i] = True
            base = min_val - u[i]
            jmin = -1
            lowest = np.inf
            for j in range(n):
                if col_done[j]:
                    continue
                r = base + C[i, j] - v[j]
                if r < shortest[j]:
                    shortest[j] = r
                    pred[j] = i
                if shortest[j] < lowest:
                    lowest = shortest[j]
                    jmin = j
            min_val = lowest
            col_done[jmin] = True
            if row4col[jmin] == -1:
                sink = jmin
            else:
                i = row4col[jmin]

        u[cur] += min_val
        for r in range(n):
            if row_done[r] and r != cur:
                u[r] += min_val - shortest[col4row[r]]
        for j in range(n):
            if col_done[j]:
                v[j] -= min_val - shortest[j]

        j = sink
        while True:
            r = pred[j]
            row4col[j] = r
            nxt = col4row[r]
            col4row[r] = j
            j = nxt
            if r == cur:
                break
    return col4row


def _hungarian(C: np.ndarray) -> np.ndarray:
    """Kuhn-Munkres with row/column potentials, O(n^3), pure numpy."""
    n = C.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j]: row (1-based) matched to column j
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = C[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    perm = np.empty(n, dtype=np.int64)
    perm[p[1:] - 1] = np.arange(n)
    return perm


def solve_lap(cost, method: str = "sap") -> Assignment:
    """Minimum-cost perfect assignment of rows to columns.

    Parameters
    ----------
    cost : (u, u) array_like of finite floats
    method : {"sap", "hungarian"}
        ``sap`` is the compiled shortest-augmenting-path solver; ``hungarian``
        is the slower reference implementation.
    """
    C = _check_cost(cost)
    n = C.shape[0]
    if n == 0:
        return Assignment(np.empty(0, dtype=np.int64), 0.0)
    if method == "sap":
        perm = _sap_kernel(C)
    elif method == "hungarian":
        perm = _hungarian(C)
    else:
        raise ValueError(f"unknown LAP method {method!r}")
    return Assignment(perm, float(C[np.arange(n), perm].sum()))


def brute_force_lap(cost) -> Assignment:
    C = _check_cost(cost)
    n = C.shape[0]
    if n > BRUTE_FORCE_MAX:
        raise ValueError(f"brute force limited to u <= {BRUTE_FORCE_MAX}")
    if n == 0:
        return Assignment(np.empty(0, dtype=np.int64), 0.0)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    values = C[np.arange(n), perms].sum(axis=1)
    k = int(np.argmin(values))
    return Assignment(perms[k], float(values[k]))
