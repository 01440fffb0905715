"""Compiled inner loops shared by the sandpile, spanning and limits modules.

All kernels work on the port arrays of :class:`~sandgrove.graphcore.SinkedMultigraph`
(``ptr``, ``ports``) with the sink at index ``len(ptr) - 1``.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def stabilize_inplace(ptr, ports, heights, odometer):
    """Topple until stable; returns particles lost to the sink.

    Batch topplings: an unstable ``x`` topples ``heights[x] // deg(x)`` times at
    once.  ``heights`` and ``odometer`` are updated in place.
    """
    n = len(ptr) - 1
    stack = np.empty(n, dtype=np.int64)
    queued = np.zeros(n, dtype=np.bool_)
    top = 0
    for x in range(n):
        if heights[x] >= ptr[x + 1] - ptr[x]:
            stack[top] = x
            top += 1
            queued[x] = True
    lost = 0
    while top > 0:
        top -= 1
        x = stack[top]
        queued[x] = False
        deg = ptr[x + 1] - ptr[x]
        k = heights[x] // deg
        if k == 0:
            continue
        heights[x] -= k * deg
        odometer[x] += k
        for p in range(ptr[x], ptr[x + 1]):
            y = ports[p]
            if y == n:
                lost += k
            else:
                heights[y] += k
                if not queued[y] and heights[y] >= ptr[y + 1] - ptr[y]:
                    queued[y] = True
                    stack[top] = y
                    top += 1
    return lost


@njit(cache=True, nogil=True)
def _avalanche(ptr, ports, heights, site, dist, toppled, stack, queued, visited):
    """Add one particle at ``site`` and stabilize in place.

    Returns ``(topplings, distinct, lost, radius)``.  ``toppled``, ``queued``
    are scratch flags (all False on entry and on exit); ``visited`` is scratch
    storage for the list of toppled vertices.
    """
    n = len(ptr) - 1
    heights[site] += 1
    if heights[site] < ptr[site + 1] - ptr[site]:
        return 0, 0, 0, 0
    top = 1
    stack[0] = site
    queued[site] = True
    n_visited = 0
    topplings = 0
    lost = 0
    radius = 0
    while top > 0:
        top -= 1
        x = stack[top]
        queued[x] = False
        deg = ptr[x + 1] - ptr[x]
        k = heights[x] // deg
        if k == 0:
            continue
        heights[x] -= k * deg
        topplings += k
        if not toppled[x]:
            toppled[x] = True
            visited[n_visited] = x
            n_visited += 1
            if dist[x] > radius:
                radius = dist[x]
        for p in range(ptr[x], ptr[x + 1]):
            y = ports[p]
            if y == n:
                lost += k
            else:
                heights[y] += k
                if not queued[y] and heights[y] >= ptr[y + 1] - ptr[y]:
                    queued[y] = True
                    stack[top] = y
                    top += 1
    for i in range(n_visited):
        toppled[visited[i]] = False
    return topplings, n_visited, lost, radius


@njit(cache=True, nogil=True)
def avalanche_once(ptr, ports, heights, site, dist):
    n = len(ptr) - 1
    toppled = np.zeros(n, dtype=np.bool_)
    queued = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    visited = np.empty(n, dtype=np.int64)
    return _avalanche(ptr, ports, heights, site, dist, toppled, stack, queued, visited)


@njit(cache=True, nogil=True)
def avalanche_chain(ptr, ports, heights, site, dist, rng, n_records, decorrelate, out):
    """Recurrent-chain avalanche sampler.

    Repeats ``n_records`` times: add at ``site`` and write
    ``(topplings, distinct, lost, radius)`` into ``out[r]``, then add at
    ``decorrelate`` uniformly random vertices.  Every addition operator maps
    the stationary law to itself, so each recorded state has the stationary
    law whenever the initial one does.
    """
    n = len(ptr) - 1
    toppled = np.zeros(n, dtype=np.bool_)
    queued = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    visited = np.empty(n, dtype=np.int64)
    for r in range(n_records):
        a, b, c, d = _avalanche(ptr, ports, heights, site, dist, toppled, stack, queued, visited)
        out[r, 0] = a
        out[r, 1] = b
        out[r, 2] = c
        out[r, 3] = d
        for _ in range(decorrelate):
            x = rng.integers(0, n)
            _avalanche(ptr, ports, heights, x, dist, toppled, stack, queued, visited)


@njit(cache=True, nogil=True)
def lerw_attach(ptr, ports, start, rng, in_tree, parent_port, added, n_added):
    """Run one Wilson step: walk from ``start`` until the current tree is hit.

    The erased path (last-exit pointers) is attached to the tree; vertices
    joining it are appended to ``added``.  Returns ``(n_added, hit, steps)``
    where ``hit`` is the tree vertex where the walk stopped (``-1`` if
    ``start`` was already in the tree).
    """
    if in_tree[start]:
        return n_added, -1, 0
    u = start
    steps = 0
    while not in_tree[u]:
        k = rng.integers(0, ptr[u + 1] - ptr[u])
        parent_port[u] = k
        u = ports[ptr[u] + k]
        steps += 1
    hit = u
    u = start
    while not in_tree[u]:
        in_tree[u] = True
        added[n_added] = u
        n_added += 1
        u = ports[ptr[u] + parent_port[u]]
    return n_added, hit, steps


@njit(cache=True, nogil=True)
def wilson_all(ptr, ports, order, rng, in_tree, parent_port):
    """Wilson's algorithm rooted at the sink over the enumeration ``order``."""
    n = len(ptr) - 1
    added = np.empty(n, dtype=np.int64)
    n_added = 0
    for i in range(len(order)):
        n_added, _, _ = lerw_attach(ptr, ports, order[i], rng, in_tree, parent_port, added, n_added)
    return n_added


@njit(cache=True, nogil=True)
def tree_depths(ptr, ports, parent_port, vertices, depth):
    """Fill ``depth[v]`` (tree distance to the sink) for each listed tree vertex.

    ``depth`` must be ``-1`` for unknown vertices and ``0`` at the sink.
    """
    n = len(ptr) - 1
    path = np.empty(n, dtype=np.int64)
    for i in range(len(vertices)):
        v = vertices[i]
        m = 0
        while depth[v] < 0:
            path[m] = v
            m += 1
            v = ports[ptr[v] + parent_port[v]]
        base = depth[v]
        for j in range(m - 1, -1, -1):
            base += 1
            depth[path[j]] = base


@njit(cache=True, nogil=True)
def local_height(ptr, ports, x, depth, parent_port):
    """Height at ``x`` under the canonical pairing from tree depths.

    Needs ``depth`` at ``x`` and at every neighbour of ``x``.
    """
    dx = depth[x]
    base = ptr[x]
    deg = ptr[x + 1] - base
    px = parent_port[x]
    head = ports[base + px]
    below = 0
    rank = 0
    for p in range(deg):
        y = ports[base + p]
        dy = depth[y]
        if dy < dx:
            below += 1
            if dy == dx - 1 and (y < head or (y == head and p < px)):
                rank += 1
    return deg - below + rank


@njit(cache=True, nogil=True)
def all_heights(ptr, ports, depth, parent_port, out):
    for x in range(len(ptr) - 1):
        out[x] = local_height(ptr, ports, x, depth, parent_port)


@njit(cache=True, nogil=True)
def local_sample(ptr, ports, starts, window, rng, in_tree, parent_port, depth, added, heights_out):
    """One local draw of the stationary heights on ``window``.

    Runs Wilson steps from ``starts`` (which must contain every neighbour of
    every window vertex), evaluates the heights and restores the scratch
    arrays.  Returns the number of walk steps.
    """
    n_added = 0
    steps = 0
    for i in range(len(starts)):
        n_added, _, st = lerw_attach(ptr, ports, starts[i], rng, in_tree, parent_port, added, n_added)
        steps += st
    tree_depths(ptr, ports, parent_port, added[:n_added], depth)
    for i in range(len(window)):
        heights_out[i] = local_height(ptr, ports, window[i], depth, parent_port)
    for i in range(n_added):
        in_tree[added[i]] = False
        depth[added[i]] = -1
    return steps
