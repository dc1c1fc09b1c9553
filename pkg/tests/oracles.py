"""Deliberately slow reference implementations used to cross-check the fast paths."""

from __future__ import annotations

from itertools import permutations

import numpy as np


def brute_force_cross_products(data, a, b):
    """Elementwise double-loop sum of cross products."""
    out = np.zeros((len(a), len(b)))
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            acc = 0.0
            for t in range(data.shape[0]):
                acc += data[t, ai] * data[t, bj]
            out[i, j] = acc
    return out


def residualize(data, cols, given):
    """Residuals of ``cols`` after least-squares projection on ``given``."""
    target = data[:, cols]
    if not len(given):
        return target.copy()
    z = data[:, given]
    coef, *_ = np.linalg.lstsq(z, target, rcond=None)
    return target - z @ coef


def conditional_cross_products_by_residualization(data, a, b, given):
    ra = residualize(data, a, given)
    rb = residualize(data, b, given)
    return ra.T @ rb


def penrose_violation(m, pinv):
    """Largest violation of the four Moore-Penrose conditions."""
    return max(
        np.max(np.abs(m @ pinv @ m - m)),
        np.max(np.abs(pinv @ m @ pinv - pinv)),
        np.max(np.abs((m @ pinv).T - m @ pinv)),
        np.max(np.abs((pinv @ m).T - pinv @ m)),
    )


# -- d-separation by exhaustive path enumeration ----------------------------------


def all_undirected_paths(dag, start, goal):
    """Simple paths in the skeleton, each step annotated with the edge direction."""
    adjacency: dict[str, list[tuple[str, bool]]] = {v: [] for v in dag.vertices}
    for tail, head in dag.edges:
        adjacency[tail].append((head, True))   # traversed tail -> head
        adjacency[head].append((tail, False))  # traversed against the arrow
    paths = []

    def walk(vertex, visited, steps):
        if vertex == goal:
            paths.append(list(steps))
            return
        for nxt, forward in adjacency[vertex]:
            if nxt in visited:
                continue
            visited.add(nxt)
            steps.append((vertex, nxt, forward))
            walk(nxt, visited, steps)
            steps.pop()
            visited.remove(nxt)

    walk(start, {start}, [])
    return paths


def path_is_active(dag, steps, given):
    """Blocking rules applied vertex by vertex along one path."""
    given = set(given)
    for i in range(len(steps) - 1):
        mid = steps[i][1]
        into_mid_first = steps[i][2]        # previous edge points into mid
        into_mid_second = not steps[i + 1][2]  # next edge points into mid
        if into_mid_first and into_mid_second:
            # collider: active iff mid or a descendant of mid is conditioned on
            if mid not in given and not (dag.descendants(mid) & given):
                return False
        else:
            if mid in given:
                return False
    return True


def d_separated_by_paths(dag, a, b, given):
    """Oracle: separated iff no active path connects the two sets."""
    for x in a:
        for y in b:
            for steps in all_undirected_paths(dag, x, y):
                if path_is_active(dag, steps, given):
                    return False
    return True


def random_dag(rng, n_vertices, edge_prob=0.4, shuffle=True):
    """Random DAG with optional label shuffling (kills ordering artifacts)."""
    from pcmselect.graphs import Dag

    names = [f"v{i}" for i in range(n_vertices)]
    if shuffle:
        names = [names[i] for i in rng.permutation(n_vertices)]
    edges = []
    for i in range(n_vertices):
        for j in range(i + 1, n_vertices):
            if rng.random() < edge_prob:
                edges.append((names[i], names[j]))
    return Dag(sorted(names), edges)


def all_upper_triangular_dags(n_vertices):
    """Every DAG whose edges respect the identity ordering of n vertices."""
    from pcmselect.graphs import Dag

    names = [f"v{i}" for i in range(n_vertices)]
    slots = [(names[i], names[j]) for i in range(n_vertices) for j in range(i + 1, n_vertices)]
    for mask in range(2 ** len(slots)):
        edges = [slots[k] for k in range(len(slots)) if mask >> k & 1]
        yield Dag(names, edges)


def total_effect_by_path_enumeration(scm, x, y):
    """Sum of coefficient products over explicitly enumerated directed paths."""
    total = 0.0
    stack = [(x, 1.0)]
    while stack:
        vertex, prod = stack.pop()
        if vertex == y:
            total += prod
            continue
        for child in scm.dag.children(vertex):
            stack.append((child, prod * scm.coefficients[(vertex, child)]))
    return total
