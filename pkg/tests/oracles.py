"""Independent reference implementations used by the tests."""

from __future__ import annotations

import itertools

import numpy as np


def brute_force_tour(pairs: np.ndarray, start: np.ndarray) -> float:
    """Shortest open tour by exhaustive enumeration.

    ``pairs`` has shape (K, 2, 3): both end points of every cluster. The
    tour starts at the end point nearest ``start``, runs through that
    cluster, then visits every other cluster end to end in any order and
    orientation.
    """
    K = len(pairs)
    flat = pairs.reshape(-1, 3)
    first = int(np.argmin(np.linalg.norm(flat - start, axis=1)))
    c0, e0 = divmod(first, 2)
    length_of = np.linalg.norm(pairs[:, 0] - pairs[:, 1], axis=1)
    rest = [c for c in range(K) if c != c0]
    if not rest:
        return float(length_of[c0])
    # every (order, orientation) combination at once: rows are candidate tours
    perms = np.array(list(itertools.permutations(rest)), dtype=int)
    flips = np.array(list(itertools.product((0, 1), repeat=len(rest))), dtype=int)
    order = np.repeat(perms, len(flips), axis=0)
    entry = np.tile(flips, (len(perms), 1))
    enter = pairs[order, entry]
    leave = pairs[order, 1 - entry]
    prev = np.concatenate([np.broadcast_to(pairs[c0, 1 - e0], (len(order), 1, 3)), leave[:, :-1]], axis=1)
    legs = np.linalg.norm(enter - prev, axis=2).sum(axis=1)
    return float((length_of.sum() + legs).min())


def sequence_length(pairs: np.ndarray, order, entries) -> float:
    pts = []
    for c, e in zip(order, entries):
        pts.append(pairs[c, e])
        pts.append(pairs[c, 1 - e])
    pts = np.array(pts)
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def single_moves(order, entries):
    """Every tour one 2-opt reversal, orientation flip, swap or relocation away.

    The first cluster and its entry end stay fixed, since the start node is
    pinned by the start position.
    """
    K = len(order)
    for i in range(1, K):
        flipped = list(entries)
        flipped[i] = 1 - flipped[i]
        yield list(order), flipped
    for i in range(1, K):
        for j in range(i + 1, K):
            o = list(order[:i]) + list(order[i:j + 1])[::-1] + list(order[j + 1:])
            e = list(entries[:i]) + [1 - x for x in entries[i:j + 1]][::-1] + list(entries[j + 1:])
            yield o, e
            o = list(order)
            e = list(entries)
            o[i], o[j] = o[j], o[i]
            e[i], e[j] = e[j], e[i]
            yield o, e
    for i in range(1, K):
        for j in range(1, K):
            if i == j:
                continue
            o = list(order)
            e = list(entries)
            c, x = o.pop(i), e.pop(i)
            o.insert(j, c)
            e.insert(j, x)
            yield o, e
