"""Brute-force reference computations, independent of the library code paths."""

import itertools
import math
from fractions import Fraction

import numpy as np


def brute_range(vectors, p, eps):
    """Double loop over float64 rows using plain Python arithmetic."""
    out = set()
    vp = [float(x) for x in vectors[p]]
    for q, row in enumerate(vectors):
        dot = sum(a * float(b) for a, b in zip(vp, row))
        d = min(max(1.0 - dot, 0.0), 2.0)
        if d < eps:
            out.add(q)
    return out


def brute_dbscan(vectors, eps, tau):
    """Textbook DBSCAN on a precomputed neighbour table (recursive expansion)."""
    n = len(vectors)
    nbrs = [brute_range(vectors, p, eps) for p in range(n)]
    core = [len(nbrs[p]) >= tau for p in range(n)]
    labels = [None] * n
    c = 0
    for p in range(n):
        if labels[p] is not None or not core[p]:
            continue
        c += 1
        stack = [p]
        labels[p] = c
        while stack:
            q = stack.pop()
            for r in sorted(nbrs[q]):
                if labels[r] is None or labels[r] == -1:
                    if labels[r] is None and core[r]:
                        stack.append(r)
                    if labels[r] is None:
                        labels[r] = c
    return [(-1 if lab is None else lab) for lab in labels], nbrs, core


def pair_counts(a, b):
    """Pair agreement counts by enumerating all pairs."""
    both = same_a = same_b = 0
    n = len(a)
    for i in range(n):
        for j in range(i + 1, n):
            sa = a[i] == a[j]
            sb = b[i] == b[j]
            same_a += sa
            same_b += sb
            both += sa and sb
    return both, same_a, same_b, n * (n - 1) // 2


def brute_ari(a, b):
    both, sa, sb, total = pair_counts(a, b)
    if total == 0:
        return 1.0
    expected = Fraction(sa * sb, total)
    maximum = Fraction(sa + sb, 2)
    if maximum == expected:
        return 1.0 if _same_partition(a, b) else 0.0
    return float((both - expected) / (maximum - expected))


def _same_partition(a, b):
    return len(set(zip(a, b))) == len(set(a)) == len(set(b))


def _sizes(x):
    sizes = {}
    for v in x:
        sizes[v] = sizes.get(v, 0) + 1
    return list(sizes.values())


def brute_mi(a, b):
    n = len(a)
    joint = {}
    for pair in zip(a, b):
        joint[pair] = joint.get(pair, 0) + 1
    ca, cb = {}, {}
    for u, v in zip(a, b):
        ca[u] = ca.get(u, 0) + 1
        cb[v] = cb.get(v, 0) + 1
    return sum(
        nij / n * math.log(n * nij / (ca[u] * cb[v])) for (u, v), nij in joint.items()
    )


def brute_entropy(x):
    n = len(x)
    return -sum(s / n * math.log(s / n) for s in _sizes(x))


def brute_emi(a_sizes, b_sizes, n):
    """Direct hypergeometric summation with exact binomial probabilities."""
    total = 0.0
    for ai in a_sizes:
        for bj in b_sizes:
            denom = math.comb(n, bj)
            for nij in range(max(1, ai + bj - n), min(ai, bj) + 1):
                prob = Fraction(math.comb(ai, nij) * math.comb(n - ai, bj - nij), denom)
                total += nij / n * math.log(n * nij / (ai * bj)) * float(prob)
    return total


def permutation_emi(a, b):
    """E[MI] as the average MI over every permutation of ``b`` (tiny n only)."""
    perms = list(itertools.permutations(b))
    return sum(brute_mi(a, p) for p in perms) / len(perms)


def brute_ami(a, b):
    n = len(a)
    if n == 0 or _same_partition(a, b):
        return 1.0
    mi = brute_mi(a, b)
    emi = brute_emi(_sizes(a), _sizes(b), n)
    h = 0.5 * (brute_entropy(a) + brute_entropy(b))
    den = h - emi
    if abs(den) <= 1e-12 * max(1.0, h):
        return 0.0
    return (mi - emi) / den


def set_partitions(n):
    """All set partitions of range(n) as restricted-growth label lists."""
    if n == 0:
        yield []
        return

    def rec(prefix, m):
        if len(prefix) == n:
            yield list(prefix)
            return
        for v in range(m + 1):
            prefix.append(v)
            yield from rec(prefix, max(m, v + 1))
            prefix.pop()

    yield from rec([0], 1)


def random_sphere_points(rng, n, dim, components=3, spread=0.4):
    centers = rng.normal(size=(components, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    comp = rng.integers(components, size=n)
    X = centers[comp] + rng.normal(scale=spread / np.sqrt(dim), size=(n, dim))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def integer_partitions(n, largest=None):
    """Block-size lists of ``n`` in non-increasing order."""
    largest = n if largest is None else largest
    if n == 0:
        yield []
        return
    for first in range(min(n, largest), 0, -1):
        for rest in integer_partitions(n - first, first):
            yield [first] + rest
