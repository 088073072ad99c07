"""Small fixed-dimension vector helpers.

Every reduction accumulates in index order with double precision so that
results are bit-identical across runs and platforms. Do not swap these for
BLAS-backed routines: pairwise/SIMD summation reorders the additions.
"""

from __future__ import annotations

import math

FEATURE_DIM = 64


def zeros(dim: int = FEATURE_DIM) -> list[float]:
    return [0.0] * dim


def dot(a: list[float], b: list[float]) -> float:
    s = 0.0
    for x, y in zip(a, b):
        s += x * y
    return s


def norm(a: list[float]) -> float:
    return math.sqrt(dot(a, a))


def normalize(a: list[float]) -> list[float]:
    n = norm(a)
    if n == 0.0:
        return [0.0] * len(a)
    return [x / n for x in a]


def cosine(a: list[float], b: list[float]) -> float:
    """Cosine similarity; zero vectors compare as 0.0."""
    na = norm(a)
    nb = norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot(a, b) / (na * nb)


def softmax(xs: list[float]) -> list[float]:
    if not xs:
        return []
    m = max(xs)
    exps = [math.exp(x - m) for x in xs]
    total = 0.0
    for e in exps:
        total += e
    return [e / total for e in exps]


def centroid(vecs: list[list[float]], dim: int = FEATURE_DIM) -> list[float]:
    """Arithmetic mean, accumulated in index order; empty input gives zeros."""
    if not vecs:
        return zeros(dim)
    acc = zeros(dim)
    for v in vecs:
        for i in range(dim):
            acc[i] += v[i]
    n = float(len(vecs))
    return [x / n for x in acc]


def weighted_centroid(pairs: list[tuple[list[float], int]], dim: int = FEATURE_DIM) -> list[float]:
    """Mean of centroids weighted by member counts; zero total weight gives zeros."""
    total = 0
    acc = zeros(dim)
    for vec, n in pairs:
        for i in range(dim):
            acc[i] += vec[i] * n
        total += n
    if total == 0:
        return zeros(dim)
    return [x / total for x in acc]
