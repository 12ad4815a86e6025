"""Independent reference implementations used only by the tests.

None of these share code paths with the package under test.
"""

from fractions import Fraction
import math

import numpy as np


def brute_force_det(scores, labels):
    """Full threshold sweep by direct counting, exact rationals."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    tar, non = scores[labels == 1], scores[labels == 0]
    thresholds = sorted(set(scores.tolist())) + [math.inf]
    t = np.asarray(thresholds)[:, None]
    # every threshold against every score: O(n^2) counts, no sorting tricks
    n_fa = (non[None, :] >= t).sum(axis=1)
    n_fr = (tar[None, :] < t).sum(axis=1)
    return [(th, Fraction(int(a), len(non)), Fraction(int(r), len(tar)))
            for th, a, r in zip(thresholds, n_fa, n_fr)]


def brute_force_eer(scores, labels):
    """EER in percent as an exact Fraction (segment intersection of FAR and FRR)."""
    points = brute_force_det(scores, labels)
    for _, far, frr in points:
        if far == frr:
            return 100 * far
    for (_, far0, frr0), (_, far1, frr1) in zip(points, points[1:]):
        if far0 > frr0 and far1 < frr1:
            # FAR(s) = far0 + s (far1 - far0), FRR(s) = frr0 + s (frr1 - frr0)
            s = (far0 - frr0) / ((far0 - frr0) - (far1 - frr1))
            return 100 * (far0 + s * (far1 - far0))
    raise AssertionError("no crossing found")


def matvec(W, b, x):
    return [sum(W[i][j] * x[j] for j in range(len(x))) + b[i] for i in range(len(b))]


def softmax_ce(logits, labels):
    total = 0.0
    for row, y in zip(logits, labels):
        m = max(row)
        z = sum(math.exp(v - m) for v in row)
        total += -(row[y] - m - math.log(z))
    return total / len(labels)


def pairwise_oc(fused, labels):
    """Orthogonality loss by explicit enumeration of pairs i<j."""
    n = len(labels)
    rows = [np.asarray(r, dtype=float) for r in fused]
    pos, neg = [], []
    for i in range(n):
        for j in range(i + 1, n):
            c = float(rows[i] @ rows[j] / (np.linalg.norm(rows[i]) * np.linalg.norm(rows[j])))
            (pos if labels[i] == labels[j] else neg).append(c)
    intra = 1.0 - sum(pos) / len(pos) if pos else 0.0
    return intra + abs(sum(neg) / len(neg))


def cosine(a, b):
    a, b = list(map(float, a)), list(map(float, b))
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


def central_differences(f, arrays, h=1e-5):
    """Numerical gradient of scalar ``f()`` w.r.t. each array, perturbed in place."""
    grads = {}
    for name, arr in arrays.items():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            fp = f()
            arr[idx] = orig - h
            fm = f()
            arr[idx] = orig
            g[idx] = (fp - fm) / (2 * h)
        grads[name] = g
    return grads


def max_relative_error(analytic, numeric, floor=1e-8):
    """max |a - n| / max(|a|, |n|, floor) over all entries."""
    a = np.asarray(analytic, dtype=float)
    n = np.asarray(numeric, dtype=float)
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))


def random_instance(rng, n_min=10, n_max=200, tie_prob=0.3):
    """Random verification instance with both labels present and injected ties."""
    n = int(rng.integers(n_min, n_max + 1))
    p = rng.uniform(0.05, 0.95)
    labels = (rng.random(n) < p).astype(int)
    labels[0], labels[1] = 1, 0
    rng.shuffle(labels)
    # scores on a coarse grid so monotone transforms stay injective in floating point
    scores = np.round(rng.normal(labels * rng.uniform(0, 2), 1.0), 3)
    for i in range(1, n):
        if rng.random() < tie_prob:
            scores[i] = scores[rng.integers(0, i)]
    return scores.tolist(), labels.tolist()
