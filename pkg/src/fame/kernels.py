"""Hot numeric kernels, each with a numba and a numpy implementation.

``det_sweep``, ``eer_crossing`` and ``pair_cosine_sums`` dispatch to the
compiled variants unless the JIT is disabled (see ``fame._accel``).
"""

import numpy as np

from ._accel import USE_JIT, njit


# -- DET sweep ---------------------------------------------------------------
# Inputs are scores sorted ascending with their 0/1 labels in the same order.
# Output thresholds are the distinct scores followed by +inf; the acceptance
# rule is ``score >= threshold``.


@njit
def _det_sweep_jit(sorted_scores, sorted_labels):
    n = sorted_scores.shape[0]
    n_tar = 0
    for i in range(n):
        n_tar += sorted_labels[i]
    n_non = n - n_tar

    n_distinct = 0
    for i in range(n):
        if i == 0 or sorted_scores[i] != sorted_scores[i - 1]:
            n_distinct += 1

    thresholds = np.empty(n_distinct + 1)
    far = np.empty(n_distinct + 1)
    frr = np.empty(n_distinct + 1)

    # walking upwards: everything strictly below the current value is rejected
    rejected_tar = 0
    rejected_non = 0
    k = 0
    i = 0
    while i < n:
        t = sorted_scores[i]
        thresholds[k] = t
        far[k] = (n_non - rejected_non) / n_non
        frr[k] = rejected_tar / n_tar
        while i < n and sorted_scores[i] == t:
            if sorted_labels[i] == 1:
                rejected_tar += 1
            else:
                rejected_non += 1
            i += 1
        k += 1
    thresholds[k] = np.inf
    far[k] = 0.0
    frr[k] = 1.0
    return thresholds, far, frr


def _det_sweep_np(sorted_scores, sorted_labels):
    labels = sorted_labels.astype(np.int64)
    n_tar = int(labels.sum())
    n_non = labels.shape[0] - n_tar
    distinct, first = np.unique(sorted_scores, return_index=True)
    # number of targets / non-targets strictly below each distinct value
    cum_tar = np.concatenate(([0], np.cumsum(labels)))
    cum_non = np.concatenate(([0], np.cumsum(1 - labels)))
    below_tar = cum_tar[first]
    below_non = cum_non[first]
    thresholds = np.append(distinct.astype(np.float64), np.inf)
    far = np.append((n_non - below_non) / n_non, 0.0)
    frr = np.append(below_tar / n_tar, 1.0)
    return thresholds, far, frr


# -- EER crossing --------------------------------------------------------------


@njit
def _eer_crossing_jit(far, frr):
    n = far.shape[0]
    for k in range(n):
        d = far[k] - frr[k]
        if d == 0.0:
            return far[k], k, 0.0
        if d < 0.0:
            prev = far[k - 1] - frr[k - 1]
            u = prev / (prev - d)
            eer = far[k - 1] + u * (far[k] - far[k - 1])
            return eer, k - 1, u
    return np.nan, -1, 0.0


def _eer_crossing_np(far, frr):
    d = far - frr
    nonpos = np.flatnonzero(d <= 0.0)
    if nonpos.size == 0:
        return np.nan, -1, 0.0
    k = int(nonpos[0])
    if d[k] == 0.0:
        return float(far[k]), k, 0.0
    prev = d[k - 1]
    u = prev / (prev - d[k])
    return float(far[k - 1] + u * (far[k] - far[k - 1])), k - 1, float(u)


# -- pairwise cosine sums (orthogonality loss) ---------------------------------


@njit
def _pair_cosine_sums_jit(sim, labels):
    n = sim.shape[0]
    pos_sum = 0.0
    neg_sum = 0.0
    pos_n = 0
    neg_n = 0
    for i in range(n):
        for j in range(i + 1, n):
            if labels[i] == labels[j]:
                pos_sum += sim[i, j]
                pos_n += 1
            else:
                neg_sum += sim[i, j]
                neg_n += 1
    return pos_sum, pos_n, neg_sum, neg_n


def _pair_cosine_sums_np(sim, labels):
    upper = np.triu(np.ones(sim.shape, dtype=bool), k=1)
    same = labels[:, None] == labels[None, :]
    pos = upper & same
    neg = upper & ~same
    return float(sim[pos].sum()), int(pos.sum()), float(sim[neg].sum()), int(neg.sum())


if USE_JIT:
    _det_sweep, _eer_crossing, _pair_cosine_sums = (
        _det_sweep_jit, _eer_crossing_jit, _pair_cosine_sums_jit)
else:
    _det_sweep, _eer_crossing, _pair_cosine_sums = (
        _det_sweep_np, _eer_crossing_np, _pair_cosine_sums_np)


def det_sweep(sorted_scores, sorted_labels):
    return _det_sweep(np.ascontiguousarray(sorted_scores, dtype=np.float64),
                      np.ascontiguousarray(sorted_labels, dtype=np.int64))


def eer_crossing(far, frr):
    """Return ``(eer_fraction, k, u)``: the crossing lies at ``k + u``."""
    eer, k, u = _eer_crossing(np.ascontiguousarray(far, dtype=np.float64),
                              np.ascontiguousarray(frr, dtype=np.float64))
    return float(eer), int(k), float(u)


def pair_cosine_sums(sim, labels):
    """Sums and counts of ``sim[i, j]`` over same- and different-label pairs i<j."""
    s, sn, d, dn = _pair_cosine_sums(np.ascontiguousarray(sim, dtype=np.float64),
                                     np.ascontiguousarray(labels, dtype=np.int64))
    return float(s), int(sn), float(d), int(dn)


IMPLEMENTATIONS = {
    "jit": {"det_sweep": _det_sweep_jit, "eer_crossing": _eer_crossing_jit,
            "pair_cosine_sums": _pair_cosine_sums_jit},
    "numpy": {"det_sweep": _det_sweep_np, "eer_crossing": _eer_crossing_np,
              "pair_cosine_sums": _pair_cosine_sums_np},
}
