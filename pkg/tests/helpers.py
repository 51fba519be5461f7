"""Shared sampling helpers for gradient checks.

Finite differences need evaluation points away from the non-smooth set:
selection ties (sorting) and hinge kinks.  The samplers below rejection-
sample until every relevant margin clears a floor that is wide relative to
the FD step.
"""

import numpy as np

from autkc.losses import AUTKC_FAMILIES, softmax

GAP_FLOOR = 1e-3     # min pairwise score gap (keeps selection sets stable)
KINK_FLOOR = 1e-4    # min distance of any hinge argument from its kink


def _kink_margins(spec, s, y):
    """Distances of every hinge/max argument from its kink, per family."""
    C = s.shape[0]
    k = spec.cutoff
    sy = s[y]
    desc = np.sort(s)[::-1]
    rest = np.sort(np.delete(s, y))[::-1]
    fam = spec.family
    if fam == "autkc-hinge":
        m = min(k + 1, C)
        return np.abs(1.0 - (sy - desc[:m]))
    if fam == "l1":
        return np.array([abs(1.0 + rest[k - 1] - sy)])
    if fam in ("l2", "l3"):
        shifted = s + 1.0
        shifted[y] -= 1.0
        top = np.sort(shifted)[::-1][:k]
        if fam == "l2":
            return np.array([abs(top.mean() - sy)])
        return np.abs(top - sy)
    if fam == "l4":
        return np.array([abs(1.0 + rest[:k].mean() - sy)])
    if fam == "l5":
        return np.array([abs(1.0 + desc[k] - sy)])
    if fam == "mc-hinge":
        return np.array([abs(1.0 + rest[0] - sy)])
    return np.array([np.inf])  # smooth families


def sample_smooth_points(spec, C, count, rng, scale=2.0):
    """Random (scores, labels) where the loss is differentiable with margin.

    All pairwise raw-score gaps exceed GAP_FLOOR (and the softmax-space gaps
    stay well above the FD step for the normalized families), and every
    hinge argument is at least KINK_FLOOR from its kink.
    """
    S = np.empty((count, C))
    Y = rng.integers(0, C, size=count)
    filled = 0
    while filled < count:
        s = rng.standard_normal(C) * scale
        if np.diff(np.sort(s)).min() <= GAP_FLOOR:
            continue
        if spec.family in ("autkc-sq", "autkc-exp", "autkc-logit"):
            if np.diff(np.sort(softmax(s))).min() <= 1e-4:
                continue
        if _kink_margins(spec, s, Y[filled]).min() <= KINK_FLOOR:
            continue
        S[filled] = s
        filled += 1
    return S, Y


def finite_difference_grads(value_fn, S, Y, h=1e-5):
    """Central finite differences of a batched loss over score coordinates."""
    n, C = S.shape
    grads = np.zeros_like(S)
    for j in range(C):
        e = np.zeros(C)
        e[j] = h
        vp = value_fn(S + e, Y)
        vm = value_fn(S - e, Y)
        grads[:, j] = (vp - vm) / (2.0 * h)
    return grads


def max_relative_grad_error(spec, S, Y, loss_batch, h=1e-5):
    values_grad = loss_batch(spec, S, Y)
    analytic = values_grad[1]
    fd = finite_difference_grads(lambda A, B: loss_batch(spec, A, B)[0], S, Y, h)
    scale = np.maximum(1.0, np.abs(analytic).max(axis=1))
    return float((np.abs(analytic - fd).max(axis=1) / scale).max())
