"""Top-k error, partial area under the top-k curve, and metric comparison.

The per-sample quantities (``err_k``, ``aerr_K``) follow the worst-case
tie-breaking convention from :mod:`autkc.ranking`.  Dataset-level metrics
are computed from integer hit counts with a single final division so that
complementary identities (accuracy + error = 1, area = mean of curve
points) hold exactly in floating point, not just approximately.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .ranking import as_scores, check_label, worst_case_rank, worst_case_rank_batch


def _as_dataset(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.ndim != 2:
        raise ValueError(f"scores must be a 2-D (n, C) array, got shape {scores.shape}")
    n, C = scores.shape
    if n == 0:
        raise ValueError("empty dataset")
    if C < 2:
        raise ValueError("need at least 2 classes")
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match {n} samples")
    if labels.min() < 0 or labels.max() >= C:
        raise ValueError("label out of range")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores contain non-finite entries")
    return scores, labels


def _check_partial_cutoff(K: int, C: int) -> int:
    K = int(K)
    if not 1 <= K <= C - 1:
        raise ValueError(f"K={K} out of range [1, {C - 1}] for C={C}")
    return K


def err_k(s, y: int, k: int) -> int:
    """Top-k error: 1 iff the worst-case rank of ``y`` exceeds ``k``."""
    s = as_scores(s)
    y = check_label(s, y)
    if not 1 <= k <= s.shape[0]:
        raise ValueError(f"k={k} out of range [1, {s.shape[0]}]")
    return int(worst_case_rank(s, y) > k)


def aerr_K(s, y: int, K: int) -> float:
    """Average of the top-k errors for k = 1..K; equals min(rank-1, K)/K."""
    s = as_scores(s)
    y = check_label(s, y)
    K = _check_partial_cutoff(K, s.shape[0])
    rank = worst_case_rank(s, y)
    return min(rank - 1, K) / K


def op1_loss_01(s, y: int, K: int) -> float:
    """0-1 objective of the reformulated problem, computed by sorting.

    Returns ``(1/K) * (-1 + sum_{k<=K+1} 1{s_y <= s_[k]})`` with the
    convention that an exact tie counts as an error.  Agrees with
    :func:`aerr_K` on every input, ties included; the two functions follow
    different code paths on purpose so the equivalence stays testable.
    """
    s = as_scores(s)
    y = check_label(s, y)
    K = _check_partial_cutoff(K, s.shape[0])
    top = np.sort(s)[::-1][: K + 1]
    count = int(np.sum(s[y] <= top))
    return (count - 1) / K


def autkc_up(scores, labels, K: int) -> float:
    """Partial area under the top-k accuracy curve (higher is better).

    Counts, per sample, how many of the top K+1 order statistics the
    ground-truth score strictly exceeds, and averages the counts over n*K.
    """
    scores, labels = _as_dataset(scores, labels)
    n, C = scores.shape
    K = _check_partial_cutoff(K, C)
    top = -np.sort(-scores, axis=1)[:, : K + 1]
    sy = scores[np.arange(n), labels]
    total = int(np.sum(sy[:, None] > top))
    return total / (n * K)


def topk_up(scores, labels, k: int) -> float:
    """Fraction of samples whose worst-case rank is at most ``k``.

    This is 1 - mean(err_k): the ground-truth score strictly exceeds the
    (k+1)-th order statistic, so exact ties at the cutoff still count as
    errors.
    """
    scores, labels = _as_dataset(scores, labels)
    n, C = scores.shape
    if not 1 <= k <= C:
        raise ValueError(f"k={k} out of range [1, {C}]")
    hits = int(np.sum(worst_case_rank_batch(scores, labels) <= k))
    return hits / n


def topk_curve(scores, labels, k_max: int) -> np.ndarray:
    """Top-k accuracy at every cutoff k = 1..k_max (non-decreasing in k)."""
    scores, labels = _as_dataset(scores, labels)
    n, C = scores.shape
    if not 1 <= k_max <= C:
        raise ValueError(f"k_max={k_max} out of range [1, {C}]")
    ranks = worst_case_rank_batch(scores, labels)
    hist = np.bincount(ranks, minlength=C + 1)  # hist[r] = #samples with rank r
    hits = np.cumsum(hist)[1 : k_max + 1]
    return hits / n


@dataclass
class NormalizedGains:
    """Per-method normalized accuracy gains relative to a baseline.

    ``degraded`` flags the case where one of the normalizers G+/G- is zero;
    the raw (unnormalized) gains are returned then.
    """

    values: dict[str, np.ndarray]
    g_plus: float
    g_minus: float
    degraded: bool


def normalized_gain(curves: Mapping[str, np.ndarray], baseline: str) -> NormalizedGains:
    """Normalize per-k accuracy gains over a baseline method.

    Gains above zero are divided by G+ = |max gain|, the rest by
    G- = |min gain|, with both extrema taken jointly over all methods and
    cutoffs.  The baseline maps to all zeros.
    """
    if baseline not in curves:
        raise KeyError(f"baseline {baseline!r} not among methods {sorted(curves)}")
    base = np.asarray(curves[baseline], dtype=np.float64)
    gains = {}
    for name, curve in curves.items():
        curve = np.asarray(curve, dtype=np.float64)
        if curve.shape != base.shape:
            raise ValueError(f"curve for {name!r} has shape {curve.shape}, baseline {base.shape}")
        gains[name] = curve - base
    stacked = np.concatenate(list(gains.values()))
    g_plus = abs(float(stacked.max()))
    g_minus = abs(float(stacked.min()))
    if g_plus == 0.0 or g_minus == 0.0:
        return NormalizedGains(values=gains, g_plus=g_plus, g_minus=g_minus, degraded=True)
    values = {
        name: np.where(g > 0.0, g / g_plus, g / g_minus) for name, g in gains.items()
    }
    return NormalizedGains(values=values, g_plus=g_plus, g_minus=g_minus, degraded=False)


@dataclass(frozen=True)
class ComparisonCounts:
    """Pair counts comparing two measures over a shared domain.

    R: both measures strictly agree on the pair's order.
    S: both strict but opposite.
    P: first measure strict, second tied.
    Q: second measure strict, first tied.
    """

    R: int
    S: int
    P: int
    Q: int

    @property
    def degree_of_consistency(self) -> float:
        return self.R / (self.R + self.S)

    @property
    def degree_of_discriminancy(self) -> float:
        return self.P / self.Q if self.Q > 0 else float("inf")


def enumerate_comparison(C: int, k: int, K: int) -> ComparisonCounts:
    """Exhaustively compare partial-area accuracy against top-k accuracy.

    Both measures are functions of the ground-truth rank alone, so the
    comparison domain is all ordered rank pairs (r_a, r_b) in [1, C]^2 with
    r_a != r_b.  The first measure is the partial-area accuracy at cutoff K,
    the second the top-k accuracy.
    """
    C, k, K = int(C), int(k), int(K)
    if not (1 <= k < K <= C):
        raise ValueError(f"need 1 <= k < K <= C, got k={k}, K={K}, C={C}")
    ranks = np.arange(1, C + 1)
    # integer numerators of the partial-area accuracy (over denominator K)
    f = np.maximum(K - ranks + 1, 0)
    g = (ranks <= k).astype(np.int64)
    fa, fb = f[:, None], f[None, :]
    ga, gb = g[:, None], g[None, :]
    off = ~np.eye(C, dtype=bool)
    R = int(np.sum((fa > fb) & (ga > gb) & off))
    S = int(np.sum((fa > fb) & (ga < gb) & off))
    P = int(np.sum((fa > fb) & (ga == gb) & off))
    Q = int(np.sum((ga > gb) & (fa == fb) & off))
    return ComparisonCounts(R=R, S=S, P=P, Q=Q)


def closed_form_comparison(C: int, k: int, K: int) -> ComparisonCounts:
    """Closed-form pair counts, for cross-checking the enumeration."""
    if not (1 <= k < K <= C):
        raise ValueError(f"need 1 <= k < K <= C, got k={k}, K={K}, C={C}")
    R = k * (C - k)
    P = k * (k - 1) // 2 + (2 * C - k - K - 1) * (K - k) // 2
    return ComparisonCounts(R=R, S=0, P=P, Q=0)


def metric_report(scores, labels, K: int, k_max: int | None = None) -> dict:
    """JSON-ready metric report: {"K", "autkc_up", "topk_curve", "n"}."""
    scores, labels = _as_dataset(scores, labels)
    n, C = scores.shape
    if k_max is None:
        k_max = min(K + 1, C)
    return {
        "K": int(K),
        "autkc_up": autkc_up(scores, labels, K),
        "topk_curve": [float(v) for v in topk_curve(scores, labels, k_max)],
        "n": int(n),
    }
