"""Score-vector primitives under worst-case tie-breaking.

Scores are plain 1-D float arrays (one entry per class); conditional
distributions are points on the probability simplex with strictly distinct
entries; labels are integer class indices.  All rank computations compare
raw floating values exactly: a tie is an exact equality, and every tie is
resolved against the queried label.  Tolerance-based comparisons belong to
the consistency lab, not here.
"""

from __future__ import annotations

import numpy as np

COND_DIST_SUM_TOL = 1e-12


def as_scores(values) -> np.ndarray:
    """Validate and return a score vector as a float64 array."""
    s = np.asarray(values, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError(f"score vector must be 1-D, got shape {s.shape}")
    if s.shape[0] < 2:
        raise ValueError("score vector needs at least 2 classes")
    if not np.all(np.isfinite(s)):
        raise ValueError("score vector contains non-finite entries")
    return s


def as_cond_dist(values) -> np.ndarray:
    """Validate a conditional distribution: simplex point, strictly distinct entries."""
    eta = as_scores(values)
    if np.any(eta < 0.0) or np.any(eta > 1.0):
        raise ValueError("conditional distribution entries must lie in [0, 1]")
    if abs(float(eta.sum()) - 1.0) > COND_DIST_SUM_TOL:
        raise ValueError(f"conditional distribution sums to {eta.sum()!r}, not 1")
    if np.unique(eta).size != eta.size:
        raise ValueError("conditional distribution entries must be strictly distinct")
    return eta


def check_label(s: np.ndarray, y: int) -> int:
    y = int(y)
    if not 0 <= y < s.shape[0]:
        raise IndexError(f"label {y} out of range for {s.shape[0]} classes")
    return y


def worst_case_rank(s, y: int) -> int:
    """Rank of class ``y`` in ``s`` when every tie is broken against ``y``.

    Equals ``|{j : s_j >= s_y}|`` counting ``y`` itself, so a strict maximum
    has rank 1 and a fully tied vector puts ``y`` last.
    """
    s = as_scores(s)
    y = check_label(s, y)
    return int(np.sum(s >= s[y]))


def worst_case_rank_batch(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Vectorized :func:`worst_case_rank` over rows of ``scores``."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    sy = scores[np.arange(scores.shape[0]), labels]
    return np.sum(scores >= sy[:, None], axis=1)


def kth_largest(s, k: int) -> float:
    """The k-th greatest entry of ``s``, duplicates retained (1-based k)."""
    s = as_scores(s)
    if not 1 <= k <= s.shape[0]:
        raise ValueError(f"k={k} out of range [1, {s.shape[0]}]")
    return float(np.sort(s)[::-1][k - 1])


def kth_largest_excluding(s, y: int, k: int) -> float:
    """The k-th greatest entry of ``s`` after dropping entry ``y``."""
    s = as_scores(s)
    y = check_label(s, y)
    if not 1 <= k <= s.shape[0] - 1:
        raise ValueError(f"k={k} out of range [1, {s.shape[0] - 1}]")
    rest = np.delete(s, y)
    return float(np.sort(rest)[::-1][k - 1])


def top_m_indices(s, m: int) -> np.ndarray:
    """Indices of the m greatest entries, ties broken by ascending index."""
    s = as_scores(s)
    if not 1 <= m <= s.shape[0]:
        raise ValueError(f"m={m} out of range [1, {s.shape[0]}]")
    # stable argsort of -s keeps the original order among equal entries
    return np.argsort(-s, kind="stable")[:m]


def top_m_indices_batch(scores: np.ndarray, m: int) -> np.ndarray:
    """Row-wise :func:`top_m_indices`; returns an (n, m) index array."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.argsort(-scores, axis=1, kind="stable")[:, :m]
