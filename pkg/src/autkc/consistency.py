"""Numerical oracles for the Bayes-optimality and consistency theory.

Everything here works at desk scale on a known conditional distribution
``eta`` (strictly distinct entries): exhaustive enumeration of rank orders
for the 0-1 conditional risk, projected gradient descent plus a dense grid
oracle for surrogate conditional risks over the box [0, 1]^C, and the
explicit construction showing the hinge surrogate can prefer a tied,
non-ranking-preserving score vector.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .losses import scalar_surrogate
from .ranking import as_cond_dist, as_scores
from .seeding import STREAM_PGD, STREAM_TRIAL, stream

SURROGATE_KINDS = ("square", "exp", "logit", "hinge")
MAX_ENUM_CLASSES = 8   # factorial enumeration cap
MAX_PGD_CLASSES = 64   # PGD is polynomial; cap only guards against typos

DEFAULT_RESTARTS = 10
DEFAULT_STEPS = 5000
DEFAULT_STEP_SIZE = 0.05
DEFAULT_DECAY_FACTOR = 0.5
DEFAULT_DECAY_EVERY = 1000
DEFAULT_GAP_TOL = 1e-6
MIN_ETA_GAP = 1e-4


def random_cond_dist(C: int, rng: np.random.Generator, min_gap: float = MIN_ETA_GAP) -> np.ndarray:
    """Random simplex point with all pairwise gaps at least ``min_gap``."""
    for _ in range(10_000):
        eta = rng.random(C) + 1e-3
        eta /= eta.sum()
        gaps = np.diff(np.sort(eta))
        if gaps.min() >= min_gap:
            return eta
    raise RuntimeError(f"could not sample a well-separated eta for C={C}")


def conditional_risk_01(order, eta, K: int) -> float:
    """0-1 conditional risk of a rank order: (1/K) * sum_y eta_y min(rank_y - 1, K)."""
    eta = as_cond_dist(eta)
    C = eta.shape[0]
    order = np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(C)):
        raise ValueError("order must be a permutation of all classes")
    if not 1 <= K <= C - 1:
        raise ValueError(f"K={K} out of range [1, {C - 1}]")
    ranks = np.argsort(order) + 1  # ranks[class] = position in the order
    return float(np.minimum(ranks - 1, K) @ eta) / K


def min_conditional_risk_01(eta, K: int) -> float:
    """Closed-form Bayes risk: eta sorted descending against [0, 1, .., K-1, K, .., K]."""
    eta = as_cond_dist(eta)
    coeff = np.minimum(np.arange(eta.shape[0]), K)
    return float(coeff @ np.sort(eta)[::-1]) / K


def brute_force_bayes(eta, K: int) -> list[tuple[int, ...]]:
    """Exact argmin set of the 0-1 conditional risk over all C! rank orders."""
    eta = as_cond_dist(eta)
    C = eta.shape[0]
    if C > MAX_ENUM_CLASSES:
        raise ValueError(f"C={C} too large for factorial enumeration (max {MAX_ENUM_CLASSES})")
    if not 1 <= K <= C - 1:
        raise ValueError(f"K={K} out of range [1, {C - 1}]")
    perms = np.array(list(itertools.permutations(range(C))), dtype=np.int64)
    ranks = np.argsort(perms, axis=1) + 1
    risks = (np.minimum(ranks - 1, K) @ eta) / K
    best = risks.min()
    return [tuple(p) for p in perms[risks == best]]


def order_is_rp(order, eta, K: int) -> bool:
    """Does the order place eta's top-K classes at ranks 1..K in eta order?"""
    eta = as_cond_dist(eta)
    order = np.asarray(order, dtype=np.int64)
    top = np.argsort(-eta, kind="stable")[:K]
    return bool(np.array_equal(order[:K], top))


def is_rp(s, eta, K: int, gap_tol: float = DEFAULT_GAP_TOL) -> bool:
    """Top-K ranking-preserving check for a score vector against eta.

    True iff the score ranks 1..K are exactly eta's top-K classes in eta
    order, every consecutive pair separated by more than ``gap_tol``, and
    the K-th of them exceeds every remaining score by more than ``gap_tol``.
    Exact ties therefore always fail.
    """
    s = as_scores(s)
    eta = np.asarray(eta, dtype=np.float64)
    if eta.shape != s.shape:
        raise ValueError("eta and score shapes differ")
    C = s.shape[0]
    if not 1 <= K <= C:
        raise ValueError(f"K={K} out of range [1, {C}]")
    top = np.argsort(-eta, kind="stable")[:K]
    vals = s[top]
    if K > 1 and not np.all(vals[:-1] > vals[1:] + gap_tol):
        return False
    if K < C:
        rest = np.delete(s, top)
        if not vals[-1] > rest.max() + gap_tol:
            return False
    return True


def surrogate_conditional_risk(kind: str, scores, etas, K: int, with_grad: bool = True):
    """Conditional surrogate risk (and subgradient) for rows of candidate scores.

    ``scores`` is (R, C); ``etas`` is (C,) or (R, C).  The risk of row r is
    sum_y eta_y * (1/K) * sum_{k<=K+1} loss(s_y - s_[k]) on raw scores, with
    the top-(K+1) selection frozen at the evaluation point for the gradient.
    """
    if kind not in SURROGATE_KINDS:
        raise ValueError(f"unknown surrogate {kind!r}; valid: {SURROGATE_KINDS}")
    S = np.asarray(scores, dtype=np.float64)
    if S.ndim != 2:
        raise ValueError("scores must be (R, C)")
    R, C = S.shape
    E = np.broadcast_to(np.asarray(etas, dtype=np.float64), (R, C))
    if not 1 <= K <= C - 1:
        raise ValueError(f"K={K} out of range [1, {C - 1}]")
    m = K + 1
    sel = np.argsort(-S, axis=1, kind="stable")[:, :m]
    s_sel = np.take_along_axis(S, sel, axis=1)
    t = S[:, :, None] - s_sel[:, None, :]  # (R, C, m)
    vals, ders = scalar_surrogate(kind, t)
    risk = np.einsum("rc,rcm->r", E, vals) / K
    if not with_grad:
        return risk, None
    grad = E * ders.sum(axis=2) / K
    col = -np.einsum("rc,rcm->rm", E, ders) / K
    np.add.at(grad, (np.arange(R)[:, None], sel), col)
    return risk, grad


class RestartDiverged(RuntimeError):
    """All PGD restarts hit a non-finite risk."""


def _pgd_batch(
    kind: str,
    etas: np.ndarray,
    K: int,
    starts: np.ndarray,
    steps: int,
    step_size: float,
    decay_factor: float,
    decay_every: int,
):
    """Run PGD on a batch of restart rows; returns final (scores, risks).

    Rows whose risk turns non-finite are frozen at their last finite point
    and reported with infinite risk.
    """
    S = starts.copy()
    alive = np.ones(S.shape[0], dtype=bool)
    for step in range(steps):
        lr = step_size * decay_factor ** (step // decay_every)
        risk, grad = surrogate_conditional_risk(kind, S[alive], etas[alive], K)
        finite = np.isfinite(risk) & np.all(np.isfinite(grad), axis=1)
        if not finite.all():
            idx = np.flatnonzero(alive)
            alive[idx[~finite]] = False
            risk, grad = risk[finite], grad[finite]
        if not alive.any():
            break
        S[alive] = np.clip(S[alive] - lr * grad, 0.0, 1.0)
    final_risk = np.full(S.shape[0], np.inf)
    if alive.any():
        final_risk[alive], _ = surrogate_conditional_risk(
            kind, S[alive], etas[alive], K, with_grad=False
        )
    return S, final_risk


def minimize_surrogate_conditional_risk(
    kind: str,
    eta,
    K: int,
    restarts: int = DEFAULT_RESTARTS,
    steps: int = DEFAULT_STEPS,
    step_size: float = DEFAULT_STEP_SIZE,
    decay_factor: float = DEFAULT_DECAY_FACTOR,
    decay_every: int = DEFAULT_DECAY_EVERY,
    seed: int = 0,
    trial: int = 0,
):
    """Projected gradient descent on the conditional surrogate risk over [0,1]^C.

    Multiple random restarts with a step-decayed learning rate; returns the
    best (score vector, risk) found.  Raises :class:`RestartDiverged` if
    every restart produced a non-finite risk.
    """
    eta = as_cond_dist(eta)
    C = eta.shape[0]
    if C > MAX_PGD_CLASSES:
        raise ValueError(f"C={C} beyond desk scale (max {MAX_PGD_CLASSES})")
    rng = stream(seed, STREAM_PGD, trial)
    starts = rng.random((restarts, C))
    etas = np.broadcast_to(eta, (restarts, C))
    S, risks = _pgd_batch(kind, etas, K, starts, steps, step_size, decay_factor, decay_every)
    if not np.isfinite(risks).any():
        raise RestartDiverged(f"all {restarts} restarts diverged for {kind} (C={C}, K={K})")
    best = int(np.argmin(risks))
    return S[best], float(risks[best])


def grid_min_risk(kind: str, eta, K: int, resolution: float = 0.02, chunk: int = 200_000):
    """Dense grid oracle over [0,1]^C for C <= 4; returns (argmin point, risk)."""
    eta = as_cond_dist(eta)
    C = eta.shape[0]
    if C > 4:
        raise ValueError("grid oracle supports C <= 4")
    axis = np.round(np.arange(0.0, 1.0 + resolution / 2.0, resolution), 12)
    P = axis.shape[0]
    total = P**C
    best_risk = np.inf
    best_point = None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        coords = np.stack(np.unravel_index(idx, (P,) * C), axis=1)
        points = axis[coords]
        risk, _ = surrogate_conditional_risk(kind, points, eta, K, with_grad=False)
        j = int(np.argmin(risk))
        if risk[j] < best_risk:
            best_risk = float(risk[j])
            best_point = points[j].copy()
    return best_point, best_risk


@dataclass
class HingeCounterexample:
    """An eta plus score pair witnessing the hinge surrogate's inconsistency."""

    eta: np.ndarray
    s_rp: np.ndarray
    s_tied: np.ndarray
    risk_rp: float
    risk_tied: float
    risk_gap: float
    tail_mass: float
    condition_threshold: float


def _centered_offsets(count: int, extent: float) -> np.ndarray:
    # strictly decreasing offsets summing to zero, bounded by +-extent
    if count == 1:
        return np.zeros(1)
    eps = 2.0 * extent / (count - 1)
    return eps * ((count - 1) / 2.0 - np.arange(count))


def hinge_counterexample(C: int, K: int, rp_gap: float = 0.5) -> HingeCounterexample:
    """Build the tail-heavy eta and score pair from the inconsistency proof.

    Requires enough classes that the mass beyond rank K+1 can exceed
    K/(K+1) while keeping every head entry above every tail entry; the
    feasibility limit is C > (K+1)^2.  ``s_rp`` is strictly eta-ordered
    with consecutive gap ``rp_gap``; ``s_tied`` flattens its top K+1 scores
    onto the (K+1)-th value.  The returned ``risk_gap`` is positive exactly
    when the tied vector has the smaller conditional hinge risk.
    """
    C, K = int(C), int(K)
    if K < 1:
        raise ValueError("K must be >= 1")
    if C < K + 3:
        raise ValueError(f"need C >= K+3, got C={C}, K={K}")
    head_n, tail_n = K + 1, C - K - 1
    threshold = K / (K + 1)
    delta_max = (tail_n - K * (K + 1)) / (C * (K + 1))
    if delta_max <= 0.0:
        raise ValueError(
            f"condition unsatisfiable: C={C}, K={K} cannot place mass above "
            f"{threshold:.6g} beyond rank {K + 1} with strictly ordered entries "
            f"(needs C > (K+1)^2 = {(K + 1) ** 2})"
        )
    delta = min(0.01, delta_max / 2.0)
    tail_mass = threshold + delta
    head_base = (1.0 - tail_mass) / head_n
    tail_base = tail_mass / tail_n
    margin = head_base - tail_base
    head = head_base + _centered_offsets(head_n, min(margin / 4.0, head_base / 2.0))
    tail = tail_base + _centered_offsets(tail_n, min(margin / 4.0, tail_base / 2.0))
    eta = np.concatenate([head, tail])
    eta = as_cond_dist(eta / eta.sum())

    s_rp = rp_gap * np.arange(C - 1, -1, -1, dtype=np.float64)
    s_tied = s_rp.copy()
    s_tied[: K + 1] = s_rp[K]
    risk_rp = hinge_conditional_risk(s_rp, eta, K)
    risk_tied = hinge_conditional_risk(s_tied, eta, K)
    return HingeCounterexample(
        eta=eta,
        s_rp=s_rp,
        s_tied=s_tied,
        risk_rp=risk_rp,
        risk_tied=risk_tied,
        risk_gap=risk_rp - risk_tied,
        tail_mass=float(tail_mass),
        condition_threshold=threshold,
    )


def hinge_conditional_risk(s, eta, K: int) -> float:
    """Conditional hinge risk of one score vector (helper around the batch path)."""
    risk, _ = surrogate_conditional_risk("hinge", np.atleast_2d(s), eta, K, with_grad=False)
    return float(risk[0])


def tied_variant(s_rp, eta, K: int) -> np.ndarray:
    """Apply the counterexample construction to an arbitrary eta-ordered score."""
    s_rp = as_scores(s_rp)
    order = np.argsort(-np.asarray(eta, dtype=np.float64), kind="stable")
    s_tied = s_rp.copy()
    s_tied[order[: K + 1]] = s_rp[order[K]]
    return s_tied


def sample_rp_scores(
    eta, K: int, count: int, rng: np.random.Generator, scale: float = 3.0, min_gap: float = 1e-3
) -> np.ndarray:
    """Random strictly eta-ordered score vectors with a floor on consecutive gaps."""
    eta = as_cond_dist(eta)
    C = eta.shape[0]
    vals = np.sort(rng.random((count, C)) * scale, axis=1)[:, ::-1]
    vals = vals + min_gap * np.arange(C - 1, -1, -1)
    order = np.argsort(-eta, kind="stable")
    scores = np.empty_like(vals)
    scores[:, order] = vals
    return scores


def consistency_report(
    family: str,
    C: int,
    K: int,
    trials: int,
    seed: int,
    restarts: int = DEFAULT_RESTARTS,
    steps: int = DEFAULT_STEPS,
    gap_tol: float = DEFAULT_GAP_TOL,
    grid_check: bool = True,
) -> dict:
    """Run the consistency experiment for one surrogate family.

    square/exp/logit: PGD-minimize the conditional risk for ``trials``
    random etas and check top-K ranking preservation of each minimizer;
    failures are cross-checked against the dense grid oracle when C <= 4.
    hinge: build the inconsistency counterexample and additionally report
    PGD minimizers on the constructed eta (expected to violate RP).
    """
    if family not in SURROGATE_KINDS:
        raise ValueError(f"family must be one of {SURROGATE_KINDS}, got {family!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")

    report: dict = {
        "family": family,
        "C": int(C),
        "K": int(K),
        "trials": int(trials),
        "gap_tol": gap_tol,
        "records": [],
    }

    if family == "hinge":
        ce = hinge_counterexample(C, K)
        report["eta"] = ce.eta.tolist()
        report["s_rp"] = ce.s_rp.tolist()
        report["s_tied"] = ce.s_tied.tolist()
        report["risk_gap"] = ce.risk_gap
        report["tail_mass"] = ce.tail_mass
        report["condition_threshold"] = ce.condition_threshold
        etas = [ce.eta] * trials
    else:
        etas = [random_cond_dist(C, stream(seed, STREAM_TRIAL, t)) for t in range(trials)]

    # one batched PGD pass over all trials x restarts
    starts = np.vstack(
        [stream(seed, STREAM_PGD, t).random((restarts, C)) for t in range(trials)]
    )
    eta_rows = np.repeat(np.vstack(etas), restarts, axis=0)
    S, risks = _pgd_batch(
        family, eta_rows, K, starts, steps, DEFAULT_STEP_SIZE, DEFAULT_DECAY_FACTOR,
        DEFAULT_DECAY_EVERY,
    )
    successes = 0
    worst_risk_gap = 0.0
    for t in range(trials):
        block = slice(t * restarts, (t + 1) * restarts)
        r = risks[block]
        if not np.isfinite(r).any():
            raise RestartDiverged(f"trial {t}: all restarts diverged")
        best = int(np.argmin(r))
        minimizer = S[block][best]
        risk = float(r[best])
        rp = is_rp(minimizer, etas[t], K, gap_tol)
        tied_risk, _ = surrogate_conditional_risk(
            family, np.full((1, C), 0.5), etas[t], K, with_grad=False
        )
        record = {
            "eta": etas[t].tolist(),
            "minimizer": minimizer.tolist(),
            "risk": risk,
            "rp": bool(rp),
            # diagnostics for the flat-region phenomenon: the all-tied score
            # is a local minimum of the conditional risk unless eta's largest
            # entry exceeds 1/(K+1)
            "tied_risk": float(tied_risk[0]),
            "descent_at_tie": bool(etas[t].max() > 1.0 / (K + 1)),
        }
        if rp:
            successes += 1
        elif family != "hinge" and grid_check and C <= 4:
            grid_point, grid_risk = grid_min_risk(family, etas[t], K)
            record["grid_risk"] = grid_risk
            record["grid_rp"] = bool(is_rp(grid_point, etas[t], K, gap_tol))
            worst_risk_gap = max(worst_risk_gap, risk - grid_risk)
        report["records"].append(record)

    report["rp_success_rate"] = successes / trials
    if family == "hinge":
        report["worst_risk_gap"] = report["risk_gap"]
    else:
        report["worst_risk_gap"] = worst_risk_gap
    return report
