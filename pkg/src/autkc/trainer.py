"""Desk-scale empirical risk minimization on synthetic ambiguous-label data.

The generator draws features and a ground-truth weight matrix from a
standard normal source and labels each point from the conditional
distribution ``softmax(W x / tau)``, so the Bayes-optimal ranking is known
exactly for every sample.  Training is plain minibatch SGD with Nesterov
momentum, l2 weight decay, a step-decayed learning rate, and a
cross-entropy warm-up phase before switching to the configured objective.
Runs are bit-reproducible from the experiment seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .consistency import is_rp
from .losses import LossSpec, loss_value_grad_batch, make_loss_spec, parse_loss_spec, softmax
from .metrics import autkc_up, topk_curve
from .ranking import worst_case_rank_batch
from .seeding import STREAM_DATA, STREAM_INIT, STREAM_SHUFFLE, STREAM_SPLIT, stream

ETA_MIN_GAP = 1e-6


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class Dataset:
    """Feature matrix, labels, and (for synthetic data) the true per-sample eta."""

    X: np.ndarray
    y: np.ndarray
    n_classes: int
    eta: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError("X must be (n, d) with matching labels")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("features contain non-finite entries")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.n_classes):
            raise ValueError("label out of range")

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, idx) -> "Dataset":
        eta = None if self.eta is None else self.eta[idx]
        return Dataset(self.X[idx], self.y[idx], self.n_classes, eta)


def generate_synthetic(C: int, d: int, n: int, tau: float, seed: int) -> Dataset:
    """Sample n points with known eta = softmax(W x / tau), no near-tied etas.

    Smaller tau sharpens eta (less label ambiguity).  Rows whose eta has a
    pairwise gap below 1e-6 are re-drawn, so downstream consumers can rely
    on strictly distinct conditional probabilities.
    """
    if C < 2 or d < 1 or n < 1:
        raise ValueError("need C >= 2, d >= 1, n >= 1")
    if not tau > 0:
        raise ValueError("tau must be positive")
    rng = stream(seed, STREAM_DATA)
    W = rng.standard_normal((C, d))
    X = rng.standard_normal((n, d))
    eta = softmax(X @ W.T / tau)
    for _ in range(1000):
        gaps = np.diff(np.sort(eta, axis=1), axis=1).min(axis=1)
        bad = np.flatnonzero(gaps < ETA_MIN_GAP)
        if bad.size == 0:
            break
        X[bad] = rng.standard_normal((bad.size, d))
        eta[bad] = softmax(X[bad] @ W.T / tau)
    else:
        raise RuntimeError("could not avoid near-tied eta rows")
    u = rng.random(n)
    y = np.minimum((np.cumsum(eta, axis=1) < u[:, None]).sum(axis=1), C - 1)
    return Dataset(X=X, y=y, n_classes=C, eta=eta)


def _uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class LinearModel:
    kind = "linear"

    def __init__(self, W: np.ndarray, b: np.ndarray):
        self.params = {"W": W, "b": b}

    @classmethod
    def init(cls, d: int, C: int, rng: np.random.Generator) -> "LinearModel":
        return cls(_uniform_init(rng, d, (d, C)), _uniform_init(rng, d, (C,)))

    def forward(self, X: np.ndarray):
        return X @ self.params["W"] + self.params["b"], X

    def backward(self, cache, dscores: np.ndarray) -> dict:
        X = cache
        return {"W": X.T @ dscores, "b": dscores.sum(axis=0)}


class MLPModel:
    """One-or-more hidden ReLU layers followed by a linear readout."""

    kind = "mlp"

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        self.params = {}
        for i, (w, b) in enumerate(zip(weights, biases)):
            self.params[f"W{i}"] = w
            self.params[f"b{i}"] = b
        self.n_layers = len(weights)

    @classmethod
    def init(cls, d: int, C: int, hidden, rng: np.random.Generator) -> "MLPModel":
        sizes = [d, *hidden, C]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(_uniform_init(rng, fan_in, (fan_in, fan_out)))
            biases.append(_uniform_init(rng, fan_in, (fan_out,)))
        return cls(weights, biases)

    def forward(self, X: np.ndarray):
        acts = [X]
        h = X
        for i in range(self.n_layers - 1):
            h = np.maximum(h @ self.params[f"W{i}"] + self.params[f"b{i}"], 0.0)
            acts.append(h)
        out = h @ self.params[f"W{self.n_layers - 1}"] + self.params[f"b{self.n_layers - 1}"]
        return out, acts

    def backward(self, cache, dscores: np.ndarray) -> dict:
        acts = cache
        grads = {}
        delta = dscores
        for i in range(self.n_layers - 1, -1, -1):
            grads[f"W{i}"] = acts[i].T @ delta
            grads[f"b{i}"] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.params[f"W{i}"].T) * (acts[i] > 0.0)
        return grads


def init_model(kind: str, d: int, C: int, hidden, seed: int):
    rng = stream(seed, STREAM_INIT)
    if kind == "linear":
        return LinearModel.init(d, C, rng)
    if kind == "mlp":
        return MLPModel.init(d, C, list(hidden), rng)
    raise ValueError(f"unknown model kind {kind!r}")


@dataclass
class ExperimentConfig:
    """Full training/evaluation configuration for one run."""

    loss: LossSpec
    K_eval: tuple[int, ...] = (1, 3, 5)
    epochs: int = 90
    warmup_epochs: int = 10
    batch_size: int = 128
    lr: float = 0.01
    lr_decay_ratio: float = 0.1
    lr_decay_every: int = 30
    momentum: float = 0.9
    weight_decay: float = 1e-4
    seed: int = 0
    model: str = "mlp"
    hidden: tuple[int, ...] = (64,)
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if isinstance(self.loss, str):
            self.loss = parse_loss_spec(self.loss)
        self.K_eval = tuple(int(k) for k in self.K_eval)
        self.hidden = tuple(int(h) for h in self.hidden)
        if not self.K_eval or min(self.K_eval) < 1:
            raise ValueError("K_eval must list cutoffs >= 1")
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise ValueError("need 0 <= warmup_epochs <= epochs")
        if self.lr < 0 or self.batch_size < 1:
            raise ValueError("need lr >= 0 and batch_size >= 1")
        if not 0 <= self.holdout_fraction < 1:
            raise ValueError("holdout_fraction must be in [0, 1)")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))


_CE = make_loss_spec("ce")


def sgd_train(model, data: Dataset, config: ExperimentConfig):
    """Train in place and return (model, per-epoch history rows).

    Epochs below ``warmup_epochs`` optimize cross-entropy, the rest the
    configured loss; the learning-rate schedule runs on one global epoch
    clock that does not reset at the handoff.  Shuffle order is fixed per
    (seed, epoch).  Each history row records the epoch's loss family, mean
    train loss, and holdout metrics.
    """
    n = len(data)
    perm = stream(config.seed, STREAM_SPLIT).permutation(n)
    n_holdout = int(round(n * config.holdout_fraction))
    if n - n_holdout < 1:
        raise ValueError("holdout split leaves no training data")
    train_idx = perm[: n - n_holdout]
    holdout = data.subset(perm[n - n_holdout :]) if n_holdout else data.subset(train_idx)
    Xtr, ytr = data.X[train_idx], data.y[train_idx]
    n_train = Xtr.shape[0]
    k_max = min(max(config.K_eval), data.n_classes)

    velocity = {name: np.zeros_like(p) for name, p in model.params.items()}
    history = []
    for epoch in range(config.epochs):
        lr = config.lr * config.lr_decay_ratio ** (epoch // config.lr_decay_every)
        spec = _CE if epoch < config.warmup_epochs else config.loss
        order = stream(config.seed, STREAM_SHUFFLE, epoch).permutation(n_train)
        loss_total = 0.0
        for start in range(0, n_train, config.batch_size):
            idx = order[start : start + config.batch_size]
            scores, cache = model.forward(Xtr[idx])
            values, dscores = loss_value_grad_batch(spec, scores, ytr[idx])
            loss_total += float(values.sum())
            grads = model.backward(cache, dscores / idx.size)
            for name, p in model.params.items():
                g = grads[name] + config.weight_decay * p
                v = velocity[name]
                v *= config.momentum
                v += g
                p -= lr * (g + config.momentum * v)  # Nesterov update
        train_loss = loss_total / n_train
        hold_scores, _ = model.forward(holdout.X)
        if not np.isfinite(train_loss) or not np.all(np.isfinite(hold_scores)):
            raise TrainingDiverged(
                f"non-finite loss or scores at epoch {epoch} (loss {spec}); "
                "the learning rate is probably too high"
            )
        history.append(
            {
                "epoch": epoch,
                "loss_family": str(spec),
                "train_loss": train_loss,
                "autkc_up": {
                    str(K): autkc_up(hold_scores, holdout.y, K) for K in config.K_eval
                },
                "topk": [float(v) for v in topk_curve(hold_scores, holdout.y, k_max)],
            }
        )
    return model, history


def evaluate(model, data: Dataset, K_list, k_max: int | None = None, gap_tol: float = 1e-6) -> dict:
    """Evaluate a trained model: partial-area accuracy per K, the top-k curve,
    and (when the true eta is known) the fraction of samples whose score
    ranking preserves eta's top-K order."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    K_list = [int(K) for K in K_list]
    C = data.n_classes
    if k_max is None:
        k_max = min(max(K_list) + 1, C)
    scores, _ = model.forward(data.X)
    ranks = worst_case_rank_batch(scores, data.y)
    curve_full = topk_curve(scores, data.y, C)
    report = {"n": len(data), "autkc_up": {}, "topk_curve": [float(v) for v in curve_full[:k_max]]}
    for K in K_list:
        value = autkc_up(scores, data.y, K)
        # exact integer cross-check: area counts == summed per-k hit counts
        area_count = int(np.clip(K + 1 - ranks, 0, K).sum())
        hits = sum(int(np.sum(ranks <= k)) for k in range(1, K + 1))
        if area_count != hits:
            raise AssertionError(f"metric identity violated at K={K}: {area_count} != {hits}")
        report["autkc_up"][str(K)] = value
    if data.eta is not None:
        report["rp_agreement"] = {
            str(K): float(
                np.mean([is_rp(scores[i], data.eta[i], K, gap_tol) for i in range(len(data))])
            )
            for K in K_list
        }
    return report


def bayes_scores(data: Dataset) -> np.ndarray:
    """Scores of the Bayes oracle: the true eta itself."""
    if data.eta is None:
        raise ValueError("dataset has no stored eta")
    return data.eta


def save_csv(data: Dataset, path) -> None:
    """Write the `f0,..,f{d-1},label` CSV format (features via repr, lossless)."""
    d = data.X.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(d)] + ["label"])
        for row, label in zip(data.X, data.y):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def _parse_csv(fh, name: str) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError(f"{name}: empty file") from None
    d = len(header) - 1
    expected = [f"f{i}" for i in range(d)] + ["label"]
    if d < 1 or header != expected:
        raise ValueError(f"{name}: bad header {header!r}, expected f0..f{{d-1}},label")
    feats, labels = [], []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != d + 1:
            raise ValueError(f"{name}: line {lineno}: expected {d + 1} fields, got {len(row)}")
        try:
            feats.append([float(v) for v in row[:d]])
        except ValueError:
            raise ValueError(f"{name}: line {lineno}: non-numeric feature") from None
        try:
            label = int(row[d])
        except ValueError:
            raise ValueError(f"{name}: line {lineno}: non-integer label") from None
        if label < 0:
            raise ValueError(f"{name}: line {lineno}: negative label")
        labels.append(label)
    if not feats:
        raise ValueError(f"{name}: no data rows")
    y = np.asarray(labels, dtype=np.int64)
    return Dataset(X=np.asarray(feats, dtype=np.float64), y=y, n_classes=int(y.max()) + 1)


def load_csv(path) -> Dataset:
    """Parse a `f0,..,f{d-1},label` CSV file; the class count is max label + 1."""
    with open(path, newline="", encoding="utf-8") as fh:
        return _parse_csv(fh, str(path))


def loads_csv(text: str, name: str = "<csv>") -> Dataset:
    """Parse the CSV dataset format from a string."""
    import io

    return _parse_csv(io.StringIO(text), name)
