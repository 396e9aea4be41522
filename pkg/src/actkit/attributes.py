"""Linear attribute classifiers and score stacking.

Attributes (fine-grained activities and manipulated objects) are scored
on time intervals by one-vs-all linear classifiers trained with a
deterministic full-batch subgradient descent on the L2-regularized
hinge loss.  Scores are z-normalized with training statistics.  On top
of the raw scores, two score-derived features support a second
classification level: the context feature (element-wise maximum of all
other intervals of the sequence) and the co-occurrence feature (the
score vector of the interval itself with the target attribute removed).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

DEFAULT_FLOOR = -10.0


@dataclass
class TrainConfig:
    """Hyper-parameters of the hinge-loss subgradient trainer.

    lam is the L2 regularization strength, the learning rate at epoch t
    is 1 / (lam * t).  The seed is recorded so that derived per-attribute
    seeds (seed, attribute index) stay reproducible when training is
    parallelized; the descent itself starts from zero and is
    deterministic.  floor is the score assigned to attributes that could
    not be trained, in z-normalized score units.
    """

    lam: float = 0.01
    epochs: int = 200
    seed: int = 0
    znorm: bool = True
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    score_mean: float = 0.0
    score_std: float = 1.0
    constant_scores: bool = False


@dataclass
class LinearModelSet:
    """One linear model per trainable attribute.

    models maps attribute label -> LinearModel in vocabulary order;
    skipped lists (label, reason) pairs for attributes without both a
    positive and a negative training example.
    """

    models: dict
    labels: tuple
    skipped: tuple
    config: TrainConfig
    feature_dim: int


@dataclass
class ScoreMatrix:
    """Attribute scores per interval: one row per attribute label."""

    values: np.ndarray
    labels: tuple
    interval_ids: tuple = ()
    floored_rows: tuple = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("score matrix must be 2-D")
        if self.values.shape[0] != len(self.labels):
            raise ValueError("score matrix row count does not match labels")
        if not self.interval_ids:
            self.interval_ids = tuple(range(self.values.shape[1]))
        if len(self.interval_ids) != self.values.shape[1]:
            raise ValueError("interval id count does not match columns")
        if not np.isfinite(self.values).all():
            raise ValueError("score matrix contains non-finite values")


def hinge_objective(X, y, w, b, lam) -> float:
    """The objective the trainer descends: lam/2 (||w||^2 + b^2) plus the
    mean hinge loss.  The bias enters the regularizer because it is
    trained as a constant-one feature."""
    margins = y * (X @ w + b)
    reg = 0.5 * lam * (float(w @ w) + b * b)
    return reg + float(np.maximum(0.0, 1.0 - margins).mean())


def _hinge_descent(X, y, lam, epochs):
    """Full-batch subgradient descent on the hinge loss.

    The bias is trained as an extra always-one feature so the whole
    parameter vector follows the same 1/(lam*t) schedule.  Deterministic:
    starts from zero, no sampling.
    """
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    w = np.zeros(Xa.shape[1])
    m = float(len(y))
    for t in range(1, epochs + 1):
        margins = y * (Xa @ w)
        viol = margins < 1.0
        grad = lam * w
        if viol.any():
            grad = grad - (y[viol] @ Xa[viol]) / m
        w = w - grad / (lam * t)
    return w[:-1], float(w[-1])


def _as_label_sets(labels):
    return [set(s) for s in labels]


def train_linear_ova(features, labels, attribute_labels,
                     config: TrainConfig | None = None) -> LinearModelSet:
    """Train one-vs-all linear classifiers for a list of attributes.

    features: (T, N) array of interval features.
    labels: per-interval sets of attribute labels (ground truth).
    attribute_labels: the attributes to train, in output row order.

    Attributes with no positive or no negative interval are skipped and
    reported in the returned set.  Per-attribute training score mean and
    standard deviation are recorded for later z-normalization; constant
    score distributions are flagged and normalized with unit deviation.
    """
    cfg = config or TrainConfig()
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a (T, N) array")
    if not np.isfinite(X).all():
        raise ValueError("features contain non-finite values")
    label_sets = _as_label_sets(labels)
    if len(label_sets) != X.shape[0]:
        raise ValueError("label count does not match feature rows")

    models, skipped = {}, []
    for a in attribute_labels:
        y = np.array([1.0 if a in s else -1.0 for s in label_sets])
        n_pos = int((y > 0).sum())
        n_neg = int((y < 0).sum())
        if n_pos == 0 or n_neg == 0:
            skipped.append((a, f"{n_pos} positive / {n_neg} negative intervals"))
            continue
        w, b = _hinge_descent(X, y, cfg.lam, cfg.epochs)
        scores = X @ w + b
        mean = float(scores.mean())
        std = float(scores.std())
        constant = std < 1e-12
        models[a] = LinearModel(w, b, mean, 1.0 if constant else std, constant)
    return LinearModelSet(models, tuple(attribute_labels), tuple(skipped),
                          cfg, X.shape[1])


def score_intervals(model_set: LinearModelSet, features,
                    interval_ids=None) -> ScoreMatrix:
    """Score intervals with every model; one row per attribute label.

    Scores are z-normalized with the stored training statistics when the
    training config enabled it.  Rows of skipped attributes are filled
    with the configured floor value and flagged.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != model_set.feature_dim:
        raise ValueError("features do not match the trained dimension")
    if not np.isfinite(X).all():
        raise ValueError("features contain non-finite values")
    cfg = model_set.config
    n, T = len(model_set.labels), X.shape[0]
    values = np.full((n, T), cfg.floor, dtype=float)
    floored = []
    for i, a in enumerate(model_set.labels):
        model = model_set.models.get(a)
        if model is None:
            floored.append(a)
            continue
        s = X @ model.weights + model.bias
        if cfg.znorm:
            s = (s - model.score_mean) / model.score_std
        values[i] = s
    ids = tuple(interval_ids) if interval_ids is not None else tuple(range(T))
    return ScoreMatrix(values, model_set.labels, ids, tuple(floored))


# ---------------------------------------------------------------------------
# score-derived features

def context_feature(scores, t: int, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Element-wise maximum over all intervals except t.

    For single-interval sequences there is no context; the feature is a
    constant floor vector.
    """
    S = np.asarray(scores, dtype=float)
    n, T = S.shape
    if not 0 <= t < T:
        raise IndexError(f"interval {t} out of range for T={T}")
    if T == 1:
        return np.full(n, floor)
    rest = np.delete(S, t, axis=1)
    return rest.max(axis=1)


def cooccurrence_feature(score_vector, i: int) -> np.ndarray:
    """The interval's score vector with entry i removed."""
    s = np.asarray(score_vector, dtype=float)
    if s.ndim != 1:
        raise ValueError("expected a single score vector")
    if not 0 <= i < s.shape[0]:
        raise IndexError(f"attribute index {i} out of range")
    return np.delete(s, i)


STACK_MODES = ("context", "cooccurrence", "base+context", "base+cooccurrence", "all")


def _stack_parts(mode):
    if mode not in STACK_MODES:
        raise ValueError(f"unknown stacking mode {mode!r}")
    use_base = mode in ("base+context", "base+cooccurrence", "all")
    use_con = mode in ("context", "base+context", "all")
    use_coocc = mode in ("cooccurrence", "base+cooccurrence", "all")
    return use_base, use_con, use_coocc


def _stacked_design(score_mats, feats, i, use_base, use_con, use_coocc, floor):
    rows = []
    for d, S in enumerate(score_mats):
        T = S.shape[1]
        for t in range(T):
            parts = []
            if use_base:
                parts.append(feats[d][t])
            if use_con:
                parts.append(context_feature(S, t, floor))
            if use_coocc:
                parts.append(cooccurrence_feature(S[:, t], i))
            rows.append(np.concatenate(parts))
    return np.array(rows)


def train_and_score_stacked(train_scores, train_labels, eval_scores, mode,
                            train_features=None, eval_features=None,
                            config: TrainConfig | None = None):
    """Train second-level attribute classifiers on score-derived features.

    train_scores / eval_scores: lists of ScoreMatrix (one per sequence,
    all sharing the same attribute rows).  train_labels: per sequence, a
    list of per-interval attribute label sets.  Modes "base+..." and
    "all" additionally concatenate the original feature vectors, which
    must then be passed as per-sequence (T, N) arrays.

    Returns a list of refined ScoreMatrix objects aligned with
    eval_scores.
    """
    cfg = config or TrainConfig()
    use_base, use_con, use_coocc = _stack_parts(mode)
    if use_base and (train_features is None or eval_features is None):
        raise ValueError(f"mode {mode!r} needs the base feature vectors")
    if not train_scores or not eval_scores:
        raise ValueError("need at least one training and one evaluation sequence")
    labels = train_scores[0].labels
    for S in list(train_scores) + list(eval_scores):
        if S.labels != labels:
            raise ValueError("score matrices disagree on attribute rows")

    S_train = [S.values for S in train_scores]
    S_eval = [S.values for S in eval_scores]
    flat_labels = []
    for d, per_seq in enumerate(train_labels):
        if len(per_seq) != S_train[d].shape[1]:
            raise ValueError(f"sequence {d}: label count does not match intervals")
        flat_labels.extend(set(s) for s in per_seq)

    n = len(labels)
    refined = [np.full_like(V, cfg.floor) for V in S_eval]
    floored = []
    for i, a in enumerate(labels):
        Xtr = _stacked_design(S_train, train_features, i,
                              use_base, use_con, use_coocc, cfg.floor)
        y = np.array([1.0 if a in s else -1.0 for s in flat_labels])
        if (y > 0).sum() == 0 or (y < 0).sum() == 0:
            floored.append(a)
            continue
        w, b = _hinge_descent(Xtr, y, cfg.lam, cfg.epochs)
        tr = Xtr @ w + b
        mean, std = float(tr.mean()), float(tr.std())
        if std < 1e-12:
            std = 1.0
        Xev = _stacked_design(S_eval, eval_features, i,
                              use_base, use_con, use_coocc, cfg.floor)
        s = Xev @ w + b
        if cfg.znorm:
            s = (s - mean) / std
        col = 0
        for d, V in enumerate(S_eval):
            T = V.shape[1]
            refined[d][i] = s[col:col + T]
            col += T
    return [
        ScoreMatrix(vals, labels, eval_scores[d].interval_ids, tuple(floored))
        for d, vals in enumerate(refined)
    ]


# ---------------------------------------------------------------------------
# file formats

def save_scores_csv(scores: ScoreMatrix, path) -> None:
    """CSV with attribute labels as rows and interval ids as columns."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["attribute"] + [str(i) for i in scores.interval_ids])
        for label, row in zip(scores.labels, scores.values):
            writer.writerow([label] + [f"{v:.9g}" for v in row])


def load_scores_csv(path) -> ScoreMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{path}: missing score matrix header")
        ids = tuple(header[1:])
        labels, rows = [], []
        for rec in reader:
            if not rec:
                continue
            if len(rec) != len(header):
                raise ValueError(f"{path}: row {rec[0]!r} has wrong column count")
            labels.append(rec[0])
            rows.append([float(v) for v in rec[1:]])
    return ScoreMatrix(np.array(rows), tuple(labels), ids)


def save_scores_npz(scores: ScoreMatrix, path, vocab_hash: str = "") -> None:
    """Binary score matrix with (n, T, vocab hash) header information."""
    np.savez(path,
             values=scores.values,
             labels=np.array(scores.labels, dtype=object),
             interval_ids=np.array([str(i) for i in scores.interval_ids],
                                   dtype=object),
             n=np.array(scores.values.shape[0]),
             t=np.array(scores.values.shape[1]),
             vocab_hash=np.array(vocab_hash))


def load_scores_npz(path, expect_vocab_hash: str | None = None) -> ScoreMatrix:
    with np.load(path, allow_pickle=True) as data:
        stored = str(data["vocab_hash"])
        if expect_vocab_hash is not None and stored != expect_vocab_hash:
            raise ValueError(
                f"{path}: vocabulary hash {stored!r} does not match expected")
        return ScoreMatrix(data["values"],
                           tuple(data["labels"].tolist()),
                           tuple(data["interval_ids"].tolist()))


def save_models_npz(model_set: LinearModelSet, path) -> None:
    arrays = {
        "labels": np.array(model_set.labels, dtype=object),
        "feature_dim": np.array(model_set.feature_dim),
        "config": np.array(json.dumps({
            "lam": model_set.config.lam,
            "epochs": model_set.config.epochs,
            "seed": model_set.config.seed,
            "znorm": model_set.config.znorm,
            "floor": model_set.config.floor,
        })),
        "skipped": np.array(json.dumps(list(model_set.skipped))),
    }
    for a, m in model_set.models.items():
        idx = model_set.labels.index(a)
        arrays[f"w_{idx}"] = m.weights
        arrays[f"meta_{idx}"] = np.array(
            [m.bias, m.score_mean, m.score_std, float(m.constant_scores)])
    np.savez(path, **arrays)


def load_models_npz(path) -> LinearModelSet:
    with np.load(path, allow_pickle=True) as data:
        labels = tuple(data["labels"].tolist())
        cfg_raw = json.loads(str(data["config"]))
        cfg = TrainConfig(**cfg_raw)
        skipped = tuple(tuple(s) for s in json.loads(str(data["skipped"])))
        models = {}
        for idx, a in enumerate(labels):
            key = f"w_{idx}"
            if key not in data:
                continue
            bias, mean, std, const = data[f"meta_{idx}"]
            models[a] = LinearModel(data[key], float(bias), float(mean),
                                    float(std), bool(const))
        return LinearModelSet(models, labels, skipped, cfg,
                              int(data["feature_dim"]))


def save_annotations(records, path) -> None:
    """Write interval annotations as JSON lines.

    Each record is a dict with keys video, start_frame, end_frame,
    attributes (list) and composite.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({
                "video": rec["video"],
                "start_frame": int(rec["start_frame"]),
                "end_frame": int(rec["end_frame"]),
                "attributes": sorted(rec["attributes"]),
                "composite": rec["composite"],
            }) + "\n")


def load_annotations(path) -> list:
    required = {"video", "start_frame", "end_frame", "attributes", "composite"}
    records = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            missing = required - rec.keys()
            if missing:
                raise ValueError(f"{path}:{ln}: missing fields {sorted(missing)}")
            if rec["end_frame"] < rec["start_frame"]:
                raise ValueError(f"{path}:{ln}: end_frame before start_frame")
            records.append(rec)
    return records
