"""End-to-end experiment driver over generated benchmark bundles.

A JSON config names a data bundle, an output directory and a
classification mode, plus optional pipeline stages.  The driver mines
weights from the bundle's scripts (or takes the planted ones), obtains
per-interval attribute scores (directly, or by training classifiers on
interval features), optionally refines them by stacking and merges
similar adjacent intervals, pools each sequence to a single vector and
classifies the test split.  Intermediates and an evaluation report are
written to the output directory.

Modes: "svm" and "nn" are supervised, "script" and "nn-script" transfer
from the weight matrix, "pst" propagates script scores over a sequence
graph (semi-supervised) and "pst-zero-shot" does the same without any
labeled sequences.
"""

from __future__ import annotations

import itertools
import json
import os

import numpy as np

from .attributes import (ScoreMatrix, TrainConfig, save_models_npz,
                         score_intervals, train_and_score_stacked,
                         train_linear_ova)
from .attributes import STACK_MODES
from .composites import (PstConfig, classify_nn, classify_svm,
                         nn_script_classify, pst_scores,
                         save_predictions_csv, save_pst_config, script_score,
                         seq_feature)
from .corpus import (build_documents, normalize_l1, save_weights_csv,
                     tfidf_weights)
from .metrics import EvalReport, accuracy, confusion_counts, \
    mean_average_precision
from .synth import load_bundle
from .temporal import Segment, merge_adjacent, save_segments_jsonl


class ConfigError(Exception):
    """A problem with the experiment configuration itself."""


MODES = ("svm", "nn", "script", "nn-script", "pst", "pst-zero-shot")

DEFAULT_PST_GRID = {
    "alpha": (0.5, 0.75, 0.9, 0.99),
    "gamma": (0.25, 0.5, 0.75, 1.0),
    "delta": (0.1, 0.25, 0.5, 1.0),
    "k": (3, 5, 10),
}

_KNOWN_KEYS = {"data", "output", "mode", "weights", "match_mode", "stack",
               "segment_threshold", "pst", "grid", "lam", "epochs", "seed"}
_PST_KEYS = {"alpha", "gamma", "delta", "k"}
SCORE_FLOOR = -1e30


def load_config(path) -> dict:
    """Read a JSON config; relative paths resolve against its directory."""
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    base = os.path.dirname(os.path.abspath(path))
    for key in ("data", "output"):
        if key in cfg and isinstance(cfg[key], str) \
                and not os.path.isabs(cfg[key]):
            cfg[key] = os.path.join(base, cfg[key])
    return cfg


def _validate(cfg: dict) -> dict:
    unknown = set(cfg) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("data", "output", "mode"):
        if key not in cfg:
            raise ConfigError(f"config is missing required key {key!r}")
    if cfg["mode"] not in MODES:
        raise ConfigError(f"unknown mode {cfg['mode']!r}; pick one of {MODES}")
    out = dict(cfg)
    out.setdefault("weights", "mined")
    out.setdefault("match_mode", "literal")
    out.setdefault("stack", None)
    out.setdefault("segment_threshold", None)
    out.setdefault("lam", 0.01)
    out.setdefault("epochs", 200)
    out.setdefault("seed", 0)
    if out["weights"] not in ("mined", "planted"):
        raise ConfigError(f"weights must be 'mined' or 'planted', "
                          f"got {out['weights']!r}")
    if out["match_mode"] not in ("literal", "synonym"):
        raise ConfigError(f"unknown match_mode {out['match_mode']!r}")
    if out["stack"] is not None and out["stack"] not in STACK_MODES:
        raise ConfigError(f"unknown stack mode {out['stack']!r}")
    if out["segment_threshold"] is not None:
        try:
            out["segment_threshold"] = float(out["segment_threshold"])
        except (TypeError, ValueError):
            raise ConfigError("segment_threshold must be a number") from None
    for key, spec in (("pst", "values"), ("grid", "lists")):
        block = out.get(key)
        if block is None:
            continue
        if not isinstance(block, dict):
            raise ConfigError(f"{key} must be an object")
        bad = set(block) - _PST_KEYS
        if bad:
            raise ConfigError(f"unknown {key} keys: {sorted(bad)}")
    return out


def _resolve_weights(bundle, cfg):
    if cfg["weights"] == "planted":
        return bundle.true_weights
    docs = build_documents(bundle.corpus)
    mined = tfidf_weights(docs, bundle.vocab, mode=cfg["match_mode"])
    return normalize_l1(mined)


def _attribute_scores(bundle, cfg, labels, out_dir):
    """Per-sequence (n_attrs, T) score matrices, training models if needed."""
    extra = {}
    if bundle.config.mode == "scores":
        return {s.sequence_id: np.asarray(s.scores, dtype=float)
                for s in bundle.sequences}, extra
    train = bundle.split("train")
    X = np.concatenate([s.features for s in train], axis=0)
    interval_labels = [set(attrs) for s in train
                       for attrs in s.interval_attributes]
    tcfg = TrainConfig(lam=cfg["lam"], epochs=cfg["epochs"], seed=cfg["seed"])
    model_set = train_linear_ova(X, interval_labels, labels, tcfg)
    save_models_npz(model_set, os.path.join(out_dir, "models.npz"))
    if model_set.skipped:
        extra["skipped_attributes"] = [a for a, _ in model_set.skipped]
    return {s.sequence_id: score_intervals(model_set, s.features).values
            for s in bundle.sequences}, extra


def _apply_stacking(bundle, cfg, mats, labels):
    order = [s.sequence_id for s in bundle.sequences]
    train = bundle.split("train")
    if bundle.config.mode == "scores" and cfg["stack"] in \
            ("base+context", "base+cooccurrence", "all"):
        raise ConfigError(f"stack mode {cfg['stack']!r} needs interval "
                          "features, but the bundle only carries scores")
    train_scores = [ScoreMatrix(mats[s.sequence_id], labels) for s in train]
    eval_scores = [ScoreMatrix(mats[sid], labels) for sid in order]
    train_labels = [[set(a) for a in s.interval_attributes] for s in train]
    kwargs = {}
    if bundle.config.mode == "features":
        kwargs = {"train_features": [s.features for s in train],
                  "eval_features": [s.features for s in bundle.sequences]}
    tcfg = TrainConfig(lam=cfg["lam"], epochs=cfg["epochs"], seed=cfg["seed"])
    refined = train_and_score_stacked(train_scores, train_labels, eval_scores,
                                      cfg["stack"], config=tcfg, **kwargs)
    return {sid: R.values for sid, R in zip(order, refined)}


def _apply_segmentation(bundle, cfg, mats, out_dir):
    """Merge adjacent intervals with cosine-similar score columns.

    Each merged segment contributes the mean of its member columns, and
    the merged frame ranges are written one JSONL file per sequence.
    """
    threshold = cfg["segment_threshold"]
    seg_dir = os.path.join(out_dir, "segments")
    os.makedirs(seg_dir, exist_ok=True)

    def cosine(a, b):
        u, v = a[1], b[1]
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        return 0.0 if nu == 0 or nv == 0 else float(u @ v) / (nu * nv)

    out = {}
    for seq in bundle.sequences:
        V = mats[seq.sequence_id]
        items = [([t], V[:, t].copy()) for t in range(V.shape[1])]
        merged = merge_adjacent(
            items, cosine,
            lambda a, b: (a[0] + b[0], a[1] + b[1]),
            threshold)
        cols = [vec / len(idx) for idx, vec in merged]
        out[seq.sequence_id] = np.stack(cols, axis=1)
        segs = [Segment(seq.intervals[idx[0]][0], seq.intervals[idx[-1]][1])
                for idx, _ in merged]
        save_segments_jsonl(segs, os.path.join(
            seg_dir, f"{seq.sequence_id}.jsonl"))
    return out


def _pst_grid(cfg, zero_shot):
    grid = {k: list(v) for k, v in DEFAULT_PST_GRID.items()}
    for key, vals in (cfg.get("grid") or {}).items():
        grid[key] = list(np.atleast_1d(vals))
    if zero_shot:
        grid["gamma"] = [0.0]
    for alpha, gamma, delta, k in itertools.product(
            grid["alpha"], grid["gamma"], grid["delta"], grid["k"]):
        yield PstConfig(alpha=float(alpha), gamma=float(gamma),
                        delta=float(delta), k=int(k))


def _classify_pst(bundle, cfg, weights, pooled, out_dir, zero_shot):
    order = [s.sequence_id for s in bundle.sequences]
    G = np.stack([pooled[sid] for sid in order])
    S = script_score(G, weights)
    comps = list(bundle.composites)
    labels = np.full((len(comps), len(order)), -1, dtype=int)
    for d, seq in enumerate(bundle.sequences):
        if seq.split == "train":
            for z, c in enumerate(comps):
                labels[z, d] = 1 if seq.composite == c else 0
    fixed = cfg.get("pst")
    extra = {}
    if fixed is not None:
        best = PstConfig(**{k: (int(v) if k == "k" else float(v))
                            for k, v in fixed.items()})
    else:
        val_idx = [d for d, s in enumerate(bundle.sequences)
                   if s.split == "val"]
        if not val_idx:
            raise ConfigError("propagation grid search needs a validation "
                              "split; give fixed 'pst' parameters instead")
        val_truth = [bundle.sequences[d].composite for d in val_idx]
        best, best_acc = None, -1.0
        for pcfg in _pst_grid(cfg, zero_shot):
            if pcfg.k >= len(order):
                continue
            F = pst_scores(S, labels, G, pcfg, zero_shot=zero_shot)
            preds = [comps[int(np.argmax(F[:, d]))] for d in val_idx]
            acc = accuracy(preds, val_truth)
            if acc > best_acc:
                best, best_acc = pcfg, acc
        if best is None:
            raise ConfigError("no feasible grid point: every k was at least "
                              "the number of sequences")
        extra["val_accuracy"] = best_acc
    extra.update({"alpha": best.alpha, "gamma": best.gamma,
                  "delta": best.delta, "k": best.k})
    save_pst_config(best, os.path.join(out_dir, "pst.conf"))
    F = pst_scores(S, labels, G, best, zero_shot=zero_shot)
    test_idx = [d for d, s in enumerate(bundle.sequences)
                if s.split == "test"]
    scores = F[:, test_idx].T                       # (M_test, Z)
    preds = [comps[int(np.argmax(row))] for row in scores]
    return scores, preds, extra


def run_experiment(config) -> EvalReport:
    """Run one configured experiment and return its evaluation report.

    config is a dict or a path to a JSON file (relative data/output
    paths in a file resolve against the file's directory).
    """
    raw = load_config(config) if isinstance(config, (str, os.PathLike)) \
        else dict(config)
    cfg = _validate(raw)
    mode = cfg["mode"]
    out_dir = cfg["output"]
    os.makedirs(out_dir, exist_ok=True)
    bundle = load_bundle(cfg["data"])
    comps = list(bundle.composites)
    attr_labels = bundle.true_weights.attributes
    weights = _resolve_weights(bundle, cfg)
    save_weights_csv(weights, os.path.join(out_dir, "weights.csv"))

    mats, extra = _attribute_scores(bundle, cfg, attr_labels, out_dir)
    if cfg["stack"] is not None:
        mats = _apply_stacking(bundle, cfg, mats, attr_labels)
    if cfg["segment_threshold"] is not None:
        mats = _apply_segmentation(bundle, cfg, mats, out_dir)
    pooled = {sid: seq_feature(V) for sid, V in mats.items()}

    train = bundle.split("train")
    test = bundle.split("test")
    Xtr = np.stack([pooled[s.sequence_id] for s in train])
    ytr = [s.composite for s in train]
    Xte = np.stack([pooled[s.sequence_id] for s in test])
    truth = [s.composite for s in test]
    tcfg = TrainConfig(lam=cfg["lam"], epochs=cfg["epochs"], seed=cfg["seed"])

    if mode == "svm":
        scores, universe, rep = classify_svm(Xtr, ytr, Xte, composites=comps,
                                             config=tcfg)
        preds = [universe[int(np.argmax(row))] for row in scores]
        if rep["skipped"] or rep["trained_without_negatives"]:
            extra["svm"] = rep
    elif mode == "nn":
        scores = np.full((len(test), len(comps)), SCORE_FLOOR)
        preds = []
        for m, seq in enumerate(test):
            pred, dists = classify_nn(Xtr, ytr, pooled[seq.sequence_id])
            preds.append(pred)
            for z, c in enumerate(comps):
                mine = [d for d, cc in zip(dists, ytr) if cc == c]
                if mine:
                    scores[m, z] = -min(mine)
    elif mode == "script":
        table = script_score(Xte, weights)          # (Z, M_test)
        scores = table.T
        preds = [comps[int(np.argmax(col))] for col in scores]
    elif mode == "nn-script":
        scores = np.full((len(test), len(comps)), SCORE_FLOOR)
        preds = []
        excluded_rows = set()
        for m, seq in enumerate(test):
            pred, _, excl = nn_script_classify(
                pooled[seq.sequence_id], Xtr, ytr, weights)
            preds.append(pred)
            excluded_rows.update(excl)
            for z, c in enumerate(comps):
                w = weights.row(c)
                if not w.any():
                    continue
                ds = [np.sqrt(float(w @ ((pooled[seq.sequence_id]
                                          - Xtr[j]) ** 2)))
                      for j, cc in enumerate(ytr) if cc == c]
                if ds:
                    scores[m, z] = -min(ds)
        if excluded_rows:
            extra["excluded_weight_rows"] = sorted(excluded_rows)
    else:   # pst / pst-zero-shot
        scores, preds, pst_extra = _classify_pst(
            bundle, cfg, weights, pooled, out_dir,
            zero_shot=(mode == "pst-zero-shot"))
        extra.update(pst_extra)

    rows = [(seq.sequence_id, comps[z], float(scores[m, z]))
            for m, seq in enumerate(test) for z in range(len(comps))]
    save_predictions_csv(rows, os.path.join(out_dir, "predictions.csv"))

    per_label = {c: (scores[:, z], [1 if t == c else 0 for t in truth])
                 for z, c in enumerate(comps)}
    mean_ap, aps, ap_excluded = mean_average_precision(per_label)
    report = EvalReport(
        task=f"composite-{mode}",
        mean_ap=mean_ap,
        per_label_ap=aps,
        accuracy=accuracy(preds, truth),
        labels=tuple(comps),
        confusion=confusion_counts(truth, preds, comps),
        excluded=ap_excluded,
        config={k: v for k, v in cfg.items()},
        extra=extra)
    report.save(os.path.join(out_dir, "report.json"))
    return report
