"""Scoring: step-wise average precision, PR curves, 5-fold CV reports
and the two environmental aggregation modes (per-hour and pooled)."""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import models as models_mod

IGNORE = "ignore"


class EvalError(Exception):
    pass


class NoPositives(EvalError):
    """AP is undefined without at least one positive label."""


@dataclass(frozen=True)
class PRCurve:
    points: Tuple[Tuple[float, float], ...]  # (precision, recall), thresholds descending
    average_precision: float


@dataclass(frozen=True)
class CVReport:
    model_kind: str
    fold_ap: Tuple[float, ...]
    mean: float
    std: float  # population


def pr_curve(scores: Sequence[float], labels: Sequence[int]) -> PRCurve:
    """Step-wise PR curve with tied scores grouped at one threshold.

    AP = sum over curve points of (R_n - R_{n-1}) * P_n.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise NoPositives("no positive labels")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    # indices where a tie group ends
    ends = np.nonzero(np.diff(s) != 0)[0].tolist() + [len(s) - 1]
    tp = np.cumsum(y)
    points = []
    ap = 0.0
    prev_recall = 0.0
    for e in ends:
        precision = tp[e] / (e + 1)
        recall = tp[e] / n_pos
        points.append((float(precision), float(recall)))
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return PRCurve(points=tuple(points), average_precision=float(ap))


def average_precision(scores: Sequence[float],
                      labels: Sequence[int]) -> float:
    return pr_curve(scores, labels).average_precision


def cross_validate(spec: models_mod.ModelSpec,
                   folds: Dict[int, Tuple[np.ndarray, np.ndarray]],
                   cfg: Optional[models_mod.TrainConfig] = None) -> CVReport:
    """Train/score once per predefined fold: the held-out fold is scored
    by a model trained on the other folds, seeded as spec.seed + fold."""
    cfg = cfg or models_mod.TrainConfig()
    fold_ids = sorted(folds)
    aps = []
    for fold in fold_ids:
        train_x = np.concatenate([folds[f][0] for f in fold_ids if f != fold])
        train_y = np.concatenate([folds[f][1] for f in fold_ids if f != fold])
        fold_spec = models_mod.ModelSpec(kind=spec.kind,
                                         seed=spec.seed + fold)
        model = train_model(fold_spec, train_x, train_y, cfg)
        scores = model.predict_proba(folds[fold][0])
        aps.append(average_precision(scores, folds[fold][1]))
    mean = float(np.mean(aps))
    std = float(np.std(aps))  # population
    return CVReport(model_kind=spec.kind, fold_ap=tuple(aps),
                    mean=mean, std=std)


def train_model(spec, x, y, cfg=None):
    if spec.kind == "logreg":
        return models_mod.fit_logreg(x, y, class_weight="balanced", spec=spec)
    return models_mod.train(spec, x, y, cfg or models_mod.TrainConfig())


@dataclass
class EnvHour:
    hour_id: str
    features: np.ndarray  # (n_bins, 13, F)
    labels: List  # 0, 1 or "ignore" per bin


@dataclass
class EnvReport:
    per_hour: Dict[str, List[Optional[float]]]  # hour -> AP per model
    hour_means: Dict[str, Optional[float]]
    model_means: List[Optional[float]]
    pooled_ap: List[float]  # per model, all hours concatenated
    pooled_mean: float
    pooled_std: float


def evaluate_env(trained: Sequence, hours: Sequence[EnvHour]) -> EnvReport:
    """Score CV models against annotated environment hours.

    Ignore-class bins are dropped from scoring. Emits both the per-hour
    AP matrix (aggregating hour scores afterwards) and the pooled AP over
    all hours concatenated; the two aggregates genuinely differ.
    """
    per_hour: Dict[str, List[Optional[float]]] = {}
    scored = {m: {"scores": [], "labels": []} for m in range(len(trained))}
    for hour in hours:
        keep = [i for i, lab in enumerate(hour.labels) if lab != IGNORE]
        labels = np.array([hour.labels[i] for i in keep], dtype=np.int64)
        feats = hour.features[keep]
        row: List[Optional[float]] = []
        for mi, model in enumerate(trained):
            scores = model.predict_proba(feats)
            scored[mi]["scores"].append(scores)
            scored[mi]["labels"].append(labels)
            try:
                row.append(average_precision(scores, labels))
            except NoPositives:
                row.append(None)
        per_hour[hour.hour_id] = row

    def _mean(vals):
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else None

    hour_means = {h: _mean(r) for h, r in per_hour.items()}
    model_means = [_mean([per_hour[h][m] for h in per_hour])
                   for m in range(len(trained))]
    pooled = []
    for mi in range(len(trained)):
        scores = np.concatenate(scored[mi]["scores"])
        labels = np.concatenate(scored[mi]["labels"])
        pooled.append(average_precision(scores, labels))
    return EnvReport(per_hour=per_hour, hour_means=hour_means,
                     model_means=model_means, pooled_ap=pooled,
                     pooled_mean=float(np.mean(pooled)),
                     pooled_std=float(np.std(pooled)))


def probability_trace(model, hour: EnvHour, segment_s: float = 5.0) -> str:
    """CSV of (t_start_s, ground_truth, probability) per bin."""
    scores = model.predict_proba(hour.features)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["t_start_s", "ground_truth", "probability"])
    for i, (label, score) in enumerate(zip(hour.labels, scores)):
        writer.writerow(["%g" % (i * segment_s), label, "%.6f" % score])
    return buf.getvalue()


def summary_csv(rows: Dict[str, Dict[str, Tuple[float, float]]]) -> str:
    """Model x evaluation-set mAP/std table (the headline results shape).

    rows maps model kind -> {"cv"|"test"|"env": (mean, std)}.
    """
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["model", "cv_map", "cv_std", "test_ap", "test_std",
                     "env_map", "env_std"])
    for kind, cells in rows.items():
        cv = cells.get("cv", (None, None))
        test = cells.get("test", (None, None))
        env = cells.get("env", (None, None))
        fmt = lambda v: "" if v is None else "%.4f" % v
        writer.writerow([kind, fmt(cv[0]), fmt(cv[1]), fmt(test[0]),
                         fmt(test[1]), fmt(env[0]), fmt(env[1])])
    return buf.getvalue()
