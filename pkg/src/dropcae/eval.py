"""Downstream evaluation: linear one-vs-rest SVM, OA/AA/Kappa, band entropy.

A linear hinge-loss SVM trained by seeded averaged SGD stands in for the
usual HSI evaluation classifier; absolute accuracies are therefore lower
than kernel-SVM pipelines on nonlinear scenes, which the acceptance
thresholds account for.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import HsiMatrix, SplitSpec, split
from .errors import DataError, DimensionError, ParameterError
from .model import BandSubset


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predictions; classes ascending."""

    counts: np.ndarray
    classes: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.classes = np.asarray(self.classes, dtype=np.int64)
        c = self.classes.shape[0]
        if self.counts.shape != (c, c):
            raise DimensionError(
                f"counts shape {self.counts.shape} does not match {c} classes"
            )
        if np.any(self.counts < 0):
            raise ParameterError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def zero_support_classes(self) -> int:
        return int(np.sum(self.counts.sum(axis=1) == 0))


def confusion(y_true, y_pred, classes=None) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise DimensionError(
            f"label shapes differ: {y_true.shape} vs {y_pred.shape}"
        )
    if classes is None:
        classes = np.unique(np.concatenate([y_true, y_pred]))
    else:
        classes = np.asarray(classes, dtype=np.int64)
    index = {int(c): i for i, c in enumerate(classes)}
    counts = np.zeros((classes.size, classes.size), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        counts[index[int(t)], index[int(p)]] += 1
    return ConfusionMatrix(counts, classes)


def metrics(conf: ConfusionMatrix):
    """(OA, AA, Kappa); true classes with zero test support are skipped in AA."""
    counts = conf.counts
    total = counts.sum()
    if total == 0:
        raise DataError("empty confusion matrix")
    oa = float(np.trace(counts)) / total
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    support = rows > 0
    recalls = np.diag(counts)[support] / rows[support]
    aa = float(np.mean(recalls))
    pe = float(rows @ cols) / (float(total) ** 2)
    kappa = 0.0 if pe == 1.0 else (oa - pe) / (1.0 - pe)
    return oa, aa, kappa


@dataclass
class LinearSvm:
    """One-vs-rest linear classifiers: weights (c, f), bias (c,)."""

    weights: np.ndarray
    bias: np.ndarray
    classes: np.ndarray


def train_linear_svm(features, labels, epochs: int = 60, lr: float = 0.05,
                     reg: float = 1e-4, seed: int = 0) -> LinearSvm:
    """Seeded averaged-SGD hinge fit, one binary classifier per class."""
    from .backend import get_backend

    x = np.ascontiguousarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != labels.shape[0]:
        raise DimensionError(
            f"features {x.shape} inconsistent with {labels.shape[0]} labels"
        )
    classes = np.unique(labels)
    if classes.size < 2:
        raise DataError(f"need at least two classes, got {classes.size}")
    n = x.shape[0]
    rng = np.random.default_rng(seed)
    orders = np.empty((epochs, n), dtype=np.int64)
    for e in range(epochs):
        orders[e] = rng.permutation(n)
    kernels = get_backend()
    weights = np.empty((classes.size, x.shape[1]))
    bias = np.empty(classes.size)
    for ci, cls in enumerate(classes):
        y = np.where(labels == cls, 1.0, -1.0)
        w, b = kernels.svm_fit_binary(x, y, orders, lr, reg)
        weights[ci] = w
        bias[ci] = b
    return LinearSvm(weights, bias, classes)


def predict(clf: LinearSvm, features) -> np.ndarray:
    """Argmax over the one-vs-rest scores; ties go to the lower class id."""
    x = np.asarray(features, dtype=np.float64)
    scores = x @ clf.weights.T + clf.bias
    return clf.classes[np.argmax(scores, axis=1)]


def band_entropy(matrix, band: int, bins: int = 256) -> float:
    """Shannon entropy (bits) of the equal-width histogram of one band."""
    if bins < 2:
        raise ParameterError(f"bins must be >= 2, got {bins}")
    values = getattr(matrix, "values", matrix)
    col = np.asarray(values, dtype=np.float64)[:, band]
    idx = np.clip(np.floor(col * bins).astype(np.int64), 0, bins - 1)
    p = np.bincount(idx, minlength=bins) / col.shape[0]
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def all_band_entropies(matrix, bins: int = 256) -> np.ndarray:
    values = getattr(matrix, "values", matrix)
    d = values.shape[1]
    return np.array([band_entropy(values, j, bins) for j in range(d)])


@dataclass
class RunMetrics:
    seed: int
    oa: float
    aa: float
    kappa: float
    skipped_classes: int


@dataclass
class EvalReport:
    runs: list
    subset: BandSubset
    entropies: np.ndarray
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("oa", "aa", "kappa"):
            vals = np.array([getattr(r, name) for r in self.runs])
            self.mean[name] = float(vals.mean())
            self.std[name] = float(vals.std())

    def to_json_dict(self) -> dict:
        return {
            "runs": [
                {
                    "seed": r.seed,
                    "oa": r.oa,
                    "aa": r.aa,
                    "kappa": r.kappa,
                    "skipped_classes": r.skipped_classes,
                }
                for r in self.runs
            ],
            "mean": dict(self.mean),
            "std": dict(self.std),
            "subset": self.subset.to_json_dict(),
            "entropies": [float(e) for e in self.entropies],
        }

    def bands_csv(self) -> str:
        selected = set(self.subset.indices)
        lines = ["band,entropy,selected,keep_probability"]
        for j, ent in enumerate(self.entropies):
            flag = 1 if j in selected else 0
            lines.append(f"{j},{ent!r},{flag},{self.subset.scores[j]!r}")
        return "\n".join(lines) + "\n"


def evaluate_subset(matrix: HsiMatrix, subset: BandSubset, runs: int = 10,
                    spec: SplitSpec | None = None, svm_epochs: int = 60,
                    svm_lr: float = 0.05, svm_reg: float = 1e-4,
                    bins: int = 256) -> EvalReport:
    """Train/test the classifier on the selected bands over several seeded runs."""
    if spec is None:
        spec = SplitSpec()
    indices = np.asarray(subset.indices, dtype=np.int64)
    if indices.size == 0 or indices.min() < 0 or indices.max() >= matrix.d:
        raise DataError(
            f"subset indices out of range for a {matrix.d}-band scene"
        )
    features = matrix.values[:, indices]
    classes = np.unique(matrix.labels)
    results = []
    for r in range(runs):
        run_seed = spec.seed + r
        run_spec = SplitSpec(spec.train_fraction, spec.stratified, run_seed)
        train_idx, test_idx = split(matrix, run_spec)
        clf = train_linear_svm(features[train_idx], matrix.labels[train_idx],
                               epochs=svm_epochs, lr=svm_lr, reg=svm_reg,
                               seed=run_seed)
        pred = predict(clf, features[test_idx])
        conf = confusion(matrix.labels[test_idx], pred, classes=classes)
        oa, aa, kappa = metrics(conf)
        results.append(RunMetrics(run_seed, oa, aa, kappa,
                                  conf.zero_support_classes()))
    entropies = all_band_entropies(matrix, bins)
    return EvalReport(results, subset, entropies)
