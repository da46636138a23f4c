"""Multi-class linear SVM (one-vs-rest, L2-regularized L1 hinge loss).

Each binary problem is solved in the dual by coordinate descent.  The bias is
handled as an extra weight on a constant feature of 1, so it is regularized
along with ``w``.  The dual objective

    D(alpha) = sum(alpha) - 0.5 * (||w||^2 + b^2),   w = sum_i alpha_i y_i x_i

never decreases from one sweep to the next; training stops when a sweep
improves it by less than ``tolerance`` or after ``epochs`` sweeps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from layergauge import _accel
from layergauge._accel import njit
from layergauge.errors import DimensionError, ValidationError
from layergauge.rng import make_rng
from layergauge.weights_io import PRETRAINED, Provenance, read_container, write_container

logger = logging.getLogger(__name__)

DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)

_STREAM_PERMUTATION = 1
_STREAM_FOLDS = 2


@dataclass(frozen=True)
class SvmConfig:
    c_grid: tuple[float, ...] = DEFAULT_C_GRID
    folds: int = 5
    epochs: int = 100
    tolerance: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not self.c_grid or any(c <= 0 for c in self.c_grid):
            raise ValidationError(f"c_grid must hold positive values, got {self.c_grid}")
        if self.folds < 2:
            raise ValidationError("folds must be at least 2")
        if self.epochs < 1:
            raise ValidationError("epochs must be at least 1")


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray  # rows x cols float32
    labels: np.ndarray  # rows, int
    groups: np.ndarray | None = None  # rows; copies of one source image share a group

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        labels = np.asarray(self.labels, dtype=np.int64)
        if values.ndim != 2:
            raise DimensionError(f"feature matrix must be rank 2, got shape {values.shape}")
        if labels.shape != (values.shape[0],):
            raise DimensionError(f"{labels.shape[0]} labels for {values.shape[0]} rows")
        if not np.isfinite(values).all():
            raise ValidationError("feature matrix contains NaN or Inf")
        if self.groups is not None and len(self.groups) != values.shape[0]:
            raise DimensionError("groups length must equal row count")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class LinearSvmModel:
    weights: np.ndarray  # n_classes x cols, float32
    biases: np.ndarray  # n_classes, float32
    mean: np.ndarray  # cols
    scale: np.ndarray  # cols, > 0
    C: float
    cv_accuracy: dict = field(default_factory=dict)
    sweeps: tuple[int, ...] = ()

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class BinaryFit:
    w: np.ndarray  # float64
    b: float
    alpha: np.ndarray
    objective: np.ndarray  # dual objective after each sweep
    sweeps: int


# --------------------------------------------------------------------------
# dual coordinate descent


@njit
def _dcd_nb(X, y, C, perms, tol, w, alpha, history):
    n, d = X.shape
    qii = np.empty(n)
    for i in range(n):
        s = 1.0
        for j in range(d):
            v = np.float64(X[i, j])
            s += v * v
        qii[i] = s
    b = 0.0
    prev = 0.0
    sweeps = 0
    for ep in range(perms.shape[0]):
        for t in range(n):
            i = perms[ep, t]
            g = b
            for j in range(d):
                g += w[j] * X[i, j]
            g = y[i] * g - 1.0
            a = alpha[i]
            if a == 0.0:
                pg = min(g, 0.0)
            elif a == C:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg != 0.0:
                new = min(max(a - g / qii[i], 0.0), C)
                delta = (new - a) * y[i]
                alpha[i] = new
                for j in range(d):
                    w[j] += delta * X[i, j]
                b += delta
        obj = 0.0
        for i in range(n):
            obj += alpha[i]
        ww = b * b
        for j in range(d):
            ww += w[j] * w[j]
        obj -= 0.5 * ww
        history[ep] = obj
        sweeps = ep + 1
        if obj - prev < tol:
            break
        prev = obj
    return b, sweeps


def _dcd_np(X, y, C, perms, tol, w, alpha, history):
    qii = np.einsum("ij,ij->i", X, X, dtype=np.float64) + 1.0
    b = 0.0
    prev = 0.0
    sweeps = 0
    for ep in range(perms.shape[0]):
        for i in perms[ep]:
            xi = X[i]
            g = y[i] * (float(xi @ w) + b) - 1.0
            a = alpha[i]
            pg = min(g, 0.0) if a == 0.0 else (max(g, 0.0) if a == C else g)
            if pg != 0.0:
                new = min(max(a - g / qii[i], 0.0), C)
                delta = (new - a) * y[i]
                alpha[i] = new
                w += delta * xi
                b += delta
        obj = float(alpha.sum()) - 0.5 * (float(w @ w) + b * b)
        history[ep] = obj
        sweeps = ep + 1
        if obj - prev < tol:
            break
        prev = obj
    return b, sweeps


def sweep_orders(n: int, epochs: int, seed: int) -> np.ndarray:
    rng = make_rng(seed, _STREAM_PERMUTATION)
    return np.stack([rng.permutation(n) for _ in range(epochs)]).astype(np.int64)


def fit_binary(X, y, C: float, epochs: int = 100, tolerance: float = 1e-3, seed: int = 0,
               perms=None, backend=None) -> BinaryFit:
    """Solve one binary problem with labels ``y`` in {-1, +1}."""
    X = np.ascontiguousarray(X, dtype=np.float32)
    y = np.asarray(y, dtype=np.float64)
    if perms is None:
        perms = sweep_orders(X.shape[0], epochs, seed)
    w = np.zeros(X.shape[1], dtype=np.float64)
    alpha = np.zeros(X.shape[0], dtype=np.float64)
    history = np.full(perms.shape[0], np.nan)
    backend = backend or _accel.BACKEND
    kernel = _dcd_nb if backend == "numba" else _dcd_np
    b, sweeps = kernel(X, y, float(C), perms, float(tolerance), w, alpha, history)
    return BinaryFit(w, float(b), alpha, history[:sweeps], int(sweeps))


# --------------------------------------------------------------------------
# standardization / training


def fit_standardizer(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = values.mean(axis=0, dtype=np.float64)
    std = values.std(axis=0, dtype=np.float64)
    scale = np.where(std > 0, std, 1.0)
    return mean.astype(np.float32), scale.astype(np.float32)


def standardize(values, mean, scale) -> np.ndarray:
    return (np.asarray(values, dtype=np.float32) - mean) / scale


def _one_vs_rest(Xs, labels, n_classes, C, config, backend):
    perms = sweep_orders(Xs.shape[0], config.epochs, config.seed)
    W = np.zeros((n_classes, Xs.shape[1]), dtype=np.float32)
    b = np.zeros(n_classes, dtype=np.float32)
    sweeps = []
    for k in range(n_classes):
        y = np.where(labels == k, 1.0, -1.0)
        fit = fit_binary(Xs, y, C, config.epochs, config.tolerance, perms=perms, backend=backend)
        W[k] = fit.w
        b[k] = fit.b
        sweeps.append(fit.sweeps)
    return W, b, tuple(sweeps)


def assign_folds(groups, folds: int, seed: int) -> np.ndarray:
    """Fold index per row; all rows of one group land in the same fold."""
    groups = list(groups)
    unique = list(dict.fromkeys(groups))
    if len(unique) < folds:
        raise ValidationError(f"{len(unique)} groups cannot fill {folds} folds")
    perm = make_rng(seed, _STREAM_FOLDS).permutation(len(unique))
    fold_of = {unique[p]: pos % folds for pos, p in enumerate(perm)}
    return np.array([fold_of[g] for g in groups], dtype=np.int64)


def cross_validate(features: FeatureMatrix, C: float, n_classes: int, config: SvmConfig, backend=None) -> float:
    groups = features.groups if features.groups is not None else np.arange(features.rows)
    fold = assign_folds(groups, config.folds, config.seed)
    accs = []
    for f in range(config.folds):
        tr, va = fold != f, fold == f
        mean, scale = fit_standardizer(features.values[tr])
        W, b, _ = _one_vs_rest(standardize(features.values[tr], mean, scale), features.labels[tr],
                               n_classes, C, config, backend)
        model = LinearSvmModel(W, b, mean, scale, C)
        accs.append(accuracy(predict_batch(model, features.values[va]), features.labels[va]))
    return float(np.mean(accs))


def train(features: FeatureMatrix, config: SvmConfig = SvmConfig(), n_classes: int | None = None,
          backend=None) -> LinearSvmModel:
    """Pick C by grouped k-fold CV (ties -> smaller C), then fit on all rows."""
    present = np.unique(features.labels)
    if present.size < 2:
        raise ValidationError(f"training data holds a single class {present.tolist()}")
    if features.labels.min() < 0:
        raise ValidationError("labels must be non-negative class indices")
    if features.rows < config.folds:
        raise ValidationError(f"{features.rows} rows cannot fill {config.folds} folds")
    n_classes = int(features.labels.max()) + 1 if n_classes is None else n_classes
    grid = sorted(config.c_grid)
    scores = {}
    if len(grid) == 1:
        best = grid[0]
    else:
        best, best_acc = None, -1.0
        for C in grid:
            acc = cross_validate(features, C, n_classes, config, backend)
            scores[C] = acc
            logger.debug("C=%g cv accuracy %.4f", C, acc)
            if acc > best_acc:
                best, best_acc = C, acc
    mean, scale = fit_standardizer(features.values)
    W, b, sweeps = _one_vs_rest(standardize(features.values, mean, scale), features.labels,
                                n_classes, best, config, backend)
    return LinearSvmModel(W, b, mean, scale, float(best), scores, sweeps)


# --------------------------------------------------------------------------
# scoring


def decision_scores(model: LinearSvmModel, values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float32)
    if values.shape[-1] != model.cols:
        raise DimensionError(f"feature length {values.shape[-1]} != model dimension {model.cols}")
    xs = standardize(values, model.mean, model.scale).astype(np.float64)
    return xs @ model.weights.astype(np.float64).T + model.biases.astype(np.float64)


def predict_batch(model: LinearSvmModel, values) -> np.ndarray:
    # argmax returns the first maximum: ties go to the smaller class index
    return np.argmax(decision_scores(model, np.atleast_2d(values)), axis=1)


def predict(model: LinearSvmModel, feature) -> int:
    feature = np.asarray(feature)
    if feature.ndim != 1:
        raise DimensionError(f"predict takes one feature vector, got shape {feature.shape}")
    return int(predict_batch(model, feature[None, :])[0])


def accuracy(predictions, truth) -> float:
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise ValidationError(f"{predictions.shape} predictions vs {truth.shape} labels")
    if predictions.size == 0:
        raise ValidationError("accuracy of an empty prediction set is undefined")
    return float(np.mean(predictions == truth))


def confusion_matrix(predictions, truth, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(truth), np.asarray(predictions)), 1)
    return cm


# --------------------------------------------------------------------------
# persistence


def save_model(model: LinearSvmModel, path) -> None:
    tensors = []
    for k in range(model.n_classes):
        tensors.append((f"svm.class{k}.weight", model.weights[k]))
        tensors.append((f"svm.class{k}.bias", model.biases[k : k + 1]))
    tensors.append(("svm.standardize.mean", model.mean))
    tensors.append(("svm.standardize.scale", model.scale))
    write_container(path, tensors, Provenance(PRETRAINED, 0, f"svm C={model.C!r}"))


def load_model(path) -> LinearSvmModel:
    raw, prov = read_container(path)
    k = 0
    W, b = [], []
    while f"svm.class{k}.weight" in raw:
        W.append(raw[f"svm.class{k}.weight"])
        b.append(raw[f"svm.class{k}.bias"][0])
        k += 1
    C = float(prov.label.split("C=", 1)[1]) if "C=" in prov.label else float("nan")
    return LinearSvmModel(
        np.stack(W), np.array(b, dtype=np.float32),
        raw["svm.standardize.mean"], raw["svm.standardize.scale"], C,
    )
