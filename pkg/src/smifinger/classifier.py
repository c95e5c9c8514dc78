"""Per-sensor content classifier and its cross-validation protocol.

The model is deliberately small: spectrograms are pooled into per-band mean
and standard deviation, standardized with training statistics, and fed to
one logistic unit per class. Each unit is trained with binary cross-entropy
against "this class vs. the rest"; prediction is the arg-max score.

Protocol: stratified k-fold split of the clean trials; per fold, train for a
fixed number of epochs, keep the epoch with the best validation accuracy,
then score every test set with that fold's model. Test accuracies are
reported as mean and population standard deviation over the folds.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, TrainingError
from .spectro import Spectrogram

CLASSES = ("empty", "bolts", "playdough")

MODEL_MAGIC = b"SMIFMDL\0"
MODEL_VERSION = 1


def featurize(spec: Spectrogram | np.ndarray) -> np.ndarray:
    """Per-band mean and standard deviation over frames: 2 * n_mels values."""
    values = np.asarray(spec.values if isinstance(spec, Spectrogram) else spec, dtype=np.float64)
    if values.ndim != 2 or values.size == 0:
        raise InvalidInputError("featurize needs a non-empty [frames x bands] array")
    return np.concatenate([values.mean(axis=0), values.std(axis=0)])


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple[int, ...]  # fold index per trial, in input order
    stratified: bool = True

    def indices(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """(train, validation) trial indices for one fold."""
        a = np.asarray(self.assignments)
        return np.flatnonzero(a != fold), np.flatnonzero(a == fold)


def make_folds(labels: Sequence[str], k: int = 5, seed: int = 0) -> FoldPlan:
    """Stratified assignment: each class is shuffled and dealt round-robin.

    The dealing continues where the previous class stopped, so total fold
    sizes also differ by at most one.
    """
    labels = list(labels)
    if k < 2:
        raise InvalidInputError("k must be >= 2")
    rng = np.random.default_rng(seed)
    assignments = np.empty(len(labels), dtype=int)
    offset = 0
    for cls in sorted(set(labels)):
        idx = np.flatnonzero(np.asarray(labels, dtype=object) == cls)
        if idx.size < k:
            raise InvalidInputError(f"class {cls!r} has {idx.size} trials, fewer than k={k}")
        idx = rng.permutation(idx)
        assignments[idx] = (offset + np.arange(idx.size)) % k
        offset += idx.size
    return FoldPlan(k, tuple(int(a) for a in assignments), True)


@dataclass
class ModelState:
    classes: tuple[str, ...]
    weights: np.ndarray  # [n_classes, n_features]
    bias: np.ndarray  # [n_classes]
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    best_epoch: int
    feature_spec: dict = field(default_factory=dict)
    seed: int = 0
    history: list = field(default_factory=list)  # validation accuracy per epoch

    def scores(self, X) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.feature_mean) / self.feature_scale
        return Z @ self.weights.T + self.bias

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1)


def _encode(y, classes) -> np.ndarray:
    lookup = {c: i for i, c in enumerate(classes)}
    try:
        return np.array([lookup[v] if isinstance(v, str) else int(v) for v in y], dtype=int)
    except KeyError as exc:
        raise InvalidInputError(f"unknown label {exc}") from None


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def train(X_train, y_train, X_val, y_val, epochs: int = 10, seed: int = 0,
          lr: float = 0.1, lr_decay: float = 0.8, batch_size: int = 8,
          classes: Sequence[str] = CLASSES, feature_spec: dict | None = None) -> ModelState:
    """One-vs-all logistic units trained by mini-batch gradient descent on BCE.

    A checkpoint is taken after every epoch; the one with the highest
    validation accuracy is returned, the earliest on ties.
    """
    classes = tuple(classes)
    X_train = np.asarray(X_train, dtype=np.float64)
    X_val = np.asarray(X_val, dtype=np.float64)
    y_tr = _encode(y_train, classes)
    y_va = _encode(y_val, classes)
    if len(X_train) == 0 or len(X_val) == 0:
        raise InvalidInputError("training and validation splits must be non-empty")
    if set(range(len(classes))) - set(y_tr.tolist()):
        raise InvalidInputError("every class must be present in the training split")
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)
    if not np.any(std > 0):
        raise TrainingError("all features have zero variance")
    scale = np.where(std > 0, std, 1.0)
    Z = (X_train - mean) / scale
    targets = (y_tr[:, None] == np.arange(len(classes))[None, :]).astype(np.float64)

    rng = np.random.default_rng(seed)
    W = np.zeros((len(classes), Z.shape[1]))
    b = np.zeros(len(classes))
    best = None
    history = []
    step = lr
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(Z))
        for start in range(0, len(order), batch_size):
            sel = order[start : start + batch_size]
            err = _sigmoid(Z[sel] @ W.T + b) - targets[sel]
            W -= step * (err.T @ Z[sel]) / len(sel)
            b -= step * err.mean(axis=0)
        step *= lr_decay
        model = ModelState(classes, W.copy(), b.copy(), mean, scale, epoch, dict(feature_spec or {}), seed)
        acc = float(np.mean(model.predict(X_val) == y_va))
        history.append(acc)
        if best is None or acc > best[0]:
            best = (acc, model)
    best[1].history = history
    return best[1]


def evaluate(model: ModelState, X_test, y_test) -> tuple[float, np.ndarray]:
    """Accuracy and confusion matrix indexed [true, predicted]."""
    X_test = np.asarray(X_test, dtype=np.float64)
    if len(X_test) == 0:
        raise InvalidInputError("empty test set")
    y = _encode(y_test, model.classes)
    pred = model.predict(X_test)
    n = len(model.classes)
    confusion = np.zeros((n, n), dtype=int)
    np.add.at(confusion, (y, pred), 1)
    return float(np.mean(pred == y)), confusion


@dataclass(frozen=True)
class AccuracyReport:
    per_fold_accuracy: tuple[float, ...]
    mean: float
    std: float
    confusion: np.ndarray

    def formatted(self) -> str:
        return f"{self.mean:.2f} ± {self.std:.2f}"


def aggregate(fold_results: Sequence[tuple[float, np.ndarray]], k: int | None = None) -> AccuracyReport:
    """Mean and population standard deviation of the fold accuracies."""
    if k is not None and len(fold_results) != k:
        raise InvalidInputError(f"expected {k} fold results, got {len(fold_results)}")
    if not fold_results:
        raise InvalidInputError("no fold results to aggregate")
    accs = np.array([acc for acc, _ in fold_results], dtype=np.float64)
    confusion = np.sum([c for _, c in fold_results], axis=0)
    return AccuracyReport(tuple(accs.tolist()), float(accs.mean()), float(accs.std(ddof=0)), confusion)


@dataclass
class ProtocolResult:
    validation: AccuracyReport
    tests: dict[str, AccuracyReport]
    groups: dict[str, AccuracyReport]
    models: list[ModelState]
    folds: FoldPlan


def run_protocol(X_train, y_train, test_sets: Mapping[str, tuple[np.ndarray, Sequence[str]]],
                 groups: Mapping[str, Sequence[str]] | None = None, k: int = 5, epochs: int = 10,
                 seed: int = 0, **train_kwargs) -> ProtocolResult:
    """k-fold training on clean data, then every fold model scores every test set.

    ``groups`` maps a group name to test-set names whose trials are pooled
    before scoring, e.g. all ambient-disturbance sets.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = list(y_train)
    plan = make_folds(y_train, k, seed)
    models, val_results = [], []
    y_arr = np.asarray(y_train, dtype=object)
    for fold in range(k):
        tr, va = plan.indices(fold)
        model = train(X_train[tr], y_arr[tr], X_train[va], y_arr[va], epochs=epochs,
                      seed=seed * 1000 + fold, **train_kwargs)
        models.append(model)
        val_results.append(evaluate(model, X_train[va], y_arr[va]))
    tests = {
        name: aggregate([evaluate(m, X, y) for m in models], k) for name, (X, y) in test_sets.items()
    }
    pooled = {}
    for gname, members in (groups or {}).items():
        X = np.concatenate([np.asarray(test_sets[m][0]) for m in members])
        y = [lab for m in members for lab in test_sets[m][1]]
        pooled[gname] = aggregate([evaluate(m, X, y) for m in models], k)
    return ProtocolResult(aggregate(val_results, k), tests, pooled, models, plan)


def save_model(model: ModelState, path) -> None:
    """Binary file: magic, version, JSON header length, JSON header, float64 arrays."""
    arrays = {
        "weights": model.weights, "bias": model.bias,
        "feature_mean": model.feature_mean, "feature_scale": model.feature_scale,
    }
    header = {
        "classes": list(model.classes), "best_epoch": model.best_epoch, "seed": model.seed,
        "feature_spec": model.feature_spec, "history": model.history,
        "arrays": [[name, list(np.shape(a))] for name, a in arrays.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", MODEL_VERSION, len(blob)))
        fh.write(blob)
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_model(path) -> ModelState:
    data = Path(path).read_bytes()
    if data[:8] != MODEL_MAGIC:
        raise InvalidInputError(f"{path}: not a model file")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != MODEL_VERSION:
        raise InvalidInputError(f"{path}: unsupported model version {version}")
    header = json.loads(data[16 : 16 + hlen])
    offset = 16 + hlen
    arrays = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += 8 * count
    return ModelState(tuple(header["classes"]), arrays["weights"], arrays["bias"],
                      arrays["feature_mean"], arrays["feature_scale"], header["best_epoch"],
                      header["feature_spec"], header["seed"], header["history"])
