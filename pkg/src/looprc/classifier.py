"""Closed-form ridge-regression readout and figure-of-merit accounting.

The readout is the only trained component of the whole pipeline.  Training
solves the regularized normal equations

    (X^T X + lambda I) W = X^T Y

for one-hot targets Y through a symmetric positive-definite (Cholesky)
factorization: deterministic, and bit-identical across runs for identical
inputs.  Prediction is a single matrix-vector product plus argmax.

MAC and parameter counts quantify the training cost that the split-loop
architecture is designed to shrink: halving the state size quarters the
Gram-matrix build, the dominant term for realistic B.
"""

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.linalg

from .errors import SingularMatrixError
from .reservoir import StateVector


@dataclass(frozen=True)
class DesignMatrix:
    """B state vectors with integer class labels.

    Requires B >= C >= 2, consistent row lengths, and finite entries.
    """

    rows: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if rows.ndim != 2 or rows.size == 0:
            raise ValueError("rows must be a non-empty B x N matrix")
        if labels.ndim != 1 or labels.size != rows.shape[0]:
            raise ValueError("need one label per row")
        if not np.all(np.isfinite(rows)):
            raise ValueError("rows must be finite")
        if self.class_count < 2:
            raise ValueError("need at least two classes")
        if rows.shape[0] < self.class_count:
            raise ValueError("need at least one row per class (B >= C)")
        if labels.min() < 0 or labels.max() >= self.class_count:
            raise ValueError("labels must lie in [0, class_count)")
        rows.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_states(
        cls,
        states: Sequence[Union[StateVector, np.ndarray]],
        labels: Sequence[int],
        class_count: int,
    ) -> "DesignMatrix":
        rows = np.stack(
            [s.values if isinstance(s, StateVector) else np.asarray(s) for s in states]
        )
        return cls(rows=rows, labels=np.asarray(labels), class_count=class_count)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def one_hot(self) -> np.ndarray:
        y = np.zeros((self.n_rows, self.class_count))
        y[np.arange(self.n_rows), self.labels] = 1.0
        return y


@dataclass(frozen=True)
class RidgeModel:
    """Trained readout: weights, regularization, and the label map."""

    weights: np.ndarray
    lam: float
    label_map: tuple[str, ...]

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        if weights.ndim != 2:
            raise ValueError("weights must be N x C")
        if not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite")
        if len(self.label_map) != weights.shape[1]:
            raise ValueError("label map must name every class")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "label_map", tuple(self.label_map))

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    @property
    def class_count(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class Metrics:
    """Evaluation result: accuracy, per-class accuracy, confusion matrix."""

    accuracy: float
    per_class_accuracy: np.ndarray
    confusion: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "per_class_accuracy", np.asarray(self.per_class_accuracy, dtype=np.float64))
        object.__setattr__(self, "confusion", np.asarray(self.confusion, dtype=np.int64))


def train_ridge(
    data: DesignMatrix,
    lam: float = 1e-3,
    label_map: Sequence[str] | None = None,
) -> RidgeModel:
    """Solve the regularized normal equations in closed form.

    Parameters
    ----------
    data : DesignMatrix
        Training state vectors and labels.
    lam : float
        Regularization strength, >= 0.  The default 1e-3 sits mid-range of
        the usual sweep grid and is always overridable.  At ``lam=0`` the
        Gram matrix must be numerically invertible.
    label_map : sequence of str, optional
        Class names; defaults to stringified indices.

    Raises
    ------
    SingularMatrixError
        Singular system at ``lam=0``; retry with ``lam > 0``.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    x = data.rows
    gram = x.T @ x
    if lam > 0:
        gram = gram + lam * np.eye(data.n_features)
    rhs = x.T @ data.one_hot()
    try:
        c, low = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
        weights = scipy.linalg.cho_solve((c, low), rhs, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            f"normal equations singular at lambda={lam}; use lambda > 0"
        ) from exc
    if not np.all(np.isfinite(weights)):
        raise SingularMatrixError(
            f"normal equations ill-conditioned at lambda={lam}; use lambda > 0"
        )
    if label_map is None:
        label_map = tuple(str(i) for i in range(data.class_count))
    return RidgeModel(weights=weights, lam=float(lam), label_map=label_map)


def scores_for(model: RidgeModel, x: np.ndarray) -> np.ndarray:
    """Class scores W^T x for one state vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != model.n_features:
        raise ValueError(f"state vector must have length {model.n_features}")
    return model.weights.T @ x


def predict(model: RidgeModel, state: Union[StateVector, np.ndarray]) -> tuple[str, np.ndarray]:
    """Predict the label of one state vector.

    Returns ``(label, scores)``; ties break deterministically toward the
    lowest class index.
    """
    x = state.values if isinstance(state, StateVector) else state
    scores = scores_for(model, x)
    return model.label_map[int(np.argmax(scores))], scores


def predict_indices(model: RidgeModel, rows: np.ndarray) -> np.ndarray:
    """Batch prediction: argmax class index per row."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != model.n_features:
        raise ValueError(f"rows must be B x {model.n_features}")
    return np.argmax(rows @ model.weights, axis=1)


def evaluate(model: RidgeModel, test: DesignMatrix) -> Metrics:
    """Accuracy, per-class accuracy, and confusion matrix on a test set.

    Confusion rows are true classes, columns predicted; row j sums to the
    number of test points of class j.  Per-class accuracy is NaN for
    classes absent from the test set.
    """
    if test.n_features != model.n_features:
        raise ValueError("test set feature size does not match model")
    if test.class_count != model.class_count:
        raise ValueError("test set class count does not match model")
    pred = predict_indices(model, test.rows)
    c = test.class_count
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (test.labels, pred), 1)
    per_class_total = confusion.sum(axis=1)
    with np.errstate(invalid="ignore"):
        per_class = np.where(
            per_class_total > 0, np.diag(confusion) / per_class_total, np.nan
        )
    accuracy = float(np.trace(confusion)) / test.n_rows
    return Metrics(accuracy=accuracy, per_class_accuracy=per_class, confusion=confusion)


def training_macs(n_rows: int, n_features: int, class_count: int) -> int:
    """Multiply-accumulate count of one closed-form training solve.

    Gram build (B N^2) + Cholesky (N^3 / 3) + right-hand side (B N C)
    + triangular solves (N^2 C).  The Gram term dominates for realistic
    B, which is why splitting the input into k loops of size N/k cuts
    training cost by about k^2.
    """
    if n_rows < 1 or n_features < 1 or class_count < 1:
        raise ValueError("counts must be positive")
    b, n, c = n_rows, n_features, class_count
    return b * n * n + n**3 // 3 + b * n * c + n * n * c


def trainable_params(n_features: int, class_count: int) -> int:
    """Number of trained parameters: the N x C readout matrix."""
    if n_features < 1 or class_count < 1:
        raise ValueError("counts must be positive")
    return n_features * class_count
