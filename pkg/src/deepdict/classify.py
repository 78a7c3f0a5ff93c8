"""1-nearest-neighbour classification of feature columns."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from deepdict.exceptions import DimensionError

# squared distances closer than this (relative) count as ties
TIE_RTOL = 1e-12
CHUNK = 512


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    n_test: int
    n_errors: int
    elapsed: float = 0.0

    @property
    def percent(self) -> str:
        return f"{100.0 * self.accuracy:.2f}"


def knn1_classify(train_feats, train_labels, test_feats) -> np.ndarray:
    """Label each test column with the label of its nearest training column.

    Distances are squared Euclidean; ties go to the lowest training index.
    """
    A = np.asarray(train_feats, dtype=np.float64)
    B = np.asarray(test_feats, dtype=np.float64)
    y = np.asarray(train_labels)
    if A.ndim != 2 or B.ndim != 2:
        raise DimensionError("feature matrices must be 2-D")
    if A.shape[1] == 0:
        raise DimensionError("empty training set")
    if A.shape[0] != B.shape[0]:
        raise DimensionError(
            f"train features have {A.shape[0]} rows, test features {B.shape[0]}"
        )
    if y.shape != (A.shape[1],):
        raise DimensionError(f"{y.shape[0]} labels for {A.shape[1]} training samples")

    a2 = np.einsum("ij,ij->j", A, A)
    out = np.empty(B.shape[1], dtype=y.dtype)
    for start in range(0, B.shape[1], CHUNK):
        Bc = B[:, start:start + CHUNK]
        b2 = np.einsum("ij,ij->j", Bc, Bc)
        d = b2[:, None] - 2.0 * (Bc.T @ A) + a2[None, :]
        np.maximum(d, 0.0, out=d)
        best = d.min(axis=1)
        tol = TIE_RTOL * (b2[:, None] + a2[None, :])
        # first index whose distance is within the tie band of the minimum
        idx = np.argmax(d <= best[:, None] + tol, axis=1)
        out[start:start + Bc.shape[1]] = y[idx]
    return out


def accuracy(pred, truth, elapsed: float = 0.0) -> EvalReport:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DimensionError(f"{pred.shape[0]} predictions for {truth.shape[0]} labels")
    n = int(truth.shape[0])
    if n == 0:
        raise DimensionError("no labels to score")
    errors = int(np.count_nonzero(pred != truth))
    return EvalReport(accuracy=(n - errors) / n, n_test=n, n_errors=errors, elapsed=elapsed)


def evaluate(train_feats, train_labels, test_feats, test_labels) -> EvalReport:
    """Classify with :func:`knn1_classify` and score, timing the search."""
    t0 = time.perf_counter()
    pred = knn1_classify(train_feats, train_labels, test_feats)
    return accuracy(pred, test_labels, elapsed=time.perf_counter() - t0)
