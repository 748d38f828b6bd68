# svmassoc.py
# SPDX-License-Identifier: MIT
"""Target face association with a class-weighted linear SVM.

The primal objective is::

    f(w) = 1/2 w.w + Cp * sum_pos max(0, 1 - w.x)^2 + Cn * sum_neg max(0, 1 + w.x)^2

It is minimized by Newton's method on the generalized Hessian
``I + 2 * sum_active c_i x_i x_i^T`` with Armijo backtracking. Optional
bias augmentation appends a constant 1 to every feature, so the offset is
regularized like any other weight.

Association starts from a positive set (optionally pre-associated from
track/detection box overlap), trains against negatives, and grows the
positive set with every candidate scoring above ``accept_margin`` until a
fixpoint or the round limit.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy import linalg

from .errors import BadFeature, DimensionMismatch, EmptyClass, InvalidInput, MissingLabel
from .log import get_logger

__all__ = [
    "SvmModel",
    "Box",
    "AssocModel",
    "AssociationSets",
    "AssociationResult",
    "svm_objective",
    "svm_gradient",
    "train_svm",
    "iou",
    "pre_associate",
    "tfa_associate",
]

log = get_logger(__name__)

_ARMIJO = 1e-4
_MAX_HALVINGS = 60


def _matrix(rows: Sequence[np.ndarray] | np.ndarray, label: str) -> np.ndarray:
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if x.size else x.reshape(0, 1)
    if x.shape[0] == 0:
        raise EmptyClass(f"{label} class is empty")
    if not np.all(np.isfinite(x)):
        raise BadFeature(f"{label} features contain NaN or infinity")
    return x


def _problem(
    positives: Sequence[np.ndarray] | np.ndarray,
    negatives: Sequence[np.ndarray] | np.ndarray,
    cp: float,
    cn: float,
    bias: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not (cp > 0.0 and cn > 0.0):
        raise InvalidInput(f"Cp and Cn must be > 0; got {cp}, {cn}")
    pos = _matrix(positives, "positive")
    neg = _matrix(negatives, "negative")
    if pos.shape[1] != neg.shape[1]:
        raise DimensionMismatch(f"positives have d={pos.shape[1]}, negatives d={neg.shape[1]}")
    x = np.vstack([pos, neg])
    if bias:
        x = np.hstack([x, np.ones((x.shape[0], 1))])
    y = np.concatenate([np.ones(pos.shape[0]), -np.ones(neg.shape[0])])
    c = np.concatenate([np.full(pos.shape[0], cp), np.full(neg.shape[0], cn)])
    return x, y, c


def _objective(w: np.ndarray, x: np.ndarray, y: np.ndarray, c: np.ndarray) -> float:
    slack = np.maximum(0.0, 1.0 - y * (x @ w))
    return 0.5 * float(w @ w) + float(np.sum(c * slack * slack))


def _gradient(w: np.ndarray, x: np.ndarray, y: np.ndarray, c: np.ndarray) -> np.ndarray:
    slack = np.maximum(0.0, 1.0 - y * (x @ w))
    return w - 2.0 * (x.T @ (c * y * slack))


def svm_objective(
    w: np.ndarray,
    positives: Sequence[np.ndarray] | np.ndarray,
    negatives: Sequence[np.ndarray] | np.ndarray,
    cp: float,
    cn: float,
    *,
    bias: bool = False,
) -> float:
    """Evaluate the class-weighted squared-hinge objective at ``w``."""
    x, y, c = _problem(positives, negatives, cp, cn, bias)
    return _objective(np.asarray(w, dtype=np.float64), x, y, c)


def svm_gradient(
    w: np.ndarray,
    positives: Sequence[np.ndarray] | np.ndarray,
    negatives: Sequence[np.ndarray] | np.ndarray,
    cp: float,
    cn: float,
    *,
    bias: bool = False,
) -> np.ndarray:
    """Analytic gradient of :func:`svm_objective`."""
    x, y, c = _problem(positives, negatives, cp, cn, bias)
    return _gradient(np.asarray(w, dtype=np.float64), x, y, c)


@dataclass(frozen=True, slots=True)
class SvmModel:
    """Trained linear SVM.

    Attributes:
        w (np.ndarray): Weights; the last entry is the offset when ``bias``.
        cp (float): Positive-class weight.
        cn (float): Negative-class weight.
        objective (float): Objective value at ``w``.
        bias (bool): Whether features were augmented with a constant 1.
        iterations (int): Newton iterations run.
        grad_norm (float): Gradient norm at ``w``.
    """

    w: np.ndarray
    cp: float
    cn: float
    objective: float
    bias: bool = True
    iterations: int = 0
    grad_norm: float = 0.0

    def decision_function(self, features: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
        """Return ``w.x`` (plus offset) for each feature row."""
        x = np.asarray(features, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if self.bias:
            return x @ self.w[:-1] + self.w[-1]
        return x @ self.w


def train_svm(
    positives: Sequence[np.ndarray] | np.ndarray,
    negatives: Sequence[np.ndarray] | np.ndarray,
    cp: float = 1.0,
    cn: float = 1.0,
    tol: float = 1e-6,
    max_iters: int = 100,
    *,
    bias: bool = True,
) -> SvmModel:
    """Minimize the squared-hinge objective from ``w = 0``.

    Stops once the gradient norm is at most ``tol``, after ``max_iters``
    Newton steps, or when the line search cannot decrease the objective.

    Raises:
        EmptyClass: If either class is empty.
        BadFeature: If a feature is non-finite.
    """
    x, y, c = _problem(positives, negatives, cp, cn, bias)
    w = np.zeros(x.shape[1], dtype=np.float64)
    f = _objective(w, x, y, c)
    grad = _gradient(w, x, y, c)
    iterations = 0
    while float(np.linalg.norm(grad)) > tol and iterations < max_iters:
        iterations += 1
        active = (1.0 - y * (x @ w)) > 0.0
        xa = x[active]
        hessian = np.eye(x.shape[1]) + 2.0 * (xa.T * c[active]) @ xa
        step = linalg.solve(hessian, -grad, assume_a="pos")
        slope = float(grad @ step)
        t = 1.0
        for _ in range(_MAX_HALVINGS):
            candidate = w + t * step
            f_new = _objective(candidate, x, y, c)
            if f_new <= f + _ARMIJO * t * slope:
                break
            t *= 0.5
        else:
            log.debug("Line search stalled after %d Newton steps.", iterations)
            break
        w, f = candidate, f_new
        grad = _gradient(w, x, y, c)

    grad_norm = float(np.linalg.norm(grad))
    if grad_norm > tol:
        log.warning("SVM stopped at gradient norm %.3g > tol %.3g.", grad_norm, tol)
    w.flags.writeable = False
    return SvmModel(
        w=w,
        cp=float(cp),
        cn=float(cn),
        objective=f,
        bias=bias,
        iterations=iterations,
        grad_norm=grad_norm,
    )


@dataclass(frozen=True, slots=True)
class Box:
    """Axis-aligned box with top-left corner (x, y) and extents (w, h)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise InvalidInput(f"box extents must be positive; got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return float(self.w) * float(self.h)


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    if inter <= 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def pre_associate(
    track_boxes: Sequence[Box | None],
    detections: Sequence[Sequence[tuple[int, Box]]],
    first_k: int,
) -> list[int]:
    """Pick, per frame among the first ``first_k``, the detection best overlapping the track.

    Args:
        track_boxes (Sequence[Box | None]): Track box per frame (None when
            the tracker has no box).
        detections (Sequence[Sequence[tuple[int, Box]]]): (detection id,
            box) pairs per frame.
        first_k (int): Number of leading frames to use.

    Returns:
        list[int]: Chosen detection ids in frame order; frames with no
        positive overlap contribute nothing. Ties go to the lower id.
    """
    if first_k < 1:
        raise InvalidInput(f"first_k must be >= 1; got {first_k}")
    chosen: list[int] = []
    for track, frame in zip(track_boxes[:first_k], detections[:first_k]):
        if track is None:
            continue
        best_id, best_iou = None, 0.0
        for det_id, box in sorted(frame, key=lambda pair: pair[0]):
            overlap = iou(track, box)
            if overlap > best_iou:
                best_id, best_iou = det_id, overlap
        if best_id is not None:
            chosen.append(best_id)
    return chosen


class AssocModel(IntEnum):
    """Negative-set policy: 1 trains on S_n ∪ S_b, 2 uses S_b only when S_n is empty."""

    WITH_BACKGROUND = 1
    BACKGROUND_FALLBACK = 2


@dataclass(frozen=True, slots=True)
class AssociationSets:
    """Initial positives, within-video negatives and background negatives."""

    positives: frozenset[int]
    negatives: frozenset[int] = frozenset()
    background: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        for name in ("positives", "negatives", "background"):
            object.__setattr__(self, name, frozenset(int(i) for i in getattr(self, name)))
        if (
            self.positives & self.negatives
            or self.positives & self.background
            or self.negatives & self.background
        ):
            raise InvalidInput("association sets must be pairwise disjoint")

    def training_negatives(self, model: AssocModel) -> frozenset[int]:
        if AssocModel(model) is AssocModel.WITH_BACKGROUND:
            return self.negatives | self.background
        return self.negatives if self.negatives else self.background


@dataclass(frozen=True, slots=True)
class AssociationResult:
    """Final positive ids plus the positive-set size after every round."""

    positives: tuple[int, ...]
    history: tuple[int, ...]
    model: SvmModel | None = None


def tfa_associate(
    sets: AssociationSets,
    features: Mapping[int, np.ndarray],
    candidates: Sequence[int],
    rounds: int = 5,
    cp: float = 1.0,
    cn: float = 1.0,
    accept_margin: float = 0.0,
    *,
    model: AssocModel | int = AssocModel.WITH_BACKGROUND,
    bias: bool = True,
    tol: float = 1e-6,
    max_iters: int = 100,
) -> AssociationResult:
    """Grow the positive set by iterative SVM training.

    Each round trains on the current positives against the policy's
    negatives and accepts every remaining candidate whose decision value
    exceeds ``accept_margin``. Stops after ``rounds`` rounds or when a
    round accepts nothing. Candidates that are known negatives are ignored.

    Raises:
        EmptyClass: If there are no positives, or no negatives once training
            is needed.
        MissingLabel: If an id has no feature.
    """
    if not sets.positives:
        raise EmptyClass("initial positive set is empty")
    if rounds < 0:
        raise InvalidInput(f"rounds must be >= 0; got {rounds}")
    negatives = sorted(sets.training_negatives(AssocModel(model)))
    excluded = sets.negatives | sets.background

    def _rows(ids: Sequence[int]) -> np.ndarray:
        try:
            return np.stack([np.asarray(features[i], dtype=np.float64) for i in ids])
        except KeyError as exc:
            raise MissingLabel(f"no feature for id {exc.args[0]}") from exc

    positives = set(sets.positives)
    history = [len(positives)]
    last_model: SvmModel | None = None
    for round_no in range(1, rounds + 1):
        pool = sorted({int(i) for i in candidates} - positives - excluded)
        if not pool:
            break
        if not negatives:
            raise EmptyClass("no negatives available for training")
        last_model = train_svm(
            _rows(sorted(positives)),
            _rows(negatives),
            cp,
            cn,
            tol,
            max_iters,
            bias=bias,
        )
        scores = last_model.decision_function(_rows(pool))
        accepted = [cid for cid, s in zip(pool, scores.tolist()) if s > accept_margin]
        log.debug("Association round %d accepted %d of %d.", round_no, len(accepted), len(pool))
        if not accepted:
            break
        positives.update(accepted)
        history.append(len(positives))
    return AssociationResult(
        positives=tuple(sorted(positives)), history=tuple(history), model=last_model
    )
