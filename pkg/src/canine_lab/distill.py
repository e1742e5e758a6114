"""Teacher-student distillation lab on synthetic canine-position data.

A multimodal teacher MLP (image features + normalized clinical
metadata) is trained with cross-entropy; an image-only student is then
trained against the teacher's soft targets with the temperature-scaled
distillation loss.  Also provides the seeded stratified 80/20 split,
the geometry-driven synthetic dataset generator, finite-difference
gradient checking, and file formats for datasets, models, and training
logs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DistillError,
    EmptyDataset,
    InvalidConfig,
    InvalidProportions,
    InvalidTemperature,
    LabelOutOfRange,
    NonFiniteLoss,
    ShapeMismatch,
)
from .geometry import (
    SPACE_LABELS,
    CanineCase,
    MergeMap3,
    SectorLabel,
    Space,
    build_boundaries,
    classify,
    label_from_string,
    make_strip_case,
    signed_distances,
)

THREE_LABELS = SPACE_LABELS[Space.THREE]

# Class proportions of the reference 1528-case cohort (592/568/368).
DEFAULT_PROPORTIONS = (592 / 1528, 568 / 1528, 368 / 1528)

# Raw landmark coordinates are O(10) pixels; features are scaled down so
# MLP inputs are O(1) without any train-time feature normalization.
FEATURE_SCALE = 0.1


# ---------------------------------------------------------------------------
# samples and configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Sample:
    """One synthetic case: image features, clinical metadata, 3-class label."""

    case_id: str
    image_features: np.ndarray
    depth_mm: float
    angle_deg: float
    root_maturity: float
    label: SectorLabel

    def __post_init__(self):
        object.__setattr__(
            self, "image_features", np.asarray(self.image_features, dtype=float)
        )
        for name in ("depth_mm", "angle_deg", "root_maturity"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.image_features.ndim != 1:
            raise DistillError(
                f"image_features must be a vector, got shape {self.image_features.shape}"
            )
        if self.label.space is not Space.THREE:
            raise DistillError(f"sample labels live in the 3-class space, got {self.label}")
        if not 0.0 <= self.root_maturity <= 1.0:
            raise DistillError(f"root_maturity must be in [0, 1], got {self.root_maturity}")

    @property
    def clinical(self) -> np.ndarray:
        return np.array([self.depth_mm, self.angle_deg, self.root_maturity])

    @property
    def one_hot(self) -> np.ndarray:
        return one_hot(self.label)


def one_hot(label, k: int = 3) -> np.ndarray:
    """Unit basis vector for a label (SectorLabel or 0-based index)."""
    idx = label.index if isinstance(label, SectorLabel) else int(label)
    if not 0 <= idx < k:
        raise LabelOutOfRange(f"label index {idx} out of range for k={k}")
    v = np.zeros(k)
    v[idx] = 1.0
    return v


@dataclass(frozen=True)
class DistillConfig:
    """Hyperparameters shared by teacher, student, and baseline training."""

    temperature: float = 2.0
    alpha: float = 0.5
    learning_rate: float = 0.01
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 10
    l2: float = 1e-4
    seed: int = 0
    teacher_hidden: tuple[int, ...] = (32,)
    student_hidden: tuple[int, ...] = (16,)

    def __post_init__(self):
        if not self.temperature > 0.0:
            raise InvalidTemperature(f"temperature must be > 0, got {self.temperature}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidConfig(f"alpha must be in [0, 1], got {self.alpha}")
        if not self.learning_rate > 0.0:
            raise InvalidConfig(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise InvalidConfig(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 0:
            raise InvalidConfig(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.patience < 1:
            raise InvalidConfig(f"patience must be >= 1, got {self.patience}")
        if self.l2 < 0.0:
            raise InvalidConfig(f"l2 must be >= 0, got {self.l2}")
        object.__setattr__(self, "teacher_hidden", tuple(self.teacher_hidden))
        object.__setattr__(self, "student_hidden", tuple(self.student_hidden))


@dataclass(frozen=True)
class SplitSpec:
    """Train fraction, stratification flag, and shuffle seed for `split`."""

    train_fraction: float = 0.8
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidConfig(
                f"train_fraction must be in (0, 1), got {self.train_fraction}"
            )


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class MlpModel:
    """Feed-forward net: rectifier hidden layers, softmax over 3 classes.

    Weight matrix i has shape (layer_sizes[i], layer_sizes[i+1]).  A
    multimodal model consumes concat(image_features, z-scored clinical)
    and stores the training-set clinical statistics it normalizes with.
    """

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input_kind: str = "image"  # "image" | "multimodal"
    clin_mean: np.ndarray | None = None
    clin_std: np.ndarray | None = None

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2:
            raise InvalidConfig(f"need input and output layers, got {self.layer_sizes}")
        if self.input_kind not in ("image", "multimodal"):
            raise InvalidConfig(f"unknown input_kind {self.input_kind!r}")
        if not (len(self.weights) == len(self.biases) == len(self.layer_sizes) - 1):
            raise ShapeMismatch("weights/biases do not chain with layer_sizes")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != want or b.shape != (want[1],):
                raise ShapeMismatch(
                    f"layer {i}: weight {w.shape} / bias {b.shape}, expected {want}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise DistillError(f"layer {i} has non-finite parameters")

    def copy_params(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]


def init_model(
    layer_sizes: Sequence[int],
    seed_or_rng,
    input_kind: str = "image",
    clin_mean: np.ndarray | None = None,
    clin_std: np.ndarray | None = None,
) -> MlpModel:
    """Seeded init: weights uniform in +/- 1/sqrt(fan_in), biases zero."""
    rng = (
        seed_or_rng
        if isinstance(seed_or_rng, np.random.Generator)
        else np.random.default_rng(seed_or_rng)
    )
    sizes = tuple(int(s) for s in layer_sizes)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = 1.0 / math.sqrt(max(fan_in, 1))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes, weights, biases, input_kind, clin_mean, clin_std)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def forward_batch(model: MlpModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(logits, probabilities) for an (n, d) input batch."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.layer_sizes[0]:
        raise ShapeMismatch(
            f"input shape {x.shape} incompatible with input width {model.layer_sizes[0]}"
        )
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        a = z if i == last else np.maximum(z, 0.0)
    return z, _softmax(z)


def forward(model: MlpModel, x) -> tuple[np.ndarray, np.ndarray]:
    """(logits, probabilities) for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeMismatch(f"expected a 1-D input vector, got shape {x.shape}")
    logits, probs = forward_batch(model, x[None, :])
    return logits[0], probs[0]


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def soften(probs: np.ndarray, temperature: float) -> np.ndarray:
    """Temperature-scale a distribution: p^(1/T) renormalized."""
    if not temperature > 0.0:
        raise InvalidTemperature(f"temperature must be > 0, got {temperature}")
    p = np.asarray(probs, dtype=float)
    out = np.where(p > 0.0, p, 0.0) ** (1.0 / temperature)
    return out / out.sum(axis=-1, keepdims=True)


def _kd_batch(
    logits: np.ndarray,
    teacher_probs: np.ndarray | None,
    y: np.ndarray,
    temperature: float,
    alpha: float,
) -> tuple[float, np.ndarray]:
    """Mean distillation loss and its gradient w.r.t. the logits.

    When alpha == 1 the teacher term is skipped outright, so a student
    distilled at alpha=1 performs float-for-float the same arithmetic
    as a no-teacher baseline.
    """
    n = logits.shape[0]
    probs = _softmax(logits)
    log_probs = _log_softmax(logits)
    ce = -(y * log_probs).sum(axis=1)
    if alpha == 1.0:
        loss = float(ce.mean())
        grad = (probs - y) / n
        return loss, grad
    q_t = soften(teacher_probs, temperature)
    log_s_t = _log_softmax(logits / temperature)
    log_q_t = np.where(q_t > 0.0, np.log(np.where(q_t > 0.0, q_t, 1.0)), 0.0)
    # KL >= 0 mathematically; clamp float rounding so the loss never dips
    # below zero for identical distributions.
    kl = np.maximum((q_t * (log_q_t - log_s_t)).sum(axis=1), 0.0)
    loss = float(alpha * ce.mean() + (1.0 - alpha) * temperature**2 * kl.mean())
    s_t = _softmax(logits / temperature)
    grad = (alpha * (probs - y) + (1.0 - alpha) * temperature * (s_t - q_t)) / n
    return loss, grad


def kd_loss(
    student_logits,
    teacher_probs,
    true_one_hot,
    temperature: float = 2.0,
    alpha: float = 0.5,
) -> tuple[float, np.ndarray]:
    """Distillation loss for one sample and its gradient w.r.t. the logits.

    loss = alpha * CE(true, softmax(z)) +
           (1 - alpha) * T^2 * KL(soften(teacher, T) || softmax(z / T))

    The T^2 factor keeps the soft-target gradient scale comparable
    across temperatures.
    """
    if not temperature > 0.0:
        raise InvalidTemperature(f"temperature must be > 0, got {temperature}")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidConfig(f"alpha must be in [0, 1], got {alpha}")
    z = np.asarray(student_logits, dtype=float)
    y = np.asarray(true_one_hot, dtype=float)
    if z.shape != y.shape or z.ndim != 1:
        raise ShapeMismatch(f"logits {z.shape} vs one-hot {y.shape}")
    q = None
    if alpha < 1.0:
        q = np.asarray(teacher_probs, dtype=float)
        if q.shape != z.shape:
            raise ShapeMismatch(f"teacher probs {q.shape} vs logits {z.shape}")
        if q.min() < 0.0 or abs(q.sum() - 1.0) > 1e-8:
            raise DistillError("teacher_probs must be a probability distribution")
        q = q[None, :]
    loss, grad = _kd_batch(z[None, :], q, y[None, :], temperature, alpha)
    return loss, grad[0]


def _loss_and_grads(
    model: MlpModel,
    x: np.ndarray,
    y: np.ndarray,
    teacher_probs: np.ndarray | None,
    temperature: float,
    alpha: float,
    l2: float,
):
    """Mean batch loss (+ L2 on weights) and gradients for every parameter."""
    acts = [np.asarray(x, dtype=float)]
    zs = []
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ w + b
        zs.append(z)
        acts.append(z if i == last else np.maximum(z, 0.0))
    loss, delta = _kd_batch(zs[-1], teacher_probs, y, temperature, alpha)

    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    for i in range(last, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if l2 > 0.0:
            loss += l2 * float((model.weights[i] ** 2).sum())
            grads_w[i] = grads_w[i] + 2.0 * l2 * model.weights[i]
        if i > 0:
            delta = (delta @ model.weights[i].T) * (zs[i - 1] > 0.0)
    return loss, grads_w, grads_b


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def features_matrix(samples: Sequence[Sample]) -> np.ndarray:
    return np.stack([s.image_features for s in samples])


def clinical_matrix(samples: Sequence[Sample]) -> np.ndarray:
    return np.stack([s.clinical for s in samples])


def label_indices(samples: Sequence[Sample]) -> np.ndarray:
    return np.array([s.label.index for s in samples], dtype=np.int64)


def model_inputs(model: MlpModel, samples: Sequence[Sample]) -> np.ndarray:
    """Assemble the input matrix a model expects from raw samples."""
    feats = features_matrix(samples)
    if model.input_kind == "image":
        return feats
    clin = (clinical_matrix(samples) - model.clin_mean) / model.clin_std
    return np.hstack([feats, clin])


def model_accuracy(model: MlpModel, samples: Sequence[Sample]) -> float:
    """Fraction of samples whose argmax probability matches the label."""
    if not samples:
        raise EmptyDataset("cannot score an empty sample list")
    _, probs = forward_batch(model, model_inputs(model, samples))
    return float((probs.argmax(axis=1) == label_indices(samples)).mean())


def _fit(
    model: MlpModel,
    rng: np.random.Generator,
    x: np.ndarray,
    y: np.ndarray,
    teacher_probs: np.ndarray | None,
    config: DistillConfig,
    alpha: float,
    val: Sequence[Sample] | None,
    history: list | None,
) -> MlpModel:
    """Seeded mini-batch gradient descent with early stopping.

    Early stopping watches validation accuracy when `val` is given and
    restores the best-scoring parameters; without `val` the loop simply
    runs max_epochs.  The epoch shuffle continues the generator that
    drew the initial weights, so the whole trajectory is a pure
    function of (config, dataset).
    """
    n = x.shape[0]
    best_params, best_acc, stale = None, -math.inf, 0
    for epoch in range(config.max_epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            q = None if teacher_probs is None else teacher_probs[idx]
            # overflow in a diverging run surfaces as the NonFiniteLoss below
            with np.errstate(over="ignore", invalid="ignore"):
                loss, gw, gb = _loss_and_grads(
                    model, x[idx], y[idx], q, config.temperature, alpha, config.l2
                )
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"loss diverged at epoch {epoch}")
            total += loss * len(idx)
            for i in range(len(model.weights)):
                model.weights[i] -= config.learning_rate * gw[i]
                model.biases[i] -= config.learning_rate * gb[i]
        entry = {"epoch": epoch, "train_loss": total / n, "val_accuracy": None}
        if val is not None:
            acc = model_accuracy(model, val)
            entry["val_accuracy"] = acc
            if acc > best_acc:
                best_acc, best_params, stale = acc, model.copy_params(), 0
            else:
                stale += 1
        if history is not None:
            history.append(entry)
        if val is not None and stale >= config.patience:
            break
    if best_params is not None:
        model.weights, model.biases = best_params
    return model


def train_teacher(
    train: Sequence[Sample],
    config: DistillConfig,
    val: Sequence[Sample] | None = None,
    history: list | None = None,
) -> MlpModel:
    """Train the multimodal teacher with plain cross-entropy + L2.

    Clinical metadata is z-scored with training-set statistics that are
    stored on the model, so validation inputs see no statistics of
    their own (no leakage).
    """
    if not train:
        raise EmptyDataset("teacher training set is empty")
    clin = clinical_matrix(train)
    mean = clin.mean(axis=0)
    std = clin.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    rng = np.random.default_rng(config.seed)
    m = train[0].image_features.shape[0]
    model = init_model(
        (m + 3, *config.teacher_hidden, 3), rng, "multimodal", mean, std
    )
    x = model_inputs(model, train)
    y = np.stack([s.one_hot for s in train])
    return _fit(model, rng, x, y, None, config, 1.0, val, history)


def _train_image_model(
    train: Sequence[Sample],
    config: DistillConfig,
    teacher: MlpModel | None,
    alpha: float,
    val: Sequence[Sample] | None,
    history: list | None,
) -> MlpModel:
    if not train:
        raise EmptyDataset("student training set is empty")
    rng = np.random.default_rng(config.seed)
    m = train[0].image_features.shape[0]
    model = init_model((m, *config.student_hidden, 3), rng, "image")
    x = features_matrix(train)
    y = np.stack([s.one_hot for s in train])
    teacher_probs = None
    if teacher is not None and alpha < 1.0:
        _, teacher_probs = forward_batch(teacher, model_inputs(teacher, train))
    return _fit(model, rng, x, y, teacher_probs, config, alpha, val, history)


def distill_student(
    teacher: MlpModel,
    train: Sequence[Sample],
    config: DistillConfig,
    val: Sequence[Sample] | None = None,
    history: list | None = None,
) -> MlpModel:
    """Train the image-only student against the teacher's soft targets.

    At alpha=1 the teacher is never consulted and the run is
    bitwise-identical to `train_student_baseline` under the same
    config.
    """
    return _train_image_model(train, config, teacher, config.alpha, val, history)


def train_student_baseline(
    train: Sequence[Sample],
    config: DistillConfig,
    val: Sequence[Sample] | None = None,
    history: list | None = None,
) -> MlpModel:
    """Train the same image-only architecture without any teacher."""
    return _train_image_model(train, config, None, 1.0, val, history)


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


def gradient_check(
    model: MlpModel,
    x,
    y,
    teacher_probs=None,
    temperature: float = 2.0,
    alpha: float = 1.0,
    l2: float = 0.0,
    h: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Perturbs every weight and bias entry by +/- h and compares the loss
    slope with the backpropagated gradient; the relative error uses
    max(|analytic|, |numeric|, 1e-8) as its scale.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    q = None
    if alpha < 1.0:
        if teacher_probs is None:
            raise InvalidConfig("alpha < 1 requires teacher_probs")
        q = np.atleast_2d(np.asarray(teacher_probs, dtype=float))
    _, gw, gb = _loss_and_grads(model, x, y, q, temperature, alpha, l2)

    def loss_only() -> float:
        return _loss_and_grads(model, x, y, q, temperature, alpha, l2)[0]

    worst = 0.0
    for analytic, params in ((gw, model.weights), (gb, model.biases)):
        for grad, arr in zip(analytic, params):
            flat = arr.ravel()
            gflat = grad.ravel()
            for j in range(flat.size):
                keep = flat[j]
                flat[j] = keep + h
                up = loss_only()
                flat[j] = keep - h
                down = loss_only()
                flat[j] = keep
                numeric = (up - down) / (2.0 * h)
                scale = max(abs(numeric), abs(gflat[j]), 1e-8)
                worst = max(worst, abs(numeric - gflat[j]) / scale)
    return worst


# ---------------------------------------------------------------------------
# dataset split
# ---------------------------------------------------------------------------


def split(dataset: Sequence[Sample], spec: SplitSpec) -> tuple[list[Sample], list[Sample]]:
    """Seeded train/validation partition with |train| = round(f * N).

    The stratified variant hands out per-class quotas by largest
    remainder, so class proportions are preserved within one item, and
    draws each class's members by a seeded shuffle.  The returned lists
    keep the dataset's original order.
    """
    dataset = list(dataset)
    if not dataset:
        raise EmptyDataset("cannot split an empty dataset")
    n = len(dataset)
    n_train = int(round(spec.train_fraction * n))
    rng = np.random.default_rng(spec.seed)

    if not spec.stratified:
        perm = rng.permutation(n)
        chosen = np.zeros(n, dtype=bool)
        chosen[perm[:n_train]] = True
    else:
        by_class: dict[int, list[int]] = {}
        for i, s in enumerate(dataset):
            by_class.setdefault(s.label.index, []).append(i)
        classes = sorted(by_class)
        quotas = {c: spec.train_fraction * len(by_class[c]) for c in classes}
        base = {c: math.floor(quotas[c]) for c in classes}
        leftover = n_train - sum(base.values())
        if leftover > 0:
            by_remainder = sorted(classes, key=lambda c: (-(quotas[c] - base[c]), c))
            for c in by_remainder[:leftover]:
                base[c] += 1
        elif leftover < 0:
            by_remainder = sorted(classes, key=lambda c: (quotas[c] - base[c], c))
            for c in by_remainder[: -leftover]:
                base[c] -= 1
        chosen = np.zeros(n, dtype=bool)
        for c in classes:
            members = np.array(by_class[c])
            perm = rng.permutation(len(members))
            chosen[members[perm[: base[c]]]] = True

    train = [s for i, s in enumerate(dataset) if chosen[i]]
    val = [s for i, s in enumerate(dataset) if not chosen[i]]
    return train, val


# ---------------------------------------------------------------------------
# synthetic data generator
# ---------------------------------------------------------------------------

# 3-class label index -> candidate 5-sector indices under the default
# merge (S1 -> C, S2 -> B, S3/S4/S5 -> A).
_LABEL_TO_SECTORS = {0: (2, 3, 4), 1: (1,), 2: (0,)}

# Clinical metadata model: value = intercept + slope * u + noise, where
# u in [0, 5) is the continuous mesial progress of the canine point.
_CLINICAL_MODEL = {
    "depth_mm": (4.0, 2.0, 0.3),
    "angle_deg": (5.0, 6.0, 1.0),
    "root_maturity": (0.35, 0.1, 0.03),
}


def synth_generate(
    n: int,
    proportions: Sequence[float] = DEFAULT_PROPORTIONS,
    sigma: float = 0.05,
    n_features: int = 12,
    seed: int = 0,
    return_details: bool = False,
):
    """Generate a labeled synthetic dataset from jittered sector fixtures.

    Per sample: draw the 3-class label by `proportions`, pick one of its
    5-sector strips on a per-sample jittered boundary fixture, place
    the canine point uniformly inside that strip (1 px clear of the
    boundaries), and re-check the label through the geometry
    classifier.  Image features are a fixed seeded random projection of
    (delta1..delta4, x, y) plus N(0, sigma) noise; clinical metadata
    follows a linear model in the mesial progress of the point.

    With return_details=True also returns {"projection", "cases",
    "points", "deltas"} so the geometry agreement can be re-verified
    externally.
    """
    props = np.asarray(proportions, dtype=float)
    if props.shape != (3,) or props.min() < 0.0 or abs(props.sum() - 1.0) > 1e-9:
        raise InvalidProportions(
            f"proportions must be three non-negative shares summing to 1, got {proportions}"
        )
    if n < 1:
        raise InvalidConfig(f"n must be >= 1, got {n}")
    if sigma < 0.0:
        raise InvalidConfig(f"sigma must be >= 0, got {sigma}")
    if n_features < 6:
        raise InvalidConfig(f"need n_features >= 6 to keep deltas recoverable, got {n_features}")

    rng = np.random.default_rng(seed)
    projection = rng.normal(0.0, 1.0, size=(n_features, 6)) / math.sqrt(6.0)
    labels = rng.choice(3, size=n, p=props)

    margin = 1.0
    edge_width = 8.0
    raw = np.empty((n, 6))
    samples_meta = []
    cases: list[CanineCase] = []
    merge = MergeMap3.from_preset()

    for i in range(n):
        sector = int(rng.choice(_LABEL_TO_SECTORS[int(labels[i])]))
        gaps = rng.uniform(6.0, 14.0, size=4)
        offsets = rng.uniform(5.0, 15.0) + np.concatenate([[0.0], np.cumsum(gaps[:3])])
        angles = rng.uniform(-8.0, 8.0, size=4)
        y = rng.uniform(-3.0, 3.0)
        line_x = offsets + np.tan(np.radians(angles)) * y
        if sector == 0:
            lo, hi = line_x[0] - edge_width, line_x[0] - margin
        elif sector == 4:
            lo, hi = line_x[3] + margin, line_x[3] + edge_width
        else:
            lo, hi = line_x[sector - 1] + margin, line_x[sector] - margin
        x = rng.uniform(lo, hi)

        case = make_strip_case(
            offsets=tuple(offsets),
            canine_point=(x, y),
            angles_deg=tuple(angles),
            case_id=f"syn-{i:05d}",
        )
        got = classify(case, Space.THREE, merge)
        if got.index != labels[i]:
            raise DistillError(
                f"generator/geometry disagreement on {case.case_id}: "
                f"drew {THREE_LABELS[labels[i]]}, classified {got.value}"
            )
        raw[i, :4] = signed_distances(case.canine_point, build_boundaries(case))
        raw[i, 4:] = (x, y)
        cases.append(case)

        # Mesial progress: sector index plus position within the strip.
        u = sector + (x - lo) / (hi - lo)
        meta = {}
        for key, (icept, slope, noise) in _CLINICAL_MODEL.items():
            meta[key] = icept + slope * u + rng.normal(0.0, noise)
        meta["root_maturity"] = float(np.clip(meta["root_maturity"], 0.0, 1.0))
        samples_meta.append(meta)

    feats = (raw * FEATURE_SCALE) @ projection.T
    if sigma > 0.0:
        feats = feats + rng.normal(0.0, sigma, size=feats.shape)

    samples = [
        Sample(
            case_id=cases[i].case_id,
            image_features=feats[i],
            depth_mm=samples_meta[i]["depth_mm"],
            angle_deg=samples_meta[i]["angle_deg"],
            root_maturity=samples_meta[i]["root_maturity"],
            label=SectorLabel(Space.THREE, THREE_LABELS[int(labels[i])]),
        )
        for i in range(n)
    ]
    if return_details:
        details = {
            "projection": projection,
            "cases": cases,
            "points": raw[:, 4:].copy(),
            "deltas": raw[:, :4].copy(),
        }
        return samples, details
    return samples


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def save_manifest(samples: Sequence[Sample], path) -> None:
    """Write samples as CSV: case_id,label,depth_mm,angle_deg,root_maturity,f0.."""
    if not samples:
        raise EmptyDataset("no samples to write")
    m = samples[0].image_features.shape[0]
    header = ["case_id", "label", "depth_mm", "angle_deg", "root_maturity"]
    header += [f"f{j}" for j in range(m)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in samples:
            row = [s.case_id, s.label.value, repr(s.depth_mm), repr(s.angle_deg),
                   repr(s.root_maturity)]
            row += [repr(float(v)) for v in s.image_features]
            writer.writerow(row)


def load_manifest(path) -> list[Sample]:
    """Read a dataset manifest CSV back into samples."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path}: empty manifest")
        fixed = ["case_id", "label", "depth_mm", "angle_deg", "root_maturity"]
        if header[: len(fixed)] != fixed:
            raise DistillError(f"{path}: unexpected header {header[:5]}")
        m = len(header) - len(fixed)
        if header[len(fixed):] != [f"f{j}" for j in range(m)]:
            raise DistillError(f"{path}: malformed feature columns")
        samples = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DistillError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                samples.append(
                    Sample(
                        case_id=row[0],
                        image_features=np.array([float(v) for v in row[5:]]),
                        depth_mm=float(row[2]),
                        angle_deg=float(row[3]),
                        root_maturity=float(row[4]),
                        label=label_from_string(row[1]),
                    )
                )
            except ValueError as exc:
                raise DistillError(f"{path}:{lineno}: {exc}")
    if not samples:
        raise EmptyDataset(f"{path}: manifest has a header but no rows")
    return samples


def save_model(model: MlpModel, path, config: DistillConfig | None = None) -> None:
    """Archive a model as one JSON document (deterministic serialization)."""
    doc = {
        "layer_sizes": list(model.layer_sizes),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "input_kind": model.input_kind,
        "clin_mean": None if model.clin_mean is None else model.clin_mean.tolist(),
        "clin_std": None if model.clin_std is None else model.clin_std.tolist(),
        "config": None if config is None else asdict(config),
        "seed": None if config is None else config.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> tuple[MlpModel, dict | None]:
    """Load a model archive; returns (model, config dict or None)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        model = MlpModel(
            layer_sizes=tuple(doc["layer_sizes"]),
            weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
            biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
            input_kind=doc["input_kind"],
            clin_mean=None if doc["clin_mean"] is None else np.asarray(doc["clin_mean"]),
            clin_std=None if doc["clin_std"] is None else np.asarray(doc["clin_std"]),
        )
    except KeyError as exc:
        raise DistillError(f"{path}: missing archive field {exc}")
    return model, doc.get("config")


def save_history(history: Sequence[dict], path) -> None:
    """Write per-epoch training log entries as JSON lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in history:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
