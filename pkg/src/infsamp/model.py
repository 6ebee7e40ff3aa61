"""Multi-class softmax classifier over fixed feature vectors.

All derivatives are closed-form and taken with respect to the last-layer
weight matrix ``beta`` (d x K) only; an optional fixed linear featurizer maps
raw inputs into the d-dimensional model space and is frozen throughout.
This is the differentiable substrate the influence machinery consumes.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DivergenceError

_LOG_CLAMP = 1e-300  # keeps -log(p) finite when a prediction saturates


@dataclass(frozen=True)
class SoftmaxModel:
    """Last-layer weights plus the (optional) frozen featurizer.

    ``beta`` has shape (d, K) where d is the model-space feature dimension
    and K >= 2 the number of classes. ``featurizer``, when present, is a
    fixed matrix (d_raw, d) applied as ``x @ featurizer`` before every dot
    product. ``l2_reg`` records the ridge strength the model was trained
    with; influence solves add it to the Hessian diagonal.
    """

    beta: np.ndarray
    featurizer: np.ndarray | None = None
    l2_reg: float = 0.0

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        object.__setattr__(self, "beta", beta)
        if beta.ndim != 2 or beta.shape[1] < 2:
            raise ContractViolation(
                f"beta must be (d, K) with K >= 2, got shape {beta.shape}"
            )
        if not np.all(np.isfinite(beta)):
            raise ContractViolation("beta contains non-finite entries")
        if self.featurizer is not None:
            feat = np.asarray(self.featurizer, dtype=np.float64)
            object.__setattr__(self, "featurizer", feat)
            if feat.ndim != 2 or feat.shape[1] != beta.shape[0]:
                raise ContractViolation(
                    f"featurizer {feat.shape} incompatible with beta {beta.shape}"
                )

    @property
    def feature_dim(self) -> int:
        return self.beta.shape[0]

    @property
    def num_classes(self) -> int:
        return self.beta.shape[1]

    @property
    def num_params(self) -> int:
        return self.beta.size

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Apply the frozen featurizer (identity when absent)."""
        X = np.asarray(X, dtype=np.float64)
        if self.featurizer is None:
            return X
        return X @ self.featurizer

    def fingerprint(self) -> str:
        """Hash binding derived quantities (e.g. an inverse HVP) to these weights."""
        h = hashlib.sha256()
        h.update(str(self.beta.shape).encode())
        h.update(self.beta.tobytes())
        h.update(np.float64(self.l2_reg).tobytes())
        if self.featurizer is not None:
            h.update(self.featurizer.tobytes())
        return h.hexdigest()


def one_hot(class_index: int, num_classes: int) -> np.ndarray:
    if not 0 <= class_index < num_classes:
        raise ContractViolation(
            f"class index {class_index} outside [0, {num_classes})"
        )
    y = np.zeros(num_classes)
    y[class_index] = 1.0
    return y


def _label_index(y, num_classes: int) -> int:
    """Accept either a class index or a one-hot vector."""
    if np.ndim(y) == 0:
        idx = int(y)
        if not 0 <= idx < num_classes:
            raise ContractViolation(f"label {idx} outside [0, {num_classes})")
        return idx
    y = np.asarray(y)
    if y.shape != (num_classes,) or not np.isclose(y.sum(), 1.0):
        raise ContractViolation("one-hot label must have exactly one unit entry")
    return int(np.argmax(y))


def _check_features(model: SoftmaxModel, X: np.ndarray) -> np.ndarray:
    X = model.transform(X)
    want = model.feature_dim
    got = X.shape[-1] if X.ndim else None
    if got != want:
        raise ContractViolation(f"feature dimension {got} != model dimension {want}")
    if not np.all(np.isfinite(X)):
        raise ContractViolation("features contain non-finite entries")
    return X


def batch_predict_proba(model: SoftmaxModel, X: np.ndarray) -> np.ndarray:
    """Softmax probabilities for a batch, shape (n, K).

    Logits are shifted by their row max before exponentiation, so the
    computation never overflows.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    X = _check_features(model, X)
    logits = X @ model.beta
    logits -= logits.max(axis=1, keepdims=True)
    expl = np.exp(logits)
    return expl / expl.sum(axis=1, keepdims=True)


def predict_proba(model: SoftmaxModel, x: np.ndarray) -> np.ndarray:
    """Class probability vector (K,) for one instance."""
    return batch_predict_proba(model, np.asarray(x))[0]


def batch_losses(model: SoftmaxModel, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-instance cross-entropy, shape (n,)."""
    P = batch_predict_proba(model, X)
    y = np.asarray(y, dtype=int)
    p_true = P[np.arange(len(P)), y]
    return -np.log(np.maximum(p_true, _LOG_CLAMP))


def cross_entropy_loss(model: SoftmaxModel, x: np.ndarray, y) -> float:
    """-log p(y | x); the predicted probability is clamped at 1e-300."""
    idx = _label_index(y, model.num_classes)
    return float(batch_losses(model, np.atleast_2d(x), np.array([idx]))[0])


def mean_loss(model: SoftmaxModel, X: np.ndarray, y: np.ndarray,
              l2_reg: float = 0.0) -> float:
    """Mean cross-entropy plus an optional ridge term l2/2 * ||beta||^2."""
    loss = float(batch_losses(model, X, y).mean())
    if l2_reg:
        loss += 0.5 * l2_reg * float(np.sum(model.beta ** 2))
    return loss


def batch_gradients(model: SoftmaxModel, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-instance loss gradients w.r.t. beta, flattened to shape (n, d*K).

    Row i is vec(x_i (p_i - y_i)^T), computed for the whole batch with one
    matrix product; this is the constant-time batch-gradient path.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    P = batch_predict_proba(model, X)
    Xm = model.transform(X)
    y = np.asarray(y, dtype=int)
    R = P.copy()
    R[np.arange(len(R)), y] -= 1.0
    # outer(x_i, r_i) for all i: (n, d, 1) * (n, 1, K)
    G = Xm[:, :, None] * R[:, None, :]
    return G.reshape(len(Xm), -1)


def last_layer_gradient(model: SoftmaxModel, x: np.ndarray, y) -> np.ndarray:
    """Gradient of the cross-entropy w.r.t. beta for one instance, shape (d, K)."""
    idx = _label_index(y, model.num_classes)
    g = batch_gradients(model, np.atleast_2d(x), np.array([idx]))[0]
    return g.reshape(model.feature_dim, model.num_classes)


def hessian_vector_product(model: SoftmaxModel, X: np.ndarray, y: np.ndarray,
                           v: np.ndarray) -> np.ndarray:
    """Exact HVP of the mean cross-entropy over the batch, w.r.t. beta.

    Per instance, with p the predicted probabilities and V the (d, K)
    reshape of v: H_i v = x ((diag(p) - p p^T)(V^T x))^T. The batch result
    is the mean; no sampling or finite differencing is involved. The label
    y does not enter the softmax Hessian but is kept for interface symmetry
    with the gradient path.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if len(X) == 0:
        raise ContractViolation("hessian_vector_product requires a nonempty batch")
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.num_params,):
        raise ContractViolation(
            f"v has shape {v.shape}, expected ({model.num_params},)"
        )
    if not np.all(np.isfinite(v)):
        raise ContractViolation("v contains non-finite entries")
    Xm = _check_features(model, X)
    P = batch_predict_proba(model, X)
    V = v.reshape(model.feature_dim, model.num_classes)
    A = Xm @ V                      # (n, K) rows V^T x
    PA = P * A
    B = PA - P * PA.sum(axis=1, keepdims=True)   # rows (diag(p) - p p^T) V^T x
    H_v = Xm.T @ B / len(Xm)        # (d, K)
    return H_v.ravel()


@dataclass(frozen=True)
class ErmConfig:
    """Optimizer settings for the full-batch empirical risk minimizer."""

    l2_reg: float = 1e-2
    grad_tol: float = 1e-8
    max_iters: int = 20000
    step0: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    seed: int = 0


def train_erm(X: np.ndarray, y: np.ndarray, config: ErmConfig = ErmConfig(),
              featurizer: np.ndarray | None = None,
              num_classes: int | None = None) -> SoftmaxModel:
    """Minimize mean cross-entropy + l2/2 ||beta||^2 by gradient descent.

    Full-batch descent with Armijo backtracking; runs until the gradient
    norm drops below ``grad_tol`` or ``max_iters`` is hit. Deterministic:
    beta starts at zero and every operation is order-fixed, so identical
    inputs give bitwise-identical weights.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=int)
    if len(X) == 0:
        raise ContractViolation("train_erm requires at least one instance")
    if len(X) != len(y):
        raise ContractViolation(f"{len(X)} feature rows vs {len(y)} labels")
    if num_classes is None:
        num_classes = max(int(y.max()) + 1, 2)
    if np.unique(y).size < 2:
        warnings.warn("training set contains a single class; the ridge term "
                      "keeps beta finite but the classifier is degenerate",
                      stacklevel=2)

    if featurizer is not None:
        featurizer = np.asarray(featurizer, dtype=np.float64)
        dim = featurizer.shape[1]
    else:
        dim = X.shape[1]
    model = SoftmaxModel(np.zeros((dim, num_classes)), featurizer=featurizer,
                         l2_reg=config.l2_reg)

    def loss_and_grad(m: SoftmaxModel):
        val = mean_loss(m, X, y, l2_reg=config.l2_reg)
        g = batch_gradients(m, X, y).mean(axis=0).reshape(m.beta.shape)
        g = g + config.l2_reg * m.beta
        return val, g

    loss, grad = loss_and_grad(model)
    step = config.step0
    for _ in range(config.max_iters):
        if not np.isfinite(loss):
            raise DivergenceError(
                f"non-finite training loss {loss!r}; last gradient norm "
                f"{np.linalg.norm(grad):.3e}"
            )
        gnorm2 = float(np.sum(grad ** 2))
        if np.sqrt(gnorm2) < config.grad_tol:
            break
        # Armijo backtracking from a warm-started step size; a step must
        # strictly decrease the loss, or the search has hit the floating
        # point floor and no better iterate exists.
        step = min(step * 2.0, 64.0)
        cand = None
        while step >= 1e-18:
            trial = SoftmaxModel(model.beta - step * grad,
                                 featurizer=model.featurizer,
                                 l2_reg=config.l2_reg)
            trial_loss = mean_loss(trial, X, y, l2_reg=config.l2_reg)
            if trial_loss < loss and \
                    trial_loss <= loss - config.armijo * step * gnorm2:
                cand = trial
                break
            step *= config.backtrack
        if cand is None:
            break
        model = cand
        loss, grad = loss_and_grad(model)
    return model


def accuracy(model: SoftmaxModel, X: np.ndarray, y: np.ndarray) -> float:
    P = batch_predict_proba(model, X)
    return float(np.mean(P.argmax(axis=1) == np.asarray(y, dtype=int)))


def save_model(model: SoftmaxModel, path) -> None:
    """Persist weights (and the linear featurizer, if any) as .npz."""
    payload = {"beta": model.beta, "l2_reg": np.float64(model.l2_reg)}
    if model.featurizer is not None:
        payload["featurizer"] = model.featurizer
    np.savez(path, **payload)


def load_model(path) -> SoftmaxModel:
    with np.load(path) as data:
        return SoftmaxModel(
            beta=data["beta"],
            featurizer=data["featurizer"] if "featurizer" in data else None,
            l2_reg=float(data["l2_reg"]),
        )
