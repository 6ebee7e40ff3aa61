"""Per-instance influence scores via inverse Hessian-vector products.

The score of training instance i is

    phi_i = -s . vec(grad_i),    s = H^{-1} grad_val,

where grad_val is the mean validation-loss gradient and H the (ridge- and
damping-shifted) training Hessian, all w.r.t. the last-layer weights.
Negative phi means the instance is beneficial: removing it would raise the
validation loss. s can be obtained by a dense exact solve (the desk-scale
oracle) or by the stochastic Neumann-series recursion, and is computed once
per epoch; per-instance scores then cost one matrix-vector product.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .errors import ContractViolation, DivergenceError, SingularHessianError
from .model import SoftmaxModel, batch_gradients, hessian_vector_product
from .sampling import sigmoid_probability

SIGN_CONVENTION = "negative-is-beneficial"


@dataclass(frozen=True)
class InverseHvp:
    """A precomputed s = H^{-1} v bound to the model it was computed from."""

    s: np.ndarray
    epoch: int = 0
    damping: float = 0.0
    converged: bool = True
    iterations: int = 1
    model_fingerprint: str = ""

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.float64)
        object.__setattr__(self, "s", s)
        if not np.all(np.isfinite(s)):
            raise ContractViolation("inverse HVP vector contains non-finite entries")
        if self.converged and self.iterations < 1:
            raise ContractViolation("a converged solve reports iterations >= 1")


@dataclass
class InfluenceReport:
    """Per-instance scores, optional per-pair scores, and keep probabilities.

    ``pi`` always equals ``sigmoid_probability(phi, alpha)``. When
    ``pairwise`` is filled, each entry is the pair's contribution to the
    mean validation loss, so a row sums back to the instance's phi.
    """

    phi: dict[int, float]
    pi: dict[int, float]
    alpha: float
    epoch: int = 0
    pairwise: dict[tuple[int, int], float] | None = None
    sign_convention: str = field(default=SIGN_CONVENTION)


def aggregate_validation_gradient(model: SoftmaxModel, Xv: np.ndarray,
                                  yv: np.ndarray) -> np.ndarray:
    """Mean validation-loss gradient w.r.t. beta, flattened to (d*K,).

    Computing this single vector (instead of one gradient per validation
    instance) is what collapses the per-pair score sum into one inner
    product per training instance.
    """
    Xv = np.atleast_2d(np.asarray(Xv, dtype=np.float64))
    if len(Xv) == 0:
        raise ContractViolation("validation set is empty")
    return batch_gradients(model, Xv, yv).mean(axis=0)


def _damped_hvp(model: SoftmaxModel, X, y, v, damping: float) -> np.ndarray:
    """(H_ce + (l2 + damping) I) v over the given batch."""
    return hessian_vector_product(model, X, y, v) + (model.l2_reg + damping) * v


def exact_inverse_hvp(model: SoftmaxModel, X: np.ndarray, y: np.ndarray,
                      v: np.ndarray, damping: float = 0.0, *,
                      epoch: int = 0, dim_cap: int = 2000) -> InverseHvp:
    """Dense-solve oracle for s = (H + damping I)^{-1} v.

    Materializes the damped Hessian column by column through HVP calls on
    basis vectors, then solves the linear system directly. Exact up to
    floating point; intended for desk-scale problems (d*K <= dim_cap).
    """
    if damping < 0:
        raise ContractViolation("damping must be nonnegative")
    if damping + model.l2_reg <= 0:
        raise ContractViolation(
            "damping + l2_reg must be positive for an invertible Hessian"
        )
    p = model.num_params
    if p > dim_cap:
        raise ContractViolation(f"d*K = {p} exceeds the dense-solve cap {dim_cap}")
    v = np.asarray(v, dtype=np.float64)
    H = np.empty((p, p))
    basis = np.zeros(p)
    for j in range(p):
        basis[j] = 1.0
        H[:, j] = _damped_hvp(model, X, y, basis, damping)
        basis[j] = 0.0
    try:
        s = np.linalg.solve(H, v)
    except np.linalg.LinAlgError as exc:
        raise SingularHessianError(
            f"damped Hessian is numerically singular ({exc}); "
            f"increase damping (currently {damping})"
        ) from exc
    if not np.all(np.isfinite(s)):
        raise SingularHessianError(
            "dense solve produced non-finite values; increase damping"
        )
    return InverseHvp(s=s, epoch=epoch, damping=damping, converged=True,
                      iterations=1, model_fingerprint=model.fingerprint())


@dataclass(frozen=True)
class LissaParams:
    """Knobs of the stochastic inverse-HVP recursion."""

    batch_size: int = 32
    max_iters: int = 5000
    scale: float = 10.0
    damping: float = 0.01
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ContractViolation("batch_size must be >= 1")
        if self.scale <= 0:
            raise ContractViolation("scale must be positive")
        if self.damping < 0:
            raise ContractViolation("damping must be nonnegative")


def lissa_inverse_hvp(model: SoftmaxModel, X: np.ndarray, y: np.ndarray,
                      v: np.ndarray, params: LissaParams, *,
                      epoch: int = 0) -> InverseHvp:
    """Stochastic estimate of s = (H + damping I)^{-1} v.

    Runs the Neumann-series recursion on the scaled, damped Hessian:

        u_0 = v;  u_t = v + (I - H_batch / scale) u_{t-1},

    sampling ``batch_size`` training instances per step (the full batch when
    batch_size >= n, which makes the recursion deterministic). Stops when
    the relative change of u drops below ``tol`` or ``max_iters`` is hit;
    the returned estimate is u / scale. ``scale`` must exceed the damped
    Hessian's spectral norm for the series to converge.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=int)
    v = np.asarray(v, dtype=np.float64)
    n = len(X)
    if n == 0:
        raise ContractViolation("training set is empty")
    gen = rngmod.generator(params.seed, "lissa", epoch)
    full_batch = params.batch_size >= n
    v_norm = float(np.linalg.norm(v))

    u = v.copy()
    iterations = 0
    converged = False
    for _ in range(params.max_iters):
        if full_batch:
            Xb, yb = X, y
        else:
            idx = gen.choice(n, size=params.batch_size, replace=False)
            Xb, yb = X[idx], y[idx]
        u_next = v + u - _damped_hvp(model, Xb, yb, u, params.damping) / params.scale
        iterations += 1
        u_norm = float(np.linalg.norm(u_next))
        if u_norm > 1e6 * max(v_norm, 1e-30):
            raise DivergenceError(
                f"inverse-HVP recursion diverged at iteration {iterations} "
                f"(||u|| = {u_norm:.3e}); increase scale or damping"
            )
        delta = float(np.linalg.norm(u_next - u))
        u = u_next
        if delta <= params.tol * max(u_norm, 1e-30):
            converged = True
            break
    return InverseHvp(s=u / params.scale, epoch=epoch, damping=params.damping,
                      converged=converged, iterations=iterations,
                      model_fingerprint=model.fingerprint())


def influence_scores(s: InverseHvp, model: SoftmaxModel, X: np.ndarray,
                     y: np.ndarray, instance_ids, alpha: float = 1.0, *,
                     epoch: int | None = None,
                     check_fingerprint: bool = True) -> InfluenceReport:
    """phi_i = -s . vec(grad_i) for every instance, plus keep probabilities.

    One matrix-vector product over the batch gradient matrix scores the
    whole batch. ``check_fingerprint=False`` permits the training loop's
    deliberate use of an epoch-stale s with the current weights.
    """
    if check_fingerprint and s.model_fingerprint \
            and s.model_fingerprint != model.fingerprint():
        raise ContractViolation(
            "inverse HVP was computed for different model weights; "
            "recompute s or pass check_fingerprint=False"
        )
    instance_ids = list(instance_ids)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if len(instance_ids) != len(X):
        raise ContractViolation(
            f"{len(instance_ids)} ids vs {len(X)} feature rows"
        )
    phi = -(batch_gradients(model, X, y) @ s.s)
    pi = sigmoid_probability(phi, alpha)
    return InfluenceReport(
        phi={i: float(p) for i, p in zip(instance_ids, phi)},
        pi={i: float(p) for i, p in zip(instance_ids, pi)},
        alpha=alpha,
        epoch=s.epoch if epoch is None else epoch,
    )


def influence_matrix(model: SoftmaxModel, train, val, method: str = "exact",
                     damping: float = 0.0,
                     lissa_params: LissaParams | None = None,
                     alpha: float = 1.0, *, max_pairs: int = 10_000,
                     epoch: int = 0) -> InfluenceReport:
    """Per-pair influence of each training instance on each validation instance.

    ``train`` and ``val`` are (X, y, instance_ids) triples. Entry (i, j) is
    -grad_j^v . H^{-1} grad_i / m (m = validation count), i.e. the pair's
    contribution to the mean validation loss; a row therefore sums to the
    same phi_i that `influence_scores` produces from the aggregated
    gradient. Interpretability tool: refuses more than ``max_pairs`` pairs.
    """
    Xt, yt, train_ids = train
    Xv, yv, val_ids = val
    Xt = np.atleast_2d(np.asarray(Xt, dtype=np.float64))
    Xv = np.atleast_2d(np.asarray(Xv, dtype=np.float64))
    train_ids, val_ids = list(train_ids), list(val_ids)
    n_pairs = len(train_ids) * len(val_ids)
    if n_pairs > max_pairs:
        raise ContractViolation(
            f"{len(train_ids)} x {len(val_ids)} = {n_pairs} pairs exceeds the "
            f"cap of {max_pairs}; pass smaller subsets or raise max_pairs"
        )
    G_val = batch_gradients(model, Xv, yv)          # (m, d*K)
    if method == "exact":
        p = model.num_params
        H = np.empty((p, p))
        basis = np.zeros(p)
        for j in range(p):
            basis[j] = 1.0
            H[:, j] = _damped_hvp(model, Xt, yt, basis, damping)
            basis[j] = 0.0
        try:
            S = np.linalg.solve(H, G_val.T)          # (d*K, m)
        except np.linalg.LinAlgError as exc:
            raise SingularHessianError(
                f"damped Hessian is numerically singular ({exc}); "
                f"increase damping"
            ) from exc
    elif method == "lissa":
        if lissa_params is None:
            raise ContractViolation("method='lissa' requires lissa_params")
        cols = [lissa_inverse_hvp(model, Xt, yt, g, lissa_params, epoch=epoch).s
                for g in G_val]
        S = np.stack(cols, axis=1)
    else:
        raise ContractViolation(f"unknown inverse-HVP method {method!r}")

    m = len(val_ids)
    G_tr = batch_gradients(model, Xt, yt)            # (n, d*K)
    pair_matrix = -(G_tr @ S) / m                    # (n, m)
    phi = pair_matrix.sum(axis=1)
    pi = sigmoid_probability(phi, alpha)
    pairwise = {
        (ti, vj): float(pair_matrix[a, b])
        for a, ti in enumerate(train_ids)
        for b, vj in enumerate(val_ids)
    }
    return InfluenceReport(
        phi={i: float(p) for i, p in zip(train_ids, phi)},
        pi={i: float(p) for i, p in zip(train_ids, pi)},
        alpha=alpha,
        epoch=epoch,
        pairwise=pairwise,
    )


def loo_retrain_oracle(X: np.ndarray, y: np.ndarray, Xv: np.ndarray,
                       yv: np.ndarray, i: int, erm_config,
                       base_model: SoftmaxModel | None = None) -> float:
    """Actual validation-loss change from retraining without instance i.

    Returns L(theta_without_i) - L(theta_full). Retrains from scratch, so
    this is a small-problem test oracle, not a production path. Pass the
    full-data model as ``base_model`` to amortize it across a sweep.
    """
    from .model import mean_loss, train_erm

    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=int)
    num_classes = max(int(y.max()) + 1, 2)
    if base_model is None:
        base_model = train_erm(X, y, erm_config, num_classes=num_classes)
    keep = np.arange(len(X)) != i
    reduced = train_erm(X[keep], y[keep], erm_config, num_classes=num_classes)
    return mean_loss(reduced, Xv, yv) - mean_loss(base_model, Xv, yv)


def write_influence_csv(report: InfluenceReport, bag_of: dict[int, int],
                        path) -> None:
    """Serialize a report to CSV: instance_id, bag_id, phi, pi, epoch."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id", "bag_id", "phi", "pi", "epoch"])
        for iid in sorted(report.phi):
            writer.writerow([iid, bag_of.get(iid, -1), repr(report.phi[iid]),
                             repr(report.pi[iid]), report.epoch])


def read_influence_csv(path) -> InfluenceReport:
    """Load a report written by `write_influence_csv` (alpha unrecoverable, set to 1)."""
    phi: dict[int, float] = {}
    pi: dict[int, float] = {}
    epoch = 0
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            iid = int(row["instance_id"])
            phi[iid] = float(row["phi"])
            pi[iid] = float(row["pi"])
            epoch = int(row["epoch"])
    return InfluenceReport(phi=phi, pi=pi, alpha=1.0, epoch=epoch)
