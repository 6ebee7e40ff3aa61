"""Selection of training instances from influence scores.

Scores are mapped to keep probabilities by a sigmoid, pi = 1/(1 + exp(a*phi)),
so beneficial (negative-phi) instances are kept more often, and the bounded
sigmoid slope caps how much an influence-estimation error can perturb the
selection. Draws are fixed-size and without replacement: per bag
(batch-in-bag, preserving every relation's representation) or pooled over
the whole training set (post-hoc, the ablation baseline).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .errors import ContractViolation

PROBABILISTIC_BIB = "probabilistic-bib"
DETERMINISTIC_BIB = "deterministic-bib"
PROBABILISTIC_POSTHOC = "probabilistic-posthoc"
SAMPLER_MODES = (PROBABILISTIC_BIB, DETERMINISTIC_BIB, PROBABILISTIC_POSTHOC)

_EXP_CLAMP = 500.0  # exp argument clamp; avoids overflow at extreme scores


@dataclass(frozen=True)
class SamplerConfig:
    alpha: float = 1.0
    ratio: float = 0.10
    mode: str = PROBABILISTIC_BIB
    seed: int = 0
    min_keep_per_bag: int = 1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ContractViolation("alpha must be positive")
        if not 0 < self.ratio <= 1:
            raise ContractViolation("ratio must lie in (0, 1]")
        if self.mode not in SAMPLER_MODES:
            raise ContractViolation(f"unknown sampler mode {self.mode!r}")
        if self.min_keep_per_bag < 1:
            raise ContractViolation("min_keep_per_bag must be >= 1")


@dataclass(frozen=True)
class SelectionResult:
    kept: frozenset[int]
    per_bag_counts: dict[int, tuple[int, int]]
    probabilities_used: dict[int, float]


def sigmoid_probability(phi, alpha: float = 1.0):
    """Keep probability pi = 1 / (1 + exp(alpha * phi)).

    Strictly decreasing in phi with pi(0) = 0.5. Accepts scalars or arrays;
    the exponent is clamped at +-500 so extreme scores saturate instead of
    overflowing, and the result is nudged inside the open interval (0, 1)
    where float64 would round it onto a boundary.
    """
    if not alpha > 0:
        raise ContractViolation("alpha must be positive")
    z = np.clip(alpha * np.asarray(phi, dtype=np.float64), -_EXP_CLAMP, _EXP_CLAMP)
    out = np.clip(1.0 / (1.0 + np.exp(z)), 1e-300, np.nextafter(1.0, 0.0))
    return float(out) if np.ndim(phi) == 0 else out


def sigmoid_derivative(phi, alpha: float = 1.0):
    """d pi / d phi = -alpha * pi * (1 - pi); |value| <= alpha/4, tight at phi = 0."""
    pi = sigmoid_probability(phi, alpha)
    out = -alpha * np.asarray(pi) * (1.0 - np.asarray(pi))
    return float(out) if np.ndim(phi) == 0 else out


def target_count(bag_size: int, ratio: float, min_keep: int = 1) -> int:
    """ceil(ratio * size), floored at min_keep and capped at the bag size."""
    # the 1e-9 slack guards float fuzz, e.g. 0.2 * 15 = 3.0000000000000004
    k = math.ceil(ratio * bag_size - 1e-9)
    return min(bag_size, max(min_keep, k))


def weighted_draw_without_replacement(ids, weights, k: int,
                                      gen: np.random.Generator) -> list[int]:
    """Draw k items without replacement, inclusion weighted by ``weights``.

    Exponential-race keys: item i gets key Exp(1)/w_i and the k smallest
    keys win, which is distributed exactly as successive draws proportional
    to w with renormalization. Ties (measure zero) break by id.
    """
    ids = np.asarray(list(ids))
    w = np.asarray(weights, dtype=np.float64)
    if len(ids) != len(w):
        raise ContractViolation("ids and weights differ in length")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ContractViolation("weights must be finite and nonnegative")
    if k >= len(ids):
        return list(ids)
    u = gen.random(len(ids))
    with np.errstate(divide="ignore"):
        keys = np.where(w > 0, -np.log(u) / np.where(w > 0, w, 1.0), np.inf)
    order = np.lexsort((ids, keys))
    return list(ids[order[:k]])


def batch_in_bag_sample(bags, config: SamplerConfig,
                        rng_seed: int | None = None) -> SelectionResult:
    """Select ceil(r * |bag|) instances inside every bag.

    ``bags`` is a sequence of (bag_id, instance_ids, phis) triples. In
    probabilistic mode the draw is weighted by pi; in deterministic mode
    the k smallest-phi instances win, ties broken by instance id. Each bag
    uses an independent substream of (rng_seed, bag_id), so the result does
    not depend on bag processing order.
    """
    if rng_seed is None:
        rng_seed = config.seed
    kept: set[int] = set()
    per_bag: dict[int, tuple[int, int]] = {}
    probs: dict[int, float] = {}
    for bag_id, instance_ids, phis in bags:
        instance_ids = list(instance_ids)
        phis = np.asarray(phis, dtype=np.float64)
        if len(instance_ids) == 0:
            raise ContractViolation(f"bag {bag_id} has no instances")
        if len(instance_ids) != len(phis):
            raise ContractViolation(
                f"bag {bag_id}: {len(instance_ids)} ids vs {len(phis)} scores"
            )
        k = target_count(len(instance_ids), config.ratio, config.min_keep_per_bag)
        if config.mode == DETERMINISTIC_BIB:
            order = np.lexsort((instance_ids, phis))
            chosen = [instance_ids[j] for j in order[:k]]
            for iid in instance_ids:
                probs[iid] = 1.0 if iid in set(chosen) else 0.0
        else:
            pi = sigmoid_probability(phis, config.alpha)
            gen = rngmod.generator(rng_seed, "bag", bag_id)
            chosen = weighted_draw_without_replacement(instance_ids, pi, k, gen)
            for iid, p in zip(instance_ids, pi):
                probs[iid] = float(p)
        kept.update(int(c) for c in chosen)
        per_bag[bag_id] = (len(chosen), len(instance_ids))
    return SelectionResult(kept=frozenset(kept), per_bag_counts=per_bag,
                           probabilities_used=probs)


def post_hoc_sample(instances, config: SamplerConfig,
                    rng_seed: int | None = None) -> SelectionResult:
    """One pooled draw of ceil(r * n) instances, ignoring bag boundaries.

    ``instances`` is a sequence of (instance_id, bag_id, phi) triples.
    Majority relations can crowd out minority bags here; per-bag counts are
    reported so that imbalance is measurable.
    """
    instances = list(instances)
    if not instances:
        raise ContractViolation("post_hoc_sample requires a nonempty dataset")
    if rng_seed is None:
        rng_seed = config.seed
    ids = [iid for iid, _, _ in instances]
    bag_ids = {iid: bid for iid, bid, _ in instances}
    phis = np.asarray([p for _, _, p in instances], dtype=np.float64)
    pi = sigmoid_probability(phis, config.alpha)
    k = target_count(len(ids), config.ratio, min_keep=1)
    gen = rngmod.generator(rng_seed, "posthoc")
    chosen = set(weighted_draw_without_replacement(ids, pi, k, gen))
    per_bag: dict[int, tuple[int, int]] = {}
    for iid in ids:
        bid = bag_ids[iid]
        got, total = per_bag.get(bid, (0, 0))
        per_bag[bid] = (got + (iid in chosen), total + 1)
    return SelectionResult(
        kept=frozenset(int(c) for c in chosen),
        per_bag_counts=per_bag,
        probabilities_used={iid: float(p) for iid, p in zip(ids, pi)},
    )


@dataclass(frozen=True)
class RobustnessBound:
    exact_bound: float
    taylor_bound: float | None


def _keep_indicator(phi: np.ndarray) -> np.ndarray:
    """Deterministic keep rule: drop every instance with phi > 0."""
    return (phi <= 0).astype(np.float64)


def robustness_bound(phi_true, phi_hat, pairwise_phi, alpha: float = 1.0,
                     mode: str = "sigmoid") -> RobustnessBound:
    """Worst-case validation-loss deviation under misestimated scores.

    exact_bound  = sum_i (pi(phi_hat_i) - pi(phi_i))^2 * sum_j phi_ij^2
    taylor_bound = sum_i ((phi_hat_i - phi_i) * pi'(phi_i))^2 * sum_j phi_ij^2

    The overall constant is normalized to 1, so only comparisons between
    sampling modes are meaningful. In deterministic mode pi is the 0/1
    threshold indicator and the Taylor form is undefined.
    """
    phi_true = np.asarray(phi_true, dtype=np.float64)
    phi_hat = np.asarray(phi_hat, dtype=np.float64)
    pairwise = np.atleast_2d(np.asarray(pairwise_phi, dtype=np.float64))
    if phi_true.shape != phi_hat.shape:
        raise ContractViolation("phi_true and phi_hat differ in shape")
    if pairwise.shape[0] != phi_true.shape[0]:
        raise ContractViolation(
            f"pairwise matrix has {pairwise.shape[0]} rows for "
            f"{phi_true.shape[0]} instances"
        )
    row_sq = (pairwise ** 2).sum(axis=1)
    if mode == "deterministic":
        diff = _keep_indicator(phi_hat) - _keep_indicator(phi_true)
        return RobustnessBound(float(np.sum(diff ** 2 * row_sq)), None)
    if mode != "sigmoid":
        raise ContractViolation(f"unknown robustness mode {mode!r}")
    diff = sigmoid_probability(phi_hat, alpha) - sigmoid_probability(phi_true, alpha)
    exact = float(np.sum(diff ** 2 * row_sq))
    lin = (phi_hat - phi_true) * sigmoid_derivative(phi_true, alpha)
    taylor = float(np.sum(lin ** 2 * row_sq))
    return RobustnessBound(exact, taylor)


def write_selection_csv(result: SelectionResult, phis: dict[int, float],
                        bag_of: dict[int, int], path, epoch: int = 0,
                        alpha: float = 1.0) -> None:
    """Serialize a selection: instance_id, bag_id, phi, pi, kept, epoch."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id", "bag_id", "phi", "pi", "kept", "epoch"])
        for iid in sorted(phis):
            phi = phis[iid]
            pi = result.probabilities_used.get(
                iid, sigmoid_probability(phi, alpha))
            writer.writerow([iid, bag_of.get(iid, -1), repr(float(phi)),
                             repr(float(pi)), int(iid in result.kept), epoch])
