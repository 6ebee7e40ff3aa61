"""Influence-subsampled training loop and the classical baselines.

Each epoch walks the training bags in shuffled batches. For the influence
strategies, every batch scores its instances against the inverse-HVP vector
s computed at the end of the previous epoch, converts scores to keep
probabilities, samples ceil(r * |bag|) instances per bag (or one pooled
post-hoc draw per epoch), and takes one SGD step on the union. s is
refreshed after every epoch except the last, whose s would never be
consumed; epoch 1 runs uniform (phi = 0) unless epoch1_policy asks for a
warm s from the initial weights.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as rngmod
from .data import Dataset
from .errors import ContractViolation, DivergenceError
from .influence import (InverseHvp, LissaParams, aggregate_validation_gradient,
                        exact_inverse_hvp, lissa_inverse_hvp)
from .model import SoftmaxModel, batch_gradients, batch_losses, batch_predict_proba
from .sampling import (DETERMINISTIC_BIB, PROBABILISTIC_BIB, SamplerConfig,
                       SelectionResult, batch_in_bag_sample, post_hoc_sample)

INFLUENCE_P_BIB = "influence-p-bib"
INFLUENCE_D_BIB = "influence-d-bib"
INFLUENCE_P_PH = "influence-p-ph"
FULL = "full"
ONE = "one"
AVE = "ave"
INFLUENCE_STRATEGIES = (INFLUENCE_P_BIB, INFLUENCE_D_BIB, INFLUENCE_P_PH)
BASELINE_STRATEGIES = (FULL, ONE, AVE)
STRATEGIES = INFLUENCE_STRATEGIES + BASELINE_STRATEGIES


@dataclass(frozen=True)
class RunConfig:
    epochs: int = 30
    batch_bags: int = 16
    strategy: str = INFLUENCE_P_BIB
    sampler: SamplerConfig = SamplerConfig()
    lissa: LissaParams = LissaParams()
    learning_rate: float = 0.1
    lambda_reg: float = 1e-2
    seed: int = 0
    epoch1_policy: str = "uniform"      # or "warm-s"
    fallback_to_exact: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch_bags < 1:
            raise ContractViolation("epochs and batch_bags must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ContractViolation(f"unknown strategy {self.strategy!r}")
        if self.epoch1_policy not in ("uniform", "warm-s"):
            raise ContractViolation(
                f"unknown epoch1_policy {self.epoch1_policy!r}"
            )
        if self.learning_rate <= 0:
            raise ContractViolation("learning_rate must be positive")
        if self.lambda_reg < 0:
            raise ContractViolation("lambda_reg must be nonnegative")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    val_loss: float
    subset_train_loss: float
    n_selected: int
    clean_fraction_selected: float
    lissa_converged: bool | None
    lissa_iterations: int | None


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    wall_clock: float = 0.0
    final_inverse_hvp: InverseHvp | None = None
    last_selection: SelectionResult | None = None
    last_phis: dict[int, float] | None = None


def _chunks(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i:i + size]


class _Trainer:
    def __init__(self, train: Dataset, val: Dataset, config: RunConfig):
        self.config = config
        train_ids = train.ids("train")
        if not train_ids:
            raise ContractViolation("training dataset has no train split")
        if not val.instances:
            raise ContractViolation("validation dataset is empty")
        self.ids = train_ids
        self.X = train.features(train_ids)
        self.y = train.labels(train_ids)
        gold = train.gold(train_ids)
        self.clean = None if gold is None else (gold == self.y)
        self.row_of = {iid: r for r, iid in enumerate(train_ids)}
        self.bags = train.bags_in_split("train")
        self.bag_of = {i: b.bag_id for b in self.bags for i in b.instance_ids}
        self.Xv, self.yv, _ = val.arrays(None)
        K = max(train.num_relations, val.num_relations, 2)
        self.model = SoftmaxModel(np.zeros((self.X.shape[1], K)),
                                  l2_reg=config.lambda_reg)
        self.s: InverseHvp | None = None

    def _phis(self, rows) -> np.ndarray:
        """Scores for training rows against the epoch-stale s (0 without s)."""
        if self.s is None:
            return np.zeros(len(rows))
        G = batch_gradients(self.model, self.X[rows], self.y[rows])
        return -(G @ self.s.s)

    def _refresh_s(self, epoch: int):
        v = aggregate_validation_gradient(self.model, self.Xv, self.yv)
        params = replace(self.config.lissa, seed=self.config.seed)
        try:
            self.s = lissa_inverse_hvp(self.model, self.X, self.y, v,
                                       params, epoch=epoch)
        except DivergenceError:
            if not self.config.fallback_to_exact:
                raise
            self.s = exact_inverse_hvp(self.model, self.X, self.y, v,
                                       damping=self.config.lissa.damping,
                                       epoch=epoch)

    def _step(self, Xb: np.ndarray, yb: np.ndarray, lr: float):
        grad = batch_gradients(self.model, Xb, yb).mean(axis=0) \
            .reshape(self.model.beta.shape)
        grad = grad + self.config.lambda_reg * self.model.beta
        beta = self.model.beta - lr * grad
        if not np.all(np.isfinite(beta)):
            raise DivergenceError(
                f"non-finite weights after a step with lr={lr:.3g}; "
                "reduce the learning rate"
            )
        self.model = SoftmaxModel(beta, featurizer=self.model.featurizer,
                                  l2_reg=self.config.lambda_reg)

    def run(self) -> tuple[SoftmaxModel, TrainHistory]:
        config = self.config
        history = TrainHistory()
        started = time.perf_counter()
        if config.strategy in INFLUENCE_STRATEGIES \
                and config.epoch1_policy == "warm-s":
            self._refresh_s(epoch=0)

        ave_X = ave_y = None
        if config.strategy == AVE:
            ave_X = np.stack([self.X[[self.row_of[i] for i in b.instance_ids]]
                              .mean(axis=0) for b in self.bags])
            ave_y = np.asarray([b.relation_label for b in self.bags], dtype=int)

        for epoch in range(1, config.epochs + 1):
            lr = config.learning_rate / math.sqrt(epoch)
            order = rngmod.generator(config.seed, "shuffle", epoch) \
                .permutation(len(self.bags))
            selected: list[int] = []       # AVE stores bag rows, else instance ids
            phis_epoch: dict[int, float] = {}
            bag_counts: dict[int, tuple[int, int]] = {}
            probs_used: dict[int, float] = {}
            posthoc_result = None

            if config.strategy == INFLUENCE_P_PH:
                rows = list(range(len(self.ids)))
                phis = self._phis(rows)
                phis_epoch = dict(zip(self.ids, (float(p) for p in phis)))
                entries = [(iid, self.bag_of[iid], phis_epoch[iid])
                           for iid in self.ids]
                posthoc_result = post_hoc_sample(
                    entries, config.sampler,
                    rng_seed=rngmod.derive_int(config.seed, "sampling", epoch))
                pool = set(posthoc_result.kept)

            for batch_rows in _chunks(list(order), config.batch_bags):
                batch_bags = [self.bags[i] for i in batch_rows]
                if config.strategy == AVE:
                    rows = [int(r) for r in batch_rows]
                    self._step(ave_X[rows], ave_y[rows], lr)
                    selected.extend(rows)
                    continue

                if config.strategy in (INFLUENCE_P_BIB, INFLUENCE_D_BIB):
                    triples = []
                    for bag in batch_bags:
                        rows = [self.row_of[i] for i in bag.instance_ids]
                        phis = self._phis(rows)
                        triples.append((bag.bag_id, list(bag.instance_ids), phis))
                        phis_epoch.update(
                            zip(bag.instance_ids, (float(p) for p in phis)))
                    mode = (DETERMINISTIC_BIB
                            if config.strategy == INFLUENCE_D_BIB
                            else PROBABILISTIC_BIB)
                    result = batch_in_bag_sample(
                        triples, replace(config.sampler, mode=mode),
                        rng_seed=rngmod.derive_int(config.seed, "sampling",
                                                   epoch))
                    bag_counts.update(result.per_bag_counts)
                    probs_used.update(result.probabilities_used)
                    ids = [i for b in batch_bags for i in b.instance_ids
                           if i in result.kept]
                elif config.strategy == INFLUENCE_P_PH:
                    ids = [i for b in batch_bags for i in b.instance_ids
                           if i in pool]
                elif config.strategy == FULL:
                    ids = [i for b in batch_bags for i in b.instance_ids]
                elif config.strategy == ONE:
                    ids = []
                    for bag in batch_bags:
                        rows = [self.row_of[i] for i in bag.instance_ids]
                        P = batch_predict_proba(self.model, self.X[rows])
                        best = int(np.argmax(P[:, bag.relation_label]))
                        ids.append(bag.instance_ids[best])
                else:
                    raise ContractViolation(f"unhandled strategy "
                                            f"{config.strategy!r}")
                selected.extend(ids)
                if ids:
                    rows = [self.row_of[i] for i in ids]
                    self._step(self.X[rows], self.y[rows], lr)

            record = self._epoch_record(epoch, selected, ave_X, ave_y)
            if config.strategy in INFLUENCE_STRATEGIES and epoch < config.epochs:
                self._refresh_s(epoch)
                record = replace(record, lissa_converged=self.s.converged,
                                 lissa_iterations=self.s.iterations)
            history.records.append(record)

            if config.strategy in (INFLUENCE_P_BIB, INFLUENCE_D_BIB):
                history.last_selection = SelectionResult(
                    kept=frozenset(selected), per_bag_counts=bag_counts,
                    probabilities_used=probs_used)
                history.last_phis = dict(phis_epoch)
            elif config.strategy == INFLUENCE_P_PH:
                history.last_selection = posthoc_result
                history.last_phis = dict(phis_epoch)

        history.final_inverse_hvp = self.s
        history.wall_clock = time.perf_counter() - started
        return self.model, history

    def _epoch_record(self, epoch, selected, ave_X, ave_y) -> EpochRecord:
        val_loss = float(batch_losses(self.model, self.Xv, self.yv).mean())
        if not np.isfinite(val_loss):
            raise DivergenceError(f"validation loss diverged at epoch {epoch}")
        if self.config.strategy == AVE:
            subset_loss = float(batch_losses(
                self.model, ave_X[selected], ave_y[selected]).mean()) \
                if selected else float("nan")
            clean = float("nan")
        else:
            rows = [self.row_of[i] for i in selected]
            subset_loss = float(batch_losses(
                self.model, self.X[rows], self.y[rows]).mean()) \
                if rows else float("nan")
            clean = float(np.mean(self.clean[rows])) \
                if self.clean is not None and rows else float("nan")
        return EpochRecord(epoch=epoch, val_loss=val_loss,
                           subset_train_loss=subset_loss,
                           n_selected=len(selected),
                           clean_fraction_selected=clean,
                           lissa_converged=None, lissa_iterations=None)


def influence_train(train: Dataset, val: Dataset,
                    config: RunConfig) -> tuple[SoftmaxModel, TrainHistory]:
    """Run the influence-subsampled loop (BiB or post-hoc, P or D)."""
    if config.strategy not in INFLUENCE_STRATEGIES:
        raise ContractViolation(
            f"influence_train expects one of {INFLUENCE_STRATEGIES}"
        )
    return _Trainer(train, val, config).run()


def baseline_train(train: Dataset, val: Dataset,
                   config: RunConfig) -> tuple[SoftmaxModel, TrainHistory]:
    """Run a non-influence baseline: full, one-per-bag, or bag-average."""
    if config.strategy not in BASELINE_STRATEGIES:
        raise ContractViolation(
            f"baseline_train expects one of {BASELINE_STRATEGIES}"
        )
    return _Trainer(train, val, config).run()


def train(train_ds: Dataset, val_ds: Dataset,
          config: RunConfig) -> tuple[SoftmaxModel, TrainHistory]:
    """Dispatch on config.strategy."""
    if config.strategy in INFLUENCE_STRATEGIES:
        return influence_train(train_ds, val_ds, config)
    return baseline_train(train_ds, val_ds, config)


def write_history_csv(history: TrainHistory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "val_loss", "subset_train_loss", "n_selected",
                    "clean_fraction_selected", "lissa_converged",
                    "lissa_iterations"])
        for r in history.records:
            w.writerow([
                r.epoch, repr(r.val_loss), repr(r.subset_train_loss),
                r.n_selected, repr(r.clean_fraction_selected),
                "" if r.lissa_converged is None else int(r.lissa_converged),
                "" if r.lissa_iterations is None else r.lissa_iterations,
            ])


def read_history_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]
