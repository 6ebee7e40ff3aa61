"""Bag-structured datasets: synthetic generation, JSONL ingestion, splits.

A bag groups all instances that share an entity pair and carries a single
relation label; under distant-supervision labeling every member instance
inherits that label as its observed label, while a (possibly different)
gold label records the truth on synthetic data. Class 0 is the NA ("no
relation") class by convention and is excluded from positive ranking in
evaluation.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import rng as rngmod
from .errors import ContractViolation, SchemaError

SPLITS = ("train", "validation", "test")

_SCHEMA_FIELDS = {
    "instance_id", "bag_id", "entity_pair_id", "relation", "features",
    "gold_relation", "split",
}


@dataclass(frozen=True)
class Instance:
    instance_id: int
    bag_id: int
    features: np.ndarray
    observed_label: int
    gold_label: int | None = None
    split: str = "train"

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", feats)
        if feats.ndim != 1:
            raise ContractViolation(
                f"instance {self.instance_id}: features must be a vector"
            )
        if not np.all(np.isfinite(feats)):
            raise ContractViolation(
                f"instance {self.instance_id}: non-finite feature values"
            )
        if self.split not in SPLITS:
            raise ContractViolation(
                f"instance {self.instance_id}: unknown split {self.split!r}"
            )

    @property
    def is_clean(self) -> bool | None:
        """Whether gold agrees with the observed label (None without gold)."""
        if self.gold_label is None:
            return None
        return self.gold_label == self.observed_label


@dataclass(frozen=True)
class Bag:
    bag_id: int
    relation_label: int
    entity_pair_id: str
    instance_ids: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "instance_ids", tuple(self.instance_ids))
        if not self.instance_ids:
            raise ContractViolation(f"bag {self.bag_id} is empty")

    def __len__(self) -> int:
        return len(self.instance_ids)


class Dataset:
    """Immutable-by-convention container of instances and their bags."""

    def __init__(self, instances, bags=None, num_relations: int | None = None):
        inst_list = sorted(instances, key=lambda i: i.instance_id)
        if not inst_list:
            raise ContractViolation("dataset has no instances")
        self.instances: dict[int, Instance] = {}
        dims = set()
        for inst in inst_list:
            if inst.instance_id in self.instances:
                raise ContractViolation(f"duplicate instance_id {inst.instance_id}")
            self.instances[inst.instance_id] = inst
            dims.add(inst.features.shape[0])
        if len(dims) != 1:
            raise ContractViolation(f"inconsistent feature dimensions: {sorted(dims)}")
        self.feature_dim = dims.pop()

        if bags is None:
            bags = _bags_from_instances(inst_list)
        self.bags: dict[int, Bag] = {b.bag_id: b for b in
                                     sorted(bags, key=lambda b: b.bag_id)}
        self._validate_bags()

        labels = [i.observed_label for i in inst_list]
        labels += [i.gold_label for i in inst_list if i.gold_label is not None]
        inferred = max(labels) + 1
        self.num_relations = num_relations if num_relations is not None else inferred
        if self.num_relations < inferred:
            raise ContractViolation(
                f"num_relations={self.num_relations} but labels reach {inferred - 1}"
            )

    def _validate_bags(self):
        seen = set()
        for bag in self.bags.values():
            for iid in bag.instance_ids:
                inst = self.instances.get(iid)
                if inst is None:
                    raise ContractViolation(
                        f"bag {bag.bag_id} references missing instance {iid}"
                    )
                if inst.bag_id != bag.bag_id:
                    raise ContractViolation(
                        f"instance {iid} claims bag {inst.bag_id}, "
                        f"listed in bag {bag.bag_id}"
                    )
                if inst.observed_label != bag.relation_label:
                    raise ContractViolation(
                        f"instance {iid} observed label {inst.observed_label} "
                        f"!= bag {bag.bag_id} relation {bag.relation_label}"
                    )
                seen.add(iid)
        missing = set(self.instances) - seen
        if missing:
            raise ContractViolation(
                f"instances missing from any bag: {sorted(missing)[:5]}..."
            )

    # ---- views -----------------------------------------------------------

    def ids(self, split: str | None = None) -> list[int]:
        if split is None:
            return list(self.instances)
        return [i for i, inst in self.instances.items() if inst.split == split]

    def bags_in_split(self, split: str) -> list[Bag]:
        out = []
        for bag in self.bags.values():
            members = [i for i in bag.instance_ids
                       if self.instances[i].split == split]
            if members:
                out.append(replace(bag, instance_ids=tuple(members)))
        return out

    def features(self, ids) -> np.ndarray:
        return np.stack([self.instances[i].features for i in ids]) \
            if len(ids) else np.empty((0, self.feature_dim))

    def labels(self, ids) -> np.ndarray:
        return np.asarray([self.instances[i].observed_label for i in ids], dtype=int)

    def gold(self, ids) -> np.ndarray | None:
        vals = [self.instances[i].gold_label for i in ids]
        if any(v is None for v in vals):
            return None
        return np.asarray(vals, dtype=int)

    def arrays(self, split: str | None = None):
        """(X, y, ids) for a split, in instance-id order."""
        ids = self.ids(split)
        return self.features(ids), self.labels(ids), ids

    def bag_of(self, instance_id: int) -> int:
        return self.instances[instance_id].bag_id

    def clean_fraction(self, split: str | None = None) -> float:
        flags = [self.instances[i].is_clean for i in self.ids(split)]
        flags = [f for f in flags if f is not None]
        if not flags:
            return float("nan")
        return sum(flags) / len(flags)

    def noise_labels(self, ids) -> np.ndarray:
        """1 where gold disagrees with observed (the noisy instances)."""
        gold = self.gold(ids)
        if gold is None:
            raise ContractViolation("dataset has no gold labels")
        return (gold != self.labels(ids)).astype(int)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.num_relations != other.num_relations:
            return False
        if set(self.instances) != set(other.instances):
            return False
        for iid, inst in self.instances.items():
            o = other.instances[iid]
            if (inst.bag_id, inst.observed_label, inst.gold_label, inst.split) \
                    != (o.bag_id, o.observed_label, o.gold_label, o.split):
                return False
            if not np.array_equal(inst.features, o.features):
                return False
        return self.bags == other.bags

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for iid in sorted(self.instances):
            inst = self.instances[iid]
            h.update(json.dumps(_record_of(inst, self.bags[inst.bag_id]),
                                sort_keys=True).encode())
        return h.hexdigest()


def _bags_from_instances(instances) -> list[Bag]:
    grouped: dict[int, list[Instance]] = {}
    for inst in instances:
        grouped.setdefault(inst.bag_id, []).append(inst)
    bags = []
    for bag_id, members in grouped.items():
        labels = {m.observed_label for m in members}
        if len(labels) != 1:
            raise ContractViolation(
                f"bag {bag_id} mixes observed labels {sorted(labels)}"
            )
        bags.append(Bag(bag_id=bag_id, relation_label=labels.pop(),
                        entity_pair_id=f"pair-{bag_id:05d}",
                        instance_ids=tuple(m.instance_id for m in members)))
    return bags


# ---- synthetic generation -------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """Controls for the synthetic distant-supervision generator.

    ``noise_rate`` is the fraction of positive-bag instances whose gold
    label differs from the bag label (hit exactly per bag by rounding);
    ``na_fraction`` the fraction of bags labeled NA (class 0). A
    mislabeled instance's gold label is NA with probability
    ``na_noise_weight`` (false positives that express no relation),
    otherwise uniform over the other positive relations. Bag sizes are
    drawn in [min, max] with a shape exponent (>1 skews small).
    ``relation_weights``, when given, apportions positive bags over
    relations 1..K-1 exactly (largest remainder); every positive relation
    receives at least one bag.
    """

    num_relations: int
    feature_dim: int
    num_bags: int
    bag_size_min: int = 2
    bag_size_max: int = 10
    bag_size_shape: float = 1.0
    noise_rate: float = 0.0
    na_fraction: float = 0.0
    na_noise_weight: float = 0.7
    class_separation: float = 3.0
    relation_weights: tuple[float, ...] | None = None
    test_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_relations < 2:
            raise ContractViolation("need >= 2 relations (class 0 is NA)")
        if self.feature_dim < 1 or self.num_bags < 1:
            raise ContractViolation("feature_dim and num_bags must be positive")
        if not 0 <= self.noise_rate < 1:
            raise ContractViolation("noise_rate must lie in [0, 1)")
        if not 0 <= self.na_fraction < 1:
            raise ContractViolation("na_fraction must lie in [0, 1)")
        if not 0 <= self.na_noise_weight <= 1:
            raise ContractViolation("na_noise_weight must lie in [0, 1]")
        if not 1 <= self.bag_size_min <= self.bag_size_max:
            raise ContractViolation("need 1 <= bag_size_min <= bag_size_max")
        if self.bag_size_shape <= 0:
            raise ContractViolation("bag_size_shape must be positive")
        if not 0 <= self.test_fraction < 1:
            raise ContractViolation("test_fraction must lie in [0, 1)")
        if self.class_separation <= 0:
            raise ContractViolation("class_separation must be positive")
        if self.relation_weights is not None:
            w = tuple(float(x) for x in self.relation_weights)
            if len(w) != self.num_relations - 1 or any(x <= 0 for x in w):
                raise ContractViolation(
                    "relation_weights needs one positive weight per "
                    "positive relation"
                )
            object.__setattr__(self, "relation_weights", w)


def _apportion(total: int, weights) -> list[int]:
    """Integer counts proportional to weights (largest remainder), each >= 1."""
    weights = np.asarray(weights, dtype=np.float64)
    raw = total * weights / weights.sum()
    counts = np.floor(raw).astype(int)
    counts = np.maximum(counts, 1)
    while counts.sum() > total:
        counts[int(np.argmax(counts))] -= 1
    rem = raw - np.floor(raw)
    order = np.lexsort((np.arange(len(weights)), -rem))
    i = 0
    while counts.sum() < total:
        counts[order[i % len(order)]] += 1
        i += 1
    if np.any(counts < 1):
        raise ContractViolation(
            f"cannot place >= 1 bag per positive relation with {total} bags"
        )
    return counts.tolist()


def generate_synthetic_ds(spec: NoiseSpec) -> Dataset:
    """Deterministic synthetic bag corpus with controllable label noise.

    Relation prototypes sit at class_separation/sqrt(2) times random unit
    directions; instances are their prototype plus unit Gaussian noise. In
    each positive bag, round(noise_rate * size) instances (capped at
    size - 1, so at least one correctly labeled instance always remains)
    get a gold label drawn from the NA/other classes (NA with probability
    na_noise_weight) and features from that class's prototype. NA bags are
    generated clean.
    """
    if spec.noise_rate >= 1 - 1 / spec.bag_size_min:
        raise ContractViolation(
            f"noise_rate {spec.noise_rate} >= 1 - 1/{spec.bag_size_min}: "
            "a bag of minimum size could lose its last clean instance"
        )
    gen = rngmod.generator(spec.seed, "generate")
    K, d = spec.num_relations, spec.feature_dim

    raw = gen.standard_normal((K, d))
    prototypes = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    prototypes *= spec.class_separation / math.sqrt(2.0)

    n_na = int(round(spec.na_fraction * spec.num_bags))
    n_pos = spec.num_bags - n_na
    if n_pos < K - 1:
        raise ContractViolation(
            f"{n_pos} positive bags cannot cover {K - 1} positive relations"
        )
    weights = spec.relation_weights or tuple([1.0] * (K - 1))
    pos_counts = _apportion(n_pos, weights)
    bag_relations = [0] * n_na
    for rel, cnt in zip(range(1, K), pos_counts):
        bag_relations += [rel] * cnt
    # fixed interleaving of NA and positive bags, reproducible via substream
    order = rngmod.generator(spec.seed, "bag-order").permutation(len(bag_relations))
    bag_relations = [bag_relations[i] for i in order]

    span = spec.bag_size_max - spec.bag_size_min + 1
    u = gen.random(spec.num_bags)
    sizes = spec.bag_size_min + np.minimum(
        (span * u ** spec.bag_size_shape).astype(int), span - 1)

    instances: list[Instance] = []
    bags: list[Bag] = []
    next_id = 0
    for bag_id, (rel, size) in enumerate(zip(bag_relations, map(int, sizes))):
        noisy = 0
        if rel != 0 and spec.noise_rate > 0:
            noisy = min(int(round(spec.noise_rate * size)), size - 1)
        noisy_slots = set(gen.choice(size, size=noisy, replace=False).tolist()) \
            if noisy else set()
        member_ids = []
        for slot in range(size):
            if slot in noisy_slots:
                others = [k for k in range(1, K) if k != rel]
                if not others or gen.random() < spec.na_noise_weight:
                    gold = 0
                else:
                    gold = int(others[gen.integers(len(others))])
            else:
                gold = rel
            feats = prototypes[gold] + gen.standard_normal(d)
            instances.append(Instance(
                instance_id=next_id, bag_id=bag_id, features=feats,
                observed_label=rel, gold_label=gold, split="train",
            ))
            member_ids.append(next_id)
            next_id += 1
        bags.append(Bag(bag_id=bag_id, relation_label=rel,
                        entity_pair_id=f"pair-{bag_id:05d}",
                        instance_ids=tuple(member_ids)))

    if spec.test_fraction > 0:
        instances = _assign_test_split(instances, bags, spec)
    return Dataset(instances, bags, num_relations=K)


def _assign_test_split(instances, bags, spec: NoiseSpec) -> list[Instance]:
    """Move a per-relation-proportional share of bags to the test split."""
    gen = rngmod.generator(spec.seed, "test-split")
    by_rel: dict[int, list[int]] = {}
    for bag in bags:
        by_rel.setdefault(bag.relation_label, []).append(bag.bag_id)
    test_bags: set[int] = set()
    for rel in sorted(by_rel):
        ids = sorted(by_rel[rel])
        n_test = int(round(spec.test_fraction * len(ids)))
        n_test = min(n_test, len(ids) - 1)  # keep every relation trainable
        if n_test > 0:
            picked = gen.choice(len(ids), size=n_test, replace=False)
            test_bags.update(ids[i] for i in picked)
    return [replace(inst, split="test") if inst.bag_id in test_bags else inst
            for inst in instances]


# ---- JSONL serialization ---------------------------------------------------

def _record_of(inst: Instance, bag: Bag) -> dict:
    return {
        "instance_id": inst.instance_id,
        "bag_id": inst.bag_id,
        "entity_pair_id": bag.entity_pair_id,
        "relation": inst.observed_label,
        "features": [float(v) for v in inst.features],
        "gold_relation": inst.gold_label,
        "split": inst.split,
    }


def save_dataset(dataset: Dataset, path) -> None:
    """One JSON record per instance, ordered by instance_id."""
    with open(path, "w", encoding="utf-8") as fh:
        for iid in sorted(dataset.instances):
            inst = dataset.instances[iid]
            rec = _record_of(inst, dataset.bags[inst.bag_id])
            fh.write(json.dumps(rec) + "\n")


def _parse_record(raw: dict, lineno: int, strict: bool) -> tuple[Instance, str]:
    unknown = set(raw) - _SCHEMA_FIELDS
    if unknown:
        msg = f"line {lineno}: unknown field(s) {sorted(unknown)}"
        if strict:
            raise SchemaError(msg)
        warnings.warn(msg, stacklevel=3)
    for name in _SCHEMA_FIELDS:
        if name not in raw:
            raise SchemaError(f"line {lineno}: missing field '{name}'")

    def bad(fieldname, why):
        return SchemaError(f"line {lineno}: field '{fieldname}' {why}")

    if not isinstance(raw["instance_id"], int):
        raise bad("instance_id", "must be an integer")
    if not isinstance(raw["bag_id"], int):
        raise bad("bag_id", "must be an integer")
    if not isinstance(raw["entity_pair_id"], str):
        raise bad("entity_pair_id", "must be a string")
    if not isinstance(raw["relation"], int) or raw["relation"] < 0:
        raise bad("relation", "must be a nonnegative integer")
    gold = raw["gold_relation"]
    if gold is not None and (not isinstance(gold, int) or gold < 0):
        raise bad("gold_relation", "must be a nonnegative integer or null")
    if raw["split"] not in SPLITS:
        raise bad("split", f"must be one of {SPLITS}")
    feats = raw["features"]
    if (not isinstance(feats, list) or not feats
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       for v in feats)):
        raise bad("features", "must be a nonempty list of numbers")
    try:
        inst = Instance(
            instance_id=raw["instance_id"], bag_id=raw["bag_id"],
            features=np.asarray(feats, dtype=np.float64),
            observed_label=raw["relation"], gold_label=gold,
            split=raw["split"],
        )
    except ContractViolation as exc:
        raise SchemaError(f"line {lineno}: {exc}") from exc
    return inst, raw["entity_pair_id"]


def load_dataset(path, *, strict: bool = True,
                 num_relations: int | None = None) -> Dataset:
    """Parse and exhaustively validate a JSONL dataset file.

    Schema violations report the offending line number and field; bag
    consistency (shared relation and entity pair) and feature-dimension
    uniformity are enforced, not just sampled.
    """
    instances: list[Instance] = []
    pair_ids: dict[int, tuple[str, int]] = {}
    dims: dict[int, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(raw, dict):
                raise SchemaError(f"line {lineno}: record must be a JSON object")
            inst, pair = _parse_record(raw, lineno, strict)
            dim = inst.features.shape[0]
            if dims and dim != next(iter(dims.values())):
                first = next(iter(dims))
                raise SchemaError(
                    f"line {lineno}: instance {inst.instance_id} has "
                    f"{dim} features but instance {first} has "
                    f"{dims[first]}"
                )
            dims[inst.instance_id] = dim
            known = pair_ids.get(inst.bag_id)
            if known is not None and known[0] != pair:
                raise SchemaError(
                    f"line {lineno}: bag {inst.bag_id} entity_pair_id "
                    f"{pair!r} != {known[0]!r} (line {known[1]})"
                )
            pair_ids.setdefault(inst.bag_id, (pair, lineno))
            instances.append(inst)
    if not instances:
        raise SchemaError(f"{path}: empty dataset")

    grouped: dict[int, list[Instance]] = {}
    for inst in instances:
        grouped.setdefault(inst.bag_id, []).append(inst)
    bags = []
    for bag_id, members in grouped.items():
        labels = {m.observed_label for m in members}
        if len(labels) != 1:
            raise SchemaError(
                f"bag {bag_id}: instances carry different relations "
                f"{sorted(labels)}; observed labels must match the bag"
            )
        bags.append(Bag(bag_id=bag_id, relation_label=labels.pop(),
                        entity_pair_id=pair_ids[bag_id][0],
                        instance_ids=tuple(m.instance_id for m in members)))
    try:
        return Dataset(instances, bags, num_relations=num_relations)
    except ContractViolation as exc:
        raise SchemaError(str(exc)) from exc


# ---- validation-set construction -------------------------------------------

@dataclass(frozen=True)
class PatternParams:
    """Quantized-signature analogue of frequency-seeded pattern bootstrap."""

    bins: int = 3
    seed_pattern_fraction: float = 0.10
    max_new_patterns_per_loop: int = 5


def _signatures(X: np.ndarray, bins: int) -> list[tuple[int, ...]]:
    """Quantize each feature into equal-frequency bins; rows become tuples."""
    edges = np.quantile(X, [q / bins for q in range(1, bins)], axis=0)
    codes = np.zeros(X.shape, dtype=int)
    for b in range(bins - 1):
        codes += X > edges[b]
    return [tuple(row) for row in codes]


def build_validation_set(dataset: Dataset, target_fraction: float = 0.10,
                         params: PatternParams = PatternParams(),
                         ) -> tuple[Dataset, Dataset]:
    """Carve a validation split out of the training split by pattern bootstrap.

    An instance's "pattern" is its quantized feature signature. Selection
    seeds with each relation's most frequent patterns (top 10% of that
    relation's distinct patterns), then repeatedly admits at most 5 new
    patterns per relation per loop, ranked by how many already-covered bags
    they co-occur with, until ``target_fraction`` of training instances are
    selected. Returns (validation dataset, remaining dataset); the
    remaining dataset keeps the untouched train/test instances.
    """
    if not 0 < target_fraction <= 0.5:
        raise ContractViolation("target_fraction must lie in (0, 0.5]")
    train_ids = dataset.ids("train")
    if not train_ids:
        raise ContractViolation("dataset has no training split")
    X = dataset.features(train_ids)
    sigs = _signatures(X, params.bins)
    sig_of = dict(zip(train_ids, sigs))
    rel_of = {i: dataset.instances[i].observed_label for i in train_ids}

    # per relation: pattern -> member instance ids (instance-id order)
    members: dict[int, dict[tuple, list[int]]] = {}
    for iid in train_ids:
        members.setdefault(rel_of[iid], {}).setdefault(sig_of[iid], []).append(iid)

    target = math.ceil(target_fraction * len(train_ids))
    selected: list[int] = []
    selected_patterns: dict[int, set] = {r: set() for r in members}

    def admit(rel, pattern) -> bool:
        """Admit one pattern's instances (stable order, capped at target)."""
        selected_patterns[rel].add(pattern)
        for iid in members[rel][pattern]:
            selected.append(iid)
            if len(selected) >= target:
                return True
        return False

    # seed round-robin over relations with each relation's top-frequency
    # patterns, so every relation contributes before the target cap bites
    seed_queues = {}
    for rel in sorted(members):
        pats = sorted(members[rel], key=lambda p: (-len(members[rel][p]), p))
        n_seed = max(1, math.ceil(params.seed_pattern_fraction * len(pats)))
        seed_queues[rel] = pats[:n_seed]
    done = False
    round_idx = 0
    while not done and any(seed_queues.values()):
        for rel in sorted(seed_queues):
            if round_idx < len(seed_queues[rel]):
                if admit(rel, seed_queues[rel][round_idx]):
                    done = True
                    break
        round_idx += 1
        if all(round_idx >= len(q) for q in seed_queues.values()):
            break

    while not done:
        covered_bags = {dataset.instances[i].bag_id for i in selected}
        admitted_any = False
        for rel in sorted(members):
            cands = []
            for pattern, insts in members[rel].items():
                if pattern in selected_patterns[rel]:
                    continue
                co = len({dataset.instances[i].bag_id for i in insts}
                         & covered_bags)
                if co > 0:
                    cands.append((-co, -len(insts), pattern))
            cands.sort()
            for _, _, pattern in cands[:params.max_new_patterns_per_loop]:
                admitted_any = True
                if admit(rel, pattern):
                    done = True
                    break
            if done:
                break
        if done:
            break
        if not admitted_any:
            warnings.warn(
                f"pattern space exhausted at {len(selected)} of {target} "
                "requested validation instances", stacklevel=2)
            break

    chosen = set(selected)
    val_instances = [replace(dataset.instances[i], split="validation")
                     for i in sorted(chosen)]
    rest_instances = [inst for iid, inst in dataset.instances.items()
                      if iid not in chosen]

    def subset_bags(instances):
        keep = {i.instance_id for i in instances}
        out = []
        for bag in dataset.bags.values():
            kept_members = tuple(i for i in bag.instance_ids if i in keep)
            if kept_members:
                out.append(replace(bag, instance_ids=kept_members))
        return out

    val_ds = Dataset(val_instances, subset_bags(val_instances),
                     num_relations=dataset.num_relations)
    rest_ds = Dataset(rest_instances, subset_bags(rest_instances),
                      num_relations=dataset.num_relations)
    return val_ds, rest_ds


def summarize(dataset: Dataset) -> dict:
    """Corpus statistics in the shape of a dataset summary table."""
    by_split = {s: len(dataset.ids(s)) for s in SPLITS}
    n_pos = sum(1 for b in dataset.bags.values() if b.relation_label != 0)
    return {
        "bags": len(dataset.bags),
        "positive_bags": n_pos,
        "instances": len(dataset.instances),
        "relations": dataset.num_relations,
        "feature_dim": dataset.feature_dim,
        "noise_rate": 1.0 - dataset.clean_fraction()
        if not math.isnan(dataset.clean_fraction()) else None,
        **{f"instances_{s}": n for s, n in by_split.items()},
    }
