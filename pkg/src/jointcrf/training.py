"""Mini-batch gradient training over mixed fully- and partially-labeled data.

Five regimes, all sharing one optimization loop and differing only in how
instances are routed to losses:

- ``joint``: jointly labeled data only, full-sequence NLL on the joint head;
- ``multitask``: separate VN and PB chain NLLs on per-scheme heads;
- ``joint-pb``: joint head for jointly labeled data, a dedicated PB chain
  for PB-only data;
- ``marginal``: joint head; PB-only data trained by marginalizing over all
  joint sequences consistent with the observed PB labels;
- ``marginal-seml``: as ``marginal`` with numerator and partition restricted
  to the instance's lexicon mask.

The optimizer is plain mini-batch gradient descent with optional momentum
and L2; everything is deterministic given the seed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .crf import make_lattice
from .errors import DataError
from .features import emissions_from_features, featurize_instance, accumulate_weight_grad
from .instances import PredicateInstance
from .labels import LabelSpace, Scheme
from .losses import (LossGrads, constrained_marginal_nll, joint_nll, marginal_nll,
                     multitask_nll)
from .model import JOINT, PB, VN, CrfHead, Model, new_head
from .evaluation import decode_corpus, evaluate_tag_pairs
from .semlink import SemlinkMapping, allowed_label_row, completion_allowed

logger = logging.getLogger(__name__)

REGIMES = ("joint", "multitask", "joint-pb", "marginal", "marginal-seml")

_REGIME_HEADS = {
    "joint": (JOINT,),
    "multitask": (VN, PB),
    "joint-pb": (JOINT, PB),
    "marginal": (JOINT,),
    "marginal-seml": (JOINT,),
}

_PB_ONLY_ROUTE = {
    "multitask": "pb-single",
    "joint-pb": "pb-dedicated",
    "marginal": "marginal",
    "marginal-seml": "marginal-seml",
    "joint": "skip",
}

_HEAD_SALT = {JOINT: 0, VN: 1, PB: 2}


@dataclass
class TrainConfig:
    regime: str = "joint"
    epochs: int = 10
    step_size: float = 0.2
    momentum: float = 0.0
    l2: float = 1e-4
    seed: int = 0
    hash_dim: int = 2 ** 20
    batch_size: int = 8
    pb_upsample: int = 1
    pb_weight: float = 1.0
    init_scale: float = 0.0
    semlink_in_joint_partition: bool = False
    feature_mode: str = "WP"
    templates: tuple[str, ...] | None = None   # None = the mode's default set
    # optional file paths, used by the command-line front end
    corpus: str | None = None
    dev: str | None = None
    semlink: str | None = None
    inventory: str | None = None
    cooccurrence: str | None = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise DataError(f"unknown regime {self.regime!r}; choose from {REGIMES}")
        if self.epochs < 0 or self.batch_size < 1 or self.pb_upsample < 1:
            raise DataError("epochs must be >= 0, batch_size and pb_upsample >= 1")

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)


def route_instance(instance: PredicateInstance, regime: str) -> str:
    """Loss selector for one instance under one regime."""
    if regime not in REGIMES:
        raise DataError(f"unknown regime {regime!r}")
    if instance.gold_joint is not None:
        return "multitask" if regime == "multitask" else "joint"
    if instance.observed_pb is None:
        raise DataError(
            f"instance {instance.instance_id!r} has neither gold joint labels "
            f"nor observed PB labels"
        )
    return _PB_ONLY_ROUTE[regime]


@dataclass
class _Prepared:
    """Static per-instance training state, computed once before epoch 0."""

    instance: PredicateInstance
    route: str
    weight: float
    feats: list
    gold_joint: np.ndarray | None = None
    gold_vn: np.ndarray | None = None
    gold_pb: np.ndarray | None = None
    obs_pb: np.ndarray | None = None
    semlink_mask: np.ndarray | None = None     # (T, L) view, position-uniform
    partition_mask: np.ndarray | None = None   # optional joint-loss ablation


def _prepare(instance: PredicateInstance, config: TrainConfig, model: Model,
             mapping: SemlinkMapping | None) -> _Prepared:
    route = route_instance(instance, config.regime)
    feats = featurize_instance(instance, model.heads[_first_head(config.regime)].extractor)
    weight = 1.0 if instance.gold_joint is not None else config.pb_weight
    prep = _Prepared(instance, route, weight, feats)

    T = instance.length
    if route in ("joint", "multitask"):
        if route == "joint":
            prep.gold_joint = np.asarray(model.space.indices(instance.gold_joint))
        else:
            prep.gold_vn = np.asarray(model.vn_space.indices(instance.gold_vn))
            prep.gold_pb = np.asarray(model.pb_space.indices(instance.gold_pb))
        if config.semlink_in_joint_partition and route == "joint" and mapping is not None:
            entry = mapping.lookup(instance)
            if entry is not None:
                row = allowed_label_row(entry, model.space)
                prep.partition_mask = np.broadcast_to(row, (T, len(model.space)))
    elif route in ("pb-single", "pb-dedicated"):
        prep.obs_pb = np.asarray(model.pb_space.indices(instance.observed_pb))
    elif route == "marginal":
        prep.obs_pb = np.asarray(instance.observed_pb, dtype=object)
    elif route == "marginal-seml":
        prep.obs_pb = np.asarray(instance.observed_pb, dtype=object)
        row = np.ones(len(model.space), dtype=bool)
        if mapping is not None:
            entry = mapping.lookup(instance)
            if entry is not None:
                row = allowed_label_row(entry, model.space)
        prep.semlink_mask = np.broadcast_to(row, (T, len(model.space)))
    return prep


def _first_head(regime: str) -> str:
    return _REGIME_HEADS[regime][0]


class _SgdState:
    """Per-head gradient accumulators and momentum buffers."""

    def __init__(self, head: CrfHead, momentum: float):
        self.head = head
        self.momentum = momentum
        self.accum = {k: np.zeros_like(v) for k, v in self._params().items()}
        self.velocity = (
            {k: np.zeros_like(v) for k, v in self._params().items()} if momentum else None
        )
        self.touched = False

    def _params(self) -> dict[str, np.ndarray]:
        return {
            "weights": self.head.extractor.weights,
            "transitions": self.head.transitions,
            "start": self.head.start,
            "end": self.head.end,
        }

    def add(self, feats, grads: LossGrads, weight: float) -> None:
        accumulate_weight_grad(feats, weight * grads.d_emissions, self.accum["weights"])
        self.accum["transitions"] += weight * grads.d_transitions
        self.accum["start"] += weight * grads.d_start
        self.accum["end"] += weight * grads.d_end
        self.touched = True

    def step(self, step_size: float, l2: float, n_batch: int) -> None:
        if not self.touched:
            return
        for key, param in self._params().items():
            grad = self.accum[key] / n_batch
            if l2:
                grad = grad + l2 * param
            if self.velocity is not None:
                vel = self.velocity[key]
                vel *= self.momentum
                vel -= step_size * grad
                param += vel
            else:
                param -= step_size * grad
            self.accum[key][...] = 0.0
        self.touched = False


def _instance_loss(prep: _Prepared, model: Model, config: TrainConfig,
                   states: dict[str, _SgdState]) -> float:
    """Compute the routed loss, push gradients into the head accumulators."""
    inst = prep.instance
    if prep.route == "multitask":
        vn_lat = _lattice(model, VN, inst, prep.feats)
        pb_lat = _lattice(model, PB, inst, prep.feats)
        loss = multitask_nll(vn_lat, pb_lat, prep.gold_vn, prep.gold_pb)
        states[VN].add(prep.feats, loss.vn, prep.weight)
        states[PB].add(prep.feats, loss.pb, prep.weight)
        return loss.value
    if prep.route in ("pb-single", "pb-dedicated"):
        pb_lat = _lattice(model, PB, inst, prep.feats)
        grads = joint_nll(pb_lat, prep.obs_pb)
        states[PB].add(prep.feats, grads, prep.weight)
        return grads.value
    lattice = _lattice(model, JOINT, inst, prep.feats)
    if prep.route == "joint":
        grads = joint_nll(lattice, prep.gold_joint, prep.partition_mask)
    elif prep.route == "marginal":
        grads = marginal_nll(lattice, prep.obs_pb, model.space)
    else:  # marginal-seml
        grads = constrained_marginal_nll(lattice, prep.obs_pb, prep.semlink_mask, model.space)
    states[JOINT].add(prep.feats, grads, prep.weight)
    return grads.value


def _lattice(model: Model, head_name: str, instance: PredicateInstance, feats):
    head = model.heads[head_name]
    em = emissions_from_features(feats, head.extractor.weights)
    return make_lattice(model.head_space(head_name), em, head.transitions,
                        head.start, head.end)


def _dev_scores(model: Model, dev: Sequence[PredicateInstance],
                mapping: SemlinkMapping | None, regime: str) -> tuple[float, float]:
    use_semlink = regime != "multitask" and mapping is not None
    pairs = decode_corpus(model, dev, mapping, use_semlink=use_semlink)
    report = evaluate_tag_pairs(pairs, dev, mapping, model.space)
    return report["vn"]["f1"], report["pb"]["f1"]


def build_model(config: TrainConfig, space: LabelSpace) -> Model:
    """Fresh model with the heads the regime needs; zero or seeded-normal init."""
    sizes = {
        JOINT: len(space),
        VN: len(space.tag_space(Scheme.VN)),
        PB: len(space.tag_space(Scheme.PB)),
    }
    heads = {}
    for name in _REGIME_HEADS[config.regime]:
        n_labels = sizes[name]
        rng = np.random.default_rng([config.seed, _HEAD_SALT[name]])
        heads[name] = new_head(config.feature_mode, config.hash_dim, n_labels,
                               templates=tuple(config.templates or ()),
                               rng=rng, init_scale=config.init_scale)
    return Model(space, heads)


def train(
    corpus: Sequence[PredicateInstance],
    config: TrainConfig,
    space: LabelSpace,
    mapping: SemlinkMapping | None = None,
    dev: Sequence[PredicateInstance] | None = None,
    metrics_stream=None,
) -> Model:
    """Train a model for the configured regime; deterministic given the seed.

    Emits one JSON metrics object per epoch on ``metrics_stream`` when given.
    With a dev set, the checkpoint with the highest mean of VN and PB span F1
    is returned; otherwise the final weights are.
    """
    if not corpus:
        raise DataError("empty training corpus")
    model = build_model(config, space)

    prepared = [_prepare(inst, config, model, mapping) for inst in corpus]
    n_skipped = sum(1 for p in prepared if p.route == "skip")
    if n_skipped:
        logger.info("regime=%s: skipping %d PB-only instances", config.regime, n_skipped)
    train_set: list[_Prepared] = []
    for prep in prepared:
        if prep.route == "skip":
            continue
        repeats = config.pb_upsample if prep.instance.gold_joint is None else 1
        train_set.extend([prep] * repeats)
    if not train_set and config.epochs > 0:
        raise DataError(f"regime {config.regime!r} leaves no trainable instances")

    states = {name: _SgdState(model.heads[name], config.momentum)
              for name in model.heads}
    shuffle_rng = np.random.default_rng([config.seed, 7])

    best_mean, best_params = -1.0, None
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(train_set))
        total_loss, total_weight = 0.0, 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo:lo + config.batch_size]
            for k in batch:
                prep = train_set[int(k)]
                loss = _instance_loss(prep, model, config, states)
                total_loss += prep.weight * loss
                total_weight += prep.weight
            for state in states.values():
                state.step(config.step_size, config.l2, len(batch))
        record = {
            "epoch": epoch,
            "loss": total_loss / total_weight if total_weight else 0.0,
            "n_instances": len(train_set),
            "n_skipped": n_skipped,
        }
        if dev is not None:
            vn_f1, pb_f1 = _dev_scores(model, dev, mapping, config.regime)
            mean_f1 = (vn_f1 + pb_f1) / 2.0
            record.update(vn_f1=vn_f1, pb_f1=pb_f1, mean_f1=mean_f1)
            if mean_f1 > best_mean:
                best_mean = mean_f1
                best_params = {name: model.heads[name].copy_params() for name in model.heads}
                record["best"] = True
        if metrics_stream is not None:
            metrics_stream.write(json.dumps(record) + "\n")
            metrics_stream.flush()
        logger.debug("epoch %d: %s", epoch, record)

    if best_params is not None:
        for name, params in best_params.items():
            model.heads[name].load_params(params)
    return model
