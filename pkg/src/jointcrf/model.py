"""Trained model container: scoring heads, decoding entry points, file IO.

A model always carries the joint label space. Depending on the training
regime it holds a joint-space head, per-scheme heads (separate classifiers),
or a joint head plus a dedicated PB head for partially labeled data. All
heads share the same feature templates and hashing dimension; weights are
per head.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .crf import Lattice, make_lattice, viterbi
from .errors import DataError
from .features import FeatureExtractor, new_extractor, score_emissions
from .instances import PredicateInstance
from .labels import (LabelSpace, RoleKind, RoleLabel, Scheme, TagSpace, VERB_TAG,
                     build_label_space, split_tag)
from .semlink import (ConstraintMask, SemlinkMapping, _pair_disallowed,
                      compile_completion_mask, compile_semlink_mask, intersect)

MODEL_FORMAT_VERSION = "jointcrf-model-1"

JOINT, VN, PB = "joint", "vn", "pb"


@dataclass
class CrfHead:
    """One linear-CRF scoring head: hashed feature weights + chain parameters."""

    extractor: FeatureExtractor
    transitions: np.ndarray
    start: np.ndarray
    end: np.ndarray

    @property
    def n_labels(self) -> int:
        return self.extractor.n_labels

    def copy_params(self) -> dict[str, np.ndarray]:
        return {
            "weights": self.extractor.weights.copy(),
            "transitions": self.transitions.copy(),
            "start": self.start.copy(),
            "end": self.end.copy(),
        }

    def load_params(self, params: dict[str, np.ndarray]) -> None:
        self.extractor.weights[...] = params["weights"]
        self.transitions[...] = params["transitions"]
        self.start[...] = params["start"]
        self.end[...] = params["end"]


def new_head(mode: str, hash_dim: int, n_labels: int,
             templates: tuple[str, ...] = (),
             rng: np.random.Generator | None = None, init_scale: float = 0.0) -> CrfHead:
    extractor = new_extractor(mode, hash_dim, n_labels, templates=templates,
                              rng=rng, init_scale=init_scale)
    return CrfHead(extractor, np.zeros((n_labels, n_labels)),
                   np.zeros(n_labels), np.zeros(n_labels))


@dataclass
class Model:
    space: LabelSpace
    heads: dict[str, CrfHead]
    version: str = MODEL_FORMAT_VERSION
    vn_space: TagSpace = field(init=False, repr=False)
    pb_space: TagSpace = field(init=False, repr=False)

    def __post_init__(self):
        self.vn_space = self.space.tag_space(Scheme.VN)
        self.pb_space = self.space.tag_space(Scheme.PB)

    def head_space(self, name: str):
        return {JOINT: self.space, VN: self.vn_space, PB: self.pb_space}[name]

    def lattice(self, instance: PredicateInstance, head_name: str = JOINT,
                constraint_mask=None) -> Lattice:
        head = self.heads[head_name]
        space = self.head_space(head_name)
        em = score_emissions(instance, head.extractor, space)
        return make_lattice(space, em, head.transitions, head.start, head.end,
                            constraint_mask=constraint_mask)


def semlink_mask_or_none(instance: PredicateInstance, mapping: SemlinkMapping | None,
                         space: LabelSpace) -> ConstraintMask | None:
    if mapping is None:
        return None
    return compile_semlink_mask(instance, mapping, space)


def decode_joint(model: Model, instance: PredicateInstance,
                 mapping: SemlinkMapping | None = None, use_semlink: bool = True,
                 extra_mask=None) -> list[int]:
    """Viterbi over the joint head; lexicon masks on by default."""
    mask = semlink_mask_or_none(instance, mapping, model.space) if use_semlink else None
    if mask is not None and extra_mask is not None:
        mask = intersect(mask, extra_mask)
    elif extra_mask is not None:
        mask = extra_mask
    path, _ = viterbi(model.lattice(instance, JOINT), mask)
    return path


def decode_scheme(model: Model, instance: PredicateInstance, head_name: str,
                  mask=None) -> list[str]:
    path, _ = viterbi(model.lattice(instance, head_name), mask)
    tags = model.head_space(head_name).tags
    return [tags[i] for i in path]


def tag_instance(model: Model, instance: PredicateInstance,
                 mapping: SemlinkMapping | None = None,
                 use_semlink: bool = True) -> tuple[list[str], list[str]]:
    """(vn_tags, pb_tags) for one instance under the model's natural decoder.

    Joint-head models decode one joint sequence and project it; pure
    multitask models decode the two schemes independently (the lexicon mask
    does not apply to separate decoders in this mode).
    """
    if JOINT in model.heads:
        path = decode_joint(model, instance, mapping, use_semlink)
        return ([model.space.vn_tags[i] for i in path],
                [model.space.pb_tags[i] for i in path])
    return (decode_scheme(model, instance, VN), decode_scheme(model, instance, PB))


def _vn_compatibility_mask(model: Model, instance: PredicateInstance,
                           mapping: SemlinkMapping | None) -> np.ndarray:
    """Per-position VN tag mask compatible with the observed PB sequence."""
    pairs = mapping.lookup(instance) if mapping is not None else None
    vn_mentioned = {v for v, _ in pairs} if pairs else set()
    pb_mentioned = {p for _, p in pairs} if pairs else set()
    tags = model.vn_space.tags
    T = instance.length
    allowed = np.ones((T, len(tags)), dtype=bool)
    for t, pt in enumerate(instance.observed_pb):
        p_pre, _ = split_tag(pt)
        for j, vt in enumerate(tags):
            v_pre, _ = split_tag(vt)
            if v_pre and p_pre and v_pre != p_pre:
                allowed[t, j] = False
            elif (vt == VERB_TAG) != (pt == VERB_TAG):
                allowed[t, j] = False
            elif pairs and _pair_disallowed(vt, pt, pairs, vn_mentioned, pb_mentioned):
                allowed[t, j] = False
    return allowed


def complete_instance(model: Model, instance: PredicateInstance,
                      mapping: SemlinkMapping | None = None) -> tuple[list[str], list[str]]:
    """Infer VN tags given the observed PB sequence; lexicon mask always on."""
    if instance.observed_pb is None:
        raise DataError(f"instance {instance.instance_id!r} has no observed PB labels")
    if JOINT in model.heads:
        comp = compile_completion_mask(instance, model.space)
        sem = semlink_mask_or_none(instance, mapping, model.space)
        mask = comp if sem is None else intersect(comp, sem)
        path, _ = viterbi(model.lattice(instance, JOINT), mask)
        return ([model.space.vn_tags[i] for i in path],
                [model.space.pb_tags[i] for i in path])
    mask = _vn_compatibility_mask(model, instance, mapping)
    vn_tags = decode_scheme(model, instance, VN, mask)
    return vn_tags, list(instance.observed_pb)


# ---------------------------------------------------------------------------
# model files: npz container with a JSON metadata entry


def save_model(path, model: Model) -> None:
    meta = {
        "version": model.version,
        "space": {
            "vn_inventory": [[r.scheme.value, r.name, r.kind.value] for r in model.space.vn_inventory],
            "pb_inventory": [[r.scheme.value, r.name, r.kind.value] for r in model.space.pb_inventory],
            "cooccurrence_filter": sorted(list(p) for p in model.space.cooccurrence_filter),
        },
        "heads": {
            name: {
                "mode": head.extractor.mode,
                "templates": list(head.extractor.templates),
                "hash_dim": head.extractor.hash_dim,
            }
            for name, head in model.heads.items()
        },
    }
    arrays = {}
    for name, head in model.heads.items():
        arrays[f"{name}__weights"] = head.extractor.weights
        arrays[f"{name}__transitions"] = head.transitions
        arrays[f"{name}__start"] = head.start
        arrays[f"{name}__end"] = head.end
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
                 **arrays)


def load_model(path) -> Model:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta["version"] != MODEL_FORMAT_VERSION:
            raise DataError(
                f"model file version {meta['version']!r} != {MODEL_FORMAT_VERSION!r}"
            )
        vn_inv = tuple(RoleLabel(Scheme(s), n, RoleKind(k)) for s, n, k in meta["space"]["vn_inventory"])
        pb_inv = tuple(RoleLabel(Scheme(s), n, RoleKind(k)) for s, n, k in meta["space"]["pb_inventory"])
        filt = {tuple(p) for p in meta["space"]["cooccurrence_filter"]}
        space = build_label_space(vn_inv, pb_inv, filt)
        heads = {}
        for name, cfg in meta["heads"].items():
            extractor = FeatureExtractor(
                mode=cfg["mode"], templates=tuple(cfg["templates"]),
                hash_dim=cfg["hash_dim"], weights=data[f"{name}__weights"].copy(),
            )
            heads[name] = CrfHead(
                extractor,
                data[f"{name}__transitions"].copy(),
                data[f"{name}__start"].copy(),
                data[f"{name}__end"].copy(),
            )
    return Model(space, heads)
