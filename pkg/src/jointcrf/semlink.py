"""Lexicon-driven constraint masks over the joint label space.

A Semlink entry maps a (VN class, PB sense) pair to the set of legal
(VN role, PB role) argument pairs for that predicate. The mask realizes the
rule: if either role of a joint label is mentioned in the entry but the pair
itself is not listed, the label is disallowed; labels whose roles are both
unmentioned stay allowed, and O / Verb sides are unconstrained wildcards.
The same rule applies to B- and I- prefixes alike, at every position.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import AlignmentError, DataError, InfeasibleMaskError, UnknownRoleError
from .instances import PredicateInstance
from .labels import LabelSpace, Scheme, tag_role

logger = logging.getLogger(__name__)

RolePairs = frozenset[tuple[str, str]]


class MaskProvenance(str, Enum):
    SEMLINK = "Semlink"
    COMPLETION = "Completion"
    COMBINED = "Combined"
    NONE = "None"


@dataclass(frozen=True)
class ConstraintMask:
    """Boolean (T, n_labels) matrix of allowed emissions."""

    allowed: np.ndarray
    provenance: MaskProvenance

    def __post_init__(self):
        if not self.allowed.any(axis=1).all():
            t = int(np.flatnonzero(~self.allowed.any(axis=1))[0])
            raise InfeasibleMaskError(f"no label allowed at position {t}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.allowed.shape


def all_true_mask(T: int, n_labels: int) -> ConstraintMask:
    return ConstraintMask(np.ones((T, n_labels), dtype=bool), MaskProvenance.NONE)


@dataclass(eq=False)
class SemlinkMapping:
    """(vn_class, pb_sense) -> legal (VN role, PB role) pairs."""

    entries: dict[tuple[str, str], RolePairs]
    unresolvable: tuple[str, ...] = ()

    def covers(self, instance: PredicateInstance) -> bool:
        return (instance.vn_class, instance.pb_sense) in self.entries

    def lookup(self, instance: PredicateInstance) -> RolePairs | None:
        return self.entries.get((instance.vn_class, instance.pb_sense))

    def audit_gold(self, corpus: Iterable[PredicateInstance], space: LabelSpace) -> list[str]:
        """Instance ids whose gold joint labels violate their own entry."""
        bad = []
        for inst in corpus:
            if inst.gold_joint is None or not self.covers(inst):
                continue
            if count_violations(inst.gold_joint, inst, self, space):
                bad.append(inst.instance_id)
        return bad


def load_semlink(path, space: LabelSpace | None = None) -> SemlinkMapping:
    """Read the JSON mapping: `"<vn_class>|<pb_sense>"` -> [[vn_role, pb_role], ...].

    Entries naming roles outside the given space's inventories are kept but
    flagged in ``unresolvable`` and logged; entries with empty pair lists are
    rejected.
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise DataError(f"{path}: expected a JSON object at top level")

    vn_known = space.role_names(Scheme.VN) if space is not None else None
    pb_known = space.role_names(Scheme.PB) if space is not None else None

    entries: dict[tuple[str, str], RolePairs] = {}
    unresolvable: list[str] = []
    for key, pairs in raw.items():
        if "|" not in key:
            raise DataError(f"{path}: key {key!r} is not of the form '<vn_class>|<pb_sense>'")
        vn_class, pb_sense = key.split("|", 1)
        if not pairs:
            raise DataError(f"{path}: entry {key!r} has an empty pair list")
        pairset = set()
        for pair in pairs:
            if len(pair) != 2:
                raise DataError(f"{path}: entry {key!r} has a malformed pair {pair!r}")
            v, p = str(pair[0]), str(pair[1])
            if vn_known is not None and (v not in vn_known or p not in pb_known):
                unresolvable.append(key)
                logger.warning("semlink entry %s names unknown role pair (%s, %s)", key, v, p)
            pairset.add((v, p))
        entries[(vn_class, pb_sense)] = frozenset(pairset)
    return SemlinkMapping(entries, tuple(unresolvable))


def save_semlink(path, mapping: SemlinkMapping) -> None:
    raw = {
        f"{vn}|{pb}": sorted([list(p) for p in pairs])
        for (vn, pb), pairs in sorted(mapping.entries.items())
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(raw, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _pair_disallowed(vn_tag: str, pb_tag: str, pairs: RolePairs,
                     vn_mentioned: set[str], pb_mentioned: set[str]) -> bool:
    """Role-level legality of one joint tag pair against one entry."""
    v = tag_role(vn_tag)
    p = tag_role(pb_tag)
    if v is None or p is None:
        return False  # O / Verb sides are wildcards
    if v not in vn_mentioned and p not in pb_mentioned:
        return False  # both roles outside the entry: unconstrained
    return (v, p) not in pairs


def allowed_label_row(pairs: RolePairs, space: LabelSpace) -> np.ndarray:
    """(n_labels,) bool row of labels legal under one Semlink entry."""
    vn_mentioned = {v for v, _ in pairs}
    pb_mentioned = {p for _, p in pairs}
    row = np.ones(len(space), dtype=bool)
    for lab in space:
        if _pair_disallowed(lab.vn_tag, lab.pb_tag, pairs, vn_mentioned, pb_mentioned):
            row[lab.index] = False
    return row


def compile_semlink_mask(
    instance: PredicateInstance,
    mapping: SemlinkMapping,
    space: LabelSpace,
) -> ConstraintMask:
    """Position-uniform emission mask for the instance's Semlink entry.

    Predicates without an entry get an all-true mask with provenance NONE
    (the constraint is a no-op for uncovered predicates).
    """
    T = instance.length
    pairs = mapping.lookup(instance)
    if pairs is None:
        return all_true_mask(T, len(space))
    row = allowed_label_row(pairs, space)
    if not row.any():
        raise InfeasibleMaskError(
            f"instance {instance.instance_id!r}: Semlink entry "
            f"({instance.vn_class!r}, {instance.pb_sense!r}) allows no label"
        )
    allowed = np.broadcast_to(row, (T, len(space))).copy()
    return ConstraintMask(allowed, MaskProvenance.SEMLINK)


def completion_allowed(observed_pb: Sequence[str], space: LabelSpace) -> np.ndarray:
    """(T, n_labels) bool matrix: PB side must equal the observed tag exactly."""
    pb_tags = np.array(space.pb_tags, dtype=object)
    obs = np.array(list(observed_pb), dtype=object)
    return obs[:, None] == pb_tags[None, :]


def compile_completion_mask(instance: PredicateInstance, space: LabelSpace) -> ConstraintMask:
    """Mask that pins the PB projection to the instance's observed sequence."""
    if instance.observed_pb is None:
        raise DataError(f"instance {instance.instance_id!r} has no observed PB labels")
    allowed = completion_allowed(instance.observed_pb, space)
    for t in range(allowed.shape[0]):
        if not allowed[t].any():
            raise InfeasibleMaskError(
                f"instance {instance.instance_id!r}: observed PB tag "
                f"{instance.observed_pb[t]!r} at position {t} matches no joint label"
            )
    return ConstraintMask(allowed, MaskProvenance.COMPLETION)


def intersect(a: ConstraintMask, b: ConstraintMask) -> ConstraintMask:
    """Elementwise AND; raises if any position ends up with no allowed label."""
    if a.shape != b.shape:
        raise AlignmentError(f"mask shapes differ: {a.shape} vs {b.shape}")
    allowed = a.allowed & b.allowed
    if not allowed.any(axis=1).all():
        t = int(np.flatnonzero(~allowed.any(axis=1))[0])
        raise InfeasibleMaskError(f"mask intersection empty at position {t}")
    return ConstraintMask(allowed, MaskProvenance.COMBINED)


def count_violations(
    prediction: Sequence[int] | Sequence[tuple[str, str]],
    instance: PredicateInstance,
    mapping: SemlinkMapping,
    space: LabelSpace,
) -> bool:
    """True iff any predicted pair is illegal under the instance's entry.

    ``prediction`` may be joint label indices or raw (vn_tag, pb_tag) pairs;
    the pair form also covers output of separate per-scheme decoders, whose
    tag pairs need not exist in the joint space.
    """
    if len(prediction) != instance.length:
        raise AlignmentError(
            f"instance {instance.instance_id!r}: prediction length "
            f"{len(prediction)} != {instance.length} tokens"
        )
    pairs = mapping.lookup(instance)
    if pairs is None:
        return False
    vn_mentioned = {v for v, _ in pairs}
    pb_mentioned = {p for _, p in pairs}
    for item in prediction:
        if isinstance(item, (int, np.integer)):
            vt, pt = space.labels[int(item)].pair
        else:
            vt, pt = item
        if _pair_disallowed(vt, pt, pairs, vn_mentioned, pb_mentioned):
            return True
    return False
