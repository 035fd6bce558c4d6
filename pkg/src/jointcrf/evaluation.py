"""Span F1 for either scheme, lexicon violation rate, completion scoring.

Span scoring follows the usual CoNLL convention: spans are maximal
B-X (I-X)* runs, a predicted span is correct only on exact (label, start,
end) match, and precision/recall are micro-averaged over all instances. The
bare O and Verb tags never form spans.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AlignmentError, InfeasibleMaskError
from .instances import PredicateInstance
from .labels import LabelSpace, OUTSIDE_TAG, VERB_TAG
from .model import Model, complete_instance, decode_joint
from .semlink import SemlinkMapping, count_violations

logger = logging.getLogger(__name__)

Span = tuple[str, int, int]


def extract_spans(tags: Sequence[str]) -> set[Span]:
    """Maximal B-X (I-X)* runs as (label, start, end_inclusive) triples.

    Stray I-X tokens that do not continue a same-label span are ignored, per
    the strict reading of the run grammar; O and Verb are never span labels.
    """
    spans: set[Span] = set()
    label, start = None, -1
    for i, tag in enumerate(tags):
        if tag.startswith("B-"):
            if label is not None:
                spans.add((label, start, i - 1))
            label, start = tag[2:], i
        elif tag.startswith("I-") and label == tag[2:]:
            continue
        else:
            if label is not None:
                spans.add((label, start, i - 1))
            label, start = None, -1
    if label is not None:
        spans.add((label, start, len(tags) - 1))
    return spans


@dataclass
class PRF:
    precision: float
    recall: float
    f1: float

    def as_dict(self) -> dict[str, float]:
        return {"p": self.precision, "r": self.recall, "f1": self.f1}


def _prf(n_correct: int, n_pred: int, n_gold: int) -> PRF:
    p = n_correct / n_pred if n_pred else 0.0
    r = n_correct / n_gold if n_gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f1)


def span_f1(predictions: Sequence[Sequence[str]],
            golds: Sequence[Sequence[str]]) -> PRF:
    """Micro-averaged exact-span precision/recall/F1 over aligned sequences."""
    if len(predictions) != len(golds):
        raise AlignmentError(f"{len(predictions)} predictions vs {len(golds)} golds")
    n_correct = n_pred = n_gold = 0
    for pred, gold in zip(predictions, golds):
        if len(pred) != len(gold):
            raise AlignmentError(f"sequence lengths differ: {len(pred)} vs {len(gold)}")
        p_spans = extract_spans(pred)
        g_spans = extract_spans(gold)
        n_correct += len(p_spans & g_spans)
        n_pred += len(p_spans)
        n_gold += len(g_spans)
    return _prf(n_correct, n_pred, n_gold)


def violation_rate(
    predictions: Sequence[Sequence],
    instances: Sequence[PredicateInstance],
    mapping: SemlinkMapping,
    space: LabelSpace,
) -> float:
    """Percent of lexicon-covered predicates whose prediction violates it.

    Predicates without a lexicon entry are excluded from the denominator;
    returns 0.0 when nothing is covered.
    """
    if len(predictions) != len(instances):
        raise AlignmentError(f"{len(predictions)} predictions vs {len(instances)} instances")
    n_covered = n_bad = 0
    for pred, inst in zip(predictions, instances):
        if not mapping.covers(inst):
            continue
        n_covered += 1
        if count_violations(pred, inst, mapping, space):
            n_bad += 1
    return 100.0 * n_bad / n_covered if n_covered else 0.0


def violation_diagnostics(
    predictions: Sequence[Sequence],
    instances: Sequence[PredicateInstance],
    mapping: SemlinkMapping,
    space: LabelSpace,
) -> list[dict]:
    """Per-instance audit rows: which pair broke which lexicon entry."""
    from .labels import tag_role

    rows = []
    for pred, inst in zip(predictions, instances):
        pairs = mapping.lookup(inst)
        if pairs is None:
            continue
        vn_mentioned = {v for v, _ in pairs}
        pb_mentioned = {p for _, p in pairs}
        for t, item in enumerate(pred):
            if isinstance(item, (int, np.integer)):
                vt, pt = space.labels[int(item)].pair
            else:
                vt, pt = item
            v, p = tag_role(vt), tag_role(pt)
            if v is None or p is None:
                continue
            if (v in vn_mentioned or p in pb_mentioned) and (v, p) not in pairs:
                rows.append({
                    "instance_id": inst.instance_id, "position": t,
                    "vn_tag": vt, "pb_tag": pt,
                    "entry": f"{inst.vn_class}|{inst.pb_sense}",
                    "legal_pairs": sorted(map(list, pairs)),
                })
    return rows


def completion_f1(
    model: Model,
    instances: Sequence[PredicateInstance],
    mapping: SemlinkMapping | None,
    space: LabelSpace | None = None,
) -> float:
    """VN span F1 of completion-mode decoding against gold VN sequences.

    Instances with an infeasible mask are reported and scored as all-O.
    """
    preds, golds = [], []
    for inst in instances:
        if inst.observed_pb is None or inst.gold_vn is None:
            raise AlignmentError(
                f"instance {inst.instance_id!r} needs observed PB and gold VN tags"
            )
        try:
            vn_tags, _ = complete_instance(model, inst, mapping)
        except InfeasibleMaskError as exc:
            logger.warning("instance %s: infeasible completion (%s); scoring all-O",
                           inst.instance_id, exc)
            vn_tags = [OUTSIDE_TAG] * inst.length
        preds.append(vn_tags)
        golds.append(list(inst.gold_vn))
    return span_f1(preds, golds).f1


def evaluate_tag_pairs(
    pred_pairs: Sequence[Sequence[tuple[str, str]]],
    instances: Sequence[PredicateInstance],
    mapping: SemlinkMapping | None,
    space: LabelSpace,
) -> dict:
    """The standard report over already-decoded (vn, pb) tag pair sequences.

    VN F1 is computed over instances that carry gold VN annotation; PB F1
    additionally uses observed-PB-only instances as gold where available.
    """
    vn_pred, vn_gold, pb_pred, pb_gold = [], [], [], []
    for pairs, inst in zip(pred_pairs, instances):
        vn_tags = [vt for vt, _ in pairs]
        pb_tags = [pt for _, pt in pairs]
        if inst.gold_joint is not None:
            vn_pred.append(vn_tags)
            vn_gold.append(list(inst.gold_vn))
            pb_pred.append(pb_tags)
            pb_gold.append(list(inst.gold_pb))
        elif inst.observed_pb is not None:
            pb_pred.append(pb_tags)
            pb_gold.append(list(inst.observed_pb))
    report = {
        "vn": span_f1(vn_pred, vn_gold).as_dict(),
        "pb": span_f1(pb_pred, pb_gold).as_dict(),
        "n_instances": len(instances),
    }
    if mapping is not None:
        report["rho"] = violation_rate(pred_pairs, instances, mapping, space)
        report["n_covered"] = sum(1 for inst in instances if mapping.covers(inst))
    else:
        report["rho"] = None
        report["n_covered"] = 0
    return report


def decode_corpus(
    model: Model,
    instances: Sequence[PredicateInstance],
    mapping: SemlinkMapping | None = None,
    use_semlink: bool = True,
    completion: bool = False,
) -> list[list[tuple[str, str]]]:
    """Decode every instance to (vn_tag, pb_tag) pair sequences."""
    from .model import tag_instance

    out = []
    for inst in instances:
        if completion:
            vn_tags, pb_tags = complete_instance(model, inst, mapping if use_semlink else None)
        else:
            vn_tags, pb_tags = tag_instance(model, inst, mapping, use_semlink)
        out.append(list(zip(vn_tags, pb_tags)))
    return out
