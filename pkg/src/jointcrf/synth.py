"""Synthetic corpora drawn from a known ground-truth chain model.

The toy world has three VN argument roles, two PB argument roles, a
co-occurrence filter that keeps the joint space at 18 labels, and a small
lexicon plus one uncovered predicate. Label sequences are sampled exactly
(forward filtering, backward sampling) from a hand-set transition model
under the structural, lexicon, and predicate-position masks, so generated
gold data never violates its own lexicon entry. Tokens are emitted from
per-label vocabularies with deliberately ambiguous surface forms shared
between the Agent and Patient readings of Arg0; only predicate metadata or
the lexicon can resolve them, which gives constrained decoding something
real to fix on under-trained models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .crf import Lattice, make_lattice, _check_feasible, _masked_scores
from .errors import DataError
from .instances import PredicateInstance
from .labels import (LabelSpace, RoleKind, RoleLabel, Scheme, VERB_TAG,
                     build_label_space, split_tag)
from .semlink import SemlinkMapping, allowed_label_row

FILLERS = ("the", "a", "it", "then")

PREDICATES = (
    # (lemma, vn_class, pb_sense); the last one has no lexicon entry
    ("run", "run-51.3", "run.01"),
    ("give", "give-13.1", "give.01"),
    ("leave", "leave-51.2", "leave.01"),
    ("carry", "carry-11.4", "carry.01"),
    ("sleep", "sleep-40.1", "sleep.01"),
)


def toy_inventories() -> tuple[tuple[RoleLabel, ...], tuple[RoleLabel, ...]]:
    vn = (
        RoleLabel(Scheme.VN, "V", RoleKind.VERB),
        RoleLabel(Scheme.VN, "OUT", RoleKind.OUTSIDE),
        RoleLabel(Scheme.VN, "Agent", RoleKind.CORE),
        RoleLabel(Scheme.VN, "Patient", RoleKind.CORE),
        RoleLabel(Scheme.VN, "Theme", RoleKind.CORE),
    )
    pb = (
        RoleLabel(Scheme.PB, "V", RoleKind.VERB),
        RoleLabel(Scheme.PB, "OUT", RoleKind.OUTSIDE),
        RoleLabel(Scheme.PB, "Arg0", RoleKind.CORE),
        RoleLabel(Scheme.PB, "Arg1", RoleKind.CORE),
    )
    return vn, pb


TOY_FILTER = frozenset({("Agent", "Arg1"), ("Patient", "Arg1"), ("Theme", "Arg0")})


def toy_space() -> LabelSpace:
    vn, pb = toy_inventories()
    return build_label_space(vn, pb, TOY_FILTER)


def toy_semlink() -> SemlinkMapping:
    entries = {
        ("run-51.3", "run.01"): frozenset({("Agent", "Arg0"), ("Theme", "Arg1")}),
        ("give-13.1", "give.01"): frozenset({("Agent", "Arg0"), ("Theme", "Arg1")}),
        ("leave-51.2", "leave.01"): frozenset({("Patient", "Arg0"), ("Theme", "Arg1")}),
        ("carry-11.4", "carry.01"): frozenset({("Patient", "Arg0"), ("Theme", "Arg1")}),
    }
    return SemlinkMapping(entries)


# surface pools shared between labels the lexicon has to disambiguate:
# Arg0 reads as Agent for some predicate classes and Patient for others
AMBIGUOUS_POOLS = (
    ((("B-Agent", "B-Arg0"), ("B-Patient", "B-Arg0")), ("amb_b0", "amb_b1")),
    ((("I-Agent", "I-Arg0"), ("I-Patient", "I-Arg0")), ("amb_i0", "amb_i1")),
    ((("B-Agent", "O"), ("B-Patient", "O")), ("amb_s0",)),
    ((("I-Agent", "O"), ("I-Patient", "O")), ("amb_c0",)),
)


def _label_vocab(vn_tag: str, pb_tag: str) -> tuple[str, ...]:
    def stem(tag):
        pre, role = split_tag(tag)
        return (pre.lower() + role.lower()) if pre else tag.lower()

    base = f"{stem(vn_tag)}_{stem(pb_tag)}"
    return tuple(f"{base}_{k}" for k in range(2))


@dataclass
class SynthWorld:
    """Everything needed to sample and to verify against the generator."""

    space: LabelSpace = field(default_factory=toy_space)
    mapping: SemlinkMapping = field(default_factory=toy_semlink)
    span_bonus: float = 1.5
    ambiguity_rate: float = 0.4
    transitions: np.ndarray = field(init=False)
    _pools: dict = field(init=False, repr=False)

    def __post_init__(self):
        L = len(self.space)
        trans = np.zeros((L, L))
        for a in self.space:
            for b in self.space:
                v_pre, v_role = split_tag(b.vn_tag)
                if v_pre == "I" and split_tag(a.vn_tag)[1] == v_role:
                    trans[a.index, b.index] += self.span_bonus
        self.transitions = trans
        self._pools = {}
        for labels, pool in AMBIGUOUS_POOLS:
            for pair in labels:
                self._pools[pair] = pool

    def sample_tokens(self, pairs, lemma: str, rng: np.random.Generator) -> tuple[str, ...]:
        tokens = []
        for vt, pt in pairs:
            if vt == VERB_TAG:
                tokens.append(lemma)
            elif vt == "O" and pt == "O":
                tokens.append(FILLERS[rng.integers(len(FILLERS))])
            elif (vt, pt) in self._pools and rng.random() < self.ambiguity_rate:
                pool = self._pools[(vt, pt)]
                tokens.append(pool[rng.integers(len(pool))])
            else:
                vocab = _label_vocab(vt, pt)
                tokens.append(vocab[rng.integers(len(vocab))])
        return tuple(tokens)


def sample_path(lattice: Lattice, mask: np.ndarray, rng: np.random.Generator) -> list[int]:
    """Exact sample from the masked chain distribution (FF/BS)."""
    _check_feasible(lattice, mask)
    em, start, trans = _masked_scores(lattice, mask)
    T, L = em.shape
    beta = np.empty_like(em)
    beta[-1] = lattice.end
    for t in range(T - 2, -1, -1):
        beta[t] = logsumexp(trans + (em[t + 1] + beta[t + 1])[None, :], axis=1)

    def draw(logits):
        probs = np.exp(logits - logits.max())
        probs /= probs.sum()
        return int(rng.choice(L, p=probs))

    path = [draw(start + em[0] + beta[0])]
    for t in range(1, T):
        path.append(draw(trans[path[-1]] + em[t] + beta[t]))
    return path


def sample_instance(world: SynthWorld, rng: np.random.Generator,
                    sentence_index: int, min_len: int = 6, max_len: int = 10,
                    covered_only: bool = False) -> PredicateInstance:
    preds = PREDICATES[:-1] if covered_only else PREDICATES
    lemma, vn_class, pb_sense = preds[rng.integers(len(preds))]
    T = int(rng.integers(min_len, max_len + 1))
    u = int(rng.integers(T))
    space = world.space

    mask = np.ones((T, len(space)), dtype=bool)
    verb_index = space.index_of[(VERB_TAG, VERB_TAG)]
    mask[:, verb_index] = False
    mask[u, :] = False
    mask[u, verb_index] = True
    entry = world.mapping.entries.get((vn_class, pb_sense))
    if entry is not None:
        mask &= allowed_label_row(entry, space)[None, :]

    lattice = make_lattice(space, np.zeros((T, len(space))), world.transitions)
    path = sample_path(lattice, mask, rng)
    pairs = tuple(space.labels[i].pair for i in path)
    tokens = world.sample_tokens(pairs, lemma, rng)
    return PredicateInstance(
        tokens=tokens,
        predicate_index=u,
        vn_class=vn_class,
        pb_sense=pb_sense,
        observed_pb=tuple(pt for _, pt in pairs),
        gold_joint=pairs,
        instance_id=f"synth{sentence_index}",
        sentence_index=sentence_index,
    )


def sample_corpus(world: SynthWorld, n: int, seed: int, pb_only_fraction: float = 0.0,
                  start_index: int = 0, **kwargs) -> list[PredicateInstance]:
    """n single-predicate sentences; a fraction keeps only the PB labels."""
    if not 0.0 <= pb_only_fraction <= 1.0:
        raise DataError("pb_only_fraction must be within [0, 1]")
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        inst = sample_instance(world, rng, start_index + k, **kwargs)
        if rng.random() < pb_only_fraction:
            inst = PredicateInstance(
                tokens=inst.tokens, predicate_index=inst.predicate_index,
                vn_class=inst.vn_class, pb_sense=inst.pb_sense,
                observed_pb=inst.observed_pb, gold_joint=None,
                instance_id=inst.instance_id, sentence_index=inst.sentence_index,
            )
        out.append(inst)
    return out
