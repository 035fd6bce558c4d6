"""Joint label inventory: BIO cross-product construction, reduction, indexing.

A joint label is a pair of BIO tags, one per scheme (VN, PB). The full
cross-product of the two BIO-expanded tag sets is reduced by three rules:

1. mixed-prefix pairs (B-*, I-*) / (I-*, B-*) are dropped, so a span on one
   scheme never starts strictly inside a span of the other;
2. the predicate tag is fused: ``Verb`` only ever pairs with ``Verb``;
3. role pairs listed in an explicit co-occurrence filter are dropped.

Spaces are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import AlignmentError, DataError, InventoryError, UnknownRoleError

OUTSIDE_TAG = "O"
VERB_TAG = "Verb"


class Scheme(str, Enum):
    VN = "VN"
    PB = "PB"


class RoleKind(str, Enum):
    CORE = "CoreArgument"
    MODIFIER = "Modifier"
    VERB = "Verb"
    OUTSIDE = "Outside"


@dataclass(frozen=True)
class RoleLabel:
    scheme: Scheme
    name: str
    kind: RoleKind


@dataclass(frozen=True)
class JointLabel:
    """One BIO-tagged (VN, PB) pair, indexed within its LabelSpace."""

    vn_tag: str
    pb_tag: str
    index: int

    @property
    def pair(self) -> tuple[str, str]:
        return (self.vn_tag, self.pb_tag)


def split_tag(tag: str) -> tuple[str | None, str | None]:
    """Return (prefix, role name); prefix/role are None for O and Verb."""
    if tag.startswith("B-"):
        return "B", tag[2:]
    if tag.startswith("I-"):
        return "I", tag[2:]
    return None, None


def tag_role(tag: str) -> str | None:
    """Role name carried by a BIO tag, or None for O / Verb."""
    return split_tag(tag)[1]


def expand_bio(inventory: Sequence[RoleLabel]) -> list[str]:
    """BIO expansion of one scheme: O and Verb stay bare, roles get B-/I-."""
    tags = []
    for role in inventory:
        if role.kind is RoleKind.OUTSIDE:
            tags.append(OUTSIDE_TAG)
        elif role.kind is RoleKind.VERB:
            tags.append(VERB_TAG)
        else:
            tags.append(f"B-{role.name}")
            tags.append(f"I-{role.name}")
    return sorted(tags)


def _validate_inventory(inventory: Sequence[RoleLabel], scheme: Scheme) -> None:
    if not inventory:
        raise InventoryError(f"{scheme.value} inventory is empty")
    names = [r.name for r in inventory]
    dupes = [n for n, c in Counter(names).items() if c > 1]
    if dupes:
        raise InventoryError(f"duplicate {scheme.value} role names: {sorted(dupes)}")
    if any(not r.name for r in inventory):
        raise InventoryError(f"{scheme.value} inventory contains an empty role name")
    for kind in (RoleKind.VERB, RoleKind.OUTSIDE):
        n = sum(1 for r in inventory if r.kind is kind)
        if n != 1:
            raise InventoryError(
                f"{scheme.value} inventory needs exactly one {kind.value} label, found {n}"
            )


@dataclass(eq=False)
class TagSpace:
    """An ordered single-scheme BIO tag list with index lookup."""

    tags: tuple[str, ...]
    index_of: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index_of = {t: i for i, t in enumerate(self.tags)}

    def __len__(self) -> int:
        return len(self.tags)

    def indices(self, tags: Iterable[str]) -> list[int]:
        try:
            return [self.index_of[t] for t in tags]
        except KeyError as exc:
            raise DataError(f"tag {exc.args[0]!r} not in tag space") from exc


@dataclass(eq=False)
class LabelSpace:
    """The reduced joint inventory plus index maps and per-side tag views."""

    labels: tuple[JointLabel, ...]
    vn_inventory: tuple[RoleLabel, ...]
    pb_inventory: tuple[RoleLabel, ...]
    cooccurrence_filter: frozenset[tuple[str, str]]
    index_of: dict[tuple[str, str], int] = field(init=False, repr=False)
    vn_tags: tuple[str, ...] = field(init=False, repr=False)
    pb_tags: tuple[str, ...] = field(init=False, repr=False)

    def __post_init__(self):
        self.index_of = {lab.pair: lab.index for lab in self.labels}
        self.vn_tags = tuple(lab.vn_tag for lab in self.labels)
        self.pb_tags = tuple(lab.pb_tag for lab in self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def label_at(self, index: int) -> JointLabel:
        return self.labels[index]

    def indices(self, pairs: Iterable[tuple[str, str]]) -> list[int]:
        try:
            return [self.index_of[tuple(p)] for p in pairs]
        except KeyError as exc:
            raise DataError(f"label pair {exc.args[0]!r} not in label space") from exc

    def tag_space(self, scheme: Scheme) -> TagSpace:
        inv = self.vn_inventory if scheme is Scheme.VN else self.pb_inventory
        return TagSpace(tuple(expand_bio(inv)))

    def role_names(self, scheme: Scheme, kinds: tuple[RoleKind, ...] = (RoleKind.CORE, RoleKind.MODIFIER)) -> set[str]:
        inv = self.vn_inventory if scheme is Scheme.VN else self.pb_inventory
        return {r.name for r in inv if r.kind in kinds}


def project(label: JointLabel, scheme: Scheme) -> str:
    """The VN or PB side of a joint label, BIO prefix preserved."""
    return label.vn_tag if scheme is Scheme.VN else label.pb_tag


def _argument_names(inventory: Sequence[RoleLabel]) -> set[str]:
    return {r.name for r in inventory if r.kind in (RoleKind.CORE, RoleKind.MODIFIER)}


def build_label_space(
    vn_inventory: Sequence[RoleLabel],
    pb_inventory: Sequence[RoleLabel],
    cooccurrence_filter: Iterable[tuple[str, str]] = (),
) -> LabelSpace:
    """Cross-product the BIO-expanded inventories and apply the reduction rules.

    Ordering is lexicographic by (vn_tag, pb_tag) so index assignments are
    stable across runs. Raises InventoryError on malformed inventories and
    UnknownRoleError when the filter names a role missing from either side.
    """
    _validate_inventory(vn_inventory, Scheme.VN)
    _validate_inventory(pb_inventory, Scheme.PB)
    filt = frozenset((v, p) for v, p in cooccurrence_filter)

    vn_args = _argument_names(vn_inventory)
    pb_args = _argument_names(pb_inventory)
    for v, p in filt:
        if v not in vn_args:
            raise UnknownRoleError(f"filter references unknown VN role {v!r}")
        if p not in pb_args:
            raise UnknownRoleError(f"filter references unknown PB role {p!r}")

    kept: list[tuple[str, str]] = []
    for vt in expand_bio(vn_inventory):
        v_pre, v_role = split_tag(vt)
        for pt in expand_bio(pb_inventory):
            p_pre, p_role = split_tag(pt)
            # rule 1: a span on one side never starts strictly inside the other
            if v_pre and p_pre and v_pre != p_pre:
                continue
            # rule 2: the predicate tag is fused, Verb only pairs with Verb
            if (vt == VERB_TAG) != (pt == VERB_TAG):
                continue
            # rule 3: explicitly disabled role co-occurrences
            if v_role and p_role and (v_role, p_role) in filt:
                continue
            kept.append((vt, pt))

    kept.sort()
    labels = tuple(JointLabel(vt, pt, i) for i, (vt, pt) in enumerate(kept))
    return LabelSpace(labels, tuple(vn_inventory), tuple(pb_inventory), filt)


def derive_cooccurrence_filter(
    corpus: Sequence["PredicateInstance"],
    vn_inventory: Sequence[RoleLabel],
    pb_inventory: Sequence[RoleLabel],
    drop_modifier_pairs: bool = False,
) -> set[tuple[str, str]]:
    """Role pairs with zero gold co-occurrence, to feed build_label_space.

    Counts (VN role, PB role) pairs over positions of every gold joint
    sequence; pairs involving O or Verb never enter the filter. With
    ``drop_modifier_pairs`` the VN-role x PB-modifier cross pairs are added
    as well, but corpus attestation always wins: a gold-attested pair is
    never filtered, so the returned set can safely be applied to the
    training space.
    """
    seen: set[tuple[str, str]] = set()
    for inst in corpus:
        if inst.gold_joint is None:
            raise DataError(f"instance {inst.instance_id} lacks gold joint labels")
        if len(inst.gold_joint) != len(inst.tokens):
            raise AlignmentError(
                f"instance {inst.instance_id}: gold length {len(inst.gold_joint)} "
                f"!= {len(inst.tokens)} tokens"
            )
        for vt, pt in inst.gold_joint:
            v_role, p_role = tag_role(vt), tag_role(pt)
            if v_role and p_role:
                seen.add((v_role, p_role))

    vn_args = sorted(_argument_names(vn_inventory))
    pb_args = sorted(_argument_names(pb_inventory))
    filt = {(v, p) for v in vn_args for p in pb_args if (v, p) not in seen}
    if not drop_modifier_pairs:
        return filt
    modifiers = {r.name for r in pb_inventory if r.kind is RoleKind.MODIFIER}
    filt.update(
        (v, p) for v in vn_args for p in modifiers if (v, p) not in seen
    )
    return filt


# ---------------------------------------------------------------------------
# inventory / filter files: UTF-8, tab-separated, '#' comments


def load_inventories(path) -> tuple[tuple[RoleLabel, ...], tuple[RoleLabel, ...]]:
    """Read `<scheme>\\t<name>\\t<kind>` lines into (vn, pb) inventories."""
    by_scheme: dict[Scheme, list[RoleLabel]] = {Scheme.VN: [], Scheme.PB: []}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise InventoryError(f"{path}:{lineno}: expected 3 tab-separated fields")
            scheme_s, name, kind_s = parts
            try:
                scheme = Scheme(scheme_s)
                kind = RoleKind(kind_s)
            except ValueError as exc:
                raise InventoryError(f"{path}:{lineno}: {exc}") from exc
            by_scheme[scheme].append(RoleLabel(scheme, name, kind))
    return tuple(by_scheme[Scheme.VN]), tuple(by_scheme[Scheme.PB])


def write_inventories(path, vn_inventory, pb_inventory) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# scheme\tname\tkind\n")
        for role in list(vn_inventory) + list(pb_inventory):
            fh.write(f"{role.scheme.value}\t{role.name}\t{role.kind.value}\n")


def load_cooccurrence_filter(path) -> set[tuple[str, str]]:
    """Read `<vn_name>\\t<pb_name>` pairs, '#' comments allowed."""
    pairs: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise InventoryError(f"{path}:{lineno}: expected 2 tab-separated fields")
            pairs.add((parts[0], parts[1]))
    return pairs


def write_cooccurrence_filter(path, pairs: Iterable[tuple[str, str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# vn_role\tpb_role\n")
        for v, p in sorted(pairs):
            fh.write(f"{v}\t{p}\n")
