"""One tagging problem: a sentence, a predicate, and its label annotations."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import AlignmentError, DataError
from .labels import VERB_TAG


@dataclass(frozen=True)
class PredicateInstance:
    """A token sequence with one marked predicate and optional gold labels.

    ``gold_joint`` holds (vn_tag, pb_tag) pairs; ``observed_pb`` holds bare
    PB tags for partially labeled data and completion mode. Both, when
    present, align 1:1 with ``tokens``.
    """

    tokens: tuple[str, ...]
    predicate_index: int
    vn_class: str = ""
    pb_sense: str = ""
    observed_pb: tuple[str, ...] | None = None
    gold_joint: tuple[tuple[str, str], ...] | None = None
    instance_id: str = ""
    sentence_index: int = 0

    def __post_init__(self):
        T = len(self.tokens)
        if T == 0:
            raise DataError(f"instance {self.instance_id!r} has no tokens")
        if not 0 <= self.predicate_index < T:
            raise DataError(
                f"instance {self.instance_id!r}: predicate index "
                f"{self.predicate_index} outside 0..{T - 1}"
            )
        if self.observed_pb is not None and len(self.observed_pb) != T:
            raise AlignmentError(
                f"instance {self.instance_id!r}: observed PB length "
                f"{len(self.observed_pb)} != {T} tokens"
            )
        if self.gold_joint is not None:
            if len(self.gold_joint) != T:
                raise AlignmentError(
                    f"instance {self.instance_id!r}: gold length "
                    f"{len(self.gold_joint)} != {T} tokens"
                )
            for i, (vt, pt) in enumerate(self.gold_joint):
                fused = vt == VERB_TAG and pt == VERB_TAG
                if (i == self.predicate_index) != fused:
                    raise DataError(
                        f"instance {self.instance_id!r}: the fused predicate label "
                        f"must appear exactly at position {self.predicate_index}"
                    )

    @property
    def length(self) -> int:
        return len(self.tokens)

    @property
    def gold_vn(self) -> tuple[str, ...] | None:
        if self.gold_joint is None:
            return None
        return tuple(vt for vt, _ in self.gold_joint)

    @property
    def gold_pb(self) -> tuple[str, ...] | None:
        if self.gold_joint is None:
            return None
        return tuple(pt for _, pt in self.gold_joint)
