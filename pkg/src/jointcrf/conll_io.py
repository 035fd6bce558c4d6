"""Column-format corpus ingestion and serialization.

Format: tab-separated, one token per line, blank line between sentences.
Columns: TOKEN, PRED_FLAG, VN_CLASS, then two BIO columns (VN, PB) per
predicate. PRED_FLAG carries the PB roleset id (``lemma.sense``) on each
predicate's own row and ``-`` elsewhere; VN_CLASS carries the VN class on
predicate rows (``-`` when unknown). A VN column of all ``-`` marks PB-only
annotation; ``#`` lines are comments. Predicates are ordered by their row,
and the k-th flagged row owns the k-th column pair.
"""

from __future__ import annotations

from typing import Iterable, Sequence, TextIO

from .errors import AlignmentError, CorpusParseError, DataError
from .instances import PredicateInstance
from .labels import OUTSIDE_TAG, VERB_TAG

ABSENT = "-"


def _valid_tag(tag: str) -> bool:
    if tag in (OUTSIDE_TAG, VERB_TAG):
        return True
    return tag.startswith(("B-", "I-")) and len(tag) > 2


def _read_sentences(path) -> Iterable[tuple[int, list[tuple[int, list[str]]]]]:
    """Yield (sentence_index, [(line_number, fields), ...]) blocks."""
    sent: list[tuple[int, list[str]]] = []
    index = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line.startswith("#"):
                continue
            if not line.strip():
                if sent:
                    yield index, sent
                    index += 1
                    sent = []
                continue
            sent.append((lineno, line.split("\t")))
    if sent:
        yield index, sent


def _parse_sentence(sent_index: int, rows: list[tuple[int, list[str]]], strict_gold: bool):
    first_line = rows[0][0]
    n_cols = len(rows[0][1])
    for lineno, fields in rows:
        if len(fields) != n_cols:
            raise CorpusParseError(
                f"expected {n_cols} columns, found {len(fields)}", line=lineno)
    if n_cols < 3 or (n_cols - 3) % 2 != 0:
        raise CorpusParseError(
            f"column count {n_cols} is not 3 + 2 * n_predicates", line=first_line)
    n_preds = (n_cols - 3) // 2

    tokens = tuple(fields[0] for _, fields in rows)
    flagged = [(r, fields) for r, (_, fields) in zip(range(len(rows)), rows)
               if fields[1] != ABSENT]
    if len(flagged) != n_preds:
        raise CorpusParseError(
            f"{len(flagged)} predicate rows but columns for {n_preds} predicates",
            line=first_line)

    instances = []
    raw_pairs = []
    for k, (pred_row, pred_fields) in enumerate(flagged):
        sense = pred_fields[1]
        vn_class = "" if pred_fields[2] == ABSENT else pred_fields[2]
        vn_col = [fields[3 + 2 * k] for _, fields in rows]
        pb_col = [fields[4 + 2 * k] for _, fields in rows]
        for col in (vn_col, pb_col):
            for (lineno, _), tag in zip(rows, col):
                if tag != ABSENT and not _valid_tag(tag):
                    raise CorpusParseError(f"unknown tag {tag!r}", line=lineno)
        vn_absent = all(t == ABSENT for t in vn_col)
        pb_absent = all(t == ABSENT for t in pb_col)
        if not vn_absent and any(t == ABSENT for t in vn_col):
            raise CorpusParseError(
                f"predicate {k}: VN column mixes '-' with tags", line=first_line)
        if not pb_absent and any(t == ABSENT for t in pb_col):
            raise CorpusParseError(
                f"predicate {k}: PB column mixes '-' with tags", line=first_line)
        if not vn_absent and pb_absent:
            raise CorpusParseError(
                f"predicate {k}: VN annotation without PB annotation", line=first_line)

        gold_joint = None
        observed_pb = None
        if not pb_absent:
            observed_pb = tuple(pb_col)
            if strict_gold and pb_col[pred_row] != VERB_TAG:
                raise CorpusParseError(
                    f"predicate {k}: missing predicate marker in PB column",
                    line=rows[pred_row][0])
        if not vn_absent:
            gold_joint = tuple(zip(vn_col, pb_col))
            if strict_gold and vn_col[pred_row] != VERB_TAG:
                raise CorpusParseError(
                    f"predicate {k}: missing predicate marker in VN column",
                    line=rows[pred_row][0])

        pairs = tuple(zip(vn_col, pb_col))
        raw_pairs.append(pairs if not (vn_absent and pb_absent) else None)
        try:
            instances.append(PredicateInstance(
                tokens=tokens,
                predicate_index=pred_row,
                vn_class=vn_class,
                pb_sense=sense,
                observed_pb=observed_pb,
                gold_joint=gold_joint if strict_gold else None,
                instance_id=f"s{sent_index}.p{k}",
                sentence_index=sent_index,
            ))
        except (DataError, AlignmentError) as exc:
            raise CorpusParseError(str(exc), line=first_line) from exc
    return instances, raw_pairs


def parse_corpus(path) -> list[PredicateInstance]:
    """One PredicateInstance per predicate per sentence, in file order."""
    instances: list[PredicateInstance] = []
    for sent_index, rows in _read_sentences(path):
        parsed, _ = _parse_sentence(sent_index, rows, strict_gold=True)
        instances.extend(parsed)
    return instances


def parse_predictions(path) -> tuple[list[PredicateInstance], list[tuple[tuple[str, str], ...]]]:
    """Read a predictions file: instances without gold plus raw tag pairs.

    Predicted label columns need not satisfy gold invariants (a model may
    tag the predicate row freely), so they come back as plain pairs.
    """
    instances: list[PredicateInstance] = []
    pairs: list[tuple[tuple[str, str], ...]] = []
    for sent_index, rows in _read_sentences(path):
        parsed, raw = _parse_sentence(sent_index, rows, strict_gold=False)
        for inst, p in zip(parsed, raw):
            if p is None:
                raise CorpusParseError(
                    f"instance {inst.instance_id}: predictions file has empty label columns")
            instances.append(inst)
            pairs.append(p)
    return instances, pairs


def _sentence_groups(instances: Sequence[PredicateInstance]):
    groups: list[list[PredicateInstance]] = []
    for inst in instances:
        if groups and groups[-1][0].sentence_index == inst.sentence_index:
            if groups[-1][0].tokens != inst.tokens:
                raise DataError(
                    f"sentence {inst.sentence_index}: instances disagree on tokens")
            groups[-1].append(inst)
        else:
            groups.append([inst])
    return groups


def _write_sentence(fh: TextIO, group: list[PredicateInstance],
                    columns: list[tuple[Sequence[str], Sequence[str]]]) -> None:
    group_sorted = sorted(range(len(group)), key=lambda i: group[i].predicate_index)
    seen = set()
    for i in group_sorted:
        u = group[i].predicate_index
        if u in seen:
            raise DataError(
                f"sentence {group[i].sentence_index}: duplicate predicate row {u}")
        seen.add(u)
    tokens = group[0].tokens
    flags = {group[i].predicate_index: group[i] for i in group_sorted}
    for t, token in enumerate(tokens):
        inst = flags.get(t)
        row = [token]
        if inst is None:
            row += [ABSENT, ABSENT]
        else:
            if not inst.pb_sense:
                raise DataError(
                    f"instance {inst.instance_id!r}: corpus format needs a PB sense")
            row += [inst.pb_sense, inst.vn_class or ABSENT]
        for i in group_sorted:
            vn_col, pb_col = columns[i]
            row += [vn_col[t], pb_col[t]]
        fh.write("\t".join(row) + "\n")
    fh.write("\n")


def _instance_columns(inst: PredicateInstance) -> tuple[list[str], list[str]]:
    if inst.gold_joint is not None:
        return [vt for vt, _ in inst.gold_joint], [pt for _, pt in inst.gold_joint]
    if inst.observed_pb is not None:
        return [ABSENT] * inst.length, list(inst.observed_pb)
    return [ABSENT] * inst.length, [ABSENT] * inst.length


def write_corpus(path, instances: Sequence[PredicateInstance]) -> None:
    """Serialize instances back to the column format (round-trips parse_corpus)."""
    with open(path, "w", encoding="utf-8") as fh:
        for group in _sentence_groups(instances):
            _write_sentence(fh, group, [_instance_columns(inst) for inst in group])


def write_predictions(path, instances: Sequence[PredicateInstance],
                      pairs: Sequence[Sequence[tuple[str, str]]]) -> None:
    """Serialize decoded (vn, pb) pair sequences with the original metadata."""
    if len(instances) != len(pairs):
        raise AlignmentError(f"{len(instances)} instances vs {len(pairs)} predictions")
    with open(path, "w", encoding="utf-8") as fh:
        offset = 0
        for group in _sentence_groups(instances):
            cols = []
            for inst, seq in zip(group, pairs[offset:offset + len(group)]):
                if len(seq) != inst.length:
                    raise AlignmentError(
                        f"instance {inst.instance_id!r}: prediction length mismatch")
                cols.append(([vt for vt, _ in seq], [pt for _, pt in seq]))
            _write_sentence(fh, group, cols)
            offset += len(group)
    return None
