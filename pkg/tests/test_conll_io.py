from pathlib import Path

import pytest

from jointcrf.conll_io import (parse_corpus, parse_predictions, write_corpus,
                               write_predictions)
from jointcrf.errors import CorpusParseError, DataError
from jointcrf.synth import SynthWorld, sample_corpus

DATA = Path(__file__).parent / "data"
TINY = DATA / "tiny_corpus.tsv"


class TestParseCorpus:
    def test_two_sentences_three_predicates(self):
        insts = parse_corpus(TINY)
        assert len(insts) == 3
        assert [i.length for i in insts] == [5, 5, 3]
        assert [i.predicate_index for i in insts] == [2, 4, 1]
        assert insts[0].pb_sense == "run.01" and insts[0].vn_class == "run-51.3"
        assert insts[1].pb_sense == "give.01"
        assert insts[0].gold_joint[3] == ("B-Theme", "B-Arg1")
        assert insts[1].gold_joint[3] == ("B-Theme", "B-Arg2")

    def test_pb_only_instance(self):
        insts = parse_corpus(TINY)
        third = insts[2]
        assert third.gold_joint is None
        assert third.observed_pb == ("B-Arg1", "Verb", "I-Arg1")
        assert third.vn_class == ""

    def test_zero_predicate_sentence(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("just\t-\t-\nwords\t-\t-\n", encoding="utf-8")
        assert parse_corpus(path) == []

    def test_ragged_row_names_the_line(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text(
            "a\t-\t-\tO\tO\nb\trun.01\trun-51.3\tVerb\tVerb\nc\t-\t-\tO\n",
            encoding="utf-8")
        with pytest.raises(CorpusParseError, match="line 3"):
            parse_corpus(path)

    def test_unknown_tag_rejected(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text(
            "a\trun.01\trun-51.3\tVerb\tVerb\nb\t-\t-\tQ-Theme\tO\n",
            encoding="utf-8")
        with pytest.raises(CorpusParseError, match="unknown tag"):
            parse_corpus(path)

    def test_missing_predicate_marker_rejected(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text(
            "a\trun.01\trun-51.3\tO\tO\nb\t-\t-\tB-Theme\tB-Arg1\n",
            encoding="utf-8")
        with pytest.raises(CorpusParseError, match="predicate marker"):
            parse_corpus(path)

    def test_flag_count_mismatch_rejected(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("a\trun.01\trun-51.3\nb\t-\t-\n", encoding="utf-8")
        with pytest.raises(CorpusParseError, match="predicate rows"):
            parse_corpus(path)

    def test_vn_without_pb_rejected(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text(
            "a\trun.01\trun-51.3\tVerb\t-\nb\t-\t-\tB-Theme\t-\n",
            encoding="utf-8")
        with pytest.raises(CorpusParseError, match="without PB"):
            parse_corpus(path)


class TestRoundTrip:
    def test_fixture_round_trips(self, tmp_path):
        insts = parse_corpus(TINY)
        out = tmp_path / "copy.tsv"
        write_corpus(out, insts)
        again = parse_corpus(out)
        assert again == insts

    def test_synthetic_corpus_round_trips(self, tmp_path):
        corpus = sample_corpus(SynthWorld(), 25, seed=7, pb_only_fraction=0.3)
        out = tmp_path / "synth.tsv"
        write_corpus(out, corpus)
        once = parse_corpus(out)
        out2 = tmp_path / "synth2.tsv"
        write_corpus(out2, once)
        assert parse_corpus(out2) == once
        assert out.read_text() == out2.read_text()

    def test_missing_sense_rejected_on_write(self, tmp_path):
        from jointcrf.instances import PredicateInstance

        inst = PredicateInstance(tokens=("a",), predicate_index=0, pb_sense="")
        with pytest.raises(DataError):
            write_corpus(tmp_path / "x.tsv", [inst])


class TestPredictions:
    def test_predictions_round_trip(self, tmp_path):
        insts = parse_corpus(TINY)
        pairs = []
        for inst in insts:
            seq = [("O", "O")] * inst.length
            seq[inst.predicate_index] = ("Verb", "Verb")
            seq[0] = ("B-Agent", "B-Arg0")
            pairs.append(seq)
        out = tmp_path / "pred.tsv"
        write_predictions(out, insts, pairs)
        got_insts, got_pairs = parse_predictions(out)
        assert [tuple(p) for p in got_pairs] == [tuple(map(tuple, p)) for p in pairs]
        assert [i.tokens for i in got_insts] == [i.tokens for i in insts]

    def test_nonconforming_predictions_are_readable(self, tmp_path):
        # the model may tag the predicate row freely; the reader must not balk
        insts = parse_corpus(TINY)[:1]
        pairs = [[("B-Agent", "B-Arg0")] * insts[0].length]
        out = tmp_path / "pred.tsv"
        write_predictions(out, insts, pairs)
        _, got = parse_predictions(out)
        assert got[0][insts[0].predicate_index] == ("B-Agent", "B-Arg0")

    def test_length_mismatch_rejected(self, tmp_path):
        insts = parse_corpus(TINY)[:1]
        with pytest.raises(Exception):
            write_predictions(tmp_path / "p.tsv", insts, [[("O", "O")]])
