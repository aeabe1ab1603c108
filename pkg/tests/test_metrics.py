import itertools
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speechee.metrics import (
    CorpusMismatchError,
    MetricKind,
    match_counts,
    match_counts_partial,
    project,
    prf,
    score_corpus,
)
from speechee.schema import EventRecord


def brute_force_tp(pred: list, gold: list) -> int:
    """Exhaustive optimal one-to-one matching under exact equality.

    Independent oracle: tries every injective assignment of predictions to
    gold items and returns the best number of equal pairs.
    """
    if len(pred) > len(gold):
        pred, gold = gold, pred
    best = 0
    for perm in itertools.permutations(range(len(gold)), len(pred)):
        best = max(best, sum(1 for i, j in zip(range(len(pred)), perm) if pred[i] == gold[j]))
    return best


class TestProject:
    def test_trig_c(self, transport_record):
        assert project([transport_record], MetricKind.TRIG_C) == Counter(
            {("transport", "returned"): 1}
        )

    @pytest.mark.parametrize("kind", list(MetricKind))
    def test_empty_records(self, kind):
        assert project([], kind) == Counter()

    def test_arg_c(self):
        rec = EventRecord(
            "Transport", "returned", (("Destination", "Los Angeles"), ("Origin", "Mexico"))
        )
        assert project([rec], MetricKind.ARG_C) == Counter(
            {
                ("transport", "destination", "los angeles"): 1,
                ("transport", "origin", "mexico"): 1,
            }
        )

    def test_multiplicity_preserved(self):
        recs = [EventRecord("Meet", "met", ()), EventRecord("Meet", "met", ())]
        assert project(recs, MetricKind.TRIG_C) == Counter({("meet", "met"): 2})

    def test_normalization_applied(self):
        rec = EventRecord("Transport", "  Returned ", (("Origin", "MEXICO"),))
        assert project([rec], MetricKind.TRIG_I) == Counter({"returned": 1})
        assert project([rec], MetricKind.ARG_I) == Counter({"mexico": 1})


class TestMatchCounts:
    def test_identical(self):
        c = Counter({"a": 2, "b": 1})
        assert match_counts(c, c) == (3, 0, 0)

    def test_empty_prediction(self):
        assert match_counts(Counter(), Counter({"a": 1, "b": 1})) == (0, 0, 2)

    def test_duplicates_penalized(self):
        # hand-check via the exhaustive oracle: pred {x,x,y}, gold {x,z} -> tp 1
        pred, gold = ["x", "x", "y"], ["x", "z"]
        assert brute_force_tp(pred, gold) == 1
        assert match_counts(Counter(pred), Counter(gold)) == (1, 2, 1)

    @given(
        st.lists(st.sampled_from("abcd"), max_size=8),
        st.lists(st.sampled_from("abcd"), max_size=8),
    )
    @settings(max_examples=200, deadline=None)
    def test_agrees_with_exhaustive_oracle(self, pred, gold):
        tp, fp, fn = match_counts(Counter(pred), Counter(gold))
        assert tp == brute_force_tp(pred, gold)
        assert fp == len(pred) - tp
        assert fn == len(gold) - tp


class TestPrf:
    def test_zero_denominators(self):
        assert prf(0, 0, 0) == (0.0, 0.0, 0.0)

    def test_hand_values(self):
        p, r, f1 = prf(1, 1, 1)
        assert (p, r) == (0.5, 0.5)
        assert f1 == pytest.approx(0.5)


class TestScoreCorpus:
    def _corpus(self):
        gold = {
            "i1": [
                EventRecord("Transport", "returned", (("Destination", "Los Angeles"),)),
                EventRecord("Arrest-Jail", "capture", ()),
            ],
            "i2": [EventRecord("Elect", "elections", (("Person", "Erdogan"),))],
        }
        pred = {
            "i1": [EventRecord("Transport", "returned", (("Destination", "Los Angeles"),))],
            "i2": [EventRecord("Meet", "elections", ())],
        }
        return pred, gold

    def test_perfect_prediction(self):
        _, gold = self._corpus()
        report = score_corpus(gold, gold)
        for kind in MetricKind:
            assert report.f1(kind) == 1.0

    def test_empty_predictions(self):
        _, gold = self._corpus()
        report = score_corpus({k: [] for k in gold}, gold)
        for kind in MetricKind:
            counts = report[kind]
            assert (counts.precision, counts.recall, counts.f1) == (0.0, 0.0, 0.0)

    def test_hand_computed_two_instance_corpus(self):
        # Trig-I: gold {returned, capture} + {elections}; pred {returned} + {elections}
        # -> tp 2, fp 0, fn 1 -> P 1.0, R 2/3, F1 0.8
        pred, gold = self._corpus()
        report = score_corpus(pred, gold)
        trig_i = report[MetricKind.TRIG_I]
        assert (trig_i.tp, trig_i.fp, trig_i.fn) == (2, 0, 1)
        assert trig_i.precision == 1.0
        assert trig_i.recall == pytest.approx(2 / 3)
        assert trig_i.f1 == pytest.approx(0.8)
        # Trig-C: (transport, returned) matches; (meet, elections) vs (elect, elections)
        # -> tp 1, fp 1, fn 2
        trig_c = report[MetricKind.TRIG_C]
        assert (trig_c.tp, trig_c.fp, trig_c.fn) == (1, 1, 2)
        assert trig_c.f1 == pytest.approx(2 * (1 / 2) * (1 / 3) / (1 / 2 + 1 / 3))
        # ArgC: pred has the one correct triple; gold has two
        arg_c = report[MetricKind.ARG_C]
        assert (arg_c.tp, arg_c.fp, arg_c.fn) == (1, 0, 1)

    def test_mismatched_ids_raise(self):
        pred, gold = self._corpus()
        del pred["i2"]
        with pytest.raises(CorpusMismatchError):
            score_corpus(pred, gold)

    def test_duplicating_corpus_leaves_scores_unchanged(self):
        pred, gold = self._corpus()
        report1 = score_corpus(pred, gold)
        pred2 = dict(pred) | {f"{k}-copy": v for k, v in pred.items()}
        gold2 = dict(gold) | {f"{k}-copy": v for k, v in gold.items()}
        report2 = score_corpus(pred2, gold2)
        for kind in MetricKind:
            assert report1[kind].precision == report2[kind].precision
            assert report1[kind].recall == report2[kind].recall
            assert report1[kind].f1 == report2[kind].f1

    def test_instance_order_irrelevant(self):
        pred, gold = self._corpus()
        fwd = score_corpus(pred, gold)
        rev = score_corpus(
            dict(reversed(pred.items())), dict(reversed(gold.items()))
        )
        assert fwd.to_dict() == rev.to_dict()

    def test_f1_one_iff_multisets_equal(self):
        gold = {"i": [EventRecord("Meet", "met", ())]}
        pred_dup = {"i": [EventRecord("Meet", "met", ()), EventRecord("Meet", "met", ())]}
        report = score_corpus(pred_dup, gold)
        assert report.f1(MetricKind.TRIG_C) < 1.0

    def test_report_roundtrip(self):
        pred, gold = self._corpus()
        report = score_corpus(pred, gold)
        from speechee.metrics import MetricReport

        assert MetricReport.from_dict(report.to_dict()).to_dict() == report.to_dict()


class TestPartialOverlapMode:
    def test_near_miss_credited(self):
        pred = Counter({"los angele": 1})
        gold = Counter({"los angeles": 1})
        assert match_counts(pred, gold) == (0, 1, 1)
        tp, fp, fn = match_counts_partial(pred, gold, overlap_threshold=0.8)
        assert (tp, fp, fn) == (1, 0, 0)

    def test_one_to_one_under_partial(self):
        pred = Counter({"los angeles": 2})
        gold = Counter({"los angeles": 1})
        tp, fp, fn = match_counts_partial(pred, gold, overlap_threshold=0.8)
        assert (tp, fp, fn) == (1, 1, 0)
