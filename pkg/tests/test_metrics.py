import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from promptevo.errors import EmptyText, LengthMismatch, UnknownLabel
from promptevo.metrics import (
    BleuConfig,
    ObjectiveScore,
    bleu_sentence,
    is_paraphrase,
    macro_f1,
    normalize,
    per_label_f1,
    tally,
)

EPS = BleuConfig(smoothing="epsilon")
LABELS = ["anger", "disgust", "fear", "guilt", "joy", "sadness", "shame"]


def test_identity_is_one():
    assert bleu_sentence("text that expresses joy", "text that expresses joy") == 1.0


def test_disjoint_is_zero():
    assert bleu_sentence("aaa bbb", "ccc ddd", EPS) == pytest.approx(0.0, abs=1e-9)
    assert bleu_sentence("aaa bbb", "ccc ddd") == 0.0


def test_table4_pair_by_hand():
    # 7 vs 9 tokens; clipped matches 6/7, 4/6, 3/5, 2/4; brevity exp(1 - 9/7)
    expected = math.exp(1 - 9 / 7) * (6 / 7 * 4 / 6 * 3 / 5 * 2 / 4) ** 0.25
    got = bleu_sentence("a long enough string to express joy.", "Write in a long enough string to expresses joy")
    assert got == pytest.approx(expected, abs=1e-12)


def test_paraphrase_example_is_filtered():
    # 3/4 unigrams, 1/3 bigrams, then two zero orders smoothed 1/(2*2), 1/(4*1)
    expected = (3 / 4 * 1 / 3 * 1 / 4 * 1 / 4) ** 0.25
    assert bleu_sentence("The text expresses joy.", "Text that expresses joy") == pytest.approx(expected)
    assert is_paraphrase("The text expresses joy.", "Text that expresses joy")


def test_non_paraphrase_kept():
    assert not is_paraphrase("i love you so much", "Write a long text string to expresses joy")
    assert is_paraphrase("a b c", "a b c")


def test_bleu_against_frozen_oracle(bleu_pairs):
    for row in bleu_pairs:
        assert bleu_sentence(row["candidate"], row["reference"]) == pytest.approx(row["exp"], abs=1e-9)
        assert bleu_sentence(row["candidate"], row["reference"], EPS) == pytest.approx(row["epsilon"], abs=1e-9)


def test_bleu_direction_matters():
    a, b = "a long text", "a long text string to write"
    assert bleu_sentence(a, b) != bleu_sentence(b, a)


def test_empty_text():
    with pytest.raises(EmptyText):
        bleu_sentence("...", "text")
    with pytest.raises(EmptyText):
        bleu_sentence("text", "")


def test_config_validation():
    with pytest.raises(ValueError):
        BleuConfig(max_ngram_order=0)
    with pytest.raises(ValueError):
        BleuConfig(threshold=1.5)
    with pytest.raises(ValueError):
        BleuConfig(smoothing="add-k")


def test_normalize():
    assert normalize("  I'm Disgusted!! ") == ["i'm", "disgusted"]


SENT = st.lists(st.sampled_from("a b c d e F G".split()), min_size=1, max_size=10).map(" ".join)


@settings(max_examples=200, deadline=None)
@given(SENT, SENT)
def test_bleu_range_and_case(c, r):
    v = bleu_sentence(c, r)
    assert 0.0 <= v <= 1.0
    assert bleu_sentence(c.upper(), r.lower()) == v
    assert bleu_sentence(c, c) == pytest.approx(1.0)


# -- F1 ------------------------------------------------------------------------------


def test_tally_perfect():
    t = tally(["joy", "fear"], ["joy", "fear"], LABELS)
    assert all(v == 0 for v in t.fp.values()) and all(v == 0 for v in t.fn.values())


def test_tally_swap():
    t = tally(["fear", "joy"], ["joy", "fear"], LABELS)
    for lab in ("joy", "fear"):
        assert (t.tp[lab], t.fp[lab], t.fn[lab]) == (0, 1, 1)


def test_tally_errors():
    with pytest.raises(LengthMismatch):
        tally(["joy"], [], LABELS)
    with pytest.raises(UnknownLabel):
        tally(["awe"], ["joy"], LABELS)


# 21 texts, 3 per gold label; the hand count below was done row by row
FIX_GOLD = [lab for lab in LABELS for _ in range(3)]
FIX_PRED = (
    ["anger", "anger", "fear"]  # anger
    + ["disgust", "anger", "disgust"]  # disgust
    + ["fear", "fear", "fear"]  # fear
    + ["shame", "guilt", "sadness"]  # guilt
    + ["joy", "joy", "joy"]  # joy
    + ["sadness", "fear", "fear"]  # sadness
    + ["guilt", "shame", "shame"]  # shame
)
#            TP FP FN
HAND = {
    "anger": (2, 1, 1),
    "disgust": (2, 0, 1),
    "fear": (3, 3, 0),
    "guilt": (1, 1, 2),
    "joy": (3, 0, 0),
    "sadness": (1, 1, 2),
    "shame": (2, 1, 1),
}
HAND_F1 = {
    "anger": 4 / 6,
    "disgust": 4 / 5,
    "fear": 6 / 9,
    "guilt": 2 / 5,
    "joy": 1.0,
    "sadness": 2 / 5,
    "shame": 4 / 6,
}


def test_hand_fixture_tally():
    t = tally(FIX_PRED, FIX_GOLD, LABELS)
    for lab, (tp, fp, fn) in HAND.items():
        assert (t.tp[lab], t.fp[lab], t.fn[lab]) == (tp, fp, fn)
    assert t.n == 21


def test_hand_fixture_macro():
    t = tally(FIX_PRED, FIX_GOLD, LABELS)
    assert per_label_f1(t) == pytest.approx(HAND_F1, abs=0)
    assert macro_f1(t) == pytest.approx(sum(HAND_F1.values()) / 7, abs=1e-15)


def test_macro_matches_sklearn():
    from sklearn.metrics import f1_score

    rng = random.Random(3)
    for _ in range(50):
        n = rng.randint(1, 40)
        gold = [rng.choice(LABELS) for _ in range(n)]
        pred = [rng.choice(LABELS) for _ in range(n)]
        ref = f1_score(gold, pred, labels=LABELS, average="macro", zero_division=0)
        assert macro_f1(tally(pred, gold, LABELS)) == pytest.approx(ref, abs=1e-12)


def test_absent_label_counts_zero():
    t = tally(["joy"], ["joy"], ["joy", "fear"])
    assert per_label_f1(t) == {"joy": 1.0, "fear": 0.0}
    assert macro_f1(t) == 0.5


def test_perfect_is_one():
    assert macro_f1(tally(FIX_GOLD, FIX_GOLD, LABELS)) == 1.0


PAIRS = st.lists(st.tuples(st.sampled_from(LABELS), st.sampled_from(LABELS)), min_size=1, max_size=30)


@settings(max_examples=200, deadline=None)
@given(PAIRS, st.randoms())
def test_macro_properties(pairs, rnd):
    gold = [g for g, _ in pairs]
    pred = [p for _, p in pairs]
    m = macro_f1(tally(pred, gold, LABELS))
    assert 0.0 <= m <= 1.0
    shuffled = pairs[:]
    rnd.shuffle(shuffled)
    assert macro_f1(tally([p for _, p in shuffled], [g for g, _ in shuffled], LABELS)) == pytest.approx(m)
    # one more correct text never lowers that label's F1
    lab = gold[0]
    before = per_label_f1(tally(pred, gold, LABELS))[lab]
    after = per_label_f1(tally(pred + [lab], gold + [lab], LABELS))[lab]
    assert after >= before


@settings(max_examples=200, deadline=None)
@given(PAIRS)
def test_macro_one_iff_all_correct(pairs):
    gold = [g for g, _ in pairs]
    pred = [p for _, p in pairs]
    # "every label with gold instances" only reaches 1 when all labels appear
    m = macro_f1(tally(pred, gold, sorted(set(gold))) if set(pred) <= set(gold) else tally(pred, gold, LABELS))
    assert (m == 1.0) == (pred == gold)


def test_objective_score_value():
    t = tally(["joy"], ["joy"], ["joy"])
    s = ObjectiveScore.from_tally(t, n_filtered=2)
    assert s.value == 1.0 and s.n_texts_filtered == 2
    dq = ObjectiveScore.from_tally(t, disqualified=True)
    assert dq.value == float("-inf")
    assert isinstance(t.matrix, np.ndarray)


def test_bleu_against_live_oracles(bleu_pairs):
    sys_path = __import__("sys").path
    sys_path.insert(0, str(__import__("pathlib").Path(__file__).parent / "data"))
    try:
        from make_bleu_pairs import epsilon_oracle, exp_oracle
    finally:
        sys_path.pop(0)
    rng = random.Random(11)
    vocab = "write a text that to expresses joy fear long string in the".split()
    extra = [(" ".join(rng.choices(vocab, k=rng.randint(1, 9))), " ".join(rng.choices(vocab, k=rng.randint(1, 9)))) for _ in range(40)]
    for cand, ref in [(r["candidate"], r["reference"]) for r in bleu_pairs] + extra:
        assert bleu_sentence(cand, ref) == pytest.approx(exp_oracle(cand, ref), abs=1e-9)
        assert bleu_sentence(cand, ref, EPS) == pytest.approx(epsilon_oracle(cand, ref), abs=1e-9)
