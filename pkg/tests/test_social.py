import numpy as np
import pytest

from crisisspot.data import PostRecord, UserStats
from crisisspot.errors import ParameterError
from crisisspot.lexicons import CrisisLexicon, EmotionLexicon, Lexicons, SentimentLexicon
from crisisspot.social import (SHV_COLUMNS, MinMax, SocialNormStats, build_shv, cis, crisis_count, emo_quotient,
                               senti_quotient, shv_matrix, tokenize, ucis, uem, uis, uis_raw)
from crisisspot.synthetic import generate_synthetic


def rec(pid, text="", user="u", y=1, counts=(0, 0, 0, 0, 0)):
    f, r, fo, fr, s = counts
    return PostRecord(pid, user, text, f, r, fo, fr, s, "t", "i", "jt", "ji", informative_label=y)


def test_tokenize_strips_markers():
    assert tokenize("#Flood @Red_Cross: HELP!! now") == ["flood", "red", "cross", "help", "now"]


def test_senti_examples():
    lex = SentimentLexicon({"good": 1.0, "bad": -2.0})
    np.testing.assert_array_equal(senti_quotient("nothing here", lex), [0, 1, 0])
    np.testing.assert_array_equal(senti_quotient("", lex), [0, 1, 0])
    np.testing.assert_array_equal(senti_quotient("good good", lex), [1, 0, 0])
    # word-loop oracle: pos 1, neg 2, neu 3
    np.testing.assert_allclose(senti_quotient("good bad the a cat", lex), np.array([1, 3, 2]) / 6)


def test_emo_examples():
    lex = EmotionLexicon({"fear": frozenset({3}), "scary": frozenset({3, 5})})
    np.testing.assert_array_equal(emo_quotient("calm day", lex), np.zeros(11))
    q = emo_quotient("fear this scary thing", lex)
    assert q[3] == 0.5 and q[5] == 0.25 and q.sum() == 0.75


def test_cis_examples():
    lex = CrisisLexicon.from_terms(["earthquake", "rescue"])
    assert crisis_count("earthquake rescue underway", lex) == 2
    np.testing.assert_allclose(cis(["x", "earthquake", "earthquake rescue"], lex), [0, 0.5, 1])
    np.testing.assert_array_equal(cis(["rescue", "rescue"], lex), [0, 0])
    with pytest.raises(ParameterError):
        crisis_count("x", CrisisLexicon())


def test_cis_word_order_invariant():
    lex = Lexicons.default().crisis
    rng = np.random.default_rng(0)
    words = "flood rescue the people earthquake damaged road".split()
    base = crisis_count(" ".join(words), lex)
    for _ in range(20):
        assert crisis_count(" ".join(rng.permutation(words)), lex) == base


def test_uis_examples():
    assert uis_raw(UserStats("a", 10, 10, 0)) == 1
    assert uis_raw(UserStats("a", 10, 5, 5)) == 0
    assert uis_raw(UserStats("a", 10, 3, 7)) == pytest.approx(-0.4)
    assert uis(UserStats("a", 10, 3, 7), MinMax(-1, 1)) == pytest.approx(0.3)
    with pytest.raises(ParameterError):
        UserStats("a", 0, 0, 0)


def test_ucis_examples():
    assert ucis(0.8, 0.4, 1.0) == 0.8
    assert ucis(0.8, 0.4, 0.0) == 0.4
    assert ucis(0.8, 0.4, 0.5) == pytest.approx(0.6)
    with pytest.raises(ParameterError):
        ucis(0.1, 0.1, 1.5)


def test_uem_examples_and_clamp():
    scalers = [MinMax(0, 10)] * 5
    np.testing.assert_array_equal(uem(0, 10, 5, 20, 0, scalers), [0, 1, 0.5, 1, 0])
    np.testing.assert_array_equal(uem(3, 3, 3, 3, 3, [MinMax(3, 3)] * 5), 0)
    with pytest.raises(ParameterError):
        uem(-1, 0, 0, 0, 0, scalers)


def test_degenerate_shv():
    r = rec("p", text="")
    lex = Lexicons.default()
    v = build_shv(r, lex, SocialNormStats.fit([r], lex)).as_array()
    want = np.zeros(21)
    want[1] = 1
    np.testing.assert_array_equal(v, want)
    assert len(SHV_COLUMNS) == 21


def test_unseen_user_gets_midpoint():
    lex = Lexicons.default()
    norm = SocialNormStats.fit([rec("a", user="x", y=1), rec("b", user="y", y=0)], lex)
    assert norm.user_score("nobody") == 0.5
    assert norm.user_score("x") == 1.0 and norm.user_score("y") == 0.0


def test_shv_slices_recompose_and_range():
    lex = Lexicons.default()
    corpus = generate_synthetic(0, 40, dims=(2, 2, 2, 2))
    norm = SocialNormStats.fit(corpus.records[:30], lex)
    M = shv_matrix(corpus.records, lex, norm)
    assert M.shape == (40, 21)
    assert (M >= 0).all() and (M <= 1).all()
    np.testing.assert_allclose(M[:, :3].sum(axis=1), 1, atol=1e-6)
    r = corpus.records[35]
    np.testing.assert_array_equal(M[35, :3], senti_quotient(r.text, lex.sentiment))
    np.testing.assert_array_equal(M[35, 3:14], emo_quotient(r.text, lex.emotion))
    assert M[35, 14] == cis([r.text], lex.crisis, norm.cis)[0]
    assert M[35, 20] == norm.user_score(r.user_id)


def test_norm_stats_roundtrip():
    lex = Lexicons.default()
    corpus = generate_synthetic(0, 20, dims=(2, 2, 2, 2))
    norm = SocialNormStats.fit(corpus.records, lex)
    back = SocialNormStats.from_dict(norm.to_dict())
    np.testing.assert_array_equal(shv_matrix(corpus.records, lex, back), shv_matrix(corpus.records, lex, norm))
