import numpy as np
import pytest

from crisisspot.errors import FormatError, ParameterError
from crisisspot.lexicons import (CrisisLexicon, Lexicons, expand_lexicon, load_crisis_lexicon,
                                 load_word_embeddings, parse_emotion_lexicon, parse_sentiment_lexicon,
                                 save_crisis_lexicon)


def test_default_lexicons_load():
    lex = Lexicons.default()
    assert "earthquake" in lex.crisis and "flood" in lex.crisis
    assert lex.sentiment.valence["dead"] < 0
    assert Lexicons.from_dict(lex.to_dict()).to_dict() == lex.to_dict()


def test_parsers():
    s = parse_sentiment_lexicon("# c\ngood\t1.5\nBAD\t-2\n")
    assert s.valence == {"good": 1.5, "bad": -2.0}
    e = parse_emotion_lexicon("fear\t3\nfear\t5\n")
    assert e.tags["fear"] == {3, 5}
    with pytest.raises(FormatError):
        parse_sentiment_lexicon("good\n")
    with pytest.raises(FormatError):
        parse_emotion_lexicon("x\t11\n")


def test_crisis_file_roundtrip(tmp_path):
    lex = CrisisLexicon.from_terms(["Flood", "quake"])
    save_crisis_lexicon(tmp_path / "c.txt", lex)
    assert sorted(load_crisis_lexicon(tmp_path / "c.txt")) == ["flood", "quake"]


def test_expand_matches_bruteforce_oracle(tmp_path):
    rng = np.random.default_rng(0)
    vocab = {f"w{i}": rng.standard_normal(5) for i in range(40)}
    vocab["flood"] = rng.standard_normal(5)
    vocab["near"] = vocab["flood"] + 0.05 * rng.standard_normal(5)
    seed = CrisisLexicon.from_terms(["flood", "missing"])
    out = expand_lexicon(seed, vocab, 0.8)

    def cos(a, b):
        return sum(x * y for x, y in zip(a, b)) / (sum(x * x for x in a) ** 0.5 * sum(y * y for y in b) ** 0.5)
    want = {w for w, v in vocab.items() if cos(v, vocab["flood"]) > 0.8} | {"flood", "missing"}
    assert set(out.terms) == want
    assert "near" in out.terms and out.terms["near"] == {"expanded"}
    assert out.terms["flood"] == {"seed"}


def test_expand_threshold_monotone():
    rng = np.random.default_rng(1)
    vocab = {f"w{i}": rng.standard_normal(3) for i in range(60)}
    seed = CrisisLexicon.from_terms(["w0"])
    sizes = [len(expand_lexicon(seed, vocab, t)) for t in (0.5, 0.7, 0.9)]
    assert sizes == sorted(sizes, reverse=True)
    with pytest.raises(ParameterError):
        expand_lexicon(seed, vocab, 0.0)


def test_load_word_embeddings(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("a 1 2\nb 3 4\n")
    emb = load_word_embeddings(p)
    np.testing.assert_array_equal(emb["b"], [3, 4])
    p.write_text("a 1 2\nb 3\n")
    with pytest.raises(FormatError):
        load_word_embeddings(p)
