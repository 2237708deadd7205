"""Crisis, sentiment and emotion lexicons: types, file formats, expansion.

File formats
    crisis:    UTF-8, one term per line; lines starting with ``#`` are comments.
    sentiment: TSV ``word<TAB>valence``.
    emotion:   TSV ``word<TAB>category_index``; repeat the word for several categories.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError, ResolutionError

log = logging.getLogger(__name__)

EMOTION_CATEGORIES = (
    "anger", "anticipation", "disgust", "fear", "joy", "negative",
    "positive", "sadness", "surprise", "trust", "other",
)
N_EMOTIONS = len(EMOTION_CATEGORIES)


@dataclass
class CrisisLexicon:
    terms: dict[str, set[str]] = field(default_factory=dict)   # term -> source tags

    def __post_init__(self):
        self.terms = {t.lower(): set(tags) for t, tags in self.terms.items()}

    @classmethod
    def from_terms(cls, terms, tag: str = "seed") -> "CrisisLexicon":
        return cls({t.strip().lower(): {tag} for t in terms if t.strip()})

    def __contains__(self, word: str) -> bool:
        return word in self.terms

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(sorted(self.terms))


@dataclass
class SentimentLexicon:
    valence: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for w, v in self.valence.items():
            if not np.isfinite(v):
                raise FormatError(f"sentiment valence for {w!r} is not finite")


@dataclass
class EmotionLexicon:
    tags: dict[str, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self):
        for w, cats in self.tags.items():
            if any(not 0 <= c < N_EMOTIONS for c in cats):
                raise FormatError(f"emotion category for {w!r} outside 0..{N_EMOTIONS - 1}")


@dataclass
class Lexicons:
    crisis: CrisisLexicon
    sentiment: SentimentLexicon
    emotion: EmotionLexicon

    @classmethod
    def default(cls) -> "Lexicons":
        root = resources.files("crisisspot") / "resources"
        return cls(
            crisis=parse_crisis_lexicon(root.joinpath("crisis_lexicon.txt").read_text("utf-8")),
            sentiment=parse_sentiment_lexicon(root.joinpath("sentiment_lexicon.tsv").read_text("utf-8")),
            emotion=parse_emotion_lexicon(root.joinpath("emotion_lexicon.tsv").read_text("utf-8")),
        )

    @classmethod
    def from_dir(cls, directory: str | Path) -> "Lexicons":
        """Read ``crisis.txt``, ``sentiment.tsv`` and ``emotion.tsv``; absent files fall back to the built-ins."""
        directory = Path(directory)
        if not directory.is_dir():
            raise ResolutionError(f"lexicon directory not found: {directory}")
        base = cls.default()
        if (directory / "crisis.txt").is_file():
            base.crisis = load_crisis_lexicon(directory / "crisis.txt")
        if (directory / "sentiment.tsv").is_file():
            base.sentiment = parse_sentiment_lexicon((directory / "sentiment.tsv").read_text("utf-8"))
        if (directory / "emotion.tsv").is_file():
            base.emotion = parse_emotion_lexicon((directory / "emotion.tsv").read_text("utf-8"))
        return base

    def to_dict(self) -> dict:
        return {
            "crisis": {t: sorted(tags) for t, tags in sorted(self.crisis.terms.items())},
            "sentiment": dict(sorted(self.sentiment.valence.items())),
            "emotion": {w: sorted(c) for w, c in sorted(self.emotion.tags.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Lexicons":
        return cls(
            crisis=CrisisLexicon({t: set(tags) for t, tags in data["crisis"].items()}),
            sentiment=SentimentLexicon({w: float(v) for w, v in data["sentiment"].items()}),
            emotion=EmotionLexicon({w: frozenset(c) for w, c in data["emotion"].items()}),
        )


def _content_lines(text: str):
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def parse_crisis_lexicon(text: str, tag: str = "seed") -> CrisisLexicon:
    return CrisisLexicon.from_terms((line for _, line in _content_lines(text)), tag=tag)


def load_crisis_lexicon(path: str | Path, tag: str = "seed") -> CrisisLexicon:
    try:
        return parse_crisis_lexicon(Path(path).read_text("utf-8"), tag=tag)
    except FileNotFoundError:
        raise ResolutionError(f"lexicon file not found: {path}") from None


def save_crisis_lexicon(path: str | Path, lexicon: CrisisLexicon) -> None:
    lines = ["# crisis lexicon, one term per line"] + list(lexicon)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_sentiment_lexicon(text: str) -> SentimentLexicon:
    out = {}
    for lineno, line in _content_lines(text):
        parts = line.split("\t")
        try:
            out[parts[0].lower()] = float(parts[1])
        except (IndexError, ValueError):
            raise FormatError(f"sentiment lexicon line {lineno}: expected word<TAB>valence") from None
    return SentimentLexicon(out)


def parse_emotion_lexicon(text: str) -> EmotionLexicon:
    tags: dict[str, set[int]] = {}
    for lineno, line in _content_lines(text):
        parts = line.split("\t")
        try:
            tags.setdefault(parts[0].lower(), set()).add(int(parts[1]))
        except (IndexError, ValueError):
            raise FormatError(f"emotion lexicon line {lineno}: expected word<TAB>category_index") from None
    return EmotionLexicon({w: frozenset(c) for w, c in tags.items()})


def load_word_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    """Whitespace-separated ``word v1 v2 ...`` lines (GloVe text format)."""
    out = {}
    try:
        text = Path(path).read_text("utf-8")
    except FileNotFoundError:
        raise ResolutionError(f"embedding file not found: {path}") from None
    dim = None
    for lineno, line in _content_lines(text):
        word, *vals = line.split()
        try:
            vec = np.array([float(v) for v in vals])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric embedding value") from None
        if dim is None:
            dim = len(vec)
        if len(vec) != dim or dim == 0:
            raise FormatError(f"{path}:{lineno}: expected {dim} values, got {len(vec)}")
        out[word.lower()] = vec
    return out


def expand_lexicon(seed: CrisisLexicon, word_embeddings: dict[str, np.ndarray],
                   threshold: float = 0.8) -> CrisisLexicon:
    """Add every vocabulary word whose best cosine similarity to a seed term exceeds ``threshold``."""
    if not 0 < threshold <= 1:
        raise ParameterError(f"expansion threshold must lie in (0, 1], got {threshold}")
    out = CrisisLexicon({t: set(tags) for t, tags in seed.terms.items()})
    anchors = [t for t in seed if t in word_embeddings]
    for t in seed:
        if t not in word_embeddings:
            log.warning("seed term %r has no embedding; kept but not used for expansion", t)
    if not anchors:
        return out
    vocab = sorted(word_embeddings)
    V = np.stack([word_embeddings[w] for w in vocab]).astype(np.float64)
    S = np.stack([word_embeddings[t] for t in anchors]).astype(np.float64)

    def unit(m):
        n = np.linalg.norm(m, axis=1, keepdims=True)
        return np.divide(m, n, out=np.zeros_like(m), where=n > 0)

    best = (unit(V) @ unit(S).T).max(axis=1)
    for word, score in zip(vocab, best):
        if score > threshold and word not in out.terms:
            out.terms[word] = {"expanded"}
    return out
