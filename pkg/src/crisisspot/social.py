"""Social context features and the 21-slot social holistic vector.

Slot order: sentiment (pos, neu, neg) | 11 emotion fractions | crisis score |
5 engagement counts | user informative score.  Every min-max statistic is
fitted on the training split and frozen; values outside the fitted range are
clamped to [0, 1] and a constant feature maps to 0.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .config import SHV_DIM
from .data import COUNT_FIELDS, PostRecord, UserStats, user_stats_from_records
from .errors import ParameterError
from .lexicons import EMOTION_CATEGORIES, N_EMOTIONS, CrisisLexicon, EmotionLexicon, Lexicons, SentimentLexicon

_TOKEN = re.compile(r"[^\W_]+")
UNSEEN_USER_UIS = 0.5


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens; '#'/'@' markers and other punctuation are separators."""
    return _TOKEN.findall(text.lower())


@dataclass
class MinMax:
    lo: float = 0.0
    hi: float = 0.0

    @classmethod
    def fit(cls, values) -> "MinMax":
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            raise ParameterError("cannot fit min-max statistics on no values")
        return cls(float(values.min()), float(values.max()))

    def transform(self, values):
        values = np.asarray(values, dtype=np.float64)
        span = self.hi - self.lo
        if span <= 0:
            return np.zeros_like(values)
        return np.clip((values - self.lo) / span, 0.0, 1.0)


def senti_quotient(text: str, lexicon: SentimentLexicon) -> np.ndarray:
    if not lexicon.valence:
        raise ParameterError("sentiment lexicon is empty")
    pos = neg = neu = 0.0
    for tok in tokenize(text):
        v = lexicon.valence.get(tok, 0.0)
        if v > 0:
            pos += v
        elif v < 0:
            neg -= v
        else:
            neu += 1
    total = pos + neu + neg
    if total == 0:
        return np.array([0.0, 1.0, 0.0])
    return np.array([pos, neu, neg]) / total


def emo_quotient(text: str, lexicon: EmotionLexicon) -> np.ndarray:
    if not lexicon.tags:
        raise ParameterError("emotion lexicon is empty")
    tokens = tokenize(text)
    out = np.zeros(N_EMOTIONS)
    if not tokens:
        return out
    for tok, n in Counter(tokens).items():
        for c in lexicon.tags.get(tok, ()):
            out[c] += n
    return out / len(tokens)


def crisis_count(text: str, lexicon: CrisisLexicon) -> int:
    if not len(lexicon):
        raise ParameterError("crisis lexicon is empty")
    return sum(1 for tok in tokenize(text) if tok in lexicon)


def cis(texts, lexicon: CrisisLexicon, scaler: MinMax | None = None) -> np.ndarray:
    """Min-max normalised crisis-term counts; fits the scaler on ``texts`` unless one is given."""
    counts = np.array([crisis_count(t, lexicon) for t in texts], dtype=np.float64)
    if scaler is None:
        scaler = MinMax.fit(counts)
    return scaler.transform(counts)


def uis_raw(stats: UserStats) -> float:
    if stats.total < 1:
        raise ParameterError(f"user {stats.user_id}: total must be >= 1")
    return (stats.informative - stats.non_informative) / stats.total


def uis(stats: UserStats, scaler: MinMax) -> float:
    return float(scaler.transform(uis_raw(stats)))


def ucis(uis_norm: float, cis_norm: float, alpha: float = 0.5) -> float:
    if not 0 <= alpha <= 1:
        raise ParameterError(f"ucis alpha must lie in [0, 1], got {alpha}")
    return alpha * uis_norm + (1 - alpha) * cis_norm


def uem(favourites, retweets, followers, friends, statuses, scalers: list[MinMax]) -> np.ndarray:
    raw = (favourites, retweets, followers, friends, statuses)
    if any(v < 0 for v in raw):
        raise ParameterError("engagement counts must be non-negative")
    return np.array([float(s.transform(v)) for s, v in zip(scalers, raw)])


@dataclass
class SocialNormStats:
    """Frozen normalisation state fitted on a training split."""
    cis: MinMax
    uis: MinMax
    uem: list[MinMax]
    users: dict[str, UserStats] = field(default_factory=dict)

    @classmethod
    def fit(cls, records: list[PostRecord], lexicons: Lexicons) -> "SocialNormStats":
        if not records:
            raise ParameterError("cannot fit social statistics on an empty split")
        users = {u: s for u, s in user_stats_from_records(records).items()
                 if s.informative + s.non_informative > 0}
        counts = [crisis_count(r.text, lexicons.crisis) for r in records]
        raw_uis = [uis_raw(s) for s in users.values()] or [0.0]
        return cls(
            cis=MinMax.fit(counts),
            uis=MinMax.fit(raw_uis),
            uem=[MinMax.fit([getattr(r, f) for r in records]) for f in COUNT_FIELDS],
            users=users,
        )

    def user_score(self, user_id: str) -> float:
        stats = self.users.get(user_id)
        return UNSEEN_USER_UIS if stats is None else uis(stats, self.uis)

    def to_dict(self) -> dict:
        return {
            "cis": [self.cis.lo, self.cis.hi],
            "uis": [self.uis.lo, self.uis.hi],
            "uem": [[m.lo, m.hi] for m in self.uem],
            "users": {u: [s.total, s.informative, s.non_informative] for u, s in sorted(self.users.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SocialNormStats":
        return cls(
            cis=MinMax(*data["cis"]),
            uis=MinMax(*data["uis"]),
            uem=[MinMax(*m) for m in data["uem"]],
            users={u: UserStats(u, *t) for u, t in data["users"].items()},
        )


@dataclass
class SocialHolisticVector:
    sentiment: np.ndarray
    emotion: np.ndarray
    cis: float
    engagement: np.ndarray
    uis: float

    def as_array(self) -> np.ndarray:
        out = np.concatenate([self.sentiment, self.emotion, [self.cis], self.engagement, [self.uis]])
        assert out.shape == (SHV_DIM,)
        return out


def build_shv(record: PostRecord, lexicons: Lexicons, norm: SocialNormStats) -> SocialHolisticVector:
    return SocialHolisticVector(
        sentiment=senti_quotient(record.text, lexicons.sentiment),
        emotion=emo_quotient(record.text, lexicons.emotion),
        cis=float(norm.cis.transform(crisis_count(record.text, lexicons.crisis))),
        engagement=uem(*(getattr(record, f) for f in COUNT_FIELDS), scalers=norm.uem),
        uis=norm.user_score(record.user_id),
    )


def shv_matrix(records, lexicons: Lexicons, norm: SocialNormStats) -> np.ndarray:
    if not records:
        return np.zeros((0, SHV_DIM))
    return np.stack([build_shv(r, lexicons, norm).as_array() for r in records])


SHV_COLUMNS = (
    ["sent_pos", "sent_neu", "sent_neg"]
    + [f"emo_{c}" for c in EMOTION_CATEGORIES]
    + ["cis"] + [f"uem_{f}" for f in COUNT_FIELDS] + ["uis"]
)
