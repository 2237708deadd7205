"""Deterministic synthetic corpora for desk-scale runs.

A *world* is fixed by the seed: class directions for every embedding space,
a pool of users with an informative or chatty leaning, and base engagement
levels.  Each split samples fresh records from the same world, so a model
trained on ``split="train"`` can be evaluated on ``split="val"``.

Embedding rows are ``a * u_y + N(0, I)`` with orthonormal class directions
``u_y`` and ``a = separation / sqrt(2)``, so class means sit ``separation``
noise standard deviations apart.  Text, engagement and user choice follow a
per-record "style" that equals the informative label with probability
``scf_signal`` and is a coin flip otherwise; that noise is independent of the
embedding noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SPLITS, Corpus, PostRecord
from .errors import ParameterError
from .lexicons import Lexicons

_FILLER = (
    "the a we our people city today update video photo news here now just see "
    "this that is are was new live near area road street morning night time "
    "please share read more via look everyone".split()
)
_CHATTY = "lol selfie weekend music fun enjoy love happy beautiful amazing nice great best".split()
_DISTRESS = "fear scared panic trapped tragic dead killed injured loss cry victims sudden shock".split()
_SUPPORT = "help support thanks rescue volunteers doctor hope brave strong".split()
_USERS = 40


def _directions(rng: np.random.Generator, k: int, dim: int) -> np.ndarray:
    """``k`` unit vectors in R^dim, orthonormal when ``k <= dim``."""
    g = rng.standard_normal((dim, max(k, 1)))
    if k <= dim:
        q, _ = np.linalg.qr(g)
        return q[:, :k].T
    return (g / np.linalg.norm(g, axis=0)).T


@dataclass
class SyntheticWorld:
    seed: int
    task: str
    dims: tuple[int, int, int, int]
    n_classes: int
    separation: float
    joint_separation: float
    scf_signal: float
    directions: dict[str, np.ndarray]
    user_leaning: np.ndarray
    user_followers: np.ndarray
    user_friends: np.ndarray
    user_statuses: np.ndarray

    @classmethod
    def create(cls, seed: int, task: str, dims, *, separation: float = 4.0,
               joint_separation: float | None = None, scf_signal: float = 0.9,
               n_classes: int | None = None) -> "SyntheticWorld":
        if task not in ("informative", "humanitarian"):
            raise ParameterError(f"unknown task {task!r}")
        dims = tuple(int(x) for x in dims)
        if len(dims) != 4 or min(dims) < 2:
            raise ParameterError(f"dims must be four integers >= 2 (d, dt, dv, d_joint), got {dims}")
        if not 0 <= scf_signal <= 1:
            raise ParameterError("scf_signal must lie in [0, 1]")
        if separation < 0:
            raise ParameterError("separation must be non-negative")
        k = 2 if task == "informative" else (n_classes or 8)
        if not 2 <= k <= 8:
            raise ParameterError("humanitarian n_classes must lie in 2..8")
        rng = np.random.default_rng([seed, 0])
        d, dt, dv, dj = dims
        directions = {
            "text": _directions(rng, k, dt), "image": _directions(rng, k, dv),
            "joint_text": _directions(rng, k, dj), "joint_image": _directions(rng, k, dj),
        }
        leaning = np.arange(_USERS) % 2
        return cls(
            seed=seed, task=task, dims=dims, n_classes=k, separation=separation,
            joint_separation=separation if joint_separation is None else joint_separation,
            scf_signal=scf_signal, directions=directions, user_leaning=leaning,
            user_followers=rng.integers(50, 5000, _USERS), user_friends=rng.integers(20, 2000, _USERS),
            user_statuses=rng.integers(100, 20000, _USERS),
        )

    def class_means(self, space: str) -> np.ndarray:
        sep = self.joint_separation if space.startswith("joint") else self.separation
        return sep / np.sqrt(2) * self.directions[space]

    def sample(self, n: int, split: str = "train", lexicons: Lexicons | None = None) -> Corpus:
        if n < 4:
            raise ParameterError(f"n_samples must be >= 4, got {n}")
        if split not in SPLITS:
            raise ParameterError(f"unknown split {split!r}")
        lexicons = lexicons or Lexicons.default()
        crisis_terms = sorted(lexicons.crisis.terms)
        rng = np.random.default_rng([self.seed, 1, SPLITS.index(split)])
        d, dt, dv, dj = self.dims
        k = self.n_classes
        labels = rng.permutation(np.arange(n) % k)
        means = {s: self.class_means(s) for s in self.directions}
        records, tensors = [], {}
        for i, y in enumerate(labels):
            pid = f"{split}-{i:05d}"
            if self.task == "informative":
                informative, humanitarian = int(y), None
            else:
                humanitarian = int(y) + 1
                informative = int(humanitarian != k)   # last class plays "not relevant"
            style = informative if rng.random() < self.scf_signal else int(rng.integers(2))
            text = self._text(rng, style, crisis_terms)
            users = np.flatnonzero(self.user_leaning == style)
            u = int(rng.choice(users))
            refs = {name: f"tensors/{pid}.{name}.cspt" for name in ("text", "image", "joint_text", "joint_image")}
            tensors[refs["text"]] = (means["text"][y] + rng.standard_normal((d, dt))).astype(np.float32)
            tensors[refs["image"]] = (means["image"][y] + rng.standard_normal((d, dv))).astype(np.float32)
            tensors[refs["joint_text"]] = (means["joint_text"][y] + rng.standard_normal((1, dj))).astype(np.float32)
            tensors[refs["joint_image"]] = (means["joint_image"][y] + rng.standard_normal((1, dj))).astype(np.float32)
            boost = 4 if style else 1
            records.append(PostRecord(
                post_id=pid, user_id=f"user{u:03d}", text=text,
                favourites=int(rng.poisson(8 * boost)), retweets=int(rng.poisson(5 * boost)),
                followers=int(self.user_followers[u]), friends=int(self.user_friends[u]),
                statuses=int(self.user_statuses[u]),
                text_embedding_ref=refs["text"], image_embedding_ref=refs["image"],
                joint_text_ref=refs["joint_text"], joint_image_ref=refs["joint_image"],
                informative_label=informative, humanitarian_label=humanitarian,
            ))
        corpus = Corpus(records, split=split, dims=self.dims, tensors=tensors)
        corpus.validate()
        return corpus

    @staticmethod
    def _text(rng, style: int, crisis_terms: list[str]) -> str:
        words = list(rng.choice(_FILLER, size=int(rng.integers(5, 10))))
        if style:
            words += list(rng.choice(crisis_terms, size=int(rng.integers(1, 4))))
            words += list(rng.choice(_DISTRESS + _SUPPORT, size=int(rng.integers(1, 3))))
        else:
            words += list(rng.choice(_CHATTY, size=int(rng.integers(1, 4))))
        rng.shuffle(words)
        if rng.random() < 0.3:
            words.append("#" + str(rng.choice(_FILLER)))
        return " ".join(words)


def generate_synthetic(seed: int, n_samples: int, task: str = "informative",
                       dims=(128, 768, 1024, 512), *, split: str = "train",
                       separation: float = 4.0, joint_separation: float | None = None,
                       scf_signal: float = 0.9, n_classes: int | None = None,
                       lexicons: Lexicons | None = None) -> Corpus:
    world = SyntheticWorld.create(seed, task, dims, separation=separation,
                                  joint_separation=joint_separation, scf_signal=scf_signal,
                                  n_classes=n_classes)
    return world.sample(n_samples, split=split, lexicons=lexicons)
