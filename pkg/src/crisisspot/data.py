"""Posts, users, corpora and the JSON-lines manifest format."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .config import N_HUMANITARIAN
from .errors import DataError, FormatError, LabelError, ParameterError, ResolutionError, ShapeError
from .tensorio import load_tensor, save_tensor

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
COUNT_FIELDS = ("favourites", "retweets", "followers", "friends", "statuses")
REF_FIELDS = ("text_embedding_ref", "image_embedding_ref", "joint_text_ref", "joint_image_ref")

HUMANITARIAN_LABELS = {
    1: "Affected individuals",
    2: "Infrastructure and utility damage",
    3: "Injured or dead people",
    4: "Missing or found people",
    5: "Rescue, volunteering or donation effort",
    6: "Vehicle damage",
    7: "Other relevant information",
    8: "Not relevant or can't judge",
}


@dataclass(frozen=True)
class PostRecord:
    post_id: str
    user_id: str
    text: str
    favourites: int
    retweets: int
    followers: int
    friends: int
    statuses: int
    text_embedding_ref: str
    image_embedding_ref: str
    joint_text_ref: str
    joint_image_ref: str
    informative_label: int | None = None
    humanitarian_label: int | None = None

    def __post_init__(self):
        for name in COUNT_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 0:
                raise DataError(f"record {self.post_id}: {name} must be a non-negative integer, got {value!r}")
        if self.informative_label is not None and self.informative_label not in (0, 1):
            raise LabelError(f"record {self.post_id}: informative_label {self.informative_label!r} not in {{0, 1}}")
        if self.humanitarian_label is not None and self.humanitarian_label not in HUMANITARIAN_LABELS:
            raise LabelError(
                f"record {self.post_id}: humanitarian_label {self.humanitarian_label!r} outside 1..{N_HUMANITARIAN}")
        for name in REF_FIELDS:
            if not getattr(self, name):
                raise DataError(f"record {self.post_id}: missing {name}")

    def label(self, task: str) -> int | None:
        return self.informative_label if task == "informative" else self.humanitarian_label

    @classmethod
    def from_dict(cls, data: dict) -> "PostRecord":
        names = {f.name for f in fields(cls)}
        pid = data.get("post_id", "<no id>")
        unknown = sorted(set(data) - names)
        if unknown:
            raise FormatError(f"record {pid}: unknown fields {unknown}")
        required = {f.name for f in fields(cls) if f.name not in ("informative_label", "humanitarian_label")}
        missing = sorted(required - set(data))
        if missing:
            raise FormatError(f"record {pid}: missing fields {missing}")
        return cls(**data)


@dataclass(frozen=True)
class UserStats:
    user_id: str
    total: int
    informative: int
    non_informative: int

    def __post_init__(self):
        if self.total < 1:
            raise ParameterError(f"user {self.user_id}: total must be >= 1")
        if self.informative < 0 or self.non_informative < 0:
            raise ParameterError(f"user {self.user_id}: counts must be non-negative")
        if self.informative + self.non_informative > self.total:
            raise ParameterError(f"user {self.user_id}: informative + non_informative exceeds total")


def user_stats_from_records(records) -> dict[str, UserStats]:
    """Per-user tweet tallies from informative labels; unlabelled posts count toward the total only."""
    tallies: dict[str, list[int]] = {}
    for r in records:
        t = tallies.setdefault(r.user_id, [0, 0, 0])
        t[0] += 1
        if r.informative_label == 1:
            t[1] += 1
        elif r.informative_label == 0:
            t[2] += 1
    return {u: UserStats(u, *t) for u, t in sorted(tallies.items())}


@dataclass
class Corpus:
    """Records of one split, sorted by ``post_id``, plus the tensors they reference."""
    records: list[PostRecord]
    split: str = "train"
    dims: tuple[int, int, int, int] = (0, 0, 0, 0)   # d, dt, dv, d_joint
    tensors: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ParameterError(f"unknown split {self.split!r}")
        self.records = sorted(self.records, key=lambda r: r.post_id)
        ids = [r.post_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate post_id in corpus")

    def __len__(self) -> int:
        return len(self.records)

    def validate(self) -> None:
        d, dt, dv, dj = self.dims
        expected = {"text_embedding_ref": (d, dt), "image_embedding_ref": (d, dv),
                    "joint_text_ref": (1, dj), "joint_image_ref": (1, dj)}
        for r in self.records:
            for name, shape in expected.items():
                ref = getattr(r, name)
                if ref not in self.tensors:
                    raise ResolutionError(f"record {r.post_id}: unresolved {name} {ref!r}")
                if self.tensors[ref].shape != shape:
                    raise ShapeError(
                        f"record {r.post_id}: {name} {ref!r} has shape {self.tensors[ref].shape}, expected {shape}")

    def labels(self, task: str) -> np.ndarray:
        out = [r.label(task) for r in self.records]
        missing = [r.post_id for r, y in zip(self.records, out) if y is None]
        if missing:
            raise LabelError(f"{len(missing)} records lack a {task} label (first: {missing[0]})")
        return np.asarray(out, dtype=np.int64)

    def stack(self, ref_field: str) -> np.ndarray:
        return np.stack([self.tensors[getattr(r, ref_field)] for r in self.records])

    def text_embeddings(self) -> np.ndarray:
        return self.stack("text_embedding_ref")

    def image_embeddings(self) -> np.ndarray:
        return self.stack("image_embedding_ref")

    def joint_text(self) -> np.ndarray:
        return self.stack("joint_text_ref")[:, 0, :]

    def joint_image(self) -> np.ndarray:
        return self.stack("joint_image_ref")[:, 0, :]


def load_manifest(path: str | Path, split: str = "train") -> Corpus:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise ResolutionError(f"manifest not found: {path}") from None
    records = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(data, dict):
            raise FormatError(f"{path}:{lineno}: expected a JSON object")
        records.append(PostRecord.from_dict(data))
    if not records:
        raise DataError(f"{path}: manifest has no records")

    base = path.parent
    tensors: dict[str, np.ndarray] = {}
    for r in records:
        for name in REF_FIELDS:
            ref = getattr(r, name)
            if ref in tensors:
                continue
            target = base / ref
            if not target.is_file():
                raise ResolutionError(f"record {r.post_id}: {name} {ref!r} does not resolve ({target})")
            tensors[ref] = load_tensor(target)
    first = records[0]
    d, dt = tensors[first.text_embedding_ref].shape
    dv = tensors[first.image_embedding_ref].shape[1]
    dj = tensors[first.joint_text_ref].shape[1]
    corpus = Corpus(records, split=split, dims=(d, dt, dv, dj), tensors=tensors)
    corpus.validate()
    log.info("loaded %d records from %s (dims %s)", len(corpus), path, corpus.dims)
    return corpus


def save_corpus(corpus: Corpus, directory: str | Path, manifest_name: str = "manifest.jsonl") -> Path:
    """Write the manifest and every referenced tensor under ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = set()
    for r in corpus.records:
        for name in REF_FIELDS:
            ref = getattr(r, name)
            if ref in written:
                continue
            target = directory / ref
            target.parent.mkdir(parents=True, exist_ok=True)
            save_tensor(target, corpus.tensors[ref])
            written.add(ref)
    manifest = directory / manifest_name
    with open(manifest, "w", encoding="utf-8") as fh:
        for r in corpus.records:
            row = {k: v for k, v in asdict(r).items() if v is not None}
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return manifest
