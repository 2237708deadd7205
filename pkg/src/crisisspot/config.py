"""Model and training configuration."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParameterError

SHV_DIM = 21
N_HUMANITARIAN = 8
TASKS = ("informative", "humanitarian")
BRANCHES = ("idea", "graph", "scf")

FULL_DIMS = {"d": 128, "dt": 768, "dv": 1024, "d_joint": 512}
FULL_D_SE = 1024
FULL_MALN = (1024, 512, 256, 128)
FULL_GFLN = (512, 256, 128)
FULL_SHLN = (16, 8)
FULL_JFLN = (256, 128, 64)


@dataclass(frozen=True)
class ModelConfig:
    d: int = 128
    dt: int = 768
    dv: int = 1024
    d_se: int = FULL_D_SE
    d_joint: int = 512
    task: str = "informative"
    n_classes: int = N_HUMANITARIAN
    maln: tuple[int, ...] = FULL_MALN
    gfln: tuple[int, ...] = FULL_GFLN
    shln: tuple[int, ...] = FULL_SHLN
    jfln: tuple[int, ...] = FULL_JFLN
    graph_k: int = 2
    sample_size: int = 10
    threshold: float = 0.75
    t_ham: float = 1.65
    t_cam: float = 0.75
    dropout: float = 0.2
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5
    disabled_branches: tuple[str, ...] = ()

    def __post_init__(self):
        if self.task not in TASKS:
            raise ParameterError(f"unknown task {self.task!r}")
        for name in ("d", "dt", "dv", "d_se", "d_joint"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be positive")
        if self.t_ham <= 0 or self.t_cam <= 0:
            raise ParameterError("attention temperatures must be positive")
        if self.graph_k < 1 or self.sample_size < 1:
            raise ParameterError("graph_k and sample_size must be >= 1")
        if not -1 <= self.threshold <= 1:
            raise ParameterError("similarity threshold must lie in [-1, 1]")
        if not 0 <= self.dropout < 1:
            raise ParameterError("dropout must lie in [0, 1)")
        bad = set(self.disabled_branches) - set(BRANCHES)
        if bad:
            raise ParameterError(f"unknown branches {sorted(bad)}")

    @property
    def fav_dim(self) -> int:
        return self.dt + self.dv

    @property
    def jfln_in(self) -> int:
        return self.maln[-1] + self.shln[-1] + self.gfln[-1]

    @property
    def graph_widths(self) -> tuple[int, ...]:
        return (self.d_joint,) * self.graph_k

    @property
    def out_dim(self) -> int:
        return 1 if self.task == "informative" else self.n_classes

    @classmethod
    def for_dims(cls, d: int, dt: int, dv: int, d_joint: int, d_se: int | None = None,
                 floor: int = 8, **kw) -> "ModelConfig":
        """Full-size widths at the full-size dims, otherwise proportionally shrunk ones."""
        if (d, dt, dv, d_joint) == tuple(FULL_DIMS.values()):
            return cls(d=d, dt=dt, dv=dv, d_joint=d_joint, d_se=d_se or FULL_D_SE, **kw)
        s_fav = (dt + dv) / (FULL_DIMS["dt"] + FULL_DIMS["dv"])
        s_joint = d_joint / FULL_DIMS["d_joint"]
        maln = tuple(max(floor, round(w * s_fav)) for w in FULL_MALN)
        gfln = tuple(max(floor, round(w * s_joint)) for w in FULL_GFLN)
        jin = maln[-1] + FULL_SHLN[-1] + gfln[-1]
        jfln = tuple(max(floor, round(w * jin / 264)) for w in FULL_JFLN)
        return cls(d=d, dt=dt, dv=dv, d_joint=d_joint, d_se=d_se or max(dt, dv),
                   maln=maln, gfln=gfln, jfln=jfln, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        data = dict(data)
        for key in ("maln", "gfln", "shln", "jfln", "disabled_branches"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass
class TrainConfig:
    learning_rate: float = 5e-5
    batch_size: int = 32
    epochs: int = 100
    dropout_p: float = 0.2
    seed: int = 0
    task: str = "informative"
    graph_k: int = 2
    sample_size: int = 10
    threshold: float = 0.75
    t_ham: float = 1.65
    t_cam: float = 0.75
    ucis_alpha: float = 0.5
    d_se: int | None = None
    width_floor: int = 8
    disabled_branches: list[str] = field(default_factory=list)
    train_manifest: str | None = None
    val_manifest: str | None = None
    lexicon_dir: str | None = None

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ParameterError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ParameterError("epochs must be >= 1")
        if self.task not in TASKS:
            raise ParameterError(f"unknown task {self.task!r}")
        if not 0 <= self.ucis_alpha <= 1:
            raise ParameterError("ucis_alpha must lie in [0, 1]")

    def model_config(self, d: int, dt: int, dv: int, d_joint: int) -> ModelConfig:
        return ModelConfig.for_dims(
            d, dt, dv, d_joint, d_se=self.d_se, floor=self.width_floor, task=self.task,
            graph_k=self.graph_k, sample_size=self.sample_size, threshold=self.threshold,
            t_ham=self.t_ham, t_cam=self.t_cam, dropout=self.dropout_p,
            disabled_branches=tuple(self.disabled_branches),
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ParameterError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path, **overrides) -> "TrainConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ParameterError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ParameterError(f"config {path} must hold a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)
