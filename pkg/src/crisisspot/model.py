"""End-to-end model: attention branch, graph branch, social branch, joint head."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import core, fusion
from .config import SHV_DIM, ModelConfig
from .core import ParameterStore, Tensor
from .data import Corpus
from .errors import ShapeError
from .graph import (AdjacencyGraph, GflnParams, SageParams, gfln_fuse, layer_aggregators, propagate,
                    similarity_graph)
from .idea import IdeaParams, idea_forward
from .lexicons import Lexicons
from .social import SocialNormStats, shv_matrix
from .tensorio import load_checkpoint, save_checkpoint


@dataclass
class SplitData:
    """Model-ready arrays for one split; row ``i`` is node ``i`` of both graphs."""
    post_ids: list[str]
    H_t: np.ndarray
    H_v: np.ndarray
    joint_text: np.ndarray
    joint_image: np.ndarray
    shv: np.ndarray
    labels: np.ndarray | None
    graph_text: AdjacencyGraph
    graph_image: AdjacencyGraph

    def __len__(self) -> int:
        return len(self.post_ids)


def prepare_split(corpus: Corpus, lexicons: Lexicons, norm: SocialNormStats, cfg: ModelConfig,
                  require_labels: bool = True) -> SplitData:
    d, dt, dv, dj = corpus.dims
    if (d, dt, dv, dj) != (cfg.d, cfg.dt, cfg.dv, cfg.d_joint):
        raise ShapeError(f"corpus dims {corpus.dims} do not match model dims "
                         f"{(cfg.d, cfg.dt, cfg.dv, cfg.d_joint)}")
    jt, ji = corpus.joint_text(), corpus.joint_image()
    labels = corpus.labels(cfg.task) if require_labels else None
    return SplitData(
        post_ids=[r.post_id for r in corpus.records],
        H_t=corpus.text_embeddings(), H_v=corpus.image_embeddings(),
        joint_text=jt, joint_image=ji,
        shv=shv_matrix(corpus.records, lexicons, norm).astype(np.float32),
        labels=labels,
        graph_text=similarity_graph(jt, cfg.threshold),
        graph_image=similarity_graph(ji, cfg.threshold),
    )


class CrisisSpotModel:
    def __init__(self, cfg: ModelConfig, store: ParameterStore, idea: IdeaParams, sage_text: SageParams,
                 sage_image: SageParams, gfln: GflnParams, head: fusion.FusionParams):
        self.cfg = cfg
        self.store = store
        self.idea = idea
        self.sage_text = sage_text
        self.sage_image = sage_image
        self.gfln = gfln
        self.head = head

    @classmethod
    def create(cls, cfg: ModelConfig, seed: int = 0, dtype=np.float32) -> "CrisisSpotModel":
        rng = np.random.default_rng(seed)
        store = ParameterStore()
        idea = IdeaParams.create(store, cfg, rng, dtype)
        sage_t = SageParams.create(store, "graph.text", cfg.graph_widths, cfg.d_joint, rng, dtype, cfg.sample_size)
        sage_i = SageParams.create(store, "graph.image", cfg.graph_widths, cfg.d_joint, rng, dtype, cfg.sample_size)
        gfln = GflnParams.create(store, 2 * cfg.graph_widths[-1], cfg.gfln, rng, dtype, cfg.dropout)
        head = fusion.FusionParams.create(store, cfg, rng, dtype)
        return cls(cfg, store, idea, sage_t, sage_i, gfln, head)

    def with_store(self, store: ParameterStore) -> "CrisisSpotModel":
        """Same architecture reading its weights from ``store`` (e.g. a float64 copy).

        Arrays are shared, so in-place edits to ``store`` are seen by the twin.
        """
        dtype = next(iter(store.params.values())).dtype
        twin = CrisisSpotModel.create(self.cfg, seed=0, dtype=dtype)
        for name, t in store.params.items():
            twin.store.params[name].data = t.data
        for name, value in store.buffers().items():
            twin.store.set_buffer(name, value)
        return twin

    def aggregators(self, data: SplitData, seed=None) -> dict[str, list]:
        """Per-layer neighbourhood averaging matrices; ``seed=None`` is the deterministic evaluation choice."""
        k, s = self.cfg.graph_k, self.cfg.sample_size
        seeds = (None, None) if seed is None else ([*np.atleast_1d(seed), 0], [*np.atleast_1d(seed), 1])
        return {
            "text": layer_aggregators(data.graph_text, s, k, seeds[0], np.float64),
            "image": layer_aggregators(data.graph_image, s, k, seeds[1], np.float64),
        }

    def forward(self, data: SplitData, idx, mode: str = "eval", rng=None, aggregators=None,
                update_stats: bool = True, return_parts: bool = False):
        """Logits for the records ``idx`` of ``data``."""
        cfg = self.cfg
        idx = np.asarray(idx, dtype=np.int64)
        b = len(idx)
        off = cfg.disabled_branches
        dtype = self.head.head[0].dtype
        if "idea" in off:
            m = Tensor(np.zeros((b, cfg.maln[-1]), dtype=dtype))
        else:
            att = idea_forward(data.H_t[idx].astype(dtype), data.H_v[idx].astype(dtype), self.idea, mode,
                               update_stats=update_stats)
            m = fusion.maln(att.FAV, self.head, mode, rng)
        if "scf" in off:
            s = Tensor(np.zeros((b, cfg.shln[-1]), dtype=dtype))
        else:
            s = fusion.shln(data.shv[idx].astype(dtype), self.head, mode, rng)
        if "graph" in off:
            g = Tensor(np.zeros((b, cfg.gfln[-1]), dtype=dtype))
        else:
            if aggregators is None:
                aggregators = self.aggregators(data)
            T_v = propagate(data.graph_text, data.joint_text.astype(dtype), self.sage_text,
                            aggregators=aggregators["text"])
            I_v = propagate(data.graph_image, data.joint_image.astype(dtype), self.sage_image,
                            aggregators=aggregators["image"])
            g = gfln_fuse(core.take_rows(I_v, idx), core.take_rows(T_v, idx), self.gfln, mode, rng)
        h = fusion.jfln(m, s, g, self.head, mode, rng)
        out = fusion.logits(h, self.head)
        if return_parts:
            return out, {"maln": m, "shln": s, "gfln": g, "jfln": h}
        return out

    def loss(self, logits: Tensor, labels) -> Tensor:
        if self.cfg.task == "informative":
            return fusion.bce_loss(core.sigmoid(logits), labels)
        probs = core.softmax_temp(logits, 1.0)
        return fusion.cce_loss(probs, fusion.one_hot(labels, self.cfg.n_classes, logits.dtype))

    def predict(self, data: SplitData, batch_size: int = 256):
        """Eval-mode probabilities and labels for every record of ``data``."""
        aggs = None if "graph" in self.cfg.disabled_branches else self.aggregators(data)
        chunks = []
        for start in range(0, len(data), batch_size):
            idx = np.arange(start, min(start + batch_size, len(data)))
            chunks.append(self.forward(data, idx, "eval", aggregators=aggs).data)
        z = np.concatenate(chunks).astype(np.float64)
        if self.cfg.task == "informative":
            return fusion.predict_informative(z[:, 0])
        return fusion.predict_humanitarian(z)


@dataclass
class Checkpoint:
    model_config: ModelConfig
    params: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray]
    social: SocialNormStats
    lexicons: Lexicons
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: CrisisSpotModel, social: SocialNormStats, lexicons: Lexicons,
                   meta: dict | None = None) -> "Checkpoint":
        return cls(model.cfg, {n: t.data.copy() for n, t in model.store.params.items()},
                   {n: v.copy() for n, v in model.store.buffers().items()}, social, lexicons, dict(meta or {}))

    def build_model(self) -> CrisisSpotModel:
        model = CrisisSpotModel.create(self.model_config, seed=0)
        for name, value in self.params.items():
            t = model.store.params[name]
            if t.shape != value.shape:
                raise ShapeError(f"checkpoint tensor {name} has shape {value.shape}, model expects {t.shape}")
            t.data = value.astype(t.dtype).copy()
        for name, value in self.buffers.items():
            model.store.set_buffer(name, value.astype(np.float32))
        return model

    def save(self, path: str | Path) -> None:
        tensors = dict(self.params)
        tensors.update({f"buffer:{k}": v for k, v in self.buffers.items()})
        meta = {
            "model_config": self.model_config.to_dict(),
            "social": self.social.to_dict(),
            "lexicons": self.lexicons.to_dict(),
            "meta": self.meta,
        }
        save_checkpoint(path, tensors, meta)

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        tensors, header = load_checkpoint(path)
        params = {k: v for k, v in tensors.items() if not k.startswith("buffer:")}
        buffers = {k[len("buffer:"):]: v for k, v in tensors.items() if k.startswith("buffer:")}
        return cls(ModelConfig.from_dict(header["model_config"]), params, buffers,
                   SocialNormStats.from_dict(header["social"]), Lexicons.from_dict(header["lexicons"]),
                   header.get("meta", {}))


def shv_width_check(shv: np.ndarray) -> None:
    if shv.shape[-1] != SHV_DIM:
        raise ShapeError(f"social vector width {shv.shape[-1]}, expected {SHV_DIM}")
