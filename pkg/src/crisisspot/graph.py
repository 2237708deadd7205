"""Thresholded cosine-similarity graphs and sample-and-aggregate propagation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import core
from .core import ParameterStore, Tensor
from .errors import FormatError, ParameterError, ShapeError

log = logging.getLogger(__name__)


@dataclass
class AdjacencyGraph:
    """Undirected graph without self-loops, stored as sorted adjacency lists."""
    n: int
    neighbors: list[np.ndarray]
    threshold: float = 0.75

    @property
    def n_edges(self) -> int:
        return sum(len(nb) for nb in self.neighbors) // 2

    def degree(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.neighbors], dtype=np.int64)

    def edges(self) -> list[tuple[int, int]]:
        return [(i, int(j)) for i, nb in enumerate(self.neighbors) for j in nb if j > i]

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=np.int8)
        for i, nb in enumerate(self.neighbors):
            A[i, nb] = 1
        return A

    @classmethod
    def from_edges(cls, n: int, edges, threshold: float = 0.75) -> "AdjacencyGraph":
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for i, j in edges:
            if i == j:
                raise ParameterError(f"self-loop on node {i}")
            nbrs[i].add(j)
            nbrs[j].add(i)
        return cls(n, [np.array(sorted(s), dtype=np.int64) for s in nbrs], threshold)


def similarity_graph(H, threshold: float = 0.75) -> AdjacencyGraph:
    """Edge ``(i, j)`` iff cosine(H_i, H_j) > threshold; zero rows get no edges."""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] < 1:
        raise ShapeError(f"similarity_graph expects an n×d matrix with n >= 1, got {H.shape}")
    if not -1 <= threshold <= 1:
        raise ParameterError(f"threshold must lie in [-1, 1], got {threshold}")
    norms = np.linalg.norm(H, axis=1)
    zero = norms == 0
    if zero.any():
        log.warning("%d zero-norm rows have no edges", int(zero.sum()))
    U = H / np.where(zero, 1.0, norms)[:, None]
    S = U @ U.T
    adj = np.triu(S > threshold, k=1)
    adj[zero, :] = False
    adj[:, zero] = False
    adj = adj | adj.T
    return AdjacencyGraph(H.shape[0], [np.flatnonzero(row) for row in adj], threshold)


def sample_neighbors(graph: AdjacencyGraph, sample_size: int,
                     rng: np.random.Generator | None) -> list[np.ndarray]:
    """Up to ``sample_size`` neighbours per node, without replacement.

    With ``rng=None`` the lowest-index neighbours are taken, which makes the
    result deterministic.
    """
    if sample_size < 1:
        raise ParameterError("sample_size must be >= 1")
    out = []
    for nb in graph.neighbors:
        if len(nb) <= sample_size:
            out.append(nb)
        elif rng is None:
            out.append(nb[:sample_size])
        else:
            out.append(np.sort(rng.choice(nb, size=sample_size, replace=False)))
    return out


def mean_aggregator(samples: list[np.ndarray], n: int, dtype=np.float32) -> sp.csr_matrix:
    """Row-stochastic sparse matrix averaging each node's sampled neighbours (empty rows stay zero)."""
    rows, cols, vals = [], [], []
    for v, nb in enumerate(samples):
        if len(nb):
            rows.extend([v] * len(nb))
            cols.extend(nb.tolist())
            vals.extend([1.0 / len(nb)] * len(nb))
    return sp.csr_matrix((np.asarray(vals, dtype=dtype), (rows, cols)), shape=(n, n))


@dataclass
class SageParams:
    weights: list[Tensor]
    sample_size: int = 10
    activation: str = "relu"

    def __post_init__(self):
        if not self.weights:
            raise ParameterError("at least one propagation layer is required")
        if self.sample_size < 1:
            raise ParameterError("sample_size must be >= 1")

    @property
    def K(self) -> int:
        return len(self.weights)

    @classmethod
    def create(cls, store: ParameterStore, prefix: str, widths, h0: int, rng,
               dtype=np.float32, sample_size: int = 10, activation: str = "relu") -> "SageParams":
        weights, prev = [], h0
        for k, h in enumerate(widths, 1):
            weights.append(store.add(f"{prefix}.W{k}", core.glorot_uniform(2 * prev, h, rng, dtype)))
            prev = h
        return cls(weights, sample_size, activation)


def propagate(graph: AdjacencyGraph, H0, params: SageParams, rng_seed=None,
              aggregators: list[sp.csr_matrix] | None = None) -> Tensor:
    """K rounds of sample → mean-aggregate → ``act(concat(h, agg) W_k)`` → L2-normalise.

    ``rng_seed=None`` uses deterministic lowest-index neighbourhoods.  Passing
    precomputed ``aggregators`` (one per layer) fixes the sampled neighbourhoods.
    """
    H = core.as_tensor(H0)
    if H.shape[0] != graph.n:
        raise ShapeError(f"propagate: graph has {graph.n} nodes, embeddings have {H.shape[0]} rows")
    if aggregators is None:
        aggregators = layer_aggregators(graph, params.sample_size, params.K, rng_seed, H.dtype)
    act = core.ACTIVATIONS[params.activation]
    for W, M in zip(params.weights, aggregators):
        agg = core.sparse_matmul(M, H)
        H = core.l2_normalize(act(core.matmul(core.concat([H, agg]), W)))
    return H


def layer_aggregators(graph: AdjacencyGraph, sample_size: int, K: int, rng_seed=None,
                      dtype=np.float32) -> list[sp.csr_matrix]:
    rng = None if rng_seed is None else np.random.default_rng(rng_seed)
    return [mean_aggregator(sample_neighbors(graph, sample_size, rng), graph.n, dtype) for _ in range(K)]


@dataclass
class GflnParams:
    layers: list[tuple[Tensor, Tensor]] = field(default_factory=list)
    dropout: float = 0.2

    @classmethod
    def create(cls, store: ParameterStore, in_dim: int, widths, rng, dtype=np.float32,
               dropout: float = 0.2, prefix: str = "gfln") -> "GflnParams":
        layers, prev = [], in_dim
        for i, w in enumerate(widths):
            layers.append(store.dense(f"{prefix}.{i}", prev, w, rng, dtype))
            prev = w
        return cls(layers, dropout)


def mlp(x: Tensor, layers, dropout: float, mode: str, rng) -> Tensor:
    """ReLU dense stack with dropout after every layer."""
    for W, b in layers:
        x = core.dense_forward(x, W, b, "relu")
        x = core.dropout(x, dropout, rng, train=mode == "train")
    return x


def gfln_fuse(I_v_node, T_v_node, params: GflnParams, mode: str = "eval", rng=None) -> Tensor:
    """Concatenate updated image and text node embeddings and reduce them."""
    x = core.concat([core.as_tensor(I_v_node), core.as_tensor(T_v_node)])
    if x.shape[-1] != params.layers[0][0].shape[0]:
        raise ShapeError(f"gfln: input width {x.shape[-1]}, expected {params.layers[0][0].shape[0]}")
    return mlp(x, params.layers, params.dropout, mode, rng)


def write_edge_list(path: str | Path, graph: AdjacencyGraph) -> None:
    lines = [f"n={graph.n} threshold={graph.threshold}"] + [f"{i} {j}" for i, j in graph.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path: str | Path) -> AdjacencyGraph:
    lines = Path(path).read_text().splitlines()
    try:
        head = dict(tok.split("=") for tok in lines[0].split())
        n, threshold = int(head["n"]), float(head["threshold"])
        edges = [tuple(int(x) for x in ln.split()) for ln in lines[1:] if ln.strip()]
    except (IndexError, KeyError, ValueError):
        raise FormatError(f"{path}: malformed edge list") from None
    return AdjacencyGraph.from_edges(n, edges, threshold)
