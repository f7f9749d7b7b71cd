"""CNN document encoder, label-wise attention, per-graph message passing.

Two layers of API. The module-level functions (encode_document,
label_attention, gcn_forward, fuse, classify, bce_loss) are direct
single-instance transcriptions of the network equations in plain numpy;
tests and oracles treat them as the reference surface. The
MultiGraphClassifier builds the same computation batched on a Tape for
training, so reference and trained paths are checked against each other
rather than trusted independently.

Label vectors v_l and word embeddings are frozen; only the graph branch
output ṽ_l varies during training, and the final classifier for label l
is the concatenation [v_l, ṽ_l].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import ContractError, DimensionError, InputError
from .labelgraphs import LabelGraph, NormalizedGraph, merge_graphs, normalize
from .numerics import Tape, glorot_uniform_init, seeded_rng, softmax
from .textpipe import EmbeddingTable

KIND_ORDER = ("hierarchy", "similarity", "cooccurrence")
FUSION_MODES = ("post", "pre", "none")


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 200  # word/label embedding dim
    filters: int = 200  # CNN feature maps
    kernel: int = 10  # convolution width in tokens
    gcn_hidden: int = 200
    gcn_out: int = 200
    fused_dim: int = 200
    graphs: tuple[str, ...] = ("hierarchy", "similarity", "cooccurrence")
    fusion: str = "post"

    def __post_init__(self):
        for name in ("embed_dim", "filters", "kernel", "gcn_hidden", "gcn_out", "fused_dim"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be >= 1")
        if self.fusion not in FUSION_MODES:
            raise InputError(f"fusion must be one of {FUSION_MODES}, got {self.fusion!r}")
        if self.fusion == "none":
            object.__setattr__(self, "graphs", ())
            return
        if not self.graphs:
            raise InputError("graphs must be nonempty unless fusion is 'none'")
        unknown = [g for g in self.graphs if g not in KIND_ORDER]
        if unknown:
            raise InputError(f"unknown graph kinds {unknown}; choose from {KIND_ORDER}")
        if len(set(self.graphs)) != len(self.graphs):
            raise InputError(f"duplicate graph kinds in {self.graphs}")
        ordered = tuple(k for k in KIND_ORDER if k in self.graphs)
        object.__setattr__(self, "graphs", ordered)

    @property
    def classifier_dim(self) -> int:
        """Width of the final per-label classifier v̄_l."""
        if self.fusion == "none":
            return self.embed_dim
        return self.embed_dim + self.fused_dim

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        d, u, s = self.embed_dim, self.filters, self.kernel
        shapes: dict[str, tuple[int, ...]] = {
            "conv_w": (s * d, u),
            "conv_b": (u,),
            "att_proj_w": (u, d),
            "att_proj_b": (d,),
            "out_proj_w": (self.classifier_dim, u),
            "out_proj_b": (self.classifier_dim,),
        }
        if self.fusion == "post":
            for kind in self.graphs:
                shapes[f"gcn_{kind}_l1"] = (d, self.gcn_hidden)
                shapes[f"gcn_{kind}_l2"] = (self.gcn_hidden, self.gcn_out)
            shapes["fuse_w"] = (len(self.graphs) * self.gcn_out, self.fused_dim)
        elif self.fusion == "pre":
            shapes["gcn_merged_l1"] = (d, self.gcn_hidden)
            shapes["gcn_merged_l2"] = (self.gcn_hidden, self.gcn_out)
            shapes["fuse_w"] = (self.gcn_out, self.fused_dim)
        return shapes


def init_params(config: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """Glorot matrices and zero biases, each from its own name-keyed stream.

    Keying streams by parameter name keeps shared parameters identical
    across configurations that differ only in their graph branches.
    """
    params = {}
    for name, shape in config.param_shapes().items():
        if len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            params[name] = glorot_uniform_init(*shape, seeded_rng(seed, "init", name))
    return params


def check_params(config: ModelConfig, params: dict[str, np.ndarray]) -> None:
    shapes = config.param_shapes()
    if set(params) != set(shapes):
        raise ContractError(
            f"parameter names {sorted(params)} do not match config {sorted(shapes)}"
        )
    for name, want in shapes.items():
        got = np.asarray(params[name]).shape
        if got != want:
            raise DimensionError(f"parameter {name}: shape {got}, expected {want}")
        if not np.isfinite(params[name]).all():
            raise ContractError(f"parameter {name} contains non-finite values")


# -- reference forward ops (single instance, plain numpy) ---------------


def _conv_patches(embedded: np.ndarray, kernel: int) -> np.ndarray:
    """Zero-padded sliding windows, flattened: n rows of kernel*d values."""
    n, d = embedded.shape
    left = (kernel - 1) // 2
    padded = np.zeros((n + kernel - 1, d))
    padded[left : left + n] = embedded
    return np.stack([padded[i : i + kernel].ravel() for i in range(n)], axis=0)


def embed_tokens(
    token_ids: list[int],
    embeddings: EmbeddingTable,
    dropout_keep: float = 1.0,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Look up embedding rows; in train mode apply inverted dropout.

    The embedding table is frozen, so the dropout mask never needs to
    enter the autodiff tape: it only perturbs constant inputs.
    """
    if not token_ids:
        raise InputError("empty document")
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.min() < 0 or ids.max() >= embeddings.matrix.shape[0]:
        raise InputError("token id outside embedding table")
    embedded = embeddings.matrix[ids]
    if train_mode and dropout_keep < 1.0:
        if rng is None:
            raise ContractError("train-mode dropout needs an rng")
        mask = (rng.random(embedded.shape) < dropout_keep) / dropout_keep
        embedded = embedded * mask
    return embedded


def encode_document(
    token_ids: list[int],
    embeddings: EmbeddingTable,
    conv_w: np.ndarray,
    conv_b: np.ndarray,
    dropout_keep: float = 1.0,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Same-padded width-s convolution with tanh: n tokens -> n x u features."""
    d = embeddings.dim
    if conv_w.ndim != 2 or conv_w.shape[0] % d != 0:
        raise DimensionError(f"conv_w shape {conv_w.shape} incompatible with embedding dim {d}")
    kernel = conv_w.shape[0] // d
    embedded = embed_tokens(token_ids, embeddings, dropout_keep, train_mode, rng)
    patches = _conv_patches(embedded, kernel)
    return np.tanh(patches @ conv_w + conv_b)


def label_attention(
    features: np.ndarray, v_l: np.ndarray, att_w: np.ndarray, att_b: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-label softmax over positions and the attended feature vector.

    a = softmax(tanh(F W + b) v_l), z = aᵀ F.
    """
    if features.ndim != 2 or att_w.shape != (features.shape[1], v_l.shape[0]):
        raise DimensionError(
            f"attention shapes disagree: F {features.shape}, W {att_w.shape}, v {v_l.shape}"
        )
    logits = np.tanh(features @ att_w + att_b) @ v_l
    weights = softmax(logits)
    return weights, weights @ features


def gcn_forward(
    graph: NormalizedGraph, label_vectors: np.ndarray, w1: np.ndarray, w2: np.ndarray
) -> np.ndarray:
    """Two rounds of normalized-adjacency propagation with ReLU."""
    a = graph.matrix
    if label_vectors.shape[0] != a.shape[0]:
        raise DimensionError(
            f"label matrix rows {label_vectors.shape[0]} do not match graph size {a.shape[0]}"
        )
    if label_vectors.shape[1] != w1.shape[0] or w1.shape[1] != w2.shape[0]:
        raise DimensionError("gcn weight shapes do not chain")
    hidden = np.maximum(a @ (label_vectors @ w1), 0.0)
    return np.maximum(a @ (hidden @ w2), 0.0)


def fuse(per_graph_outputs: list[np.ndarray], fuse_w: np.ndarray) -> np.ndarray:
    """Concatenate per-graph label embeddings and project linearly."""
    if not per_graph_outputs:
        raise DimensionError("fuse needs at least one graph output")
    rows = {h.shape[0] for h in per_graph_outputs}
    if len(rows) != 1:
        raise DimensionError(f"per-graph row counts differ: {sorted(rows)}")
    stacked = np.concatenate(per_graph_outputs, axis=1)
    if stacked.shape[1] != fuse_w.shape[0]:
        raise DimensionError(
            f"fusion input width {stacked.shape[1]} does not match fuse_w {fuse_w.shape}"
        )
    return stacked @ fuse_w


def classify(
    z: np.ndarray, v_bar_l: np.ndarray, out_w: np.ndarray, out_b: np.ndarray
) -> float:
    """sigmoid(ReLU(W z + b) · v̄_l) for one document-label pair."""
    if out_w.shape[1] != z.shape[0] or out_w.shape[0] != v_bar_l.shape[0]:
        raise DimensionError(
            f"classifier shapes disagree: W {out_w.shape}, z {z.shape}, v̄ {v_bar_l.shape}"
        )
    projected = np.maximum(out_w @ z + out_b, 0.0)
    return float(1.0 / (1.0 + np.exp(-float(projected @ v_bar_l))))


def bce_loss(predictions: np.ndarray, gold: np.ndarray, eps: float = 1e-12) -> float:
    """Mean binary cross-entropy over the label axis, log-clamped at eps."""
    predictions = np.asarray(predictions, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    if predictions.shape != gold.shape:
        raise DimensionError(f"prediction shape {predictions.shape} vs gold {gold.shape}")
    p = np.clip(predictions, eps, 1.0 - eps)
    return float(np.mean(-(gold * np.log(p) + (1.0 - gold) * np.log(1.0 - p))))


# -- batched tape model -------------------------------------------------


class MultiGraphClassifier:
    """End-to-end network over a fixed catalog, embeddings, and graphs.

    `graphs` must align with config.graphs (one LabelGraph per active
    kind, catalog order). Post-fusion runs one GCN per graph and fuses
    the outputs; pre-fusion merges the adjacencies first and runs a
    single GCN; fusion "none" classifies against v_l alone.
    """

    def __init__(
        self,
        config: ModelConfig,
        embeddings: EmbeddingTable,
        label_vectors: np.ndarray,
        graphs: list[LabelGraph],
        params: dict[str, np.ndarray] | None = None,
        seed: int = 0,
    ):
        label_vectors = np.asarray(label_vectors, dtype=np.float64)
        if label_vectors.ndim != 2 or label_vectors.shape[1] != config.embed_dim:
            raise DimensionError(
                f"label vectors {label_vectors.shape} do not match embed_dim {config.embed_dim}"
            )
        if embeddings.dim != config.embed_dim:
            raise DimensionError(
                f"embedding dim {embeddings.dim} does not match config {config.embed_dim}"
            )
        if config.fusion == "none":
            if graphs:
                raise InputError("fusion 'none' takes no graphs")
            self.norm_adjacencies = []
        else:
            if len(graphs) != len(config.graphs):
                raise InputError(
                    f"expected {len(config.graphs)} graphs for {config.graphs}, got {len(graphs)}"
                )
            for g in graphs:
                if g.size != label_vectors.shape[0]:
                    raise DimensionError(
                        f"graph size {g.size} does not match {label_vectors.shape[0]} labels"
                    )
            if config.fusion == "post":
                self.norm_adjacencies = [normalize(g).matrix for g in graphs]
            else:  # pre: merge first, then one normalized adjacency
                merged = reduce(merge_graphs, graphs)
                self.norm_adjacencies = [normalize(merged).matrix]

        self.config = config
        self.embeddings = embeddings
        self.label_vectors = label_vectors
        self.params = init_params(config, seed) if params is None else dict(params)
        check_params(config, self.params)

    @property
    def n_labels(self) -> int:
        return self.label_vectors.shape[0]

    def _label_classifiers(self, tape: Tape, nodes: dict):
        """Tape nodes for V (constant) and v̄ = [V, fused GCN output]."""
        v_const = tape.constant(self.label_vectors)
        if self.config.fusion == "none":
            return v_const, v_const
        branch_names = (
            [f"gcn_{kind}" for kind in self.config.graphs]
            if self.config.fusion == "post"
            else ["gcn_merged"]
        )
        outputs = []
        for name, adjacency in zip(branch_names, self.norm_adjacencies):
            a_const = tape.constant(adjacency)
            hidden = tape.relu(tape.matmul(a_const, tape.matmul(v_const, nodes[f"{name}_l1"])))
            outputs.append(
                tape.relu(tape.matmul(a_const, tape.matmul(hidden, nodes[f"{name}_l2"])))
            )
        stacked = outputs[0] if len(outputs) == 1 else tape.concat_cols(outputs)
        fused = tape.matmul(stacked, nodes["fuse_w"])
        return v_const, tape.concat_cols([v_const, fused])

    def _document_scores(self, tape: Tape, nodes, v_const, v_bar, token_ids, keep, train_mode, rng):
        embedded = embed_tokens(token_ids, self.embeddings, keep, train_mode, rng)
        patches = tape.constant(_conv_patches(embedded, self.config.kernel))
        features = tape.tanh(tape.add_row(tape.matmul(patches, nodes["conv_w"]), nodes["conv_b"]))
        att_in = tape.tanh(
            tape.add_row(tape.matmul(features, nodes["att_proj_w"]), nodes["att_proj_b"])
        )
        att = tape.softmax_cols(tape.matmul_tb(att_in, v_const))  # n x L
        attended = tape.matmul_ta(att, features)  # L x u
        projected = tape.relu(
            tape.add_row(tape.matmul_tb(attended, nodes["out_proj_w"]), nodes["out_proj_b"])
        )
        return tape.sigmoid(tape.rowdot(projected, v_bar))  # L

    def _forward(self, token_id_lists, train_mode, rng, dropout=0.0):
        if not token_id_lists:
            raise InputError("empty batch")
        tape = Tape()
        nodes = {name: tape.param(name, value) for name, value in self.params.items()}
        v_const, v_bar = self._label_classifiers(tape, nodes)
        keep = 1.0 - dropout if train_mode else 1.0
        rows = [
            self._document_scores(tape, nodes, v_const, v_bar, ids, keep, train_mode, rng)
            for ids in token_id_lists
        ]
        stacked = tape.stack_rows(rows)
        return tape, stacked, nodes

    def batch_loss(self, token_id_lists, gold_matrix, train_mode=True, rng=None, dropout=0.0):
        """Tape, scalar loss node, and param nodes for one batch."""
        gold_matrix = np.asarray(gold_matrix, dtype=np.float64)
        if gold_matrix.shape != (len(token_id_lists), self.n_labels):
            raise DimensionError(
                f"gold matrix {gold_matrix.shape}, expected {(len(token_id_lists), self.n_labels)}"
            )
        tape, stacked, nodes = self._forward(token_id_lists, train_mode, rng, dropout)
        loss = tape.bce(stacked, gold_matrix)
        return tape, loss, nodes

    def scores(self, token_id_lists) -> np.ndarray:
        """Deterministic eval-mode predictions, one row per document."""
        _, stacked, _ = self._forward(token_id_lists, train_mode=False, rng=None)
        return np.array(stacked.value)

    def label_classifier_matrix(self) -> np.ndarray:
        """Current v̄ rows (numpy), for inspection and checkpoint reports."""
        tape = Tape()
        nodes = {name: tape.param(name, value) for name, value in self.params.items()}
        _, v_bar = self._label_classifiers(tape, nodes)
        return np.array(v_bar.value)
