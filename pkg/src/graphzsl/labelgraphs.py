"""Label graphs: hierarchy, description similarity, co-occurrence.

All three builders emit symmetric nonnegative adjacencies over the
catalog label order with unit self-loops, so their normalized forms are
directly comparable inputs to per-graph message passing. The merge rule
(per-graph global rescale so max off-diagonal weight is 1, then
elementwise max) keeps merge(A, A) a pure rescale of A, which symmetric
normalization cancels exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError, InputError, ParseError
from .numerics import seeded_rng

GRAPH_KINDS = ("hierarchy", "similarity", "cooccurrence", "merged")
SYMMETRY_TOL = 1e-12


@dataclass
class LabelGraph:
    """Symmetric nonnegative adjacency over the catalog label order."""

    kind: str
    adjacency: np.ndarray  # L x L, float64

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=np.float64)
        if self.kind not in GRAPH_KINDS:
            raise InputError(f"unknown graph kind {self.kind!r}")
        a = self.adjacency
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"adjacency must be square, got {a.shape}")
        if not np.isfinite(a).all():
            raise ContractError("adjacency contains non-finite weights")
        if (a < 0.0).any():
            raise ContractError("adjacency contains negative weights")
        if a.size and np.abs(a - a.T).max() > SYMMETRY_TOL:
            raise ContractError("adjacency is not symmetric")

    @property
    def size(self) -> int:
        return self.adjacency.shape[0]


@dataclass
class NormalizedGraph:
    """D^{-1/2} A D^{-1/2} of a self-looped graph; spectral radius <= 1."""

    kind: str
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _with_unit_diagonal(a: np.ndarray) -> np.ndarray:
    np.fill_diagonal(a, 1.0)
    return a


def build_hierarchy_graph(taxonomy: list[tuple[str, str]], catalog) -> LabelGraph:
    """Project taxonomy edges onto catalog labels.

    Taxonomy ids not in the catalog are internal nodes; they are
    eliminated one at a time, pairwise-connecting their neighbors, so
    labels joined only through internal nodes end up adjacent. Edges
    are undirected with unit weight.
    """
    adj: dict[str, set[str]] = {code: set() for code in catalog.codes}
    for child, parent in taxonomy:
        if not child or not parent:
            raise InputError(f"taxonomy edge with blank id: {(child, parent)!r}")
        if child == parent:
            raise InputError(f"taxonomy self-edge on {child!r}")
        adj.setdefault(child, set()).add(parent)
        adj.setdefault(parent, set()).add(child)

    internal = sorted(set(adj) - set(catalog.codes))
    for node in internal:
        neighbors = sorted(adj.pop(node))
        for nbr in neighbors:
            adj[nbr].discard(node)
        for i, a in enumerate(neighbors):
            for b in neighbors[i + 1 :]:
                adj[a].add(b)
                adj[b].add(a)

    matrix = np.zeros((len(catalog), len(catalog)))
    for code, neighbors in adj.items():
        i = catalog.code_to_id[code]
        for nbr in neighbors:
            matrix[i, catalog.code_to_id[nbr]] = 1.0
    return LabelGraph("hierarchy", _with_unit_diagonal(matrix))


def build_similarity_graph(
    label_vectors: np.ndarray, k: int = 10, tau: float = 0.3
) -> LabelGraph:
    """Top-k cosine neighbors with floor tau, symmetrized by max.

    Zero vectors (labels whose descriptions had no embedding coverage)
    get only self-loops; cosine against them is treated as undefined.
    """
    vectors = np.asarray(label_vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise DimensionError(f"label vectors must be an L x d matrix, got {vectors.shape}")
    n = vectors.shape[0]
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if k >= n:
        raise InputError(f"k={k} must be below the label count {n}")

    norms = np.linalg.norm(vectors, axis=1)
    nonzero = norms > 0.0
    unit = np.zeros_like(vectors)
    unit[nonzero] = vectors[nonzero] / norms[nonzero, None]
    cos = np.clip(unit @ unit.T, -1.0, 1.0)

    directed = np.zeros((n, n))
    for i in range(n):
        if not nonzero[i]:
            continue
        candidates = [j for j in range(n) if j != i and nonzero[j]]
        # cosine descending, id ascending on ties: deterministic neighbor pick
        candidates.sort(key=lambda j: (-cos[i, j], j))
        for j in candidates[:k]:
            if cos[i, j] >= tau:
                directed[i, j] = cos[i, j]
    matrix = np.maximum(directed, directed.T)
    return LabelGraph("similarity", _with_unit_diagonal(matrix))


def build_cooccurrence_graph(
    train_docs: list[frozenset[int] | set[int]], catalog, unseen: set[int] | None = None
) -> LabelGraph:
    """Count joint label assignments over training documents.

    `unseen` declares labels that must not appear in training; rows for
    labels never observed in training end up self-loop-only regardless.
    """
    n = len(catalog)
    matrix = np.zeros((n, n))
    for doc_index, labels in enumerate(train_docs):
        labels = sorted(set(labels))
        for lab in labels:
            if not 0 <= lab < n:
                raise InputError(f"train doc {doc_index} references label id {lab}")
            if unseen is not None and lab in unseen:
                raise ContractError(
                    f"train doc {doc_index} carries unseen label id {lab}"
                )
        for a_pos, a in enumerate(labels):
            for b in labels[a_pos + 1 :]:
                matrix[a, b] += 1.0
                matrix[b, a] += 1.0
    return LabelGraph("cooccurrence", _with_unit_diagonal(matrix))


def _rescale_max_offdiag(a: np.ndarray) -> np.ndarray:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    peak = off.max()
    if peak <= 0.0:
        return a.copy()
    # global scale (diagonal included): symmetric normalization cancels it
    return a / peak


def merge_graphs(g1: LabelGraph, g2: LabelGraph) -> LabelGraph:
    """Elementwise max of per-graph rescaled adjacencies (kind "merged")."""
    if g1.size != g2.size:
        raise DimensionError(f"graph sizes differ: {g1.size} vs {g2.size}")
    merged = np.maximum(_rescale_max_offdiag(g1.adjacency), _rescale_max_offdiag(g2.adjacency))
    return LabelGraph("merged", merged)


def normalize(g: LabelGraph) -> NormalizedGraph:
    """Symmetric normalization A[i,j] / sqrt(d_i d_j)."""
    a = g.adjacency
    degrees = a.sum(axis=1)
    if (degrees <= 0.0).any():
        bad = int(np.flatnonzero(degrees <= 0.0)[0])
        raise ContractError(f"zero-degree row {bad}; graphs must carry self-loops")
    scale = 1.0 / np.sqrt(degrees)
    return NormalizedGraph(g.kind, a * np.outer(scale, scale))


def spectral_radius(matrix: np.ndarray, iters: int = 300, seed: int = 0) -> float:
    """Power-iteration estimate of the largest absolute eigenvalue."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"square matrix required, got {matrix.shape}")
    rng = seeded_rng(seed, "power_iteration")
    v = rng.normal(size=matrix.shape[0])
    v /= np.linalg.norm(v)
    radius = 0.0
    for _ in range(iters):
        w = matrix @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        radius = norm
        v = w / norm
    return float(radius)


# -- file formats -------------------------------------------------------


def save_taxonomy(path, edges: list[tuple[str, str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# child\tparent\n")
        for child, parent in edges:
            fh.write(f"{child}\t{parent}\n")


def load_taxonomy(path) -> list[tuple[str, str]]:
    """Read "child<TAB>parent" edges; '#' lines are comments."""
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ParseError(f"expected child<TAB>parent, got {len(fields)} fields", line=lineno)
            child, parent = fields[0].strip(), fields[1].strip()
            if not child or not parent:
                raise InputError(f"line {lineno}: taxonomy edge with blank id")
            edges.append((child, parent))
    return edges


def save_graph(path, g: LabelGraph) -> None:
    """Triple format: header "labels L kind K", then "i<TAB>j<TAB>weight" (i <= j)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"labels {g.size} kind {g.kind}\n")
        rows, cols = np.nonzero(np.triu(g.adjacency))
        for i, j in zip(rows, cols):
            fh.write(f"{i}\t{j}\t{repr(float(g.adjacency[i, j]))}\n")


def load_graph(path) -> LabelGraph:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        fields = header.split()
        if len(fields) != 4 or fields[0] != "labels" or fields[2] != "kind":
            raise ParseError(f"bad graph header {header!r}", line=1)
        try:
            size = int(fields[1])
        except ValueError:
            raise ParseError(f"bad label count {fields[1]!r}", line=1) from None
        kind = fields[3]
        if kind not in GRAPH_KINDS:
            raise ParseError(f"unknown graph kind {kind!r}", line=1)
        matrix = np.zeros((size, size))
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ParseError(f"expected i<TAB>j<TAB>weight, got {len(parts)} fields", line=lineno)
            try:
                i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise ParseError(f"bad triple: {exc}", line=lineno) from None
            if not (0 <= i < size and 0 <= j < size):
                raise InputError(f"line {lineno}: index ({i},{j}) outside {size} labels")
            if w < 0.0:
                raise InputError(f"line {lineno}: negative weight {w}")
            matrix[i, j] = w
            matrix[j, i] = w
    return LabelGraph(kind, matrix)
