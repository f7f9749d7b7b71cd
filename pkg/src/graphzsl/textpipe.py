"""Tokenization, vocabulary, pretrained embeddings, and TF-IDF label vectors.

A label's vector v_l is the TF-IDF-weighted average of the pretrained
embeddings of its description tokens. Tokens without pretrained coverage
are excluded from the average; a fully uncovered description yields a
zero vector with a warning flag so the caller can surface it.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError, ParseError
from .numerics import glorot_uniform_init, seeded_rng

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs; empties dropped."""
    return _TOKEN_RE.findall(text.lower())


class Vocab:
    """Token/id bijection with id 0 reserved for padding, id 1 for unknown."""

    def __init__(self, id_to_token: list[str], counts: dict[str, int]):
        if id_to_token[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise InputError("vocab must reserve id 0 for padding and id 1 for unknown")
        self.id_to_token = list(id_to_token)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise InputError("vocab tokens must be unique")
        self.counts = dict(counts)

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id_for(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.token_to_id.get(t, UNK_ID) for t in tokens]


def build_vocab(corpus: list[list[str]], min_count: int = 1) -> Vocab:
    """Vocabulary over token lists; ids ordered by frequency then token."""
    if min_count < 1:
        raise InputError(f"min_count must be >= 1, got {min_count}")
    counts: Counter[str] = Counter()
    for tokens in corpus:
        counts.update(tokens)
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocab([PAD_TOKEN, UNK_TOKEN] + kept, counts)


@dataclass
class EmbeddingTable:
    """Per-vocab-id embedding rows plus pretrained-coverage flags."""

    vocab: Vocab
    matrix: np.ndarray  # |vocab| x dim
    covered: np.ndarray  # bool per vocab id; True iff row came from the file

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def row(self, token: str) -> np.ndarray:
        return self.matrix[self.vocab.id_for(token)]

    def is_covered(self, token: str) -> bool:
        return bool(self.covered[self.vocab.id_for(token)])


def _parse_floats(fields: list[str], lineno: int) -> list[float]:
    try:
        return [float(f) for f in fields]
    except ValueError as exc:
        raise ParseError(f"bad float in embedding file: {exc}", line=lineno) from None


def load_embeddings(path, vocab: Vocab, d: int, seed: int = 0) -> EmbeddingTable:
    """Read whitespace-delimited text embeddings into vocab order.

    An optional first line "count dim" is accepted as a header. Vocab
    tokens absent from the file get Glorot fallback rows (coverage flag
    False); the padding row is zero.
    """
    if d < 1:
        raise DimensionError(f"embedding dim must be >= 1, got {d}")
    rng = seeded_rng(seed, "embed_fallback")
    matrix = glorot_uniform_init(len(vocab), d, rng)
    matrix[PAD_ID] = 0.0
    covered = np.zeros(len(vocab), dtype=bool)

    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    start = 0
    if lines and len(lines[0].split()) == 2:
        head = lines[0].split()
        if head[0].isdigit() and head[1].isdigit():
            if int(head[1]) != d:
                raise DimensionError(f"embedding file dim {head[1]} does not match configured {d}")
            start = 1
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 1 + d:
            raise ParseError(f"expected token plus {d} floats, got {len(fields)} fields", line=lineno)
        token = fields[0]
        values = _parse_floats(fields[1:], lineno)
        idx = vocab.token_to_id.get(token)
        if idx is None or idx < 2:
            continue
        matrix[idx] = values
        covered[idx] = True
    if not np.isfinite(matrix).all():
        raise InputError("embedding file contains non-finite values")
    return EmbeddingTable(vocab=vocab, matrix=matrix, covered=covered)


def write_embeddings(path, tokens: list[str], matrix: np.ndarray, header: bool = True) -> None:
    """Write rows as "token v1 ... vd" lines; floats use repr for bit-exact reload."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
        raise DimensionError(f"matrix shape {matrix.shape} does not match {len(tokens)} tokens")
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(tokens)} {matrix.shape[1]}\n")
        for token, row in zip(tokens, matrix):
            fh.write(token + " " + " ".join(repr(float(x)) for x in row) + "\n")


@dataclass
class IdfTable:
    """Smoothed idf weights over the label-description corpus."""

    n_docs: int
    weights: dict[str, float]

    def idf(self, token: str) -> float:
        got = self.weights.get(token)
        if got is not None:
            return got
        # df = 0 smoothing for tokens never seen in any description
        return math.log(1.0 + self.n_docs) + 1.0


def compute_idf(descriptions: list[list[str]]) -> IdfTable:
    """idf(t) = ln((1+N)/(1+df(t))) + 1 over N description token lists."""
    if not descriptions:
        raise InputError("compute_idf needs at least one description")
    n = len(descriptions)
    df: Counter[str] = Counter()
    for tokens in descriptions:
        df.update(set(tokens))
    weights = {t: math.log((1.0 + n) / (1.0 + c)) + 1.0 for t, c in df.items()}
    return IdfTable(n_docs=n, weights=weights)


def label_embedding(
    description: list[str], table: EmbeddingTable, idf: IdfTable
) -> tuple[np.ndarray, bool]:
    """TF-IDF-weighted mean of covered token embeddings.

    Returns (v_l, covered_flag); an all-uncovered description gives a
    zero vector and flag False.
    """
    tf = Counter(description)
    num = np.zeros(table.dim)
    den = 0.0
    # iterate in sorted token order so float accumulation is permutation-proof
    for token in sorted(tf):
        idx = table.vocab.token_to_id.get(token)
        if idx is None or not table.covered[idx]:
            continue
        w = tf[token] * idf.idf(token)
        num += w * table.matrix[idx]
        den += w
    if den == 0.0:
        return np.zeros(table.dim), False
    return num / den, True


def label_embedding_matrix(
    descriptions: list[list[str]], table: EmbeddingTable, idf: IdfTable
) -> tuple[np.ndarray, np.ndarray]:
    """Stack label_embedding over a catalog; returns (L x d matrix, coverage flags)."""
    rows = np.zeros((len(descriptions), table.dim))
    flags = np.zeros(len(descriptions), dtype=bool)
    for i, tokens in enumerate(descriptions):
        rows[i], flags[i] = label_embedding(tokens, table, idf)
    return rows, flags
