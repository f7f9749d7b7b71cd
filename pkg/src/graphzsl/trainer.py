"""Mini-batch training with Adam, dev-set early stopping, and checkpoints.

One run is single-threaded and fully deterministic: shuffling and
dropout draw from streams keyed by (seed, purpose, epoch, batch), so the
same config and seed reproduce parameters bit-for-bit. Checkpoints store
every parameter matrix raw (little-endian float64) plus fingerprints of
the vocabulary and graphs; loading validates those before returning.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionError, InputError, IntegrityError, NumericError
from .evalmetrics import rank_labels, recall_at_k
from .labelgraphs import LabelGraph
from .model import ModelConfig, MultiGraphClassifier, check_params
from .numerics import AdamState, adam_step, seeded_rng
from .textpipe import Vocab


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 0.001
    dropout: float = 0.2
    patience: int = 5
    seed: int = 0
    max_len: int = 2500
    dev_k: int = 10
    grad_clip: float | None = None  # global-norm ceiling; None disables

    def __post_init__(self):
        if self.epochs < 0:
            raise InputError("epochs must be >= 0")
        if self.batch_size < 1:
            raise InputError("batch_size must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise InputError("dropout must lie in [0, 1)")
        if self.patience < 1:
            raise InputError("patience must be >= 1")
        if self.max_len < 1 or self.dev_k < 1:
            raise InputError("max_len and dev_k must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_metric: float
    seconds: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None

    def best_metric(self) -> float | None:
        if self.best_epoch is None:
            return None
        return self.records[self.best_epoch].dev_metric

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps(dataclasses.asdict(r)) + "\n")


def make_batches(items: list, batch_size: int, rng: np.random.Generator) -> list[list]:
    """Shuffle then chunk; the final short batch is kept."""
    if not items:
        raise InputError("cannot batch an empty split")
    if batch_size < 1:
        raise InputError("batch_size must be >= 1")
    order = rng.permutation(len(items))
    return [
        [items[i] for i in order[at : at + batch_size]]
        for at in range(0, len(items), batch_size)
    ]


def encode_split(docs, vocab: Vocab, max_len: int, n_labels: int):
    """Token-id lists (truncated), gold sets, and the 0/1 gold matrix."""
    id_lists, gold_sets = [], []
    for doc in docs:
        ids = vocab.encode(list(doc.tokens))[:max_len]
        if not ids:
            raise InputError(f"document {doc.doc_id!r} has no tokens")
        id_lists.append(ids)
        gold_sets.append(set(doc.labels))
    gold_matrix = np.zeros((len(docs), n_labels))
    for row, gold in zip(gold_matrix, gold_sets):
        row[list(gold)] = 1.0
    return id_lists, gold_sets, gold_matrix


def score_documents(model: MultiGraphClassifier, id_lists, chunk_size: int = 64) -> np.ndarray:
    """Eval-mode scores for many documents, chunked to bound tape size."""
    rows = [
        model.scores(id_lists[at : at + chunk_size])
        for at in range(0, len(id_lists), chunk_size)
    ]
    return np.concatenate(rows, axis=0) if rows else np.zeros((0, model.n_labels))


def _dev_recall(score_rows: np.ndarray, gold_sets, k: int) -> float:
    """Mean overall R@k across documents with nonempty gold."""
    labels = range(score_rows.shape[1])
    values = [
        recall_at_k(rank_labels(row, labels), gold, k)
        for row, gold in zip(score_rows, gold_sets)
        if gold
    ]
    if not values:
        raise ContractError("dev split has no document with gold labels")
    return float(np.mean(values))


def _clip_gradients(grads: dict[str, np.ndarray], ceiling: float) -> dict[str, np.ndarray]:
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total <= ceiling or total == 0.0:
        return grads
    scale = ceiling / total
    return {name: g * scale for name, g in grads.items()}


def train(
    corpus,
    graphs: list[LabelGraph],
    embeddings,
    label_vectors: np.ndarray,
    model_config: ModelConfig,
    train_config: TrainConfig,
    unseen: set[int] | None = None,
) -> tuple[dict[str, np.ndarray], TrainHistory]:
    """Optimize on the train split, select the best dev epoch, early-stop.

    Every label (seen or not) appears in each document's gold vector, so
    unseen labels train through their graph branch with gold 0. `unseen`
    optionally declares labels that must never appear in training docs.
    """
    train_docs = corpus.split("train")
    dev_docs = corpus.split("dev")
    if not train_docs:
        raise InputError("train split is empty")
    if not dev_docs:
        raise InputError("dev split is empty")
    if unseen:
        for doc in train_docs:
            bad = unseen.intersection(doc.labels)
            if bad:
                raise ContractError(
                    f"train document {doc.doc_id!r} carries unseen labels {sorted(bad)}"
                )

    vocab = embeddings.vocab
    n_labels = len(corpus.catalog)
    cfg = train_config
    train_ids, _, train_gold = encode_split(train_docs, vocab, cfg.max_len, n_labels)
    dev_ids, dev_gold_sets, _ = encode_split(dev_docs, vocab, cfg.max_len, n_labels)

    model = MultiGraphClassifier(
        model_config, embeddings, label_vectors, graphs, seed=cfg.seed
    )
    adam = AdamState(model.params, learning_rate=cfg.learning_rate)

    history = TrainHistory()
    best_params = {name: value.copy() for name, value in model.params.items()}
    best_metric = -1.0
    stale_epochs = 0

    for epoch in range(cfg.epochs):
        started = time.perf_counter()
        shuffle_rng = seeded_rng(cfg.seed, "shuffle", str(epoch))
        batches = make_batches(list(range(len(train_ids))), cfg.batch_size, shuffle_rng)
        loss_total = 0.0
        for batch_index, batch in enumerate(batches):
            dropout_rng = seeded_rng(cfg.seed, "dropout", str(epoch), str(batch_index))
            ids = [train_ids[i] for i in batch]
            gold = train_gold[batch]
            tape, loss, _ = model.batch_loss(
                ids, gold, train_mode=True, rng=dropout_rng, dropout=cfg.dropout
            )
            value = float(loss.value)
            if not np.isfinite(value):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {batch_index}"
                )
            grads = tape.backward(loss)
            if cfg.grad_clip is not None:
                grads = _clip_gradients(grads, cfg.grad_clip)
            adam_step(adam, model.params, grads)
            loss_total += value * len(batch)

        dev_scores = score_documents(model, dev_ids)
        dev_metric = _dev_recall(dev_scores, dev_gold_sets, cfg.dev_k)
        history.records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=loss_total / len(train_ids),
                dev_metric=dev_metric,
                seconds=time.perf_counter() - started,
            )
        )
        if dev_metric > best_metric:
            best_metric = dev_metric
            best_params = {name: value.copy() for name, value in model.params.items()}
            history.best_epoch = epoch
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= cfg.patience:
                break

    return best_params, history


# -- checkpoint format --------------------------------------------------

CHECKPOINT_MAGIC = b"GZCK"
CHECKPOINT_VERSION = 1


def vocab_fingerprint(vocab: Vocab) -> str:
    h = hashlib.sha256()
    for token in vocab.id_to_token:
        h.update(token.encode("utf-8") + b"\x00")
    return h.hexdigest()


def graph_fingerprint(graph: LabelGraph) -> str:
    h = hashlib.sha256()
    h.update(graph.kind.encode("utf-8") + b"\x00")
    h.update(struct.pack("<q", graph.size))
    h.update(np.ascontiguousarray(graph.adjacency, dtype="<f8").tobytes())
    return h.hexdigest()


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    model_config: ModelConfig
    metadata: dict


def save_checkpoint(path, params, model_config: ModelConfig, metadata: dict | None = None):
    """Versioned container: magic, version, JSON header, raw float64 payload."""
    check_params(model_config, params)
    names = sorted(params)
    payload = b"".join(
        np.ascontiguousarray(params[name], dtype="<f8").tobytes() for name in names
    )
    header = {
        "version": CHECKPOINT_VERSION,
        "model_config": dataclasses.asdict(model_config),
        "params": [{"name": name, "shape": list(params[name].shape)} for name in names],
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "metadata": metadata or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IQ", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(payload)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16 or raw[:4] != CHECKPOINT_MAGIC:
        raise IntegrityError(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack("<IQ", raw[4:16])
    if version != CHECKPOINT_VERSION:
        raise IntegrityError(f"{path}: unsupported checkpoint version {version}")
    if len(raw) < 16 + header_len:
        raise IntegrityError(f"{path}: truncated header")
    try:
        header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"{path}: corrupt header: {exc}") from None
    payload = raw[16 + header_len :]
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise IntegrityError(f"{path}: payload hash mismatch")

    config_fields = dict(header["model_config"])
    config_fields["graphs"] = tuple(config_fields.get("graphs", ()))
    model_config = ModelConfig(**config_fields)

    params = {}
    at = 0
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        size = count * 8
        if at + size > len(payload):
            raise IntegrityError(f"{path}: truncated payload at {entry['name']!r}")
        params[entry["name"]] = (
            np.frombuffer(payload[at : at + size], dtype="<f8").reshape(shape).copy()
        )
        at += size
    if at != len(payload):
        raise IntegrityError(f"{path}: {len(payload) - at} trailing payload bytes")
    check_params(model_config, params)
    return Checkpoint(params=params, model_config=model_config, metadata=header["metadata"])


def check_compatibility(checkpoint: Checkpoint, vocab: Vocab, graphs: list[LabelGraph]):
    """Reject a checkpoint whose data fingerprints do not match this run."""
    meta = checkpoint.metadata
    want_vocab = meta.get("vocab_sha256")
    if want_vocab is not None and want_vocab != vocab_fingerprint(vocab):
        raise IntegrityError("checkpoint vocabulary does not match this corpus")
    want_graphs = meta.get("graph_sha256")
    if want_graphs is not None:
        got = [graph_fingerprint(g) for g in graphs]
        if list(want_graphs) != got:
            raise IntegrityError(
                "checkpoint graphs do not match: trained on "
                f"{checkpoint.model_config.graphs}, given {[g.kind for g in graphs]}"
            )
