"""Corpus and label-catalog containers, line-record IO, and synthetic data.

A dataset is three or four files: a label catalog (one JSON object per
line with "code" and "description"), a corpus (one JSON object per line
with "id", "text", "labels", "split"), an optional taxonomy edge list,
and a pretrained-embedding text file. Documents carry label ids, which
index the catalog order everywhere downstream (graphs, model, metrics).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError
from .labelgraphs import save_taxonomy
from .numerics import seeded_rng
from .textpipe import tokenize, write_embeddings

SPLITS = ("train", "dev", "test")


class LabelCatalog:
    """Ordered label codes with tokenized descriptions; order fixes graph/axis ids."""

    def __init__(self, codes: list[str], descriptions: list[list[str]]):
        if len(codes) != len(descriptions):
            raise InputError("codes and descriptions must align")
        if len(set(codes)) != len(codes):
            raise InputError("label codes must be unique")
        if any(not c for c in codes):
            raise InputError("label codes must be nonempty")
        self.codes = list(codes)
        self.descriptions = [list(d) for d in descriptions]
        self.code_to_id = {c: i for i, c in enumerate(self.codes)}

    def __len__(self) -> int:
        return len(self.codes)

    def __contains__(self, code: str) -> bool:
        return code in self.code_to_id

    def id_for(self, code: str) -> int:
        try:
            return self.code_to_id[code]
        except KeyError:
            raise InputError(f"unknown label code {code!r}") from None


@dataclass(frozen=True)
class Document:
    doc_id: str
    tokens: tuple[str, ...]
    labels: tuple[int, ...]  # sorted catalog ids
    split: str

    @property
    def label_set(self) -> frozenset[int]:
        return frozenset(self.labels)


class Corpus:
    """Documents plus the catalog their label ids index."""

    def __init__(self, documents: list[Document], catalog: LabelCatalog):
        seen_ids = set()
        for doc in documents:
            if doc.doc_id in seen_ids:
                raise InputError(f"duplicate document id {doc.doc_id!r}")
            seen_ids.add(doc.doc_id)
            if doc.split not in SPLITS:
                raise InputError(f"unknown split {doc.split!r} for document {doc.doc_id!r}")
            for lab in doc.labels:
                if not 0 <= lab < len(catalog):
                    raise InputError(f"document {doc.doc_id!r} references label id {lab}")
        self.documents = list(documents)
        self.catalog = catalog

    def split(self, name: str) -> list[Document]:
        if name not in SPLITS:
            raise InputError(f"unknown split {name!r}")
        return [d for d in self.documents if d.split == name]

    def train_label_frequencies(self) -> np.ndarray:
        """Documents-per-label counts over the train split."""
        freq = np.zeros(len(self.catalog), dtype=np.int64)
        for doc in self.split("train"):
            for lab in doc.labels:
                freq[lab] += 1
        return freq

    def unseen_labels(self) -> set[int]:
        """Labels with zero train frequency (the zero-shot bucket)."""
        freq = self.train_label_frequencies()
        return {int(i) for i in np.flatnonzero(freq == 0)}


def _parse_line(line: str, lineno: int) -> dict:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad record: {exc.msg}", line=lineno) from None
    if not isinstance(record, dict):
        raise ParseError("record must be an object", line=lineno)
    return record


def load_catalog(path) -> LabelCatalog:
    """Read label records {"code", "description"}, one per line, in order."""
    codes, descriptions = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = _parse_line(line, lineno)
            for key in ("code", "description"):
                if key not in record or not isinstance(record[key], str):
                    raise ParseError(f"label record needs string field {key!r}", line=lineno)
            codes.append(record["code"])
            descriptions.append(tokenize(record["description"]))
    if not codes:
        raise InputError(f"no label records in {path}")
    return LabelCatalog(codes, descriptions)


def save_catalog(path, catalog: LabelCatalog) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for code, desc in zip(catalog.codes, catalog.descriptions):
            fh.write(json.dumps({"code": code, "description": " ".join(desc)}) + "\n")


def load_corpus(path, catalog: LabelCatalog) -> Corpus:
    """Read document records {"id", "text", "labels", "split"}, one per line."""
    documents = []
    unknown: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = _parse_line(line, lineno)
            if not isinstance(record.get("id"), str) or not isinstance(record.get("text"), str):
                raise ParseError('document record needs string "id" and "text"', line=lineno)
            if not isinstance(record.get("labels"), list) or not isinstance(record.get("split"), str):
                raise ParseError('document record needs "labels" list and "split"', line=lineno)
            if record["split"] not in SPLITS:
                raise ParseError(f"unknown split {record['split']!r}", line=lineno)
            codes = record["labels"]
            missing = [c for c in codes if c not in catalog]
            if missing:
                unknown.update(missing)
                continue
            documents.append(
                Document(
                    doc_id=record["id"],
                    tokens=tuple(tokenize(record["text"])),
                    labels=tuple(sorted(catalog.id_for(c) for c in set(codes))),
                    split=record["split"],
                )
            )
    if unknown:
        raise InputError(f"unknown label codes in corpus: {sorted(unknown)}")
    return Corpus(documents, catalog)


def save_corpus(path, corpus: Corpus) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            record = {
                "id": doc.doc_id,
                "text": " ".join(doc.tokens),
                "labels": [corpus.catalog.codes[i] for i in doc.labels],
                "split": doc.split,
            }
            fh.write(json.dumps(record) + "\n")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


# -- synthetic corpus generation ----------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for the synthetic topic corpus.

    Every label owns a list of topic words; a document draws its tokens
    from the topics of its gold labels plus a shared background pool.
    Zero-bucket labels reuse a slice of an anchor label's topic words,
    so their test documents resemble the anchor's training documents.
    A hier_coverage fraction of them additionally get a taxonomy edge
    to the anchor while their description keeps only unique specialist
    words that are left out of the pretrained embedding table, so the
    description embeds to the zero vector and only the taxonomy edge
    can reach the label; the rest keep anchor words plus two words of
    a small shared family vocabulary in the description instead, which
    links them to the anchor through description similarity. The two
    graph kinds cover complementary zero subsets. Few-shot labels
    mirror the same anchored structure and the same coverage split, so
    every label-side feature a zero label exposes is either exactly
    zero or load-bearing for labels with positive training signal.

    generic_overlap > 0 swaps that fraction of every frequent label's
    description for qualifier words shared with exactly one unrelated
    frequent label, and appends the qualifiers of a wrong group to
    every hier-like anchored description, which then embeds to the
    group's shared generic direction. The groups plant strong
    description-similarity edges between labels whose documents never
    co-occur, a controlled noise source for comparing fusion
    strategies: a model that keeps graphs in separate relay stacks can
    learn to discount the misleading graph wholesale, while merging
    the graphs first bakes the spurious edges into every relay step.
    """

    n_frequent: int = 30
    n_few: int = 15
    n_zero: int = 35
    n_train: int = 2000
    n_dev: int = 200
    n_test_seen: int = 120
    n_test_few: int = 40
    test_docs_per_zero: int = 6
    words_per_topic: int = 8
    zero_overlap: float = 0.5  # anchor-word fraction of a zero label's topic
    desc_overlap: float = 0.25  # anchor-word fraction kept in its description
    hier_coverage: float = 0.5  # fraction of zero labels with a taxonomy edge
    misfile_frac: float = 1.0  # fraction of sim-like labels filed under a wrong taxonomy parent
    generic_overlap: float = 0.0  # description fraction swapped for pair-shared qualifiers
    n_anchors: int = 0  # anchor pool size for zero labels; 0 means n_frequent
    doc_len: int = 30
    noise_words: int = 40
    noise_frac: float = 0.3
    pair_prob: float = 0.6  # chance a seen-label document takes both pair members
    few_threshold: int = 5
    embed_dim: int = 24
    embed_noise: float = 0.15

    def __post_init__(self):
        floors = {
            "n_frequent": 2,
            "n_train": 1,
            "n_dev": 1,
            "words_per_topic": 2,
            "doc_len": 2,
            "noise_words": 1,
            "embed_dim": 2,
            "few_threshold": 1,
        }
        for name, floor in floors.items():
            if getattr(self, name) < floor:
                raise InputError(f"{name} must be >= {floor}")
        for name in ("n_few", "n_zero", "n_test_seen", "n_test_few", "test_docs_per_zero"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be >= 0")
        for name in (
            "zero_overlap",
            "desc_overlap",
            "hier_coverage",
            "misfile_frac",
            "generic_overlap",
            "pair_prob",
        ):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InputError(f"{name} must lie in [0, 1]")
        if round(self.generic_overlap * self.words_per_topic) >= self.words_per_topic:
            raise InputError("generic_overlap leaves frequent labels no own description words")
        if not 0.0 <= self.noise_frac < 1.0:
            raise InputError("noise_frac must lie in [0, 1)")
        if self.embed_noise < 0.0:
            raise InputError("embed_noise must be >= 0")
        if not 0 <= self.n_anchors <= self.n_frequent:
            raise InputError("n_anchors must lie in [0, n_frequent]")
        if self.n_zero > 0:
            if self.test_docs_per_zero < 1:
                raise InputError("test_docs_per_zero must be >= 1 when n_zero > 0")
            if round(self.zero_overlap * self.words_per_topic) >= self.words_per_topic:
                raise InputError("zero_overlap leaves zero labels no unique topic words")
        if self.n_few == 0 and self.n_test_few > 0:
            raise InputError("n_test_few needs n_few > 0")


def acceptance_spec(**overrides) -> SyntheticSpec:
    """Corpus sized for the zero-shot and ablation acceptance runs."""
    return SyntheticSpec(**overrides)


def separable_spec(**overrides) -> SyntheticSpec:
    """Noise-free single-gold corpus on which dev recall@1 can reach 1."""
    base = dict(
        n_frequent=6,
        n_few=0,
        n_zero=0,
        n_train=120,
        n_dev=30,
        n_test_seen=30,
        n_test_few=0,
        test_docs_per_zero=0,
        words_per_topic=6,
        zero_overlap=0.5,
        desc_overlap=0.25,
        hier_coverage=0.0,
        doc_len=12,
        noise_words=6,
        noise_frac=0.0,
        pair_prob=0.0,
        few_threshold=5,
        embed_dim=16,
        embed_noise=0.1,
    )
    base.update(overrides)
    return SyntheticSpec(**base)


@dataclass
class SyntheticData:
    """Generated corpus plus the side files the pipeline consumes."""

    corpus: Corpus
    taxonomy: list[tuple[str, str]]
    embedding_tokens: list[str]
    embedding_matrix: np.ndarray
    spec: SyntheticSpec
    seed: int


def _evenly_spread_flags(count: int, fraction: float) -> list[bool]:
    """count booleans, a `fraction` share True, interleaved evenly."""
    return [
        math.floor((j + 1) * fraction) - math.floor(j * fraction) >= 1
        for j in range(count)
    ]


def generate_synthetic(spec: SyntheticSpec, seed: int) -> SyntheticData:
    """Deterministic corpus for one seed; equal inputs give equal bytes."""
    rng = seeded_rng(seed, "synthetic")
    wpt = spec.words_per_topic
    codes = (
        [f"FRQ{i:02d}" for i in range(spec.n_frequent)]
        + [f"FEW{i:02d}" for i in range(spec.n_few)]
        + [f"ZRO{i:02d}" for i in range(spec.n_zero)]
    )
    n_seen = spec.n_frequent + spec.n_few

    centroids = rng.normal(size=(len(codes), spec.embed_dim))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)

    vectors: dict[str, np.ndarray] = {}

    def own_word(label_id: int, index: int, embed: bool = True) -> str:
        word = f"{codes[label_id].lower()}w{index}"
        if embed:
            vectors[word] = centroids[label_id] + spec.embed_noise * rng.normal(
                size=spec.embed_dim
            )
        return word

    shared_count = round(spec.zero_overlap * wpt)
    desc_shared = min(round(spec.desc_overlap * wpt), shared_count)

    generic_count = round(spec.generic_overlap * wpt)
    n_pairs = max(1, spec.n_frequent // 2)

    def generic_words(group: int) -> list[str]:
        """Qualifier words shared by every description in one group."""
        names = []
        for t in range(generic_count):
            word = f"gx{group:02d}u{t}"
            if word not in vectors:
                vectors[word] = rng.normal(size=spec.embed_dim)
                vectors[word] /= np.linalg.norm(vectors[word])
            names.append(word)
        return names

    # descriptions of co-labeled pair members share desc_shared words,
    # so the pair backbone that the taxonomy and co-occurrence graphs
    # carry shows up in the description-similarity graph too and its
    # relay weights train on the frequent-pair documents as well
    def pair_desc_words(p: int) -> list[str]:
        names = []
        for t in range(desc_shared):
            word = f"pr{p:02d}u{t}"
            if word not in vectors:
                blend = centroids[2 * p] + centroids[2 * p + 1]
                blend /= np.linalg.norm(blend)
                vectors[word] = blend + spec.embed_noise * rng.normal(
                    size=spec.embed_dim
                )
            names.append(word)
        return names

    topics: list[list[str]] = []
    descriptions: list[list[str]] = []
    for i in range(spec.n_frequent):
        words = [own_word(i, j) for j in range(wpt)]
        topics.append(words)
        description = list(words)
        if desc_shared and 2 * (i // 2) + 1 < spec.n_frequent:
            description = words[: wpt - desc_shared] + pair_desc_words(i // 2)
        if generic_count:
            # generic qualifier words shared by one cross-half pair of
            # frequent labels: the pair's descriptions then look similar
            # even though their documents are unrelated, so the
            # similarity graph picks up realistic spurious edges
            pair_id = min(i, (i + spec.n_frequent // 2) % spec.n_frequent)
            description = description[: len(description) - generic_count] + generic_words(pair_id)
        descriptions.append(description)

    anchor_use = [0] * n_seen

    group_span = max(1, n_pairs // 3)
    group_base = min(n_pairs // 2, n_pairs - group_span)

    # route flags for the anchored labels: hier-like ones rehearse the
    # taxonomy route, the rest the description-similarity route
    few_flags = _evenly_spread_flags(spec.n_few, spec.hier_coverage)
    hier_flags = _evenly_spread_flags(spec.n_zero, spec.hier_coverage)

    # sim-like descriptions draw on a family vocabulary owned by the
    # sim-like few-shot labels: each such label holds a two-word
    # combination of its own, and each sim-like zero label bridges two
    # of those combinations with one word from each. Every word a zero
    # description embeds to is then load-bearing for a label with
    # training documents, so no weight update can suppress the zero
    # label without also hurting a trained label's fit, and the shared
    # words give every zero label similarity edges to trained relays.
    owned_combo: dict = {}
    bridged: dict = {}

    def fam_word(t: int) -> str:
        word = f"fam{t:02d}"
        if word not in vectors:
            vectors[word] = rng.normal(size=spec.embed_dim)
            vectors[word] /= np.linalg.norm(vectors[word])
        return word

    def family_combo(key) -> list[str]:
        """Two family words per key.

        A few-shot key owns a two-word combination outright. A zero
        key takes one word from each of two different owned
        combinations, ring-strided so the owners rotate evenly;
        with no owned combination to draw on it owns one as well.
        """
        zero_key = isinstance(key, tuple) and key[0] == "zero"
        if not zero_key or not owned_combo:
            if key not in owned_combo:
                owned_combo[key] = len(owned_combo)
            s = owned_combo[key]
            return [fam_word(2 * s), fam_word(2 * s + 1)]
        if key not in bridged:
            bridged[key] = len(bridged)
        m = bridged[key]
        count = len(owned_combo)
        first = m % count
        second = (m + 1 + m // count) % count
        if second == first:
            second = (second + 1) % count
        return [fam_word(2 * first), fam_word(2 * second + 1)]

    def anchored_topic(
        label_id: int,
        anchor: int,
        hier_like: bool,
        family_key=None,
        own_desc: bool = False,
    ):
        """Topic and description for a label leaning on an anchor label.

        The topic reuses a window of the anchor's words plus label-own
        words; the window slides per reuse so labels leaning on the same
        anchor overlap the anchor but barely each other. A hier-like
        label keeps only its own specialist words in the description,
        and those words are left out of the pretrained embedding table,
        so its description embeds to the zero vector and only the
        taxonomy edge can reach it. A sim-like label instead describes
        itself with topic words plus its family combination: its own
        specialist words when `own_desc` is set, as for few-shot
        labels, and words borrowed from the anchor otherwise, so a
        zero label is described entirely by words that are
        load-bearing for the trained label it leans on.

        With generic qualifiers enabled, a hier-like description also
        carries the qualifier words of a group unrelated to its anchor,
        so it embeds to the group's shared generic direction: the
        similarity graph then ties the label to wrong labels while the
        taxonomy edge stays its only correct route.
        """
        step = (anchor_use[anchor] * 2) % max(1, wpt - shared_count + 1)
        anchor_use[anchor] += 1
        # labels anchored on a few-shot label take their window from the
        # top of the relay topic, where the relay's own words live
        start = (wpt - shared_count) - step if anchor >= spec.n_frequent else step
        shared = topics[anchor][start : start + shared_count]
        unique = [
            own_word(label_id, t, embed=not hier_like)
            for t in range(wpt - shared_count)
        ]
        if hier_like:
            description = list(unique)
            if generic_count:
                local = label_id - (spec.n_frequent if label_id < n_seen else n_seen)
                description += generic_words(group_base + local % group_span)
            return shared + unique, description
        family = family_combo(family_key if family_key is not None else label_id)
        window = unique if own_desc else shared
        return shared + unique, window[:desc_shared] + family

    # few-shot labels mirror the zero-label structure with a handful of
    # training documents, split between the two routes by the same
    # coverage fraction. Fitting their documents needs graph
    # propagation, which keeps both routes trained and lets them
    # transfer to the structurally identical zero labels at test.
    for j in range(spec.n_few):
        label_id = spec.n_frequent + j
        topic, description = anchored_topic(
            label_id,
            j % spec.n_frequent,
            few_flags[j],
            family_key=("few", j),
            own_desc=True,
        )
        topics.append(topic)
        descriptions.append(description)

    anchor_pool = spec.n_anchors or spec.n_frequent
    # sim-like zero labels anchor on a sim-like few-shot relay and
    # repeat its family combination verbatim: the similarity edge then
    # points at a trained label, and because the zero topic reuses a
    # window of the relay's own topic, whatever the relay's fit learns
    # to respond to also shows up in the zero label's documents.
    relay_js = [j for j in range(spec.n_few) if not few_flags[j]]
    anchor_of: dict[int, int] = {}
    sim_seen = 0
    for j in range(spec.n_zero):
        label_id = n_seen + j
        if not hier_flags[j] and relay_js:
            relay = relay_js[sim_seen % len(relay_js)]
            sim_seen += 1
            anchor = spec.n_frequent + relay
            family_key = ("few", relay)
        else:
            anchor = j % anchor_pool
            family_key = ("zero", j)
        anchor_of[label_id] = anchor
        topic, description = anchored_topic(
            label_id, anchor, hier_flags[j], family_key=family_key
        )
        topics.append(topic)
        descriptions.append(description)

    background = []
    for b in range(spec.noise_words):
        word = f"bg{b:03d}"
        vectors[word] = spec.embed_noise * rng.normal(size=spec.embed_dim)
        background.append(word)

    taxonomy: list[tuple[str, str]] = []
    for p in range(0, spec.n_frequent - 1, 2):
        branch = f"branch{p // 2:02d}"
        taxonomy.append((codes[p], branch))
        taxonomy.append((codes[p + 1], branch))
    for j in range(spec.n_few):
        if few_flags[j]:
            taxonomy.append((codes[spec.n_frequent + j], codes[j % spec.n_frequent]))
    # sim-like zero labels can be misfiled: their taxonomy edge points
    # at a parent unrelated to their content. The hierarchy graph then
    # mixes that parent's likeness into their score, which damps them
    # when it is the only graph, while the description-similarity edge
    # to their relay still identifies them. No trained label carries a
    # misfiled edge, so the model cannot learn the mixture away.
    mis_flags = _evenly_spread_flags(spec.n_zero - sum(hier_flags), spec.misfile_frac)
    sim_idx = 0
    for j in range(spec.n_zero):
        label_id = n_seen + j
        if hier_flags[j]:
            taxonomy.append((codes[label_id], codes[anchor_of[label_id]]))
            continue
        if spec.n_frequent >= 2 and mis_flags[sim_idx]:
            anchor = anchor_of[label_id]
            if anchor >= spec.n_frequent:
                anchor = (anchor - spec.n_frequent) % spec.n_frequent
            parent = (anchor + max(1, spec.n_frequent // 2)) % spec.n_frequent
            taxonomy.append((codes[label_id], codes[parent]))
        sim_idx += 1

    def sample_tokens(gold: list[int]) -> tuple[str, ...]:
        noisy = rng.random(spec.doc_len) < spec.noise_frac
        label_pick = rng.integers(0, len(gold), size=spec.doc_len)
        word_pick = rng.integers(0, wpt, size=spec.doc_len)
        bg_pick = rng.integers(0, len(background), size=spec.doc_len)
        return tuple(
            background[bg_pick[t]]
            if noisy[t]
            else topics[gold[label_pick[t]]][word_pick[t]]
            for t in range(spec.doc_len)
        )

    def pair_gold(index: int) -> list[int]:
        p = index % n_pairs
        first, second = 2 * p, min(2 * p + 1, spec.n_frequent - 1)
        if first != second and rng.random() < spec.pair_prob:
            return [first, second]
        if first == second:
            return [first]
        return [first] if rng.random() < 0.5 else [second]

    def few_gold(j: int) -> list[int]:
        # single gold: few labels then stay isolated in the train-split
        # co-occurrence graph exactly like zero labels, so an isolated
        # row cannot serve as an is-unseen feature
        return [spec.n_frequent + j]

    # heavier training quotas go to the sim-like few labels: their fit
    # leaks into the direct description path, so the similarity relay
    # needs more positive documents to train as hot as the taxonomy
    # relay, which the hier-like labels (zero description vector, graph
    # as the only route) already train with one or two documents
    cap = spec.few_threshold
    quotas = [
        min(cap, 1 + (j // 2) % 2)
        if few_flags[j]
        else min(cap, max(1, cap - 1) + (j // 2) % 2)
        for j in range(spec.n_few)
    ]
    few_docs_needed = sum(quotas)
    if few_docs_needed >= spec.n_train:
        raise InputError(
            f"n_train={spec.n_train} cannot hold {few_docs_needed} few-label documents"
        )

    train_payload = []
    for index in range(spec.n_train - few_docs_needed):
        gold = pair_gold(index)
        train_payload.append((gold, sample_tokens(gold)))
    for j, quota in enumerate(quotas):
        for _ in range(quota):
            gold = few_gold(j)
            train_payload.append((gold, sample_tokens(gold)))
    order = rng.permutation(len(train_payload))

    documents = []
    for pos, payload_index in enumerate(order):
        gold, tokens = train_payload[int(payload_index)]
        documents.append(
            Document(f"tr{pos:05d}", tokens, tuple(sorted(set(gold))), "train")
        )
    for index in range(spec.n_dev):
        # salt dev with few-shot documents so the dev metric keeps
        # moving after the frequent labels are learned
        if spec.n_few and index % 3 == 2:
            gold = few_gold(index % spec.n_few)
        else:
            gold = pair_gold(index)
        documents.append(
            Document(f"dv{index:05d}", sample_tokens(gold), tuple(sorted(set(gold))), "dev")
        )
    for index in range(spec.n_test_seen):
        gold = pair_gold(index)
        documents.append(
            Document(f"ts{index:05d}", sample_tokens(gold), tuple(sorted(set(gold))), "test")
        )
    for index in range(spec.n_test_few):
        gold = few_gold(index % spec.n_few)
        documents.append(
            Document(f"tf{index:05d}", sample_tokens(gold), tuple(sorted(set(gold))), "test")
        )
    for j in range(spec.n_zero):
        label_id = n_seen + j
        for t in range(spec.test_docs_per_zero):
            documents.append(
                Document(f"tz{j:03d}x{t:02d}", sample_tokens([label_id]), (label_id,), "test")
            )

    tokens = list(vectors)
    return SyntheticData(
        corpus=Corpus(documents, LabelCatalog(codes, descriptions)),
        taxonomy=taxonomy,
        embedding_tokens=tokens,
        embedding_matrix=np.array([vectors[t] for t in tokens]),
        spec=spec,
        seed=seed,
    )


DATASET_FILES = {
    "labels": "labels.jsonl",
    "corpus": "corpus.jsonl",
    "taxonomy": "taxonomy.tsv",
    "embeddings": "embeddings.txt",
}


def write_dataset(data: SyntheticData, out_dir) -> dict[str, str]:
    """Write the four dataset files; returns name -> path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: str(out / filename) for name, filename in DATASET_FILES.items()}
    save_catalog(paths["labels"], data.corpus.catalog)
    save_corpus(paths["corpus"], data.corpus)
    save_taxonomy(paths["taxonomy"], data.taxonomy)
    write_embeddings(paths["embeddings"], data.embedding_tokens, data.embedding_matrix)
    return paths
