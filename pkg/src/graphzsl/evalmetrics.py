"""Frequency buckets and bucketed ranking metrics (R@K, P@K, RP@K, nDCG@K).

Buckets partition labels by train frequency: zero (never seen), few
(1..threshold), frequent (above threshold). Each bucket is scored as its
own retrieval problem: candidates restricted to the bucket's labels,
documents restricted to those with gold in the bucket, gold restricted
to the bucket, metrics macro-averaged over documents. Cells with no
contributing documents are absent from the report, never zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionError, InputError, NumericError

BUCKETS = ("frequent", "few", "zero")
REPORT_GROUPS = BUCKETS + ("overall",)
METRICS = ("R", "P", "RP", "nDCG")


@dataclass
class BucketAssignment:
    """Label id -> bucket name, derived from train frequencies."""

    bucket_of: dict[int, str]
    few_threshold: int

    def labels_in(self, bucket: str) -> list[int]:
        if bucket == "overall":
            return sorted(self.bucket_of)
        if bucket not in BUCKETS:
            raise InputError(f"unknown bucket {bucket!r}")
        return sorted(lab for lab, b in self.bucket_of.items() if b == bucket)


def assign_buckets(train_label_freq, few_threshold: int = 5) -> BucketAssignment:
    """freq 0 -> zero; 1..threshold -> few (inclusive); above -> frequent."""
    if few_threshold < 1:
        raise InputError(f"few_threshold must be >= 1, got {few_threshold}")
    freq = np.asarray(train_label_freq)
    if (freq < 0).any():
        raise InputError("negative train frequency")
    bucket_of = {}
    for lab, count in enumerate(freq):
        if count == 0:
            bucket_of[lab] = "zero"
        elif count <= few_threshold:
            bucket_of[lab] = "few"
        else:
            bucket_of[lab] = "frequent"
    return BucketAssignment(bucket_of=bucket_of, few_threshold=few_threshold)


def rank_labels(scores: np.ndarray, candidates) -> list[int]:
    """Candidates sorted by score descending, ties by ascending label id."""
    candidates = sorted(candidates)
    if not candidates:
        raise InputError("candidate set is empty")
    scores = np.asarray(scores)
    picked = scores[candidates]
    if np.isnan(picked).any():
        raise NumericError("NaN score in ranking")
    return sorted(candidates, key=lambda lab: (-scores[lab], lab))


def _check(ranked, gold, k) -> int:
    if not gold:
        raise ContractError("metrics need nonempty gold; caller must filter such documents")
    if k < 1:
        raise InputError(f"K must be >= 1, got {k}")
    return len(gold.intersection(ranked[:k]))


def recall_at_k(ranked: list[int], gold: set[int], k: int) -> float:
    return _check(ranked, gold, k) / len(gold)


def precision_at_k(ranked: list[int], gold: set[int], k: int) -> float:
    return _check(ranked, gold, k) / k


def rprecision_at_k(ranked: list[int], gold: set[int], k: int) -> float:
    return _check(ranked, gold, k) / min(k, len(gold))


def ndcg_at_k(ranked: list[int], gold: set[int], k: int) -> float:
    hits = _check(ranked, gold, k)
    if hits == 0:
        return 0.0
    dcg = sum(1.0 / math.log2(i + 2) for i, lab in enumerate(ranked[:k]) if lab in gold)
    idcg = sum(1.0 / math.log2(i + 2) for i in range(min(k, len(gold))))
    return dcg / idcg


_METRIC_FNS = {
    "R": recall_at_k,
    "P": precision_at_k,
    "RP": rprecision_at_k,
    "nDCG": ndcg_at_k,
}


@dataclass
class MetricsReport:
    """(group, metric, K) -> value plus contributing-document counts."""

    ks: tuple[int, ...]
    values: dict[tuple[str, str, int], float] = field(default_factory=dict)
    n_docs: dict[str, int] = field(default_factory=dict)
    header: dict = field(default_factory=dict)

    def get(self, group: str, metric: str, k: int) -> float | None:
        """Cell value, or None when no documents contributed (absent)."""
        return self.values.get((group, metric, k))

    def to_records(self) -> list[dict]:
        records = []
        for group in REPORT_GROUPS:
            for metric in METRICS:
                for k in self.ks:
                    value = self.values.get((group, metric, k))
                    if value is None:
                        continue
                    records.append(
                        {
                            "bucket": group,
                            "metric": metric,
                            "K": k,
                            "value": value,
                            "n_docs": self.n_docs.get(group, 0),
                        }
                    )
        return records

    def format_table(self) -> str:
        """Human-readable aligned table; absent cells print as '-'."""
        lines = []
        for key in sorted(self.header):
            lines.append(f"# {key} = {self.header[key]}")
        cols = [f"{m}@{k}" for k in self.ks for m in METRICS]
        width = max(len(c) for c in cols) + 2 if cols else 8
        head = "group".ljust(10) + "docs".rjust(6) + "".join(c.rjust(width) for c in cols)
        lines.append(head)
        for group in REPORT_GROUPS:
            row = group.ljust(10) + str(self.n_docs.get(group, 0)).rjust(6)
            for k in self.ks:
                for metric in METRICS:
                    value = self.values.get((group, metric, k))
                    cell = "-" if value is None else f"{value:.4f}"
                    row += cell.rjust(width)
            lines.append(row)
        return "\n".join(lines) + "\n"

    def write(self, table_path, records_path) -> None:
        with open(table_path, "w", encoding="utf-8") as fh:
            fh.write(self.format_table())
        with open(records_path, "w", encoding="utf-8") as fh:
            for record in self.to_records():
                fh.write(json.dumps(record) + "\n")


def evaluate(
    score_rows: np.ndarray,
    gold_sets: list[set[int]],
    assignment: BucketAssignment,
    ks,
    header: dict | None = None,
) -> MetricsReport:
    """Bucketed macro-averaged ranking metrics over scored documents.

    score_rows[i] holds scores for all labels of document i; gold_sets[i]
    its gold label ids. Per bucket, candidates and gold are restricted to
    the bucket's labels and only documents with gold there contribute.
    """
    score_rows = np.asarray(score_rows)
    ks = tuple(dict.fromkeys(int(k) for k in ks))  # dedupe, keep order
    if any(k < 1 for k in ks) or not ks:
        raise InputError(f"bad K list {ks}")
    if score_rows.ndim != 2 or score_rows.shape[0] != len(gold_sets):
        raise DimensionError(
            f"scores {score_rows.shape} do not match {len(gold_sets)} documents"
        )
    if score_rows.shape[1] != len(assignment.bucket_of):
        raise DimensionError(
            f"scores cover {score_rows.shape[1]} labels, buckets {len(assignment.bucket_of)}"
        )

    report = MetricsReport(ks=ks, header=dict(header or {}))
    for group in REPORT_GROUPS:
        candidates = assignment.labels_in(group)
        if not candidates:
            report.n_docs[group] = 0
            continue
        candidate_set = set(candidates)
        totals = {(metric, k): 0.0 for metric in METRICS for k in ks}
        count = 0
        for row, gold in zip(score_rows, gold_sets):
            gold_here = set(gold) & candidate_set
            if not gold_here:
                continue
            ranked = rank_labels(row, candidates)
            count += 1
            for metric in METRICS:
                fn = _METRIC_FNS[metric]
                for k in ks:
                    totals[(metric, k)] += fn(ranked, gold_here, k)
        report.n_docs[group] = count
        if count:
            for (metric, k), total in totals.items():
                report.values[(group, metric, k)] = total / count
    return report
