"""Independent correctness oracles shared by the test suite and the CLI.

Every suite recomputes its expected answers through a second route that
shares no code with the production path: ranking metrics against plain
set arithmetic, tape gradients against central finite differences, and
graph invariants against dense reference algebra. The oracle-check CLI
subcommand runs all suites and prints one line per check.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import LabelCatalog
from .evalmetrics import METRICS, REPORT_GROUPS, assign_buckets, evaluate
from .labelgraphs import (
    LabelGraph,
    build_cooccurrence_graph,
    build_hierarchy_graph,
    build_similarity_graph,
    merge_graphs,
    normalize,
    spectral_radius,
)
from .model import ModelConfig, MultiGraphClassifier, init_params
from .numerics import Tape, finite_difference_check, seeded_rng
from .textpipe import EmbeddingTable, build_vocab


@dataclass
class OracleCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class OracleResult:
    """One suite's verdicts, for printing and for the acceptance gate."""

    suite: str
    checks: list[OracleCheck] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(OracleCheck(name=name, passed=bool(passed), detail=detail))

    def format_lines(self) -> list[str]:
        lines = []
        for check in self.checks:
            mark = "ok  " if check.passed else "FAIL"
            tail = f"  ({check.detail})" if check.detail else ""
            lines.append(f"  {mark} {self.suite}.{check.name}{tail}")
        verdict = "pass" if self.passed else "FAIL"
        lines.append(f"{self.suite}: {verdict} [{len(self.checks)} checks, {self.seconds:.2f}s]")
        return lines


# -- ranking metrics vs. plain set arithmetic ---------------------------


def _reference_cell(ranked: list[int], gold: set[int], k: int) -> dict[str, float]:
    top = ranked[:k]
    hits = sum(1 for lab in top if lab in gold)
    dcg = 0.0
    for pos, lab in enumerate(top):
        if lab in gold:
            dcg += 1.0 / math.log2(pos + 2)
    ideal = sum(1.0 / math.log2(pos + 2) for pos in range(min(k, len(gold))))
    return {
        "R": hits / len(gold),
        "P": hits / k,
        "RP": hits / min(k, len(gold)),
        "nDCG": 0.0 if hits == 0 else dcg / ideal,
    }


def _reference_report(score_rows, gold_sets, freq, few_threshold, ks):
    """Pure-Python bucketed macro metrics; also audits the RP==R identity."""
    bucket_of = {}
    for lab, count in enumerate(freq):
        if count == 0:
            bucket_of[lab] = "zero"
        elif count <= few_threshold:
            bucket_of[lab] = "few"
        else:
            bucket_of[lab] = "frequent"
    values: dict[tuple[str, str, int], float] = {}
    n_docs: dict[str, int] = {}
    identity_ok = True
    for group in REPORT_GROUPS:
        candidates = [
            lab for lab in sorted(bucket_of) if group == "overall" or bucket_of[lab] == group
        ]
        if not candidates:
            n_docs[group] = 0
            continue
        member = set(candidates)
        totals = {(metric, k): 0.0 for metric in METRICS for k in ks}
        count = 0
        for row, gold in zip(score_rows, gold_sets):
            gold_here = {lab for lab in gold if lab in member}
            if not gold_here:
                continue
            ranked = sorted(candidates, key=lambda lab: (-float(row[lab]), lab))
            count += 1
            for k in ks:
                cell = _reference_cell(ranked, gold_here, k)
                if len(gold_here) <= k and cell["RP"] != cell["R"]:
                    identity_ok = False
                for metric in METRICS:
                    totals[(metric, k)] += cell[metric]
        n_docs[group] = count
        if count:
            for (metric, k), total in totals.items():
                values[(group, metric, k)] = total / count
    return values, n_docs, identity_ok


def run_metric_oracle(instances: int = 1000, seed: int = 0) -> OracleResult:
    """Exact agreement between evaluate() and the set-arithmetic reference."""
    start = time.perf_counter()
    result = OracleResult(suite="metrics")
    rng = seeded_rng(seed, "metric_oracle")
    mismatches = 0
    identity_failures = 0
    cells = 0
    for trial in range(instances):
        n_labels = int(rng.integers(2, 11))
        n_docs = int(rng.integers(1, 11))
        few_threshold = int(rng.integers(1, 6))
        freq = rng.integers(0, 9, size=n_labels)
        if trial % 2:
            # coarse integer scores force heavy score ties
            rows = rng.integers(0, 4, size=(n_docs, n_labels)).astype(float)
        else:
            rows = rng.normal(size=(n_docs, n_labels))
        gold_sets = []
        for _ in range(n_docs):
            size = int(rng.integers(1, min(n_labels, 4) + 1))
            gold_sets.append({int(x) for x in rng.choice(n_labels, size=size, replace=False)})
        n_ks = int(rng.integers(1, 4))
        ks = tuple(int(x) for x in rng.choice(np.arange(1, 13), size=n_ks, replace=False))

        report = evaluate(rows, gold_sets, assign_buckets(freq, few_threshold), ks)
        values, docs_ref, identity_ok = _reference_report(
            rows, gold_sets, freq, few_threshold, ks
        )
        if not identity_ok:
            identity_failures += 1
        if report.n_docs != docs_ref or set(report.values) != set(values):
            mismatches += 1
            continue
        for key, want in values.items():
            cells += 1
            if report.values[key] != want:
                mismatches += 1
                break
    result.seconds = time.perf_counter() - start
    result.add(
        "exact_agreement",
        mismatches == 0,
        f"{instances} instances, {cells} cells, {mismatches} mismatches",
    )
    result.add(
        "rp_equals_r_when_gold_fits",
        identity_failures == 0,
        f"{identity_failures} identity violations",
    )
    result.add("runtime_under_10s", result.seconds < 10.0, f"{result.seconds:.2f}s")
    return result


# -- tape gradients vs. central finite differences ----------------------


def _toy_classifier(fusion: str, graph_kinds: tuple[str, ...], seed: int):
    """2-document, 4-label instance with dims small enough to difference."""
    rng = seeded_rng(seed, "grad_oracle", "model")
    vocab = build_vocab([["alpha", "beta", "gamma", "delta", "epsilon"]])
    matrix = rng.normal(size=(len(vocab), 4)) * 0.5
    matrix[0] = 0.0
    table = EmbeddingTable(vocab=vocab, matrix=matrix, covered=np.ones(len(vocab), dtype=bool))
    label_vectors = rng.normal(size=(4, 4)) * 0.5
    graphs = []
    for kind in graph_kinds:
        raw = np.abs(rng.normal(size=(4, 4)))
        adj = np.maximum(raw, raw.T)
        np.fill_diagonal(adj, 1.0)
        graphs.append(LabelGraph(kind, adj))
    config = ModelConfig(
        embed_dim=4,
        filters=3,
        kernel=3,
        gcn_hidden=3,
        gcn_out=3,
        fused_dim=3,
        graphs=graph_kinds,
        fusion=fusion,
    )
    model = MultiGraphClassifier(
        config, table, label_vectors, graphs, params=init_params(config, seed)
    )
    ids = [
        vocab.encode(["alpha", "beta", "gamma"]),
        vocab.encode(["delta", "epsilon", "alpha", "beta"]),
    ]
    gold = np.array([[1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 1.0, 0.0]])
    return model, ids, gold


def run_gradient_oracle(seed: int = 0, bound: float = 1e-4) -> OracleResult:
    """Finite-difference check for every primitive and the full model loss."""
    start = time.perf_counter()
    result = OracleResult(suite="gradients")

    def draw(tag, *shape):
        return seeded_rng(seed, "grad_oracle", tag).normal(size=shape)

    def check(name, build, params):
        err = finite_difference_check(build, params)
        result.add(name, err < bound, f"max rel err {err:.3e}")

    cases = [
        ("add", {"a": (3, 4), "b": (3, 4)}, lambda t, n: t.add(n["a"], n["b"])),
        ("add_row", {"m": (3, 4), "r": (4,)}, lambda t, n: t.add_row(n["m"], n["r"])),
        ("mul", {"a": (3, 4), "b": (3, 4)}, lambda t, n: t.mul(n["a"], n["b"])),
        ("matmul_mat_mat", {"a": (3, 4), "b": (4, 2)}, lambda t, n: t.matmul(n["a"], n["b"])),
        ("matmul_mat_vec", {"a": (3, 4), "b": (4,)}, lambda t, n: t.matmul(n["a"], n["b"])),
        ("matmul_vec_mat", {"a": (3,), "b": (3, 4)}, lambda t, n: t.matmul(n["a"], n["b"])),
        ("matmul_vec_vec", {"a": (5,), "b": (5,)}, lambda t, n: t.matmul(n["a"], n["b"])),
        ("matmul_left_t", {"a": (3, 4), "b": (3, 2)}, lambda t, n: t.matmul_ta(n["a"], n["b"])),
        ("matmul_right_t", {"a": (3, 4), "b": (2, 4)}, lambda t, n: t.matmul_tb(n["a"], n["b"])),
        ("tanh", {"a": (3, 4)}, lambda t, n: t.tanh(n["a"])),
        ("sigmoid", {"a": (3, 4)}, lambda t, n: t.sigmoid(n["a"])),
        ("softmax_vector", {"a": (6,)}, lambda t, n: t.softmax(n["a"])),
        ("softmax_columns", {"a": (4, 3)}, lambda t, n: t.softmax_cols(n["a"])),
        ("concat", {"a": (3,), "b": (4,)}, lambda t, n: t.concat([n["a"], n["b"]])),
        (
            "concat_columns",
            {"a": (3, 2), "b": (3, 4)},
            lambda t, n: t.concat_cols([n["a"], n["b"]]),
        ),
        (
            "stack_rows",
            {"a": (4,), "b": (4,), "c": (4,)},
            lambda t, n: t.stack_rows([n["a"], n["b"], n["c"]]),
        ),
        ("row_select", {"a": (4, 3)}, lambda t, n: t.row_select(n["a"], 2)),
        ("mean", {"a": (3, 4)}, lambda t, n: t.mean(n["a"])),
        ("sum", {"a": (3, 4)}, lambda t, n: t.sum(n["a"])),
        ("rowdot", {"a": (3, 4), "b": (3, 4)}, lambda t, n: t.rowdot(n["a"], n["b"])),
    ]
    for name, shapes, body in cases:
        params = {key: draw(f"{name}_{key}", *shape) for key, shape in shapes.items()}
        # probe once for the output shape, then weight the sum so every
        # output coordinate contributes a distinct gradient signal
        probe_tape = Tape()
        probe_nodes = {key: probe_tape.param(key, value) for key, value in params.items()}
        out_shape = np.shape(body(probe_tape, probe_nodes).value)
        weight = (
            None
            if out_shape == ()
            else seeded_rng(seed, "grad_oracle", name, "w").normal(size=out_shape)
        )

        def build(p, body=body, weight=weight):
            tape = Tape()
            nodes = {key: tape.param(key, value) for key, value in p.items()}
            out = body(tape, nodes)
            if weight is None:
                return tape, out
            return tape, tape.sum(tape.mul(out, tape.constant(weight)))

        check(name, build, params)

    # relu: keep every coordinate away from the kink by a margin wider
    # than the differencing step
    relu_a = draw("relu_a", 3, 4)
    relu_a = relu_a + np.where(relu_a >= 0.0, 0.25, -0.25)
    relu_w = seeded_rng(seed, "grad_oracle", "relu_w").normal(size=(3, 4))

    def build_relu(p):
        tape = Tape()
        out = tape.relu(tape.param("a", p["a"]))
        return tape, tape.sum(tape.mul(out, tape.constant(relu_w)))

    check("relu", build_relu, {"a": relu_a})

    # dropout: the mask rng is rebuilt per call, so every rebuild sees
    # the identical mask and the check differences a fixed function
    drop_w = seeded_rng(seed, "grad_oracle", "drop_w").normal(size=(4, 5))

    def build_dropout(p):
        tape = Tape()
        mask_rng = seeded_rng(seed, "grad_oracle", "drop_mask")
        out = tape.dropout(tape.param("a", p["a"]), 0.8, mask_rng)
        return tape, tape.sum(tape.mul(out, tape.constant(drop_w)))

    check("dropout", build_dropout, {"a": draw("drop_a", 4, 5)})

    bce_targets = (seeded_rng(seed, "grad_oracle", "bce_t").random(size=(3, 4)) < 0.5).astype(
        float
    )

    def build_bce(p):
        tape = Tape()
        pred = tape.sigmoid(tape.param("logits", p["logits"]))
        return tape, tape.bce(pred, bce_targets)

    check("bce", build_bce, {"logits": draw("bce_logits", 3, 4)})

    composite_x = draw("composite_x", 5, 4)

    def build_composite(p):
        tape = Tape()
        h1 = tape.tanh(tape.matmul(tape.constant(composite_x), tape.param("w1", p["w1"])))
        h2 = tape.tanh(tape.matmul(h1, tape.param("w2", p["w2"])))
        return tape, tape.sum(tape.matmul(h2, tape.param("w3", p["w3"])))

    check(
        "three_layer_composite",
        build_composite,
        {
            "w1": draw("composite_w1", 4, 3),
            "w2": draw("composite_w2", 3, 3),
            "w3": draw("composite_w3", 3, 2),
        },
    )

    model_cases = [
        ("end_to_end_post_fusion", "post", ("hierarchy", "similarity", "cooccurrence")),
        ("end_to_end_pre_merge", "pre", ("hierarchy", "similarity")),
        ("end_to_end_no_graphs", "none", ()),
    ]
    for name, fusion, kinds in model_cases:
        model, ids, gold = _toy_classifier(fusion, kinds, seed)

        def build_model(p, model=model, ids=ids, gold=gold):
            tape, loss, _ = model.batch_loss(ids, gold, train_mode=False)
            return tape, loss

        check(name, build_model, model.params)

    result.seconds = time.perf_counter() - start
    result.add("runtime_under_30s", result.seconds < 30.0, f"{result.seconds:.2f}s")
    return result


# -- graph invariants on randomized builder outputs ---------------------


def _random_graph_inputs(rng: np.random.Generator, n: int):
    """Taxonomy edges, label vectors, neighbor count, and train doc sets."""
    codes = [f"l{i:03d}" for i in range(n)]
    internal = [f"n{j}" for j in range(1 + int(rng.integers(0, 3)))]
    edges = [(code, internal[int(rng.integers(0, len(internal)))]) for code in codes]
    for j in range(1, len(internal)):
        edges.append((internal[j], internal[0]))
    vectors = rng.normal(size=(n, 6))
    k = int(rng.integers(1, min(8, n - 1) + 1))
    seen = sorted(int(x) for x in rng.choice(n, size=max(2, (2 * n) // 3), replace=False))
    docs = []
    for _ in range(40):
        size = min(int(rng.integers(1, 4)), len(seen))
        docs.append({int(x) for x in rng.choice(seen, size=size, replace=False)})
    return codes, edges, vectors, k, docs


def _build_graph_triple(codes, edges, vectors, k, docs):
    catalog = LabelCatalog(codes, [["desc"] for _ in codes])
    return [
        build_hierarchy_graph(edges, catalog),
        build_similarity_graph(vectors, k=k, tau=0.2),
        build_cooccurrence_graph(docs, catalog),
    ]


def run_graph_oracle(trials: int = 20, seed: int = 0, max_labels: int = 50) -> OracleResult:
    """Randomized builder outputs against the structural invariants."""
    start = time.perf_counter()
    result = OracleResult(suite="graphs")
    rng = seeded_rng(seed, "graph_oracle")
    symmetry_fail = 0
    loop_fail = 0
    negative_fail = 0
    merge_fail = 0
    radius_fail = 0
    relabel_fail = 0
    worst_merge = 0.0
    worst_radius = 0.0
    worst_relabel = 0.0
    for _ in range(trials):
        n = int(rng.integers(4, max_labels + 1))
        codes, edges, vectors, k, docs = _random_graph_inputs(rng, n)
        triple = _build_graph_triple(codes, edges, vectors, k, docs)
        merged_pair = merge_graphs(triple[0], triple[1])
        merged_all = merge_graphs(merged_pair, triple[2])
        for g in triple + [merged_pair, merged_all]:
            a = g.adjacency
            if not np.array_equal(a, a.T):
                symmetry_fail += 1
            if not (np.diag(a) > 0.0).all():
                loop_fail += 1
            if not (a >= 0.0).all():
                negative_fail += 1
            diff = np.abs(
                normalize(merge_graphs(g, g)).matrix - normalize(g).matrix
            ).max()
            worst_merge = max(worst_merge, float(diff))
            if diff > 1e-12:
                merge_fail += 1
            radius = spectral_radius(normalize(g).matrix)
            worst_radius = max(worst_radius, radius)
            if radius > 1.0 + 1e-9:
                radius_fail += 1

        perm = rng.permutation(n)
        permuted_codes = [codes[p] for p in perm]
        inverse = np.empty(n, dtype=int)
        inverse[perm] = np.arange(n)
        permuted_docs = [{int(inverse[lab]) for lab in doc} for doc in docs]
        permuted = _build_graph_triple(permuted_codes, edges, vectors[perm], k, permuted_docs)
        pairs = list(zip(permuted, triple)) + [
            (merge_graphs(permuted[0], permuted[1]), merged_pair)
        ]
        for built, original in pairs:
            want = original.adjacency[np.ix_(perm, perm)]
            got = built.adjacency
            # cosine weights shift by ~1 ulp when BLAS sees rows in a new
            # order, so edge SUPPORT must match exactly but weights only
            # within 1e-12; count-valued graphs still match bit for bit
            if not np.array_equal(got > 0.0, want > 0.0):
                relabel_fail += 1
                continue
            diff = float(np.abs(got - want).max())
            worst_relabel = max(worst_relabel, diff)
            if diff > 1e-12:
                relabel_fail += 1

    result.seconds = time.perf_counter() - start
    detail = f"{trials} trials, up to {max_labels} labels"
    result.add("symmetry_exact", symmetry_fail == 0, detail)
    result.add("self_loops_positive", loop_fail == 0, detail)
    result.add("weights_nonnegative", negative_fail == 0, detail)
    result.add(
        "normalize_merge_self_identity",
        merge_fail == 0,
        f"max |diff| {worst_merge:.2e} vs 1e-12",
    )
    result.add(
        "spectral_radius_bound",
        radius_fail == 0,
        f"max radius {worst_radius:.12f} vs 1+1e-9",
    )
    result.add(
        "relabeling_equivariance",
        relabel_fail == 0,
        f"exact support, max weight drift {worst_relabel:.2e} vs 1e-12",
    )
    return result


def run_all_oracles(seed: int = 0) -> list[OracleResult]:
    return [
        run_metric_oracle(seed=seed),
        run_gradient_oracle(seed=seed),
        run_graph_oracle(seed=seed),
    ]
