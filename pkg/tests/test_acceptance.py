"""Acceptance suite: twelve criteria, each reported as one PASS/FAIL line.

Run with pytest (lines appear in the terminal summary) or directly with
``python3 -m tests.test_acceptance``.
"""

import functools
import math
import os
import tempfile
import time
from collections import defaultdict
from itertools import permutations

import numpy as np

from tradeplex.cli import run
from tradeplex.connectivity import components
from tradeplex.correlation import (
    LayerCorrelationMatrix,
    LayerDistanceMatrix,
    average_interlayer,
    corr_to_distance,
    evolution_series,
    interlayer_corr_unweighted,
    interlayer_corr_weighted,
)
from tradeplex.distributions import (
    DEFAULT_SEED,
    _lilliefors_null,
    ks_two_sample,
    layer_pairs,
    lilliefors,
)
from tradeplex.ingest import EdgeRecord, build_panel
from tradeplex.model import AdjacencyMatrix, LayerWeightMatrix, MultiNetworkPanel
from tradeplex.nodestats import eigenvector_centrality, weighted_clustering
from tradeplex.rng import derive_seed, philox
from tradeplex.synth import SynthSpec, generate_panel
from tradeplex.taxonomy import complete_linkage, cophenetic, newick_cophenetic, to_newick

from .oracles import (
    bfs_components,
    clustering_by_triples,
    contingency_phi,
    grid_ecdf_distance,
    lca_cophenetic,
    naive_complete_linkage,
    random_weighted_digraph,
)

RESULTS = {}


def criterion(number, title, budget):
    """Record the outcome and wall time; a run over ``budget`` seconds fails."""

    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs) or ""
            except AssertionError as e:
                RESULTS[number] = (title, False, f"{time.perf_counter() - t0:.2f}s {e}")
                print(f"criterion {number:2d} FAIL  {title}: {e}")
                raise
            elapsed = time.perf_counter() - t0
            ok = elapsed < budget
            note = f"{elapsed:.2f}s (budget {budget}s) {detail}".rstrip()
            RESULTS[number] = (title, ok, note)
            print(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {note}")
            assert ok, f"took {elapsed:.2f}s, budget {budget}s"

        return inner

    return wrap


def _codes(C):
    return tuple(f"{c + 1:02d}" for c in range(C))


def _panel(raw, years=(2000,)):
    raw = np.asarray(raw, dtype=float)
    T, C, N, _ = raw.shape
    return MultiNetworkPanel.from_raw(raw, [f"n{k}" for k in range(N)], _codes(C), years[:T])


@criterion(1, "normalization identity", 1.0)
def test_01_normalization_identity():
    worst = 0.0
    for seed, model in enumerate(("lognormal", "pareto", "uniform")):
        p = generate_panel(SynthSpec(seed=seed, n_nodes=40, n_layers=8, n_years=3, density=0.2,
                                     weight_model=model))
        N = p.n_nodes
        for year in p.years:
            for code in p.nonempty_codes(year):
                w = p.layer(year, code).entries
                off = w[~np.eye(N, dtype=bool)]
                s = math.fsum(off)
                mean = s / (N * (N - 1))
                worst = max(worst, abs(s - 1), abs(mean - 1 / (N * (N - 1))))
    assert worst <= 1e-12, f"max deviation {worst:.3g}"
    return f"max deviation {worst:.2g}"


@criterion(2, "aggregation identity", 5.0)
def test_02_aggregation_identity():
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        N, C, T = (int(x) for x in rng.integers(3, 12, 3))
        nodes = [f"c{k}" for k in range(N)]
        records, expect = [], defaultdict(float)
        for k in range(int(rng.integers(N * C, 4 * N * N * C))):
            t, c = int(rng.integers(T)), int(rng.integers(C))
            i, j = rng.choice(N, 2, replace=False)
            v = float(rng.lognormal(8, 3))
            records.append(EdgeRecord(1990 + t, f"{c:02d}", nodes[i], nodes[j], v))
            expect[1990 + t, nodes[i], nodes[j]] += v
        # every node in every year, so balancing keeps the full set
        for t in range(T):
            for k in range(N):
                records.append(EdgeRecord(1990 + t, "00", nodes[k], nodes[(k + 1) % N], 1.0))
                expect[1990 + t, nodes[k], nodes[(k + 1) % N]] += 1.0
        panel = build_panel(records)
        ids = panel.nodes.ids
        for t, year in enumerate(panel.years):
            agg = panel.aggregate_raw[t]
            np.testing.assert_allclose(agg, panel.raw[t].sum(axis=0), rtol=1e-9, atol=0)
            for (y, a, b), v in expect.items():
                if y == year:
                    got = agg[ids.index(a), ids.index(b)]
                    worst = max(worst, abs(got - v) / v)
    assert worst <= 1e-9, f"max relative error {worst:.3g}"
    return f"max relative error {worst:.2g}"


@criterion(3, "distance constants", 1.0)
def test_03_distance_constants():
    phi = np.array([[1.0, 0.0, -1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    d = corr_to_distance(LayerCorrelationMatrix(phi, "weighted", 2000, _codes(3), ())).entries
    assert abs(d[0, 0] - 0.0) <= 1e-15
    assert abs(d[0, 1] - 0.7071067811865476) <= 1e-15
    assert abs(d[0, 2] - 1.0) <= 1e-15


@criterion(4, "pair-count constant", 1.0)
def test_04_pair_count():
    pairs = layer_pairs(97)
    assert len(pairs) == 4656, len(pairs)
    assert len(set(pairs)) == 4656 and all(a < b for a, b in pairs)


@criterion(5, "clustering oracle equivalence", 30.0)
def test_05_clustering_oracle():
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 9))
        W = random_weighted_digraph(rng, n, p=float(rng.uniform(0.2, 1.0)))
        if not W.any():
            W[0, 1] = 1.0
        got = weighted_clustering(LayerWeightMatrix(W))
        ref = clustering_by_triples(W)
        for key in ("cyc", "mid", "in", "out", "all"):
            a, b = getattr(got, f"wcc_{key}"), ref[key]
            assert np.array_equal(np.isnan(a), np.isnan(b)), f"seed {seed} {key}: undefined nodes differ"
            ok = ~np.isnan(b)
            if ok.any():
                worst = max(worst, float(np.max(np.abs(a[ok] - b[ok]))))
    assert worst <= 1e-10, f"max error {worst:.3g}"
    return f"max error {worst:.2g}"


@criterion(6, "connectivity oracle equivalence", 10.0)
def test_06_connectivity_oracle():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        a = rng.random((50, 50)) < rng.uniform(0.005, 0.12)
        np.fill_diagonal(a, False)
        adj = AdjacencyMatrix(a)
        weak, strong = components(adj, "weak"), components(adj, "strong")
        assert np.array_equal(weak.assignment, bfs_components(a, "weak")), f"weak differs, seed {seed}"
        assert np.array_equal(strong.assignment, bfs_components(a, "strong")), f"strong differs, seed {seed}"
        for members in strong.components():
            assert len({int(weak.assignment[i]) for i in members}) == 1, f"not a refinement, seed {seed}"


@criterion(7, "KS correctness and Lilliefors size", 60.0)
def test_07_ks():
    r = ks_two_sample([0.3, 1.2, 5.0, 5.0], [5.0, 0.3, 1.2, 5.0])
    assert r.statistic == 0.0 and r.p_value == 1.0
    assert ks_two_sample([1.0, 2.0], [3.0, 4.0, 5.0]).statistic == 1.0
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        a = rng.normal(0, 1, int(rng.integers(5, 150)))
        b = rng.normal(rng.uniform(-1, 1), rng.uniform(0.5, 2), int(rng.integers(5, 150)))
        if seed % 3 == 0:
            a, b = np.round(a, 1), np.round(b, 1)
        worst = max(worst, abs(ks_two_sample(a, b).statistic - grid_ecdf_distance(a, b)))
    assert worst <= 1e-12, f"grid oracle error {worst:.3g}"
    # samples come from a stream independent of the Monte Carlo null
    samples = philox(derive_seed(DEFAULT_SEED, "samples")).standard_normal((200, 100))
    _lilliefors_null.cache_clear()
    rejects = sum(lilliefors(x).p_value < 0.05 for x in samples)
    rate = rejects / 200
    assert 0.03 <= rate <= 0.08, f"rejection rate {rate:.3f} outside [0.03, 0.08]"
    return f"grid error {worst:.2g}, Lilliefors rejection rate {rate:.3f}"


@criterion(8, "inter-layer correlation properties", 10.0)
def test_08_interlayer():
    rng = np.random.default_rng(8)
    N, C = 30, 6
    base = generate_panel(SynthSpec(seed=8, n_nodes=N, n_layers=C, n_years=1, density=0.2,
                                    interlayer_overlap=0.5))
    phi_w = interlayer_corr_weighted(base, 2000).entries
    scaled = base.raw[0] * (10.0 ** rng.uniform(-8, 8, C))[:, None, None]
    worst = float(np.max(np.abs(interlayer_corr_weighted(_panel(scaled[None]), 2000).entries - phi_w)))
    assert worst <= 1e-12, f"scale invariance error {worst:.3g}"

    phi_u = interlayer_corr_unweighted(base, 2000).entries
    off = ~np.eye(N, dtype=bool)
    for a in range(C):
        for b in range(C):
            if a != b:
                u, v = base.raw[0, a][off] > 0, base.raw[0, b][off] > 0
                assert abs(phi_u[a, b] - contingency_phi(u, v)) <= 1e-12, (a, b)

    cells = np.flatnonzero(off.ravel())
    pick = rng.permutation(cells)[: cells.size // 2]
    x = np.zeros(N * N); x[pick] = rng.lognormal(0, 1, pick.size)
    y = np.zeros(N * N); y[np.setdiff1d(cells, pick)] = rng.lognormal(0, 1, cells.size - pick.size)
    x, y = x.reshape(N, N), y.reshape(N, N)
    p = _panel(np.stack([x, x, y, 3.0 * x])[None])
    mu, mw = interlayer_corr_unweighted(p, 2000).entries, interlayer_corr_weighted(p, 2000).entries
    assert mu[0, 1] == 1.0 and mw[0, 1] == 1.0, (mu[0, 1], mw[0, 1])
    assert mu[0, 3] == 1.0 and abs(mw[0, 3] - 1.0) <= 1e-12, mw[0, 3]
    assert abs(mu[0, 2] + 1.0) <= 1e-12 and abs(mu[1, 2] + 1.0) <= 1e-12, mu[0, 2]
    return f"scale invariance error {worst:.2g}"


@criterion(9, "complete-linkage taxonomy", 10.0)
def test_09_taxonomy():
    for seed in range(20):
        rng = np.random.default_rng(900 + seed)
        C = int(rng.integers(2, 16))
        D = rng.random((C, C))
        if seed % 2:
            D = np.round(D * 5) / 5  # ties
        D = np.triu(D, 1); D = D + D.T
        codes = tuple(f"{k:02d}" for k in rng.permutation(C) + 1)
        tree = complete_linkage(LayerDistanceMatrix(D, "weighted", 2000, codes))
        mem = tree.members()
        got = [(tuple(sorted(codes[i] for i in mem[m.a])), tuple(sorted(codes[i] for i in mem[m.b])), m.height)
               for m in tree.merges]
        assert got == naive_complete_linkage(D, codes), f"merge order differs, seed {seed}"
        coph = cophenetic(tree).entries
        assert np.array_equal(coph, lca_cophenetic(tree))
        assert np.all(coph >= D), f"cophenetic below distance, seed {seed}"
        for a, b, c in permutations(range(C), 3):
            assert coph[a, c] <= max(coph[a, b], coph[b, c]), f"ultrametric violated, seed {seed}"
        assert np.array_equal(newick_cophenetic(to_newick(tree), codes), coph), f"round trip, seed {seed}"


def _dense_principal(M):
    vals, vecs = np.linalg.eig(M)
    v = np.abs(vecs[:, int(np.argmax(vals.real))].real)
    return v / v.sum()


@criterion(10, "eigenvector centrality", 10.0)
def test_10_centrality():
    worst = worst_scale = 0.0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(3, 21))
        if seed % 2:
            W = rng.random((n, n)) + 1e-3
        else:
            # sparse but strongly connected: a random Hamiltonian cycle plus extra links
            W = rng.random((n, n)) * (rng.random((n, n)) < 0.3)
            order = rng.permutation(n)
            W[order, np.roll(order, -1)] = rng.random(n) + 0.1
        np.fill_diagonal(W, 0)
        wc, c_in, c_out = eigenvector_centrality(LayerWeightMatrix(W), return_parts=True)
        ref_out, ref_in = _dense_principal(W), _dense_principal(W.T)
        ref = (ref_out + ref_in) / (ref_out + ref_in).sum()
        for got, want in ((c_out, ref_out), (c_in, ref_in), (wc, ref)):
            worst = max(worst, float(np.max(np.abs(got - want))))
        s = 10.0 ** rng.uniform(-6, 6)
        worst_scale = max(worst_scale, float(np.max(np.abs(eigenvector_centrality(LayerWeightMatrix(W * s)) - wc))))
    assert worst <= 1e-8, f"oracle error {worst:.3g}"
    assert worst_scale <= 1e-10, f"scale error {worst_scale:.3g}"
    return f"oracle error {worst:.2g}, scale error {worst_scale:.2g}"


PIPELINE = ("ingest", "summary", "stats", "rank", "moments", "connectivity", "distributions",
            "within-corr", "cross-corr", "layer-corr", "taxonomy", "evolution")


def _pipeline(root, threads):
    _lilliefors_null.cache_clear()
    synth_dir = os.path.join(root, "synth")
    assert run(["synth", "--seed", "2024", "--n-nodes", "60", "--n-layers", "20", "--n-years", "4",
                "--out", synth_dir]) == 0
    edges = os.path.join(synth_dir, "edges.csv")
    for cmd in PIPELINE:
        extra = ["--cut", "0.6"] if cmd == "taxonomy" else []
        code = run([cmd, "--input", edges, "--out", os.path.join(root, cmd), "--threads", str(threads), *extra])
        assert code == 0, f"{cmd} exited {code}"
    tree = {}
    for d, _, files in os.walk(root):
        for f in files:
            if f != "manifest_time.txt":
                path = os.path.join(d, f)
                with open(path, "rb") as fh:
                    tree[os.path.relpath(path, root)] = fh.read()
    return tree


@criterion(11, "end-to-end determinism", 60.0)
def test_11_determinism():
    with tempfile.TemporaryDirectory() as tmp:
        a = _pipeline(os.path.join(tmp, "a"), 1)
        b = _pipeline(os.path.join(tmp, "b"), 1)
        c = _pipeline(os.path.join(tmp, "c"), 4)
    assert sorted(a) == sorted(b) == sorted(c), "file sets differ"
    diff = [k for k in a if not a[k] == b[k] == c[k]]
    assert not diff, f"files differ: {diff[:5]}"
    return f"{len(a)} files identical over 3 runs"


@criterion(12, "evolution pipeline sanity", 5.0)
def test_12_evolution():
    p = generate_panel(SynthSpec(seed=12, n_nodes=40, n_layers=10, n_years=2, density=0.15,
                                 interlayer_overlap=(0.9, 0.3)))
    rows = evolution_series(p).rows
    assert rows[1].phi_u < rows[0].phi_u, (rows[0].phi_u, rows[1].phi_u)
    assert rows[1].d_u > rows[0].d_u, (rows[0].d_u, rows[1].d_u)
    # the series agrees with averaging the per-year matrices directly
    for r, year in zip(rows, p.years):
        m = interlayer_corr_unweighted(p, year)
        assert r.phi_u == average_interlayer(m) and r.d_u == average_interlayer(corr_to_distance(m))
    return f"phi_u {rows[0].phi_u:.3f} -> {rows[1].phi_u:.3f}, d_u {rows[0].d_u:.3f} -> {rows[1].d_u:.3f}"


def summary_lines():
    lines = []
    for k in sorted(RESULTS):
        title, ok, note = RESULTS[k]
        lines.append(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {title}: {note}")
    return lines


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            try:
                fn()
            except AssertionError:
                pass
