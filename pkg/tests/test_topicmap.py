import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone
from sklearn.metrics import adjusted_rand_score

from biblioscope.records import BibRecord
from biblioscope.topicmap import (
    EmptyNetworkError, TermNetwork, UnknownCountryError, VOSClustering, VOSLayout,
    association_strength, build_network, cluster, country_activity_overlay, country_submap,
    layout, read_map, temporal_overlay, write_map,
)
from biblioscope.topicmap.clustering import partition_quality
from biblioscope.topicmap.layout import constrained_objective, mean_distance

from oracles import modularity_value, set_partitions


def doc(*kw, year=2010, countries=("FR",)):
    return BibRecord(title="x", year=year, pmid="1", author_keywords=tuple(kw),
                     countries=frozenset(countries))


def random_docs(seed, n_docs=60, n_terms=12, years=(2000, 2020), countries=("FR", "US", "CN")):
    rng = random.Random(seed)
    vocab = [f"t{i:02d}" for i in range(n_terms)]
    return [doc(*rng.sample(vocab, rng.randint(1, 5)), year=rng.randint(*years),
                countries=rng.sample(countries, rng.randint(1, min(2, len(countries)))))
            for _ in range(n_docs)]


def planted_docs(seed, n_comm=7, per_comm=8, n_docs=1400, noise=0.05):
    rng = random.Random(seed)
    truth = {}
    for c in range(n_comm):
        for j in range(per_comm):
            truth[f"c{c}w{j}"] = c
    docs = []
    for _ in range(n_docs):
        c = rng.randrange(n_comm)
        kws = rng.sample([f"c{c}w{j}" for j in range(per_comm)], rng.randint(2, 4))
        if rng.random() < noise:
            other = rng.randrange(n_comm)
            kws.append(f"c{other}w{rng.randrange(per_comm)}")
        docs.append(doc(*kws, year=rng.randint(2000, 2020)))
    return docs, truth


# -- network -----------------------------------------------------------------

def test_build_network_counts():
    net = build_network([doc("a", "b"), doc("a", "b"), doc("a", "c")], min_occ=1)
    assert net.node("a").occ == 3
    cooc = {(e.term_i, e.term_j): e.cooc for e in net.edges}
    assert cooc == {("a", "b"): 2, ("a", "c"): 1}


def test_build_network_duplicate_keyword_counts_once():
    net = build_network([doc("a", "a", "b")], min_occ=1)
    assert net.node("a").occ == 1
    assert [e.cooc for e in net.edges] == [1]


def test_min_occ_validation_and_empty():
    with pytest.raises(ValueError):
        build_network([doc("a")], min_occ=0)
    net = build_network([doc("a"), doc("b")], min_occ=5)
    assert net.nodes == [] and net.edges == []


def test_association_strength_arithmetic():
    docs = [doc("a", "b"), doc("a", "b"), doc("c"), doc("d")]
    net = association_strength(build_network(docs, min_occ=1))
    (edge,) = net.edges
    assert edge.sim == 4.0


@pytest.mark.parametrize("seed", range(5))
def test_network_matches_direct_recount(seed):
    docs = random_docs(seed)
    net = association_strength(build_network(docs, min_occ=3))
    kept = set(net.terms)
    sets = [set(d.author_keywords) for d in docs]
    for n in net.nodes:
        assert n.occ == sum(n.term in s for s in sets)
        assert n.occ == sum(n.occ_by_year.values())
        assert all(v <= n.occ for v in n.occ_by_country.values())
    T = len(docs)
    for a, b in itertools.combinations(sorted(kept), 2):
        c = sum(a in s and b in s for s in sets)
        edges = [e for e in net.edges if (e.term_i, e.term_j) == (a, b)]
        if c == 0:
            assert edges == []
            continue
        (e,) = edges
        assert e.cooc == c <= min(net.node(a).occ, net.node(b).occ)
        assert math.isclose(e.sim, 2 * T * c / (net.node(a).occ * net.node(b).occ), rel_tol=1e-15)


# -- clustering --------------------------------------------------------------

def two_cliques(weak=0.1):
    W = np.zeros((8, 8))
    for block in (range(4), range(4, 8)):
        for i in block:
            for j in block:
                if i != j:
                    W[i, j] = 1.0
    W[3, 4] = W[4, 3] = weak
    return W


def test_two_cliques_match_exhaustive_optimum():
    W = two_cliques()
    best = max(set_partitions(list(range(8))),
               key=lambda p: modularity_value(W.tolist(), p, 1.0))
    assert sorted(map(sorted, best)) == [[0, 1, 2, 3], [4, 5, 6, 7]]
    est = VOSClustering(resolution=1.0, random_state=0).fit(W)
    labels = est.labels_
    got = sorted(sorted(np.flatnonzero(labels == c).tolist()) for c in np.unique(labels))
    assert got == [[0, 1, 2, 3], [4, 5, 6, 7]]
    assert math.isclose(est.quality_, modularity_value(W.tolist(), best, 1.0), rel_tol=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_small_random_graphs_reach_exhaustive_optimum(seed):
    rng = np.random.default_rng(seed)
    n = 7
    W = np.triu(rng.random((n, n)) * (rng.random((n, n)) < 0.5), 1)
    W = W + W.T
    if W.sum() == 0:
        W[0, 1] = W[1, 0] = 1.0
    opt = max(modularity_value(W.tolist(), p, 1.0) for p in set_partitions(list(range(n))))
    got = VOSClustering(random_state=seed).fit(W).quality_
    # a greedy heuristic; allow it to miss the optimum only by a small margin
    assert got <= opt + 1e-9
    assert got >= opt - 0.1 * abs(opt) - 1e-9


def test_quality_matches_oracle():
    rng = np.random.default_rng(3)
    W = rng.random((6, 6))
    W = np.triu(W, 1) + np.triu(W, 1).T
    labels = np.array([0, 0, 1, 1, 2, 0])
    blocks = [np.flatnonzero(labels == c).tolist() for c in range(3)]
    for gamma in (0.5, 1.0, 2.0):
        assert math.isclose(partition_quality(W, labels, gamma),
                            modularity_value(W.tolist(), blocks, gamma), rel_tol=1e-12)


def test_single_node_one_cluster():
    assert VOSClustering().fit_predict(np.zeros((1, 1))).tolist() == [0]


def test_isolated_nodes_are_singletons():
    W = np.zeros((3, 3))
    assert sorted(VOSClustering().fit_predict(W).tolist()) == [0, 1, 2]


@pytest.mark.parametrize("seed", range(5))
def test_planted_seven_communities_recovered(seed):
    docs, truth = planted_docs(seed)
    net = association_strength(build_network(docs, min_occ=1))
    assignment = cluster(net, resolution=1.0, seed=seed)
    terms = sorted(truth)
    assert len(set(assignment.values())) == 7
    assert adjusted_rand_score([truth[t] for t in terms], [assignment[t] for t in terms]) == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(-6, 6))
def test_partition_invariant_under_sim_scaling(seed, power):
    rng = np.random.default_rng(seed)
    n = 12
    W = np.triu(rng.random((n, n)) * (rng.random((n, n)) < 0.4), 1)
    W = W + W.T
    base = VOSClustering(random_state=seed % 7).fit_predict(W)
    scaled = VOSClustering(random_state=seed % 7).fit_predict(W * 2.0 ** power)
    assert base.tolist() == scaled.tolist()


def test_clustering_deterministic_and_cloneable():
    W = two_cliques(0.5)
    est = VOSClustering(resolution=1.3, random_state=11)
    a = est.fit_predict(W)
    b = clone(est).fit_predict(W)
    assert a.tolist() == b.tolist()
    assert est.get_params()["resolution"] == 1.3


def test_clustering_rejects_bad_input():
    with pytest.raises(ValueError):
        VOSClustering(resolution=0).fit(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        VOSClustering().fit(np.array([[0, -1.0], [-1.0, 0]]))
    with pytest.raises(ValueError):
        VOSClustering().fit(np.zeros((2, 3)))


# -- layout ------------------------------------------------------------------

def pairwise(X):
    n = len(X)
    return sorted(float(np.linalg.norm(X[i] - X[j])) for i in range(n) for j in range(i + 1, n))


def test_two_nodes_unit_distance():
    X = VOSLayout().fit_transform(np.array([[0, 1.0], [1.0, 0]]))
    assert math.isclose(float(np.linalg.norm(X[0] - X[1])), 1.0, rel_tol=1e-12)


def test_four_cycle_is_square():
    S = np.zeros((4, 4))
    for i in range(4):
        S[i, (i + 1) % 4] = S[(i + 1) % 4, i] = 1.0
    a = 6 / (4 + 2 * math.sqrt(2))
    expected = sorted([a] * 4 + [a * math.sqrt(2)] * 2)
    for seed in range(5):
        X = VOSLayout(random_state=seed, tol=1e-15, max_iter=5000).fit_transform(S)
        assert np.allclose(pairwise(X), expected, atol=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_objective_non_increasing(seed):
    rng = np.random.default_rng(seed)
    n = 25
    S = np.triu(rng.random((n, n)) * (rng.random((n, n)) < 0.3), 1)
    S = S + S.T
    S[0, 1:] = S[1:, 0] = 0.05  # keep it connected
    est = VOSLayout(random_state=seed).fit(S)
    hist = est.objective_history_
    assert len(hist) >= 2
    assert all(b <= a for a, b in zip(hist, hist[1:]))
    assert math.isclose(hist[-1], constrained_objective(S, est.embedding_), rel_tol=1e-9)


def test_layout_centered_unit_mean_and_deterministic():
    net = association_strength(build_network(random_docs(1, n_docs=80), min_occ=2))
    S = net.similarity_matrix()
    X1 = VOSLayout(random_state=4).fit_transform(S)
    X2 = VOSLayout(random_state=4).fit_transform(S)
    assert X1.tobytes() == X2.tobytes()
    assert np.allclose(X1.mean(0), 0, atol=1e-12)
    assert math.isclose(mean_distance(X1), 1.0, rel_tol=1e-12)


def test_layout_distances_seed_invariant_on_symmetric_fixture():
    # complete graph on 3 nodes: equilateral triangle whatever the start
    S = np.ones((3, 3)) - np.eye(3)
    ref = pairwise(VOSLayout(random_state=0, tol=1e-15).fit_transform(S))
    for seed in range(1, 6):
        assert np.allclose(pairwise(VOSLayout(random_state=seed, tol=1e-15).fit_transform(S)),
                           ref, atol=1e-6)


def test_disconnected_components_packed_without_overlap():
    S = np.zeros((7, 7))
    for i, j in [(0, 1), (1, 2), (2, 0), (3, 4)]:
        S[i, j] = S[j, i] = 1.0
    X = VOSLayout().fit_transform(S)
    assert np.all(np.isfinite(X))
    assert len({tuple(np.round(p, 9)) for p in X}) == 7


def test_layout_orientation_first_term_nonnegative():
    net = association_strength(build_network(random_docs(5, n_docs=80), min_occ=2))
    coords = layout(net, seed=2)
    assert coords[net.terms[0]][0] >= 0


# -- overlays ----------------------------------------------------------------

def test_temporal_single_year():
    net = build_network([doc("covid", year=2020), doc("covid", "sars", year=2020)], min_occ=1)
    mean_year, shares = temporal_overlay(net)["covid"]
    assert mean_year == 2020 and shares == {2020: 1.0}


def test_temporal_even_split():
    net = build_network([doc("a", year=2000), doc("a", year=2020)], min_occ=1)
    assert temporal_overlay(net)["a"][0] == 2010


@pytest.mark.parametrize("seed", range(5))
def test_temporal_matches_direct_summation(seed):
    docs = random_docs(seed)
    net = build_network(docs, min_occ=1)
    for term, (mean_year, shares) in temporal_overlay(net).items():
        years = [d.year for d in docs if term in d.author_keywords]
        assert math.isclose(mean_year, sum(years) / len(years), rel_tol=1e-14)
        assert abs(math.fsum(shares.values()) - 1) <= 1e-12


def test_activity_single_country_all_ones():
    docs = random_docs(0, countries=("FR",))
    net = build_network(docs, min_occ=1)
    assert all(math.isclose(v, 1.0) for v in country_activity_overlay(net, "FR").values())


def test_activity_country_with_single_term():
    docs = [doc("a", "b", countries=("US",)), doc("b", countries=("US",)), doc("a", countries=("FR",))]
    net = build_network(docs, min_occ=1)
    idx = country_activity_overlay(net, "FR")
    assert idx["b"] == 0.0
    assert math.isclose(idx["a"], 1 / (2 / 4))


@pytest.mark.parametrize("seed", range(5))
def test_activity_matches_oracle_and_weighted_mean(seed):
    docs = random_docs(seed)
    net = build_network(docs, min_occ=1)
    terms = net.terms
    for country in ("FR", "US"):
        idx = country_activity_overlay(net, country)
        occ_c = {t: sum(t in d.author_keywords and country in d.countries for d in docs) for t in terms}
        occ_w = {t: sum(t in d.author_keywords for d in docs) for t in terms}
        tot_c, tot_w = sum(occ_c.values()), sum(occ_w.values())
        for t in terms:
            expect = (occ_c[t] / tot_c) / (occ_w[t] / tot_w)
            assert math.isclose(idx[t], expect, rel_tol=1e-12)
        assert math.isclose(math.fsum(idx[t] * occ_w[t] / tot_w for t in terms), 1.0, rel_tol=1e-12)


def test_activity_unknown_country():
    net = build_network([doc("a")], min_occ=1)
    with pytest.raises(UnknownCountryError):
        country_activity_overlay(net, "ZZ")


def test_country_submap_keeps_world_geometry():
    docs = random_docs(2, n_docs=80)
    net = association_strength(build_network(docs, min_occ=2))
    net.cluster = cluster(net)
    net.coords = layout(net)
    sub = country_submap(net, docs, "FR")
    assert sub.terms == net.terms
    assert sub.coords == net.coords and sub.cluster == net.cluster
    fr = [d for d in docs if "FR" in d.countries]
    for n in sub.nodes:
        assert n.occ == sum(n.term in d.author_keywords for d in fr)
    with pytest.raises(UnknownCountryError):
        country_submap(net, docs, "ZZ")


# -- io ----------------------------------------------------------------------

def test_map_round_trip_and_bytes(tmp_path):
    docs = random_docs(7, n_docs=80)
    net = association_strength(build_network(docs, min_occ=2))
    net.cluster = cluster(net)
    net.coords = layout(net)
    activity = {"FR": country_activity_overlay(net, "FR")}
    write_map(net, tmp_path / "a", activity)
    write_map(net, tmp_path / "b", activity)
    for name in ("nodes.tsv", "edges.tsv", "term_years.tsv", "term_countries.tsv"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes()
        assert b"\r" not in a
    header = (tmp_path / "a" / "nodes.tsv").read_text().splitlines()[0].split("\t")
    assert header == ["term", "occ", "cluster", "x", "y", "mean_year", "activity_FR"]
    back = read_map(tmp_path / "a", n_docs=net.n_docs)
    assert back.nodes == net.nodes
    assert back.edges == net.edges
    assert back.cluster == net.cluster and back.coords == net.coords


def test_empty_network_error_type():
    assert issubclass(EmptyNetworkError, ValueError)
    assert isinstance(TermNetwork([], [], 0).similarity_matrix().shape, tuple)
