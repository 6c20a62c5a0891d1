import numpy as np
import pytest

from causalpatterns.clustering import (
    StaticFeatureVector,
    adjusted_rand_index,
    dynamic_features,
    kmeans,
    read_features_csv,
    scan_k,
    silhouette,
    static_features,
    write_features_csv,
)
from causalpatterns.components import DynamicComponent
from causalpatterns.errors import ValidationError

from oracles import brute_silhouette, brute_wcss


def make_component(members, edges=(), num_nodes=10, cid=None):
    members = np.array(sorted(members, key=lambda m: (m[1], m[0])),
                       dtype=np.int64).reshape(-1, 2)
    layers = members[:, 1]
    smallest = members[0]
    edges = np.array(sorted(edges), dtype=np.int64).reshape(-1, 3)
    kinds = np.array([1 if s == d else 0 for s, _, d in edges.tolist()], dtype=np.uint8)
    return DynamicComponent(
        id=cid or f"{int(smallest[1])}:{int(smallest[0])}",
        num_spatial_nodes=num_nodes,
        members=members,
        edges=edges,
        edge_kinds=kinds,
        width=int(layers.max() - layers.min()) + 1,
        spatial_spread=len(np.unique(members[:, 0])),
        start_layer=int(layers.min()),
        end_layer=int(layers.max()),
    )


def vectors_from_matrix(x):
    out = []
    for row_index, row in enumerate(np.asarray(x, dtype=float)):
        nz = np.flatnonzero(row)
        out.append(StaticFeatureVector(
            component_id=f"v{row_index:04d}",
            length=x.shape[1],
            indices=nz.astype(np.int64),
            values=row[nz],
            normalized=False,
        ))
    return out


def two_cloud_fixture(rng, per_cloud=20, dim=5, separation=10.0, spread=0.5):
    a = rng.normal(0.0, spread, size=(per_cloud, dim))
    b = rng.normal(separation, spread, size=(per_cloud, dim))
    x = np.abs(np.vstack([a, b])) + 0.01  # keep entries positive and nonzero
    labels = [0] * per_cloud + [1] * per_cloud
    return x, labels


# -- feature vectors ----------------------------------------------------------


def test_static_counts_self_chain():
    dac = make_component([(3, 2), (3, 3), (3, 4)],
                         edges=[(3, 2, 3), (3, 3, 3)])
    vec = static_features(dac, normalize=False)
    dense = vec.dense()
    assert dense[3] == 3.0
    assert dense.sum() == 3.0
    assert np.count_nonzero(dense) == 1


def test_static_counts_normalized_unit():
    dac = make_component([(3, 2), (3, 3), (3, 4)])
    vec = static_features(dac, normalize=True)
    assert vec.dense()[3] == pytest.approx(1.0)
    assert np.linalg.norm(vec.dense()) == pytest.approx(1.0, abs=1e-10)


def test_static_counts_two_nodes():
    dac = make_component([(0, 0), (0, 1), (1, 1)])
    raw = static_features(dac, normalize=False)
    assert raw.dense()[0] == 2.0 and raw.dense()[1] == 1.0
    assert np.linalg.norm(raw.dense()) == pytest.approx(np.sqrt(5.0))
    unit = static_features(dac, normalize=True)
    assert np.linalg.norm(unit.dense()) == pytest.approx(1.0, abs=1e-10)


def test_static_sum_equals_members():
    rng = np.random.default_rng(17)
    members = {(int(rng.integers(10)), int(rng.integers(6))) for _ in range(12)}
    dac = make_component(sorted(members))
    assert static_features(dac, normalize=False).dense().sum() == len(members)


def test_dynamic_vector_self_pair():
    dac = make_component([(2, 0), (2, 1)])
    vec = dynamic_features(dac)
    assert vec.bits.tolist() == [True, True]
    assert vec.nodes.tolist() == [2]
    assert vec.width == 2


def test_dynamic_vector_diagonal():
    dac = make_component([(0, 0), (1, 1)])
    vec = dynamic_features(dac)
    assert vec.bits.tolist() == [True, False, False, True]


def test_dynamic_popcount_equals_members():
    rng = np.random.default_rng(23)
    members = {(int(rng.integers(8)), int(rng.integers(2, 7))) for _ in range(15)}
    dac = make_component(sorted(members))
    assert dynamic_features(dac).popcount() == len(members)


# -- k-means ------------------------------------------------------------------


def test_kmeans_two_clouds_exact_split():
    rng = np.random.default_rng(7)
    x, truth = two_cloud_fixture(rng)
    model = kmeans(vectors_from_matrix(x), k=2, seed=1)
    labels = [model.assignments[f"v{i:04d}"] for i in range(len(x))]
    assert adjusted_rand_index(labels, truth) == pytest.approx(1.0)


def test_kmeans_k_equals_n_zero_wcss():
    rng = np.random.default_rng(8)
    x = rng.uniform(0.1, 1.0, size=(12, 4))
    model = kmeans(vectors_from_matrix(x), k=12, seed=0)
    assert model.wcss == pytest.approx(0.0, abs=1e-12)


def test_kmeans_k1_is_mean_and_total_variance():
    rng = np.random.default_rng(9)
    x = rng.uniform(0.1, 1.0, size=(30, 3))
    model = kmeans(vectors_from_matrix(x), k=1, seed=0)
    assert np.allclose(model.centroids[0], x.mean(axis=0))
    expected = float(((x - x.mean(axis=0)) ** 2).sum())
    assert model.wcss == pytest.approx(expected, rel=1e-10)


def test_kmeans_wcss_monotone_history():
    rng = np.random.default_rng(10)
    x = rng.uniform(0.1, 1.0, size=(60, 6))
    for k in (2, 3, 5):
        model = kmeans(vectors_from_matrix(x), k=k, seed=3)
        history = model.wcss_history
        assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))
        assert model.wcss == pytest.approx(history[-1], rel=1e-8)


def test_kmeans_assignments_are_nearest_centroid():
    rng = np.random.default_rng(11)
    x = rng.uniform(0.1, 1.0, size=(40, 4))
    model = kmeans(vectors_from_matrix(x), k=4, seed=5)
    for i in range(len(x)):
        d2 = ((model.centroids - x[i]) ** 2).sum(axis=1)
        assert model.assignments[f"v{i:04d}"] == int(np.argmin(d2))


def test_kmeans_wcss_recomputes_from_scratch():
    rng = np.random.default_rng(12)
    x = rng.uniform(0.1, 1.0, size=(25, 5))
    vectors = vectors_from_matrix(x)
    model = kmeans(vectors, k=3, seed=2)
    labels = [model.assignments[v.component_id] for v in vectors]
    recomputed = brute_wcss(x.tolist(), labels, model.centroids.tolist())
    assert model.wcss == pytest.approx(recomputed, rel=1e-8)


def test_kmeans_permutation_invariant():
    rng = np.random.default_rng(13)
    x = rng.uniform(0.1, 1.0, size=(30, 4))
    vectors = vectors_from_matrix(x)
    model_a = kmeans(vectors, k=3, seed=9)
    shuffled = list(vectors)
    rng.shuffle(shuffled)
    model_b = kmeans(shuffled, k=3, seed=9)
    assert model_a.assignments == model_b.assignments
    assert np.array_equal(model_a.centroids, model_b.centroids)
    assert model_a.wcss == model_b.wcss


def test_kmeans_deterministic_given_seed():
    rng = np.random.default_rng(14)
    x = rng.uniform(0.1, 1.0, size=(30, 4))
    a = kmeans(vectors_from_matrix(x), k=3, seed=21)
    b = kmeans(vectors_from_matrix(x), k=3, seed=21)
    assert a.assignments == b.assignments and a.wcss == b.wcss


def test_kmeans_k_out_of_range():
    rng = np.random.default_rng(15)
    x = rng.uniform(0.1, 1.0, size=(5, 2))
    with pytest.raises(ValidationError):
        kmeans(vectors_from_matrix(x), k=0)
    with pytest.raises(ValidationError):
        kmeans(vectors_from_matrix(x), k=6)


def test_kmeans_identical_points_survive():
    x = np.ones((6, 3))
    model = kmeans(vectors_from_matrix(x), k=2, seed=0)
    assert model.wcss == pytest.approx(0.0)


# -- silhouette ---------------------------------------------------------------


def test_silhouette_two_clouds_high():
    rng = np.random.default_rng(16)
    x, _ = two_cloud_fixture(rng)
    vectors = vectors_from_matrix(x)
    model = kmeans(vectors, k=2, seed=1)
    assert silhouette(vectors, model) > 0.8


def test_silhouette_matches_brute_oracle():
    rng = np.random.default_rng(17)
    x = rng.uniform(0.0, 4.0, size=(25, 3)) + 0.01
    vectors = vectors_from_matrix(x)
    for k in (2, 3, 4):
        model = kmeans(vectors, k=k, seed=4)
        ids = sorted(model.assignments)
        labels = [model.assignments[i] for i in ids]
        expected = brute_silhouette(x.tolist(), labels)
        # the fast pairwise-distance formula differs from direct differences
        # at the last few bits
        assert silhouette(vectors, model) == pytest.approx(expected, rel=1e-6)


def test_silhouette_matches_sklearn():
    sklearn_metrics = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(18)
    x = rng.uniform(0.0, 4.0, size=(40, 4)) + 0.01
    vectors = vectors_from_matrix(x)
    model = kmeans(vectors, k=3, seed=6)
    labels = [model.assignments[f"v{i:04d}"] for i in range(len(x))]
    if len(set(labels)) < 2:
        pytest.skip("degenerate clustering")
    expected = sklearn_metrics.silhouette_score(x, np.array(labels))
    assert silhouette(vectors, model) == pytest.approx(float(expected), rel=1e-8)


def test_silhouette_identical_points_zero():
    x = np.ones((8, 2))
    vectors = vectors_from_matrix(x)
    model = kmeans(vectors, k=2, seed=0)
    assert silhouette(vectors, model) == 0.0


def test_silhouette_requires_k2():
    x = np.ones((4, 2))
    vectors = vectors_from_matrix(x)
    model = kmeans(vectors, k=1, seed=0)
    with pytest.raises(ValidationError):
        silhouette(vectors, model)


def test_silhouette_range_and_subsample_path():
    rng = np.random.default_rng(19)
    x = rng.uniform(0.0, 2.0, size=(50, 3)) + 0.01
    vectors = vectors_from_matrix(x)
    model = kmeans(vectors, k=3, seed=7)
    full = silhouette(vectors, model)
    sampled = silhouette(vectors, model, max_exact=30)
    assert -1.0 <= full <= 1.0
    assert -1.0 <= sampled <= 1.0


def test_random_points_score_below_planted():
    rng = np.random.default_rng(20)
    planted, _ = two_cloud_fixture(rng, per_cloud=15, dim=4)
    uniform = rng.uniform(0.0, 1.0, size=planted.shape) + 0.01
    v_planted = vectors_from_matrix(planted)
    v_uniform = vectors_from_matrix(uniform)
    s_planted = silhouette(v_planted, kmeans(v_planted, k=2, seed=3))
    s_uniform = silhouette(v_uniform, kmeans(v_uniform, k=2, seed=3))
    assert s_planted > s_uniform


# -- scan over k --------------------------------------------------------------


def planted_three_clusters(rng, per=15, dim=6):
    centers = np.array([
        [8.0, 0, 0, 0, 0, 0],
        [0, 8.0, 0, 0, 0, 0],
        [0, 0, 8.0, 0, 0, 0],
    ])[:, :dim]
    blocks = [np.abs(c + rng.normal(0, 0.4, size=(per, dim))) + 0.01 for c in centers]
    labels = sum(([i] * per for i in range(3)), [])
    return np.vstack(blocks), labels


def test_scan_k_peaks_at_planted_k():
    rng = np.random.default_rng(21)
    x, _ = planted_three_clusters(rng)
    rows = scan_k(vectors_from_matrix(x), range(2, 7), seed=5)
    assert [r["k"] for r in rows] == [2, 3, 4, 5, 6]
    best = max(rows, key=lambda r: r["silhouette"])
    assert best["k"] == 3


def test_scan_k_single_row():
    rng = np.random.default_rng(22)
    x = rng.uniform(0.1, 1.0, size=(10, 3))
    rows = scan_k(vectors_from_matrix(x), range(2, 3), seed=0)
    assert len(rows) == 1 and rows[0]["k"] == 2


def test_scan_k_empty_range():
    with pytest.raises(ValidationError):
        scan_k(vectors_from_matrix(np.ones((4, 2))), range(2, 2), seed=0)


def test_assignments_stable_across_seeds():
    rng = np.random.default_rng(23)
    x, _ = planted_three_clusters(rng)
    vectors = vectors_from_matrix(x)
    runs = [kmeans(vectors, k=3, seed=s) for s in range(5)]
    ids = sorted(runs[0].assignments)
    for a in range(len(runs)):
        for b in range(a + 1, len(runs)):
            la = [runs[a].assignments[i] for i in ids]
            lb = [runs[b].assignments[i] for i in ids]
            assert adjusted_rand_index(la, lb) >= 0.95


# -- adjusted Rand index ------------------------------------------------------


def test_ari_perfect_and_independent():
    assert adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(1.0)
    assert adjusted_rand_index([0, 0, 0, 0], [0, 1, 2, 3]) == pytest.approx(0.0)


def test_ari_matches_sklearn():
    sklearn_metrics = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(24)
    for _ in range(25):
        n = int(rng.integers(5, 40))
        a = rng.integers(0, 4, size=n).tolist()
        b = rng.integers(0, 4, size=n).tolist()
        expected = float(sklearn_metrics.adjusted_rand_score(a, b))
        assert adjusted_rand_index(a, b) == pytest.approx(expected, abs=1e-12)


# -- features CSV -------------------------------------------------------------


def test_features_csv_round_trip(tmp_path):
    dacs = [
        make_component([(3, 2), (3, 3), (3, 4)]),
        make_component([(0, 0), (0, 1), (1, 1)]),
    ]
    vectors = [static_features(d, normalize=True) for d in dacs]
    path = tmp_path / "f.csv"
    write_features_csv(vectors, path)
    back = read_features_csv(path, length=10)
    assert len(back) == 2
    for ours, theirs in zip(sorted(vectors, key=lambda v: v.component_id), back):
        assert ours.component_id == theirs.component_id
        assert np.array_equal(ours.indices, theirs.indices)
        assert np.allclose(ours.values, theirs.values)
