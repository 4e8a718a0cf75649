import numpy as np
import pytest

from dynembed.clustering import (
    Partition,
    QualityConfig,
    louvain_optimize,
    quality_config_from_mode_weights,
    quality_config_from_system,
    quality_score,
    quality_value,
    spectral_partition,
    time_scan,
    variation_of_information,
)
from dynembed.graphs import load_edge_list, load_tribes, signed_laplacian
from dynembed.linsys import diffusion_system
from dynembed.similarity import SimilarityMatrix, autocovariance, centered_similarity_at

from oracles import all_partition_labels, best_partition_quality, random_connected_graph


def quality_matrix(config):
    return config.F - config.alpha * np.outer(config.a, config.b)


class TestPartition:
    def test_canonical_relabeling(self):
        p = Partition(np.array([5, 5, 2, 7, 2]))
        assert p.labels.tolist() == [0, 0, 1, 2, 1]
        assert p.k == 3

    def test_equality_up_to_relabeling(self):
        assert Partition(np.array([1, 1, 0])) == Partition(np.array([0, 0, 1]))
        assert Partition(np.array([0, 1, 0])) != Partition(np.array([0, 0, 1]))

    def test_indicator_and_groups(self):
        p = Partition.from_groups([[0, 2], [1]], 3)
        H = p.indicator()
        assert np.array_equal(H.T @ H, np.diag([2.0, 1.0]))
        assert p.groups() == ((0, 2), (1,))


class TestQuality:
    def test_singletons_give_trace(self):
        rng = np.random.default_rng(0)
        M = rng.normal(size=(5, 5))
        psi = SimilarityMatrix(M @ M.T)
        p = Partition(np.arange(5))
        assert abs(quality_score(psi, p) - np.trace(psi.values)) <= 1e-12

    def test_single_group_gives_grand_sum(self):
        rng = np.random.default_rng(1)
        M = rng.normal(size=(4, 4))
        psi = SimilarityMatrix(M @ M.T)
        p = Partition(np.zeros(4, dtype=int))
        assert abs(quality_score(psi, p) - psi.values.sum()) <= 1e-12

    def test_two_node_closed_form(self):
        g = load_edge_list(["a\tb\t1"])
        sys = diffusion_system(g)
        nu = np.ones(2) / np.sqrt(2)
        for t in (0.3, 1.5):
            psi = centered_similarity_at(sys, t, nu)
            split = quality_score(psi, Partition(np.array([0, 1])))
            merged = quality_score(psi, Partition(np.array([0, 0])))
            assert abs(split - np.exp(-4 * t)) <= 1e-12
            assert abs(merged) <= 1e-12
            assert split > merged

    def test_quality_value_matches_matrix_form(self):
        rng = np.random.default_rng(2)
        F = rng.normal(size=(6, 6))
        cfg = QualityConfig(F=F, a=rng.normal(size=6), b=rng.normal(size=6), alpha=0.7)
        M = quality_matrix(cfg)
        for _ in range(10):
            labels = rng.integers(0, 3, 6)
            p = Partition(labels)
            want = sum(
                M[np.ix_(p.labels == g, p.labels == g)].sum() for g in range(p.k)
            )
            assert abs(quality_value(cfg, p) - want) <= 1e-10


class TestLouvain:
    def test_all_negative_off_diagonal_gives_singletons(self):
        n = 6
        F = -np.ones((n, n)) + np.eye(n)
        cfg = QualityConfig(F=F, a=np.zeros(n), b=np.zeros(n))
        assert louvain_optimize(cfg, seed=0).k == n

    def test_all_positive_gives_single_group(self):
        n = 6
        cfg = QualityConfig(F=np.ones((n, n)), a=np.zeros(n), b=np.zeros(n))
        assert louvain_optimize(cfg, seed=0).k == 1

    def test_two_cliques_newman_girvan(self):
        g = load_edge_list(
            ["a\tb\t1", "a\tc\t1", "b\tc\t1", "d\te\t1", "d\tf\t1", "e\tf\t1", "c\td\t1"]
        )
        A = g.weights
        two_m = A.sum()
        d = A.sum(axis=1)
        cfg = QualityConfig(F=A / two_m, a=d / two_m, b=d / two_m)
        part = louvain_optimize(cfg, seed=3)
        assert part == Partition(np.array([0, 0, 0, 1, 1, 1]))
        # exhaustive enumeration confirms this is the global optimum
        best = best_partition_quality(quality_matrix(cfg))
        assert abs(quality_value(cfg, part) - best) <= 1e-12

    def test_aggregation_exactness(self):
        rng = np.random.default_rng(5)
        F = rng.normal(size=(8, 8))
        a, b = rng.normal(size=8), rng.normal(size=8)
        cfg = QualityConfig(F=F, a=a, b=b, alpha=0.9)
        labels = rng.integers(0, 3, 8)
        p = Partition(labels)
        H = p.indicator()
        agg = QualityConfig(F=H.T @ F @ H, a=H.T @ a, b=H.T @ b, alpha=0.9)
        flat = quality_value(cfg, p)
        coarse = quality_value(agg, Partition(np.arange(p.k)))
        assert abs(flat - coarse) <= 1e-10

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(6)
        g = random_connected_graph(rng, 12)
        cfg = quality_config_from_system(
            diffusion_system(g), 0.7, np.full(12, 1 / np.sqrt(12))
        )
        a = louvain_optimize(cfg, seed=11)
        b = louvain_optimize(cfg, seed=11)
        assert a == b

    def test_quality_never_below_singletons(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = int(rng.integers(4, 10))
            g = random_connected_graph(rng, n)
            cfg = quality_config_from_system(
                diffusion_system(g), float(rng.uniform(0.2, 2.0)), np.full(n, 1 / np.sqrt(n))
            )
            part = louvain_optimize(cfg, seed=1)
            assert quality_value(cfg, part) >= quality_value(cfg, Partition(np.arange(n))) - 1e-12

    def test_small_instance_optimality(self):
        rng = np.random.default_rng(42)
        hits = 0
        for _ in range(10):
            n = int(rng.integers(5, 9))
            g = random_connected_graph(rng, n)
            cfg = quality_config_from_system(
                diffusion_system(g), float(rng.uniform(0.1, 3.0)), np.full(n, 1 / np.sqrt(n))
            )
            best = best_partition_quality(quality_matrix(cfg))
            got = max(
                quality_value(cfg, louvain_optimize(cfg, seed=s)) for s in range(10)
            )
            hits += got >= best - 1e-10 * max(1.0, abs(best))
        assert hits >= 9


class TestModeWeights:
    def test_leading_mode_weighting_matches_centering_for_diffusion(self):
        # gamma = (1, 0, ...) reproduces the uniform-mode correction exactly
        rng = np.random.default_rng(8)
        g = random_connected_graph(rng, 6)
        sys = diffusion_system(g)
        t = 0.8
        gamma = np.zeros(6)
        gamma[0] = 1.0
        cfg = quality_config_from_mode_weights(sys, t, gamma)
        nu = np.full(6, 1 / np.sqrt(6))
        centered = quality_config_from_system(sys, t, nu, alpha=1.0)
        for _ in range(10):
            p = Partition(rng.integers(0, 3, 6))
            assert abs(quality_value(cfg, p) - quality_value(centered, p)) <= 1e-8


class TestSpectral:
    def test_two_disconnected_edges(self):
        g = load_edge_list(["a\tb\t1", "c\td\t1"])
        from dynembed.graphs import combinatorial_laplacian

        part = spectral_partition(combinatorial_laplacian(g), c=2, k=2, seed=0)
        assert part == Partition(np.array([0, 0, 1, 1]))

    def test_signed_two_node_split(self):
        g = load_edge_list(["a\tb\t-1"])
        part = spectral_partition(signed_laplacian(g), c=1, k=2, seed=0)
        assert part.k == 2

    def test_similarity_input_uses_dominant_vectors(self):
        g = load_edge_list(["a\tb\t1", "c\td\t1"])
        from dynembed.similarity import similarity_at

        psi = similarity_at(diffusion_system(g), 1.0)
        part = spectral_partition(psi, c=2, k=2, seed=0)
        assert part == Partition(np.array([0, 0, 1, 1]))

    def test_tribes_k3_no_negative_inside(self):
        g = load_tribes()
        part = spectral_partition(signed_laplacian(g), c=2, k=3, seed=0)
        assert part.k == 3
        for members in part.groups():
            sub = g.weights[np.ix_(members, members)]
            assert (sub >= 0).all()

    def test_kmeans_determinism(self):
        g = load_tribes()
        Ls = signed_laplacian(g)
        a = spectral_partition(Ls, c=2, k=3, seed=7)
        b = spectral_partition(Ls, c=2, k=3, seed=7)
        assert a == b

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            spectral_partition(np.eye(3), c=1, k=4, seed=0)


class TestVariationOfInformation:
    def test_identical_is_zero(self):
        p = Partition(np.array([0, 1, 0, 2]))
        assert variation_of_information(p, p) == 0.0

    def test_singletons_vs_lump_n4(self):
        a = Partition(np.arange(4))
        b = Partition(np.zeros(4, dtype=int))
        assert abs(variation_of_information(a, b) - 1.0) <= 1e-12

    def test_orthogonal_pairs_n4(self):
        a = Partition(np.array([0, 0, 1, 1]))
        b = Partition(np.array([0, 1, 0, 1]))
        assert abs(variation_of_information(a, b) - 1.0) <= 1e-12

    def test_symmetry_and_relabel_invariance(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            n = int(rng.integers(2, 12))
            a = Partition(rng.integers(0, 4, n))
            b = Partition(rng.integers(0, 4, n))
            v1 = variation_of_information(a, b)
            assert abs(v1 - variation_of_information(b, a)) <= 1e-14
            perm = rng.permutation(a.k)
            assert abs(v1 - variation_of_information(Partition(perm[a.labels]), b)) <= 1e-14

    def test_triangle_inequality(self):
        rng = np.random.default_rng(10)
        for _ in range(30):
            n = int(rng.integers(3, 10))
            a, b, c = (Partition(rng.integers(0, 3, n)) for _ in range(3))
            assert variation_of_information(a, c) <= (
                variation_of_information(a, b) + variation_of_information(b, c) + 1e-12
            )

    def test_mismatched_sizes_rejected(self):
        with pytest.raises(ValueError):
            variation_of_information(Partition(np.zeros(3, int)), Partition(np.zeros(4, int)))


class TestMarkovStabilityRecovery:
    def test_quality_equals_scaled_stability(self):
        rng = np.random.default_rng(12)
        for _ in range(3):
            n = int(rng.integers(4, 7))
            g = random_connected_graph(rng, n)
            t = float(rng.uniform(0.2, 1.5))
            psi = centered_similarity_at(diffusion_system(g), t, np.full(n, 1 / np.sqrt(n)))
            sigma = autocovariance(g, 2 * t)
            for labels in all_partition_labels(n)[::7]:
                p = Partition(np.asarray(labels, dtype=int))
                r = quality_score(psi, p)
                s = sum(sigma[np.ix_(p.labels == q, p.labels == q)].sum() for q in range(p.k))
                assert abs(r - n * s) <= 1e-8


class TestScan:
    def test_two_disconnected_cliques_single_plateau(self):
        lines = []
        for base in (0, 3):
            names = [f"n{base+i}" for i in range(3)]
            lines += [f"{a}\t{b}\t1" for i, a in enumerate(names) for b in names[i + 1 :]]
        g = load_edge_list(lines)
        sys = diffusion_system(g)
        scan = time_scan(
            sys, np.geomspace(0.3, 20, 6), nu=np.full(6, 1 / np.sqrt(6)), seeds=3
        )
        assert all(k == 2 for k in scan.n_communities)
        assert np.abs(scan.vi_matrix).max() <= 1e-12
        assert len(scan.plateaus) == 1
        p = scan.plateaus[0]
        assert (p.start, p.stop, p.n_communities) == (0, 5, 2)
        planted = Partition(np.array([0, 0, 0, 1, 1, 1]))
        assert all(b == planted for b in scan.best)

    def test_scan_deterministic_and_thread_invariant(self):
        rng = np.random.default_rng(13)
        g = random_connected_graph(rng, 8)
        sys = diffusion_system(g)
        nu = np.full(8, 1 / np.sqrt(8))
        times = np.geomspace(0.1, 5, 5)
        a = time_scan(sys, times, nu, seeds=3, base_seed=4, max_workers=1)
        b = time_scan(sys, times, nu, seeds=3, base_seed=4, max_workers=4)
        assert all(x == y for x, y in zip(a.best, b.best))
        assert np.array_equal(a.vi_matrix, b.vi_matrix)
        assert a.plateaus == b.plateaus
