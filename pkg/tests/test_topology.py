import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfrc.errors import EdgeFormatError, EmptyNetworkError, UnscalableMatrixError
from mfrc.topology import (
    AdjacencyMatrix,
    export_matrix,
    generate_erdos_renyi,
    generate_input_matrix,
    ingest_connectome,
    load_matrix,
    read_edge_list,
    scale_to_spectral_radius,
    spectral_radius,
)


# ---------------------------------------------------------------------------
# Erdos-Renyi generation
# ---------------------------------------------------------------------------

def test_er_zero_sparsity_gives_zero_matrix():
    m = generate_erdos_renyi(10, 0.0, 1)
    assert m.entries.nnz == 0
    assert m.spectral_radius == 0.0


def test_er_full_sparsity_fills_every_entry():
    m = generate_erdos_renyi(2, 1.0, 7)
    dense = m.toarray()
    assert np.all(dense != 0.0)
    assert np.all(np.abs(dense) <= 1.0)


def test_er_nonzero_count_matches_binomial():
    # 500x500 at sparsity 0.05: binomial mean 12500, 3 sigma ~ 335.
    m = generate_erdos_renyi(500, 0.05, 42)
    expected = 500 * 500 * 0.05
    spread = 3 * np.sqrt(expected * 0.95)
    assert abs(m.entries.nnz - expected) <= spread


def test_er_weights_lie_in_unit_interval():
    m = generate_erdos_renyi(50, 0.2, 3)
    assert np.all(np.abs(m.entries.data) <= 1.0)


def test_er_deterministic_bit_for_bit():
    a = generate_erdos_renyi(100, 0.1, 11)
    b = generate_erdos_renyi(100, 0.1, 11)
    assert np.array_equal(a.entries.toarray(), b.entries.toarray())
    assert a.spectral_radius == b.spectral_radius


def test_er_rejects_empty_network():
    with pytest.raises(EmptyNetworkError):
        generate_erdos_renyi(0, 0.5, 1)


def test_er_rejects_bad_sparsity():
    with pytest.raises(ValueError):
        generate_erdos_renyi(5, 1.5, 1)


# ---------------------------------------------------------------------------
# Spectral radius and scaling
# ---------------------------------------------------------------------------

def test_spectral_radius_diagonal():
    m = AdjacencyMatrix.from_array(np.diag([-2.0, 1.0]))
    assert spectral_radius(m) == pytest.approx(2.0, rel=1e-12)


def test_spectral_radius_zero_matrix():
    m = AdjacencyMatrix.from_array(np.zeros((3, 3)))
    assert spectral_radius(m) == 0.0


def test_spectral_radius_matches_dense_oracle_small():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((20, 20))
    oracle = np.abs(np.linalg.eigvals(a)).max()
    assert spectral_radius(a) == pytest.approx(oracle, rel=1e-6)


def test_spectral_radius_arpack_path_matches_dense_oracle():
    # n=120 exceeds the dense cutoff, so this exercises the iterative path.
    rng = np.random.default_rng(9)
    a = rng.standard_normal((120, 120)) * (rng.random((120, 120)) < 0.2)
    oracle = np.abs(np.linalg.eigvals(a)).max()
    assert spectral_radius(a) == pytest.approx(oracle, rel=1e-8)


def test_scale_diagonal_matrix():
    m = AdjacencyMatrix.from_array(np.diag([1.0, 1.0]))
    scaled = scale_to_spectral_radius(m, 1.4)
    assert np.allclose(scaled.toarray(), np.diag([1.4, 1.4]))
    assert scaled.spectral_radius == pytest.approx(1.4, rel=1e-6)


def test_scale_to_zero_returns_zero_matrix():
    m = generate_erdos_renyi(30, 0.3, 2)
    scaled = scale_to_spectral_radius(m, 0.0)
    assert scaled.spectral_radius == 0.0
    assert np.all(scaled.toarray() == 0.0)


def test_scale_random_matrix_against_dense_oracle():
    rng = np.random.default_rng(17)
    m = AdjacencyMatrix.from_array(rng.uniform(-1, 1, (5, 5)))
    scaled = scale_to_spectral_radius(m, 1.5)
    oracle = np.abs(np.linalg.eigvals(scaled.toarray())).max()
    assert oracle == pytest.approx(1.5, rel=1.0e-6)


def test_scale_twice_is_idempotent():
    m = generate_erdos_renyi(80, 0.1, 23)
    once = scale_to_spectral_radius(m, 1.3)
    twice = scale_to_spectral_radius(once, 1.3)
    assert np.max(np.abs(once.toarray() - twice.toarray())) < 1e-12


def test_scale_nilpotent_matrix_unscalable():
    nilpotent = np.zeros((3, 3))
    nilpotent[0, 1] = 1.0
    nilpotent[1, 2] = 1.0
    m = AdjacencyMatrix.from_array(nilpotent)
    assert m.spectral_radius == 0.0
    with pytest.raises(UnscalableMatrixError):
        scale_to_spectral_radius(m, 1.0)


# ---------------------------------------------------------------------------
# Input matrix
# ---------------------------------------------------------------------------

def test_input_matrix_one_nonzero_per_row():
    w = generate_input_matrix(4, 2, 0)
    assert w.shape == (4, 2)
    assert np.all(np.count_nonzero(w, axis=1) == 1)
    assert np.all(np.abs(w) <= 1.0)


def test_input_matrix_single_element():
    w = generate_input_matrix(1, 1, 5)
    assert w.shape == (1, 1)
    assert abs(w[0, 0]) <= 1.0


def test_input_matrix_column_balance():
    # Column choice is uniform: counts land within 3 sigma of Binomial(n, 1/2).
    w = generate_input_matrix(500, 2, 9)
    count0 = np.count_nonzero(w[:, 0])
    spread = 3 * np.sqrt(500 * 0.25)
    assert abs(count0 - 250) <= spread


def test_input_matrix_deterministic():
    assert np.array_equal(generate_input_matrix(64, 2, 3), generate_input_matrix(64, 2, 3))


# ---------------------------------------------------------------------------
# Connectome ingestion
# ---------------------------------------------------------------------------

def test_ingest_threshold_drops_edge_and_degenerate_map():
    m = ingest_connectome([("a", "b", 100), ("b", "a", 49)], 50)
    assert m.n == 2
    assert m.labels == ["a", "b"]
    dense = m.toarray()
    # the surviving edge exists structurally but maps to weight 0 (min == max)
    assert m.entries.nnz == 1
    assert dense[0, 1] == 0.0
    assert np.all(dense == 0.0)


def test_ingest_min_max_interpolation():
    m = ingest_connectome([("a", "b", 50), ("b", "c", 150), ("c", "a", 100)], 50)
    dense = m.toarray()
    idx = {label: i for i, label in enumerate(m.labels)}
    assert dense[idx["a"], idx["b"]] == -1.0
    assert dense[idx["b"], idx["c"]] == 1.0
    assert dense[idx["c"], idx["a"]] == 0.0


def test_ingest_self_loop_zeroed():
    m = ingest_connectome([("a", "a", 999)], 50)
    assert m.n == 1
    assert np.all(m.toarray() == 0.0)


def test_ingest_merges_duplicates_before_threshold():
    # 30 + 30 = 60 >= 50, so the merged edge survives.
    m = ingest_connectome([("a", "b", 30), ("a", "b", 30), ("b", "a", 60)], 50)
    assert m.entries.nnz == 2


def test_ingest_numeric_labels_sort_numerically():
    m = ingest_connectome([(10, 2, 60), (2, 10, 70)], 50)
    assert m.labels == [2, 10]


def test_ingest_rejects_nonpositive_counts():
    with pytest.raises(EdgeFormatError):
        ingest_connectome([("a", "b", 0)], 1)


def test_ingest_rejects_empty_survivors():
    with pytest.raises(EmptyNetworkError):
        ingest_connectome([("a", "b", 10)], 50)


def test_ingest_diagonal_always_zero():
    edges = [("a", "a", 90), ("a", "b", 60), ("b", "b", 200), ("b", "a", 75)]
    m = ingest_connectome(edges, 50)
    assert np.all(np.diag(m.toarray()) == 0.0)


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.integers(1, 200)),
                min_size=1, max_size=30))
@settings(max_examples=60, deadline=None)
def test_threshold_monotonicity(edges):
    def surviving(threshold):
        try:
            m = ingest_connectome(edges, threshold)
        except EmptyNetworkError:
            return set()
        coo = m.entries.tocoo()
        return {(m.labels[i], m.labels[j]) for i, j in zip(coo.row, coo.col)}

    s1, s50, s100 = surviving(1), surviving(50), surviving(100)
    assert s100 <= s50 <= s1


# ---------------------------------------------------------------------------
# File interfaces
# ---------------------------------------------------------------------------

def test_read_edge_list(tmp_path):
    path = tmp_path / "edges.csv"
    path.write_text(
        "# synthetic fixture\n"
        "pre_id,post_id,synapse_count\n"
        "n1,n2,60\n"
        "n2,n1,55\n")
    edges = read_edge_list(path)
    assert edges == [("n1", "n2", 60), ("n2", "n1", 55)]


def test_read_edge_list_rejects_bad_count(tmp_path):
    path = tmp_path / "edges.csv"
    path.write_text("n1,n2,many\n")
    with pytest.raises(EdgeFormatError):
        read_edge_list(path)


def test_matrix_export_round_trip(tmp_path):
    m = generate_erdos_renyi(40, 0.2, 13)
    path = tmp_path / "matrix.csv"
    export_matrix(m, path)
    loaded = load_matrix(path)
    assert loaded.n == m.n
    assert loaded.spectral_radius == m.spectral_radius
    assert np.array_equal(loaded.toarray(), m.toarray())
    assert loaded.provenance == m.provenance


def test_connectome_export_round_trip(tmp_path):
    m = ingest_connectome([("a", "b", 50), ("b", "c", 150), ("c", "a", 100)], 50,
                          source_id="fixture")
    path = tmp_path / "conn.csv"
    export_matrix(m, path)
    loaded = load_matrix(path)
    assert np.array_equal(loaded.toarray(), m.toarray())
    assert loaded.labels == m.labels
    assert loaded.provenance.synapse_threshold == 50
