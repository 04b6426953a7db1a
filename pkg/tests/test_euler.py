import numpy as np
import pytest
from conftest import REFERENCE_CELLS, REFERENCE_MAPPING

from sparsig import euler


def mapping(gamma, rho):
    return euler.build_mapping_matrix(euler.construct_euler_square(gamma, rho))


# ---------------------------------------------------------------------------
# existence


def test_exists_prime_cases():
    assert euler.euler_square_exists(3, 2)
    assert euler.euler_square_exists(101, 2)
    assert euler.euler_square_exists(5, 4)


def test_exists_degree_bound():
    assert not euler.euler_square_exists(3, 3)


def test_exists_prime_power_and_composite():
    assert euler.euler_square_exists(4, 2)       # 2^2
    assert euler.euler_square_exists(9, 8)       # 3^2
    assert not euler.euler_square_exists(6, 2)   # min prime-power factor 2
    assert euler.euler_square_exists(12, 2)      # min(4, 3) = 3 allows rho 2
    assert not euler.euler_square_exists(12, 3)


def test_exists_rejects_bad_parameters():
    with pytest.raises(euler.ParameterError):
        euler.euler_square_exists(2, 2)
    with pytest.raises(euler.ParameterError):
        euler.euler_square_exists(5, 1)


# ---------------------------------------------------------------------------
# construction


def test_construct_matches_reference_square():
    es = euler.construct_euler_square(3, 2)
    assert np.array_equal(es.cells, REFERENCE_CELLS)


def test_reference_square_validates():
    es = euler.EulerSquare.from_cells(REFERENCE_CELLS)
    assert es.is_valid()


def test_invalid_square_rejected():
    bad = REFERENCE_CELLS.copy()
    bad[0, 0] = (1, 1)  # duplicate tuple, breaks Latin rows too
    with pytest.raises(euler.ParameterError):
        euler.EulerSquare.from_cells(bad)


def test_construct_5_4_tuples_distinct():
    es = euler.construct_euler_square(5, 4)
    assert es.is_valid()
    tuples = {tuple(es.cells[i, j]) for i in range(5) for j in range(5)}
    assert len(tuples) == 25


def test_construct_nonprime_rejected():
    with pytest.raises(euler.UnsupportedParameterError):
        euler.construct_euler_square(4, 2)


def test_construct_unknown_method_rejected():
    with pytest.raises(euler.UnsupportedParameterError):
        euler.construct_euler_square(5, 2, method="finite-field")


# ---------------------------------------------------------------------------
# mapping matrix


def test_mapping_matches_reference_exactly():
    es = euler.EulerSquare.from_cells(REFERENCE_CELLS)
    fm = euler.build_mapping_matrix(es)
    assert np.array_equal(fm.matrix, REFERENCE_MAPPING)


@pytest.mark.parametrize("gamma,rho", [(3, 2), (5, 2), (5, 3), (5, 4), (7, 2), (13, 4)])
def test_mapping_biregular(gamma, rho):
    fm = mapping(gamma, rho)
    assert (fm.matrix.sum(axis=0) == rho).all()
    assert (fm.matrix.sum(axis=1) == gamma).all()


def test_mapping_transpose_is_cpm_block_array():
    fm = mapping(5, 2)
    proto = euler.extract_protograph(fm)
    assert np.array_equal(euler.expand_protograph(proto), fm.matrix.T)


def test_verify_properties_reference():
    fm = euler.SparseMapping(gamma=3, rho=2, matrix=REFERENCE_MAPPING)
    rep = euler.verify_properties(fm)
    assert rep.biregular and rep.rc_constrained and rep.cpm_array


def test_verify_properties_detects_perturbation():
    bad = REFERENCE_MAPPING.copy()
    bad[0, 1] = 1
    rep = euler.verify_properties(euler.SparseMapping(gamma=3, rho=2, matrix=bad))
    assert not rep.biregular


def test_verify_properties_detects_duplicate_columns():
    dup = REFERENCE_MAPPING.copy()
    dup[:, 1] = dup[:, 0]
    rep = euler.verify_properties(euler.SparseMapping(gamma=3, rho=2, matrix=dup))
    assert not rep.rc_constrained


# ---------------------------------------------------------------------------
# cycles, girth, connectivity


def overlap_graph(F):
    O = F.T.astype(np.int32) @ F.astype(np.int32)
    np.fill_diagonal(O, 0)
    return O


def shared_row(F, a, b):
    return int(np.flatnonzero(F[:, a] & F[:, b])[0])


def count_6_cycles_oracle(fm):
    """Triangles in the user-overlap graph with three distinct joining rows."""
    F = fm.matrix
    O = overlap_graph(F)
    K = F.shape[1]
    count = 0
    for a in range(K):
        for b in range(a + 1, K):
            if not O[a, b]:
                continue
            for c in range(b + 1, K):
                if O[a, c] and O[b, c]:
                    rows = {shared_row(F, a, b), shared_row(F, b, c), shared_row(F, a, c)}
                    if len(rows) == 3:
                        count += 1
    return count


def count_8_cycles_oracle(fm):
    """Quadrilaterals in the user-overlap graph, anchored at their minimum
    vertex, direction-deduplicated, with four distinct joining rows."""
    F = fm.matrix
    O = overlap_graph(F)
    K = F.shape[1]
    count = 0
    for a in range(K):
        nbrs = [v for v in range(a + 1, K) if O[a, v]]
        for b in nbrs:
            for c in range(a + 1, K):
                if c == b or not O[b, c]:
                    continue
                for d in nbrs:
                    if d <= b or d == c or not O[c, d]:
                        continue
                    rows = {shared_row(F, a, b), shared_row(F, b, c),
                            shared_row(F, c, d), shared_row(F, d, a)}
                    if len(rows) == 4:
                        count += 1
    return count


@pytest.mark.parametrize("gamma,rho,expected", [(3, 2, 8), (5, 2, 8), (7, 2, 8),
                                                (5, 3, 6), (5, 4, 6)])
def test_girth(gamma, rho, expected):
    assert euler.girth(mapping(gamma, rho)) == expected


def test_girth_none_for_forest():
    fm = euler.SparseMapping(gamma=3, rho=2, matrix=REFERENCE_MAPPING)
    sub = fm.matrix[:, [1, 5, 6, 8]]
    assert euler.girth(sub) is None


@pytest.mark.parametrize("gamma", [3, 5])
def test_count_8_cycles_closed_form(gamma):
    fm = mapping(gamma, 2)
    expected = gamma ** 2 * (gamma - 1) ** 2 // 4
    assert euler.count_cycles(fm, 8) == expected
    assert count_8_cycles_oracle(fm) == expected


def test_no_4_cycles():
    assert euler.count_cycles(mapping(3, 2), 4) == 0
    assert euler.count_cycles(mapping(5, 3), 4) == 0


def test_no_6_cycles_for_degree_2():
    assert euler.count_cycles(mapping(3, 2), 6) == 0


@pytest.mark.parametrize("gamma,rho", [(5, 3), (5, 4)])
def test_count_6_cycles_matches_oracle(gamma, rho):
    fm = mapping(gamma, rho)
    # the closed-form (gamma^3 (gamma-1)(rho-2)(rho-1) / 6) disagrees here;
    # the exhaustive enumerations are authoritative and must agree
    assert euler.count_cycles(fm, 6) == count_6_cycles_oracle(fm)


def test_count_cycles_budget():
    with pytest.raises(euler.BudgetExceededError):
        euler.count_cycles(mapping(7, 2), 8, max_ops=100)


def test_odd_length_counts_are_zero():
    assert euler.count_cycles(mapping(3, 2), 7) == 0


@pytest.mark.parametrize("gamma,rho", [(3, 2), (5, 4), (7, 2)])
def test_connectivity_formula_every_node(gamma, rho):
    fm = mapping(gamma, rho)
    expected = rho * (gamma - 1)
    assert all(euler.connectivity(fm, v) == expected for v in range(fm.n_users))


def test_connectivity_isolated_column():
    single = np.zeros((6, 1), dtype=np.uint8)
    single[0, 0] = 1
    assert euler.connectivity(euler.SparseMapping(gamma=3, rho=2, matrix=single)) == 0


# ---------------------------------------------------------------------------
# protograph


def test_protograph_reference_generators():
    fm = euler.SparseMapping(gamma=3, rho=2, matrix=REFERENCE_MAPPING)
    proto = euler.extract_protograph(fm)
    assert np.array_equal(proto.generators, [[0, 0], [1, 2], [2, 1]])


def test_protograph_identity_blocks():
    T = np.kron(np.ones((3, 2), dtype=np.uint8), np.eye(3, dtype=np.uint8))
    fm = euler.SparseMapping(gamma=3, rho=2, matrix=T.T.astype(np.uint8))
    assert (euler.extract_protograph(fm).generators == 0).all()


@pytest.mark.parametrize("gamma,rho", [(5, 2), (7, 3), (11, 2)])
def test_protograph_round_trip(gamma, rho):
    fm = mapping(gamma, rho)
    proto = euler.extract_protograph(fm)
    assert np.array_equal(euler.expand_protograph(proto), fm.matrix.T)


def test_protograph_rejects_non_cpm():
    bad = REFERENCE_MAPPING.copy()
    bad[:, 0], bad[:, 3] = REFERENCE_MAPPING[:, 3].copy(), REFERENCE_MAPPING[:, 0].copy()
    with pytest.raises(euler.CpmStructureError):
        euler.extract_protograph(euler.SparseMapping(gamma=3, rho=2, matrix=bad))


# ---------------------------------------------------------------------------
# partial geometry


@pytest.mark.parametrize("gamma,rho", [(3, 2), (5, 4), (7, 2)])
def test_partial_geometry_axioms(gamma, rho):
    assert euler.check_partial_geometry(mapping(gamma, rho))


def test_partial_geometry_rejects_rc_violation():
    dup = REFERENCE_MAPPING.copy()
    dup[:, 1] = dup[:, 0]
    assert not euler.check_partial_geometry(euler.SparseMapping(gamma=3, rho=2, matrix=dup))


# ---------------------------------------------------------------------------
# export formats


def test_triplet_round_trip(tmp_path):
    fm = mapping(5, 2)
    path = tmp_path / "f.txt"
    euler.write_triplets(fm, path)
    back = euler.read_triplets(path)
    assert back.gamma == 5 and back.rho == 2
    assert np.array_equal(back.matrix, fm.matrix)


def test_dense_round_trip(tmp_path):
    fm = mapping(3, 2)
    path = tmp_path / "f.txt"
    euler.write_dense(fm, path)
    back = euler.read_dense(path)
    assert np.array_equal(back.matrix, fm.matrix)


def test_dense_read_validates_shape(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("3 2\n0 1\n")
    with pytest.raises(euler.ParameterError):
        euler.read_dense(path)
