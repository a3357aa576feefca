import numpy as np
import pytest

from clusterchain.errors import CapExceededError, DegenerateInputError, DimensionError
from clusterchain.operators.dense import (
    BasisKind,
    ClusterStateSpec,
    DensityMatrix,
    edge_superposition_state,
    expectation,
    materialize,
    partial_trace,
    prepare_cluster_state,
    schmidt_values,
    stabilizer_generators,
    string_order,
)
from clusterchain.operators.model import edge_mode_operators
from clusterchain.operators.pauli import PauliSum


def test_cluster_state_is_stabilized() -> None:
    spec = ClusterStateSpec(BasisKind.EDGE_MODE, (1, -1, 1, 1, -1, 1))
    psi = prepare_cluster_state(spec)
    for sign, generator in zip(spec.signs, stabilizer_generators(spec.basis_kind, 6)):
        assert expectation(psi, generator) == pytest.approx(sign, abs=1e-12)


def test_string_order_and_half_cut_spectrum() -> None:
    psi = prepare_cluster_state(ClusterStateSpec.all_plus(BasisKind.EDGE_MODE, 6))
    assert abs(string_order(psi)) == pytest.approx(1.0, abs=1e-12)
    values = schmidt_values(psi.amplitudes, 6, 3)
    assert values[:2] == pytest.approx([0.5, 0.5], abs=1e-12)
    assert values[2:].sum() == pytest.approx(0.0, abs=1e-12)


def test_materialize_matches_apply() -> None:
    op = PauliSum.parse("0.3*XZY; -1*ZZI; 0.5*IYX")
    rng = np.random.default_rng(3)
    vec = rng.normal(size=8) + 1j * rng.normal(size=8)
    dense = materialize(op)
    assert np.allclose(dense, dense.conj().T)
    rho = DensityMatrix.from_matrix(np.outer(vec, vec.conj()), 3)
    assert expectation(rho, op) == pytest.approx(np.real(np.trace(dense @ rho.entries)))


def test_edge_superposition_bloch_vector() -> None:
    n = 6
    psi = edge_superposition_state(n, (0.0, 0.0, 1.0))
    edge = edge_mode_operators(n, "left")
    assert [expectation(psi, edge[a]) for a in "xyz"] == pytest.approx([0.0, 0.0, 1.0], abs=1e-12)
    psi = edge_superposition_state(n, (1.0, 1.0, 1.0))
    expected = [1 / np.sqrt(3)] * 3
    assert [expectation(psi, edge[a]) for a in "xyz"] == pytest.approx(expected, abs=1e-12)


def test_partial_trace_of_product_state() -> None:
    psi = prepare_cluster_state(ClusterStateSpec.all_plus(BasisKind.EDGE_MODE, 4))
    reduced = partial_trace(psi.density(), [1])
    assert reduced.is_physical()
    assert np.allclose(reduced.entries, np.eye(2) / 2)


def test_invalid_inputs() -> None:
    with pytest.raises(DimensionError):
        ClusterStateSpec(BasisKind.EDGE_MODE, (1, 1, 1))
    with pytest.raises(ValueError):
        ClusterStateSpec(BasisKind.EDGE_MODE, (1, 0, 1, 1))
    with pytest.raises(DegenerateInputError):
        edge_superposition_state(4, (0.0, 0.0, 0.0))
    with pytest.raises(CapExceededError):
        materialize(PauliSum.identity(16))
