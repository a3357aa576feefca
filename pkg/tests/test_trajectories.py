import numpy as np
import pytest

from clusterchain.dynamics.lindblad import build_superoperator, evolve
from clusterchain.dynamics.trajectories import ensemble, run_trajectory
from clusterchain.errors import CapExceededError, DimensionError
from clusterchain.operators.dense import (
    BasisKind,
    ClusterStateSpec,
    edge_superposition_state,
    expectation,
    prepare_cluster_state,
)
from clusterchain.operators.model import ChainModel
from clusterchain.operators.pauli import PauliString

TIMES = np.linspace(0.0, 10.0, 41)


def test_same_seed_same_trajectory() -> None:
    m = ChainModel(n=6, kappa=1.0, jump_kind="Y", v_xx=0.2)
    psi = edge_superposition_state(6)
    a = run_trajectory(m, psi, 10.0, TIMES, seed=11)
    b = run_trajectory(m, psi, 10.0, TIMES, seed=11)
    assert a.jump_events == b.jump_events
    for name in a.samples:
        assert np.array_equal(a.samples[name], b.samples[name])
    c = run_trajectory(m, psi, 10.0, TIMES, seed=12)
    assert c.jump_events != a.jump_events


def test_weak_symmetry_values_jump_between_signs() -> None:
    m = ChainModel(n=6, kappa=1.0, jump_kind="Y")
    result = ensemble(m, edge_superposition_state(6), 10.0, TIMES, n_traj=5, base_seed=0)
    level = 1 / np.sqrt(3)
    flipped = False
    for rec in result.records:
        for name in ("X_1Z_2", "Y_1Z_2", "Z_1"):
            values = rec.samples[name]
            assert np.allclose(np.abs(values), level, atol=1e-9)
            flipped |= bool(np.any(values < 0))
    assert flipped


def test_strong_symmetry_sample_is_constant() -> None:
    m = ChainModel(n=6, kappa=1.0)
    psi = edge_superposition_state(6, (0.0, 0.0, 1.0))
    rec = run_trajectory(m, psi, 10.0, TIMES, seed=3)
    assert rec.jump_count > 0
    assert np.allclose(rec.samples["Z_1"], 1.0, atol=1e-10)


def test_sxminus_edge_value_is_not_frozen() -> None:
    m = ChainModel(n=6, kappa=1.0, jump_kind="SxMinus")
    psi = edge_superposition_state(6)
    rec = run_trajectory(m, psi, 10.0, TIMES, seed=5)
    assert np.ptp(rec.samples["X_1Z_2"]) > 1e-3


def test_jump_log_rows() -> None:
    m = ChainModel(n=4, kappa=2.0, jump_kind="Y")
    psi = prepare_cluster_state(ClusterStateSpec.all_plus(BasisKind.EDGE_MODE, 4))
    result = ensemble(m, psi, 5.0, [0.0, 5.0], n_traj=3, base_seed=100)
    rows = result.jump_log_rows()
    assert len(rows) == sum(rec.jump_count for rec in result.records)
    assert {row[1] for row in rows} <= {100, 101, 102}


def test_sample_times_outside_window() -> None:
    m = ChainModel(n=4, kappa=1.0)
    psi = prepare_cluster_state(ClusterStateSpec.all_plus(BasisKind.EDGE_MODE, 4))
    with pytest.raises(DimensionError):
        run_trajectory(m, psi, 1.0, [0.0, 2.0], seed=0)


def test_pure_state_cap_is_passed_through() -> None:
    m = ChainModel(n=6, kappa=1.0)
    psi = edge_superposition_state(6)
    with pytest.raises(CapExceededError):
        ensemble(m, psi, 1.0, [0.0, 1.0], n_traj=1, base_seed=0, cap=4)
    with pytest.raises(CapExceededError):
        prepare_cluster_state(ClusterStateSpec.all_plus(BasisKind.EDGE_MODE, 6), cap=4)
    rec = run_trajectory(m, psi, 1.0, [0.0, 1.0], seed=0, cap=6)
    assert rec.jump_count >= 0


@pytest.mark.slow
def test_ensemble_mean_matches_lindblad() -> None:
    m = ChainModel(n=4, kappa=0.5, jump_kind="SxMinus")
    psi = edge_superposition_state(4)
    times = [0.0, 0.5, 1.0, 2.0]
    result = ensemble(m, psi, 2.0, times, n_traj=400, base_seed=0, threads=2)
    exact = evolve(build_superoperator(m), psi.density(), times)
    for name in ("Z_1", "X_1Z_2"):
        op = {"Z_1": "ZIII", "X_1Z_2": "XZII"}[name]
        for k, rho in enumerate(exact):
            value = expectation(rho, PauliString.from_label(op))
            bound = 4 * result.stderr[name][k] + 1e-3
            assert abs(result.mean[name][k] - value) <= bound
