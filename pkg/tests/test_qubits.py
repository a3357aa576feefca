import math

import numpy as np
import pytest
from scipy import stats

from clusterchain.dynamics.trajectories import ensemble
from clusterchain.errors import DimensionError, FitError, ProtocolError
from clusterchain.operators.dense import (
    BasisKind,
    ClusterStateSpec,
    DensityMatrix,
    StateVector,
    apply_operator,
    edge_superposition_state,
    materialize,
    prepare_cluster_state,
)
from clusterchain.operators.model import ChainModel, build_jumps, flip_symmetries, logical_triples
from clusterchain.operators.pauli import PauliString
from clusterchain.protocols.qubits import (
    BlochVector,
    RestorationLog,
    circuit_unitary,
    conjugate_through,
    edge_pair_observables,
    edge_pair_readout,
    fidelity,
    fidelity_traces,
    first_passage_and_fit,
    first_passage_times,
    fit_inverse_gaussian,
    jump_flip_rule,
    logical_basis_transform,
    logical_to_physical,
    monitored_channels,
    restore,
    strong_qubit_fidelity,
    strong_qubit_readout,
    weak_qubit_bloch,
    weak_qubit_observables,
)

DIAGONAL = (1 / math.sqrt(3),) * 3


def test_bloch_vector_rotation_and_bounds() -> None:
    v = BlochVector(0.1, 0.2, 0.3)
    assert v.rotated("x").as_array() == pytest.approx([0.1, -0.2, -0.3])
    assert v.rotated(None) is v
    assert np.trace(v.density()).real == pytest.approx(1.0)
    with pytest.raises(ProtocolError):
        BlochVector(1.0, 1.0, 0.0)


def test_flip_rule_for_y_jumps() -> None:
    n = 8
    assert jump_flip_rule(PauliString.single(n, 1, "Y")) == "y"
    assert jump_flip_rule(PauliString.single(n, 2, "Y")) == "z"
    assert jump_flip_rule(PauliString.single(n, 5, "Y")) is None
    assert jump_flip_rule(PauliString.single(n, n, "Y"), "right") == "y"
    assert jump_flip_rule(PauliString.single(n, n - 1, "Y"), "right") == "z"


def test_flip_rule_agrees_with_applying_the_jump() -> None:
    n = 6
    psi = edge_superposition_state(n)
    before = weak_qubit_bloch(psi)
    candidates = [PauliString.single(n, site, letter) for site in range(1, n + 1) for letter in "XYZ"]
    candidates += [PauliString.from_sites(n, {s - 1: "Z", s + 1: "Z"}) for s in range(2, n)]
    for jump in candidates:
        after = weak_qubit_bloch(StateVector.normalized(apply_operator(jump, psi.amplitudes), n))
        assert after.as_array() == pytest.approx(before.rotated(jump_flip_rule(jump)).as_array(), abs=1e-12)


def test_restoration_log_cancels_repeated_flips() -> None:
    log = RestorationLog()
    log.record("y")
    assert log.net_axis == "y"
    log.record("y")
    assert log.net_axis is None
    log.record("x")
    log.record("z")
    assert log.net_axis == "y"
    assert log.signs == pytest.approx([-1.0, 1.0, -1.0])


def test_sxminus_jumps_cannot_be_restored() -> None:
    m = ChainModel(n=6, kappa=1.0, jump_kind="SxMinus")
    with pytest.raises(ProtocolError):
        monitored_channels(m)


def test_restoration_recovers_the_initial_qubit() -> None:
    n = 6
    m = ChainModel(n=n, kappa=1.0, jump_kind="Y")
    times = np.linspace(0.0, 8.0, 33)
    observables = weak_qubit_observables(n, "left") | weak_qubit_observables(n, "right")
    result = ensemble(m, edge_superposition_state(n), 8.0, times, 6, base_seed=1, observables=observables)
    for rec in result.records:
        for vec in restore(rec, m):
            assert vec.as_array() == pytest.approx(DIAGONAL, abs=1e-9)
    traces = fidelity_traces(result, m, "left")
    assert np.allclose(traces.corrected, 1.0, atol=1e-9)
    assert traces.uncorrected.min() < 0.9
    mean, stderr = traces.summary()
    assert mean == pytest.approx(np.ones(times.size), abs=1e-9)
    assert stderr.shape == times.shape


def test_pair_mode_restoration() -> None:
    n = 6
    m = ChainModel(n=n, kappa=1.0, jump_kind="Y")
    times = np.linspace(0.0, 4.0, 9)
    result = ensemble(
        m, edge_superposition_state(n), 4.0, times, 3, base_seed=7, observables=edge_pair_observables(n)
    )
    traces = fidelity_traces(result, m, "pair")
    assert np.allclose(traces.corrected, 1.0, atol=1e-6)


def test_fidelity_traces_need_a_reference_sample() -> None:
    m = ChainModel(n=4, kappa=1.0, jump_kind="Y")
    result = ensemble(
        m, edge_superposition_state(4), 2.0, [0.5, 2.0], 1, 0, observables=weak_qubit_observables(4)
    )
    with pytest.raises(ProtocolError):
        fidelity_traces(result, m)


def test_fidelity_basics() -> None:
    up = np.diag([1.0, 0.0]).astype(complex)
    down = np.diag([0.0, 1.0]).astype(complex)
    mixed = np.eye(2, dtype=complex) / 2
    assert fidelity(up, up) == pytest.approx(1.0)
    assert fidelity(up, down) == pytest.approx(0.0, abs=1e-12)
    assert fidelity(up, mixed) == pytest.approx(0.5)
    rng = np.random.default_rng(2)
    a, b = (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(2))
    rho, sigma = a @ a.conj().T, b @ b.conj().T
    rho, sigma = rho / np.trace(rho), sigma / np.trace(sigma)
    assert fidelity(rho, sigma) == pytest.approx(fidelity(sigma, rho), abs=1e-10)
    with pytest.raises(DimensionError):
        fidelity(up, np.eye(4))
    with pytest.raises(ProtocolError):
        fidelity(up, np.diag([1.5, -0.5]))


def test_strong_qubits_survive_ziz_dissipation() -> None:
    n = 4
    m = ChainModel(n=n, kappa=1.0)
    rho0 = edge_superposition_state(n).density()
    readout = strong_qubit_readout(rho0)
    assert readout.d[0, 0] == pytest.approx(1.0)
    assert readout.is_physical()
    values = strong_qubit_fidelity(m, rho0, [0.0, 5.0, 40.0], method="expm")
    assert values == pytest.approx([1.0, 1.0, 1.0], abs=1e-6)


def test_edge_pair_readout_of_cluster_state() -> None:
    psi = prepare_cluster_state(ClusterStateSpec.all_plus(BasisKind.EDGE_MODE, 6))
    d = edge_pair_readout(psi)
    assert d[0, 0] == 1.0
    assert d[1, 0] == pytest.approx(1.0)
    assert d[0, 1] == pytest.approx(1.0)
    assert d[1, 1] == pytest.approx(1.0)
    assert d[3, 3] == pytest.approx(0.0, abs=1e-12)


def test_first_passage_interpolates() -> None:
    samples, censored = first_passage_times([0.0, 1.0, 2.0], [[1.0, 0.8, 0.7], [1.0, 0.9, 0.9]])
    assert samples == pytest.approx([1.5])
    assert censored == 1


def test_inverse_gaussian_fit_recovers_parameters() -> None:
    mu, lam = 100.0, 50.0
    rng = np.random.default_rng(0)
    draws = stats.invgauss(mu / lam, scale=lam).rvs(size=10_000, random_state=rng)
    fit = fit_inverse_gaussian(draws)
    assert fit.mu == pytest.approx(mu, rel=0.05)
    assert fit.lam == pytest.approx(lam, rel=0.05)
    assert fit.ks_distance < 0.02
    assert not fit.degenerate


def test_inverse_gaussian_edge_cases() -> None:
    fit = fit_inverse_gaussian([5.0] * 200)
    assert fit.degenerate and math.isinf(fit.lam)
    with pytest.raises(FitError):
        fit_inverse_gaussian([1.0] * 10)
    with pytest.raises(FitError):
        fit_inverse_gaussian([0.0] + [1.0] * 150)
    result = first_passage_and_fit([0.0, 1.0], [[1.0, 0.5]] * 5)
    assert result.fit is None
    assert result.crossing_fraction == 1.0


@pytest.mark.parametrize("n", [4, 6])
def test_logical_basis_circuit(n: int) -> None:
    gates = logical_basis_transform(n)
    g_odd, g_even = flip_symmetries(n)
    images = {
        g_odd.key: PauliString.single(n, 1, "X"),
        g_even.key: PauliString.single(n, 2, "X"),
        PauliString.single(n, 1, "Z").key: PauliString.single(n, 1, "Z"),
        PauliString.single(n, n, "Z").key: PauliString.single(n, 2, "Z"),
    }
    for source in (g_odd, g_even, PauliString.single(n, 1, "Z"), PauliString.single(n, n, "Z")):
        image = conjugate_through(gates, source)
        assert image.key == images[source.key].key
        assert image.phase_exp == images[source.key].phase_exp
    u = circuit_unitary(gates, n)
    for label in ("Y" + "X" * (n - 1), "Z" + "Y" * (n - 1)):
        p = PauliString.from_label(label)
        expected = u @ materialize(p) @ u.T
        assert np.allclose(materialize(conjugate_through(gates, p)), expected)


def test_logical_to_physical_matches_strong_triples() -> None:
    n = 8
    odd, even = logical_triples(n)
    for axis, letter in (("x", "X"), ("y", "Y"), ("z", "Z")):
        physical = logical_to_physical(n, letter, "I")
        assert physical.key == odd[axis].key
        assert physical.phase_exp == odd[axis].phase_exp
    assert logical_to_physical(n, "I", "Z").key == even["z"].key
    with pytest.raises(DimensionError):
        logical_basis_transform(5)


def test_y_jump_channels_on_the_edges() -> None:
    m = ChainModel(n=6, kappa=1.0, jump_kind="Y")
    assert monitored_channels(m) == {0: "y", 1: "z"}
    assert monitored_channels(m, "right") == {4: "z", 5: "y"}
    assert len(build_jumps(m)) == 6


def test_mixed_state_bloch_vector() -> None:
    rho = DensityMatrix.fully_mixed(4)
    assert weak_qubit_bloch(rho).norm == pytest.approx(0.0)
