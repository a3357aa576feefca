import numpy as np
import pytest

from clusterchain.dynamics.trajectories import TrajectoryRecord, ensemble
from clusterchain.errors import AmbiguousSyndromeError, ProtocolError
from clusterchain.operators.dense import StateVector, apply_operator, edge_superposition_state, expectation
from clusterchain.operators.model import ChainModel
from clusterchain.operators.pauli import PauliString
from clusterchain.protocols.qubits import flip_signs, weak_qubit_observables
from clusterchain.protocols.syndrome import SyndromeDecoder, syndrome_observables


def _record(m: ChainModel, jumps: list[tuple[float, int]], times: list[float]) -> TrajectoryRecord:
    """Hand-built trajectory: unitary drift is trivial on stabilizer eigenvalues, so only jumps matter."""
    observables = syndrome_observables(m.n) | weak_qubit_observables(m.n)
    psi = edge_superposition_state(m.n)
    record = TrajectoryRecord(seed=0, sample_times=np.asarray(times), jump_events=list(jumps))
    record.samples = {name: np.empty(len(times)) for name in observables}
    pending = list(jumps)
    for k, t in enumerate(times):
        while pending and pending[0][0] <= t:
            _, channel = pending.pop(0)
            jump = PauliString.single(m.n, channel + 1, "Y")
            psi = StateVector.normalized(apply_operator(jump, psi.amplitudes), m.n)
        for name, op in observables.items():
            record.samples[name][k] = expectation(psi, op)
    return record


def test_short_chain_is_ambiguous() -> None:
    with pytest.raises(AmbiguousSyndromeError):
        SyndromeDecoder(ChainModel(n=4, kappa=1.0, jump_kind="Y"))


def test_single_jumps_decode_to_their_flip() -> None:
    decoder = SyndromeDecoder(ChainModel(n=6, kappa=1.0, jump_kind="Y"))
    assert decoder.syndromes == [0b0001, 0b0011, 0b0111, 0b1110, 0b1100, 0b1000]
    assert decoder.decode(decoder.syndromes[0]) == 0b11
    assert decoder.decode(decoder.syndromes[1]) == 0b01
    assert decoder.decode(decoder.syndromes[3]) == 0
    assert decoder.decode(0) == 0


def test_two_jump_syndromes() -> None:
    decoder = SyndromeDecoder(ChainModel(n=6, kappa=1.0, jump_kind="Y"))
    # Y1 Y6 looks like Y3 Y4, Y1 Y2 like Y4 Y5
    for syndrome in (0b1001, 0b0010):
        with pytest.raises(AmbiguousSyndromeError):
            decoder.decode(syndrome)


def test_ziz_jumps_decode() -> None:
    decoder = SyndromeDecoder(ChainModel(n=6, kappa=1.0))
    assert len(set(decoder.syndromes)) == len(decoder.syndromes)


def test_decoded_signs_match_the_jump_log() -> None:
    m = ChainModel(n=6, kappa=1.0, jump_kind="Y")
    record = _record(m, [(0.5, 0), (1.5, 3), (2.5, 1)], [0.0, 1.0, 2.0, 3.0])
    decoder = SyndromeDecoder(m)
    decoded = decoder.flip_signs(record)
    assert decoded == pytest.approx(flip_signs(record, m))
    assert decoded[-1] == pytest.approx([1.0, -1.0, -1.0])


def test_decoder_on_simulated_trajectories() -> None:
    m = ChainModel(n=6, kappa=0.05, jump_kind="Y")
    times = np.linspace(0.0, 4.0, 801)
    observables = syndrome_observables(6) | weak_qubit_observables(6)
    result = ensemble(m, edge_superposition_state(6), 4.0, times, 4, base_seed=3, observables=observables)
    decoder = SyndromeDecoder(m)
    for rec in result.records:
        assert decoder.flip_signs(rec) == pytest.approx(flip_signs(rec, m))


def test_stabilizer_samples_are_required() -> None:
    m = ChainModel(n=6, kappa=1.0, jump_kind="Y")
    record = TrajectoryRecord(seed=0, sample_times=np.array([0.0]))
    with pytest.raises(ProtocolError):
        SyndromeDecoder(m).measured_syndromes(record)
    with pytest.raises(ProtocolError):
        SyndromeDecoder(ChainModel(n=6, kappa=1.0, jump_kind="SxMinus"))
