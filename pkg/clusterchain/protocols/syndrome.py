"""Edge-qubit correction decoded from measured bulk stabilizers instead of the jump log."""
from __future__ import annotations

import logging
from itertools import combinations

import numpy as np

from clusterchain.dynamics.trajectories import TrajectoryRecord
from clusterchain.errors import AmbiguousSyndromeError, ProtocolError
from clusterchain.operators.model import ChainModel, build_jumps, cluster_operator, edge_mode_operators
from clusterchain.operators.pauli import PauliString

log = logging.getLogger(__name__)

_SIGN_THRESHOLD = 0.5


def syndrome_observables(n: int) -> dict[str, PauliString]:
    return {f"K_{site}": cluster_operator(n, site) for site in range(2, n)}


def _action_signs(action: int) -> np.ndarray:
    flip_x, flip_z = action & 1, action >> 1 & 1
    return 1.0 - 2.0 * np.array([flip_x, flip_x ^ flip_z, flip_z], dtype=float)


class SyndromeDecoder:
    """Lookup table from K_l flip patterns to the edge-qubit sign correction.

    Actions are two-bit masks: bit 0 flips the x component, bit 1 the z component.
    """

    def __init__(self, m: ChainModel, side: str = "left", max_weight: int = 2):
        self.model = m
        self.side = side
        self.max_weight = max_weight
        stabilizers = list(syndrome_observables(m.n).values())
        edge = edge_mode_operators(m.n, side)
        self.syndromes: list[int] = []
        self.actions: list[int] = []
        for channel, jump in enumerate(build_jumps(m)):
            single = jump.single_string()
            if single is None:
                raise ProtocolError(f"syndrome decoding needs Pauli-string jumps, channel {channel} is {jump.label()}")
            string = single[1]
            self.syndromes.append(
                sum(1 << i for i, k in enumerate(stabilizers) if string.anticommutes(k))
            )
            self.actions.append(int(string.anticommutes(edge["x"])) | int(string.anticommutes(edge["z"])) << 1)
        self.table: dict[int, int] = {0: 0}
        for channel, (syndrome, action) in enumerate(zip(self.syndromes, self.actions)):
            known = self.table.get(syndrome)
            if known is not None and known != action:
                raise AmbiguousSyndromeError(
                    f"channel {channel} shares syndrome {syndrome:b} with a channel of different edge action"
                )
            self.table[syndrome] = action
        log.debug("syndrome table for N=%d %s: %d entries", m.n, side, len(self.table))

    def decode(self, syndrome: int) -> int:
        """Edge action of the lowest-weight jump combination producing ``syndrome``."""
        if syndrome in self.table:
            return self.table[syndrome]
        channels = range(len(self.syndromes))
        for weight in range(2, self.max_weight + 1):
            found = set()
            for combo in combinations(channels, weight):
                total = action = 0
                for c in combo:
                    total ^= self.syndromes[c]
                    action ^= self.actions[c]
                if total == syndrome:
                    found.add(action)
            if len(found) == 1:
                return found.pop()
            if found:
                raise AmbiguousSyndromeError(f"syndrome {syndrome:b} admits {len(found)} different edge corrections")
        raise AmbiguousSyndromeError(f"syndrome {syndrome:b} is not explained by up to {self.max_weight} jumps")

    def measured_syndromes(self, record: TrajectoryRecord) -> np.ndarray:
        names = list(syndrome_observables(self.model.n))
        missing = [name for name in names if name not in record.samples]
        if missing:
            raise ProtocolError(f"trajectory did not sample the stabilizers {missing}")
        values = np.column_stack([record.samples[name] for name in names])
        if np.any(np.abs(values) < _SIGN_THRESHOLD):
            raise ProtocolError("stabilizer samples are not sharp; the state left the stabilizer eigenspace")
        bits = (values < 0).astype(np.int64)
        return bits @ (1 << np.arange(len(names), dtype=np.int64))

    def flip_signs(self, record: TrajectoryRecord) -> np.ndarray:
        """Per-sample component signs for the edge triple, decoded between consecutive samples."""
        measured = self.measured_syndromes(record)
        out = np.ones((measured.size, 3))
        action = 0
        for k in range(1, measured.size):
            action ^= self.decode(int(measured[k] ^ measured[k - 1]))
            out[k] = _action_signs(action)
        return out
