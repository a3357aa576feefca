"""Strong and weak logical qubits, jump-monitored restoration and first-passage statistics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from clusterchain.dynamics.lindblad import build_superoperator, evolve
from clusterchain.dynamics.trajectories import EnsembleResult, TrajectoryRecord
from clusterchain.errors import DimensionError, FitError, NumericalError, ProtocolError
from clusterchain.operators.dense import DensityMatrix, StateVector, expectation
from clusterchain.operators.model import ChainModel, build_jumps, edge_mode_operators, logical_triples
from clusterchain.operators.pauli import PauliString, PauliSum, site_bit

log = logging.getLogger(__name__)

FIDELITY_THRESHOLD = 0.75
MIN_FIT_SAMPLES = 100
_PSD_TOLERANCE = 1e-8
_AXES = ("x", "y", "z")
_TRIPLE_NAMES = {
    "left": ("X_1Z_2", "Y_1Z_2", "Z_1"),
    "right": ("Z_{N-1}X_N", "Z_{N-1}Y_N", "Z_N"),
}
_SIGMA = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]]),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
# (anticommutes with x, anticommutes with z) -> pi-rotation axis
_FLIP_AXIS = {(False, False): None, (False, True): "x", (True, False): "z", (True, True): "y"}


def _edge_sites(n: int, side: str) -> frozenset[int]:
    if side == "left":
        return frozenset({1, 2})
    if side == "right":
        return frozenset({n - 1, n})
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


# ---- Bloch vectors ---------------------------------------------------------


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if self.norm > 1.0 + 1e-10:
            raise ProtocolError(f"Bloch vector ({self.x}, {self.y}, {self.z}) is longer than 1")

    @property
    def norm(self) -> float:
        return math.sqrt(self.x**2 + self.y**2 + self.z**2)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def density(self) -> np.ndarray:
        return 0.5 * (_SIGMA[0] + self.x * _SIGMA[1] + self.y * _SIGMA[2] + self.z * _SIGMA[3])

    def rotated(self, axis: str | None) -> BlochVector:
        """pi-rotation about ``axis``; the other two components change sign."""
        if axis is None:
            return self
        signs = [1.0 if a == axis else -1.0 for a in _AXES]
        return BlochVector(self.x * signs[0], self.y * signs[1], self.z * signs[2])


def weak_qubit_observables(n: int, side: str = "left") -> dict[str, PauliString]:
    ops = edge_mode_operators(n, side)
    return dict(zip(_TRIPLE_NAMES[side], (ops["x"], ops["y"], ops["z"])))


def edge_pair_observables(n: int) -> dict[str, PauliString]:
    """The 15 non-trivial products of the left and right edge triples, keyed ``L<a>.R<b>``."""
    left = {"I": PauliString.identity(n), **edge_mode_operators(n, "left")}
    right = {"I": PauliString.identity(n), **edge_mode_operators(n, "right")}
    out = {}
    for a, lop in left.items():
        for b, rop in right.items():
            if a == b == "I":
                continue
            out[f"L{a}.R{b}"] = lop * rop
    return out


def weak_qubit_bloch(psi: StateVector | DensityMatrix, side: str = "left") -> BlochVector:
    ops = edge_mode_operators(psi.n, side)
    return BlochVector(*(float(np.real(expectation(psi, ops[a]))) for a in _AXES))


def _qubit_fidelity(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Closed-form Uhlmann fidelity between one-qubit states with Bloch vectors u and v."""
    uu = np.clip(1.0 - np.sum(u * u, axis=-1), 0.0, None)
    vv = np.clip(1.0 - np.sum(v * v, axis=-1), 0.0, None)
    return np.clip(0.5 * (1.0 + np.sum(u * v, axis=-1) + np.sqrt(uu * vv)), 0.0, 1.0)


# ---- flip rule and restoration --------------------------------------------


def _as_string(jump: PauliString | PauliSum) -> PauliString:
    if isinstance(jump, PauliString):
        return jump
    single = jump.single_string()
    if single is None:
        raise ProtocolError(f"restoration is defined for Pauli-string jumps, got {jump.label()}")
    return single[1]


def _flip_bits(jump: PauliString, side: str) -> tuple[bool, bool]:
    ops = edge_mode_operators(jump.n, side)
    return jump.anticommutes(ops["x"]), jump.anticommutes(ops["z"])


def jump_flip_rule(jump: PauliString | PauliSum, side: str = "left") -> str | None:
    """Axis of the pi-rotation a Pauli jump applies to the edge qubit, or None."""
    return _FLIP_AXIS[_flip_bits(_as_string(jump), side)]


@dataclass
class RestorationLog:
    """Net pi-rotation accumulated from monitored jumps, as sign-flip parities of each component."""

    flip_x: int = 0
    flip_y: int = 0
    flip_z: int = 0
    events: int = 0

    def record(self, axis: str | None) -> None:
        self.events += 1
        if axis is None:
            return
        for a in _AXES:
            if a != axis:
                setattr(self, f"flip_{a}", getattr(self, f"flip_{a}") ^ 1)

    @property
    def net_axis(self) -> str | None:
        # flip_y is always flip_x XOR flip_z
        return _FLIP_AXIS[(bool(self.flip_x), bool(self.flip_z))]

    @property
    def signs(self) -> np.ndarray:
        return 1.0 - 2.0 * np.array([self.flip_x, self.flip_y, self.flip_z], dtype=float)


def monitored_channels(m: ChainModel, side: str = "left") -> dict[int, str | None]:
    """Jump channels acting on the edge sites, mapped to their flip axis."""
    edge = _edge_sites(m.n, side)
    out = {}
    for channel, jump in enumerate(build_jumps(m)):
        string = _as_string(jump)
        if edge.intersection(string.support):
            out[channel] = jump_flip_rule(string, side)
    return out


def flip_signs(record: TrajectoryRecord, m: ChainModel, side: str = "left") -> np.ndarray:
    """Per-sample component signs (n_samples x 3) undoing the jumps seen up to each sample time."""
    channels = monitored_channels(m, side)
    events = [(t, channels[c]) for t, c in record.jump_events if c in channels]
    times = record.sample_times
    out = np.ones((times.size, 3))
    restoration = RestorationLog()
    i = 0
    for k, t in enumerate(times):
        while i < len(events) and events[i][0] <= t:
            restoration.record(events[i][1])
            i += 1
        out[k] = restoration.signs
    log.debug("restoration (%s) used %d of %d jumps", side, len(events), record.jump_count)
    return out


def _triple_samples(record: TrajectoryRecord, side: str) -> np.ndarray:
    names = _TRIPLE_NAMES[side]
    missing = [name for name in names if name not in record.samples]
    if missing:
        raise ProtocolError(f"trajectory did not sample the {side} edge triple: missing {missing}")
    return np.column_stack([record.samples[name] for name in names])


def restore(record: TrajectoryRecord, m: ChainModel, side: str = "left") -> list[BlochVector]:
    """Measured Bloch vectors with the monitored jumps undone at every sample time."""
    if record.jump_events is None:
        raise ProtocolError("restoration needs the jump log of the trajectory")
    corrected = _triple_samples(record, side) * flip_signs(record, m, side)
    return [BlochVector(*np.clip(row, -1.0, 1.0)) for row in corrected]


# ---- strong qubits and two-qubit states ------------------------------------


def two_qubit_density(d: np.ndarray) -> np.ndarray:
    """(1/4) sum d_ij sigma_i (x) sigma_j."""
    d = np.asarray(d, dtype=float)
    if d.shape != (4, 4):
        raise DimensionError(f"two-qubit coefficients must be 4x4, got {d.shape}")
    out = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        for j in range(4):
            if d[i, j]:
                out += d[i, j] * np.kron(_SIGMA[i], _SIGMA[j])
    return 0.25 * out


@dataclass(frozen=True)
class StrongQubitState:
    d: np.ndarray

    def density(self) -> np.ndarray:
        return two_qubit_density(self.d)

    def is_physical(self, atol: float = _PSD_TOLERANCE) -> bool:
        return bool(np.linalg.eigvalsh(self.density()).min() >= -atol)


def _triple_list(triple: Mapping[str, PauliString], n: int) -> list[PauliString]:
    return [PauliString.identity(n), *(triple[a] for a in _AXES)]


def strong_qubit_readout(state: DensityMatrix | StateVector) -> StrongQubitState:
    """d_ij = Tr[rho S^i_o S^j_e] over the two strongly conserved spin triples."""
    n = state.n
    odd, even = logical_triples(n)
    d = np.empty((4, 4))
    for i, so in enumerate(_triple_list(odd, n)):
        for j, se in enumerate(_triple_list(even, n)):
            d[i, j] = float(np.real(expectation(state, so * se)))
    readout = StrongQubitState(d)
    if not readout.is_physical():
        raise NumericalError("strong-qubit readout is not positive semidefinite")
    return readout


def edge_pair_readout(state: DensityMatrix | StateVector) -> np.ndarray:
    """Joint coefficients of the left and right edge qubits, in the same layout as StrongQubitState.d."""
    d = np.zeros((4, 4))
    d[0, 0] = 1.0
    for name, op in edge_pair_observables(state.n).items():
        i, j = _pair_index(name)
        d[i, j] = float(np.real(expectation(state, op)))
    return d


def _pair_index(name: str) -> tuple[int, int]:
    order = "Ixyz"
    left, right = name.split(".")
    return order.index(left[1]), order.index(right[1])


def fidelity(rho: np.ndarray | DensityMatrix, sigma: np.ndarray | DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    a = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    b = sigma.entries if isinstance(sigma, DensityMatrix) else np.asarray(sigma, dtype=complex)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise DimensionError(f"fidelity between shapes {a.shape} and {b.shape}")
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    if w.min() < -_PSD_TOLERANCE or np.linalg.eigvalsh(0.5 * (b + b.conj().T)).min() < -_PSD_TOLERANCE:
        raise ProtocolError("fidelity needs positive semidefinite inputs")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    product = root @ b @ root
    inner = np.linalg.eigvalsh(0.5 * (product + product.conj().T))
    value = float(np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2)
    return min(max(value, 0.0), 1.0)


def strong_qubit_fidelity(
    m: ChainModel, rho0: DensityMatrix, times: Sequence[float], method: str = "auto"
) -> np.ndarray:
    """Fidelity of the strong two-qubit state at each time against its initial value."""
    states = evolve(build_superoperator(m), rho0, times, method)
    reference = strong_qubit_readout(rho0).density()
    return np.array([fidelity(strong_qubit_readout(rho).density(), reference) for rho in states])


# ---- ensemble fidelity traces ----------------------------------------------


@dataclass(frozen=True)
class FidelityTraces:
    """Per-trajectory fidelity on the sample grid, with and without restoration."""

    times: np.ndarray
    corrected: np.ndarray
    uncorrected: np.ndarray
    mode: str

    def summary(self, corrected: bool = True) -> tuple[np.ndarray, np.ndarray]:
        data = self.corrected if corrected else self.uncorrected
        n_traj = data.shape[0]
        stderr = data.std(axis=0, ddof=1) / math.sqrt(n_traj) if n_traj > 1 else np.zeros(data.shape[1])
        return data.mean(axis=0), stderr


def _single_side_traces(record: TrajectoryRecord, m: ChainModel, side: str) -> tuple[np.ndarray, np.ndarray]:
    raw = _triple_samples(record, side)
    corrected = raw * flip_signs(record, m, side)
    reference = raw[0]
    return _qubit_fidelity(corrected, reference), _qubit_fidelity(raw, reference)


def _pair_traces(record: TrajectoryRecord, m: ChainModel) -> tuple[np.ndarray, np.ndarray]:
    names = list(edge_pair_observables(m.n))
    missing = [name for name in names if name not in record.samples]
    if missing:
        raise ProtocolError(f"trajectory did not sample the edge-pair correlators: missing {missing[:3]}")
    left = np.hstack([np.ones((record.sample_times.size, 1)), flip_signs(record, m, "left")])
    right = np.hstack([np.ones((record.sample_times.size, 1)), flip_signs(record, m, "right")])
    n_samples = record.sample_times.size
    raw = np.zeros((n_samples, 4, 4))
    raw[:, 0, 0] = 1.0
    for name in names:
        i, j = _pair_index(name)
        raw[:, i, j] = record.samples[name]
    corrected = raw * left[:, :, None] * right[:, None, :]
    reference = two_qubit_density(raw[0])
    fixed = np.array([fidelity(_project_psd(two_qubit_density(d)), reference) for d in corrected])
    plain = np.array([fidelity(_project_psd(two_qubit_density(d)), reference) for d in raw])
    return fixed, plain


def _project_psd(matrix: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(matrix)
    return (v * np.clip(w, 0.0, None)) @ v.conj().T


def fidelity_traces(
    result: EnsembleResult, m: ChainModel, mode: str = "left", threads: int = 1
) -> FidelityTraces:
    """Weak-qubit fidelity against each trajectory's own t = 0 sample."""
    if not result.records:
        raise ProtocolError("fidelity traces need the trajectory records")
    if result.times.size == 0 or result.times[0] != 0.0:
        raise ProtocolError("the sample grid must start at t = 0 to provide the reference state")
    if mode in ("left", "right"):
        def one(rec: TrajectoryRecord) -> tuple[np.ndarray, np.ndarray]:
            return _single_side_traces(rec, m, mode)
    elif mode == "pair":
        def one(rec: TrajectoryRecord) -> tuple[np.ndarray, np.ndarray]:
            return _pair_traces(rec, m)
    else:
        raise ValueError(f"mode must be 'left', 'right' or 'pair', got {mode!r}")
    rows = Parallel(n_jobs=threads, prefer="threads")(delayed(one)(rec) for rec in result.records)
    corrected = np.vstack([r[0] for r in rows])
    uncorrected = np.vstack([r[1] for r in rows])
    return FidelityTraces(result.times, corrected, uncorrected, mode)


# ---- first passage ---------------------------------------------------------


@dataclass(frozen=True)
class InverseGaussianFit:
    mu: float
    lam: float
    ks_distance: float
    ks_pvalue: float
    n_samples: int
    degenerate: bool = False


@dataclass(frozen=True)
class FirstPassage:
    samples: np.ndarray
    crossing_fraction: float
    fit: InverseGaussianFit | None


def first_passage_times(
    times: Sequence[float], traces: np.ndarray, threshold: float = FIDELITY_THRESHOLD
) -> tuple[np.ndarray, int]:
    """(crossing times, number of censored traces) for the first drop below ``threshold``."""
    times = np.asarray(times, dtype=float)
    traces = np.atleast_2d(np.asarray(traces, dtype=float))
    if traces.shape[1] != times.size:
        raise DimensionError(f"traces of width {traces.shape[1]} on {times.size} sample times")
    samples = []
    censored = 0
    for row in traces:
        below = np.nonzero(row < threshold)[0]
        if below.size == 0:
            censored += 1
            continue
        i = int(below[0])
        if i == 0:
            samples.append(float(times[0]))
            continue
        t0, t1, v0, v1 = times[i - 1], times[i], row[i - 1], row[i]
        samples.append(float(t0 + (threshold - v0) * (t1 - t0) / (v1 - v0)))
    return np.asarray(samples), censored


def fit_inverse_gaussian(samples: Iterable[float], min_samples: int = MIN_FIT_SAMPLES) -> InverseGaussianFit:
    """Maximum-likelihood mean and shape with the Kolmogorov-Smirnov distance to the fitted law."""
    t = np.asarray(list(samples), dtype=float)
    if t.size < min_samples:
        raise FitError(f"inverse-Gaussian fit needs at least {min_samples} samples, got {t.size}")
    if np.any(t <= 0):
        raise FitError("first-passage samples must be positive")
    mu = float(t.mean())
    spread = float(np.sum(1.0 / t - 1.0 / mu))
    if spread <= 1e-12 * t.size / mu:
        log.warning("first-passage samples are all equal to %.6g; shape parameter diverges", mu)
        return InverseGaussianFit(mu, math.inf, math.nan, math.nan, int(t.size), degenerate=True)
    lam = t.size / spread
    ks = stats.kstest(t, stats.invgauss(mu / lam, scale=lam).cdf)
    return InverseGaussianFit(mu, float(lam), float(ks.statistic), float(ks.pvalue), int(t.size))


def first_passage_and_fit(
    times: Sequence[float],
    traces: np.ndarray,
    threshold: float = FIDELITY_THRESHOLD,
    min_samples: int = MIN_FIT_SAMPLES,
) -> FirstPassage:
    samples, censored = first_passage_times(times, traces, threshold)
    total = samples.size + censored
    fraction = samples.size / total if total else 0.0
    if censored:
        log.warning(
            "%d of %d traces never dropped below %.3g (crossing fraction %.3f)", censored, total, threshold, fraction
        )
    fit = fit_inverse_gaussian(samples, min_samples) if samples.size >= min_samples else None
    if fit is None:
        log.warning("only %d first-passage samples, skipping the inverse-Gaussian fit", samples.size)
    return FirstPassage(samples, fraction, fit)


# ---- logical basis circuit -------------------------------------------------


@dataclass(frozen=True)
class Gate:
    name: str
    sites: tuple[int, int]


def logical_basis_transform(n: int) -> list[Gate]:
    """Controlled-X ladder and one swap mapping G_o, G_e to X on sites 1 and 2, in application order."""
    if n % 2 or n < 4:
        raise DimensionError(f"logical basis circuit needs an even N >= 4, got {n}")
    gates = [Gate("CX", (1, site)) for site in range(3, n, 2)]
    gates += [Gate("CX", (n, site)) for site in range(2, n, 2)]
    gates.append(Gate("SWAP", (n, 2)))
    return gates


def _conjugate_letter(gate: Gate, n: int, site: int, letter: str) -> PauliString:
    a, b = gate.sites
    if gate.name == "SWAP":
        target = b if site == a else a if site == b else site
        return PauliString.single(n, target, letter)
    if gate.name != "CX":
        raise ValueError(f"unknown gate {gate.name!r}")
    if letter == "X" and site == a:
        return PauliString.from_sites(n, {a: "X", b: "X"})
    if letter == "Z" and site == b:
        return PauliString.from_sites(n, {a: "Z", b: "Z"})
    return PauliString.single(n, site, letter)


def _conjugate_gate(gate: Gate, p: PauliString) -> PauliString:
    n = p.n
    out = PauliString.identity(n).times_phase(p.phase_exp)
    for mask, letter in ((p.x_mask, "X"), (p.z_mask, "Z")):
        for site in range(1, n + 1):
            if mask & site_bit(n, site):
                out = out * _conjugate_letter(gate, n, site, letter)
    return out


def conjugate_through(gates: Sequence[Gate], p: PauliString, inverse: bool = False) -> PauliString:
    """U p U^dagger for the circuit U, or U^dagger p U with ``inverse``."""
    for gate in reversed(gates) if inverse else gates:
        p = _conjugate_gate(gate, p)
    return p


def logical_to_physical(n: int, odd: str = "I", even: str = "I") -> PauliString:
    """Physical string acting as ``odd`` on the odd-sublattice qubit and ``even`` on the even one."""
    letters = {site: letter for site, letter in ((1, odd), (2, even)) if letter != "I"}
    return conjugate_through(logical_basis_transform(n), PauliString.from_sites(n, letters), inverse=True)


def circuit_unitary(gates: Sequence[Gate], n: int) -> np.ndarray:
    """Dense permutation matrix of the circuit."""
    index = np.arange(1 << n, dtype=np.int64)
    image = index.copy()
    for gate in gates:
        a, b = (site_bit(n, s) for s in gate.sites)
        if gate.name == "CX":
            image = np.where(image & a, image ^ b, image)
        elif gate.name == "SWAP":
            differ = ((image & a) > 0) != ((image & b) > 0)
            image = np.where(differ, image ^ (a | b), image)
        else:
            raise ValueError(f"unknown gate {gate.name!r}")
    u = np.zeros((1 << n, 1 << n))
    u[image, index] = 1.0
    return u
