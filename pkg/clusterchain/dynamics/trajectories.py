"""Quantum-jump unravelling of the Lindblad dynamics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from joblib import Parallel, delayed
from scipy.integrate import solve_ivp

from clusterchain.errors import DimensionError, IntegrationError, NumericalError
from clusterchain.operators.dense import (
    PURE_CAP,
    StateVector,
    check_cap,
    materialize,
    schmidt_values,
)
from clusterchain.operators.model import ChainModel, build_hamiltonian, build_jumps, edge_mode_operators
from clusterchain.operators.pauli import PauliString, PauliSum

log = logging.getLogger(__name__)

EIGEN_DRIFT_CAP = 12

InitialState = StateVector | Callable[[np.random.Generator], StateVector]


def trajectory_rng(seed: int) -> np.random.Generator:
    """Counter-based stream; trajectory k of an ensemble uses seed base_seed + k."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def effective_hamiltonian(m: ChainModel) -> PauliSum:
    """H_eff = H - i kappa sum F^dagger F."""
    total = PauliSum.zero(m.n)
    for jump in build_jumps(m):
        total = total + jump.dagger() @ jump
    return build_hamiltonian(m) + total.scale(-1j * m.kappa)


def default_observables(n: int) -> dict[str, PauliString]:
    left = edge_mode_operators(n, "left")
    return {
        "Z_1": left["z"],
        "X_1Z_2": left["x"],
        "Y_1Z_2": left["y"],
        f"Z_{n // 2}": PauliString.single(n, n // 2, "Z"),
    }


@dataclass
class TrajectoryRecord:
    seed: int
    sample_times: np.ndarray
    jump_events: list[tuple[float, int]] = field(default_factory=list)
    samples: dict[str, np.ndarray] = field(default_factory=dict)
    schmidt_samples: list[np.ndarray] | None = None
    dark_events: list[float] = field(default_factory=list)
    states: list[np.ndarray] | None = None

    @property
    def jump_count(self) -> int:
        return len(self.jump_events)


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    n_traj: int
    records: list[TrajectoryRecord] = field(default_factory=list)

    def jump_log_rows(self) -> list[tuple[int, int, float, int]]:
        """(trajectory index, seed, time, channel) for every recorded jump."""
        return [
            (k, rec.seed, t, channel)
            for k, rec in enumerate(self.records)
            for t, channel in rec.jump_events
        ]


class TrajectorySolver:
    """Precomputes drift and jump matrices once so many trajectories can share them."""

    def __init__(
        self,
        m: ChainModel,
        observables: Mapping[str, PauliString | PauliSum] | None = None,
        schmidt_cut: int | None = None,
        keep_states: bool = False,
        rtol: float = 1e-9,
        atol: float = 1e-11,
        cap: int = PURE_CAP,
    ):
        check_cap(m.n, cap, "trajectory simulation")
        self.model = m
        self.rtol, self.atol = rtol, atol
        self.schmidt_cut = schmidt_cut
        self.keep_states = keep_states
        observables = default_observables(m.n) if observables is None else observables
        self._observables = {
            name: materialize(op, m.n, sparse=True, cap=cap) for name, op in observables.items()
        }
        jumps = build_jumps(m)
        self._jumps = [materialize(f, sparse=True, cap=cap) for f in jumps]
        self._pauli = all(len(f) == 1 for f in jumps)
        dim = 1 << m.n
        hamiltonian = materialize(build_hamiltonian(m), sparse=True, cap=cap)

        decay = sp.csr_matrix((dim, dim), dtype=complex)
        for f in self._jumps:
            decay = decay + (f.conj().T @ f)
        # uniform part of sum F^dagger F, handled as a scalar norm factor
        self._uniform = float(decay.diagonal().real.mean()) if m.kappa else 0.0
        residual = decay - self._uniform * sp.identity(dim, format="csr")
        self._residual_free = self._pauli or not m.kappa or abs(residual).max() < 1e-14

        if self._residual_free and m.n <= EIGEN_DRIFT_CAP:
            self._evals, self._evecs = np.linalg.eigh(hamiltonian.toarray())
            self._generator = None
        else:
            self._evals = self._evecs = None
            self._generator = (-1j * hamiltonian - m.kappa * residual).tocsr()
        log.debug(
            "trajectory solver N=%d pauli=%s eigen-drift=%s", m.n, self._pauli, self._evals is not None
        )

    # ---- drift -----------------------------------------------------------

    @property
    def decay_rate(self) -> float:
        """Rate of the uniform norm decay, 2 kappa times the identity weight of sum F^dagger F."""
        return 2.0 * self.model.kappa * self._uniform

    def _unitary(self, psi: np.ndarray, dt: float) -> np.ndarray:
        if dt == 0.0:
            return psi
        coeffs = self._evecs.conj().T @ psi
        return self._evecs @ (np.exp(-1j * self._evals * dt) * coeffs)

    # ---- jumps -----------------------------------------------------------

    def _jump(self, psi: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, int] | None:
        candidates = [f @ psi for f in self._jumps]
        weights = np.array([np.vdot(c, c).real for c in candidates])
        cdf = np.cumsum(weights)
        if cdf[-1] <= 1e-28:
            return None
        u = rng.random() * cdf[-1]
        channel = min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)
        while weights[channel] == 0.0:
            channel += 1
        new = candidates[channel]
        return new / math.sqrt(weights[channel]), channel

    def _record(self, record: TrajectoryRecord, k: int, psi: np.ndarray) -> None:
        psi = psi / np.linalg.norm(psi)
        for name, op in self._observables.items():
            record.samples[name][k] = np.vdot(psi, op @ psi).real
        if record.schmidt_samples is not None:
            record.schmidt_samples.append(schmidt_values(psi, self.model.n, self.schmidt_cut))
        if record.states is not None:
            record.states.append(psi.copy())

    # ---- driver ----------------------------------------------------------

    def run(
        self, psi0: InitialState, t_max: float, sample_times: Sequence[float], seed: int
    ) -> TrajectoryRecord:
        rng = trajectory_rng(seed)
        initial = psi0(rng) if callable(psi0) else psi0
        if initial.n != self.model.n:
            raise DimensionError(f"initial state on {initial.n} sites for a chain of {self.model.n}")
        times = np.asarray(sample_times, dtype=float)
        if times.size and (times[0] < 0 or times[-1] > t_max or np.any(np.diff(times) < 0)):
            raise DimensionError("sample times must be ascending and inside [0, t_max]")
        record = TrajectoryRecord(
            seed=int(seed),
            sample_times=times,
            samples={name: np.empty(times.size) for name in self._observables},
            schmidt_samples=[] if self.schmidt_cut else None,
            states=[] if self.keep_states else None,
        )
        psi = initial.amplitudes / np.linalg.norm(initial.amplitudes)
        if self._evals is not None:
            self._run_exact_drift(psi, t_max, times, rng, record)
        else:
            self._run_integrated(psi, t_max, times, rng, record)
        return record

    def _run_exact_drift(
        self, psi: np.ndarray, t_max: float, times: np.ndarray, rng: np.random.Generator, record: TrajectoryRecord
    ) -> None:
        """Unitary drift between jumps; waiting times are exponential with the uniform decay rate."""
        rate = self.decay_rate
        t, k = 0.0, 0
        while True:
            tau = -math.log(1.0 - rng.random()) / rate if rate > 0 else math.inf
            t_next = t + tau
            while k < times.size and times[k] < t_next:
                self._record(record, k, self._unitary(psi, times[k] - t))
                k += 1
            if t_next > t_max:
                return
            psi = self._unitary(psi, tau)
            psi /= np.linalg.norm(psi)
            t = t_next
            jumped = self._jump(psi, rng)
            if jumped is None:
                record.dark_events.append(t)
                log.warning("dark state at t=%.6g (seed %d)", t, record.seed)
                continue
            psi, channel = jumped
            record.jump_events.append((t, channel))

    def _run_integrated(
        self, psi: np.ndarray, t_max: float, times: np.ndarray, rng: np.random.Generator, record: TrajectoryRecord
    ) -> None:
        """Adaptive drift with a terminal event at the pre-drawn norm threshold."""
        rate = self.decay_rate
        generator = self._generator
        t, k = 0.0, 0
        while True:
            if t >= t_max:
                while k < times.size:
                    self._record(record, k, psi)
                    k += 1
                return
            threshold = 1.0 - rng.random()
            t0 = t

            def crossing(s: float, y: np.ndarray, t0: float = t0, threshold: float = threshold) -> float:
                return math.exp(-rate * (s - t0)) * np.vdot(y, y).real - threshold

            crossing.terminal = True
            crossing.direction = -1
            sol = solve_ivp(
                lambda _s, y: generator @ y,
                (t, t_max),
                psi,
                method="RK45",
                rtol=self.rtol,
                atol=self.atol,
                events=crossing,
                dense_output=True,
            )
            if sol.status == -1:
                raise IntegrationError(f"drift integration failed: {sol.message}", t)
            fired = sol.status == 1 and sol.t_events[0].size > 0
            t_end = float(sol.t_events[0][0]) if fired else t_max
            while k < times.size and (times[k] < t_end or (not fired and times[k] <= t_end)):
                self._record(record, k, sol.sol(times[k]))
                k += 1
            if not fired:
                return
            psi = sol.y_events[0][0]
            psi = psi / np.linalg.norm(psi)
            t = t_end
            jumped = self._jump(psi, rng)
            if jumped is None:
                record.dark_events.append(t)
                log.warning("dark state at t=%.6g (seed %d)", t, record.seed)
                continue
            psi, channel = jumped
            record.jump_events.append((t, channel))


def run_trajectory(
    m: ChainModel,
    psi0: InitialState,
    t_max: float,
    sample_times: Sequence[float],
    seed: int,
    observables: Mapping[str, PauliString | PauliSum] | None = None,
    schmidt_cut: int | None = None,
    cap: int = PURE_CAP,
) -> TrajectoryRecord:
    return TrajectorySolver(m, observables, schmidt_cut, cap=cap).run(psi0, t_max, sample_times, seed)


def ensemble(
    m: ChainModel,
    psi0: InitialState,
    t_max: float,
    sample_times: Sequence[float],
    n_traj: int,
    base_seed: int,
    observables: Mapping[str, PauliString | PauliSum] | None = None,
    schmidt_cut: int | None = None,
    threads: int = 1,
    keep_records: bool = True,
    keep_states: bool = False,
    cap: int = PURE_CAP,
) -> EnsembleResult:
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    solver = TrajectorySolver(m, observables, schmidt_cut, keep_states=keep_states, cap=cap)

    def one(k: int) -> TrajectoryRecord:
        try:
            return solver.run(psi0, t_max, sample_times, base_seed + k)
        except Exception as exc:
            raise NumericalError(f"trajectory {k} (seed {base_seed + k}) failed: {exc}") from exc

    records = Parallel(n_jobs=threads, prefer="threads")(delayed(one)(k) for k in range(n_traj))
    times = np.asarray(sample_times, dtype=float)
    mean, stderr = {}, {}
    for name in records[0].samples:
        stack = np.vstack([rec.samples[name] for rec in records])
        mean[name] = stack.mean(axis=0)
        stderr[name] = (
            stack.std(axis=0, ddof=1) / math.sqrt(n_traj) if n_traj > 1 else np.zeros(times.size)
        )
    log.info("ensemble of %d trajectories, %d jumps total", n_traj, sum(r.jump_count for r in records))
    return EnsembleResult(times, mean, stderr, n_traj, records if keep_records else [])
