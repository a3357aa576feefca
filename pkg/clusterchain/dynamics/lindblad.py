"""Lindblad superoperator, density-matrix evolution and steady-space extraction.

Density matrices are vectorized by column stacking, ``vec(rho) = rho.reshape(-1, order="F")``,
so that ``vec(A rho B) = (B.T kron A) vec(rho)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from clusterchain.dynamics.pauli_transfer import (
    TRANSFER_CAP,
    heisenberg_expectations,
    hermitian_null_basis,
    supports_pauli_transfer,
    transfer_steady_space,
)
from clusterchain.errors import (
    CapExceededError,
    DimensionError,
    IntegrationError,
    ModelError,
)
from clusterchain.operators.dense import (
    DensityMatrix,
    StateVector,
    apply_operator,
    materialize,
    pauli_trace,
)
from clusterchain.operators.model import ChainModel, build_hamiltonian, build_jumps
from clusterchain.operators.pauli import PauliString, PauliSum

log = logging.getLogger(__name__)

SUPEROPERATOR_CAP = 8
IVP_MAX_N = 6
_DENSE_EIG_DIM = 512


@dataclass(frozen=True)
class Superoperator:
    matrix: sp.csr_matrix
    n: int
    model: ChainModel
    convention: str = "column-stacking"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def null_tolerance(self) -> float:
        return 1e-10 * (self.model.kappa if self.model.kappa > 0 else self.model.j)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvectorize(self.matrix @ vectorize(rho), self.n)


def vectorize(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvectorize(vec: np.ndarray, n: int) -> np.ndarray:
    dim = 1 << n
    return np.asarray(vec).reshape(dim, dim, order="F")


def build_superoperator(m: ChainModel, cap: int = SUPEROPERATOR_CAP) -> Superoperator:
    if m.n > cap:
        raise CapExceededError(f"full superoperator needs N <= {cap}, got N = {m.n}")
    dim = 1 << m.n
    eye = sp.identity(dim, dtype=complex, format="csr")
    h = materialize(build_hamiltonian(m), sparse=True)
    matrix = -1j * (sp.kron(eye, h) - sp.kron(h.T, eye))
    if m.kappa:
        for jump in build_jumps(m):
            f = materialize(jump, sparse=True)
            ff = (f.conj().T @ f).tocsr()
            dissipator = 2 * sp.kron(f.conj(), f) - sp.kron(eye, ff) - sp.kron(ff.T, eye)
            matrix = matrix + m.kappa * dissipator
    log.debug("superoperator N=%d built with %d nonzeros", m.n, matrix.nnz)
    return Superoperator(matrix.tocsr(), m.n, m)


# ---- symbolic generator action ---------------------------------------------


def _dissipate(m: ChainModel, op: PauliSum, adjoint: bool) -> PauliSum:
    out = PauliSum.zero(op.n)
    pieces: list[tuple[complex, PauliString]] = []
    for jump in build_jumps(m):
        single = jump.single_string()
        if single is not None:
            weight = abs(single[0]) ** 2
            pieces += [
                (-4 * m.kappa * weight * c, s) for c, s in op.terms if s.anticommutes(single[1])
            ]
            continue
        fd = jump.dagger()
        ff = fd @ jump
        sandwich = (fd @ op @ jump) if adjoint else (jump @ op @ fd)
        out = out + (sandwich.scale(2) - ff @ op - op @ ff).scale(m.kappa)
    return out + PauliSum.from_terms(op.n, pieces)


def apply_generator(m: ChainModel, op: PauliSum, adjoint: bool = False) -> PauliSum:
    """Symbolic L(op), or its Heisenberg adjoint, on a Pauli sum."""
    if op.n != m.n:
        raise DimensionError(f"operator on {op.n} sites for a chain of {m.n}")
    out = build_hamiltonian(m).commutator(op).scale(1j if adjoint else -1j)
    if m.kappa:
        out = out + _dissipate(m, op, adjoint)
    return out


def apply_dense(m: ChainModel, matrix: np.ndarray) -> np.ndarray:
    h = materialize(build_hamiltonian(m))
    out = -1j * (h @ matrix - matrix @ h)
    for jump in build_jumps(m):
        f = materialize(jump)
        fd = f.conj().T
        ff = fd @ f
        out += m.kappa * (2 * f @ matrix @ fd - ff @ matrix - matrix @ ff)
    return out


# ---- evolution -------------------------------------------------------------


def _check_times(times: Sequence[float]) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DimensionError("need a non-empty 1-d array of times")
    if times[0] < 0 or np.any(np.diff(times) < 0):
        raise DimensionError("times must be non-negative and ascending")
    return times


def propagate(
    L: Superoperator,
    matrix: np.ndarray,
    times: Sequence[float],
    method: str = "auto",
    rtol: float = 1e-9,
    atol: float = 1e-12,
) -> list[np.ndarray]:
    """e^{Lt} applied to an arbitrary (possibly unphysical) matrix at each time."""
    times = _check_times(times)
    vec0 = vectorize(np.asarray(matrix, dtype=complex))
    if method == "auto":
        method = "ivp" if L.n <= IVP_MAX_N else "expm"
    if method == "ivp":
        sol = solve_ivp(
            lambda _t, y: L.matrix @ y,
            (0.0, float(times[-1])),
            vec0,
            method="DOP853",
            t_eval=times,
            rtol=rtol,
            atol=atol,
        )
        if sol.status != 0:
            last = float(sol.t[-1]) if sol.t.size else 0.0
            raise IntegrationError(f"Lindblad integration failed: {sol.message}", last)
        vectors = sol.y.T
    elif method == "expm":
        vectors = []
        current, t_prev = vec0, 0.0
        for t in times:
            if t > t_prev:
                current = spla.expm_multiply(L.matrix * (t - t_prev), current)
                if not np.all(np.isfinite(current)):
                    raise IntegrationError("matrix exponential action diverged", t_prev)
            vectors.append(current)
            t_prev = t
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    return [unvectorize(v, L.n) for v in vectors]


def evolve(
    L: Superoperator, rho0: DensityMatrix, times: Sequence[float], method: str = "auto"
) -> list[DensityMatrix]:
    if rho0.n != L.n:
        raise DimensionError(f"state on {rho0.n} sites for a superoperator on {L.n}")
    out = []
    for t, matrix in zip(np.asarray(times, dtype=float), propagate(L, rho0.entries, times, method)):
        trace = np.trace(matrix).real
        if abs(trace - 1.0) > 1e-8:
            log.warning("trace drift %.3g at t=%.6g", trace - 1.0, t)
        out.append(DensityMatrix(0.5 * (matrix + matrix.conj().T), L.n))
    return out


# ---- steady space ----------------------------------------------------------


@dataclass(frozen=True)
class SteadySpace:
    """Hilbert-Schmidt orthonormal Hermitian basis of ker L."""

    dimension: int
    eigenvalues: np.ndarray
    basis: list[np.ndarray]
    operators: list[PauliSum] | None = None


def near_zero_eigenpairs(
    matrix: sp.spmatrix, tol: float, sigma: float, k0: int = 24
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(null eigenvalues, null eigenvectors, all computed eigenvalues) around zero."""
    dim = matrix.shape[0]
    if dim <= _DENSE_EIG_DIM:
        vals, vecs = np.linalg.eig(matrix.toarray())
    else:
        k = min(k0, dim - 2)
        while True:
            vals, vecs = spla.eigs(matrix.tocsc(), k=k, sigma=sigma, which="LM")
            inside = int(np.sum(np.abs(vals) < tol))
            if inside < k or k >= dim - 2:
                break
            k = min(2 * k, dim - 2)
            log.debug("nullspace fills all %d requested eigenpairs, widening", inside)
    mask = np.abs(vals) < tol
    return vals[mask], vecs[:, mask], vals


def steady_space(
    L: Superoperator | ChainModel,
    tol: float | None = None,
    transfer_cap: int = TRANSFER_CAP,
    superoperator_cap: int = SUPEROPERATOR_CAP,
) -> SteadySpace:
    """Nullspace of the generator; Pauli-jump models go through the Pauli-transfer blocks."""
    m = L.model if isinstance(L, Superoperator) else L
    if supports_pauli_transfer(m) and m.n <= transfer_cap:
        return _steady_space_from_transfer(m, tol, transfer_cap)
    if not isinstance(L, Superoperator):
        L = build_superoperator(m, superoperator_cap)
    tol = L.null_tolerance if tol is None else tol
    sigma = 1e-3 * (m.kappa if m.kappa > 0 else m.j)
    vals, vecs, _ = near_zero_eigenpairs(L.matrix, tol, sigma)
    dim = 1 << L.n
    candidates = []
    for col in vecs.T:
        mat = unvectorize(col, L.n)
        for herm in (0.5 * (mat + mat.conj().T), 0.5j * (mat.conj().T - mat)):
            candidates.append(np.concatenate([herm.real.ravel(), herm.imag.ravel()]))
    basis = [
        (v[: dim * dim] + 1j * v[dim * dim :]).reshape(dim, dim)
        for v in hermitian_null_basis(candidates, vals.size, "steady space")
    ]
    log.info("steady space N=%d: dimension %d", L.n, len(basis))
    return SteadySpace(len(basis), vals, basis)


def _steady_space_from_transfer(m: ChainModel, tol: float | None, cap: int) -> SteadySpace:
    found = transfer_steady_space(m, tol, cap)
    norm = math.sqrt(1 << m.n)
    basis = [materialize(op) / norm for op in found.operators]
    return SteadySpace(found.dimension, found.eigenvalues, basis, found.operators)


# ---- autocorrelation -------------------------------------------------------


@dataclass(frozen=True)
class AutocorrResult:
    times: np.ndarray
    values: np.ndarray
    method: str = "superoperator"

    def crossing_time(self, level: float = math.exp(-1)) -> float | None:
        """First time the curve drops to ``level``, linearly interpolated."""
        below = np.nonzero(self.values <= level)[0]
        if below.size == 0:
            return None
        i = int(below[0])
        if i == 0:
            return float(self.times[0])
        t0, t1 = self.times[i - 1], self.times[i]
        v0, v1 = self.values[i - 1], self.values[i]
        return float(t0 + (level - v0) * (t1 - t0) / (v1 - v0))


def _is_involution(op: PauliSum) -> bool:
    single = op.single_string()
    return single is not None and abs(single[0].imag) < 1e-12 and abs(abs(single[0]) - 1.0) < 1e-12


def measurement_weighted_state(op: PauliSum, psi0: StateVector) -> np.ndarray:
    """Sum over outcomes nu_i of nu_i P_i|psi0><psi0|P_i."""
    psi = psi0.amplitudes
    if _is_involution(op):
        o_psi = apply_operator(op, psi)
        plus, minus = 0.5 * (psi + o_psi), 0.5 * (psi - o_psi)
        return np.outer(plus, plus.conj()) - np.outer(minus, minus.conj())
    evals, evecs = np.linalg.eigh(materialize(op))
    out = np.zeros((psi.size, psi.size), dtype=complex)
    start = 0
    while start < evals.size:
        stop = start
        while stop < evals.size and abs(evals[stop] - evals[start]) < 1e-9:
            stop += 1
        block = evecs[:, start:stop]
        component = block @ (block.conj().T @ psi)
        out += evals[start] * np.outer(component, component.conj())
        start = stop
    return out


def autocorrelation(
    m: ChainModel,
    op: PauliSum,
    psi0: StateVector,
    times: Sequence[float],
    method: str = "auto",
    transfer_cap: int = TRANSFER_CAP,
    superoperator_cap: int = SUPEROPERATOR_CAP,
) -> AutocorrResult:
    """Measure ``op`` at t=0 and again at t: Tr[op e^{Lt}(rho~)]."""
    if not op.is_hermitian():
        raise ModelError("autocorrelation observable must be Hermitian")
    if op.n != m.n or psi0.n != m.n:
        raise DimensionError("observable, state and model disagree on N")
    times = _check_times(times)
    if method == "auto":
        method = "heisenberg" if (_is_involution(op) and m.has_pauli_jumps) else "superoperator"
    rho_tilde = measurement_weighted_state(op, psi0)
    if method == "heisenberg":
        values = heisenberg_expectations(m, op, rho_tilde, times, transfer_cap)
    elif method == "superoperator":
        L = build_superoperator(m, superoperator_cap)
        values = np.array([pauli_trace(op, mat).real for mat in propagate(L, rho_tilde, times)])
    else:
        raise ValueError(f"unknown autocorrelation method {method!r}")
    return AutocorrResult(times, np.asarray(values, dtype=float), method)
