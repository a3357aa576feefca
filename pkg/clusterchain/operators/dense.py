"""Exact state-space numerics: states, density matrices and operator matrices."""
from __future__ import annotations

import string
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from clusterchain.errors import CapExceededError, DegenerateInputError, DimensionError
from clusterchain.operators.model import cluster_operator, edge_mode_operators, flip_symmetries
from clusterchain.operators.pauli import PauliString, PauliSum

DENSE_CAP = 14
PURE_CAP = 20

_PHASES = np.array([1.0, 1.0j, -1.0, -1.0j])


def check_cap(n: int, cap: int, what: str) -> None:
    if n > cap:
        raise CapExceededError(f"{what} needs N <= {cap}, got N = {n}")


def basis_indices(n: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.int64)


def _as_sum(op: PauliSum | PauliString) -> PauliSum:
    return PauliSum.from_string(op) if isinstance(op, PauliString) else op


def pauli_action(p: PauliString) -> tuple[np.ndarray, np.ndarray]:
    """(targets, amplitudes) with P|b> = amplitudes[b] |targets[b]>."""
    b = basis_indices(p.n)
    parity = np.bitwise_count(b & p.z_mask) & 1
    amplitudes = _PHASES[p.phase_exp] * (1.0 - 2.0 * parity)
    return b ^ p.x_mask, amplitudes


# ---- types -----------------------------------------------------------------


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    n: int

    def __post_init__(self) -> None:
        if self.amplitudes.shape != (1 << self.n,):
            raise DimensionError(f"state of shape {self.amplitudes.shape} is not on {self.n} sites")

    @classmethod
    def normalized(cls, amplitudes: np.ndarray, n: int) -> StateVector:
        amplitudes = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amplitudes)
        if norm < 1e-14:
            raise DegenerateInputError("state has zero norm")
        return cls(amplitudes / norm, n)

    def density(self) -> DensityMatrix:
        check_cap(self.n, DENSE_CAP, "density matrix")
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.n)

    def expectation(self, op: PauliSum | PauliString) -> float | complex:
        return expectation(self, op)


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray
    n: int

    def __post_init__(self) -> None:
        dim = 1 << self.n
        if self.entries.shape != (dim, dim):
            raise DimensionError(f"density matrix of shape {self.entries.shape} is not on {self.n} sites")

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, n: int) -> DensityMatrix:
        """Hermitize and normalize a numerically drifted matrix."""
        matrix = 0.5 * (matrix + matrix.conj().T)
        trace = np.trace(matrix).real
        if abs(trace) < 1e-14:
            raise DegenerateInputError("density matrix has zero trace")
        return cls(matrix / trace, n)

    @classmethod
    def fully_mixed(cls, n: int) -> DensityMatrix:
        dim = 1 << n
        return cls(np.eye(dim, dtype=complex) / dim, n)

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def is_physical(self, atol: float = 1e-10) -> bool:
        herm = np.allclose(self.entries, self.entries.conj().T, atol=atol)
        return herm and abs(self.trace - 1.0) < atol and np.linalg.eigvalsh(self.entries).min() > -atol

    def expectation(self, op: PauliSum | PauliString) -> float | complex:
        return expectation(self, op)


class BasisKind(str, Enum):
    EDGE_MODE = "edge_mode"
    FLIP_SYMMETRY = "flip_symmetry"


@dataclass(frozen=True)
class ClusterStateSpec:
    """Stabilizer signs; index 0 and N-1 refer to the two boundary operators of the basis kind."""

    basis_kind: BasisKind
    signs: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "basis_kind", BasisKind(self.basis_kind))
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        if len(self.signs) < 4 or len(self.signs) % 2:
            raise DimensionError(f"need an even number (>= 4) of signs, got {len(self.signs)}")
        if any(s not in (1, -1) for s in self.signs):
            raise ValueError("stabilizer signs must be +1 or -1")

    @property
    def n(self) -> int:
        return len(self.signs)

    @classmethod
    def all_plus(cls, kind: BasisKind, n: int) -> ClusterStateSpec:
        return cls(kind, (1,) * n)

    @classmethod
    def random(cls, kind: BasisKind, n: int, rng: np.random.Generator) -> ClusterStateSpec:
        return cls(kind, tuple(int(s) for s in rng.choice([1, -1], size=n)))


# ---- operators -------------------------------------------------------------


def apply_operator(op: PauliSum | PauliString, amplitudes: np.ndarray) -> np.ndarray:
    op = _as_sum(op)
    out = np.zeros_like(amplitudes, dtype=complex)
    for coeff, string_ in op.terms:
        targets, phases = pauli_action(string_)
        out[targets] += coeff * phases * amplitudes
    return out


def materialize(
    op: PauliSum | PauliString, n: int | None = None, *, sparse: bool = False, cap: int = DENSE_CAP
) -> np.ndarray | sp.csr_matrix:
    op = _as_sum(op)
    n = op.n if n is None else n
    if op.n != n:
        raise DimensionError(f"operator on {op.n} sites materialized on {n}")
    check_cap(n, cap, "operator materialization")
    dim = 1 << n
    cols = basis_indices(n)
    out = sp.csr_matrix((dim, dim), dtype=complex)
    for coeff, string_ in op.terms:
        targets, phases = pauli_action(string_)
        out = out + sp.csr_matrix((coeff * phases, (targets, cols)), shape=(dim, dim))
    return out if sparse else out.toarray()


def expectation(state: StateVector | DensityMatrix, op: PauliSum | PauliString) -> float | complex:
    op = _as_sum(op)
    if op.n != state.n:
        raise DimensionError(f"operator on {op.n} sites measured on {state.n}")
    if isinstance(state, StateVector):
        value = np.vdot(state.amplitudes, apply_operator(op, state.amplitudes))
    else:
        value = pauli_trace(op, state.entries)
    return float(value.real) if op.is_hermitian() else complex(value)


def pauli_trace(op: PauliSum | PauliString, matrix: np.ndarray) -> complex:
    """Tr[op @ matrix] without forming the operator matrix."""
    op = _as_sum(op)
    b = basis_indices(op.n)
    total = 0j
    for coeff, string_ in op.terms:
        targets, phases = pauli_action(string_)
        total += coeff * np.sum(phases * matrix[b, targets])
    return complex(total)


# ---- cluster states --------------------------------------------------------


def stabilizer_generators(kind: BasisKind, n: int) -> list[PauliString]:
    """Left boundary operator, bulk K_2..K_{N-1}, right boundary operator."""
    bulk = [cluster_operator(n, site) for site in range(2, n)]
    if BasisKind(kind) is BasisKind.EDGE_MODE:
        return [edge_mode_operators(n, "left")["x"], *bulk, edge_mode_operators(n, "right")["x"]]
    g_odd, g_even = flip_symmetries(n)
    return [g_odd, *bulk, g_even]


def product_state_up(n: int, cap: int = PURE_CAP) -> StateVector:
    check_cap(n, cap, "pure state")
    amplitudes = np.zeros(1 << n, dtype=complex)
    amplitudes[0] = 1.0
    return StateVector(amplitudes, n)


def prepare_cluster_state(spec: ClusterStateSpec, cap: int = PURE_CAP) -> StateVector:
    n = spec.n
    check_cap(n, cap, "cluster-state preparation")
    psi = product_state_up(n, cap).amplitudes
    for sign, generator in zip(spec.signs, stabilizer_generators(spec.basis_kind, n)):
        psi = 0.5 * (psi + sign * apply_operator(generator, psi))
    if np.linalg.norm(psi) < 1e-10:
        raise DegenerateInputError(f"stabilizer signs {spec.signs} annihilate the all-up seed state")
    return StateVector.normalized(psi, n)


def edge_superposition_state(
    n: int,
    bloch: Sequence[float] = (1.0, 1.0, 1.0),
    bulk_signs: Sequence[int] | None = None,
    right_sign: int = 1,
    cap: int = PURE_CAP,
) -> StateVector:
    """Left edge qubit pointing along ``bloch``; bulk and right edge in fixed stabilizer eigenstates."""
    bulk = tuple(bulk_signs) if bulk_signs is not None else (1,) * (n - 2)
    spec = ClusterStateSpec(BasisKind.EDGE_MODE, (1, *bulk, right_sign))
    x_plus = prepare_cluster_state(spec, cap)
    x_minus = apply_operator(edge_mode_operators(n, "left")["z"], x_plus.amplitudes)
    z_plus = (x_plus.amplitudes + x_minus) / np.sqrt(2.0)
    z_minus = (x_plus.amplitudes - x_minus) / np.sqrt(2.0)
    direction = np.asarray(bloch, dtype=float)
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise DegenerateInputError("Bloch direction must be nonzero")
    bx, by, bz = direction / norm
    theta = np.arccos(np.clip(bz, -1.0, 1.0))
    phi = np.arctan2(by, bx)
    psi = np.cos(theta / 2) * z_plus + np.exp(1j * phi) * np.sin(theta / 2) * z_minus
    return StateVector.normalized(psi, n)


def string_order(
    state: StateVector | DensityMatrix,
    u_letter: str = "X",
    left: str = "Y",
    right: str = "Y",
    k: int | None = None,
) -> float:
    """<O^L_1 u_2 ... u_{k-1} O^R_k>; the defaults give the X-string with Y ends over the whole chain."""
    n = state.n
    k = n if k is None else k
    if not 1 < k <= n:
        raise DimensionError(f"string end k={k} outside 2..{n}")
    letters = {1: left, k: right}
    letters.update({site: u_letter for site in range(2, k)})
    return float(np.real(expectation(state, PauliString.from_sites(n, letters))))


def partial_trace(rho: DensityMatrix, keep_sites: Sequence[int]) -> DensityMatrix:
    n = rho.n
    keep = sorted(set(keep_sites))
    if not keep:
        raise DegenerateInputError("keep set is empty")
    if keep[0] < 1 or keep[-1] > n:
        raise DimensionError(f"keep sites {keep} outside 1..{n}")
    letters = string.ascii_letters
    rows = list(letters[:n])
    cols = [letters[n + i] if (i + 1) in keep else rows[i] for i in range(n)]
    out_rows = "".join(rows[s - 1] for s in keep)
    out_cols = "".join(cols[s - 1] for s in keep)
    spec = f"{''.join(rows)}{''.join(cols)}->{out_rows}{out_cols}"
    reduced = np.einsum(spec, rho.entries.reshape((2,) * (2 * n)))
    dim = 1 << len(keep)
    return DensityMatrix(reduced.reshape(dim, dim), len(keep))


def schmidt_values(amplitudes: np.ndarray, n: int, cut: int) -> np.ndarray:
    """Squared singular values across the bipartition [1..cut] | [cut+1..N], descending."""
    if not 1 <= cut < n:
        raise DimensionError(f"cut {cut} outside 1..{n - 1}")
    singular = np.linalg.svd(amplitudes.reshape(1 << cut, 1 << (n - cut)), compute_uv=False)
    return singular**2
