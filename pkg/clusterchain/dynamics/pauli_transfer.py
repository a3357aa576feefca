"""Lindblad generator written in the Hermitian Pauli-string basis.

For Pauli-string jumps and a Hamiltonian with real Pauli coefficients the
generator is a real sparse matrix on the 4**N coefficient vector. The
dissipator is diagonal there and the Hamiltonian only couples strings that
anticommute with one of its terms, so the matrix splits into many small
connected blocks. Keys encode a string as ``(x_mask << N) | z_mask``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import breadth_first_order, connected_components

from clusterchain.errors import CapExceededError, DimensionError, ModelError, SteadySpaceError
from clusterchain.operators.dense import basis_indices
from clusterchain.operators.model import ChainModel, build_hamiltonian, build_jumps
from clusterchain.operators.pauli import PauliString, PauliSum

log = logging.getLogger(__name__)

TRANSFER_CAP = 8
_DENSE_BLOCK = 1024
_PHASES = np.array([1.0, 1.0j, -1.0, -1.0j])


@dataclass(frozen=True)
class PauliTransferGenerator:
    n: int
    keys: np.ndarray
    matrix: sp.csr_matrix
    model: ChainModel
    adjoint: bool = False

    def index_of(self, string: PauliString) -> int:
        key = (string.x_mask << self.n) | string.z_mask
        pos = int(np.searchsorted(self.keys, key))
        if pos >= self.keys.size or self.keys[pos] != key:
            raise DimensionError(f"{string.label} is not among the generator keys")
        return pos

    def string_at(self, index: int) -> PauliString:
        key = int(self.keys[index])
        x, z = key >> self.n, key & ((1 << self.n) - 1)
        return PauliString(self.n, x, z, (x & z).bit_count())

    def blocks(self) -> list[np.ndarray]:
        """Index sets of the weakly connected components."""
        count, labels = connected_components(self.matrix, directed=True, connection="weak")
        order = np.argsort(labels, kind="stable")
        bounds = np.searchsorted(labels[order], np.arange(count + 1))
        return [order[bounds[i] : bounds[i + 1]] for i in range(count)]


def _popcount(values: np.ndarray) -> np.ndarray:
    return np.bitwise_count(values).astype(np.int64)


def supports_pauli_transfer(m: ChainModel) -> bool:
    return m.has_pauli_jumps and build_hamiltonian(m).is_hermitian()


def build_transfer_generator(
    m: ChainModel, adjoint: bool = False, cap: int = TRANSFER_CAP
) -> PauliTransferGenerator:
    """Real generator over all 4**N Hermitian strings; ``adjoint`` gives the Heisenberg picture."""
    if not supports_pauli_transfer(m):
        raise ModelError("Pauli-transfer form needs Pauli-string jumps and a real Pauli Hamiltonian")
    n = m.n
    if n > cap:
        raise CapExceededError(f"Pauli-transfer generator needs N <= {cap}, got N = {n}")
    mask = (1 << n) - 1
    keys = np.arange(1 << (2 * n), dtype=np.int64)
    x, z = keys >> n, keys & mask
    y = _popcount(x & z)

    rows, cols, data = [], [], []
    for coeff, h in build_hamiltonian(m).terms:
        anti = ((_popcount(x & h.z_mask) + _popcount(z & h.x_mask)) & 1).astype(bool)
        src = keys[anti]
        xs, zs, ys = x[anti], z[anti], y[anti]
        tx, tz = xs ^ h.x_mask, zs ^ h.z_mask
        q = (h.y_count + ys + 2 * _popcount(xs & h.z_mask) - _popcount(tx & tz)) % 4
        # -i c [h, P] = -2i c hP and hP = i^q * (canonical string), q odd
        value = 2.0 * coeff.real * np.where(q == 1, 1.0, -1.0)
        rows.append((tx << n) | tz)
        cols.append(src)
        data.append(-value if adjoint else value)

    diagonal = np.zeros(keys.size)
    for jump in build_jumps(m):
        coeff, f = jump.terms[0]
        anti = (_popcount(x & f.z_mask) + _popcount(z & f.x_mask)) & 1
        diagonal -= 4.0 * m.kappa * abs(coeff) ** 2 * anti
    rows.append(keys)
    cols.append(keys)
    data.append(diagonal)

    size = keys.size
    matrix = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
    matrix.eliminate_zeros()
    log.debug("Pauli-transfer generator N=%d: %d nonzeros", n, matrix.nnz)
    return PauliTransferGenerator(n, keys, matrix, m, adjoint)


# ---- steady space ----------------------------------------------------------


@dataclass(frozen=True)
class TransferSteadySpace:
    dimension: int
    eigenvalues: np.ndarray
    operators: list[PauliSum] = field(default_factory=list)


def hermitian_null_basis(vectors: list[np.ndarray], rank: int, label: str) -> list[np.ndarray]:
    """Orthonormalize real-encoded Hermitian candidates by SVD; check the rank matches."""
    if rank == 0:
        return []
    stacked = np.column_stack(vectors)
    u, s, _ = np.linalg.svd(stacked, full_matrices=False)
    found = int(np.sum(s > 1e-8 * s[0]))
    if found != rank:
        raise SteadySpaceError(
            f"{label}: Hermitian basis has rank {found}, nullspace dimension {rank}; "
            f"singular values {np.array2string(s[: rank + 2], precision=3)}"
        )
    return [u[:, i] for i in range(rank)]


def _block_null_vectors(block: sp.csr_matrix, tol: float, sigma: float) -> tuple[np.ndarray, list[np.ndarray]]:
    size = block.shape[0]
    if size <= _DENSE_BLOCK:
        vals, vecs = np.linalg.eig(block.toarray())
    else:
        k = min(6, size - 2)
        while True:
            vals, vecs = spla.eigs(block.tocsc(), k=k, sigma=sigma, which="LM")
            if int(np.sum(np.abs(vals) < tol)) < k or k >= size - 2:
                break
            k = min(2 * k, size - 2)
    hit = np.abs(vals) < tol
    candidates = []
    for col in vecs[:, hit].T:
        candidates += [col.real, col.imag]
    return vals[hit], candidates


def transfer_steady_space(
    m: ChainModel, tol: float | None = None, cap: int = TRANSFER_CAP
) -> TransferSteadySpace:
    gen = build_transfer_generator(m, cap=cap)
    scale = m.kappa if m.kappa > 0 else m.j
    tol = 1e-10 * scale if tol is None else tol
    values, operators = [], []
    for idx in gen.blocks():
        block = gen.matrix[idx][:, idx]
        if block.nnz == 0:
            vals, candidates = np.zeros(idx.size), list(np.eye(idx.size))
        else:
            vals, candidates = _block_null_vectors(block, tol, 1e-3 * scale)
        if vals.size == 0:
            continue
        for vec in hermitian_null_basis(candidates, vals.size, f"block of size {idx.size}"):
            keep = np.abs(vec) > 1e-12
            operators.append(
                PauliSum.from_terms(
                    m.n, [(float(c), gen.string_at(int(i))) for c, i in zip(vec[keep], idx[keep])]
                )
            )
        values.append(vals)
    eigenvalues = np.concatenate(values) if values else np.zeros(0)
    log.info("Pauli-transfer steady space N=%d: dimension %d", m.n, len(operators))
    return TransferSteadySpace(len(operators), eigenvalues, operators)


# ---- Heisenberg-picture expectations ---------------------------------------


def pauli_components(matrix: np.ndarray, n: int, strings: Sequence[PauliString]) -> np.ndarray:
    """Tr[P_k matrix] for every string, vectorized over the computational basis."""
    b = basis_indices(n)
    out = np.empty(len(strings), dtype=complex)
    for k, p in enumerate(strings):
        sign = 1.0 - 2.0 * (np.bitwise_count(b & p.z_mask) & 1)
        out[k] = _PHASES[p.phase_exp] * np.sum(sign * matrix[b, b ^ p.x_mask])
    return out


def heisenberg_expectations(
    m: ChainModel,
    op: PauliSum,
    matrix: np.ndarray,
    times: Sequence[float],
    cap: int = TRANSFER_CAP,
) -> np.ndarray:
    """Tr[op(t) matrix] with op(t) = e^{L^dagger t} op evolved inside its reachable string set."""
    if matrix.shape != (1 << m.n, 1 << m.n):
        raise DimensionError("matrix does not match the model size")
    gen = build_transfer_generator(m, adjoint=True, cap=cap)
    starts = [gen.index_of(s) for s in op.strings()]
    reach = np.unique(
        np.concatenate(
            [
                breadth_first_order(gen.matrix.T, s, directed=True, return_predecessors=False)
                for s in starts
            ]
        )
    )
    block = gen.matrix[reach][:, reach].tocsr()
    log.info("Heisenberg evolution of %s on %d strings", op.label(), reach.size)
    coeffs = np.zeros(reach.size)
    for c, s in op.terms:
        coeffs[int(np.searchsorted(reach, gen.index_of(s)))] = c.real
    overlaps = pauli_components(matrix, m.n, [gen.string_at(int(i)) for i in reach])
    values = []
    t_prev = 0.0
    for t in np.asarray(times, dtype=float):
        if t > t_prev:
            coeffs = spla.expm_multiply(block * (t - t_prev), coeffs)
            t_prev = t
        values.append(float(np.real(np.dot(coeffs, overlaps))))
    return np.asarray(values)
