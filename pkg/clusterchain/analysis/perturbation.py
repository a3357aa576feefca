"""Second-order effective generator on the 16-dimensional steady manifold."""
from __future__ import annotations

import cmath
import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from clusterchain.dynamics.lindblad import apply_generator
from clusterchain.errors import ModelError, NumericalError
from clusterchain.operators.model import ChainModel, JumpKind, flip_symmetries, logical_triples
from clusterchain.operators.pauli import PauliString, PauliSum

log = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
_ODD_NAMES = {"I": "I", "x": "G_o", "y": "Z_1G_o", "z": "Z_1"}
_EVEN_NAMES = {"I": "I", "x": "G_e", "y": "G_eZ_N", "z": "Z_N"}


class Perturbation(str, Enum):
    XX = "XX"
    Y = "Y"
    CUSTOM = "custom"


@dataclass(frozen=True)
class EffectiveGenerator:
    """Diagonal of -P V Q L0^-1 Q V P per steady string, in units of J (V/J)^2."""

    n: int
    kappa_over_j: float
    perturbation: str
    basis: tuple[PauliString, ...]
    labels: tuple[str, ...]
    sectors: tuple[tuple[int, int], ...]
    l2_diag: np.ndarray

    @property
    def spread_delta(self) -> float:
        return spread_delta(self)

    def entry(self, label: str) -> float:
        return float(self.l2_diag[self.labels.index(label)])

    def sector_entries(self, sector: tuple[int, int]) -> np.ndarray:
        return self.l2_diag[[i for i, s in enumerate(self.sectors) if s == sector]]


def steady_strings(n: int) -> list[tuple[str, PauliString]]:
    """The 16 products of the two logical triples (with identities), as Hermitian strings."""
    odd, even = logical_triples(n)
    identity = PauliString.identity(n)
    out = []
    for ko in ("I", "x", "y", "z"):
        for ke in ("I", "x", "y", "z"):
            a = identity if ko == "I" else odd[ko]
            b = identity if ke == "I" else even[ke]
            _, canon = (a * b).canonical()
            out.append((f"{_ODD_NAMES[ko]}.{_EVEN_NAMES[ke]}", canon))
    return out


def sector_of(string: PauliString) -> tuple[int, int]:
    """(+1 or -1, +1 or -1) for commuting or anticommuting with G_o and G_e."""
    g_odd, g_even = flip_symmetries(string.n)
    return (1 if string.commutes(g_odd) else -1, 1 if string.commutes(g_even) else -1)


def perturbation_operator(n: int, kind: Perturbation | str, strength: float = 1.0) -> PauliSum:
    kind = Perturbation(kind)
    if kind is Perturbation.XX:
        terms = [(strength, PauliString.from_sites(n, {s: "X", s + 1: "X"})) for s in range(1, n)]
    elif kind is Perturbation.Y:
        terms = [(strength, PauliString.single(n, s, "Y")) for s in range(1, n + 1)]
    else:
        raise ModelError("custom perturbations are passed in as a PauliSum")
    return PauliSum.from_terms(n, terms)


def _commutator_action(v: PauliSum, op: PauliSum) -> PauliSum:
    return v.commutator(op).scale(-1j)


def _closure(m0: ChainModel, start: PauliSum, steady_keys: set) -> list[PauliString]:
    """Breadth-first closure of the strings in ``start`` under the unperturbed generator."""
    seen: dict[tuple[int, int], PauliString] = {}
    queue = deque(s for s in start.strings() if s.key not in steady_keys)
    for s in queue:
        seen[s.key] = s
    while queue:
        current = queue.popleft()
        for _, out in apply_generator(m0, PauliSum.from_string(current)).terms:
            if out.key in steady_keys:
                raise NumericalError(f"unperturbed generator maps {current.label} onto the steady manifold")
            if out.key not in seen:
                seen[out.key] = out
                queue.append(out)
    return [seen[k] for k in sorted(seen)]


def reached_subspace(m: ChainModel, kind: Perturbation | str, string: PauliString) -> list[PauliString]:
    m0 = m.unperturbed()
    steady = {s.key for _, s in steady_strings(m.n)}
    v = perturbation_operator(m.n, kind, m.j)
    return _closure(m0, _commutator_action(v, PauliSum.from_string(string)), steady)


def first_order_vanishes(m: ChainModel, v: PauliSum) -> bool:
    steady = {s.key for _, s in steady_strings(m.n)}
    return all(
        s.key not in steady
        for _, base in steady_strings(m.n)
        for s in _commutator_action(v, PauliSum.from_string(base)).strings()
    )


def _second_order_entry(m0: ChainModel, v: PauliSum, string: PauliString, steady_keys: set) -> complex:
    vs = _commutator_action(v, PauliSum.from_string(string))
    leaked = [s.label for s in vs.strings() if s.key in steady_keys]
    if leaked:
        log.warning("first-order term leaks onto the steady manifold: %s", leaked)
        vs = PauliSum.from_terms(vs.n, [(c, s) for c, s in vs.terms if s.key not in steady_keys])
    if vs.is_zero():
        return 0j
    basis = _closure(m0, vs, steady_keys)
    index = {b.key: i for i, b in enumerate(basis)}
    matrix = np.zeros((len(basis), len(basis)), dtype=complex)
    for j, b in enumerate(basis):
        for c, out in apply_generator(m0, PauliSum.from_string(b)).terms:
            matrix[index[out.key], j] += c
    rhs = np.zeros(len(basis), dtype=complex)
    for c, s in vs.terms:
        rhs[index[s.key]] = c
    cond = np.linalg.cond(matrix)
    if cond > CONDITION_LIMIT:
        raise NumericalError(f"restricted generator for {string.label} is singular (cond {cond:.3g})")
    x = np.linalg.solve(matrix, rhs)
    back = _commutator_action(v, PauliSum.from_terms(v.n, zip(x, basis)))
    return -back.coefficient_of(string)


def effective_l2(
    m: ChainModel, perturbation: Perturbation | str = Perturbation.XX, custom: PauliSum | None = None
) -> EffectiveGenerator:
    """Second-order diagonal for a unit-strength perturbation (V = J) on the unperturbed model."""
    if m.jump_kind is not JumpKind.ZIZ:
        raise ModelError("effective generator is defined for ZIZ jumps")
    if m.n < 6:
        raise ModelError("effective generator needs N >= 6")
    kind = Perturbation(perturbation)
    v = custom if kind is Perturbation.CUSTOM else perturbation_operator(m.n, kind, m.j)
    if v is None:
        raise ModelError("custom perturbation requested without an operator")
    m0 = m.unperturbed()
    steady = steady_strings(m.n)
    steady_keys = {s.key for _, s in steady}
    entries = []
    for label, string in steady:
        value = _second_order_entry(m0, v, string, steady_keys)
        if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
            raise NumericalError(f"second-order entry for {label} is not real: {value}")
        entries.append(value.real / m.j)
    log.info("second-order generator N=%d kappa/J=%g %s", m.n, m.kappa_over_j, kind.value)
    return EffectiveGenerator(
        n=m.n,
        kappa_over_j=m.kappa_over_j,
        perturbation=kind.value,
        basis=tuple(s for _, s in steady),
        labels=tuple(label for label, _ in steady),
        sectors=tuple(sector_of(s) for _, s in steady),
        l2_diag=np.asarray(entries),
    )


def spread_delta(gen: EffectiveGenerator) -> float:
    return float(np.max(-gen.l2_diag))


# ---- closed forms ----------------------------------------------------------


def closed_form_l2_z1(kappa: float, j: float = 1.0) -> float:
    """-L2 / J per (V_xx/J)^2 on the Z_1 steady string.

    Inverts the four-string fragment reached from Z_1 (see ``xx_fragment_eigenvalues``).
    Diverges as 1/(3 kappa): that fragment has a zero mode at kappa = 0.
    """
    if kappa <= 0:
        raise ModelError("the Z_1 damping rate diverges at kappa = 0")
    x = kappa / j
    return (8 * x**2 + 3) / (x * (16 * x**2 + 9))


def closed_form_spread_hy(kappa: float, j: float = 1.0, n: int = 8) -> float:
    """-L2 / J per (V_y/J)^2 on the most strongly damped steady string.

    One term per site. The edge sites, their neighbours and the third site in
    from each end see truncated fragments; every other site is bulk.
    """
    if kappa <= 0:
        raise ModelError("the symmetry-breaking spread diverges at kappa = 0")
    if n < 6:
        raise ModelError(f"the Y-spread closed form needs N >= 6, got N={n}")
    x = kappa / j
    edge = 8 * x / (8 * x**2 + 1)
    next_to_edge = 1 / (3 * x)
    third = 4 * x * (1728 * x**4 + 312 * x**2 + 11) / (18432 * x**6 + 5312 * x**4 + 400 * x**2 + 9)
    bulk = 64 * x * (16 * x**2 + 1) / (3072 * x**4 + 352 * x**2 + 9)
    return 2 * (edge + next_to_edge + third) + (n - 6) * bulk


def xx_fragment_eigenvalues(kappa: float, j: float = 1.0) -> np.ndarray:
    """Eigenvalues -6k +- 2 sqrt(k^2 - 1) +- 2i (units of J) of the fragment reached from Z_1.

    The fragment is Y1X2 times products of K_2 and K_3. Damping depends only on K_2
    membership, so the K_3 coupling adds a pure +-2i rotation.
    """
    x = kappa / j
    out = [
        j * (-6 * x + outer * 2 * cmath.sqrt(x**2 - 1) + rotation * 2j)
        for outer in (1, -1)
        for rotation in (1, -1)
    ]
    return np.asarray(out)
