"""Cluster-chain model: Hamiltonian, jump operators and symmetry bookkeeping."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

from clusterchain.errors import DimensionError, ModelError, SymmetryError
from clusterchain.operators.pauli import PauliString, PauliSum, product


class JumpKind(str, Enum):
    ZIZ = "ZIZ"
    Y = "Y"
    SX_MINUS = "SxMinus"
    CUSTOM = "custom"


class SymmetryClass(str, Enum):
    STRONG = "strong"
    WEAK = "weak"
    BROKEN = "broken"


@dataclass(frozen=True)
class ChainModel:
    """Open cluster chain with optional perturbations and one family of jump operators."""

    n: int
    kappa: float
    j: float = 1.0
    v_xx: float = 0.0
    v_y: float = 0.0
    jump_kind: JumpKind = JumpKind.ZIZ
    custom_jumps: tuple[PauliSum, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "jump_kind", JumpKind(self.jump_kind))
        object.__setattr__(self, "custom_jumps", tuple(self.custom_jumps))
        if self.n < 4 or self.n % 2:
            raise ModelError(f"chain length must be even and at least 4, got {self.n}")
        if self.kappa < 0:
            raise ModelError(f"kappa must be non-negative, got {self.kappa}")
        if self.j <= 0:
            raise ModelError(f"J must be positive, got {self.j}")
        if self.jump_kind is JumpKind.CUSTOM:
            if not self.custom_jumps:
                raise ModelError("custom jump kind needs at least one jump operator")
            for op in self.custom_jumps:
                if op.n != self.n:
                    raise DimensionError(f"custom jump on {op.n} sites for a chain of {self.n}")

    def unperturbed(self) -> ChainModel:
        return replace(self, v_xx=0.0, v_y=0.0)

    def with_kappa(self, kappa: float) -> ChainModel:
        return replace(self, kappa=kappa)

    @property
    def is_perturbed(self) -> bool:
        return self.v_xx != 0.0 or self.v_y != 0.0

    @property
    def has_pauli_jumps(self) -> bool:
        return all(len(f) == 1 for f in build_jumps(self))

    @property
    def kappa_over_j(self) -> float:
        return self.kappa / self.j


# ---- named operators -------------------------------------------------------


def cluster_operator(n: int, site: int) -> PauliString:
    """K_l = Z_{l-1} X_l Z_{l+1} for a bulk site."""
    if not 2 <= site <= n - 1:
        raise DimensionError(f"cluster operator needs a bulk site, got {site} of {n}")
    return PauliString.from_sites(n, {site - 1: "Z", site: "X", site + 1: "Z"})


def cluster_product(n: int, sites: Sequence[int]) -> PauliString:
    return product((cluster_operator(n, s) for s in sites), n)


def flip_symmetries(n: int) -> tuple[PauliString, PauliString]:
    """(G_o, G_e): X on odd sites and X on even sites."""
    odd = PauliString.from_sites(n, {s: "X" for s in range(1, n + 1, 2)})
    even = PauliString.from_sites(n, {s: "X" for s in range(2, n + 1, 2)})
    return odd, even


def edge_mode_operators(n: int, side: str = "left") -> dict[str, PauliString]:
    """Pauli triple acting on one edge qubit: x, y and z components."""
    if side == "left":
        return {
            "x": PauliString.from_sites(n, {1: "X", 2: "Z"}),
            "y": PauliString.from_sites(n, {1: "Y", 2: "Z"}),
            "z": PauliString.single(n, 1, "Z"),
        }
    if side == "right":
        return {
            "x": PauliString.from_sites(n, {n - 1: "Z", n: "X"}),
            "y": PauliString.from_sites(n, {n - 1: "Z", n: "Y"}),
            "z": PauliString.single(n, n, "Z"),
        }
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def canonical_symmetries(n: int) -> dict[str, PauliString]:
    g_odd, g_even = flip_symmetries(n)
    left = edge_mode_operators(n, "left")
    right = edge_mode_operators(n, "right")
    out = {
        "G_o": g_odd,
        "G_e": g_even,
        "Z_1": left["z"],
        "Z_N": right["z"],
        "X_1Z_2": left["x"],
        "Y_1Z_2": left["y"],
        "Z_{N-1}X_N": right["x"],
        "Z_{N-1}Y_N": right["y"],
    }
    for site in range(2, n):
        out[f"K_{site}"] = cluster_operator(n, site)
    return out


# ---- Hamiltonian and jumps -------------------------------------------------


def build_hamiltonian(m: ChainModel) -> PauliSum:
    """H = J sum K_l + V_xx sum X_l X_{l+1} + V_y sum Y_l."""
    n = m.n
    terms: list[tuple[complex, PauliString]] = [
        (m.j, cluster_operator(n, site)) for site in range(2, n)
    ]
    if m.v_xx:
        terms += [
            (m.v_xx, PauliString.from_sites(n, {site: "X", site + 1: "X"}))
            for site in range(1, n)
        ]
    if m.v_y:
        terms += [(m.v_y, PauliString.single(n, site, "Y")) for site in range(1, n + 1)]
    return PauliSum.from_terms(n, terms)


def build_jumps(m: ChainModel) -> list[PauliSum]:
    """Jump operators F_l; the rate kappa is kept outside the operators."""
    n = m.n
    if m.jump_kind is JumpKind.ZIZ:
        return [
            PauliSum.from_string(PauliString.from_sites(n, {site - 1: "Z", site + 1: "Z"}))
            for site in range(2, n)
        ]
    if m.jump_kind is JumpKind.Y:
        return [PauliSum.from_string(PauliString.single(n, site, "Y")) for site in range(1, n + 1)]
    if m.jump_kind is JumpKind.SX_MINUS:
        # lowering operator in the x eigenbasis: (Z_l + i Y_l) / 2
        return [
            PauliSum.from_terms(
                n,
                [(0.5, PauliString.single(n, site, "Z")), (0.5j, PauliString.single(n, site, "Y"))],
            )
            for site in range(1, n + 1)
        ]
    return list(m.custom_jumps)


# ---- symmetry classification ----------------------------------------------


@dataclass(frozen=True)
class SymmetryReport:
    name: str
    classification: SymmetryClass
    commutes_with_hamiltonian: bool
    phases: tuple[float, ...]


def _conjugation_phase(jump: PauliSum, conjugated: PauliSum, atol: float) -> float | None:
    """Angle phi with conjugated == exp(i phi) * jump, or None when not proportional."""
    if jump.is_zero(atol):
        return 0.0 if conjugated.is_zero(atol) else None
    coeff, string = max(jump.terms, key=lambda t: abs(t[0]))
    ratio = conjugated.coefficient_of(string.canonical()[1]) / coeff
    if abs(abs(ratio) - 1.0) > 1e-9:
        return None
    if not conjugated.allclose(jump.scale(ratio), atol):
        return None
    angle = cmath.phase(ratio) % (2 * math.pi)
    return 0.0 if min(angle, 2 * math.pi - angle) < 1e-9 else angle


def classify_symmetry(m: ChainModel, u: PauliSum, name: str = "U", atol: float = 1e-10) -> SymmetryReport:
    n = m.n
    if u.n != n:
        raise DimensionError(f"symmetry on {u.n} sites for a chain of {n}")
    if not (u @ u.dagger()).allclose(PauliSum.identity(n), atol):
        raise SymmetryError(f"{name} is not unitary")
    h = build_hamiltonian(m)
    commutes_h = (h @ u - u @ h).is_zero(atol)
    phases: list[float] = []
    broken = not commutes_h
    for jump in build_jumps(m):
        phase = _conjugation_phase(jump, u @ jump @ u.dagger(), atol)
        if phase is None:
            broken = True
            break
        phases.append(phase)
    if broken:
        kind = SymmetryClass.BROKEN
    elif all(p == 0.0 for p in phases):
        kind = SymmetryClass.STRONG
    else:
        kind = SymmetryClass.WEAK
    return SymmetryReport(name, kind, commutes_h, tuple(phases))


def scan_symmetries(m: ChainModel) -> list[SymmetryReport]:
    return [
        classify_symmetry(m, PauliSum.from_string(op), name)
        for name, op in canonical_symmetries(m.n).items()
    ]


def logical_triples(n: int) -> tuple[dict[str, PauliString], dict[str, PauliString]]:
    """Spin-algebra triples of the two strongly conserved qubits, odd and even sublattice.

    The middle operator is fixed by [s1, s2] = 2i s3: i G_o Z_1 and i G_e Z_N.
    """
    g_odd, g_even = flip_symmetries(n)
    z_first, z_last = PauliString.single(n, 1, "Z"), PauliString.single(n, n, "Z")
    odd = {"x": g_odd, "y": (g_odd * z_first).times_phase(1), "z": z_first}
    even = {"x": g_even, "y": (g_even * z_last).times_phase(1), "z": z_last}
    return odd, even
