"""Operator-space fragmentation of the unperturbed generator and the dissipative gap.

Without perturbations and with ZIZ jumps the generator only multiplies a
Pauli string by cluster operators K_l on sites where the string anticommutes
with K_l (its active sites), while the dissipator is diagonal. Every string
therefore lives in a fragment spanned by ``(-i)^|S| K_S A`` for subsets S of
the active sites.
"""
from __future__ import annotations

import cmath
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from clusterchain.dynamics.lindblad import apply_generator
from clusterchain.errors import CapExceededError, ModelError, NumericalError
from clusterchain.operators.model import (
    ChainModel,
    JumpKind,
    build_jumps,
    cluster_operator,
)
from clusterchain.operators.pauli import PauliString, PauliSum

log = logging.getLogger(__name__)

FRAGMENT_CAP = 10
EP_TOLERANCE = 1e-6


def _require_unperturbed_ziz(m: ChainModel) -> None:
    if m.jump_kind is not JumpKind.ZIZ:
        raise ModelError("operator-space fragmentation needs ZIZ jumps")
    if m.is_perturbed:
        raise ModelError("perturbations break the fragmentation; use the perturbation module")


@dataclass(frozen=True)
class Fragment:
    basis: tuple[PauliString, ...]
    action: np.ndarray
    active_sites: tuple[int, ...]

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.action)

    def dissipation_diagonal(self) -> np.ndarray:
        return np.diag(self.action).real

    def to_sum(self, coefficients: Sequence[complex]) -> PauliSum:
        return PauliSum.from_terms(self.basis[0].n, zip(coefficients, self.basis))


def active_sites(n: int, string: PauliString) -> tuple[int, ...]:
    return tuple(site for site in range(2, n) if string.anticommutes(cluster_operator(n, site)))


def fragment_of(m: ChainModel, seed: PauliString) -> Fragment:
    """Closure of ``seed`` under the unperturbed generator, in the (-i)^|S| K_S seed basis."""
    _require_unperturbed_ziz(m)
    n = m.n
    sites = active_sites(n, seed)
    basis = []
    for subset in range(1 << len(sites)):
        string = seed
        chosen = [s for i, s in enumerate(sites) if subset >> i & 1]
        for site in chosen:
            string = cluster_operator(n, site) * string
        basis.append(string.times_phase(-len(chosen)))
    index = {b.key: i for i, b in enumerate(basis)}
    action = np.zeros((len(basis), len(basis)), dtype=complex)
    for j, b in enumerate(basis):
        for coeff, out in apply_generator(m, PauliSum.from_string(b)).terms:
            i = index.get(out.key)
            if i is None:
                raise NumericalError(f"fragment of {seed.label} is not closed: reached {out.label}")
            action[i, j] += coeff / basis[i].coefficient
    return Fragment(tuple(basis), action, sites)


# ---- closed forms ----------------------------------------------------------


def lambda1(alpha: int, kappa: float, j: float = 1.0) -> complex:
    """Slow eigenvalue of a one-active-site fragment; alpha = 1 at the edges, 2 in the bulk."""
    return -2 * alpha * kappa + 2 * cmath.sqrt(alpha**2 * kappa**2 - j**2)


def lambda2(kappa: float, j: float = 1.0) -> complex:
    """Least negative eigenvalue of the two-active-site edge fragment (always real)."""
    inner = math.sqrt(j**4 - j**2 * kappa**2 + kappa**4) - j**2 + kappa**2
    return complex(-4 * kappa + 2 * math.sqrt(2) * math.sqrt(inner))


def analytic_gap(kappa: float, j: float = 1.0) -> tuple[float, str]:
    """(gap, branch) with gap = min(|Re lambda1(2)|, |Re lambda2|)."""
    first = abs(lambda1(2, kappa, j).real)
    second = abs(lambda2(kappa, j).real)
    return (first, "lambda1_alpha2") if first <= second else (second, "lambda2")


def gap_branch_crossing(j: float = 1.0) -> float:
    """kappa/J where the two gap branches meet; sqrt(3/8) analytically."""
    return brentq(lambda x: lambda1(2, x * j, j).real - lambda2(x * j, j).real, 0.3, 2.0, xtol=1e-14)


def eigenmode_wp(m: ChainModel, p: int, alpha: int) -> tuple[complex, PauliSum]:
    """(lambda1(alpha), W_p) with W_p = A - lambda/(2J) (-i K_p A) and A = Z_p."""
    _require_unperturbed_ziz(m)
    frag = fragment_of(m, PauliString.single(m.n, p, "Z"))
    if frag.active_sites != (p,):
        raise ModelError(f"Z_{p} does not have the single active site {p}")
    diag = frag.dissipation_diagonal()[1]
    if not math.isclose(diag, -4 * alpha * m.kappa, abs_tol=1e-12):
        raise ModelError(f"site {p} carries dissipation {diag:g}, not -4*{alpha}*kappa")
    lam = lambda1(alpha, m.kappa, m.j)
    return lam, frag.to_sum([1.0, -lam / (2 * m.j)])


def wpq_coefficients(kappa: float, j: float = 1.0) -> tuple[complex, complex, complex, complex]:
    """Coefficients of W_pq on (A, B, C, D), where B carries -4 kappa and C carries -8 kappa."""
    lam = lambda2(kappa, j).real
    u = 1j * (8 * kappa + lam) * lam / (4 * j * (6 * kappa + lam))
    v = 1j * (4 * kappa + lam) * lam / (4 * j * (6 * kappa + lam))
    w = lam / (4 * kappa + lam)
    return 1.0, 1j * u, 1j * v, -w


def eigenmode_wpq(m: ChainModel, p: int, q: int) -> tuple[complex, PauliSum]:
    """(lambda2, W_pq) for A = Z_p Z_q on a two-active-site edge fragment."""
    _require_unperturbed_ziz(m)
    if m.n < 6:
        raise ModelError("two-site eigenmode exists only for N >= 6")
    if abs(p - q) != 2:
        raise ModelError(f"sites {p} and {q} must be two apart")
    frag = fragment_of(m, PauliString.from_sites(m.n, {p: "Z", q: "Z"}))
    diag = np.round(frag.dissipation_diagonal() / m.kappa, 9) if m.kappa else None
    if diag is None or frag.dimension != 4:
        raise ModelError("invalid site placement for the two-site eigenmode")
    # basis order: A, -iK_low A, -iK_high A, -K_low K_high A
    if tuple(diag) == (0.0, -4.0, -8.0, -4.0):
        a, b, c, d = 0, 1, 2, 3
    elif tuple(diag) == (0.0, -8.0, -4.0, -4.0):
        a, b, c, d = 0, 2, 1, 3
    else:
        raise ModelError(f"sites ({p}, {q}) give dissipation pattern {tuple(diag)}, not an edge pair")
    coeffs = np.zeros(4, dtype=complex)
    coeffs[[a, b, c, d]] = wpq_coefficients(m.kappa, m.j)
    return lambda2(m.kappa, m.j), frag.to_sum(coeffs)


# ---- exceptional points ----------------------------------------------------


def has_exceptional_point(
    action: np.ndarray, near: complex | None = None, rtol: float = EP_TOLERANCE
) -> bool:
    """Flag a Jordan block: colliding eigenvalues whose eigenvectors are also (nearly) parallel."""
    vals, vecs = np.linalg.eig(action)
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    scale = max(1.0, float(np.linalg.norm(action, 2)))
    for i in range(vals.size):
        if near is not None and abs(vals[i] - near) > math.sqrt(rtol) * scale:
            continue
        for k in range(i + 1, vals.size):
            if abs(vals[i] - vals[k]) > rtol * scale:
                continue
            overlap = abs(np.vdot(vecs[:, i], vecs[:, k]))
            if 1.0 - overlap**2 < rtol:
                return True
    return False


# ---- exhaustive census -----------------------------------------------------


@dataclass
class FragmentCensus:
    n: int
    # (active count, dissipation pattern in units of -4 kappa) -> number of strings
    patterns: dict[tuple[int, tuple[int, ...]], int] = field(default_factory=dict)

    @property
    def total_strings(self) -> int:
        return sum(self.patterns.values())

    def size_histogram(self) -> dict[int, int]:
        """Fragment dimension -> number of fragments."""
        out: dict[int, int] = defaultdict(int)
        for (active, _), count in self.patterns.items():
            out[1 << active] += count >> active
        return dict(sorted(out.items()))


def universal_action(active: int, pattern: Sequence[int], kappa: float, j: float = 1.0) -> np.ndarray:
    """Generator on a fragment with ``active`` sites; subsets S are bitmasks."""
    size = 1 << active
    action = np.diag(-4.0 * kappa * np.asarray(pattern, dtype=float)).astype(complex)
    for subset in range(size):
        for i in range(active):
            target = subset ^ (1 << i)
            action[target, subset] = -2.0 * j if subset >> i & 1 else 2.0 * j
    return action


def fragment_census(m: ChainModel, cap: int = FRAGMENT_CAP) -> FragmentCensus:
    """Partition all 4**N strings into fragments, grouped by their dissipation pattern."""
    _require_unperturbed_ziz(m)
    n = m.n
    if n > cap:
        raise CapExceededError(f"exhaustive fragment census needs N <= {cap}, got N = {n}")
    bulk = list(range(2, n))
    mask = (1 << n) - 1
    keys = np.arange(1 << (2 * n), dtype=np.int64)
    x, z = keys >> n, keys & mask

    def anti(p: PauliString) -> np.ndarray:
        return (np.bitwise_count(x & p.z_mask) + np.bitwise_count(z & p.x_mask)).astype(np.int64) & 1

    active = np.zeros(keys.size, dtype=np.int64)
    jumpbits = np.zeros(keys.size, dtype=np.int64)
    for idx, site in enumerate(bulk):
        active |= anti(cluster_operator(n, site)) << idx
    for idx, jump in enumerate(build_jumps(m)):
        jumpbits |= anti(jump.terms[0][1]) << idx
    combined = (active << len(bulk)) | jumpbits
    pairs, counts = np.unique(combined, return_counts=True)

    # K_l flips the commutation with jumps on sites l-1 and l+1
    flips = []
    for site in bulk:
        bits = 0
        for j_site in (site - 1, site + 1):
            if 2 <= j_site <= n - 1:
                bits |= 1 << (j_site - 2)
        flips.append(bits)

    census = FragmentCensus(n)
    jump_mask = (1 << len(bulk)) - 1
    for pair, count in zip(pairs.tolist(), counts.tolist()):
        act, base = pair >> len(bulk), pair & jump_mask
        positions = [i for i in range(len(bulk)) if act >> i & 1]
        subsets = np.arange(1 << len(positions), dtype=np.int64)
        acc = np.full(subsets.size, base, dtype=np.int64)
        for bit, pos in enumerate(positions):
            acc ^= np.where(subsets >> bit & 1, flips[pos], 0)
        pattern = tuple(np.bitwise_count(acc).tolist())
        key = (len(positions), pattern)
        census.patterns[key] = census.patterns.get(key, 0) + int(count)
    log.info("fragment census N=%d: %d distinct patterns", n, len(census.patterns))
    return census


def census_gaps(census: FragmentCensus, kappa: float, j: float = 1.0) -> dict[int, float]:
    """Slowest nonzero decay rate per active-site count."""
    tol = 1e-10 * (kappa if kappa > 0 else j)
    gaps: dict[int, float] = {}
    for active, pattern in census.patterns:
        vals = np.linalg.eigvals(universal_action(active, pattern, kappa, j))
        rates = np.abs(vals[np.abs(vals) >= tol].real)
        if rates.size:
            gaps[active] = min(gaps.get(active, math.inf), float(rates.min()))
    return dict(sorted(gaps.items()))


# ---- gap scans -------------------------------------------------------------


@dataclass(frozen=True)
class GapResult:
    kappa_over_j: float
    analytic_gap: float
    numeric_gap: float | None
    dominant_branch: str
    subsector_gaps: dict[int, float] = field(default_factory=dict)


def verify_gap_numeric(m: ChainModel, census: FragmentCensus | None = None) -> float:
    census = fragment_census(m) if census is None else census
    gaps = census_gaps(census, m.kappa, m.j)
    return min(gaps.values())


def dissipative_gap(
    m: ChainModel, kappa_grid: Sequence[float], numeric: bool = False, cap: int = FRAGMENT_CAP
) -> list[GapResult]:
    """Analytic gap over a grid of kappa/J values, optionally checked against the census."""
    _require_unperturbed_ziz(m)
    census = fragment_census(m, cap) if numeric else None
    out = []
    for x in kappa_grid:
        kappa = x * m.j
        gap, branch = analytic_gap(kappa, m.j)
        subsectors = census_gaps(census, kappa, m.j) if census else {}
        numeric_gap = min(subsectors.values()) if subsectors else None
        out.append(GapResult(float(x), gap, numeric_gap, branch, subsectors))
    return out
