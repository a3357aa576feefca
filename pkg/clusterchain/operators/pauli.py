"""Pauli strings in symplectic form and weighted sums of them.

A string on ``n`` sites is stored as ``i**phase_exp * X**x_mask * Z**z_mask``
with every X factor written to the left of every Z factor. Site 1 maps to the
most significant bit of each mask, which makes masks line up with the
computational-basis index ordering used by the dense routines.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from clusterchain.errors import DimensionError

_LETTERS = "IXZY"
_LETTER_PHASE_PREFIX = ("+", "+i", "-", "-i")
_PREFIX_EXP = {"": 0, "+": 0, "+i": 1, "i": 1, "-": 2, "-i": 3}
_POWERS_OF_I = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)


def _popcount(value: int) -> int:
    return value.bit_count()


def site_bit(n: int, site: int) -> int:
    if not 1 <= site <= n:
        raise DimensionError(f"site {site} outside chain of length {n}")
    return 1 << (n - site)


def power_of_i(exponent: int) -> complex:
    return _POWERS_OF_I[exponent % 4]


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-site Paulis with a phase in {1, i, -1, -i}."""

    n: int
    x_mask: int = 0
    z_mask: int = 0
    phase_exp: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DimensionError("Pauli strings need at least one site")
        limit = 1 << self.n
        if not (0 <= self.x_mask < limit and 0 <= self.z_mask < limit):
            raise DimensionError(f"masks do not fit on {self.n} sites")
        object.__setattr__(self, "phase_exp", self.phase_exp % 4)

    # ---- constructors ----------------------------------------------------

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls(n)

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """Parse ``"+ZXZ"``, ``"-iYII"`` or a bare ``"XIZ"``; the prefix is the letter-form coefficient."""
        body = label.lstrip("+-i")
        prefix = label[: len(label) - len(body)]
        if prefix not in _PREFIX_EXP or not body:
            raise ValueError(f"cannot parse Pauli label {label!r}")
        n = len(body)
        x_mask = z_mask = 0
        for site, letter in enumerate(body.upper(), start=1):
            code = _LETTERS.find(letter)
            if code < 0:
                raise ValueError(f"unknown Pauli letter {letter!r} in {label!r}")
            bit = 1 << (n - site)
            if code & 1:
                x_mask |= bit
            if code & 2:
                z_mask |= bit
        y_count = _popcount(x_mask & z_mask)
        return cls(n, x_mask, z_mask, _PREFIX_EXP[prefix] + y_count)

    @classmethod
    def from_sites(cls, n: int, letters: Mapping[int, str], sign: int = 1) -> PauliString:
        """Build a Hermitian string from ``{site: letter}`` with an overall sign of +1 or -1."""
        x_mask = z_mask = 0
        for site, letter in letters.items():
            code = _LETTERS.find(letter.upper())
            if code < 0:
                raise ValueError(f"unknown Pauli letter {letter!r}")
            bit = site_bit(n, site)
            if code & 1:
                x_mask |= bit
            if code & 2:
                z_mask |= bit
        base = _popcount(x_mask & z_mask)
        return cls(n, x_mask, z_mask, base + (0 if sign > 0 else 2))

    @classmethod
    def single(cls, n: int, site: int, letter: str) -> PauliString:
        return cls.from_sites(n, {site: letter})

    # ---- properties ------------------------------------------------------

    @property
    def y_count(self) -> int:
        return _popcount(self.x_mask & self.z_mask)

    @property
    def letter_exp(self) -> int:
        """Exponent k of the coefficient i**k in front of the letter word."""
        return (self.phase_exp - self.y_count) % 4

    @property
    def coefficient(self) -> complex:
        return power_of_i(self.letter_exp)

    @property
    def letters(self) -> str:
        out = []
        for site in range(1, self.n + 1):
            bit = 1 << (self.n - site)
            code = (1 if self.x_mask & bit else 0) | (2 if self.z_mask & bit else 0)
            out.append(_LETTERS[code])
        return "".join(out)

    @property
    def label(self) -> str:
        return _LETTER_PHASE_PREFIX[self.letter_exp] + self.letters

    @property
    def weight(self) -> int:
        return _popcount(self.x_mask | self.z_mask)

    @property
    def support(self) -> tuple[int, ...]:
        both = self.x_mask | self.z_mask
        return tuple(site for site in range(1, self.n + 1) if both & (1 << (self.n - site)))

    @property
    def key(self) -> tuple[int, int]:
        return (self.x_mask, self.z_mask)

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def is_hermitian(self) -> bool:
        return self.letter_exp % 2 == 0

    def letter_at(self, site: int) -> str:
        bit = site_bit(self.n, site)
        return _LETTERS[(1 if self.x_mask & bit else 0) | (2 if self.z_mask & bit else 0)]

    # ---- algebra ---------------------------------------------------------

    def _check(self, other: PauliString) -> None:
        if other.n != self.n:
            raise DimensionError(f"site counts differ: {self.n} vs {other.n}")

    def __mul__(self, other: PauliString) -> PauliString:
        self._check(other)
        phase = self.phase_exp + other.phase_exp + 2 * _popcount(self.z_mask & other.x_mask)
        return PauliString(self.n, self.x_mask ^ other.x_mask, self.z_mask ^ other.z_mask, phase)

    def commutes(self, other: PauliString) -> bool:
        self._check(other)
        overlap = _popcount(self.x_mask & other.z_mask) + _popcount(self.z_mask & other.x_mask)
        return overlap % 2 == 0

    def anticommutes(self, other: PauliString) -> bool:
        return not self.commutes(other)

    def canonical(self) -> tuple[complex, PauliString]:
        """Split into (coefficient, Hermitian string with letter-form coefficient +1)."""
        return self.coefficient, PauliString(self.n, self.x_mask, self.z_mask, self.y_count)

    def dagger(self) -> PauliString:
        return PauliString(self.n, self.x_mask, self.z_mask, self.y_count - self.letter_exp)

    def times_phase(self, exponent: int) -> PauliString:
        """Multiply by ``i**exponent``."""
        return PauliString(self.n, self.x_mask, self.z_mask, self.phase_exp + exponent)

    def __neg__(self) -> PauliString:
        return self.times_phase(2)

    def __str__(self) -> str:
        return self.label


def multiply(a: PauliString, b: PauliString) -> PauliString:
    return a * b


def commutes(a: PauliString, b: PauliString) -> bool:
    return a.commutes(b)


def product(strings: Iterable[PauliString], n: int) -> PauliString:
    out = PauliString.identity(n)
    for s in strings:
        out = out * s
    return out


# ---- cluster (tilde) basis -------------------------------------------------


def cluster_generators(n: int) -> tuple[list[PauliString], list[PauliString]]:
    """Tilde-X and tilde-Z letters per site: X~_l = Z_l and Z~_l = K_l with edge terms X1Z2, Z_{N-1}X_N."""
    if n < 2:
        raise DimensionError("cluster basis needs at least two sites")
    tilde_x = [PauliString.single(n, site, "Z") for site in range(1, n + 1)]
    tilde_z = []
    for site in range(1, n + 1):
        letters = {site: "X"}
        if site > 1:
            letters[site - 1] = "Z"
        if site < n:
            letters[site + 1] = "Z"
        tilde_z.append(PauliString.from_sites(n, letters))
    return tilde_x, tilde_z


def to_cluster_basis(p: PauliString) -> PauliString:
    """Rewrite ``p`` as a string of tilde letters; the result's masks index tilde X and tilde Z."""
    n = p.n
    tilde_x, tilde_z = cluster_generators(n)
    a_mask = b_mask = 0
    for site in range(1, n + 1):
        bit = 1 << (n - site)
        if p.anticommutes(tilde_z[site - 1]):
            a_mask |= bit
        if p.anticommutes(tilde_x[site - 1]):
            b_mask |= bit
    physical = _tilde_product(n, a_mask, b_mask, tilde_x, tilde_z)
    if physical.key != p.key:
        raise DimensionError(f"cluster-basis rewrite failed for {p.label}")
    return PauliString(n, a_mask, b_mask, p.phase_exp - physical.phase_exp)


def from_cluster_basis(t: PauliString) -> PauliString:
    tilde_x, tilde_z = cluster_generators(t.n)
    physical = _tilde_product(t.n, t.x_mask, t.z_mask, tilde_x, tilde_z)
    return physical.times_phase(t.phase_exp)


def _tilde_product(
    n: int, a_mask: int, b_mask: int, tilde_x: list[PauliString], tilde_z: list[PauliString]
) -> PauliString:
    out = PauliString.identity(n)
    for site in range(1, n + 1):
        if a_mask & (1 << (n - site)):
            out = out * tilde_x[site - 1]
    for site in range(1, n + 1):
        if b_mask & (1 << (n - site)):
            out = out * tilde_z[site - 1]
    return out


# ---- sums ------------------------------------------------------------------


_DROP_TOL = 1e-14


@dataclass(frozen=True)
class PauliSum:
    """Complex combination of Hermitian Pauli strings, kept sorted by mask key."""

    n: int
    terms: tuple[tuple[complex, PauliString], ...] = ()

    @classmethod
    def from_terms(
        cls, n: int, terms: Iterable[tuple[complex, PauliString]], atol: float = _DROP_TOL
    ) -> PauliSum:
        acc: dict[tuple[int, int], complex] = {}
        strings: dict[tuple[int, int], PauliString] = {}
        for coeff, string in terms:
            if string.n != n:
                raise DimensionError(f"term on {string.n} sites added to a sum on {n}")
            factor, canon = string.canonical()
            acc[canon.key] = acc.get(canon.key, 0j) + complex(coeff) * factor
            strings[canon.key] = canon
        kept = tuple(
            (acc[key], strings[key]) for key in sorted(acc) if abs(acc[key]) > atol
        )
        return cls(n, kept)

    @classmethod
    def from_string(cls, string: PauliString, coeff: complex = 1.0) -> PauliSum:
        return cls.from_terms(string.n, [(coeff, string)])

    @classmethod
    def from_labels(cls, pairs: Iterable[tuple[complex, str]]) -> PauliSum:
        parsed = [(c, PauliString.from_label(label)) for c, label in pairs]
        if not parsed:
            raise ValueError("need at least one labelled term")
        return cls.from_terms(parsed[0][1].n, parsed)

    @classmethod
    def parse(cls, text: str) -> PauliSum:
        """Parse ``"0.5*+ZIII; 0.5j*YIII"`` or a single bare label."""
        pairs: list[tuple[complex, str]] = []
        for chunk in text.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            if "*" in chunk:
                coeff_text, label = chunk.split("*", 1)
                pairs.append((complex(coeff_text.strip().replace(" ", "")), label.strip()))
            else:
                pairs.append((1.0, chunk))
        return cls.from_labels(pairs)

    @classmethod
    def identity(cls, n: int, coeff: complex = 1.0) -> PauliSum:
        return cls.from_string(PauliString.identity(n), coeff)

    @classmethod
    def zero(cls, n: int) -> PauliSum:
        return cls(n, ())

    # ---- inspection ------------------------------------------------------

    def __iter__(self) -> Iterator[tuple[complex, PauliString]]:
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def strings(self) -> list[PauliString]:
        return [s for _, s in self.terms]

    def as_dict(self) -> dict[tuple[int, int], complex]:
        return {s.key: c for c, s in self.terms}

    def coefficient_of(self, string: PauliString) -> complex:
        """Coefficient c such that this sum contains ``c * string``."""
        for c, s in self.terms:
            if s.key == string.key:
                return c / string.coefficient
        return 0j

    def is_zero(self, atol: float = 1e-12) -> bool:
        return all(abs(c) <= atol for c, _ in self.terms)

    def single_string(self) -> tuple[complex, PauliString] | None:
        return self.terms[0] if len(self.terms) == 1 else None

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return all(abs(c.imag) <= atol for c, _ in self.terms)

    def norm(self) -> float:
        """Hilbert-Schmidt norm divided by sqrt(2**n)."""
        return float(sum(abs(c) ** 2 for c, _ in self.terms) ** 0.5)

    def allclose(self, other: PauliSum, atol: float = 1e-10) -> bool:
        return (self - other).is_zero(atol)

    # ---- algebra ---------------------------------------------------------

    def _check(self, other: PauliSum) -> None:
        if other.n != self.n:
            raise DimensionError(f"site counts differ: {self.n} vs {other.n}")

    def __add__(self, other: PauliSum) -> PauliSum:
        self._check(other)
        return PauliSum.from_terms(self.n, [*self.terms, *other.terms])

    def __sub__(self, other: PauliSum) -> PauliSum:
        return self + (-other)

    def __neg__(self) -> PauliSum:
        return self.scale(-1.0)

    def scale(self, factor: complex) -> PauliSum:
        return PauliSum.from_terms(self.n, [(c * factor, s) for c, s in self.terms])

    def __mul__(self, factor: complex) -> PauliSum:
        return self.scale(factor)

    __rmul__ = __mul__

    def __matmul__(self, other: PauliSum) -> PauliSum:
        self._check(other)
        return PauliSum.from_terms(
            self.n, [(c1 * c2, s1 * s2) for c1, s1 in self.terms for c2, s2 in other.terms]
        )

    def dagger(self) -> PauliSum:
        return PauliSum(self.n, tuple((c.conjugate(), s) for c, s in self.terms))

    def commutator(self, other: PauliSum) -> PauliSum:
        """[self, other] computed termwise; commuting string pairs drop out."""
        self._check(other)
        out = []
        for c1, s1 in self.terms:
            for c2, s2 in other.terms:
                if s1.anticommutes(s2):
                    out.append((2 * c1 * c2, s1 * s2))
        return PauliSum.from_terms(self.n, out)

    def label(self) -> str:
        if not self.terms:
            return "0"
        return "; ".join(f"{_fmt_complex(c)}*{s.label}" for c, s in self.terms)

    def __str__(self) -> str:
        return self.label()


def _fmt_complex(c: complex) -> str:
    if abs(c.imag) < 1e-15:
        return f"{c.real:.12g}"
    return f"({c.real:.12g}{c.imag:+.12g}j)"
