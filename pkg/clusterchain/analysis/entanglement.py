"""Entanglement spectra, the four-fold degeneracy metric and stabilizer-mixture spectra."""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from clusterchain.dynamics.trajectories import InitialState, ensemble
from clusterchain.errors import DimensionError, FitError
from clusterchain.operators.dense import (
    PURE_CAP,
    BasisKind,
    ClusterStateSpec,
    DensityMatrix,
    StateVector,
    partial_trace,
    schmidt_values,
    stabilizer_generators,
)
from clusterchain.operators.model import ChainModel

log = logging.getLogger(__name__)

GAP_FLOOR = 1e-14
_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class SchmidtSpectrum:
    """Eigenvalues of the reduced density matrix across a cut after site ``cut``, descending."""

    values: np.ndarray
    cut: int


@dataclass(frozen=True)
class DegeneracyMetric:
    value: float
    gap: float
    flagged: bool


def schmidt_spectrum(psi: StateVector, cut: int) -> SchmidtSpectrum:
    return SchmidtSpectrum(schmidt_values(psi.amplitudes, psi.n, cut), cut)


def entanglement_spectrum(rho: DensityMatrix, cut: int) -> SchmidtSpectrum:
    """Spectrum of Tr_{1..cut} rho."""
    if not 1 <= cut < rho.n:
        raise DimensionError(f"cut {cut} outside 1..{rho.n - 1}")
    reduced = partial_trace(rho, range(cut + 1, rho.n + 1))
    values = np.clip(np.linalg.eigvalsh(reduced.entries)[::-1], 0.0, None)
    return SchmidtSpectrum(values, cut)


def degeneracy_metric(values: SchmidtSpectrum | Sequence[float]) -> DegeneracyMetric:
    """(log mu1 - log mu4) / (log mu4 - log mu5); the denominator is clamped at GAP_FLOOR."""
    mu = np.asarray(values.values if isinstance(values, SchmidtSpectrum) else values, dtype=float)
    mu = np.sort(mu)[::-1]
    if mu.size < 5:
        mu = np.concatenate([mu, np.zeros(5 - mu.size)])
    logs = np.log(np.maximum(mu[:5], _LOG_FLOOR))
    gap = float(logs[3] - logs[4])
    flagged = mu[4] <= 0.0 or gap < GAP_FLOOR
    value = float((logs[0] - logs[3]) / max(gap, GAP_FLOOR))
    return DegeneracyMetric(value, gap, bool(flagged))


# ---- stabilizer mixtures ---------------------------------------------------


def _gf2_kernel(vectors: Sequence[int]) -> list[int]:
    """Basis of {sigma : XOR of vectors[i] over bits i of sigma == 0}."""
    pivots: dict[int, tuple[int, int]] = {}
    kernel = []
    for i, vec in enumerate(vectors):
        combo = 1 << i
        while vec:
            top = vec.bit_length() - 1
            if top not in pivots:
                pivots[top] = (vec, combo)
                break
            pvec, pcombo = pivots[top]
            vec ^= pvec
            combo ^= pcombo
        if vec == 0:
            kernel.append(combo)
    return kernel


def surviving_group(kind: BasisKind, n: int, cut: int) -> list[int]:
    """Generator combinations whose products act trivially on the traced sites 1..cut."""
    traced = ((1 << cut) - 1) << (n - cut)
    restricted = [
        ((g.x_mask & traced) << n) | (g.z_mask & traced) for g in stabilizer_generators(kind, n)
    ]
    return _gf2_kernel(restricted)


def mixture_spectrum_analytic(
    components: Sequence[tuple[float, ClusterStateSpec]], cut: int
) -> np.ndarray:
    """Reduced spectrum of a classical mixture of cluster states on the sites after ``cut``."""
    if not components:
        raise DimensionError("mixture needs at least one component")
    kind, n = components[0][1].basis_kind, components[0][1].n
    for _, spec in components:
        if spec.n != n or spec.basis_kind is not kind:
            raise DimensionError("mixture components must share N and basis kind")
    if not 1 <= cut < n:
        raise DimensionError(f"cut {cut} outside 1..{n - 1}")
    kernel = surviving_group(kind, n, cut)
    group_size = 1 << len(kernel)
    remaining = 1 << (n - cut)
    level = group_size / remaining
    multiplicity = remaining // group_size
    weights: dict[tuple[int, ...], float] = defaultdict(float)
    for p, spec in components:
        signature = tuple(
            int(np.prod([spec.signs[i] for i in range(n) if combo >> i & 1])) for combo in kernel
        )
        weights[signature] += p
    values = [w * level for w in weights.values() for _ in range(multiplicity)]
    values += [0.0] * (remaining - len(values))
    return np.sort(np.asarray(values))[::-1]


# ---- ensemble tracking -----------------------------------------------------


@dataclass(frozen=True)
class DegeneracyTrack:
    times: np.ndarray
    d_mean: np.ndarray
    d_stderr: np.ndarray
    gap_mean: np.ndarray
    flagged_fraction: np.ndarray
    n_traj: int


def track_degeneracy_ensemble(
    m: ChainModel,
    psi0: InitialState,
    t_max: float,
    sample_times: Sequence[float],
    n_traj: int,
    base_seed: int,
    cut: int | None = None,
    threads: int = 1,
    cap: int = PURE_CAP,
) -> DegeneracyTrack:
    cut = m.n // 2 if cut is None else cut
    result = ensemble(
        m,
        psi0,
        t_max,
        sample_times,
        n_traj,
        base_seed,
        observables={},
        schmidt_cut=cut,
        threads=threads,
        cap=cap,
    )
    shape = (n_traj, len(result.times))
    d, gap, flagged = np.empty(shape), np.empty(shape), np.zeros(shape, dtype=bool)
    for i, rec in enumerate(result.records):
        for k, spectrum in enumerate(rec.schmidt_samples or []):
            metric = degeneracy_metric(spectrum)
            d[i, k], gap[i, k], flagged[i, k] = metric.value, metric.gap, metric.flagged
    stderr = d.std(axis=0, ddof=1) / math.sqrt(n_traj) if n_traj > 1 else np.zeros(shape[1])
    return DegeneracyTrack(
        result.times, d.mean(axis=0), stderr, gap.mean(axis=0), flagged.mean(axis=0), n_traj
    )


def fit_power_law(
    times: Sequence[float], values: Sequence[float], window: tuple[float, float] | None = None
) -> tuple[float, float]:
    """(exponent, prefactor) of values ~ prefactor * t**exponent on a log-log least-squares fit."""
    t, v = np.asarray(times, dtype=float), np.asarray(values, dtype=float)
    keep = (t > 0) & (v > 0) & np.isfinite(v)
    if window is not None:
        keep &= (t >= window[0]) & (t <= window[1])
    if keep.sum() < 3:
        raise FitError("power-law fit needs at least three positive points in the window")
    slope, intercept = np.polyfit(np.log(t[keep]), np.log(v[keep]), 1)
    return float(slope), float(math.exp(intercept))
