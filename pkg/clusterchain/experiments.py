"""One function per experiment type; each turns a validated config into tables and artefacts."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from clusterchain.analysis.entanglement import track_degeneracy_ensemble
from clusterchain.analysis.perturbation import (
    Perturbation,
    closed_form_l2_z1,
    closed_form_spread_hy,
    effective_l2,
)
from clusterchain.analysis.spectral import dissipative_gap, gap_branch_crossing
from clusterchain.config import ExperimentConfig, Settings
from clusterchain.dynamics.lindblad import autocorrelation, build_superoperator, evolve, steady_space
from clusterchain.dynamics.pauli_transfer import supports_pauli_transfer
from clusterchain.dynamics.trajectories import InitialState, default_observables, ensemble, trajectory_rng
from clusterchain.errors import ConfigError, DimensionError, ModelError
from clusterchain.operators.dense import (
    PURE_CAP,
    BasisKind,
    ClusterStateSpec,
    StateVector,
    check_cap,
    edge_superposition_state,
    expectation,
    prepare_cluster_state,
    string_order,
)
from clusterchain.operators.model import ChainModel, JumpKind, canonical_symmetries, scan_symmetries
from clusterchain.operators.pauli import PauliSum
from clusterchain.protocols.qubits import (
    edge_pair_observables,
    fidelity_traces,
    first_passage_and_fit,
    strong_qubit_readout,
    weak_qubit_observables,
)
from clusterchain.results import Table

log = logging.getLogger(__name__)


@dataclass
class ExperimentOutput:
    tables: dict[str | None, Table] = field(default_factory=dict)
    artefacts: dict[str, Any] = field(default_factory=dict)
    headline: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


# ---- config to domain objects ----------------------------------------------


def build_model(cfg: ExperimentConfig, v_xx: float | None = None) -> ChainModel:
    """Model in units of J: couplings are divided by the configured J."""
    mc = cfg.model
    try:
        custom = tuple(PauliSum.parse(text) for text in mc.custom_jumps)
        return ChainModel(
            n=mc.n,
            kappa=mc.kappa / mc.j,
            v_xx=(mc.v_xx if v_xx is None else v_xx) / mc.j,
            v_y=mc.v_y / mc.j,
            jump_kind=JumpKind(mc.jumps),
            custom_jumps=custom,
        )
    except (ValueError, ModelError, DimensionError) as exc:
        raise ConfigError(f"model: {exc}") from exc


def build_initial_state(cfg: ExperimentConfig, cap: int = PURE_CAP) -> InitialState:
    n, ic = cfg.model.n, cfg.initial_state
    kind = BasisKind(ic.basis)
    if ic.preset == "left_xyz":
        return edge_superposition_state(n, (1.0, 1.0, 1.0), cap=cap)
    if ic.preset == "edge_superposition":
        return edge_superposition_state(n, ic.bloch, cap=cap)
    if ic.preset == "random_cluster":
        def draw(rng: np.random.Generator) -> StateVector:
            return prepare_cluster_state(ClusterStateSpec.random(kind, n, rng), cap)

        return draw
    signs = tuple(ic.signs) if ic.signs is not None else (1,) * n
    if len(signs) != n:
        raise ConfigError(f"initial_state.signs: expected {n} signs, got {len(signs)}")
    return prepare_cluster_state(ClusterStateSpec(kind, signs), cap)


def _fixed_state(cfg: ExperimentConfig, psi0: InitialState) -> StateVector:
    """Deterministic representative of a random initial state, drawn from base_seed."""
    if callable(psi0):
        return psi0(trajectory_rng(cfg.schedule.base_seed))
    return psi0


def _observable(cfg: ExperimentConfig) -> PauliSum:
    text = cfg.params.observable
    named = canonical_symmetries(cfg.model.n)
    if text in named:
        return PauliSum.from_string(named[text])
    try:
        op = PauliSum.parse(text)
    except ValueError as exc:
        raise ConfigError(f"params.observable: {exc}") from exc
    if op.n != cfg.model.n:
        raise ConfigError(f"params.observable acts on {op.n} sites, model has {cfg.model.n}")
    return op


# ---- experiments -----------------------------------------------------------


def run_autocorr(cfg: ExperimentConfig, settings: Settings) -> ExperimentOutput:
    m = build_model(cfg)
    method = cfg.params.method
    if method == "auto":
        method = "heisenberg" if supports_pauli_transfer(m) else "superoperator"
    cap = settings.transfer_cap if method == "heisenberg" else settings.superoperator_cap
    check_cap(m.n, cap, f"autocorrelation ({method})")
    op = _observable(cfg)
    psi0 = _fixed_state(cfg, build_initial_state(cfg, settings.pure_cap))
    result = autocorrelation(
        m,
        op,
        psi0,
        cfg.sample_times(),
        method,
        transfer_cap=settings.transfer_cap,
        superoperator_cap=settings.superoperator_cap,
    )
    table = Table(["time", "autocorr"])
    for t, v in zip(result.times, result.values):
        table.add_row(t, v)
    out = ExperimentOutput(tables={None: table})
    crossing = result.crossing_time()
    out.artefacts["lifetime"] = {"observable": op.label(), "method": result.method, "one_over_e_time": crossing}
    out.headline["1/e time"] = "not reached" if crossing is None else f"{crossing:.4f} / J"
    if crossing is None:
        out.warnings.append("autocorrelation did not decay to 1/e within t_max")
    return out


def run_lindblad_evolve(cfg: ExperimentConfig, settings: Settings) -> ExperimentOutput:
    m = build_model(cfg)
    check_cap(m.n, settings.superoperator_cap, "Lindblad evolution")
    psi0 = _fixed_state(cfg, build_initial_state(cfg, settings.pure_cap))
    observables = default_observables(m.n)
    states = evolve(build_superoperator(m, settings.superoperator_cap), psi0.density(), cfg.sample_times())
    table = Table(["time", *observables, "string_order", "trace"])
    for t, rho in zip(cfg.sample_times(), states):
        values = [float(np.real(expectation(rho, op))) for op in observables.values()]
        table.add_row(t, *values, string_order(rho), rho.trace)
    out = ExperimentOutput(tables={None: table})
    final = strong_qubit_readout(states[-1])
    out.artefacts["strong_qubits"] = {"initial": strong_qubit_readout(states[0]).d, "final": final.d}
    out.headline["final <Z_1>"] = f"{table.rows[-1][1]:.6f}"
    return out


def run_trajectories(cfg: ExperimentConfig, settings: Settings) -> ExperimentOutput:
    m = build_model(cfg)
    check_cap(m.n, settings.pure_cap, "trajectory simulation")
    s = cfg.schedule
    result = ensemble(
        m,
        build_initial_state(cfg, settings.pure_cap),
        s.t_max,
        cfg.sample_times(),
        s.n_traj,
        s.base_seed,
        threads=s.threads,
        cap=settings.pure_cap,
    )
    names = list(result.mean)
    table = Table(["time", *(f"{name}_{kind}" for name in names for kind in ("mean", "stderr"))])
    for k, t in enumerate(result.times):
        table.add_row(t, *(v for name in names for v in (result.mean[name][k], result.stderr[name][k])))
    jumps = Table(["trajectory", "seed", "time", "channel"])
    for row in result.jump_log_rows():
        jumps.add_row(*row)
    out = ExperimentOutput(tables={None: table, "jumps": jumps})
    out.headline["trajectories"] = str(result.n_traj)
    out.headline["jumps"] = str(len(jumps.rows))
    dark = sum(len(r.dark_events) for r in result.records)
    if dark:
        out.warnings.append(f"{dark} dark-state events")
    return out


def run_gap_scan(cfg: ExperimentConfig, settings: Settings) -> ExperimentOutput:
    m = build_model(cfg)
    if cfg.params.numeric:
        check_cap(m.n, settings.fragment_cap, "fragment census")
    results = dissipative_gap(m, cfg.kappa_grid(), cfg.params.numeric, settings.fragment_cap)
    table = Table(["kappa_over_j", "analytic_gap", "numeric_gap", "branch"])
    for r in results:
        table.add_row(r.kappa_over_j, r.analytic_gap, np.nan if r.numeric_gap is None else r.numeric_gap, r.dominant_branch)
    sub = Table(["kappa_over_j", "active_sites", "gap"])
    for r in results:
        for active, gap in r.subsector_gaps.items():
            sub.add_row(r.kappa_over_j, active, gap)
    out = ExperimentOutput(tables={None: table})
    if sub.rows:
        out.tables["subsectors"] = sub
    crossing = gap_branch_crossing()
    out.artefacts["branch_crossing"] = {"kappa_over_j": crossing}
    out.headline["branch crossing"] = f"kappa/J = {crossing:.8f}"
    mismatch = [
        r.kappa_over_j
        for r in results
        if r.numeric_gap is not None and abs(r.numeric_gap - r.analytic_gap) > 1e-8 * r.analytic_gap
    ]
    if mismatch:
        out.warnings.append(f"numeric and analytic gap disagree at kappa/J = {mismatch}")
    return out


def run_pt_scan(cfg: ExperimentConfig, settings: Settings) -> ExperimentOutput:
    kind = Perturbation(cfg.params.perturbation)
    table = Table(["n", "kappa_over_j", "spread_delta", "l2_z1", "closed_form"])
    entries = Table(["n", "kappa_over_j", "label", "sector_odd", "sector_even", "l2"])
    for n in cfg.params.n_values:
        for x in cfg.kappa_grid():
            m = ChainModel(n=n, kappa=x)
            gen = effective_l2(m, kind)
            closed = closed_form_l2_z1(x) if kind is Perturbation.XX else closed_form_spread_hy(x, n=n)
            table.add_row(n, x, gen.spread_delta, -gen.entry("Z_1.I"), closed)
            for label, sector, value in zip(gen.labels, gen.sectors, gen.l2_diag):
                entries.add_row(n, x, label, sector[0], sector[1], value)
    out = ExperimentOutput(tables={None: table, "entries": entries})
    out.headline["perturbation"] = kind.value
    out.headline["points"] = str(len(table.rows))
    return out


def run_degeneracy_scan(cfg: ExperimentConfig, settings: Settings) -> ExperimentOutput:
    s = cfg.schedule
    check_cap(cfg.model.n, settings.pure_cap, "degeneracy tracking")
    psi0 = build_initial_state(cfg, settings.pure_cap)
    v_values = cfg.params.v_xx_values or [cfg.model.v_xx]
    table = Table(["v_xx", "time", "d_mean", "d_stderr", "gap_mean", "flagged_fraction"])
    flagged = 0.0
    for v in v_values:
        track = track_degeneracy_ensemble(
            build_model(cfg, v_xx=v),
            psi0,
            s.t_max,
            cfg.sample_times(),
            s.n_traj,
            s.base_seed,
            cut=cfg.params.cut,
            threads=s.threads,
            cap=settings.pure_cap,
        )
        for k, t in enumerate(track.times):
            table.add_row(v, t, track.d_mean[k], track.d_stderr[k], track.gap_mean[k], track.flagged_fraction[k])
        flagged = max(flagged, float(track.flagged_fraction.max()))
    out = ExperimentOutput(tables={None: table})
    out.headline["V_xx values"] = ", ".join(f"{v:g}" for v in v_values)
    if flagged:
        out.warnings.append(f"degeneracy metric flagged in up to {flagged:.1%} of trajectories")
    return out


def run_fidelity_protocol(cfg: ExperimentConfig, settings: Settings) -> ExperimentOutput:
    s, p = cfg.schedule, cfg.params
    n = cfg.model.n
    check_cap(n, settings.pure_cap, "fidelity protocol")
    if p.fidelity_mode == "pair":
        observables = edge_pair_observables(n)
    else:
        observables = weak_qubit_observables(n, p.fidelity_mode)
    psi0 = build_initial_state(cfg, settings.pure_cap)
    v_values = p.v_xx_values or [cfg.model.v_xx]
    table = Table(["v_xx", "time", "fidelity_mean", "fidelity_stderr", "corrected"])
    histogram = Table(["v_xx", "bin_left", "bin_right", "count"])
    samples = Table(["v_xx", "t_first_passage"])
    fits: dict[str, Any] = {}
    out = ExperimentOutput()
    for v in v_values:
        m = build_model(cfg, v_xx=v)
        result = ensemble(
            m,
            psi0,
            s.t_max,
            cfg.sample_times(),
            s.n_traj,
            s.base_seed,
            observables=observables,
            threads=s.threads,
            cap=settings.pure_cap,
        )
        traces = fidelity_traces(result, m, p.fidelity_mode, threads=s.threads)
        for corrected in (True, False):
            mean, stderr = traces.summary(corrected)
            for k, t in enumerate(traces.times):
                table.add_row(v, t, mean[k], stderr[k], corrected)
        passage = first_passage_and_fit(traces.times, traces.corrected, p.threshold)
        for t in passage.samples:
            samples.add_row(v, t)
        if passage.samples.size:
            counts, edges = np.histogram(passage.samples, bins=p.histogram_bins)
            for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                histogram.add_row(v, lo, hi, c)
        fit = passage.fit
        fits[f"{v:g}"] = {
            "crossing_fraction": passage.crossing_fraction,
            "n_samples": int(passage.samples.size),
            "mu": None if fit is None else fit.mu,
            "lambda": None if fit is None else fit.lam,
            "ks_distance": None if fit is None else fit.ks_distance,
            "ks_pvalue": None if fit is None else fit.ks_pvalue,
            "degenerate": None if fit is None else fit.degenerate,
        }
        if passage.crossing_fraction < 1.0:
            out.warnings.append(f"V_xx={v:g}: crossing fraction {passage.crossing_fraction:.3f} (censored data)")
        if fit is not None:
            out.headline[f"V_xx={v:g}"] = f"mu={fit.mu:.3f}, lambda={fit.lam:.3f}, KS={fit.ks_distance:.4f}"
    out.tables = {None: table, "histogram": histogram, "first_passage": samples}
    out.artefacts["fit"] = {"threshold": p.threshold, "mode": p.fidelity_mode, "fits": fits}
    return out


def run_steady_space(cfg: ExperimentConfig, settings: Settings) -> ExperimentOutput:
    m = build_model(cfg)
    found = steady_space(m, cfg.params.tolerance, settings.transfer_cap, settings.superoperator_cap)
    table = Table(["index", "eigenvalue_real", "eigenvalue_imag"])
    for k, value in enumerate(np.sort_complex(found.eigenvalues)):
        table.add_row(k, value.real, value.imag)
    symmetries = Table(["name", "classification", "commutes_with_hamiltonian"])
    for report in scan_symmetries(m):
        symmetries.add_row(report.name, report.classification.value, report.commutes_with_hamiltonian)
    out = ExperimentOutput(tables={None: table, "symmetries": symmetries})
    out.artefacts["steady_space"] = {"dimension": found.dimension}
    out.headline["steady-space dimension"] = str(found.dimension)
    return out


EXPERIMENTS: dict[str, Callable[[ExperimentConfig, Settings], ExperimentOutput]] = {
    "autocorr": run_autocorr,
    "lindblad_evolve": run_lindblad_evolve,
    "trajectories": run_trajectories,
    "gap_scan": run_gap_scan,
    "pt_scan": run_pt_scan,
    "degeneracy_scan": run_degeneracy_scan,
    "fidelity_protocol": run_fidelity_protocol,
    "steady_space": run_steady_space,
}


def run_experiment(cfg: ExperimentConfig, settings: Settings) -> ExperimentOutput:
    log.info("running %s on N=%d", cfg.experiment, cfg.model.n)
    return EXPERIMENTS[cfg.experiment](cfg, settings)
