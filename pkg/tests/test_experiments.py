import typing

import numpy as np
import pytest

from clusterchain.config import ExperimentName, Settings, parse_experiment_config
from clusterchain.experiments import EXPERIMENTS, run_experiment


def _run(data: dict):
    return run_experiment(parse_experiment_config(data), Settings())


def test_every_experiment_name_has_a_runner() -> None:
    assert set(EXPERIMENTS) == set(typing.get_args(ExperimentName))


def test_strong_symmetry_autocorrelation_never_decays() -> None:
    out = _run(
        {
            "experiment": "autocorr",
            "model": {"n": 4, "kappa": 1.0},
            "schedule": {"t_max": 2.0, "n_samples": 5},
        }
    )
    table = out.tables[None]
    assert len(table.rows) == 5
    assert [row[1] for row in table.rows] == pytest.approx([1.0] * 5, abs=1e-10)
    assert out.artefacts["lifetime"]["method"] == "heisenberg"
    assert out.artefacts["lifetime"]["one_over_e_time"] is None
    assert any("1/e" in w for w in out.warnings)


def test_lindblad_evolution_keeps_trace() -> None:
    out = _run(
        {
            "experiment": "lindblad_evolve",
            "model": {"n": 4, "kappa": 1.0, "v_xx": 0.2},
            "schedule": {"t_max": 1.0, "n_samples": 3},
        }
    )
    table = out.tables[None]
    assert table.columns[0] == "time"
    assert table.columns[-2:] == ["string_order", "trace"]
    assert [row[-1] for row in table.rows] == pytest.approx([1.0, 1.0, 1.0], abs=1e-8)
    assert out.artefacts["strong_qubits"]["final"].shape == (4, 4)


def test_trajectory_tables() -> None:
    out = _run(
        {
            "experiment": "trajectories",
            "model": {"n": 4, "kappa": 1.0, "jumps": "Y"},
            "schedule": {"t_max": 1.0, "n_samples": 3, "n_traj": 3, "base_seed": 5},
        }
    )
    table = out.tables[None]
    assert table.columns[:3] == ["time", "Z_1_mean", "Z_1_stderr"]
    assert len(table.rows) == 3
    assert out.tables["jumps"].columns == ["trajectory", "seed", "time", "channel"]
    assert out.headline["trajectories"] == "3"


def test_pt_scan_reports_the_closed_form() -> None:
    out = _run(
        {
            "experiment": "pt_scan",
            "params": {"perturbation": "XX", "n_values": [6], "kappa_grid": [2.5]},
        }
    )
    (row,) = out.tables[None].rows
    n, x, spread, l2_z1, closed = row
    assert (n, x) == (6, 2.5)
    assert l2_z1 == pytest.approx(closed, rel=1e-8)
    assert spread == pytest.approx(2 * closed, rel=1e-8)
    assert len(out.tables["entries"].rows) == 16


def test_degeneracy_scan_covers_each_perturbation() -> None:
    out = _run(
        {
            "experiment": "degeneracy_scan",
            "model": {"n": 4, "kappa": 1.0, "jumps": "Y"},
            "schedule": {"t_max": 0.5, "n_samples": 3, "n_traj": 2},
            "params": {"v_xx_values": [0.0, 0.1]},
        }
    )
    rows = out.tables[None].rows
    assert len(rows) == 6
    assert sorted({row[0] for row in rows}) == [0.0, 0.1]


def test_fidelity_protocol_without_perturbation_is_censored() -> None:
    out = _run(
        {
            "experiment": "fidelity_protocol",
            "model": {"n": 6, "kappa": 1.0, "jumps": "Y"},
            "initial_state": {"preset": "left_xyz"},
            "schedule": {"t_max": 1.0, "n_samples": 5, "n_traj": 3},
        }
    )
    corrected = [row for row in out.tables[None].rows if row[4]]
    assert len(corrected) == 5
    assert [row[2] for row in corrected] == pytest.approx([1.0] * 5, abs=1e-6)
    fit = out.artefacts["fit"]["fits"]["0"]
    assert fit["n_samples"] == 0
    assert fit["mu"] is None
    assert any("censored" in w for w in out.warnings)
    assert not out.tables["histogram"].rows


def _fidelity_run(t_max: float, n_samples: int, n_traj: int, v_xx_values: list[float]):
    return _run(
        {
            "experiment": "fidelity_protocol",
            "model": {"n": 8, "kappa": 2.5, "jumps": "Y"},
            "initial_state": {"preset": "random_cluster", "basis": "edge_mode"},
            "schedule": {
                "t_max": t_max,
                "n_samples": n_samples,
                "n_traj": n_traj,
                "base_seed": 3,
                "threads": 4,
            },
            "params": {"v_xx_values": v_xx_values, "fidelity_mode": "left", "threshold": 0.75},
        }
    )


@pytest.mark.slow
def test_restoration_beats_bare_edge_qubit() -> None:
    out = _fidelity_run(50.0, 11, 300, [0.05, 0.1, 0.2])
    curves = {}
    for v, t, mean, stderr, corrected in out.tables[None].rows:
        curves.setdefault((v, corrected), []).append((t, mean, stderr))
    corrected_end = curves[(0.1, True)][-1]
    bare_end = curves[(0.1, False)][-1]
    assert corrected_end[0] == pytest.approx(50.0)
    assert corrected_end[1] >= 1.5 * bare_end[1]
    # bare fidelity is set by the jumps alone, whatever the XX strength
    for a, b in ((0.05, 0.1), (0.05, 0.2), (0.1, 0.2)):
        for (_, ma, sa), (_, mb, sb) in zip(curves[(a, False)], curves[(b, False)]):
            assert abs(ma - mb) <= 3 * np.hypot(sa, sb) + 1e-9


@pytest.mark.slow
def test_first_passage_times_follow_inverse_gaussian() -> None:
    out = _fidelity_run(400.0, 401, 1200, [0.2])
    fit = out.artefacts["fit"]["fits"]["0.2"]
    assert fit["n_samples"] >= 1000
    assert fit["mu"] > 0 and fit["lambda"] > 0
    assert fit["ks_pvalue"] > 0.01
