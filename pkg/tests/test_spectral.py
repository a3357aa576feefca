import math

import numpy as np
import pytest

from clusterchain.analysis.spectral import (
    analytic_gap,
    census_gaps,
    dissipative_gap,
    eigenmode_wp,
    eigenmode_wpq,
    fragment_census,
    fragment_of,
    gap_branch_crossing,
    has_exceptional_point,
    lambda1,
    lambda2,
    verify_gap_numeric,
)
from clusterchain.dynamics.lindblad import apply_generator
from clusterchain.errors import CapExceededError, ModelError
from clusterchain.operators.model import ChainModel
from clusterchain.operators.pauli import PauliString


def _residual(m: ChainModel, lam: complex, w) -> float:
    diff = apply_generator(m, w) - w.scale(lam)
    return max((abs(c) for c, _ in diff.terms), default=0.0)


def test_closed_form_values() -> None:
    assert lambda1(2, 2.5).real == pytest.approx(-10 + 2 * math.sqrt(24))
    assert lambda2(2.5).real == pytest.approx(-0.59154, abs=1e-4)
    assert lambda1(1, 0.5).imag != 0.0
    assert analytic_gap(2.5) == (pytest.approx(10 - 2 * math.sqrt(24)), "lambda1_alpha2")


def test_gap_branches_cross_at_root_three_eighths() -> None:
    assert gap_branch_crossing() == pytest.approx(math.sqrt(3 / 8), abs=1e-10)
    assert analytic_gap(0.3)[1] == "lambda2"
    assert analytic_gap(1.0)[1] == "lambda1_alpha2"


@pytest.mark.parametrize("kappa", [0.4, 1.0, 2.5])
def test_single_site_eigenmodes(kappa: float) -> None:
    m = ChainModel(n=8, kappa=kappa)
    for p, alpha in ((2, 1), (4, 2), (7, 1)):
        lam, w = eigenmode_wp(m, p, alpha)
        assert lam == lambda1(alpha, kappa)
        assert _residual(m, lam, w) < 1e-10


@pytest.mark.parametrize("kappa", [0.3, 1.0, 2.5])
def test_two_site_edge_eigenmodes(kappa: float) -> None:
    m = ChainModel(n=8, kappa=kappa)
    for p, q in ((2, 4), (5, 7)):
        lam, w = eigenmode_wpq(m, p, q)
        assert _residual(m, lam, w) < 1e-10


def test_wrong_site_assignment_is_rejected() -> None:
    m = ChainModel(n=8, kappa=1.0)
    with pytest.raises(ModelError):
        eigenmode_wp(m, 4, 1)
    with pytest.raises(ModelError):
        eigenmode_wpq(m, 3, 5)
    with pytest.raises(ModelError):
        eigenmode_wp(ChainModel(n=8, kappa=1.0, v_xx=0.1), 4, 2)


def test_exceptional_points() -> None:
    m = ChainModel(n=8, kappa=1.0)
    edge = fragment_of(m, PauliString.single(8, 2, "Z"))
    assert has_exceptional_point(edge.action)
    bulk = fragment_of(m.with_kappa(0.5), PauliString.single(8, 4, "Z"))
    assert has_exceptional_point(bulk.action)
    assert not has_exceptional_point(fragment_of(m.with_kappa(2.5), PauliString.single(8, 4, "Z")).action)


def test_census_covers_every_string() -> None:
    census = fragment_census(ChainModel(n=6, kappa=1.0))
    assert census.total_strings == 4**6
    assert sum(size * count for size, count in census.size_histogram().items()) == 4**6
    gaps = census_gaps(census, 1.0)
    assert min(gaps.values()) > 0


@pytest.mark.parametrize("kappa", [0.3, 0.6, 1.0, 2.5])
def test_numeric_gap_matches_analytic(kappa: float) -> None:
    m = ChainModel(n=6, kappa=kappa)
    assert verify_gap_numeric(m) == pytest.approx(analytic_gap(kappa)[0], rel=1e-8)


@pytest.mark.slow
def test_numeric_gap_matches_analytic_on_a_fine_grid() -> None:
    grid = np.linspace(0.1, 5.0, 20)
    rows = dissipative_gap(ChainModel(n=8, kappa=1.0), grid, numeric=True)
    assert len(rows) == 20
    for r in rows:
        assert r.numeric_gap == pytest.approx(r.analytic_gap, rel=1e-8)


def test_gap_scan_rows() -> None:
    rows = dissipative_gap(ChainModel(n=6, kappa=1.0), [0.5, 2.0], numeric=True)
    assert [r.kappa_over_j for r in rows] == [0.5, 2.0]
    for r in rows:
        assert r.numeric_gap == pytest.approx(r.analytic_gap, rel=1e-8)
        assert set(r.subsector_gaps) <= {0, 1, 2, 3, 4}
    assert np.isclose(rows[1].analytic_gap, analytic_gap(2.0)[0])


def test_census_cap() -> None:
    with pytest.raises(CapExceededError):
        fragment_census(ChainModel(n=12, kappa=1.0))
    with pytest.raises(CapExceededError):
        dissipative_gap(ChainModel(n=8, kappa=1.0), [1.0], numeric=True, cap=6)
