import pytest

from clusterchain.errors import DimensionError
from clusterchain.operators.model import cluster_operator
from clusterchain.operators.pauli import (
    PauliString,
    PauliSum,
    from_cluster_basis,
    to_cluster_basis,
)


def test_single_site_products_carry_phases() -> None:
    x, y = PauliString.from_label("X"), PauliString.from_label("Y")
    coeff, canon = (x * y).canonical()
    assert coeff == pytest.approx(1j)
    assert canon.letters == "Z"
    coeff, _ = (y * x).canonical()
    assert coeff == pytest.approx(-1j)


def test_label_prefix_survives_parsing() -> None:
    p = PauliString.from_label("-iYXZ")
    assert p.label == "-iYXZ"
    assert not p.is_hermitian()
    assert p.dagger().label == "+iYXZ"


def test_site_one_is_leftmost_letter() -> None:
    p = PauliString.from_sites(4, {1: "Z", 3: "Y"})
    assert p.letters == "ZIYI"
    assert p.support == (1, 3)
    assert p.weight == 2
    assert p.letter_at(3) == "Y"


def test_commutation_of_cluster_operators() -> None:
    n = 6
    k2, k3 = cluster_operator(n, 2), cluster_operator(n, 3)
    assert k2.commutes(k3)
    assert PauliString.single(n, 2, "Z").anticommutes(k2)
    assert PauliString.single(n, 1, "Z").commutes(k2)


def test_mismatched_sizes_are_rejected() -> None:
    with pytest.raises(DimensionError):
        PauliString.identity(3) * PauliString.identity(4)


def test_commutator_of_x_and_y() -> None:
    x = PauliSum.from_labels([(1.0, "X")])
    y = PauliSum.from_labels([(1.0, "Y")])
    z = PauliString.from_label("Z")
    assert x.commutator(y).coefficient_of(z) == pytest.approx(2j)
    assert x.commutator(x).is_zero()


def test_parse_and_operator_product() -> None:
    op = PauliSum.parse("1*ZI; 1*XI")
    assert len(op) == 2
    square = op @ op
    assert square.allclose(PauliSum.identity(2, 2.0))


def test_sum_merges_equal_strings() -> None:
    op = PauliSum.parse("0.5*ZZ; 0.5*ZZ; 1j*XY")
    assert len(op) == 2
    assert op.coefficient_of(PauliString.from_label("ZZ")) == pytest.approx(1.0)
    assert not op.is_hermitian()
    assert (op - op).is_zero()


def test_cluster_operator_is_single_tilde_letter() -> None:
    n = 6
    tilde = to_cluster_basis(cluster_operator(n, 3))
    assert tilde.letters == "IIZIII"
    for label in ("ZXZIII", "YIIXZI", "IIIIZY"):
        p = PauliString.from_label(label)
        back = from_cluster_basis(to_cluster_basis(p))
        assert back.key == p.key
        assert back.phase_exp == p.phase_exp
