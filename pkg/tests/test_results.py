import json
from pathlib import Path

import numpy as np
import pytest

from clusterchain.results import ResultStore, Table, read_table


def test_table_rows_are_checked() -> None:
    table = Table(["a", "b"])
    table.add_row(1, 2.0)
    with pytest.raises(ValueError):
        table.add_row(1)


def test_written_table_carries_schema(tmp_path: Path) -> None:
    store = ResultStore(tmp_path, "gap_scan", "scan")
    table = Table(["kappa_over_j", "gap", "ok", "branch"])
    table.add_row(0.5, np.float64(1.0 / 3.0), True, "lambda2")
    table.add_row(1, float("nan"), np.bool_(False), None)
    path = store.write_table(table, "subsectors")
    assert path.name == "scan.subsectors.csv"
    schema, columns, rows = read_table(path)
    assert schema == "clusterchain/gap_scan/subsectors/v1"
    assert columns == ["kappa_over_j", "gap", "ok", "branch"]
    assert rows[0] == ["5.000000000000e-01", "3.333333333333e-01", "1", "lambda2"]
    assert rows[1] == ["1", "nan", "0", ""]
    assert not list(tmp_path.glob("*.tmp"))


def test_json_artefacts_and_sidecar(tmp_path: Path) -> None:
    store = ResultStore(tmp_path / "out", "fidelity_protocol")
    store.write_json({"mu": np.float64(2.0), "lam": float("inf"), "hist": np.arange(3)}, "fit")
    store.write_sidecar({"experiment": "fidelity_protocol", "output": {"dir": tmp_path}})
    data = json.loads((tmp_path / "out" / "fidelity_protocol.fit.json").read_text())
    assert data == {"hist": [0, 1, 2], "lam": "inf", "mu": 2.0}
    assert (tmp_path / "out" / "fidelity_protocol.config.json").exists()
    assert len(store.written) == 2
