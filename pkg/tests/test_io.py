import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermovisco import io
from thermovisco.diagnostics import LEDGER_FIELDS, BalanceLedger


@given(st.floats(allow_nan=False))
def test_fmt_roundtrips_exactly(x):
    assert float(io.fmt(x)) == x


def test_fmt_is_locale_free():
    assert io.fmt(0.1) == "0.10000000000000001"
    assert io.fmt(1e300) == "1.0000000000000001e+300"
    assert io.fmt(3) == "3"


def test_empty_ledger_is_header_only(tmp_path):
    path = io.write_ledger(tmp_path / "ledger.csv", BalanceLedger())
    assert path.read_text() == ",".join(LEDGER_FIELDS) + "\n"
    header, data = io.read_csv(path)
    assert tuple(header) == LEDGER_FIELDS and data.shape == (0, len(LEDGER_FIELDS))


def test_table_roundtrip(tmp_path, rng):
    table = rng.standard_normal((7, 3))
    io.write_table(tmp_path / "t.csv", ("a", "b", "c"), table)
    header, back = io.read_csv(tmp_path / "t.csv")
    assert header == ["a", "b", "c"]
    assert back.tobytes() == table.tobytes()


def test_residuals_column_order(tmp_path):
    res = {k: np.arange(3.0) for k in ("adiabatic_crosscheck", "t", "total_residual", "entropy_violation", "mechanical_residual")}
    io.write_residuals(tmp_path / "r.csv", res)
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "t,mechanical_residual,total_residual,entropy_violation,adiabatic_crosscheck"


def test_report_gets_trailing_newline(tmp_path):
    io.write_report(tmp_path / "r.txt", "ok")
    assert (tmp_path / "r.txt").read_text() == "ok\n"


def test_io_errors_name_the_path(tmp_path):
    target = tmp_path / "missing" / "x.csv"
    with pytest.raises(OSError, match="missing"):
        io.write_csv(target, ["a"], [[1.0]])
    with pytest.raises(OSError, match="missing"):
        io.write_report(target, "x")
    with pytest.raises(OSError, match="missing"):
        io.write_snapshot(target, "q", np.zeros((4, 4)), 0.0)
