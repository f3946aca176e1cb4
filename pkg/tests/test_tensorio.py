import struct

import numpy as np
import pandas as pd
import pytest

from tenrec.tensorio import (
    MAGIC_DENSE,
    MAGIC_MASK,
    read_dense,
    read_long_csv,
    read_mask,
    read_tensor,
    write_dense,
    write_long_csv,
    write_mask,
    write_tensor,
)


def test_dense_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    t = rng.standard_normal((4, 6, 3))
    path = tmp_path / "t.tnr"
    write_dense(path, t)
    out = read_dense(path)
    assert np.array_equal(out, t)
    assert out.dtype == np.float64


def test_dense_byte_layout(tmp_path):
    """Frozen layout: magic, three little-endian uint64 dims, Fortran floats."""
    path = tmp_path / "unit.tnr"
    write_dense(path, np.array([[[1.5]]]))
    raw = path.read_bytes()
    assert raw == MAGIC_DENSE + struct.pack("<QQQ", 1, 1, 1) + struct.pack("<d", 1.5)


def test_dense_fortran_payload_order(tmp_path):
    t = np.arange(1.0, 9.0).reshape((2, 2, 2), order="F")
    path = tmp_path / "f.tnr"
    write_dense(path, t)
    payload = path.read_bytes()[len(MAGIC_DENSE) + 24 :]
    assert np.array_equal(np.frombuffer(payload, dtype="<f8"), np.arange(1.0, 9.0))


def test_mask_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    mask = rng.random((5, 4, 2)) > 0.3
    path = tmp_path / "m.tnr"
    write_mask(path, mask)
    assert np.array_equal(read_mask(path), mask)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "x.tnr"
    path.write_bytes(b"NOTTHEMAGIC!" + struct.pack("<QQQ", 1, 1, 1) + struct.pack("<d", 0.0))
    with pytest.raises(ValueError):
        read_dense(path)
    # a mask file is not a dense file
    write_mask(path, np.ones((1, 1, 1), dtype=bool))
    with pytest.raises(ValueError):
        read_dense(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "t.tnr"
    write_dense(path, np.zeros((2, 2, 2)))
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        read_dense(path)
    path.write_bytes(raw + b"\x00" * 8)
    with pytest.raises(ValueError):
        read_dense(path)


def test_long_csv_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    t = rng.standard_normal((3, 4, 2))
    mask = rng.random((3, 4, 2)) > 0.4
    path = tmp_path / "t.csv"
    write_long_csv(path, t, mask)
    out, out_mask = read_long_csv(path)
    assert np.array_equal(out_mask, mask)
    np.testing.assert_allclose(out[mask], t[mask])
    assert np.all(out[~mask] == 0.0)


def test_long_csv_without_mask(tmp_path):
    t = np.arange(24.0).reshape((2, 3, 4))
    path = tmp_path / "full.csv"
    write_long_csv(path, t)
    out, mask = read_long_csv(path)
    assert mask.all()
    np.testing.assert_allclose(out, t)


def test_long_csv_header(tmp_path):
    path = tmp_path / "h.csv"
    write_long_csv(path, np.zeros((1, 1, 1)))
    assert path.read_text().splitlines()[0] == "location,time,day,value"


def test_long_csv_absent_rows_become_missing(tmp_path):
    path = tmp_path / "sparse.csv"
    pd.DataFrame(
        {"location": [0, 1], "time": [0, 1], "day": [0, 0], "value": [5.0, 7.0]}
    ).to_csv(path, index=False)
    t, mask = read_long_csv(path, dims=(2, 2, 1))
    assert t[0, 0, 0] == 5.0 and t[1, 1, 0] == 7.0
    assert mask.sum() == 2


def test_long_csv_validation(tmp_path):
    path = tmp_path / "bad.csv"
    pd.DataFrame({"location": [0], "time": [0], "value": [1.0]}).to_csv(path, index=False)
    with pytest.raises(ValueError):
        read_long_csv(path)

    pd.DataFrame({"location": [0, 0], "time": [0, 0], "day": [0, 0], "value": [1.0, 2.0]}).to_csv(
        path, index=False
    )
    with pytest.raises(ValueError):
        read_long_csv(path)  # duplicate coordinates

    pd.DataFrame({"location": [-1], "time": [0], "day": [0], "value": [1.0]}).to_csv(path, index=False)
    with pytest.raises(ValueError):
        read_long_csv(path)

    pd.DataFrame({"location": [0.5], "time": [0], "day": [0], "value": [1.0]}).to_csv(path, index=False)
    with pytest.raises(ValueError):
        read_long_csv(path)

    pd.DataFrame({"location": [3], "time": [0], "day": [0], "value": [1.0]}).to_csv(path, index=False)
    with pytest.raises(ValueError):
        read_long_csv(path, dims=(2, 2, 2))  # index exceeds dims

    path.write_text("location,time,day,value\n")
    with pytest.raises(ValueError):
        read_long_csv(path)  # no rows


def test_read_tensor_sniffs_format(tmp_path):
    t = np.arange(8.0).reshape((2, 2, 2))
    binary = tmp_path / "a.tnr"
    csv = tmp_path / "a.csv"
    write_tensor(binary, t, "binary")
    write_tensor(csv, t, "csv")
    tb, mb = read_tensor(binary)
    tc, mc = read_tensor(csv)
    assert np.array_equal(tb, t) and mb.all()
    assert np.array_equal(tc, t) and mc.all()


def test_read_tensor_csv_nan_mask(tmp_path):
    t = np.ones((2, 2, 1))
    mask = np.array([[[True], [False]], [[True], [True]]])
    path = tmp_path / "m.csv"
    write_tensor(path, t, "csv", mask=mask)
    out, out_mask = read_tensor(path)
    assert np.array_equal(out_mask, mask)


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        write_tensor(tmp_path / "x", np.zeros((1, 1, 1)), "parquet")
    path = tmp_path / "ok.tnr"
    write_dense(path, np.zeros((1, 1, 1)))
    with pytest.raises(ValueError):
        read_tensor(path, "parquet")
