"""RNG contract and data-model / CSV ingestion tests."""

import numpy as np
import pytest

from degkit.data import (DataError, Dataset, UnitRecord, load_dataset,
                         load_field_csv, load_long_csv, save_field_csv,
                         save_long_csv)
from degkit.rng import RngSpec


# ---------------------------------------------------------------------------
# RngSpec
# ---------------------------------------------------------------------------


def test_rngspec_is_reproducible():
    a = RngSpec(7, 3).generator("unit", 5).standard_normal(10)
    b = RngSpec(7, 3).generator("unit", 5).standard_normal(10)
    assert np.array_equal(a, b)


def test_rngspec_streams_and_subkeys_differ():
    base = RngSpec(7).generator().standard_normal(10)
    assert not np.array_equal(base, RngSpec(7, 1).generator().standard_normal(10))
    assert not np.array_equal(base, RngSpec(8).generator().standard_normal(10))
    assert not np.array_equal(
        RngSpec(7).generator("a").standard_normal(10),
        RngSpec(7).generator("b").standard_normal(10),
    )


def test_rngspec_validation_and_roundtrip():
    with pytest.raises(ValueError):
        RngSpec(-1)
    with pytest.raises(ValueError):
        RngSpec(0, 2**64)
    spec = RngSpec(12, 34)
    assert RngSpec.from_dict(spec.to_dict()) == spec


# ---------------------------------------------------------------------------
# UnitRecord / Dataset invariants
# ---------------------------------------------------------------------------


def test_unitrecord_rejects_bad_times_and_channels():
    with pytest.raises(DataError):
        UnitRecord("u1", [1.0, 1.0, 2.0], {"s1": [0, 0, 0]})
    with pytest.raises(DataError):
        UnitRecord("u1", [1.0, 2.0], {"s1": [0.0]})
    with pytest.raises(DataError):
        UnitRecord("u1", [1.0, 2.0], {"s1": [0, 0]}, event_time=1.5,
                   event_indicator=1)


def test_dataset_requires_consistent_channels():
    u1 = UnitRecord("u1", [1.0], {"s1": [0.0]})
    u2 = UnitRecord("u2", [1.0], {"s2": [0.0]})
    with pytest.raises(DataError):
        Dataset(units=[u1, u2], channel_names=["s1"])
    with pytest.raises(DataError):
        Dataset(units=[], channel_names=["s1"])


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def _write(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return path


def test_load_minimal_degradation_file(tmp_path):
    p = _write(tmp_path / "d.csv", [
        "unit_id,time,channel,value",
        "u1,1.0,s1,0.1", "u1,2.0,s1,0.2", "u1,3.0,s1,0.3",
    ])
    ds = load_long_csv(p, "degradation")
    assert ds.n_units == 1 and ds.n_channels == 1
    assert np.array_equal(ds.units[0].times, [1.0, 2.0, 3.0])


def test_unsorted_rows_canonicalize(tmp_path):
    rows = ["u1,2.0,s1,0.2", "u1,1.0,s1,0.1", "u1,3.0,s1,0.3"]
    p1 = _write(tmp_path / "a.csv", ["unit_id,time,channel,value"] + rows)
    p2 = _write(tmp_path / "b.csv", ["unit_id,time,channel,value"] + sorted(rows))
    d1, d2 = load_long_csv(p1, "degradation"), load_long_csv(p2, "degradation")
    assert np.array_equal(d1.units[0].times, d2.units[0].times)
    assert np.array_equal(d1.units[0].channels["s1"], d2.units[0].channels["s1"])


def test_duplicate_measurement_names_the_line(tmp_path):
    p = _write(tmp_path / "d.csv", [
        "unit_id,time,channel,value",
        "u1,1.0,s1,0.1", "u1,2.0,s1,0.2", "u1,2.0,s1,0.9",
    ])
    with pytest.raises(DataError, match=r":4:"):
        load_long_csv(p, "degradation")


def test_event_join_and_unknown_unit(tmp_path):
    d = _write(tmp_path / "d.csv", [
        "unit_id,time,channel,value",
        "u1,1.0,s1,0.1", "u1,2.0,s1,0.2",
    ])
    e = _write(tmp_path / "e.csv", ["unit_id,event_time,event", "u1,2.0,1"])
    ds = load_dataset(d, e)
    assert ds.units[0].event_indicator == 1
    assert ds.units[0].event_time == 2.0
    bad = _write(tmp_path / "bad.csv", ["unit_id,event_time,event", "zz,2.0,1"])
    with pytest.raises(DataError, match="unknown unit"):
        load_dataset(d, bad)


def test_long_csv_roundtrip(tmp_path):
    units = [
        UnitRecord("u1", [1.0, 2.0], {"s1": [0.1, 0.2], "s2": [1.0, 0.5]},
                   event_time=2.0, event_indicator=1),
        UnitRecord("u2", [1.0, 2.0, 3.0],
                   {"s1": [0.0, 0.1, 0.2], "s2": [0.3, 0.2, 0.1]}),
    ]
    ds = Dataset(units=units, channel_names=["s1", "s2"])
    save_long_csv(ds, tmp_path / "d.csv", tmp_path / "e.csv")
    back = load_dataset(tmp_path / "d.csv", tmp_path / "e.csv")
    assert back.channel_names == ds.channel_names
    for u, v in zip(ds.units, back.units):
        assert u.unit_id == v.unit_id
        assert u.event_indicator == v.event_indicator
        assert np.array_equal(u.times, v.times)
        for c in ds.channel_names:
            assert np.array_equal(u.channels[c], v.channels[c])


def test_field_csv_roundtrip_and_missing_cells(tmp_path):
    rng = np.random.default_rng(0)
    field = rng.standard_normal((3, 2, 2))
    save_field_csv(np.arange(3.0), field, tmp_path / "f.csv")
    times, back = load_field_csv(tmp_path / "f.csv")
    assert np.array_equal(times, [0.0, 1.0, 2.0])
    assert np.array_equal(back, field)

    lines = (tmp_path / "f.csv").read_text().splitlines()
    _write(tmp_path / "g.csv", lines[:-1])  # drop one cell
    with pytest.raises(DataError, match="missing cells"):
        load_field_csv(tmp_path / "g.csv")


def test_unknown_schema_rejected(tmp_path):
    with pytest.raises(ValueError, match="unknown schema"):
        load_long_csv(tmp_path / "x.csv", "nope")
