"""Shared data model and long-format CSV ingestion.

Units carry multi-channel measurement histories plus an optional event
(time, indicator).  Times are plain real numbers; the time unit (cycles,
days, ...) is metadata only.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

DEGRADATION_HEADER = ["unit_id", "time", "channel", "value"]
EVENTS_HEADER = ["unit_id", "event_time", "event"]
FIELD_HEADER = ["time", "row", "col", "value"]


class DataError(ValueError):
    """Malformed input data."""


@dataclass(frozen=True)
class UnitRecord:
    """One unit's measurement history and event status."""

    unit_id: str
    times: np.ndarray
    channels: dict  # name -> np.ndarray aligned with times
    event_time: float | None = None
    event_indicator: int = 0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.ndim != 1 or len(t) == 0:
            raise DataError(f"unit {self.unit_id}: times must be a nonempty 1-d array")
        if np.any(np.diff(t) <= 0):
            raise DataError(f"unit {self.unit_id}: times must be strictly increasing")
        chans = {k: np.asarray(v, dtype=float) for k, v in self.channels.items()}
        object.__setattr__(self, "channels", chans)
        for name, vals in chans.items():
            if len(vals) != len(t):
                raise DataError(
                    f"unit {self.unit_id}: channel {name} has {len(vals)} values "
                    f"for {len(t)} times"
                )
        if self.event_indicator not in (0, 1):
            raise DataError(f"unit {self.unit_id}: event indicator must be 0 or 1")
        if self.event_time is not None and not np.isclose(self.event_time, t[-1]):
            raise DataError(
                f"unit {self.unit_id}: event_time {self.event_time} must equal "
                f"the last measurement time {t[-1]}"
            )

    @property
    def n_times(self) -> int:
        return len(self.times)

    def channel_matrix(self, names) -> np.ndarray:
        """Stack the named channels into an (n_times, p) matrix."""
        return np.column_stack([self.channels[n] for n in names])


@dataclass(frozen=True)
class Dataset:
    """Collection of units sharing one channel set."""

    units: list
    channel_names: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.units) < 1:
            raise DataError("dataset needs at least one unit")
        want = set(self.channel_names)
        for u in self.units:
            if set(u.channels.keys()) != want:
                raise DataError(
                    f"unit {u.unit_id} channels {sorted(u.channels)} do not match "
                    f"dataset channels {sorted(want)}"
                )

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    def event_units(self):
        return [u for u in self.units if u.event_indicator == 1]


def _read_rows(path, header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if got != header:
            raise DataError(f"{path}: expected header {header}, got {got}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            rows.append((lineno, row))
    return rows


def _parse_float(path, lineno, text, what):
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: bad {what} value {text!r}") from None


def load_long_csv(path, schema: str):
    """Load a long-format CSV.

    schema='degradation' -> Dataset (no events attached),
    schema='events'      -> dict unit_id -> (event_time, indicator),
    schema='field'       -> (times, array of shape (T, rows, cols)).
    """
    if schema == "degradation":
        return _load_degradation(path)
    if schema == "events":
        return _load_events(path)
    if schema == "field":
        return load_field_csv(path)
    raise ValueError(f"unknown schema {schema!r}")


def _load_degradation(path) -> Dataset:
    per_unit = {}
    seen = set()
    channel_names = []
    for lineno, row in _read_rows(path, DEGRADATION_HEADER):
        uid, t_s, chan, v_s = row
        t = _parse_float(path, lineno, t_s, "time")
        v = _parse_float(path, lineno, v_s, "value")
        key = (uid, t, chan)
        if key in seen:
            raise DataError(f"{path}:{lineno}: duplicate measurement {key}")
        seen.add(key)
        per_unit.setdefault(uid, []).append((t, chan, v))
        if chan not in channel_names:
            channel_names.append(chan)
    channel_names = sorted(channel_names)
    units = []
    for uid in sorted(per_unit):
        recs = per_unit[uid]
        times = sorted({t for t, _, _ in recs})
        table = {(t, c): v for t, c, v in recs}
        chans = {}
        for c in channel_names:
            try:
                chans[c] = np.array([table[(t, c)] for t in times])
            except KeyError as e:
                raise DataError(
                    f"{path}: unit {uid} missing channel {c} at time {e.args[0][0]}"
                ) from None
        units.append(UnitRecord(unit_id=uid, times=np.array(times), channels=chans))
    return Dataset(units=units, channel_names=channel_names)


def _load_events(path) -> dict:
    events = {}
    for lineno, row in _read_rows(path, EVENTS_HEADER):
        uid, t_s, e_s = row
        t = _parse_float(path, lineno, t_s, "event_time")
        if e_s not in ("0", "1"):
            raise DataError(f"{path}:{lineno}: event must be 0 or 1, got {e_s!r}")
        if uid in events:
            raise DataError(f"{path}:{lineno}: duplicate event for unit {uid}")
        events[uid] = (t, int(e_s))
    return events


def load_field_csv(path):
    """Load a spatio-temporal field CSV into (times, array (T, rows, cols))."""
    entries = {}
    for lineno, row in _read_rows(path, FIELD_HEADER):
        t = _parse_float(path, lineno, row[0], "time")
        try:
            r, c = int(row[1]), int(row[2])
        except ValueError:
            raise DataError(f"{path}:{lineno}: row/col must be integers") from None
        v = _parse_float(path, lineno, row[3], "value")
        if (t, r, c) in entries:
            raise DataError(f"{path}:{lineno}: duplicate cell ({t},{r},{c})")
        entries[(t, r, c)] = v
    times = sorted({t for t, _, _ in entries})
    rows = max(r for _, r, _ in entries) + 1
    cols = max(c for _, _, c in entries) + 1
    out = np.full((len(times), rows, cols), np.nan)
    for (t, r, c), v in entries.items():
        out[times.index(t), r, c] = v
    if np.any(np.isnan(out)):
        raise DataError(f"{path}: field has missing cells")
    return np.array(times), out


def load_dataset(data_path, events_path=None) -> Dataset:
    """Load degradation measurements and (optionally) join events onto units."""
    ds = _load_degradation(data_path)
    if events_path is None:
        return ds
    events = _load_events(events_path)
    known = {u.unit_id for u in ds.units}
    for uid in events:
        if uid not in known:
            raise DataError(f"{events_path}: event for unknown unit {uid}")
    units = []
    for u in ds.units:
        if u.unit_id in events:
            t, ind = events[u.unit_id]
            if ind == 1 and not np.isclose(t, u.times[-1]):
                raise DataError(
                    f"unit {u.unit_id}: event_time {t} does not coincide with the "
                    f"last measurement time {u.times[-1]}"
                )
            units.append(
                UnitRecord(
                    unit_id=u.unit_id,
                    times=u.times,
                    channels=u.channels,
                    event_time=u.times[-1] if ind == 1 else None,
                    event_indicator=ind,
                )
            )
        else:
            units.append(u)
    return Dataset(units=units, channel_names=ds.channel_names, meta=ds.meta)


def _fmt(x: float) -> str:
    return repr(float(x))


def save_long_csv(dataset: Dataset, path, events_path=None):
    """Write a Dataset in canonical (sorted) long form; round-trips with load."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DEGRADATION_HEADER)
        for u in sorted(dataset.units, key=lambda u: u.unit_id):
            for k, t in enumerate(u.times):
                for c in dataset.channel_names:
                    w.writerow([u.unit_id, _fmt(t), c, _fmt(u.channels[c][k])])
    if events_path is not None:
        with open(events_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(EVENTS_HEADER)
            for u in sorted(dataset.units, key=lambda u: u.unit_id):
                w.writerow([u.unit_id, _fmt(u.times[-1]), u.event_indicator])


def save_field_csv(times, field, path):
    """Write a (T, rows, cols) field array in long form."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELD_HEADER)
        for k, t in enumerate(times):
            for r in range(field.shape[1]):
                for c in range(field.shape[2]):
                    w.writerow([_fmt(t), r, c, _fmt(field[k, r, c])])
