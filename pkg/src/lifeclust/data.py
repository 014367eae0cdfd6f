"""Subject records, datasets and the delimited on-disk format.

A subject is a sequence of activity events observed inside a window
``[0, t_m]``.  Only discrete, nonnegative integer times are accepted;
fractional times are rejected rather than rounded.

CSV schema (header required, one row per subject)::

    id, joining_time, inter_event_times, termination_flag, true_lifetime, cov_0..cov_{p-1}

``inter_event_times`` is a semicolon-joined list of integers,
``termination_flag`` is 0, 1 or empty (empty means signals unavailable),
``true_lifetime`` is an integer or empty.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError


def _as_int_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.size == 0:
        return arr.astype(np.int64).reshape(-1)
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.floor(arr)
        if not np.all(arr == rounded):
            raise DataFormatError(f"{name} must be integers, got fractional values")
    return arr.astype(np.int64).reshape(-1)


@dataclass(frozen=True)
class SubjectRecord:
    """One subject: covariates plus its observed event history."""

    id: str
    covariates: np.ndarray
    inter_event_times: np.ndarray
    joining_time: int = 0
    event_covariates: list[np.ndarray] | None = None
    termination_flags: np.ndarray | None = None
    true_lifetime: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "covariates",
                           np.asarray(self.covariates, dtype=float).reshape(-1))
        times = _as_int_array(self.inter_event_times, "inter_event_times")
        if np.any(times < 0):
            raise DataFormatError("inter_event_times must be nonnegative")
        object.__setattr__(self, "inter_event_times", times)
        if self.joining_time < 0 or int(self.joining_time) != self.joining_time:
            raise DataFormatError("joining_time must be a nonnegative integer")
        object.__setattr__(self, "joining_time", int(self.joining_time))
        if self.event_covariates is not None and len(self.event_covariates) != len(times):
            raise DataFormatError("event_covariates length must match inter_event_times")
        if self.termination_flags is not None:
            flags = _as_int_array(self.termination_flags, "termination_flags")
            if len(flags) != len(times):
                raise DataFormatError("termination_flags length must match inter_event_times")
            if not np.all((flags == 0) | (flags == 1)):
                raise DataFormatError("termination_flags must be 0/1")
            ones = np.flatnonzero(flags)
            if len(ones) > 1 or (len(ones) == 1 and ones[0] != len(flags) - 1):
                raise DataFormatError("at most one termination flag, and it must be last")
            object.__setattr__(self, "termination_flags", flags)
        if self.true_lifetime is not None:
            if self.true_lifetime < 0 or int(self.true_lifetime) != self.true_lifetime:
                raise DataFormatError("true_lifetime must be a nonnegative integer")
            object.__setattr__(self, "true_lifetime", int(self.true_lifetime))

    @property
    def observed_lifetime(self) -> int:
        """H: sum of all inter-event times inside the observation window."""
        return int(self.inter_event_times.sum())

    @property
    def terminated(self) -> bool | None:
        """Last termination flag, or None when signals are unavailable."""
        if self.termination_flags is None:
            return None
        if len(self.termination_flags) == 0:
            return False
        return bool(self.termination_flags[-1])

    def event_count(self, t: int) -> int:
        """Q(t): number of events between joining and absolute time t."""
        rel = t - self.joining_time
        if rel < 0 or len(self.inter_event_times) == 0:
            return 0
        return int(np.searchsorted(np.cumsum(self.inter_event_times), rel, side="right"))


@dataclass
class Dataset:
    """A collection of subjects observed over the same window [0, t_m]."""

    subjects: list[SubjectRecord]
    t_m: int
    t_max: int = field(init=False)

    def __post_init__(self):
        if self.t_m < 0 or int(self.t_m) != self.t_m:
            raise DataFormatError("t_m must be a nonnegative integer")
        self.t_m = int(self.t_m)
        lifetimes = [s.observed_lifetime for s in self.subjects]
        self.t_max = max(lifetimes, default=0)
        for s, h in zip(self.subjects, lifetimes):
            if s.joining_time + h > self.t_m:
                raise DataFormatError(
                    f"subject {s.id}: joining_time + observed lifetime exceeds t_m")

    def __len__(self) -> int:
        return len(self.subjects)

    def observed_lifetimes(self) -> np.ndarray:
        return np.array([s.observed_lifetime for s in self.subjects], dtype=np.int64)

    def inactive_periods(self) -> np.ndarray:
        """chi per subject: time between the last observed event and t_m."""
        h = self.observed_lifetimes()
        joins = np.array([s.joining_time for s in self.subjects], dtype=np.int64)
        return self.t_m - joins - h

    def covariate_matrix(self) -> np.ndarray:
        if not self.subjects:
            return np.zeros((0, 0))
        return np.stack([s.covariates for s in self.subjects])

    def has_termination_signals(self) -> bool:
        return bool(self.subjects) and all(
            s.termination_flags is not None for s in self.subjects)


def _parse_times(cell: str) -> np.ndarray:
    cell = cell.strip()
    if not cell:
        return np.zeros(0, dtype=np.int64)
    try:
        return np.array([int(x) for x in cell.split(";")], dtype=np.int64)
    except ValueError as exc:
        raise DataFormatError(f"bad inter_event_times cell {cell!r}") from exc


_FIXED_COLUMNS = ["id", "joining_time", "inter_event_times", "termination_flag",
                  "true_lifetime"]


def read_dataset_csv(path: str | Path, t_m: int) -> Dataset:
    """Load a Dataset from the delimited format; t_m comes from the caller."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, header required")
        header = [h.strip() for h in header]
        if header[: len(_FIXED_COLUMNS)] != _FIXED_COLUMNS:
            raise DataFormatError(
                f"{path}: header must start with {','.join(_FIXED_COLUMNS)}")
        cov_names = header[len(_FIXED_COLUMNS):]
        expected = [f"cov_{i}" for i in range(len(cov_names))]
        if cov_names != expected:
            raise DataFormatError(f"{path}: covariate columns must be cov_0..cov_{{p-1}}")
        subjects = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}:{lineno}: expected {len(header)} cells")
            sid, join_cell, times_cell, flag_cell, tl_cell = row[:5]
            times = _parse_times(times_cell)
            flag_cell = flag_cell.strip()
            if flag_cell == "":
                flags = None
            elif flag_cell in ("0", "1"):
                flags = np.zeros(len(times), dtype=np.int64)
                if flag_cell == "1":
                    if len(times) == 0:
                        raise DataFormatError(
                            f"{path}:{lineno}: termination flag without events")
                    flags[-1] = 1
            else:
                raise DataFormatError(f"{path}:{lineno}: termination_flag must be 0/1/empty")
            tl_cell = tl_cell.strip()
            true_lifetime = int(tl_cell) if tl_cell else None
            try:
                covs = np.array([float(c) for c in row[5:]], dtype=float)
                joining = int(join_cell)
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad numeric cell") from exc
            subjects.append(SubjectRecord(
                id=sid, covariates=covs, inter_event_times=times,
                joining_time=joining, termination_flags=flags,
                true_lifetime=true_lifetime))
    return Dataset(subjects=subjects, t_m=t_m)


def write_dataset_csv(data: Dataset, path: str | Path) -> None:
    path = Path(path)
    p = len(data.subjects[0].covariates) if data.subjects else 0
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_FIXED_COLUMNS + [f"cov_{i}" for i in range(p)])
        for s in data.subjects:
            term = s.terminated
            writer.writerow(
                [s.id, s.joining_time,
                 ";".join(str(int(t)) for t in s.inter_event_times),
                 "" if term is None else int(term),
                 "" if s.true_lifetime is None else s.true_lifetime]
                + [repr(float(c)) for c in s.covariates])


def read_labels_csv(path: str | Path) -> dict[str, int]:
    """Read an id,label table; extra columns are ignored."""
    path = Path(path)
    labels: dict[str, int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[0].strip() != "id":
            raise DataFormatError(f"{path}: labels header must start with id,label")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                labels[row[0]] = int(row[1])
            except (IndexError, ValueError) as exc:
                raise DataFormatError(f"{path}:{lineno}: bad label row") from exc
    return labels


def write_labels_csv(ids, labels, path: str | Path, alpha: np.ndarray | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        extra = [f"alpha_{k}" for k in range(alpha.shape[1])] if alpha is not None else []
        writer.writerow(["id", "label"] + extra)
        for i, (sid, lab) in enumerate(zip(ids, labels)):
            row = [sid, int(lab)]
            if alpha is not None:
                row += [repr(float(a)) for a in alpha[i]]
            writer.writerow(row)
