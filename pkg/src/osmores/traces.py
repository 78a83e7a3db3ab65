"""Hourly PV production traces.

A trace stores PV output in W per installed kWp on a contiguous hourly UTC
grid. Lookups are a zero-order hold: any instant inside an hour returns that
hour's value. Files use the PVGIS hourly time convention ``YYYYMMDD:HHMM``;
the minutes field is floored to the hour bucket (PVGIS stamps hours at
``:10`` or similar).

Panel tilt, azimuth and temperature losses are not modelled; they are assumed
to already be folded into the per-kWp values.
"""

from __future__ import annotations

import calendar
import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np

from .simcore import as_utc

HOUR = timedelta(hours=1)
TIME_FORMAT = "%Y%m%d:%H%M"


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class IrradianceTrace:
    location_id: str
    start: datetime
    power: np.ndarray
    ghi: Optional[np.ndarray] = None

    def __post_init__(self):
        start = as_utc(self.start)
        if start.minute or start.second or start.microsecond:
            raise TraceError(f"trace start {start.isoformat()} is not on an hour boundary")
        object.__setattr__(self, "start", start)
        power = np.asarray(self.power, dtype=float)
        power.setflags(write=False)
        object.__setattr__(self, "power", power)
        if power.ndim != 1 or power.size == 0:
            raise TraceError("trace needs at least one hourly sample")
        if not np.all(np.isfinite(power)) or np.any(power < 0):
            bad = int(np.flatnonzero(~(power >= 0))[0])
            raise TraceError(f"negative or non-finite power_per_kwp at {self.hour_start(bad):%Y%m%d:%H%M}")
        if self.ghi is not None:
            ghi = np.asarray(self.ghi, dtype=float)
            ghi.setflags(write=False)
            if ghi.shape != power.shape:
                raise TraceError("ghi column length differs from power column")
            if not np.all(np.isfinite(ghi)) or np.any(ghi < 0):
                raise TraceError("negative or non-finite ghi value")
            object.__setattr__(self, "ghi", ghi)

    def __len__(self) -> int:
        return int(self.power.size)

    @property
    def end(self) -> datetime:
        """Exclusive end of coverage."""
        return self.start + len(self) * HOUR

    @property
    def coverage(self) -> Tuple[datetime, datetime]:
        """First and last hour_start."""
        return self.start, self.end - HOUR

    def hour_start(self, index: int) -> datetime:
        return self.start + index * HOUR

    @property
    def samples(self) -> List[Tuple[datetime, float, Optional[float]]]:
        ghi = self.ghi if self.ghi is not None else [None] * len(self)
        return [(self.hour_start(i), float(p), None if g is None else float(g))
                for i, (p, g) in enumerate(zip(self.power, ghi))]

    def covers(self, begin: datetime, end: datetime) -> bool:
        """True when ``[begin, end)`` lies inside the trace."""
        return as_utc(begin) >= self.start and as_utc(end) <= self.end

    def index_of(self, t: datetime) -> int:
        t = as_utc(t)
        if t < self.start or t >= self.end:
            first, last = self.coverage
            raise TraceError(
                f"{t.isoformat()} is outside trace {self.location_id!r} "
                f"coverage [{first.isoformat()}, {last.isoformat()} + 1h)"
            )
        return int((t - self.start) // HOUR)

    def power_at(self, t: datetime) -> float:
        return float(self.power[self.index_of(t)])

    def ghi_at(self, t: datetime) -> Optional[float]:
        if self.ghi is None:
            return None
        return float(self.ghi[self.index_of(t)])


def power_at(trace: IrradianceTrace, t: datetime) -> float:
    """PV output (W/kWp) of the hour bucket containing ``t``."""
    return trace.power_at(t)


def _parse_time(text: str, lineno: int) -> datetime:
    try:
        stamp = datetime.strptime(text.strip(), TIME_FORMAT)
    except ValueError:
        raise TraceError(f"line {lineno}: bad time {text!r}, expected YYYYMMDD:HHMM") from None
    return stamp.replace(minute=0, tzinfo=timezone.utc)


def _parse_float(text: str, column: str, lineno: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise TraceError(f"line {lineno}: bad {column} value {text!r}") from None
    if not math.isfinite(value):
        raise TraceError(f"line {lineno}: {column} must be finite")
    if value < 0:
        raise TraceError(f"line {lineno}: {column} must be >= 0, got {value}")
    return value


def load_trace(path: Union[str, Path], location_id: Optional[str] = None) -> IrradianceTrace:
    """Read a ``time,pv_w_per_kwp[,ghi_wm2]`` CSV into a validated trace."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TraceError(f"{path}: empty trace file")
        header = [h.strip() for h in header]
        if header[:2] != ["time", "pv_w_per_kwp"] or header[2:] not in ([], ["ghi_wm2"]):
            raise TraceError(f"{path}: line 1: header must be time,pv_w_per_kwp[,ghi_wm2], got {','.join(header)}")
        has_ghi = len(header) == 3

        start = None
        power: List[float] = []
        ghi: List[float] = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise TraceError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            stamp = _parse_time(row[0], lineno)
            if start is None:
                start = stamp
            expected = start + len(power) * HOUR
            if stamp != expected:
                if stamp > expected:
                    raise TraceError(f"{path}: line {lineno}: gap in hourly grid, missing hour {expected:%Y%m%d:%H%M}")
                raise TraceError(f"{path}: line {lineno}: hour {stamp:%Y%m%d:%H%M} is duplicated or out of order")
            power.append(_parse_float(row[1], "pv_w_per_kwp", lineno))
            if has_ghi:
                ghi.append(_parse_float(row[2], "ghi_wm2", lineno))

    if start is None:
        raise TraceError(f"{path}: trace file has no data rows")
    return IrradianceTrace(
        location_id=location_id or path.stem,
        start=start,
        power=np.array(power),
        ghi=np.array(ghi) if has_ghi else None,
    )


def write_trace(trace: IrradianceTrace, path: Union[str, Path]) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["time", "pv_w_per_kwp"] + (["ghi_wm2"] if trace.ghi is not None else [])
        writer.writerow(header)
        for hour, p, g in trace.samples:
            row = [hour.strftime(TIME_FORMAT), f"{p:.3f}"]
            if g is not None:
                row.append(f"{g:.3f}")
            writer.writerow(row)


def synth_clear_sky(
    peak: float,
    sunrise: float,
    sunset: float,
    days: int,
    start: Optional[datetime] = None,
    location_id: str = "clear-sky",
    sampling: str = "instant",
) -> IrradianceTrace:
    """Half-sine day profile between ``sunrise`` and ``sunset`` (hours), zero at night.

    With ``sampling="instant"`` each hourly sample is the profile at the start
    of the hour, so sunrise 6 / sunset 18 puts exactly ``peak`` in the 12:00
    bucket. ``sampling="mean"`` stores the hour average instead, which keeps
    the daily energy equal to the continuous integral ``peak * L * 2/pi``.
    """
    if not 0 <= sunrise < sunset <= 24:
        raise ValueError(f"need 0 <= sunrise < sunset <= 24, got {sunrise}, {sunset}")
    start = as_utc(start or datetime(2016, 1, 1, tzinfo=timezone.utc))
    length = sunset - sunrise
    hours = np.arange(24, dtype=float)
    if sampling == "instant":
        day = np.where(
            (hours > sunrise) & (hours < sunset),
            peak * np.sin(np.pi * (hours - sunrise) / length),
            0.0,
        )
    elif sampling == "mean":
        a = np.clip(hours, sunrise, sunset)
        b = np.clip(hours + 1, sunrise, sunset)
        day = peak * length / np.pi * (np.cos(np.pi * (a - sunrise) / length) - np.cos(np.pi * (b - sunrise) / length))
    else:
        raise ValueError(f"sampling must be 'instant' or 'mean', got {sampling!r}")
    day = np.clip(day, 0.0, None)
    return IrradianceTrace(location_id, start, np.tile(day, int(days)))


def constant_trace(value: float, hours: int, start: Optional[datetime] = None,
                   location_id: str = "constant") -> IrradianceTrace:
    start = as_utc(start or datetime(2016, 1, 1, tzinfo=timezone.utc))
    return IrradianceTrace(location_id, start, np.full(int(hours), float(value)))


def year_bounds(year: int) -> Tuple[datetime, datetime]:
    return datetime(year, 1, 1, tzinfo=timezone.utc), datetime(year + 1, 1, 1, tzinfo=timezone.utc)


def hours_in_year(year: int) -> int:
    return 8784 if calendar.isleap(year) else 8760


def covers_year(trace: IrradianceTrace, year: int) -> bool:
    return trace.covers(*year_bounds(year))


def annual_energy(trace: IrradianceTrace, peak_kwp: float, year: Optional[int] = None) -> float:
    """Energy (kWh) an installation of ``peak_kwp`` harvests over one calendar year.

    ``year`` defaults to the year the trace starts in; the trace must cover
    every hour of it (8760 or 8784 hours).
    """
    if year is None:
        year = trace.start.year
    first, last = year_bounds(year)
    if not trace.covers(first, last):
        raise TraceError(
            f"trace {trace.location_id!r} does not cover the full year {year} "
            f"({len(trace)} hours from {trace.start:%Y%m%d:%H%M})"
        )
    i0 = trace.index_of(first)
    hourly = trace.power[i0:i0 + hours_in_year(year)]
    return peak_kwp * math.fsum(hourly) / 1000.0


def iter_hours(begin: datetime, end: datetime) -> Iterator[datetime]:
    t = as_utc(begin)
    while t < end:
        yield t
        t += HOUR
