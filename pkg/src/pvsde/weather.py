"""Weather-report CSV ingestion and feature encoding.

Hourly rows carry temperature, humidity, pressure, precipitation, wind
speed and direction, cloud okta, and irradiance.  Wind direction (a
16-point compass label or degrees) is encoded as (sin, cos) of the compass
angle measured clockwise from north, giving 9 numeric features per hour;
a day is the hour-major concatenation over the daytime hour grid.  Missing
numeric fields become NaN at parse time and are imputed with training-set
medians before model use.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .ensemble import WeatherDay

FEATURE_NAMES = ("temperature", "humidity", "pressure", "precipitation",
                 "wind_speed", "wind_sin", "wind_cos", "cloud", "irradiance")
CSV_COLUMNS = ("timestamp", "temperature", "humidity", "pressure",
               "precipitation", "wind_speed", "wind_direction", "cloud",
               "irradiance")
MAX_MISSING_FRACTION = 0.20

# 16-point compass, degrees clockwise from north.
COMPASS_DEGREES = {
    "N": 0.0, "NNE": 22.5, "NE": 45.0, "ENE": 67.5, "E": 90.0,
    "ESE": 112.5, "SE": 135.0, "SSE": 157.5, "S": 180.0, "SSW": 202.5,
    "SW": 225.0, "WSW": 247.5, "W": 270.0, "WNW": 292.5, "NW": 315.0,
    "NNW": 337.5,
}


class WeatherFormatError(ValueError):
    """Malformed weather CSV content; message carries the line number."""


@dataclass(frozen=True)
class HourGrid:
    """The m consecutive clock hours treated as daytime."""

    start_hour: int = 7
    m: int = 12

    def hours(self):
        return range(self.start_hour, self.start_hour + self.m)


def wind_to_angle(token: str, line: int) -> float:
    token = token.strip()
    if token.upper() in COMPASS_DEGREES:
        return COMPASS_DEGREES[token.upper()]
    try:
        deg = float(token)
    except ValueError:
        raise WeatherFormatError(
            f"line {line}: unknown wind direction {token!r}") from None
    return deg % 360.0


def encode_hour(temperature, humidity, pressure, precipitation, wind_speed,
                wind_angle_deg, cloud, irradiance) -> np.ndarray:
    """One hour's 9-feature slice in FEATURE_NAMES order."""
    rad = math.radians(wind_angle_deg) if np.isfinite(wind_angle_deg) else np.nan
    return np.array([temperature, humidity, pressure, precipitation,
                     wind_speed,
                     math.sin(rad) if np.isfinite(rad) else np.nan,
                     math.cos(rad) if np.isfinite(rad) else np.nan,
                     cloud, irradiance], dtype=float)


def _float_field(row, key, line):
    raw = (row.get(key) or "").strip()
    if raw == "":
        return math.nan
    try:
        return float(raw)
    except ValueError:
        raise WeatherFormatError(
            f"line {line}: bad numeric value {raw!r} for {key}") from None


def _validate(row_vals, line):
    hum, precip, cloud = (row_vals["humidity"], row_vals["precipitation"],
                          row_vals["cloud"])
    if np.isfinite(hum) and not 0.0 <= hum <= 100.0:
        raise WeatherFormatError(f"line {line}: humidity {hum} out of [0, 100]")
    if np.isfinite(precip) and precip < 0:
        raise WeatherFormatError(f"line {line}: negative precipitation {precip}")
    if np.isfinite(cloud) and not 0.0 <= cloud <= 9.0:
        raise WeatherFormatError(f"line {line}: cloud okta {cloud} out of [0, 9]")


def ingest_weather(path: str, grid: HourGrid = HourGrid()):
    """Parse a weather CSV into per-day raw feature matrices.

    Returns ``(days, dropped)``: ``days`` is a list of ``(date, features)``
    with features of shape (m * 9,) possibly containing NaN for missing
    fields; ``dropped`` lists dates discarded for exceeding 20% missing.
    """
    per_day: dict[str, dict[int, np.ndarray]] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise WeatherFormatError(
                f"line 1: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            ts = (row.get("timestamp") or "").strip()
            if len(ts) < 13 or ts[10] not in "T ":
                raise WeatherFormatError(f"line {line}: bad timestamp {ts!r}")
            date, hour = ts[:10], int(ts[11:13])
            vals = {k: _float_field(row, k, line)
                    for k in ("temperature", "humidity", "pressure",
                              "precipitation", "wind_speed", "cloud",
                              "irradiance")}
            _validate(vals, line)
            wd_raw = (row.get("wind_direction") or "").strip()
            angle = wind_to_angle(wd_raw, line) if wd_raw else math.nan
            per_day.setdefault(date, {})[hour] = encode_hour(
                vals["temperature"], vals["humidity"], vals["pressure"],
                vals["precipitation"], vals["wind_speed"], angle,
                vals["cloud"], vals["irradiance"])

    days, dropped = [], []
    p = len(FEATURE_NAMES)
    for date in sorted(per_day):
        feats = np.full((grid.m, p), np.nan)
        for i, hour in enumerate(grid.hours()):
            if hour in per_day[date]:
                feats[i] = per_day[date][hour]
        if np.isnan(feats).mean() > MAX_MISSING_FRACTION:
            dropped.append(date)
        else:
            days.append((date, feats.ravel()))
    return days, dropped


def impute_days(raw_days, medians=None):
    """Fill NaN features with medians and build WeatherDay objects.

    ``medians`` (per flattened feature position) defaults to the medians of
    the given days, and is returned so a training-set fit can be reused on
    test days.
    """
    X = np.stack([f for _, f in raw_days])
    if medians is None:
        with np.errstate(all="ignore"):
            medians = np.nanmedian(X, axis=0)
        medians = np.where(np.isfinite(medians), medians, 0.0)
    X = np.where(np.isnan(X), medians, X)
    m = X.shape[1] // len(FEATURE_NAMES)
    names = tuple(f"h{i}_{n}" for i in range(m) for n in FEATURE_NAMES)
    days = [WeatherDay(date=date, features=X[j], feature_names=names)
            for j, (date, _) in enumerate(raw_days)]
    return days, medians


def write_weather_csv(path: str, rows) -> None:
    """Inverse of ingest_weather for generated datasets.

    ``rows`` yields dicts keyed by CSV_COLUMNS.
    """
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(CSV_COLUMNS))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
