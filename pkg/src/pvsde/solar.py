"""Clear-sky normalization of PV power.

Raw power is divided by rated power times cos(zenith) to strip the
deterministic diurnal pattern; samples with the sun at or below a cutoff
elevation are masked out instead of divided by a vanishing quantity.
The sun position uses the standard declination + equation-of-time +
hour-angle formulation (accuracy ~0.1 degrees), kept behind one function
so a different convention is a one-line change.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OVERPOWER_TOLERANCE = 0.05  # flag raw samples above rated * (1 + this)


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SiteConfig:
    latitude: float            # degrees, [-90, 90]
    longitude: float           # degrees, [-180, 180]
    utc_offset: float          # hours (informational; solar math uses UTC)
    rated_power: float         # kW
    elevation_cutoff: float = 5.0   # degrees

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ConfigurationError(f"latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude <= 180.0:
            raise ConfigurationError(f"longitude out of range: {self.longitude}")
        if self.rated_power <= 0:
            raise ConfigurationError("rated_power must be > 0")
        if not 0.0 < self.elevation_cutoff < 90.0:
            raise ConfigurationError("elevation_cutoff must be in (0, 90)")


@dataclass(frozen=True)
class RawPvSeries:
    """Actual PV power in kW at a fixed sampling step."""

    start_timestamp: float     # UTC seconds
    step_seconds: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.step_seconds <= 0:
            raise ValueError("step_seconds must be > 0")
        if (self.values < 0).any():
            raise ValueError("raw PV power must be >= 0")

    def timestamps(self) -> np.ndarray:
        return self.start_timestamp + self.step_seconds * np.arange(len(self.values))

    def overpower_flags(self, rated_power: float) -> np.ndarray:
        return self.values > rated_power * (1.0 + OVERPOWER_TOLERANCE)


@dataclass(frozen=True)
class PvSeries:
    """Normalized PV power; masked (night) entries are stored as 0."""

    start_timestamp: float
    step_seconds: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if not np.isfinite(self.values).all():
            raise ValueError("normalized values must be finite")

    def timestamps(self) -> np.ndarray:
        return self.start_timestamp + self.step_seconds * np.arange(len(self.values))


_EPOCH_MIN = -631152000.0   # 1950-01-01
_EPOCH_MAX = 4102444800.0   # 2100-01-01


def _fractional_year(ts: np.ndarray) -> np.ndarray:
    """Fractional year angle (radians) from UTC-second timestamps."""
    t64 = ts.astype("float64").astype("datetime64[s]")
    year_start = t64.astype("datetime64[Y]").astype("datetime64[s]")
    doy = (t64 - year_start).astype("timedelta64[s]").astype(float) / 86400.0
    return 2.0 * np.pi / 365.0 * doy


def solar_elevation(site: SiteConfig, timestamp) -> np.ndarray | float:
    """Apparent solar elevation angle in degrees (no refraction).

    Pure and deterministic; supports scalar or array UTC-second input.
    """
    ts = np.asarray(timestamp, dtype=float)
    if (ts < _EPOCH_MIN).any() or (ts > _EPOCH_MAX).any():
        raise ValueError("timestamp outside supported epoch 1950-2100")
    g = _fractional_year(ts)
    eqtime = 229.18 * (0.000075 + 0.001868 * np.cos(g) - 0.032077 * np.sin(g)
                       - 0.014615 * np.cos(2 * g) - 0.040849 * np.sin(2 * g))
    decl = (0.006918 - 0.399912 * np.cos(g) + 0.070257 * np.sin(g)
            - 0.006758 * np.cos(2 * g) + 0.000907 * np.sin(2 * g)
            - 0.002697 * np.cos(3 * g) + 0.00148 * np.sin(3 * g))
    utc_minutes = np.mod(ts, 86400.0) / 60.0
    tst = utc_minutes + eqtime + 4.0 * site.longitude   # true solar time, minutes
    ha = np.deg2rad(tst / 4.0 - 180.0)                  # hour angle
    lat = np.deg2rad(site.latitude)
    cos_zen = (np.sin(lat) * np.sin(decl)
               + np.cos(lat) * np.cos(decl) * np.cos(ha))
    cos_zen = np.clip(cos_zen, -1.0, 1.0)
    elev = 90.0 - np.rad2deg(np.arccos(cos_zen))
    return float(elev) if np.isscalar(timestamp) else elev


def cos_zenith(site: SiteConfig, timestamp):
    """cos of the solar zenith angle, = sin(elevation).

    This is the single place defining the cos(angle) convention used by
    the normalization.
    """
    return np.sin(np.deg2rad(solar_elevation(site, timestamp)))


def daylight_mask(site: SiteConfig, timestamps) -> np.ndarray:
    """True where elevation exceeds the site's cutoff."""
    return np.asarray(solar_elevation(site, timestamps)) > site.elevation_cutoff


def normalize(raw: RawPvSeries, site: SiteConfig):
    """Divide by rated power times cos(zenith); mask low-sun samples.

    Returns (PvSeries, mask).  Masked entries are excluded from modeling
    and stored as 0; tiny negative sensor noise is clipped to 0.
    """
    ts = raw.timestamps()
    elev = solar_elevation(site, ts)
    mask = elev > site.elevation_cutoff
    cz = np.sin(np.deg2rad(elev))
    values = np.zeros_like(raw.values)
    values[mask] = raw.values[mask] / (site.rated_power * cz[mask])
    values = np.maximum(values, 0.0)
    series = PvSeries(start_timestamp=raw.start_timestamp,
                      step_seconds=raw.step_seconds, values=values)
    return series, mask


def denormalize(series: PvSeries, site: SiteConfig) -> RawPvSeries:
    """Inverse of normalize on daytime samples; night samples become 0 kW."""
    ts = series.timestamps()
    elev = solar_elevation(site, ts)
    mask = elev > site.elevation_cutoff
    cz = np.sin(np.deg2rad(elev))
    values = np.zeros_like(series.values)
    values[mask] = series.values[mask] * site.rated_power * cz[mask]
    return RawPvSeries(start_timestamp=series.start_timestamp,
                       step_seconds=series.step_seconds,
                       values=np.maximum(values, 0.0))
