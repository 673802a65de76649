"""Forecast evaluation metrics for simulation fans against observed series.

Covers interval coverage (PICP), distributional distance (discrete KL over
a shared histogram), quantile loss (rho-risk), point-forecast errors of
the median path (ND, NRMSE), and an autocorrelation mismatch over a short
lag window.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .sde import SimulationFan

KL_BINS = 50
KL_EPS = 1e-9
ACF_DENOM_FLOOR = 0.05
DEFAULT_ACF_WINDOW_SECONDS = 3 * 3600.0


class UndefinedMetricError(ValueError):
    """A metric's normalizer vanishes (e.g. all-zero actual series)."""


@dataclass(frozen=True)
class EvalInput:
    """A simulation fan aligned with the actual series it forecasts."""

    fan: SimulationFan
    actual: np.ndarray
    mask: np.ndarray | None = None      # True marks valid samples

    def __post_init__(self):
        a = np.asarray(self.actual, dtype=float)
        object.__setattr__(self, "actual", a)
        if a.size != self.fan.n_steps:
            raise ValueError("actual length must match the fan")
        m = self.mask
        m = np.ones(a.size, dtype=bool) if m is None else np.asarray(m, bool)
        object.__setattr__(self, "mask", m)
        if m.size != a.size:
            raise ValueError("mask length must match the series")
        if not m.any():
            raise ValueError("need at least one unmasked sample")


@dataclass
class MetricReport:
    picp90: float
    kl: float
    risk50: float
    risk90: float
    nd: float
    nrmse: float
    acf_mismatch: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    def to_csv_row(self) -> str:
        keys = ("picp90", "kl", "risk50", "risk90", "nd", "nrmse",
                "acf_mismatch")
        return ",".join(repr(float(getattr(self, k))) for k in keys)


def picp(inp: EvalInput, level: float = 0.90) -> float:
    """Fraction of valid steps inside the central `level` interval."""
    tail = (1.0 - level) / 2.0
    q_lo = inp.fan.quantile(tail)
    q_hi = inp.fan.quantile(1.0 - tail)
    m = inp.mask
    a = inp.actual[m]
    return float(np.mean((q_lo[m] <= a) & (a <= q_hi[m])))


def kl_divergence(actual_samples, forecast_samples, n_bins: int = KL_BINS,
                  eps: float = KL_EPS) -> float:
    """Discrete KL D(actual || forecast) on a shared equal-width histogram."""
    a = np.asarray(actual_samples, dtype=float).ravel()
    f = np.asarray(forecast_samples, dtype=float).ravel()
    if a.size == 0 or f.size == 0:
        raise ValueError("both sample sets must be nonempty")
    lo = min(a.min(), f.min())
    hi = max(a.max(), f.max())
    if hi <= lo:
        hi = lo + 1e-12
    edges = np.linspace(lo, hi, n_bins + 1)
    pa = np.histogram(a, bins=edges)[0] + eps
    pf = np.histogram(f, bins=edges)[0] + eps
    pa = pa / pa.sum()
    pf = pf / pf.sum()
    return float(np.sum(pa * np.log(pa / pf)))


def rho_risk(inp: EvalInput, rho: float) -> float:
    """Normalized quantile loss of the fan's rho-quantile path."""
    q = inp.fan.quantile(rho)[inp.mask]
    a = inp.actual[inp.mask]
    denom = float(np.sum(np.abs(a)))
    if denom <= 0:
        raise UndefinedMetricError("rho-risk undefined for all-zero actual")
    above = a > q
    loss = (a - q) * np.where(above, rho, -(1.0 - rho))
    return float(2.0 * loss.sum() / denom)


def nd(point_path, actual, mask=None) -> float:
    """Normalized 1-norm deviation of a point forecast."""
    p, a = _masked_pair(point_path, actual, mask)
    denom = float(np.sum(np.abs(a)))
    if denom <= 0:
        raise UndefinedMetricError("ND undefined for all-zero actual")
    return float(np.sum(np.abs(p - a)) / denom)


def nrmse(point_path, actual, mask=None) -> float:
    """Root-mean-square error normalized by the mean absolute actual."""
    p, a = _masked_pair(point_path, actual, mask)
    denom = float(np.mean(np.abs(a)))
    if denom <= 0:
        raise UndefinedMetricError("NRMSE undefined for all-zero actual")
    return float(np.sqrt(np.mean((p - a) ** 2)) / denom)


def _masked_pair(p, a, mask):
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    if p.size != a.size:
        raise ValueError("paths must be aligned")
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        p, a = p[m], a[m]
    return p, a


def _acf(x, n_lags: int) -> np.ndarray:
    """Empirical autocorrelation at lags 1..n_lags (rows of a 2-D input
    are treated as independent series).  FFT-based; lag-k covariance is
    averaged over the n - k available products."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    n = X.shape[1]
    xc = X - X.mean(axis=1, keepdims=True)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, n=nfft, axis=1)
    sums = np.fft.irfft(f * np.conj(f), n=nfft, axis=1)[:, :n_lags + 1]
    var = sums[:, 0] / n
    counts = n - np.arange(1, n_lags + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        acf = (sums[:, 1:] / counts) / np.maximum(var, 1e-300)[:, None]
    acf = np.where(var[:, None] > 0, acf, 0.0)
    return acf[0] if np.ndim(x) == 1 else acf


def autocorr_mismatch(inp: EvalInput,
                      window_seconds: float = DEFAULT_ACF_WINDOW_SECONDS
                      ) -> float:
    """Mean floored-relative gap between fan and actual autocorrelations.

    Uses the longest contiguous unmasked stretch; the fan's ACF is the
    average over its paths on the same stretch.
    """
    start, stop = _longest_true_run(inp.mask)
    n_lags = int(window_seconds / inp.fan.step_seconds)
    n_lags = min(n_lags, stop - start - 1)
    if n_lags < 1:
        raise ValueError("not enough contiguous data for the ACF window")
    acf_a = _acf(inp.actual[start:stop], n_lags)
    acf_f = _acf(inp.fan.paths[:, start:stop], n_lags).mean(axis=0)
    denom = np.maximum(np.abs(acf_a), ACF_DENOM_FLOOR)
    return float(np.mean(np.abs(acf_f - acf_a) / denom))


def _longest_true_run(mask):
    best, cur, best_start, cur_start = 0, 0, 0, 0
    for i, v in enumerate(mask):
        if v:
            if cur == 0:
                cur_start = i
            cur += 1
            if cur > best:
                best, best_start = cur, cur_start
        else:
            cur = 0
    return best_start, best_start + best


def evaluate(inp: EvalInput) -> MetricReport:
    """Full metric battery for one day."""
    median = inp.fan.quantile(0.5)
    m = inp.mask
    return MetricReport(
        picp90=picp(inp, 0.90),
        kl=kl_divergence(inp.actual[m], inp.fan.paths[:, m]),
        risk50=rho_risk(inp, 0.5),
        risk90=rho_risk(inp, 0.9),
        nd=nd(median, inp.actual, m),
        nrmse=nrmse(median, inp.actual, m),
        acf_mismatch=autocorr_mismatch(inp),
    )
