"""Tests for hourly parameter identification."""

import numpy as np
import pytest

from pvsde.estimation import (AllHoursInvalidError, HourSamples,
                              estimate_diffusion, estimate_drift,
                              identify_day, identify_hour)
from pvsde.sde import SdeParams, project_params, simulate_hour

CLOUDY = SdeParams(a=0.2095, b=0.5496, beta=0.1946, c=0.1263, d=0.9930)


def _simulate_hours(theta, n_hours, seed, n_steps=120):
    """Independent hours with excited starts, 30-s Euler transitions."""
    rng = np.random.default_rng(seed)
    frac = (theta.b - theta.c) / (theta.d - theta.c)
    u = (rng.uniform(0.05, 0.35, n_hours) if frac > 0.5
         else rng.uniform(0.65, 0.95, n_hours))
    p0 = theta.c + (theta.d - theta.c) * u
    S = simulate_hour(theta, p0, step_seconds=30.0, n_steps=n_steps,
                      rng=rng, substeps=1)
    return np.vstack([p0[None, :], S])


class TestHourSamples:
    def test_rejects_short_series(self):
        with pytest.raises(ValueError):
            HourSamples(np.zeros(19))

    def test_rejects_nonfinite(self):
        v = np.full(30, 0.5)
        v[3] = np.nan
        with pytest.raises(ValueError):
            HourSamples(v)

    def test_dt_in_model_units(self):
        assert HourSamples(np.linspace(0.2, 0.4, 40), h=30.0).dt == 1.0
        assert HourSamples(np.linspace(0.2, 0.4, 40), h=60.0).dt == 2.0


class TestIdentifyHour:
    def test_drift_recovery(self):
        paths = _simulate_hours(CLOUDY, 40, seed=2)
        est = np.array([identify_hour(HourSamples(paths[:, j]),
                                      seed=4242 + j).params.as_array()
                        for j in range(40)])
        mean = est.mean(axis=0)
        assert mean[0] == pytest.approx(CLOUDY.a, rel=0.20)
        assert mean[1] == pytest.approx(CLOUDY.b, rel=0.20)

    def test_bounds_contain_data(self):
        paths = _simulate_hours(CLOUDY, 5, seed=3)
        for j in range(5):
            v = paths[:, j]
            p = identify_hour(HourSamples(v), seed=11 + j).params
            assert p.c <= v.min() and v.max() <= p.d

    def test_seed_reproducibility(self):
        v = _simulate_hours(CLOUDY, 1, seed=4)[:, 0]
        p1 = identify_hour(HourSamples(v), seed=99).params
        p2 = identify_hour(HourSamples(v), seed=99).params
        assert p1 == p2

    def test_affine_equivariance(self):
        # w = s v + t maps (a, b, beta, c, d) -> (a, s b + t, beta,
        # s c + t, s d + t) exactly, given the same estimator seed
        v = _simulate_hours(CLOUDY, 1, seed=5)[:, 0]
        s, t = 0.25, 0.5
        p = identify_hour(HourSamples(v), seed=7).params
        q = identify_hour(HourSamples(s * v + t), seed=7).params
        assert q.a == pytest.approx(p.a, rel=1e-9)
        assert q.beta == pytest.approx(p.beta, rel=1e-9)
        assert q.b == pytest.approx(s * p.b + t, rel=1e-9)
        assert q.c == pytest.approx(s * p.c + t, rel=1e-9)
        assert q.d == pytest.approx(s * p.d + t, rel=1e-9)

    def test_time_reversal_keeps_level(self):
        # a reversed stationary record has the same marginal law, so the
        # fitted level b must be stable under reversal
        rng = np.random.default_rng(6)
        p0 = np.full(30, CLOUDY.b)
        S = simulate_hour(CLOUDY, p0, n_steps=120, rng=rng, substeps=1)
        b_fwd, b_rev = [], []
        for j in range(30):
            v = S[:, j]
            b_fwd.append(identify_hour(HourSamples(v), seed=21 + j).params.b)
            b_rev.append(identify_hour(HourSamples(v[::-1].copy()),
                                       seed=21 + j).params.b)
        assert np.mean(b_rev) == pytest.approx(np.mean(b_fwd), rel=0.05)

    def test_noiseless_ramp_has_tiny_beta(self):
        b, p0, a = 0.8, 0.2, 0.05
        t = np.arange(121)
        v = b + (p0 - b) * (1 - a) ** t
        p = identify_hour(HourSamples(v), seed=1).params
        assert p.beta < 0.01

    def test_constant_series_degenerate_branch(self):
        rep = identify_hour(HourSamples(np.full(121, 0.4)), seed=1)
        assert "degenerate" in rep.flags and "non-volatile" in rep.flags
        assert rep.params.b == pytest.approx(0.4)
        assert rep.params.c < 0.4 < rep.params.d


class TestSplitEstimators:
    def test_diffusion_then_drift_consistent_with_joint(self):
        v = _simulate_hours(CLOUDY, 1, seed=8)[:, 0]
        c, d, beta, diag = estimate_diffusion(HourSamples(v), seed=3)
        assert diag["converged"] in (True, False)
        assert c <= v.min() and v.max() <= d
        a, b, _ = estimate_drift(HourSamples(v), c, d, beta, seed=3)
        assert 0 < a and c <= b <= d

    def test_drift_zero_beta_uses_relaxation_curve(self):
        b, p0, a_true = 0.7, 0.3, 0.08
        t = np.arange(121)
        v = b + (p0 - b) * (1 - a_true) ** t
        a, b_est, diag = estimate_drift(HourSamples(v), 0.0, 1.0, 0.0)
        assert "deterministic-relaxation" in diag["flags"]
        assert a == pytest.approx(a_true, rel=1e-3)
        assert b_est == pytest.approx(b, rel=1e-3)

    def test_drift_constant_series_flagged(self):
        a, b, diag = estimate_drift(HourSamples(np.full(40, 0.3)),
                                    0.0, 1.0, 0.1)
        assert "degenerate" in diag["flags"]
        assert b == pytest.approx(0.3)

    def test_diffusion_constant_series_flagged(self):
        c, d, beta, diag = estimate_diffusion(HourSamples(np.full(40, 0.3)))
        assert "non-volatile" in diag["flags"]
        assert beta == 0.0 and c < 0.3 < d

    def test_drift_rejects_negative_beta(self):
        with pytest.raises(ValueError):
            estimate_drift(HourSamples(np.linspace(0.2, 0.6, 40)),
                           0.0, 1.0, -0.1)


class TestIdentifyDay:
    def _day_series(self, seed=9):
        rng = np.random.default_rng(seed)
        segs = []
        p = 0.5
        for _ in range(3):
            seg = simulate_hour(CLOUDY, p, n_steps=120, rng=rng, substeps=1)
            p = seg[-1]
            segs.append(seg)
        return np.concatenate(segs)

    def test_shapes_and_hour_count(self):
        values = self._day_series()
        day, reports = identify_day(values, step_seconds=30.0, seed=5)
        assert day.m == 3 and len(reports) == 3
        assert all(r.params.c < r.params.d for r in reports)

    def test_masked_hour_interpolated_from_neighbours(self):
        values = self._day_series()
        mask = np.ones(values.size, dtype=bool)
        mask[:120] = False
        day, reports = identify_day(values, mask, step_seconds=30.0, seed=5)
        assert "interpolated" in reports[0].flags
        # lone neighbour: hour 0 takes hour 1's parameters
        assert day.hours[0] == project_params(*day.hours[1].as_array())

    def test_middle_hour_averages_neighbours(self):
        values = self._day_series()
        mask = np.ones(values.size, dtype=bool)
        mask[120:240] = False
        day, reports = identify_day(values, mask, step_seconds=30.0, seed=5)
        assert "interpolated" in reports[1].flags
        mean_b = 0.5 * (day.hours[0].b + day.hours[2].b)
        assert day.hours[1].b == pytest.approx(mean_b)

    def test_all_invalid_raises(self):
        values = self._day_series()
        with pytest.raises(AllHoursInvalidError):
            identify_day(values, np.zeros(values.size, dtype=bool),
                         step_seconds=30.0)

    def test_mask_length_checked(self):
        with pytest.raises(ValueError):
            identify_day(np.zeros(360), np.ones(10, dtype=bool))
