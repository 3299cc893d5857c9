import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pertcv.estimators import (
    EstimatorError,
    InsufficientDataError,
    VarianceAccumulator,
    block_average_variance,
    merge_reports,
    save_acf_profile,
    save_cumulated_acf,
)
from pertcv.rng import RngStream

from oracles import brute_force_sigma2, brute_force_acf


def exact_ou_samples(n, dt, rng, tau=1.0, sigma2_stat=1.0):
    """Exact discretization of dx = -x/tau dt + sqrt(2 sigma2/tau) dW."""
    from scipy.signal import lfilter

    alpha = math.exp(-dt / tau)
    amp = math.sqrt(sigma2_stat * (1.0 - alpha * alpha))
    g = rng.generator()
    x0 = math.sqrt(sigma2_stat) * g.standard_normal()
    noise = amp * g.standard_normal(n)
    return lfilter([1.0], [1.0, -alpha], noise, zi=np.array([alpha * x0]))[0]


def accumulate(values, dt, n_deco, **kw):
    acc = VarianceAccumulator(dt, n_deco, **kw)
    for v in values:
        acc.push(v)
    return acc


class TestPush:
    def test_constant_sequence_has_zero_variance(self):
        acc = accumulate([1.0, 1.0, 1.0], dt=0.5, n_deco=1)
        rep = acc.finalize()
        assert rep.mean == 1.0
        assert rep.asym_variance == 0.0
        assert rep.mean_error_bar == 0.0
        assert rep.variance_error_bar == 0.0

    def test_iid_with_zero_window_gives_plain_variance(self):
        g = RngStream(7).generator()
        x = g.standard_normal(200_000)
        rep = accumulate(x, dt=1.0, n_deco=0).finalize()
        assert rep.asym_variance == pytest.approx(np.var(x), rel=1e-12)
        assert rep.asym_variance == pytest.approx(1.0, abs=0.02)

    def test_rejects_non_finite(self):
        acc = VarianceAccumulator(1.0, 2)
        with pytest.raises(EstimatorError):
            acc.push(float("nan"))
        with pytest.raises(EstimatorError):
            acc.push(float("inf"))

    def test_matches_brute_force_double_sum(self):
        g = RngStream(3).generator()
        for n, n_deco in [(50, 5), (1000, 40), (5000, 200)]:
            x = g.standard_normal(n)
            got = accumulate(x, dt=0.25, n_deco=n_deco).finalize().asym_variance
            want = brute_force_sigma2(x, 0.25, n_deco)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-14)

    def test_extend_matches_push(self):
        g = RngStream(11).generator()
        x = g.standard_normal(3000)
        ref = accumulate(x, dt=0.1, n_deco=37, record_acf=True).finalize()
        acc = VarianceAccumulator(0.1, 37, record_acf=True)
        for chunk in np.array_split(x, [13, 50, 51, 700, 2500]):
            acc.extend(chunk)
        rep = acc.finalize()
        assert rep.asym_variance == pytest.approx(ref.asym_variance, rel=1e-12)
        assert rep.mean == pytest.approx(ref.mean, rel=1e-14)
        np.testing.assert_allclose(rep.acf_profile, ref.acf_profile, rtol=1e-10, atol=1e-13)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(-50, 50), min_size=5, max_size=220),
        st.integers(0, 30),
        st.sampled_from([0.1, 1.0, 2.5]),
    )
    def test_oracle_equivalence_property(self, values, n_deco, dt):
        n_deco = min(n_deco, (len(values) - 1) // 2)
        acc = VarianceAccumulator(dt, n_deco)
        acc.extend(np.array(values))
        got = acc.finalize().asym_variance
        want = brute_force_sigma2(values, dt, n_deco)
        # large common offsets cost a few digits to cancellation in any
        # uncentered streaming scheme, so scale the tolerance accordingly
        offset_loss = 1e-13 * dt * (2 * n_deco + 1) * np.mean(values) ** 2
        scale = max(abs(want), np.var(values) * dt, 1e-12)
        assert abs(got - want) <= 1e-10 * scale + offset_loss

    def test_shift_equivariance(self):
        g = RngStream(23).generator()
        x = g.standard_normal(4000)
        base = accumulate(x, 0.5, 25).finalize()
        shifted = accumulate(x + 17.25, 0.5, 25).finalize()
        assert shifted.mean == pytest.approx(base.mean + 17.25, rel=1e-12)
        assert shifted.asym_variance == pytest.approx(base.asym_variance, rel=1e-10)

    def test_scale_equivariance(self):
        g = RngStream(29).generator()
        x = g.standard_normal(4000)
        base = accumulate(x, 0.5, 25).finalize()
        scaled = accumulate(3.5 * x, 0.5, 25).finalize()
        assert scaled.asym_variance == pytest.approx(3.5**2 * base.asym_variance, rel=1e-10)

    def test_empirical_variance_nonnegative(self):
        g = RngStream(31).generator()
        x = 1e-8 * g.standard_normal(999) + 5.0
        acc = accumulate(x, 1.0, 10, record_acf=True)
        rep = acc.finalize()
        c0 = rep.acf_profile[0]
        assert c0 >= -1e-12 * abs(c0 + rep.mean**2)


class TestFinalize:
    def test_requires_enough_samples(self):
        acc = accumulate([1.0] * 10, dt=1.0, n_deco=5)
        with pytest.raises(InsufficientDataError, match="11"):
            acc.finalize()

    def test_exact_ou_recovers_sigma2_two(self):
        # dx = -x dt + sqrt(2) dW: C(t) = exp(-|t|), sigma^2 = 2 int_0^inf C = 2
        dt, t_deco, total_time = 0.01, 10.0, 1e5
        x = exact_ou_samples(int(total_time / dt), dt, RngStream(2024))
        rep = accumulate(x, dt, int(t_deco / dt)).finalize()
        assert rep.variance_error_bar == pytest.approx(2.0 * math.sqrt(t_deco / total_time) * rep.asym_variance)
        assert abs(rep.asym_variance - 2.0) <= 2.0 * rep.variance_error_bar

    def test_error_bar_scale_at_target_run_length(self):
        # T = 1e4 * t_deco makes the relative variance error bar 2e-2
        dt, t_deco = 0.05, 2.0
        n = int(1e4 * t_deco / dt)
        x = exact_ou_samples(n, dt, RngStream(5))
        rep = accumulate(x, dt, int(t_deco / dt)).finalize()
        assert rep.variance_error_bar / rep.asym_variance == pytest.approx(2e-2, rel=1e-9)

    def test_acf_lag_zero_is_empirical_variance(self):
        g = RngStream(41).generator()
        x = g.standard_normal(2000) * 2.0 + 1.0
        rep = accumulate(x, 0.5, 20, record_acf=True).finalize()
        assert rep.acf_profile[0] == pytest.approx(np.var(x), rel=1e-10)
        np.testing.assert_allclose(rep.acf_profile, brute_force_acf(x, 20), rtol=1e-9, atol=1e-12)

    def test_cumulated_acf_is_running_trapezoid(self):
        g = RngStream(43).generator()
        x = g.standard_normal(1500)
        rep = accumulate(x, 0.5, 12, record_acf=True).finalize()
        manual = np.concatenate(
            [[0.0], np.cumsum(0.25 * (rep.acf_profile[1:] + rep.acf_profile[:-1]))]
        )
        np.testing.assert_allclose(rep.cumulated_acf, manual, rtol=1e-12)

    def test_acf_stride(self):
        g = RngStream(47).generator()
        x = g.standard_normal(1000)
        rep = accumulate(x, 1.0, 20, record_acf=True, acf_stride=5).finalize()
        np.testing.assert_array_equal(rep.acf_lag_times, [0, 5, 10, 15, 20])


class TestMerge:
    def _ou_report(self, stream_id, n=20_000):
        x = exact_ou_samples(n, 0.05, RngStream(99, stream_id))
        return accumulate(x, 0.05, 100).finalize()

    def test_merge_single_is_identity(self):
        rep = self._ou_report(0)
        merged = merge_reports([rep])
        assert merged.mean == rep.mean
        assert merged.asym_variance == rep.asym_variance
        assert merged.mean_error_bar == pytest.approx(rep.mean_error_bar)

    def test_merge_identical_copies_shrinks_bars(self):
        rep = self._ou_report(1)
        merged = merge_reports([rep] * 4)
        assert merged.mean == pytest.approx(rep.mean)
        assert merged.asym_variance == pytest.approx(rep.asym_variance)
        assert merged.mean_error_bar == pytest.approx(rep.mean_error_bar / 2.0)
        assert merged.variance_error_bar == pytest.approx(rep.variance_error_bar / 2.0)

    def test_merge_ou_replicas_recover_sigma2(self):
        reports = [self._ou_report(sid, n=100_000) for sid in range(10)]
        merged = merge_reports(reports)
        assert abs(merged.asym_variance - 2.0) <= 3.0 * merged.variance_error_bar

    def test_merge_rejects_mismatched_parameters(self):
        a = self._ou_report(0)
        x = exact_ou_samples(20_000, 0.05, RngStream(99, 1))
        b = accumulate(x, 0.05, 101).finalize()
        with pytest.raises(EstimatorError):
            merge_reports([a, b])


class TestBlockAveraging:
    def test_constant_input_is_zero(self):
        assert block_average_variance(np.full(1000, 0.5), 50) == 0.0
        assert block_average_variance(np.full(1000, 3.3), 50) <= 1e-25

    def test_iid_normal(self):
        g = RngStream(53).generator()
        x = g.standard_normal(100_000)
        est = block_average_variance(x, 100, dt=1.0)
        n_blocks = 1000
        se = math.sqrt(2.0 / (n_blocks - 1))  # relative std of a chi^2 mean
        assert abs(est - 1.0) <= 3.0 * se

    def test_requires_ten_blocks(self):
        with pytest.raises(EstimatorError):
            block_average_variance(np.arange(95.0), 10)

    def test_cross_checks_truncated_estimator_on_ou(self):
        dt, t_deco = 0.01, 10.0
        x = exact_ou_samples(2_000_000, dt, RngStream(61))
        sokal = accumulate(x, dt, int(t_deco / dt)).finalize().asym_variance
        block = block_average_variance(x, int(2 * t_deco / dt), dt=dt)
        assert block == pytest.approx(sokal, rel=0.15)


def test_csv_export_roundtrip(tmp_path):
    g = RngStream(67).generator()
    x = g.standard_normal(500)
    rep = accumulate(x, 0.5, 8, record_acf=True).finalize()
    acf_path = tmp_path / "acf.csv"
    cum_path = tmp_path / "cum.csv"
    save_acf_profile(rep, acf_path)
    save_cumulated_acf(rep, cum_path)
    lines = acf_path.read_text().splitlines()
    assert lines[0] == "lag_time,acf"
    back = np.array([[float(tok) for tok in line.split(",")] for line in lines[1:]])
    np.testing.assert_array_equal(back[:, 0], rep.acf_lag_times)
    np.testing.assert_array_equal(back[:, 1], rep.acf_profile)
    assert cum_path.read_text().splitlines()[0] == "t,cumulated_acf"
