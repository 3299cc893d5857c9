"""Streaming estimation of means, asymptotic variances, and their error bars.

For a time series ``x_1 .. x_n`` sampled every ``dt`` along an ergodic
trajectory, the asymptotic variance ``sigma^2 = lim T Var(mean)`` is
estimated by a truncated autocorrelation sum.  With ``N_deco = t_deco / dt``
the estimator used here is the symmetric-truncation form

    sigma2_hat = (dt / n) * sum_i sum_{|j| <= N_deco, 1 <= i+j <= n}
                 (x_i - xbar) (x_{i+j} - xbar),

i.e. the inner window simply shrinks near both ends of the series and the
outer average divides by ``n``.  Centering on the empirical mean makes a
constant series give exactly zero; the truncation bias is O(t_deco / T).
Relative to the textbook form ``dt/n * sum x_i x_{i+j} - 2 t_deco xbar^2``
the difference is O(dt) * mean^2 plus the boundary terms.

The double sum is never materialized: a rolling window sum ``S_i`` over the
last ``N_deco + 1`` values gives the quadratic part via
``sum_i x_i S_i``, so each sample costs O(1) (the optional per-lag ACF
profile costs O(N_deco / stride) per sample and can be disabled).  Running
sums use compensated (Kahan) addition so that 1e8-sample runs do not lose
digits.

Error bars:

* on the mean:      ``sqrt(sigma2 / T)`` with ``T = n dt``;
* on the variance:  ``2 sigma2 sqrt(t_deco / T)``, the relative standard
  deviation of the truncated estimator for an effectively Gaussian signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "EstimatorError",
    "InsufficientDataError",
    "VarianceAccumulator",
    "VarianceReport",
    "merge_reports",
    "block_average_variance",
    "save_acf_profile",
    "save_cumulated_acf",
]

_REFRESH_INTERVAL = 1 << 20  # rolling-sum rebuild period, bounds fp drift


class EstimatorError(ValueError):
    """Invalid input pushed into or requested from an accumulator."""


class InsufficientDataError(EstimatorError):
    """Raised by finalize() when fewer than ``2 N_deco + 1`` samples were seen."""


class _Kahan:
    """Compensated scalar accumulator."""

    __slots__ = ("value", "_c")

    def __init__(self):
        self.value = 0.0
        self._c = 0.0

    def add(self, x: float) -> None:
        y = x - self._c
        t = self.value + y
        self._c = (t - self.value) - y
        self.value = t


@dataclass(frozen=True)
class VarianceReport:
    """Finalized statistics of one streamed observable."""

    mean: float
    asym_variance: float
    mean_error_bar: float
    variance_error_bar: float
    n_samples: int
    dt: float
    n_deco: int
    acf_lag_times: Optional[np.ndarray] = None
    acf_profile: Optional[np.ndarray] = None
    cumulated_acf: Optional[np.ndarray] = None

    @property
    def t_deco(self) -> float:
        return self.n_deco * self.dt

    @property
    def total_time(self) -> float:
        return self.n_samples * self.dt


class VarianceAccumulator:
    """Single-owner streaming accumulator for one scalar observable.

    Parameters
    ----------
    dt : sampling interval of the pushed values.
    n_deco : truncation lag ``t_deco / dt`` of the autocorrelation window.
    record_acf : also accumulate the per-lag autocorrelation profile
        (O(n_deco / acf_stride) extra work per sample).
    acf_stride : record only every ``acf_stride``-th lag of the profile.
    """

    def __init__(self, dt: float, n_deco: int, record_acf: bool = False, acf_stride: int = 1):
        if not (dt > 0 and math.isfinite(dt)):
            raise EstimatorError(f"dt must be positive and finite, got {dt}")
        if n_deco < 0:
            raise EstimatorError(f"n_deco must be non-negative, got {n_deco}")
        if acf_stride < 1:
            raise EstimatorError("acf_stride must be >= 1")
        self.dt = float(dt)
        self.n_deco = int(n_deco)
        self.count = 0
        self._total = _Kahan()
        self._total_sq = _Kahan()
        self._cross = _Kahan()       # sum_i x_i * S_i
        self._weighted = _Kahan()    # sum_i w_i x_i with start-truncated weights
        self._window = _Kahan()      # rolling sum S over the last n_deco+1 values
        self._buffer = np.zeros(self.n_deco + 1)
        self._pos = 0
        self._since_refresh = 0
        self._acf_lags = np.arange(0, self.n_deco + 1, acf_stride) if record_acf else None
        self._acf_sums = np.zeros(self._acf_lags.size) if record_acf else None

    # -- streaming -----------------------------------------------------------

    def push(self, value: float) -> None:
        """Fold one sample into all running statistics (O(1) amortized)."""
        x = float(value)
        if not math.isfinite(x):
            raise EstimatorError(f"non-finite observable value pushed: {value!r}")
        n_prev = self.count
        cap = self.n_deco + 1
        if n_prev >= cap:
            self._window.add(-self._buffer[self._pos])
        self._window.add(x)
        if self._acf_sums is not None:
            self._acf_update(x, n_prev)
        self._buffer[self._pos] = x
        self._pos = (self._pos + 1) % cap
        self.count = n_prev + 1
        self._since_refresh += 1
        if self._since_refresh >= _REFRESH_INTERVAL:
            self._refresh_window()
        self._total.add(x)
        self._total_sq.add(x * x)
        self._cross.add(x * self._window.value)
        head_deficit = max(0, self.n_deco - n_prev)
        self._weighted.add((2 * self.n_deco + 1 - head_deficit) * x)

    def _acf_update(self, x: float, n_prev: int) -> None:
        lags = self._acf_lags
        for idx in range(lags.size):
            j = lags[idx]
            if j == 0:
                self._acf_sums[idx] += x * x
            elif j <= n_prev:
                self._acf_sums[idx] += x * self._buffer[(self._pos - j) % (self.n_deco + 1)]

    def _refresh_window(self) -> None:
        live = min(self.count, self.n_deco + 1)
        self._window = _Kahan()
        for v in self._ordered_tail(live):
            self._window.add(v)
        self._since_refresh = 0

    def extend(self, values: np.ndarray) -> None:
        """Vectorized push of a whole chunk; same statistics as repeated push()."""
        chunk = np.ascontiguousarray(values, dtype=float).ravel()
        m = chunk.size
        if m == 0:
            return
        if not np.all(np.isfinite(chunk)):
            raise EstimatorError("non-finite observable value pushed")
        n_prev = self.count
        nd = self.n_deco
        prev = self._ordered_tail(min(n_prev, nd))
        ext = np.concatenate([prev, chunk])
        p = prev.size
        cs = np.concatenate([[0.0], np.cumsum(ext)])
        k = np.arange(m)
        win = np.minimum(nd + 1, n_prev + k + 1)       # samples inside each window
        s_vals = cs[p + k + 1] - cs[p + k + 1 - win]
        self._total.add(float(np.sum(chunk)))
        self._total_sq.add(float(chunk @ chunk))
        self._cross.add(float(chunk @ s_vals))
        deficits = np.maximum(0, nd - n_prev - k)
        self._weighted.add(float((2 * nd + 1 - deficits) @ chunk))
        if self._acf_sums is not None:
            for idx, j in enumerate(self._acf_lags):
                lo = max(0, j - n_prev)
                if lo < m:
                    self._acf_sums[idx] += float(ext[p + lo - j:p + m - j] @ chunk[lo:])
        # rebuild the ring buffer from the trailing values
        tail = ext[-(nd + 1):] if ext.size >= nd + 1 else ext
        self._buffer[:tail.size] = tail
        self._pos = tail.size % (nd + 1)
        self.count = n_prev + m
        self._window = _Kahan()
        self._window.add(float(tail.sum()))
        self._since_refresh = 0

    def _ordered_tail(self, k: int) -> np.ndarray:
        """Last ``k`` pushed values, oldest first."""
        if k == 0:
            return np.empty(0)
        cap = self.n_deco + 1
        idx = (self._pos - k + np.arange(k)) % cap
        return self._buffer[idx]

    # -- finalization ---------------------------------------------------------

    def finalize(self) -> VarianceReport:
        """Close the stream and return the report (the accumulator stays usable)."""
        n = self.count
        nd = self.n_deco
        needed = 2 * nd + 1
        if n < needed:
            raise InsufficientDataError(
                f"{n} samples seen but the window n_deco={nd} needs at least {needed}"
            )
        mean = self._total.value / n
        tail = self._ordered_tail(min(n, nd))          # x_{n-nd+1} .. x_n, oldest first
        tail_weights = np.arange(1, tail.size + 1)     # deficits 1 .. nd
        weighted = self._weighted.value - float(tail_weights @ tail)
        pair_count = n * (2 * nd + 1) - nd * (nd + 1)
        quad = 2.0 * self._cross.value - self._total_sq.value
        sigma2 = (self.dt / n) * (quad - 2.0 * mean * weighted + mean * mean * pair_count)
        total_time = n * self.dt
        t_deco = nd * self.dt
        mean_err = math.sqrt(max(sigma2, 0.0) / total_time)
        var_err = 2.0 * max(sigma2, 0.0) * math.sqrt(t_deco / total_time) if nd > 0 else 0.0
        lag_times = profile = cumulated = None
        if self._acf_sums is not None:
            lags = self._acf_lags
            profile = self._acf_sums / (n - lags) - mean * mean
            lag_times = lags * self.dt
            cumulated = np.concatenate(
                [[0.0], np.cumsum(0.5 * np.diff(lag_times) * (profile[1:] + profile[:-1]))]
            )
        return VarianceReport(
            mean=mean,
            asym_variance=sigma2,
            mean_error_bar=mean_err,
            variance_error_bar=var_err,
            n_samples=n,
            dt=self.dt,
            n_deco=nd,
            acf_lag_times=lag_times,
            acf_profile=profile,
            cumulated_acf=cumulated,
        )


def merge_reports(reports: Sequence[VarianceReport]) -> VarianceReport:
    """Pool reports from independent, equally long replicas.

    The pooled mean and asymptotic variance are plain averages; both error
    bars shrink by ``sqrt(K)``.
    """
    if not reports:
        raise EstimatorError("nothing to merge")
    first = reports[0]
    for r in reports[1:]:
        if (r.dt, r.n_deco, r.n_samples) != (first.dt, first.n_deco, first.n_samples):
            raise EstimatorError(
                "replica reports disagree on (dt, n_deco, n_samples): "
                f"{(r.dt, r.n_deco, r.n_samples)} vs {(first.dt, first.n_deco, first.n_samples)}"
            )
    k = len(reports)
    mean = float(np.mean([r.mean for r in reports]))
    sigma2 = float(np.mean([r.asym_variance for r in reports]))
    total_time = first.total_time
    scale = math.sqrt(k)
    mean_err = math.sqrt(max(sigma2, 0.0) / total_time) / scale
    var_err = 2.0 * max(sigma2, 0.0) * math.sqrt(first.t_deco / total_time) / scale if first.n_deco else 0.0
    have_acf = all(r.acf_profile is not None for r in reports)
    lag_times = first.acf_lag_times if have_acf else None
    profile = np.mean([r.acf_profile for r in reports], axis=0) if have_acf else None
    cumulated = np.mean([r.cumulated_acf for r in reports], axis=0) if have_acf else None
    return VarianceReport(
        mean=mean,
        asym_variance=sigma2,
        mean_error_bar=mean_err,
        variance_error_bar=var_err,
        n_samples=first.n_samples,
        dt=first.dt,
        n_deco=first.n_deco,
        acf_lag_times=lag_times,
        acf_profile=profile,
        cumulated_acf=cumulated,
    )


def block_average_variance(values: np.ndarray, block_length: int, dt: float = 1.0) -> float:
    """Block-averaging (batch-means) estimate of the asymptotic variance.

    Cuts the series into ``n // block_length`` complete blocks and scales the
    variance of the block means by the block time.  Used only as a
    cross-check of the truncated-autocorrelation estimator; with blocks of
    ``2 t_deco`` the two have the same variance but different bias.
    """
    x = np.asarray(values, dtype=float).ravel()
    if block_length < 1:
        raise EstimatorError("block_length must be >= 1")
    n_blocks = x.size // block_length
    if n_blocks < 10:
        raise EstimatorError(f"need at least 10 complete blocks, got {n_blocks}")
    means = x[: n_blocks * block_length].reshape(n_blocks, block_length).mean(axis=1)
    return float(np.var(means, ddof=1) * block_length * dt)


def _write_two_columns(path, header: str, col_a: np.ndarray, col_b: np.ndarray) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for a, b in zip(col_a, col_b):
            fh.write(f"{a:.17g},{b:.17g}\n")


def save_acf_profile(report: VarianceReport, path) -> None:
    """Write ``lag_time,acf`` rows with 17 significant digits."""
    if report.acf_profile is None:
        raise EstimatorError("report carries no ACF profile (record_acf was off)")
    _write_two_columns(path, "lag_time,acf", report.acf_lag_times, report.acf_profile)


def save_cumulated_acf(report: VarianceReport, path) -> None:
    """Write ``t,cumulated_acf`` rows with 17 significant digits."""
    if report.cumulated_acf is None:
        raise EstimatorError("report carries no ACF profile (record_acf was off)")
    _write_two_columns(path, "t,cumulated_acf", report.acf_lag_times, report.cumulated_acf)
