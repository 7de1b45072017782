"""Scale-free structure of pulsatile motion: spectra, pulses, power-law fits.

The analysis has three stages: a Hann-windowed averaged periodogram
(`psd`), threshold-based pulse extraction into (duration, size) events
(`extract_pulses`), and log-log regression of either the spectrum or the
binned event distributions (`fit_power_law_psd`, `fit_power_law_events`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sp_signal

from .errors import InsufficientBins, InsufficientEvents, TooShort

MIN_PSD_SAMPLES = 256
DEFAULT_SEGMENT_SAMPLES = 512
MIN_PEAK_FREQ_HZ = 0.05
BINS_PER_DECADE = 8
MIN_FIT_POINTS = 5


@dataclass
class PsdEstimate:
    """One-sided power spectral density with its dominant peak."""

    freqs: np.ndarray
    power: np.ndarray
    peak_freq: float
    peak_power: float

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


@dataclass
class PulseEvent:
    """One threshold-crossing burst."""

    onset_s: float
    duration_s: float   # time to the next upward crossing
    size: float         # integral of (value - threshold) over the burst


@dataclass
class PowerLawFit:
    """Ordinary least squares fit of log10(y) against log10(x)."""

    alpha: float
    intercept: float
    fit_range: tuple[float, float]
    r2_loglog: float
    n_points: int


def _loglog_ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Centered OLS of log10 y on log10 x; returns (slope, intercept, r2)."""
    lx = np.log10(x)
    ly = np.log10(y)
    xc = lx - lx.mean()
    yc = ly - ly.mean()
    slope = float(np.dot(xc, yc) / np.dot(xc, xc))
    intercept = float(ly.mean() - slope * lx.mean())
    ss_res = float(np.sum((yc - slope * xc) ** 2))
    ss_tot = float(np.sum(yc**2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


def psd(
    series: np.ndarray,
    frame_rate: float,
    segment_samples: int = DEFAULT_SEGMENT_SAMPLES,
    min_peak_freq: float = MIN_PEAK_FREQ_HZ,
) -> PsdEstimate:
    """Averaged-periodogram PSD with exact variance normalization.

    Parameters
    ----------
    series : array_like, shape (n,)
        Input series, at least 256 samples.
    frame_rate : float
        Sampling rate in Hz.
    segment_samples : int
        Segment length for the averaged periodogram (Hann window, 50%
        overlap); shrinks automatically for shorter series.
    min_peak_freq : float
        The reported peak is the power argmax over frequencies strictly
        above this floor.

    Returns
    -------
    PsdEstimate
        One-sided density rescaled so that sum(power) * df equals the
        series variance exactly, which keeps the Parseval check tight for
        arbitrary finite input.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("psd expects a single channel")
    n = x.shape[0]
    if n < MIN_PSD_SAMPLES:
        raise TooShort(f"psd needs at least {MIN_PSD_SAMPLES} samples, got {n}")
    x = x - x.mean()
    nper = min(segment_samples, n)
    freqs, power = sp_signal.welch(
        x,
        fs=frame_rate,
        window="hann",
        nperseg=nper,
        noverlap=nper // 2,
        detrend=False,
        scaling="density",
    )
    df = freqs[1] - freqs[0]
    variance = float(np.mean(x**2))
    total = float(power.sum() * df)
    if variance == 0.0 or total == 0.0:
        power = np.zeros_like(power)
    else:
        power = power * (variance / total)

    above = freqs > min_peak_freq
    if not above.any():
        raise TooShort("frequency resolution too coarse to search for a peak")
    k = int(np.argmax(power[above]))
    peak_freq = float(freqs[above][k])
    peak_power = float(power[above][k])
    return PsdEstimate(freqs=freqs, power=power, peak_freq=peak_freq, peak_power=peak_power)


def fit_power_law_psd(
    estimate: PsdEstimate,
    fmin: float = MIN_PEAK_FREQ_HZ,
    fmax: float | None = None,
) -> PowerLawFit:
    """Fit log power against log frequency from ``fmin`` up to the peak.

    ``fmax`` overrides the default upper edge (the spectral peak), which is
    useful for featureless spectra with no meaningful peak.
    """
    if fmax is None:
        fmax = estimate.peak_freq
    mask = (estimate.freqs >= fmin) & (estimate.freqs <= fmax) & (estimate.power > 0)
    if mask.sum() < MIN_FIT_POINTS:
        raise InsufficientBins(
            f"only {int(mask.sum())} usable spectral bins in [{fmin}, {fmax}] Hz"
        )
    slope, intercept, r2 = _loglog_ols(estimate.freqs[mask], estimate.power[mask])
    return PowerLawFit(
        alpha=slope,
        intercept=intercept,
        fit_range=(fmin, float(fmax)),
        r2_loglog=r2,
        n_points=int(mask.sum()),
    )


def default_threshold(series: np.ndarray) -> float:
    """Pulse threshold: channel mean plus half a standard deviation."""
    x = np.asarray(series, dtype=float)
    return float(x.mean() + 0.5 * x.std())


def extract_pulses(
    series: np.ndarray,
    threshold: float | None = None,
    frame_rate: float = 60.0,
) -> list[PulseEvent]:
    """Extract threshold-crossing pulses from a series.

    Each upward crossing opens an event whose duration runs to the *next*
    upward crossing and whose size is the trapezoid integral of
    (value - threshold) over the above-threshold burst (the clipped ramps
    into the flanking below-threshold samples are included).  The last
    crossing has no successor and yields no event.  When ``threshold`` is
    None it defaults to mean + 0.5 SD of the series.
    """
    x = np.asarray(series, dtype=float)
    if threshold is None:
        threshold = default_threshold(x)
    dt = 1.0 / frame_rate
    above = x > threshold
    crossings = np.flatnonzero(above[1:] & ~above[:-1]) + 1
    if crossings.size < 2:
        return []

    clipped = np.clip(x - threshold, 0.0, None)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (clipped[:-1] + clipped[1:]) * dt)))
    below_idx = np.flatnonzero(~above)

    events = []
    for k in range(crossings.size - 1):
        i0 = int(crossings[k])
        run_end = int(below_idx[np.searchsorted(below_idx, i0)]) - 1
        j0 = i0 - 1
        j1 = min(run_end + 1, x.shape[0] - 1)
        events.append(
            PulseEvent(
                onset_s=i0 * dt,
                duration_s=(int(crossings[k + 1]) - i0) * dt,
                size=float(cum[j1] - cum[j0]),
            )
        )
    return events


def fit_power_law_events(
    events: list[PulseEvent],
    field: str = "duration",
    bins_per_decade: int = BINS_PER_DECADE,
) -> PowerLawFit:
    """Fit the log-binned empirical distribution of event durations or sizes.

    Bin edges grow geometrically from the smallest observation at
    ``bins_per_decade`` bins per decade, counts are normalized to a
    density, empty bins are dropped, and the occupied bin centers are fit
    by OLS in log-log coordinates.
    """
    if field not in ("duration", "size"):
        raise ValueError(f"unknown event field {field!r}")
    if len(events) < 30:
        raise InsufficientEvents(f"need at least 30 events, got {len(events)}")
    values = np.array([e.duration_s if field == "duration" else e.size for e in events])
    values = values[values > 0]
    if values.size < 30:
        raise InsufficientEvents("fewer than 30 events with positive values")
    vmin, vmax = float(values.min()), float(values.max())
    if vmin == vmax:
        raise InsufficientBins("all event values identical; a single occupied bin")

    # bin the values/vmin ratios so that rescaling the data cannot move a
    # sample across a bin edge (scale equivariance of the fitted exponent);
    # the half-step offset keeps every edge away from exact data ratios
    ratios = values / vmin
    n_bins = max(1, math.ceil(math.log10(vmax / vmin) * bins_per_decade + 0.5))
    edges_q = 10.0 ** ((np.arange(n_bins + 1) - 0.5) / bins_per_decade)
    if edges_q[-1] < ratios.max():
        edges_q[-1] = ratios.max() * (1.0 + 1e-12)
    counts, _ = np.histogram(ratios, bins=edges_q)
    density = counts / (values.size * vmin * np.diff(edges_q))
    occupied = counts > 0
    if occupied.sum() < MIN_FIT_POINTS:
        raise InsufficientBins(f"only {int(occupied.sum())} occupied bins")

    centers = vmin * np.sqrt(edges_q[:-1] * edges_q[1:])
    slope, intercept, r2 = _loglog_ols(centers[occupied], density[occupied])
    return PowerLawFit(
        alpha=slope,
        intercept=intercept,
        fit_range=(float(centers[occupied].min()), float(centers[occupied].max())),
        r2_loglog=r2,
        n_points=int(occupied.sum()),
    )


def fit_power_law_ml(values: np.ndarray, xmin: float | None = None) -> float:
    """Continuous maximum-likelihood exponent, as a cross-check on the OLS fit.

    Returns the density exponent alpha of p(x) ~ x^alpha for x >= xmin.
    """
    x = np.asarray(values, dtype=float)
    if xmin is None:
        xmin = float(x[x > 0].min())
    x = x[x >= xmin]
    if x.size < 2:
        raise InsufficientEvents("too few values above xmin for an ML fit")
    return float(-1.0 - x.size / np.sum(np.log(x / xmin)))
