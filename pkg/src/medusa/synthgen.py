"""Synthetic stimulus schedules and desk-scale data generators.

`gen_jellyfish` produces marker trajectories from a parametric model of a
two-ring pulsating body: each pulse is a raised-cosine contraction
followed by an exponential relaxation (about 1.6 s end to end), thrust is
driven by the contraction rate with a mild amplitude-dependent
nonlinearity, and stimulated runs entrain 1:1 only for periods the muscle
kernel can follow.  Ground truth (pose, radii, local velocities, response
onsets) is returned alongside the marker data so every downstream stage
can be checked against known answers.

`gen_avalanche` builds pulse trains whose event sizes follow a bounded
power law with a known exponent, the oracle for the criticality fits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .criticality import PulseEvent
from .errors import PeriodTooShort
from .ingest import TrialRecording
from .kinematics import BodyFrameSeries, euler_zyz_to_matrix, matrix_to_euler_zyz

BURST_DURATION_S = 0.1
CARRIER_HZ = 50.0
DUTY = 0.5
AMPLITUDE_V = 3.3


@dataclass
class StimulusSchedule:
    """Periodic burst schedule for the pulse-width-modulated stimulator."""

    period_s: float
    window_s: float
    onsets_s: np.ndarray
    burst_duration_s: float = BURST_DURATION_S
    carrier_hz: float = CARRIER_HZ
    duty: float = DUTY
    amplitude_v: float = AMPLITUDE_V

    @property
    def carrier_cycles_per_burst(self) -> float:
        return self.burst_duration_s * self.carrier_hz

    @property
    def carrier_high_s(self) -> float:
        """High time of one carrier cycle."""
        return self.duty / self.carrier_hz

    def burst_active(self, frame_rate: float, n_samples: int) -> np.ndarray:
        """Binary series, 1 while a burst is being delivered."""
        t = np.arange(n_samples) / frame_rate
        active = np.zeros(n_samples, dtype=np.uint8)
        for onset in self.onsets_s:
            active[(t >= onset - 1e-12) & (t < onset + self.burst_duration_s - 1e-12)] = 1
        return active


def pwm_schedule(period_s: float, window_s: float) -> StimulusSchedule:
    """Bursts at 0, period, 2*period, ... strictly within the window."""
    if period_s <= BURST_DURATION_S:
        raise PeriodTooShort(
            f"period {period_s} s must exceed the {BURST_DURATION_S} s burst"
        )
    n = int(np.ceil(window_s / period_s - 1e-12))
    return StimulusSchedule(
        period_s=period_s,
        window_s=window_s,
        onsets_s=np.arange(n) * period_s,
    )


@dataclass
class SyntheticJellyfishParams:
    """Shape, pulse kinetics, propulsion and noise of the generator."""

    rest_inner_mm: float = 12.0
    rest_outer_mm: float = 25.0
    ring_height_mm: float = 8.0
    contraction_amplitude_mm: float = 5.0
    contraction_rise_s: float = 0.6
    relaxation_tau_s: float = 1.0
    spontaneous_interval_mean_s: float = 2.2
    spontaneous_interval_sd_s: float = 0.45
    responsiveness_floor_s: float = 1.2
    refractory_mean_s: float = 1.4
    refractory_sd_s: float = 0.30
    propulsion_gain: float = 1.6   # thrust per mm of ring contraction [1/s]
    thrust_curvature: float = 0.8
    transverse_drift_mm_s: float = 0.5
    transverse_freq_hz: float = 0.03
    amplitude_jitter: float = 0.10
    stim_jitter_s: float = 0.05
    response_jitter_s: float = 0.15
    noise_sd_mm: float = 0.0
    orientation_euler: tuple[float, float, float] = (0.0, 0.0, 0.0)
    start_mm: tuple[float, float, float] = (75.0, 75.0, 75.0)
    frame_rate: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if not self.rest_inner_mm > self.contraction_amplitude_mm >= 0:
            raise ValueError("require rest radii > contraction amplitude >= 0")
        if self.rest_outer_mm <= self.rest_inner_mm:
            raise ValueError("outer rest radius must exceed the inner one")
        if self.contraction_rise_s <= 0 or self.relaxation_tau_s <= 0:
            raise ValueError("pulse time constants must be positive")


@dataclass
class GroundTruth:
    """Everything the generator knows that the pipeline must recover."""

    body: BodyFrameSeries
    contraction: np.ndarray
    response_onsets_s: np.ndarray
    response_amplitudes: np.ndarray | None = None


_RING_ANGLES = {"R": 0.0, "Y": 0.5 * np.pi, "O": np.pi, "B": 1.5 * np.pi}
# marker order must match ingest.MARKER_LABELS: R1,R2,Y1,Y2,O1,O2,B1,B2
_MARKER_LAYOUT = [("R", 1), ("R", 2), ("Y", 1), ("Y", 2),
                  ("O", 1), ("O", 2), ("B", 1), ("B", 2)]


def _pulse_kernel(params: SyntheticJellyfishParams, frame_rate: float):
    """Sampled contraction kernel and its analytic time derivative."""
    rise = params.contraction_rise_s
    tau = params.relaxation_tau_s
    support = rise + 8.0 * tau
    t = np.arange(int(round(support * frame_rate))) / frame_rate
    k = np.where(
        t < rise,
        0.5 * (1.0 - np.cos(np.pi * t / rise)),
        np.exp(-(t - rise) / tau),
    )
    rate = np.where(
        t < rise,
        0.5 * np.pi / rise * np.sin(np.pi * t / rise),
        -np.exp(-(t - rise) / tau) / tau,
    )
    return k, rate


def _recovery(delta_s: float) -> float:
    """Pulse amplitude attainable after a given recovery interval."""
    return float(np.clip(delta_s / 1.6, 0.0, 1.0) ** 0.5)


def _response_plan(
    params: SyntheticJellyfishParams,
    schedule: StimulusSchedule | None,
    duration_s: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Pulse response times and amplitudes for one trial."""
    jitter = params.amplitude_jitter
    if schedule is None:
        times, amps = [], []
        t = float(rng.uniform(0.2, params.spontaneous_interval_mean_s))
        while t < duration_s:
            times.append(t)
            amps.append(1.0 - jitter * rng.random())
            step = rng.normal(params.spontaneous_interval_mean_s,
                              params.spontaneous_interval_sd_s)
            t += max(0.8, step)
        return np.array(times), np.array(amps)

    onsets = schedule.onsets_s[schedule.onsets_s < duration_s]
    if schedule.period_s >= params.responsiveness_floor_s:
        amps = _recovery(schedule.period_s) * (1.0 - jitter * rng.random(onsets.size))
        times = onsets + rng.uniform(-params.stim_jitter_s, params.stim_jitter_s,
                                     onsets.size)
        return times, amps
    # below the responsiveness floor the muscle follows only pulses it has
    # recovered for, with irregular skipping, reduced amplitude and timing slop
    times, amps = [], []
    last = -np.inf
    for onset in onsets:
        refractory = rng.normal(params.refractory_mean_s, params.refractory_sd_s)
        delta = onset - last
        if delta < refractory:
            continue
        times.append(onset + rng.uniform(-params.response_jitter_s,
                                         params.response_jitter_s))
        amps.append(0.6 * _recovery(min(delta, 2.0)) * (1.0 - 3 * jitter * rng.random()))
        last = onset
    return np.array(times), np.array(amps)


def gen_jellyfish(
    params: SyntheticJellyfishParams,
    schedule: StimulusSchedule | None,
    duration_s: float,
) -> tuple[TrialRecording, GroundTruth]:
    """Generate a marker trial plus its ground truth.

    Eight markers sit on two concentric rings (inner ring centered on the
    body COM, outer ring one ring-height below).  Each response pulse
    contracts both rings with the shared kernel; thrust along the body
    axis follows the contraction rate, positive while contracting and
    negative during relaxation, with a mild dependence on the contraction
    state itself.  Spontaneous mode draws pulse intervals from the
    configured distribution; stimulated mode follows the schedule subject
    to the responsiveness floor.
    """
    if duration_s < 10.0:
        raise ValueError("generator trials must span at least 10 s")
    fs = params.frame_rate
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    rng = np.random.default_rng(params.seed)

    times, amps = _response_plan(params, schedule, duration_s, rng)
    kernel, kernel_rate = _pulse_kernel(params, fs)
    contraction = np.zeros(n)
    rate = np.zeros(n)
    onset_idx = np.round(times * fs).astype(int)
    keep = (onset_idx >= 0) & (onset_idx < n)
    onset_idx, amps = onset_idx[keep], np.asarray(amps)[keep]
    for idx, amp in zip(onset_idx, amps):
        stop = min(n, idx + kernel.size)
        contraction[idx:stop] += amp * kernel[: stop - idx]
        rate[idx:stop] += amp * kernel_rate[: stop - idx]

    # velocity expressed directly in the marker-defined body frame; thrust
    # follows the physical contraction rate with a mild state dependence
    v_gen = np.zeros((n, 3))
    v_gen[:, 2] = (
        params.propulsion_gain
        * params.contraction_amplitude_mm
        * rate
        * (1.0 + params.thrust_curvature * contraction)
    )
    phase = rng.uniform(0, 2 * np.pi)
    v_gen[:, 0] = params.transverse_drift_mm_s * np.sin(
        2 * np.pi * params.transverse_freq_hz * t + phase
    )
    v_gen[:, 1] = 0.6 * params.transverse_drift_mm_s * np.cos(
        2 * np.pi * params.transverse_freq_hz * t + phase
    )

    # body axes in world coordinates; the x-axis follows the Y2->O2 chord
    r_p = euler_zyz_to_matrix(np.asarray(params.orientation_euler, dtype=float))
    chord = np.array([-1.0, -1.0, 0.0]) / np.sqrt(2.0)
    m0 = np.column_stack([chord, np.cross([0.0, 0.0, 1.0], chord), [0.0, 0.0, 1.0]])
    m_bw = r_p @ m0
    v_world = v_gen @ m_bw.T

    com = np.asarray(params.start_mm, dtype=float) + np.vstack(
        [np.zeros(3), np.cumsum(v_world[:-1], axis=0) / fs]
    )

    scale = params.rest_inner_mm / params.rest_outer_mm
    r_inner = params.rest_inner_mm - params.contraction_amplitude_mm * scale * contraction
    r_outer = params.rest_outer_mm - params.contraction_amplitude_mm * contraction

    positions = np.empty((n, 8, 3))
    for m, (color, ring) in enumerate(_MARKER_LAYOUT):
        angle = _RING_ANGLES[color]
        radius = r_inner if ring == 2 else r_outer
        offset = np.zeros((n, 3))
        offset[:, 0] = radius * np.cos(angle)
        offset[:, 1] = radius * np.sin(angle)
        if ring == 1:
            offset[:, 2] = -params.ring_height_mm
        positions[:, m, :] = com + offset @ r_p.T
    if params.noise_sd_mm > 0:
        positions = positions + rng.normal(0.0, params.noise_sd_mm, positions.shape)

    if schedule is None:
        stim = np.zeros(n, dtype=np.uint8)
        condition, period = "spontaneous", None
    else:
        stim = schedule.burst_active(fs, n)
        condition, period = "stimulated", schedule.period_s

    trial = TrialRecording(
        animal_id="SYNTH",
        condition=condition,
        period_s=period,
        positions=positions,
        stimulus=stim,
        frame_rate=fs,
    )

    rot_wb = np.broadcast_to(m_bw.T, (n, 3, 3)).copy()
    euler = np.broadcast_to(matrix_to_euler_zyz(m_bw), (n, 3)).copy()
    truth = GroundTruth(
        body=BodyFrameSeries(
            com=com,
            inner_radius=r_inner,
            outer_radius=np.sqrt(r_outer**2 + params.ring_height_mm**2),
            euler_zyz=euler,
            rotation=rot_wb,
            frame_rate=fs,
            v_local=v_gen,
        ),
        contraction=contraction,
        response_onsets_s=onset_idx / fs,
        response_amplitudes=amps,
    )
    return trial, truth


def gen_avalanche(
    exponent: float,
    n_events: int,
    kernel: str = "rect",
    frame_rate: float = 60.0,
    size_range: tuple[float, float] = (0.5, 50.0),
    gap_samples: int = 1,
    amplitude: float = 1.0,
    lead_in_samples: int = 10,
    seed: int = 0,
) -> tuple[np.ndarray, list[PulseEvent]]:
    """Pulse train whose event sizes follow a bounded power law.

    Sizes (area above baseline, amplitude x width) are drawn from a density
    proportional to s**exponent on ``size_range``; widths scale with the
    sizes, so extracted durations and sizes share the exponent.  Returns
    the series and the true event list (onset, width, area); events are
    separated by ``gap_samples`` baseline samples so every onset is an
    upward threshold crossing.
    """
    if exponent >= -1.0:
        raise ValueError("exponent must be < -1")
    if n_events == 0:
        return np.zeros(2 * lead_in_samples), []
    lo, hi = size_range
    if not 0 < lo < hi:
        raise ValueError("size_range must be positive and increasing")

    rng = np.random.default_rng(seed)
    ap1 = exponent + 1.0
    u = rng.random(n_events)
    sizes = (lo**ap1 + u * (hi**ap1 - lo**ap1)) ** (1.0 / ap1)
    widths = np.maximum(1, np.round(sizes / amplitude * frame_rate).astype(int))

    if kernel == "rect":
        shapes = [np.full(w, amplitude) for w in widths]
    elif kernel == "cosine":
        shapes = [
            amplitude * 0.5 * (1.0 - np.cos(2 * np.pi * np.arange(w) / max(w - 1, 1)))
            for w in widths
        ]
    else:
        raise ValueError(f"unknown kernel {kernel!r}")

    chunks = [np.zeros(lead_in_samples)]
    onsets = np.empty(n_events, dtype=int)
    cursor = lead_in_samples
    for i, shape in enumerate(shapes):
        onsets[i] = cursor
        chunks.append(shape)
        chunks.append(np.zeros(gap_samples))
        cursor += shape.size + gap_samples
    chunks.append(np.zeros(lead_in_samples))
    series = np.concatenate(chunks)

    events = [
        PulseEvent(
            onset_s=onsets[i] / frame_rate,
            duration_s=widths[i] / frame_rate,
            size=amplitude * widths[i] / frame_rate,
        )
        for i in range(n_events)
    ]
    return series, events
