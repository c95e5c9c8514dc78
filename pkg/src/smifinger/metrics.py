"""Time-domain noise floor, normalized peaks, SNR and two-source separation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInputError

REST_SEGMENT_S = 0.5
THRESHOLD_K = 5.0
REFRACTORY_S = 0.1


@dataclass(frozen=True)
class NoiseFloorEstimate:
    p_noise: float
    n_samples: int
    mean: float


@dataclass(frozen=True)
class PeakSet:
    times: tuple[float, ...] = ()
    amplitudes: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        if len(self.times) != len(self.amplitudes):
            raise InvalidInputError("times and amplitudes differ in length")
        if any(a <= 0 for a in self.amplitudes):
            raise InvalidInputError("peak amplitudes must be positive")
        if any(t1 <= t0 for t0, t1 in zip(self.times, self.times[1:])):
            raise InvalidInputError("peak times must be strictly increasing")

    @property
    def count(self) -> int:
        return len(self.amplitudes)

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "PeakSet":
        amplitudes = [abs(float(a)) for a in amplitudes]
        return cls(tuple(range(len(amplitudes))), amplitudes)


@dataclass(frozen=True)
class SnrReport:
    snr_linear: float
    snr_db: float
    noise: NoiseFloorEstimate
    peaks: PeakSet

    def to_dict(self) -> dict:
        return {
            "snr_linear": self.snr_linear,
            "snr_db": self.snr_db,
            "p_noise": self.noise.p_noise,
            "n_noise_samples": self.noise.n_samples,
            "n_peaks": self.peaks.count,
            "peak_amplitudes": list(self.peaks.amplitudes),
        }


@dataclass(frozen=True)
class Separation:
    margin_db: float
    perfectly_separated: bool

    def to_dict(self) -> dict:
        return asdict(self)


def noise_floor(rest_segment) -> NoiseFloorEstimate:
    """Mean squared deviation from the mean, computed in two passes."""
    x = np.asarray(rest_segment, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise InvalidInputError("noise floor needs a 1-D segment of at least 2 samples")
    mean = math.fsum(x) / x.size
    dev = x - mean
    p = math.fsum(dev * dev) / x.size
    return NoiseFloorEstimate(p_noise=p, n_samples=int(x.size), mean=mean)


def rest_segment(samples, rate_hz: float, duration_s: float = REST_SEGMENT_S) -> np.ndarray:
    n = int(round(duration_s * rate_hz))
    return np.asarray(samples)[:n]


def normalize(samples, noise: NoiseFloorEstimate) -> np.ndarray:
    if not noise.p_noise > 0:
        raise InvalidInputError("degenerate noise floor: p_noise == 0")
    return (np.asarray(samples, dtype=np.float64) - noise.mean) / math.sqrt(noise.p_noise)


def detect_peaks(normalized, rate: float, threshold_k: float = THRESHOLD_K,
                 refractory_s: float = REFRACTORY_S) -> PeakSet:
    """Find events where |normalized| exceeds ``threshold_k``.

    Supra-threshold samples closer than ``refractory_s`` to each other are
    grouped into one event, and the event reports its largest sample. Groups
    are therefore separated by more than one refractory window, so a decaying
    ring-down never produces a second peak.
    """
    if not threshold_k > 0:
        raise InvalidInputError(f"threshold_k must be > 0, got {threshold_k}")
    mag = np.abs(np.asarray(normalized, dtype=np.float64))
    above = np.flatnonzero(mag > threshold_k)
    if above.size == 0:
        return PeakSet()
    gap = max(1, int(round(refractory_s * rate)))
    breaks = np.flatnonzero(np.diff(above) >= gap) + 1
    times, amps = [], []
    for group in np.split(above, breaks):
        i = group[np.argmax(mag[group])]
        times.append(i / rate)
        amps.append(mag[i])
    return PeakSet(times, amps)


def peaks_at(normalized, rate: float, event_times, window_s: float = 0.05) -> PeakSet:
    """Largest |normalized| within ``window_s`` after each known event onset."""
    mag = np.abs(np.asarray(normalized, dtype=np.float64))
    times, amps = [], []
    for t in sorted(event_times):
        i0 = max(0, int(math.floor(t * rate)))
        i1 = min(mag.size, int(math.ceil((t + window_s) * rate)) + 1)
        if i1 <= i0:
            raise InvalidInputError(f"event at {t} s lies outside the signal")
        i = i0 + int(np.argmax(mag[i0:i1]))
        times.append(i / rate)
        amps.append(max(mag[i], np.finfo(float).tiny))
    return PeakSet(times, amps)


def snr(peaks: PeakSet, noise: NoiseFloorEstimate | None = None) -> SnrReport:
    """Mean squared peak amplitude over the noise power.

    For peaks already normalized by the noise floor pass ``noise=None``; the
    noise power is then 1.
    """
    if peaks.count == 0:
        raise InvalidInputError("SNR needs at least one peak")
    if noise is None:
        noise = NoiseFloorEstimate(p_noise=1.0, n_samples=2, mean=0.0)
    if not noise.p_noise > 0:
        raise InvalidInputError("degenerate noise floor: p_noise == 0")
    total = math.fsum(a * a for a in peaks.amplitudes)
    lin = total / (noise.p_noise * peaks.count)
    return SnrReport(snr_linear=lin, snr_db=10.0 * math.log10(lin), noise=noise, peaks=peaks)


def separation_margin(robot_peaks: PeakSet, person_peaks: PeakSet) -> Separation:
    """How far the weakest true event sits above the strongest disturbance, in dB."""
    if robot_peaks.count == 0 or person_peaks.count == 0:
        raise InvalidInputError("separation needs non-empty peak sets")
    margin = 20.0 * math.log10(min(robot_peaks.amplitudes) / max(person_peaks.amplitudes))
    return Separation(margin_db=margin, perfectly_separated=margin > 0)
