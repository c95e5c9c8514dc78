"""Electrical readout of both fingertips.

SMI path: photodiode power -> first-order high-pass -> signal amplifier ->
anti-aliased decimation to the ADC rate -> mid-tread quantizer.

Microphone path: pressure -> sensitivity + self noise -> anti-aliased
decimation to the I2S sample rate. No quantizer; the digital microphone's
24-bit output is far below its own self noise.

Noise RMS parameters are referred to the output: white noise is generated at
the internal rate with its level raised by sqrt(rate_in / rate_out), so that
after the anti-alias filter the in-band RMS equals the configured value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import signal as sps

from .errors import ConfigError, InvalidInputError
from .physics import SmiSignal, _as_samples, _check_rate

INTERNAL_RATE_HZ = 96_000.0
AA_WINDOW = ("kaiser", 8.0)


@dataclass(frozen=True)
class SmiChainParams:
    hp_cutoff_hz: float = 20.0
    sa_gain: float = 30.0
    adc_rate_hz: float = 18_000.0
    adc_bits: int = 12
    full_scale: float = 4.0
    electronic_noise_rms: float | None = None  # None -> 2 LSB

    def __post_init__(self):
        if not self.adc_rate_hz > 0:
            raise ConfigError(f"adc_rate_hz must be positive, got {self.adc_rate_hz}")
        if not 0 < self.hp_cutoff_hz < self.adc_rate_hz / 2:
            raise ConfigError(
                f"hp_cutoff_hz must lie in (0, {self.adc_rate_hz / 2}), got {self.hp_cutoff_hz}"
            )
        if not self.sa_gain > 0:
            raise ConfigError(f"sa_gain must be positive, got {self.sa_gain}")
        if not (isinstance(self.adc_bits, int) and 8 <= self.adc_bits <= 24):
            raise ConfigError(f"adc_bits must be an integer in [8, 24], got {self.adc_bits}")
        if not self.full_scale > 0:
            raise ConfigError(f"full_scale must be positive, got {self.full_scale}")
        if self.electronic_noise_rms is None:
            object.__setattr__(self, "electronic_noise_rms", 2.0 * self.lsb)
        elif not self.electronic_noise_rms >= 0:
            raise ConfigError(f"electronic_noise_rms must be >= 0, got {self.electronic_noise_rms}")

    @property
    def lsb(self) -> float:
        return 2.0 * self.full_scale / 2 ** self.adc_bits


@dataclass(frozen=True)
class MicChainParams:
    sample_rate_hz: float = 20_000.0
    sensitivity: float = 1.0
    self_noise_rms: float = 0.001

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ConfigError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if not self.sensitivity > 0:
            raise ConfigError(f"sensitivity must be positive, got {self.sensitivity}")
        if not self.self_noise_rms >= 0:
            raise ConfigError(f"self_noise_rms must be >= 0, got {self.self_noise_rms}")


@dataclass(frozen=True)
class AcousticTrace:
    """Sound pressure at the microphone port, in full-scale units."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "samples", _as_samples(self.samples))
        object.__setattr__(self, "sample_rate_hz", _check_rate(self.sample_rate_hz))

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class MicSignal:
    samples: np.ndarray
    sample_rate_hz: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", _as_samples(self.samples))
        object.__setattr__(self, "sample_rate_hz", _check_rate(self.sample_rate_hz))

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def rate_ratio(rate_in: float, rate_out: float) -> tuple[int, int]:
    """(up, down) integers with up/down == rate_out/rate_in."""
    frac = Fraction(rate_out / rate_in).limit_denominator(10_000)
    if not math.isclose(float(frac), rate_out / rate_in, rel_tol=1e-9):
        raise ConfigError(f"cannot express {rate_in} -> {rate_out} Hz as a rational ratio")
    return frac.numerator, frac.denominator


def change_rate(x: np.ndarray, rate_in: float, rate_out: float) -> np.ndarray:
    """Band-limited polyphase resampling; a copy when the rates match."""
    x = np.asarray(x, dtype=np.float64)
    if rate_in == rate_out:
        return x.copy()
    up, down = rate_ratio(rate_in, rate_out)
    return sps.resample_poly(x, up, down, window=AA_WINDOW)


def highpass(x: np.ndarray, cutoff_hz: float, rate_hz: float) -> np.ndarray:
    """First-order high-pass, started in steady state for the first sample."""
    b, a = sps.butter(1, cutoff_hz, btype="highpass", fs=rate_hz)
    zi = sps.lfilter_zi(b, a) * x[0]
    y, _ = sps.lfilter(b, a, x, zi=zi)
    return y


def quantize(x: np.ndarray, lsb: float, bits: int) -> np.ndarray:
    """Mid-tread uniform quantizer clamped to the signed code range."""
    codes = np.clip(np.round(x / lsb), -(2 ** (bits - 1)), 2 ** (bits - 1) - 1)
    return codes * lsb


def _white(rng: np.random.Generator, n: int, rms: float, rate_in: float, rate_out: float):
    if rms == 0:
        return np.zeros(n)
    return rng.standard_normal(n) * (rms * math.sqrt(rate_in / rate_out))


def smi_readout(raw: SmiSignal, params: SmiChainParams | None = None, noise_seed=None) -> SmiSignal:
    params = params or SmiChainParams()
    if raw.sample_rate_hz < params.adc_rate_hz:
        raise InvalidInputError(
            f"raw rate {raw.sample_rate_hz} Hz is below the ADC rate {params.adc_rate_hz} Hz"
        )
    if len(raw) == 0:
        raise InvalidInputError("empty SMI signal")
    rng = np.random.default_rng(noise_seed)
    x = params.sa_gain * highpass(raw.samples, params.hp_cutoff_hz, raw.sample_rate_hz)
    x = x + _white(rng, len(x), params.electronic_noise_rms, raw.sample_rate_hz, params.adc_rate_hz)
    y = change_rate(x, raw.sample_rate_hz, params.adc_rate_hz)
    y = quantize(y, params.lsb, params.adc_bits)
    return SmiSignal(y, params.adc_rate_hz, meta={"chain": params})


def mic_readout(pressure: AcousticTrace, params: MicChainParams | None = None, noise_seed=None) -> MicSignal:
    params = params or MicChainParams()
    if pressure.sample_rate_hz < params.sample_rate_hz:
        raise InvalidInputError(
            f"input rate {pressure.sample_rate_hz} Hz is below the output rate {params.sample_rate_hz} Hz"
        )
    rng = np.random.default_rng(noise_seed)
    x = params.sensitivity * pressure.samples
    x = x + _white(rng, len(x), params.self_noise_rms, pressure.sample_rate_hz, params.sample_rate_hz)
    y = change_rate(x, pressure.sample_rate_hz, params.sample_rate_hz)
    return MicSignal(y, params.sample_rate_hz, meta={"chain": params})
