"""Log-Mel spectrograms and overlapping patch tokenization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from .errors import ConfigError, InvalidInputError
from .readout import change_rate


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelConfig:
    target_rate_hz: float = 16_000.0
    n_mels: int = 128
    window_ms: float = 25.0
    hop_ms: float = 10.0
    fmin_hz: float = 0.0
    fmax_hz: float | None = None  # None -> Nyquist of target_rate_hz
    log_floor: float = 1e-10
    n_fft: int = 1024

    def __post_init__(self):
        if self.fmax_hz is None:
            object.__setattr__(self, "fmax_hz", self.target_rate_hz / 2)
        if not self.target_rate_hz > 0:
            raise ConfigError("target_rate_hz must be positive")
        if not 0 <= self.fmin_hz < self.fmax_hz <= self.target_rate_hz / 2:
            raise ConfigError(
                f"need 0 <= fmin < fmax <= {self.target_rate_hz / 2}, got {self.fmin_hz}, {self.fmax_hz}"
            )
        if not self.n_mels >= 1:
            raise ConfigError("n_mels must be >= 1")
        if not 0 < self.hop_ms <= self.window_ms:
            raise ConfigError("need 0 < hop_ms <= window_ms")
        if not self.log_floor > 0:
            raise ConfigError("log_floor must be positive")
        if self.n_fft < self.window_length:
            raise ConfigError(f"n_fft {self.n_fft} shorter than the window ({self.window_length})")

    @property
    def window_length(self) -> int:
        return int(round(self.window_ms * 1e-3 * self.target_rate_hz))

    @property
    def hop_length(self) -> int:
        return int(round(self.hop_ms * 1e-3 * self.target_rate_hz))


@dataclass(frozen=True)
class Spectrogram:
    values: np.ndarray  # [n_frames, n_mels]
    frame_times: np.ndarray
    mel_centers_hz: np.ndarray

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class PatchGrid:
    patches: np.ndarray  # [n_patches, size_t, size_f], time-major then mel
    patch_size: tuple[int, int]
    stride: tuple[int, int]
    grid_shape: tuple[int, int]

    def __len__(self):
        return len(self.patches)


def resample(samples, rate_hz: float, target_rate_hz: float = 16_000.0) -> np.ndarray:
    if not (rate_hz > 0 and target_rate_hz > 0):
        raise InvalidInputError("sample rates must be positive")
    return change_rate(samples, rate_hz, target_rate_hz)


def mel_filterbank(cfg: MelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Unit-peak triangular filters on the rfft bins; returns (weights, centers_hz)."""
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin_hz), hz_to_mel(cfg.fmax_hz), cfg.n_mels + 2))
    freqs = np.fft.rfftfreq(cfg.n_fft, 1.0 / cfg.target_rate_hz)
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (center - lower)
    falling = (upper - freqs) / (upper - center)
    weights = np.clip(np.minimum(rising, falling), 0.0, None)
    return weights, edges[1:-1]


def frame_count(n_samples: int, window: int, hop: int) -> int:
    return (n_samples - window) // hop + 1


def log_mel(samples, cfg: MelConfig | None = None) -> Spectrogram:
    """Hann-windowed magnitude spectrum -> Mel filterbank -> natural log.

    Trailing samples that do not fill a whole window are dropped.
    """
    cfg = cfg or MelConfig()
    x = np.asarray(samples, dtype=np.float64)
    win, hop = cfg.window_length, cfg.hop_length
    if x.ndim != 1 or x.size < win:
        raise InvalidInputError(f"signal of {x.size} samples is shorter than the {win}-sample window")
    frames = sliding_window_view(x, win)[::hop]
    window = get_window("hann", win, fftbins=True)
    mag = np.abs(np.fft.rfft(frames * window, n=cfg.n_fft, axis=1))
    weights, centers = mel_filterbank(cfg)
    values = np.log(mag @ weights.T + cfg.log_floor)
    times = (np.arange(len(frames)) * hop + win / 2) / cfg.target_rate_hz
    return Spectrogram(values, times, centers)


def spectrogram_of(samples, rate_hz: float, cfg: MelConfig | None = None) -> Spectrogram:
    cfg = cfg or MelConfig()
    return log_mel(resample(samples, rate_hz, cfg.target_rate_hz), cfg)


def patchify(spec: Spectrogram, size=(16, 16), stride=(10, 10)) -> PatchGrid:
    """Overlapping tiles over (time, mel), edge-replicated to cover every cell."""
    size = tuple(int(s) for s in size)
    stride = tuple(int(s) for s in stride)
    if any(s < 1 for s in stride) or any(st >= sz for st, sz in zip(stride, size)):
        raise InvalidInputError(f"stride {stride} must be >= 1 and smaller than size {size}")
    values = np.asarray(spec.values)
    n_t, n_f = values.shape
    if size[0] > n_t or size[1] > n_f:
        raise InvalidInputError(f"patch size {size} exceeds spectrogram shape {values.shape}")
    counts = [
        math.ceil((n - sz) / st) + 1 for n, sz, st in zip((n_t, n_f), size, stride)
    ]
    padded_t = size[0] + (counts[0] - 1) * stride[0]
    padded_f = size[1] + (counts[1] - 1) * stride[1]
    padded = np.pad(values, ((0, padded_t - n_t), (0, padded_f - n_f)), mode="edge")
    tiles = sliding_window_view(padded, size)[:: stride[0], :: stride[1]]
    patches = tiles.reshape(-1, *size).copy()
    return PatchGrid(patches, size, stride, (counts[0], counts[1]))


def spectral_flatness(spec: Spectrogram) -> float:
    """Geometric over arithmetic mean of the time-averaged Mel-band power.

    Averaging power over time first weights frames by energy, so quiet
    stretches (e.g. the wrist at rest) do not dominate the figure.
    """
    power = np.exp(2.0 * np.asarray(spec.values, dtype=np.float64)).mean(axis=0)
    return float(np.exp(np.log(power).mean()) / power.mean())


def dominant_frequency(spec: Spectrogram) -> float:
    """Center frequency of the Mel band with the highest time-averaged magnitude."""
    avg = np.exp(np.asarray(spec.values)).mean(axis=0)
    return float(spec.mel_centers_hz[int(np.argmax(avg))])
