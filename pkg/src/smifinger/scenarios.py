"""Synthetic excitations rendered through both fingertip models.

Everything is generated at an internal rate (96 kHz by default) as two
physical traces: fingertip surface displacement in meters, which the laser
sees, and sound pressure at the microphone port in full-scale units, which
the microphone sees. Sources add into both traces:

* contact events in the robot's cup drive the surface at full scale and the
  air at full scale;
* anything that only reaches the fingertip through the air (ambient sound, a
  second cup held by a person) moves the surface by
  ``pressure * pressure_to_surface_m`` attenuated by
  ``airborne_to_surface_attenuation_db``, or for contact events, by the
  event's own surface scale attenuated by the same amount;
* the wrist motor adds a tonal pressure and a several-wavelength surface
  vibration whose fundamental scales with wrist speed.

The attenuation (default 30 dB) is the calibration knob that sets how well
the laser rejects airborne sound. It is not a measured quantity.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from scipy import signal as sps

from .errors import ConfigError, InvalidInputError
from .physics import DisplacementTrace, LaserParams, SmiSignal, rest_offset_m, simulate_smi
from .readout import (
    AcousticTrace,
    MicChainParams,
    MicSignal,
    SmiChainParams,
    mic_readout,
    smi_readout,
)

LABELS = ("empty", "bolts", "playdough")


class EventKind(str, Enum):
    SILICONE_DROP = "silicone_drop"
    BOLT_DROP = "bolt_drop"
    BOLT_RATTLE = "bolt_rattle"
    PLAYDOUGH_THUD = "playdough_thud"


class DisturbanceKind(str, Enum):
    NONE = "none"
    WHITE_NOISE = "white_noise"
    MUSIC_LIKE = "music_like"
    TARGETED_MIMIC = "targeted_mimic"
    TARGETED_SHAKE = "targeted_shake"


@dataclass(frozen=True)
class ContactEventModel:
    kind: EventKind
    surface_displacement_scale: float
    airborne_pressure_scale: float
    resonance_bands_hz: tuple[tuple[float, float], ...]
    decay_tau_s: float
    attack_s: float = 0.0005

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        object.__setattr__(
            self, "resonance_bands_hz", tuple((float(c), float(b)) for c, b in self.resonance_bands_hz)
        )
        if min(self.surface_displacement_scale, self.airborne_pressure_scale) < 0:
            raise ConfigError("event scales must be >= 0")
        if not self.decay_tau_s > 0:
            raise ConfigError("decay_tau_s must be > 0")
        for center, bw in self.resonance_bands_hz:
            if not (bw > 0 and center - bw / 2 > 0):
                raise ConfigError(f"band ({center}, {bw}) must have positive width and lower edge")

    def check_rate(self, rate_hz: float):
        for center, bw in self.resonance_bands_hz:
            if center + bw / 2 >= rate_hz / 2:
                raise ConfigError(f"band ({center}, {bw}) reaches the Nyquist of {rate_hz} Hz")


# Hard impacts ring high and short, soft ones low and long. The pressure scale
# is what reaches the microphone from a cup held at the gripper, whoever holds it.
EVENTS = {
    EventKind.SILICONE_DROP: ContactEventModel(
        EventKind.SILICONE_DROP, 20e-9, 0.6, ((500.0, 600.0),), 0.040),
    EventKind.BOLT_DROP: ContactEventModel(
        EventKind.BOLT_DROP, 25e-9, 1.0, ((4000.0, 4000.0),), 0.020),
    EventKind.BOLT_RATTLE: ContactEventModel(
        EventKind.BOLT_RATTLE, 40e-9, 0.45, ((4000.0, 4000.0),), 0.020),
    EventKind.PLAYDOUGH_THUD: ContactEventModel(
        EventKind.PLAYDOUGH_THUD, 300e-9, 1.0, ((225.0, 350.0),), 0.060),
}

CONTENT_EVENT = {"bolts": EventKind.BOLT_RATTLE, "playdough": EventKind.PLAYDOUGH_THUD}


@dataclass(frozen=True)
class DisturbanceModel:
    kind: DisturbanceKind = DisturbanceKind.NONE
    spl_db: float = 70.0
    airborne_to_surface_attenuation_db: float = 30.0
    content: str | None = None  # cup content for targeted kinds
    variant: int = 0  # music_like style preset

    def __post_init__(self):
        object.__setattr__(self, "kind", DisturbanceKind(self.kind))
        if self.spl_db < 0:
            raise ConfigError("spl_db must be >= 0")
        if self.airborne_to_surface_attenuation_db < 0:
            raise ConfigError("airborne_to_surface_attenuation_db must be >= 0")
        targeted = self.kind in (DisturbanceKind.TARGETED_MIMIC, DisturbanceKind.TARGETED_SHAKE)
        if targeted and self.content not in CONTENT_EVENT:
            raise ConfigError(f"targeted disturbance needs content in {sorted(CONTENT_EVENT)}")
        if self.kind == DisturbanceKind.MUSIC_LIKE and self.variant not in range(len(MUSIC_STYLES)):
            raise ConfigError(f"music variant must be in 0..{len(MUSIC_STYLES) - 1}")


@dataclass(frozen=True)
class WristProfile:
    keyframes_deg: tuple[float, ...] = (0.0, 60.0, -60.0, 0.0)
    speed_rad_s: float = 0.4
    ramp_s: float = 0.1
    start_s: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "keyframes_deg", tuple(float(k) for k in self.keyframes_deg))
        if not self.speed_rad_s > 0:
            raise ConfigError("speed_rad_s must be > 0")
        if any(abs(k) > 60.0 for k in self.keyframes_deg):
            raise ConfigError("wrist angle is limited to +-60 degrees")
        if not self.ramp_s > 0 or self.start_s < 0:
            raise ConfigError("ramp_s must be > 0 and start_s >= 0")
        for a, b in zip(self.keyframes_deg, self.keyframes_deg[1:]):
            if math.radians(abs(b - a)) / self.speed_rad_s < self.ramp_s:
                raise ConfigError(f"move {a} -> {b} deg is too short for a {self.ramp_s} s ramp")


@dataclass(frozen=True)
class SceneParams:
    internal_rate_hz: float = 96_000.0
    airborne_to_surface_attenuation_db: float = 30.0
    pressure_to_surface_m: float = 1e-7
    anl_ref_db: float = 57.0
    anl_ref_rms: float = 0.005
    motor_hz_per_rad_s: float = 500.0
    motor_displacement_m: float = 1.3e-6
    motor_pressure: float = 0.1
    motor_harmonics: tuple[float, ...] = (1.0, 0.5, 0.25)
    # relative harmonic phases are a property of the drive train, fixed across trials
    motor_harmonic_phases: tuple[float, ...] = (0.0, 1.1, 2.3)
    event_spread_db: float = 3.0
    rattle_rate_hz: float = 60.0
    accel_threshold_rad_s2: float = 1.0
    harder_shake_factor: float = 4.0
    shake_stroke_rate_hz: float = 2.0
    room_anl_db: float | None = 57.0  # stationary room noise in every shake trial; None disables
    room_anl_spread_db: float = 6.0
    room_slope_range: tuple[float, float] = (0.3, 1.7)  # spectral slope of the room noise, drawn per trial
    trial_duration_s: float = 11.0
    drop_duration_s: float = 10.0
    laser: LaserParams = field(default_factory=LaserParams)
    smi_chain: SmiChainParams = field(default_factory=SmiChainParams)
    mic_chain: MicChainParams = field(default_factory=MicChainParams)

    def __post_init__(self):
        if self.internal_rate_hz < max(self.smi_chain.adc_rate_hz, self.mic_chain.sample_rate_hz):
            raise ConfigError("internal rate must be at least both sensor rates")
        if self.airborne_to_surface_attenuation_db < 0:
            raise ConfigError("attenuation must be >= 0 dB")
        if self.trial_duration_s <= 0 or self.drop_duration_s <= 0:
            raise ConfigError("durations must be positive")
        if len(self.motor_harmonic_phases) != len(self.motor_harmonics):
            raise ConfigError("motor_harmonic_phases needs one phase per harmonic")
        lo, hi = self.room_slope_range
        if not lo <= hi:
            raise ConfigError("room_slope_range must be (low, high) with low <= high")

    @property
    def airborne_gain(self) -> float:
        return 10.0 ** (-self.airborne_to_surface_attenuation_db / 20.0)


def spl_to_rms(spl_db: float, params: SceneParams | None = None) -> float:
    params = params or SceneParams()
    return params.anl_ref_rms * 10.0 ** ((spl_db - params.anl_ref_db) / 20.0)


# ---------------------------------------------------------------------------
# seeding


def trial_seed(master_seed: int, scenario_id: str, index: int) -> np.random.SeedSequence:
    """Seed for one trial; independent of generation order."""
    return np.random.SeedSequence([int(master_seed), zlib.crc32(scenario_id.encode()), int(index)])


def _as_seedseq(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def _children(seed, n: int) -> list[np.random.SeedSequence]:
    """Like ``SeedSequence.spawn`` but without mutating the parent."""
    ss = _as_seedseq(seed)
    return [np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,)) for i in range(n)]


def _streams(seed, names: Sequence[str]) -> dict[str, np.random.Generator]:
    return {name: np.random.default_rng(child) for name, child in zip(names, _children(seed, len(names)))}


# ---------------------------------------------------------------------------
# waveform primitives


def burst_waveform(event: ContactEventModel, rate_hz: float, rng: np.random.Generator) -> np.ndarray:
    """Exponentially decaying band-limited noise burst with unit peak."""
    event.check_rate(rate_hz)
    n = int(math.ceil(6.0 * event.decay_tau_s * rate_hz))
    warm = int(math.ceil(0.02 * rate_hz))  # lets the band-pass settle before the onset
    noise = rng.standard_normal(n + warm)
    x = np.zeros(n)
    for center, bw in event.resonance_bands_hz:
        sos = sps.butter(2, [center - bw / 2, center + bw / 2], btype="bandpass", fs=rate_hz, output="sos")
        x += sps.sosfilt(sos, noise)[warm:]
    t = np.arange(n) / rate_hz
    x *= (1.0 - np.exp(-t / event.attack_s)) * np.exp(-t / event.decay_tau_s)
    return x / np.max(np.abs(x))


def pink_noise(n: int, rng: np.random.Generator, rate_hz: float, f_lo: float = 20.0,
               slope: float = 1.0) -> np.ndarray:
    """Unit-RMS noise with a 1/f**slope power spectrum above ``f_lo`` (pink by default)."""
    spec = rng.standard_normal(n // 2 + 1) + 1j * rng.standard_normal(n // 2 + 1)
    f = np.fft.rfftfreq(n, 1.0 / rate_hz)
    spec /= np.maximum(f, f_lo) ** (0.5 * slope)
    spec[0] = 0.0
    x = np.fft.irfft(spec, n)
    return x / np.sqrt(np.mean(x * x))


def white_noise(n: int, rng: np.random.Generator, rate_hz: float, f_hi: float = 10_000.0) -> np.ndarray:
    """Unit-RMS white noise band-limited to ``f_hi`` (a loudspeaker's range)."""
    x = rng.standard_normal(n)
    sos = sps.butter(4, f_hi, btype="lowpass", fs=rate_hz, output="sos")
    x = sps.sosfilt(sos, x)
    return x / np.sqrt(np.mean(x * x))


# tempo_bpm, chord root Hz, tonal share, bass boost
MUSIC_STYLES = (
    (72.0, 196.0, 0.7, 0.3),
    (96.0, 146.8, 0.4, 0.6),
    (110.0, 110.0, 0.3, 1.0),
)


def music_like(n: int, rng: np.random.Generator, rate_hz: float, variant: int = 0) -> np.ndarray:
    """Unit-RMS stand-in for recorded music: beat-modulated pink noise plus chords."""
    tempo, root, tonal, bass = MUSIC_STYLES[variant]
    t = np.arange(n) / rate_hz
    beat = 1.0 / (tempo / 60.0)
    phase = (t % beat) / beat
    envelope = 0.35 + 0.65 * np.exp(-phase * 6.0)
    noise = pink_noise(n, rng, rate_hz) * envelope
    chords = np.zeros(n)
    bar = 4 * beat
    progression = (1.0, 4 / 3, 3 / 2, 9 / 8)
    for i, ratio in enumerate(progression):
        mask = ((t // bar) % len(progression)) == i
        f0 = root * ratio
        for h, weight in ((1, 1.0), (2, 0.5), (3, 0.35), (5, 0.2)):
            for interval in (1.0, 1.26, 1.5):
                chords[mask] += weight * np.sin(2 * np.pi * f0 * interval * h * t[mask] + rng.uniform(0, 2 * np.pi))
    chords *= envelope
    chords += bass * np.sin(2 * np.pi * root / 2 * t) * (1.0 - phase) ** 2
    chords /= np.sqrt(np.mean(chords * chords))
    x = tonal * chords + (1.0 - tonal) * noise
    return x / np.sqrt(np.mean(x * x))


class Scene:
    """Accumulates displacement (m) and pressure contributions at one rate."""

    def __init__(self, n: int, rate_hz: float):
        self.rate_hz = rate_hz
        self.displacement = np.zeros(n)
        self.pressure = np.zeros(n)

    def __len__(self):
        return len(self.displacement)

    def add_burst(self, burst: np.ndarray, t_s: float, displacement_m: float, pressure: float):
        i0 = int(round(t_s * self.rate_hz))
        if i0 >= len(self) or i0 < 0:
            return
        seg = burst[: len(self) - i0]
        self.displacement[i0 : i0 + len(seg)] += displacement_m * seg
        self.pressure[i0 : i0 + len(seg)] += pressure * seg

    def add_airborne(self, pressure: np.ndarray, params: SceneParams):
        self.pressure += pressure
        self.displacement += pressure * (params.pressure_to_surface_m * params.airborne_gain)


def _amp(rng: np.random.Generator, spread_db: float) -> float:
    return 10.0 ** (rng.normal(0.0, spread_db) / 20.0)


def _render(scene: Scene, params: SceneParams, rng_smi, rng_mic) -> tuple[SmiSignal, MicSignal]:
    disp = DisplacementTrace(scene.displacement + rest_offset_m(params.laser), scene.rate_hz)
    raw = simulate_smi(disp, params.laser)
    smi = smi_readout(raw, params.smi_chain, rng_smi)
    mic = mic_readout(AcousticTrace(scene.pressure, scene.rate_hz), params.mic_chain, rng_mic)
    return smi, mic


def ambient(n: int, anl_db: float, rng: np.random.Generator, params: SceneParams) -> np.ndarray:
    """Room noise at ``anl_db``: pink up to the reference level, white on top."""
    rate = params.internal_rate_hz
    base_db = min(anl_db, params.anl_ref_db)
    x = spl_to_rms(base_db, params) * pink_noise(n, rng, rate)
    if anl_db > params.anl_ref_db:
        extra = math.sqrt(spl_to_rms(anl_db, params) ** 2 - spl_to_rms(params.anl_ref_db, params) ** 2)
        x = x + extra * white_noise(n, rng, rate)
    return x


# ---------------------------------------------------------------------------
# drop tests


class DropSequence(NamedTuple):
    displacement: DisplacementTrace  # contribution of events and sound, rest offset excluded
    pressure: AcousticTrace
    event_times: tuple[float, ...]


@dataclass(frozen=True)
class DropRecording:
    smi: SmiSignal
    mic: MicSignal
    event_times: tuple[float, ...]
    sequence: DropSequence


def _event_times(rng, count, start, end, spacing):
    room = (end - start) - (count - 1) * spacing
    if room < 0:
        raise ConfigError(
            f"{count} events with {spacing} s spacing do not fit between {start} and {end} s"
        )
    u = np.sort(rng.uniform(0.0, room, size=count))
    return tuple(float(start + ui + i * spacing) for i, ui in enumerate(u))


def gen_drop_sequence(event: ContactEventModel | EventKind | str, count: int, anl_db: float,
                      cup_owner: str = "robot", seed=None,
                      params: SceneParams | None = None,
                      min_spacing_s: float = 0.5, rest_s: float = 0.5) -> DropSequence:
    """Objects dropped one at a time into a cup held by the robot or a person.

    No event starts during the first ``rest_s`` seconds, which serve as the
    noise-floor segment.
    """
    params = params or SceneParams()
    if not isinstance(event, ContactEventModel):
        event = EVENTS[EventKind(event)]
    if count < 1:
        raise InvalidInputError(f"count must be >= 1, got {count}")
    if cup_owner not in ("robot", "person"):
        raise InvalidInputError(f"cup_owner must be 'robot' or 'person', got {cup_owner!r}")
    rngs = _streams(seed, ["times", "bursts", "ambient"])
    rate = params.internal_rate_hz
    n = int(round(params.drop_duration_s * rate))
    tail = 6 * event.decay_tau_s
    times = _event_times(rngs["times"], count, rest_s + 0.25, params.drop_duration_s - tail, min_spacing_s)
    scene = Scene(n, rate)
    surface_gain = 1.0 if cup_owner == "robot" else params.airborne_gain
    for t in times:
        amp = _amp(rngs["bursts"], params.event_spread_db)
        burst = burst_waveform(event, rate, rngs["bursts"])
        scene.add_burst(burst, t, amp * event.surface_displacement_scale * surface_gain,
                        amp * event.airborne_pressure_scale)
    scene.add_airborne(ambient(n, anl_db, rngs["ambient"], params), params)
    return DropSequence(DisplacementTrace(scene.displacement, rate),
                        AcousticTrace(scene.pressure, rate), times)


def render_drop(sequence: DropSequence, params: SceneParams | None = None, seed=None) -> DropRecording:
    params = params or SceneParams()
    rngs = _streams(seed, ["smi", "mic"])
    scene = Scene(len(sequence.displacement), sequence.displacement.sample_rate_hz)
    scene.displacement = sequence.displacement.samples
    scene.pressure = sequence.pressure.samples
    smi, mic = _render(scene, params, rngs["smi"], rngs["mic"])
    return DropRecording(smi, mic, sequence.event_times, sequence)


@dataclass(frozen=True)
class DropScenario:
    scenario_id: str
    event: EventKind
    anl_db: float
    cup_owner: str
    count: int = 8


DEFAULT_DROP_SUITE = (
    DropScenario("silicone_baseline", EventKind.SILICONE_DROP, 57.0, "robot"),
    DropScenario("silicone_noise", EventKind.SILICONE_DROP, 82.0, "robot"),
    DropScenario("bolts_robot_cup", EventKind.BOLT_DROP, 57.0, "robot"),
    DropScenario("bolts_person_cup", EventKind.BOLT_DROP, 57.0, "person"),
)


def drop_scenario_seeds(master_seed: int, scenario_id: str):
    """(generation, rendering) seeds of one drop scenario."""
    gen_ss, render_ss = _children(trial_seed(master_seed, scenario_id, 0), 2)
    return gen_ss, render_ss


def gen_drop_suite(master_seed: int, suite=DEFAULT_DROP_SUITE,
                   params: SceneParams | None = None) -> Iterator[tuple[DropScenario, DropRecording]]:
    params = params or SceneParams()
    for sc in suite:
        gen_ss, render_ss = drop_scenario_seeds(master_seed, sc.scenario_id)
        seq = gen_drop_sequence(EVENTS[sc.event], sc.count, sc.anl_db, sc.cup_owner, gen_ss, params)
        yield sc, render_drop(seq, params, render_ss)


# ---------------------------------------------------------------------------
# cup-shake trials


@dataclass(frozen=True)
class Trial:
    label: str
    smi: SmiSignal
    mic: MicSignal
    duration_s: float
    scenario_id: str
    seed: int
    index: int = 0


def wrist_kinematics(wrist: WristProfile, duration_s: float, rate_hz: float):
    """Angle (rad), angular speed (rad/s) and acceleration (rad/s^2) on a sample grid.

    Each move between keyframes is a trapezoid: linear ramp up over
    ``ramp_s``, cruise at ``speed_rad_s``, linear ramp down. Motion past
    ``duration_s`` is cut off.
    """
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    omega = np.zeros(n)
    t0 = wrist.start_s
    for a, b in zip(wrist.keyframes_deg, wrist.keyframes_deg[1:]):
        dist = math.radians(b - a)
        move_t = abs(dist) / wrist.speed_rad_s + wrist.ramp_s
        tau = t - t0
        profile = np.clip(np.minimum(tau, move_t - tau) / wrist.ramp_s, 0.0, 1.0)
        omega += math.copysign(wrist.speed_rad_s, dist) * profile
        t0 += move_t
    angle = math.radians(wrist.keyframes_deg[0]) + np.cumsum(omega) / rate_hz
    alpha = np.gradient(omega, 1.0 / rate_hz)
    return angle, omega, alpha


def acceleration_windows(alpha: np.ndarray, rate_hz: float, threshold: float) -> list[tuple[float, float]]:
    """Contiguous intervals where |alpha| exceeds ``threshold``, as (start_s, end_s)."""
    mask = np.abs(alpha) > threshold
    edges = np.flatnonzero(np.diff(mask.astype(np.int8)))
    bounds = np.concatenate(([0] if mask[0] else [], edges + 1, [len(mask)] if mask[-1] else []))
    return [(bounds[i] / rate_hz, bounds[i + 1] / rate_hz) for i in range(0, len(bounds), 2)]


def reversal_times(omega: np.ndarray, rate_hz: float) -> list[float]:
    s = np.sign(omega)
    nz = np.flatnonzero(s)
    flips = nz[1:][s[nz[1:]] != s[nz[:-1]]]
    return [i / rate_hz for i in flips]


def _content_events(scene: Scene, content: str, windows, rng, params: SceneParams,
                    in_robot_cup: bool, level: float):
    """Bolts rattle as Poisson bursts inside each window; playdough thuds once per window."""
    event = EVENTS[CONTENT_EVENT[content]]
    surface_gain = 1.0 if in_robot_cup else params.airborne_gain
    rate = scene.rate_hz
    for w0, w1 in windows:
        width = w1 - w0
        if content == "bolts":
            times = [w0 + rng.uniform(0.0, 0.3 * width)]
            t = times[0]
            while True:
                t += rng.exponential(1.0 / params.rattle_rate_hz)
                if t >= w1 + 0.1:
                    break
                times.append(t)
        else:
            times = [w0 + width / 2 + rng.normal(0.0, 0.02)]
        for t in times:
            amp = level * _amp(rng, params.event_spread_db)
            scene.add_burst(burst_waveform(event, rate, rng), t,
                            amp * event.surface_displacement_scale * surface_gain,
                            amp * event.airborne_pressure_scale)


def _motor(scene: Scene, omega: np.ndarray, speed: float, rng, params: SceneParams):
    rate = scene.rate_hz
    f = params.motor_hz_per_rad_s * np.abs(omega)
    phase = 2 * np.pi * np.cumsum(f) / rate + rng.uniform(0, 2 * np.pi)
    envelope = np.abs(omega) / speed
    disp = np.zeros(len(scene))
    press = np.zeros(len(scene))
    for k, (h, ph) in enumerate(zip(params.motor_harmonics, params.motor_harmonic_phases), start=1):
        disp += h * np.sin(k * phase + ph)
        press += h * np.cos(k * phase + ph)
    scene.displacement += params.motor_displacement_m * envelope * disp
    scene.pressure += params.motor_pressure * envelope * press


def build_shake_scene(label: str, wrist: WristProfile | None = None,
                      disturbance: DisturbanceModel | None = None, seed=None,
                      params: SceneParams | None = None, components: dict | None = None) -> Scene:
    """Physical traces for one cup-shake trial.

    When ``components`` is a dict, per-source scenes are stored in it under
    ``"motor"``, ``"content"``, ``"disturbance"`` and ``"room"``.
    """
    if label not in LABELS:
        raise InvalidInputError(f"label must be one of {LABELS}, got {label!r}")
    params = params or SceneParams()
    wrist = wrist or WristProfile()
    disturbance = disturbance or DisturbanceModel()
    if disturbance.airborne_to_surface_attenuation_db != params.airborne_to_surface_attenuation_db:
        params = replace(params, airborne_to_surface_attenuation_db=disturbance.airborne_to_surface_attenuation_db)
    rngs = _streams(seed, ["motor", "content", "disturbance", "room"])
    rate = params.internal_rate_hz
    n = int(round(params.trial_duration_s * rate))
    _, omega, alpha = wrist_kinematics(wrist, params.trial_duration_s, rate)
    windows = acceleration_windows(alpha, rate, params.accel_threshold_rad_s2)

    parts = {name: Scene(n, rate) for name in ("motor", "content", "disturbance", "room")}
    _motor(parts["motor"], omega, wrist.speed_rad_s, rngs["motor"], params)
    if params.room_anl_db is not None:
        level = params.room_anl_db + rngs["room"].uniform(-1.0, 1.0) * params.room_anl_spread_db
        slope = rngs["room"].uniform(*params.room_slope_range)
        parts["room"].add_airborne(
            spl_to_rms(level, params) * pink_noise(n, rngs["room"], rate, slope=slope), params)
    if label != "empty":
        _content_events(parts["content"], label, windows, rngs["content"], params, True, 1.0)

    rng = rngs["disturbance"]
    kind = disturbance.kind
    dist = parts["disturbance"]
    if kind == DisturbanceKind.WHITE_NOISE:
        dist.add_airborne(spl_to_rms(disturbance.spl_db, params) * white_noise(n, rng, rate), params)
    elif kind == DisturbanceKind.MUSIC_LIKE:
        dist.add_airborne(
            spl_to_rms(disturbance.spl_db, params) * music_like(n, rng, rate, disturbance.variant), params)
    elif kind == DisturbanceKind.TARGETED_MIMIC:
        jittered = [(w0 + d, w1 + d) for (w0, w1), d in
                    zip(windows, rng.normal(0.0, 0.15, size=len(windows)))]
        _content_events(dist, disturbance.content, jittered, rng, params, False, 1.0)
    elif kind == DisturbanceKind.TARGETED_SHAKE:
        strokes, t = [], rng.uniform(0.0, 0.5)
        while t < params.trial_duration_s:
            strokes.append((t, t + 0.1))
            t += rng.exponential(1.0 / params.shake_stroke_rate_hz) + 0.1
        _content_events(dist, disturbance.content, strokes, rng, params, False,
                        params.harder_shake_factor)

    scene = Scene(n, rate)
    for part in parts.values():
        scene.displacement += part.displacement
        scene.pressure += part.pressure
    if components is not None:
        components.update(parts)
    return scene


def gen_shake_trial(label: str, wrist: WristProfile | None = None,
                    disturbance: DisturbanceModel | None = None, seed=None,
                    params: SceneParams | None = None, scenario_id: str = "adhoc",
                    index: int = 0) -> Trial:
    params = params or SceneParams()
    ss = _as_seedseq(seed)
    scene_ss, smi_ss, mic_ss = _children(ss, 3)
    scene = build_shake_scene(label, wrist, disturbance, scene_ss, params)
    smi, mic = _render(scene, params, np.random.default_rng(smi_ss), np.random.default_rng(mic_ss))
    return Trial(label, smi, mic, params.trial_duration_s, scenario_id,
                 int(ss.generate_state(1)[0]), index)


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class RecipeEntry:
    scenario_id: str
    labels: tuple[str, ...]  # cycled over the trials
    count: int
    disturbance: DisturbanceModel = field(default_factory=DisturbanceModel)
    split: str = "train"  # train | test
    group: str = "none"  # none | ambient | targeted

    def __post_init__(self):
        labels = (self.labels,) if isinstance(self.labels, str) else tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels or any(lab not in LABELS for lab in labels):
            raise ConfigError(f"{self.scenario_id}: labels must be drawn from {LABELS}")
        if self.count < 1:
            raise ConfigError(f"{self.scenario_id}: count must be >= 1")
        if self.split not in ("train", "test"):
            raise ConfigError(f"{self.scenario_id}: split must be 'train' or 'test'")

    def label_for(self, index: int) -> str:
        return self.labels[index % len(self.labels)]


AMBIENT_SPL_DB = 60.0


def default_recipe(train_per_class: int = 50, test_per_set: int = 10,
                   ambient_spl_db: float = AMBIENT_SPL_DB) -> tuple[RecipeEntry, ...]:
    """150 clean training trials, four ambient and four targeted test sets."""
    entries = [RecipeEntry(f"train_{lab}", (lab,), train_per_class) for lab in LABELS]
    ambient_sets = [
        ("music_1", DisturbanceModel(DisturbanceKind.MUSIC_LIKE, ambient_spl_db, variant=0)),
        ("music_2", DisturbanceModel(DisturbanceKind.MUSIC_LIKE, ambient_spl_db, variant=1)),
        ("music_3", DisturbanceModel(DisturbanceKind.MUSIC_LIKE, ambient_spl_db, variant=2)),
        ("white_noise", DisturbanceModel(DisturbanceKind.WHITE_NOISE, ambient_spl_db)),
    ]
    for name, dist in ambient_sets:
        entries.append(RecipeEntry(f"ambient_{name}", LABELS, test_per_set, dist, "test", "ambient"))
    for content in ("bolts", "playdough"):
        for kind, style in ((DisturbanceKind.TARGETED_MIMIC, "mimic"), (DisturbanceKind.TARGETED_SHAKE, "shake")):
            entries.append(RecipeEntry(
                f"targeted_{content}_{style}", ("empty",), test_per_set,
                DisturbanceModel(kind, content=content), "test", "targeted"))
    return tuple(entries)


def iter_dataset(recipe: Sequence[RecipeEntry], seed: int, params: SceneParams | None = None,
                 wrist: WristProfile | None = None) -> Iterator[tuple[RecipeEntry, Trial]]:
    """Trials in recipe order; each trial depends only on (seed, scenario_id, index)."""
    params = params or SceneParams()
    for entry in recipe:
        for i in range(entry.count):
            ss = trial_seed(seed, entry.scenario_id, i)
            yield entry, gen_shake_trial(entry.label_for(i), wrist, entry.disturbance, ss, params,
                                         entry.scenario_id, i)


def gen_dataset(recipe: Sequence[RecipeEntry] | None = None, seed: int = 0,
                params: SceneParams | None = None) -> list[Trial]:
    recipe = default_recipe() if recipe is None else recipe
    return [trial for _, trial in iter_dataset(recipe, seed, params)]
