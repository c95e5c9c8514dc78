"""Glue between generated trials, features and the evaluation tables.

Used by the command-line driver and usable directly on in-memory trials.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import metrics
from .classifier import ProtocolResult, featurize, run_protocol
from .errors import InvalidInputError
from .scenarios import DropRecording, DropScenario, RecipeEntry, Trial
from .spectro import MelConfig, spectrogram_of

SENSORS = ("mic", "laser")
TABLE_HEADER = ("experiment", "mic_acc", "mic_std", "laser_acc", "laser_std")


def trial_id(scenario_id: str, index: int) -> str:
    return f"{scenario_id}_{index:03d}"


def features_of(samples, rate_hz: float, mel: MelConfig | None = None) -> np.ndarray:
    return featurize(spectrogram_of(samples, rate_hz, mel))


@dataclass
class SensorFeatures:
    """Per-sensor features for the clean training pool and every test set."""

    X_train: list = field(default_factory=list)
    y_train: list = field(default_factory=list)
    tests: dict = field(default_factory=dict)  # name -> ([features], [labels])

    def add(self, entry: RecipeEntry, label: str, features: np.ndarray):
        if entry.split == "train":
            self.X_train.append(features)
            self.y_train.append(label)
        else:
            xs, ys = self.tests.setdefault(entry.scenario_id, ([], []))
            xs.append(features)
            ys.append(label)


def collect_features(pairs: Iterable[tuple[RecipeEntry, Trial]], mel: MelConfig | None = None
                     ) -> dict[str, SensorFeatures]:
    out = {s: SensorFeatures() for s in SENSORS}
    for entry, trial in pairs:
        out["laser"].add(entry, trial.label, features_of(trial.smi.samples, trial.smi.sample_rate_hz, mel))
        out["mic"].add(entry, trial.label, features_of(trial.mic.samples, trial.mic.sample_rate_hz, mel))
    return out


def recipe_groups(recipe: Sequence[RecipeEntry]) -> dict[str, list[str]]:
    groups: dict[str, list[str]] = {}
    for e in recipe:
        if e.split == "test" and e.group != "none":
            groups.setdefault(e.group, []).append(e.scenario_id)
    return groups


def evaluate_sensors(features: Mapping[str, SensorFeatures], groups: Mapping[str, Sequence[str]],
                     seed: int, k: int = 5, epochs: int = 10, **train_kwargs) -> dict[str, ProtocolResult]:
    results = {}
    for sensor in SENSORS:
        f = features[sensor]
        tests = {name: (np.array(xs), ys) for name, (xs, ys) in f.tests.items()}
        results[sensor] = run_protocol(np.array(f.X_train), f.y_train, tests, groups,
                                       k=k, epochs=epochs, seed=seed, **train_kwargs)
    return results


def table_rows(results: Mapping[str, ProtocolResult], test_order: Sequence[str]) -> list[list]:
    """Table-I layout: validation first, then one row per test set."""
    rows = []
    for name in ["validation", *test_order]:
        row = [name]
        for sensor in SENSORS:
            r = results[sensor]
            rep = r.validation if name == "validation" else r.tests[name]
            row += [round(rep.mean, 6), round(rep.std, 6)]
        rows.append(row)
    return rows


def group_rows(results: Mapping[str, ProtocolResult]) -> list[list]:
    names = list(results[SENSORS[0]].groups)
    rows = []
    for name in names:
        row = [name]
        for sensor in SENSORS:
            rep = results[sensor].groups[name]
            row += [round(rep.mean, 6), round(rep.std, 6)]
        rows.append(row)
    return rows


# -- time-domain analysis ----------------------------------------------------


@dataclass(frozen=True)
class SensorTrace:
    samples: np.ndarray
    sample_rate_hz: float


def drop_snr(trace: SensorTrace, event_times, rest_segment_s: float = metrics.REST_SEGMENT_S,
             peak_window_s: float = 0.05, threshold_k: float = metrics.THRESHOLD_K,
             refractory_s: float = metrics.REFRACTORY_S):
    """SNR at the known drop times plus the count of blindly detected peaks."""
    if not event_times:
        raise InvalidInputError("drop recording has no event times")
    noise = metrics.noise_floor(metrics.rest_segment(trace.samples, trace.sample_rate_hz, rest_segment_s))
    z = metrics.normalize(trace.samples, noise)
    peaks = metrics.peaks_at(z, trace.sample_rate_hz, event_times, peak_window_s)
    detected = metrics.detect_peaks(z, trace.sample_rate_hz, threshold_k, refractory_s)
    return metrics.snr(peaks), peaks, detected, noise


def analyze_drops(recordings: Iterable[tuple[DropScenario, DropRecording]], **kwargs):
    """Per-(scenario, sensor) SNR reports and robot-vs-person separations."""
    reports, peaks = {}, {}
    scenarios = []
    for sc, rec in recordings:
        scenarios.append(sc)
        for sensor, sig in (("laser", rec.smi), ("mic", rec.mic)):
            rep, pk, det, _ = drop_snr(SensorTrace(sig.samples, sig.sample_rate_hz), rec.event_times, **kwargs)
            reports[(sc.scenario_id, sensor)] = (rep, det)
            peaks[(sc.scenario_id, sensor)] = pk
    return reports, separations(scenarios, peaks)


def separations(scenarios: Sequence[DropScenario], peaks) -> list[tuple[str, str, str, metrics.Separation]]:
    """Pair every robot-cup scenario with the person-cup one of the same event and level."""
    out = []
    for robot in scenarios:
        if robot.cup_owner != "robot":
            continue
        for person in scenarios:
            if person.cup_owner == "person" and person.event == robot.event and person.anl_db == robot.anl_db:
                for sensor in ("laser", "mic"):
                    sep = metrics.separation_margin(peaks[(robot.scenario_id, sensor)],
                                                    peaks[(person.scenario_id, sensor)])
                    out.append((sensor, robot.scenario_id, person.scenario_id, sep))
    return out
