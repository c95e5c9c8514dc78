"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line; the terminal summary repeats them all.
The dataset-level criterion (7) generates the full 230-trial dataset and
takes several minutes.
"""

import math
import time

import numpy as np
import pytest

from smifinger import fileio
from smifinger.cli import main
from smifinger.config import DEFAULT_SEED
from smifinger.metrics import PeakSet, noise_floor, snr
from smifinger.physics import (
    DisplacementTrace,
    LaserParams,
    count_fringes,
    fringe_law_count,
    rest_offset_m,
    simulate_smi,
)
from smifinger.pipeline import analyze_drops, collect_features, evaluate_sensors, recipe_groups
from smifinger.readout import AcousticTrace, mic_readout
from smifinger.scenarios import (
    WristProfile,
    default_recipe,
    gen_drop_suite,
    gen_shake_trial,
    iter_dataset,
    trial_seed,
)
from smifinger.spectro import dominant_frequency, hz_to_mel, log_mel, spectral_flatness, spectrogram_of

LAMBDA = 650e-9
FS = 96_000.0


def test_criterion_1_fringe_law(criterion):
    with criterion(1, "fringe law: 3.25 um ramp gives 10 fringes; 100 random ramps within +-1"):
        t0 = time.perf_counter()
        out = simulate_smi(DisplacementTrace(np.linspace(0.0, 3.25e-6, 20_000), FS))
        assert count_fringes(out) == 10
        rng = np.random.default_rng(100)
        for _ in range(100):
            start = rng.uniform(0, 2e-6)
            travel = rng.uniform(0.5e-6, 6e-6) * rng.choice([-1, 1])
            shape = np.sort(rng.uniform(0, 1, 20_000))
            d = start + travel * (shape - shape[0]) / (shape[-1] - shape[0])
            got = count_fringes(simulate_smi(DisplacementTrace(d, FS)))
            expected = math.floor(2 * abs(travel) / LAMBDA)
            assert fringe_law_count(travel) == expected
            assert abs(got - expected) <= 1
        assert time.perf_counter() - t0 < 5.0


def test_criterion_2_weak_feedback_limit(criterion):
    with criterion(2, "C = 0 matches 1 + m cos(4 pi D / lambda) within 1e-9"):
        laser = LaserParams(feedback_C=0.0)
        rng = np.random.default_rng(200)
        for _ in range(10):
            d = np.cumsum(rng.normal(0, 30e-9, 5000)) + rng.uniform(0, 2e-6)
            out = simulate_smi(DisplacementTrace(d, FS), laser).samples
            ref = 1 + laser.modulation_depth * np.cos(4 * np.pi * d / laser.wavelength_m)
            assert np.max(np.abs(out - ref)) < 1e-9


def test_criterion_3_noise_and_snr_oracles(criterion):
    with criterion(3, "noise floor and SNR match brute-force oracles; worked examples exact"):
        assert noise_floor(np.array([1.0, -1.0, 1.0, -1.0])).p_noise == 1.0
        assert snr(PeakSet.from_amplitudes([3.0, 4.0])).snr_linear == 12.5
        rng = np.random.default_rng(300)
        for _ in range(1000):
            x = rng.normal(rng.uniform(-3, 3), rng.uniform(1e-3, 5), int(rng.integers(2, 300)))
            m = sum(x.tolist()) / len(x)
            p = sum((v - m) ** 2 for v in x.tolist()) / len(x)
            est = noise_floor(x)
            assert est.p_noise == pytest.approx(p, rel=1e-12)
            amps = np.abs(rng.normal(0, 5, int(rng.integers(1, 12)))) + 1e-3
            ref = sum(a * a for a in amps.tolist()) / (len(amps) * p)
            assert snr(PeakSet.from_amplitudes(amps), est).snr_linear == pytest.approx(ref, rel=1e-12)


def test_criterion_4_spectrogram_shape(criterion):
    with criterion(4, "11 s at 16 kHz gives 1098 x 128; mel(1000 Hz) = 1000 +- 0.5"):
        spec = log_mel(np.random.default_rng(400).normal(size=11 * 16_000))
        assert spec.values.shape == ((176_000 - 400) // 160 + 1, 128) == (1098, 128)
        assert abs(float(hz_to_mel(1000.0)) - 1000.0) <= 0.5


def test_criterion_5_frequency_spreading(criterion):
    with criterion(5, "SMI spreads an 80 Hz vibration (>= 30 % above 400 Hz); mic keeps it narrow"):
        t0 = time.perf_counter()
        t = np.arange(int(FS)) / FS
        d = rest_offset_m() + 5 * LAMBDA * np.sin(2 * np.pi * 80 * t)
        smi = simulate_smi(DisplacementTrace(d, FS)).samples
        p = np.abs(np.fft.rfft(smi - smi.mean())) ** 2
        f = np.fft.rfftfreq(len(smi), 1 / FS)
        assert p[f > 400].sum() / p.sum() >= 0.30
        mic = mic_readout(AcousticTrace(0.1 * np.sin(2 * np.pi * 80 * t), FS), noise_seed=0).samples
        pm = np.abs(np.fft.rfft(mic)) ** 2
        fm = np.fft.rfftfreq(len(mic), 1 / 20_000.0)
        k = int(np.argmin(np.abs(fm - 80.0)))
        assert pm[k - 2 : k + 3].sum() / pm.sum() >= 0.99
        assert time.perf_counter() - t0 < 10.0


def test_criterion_6_time_domain_ordering(criterion):
    with criterion(6, "drop suite: mic wins at baseline, laser wins under noise, laser alone separates cups"):
        reports, seps = analyze_drops(gen_drop_suite(DEFAULT_SEED))
        db = {key: rep.snr_db for key, (rep, _) in reports.items()}
        print(f"  baseline  mic {db['silicone_baseline', 'mic']:.1f} dB, laser {db['silicone_baseline', 'laser']:.1f} dB")
        print(f"  noise     mic {db['silicone_noise', 'mic']:.1f} dB, laser {db['silicone_noise', 'laser']:.1f} dB")
        assert db["silicone_baseline", "mic"] > db["silicone_baseline", "laser"]
        assert db["silicone_noise", "laser"] > db["silicone_noise", "mic"]
        flags = {sensor: sep.perfectly_separated for sensor, _, _, sep in seps}
        for sensor, _, _, sep in seps:
            print(f"  two-cup   {sensor} margin {sep.margin_db:+.1f} dB")
        assert flags == {"laser": True, "mic": False}


def test_criterion_7_table_analog(criterion):
    with criterion(7, "230-trial dataset: validation 1.00 +- 0.00, ambient >= 0.80, targeted laser - mic >= 0.30"):
        t0 = time.perf_counter()
        recipe = default_recipe()
        features = collect_features(iter_dataset(recipe, DEFAULT_SEED))
        results = evaluate_sensors(features, recipe_groups(recipe), DEFAULT_SEED)
        elapsed = time.perf_counter() - t0
        for sensor, res in results.items():
            print(f"  {sensor:<5} validation {res.validation.formatted()}, "
                  f"ambient {res.groups['ambient'].formatted()}, targeted {res.groups['targeted'].formatted()}")
        print(f"  pipeline time {elapsed:.0f} s")
        for sensor in ("mic", "laser"):
            assert results[sensor].validation.mean == 1.0 and results[sensor].validation.std == 0.0
            assert results[sensor].groups["ambient"].mean >= 0.80
        targeted = {s: results[s].groups["targeted"].mean for s in results}
        assert targeted["laser"] - targeted["mic"] >= 0.30
        assert elapsed < 600


def test_criterion_8_determinism(criterion, tmp_path):
    with criterion(8, "simulate + train-eval twice with one seed give byte-identical CSVs"):
        outputs = []
        for run in ("a", "b"):
            data, res = tmp_path / run / "data", tmp_path / run / "res"
            assert main(["simulate", "--seed", "77", "-o", str(data),
                         "--train-per-class", "5", "--test-per-set", "1"]) == 0
            assert main(["train-eval", "--dataset", str(data), "-o", str(res), "--seed", "77"]) == 0
            outputs.append((data, res))
        (da, ra), (db, rb) = outputs
        csvs = sorted(p.name for p in ra.glob("*.csv"))
        assert "table.csv" in csvs and len(csvs) >= 6
        for name in csvs:
            assert (ra / name).read_bytes() == (rb / name).read_bytes(), name
        wavs = sorted(p.name for p in da.glob("*.wav"))
        assert wavs and all(fileio.sha256_file(da / w) == fileio.sha256_file(db / w) for w in wavs)


def test_criterion_9_motor_noise(criterion):
    with criterion(9, "motor fundamental rises with wrist speed; laser flatness >= 3x mic"):
        tops = []
        for speed in (0.2, 0.4, 0.8):
            freqs = []
            for i in range(3):
                trial = gen_shake_trial("empty", WristProfile(speed_rad_s=speed),
                                        seed=trial_seed(DEFAULT_SEED, f"speed_{speed}", i))
                laser = spectrogram_of(trial.smi.samples, trial.smi.sample_rate_hz)
                mic = spectrogram_of(trial.mic.samples, trial.mic.sample_rate_hz)
                ratio = spectral_flatness(laser) / spectral_flatness(mic)
                freqs.append(dominant_frequency(mic))
                print(f"  {speed} rad/s trial {i}: mic peak {freqs[-1]:.0f} Hz, flatness ratio {ratio:.1f}")
                assert ratio >= 3.0
            tops.append(freqs)
        # every trial at a faster speed peaks higher than every trial at a slower one
        assert max(tops[0]) < min(tops[1]) and max(tops[1]) < min(tops[2])
