import math

import numpy as np
import pytest

from smifinger.errors import InvalidInputError
from smifinger.physics import (
    DisplacementTrace,
    LaserParams,
    count_fringes,
    excess_phase_solve,
    fringe_law_count,
    rest_offset_m,
    simulate_smi,
)

LAMBDA = 650e-9


def bisect_root(phi0, C, alpha, lo, hi, iters=200):
    """Plain bisection on f(x) = x - phi0 + C sin(x + atan(alpha)); f(lo) <= 0 <= f(hi)."""
    theta = math.atan(alpha)
    f = lambda x: x - phi0 + C * math.sin(x + theta)
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm <= 0) == (flo <= 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def residual(phi, phi0, C, alpha):
    return phi - phi0 + C * math.sin(phi + math.atan(alpha))


def test_weak_feedback_matches_bisection_oracle():
    rng = np.random.default_rng(11)
    for _ in range(300):
        phi0 = rng.uniform(-50, 50)
        C = rng.uniform(0.0, 0.99)
        alpha = rng.uniform(0, 6)
        expected = bisect_root(phi0, C, alpha, phi0 - C - 1e-9, phi0 + C + 1e-9)
        assert excess_phase_solve(phi0, C, alpha) == pytest.approx(expected, abs=1e-9)


def test_strong_feedback_root_is_exact_and_on_a_stable_branch():
    rng = np.random.default_rng(12)
    theta = math.atan(4.6)
    for _ in range(300):
        phi0 = rng.uniform(-50, 50)
        C = rng.uniform(1.0, 6.0)
        phi = excess_phase_solve(phi0, C, 4.6)
        assert abs(residual(phi, phi0, C, 4.6)) < 1e-9
        # stable solutions have a positive slope of f: 1 + C cos(phi + theta) > 0
        assert 1 + C * math.cos(phi + theta) >= -1e-9


def test_zero_feedback_returns_phi0_exactly():
    for phi0 in (-3.0, 0.0, 1.234, 1e3):
        assert excess_phase_solve(phi0, 0.0, 4.6) == phi0


def test_periodicity_in_phi0():
    for phi0 in np.linspace(-4, 4, 17):
        a = excess_phase_solve(phi0, 0.7, 3.0)
        b = excess_phase_solve(phi0 + 2 * math.pi, 0.7, 3.0)
        assert b - a == pytest.approx(2 * math.pi, abs=1e-9)


def test_solver_rejects_nan_and_negative_feedback():
    with pytest.raises(InvalidInputError):
        excess_phase_solve(float("nan"), 1.0, 4.6)
    with pytest.raises(InvalidInputError):
        excess_phase_solve(0.0, -0.5, 4.6)


def test_hysteresis_follows_previous_branch():
    # with C = 3 several roots exist near phi0 = pi; the previous value picks the branch
    phi0 = math.pi - math.atan(4.6)
    lo = excess_phase_solve(phi0, 3.0, 4.6, prev_phiF=phi0 - 2.0)
    hi = excess_phase_solve(phi0, 3.0, 4.6, prev_phiF=phi0 + 2.0)
    for phi in (lo, hi):
        assert abs(residual(phi, phi0, 3.0, 4.6)) < 1e-9
    assert hi > lo


def test_weak_feedback_limit_per_sample():
    rng = np.random.default_rng(2)
    laser = LaserParams(feedback_C=0.0)
    for _ in range(10):
        d = np.cumsum(rng.normal(0, 20e-9, 4000)) + rng.uniform(0, 1e-6)
        out = simulate_smi(DisplacementTrace(d, 96_000.0), laser)
        expected = 1 + laser.modulation_depth * np.cos(4 * np.pi * d / laser.wavelength_m)
        assert np.max(np.abs(out.samples - expected)) < 1e-9


def ramp(start, stop, n=20_000):
    return DisplacementTrace(np.linspace(start, stop, n), 96_000.0)


def test_fringe_law_worked_example():
    out = simulate_smi(ramp(0.0, 3.25e-6))
    assert count_fringes(out) == 10
    assert fringe_law_count(3.25e-6) == 10


def test_fringe_law_random_monotone_ramps():
    rng = np.random.default_rng(3)
    for _ in range(100):
        start = rng.uniform(0, 2e-6)
        travel = rng.uniform(0.5e-6, 6e-6) * rng.choice([-1, 1])
        shape = np.sort(rng.uniform(0, 1, 30_000))  # monotone, uneven speed
        d = start + travel * (shape - shape[0]) / (shape[-1] - shape[0])
        out = simulate_smi(DisplacementTrace(d, 96_000.0))
        assert abs(count_fringes(out) - fringe_law_count(travel)) <= 1


def test_triangle_sweep_counts_both_directions():
    off = rest_offset_m()
    n_half = 8
    travel = n_half * LAMBDA / 2 + 0.2 * LAMBDA / 2
    d = off + np.concatenate([np.linspace(0, travel, 20_000), np.linspace(travel, 0, 20_000)[1:]])
    out = simulate_smi(DisplacementTrace(d, 96_000.0))
    assert count_fringes(out) == pytest.approx(2 * n_half, abs=1)


def test_fringes_are_sawtooth_like_under_strong_feedback():
    out = simulate_smi(ramp(0.0, 3.25e-6)).samples
    steps = np.abs(np.diff(out))
    ptp = np.ptp(out)
    jumps = steps[steps > 0.25 * ptp]
    assert len(jumps) == 10
    # discontinuities dominate; the smooth part moves in tiny steps
    assert np.median(steps) < 0.02 * ptp


def test_count_fringes_edge_cases():
    assert count_fringes(np.ones(100)) == 0
    with pytest.raises(InvalidInputError):
        count_fringes(np.array([]))


def test_frequency_spreading_of_motor_like_vibration():
    fs = 96_000.0
    t = np.arange(int(fs)) / fs
    d = rest_offset_m() + 5 * LAMBDA * np.sin(2 * np.pi * 80 * t)
    out = simulate_smi(DisplacementTrace(d, fs)).samples
    spec = np.abs(np.fft.rfft(out - out.mean())) ** 2
    f = np.fft.rfftfreq(len(out), 1 / fs)
    assert spec[f > 400].sum() / spec.sum() >= 0.30


def test_displacement_csv_round_trip(tmp_path):
    trace = DisplacementTrace(np.linspace(0, 1e-6, 50), 1000.0)
    path = tmp_path / "d.csv"
    trace.to_csv(path)
    back = DisplacementTrace.from_csv(path, 1000.0)
    np.testing.assert_allclose(back.samples, trace.samples, rtol=1e-12)


def test_laser_params_validation():
    with pytest.raises(InvalidInputError):
        LaserParams(wavelength_m=-1)
    with pytest.raises(InvalidInputError):
        LaserParams(modulation_depth=0)
    assert LaserParams(feedback_C=3).needs_branch_tracking
    assert not LaserParams(feedback_C=0.5).needs_branch_tracking


def test_rejects_bad_displacement():
    with pytest.raises(InvalidInputError):
        DisplacementTrace(np.array([0.0, np.nan]), 1000.0)
    with pytest.raises(InvalidInputError):
        DisplacementTrace(np.zeros(3), 0.0)


def test_bisection_worked_example():
    # phi0 = pi, C = 0.5, alpha = 0: the unique root of x = pi - 0.5 sin(x)
    expected = bisect_root(math.pi, 0.5, 0.0, math.pi - 0.5, math.pi + 0.5)
    assert excess_phase_solve(math.pi, 0.5, 0.0) == pytest.approx(expected, abs=1e-12)


def test_static_target_gives_constant_output():
    out = simulate_smi(DisplacementTrace(np.full(2000, 1.7e-7), 96_000.0)).samples
    assert np.ptp(out) == 0.0
    assert count_fringes(out) == 0


def test_small_vibration_is_fringe_free():
    fs = 96_000.0
    t = np.arange(9600) / fs
    d = rest_offset_m() + (LAMBDA / 8 - 1e-9) / 2 * np.sin(2 * np.pi * 200 * t)  # peak-to-peak < lambda/4
    out = simulate_smi(DisplacementTrace(d, fs), LaserParams(feedback_C=0.0)).samples
    assert count_fringes(out) == 0
    spec = np.abs(np.fft.rfft(out - out.mean()))
    f = np.fft.rfftfreq(len(out), 1 / fs)
    assert f[np.argmax(spec)] == pytest.approx(200.0, abs=10.0)
