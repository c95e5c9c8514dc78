"""Behavioral self-mixing interferometry model.

The laser sees its own light reflected from a moving target. Without feedback
the interference phase is ``phi0 = 4*pi*D/wavelength``. With feedback the
phase actually present in the cavity, ``phiF``, obeys the excess-phase
equation

    phiF = phi0 - C * sin(phiF + arctan(alpha))

and the photodiode power is ``1 + m * cos(phiF)``. For ``C >= 1`` the
equation has several solutions; the laser stays on the branch it is on until
that branch ceases to exist, then jumps. Each jump is one fringe, and one
occurs per half wavelength of travel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .errors import InvalidInputError, SolverError

TWO_PI = 2.0 * math.pi

SOLVER_TOL = 1e-10
SOLVER_MAX_ITER = 100
_MAX_BRANCH_SCAN = 100_000

# kernel status codes
_OK = 0
_NO_CONVERGENCE = 1
_NO_BRANCH = 2


@dataclass(frozen=True)
class LaserParams:
    wavelength_m: float = 650e-9
    feedback_C: float = 3.0
    linewidth_alpha: float = 4.6
    modulation_depth: float = 0.1

    def __post_init__(self):
        if not (self.wavelength_m > 0 and math.isfinite(self.wavelength_m)):
            raise InvalidInputError(f"wavelength_m must be positive, got {self.wavelength_m}")
        if not (self.feedback_C >= 0 and math.isfinite(self.feedback_C)):
            raise InvalidInputError(f"feedback_C must be >= 0, got {self.feedback_C}")
        if not (self.linewidth_alpha >= 0 and math.isfinite(self.linewidth_alpha)):
            raise InvalidInputError(f"linewidth_alpha must be >= 0, got {self.linewidth_alpha}")
        if not (0 < self.modulation_depth <= 1):
            raise InvalidInputError(f"modulation_depth must be in (0, 1], got {self.modulation_depth}")

    @property
    def needs_branch_tracking(self) -> bool:
        return self.feedback_C >= 1.0


def _as_samples(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"samples must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("samples contain NaN or infinite values")
    return arr


def _check_rate(rate) -> float:
    rate = float(rate)
    if not (rate > 0 and math.isfinite(rate)):
        raise InvalidInputError(f"sample_rate_hz must be positive, got {rate}")
    return rate


@dataclass(frozen=True)
class DisplacementTrace:
    """Target surface displacement in meters, uniformly sampled."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "samples", _as_samples(self.samples))
        object.__setattr__(self, "sample_rate_hz", _check_rate(self.sample_rate_hz))

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    @classmethod
    def from_csv(cls, path, sample_rate_hz) -> "DisplacementTrace":
        """Read a one-column CSV with header ``displacement_m``."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["displacement_m"]:
                raise InvalidInputError(f"{path}: expected single header 'displacement_m', got {header}")
            try:
                values = [float(row[0]) for row in reader if row]
            except ValueError as exc:
                raise InvalidInputError(f"{path}: {exc}") from None
        return cls(np.array(values), sample_rate_hz)

    def to_csv(self, path):
        Path(path).write_text(
            "displacement_m\n" + "".join(f"{v!r}\n" for v in self.samples.tolist())
        )


@dataclass(frozen=True)
class SmiSignal:
    """Sampled SMI trace; before the readout chain this is the photodiode power."""

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


# ---------------------------------------------------------------------------
# solver kernel


@numba.njit(cache=True)
def _residual(x, phi0, C, theta):
    return x - phi0 + C * math.sin(x + theta)


@numba.njit(cache=True)
def _safe_newton(phi0, C, theta, a, b, x0):
    """Newton iteration kept inside the bracket [a, b]; f(a) <= 0 <= f(b)."""
    x = x0
    if x < a or x > b:
        x = 0.5 * (a + b)
    for _ in range(SOLVER_MAX_ITER):
        fx = _residual(x, phi0, C, theta)
        if fx == 0.0:
            return x, _OK
        if fx < 0.0:
            a = x
        else:
            b = x
        dfx = 1.0 + C * math.cos(x + theta)
        step_ok = False
        if dfx > 0.0:
            xn = x - fx / dfx
            if a <= xn <= b:
                step_ok = True
        if not step_ok:
            xn = 0.5 * (a + b)
        if abs(xn - x) < SOLVER_TOL or (b - a) < SOLVER_TOL:
            return xn, _OK
        x = xn
    return x, _NO_CONVERGENCE


@numba.njit(cache=True)
def _solve(phi0, C, theta, prev):
    """Return (phiF, status). ``prev`` selects the branch when C >= 1."""
    if C == 0.0:
        return phi0, _OK
    if C < 1.0:
        # f is strictly increasing; the root lies within C of phi0
        return _safe_newton(phi0, C, theta, phi0 - C, phi0 + C, prev)
    # branch k spans u = x + theta in [2*pi*k - half, 2*pi*k + half]
    half = math.pi - math.acos(1.0 / C)
    k = math.floor((prev + theta) / TWO_PI + 0.5)
    for _ in range(_MAX_BRANCH_SCAN):
        lo = TWO_PI * k - half - theta
        hi = TWO_PI * k + half - theta
        if _residual(lo, phi0, C, theta) > 0.0:
            k -= 1
        elif _residual(hi, phi0, C, theta) < 0.0:
            k += 1
        else:
            return _safe_newton(phi0, C, theta, lo, hi, prev)
    return prev, _NO_BRANCH


@numba.njit(cache=True)
def _simulate_kernel(phi0, C, theta, m, out):
    prev = phi0[0]
    for i in range(phi0.shape[0]):
        phi, status = _solve(phi0[i], C, theta, prev)
        if status != _OK:
            return i
        out[i] = 1.0 + m * math.cos(phi)
        prev = phi
    return -1


# ---------------------------------------------------------------------------
# public API


def excess_phase_solve(phi0, C, alpha, prev_phiF=None) -> float:
    """Solve ``phiF = phi0 - C*sin(phiF + arctan(alpha))`` for phiF.

    For ``C >= 1`` the root on the branch containing ``prev_phiF`` is returned
    if that branch still has one; otherwise the nearest branch in the
    direction phi0 moved. Without ``prev_phiF`` the branch nearest the
    feedback-free solution ``phi0`` is used.
    """
    values = (phi0, C, alpha) if prev_phiF is None else (phi0, C, alpha, prev_phiF)
    if any(math.isnan(float(v)) for v in values):
        raise InvalidInputError("excess_phase_solve got NaN input")
    if C < 0 or alpha < 0:
        raise InvalidInputError(f"C and alpha must be >= 0, got C={C}, alpha={alpha}")
    prev = float(phi0) if prev_phiF is None else float(prev_phiF)
    phi, status = _solve(float(phi0), float(C), math.atan(alpha), prev)
    if status != _OK:
        raise SolverError(f"excess-phase solver failed (phi0={phi0}, C={C})", phi0=phi0, C=C)
    return phi


def simulate_smi(displacement: DisplacementTrace, laser: LaserParams | None = None) -> SmiSignal:
    """Photodiode power ``1 + m*cos(phiF)`` for every displacement sample."""
    laser = laser or LaserParams()
    phi0 = (4.0 * math.pi / laser.wavelength_m) * displacement.samples
    out = np.empty_like(phi0)
    if len(phi0):
        bad = _simulate_kernel(
            phi0, float(laser.feedback_C), math.atan(laser.linewidth_alpha),
            float(laser.modulation_depth), out,
        )
        if bad >= 0:
            raise SolverError(
                f"excess-phase solver failed at sample {bad}",
                phi0=float(phi0[bad]), C=laser.feedback_C, index=int(bad),
            )
    return SmiSignal(out, displacement.sample_rate_hz, meta={"laser": laser})


def count_fringes(signal, threshold: float = 0.25) -> int:
    """Count sample-to-sample jumps larger than ``threshold`` times the peak-to-peak."""
    samples = signal.samples if isinstance(signal, SmiSignal) else np.asarray(signal, dtype=float)
    if samples.size == 0:
        raise InvalidInputError("cannot count fringes in an empty signal")
    if not threshold > 0:
        raise InvalidInputError(f"threshold must be > 0, got {threshold}")
    ptp = float(np.ptp(samples))
    if ptp == 0.0:
        return 0
    return int(np.count_nonzero(np.abs(np.diff(samples)) > threshold * ptp))


def fringe_law_count(travel_m: float, wavelength_m: float = 650e-9) -> int:
    """Number of fringes expected for a monotone travel of ``travel_m``."""
    # round first so that exact multiples of lambda/2 are not lost to representation error
    return int(math.floor(round(2.0 * abs(travel_m) / wavelength_m, 9)))


def rest_offset_m(laser: LaserParams | None = None) -> float:
    """A static displacement that parks the laser mid-branch.

    At this point phiF + arctan(alpha) = 0, so the operating point is as far
    as possible from both branch edges and small vibrations cannot trigger a
    fringe jump.
    """
    laser = laser or LaserParams()
    phi_f = -math.atan(laser.linewidth_alpha)
    phi0 = phi_f  # sin(phiF + theta) = 0
    phi0 = phi0 % TWO_PI
    return phi0 * laser.wavelength_m / (4.0 * math.pi)
