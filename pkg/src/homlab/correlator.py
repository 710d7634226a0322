"""Integrated intensities, ensemble cross correlation and dip visibility.

The normalized cross correlation of an ensemble of output-intensity pairs is

    C = <I+ I-> / (<I+> <I->)

with ``<.>`` the (optionally weighted) ensemble mean.  Classically C(inf) = 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, NormalizationError, PreconditionError, ShapeError
from .signals import PhaseDistribution, SampledSignal, TimeGrid, low_pass

CSV_HEADER = ("tau_s", "c_mean", "ci_lo", "ci_hi")


def integrated_intensity(signal: SampledSignal, window: TimeGrid | None = None,
                         cutoff: float | None = None) -> float:
    """Trapezoidal integral of the detected intensity over ``window``.

    Analytic signals use ``|E|^2``.  Real voltages are squared and, when
    ``cutoff`` is given, low-passed to average out the doubled carrier, which
    leaves half the squared envelope.  ``window`` defaults to the whole record.
    """
    if signal.is_analytic:
        inten = np.abs(signal.samples) ** 2
    else:
        sq = signal.with_samples(signal.samples ** 2)
        if cutoff is not None:
            sq = low_pass(sq, cutoff)
        inten = sq.samples
    if window is None:
        total = float(np.trapezoid(inten, dx=signal.dt))
    else:
        slack = 1e-6 * signal.dt
        if window.t_start < signal.t_start - slack or window.t_end > signal.t_end + slack:
            raise DomainError(
                f"window [{window.t_start:g}, {window.t_end:g}] outside signal "
                f"[{signal.t_start:g}, {signal.t_end:g}]")
        t = signal.times()
        mask = (t >= window.t_start - slack) & (t <= window.t_end + slack)
        if mask.sum() < 2:
            raise DomainError("window holds fewer than 2 samples")
        total = float(np.trapezoid(inten[mask], dx=signal.dt))
    if not signal.is_analytic:
        # filter ringing can push an empty port a hair below zero
        total = max(total, 0.0)
    return total


@dataclass
class EnsembleRecord:
    """Integrated output intensities for one delay.

    ``weights`` is ``None`` for a sampled ensemble (equal weights) or holds
    exact probabilities when the phase support was enumerated.
    """

    delay: float
    i_plus: np.ndarray
    i_minus: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.i_plus = np.asarray(self.i_plus, dtype=float)
        self.i_minus = np.asarray(self.i_minus, dtype=float)
        if self.i_plus.shape != self.i_minus.shape or self.i_plus.ndim != 1:
            raise ShapeError("i_plus and i_minus must be 1-D arrays of equal length")
        if np.any(self.i_plus < 0) or np.any(self.i_minus < 0):
            raise DomainError("integrated intensities must be non-negative")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != self.i_plus.shape:
                raise ShapeError("weights must match the intensity arrays")
            if abs(self.weights.sum() - 1.0) > 1e-12:
                raise DomainError("weights must sum to 1")

    @property
    def sample_count(self) -> int:
        return int(self.i_plus.size)

    def pairs(self) -> np.ndarray:
        return np.column_stack([self.i_plus, self.i_minus])

    def _mean(self, x: np.ndarray) -> float:
        if self.weights is None:
            return float(np.mean(x))
        return float(np.dot(self.weights, x))


def correlation_from_moments(m_pm, m_p, m_m):
    """``m_pm / (m_p m_m)``; arrays allowed.  Raises on a zero port mean."""
    m_p = np.asarray(m_p, dtype=float)
    m_m = np.asarray(m_m, dtype=float)
    if np.any(m_p <= 0) or np.any(m_m <= 0):
        raise NormalizationError("mean integrated intensity is zero on an output port")
    return np.asarray(m_pm, dtype=float) / (m_p * m_m)


def cross_correlation(record: EnsembleRecord) -> float:
    if record.sample_count < 2:
        raise PreconditionError("cross correlation needs at least 2 samples")
    m_pm = record._mean(record.i_plus * record.i_minus)
    return float(correlation_from_moments(m_pm, record._mean(record.i_plus),
                                          record._mean(record.i_minus)))


def raw_cross_correlation(record: EnsembleRecord) -> float:
    """Un-normalized ``<I+ I->``; the quantity compared across MZI cases."""
    return record._mean(record.i_plus * record.i_minus)


def dip_visibility(c_zero: float, c_far: float) -> float:
    if c_far == 0:
        raise NormalizationError("C(inf) is zero")
    if not c_far > 0:
        raise DomainError("C(inf) must be positive")
    return 1.0 - c_zero / c_far


def analytic_visibility(dist: PhaseDistribution) -> float:
    """Exact E[cos^2 phi]; rejects laws that leave second-order interference."""
    mc = dist.mean_cos()
    if abs(mc) > 1e-9:
        raise PreconditionError(
            f"E[cos phi] = {mc:.3g} != 0: second-order interference survives the average")
    return dist.mean_cos2()


def overlap_ratio(tau, envelope_sigma: float):
    """Gaussian envelope overlap O(tau)/O(0) = exp(-tau^2 / (4 sigma^2))."""
    tau = np.asarray(tau, dtype=float)
    return np.exp(-tau ** 2 / (4.0 * envelope_sigma ** 2))


def mismatch_factor(amplitude_ratio):
    """Visibility multiplier ``(2 eps / (1 + eps^2))^2`` for pulse amplitudes A2 = eps A1."""
    eps = np.asarray(amplitude_ratio, dtype=float)
    return (2.0 * eps / (1.0 + eps ** 2)) ** 2


def analytic_classical_dip(tau, envelope_sigma: float, dist: PhaseDistribution,
                           amplitude_ratio: float = 1.0):
    """C(tau) = 1 - V m(eps) exp(-tau^2 / (2 sigma^2)) for Gaussian envelopes."""
    if not envelope_sigma > 0:
        raise DomainError("envelope_sigma must be > 0")
    v = analytic_visibility(dist) * mismatch_factor(amplitude_ratio)
    out = 1.0 - v * overlap_ratio(tau, envelope_sigma) ** 2
    return float(out) if np.ndim(out) == 0 else out


def blocked_arm_raw_correlation(tau, envelope_sigma: float, amplitude: float = 1.0):
    """Un-normalized <I+ I-> behind a one-arm-blocked MZI, phases in {0, pi}.

    Equals (I^2 + O(tau)^2)/4 with I the single-pulse energy and O the
    envelope overlap, so C(0) = I^2 / 2.
    """
    energy = amplitude ** 2 * envelope_sigma * math.sqrt(math.pi)
    ov = energy * overlap_ratio(tau, envelope_sigma)
    return (energy ** 2 + ov ** 2) / 4.0


@dataclass
class DipCurve:
    """Correlation (or counts) vs delay with a confidence band.

    ``normalization`` tags the convention: ``"classical"`` (C(inf) = 1),
    ``"quantum"`` (C(inf) = 1/2 for a balanced splitter) or ``"counts"``.
    """

    tau: np.ndarray
    c_mean: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    normalization: str = "classical"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.c_mean = np.asarray(self.c_mean, dtype=float)
        self.ci_lo = np.asarray(self.ci_lo, dtype=float)
        self.ci_hi = np.asarray(self.ci_hi, dtype=float)
        n = self.tau.size
        if any(a.shape != (n,) for a in (self.c_mean, self.ci_lo, self.ci_hi)):
            raise ShapeError("DipCurve columns must have equal length")
        if n > 1 and np.any(np.diff(self.tau) <= 0):
            raise DomainError("delays must be strictly increasing")
        slack = 1e-12 * np.maximum(1.0, np.abs(self.c_mean))
        if np.any(self.ci_lo > self.c_mean + slack) or np.any(self.c_mean > self.ci_hi + slack):
            raise DomainError("confidence band must bracket c_mean")

    def __len__(self):
        return self.tau.size

    def value_at(self, tau: float) -> float:
        i = int(np.argmin(np.abs(self.tau - tau)))
        return float(self.c_mean[i])

    def far_indices(self, count: int = 3) -> np.ndarray:
        """Indices of the ``count`` largest-|tau| points (ties broken by tau)."""
        order = sorted(range(len(self)), key=lambda i: (-abs(self.tau[i]), self.tau[i]))
        return np.array(order[:count])

    def far_reference(self, count: int = 3) -> float:
        return float(np.mean(self.c_mean[self.far_indices(count)]))

    def visibility(self) -> float:
        return dip_visibility(self.value_at(0.0), self.far_reference())

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for row in zip(self.tau, self.c_mean, self.ci_lo, self.ci_hi):
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path, normalization: str = "classical") -> "DipCurve":
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(h.strip() for h in header) != CSV_HEADER:
                raise ShapeError(f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}")
            rows = [[float(x) for x in r] for r in reader if r]
        cols = np.array(rows, dtype=float).reshape(-1, 4).T
        return cls(*cols, normalization=normalization)

    @classmethod
    def without_band(cls, tau: Sequence[float], values: Sequence[float],
                     normalization: str = "classical") -> "DipCurve":
        v = np.asarray(values, dtype=float)
        return cls(tau, v, v.copy(), v.copy(), normalization)
