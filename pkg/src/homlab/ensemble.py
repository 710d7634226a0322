"""Monte-Carlo and exact phase ensembles for the classical pulse experiment.

For one delay, each ensemble member is a pulse pair with relative phase drawn
from a :class:`PhaseDistribution`; the pair is (optionally) up-converted,
split or sent through the MZI, (optionally) down-converted and scope-filtered,
and reduced to the two integrated output intensities.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .correlator import EnsembleRecord, cross_correlation, integrated_intensity
from .errors import DomainError
from .signals import (PhaseDistribution, PulseSpec, SampledSignal, TimeGrid, low_pass, mix,
                      sample_phases, synthesize_pulse)
from .splitter import IDEAL, MziConfig, SplitterSpec, mzi_classical, split
from .stats import (ConfidenceInterval, SampleSummary, bootstrap_ci, bootstrap_distribution,
                    min_samples)
from .streams import Stream

PILOT_SAMPLES = 200


@dataclass(frozen=True)
class RfChain:
    """Mixer up-conversion before the splitter and down-conversion after it.

    ``baseband_cutoff`` is the scope bandwidth; defaults to half the LO.
    """

    lo_freq: float = 16e3
    lo_amp: float = 1.0
    baseband_cutoff: float | None = None

    @property
    def cutoff(self) -> float:
        return self.baseband_cutoff if self.baseband_cutoff is not None else 0.5 * self.lo_freq

    @property
    def gain(self) -> float:
        """Field scale factor after up- and down-conversion: lo_amp^2 / 2."""
        return 0.5 * self.lo_amp ** 2


@dataclass(frozen=True)
class ClassicalSetup:
    """Everything about the classical experiment except the delay and phase law."""

    envelope_sigma: float = 1e-3
    carrier_freq: float = 1e3
    amplitude: float = 0.05
    amplitude_ratio: float = 1.0
    splitter: SplitterSpec = IDEAL
    mzi: MziConfig | None = None
    representation: str = "analytic"
    rf: RfChain | None = None
    dt: float | None = None
    window: TimeGrid | None = None
    intensity_cutoff: float | None = None

    def __post_init__(self):
        if self.rf is not None and self.representation != "real_voltage":
            raise DomainError("the RF chain needs the real_voltage representation")
        if self.amplitude_ratio < 0:
            raise DomainError("amplitude_ratio must be >= 0")

    def grid(self, delays: Sequence[float]) -> TimeGrid:
        return TimeGrid.around_pulses(self.envelope_sigma, delays, self.dt)

    @property
    def detector_cutoff(self) -> float | None:
        """Low-pass applied to squared real voltages (carrier-cycle averaging)."""
        if self.representation != "real_voltage":
            return None
        return self.intensity_cutoff if self.intensity_cutoff is not None else self.carrier_freq

    def with_rf(self, rf: RfChain | None) -> "ClassicalSetup":
        rep = "real_voltage" if rf is not None else self.representation
        return replace(self, rf=rf, representation=rep)


def input_pair(setup: ClassicalSetup, grid: TimeGrid, delay: float,
               phase: float) -> tuple[SampledSignal, SampledSignal]:
    p1 = PulseSpec(setup.amplitude, setup.envelope_sigma, setup.carrier_freq, 0.0, 0.0)
    p2 = PulseSpec(setup.amplitude * setup.amplitude_ratio, setup.envelope_sigma,
                   setup.carrier_freq, delay, phase)
    return (synthesize_pulse(p1, grid, setup.representation),
            synthesize_pulse(p2, grid, setup.representation))


def output_pair(setup: ClassicalSetup, grid: TimeGrid, delay: float,
                phase: float) -> tuple[SampledSignal, SampledSignal]:
    e1, e2 = input_pair(setup, grid, delay, phase)
    rf = setup.rf
    if rf is not None:
        e1 = mix(e1, rf.lo_freq, rf.lo_amp)
        e2 = mix(e2, rf.lo_freq, rf.lo_amp)
    if setup.mzi is not None:
        out_p, out_m = mzi_classical(e1, e2, setup.mzi)
    else:
        out_p, out_m = split(e1, e2, setup.splitter)
    if rf is not None:
        out_p = low_pass(mix(out_p, rf.lo_freq, rf.lo_amp), rf.cutoff)
        out_m = low_pass(mix(out_m, rf.lo_freq, rf.lo_amp), rf.cutoff)
    return out_p, out_m


def intensity_pair(setup: ClassicalSetup, grid: TimeGrid, delay: float,
                   phase: float) -> tuple[float, float]:
    out_p, out_m = output_pair(setup, grid, delay, phase)
    cut = setup.detector_cutoff
    return (integrated_intensity(out_p, setup.window, cut),
            integrated_intensity(out_m, setup.window, cut))


def simulate_delay(setup: ClassicalSetup, grid: TimeGrid, delay: float,
                   phases: np.ndarray, weights: np.ndarray | None = None) -> EnsembleRecord:
    """Integrated intensities for every phase in ``phases``.

    Identical phase values give bit-identical signals, so they are computed once.
    """
    cache: dict[float, tuple[float, float]] = {}
    i_p = np.empty(len(phases))
    i_m = np.empty(len(phases))
    for k, phi in enumerate(np.asarray(phases, dtype=float)):
        key = float(phi)
        if key not in cache:
            cache[key] = intensity_pair(setup, grid, delay, key)
        i_p[k], i_m[k] = cache[key]
    return EnsembleRecord(delay, i_p, i_m, weights)


def exact_ensemble(setup: ClassicalSetup, grid: TimeGrid, delay: float,
                   dist: PhaseDistribution) -> EnsembleRecord:
    """Noiseless ensemble: every support point of a discrete law with its weight."""
    if dist.jitter > 0:
        raise DomainError("exact enumeration is unavailable with phase jitter")
    values, weights = dist.support()
    return simulate_delay(setup, grid, delay, values, weights)


def draw_phases(dist: PhaseDistribution, stream: Stream, delay_index: int, n: int) -> np.ndarray:
    """Phases ``0..n-1`` of the (seed, delay_index) counter stream."""
    return sample_phases(dist, stream.child(delay_index, 0).generator(), n,
                         jitter_rng=stream.child(delay_index, 1).generator())


def auto_sample_count(record: EnsembleRecord, rel_halfwidth: float = 0.05,
                      z: float = 1.96, floor: int = PILOT_SAMPLES) -> int:
    """Sample size from a pilot ensemble: the larger of both ports' CLT minima, at least ``floor``."""
    n = floor
    for inten in (record.i_plus, record.i_minus):
        s = SampleSummary.of(inten)
        if s.mean > 0:
            n = max(n, min_samples(s, rel_halfwidth, z))
    return n


def _corr_statistic(resampled: np.ndarray) -> np.ndarray:
    p = resampled[..., 0]
    m = resampled[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        return (p * m).mean(axis=1) / (p.mean(axis=1) * m.mean(axis=1))


def correlation_ci(record: EnsembleRecord, n_resamples: int = 10_000, level: float = 0.95,
                   rng: Stream | int = 0) -> ConfidenceInterval:
    """Percentile-bootstrap interval for the cross correlation of a sampled ensemble."""
    if record.weights is not None:
        c = cross_correlation(record)
        return ConfidenceInterval(c, c, level, c, 0.0)
    return bootstrap_ci(record.pairs(), n_resamples, level, rng, _corr_statistic)


def visibility_ci(zero: EnsembleRecord, far: Sequence[EnsembleRecord],
                  n_resamples: int = 10_000, level: float = 0.95,
                  rng: Stream | int = 0) -> ConfidenceInterval:
    """Joint percentile bootstrap of V = 1 - C(0) / mean(C(far)).

    Each ensemble is resampled independently from its own substream.
    """
    stream = rng if isinstance(rng, Stream) else Stream(int(rng))
    records = [zero, *far]

    c0 = cross_correlation(zero)
    c_far = float(np.mean([cross_correlation(r) for r in far]))
    v = 1.0 - c0 / c_far
    draws = []
    for k, rec in enumerate(records):
        if rec.weights is not None:
            draws.append(np.full(n_resamples, cross_correlation(rec)))
            continue
        draws.append(bootstrap_distribution(rec.pairs(), n_resamples, stream.child(k),
                                            _corr_statistic))
    with np.errstate(divide="ignore", invalid="ignore"):
        v_star = 1.0 - draws[0] / np.mean(draws[1:], axis=0)
    deltas = v_star - v
    q_lo, q_hi = np.quantile(deltas, [(1 - level) / 2, (1 + level) / 2], method="linear")
    return ConfidenceInterval(v + float(min(q_lo, q_hi)), v + float(max(q_lo, q_hi)), level,
                              v, float(np.std(deltas, ddof=1)))


def worker_count(n_tasks: int) -> int:
    env = os.environ.get("HOMLAB_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise DomainError(f"HOMLAB_THREADS must be an integer, got {env!r}") from None
    return max(1, min(cap, n_tasks))


def map_ordered(fn: Callable, items: Sequence, workers: int | None = None) -> list:
    """Apply ``fn`` over ``items`` in a thread pool; results come back in input order."""
    workers = worker_count(len(items)) if workers is None else workers
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
