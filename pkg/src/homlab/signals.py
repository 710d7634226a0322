"""Pulse synthesis, relative-phase ensembles and the mixer/oscilloscope chain.

Two field representations are carried side by side:

* ``analytic``: complex envelope-times-carrier ``A g(t - delay) exp(i(wt + phi))``.
  Intensities are ``|E|^2`` directly.
* ``real_voltage``: the AWG voltage ``A g(t - delay) sin(wt + phi)``.  This is
  what passes through mixers and gets low-passed by the scope.

The carrier phase is *not* delayed with the envelope, matching how the AWG
programs a delayed Gaussian on a free-running sine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import DomainError, GridError, SamplingError, ShapeError

TWO_PI = 2.0 * math.pi

Representation = Literal["analytic", "real_voltage"]

# minimum samples per carrier / LO period
SAMPLES_PER_PERIOD = 10
# envelope sigmas of clearance required on each side of every pulse
GRID_MARGIN_SIGMAS = 8.0


@dataclass(frozen=True)
class PulseSpec:
    amplitude: float
    envelope_sigma: float
    carrier_freq: float
    delay: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise DomainError("amplitude must be >= 0")
        if not self.envelope_sigma > 0:
            raise DomainError("envelope_sigma must be > 0")
        if not self.carrier_freq > 0:
            raise DomainError("carrier_freq must be > 0")

    @property
    def omega(self) -> float:
        return TWO_PI * self.carrier_freq


@dataclass(frozen=True)
class TimeGrid:
    """Closed uniform grid ``t_start, t_start + dt, ..., t_end``."""

    t_start: float
    t_end: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise GridError("dt must be > 0")
        if not self.t_end > self.t_start:
            raise GridError("t_end must exceed t_start")
        ratio = (self.t_end - self.t_start) / self.dt
        if abs(ratio - round(ratio)) > 1e-6 * max(1.0, ratio) or round(ratio) < 1:
            raise GridError(f"(t_end - t_start)/dt = {ratio!r} is not a positive integer")

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    @property
    def n_samples(self) -> int:
        return self.n_steps + 1

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_samples)

    def covers(self, spec: PulseSpec, margin: float = GRID_MARGIN_SIGMAS) -> bool:
        half = margin * spec.envelope_sigma
        # tolerate rounding of t_start/t_end at the dt scale
        slack = 1e-9 * self.dt
        return (self.t_start <= spec.delay - half + slack
                and self.t_end >= spec.delay + half - slack)

    @classmethod
    def around_pulses(cls, envelope_sigma: float, delays: Iterable[float],
                      dt: float | None = None,
                      margin: float = GRID_MARGIN_SIGMAS) -> "TimeGrid":
        """Symmetric grid holding a pulse at 0 and one at each delay.

        ``dt`` defaults to ``envelope_sigma / 200``.
        """
        if dt is None:
            dt = default_dt(envelope_sigma)
        reach = max([0.0] + [abs(float(d)) for d in delays]) + margin * envelope_sigma
        n_half = math.ceil(reach / dt - 1e-9)
        return cls(-n_half * dt, n_half * dt, dt)


def default_dt(envelope_sigma: float) -> float:
    return envelope_sigma / 200.0


@dataclass(frozen=True, eq=False)
class SampledSignal:
    samples: np.ndarray
    dt: float
    t_start: float = 0.0
    representation: Representation = "analytic"

    def __post_init__(self):
        if self.representation not in ("analytic", "real_voltage"):
            raise ValueError(f"unknown representation {self.representation!r}")
        dtype = complex if self.representation == "analytic" else float
        arr = np.asarray(self.samples)
        if self.representation == "real_voltage" and np.iscomplexobj(arr):
            raise ShapeError("real_voltage signal given complex samples")
        arr = np.array(arr, dtype=dtype)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if arr.ndim != 1 or arr.size < 2:
            raise ShapeError("a signal needs a 1-D array of at least 2 samples")
        if not self.dt > 0:
            raise GridError("dt must be > 0")

    @property
    def is_analytic(self) -> bool:
        return self.representation == "analytic"

    def __len__(self) -> int:
        return self.samples.size

    @property
    def t_end(self) -> float:
        return self.t_start + (self.samples.size - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.samples.size)

    def with_samples(self, samples: np.ndarray) -> "SampledSignal":
        return SampledSignal(samples, self.dt, self.t_start, self.representation)


def check_compatible(a: SampledSignal, b: SampledSignal) -> None:
    if a.representation != b.representation:
        raise ShapeError("signals differ in representation")
    if len(a) != len(b):
        raise ShapeError(f"signals differ in length ({len(a)} vs {len(b)})")
    if not math.isclose(a.dt, b.dt, rel_tol=1e-12) or \
            not math.isclose(a.t_start, b.t_start, rel_tol=1e-12, abs_tol=1e-12 * a.dt):
        raise ShapeError("signals are on different time grids")


def _check_resolves(dt: float, freq: float, what: str) -> None:
    if dt > 1.0 / (SAMPLES_PER_PERIOD * freq):
        raise SamplingError(
            f"dt={dt:g} s under-samples {what} at {freq:g} Hz "
            f"(need dt <= {1.0 / (SAMPLES_PER_PERIOD * freq):g} s)")


def synthesize_pulse(spec: PulseSpec, grid: TimeGrid,
                     representation: Representation = "analytic") -> SampledSignal:
    if not grid.covers(spec):
        raise GridError(
            f"grid [{grid.t_start:g}, {grid.t_end:g}] does not leave "
            f"{GRID_MARGIN_SIGMAS:g} sigma around pulse at {spec.delay:g}")
    if representation == "real_voltage":
        _check_resolves(grid.dt, spec.carrier_freq, "the carrier")
    t = grid.times()
    envelope = spec.amplitude * np.exp(-0.5 * ((t - spec.delay) / spec.envelope_sigma) ** 2)
    arg = spec.omega * t + spec.phase
    if representation == "analytic":
        samples = envelope * np.exp(1j * arg)
    elif representation == "real_voltage":
        samples = envelope * np.sin(arg)
    else:
        raise ValueError(f"unknown representation {representation!r}")
    return SampledSignal(samples, grid.dt, grid.t_start, representation)


# ---------------------------------------------------------------------------
# phase ensembles
# ---------------------------------------------------------------------------

class PhaseDistribution:
    """Law of the relative phase between the two input pulses.

    Build one with :meth:`discrete_uniform`, :meth:`weighted` or
    :meth:`continuous_uniform`.  ``jitter`` adds zero-mean Gaussian noise (rad)
    on top of each draw, to study splitter phase errors.
    """

    def __init__(self, kind: str, values=(), weights=(), jitter: float = 0.0):
        if kind not in ("discrete", "uniform"):
            raise ValueError(f"unknown phase distribution kind {kind!r}")
        if jitter < 0:
            raise DomainError("jitter must be >= 0")
        self.kind = kind
        self.jitter = float(jitter)
        if kind == "discrete":
            values = np.mod(np.asarray(values, dtype=float), TWO_PI)
            weights = np.asarray(weights, dtype=float)
            if values.size == 0 or values.shape != weights.shape:
                raise DomainError("discrete distribution needs matching, non-empty values and weights")
            if np.any(weights < 0):
                raise DomainError("weights must be non-negative")
            if abs(weights.sum() - 1.0) > 1e-12:
                raise DomainError(f"weights sum to {weights.sum()!r}, not 1")
            self.values = values
            self.weights = weights
        else:
            self.values = np.empty(0)
            self.weights = np.empty(0)

    @classmethod
    def discrete_uniform(cls, phases: Sequence[float], jitter: float = 0.0) -> "PhaseDistribution":
        phases = list(phases)
        if not phases:
            raise DomainError("empty phase set")
        return cls("discrete", phases, np.full(len(phases), 1.0 / len(phases)), jitter)

    @classmethod
    def weighted(cls, pairs: Sequence[tuple[float, float]], jitter: float = 0.0) -> "PhaseDistribution":
        values, weights = zip(*pairs) if pairs else ((), ())
        return cls("discrete", values, weights, jitter)

    @classmethod
    def continuous_uniform(cls) -> "PhaseDistribution":
        return cls("uniform")

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.is_discrete:
            raise DomainError("continuous distribution has no finite support")
        return self.values, self.weights

    def mean_cos(self) -> float:
        """Exact E[cos(phi)]."""
        if not self.is_discrete:
            return 0.0
        damp = math.exp(-0.5 * self.jitter ** 2)
        return float(np.dot(self.weights, np.cos(self.values))) * damp

    def mean_cos2(self) -> float:
        """Exact E[cos^2(phi)] = 1/2 + E[cos 2phi]/2."""
        if not self.is_discrete:
            return 0.5
        damp = math.exp(-2.0 * self.jitter ** 2)
        return 0.5 + 0.5 * float(np.dot(self.weights, np.cos(2.0 * self.values))) * damp

    def __repr__(self):
        if self.is_discrete:
            pts = ", ".join(f"{v:.6g}:{w:.6g}" for v, w in zip(self.values, self.weights))
            return f"PhaseDistribution(discrete {{{pts}}}, jitter={self.jitter:g})"
        return "PhaseDistribution(uniform [0, 2pi))"


def sample_phases(dist: PhaseDistribution, rng: np.random.Generator, size: int,
                  jitter_rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw ``size`` phases.

    Uses one uniform variate per draw, so the first k draws do not depend on
    ``size``.  Jitter comes from ``jitter_rng`` (defaults to ``rng``, drawn
    after the base phases).
    """
    u = rng.random(size)
    if dist.is_discrete:
        cdf = np.cumsum(dist.weights)
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
        phases = dist.values[idx]
    else:
        phases = TWO_PI * u
    if dist.jitter > 0:
        jr = rng if jitter_rng is None else jitter_rng
        phases = np.mod(phases + dist.jitter * jr.standard_normal(size), TWO_PI)
    return phases


def sample_phase(dist: PhaseDistribution, rng: np.random.Generator) -> float:
    return float(sample_phases(dist, rng, 1)[0])


# ---------------------------------------------------------------------------
# RF chain
# ---------------------------------------------------------------------------

def mix(signal: SampledSignal, lo_freq: float, lo_amp: float) -> SampledSignal:
    """Ideal multiplying mixer against ``lo_amp * sin(2 pi lo_freq t)``."""
    if signal.is_analytic:
        raise ShapeError("mix() needs a real_voltage signal")
    if not lo_freq > 0:
        raise DomainError("lo_freq must be > 0")
    if signal.dt >= 1.0 / (SAMPLES_PER_PERIOD * lo_freq):
        raise SamplingError(
            f"dt={signal.dt:g} s does not resolve the LO at {lo_freq:g} Hz")
    lo = lo_amp * np.sin(TWO_PI * lo_freq * signal.times())
    return signal.with_samples(signal.samples * lo)


def low_pass(signal: SampledSignal, cutoff: float) -> SampledSignal:
    """Brick-wall filter: zero every DFT bin with ``|f| > cutoff``."""
    if not cutoff > 0:
        raise DomainError("cutoff must be > 0")
    x = signal.samples
    n = x.size
    if signal.is_analytic:
        spec = np.fft.fft(x)
        spec[np.abs(np.fft.fftfreq(n, signal.dt)) > cutoff] = 0.0
        return signal.with_samples(np.fft.ifft(spec))
    spec = np.fft.rfft(x)
    spec[np.fft.rfftfreq(n, signal.dt) > cutoff] = 0.0
    return signal.with_samples(np.fft.irfft(spec, n))


def rotate_phase(signal: SampledSignal, angle: float) -> SampledSignal:
    """Advance the carrier phase by ``angle``.

    Analytic signals are multiplied by ``exp(i angle)``.  Real voltages go
    through their analytic signal, so ``sin(wt)`` becomes ``sin(wt + angle)``.
    """
    if angle == 0.0:
        return signal
    if signal.is_analytic:
        return signal.with_samples(signal.samples * np.exp(1j * angle))
    x = signal.samples
    n = x.size
    spec = np.fft.fft(x)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1:n // 2] = 2.0
    else:
        h[1:(n + 1) // 2] = 2.0
    z = np.fft.ifft(spec * h)
    return signal.with_samples(np.real(z * np.exp(1j * angle)))
