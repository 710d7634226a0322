"""Two-mode Fock-space engine and the two-photon HOM coincidence model.

Beam-splitter convention (real, symmetric, minus sign on the second mode's
``d`` component)::

    a+ -> sqrt(t) c+ + sqrt(1-t) d+
    b+ -> sqrt(1-t) c+ - sqrt(t) d+

The matrix is its own inverse, so two identical splitters compose to the
identity.  Under it ``|1,1>`` goes to ``(|2,0> - |0,2>)/sqrt(2)`` at t = 1/2.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from math import comb, factorial, sqrt
from pathlib import Path

import numpy as np

from .errors import DomainError, ShapeError

SPEED_OF_LIGHT = 299_792_458.0


class TruncationWarning(UserWarning):
    """Filter table does not reach far enough into the spectral tails."""


class TwoModeFockState:
    """Complex amplitudes over kets ``|n, m>`` with ``n + m <= n_max``.

    ``normalized`` is False for states that lost norm to an absorber; their
    probabilities are still measured against the original unit norm.
    """

    def __init__(self, amplitudes, normalized: bool = True):
        amps = np.array(amplitudes, dtype=complex)
        if amps.ndim != 2 or amps.shape[0] != amps.shape[1]:
            raise ShapeError("amplitudes must be a square (n_max+1) x (n_max+1) array")
        n_max = amps.shape[0] - 1
        if n_max < 2:
            raise ShapeError("n_max must be >= 2")
        n, m = np.indices(amps.shape)
        if np.any(amps[n + m > n_max] != 0):
            raise ShapeError(f"amplitude on a ket with more than {n_max} photons")
        self.amplitudes = amps
        self.normalized = normalized
        if normalized and abs(self.norm() - 1.0) > 1e-12:
            raise DomainError(f"state flagged normalized has norm {self.norm()!r}")

    @property
    def n_max(self) -> int:
        return self.amplitudes.shape[0] - 1

    @classmethod
    def ket(cls, n: int, m: int, n_max: int = 2) -> "TwoModeFockState":
        n_max = max(n_max, n + m, 2)
        amps = np.zeros((n_max + 1, n_max + 1), dtype=complex)
        amps[n, m] = 1.0
        return cls(amps)

    @classmethod
    def from_dict(cls, amps: dict, n_max: int | None = None,
                  normalized: bool = True) -> "TwoModeFockState":
        top = max([n + m for n, m in amps] + [2])
        n_max = top if n_max is None else n_max
        arr = np.zeros((n_max + 1, n_max + 1), dtype=complex)
        for (n, m), a in amps.items():
            arr[n, m] += a
        return cls(arr, normalized)

    def amp(self, n: int, m: int) -> complex:
        if n < 0 or m < 0 or n + m > self.n_max:
            return 0j
        return complex(self.amplitudes[n, m])

    def as_dict(self, tol: float = 0.0) -> dict:
        nz = np.argwhere(np.abs(self.amplitudes) > tol)
        return {(int(n), int(m)): complex(self.amplitudes[n, m]) for n, m in nz}

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def photon_number_distribution(self) -> np.ndarray:
        p = self.probabilities()
        n, m = np.indices(p.shape)
        return np.bincount((n + m).ravel(), weights=p.ravel(), minlength=self.n_max + 1)

    def __repr__(self):
        terms = " + ".join(f"({a:.4g})|{n},{m}>" for (n, m), a in self.as_dict(1e-15).items())
        return f"TwoModeFockState({terms or '0'})"


def beam_splitter_fock(state: TwoModeFockState, t_power: float = 0.5) -> TwoModeFockState:
    """Apply the splitter by expanding ``a+^n b+^m`` over the output modes."""
    if not 0.0 <= t_power <= 1.0:
        raise DomainError("t_power must lie in [0, 1]")
    ta, ra = sqrt(t_power), sqrt(1.0 - t_power)
    src = state.amplitudes
    out = np.zeros_like(src)
    for n, m in np.argwhere(src != 0):
        n, m = int(n), int(m)
        norm_in = factorial(n) * factorial(m)
        total = n + m
        for j in range(n + 1):
            cj = comb(n, j) * ta ** j * ra ** (n - j)
            for k in range(m + 1):
                ck = comb(m, k) * ra ** k * (-ta) ** (m - k)
                p = j + k
                q = total - p
                out[p, q] += src[n, m] * cj * ck * sqrt(factorial(p) * factorial(q) / norm_in)
    return TwoModeFockState(out, state.normalized)


def phase_shift_fock(state: TwoModeFockState, mode: int, theta: float) -> TwoModeFockState:
    """Multiply ``|n, m>`` by ``exp(i theta n)`` (mode 1) or ``exp(i theta m)`` (mode 2)."""
    if mode not in (1, 2):
        raise DomainError("mode must be 1 or 2")
    k = np.arange(state.n_max + 1)
    phase = np.exp(1j * theta * k)
    amps = state.amplitudes * (phase[:, None] if mode == 1 else phase[None, :])
    return TwoModeFockState(amps, state.normalized)


def block_arm_fock(state: TwoModeFockState, mode: int) -> TwoModeFockState:
    """Absorb every photon in ``mode``: ``|n, m> -> |n, 0>`` (mode 2), amplitudes kept."""
    if mode not in (1, 2):
        raise DomainError("mode must be 1 or 2")
    src = state.amplitudes
    out = np.zeros_like(src)
    if mode == 2:
        out[:, 0] = src.sum(axis=1)
    else:
        out[0, :] = src.sum(axis=0)
    return TwoModeFockState(out, normalized=False)


def coincidence_prob(state: TwoModeFockState) -> float:
    """Probability both threshold detectors click (n >= 1 and m >= 1)."""
    return float(np.sum(state.probabilities()[1:, 1:]))


def mzi_quantum_coincidence(theta: float, t_power: float = 0.5,
                            block: int | None = None) -> float:
    """|1,1> -> BS -> two-photon phase theta on arm 2 -> (block) -> BS -> P(coincidence).

    ``theta`` is the phase acquired by the two-photon ket ``|0,2>``, so the
    single-photon shifter is set to theta/2.  Unblocked, balanced: cos^2(theta/2).
    """
    state = beam_splitter_fock(TwoModeFockState.ket(1, 1), t_power)
    state = phase_shift_fock(state, 2, theta / 2.0)
    if block is not None:
        state = block_arm_fock(state, block)
    return coincidence_prob(beam_splitter_fock(state, t_power))


# ---------------------------------------------------------------------------
# joint spectral amplitude and the HOM profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FilterTable:
    """Tabulated transmission F against frequency offset from line centre (Hz)."""

    freq_offset_hz: tuple
    transmission: tuple

    def __post_init__(self):
        f = np.asarray(self.freq_offset_hz, dtype=float)
        t = np.asarray(self.transmission, dtype=float)
        if f.shape != t.shape or f.ndim != 1 or f.size < 2:
            raise ShapeError("filter table needs two equal-length columns of >= 2 rows")
        if np.any(np.diff(f) <= 0):
            raise DomainError("filter frequencies must be strictly increasing")
        if np.any(t < 0) or np.any(t > 1):
            raise DomainError("filter transmission must lie in [0, 1]")
        object.__setattr__(self, "freq_offset_hz", tuple(f))
        object.__setattr__(self, "transmission", tuple(t))

    def __call__(self, omega):
        """Transmission at angular offset ``omega``; zero outside the table."""
        f = np.asarray(omega, dtype=float) / (2.0 * math.pi)
        return np.interp(f, self.freq_offset_hz, self.transmission, left=0.0, right=0.0)

    def omega_span(self) -> tuple[float, float]:
        return 2 * math.pi * self.freq_offset_hz[0], 2 * math.pi * self.freq_offset_hz[-1]


def load_filter_csv(path) -> FilterTable:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header != ["freq_offset_hz", "transmission"]:
            raise ShapeError(f"expected header freq_offset_hz,transmission, got {','.join(header)}")
        rows = [(float(a), float(b)) for a, b in (r for r in reader if r)]
    f, t = zip(*rows)
    return FilterTable(f, t)


@dataclass(frozen=True)
class JsaModel:
    """Gaussian JSA, optionally shaped by a filter: f(w) = F(w) phi(w).

    ``sigma_omega`` is the standard deviation (rad/s) of the spectral
    intensity ``|phi(w)|^2`` over the half-difference frequency w, so the
    unfiltered overlap is ``exp(-2 sigma^2 dtau^2)``.  With ``renormalize`` the
    filtered f is rescaled to unit norm; otherwise it keeps phi's norm.
    """

    sigma_omega: float
    filter: FilterTable | None = None
    renormalize: bool = True
    span_sigmas: float = 10.0
    min_points: int = 4097

    def __post_init__(self):
        if not self.sigma_omega > 0:
            raise DomainError("sigma_omega must be > 0")
        if self.span_sigmas < 6.0:
            raise DomainError("quadrature must span at least +-6 sigma")
        if self.min_points < 2048:
            raise DomainError("use at least 2048 quadrature points")

    def with_sigma(self, sigma_omega: float) -> "JsaModel":
        return JsaModel(sigma_omega, self.filter, self.renormalize,
                        self.span_sigmas, self.min_points)


# quadrature points per oscillation period of cos(2 w dtau)
_PTS_PER_PERIOD = 16
_MAX_POINTS = 2 ** 20 + 1


def g_overlap(jsa: JsaModel, delta_tau):
    """Two-photon overlap integral for delay ``delta_tau`` (scalar or array).

    Evaluated in the frequency domain as
    ``int |f|^2 cos(2 w dtau) dw / int |f|^2 dw`` by the trapezoid rule on
    ``+-span_sigmas`` sigma, refined so each cosine period gets at least 16
    points.  Delays too long to resolve within 2**20 points return 0.
    """
    dtau = np.abs(np.atleast_1d(np.asarray(delta_tau, dtype=float)))
    s = jsa.sigma_omega
    half = jsa.span_sigmas * s
    if jsa.filter is not None:
        lo, hi = jsa.filter.omega_span()
        if lo > -6 * s or hi < 6 * s:
            warnings.warn("filter table does not cover +-6 sigma_omega; "
                          "transmission taken as zero outside it", TruncationWarning, stacklevel=2)

    need = np.ceil(_PTS_PER_PERIOD * 4.0 * half * dtau / (2.0 * math.pi)).astype(np.int64) + 1
    resolvable = need <= _MAX_POINTS
    out = np.zeros(dtau.shape)
    if np.any(resolvable):
        n = int(max(jsa.min_points, need[resolvable].max()))
        n += (n + 1) % 2  # odd count puts a node on w = 0
        w = np.linspace(-half, half, n)
        dw = w[1] - w[0]
        spectral = np.exp(-0.5 * (w / s) ** 2)
        if jsa.filter is not None:
            weights = spectral * jsa.filter(w) ** 2
        else:
            weights = spectral
        denom_w = weights if jsa.renormalize else spectral
        denom = np.trapezoid(denom_w, dx=dw)
        for i in np.flatnonzero(resolvable):
            out[i] = np.trapezoid(weights * np.cos(2.0 * w * dtau[i]), dx=dw) / denom
    if np.ndim(delta_tau) == 0:
        return float(out[0])
    return out


@dataclass(frozen=True)
class QuantumModelParams:
    t_power: float = 0.5
    eta: float = 1.0
    zeta: float = 0.0
    scale_k: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.t_power < 1.0:
            raise DomainError("t_power must lie in (0, 1)")
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError("eta must lie in [0, 1]")
        if not 0.0 <= self.zeta <= 1.0:
            raise DomainError("zeta must lie in [0, 1]")
        if not self.scale_k > 0:
            raise DomainError("scale_k must be > 0")

    @property
    def r_power(self) -> float:
        return 1.0 - self.t_power


def _splitter_terms(t_power: float) -> tuple[float, float]:
    """(|T|^4 + |R|^4, 2 |T|^2 |R|^2)."""
    r = 1.0 - t_power
    return t_power ** 2 + r ** 2, 2.0 * t_power * r


def hom_coincidence(delta_tau, t_power: float, jsa: JsaModel):
    same, cross = _splitter_terms(t_power)
    return same - cross * g_overlap(jsa, delta_tau)


def coincidence_model(overlap, params: QuantumModelParams):
    """K [(1 - zeta)(T^4 + R^4 - 2 T^2 R^2 eta g) + 2 zeta T^2 R^2] for given g."""
    same, cross = _splitter_terms(params.t_power)
    z = params.zeta
    return params.scale_k * ((1.0 - z) * (same - cross * params.eta * np.asarray(overlap))
                             + z * cross)


def hom_coincidence_noisy(delta_tau, params: QuantumModelParams, jsa: JsaModel):
    out = coincidence_model(g_overlap(jsa, delta_tau), params)
    return float(out) if np.ndim(out) == 0 else out


def derived_visibility(params: QuantumModelParams) -> float:
    """1 - C(0)/C(inf) with the overlap at 1 and 0 respectively."""
    c0 = float(coincidence_model(1.0, params))
    c_inf = float(coincidence_model(0.0, params))
    return 1.0 - c0 / c_inf


# ---------------------------------------------------------------------------
# instrument-to-parameter conversions
# ---------------------------------------------------------------------------

def zeta_from_extinction(t_h_over_t_v: float = 1000.0, r_v_over_r_h: float = 52.0) -> float:
    """zeta = T_H T_V + R_H R_V for a lossless PBS with the given extinction ratios."""
    a, b = t_h_over_t_v, r_v_over_r_h
    t_h = (1.0 - 1.0 / b) / (1.0 - 1.0 / (a * b))
    t_v = t_h / a
    r_h, r_v = 1.0 - t_h, 1.0 - t_v
    return t_h * t_v + r_h * r_v


def eta_from_waveplate(angle_rad: float) -> float:
    """Indistinguishability kept by a half-wave plate set to ``angle_rad``: sin^2(2 angle)."""
    return math.sin(2.0 * angle_rad) ** 2


def sigma_omega_from_nm(sigma_nm: float, center_nm: float = 810.0) -> float:
    """Wavelength spread to angular-frequency spread, ``2 pi c dlambda / lambda^2``."""
    lam = center_nm * 1e-9
    return 2.0 * math.pi * SPEED_OF_LIGHT * sigma_nm * 1e-9 / lam ** 2


def sigma_nm_from_omega(sigma_omega: float, center_nm: float = 810.0) -> float:
    lam = center_nm * 1e-9
    return sigma_omega * lam ** 2 / (2.0 * math.pi * SPEED_OF_LIGHT) * 1e9
