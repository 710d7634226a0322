import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from homlab.correlator import (DipCurve, EnsembleRecord, analytic_classical_dip,
                               analytic_visibility, blocked_arm_raw_correlation,
                               cross_correlation, dip_visibility, integrated_intensity,
                               mismatch_factor, raw_cross_correlation)
from homlab.errors import (DomainError, NormalizationError, PreconditionError, ShapeError)
from homlab.signals import PhaseDistribution, PulseSpec, SampledSignal, TimeGrid, synthesize_pulse

SIGMA = 1e-3
PI = math.pi
ZERO_PI = PhaseDistribution.discrete_uniform([0, PI])
QUARTERS = PhaseDistribution.discrete_uniform([0, PI / 2, PI, 3 * PI / 2])


def test_zero_signal_has_zero_intensity():
    assert integrated_intensity(SampledSignal(np.zeros(100), 1e-3)) == 0.0


def test_gaussian_energy_matches_closed_form():
    g = TimeGrid(-10e-3, 10e-3, SIGMA / 200)
    s = synthesize_pulse(PulseSpec(0.05, SIGMA, 1e3), g)
    assert integrated_intensity(s) == pytest.approx(0.05 ** 2 * SIGMA * math.sqrt(PI), rel=1e-3)


def test_half_window_holds_half_the_energy():
    g = TimeGrid(-10e-3, 10e-3, SIGMA / 200)
    s = synthesize_pulse(PulseSpec(0.05, SIGMA, 1e3), g)
    half = integrated_intensity(s, TimeGrid(0.0, 10e-3, SIGMA / 200))
    assert half / integrated_intensity(s) == pytest.approx(0.5, rel=1e-3)


def test_window_outside_signal_rejected():
    s = SampledSignal(np.ones(11), 0.1)
    with pytest.raises(DomainError):
        integrated_intensity(s, TimeGrid(0.0, 2.0, 0.1))


def test_real_voltage_intensity_is_half_squared_envelope():
    g = TimeGrid(-10e-3, 10e-3, 5e-6)
    s = synthesize_pulse(PulseSpec(0.05, SIGMA, 1e3), g, "real_voltage")
    want = 0.5 * 0.05 ** 2 * SIGMA * math.sqrt(PI)
    assert integrated_intensity(s, cutoff=1e3) == pytest.approx(want, rel=1e-6)


def test_constant_pairs_correlate_to_one():
    rec = EnsembleRecord(0.0, np.full(10, 2.0), np.full(10, 2.0))
    assert cross_correlation(rec) == pytest.approx(1.0, abs=1e-15)


def test_alternating_pairs_correlate_to_zero():
    rec = EnsembleRecord(0.0, [1.0, 0.0] * 5, [0.0, 1.0] * 5)
    assert cross_correlation(rec) == 0.0


def test_correlation_needs_two_samples():
    with pytest.raises(PreconditionError):
        cross_correlation(EnsembleRecord(0.0, [1.0], [1.0]))


def test_dark_port_cannot_be_normalized():
    with pytest.raises(NormalizationError):
        cross_correlation(EnsembleRecord(0.0, [1.0, 2.0], [0.0, 0.0]))


def test_record_validation():
    with pytest.raises(ShapeError):
        EnsembleRecord(0.0, [1.0, 2.0], [1.0])
    with pytest.raises(DomainError):
        EnsembleRecord(0.0, [-1.0, 2.0], [1.0, 1.0])


@given(scale=st.floats(1e-6, 1e6))
def test_correlation_is_scale_free(scale):
    rng = np.random.default_rng(0)
    p, m = rng.random(50), rng.random(50)
    base = cross_correlation(EnsembleRecord(0.0, p, m))
    assert cross_correlation(EnsembleRecord(0.0, p * scale, m * scale)) == pytest.approx(base, rel=1e-12)


def test_weighted_record_uses_weights():
    rec = EnsembleRecord(0.0, [1.0, 3.0], [1.0, 3.0], weights=[0.75, 0.25])
    assert raw_cross_correlation(rec) == pytest.approx(0.75 + 0.25 * 9)


@pytest.mark.parametrize("c0, cfar, want", [(0.0, 1.0, 1.0), (0.5, 1.0, 0.5),
                                             (0.0394, 1.0, 0.9606)])
def test_dip_visibility(c0, cfar, want):
    assert dip_visibility(c0, cfar) == pytest.approx(want, abs=1e-12)


def test_dip_visibility_needs_positive_reference():
    with pytest.raises(NormalizationError):
        dip_visibility(0.1, 0.0)


@pytest.mark.parametrize("dist, want", [
    (ZERO_PI, 1.0),
    (PhaseDistribution.discrete_uniform([PI / 2, 3 * PI / 2]), 0.0),
    (QUARTERS, 0.5),
    (PhaseDistribution.continuous_uniform(), 0.5),
])
def test_analytic_visibility_table(dist, want):
    assert analytic_visibility(dist) == pytest.approx(want, abs=1e-12)


def test_analytic_visibility_rejects_second_order_interference():
    with pytest.raises(PreconditionError):
        analytic_visibility(PhaseDistribution.discrete_uniform([0.0]))


def test_closed_form_dip_points():
    assert analytic_classical_dip(0.0, SIGMA, ZERO_PI) == pytest.approx(0.0, abs=1e-15)
    assert analytic_classical_dip(1.0, SIGMA, ZERO_PI) == pytest.approx(1.0)
    assert analytic_classical_dip(SIGMA, SIGMA, ZERO_PI) == pytest.approx(1 - math.exp(-0.5), abs=1e-12)


def test_closed_form_tau_sigma_point_against_quadrature():
    # oracle: direct overlap integral of two unit Gaussians one sigma apart
    t = np.linspace(-20 * SIGMA, 20 * SIGMA, 400_001)
    g0 = np.exp(-t ** 2 / (2 * SIGMA ** 2))
    g1 = np.exp(-(t - SIGMA) ** 2 / (2 * SIGMA ** 2))
    ratio = np.trapezoid(g0 * g1, t) / np.trapezoid(g0 * g0, t)
    assert analytic_classical_dip(SIGMA, SIGMA, ZERO_PI) == pytest.approx(1 - ratio ** 2, abs=1e-9)


@pytest.mark.parametrize("dist", [ZERO_PI, QUARTERS, PhaseDistribution.continuous_uniform()])
def test_visibility_of_closed_form_curve(dist):
    c0 = analytic_classical_dip(0.0, SIGMA, dist)
    cfar = analytic_classical_dip(1.0, SIGMA, dist)
    assert dip_visibility(c0, cfar) == pytest.approx(analytic_visibility(dist), abs=1e-12)


def test_mismatch_factor_symmetry():
    assert mismatch_factor(1.0) == 1.0
    for eps in (0.2, 0.5, 0.9, 1.7):
        assert mismatch_factor(eps) == pytest.approx(mismatch_factor(1 / eps), rel=1e-12)


def test_blocked_arm_closed_form():
    energy = 0.05 ** 2 * SIGMA * math.sqrt(PI)
    assert blocked_arm_raw_correlation(0.0, SIGMA, 0.05) == pytest.approx(energy ** 2 / 2)
    assert blocked_arm_raw_correlation(1.0, SIGMA, 0.05) == pytest.approx(energy ** 2 / 4)


# --- DipCurve -------------------------------------------------------------

def test_far_reference_uses_three_largest_delays():
    tau = np.arange(-3, 4) * 1.0
    c = np.array([10.0, 1, 1, 0, 1, 1, 20.0])
    curve = DipCurve.without_band(tau, c)
    assert sorted(curve.far_indices()) == [0, 1, 6]
    assert curve.far_reference() == pytest.approx((10 + 1 + 20) / 3)


def test_curve_requires_increasing_delays():
    with pytest.raises(DomainError):
        DipCurve.without_band([0.0, 0.0, 1.0], [1, 1, 1])


def test_band_must_bracket_mean():
    with pytest.raises(DomainError):
        DipCurve([0.0, 1.0], [1.0, 1.0], [0.5, 1.1], [1.5, 1.5])


def test_csv_round_trip(tmp_path):
    tau = np.linspace(-7e-3, 7e-3, 15)
    c = analytic_classical_dip(tau, SIGMA, ZERO_PI)
    curve = DipCurve(tau, c, c - 0.01, c + 0.01)
    curve.to_csv(tmp_path / "c.csv")
    back = DipCurve.from_csv(tmp_path / "c.csv")
    for a, b in zip((curve.tau, curve.c_mean, curve.ci_lo, curve.ci_hi),
                    (back.tau, back.c_mean, back.ci_lo, back.ci_hi)):
        assert np.array_equal(a, b)
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "tau_s,c_mean,ci_lo,ci_hi"


def test_csv_header_checked(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c,d\n0,1,1,1\n")
    with pytest.raises(ShapeError):
        DipCurve.from_csv(p)
