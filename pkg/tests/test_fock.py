import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homlab.errors import DomainError, ShapeError
from homlab.fock import (FilterTable, JsaModel, QuantumModelParams, TruncationWarning,
                         TwoModeFockState, beam_splitter_fock, block_arm_fock, coincidence_prob,
                         derived_visibility, eta_from_waveplate, g_overlap, hom_coincidence,
                         hom_coincidence_noisy, load_filter_csv, mzi_quantum_coincidence,
                         phase_shift_fock, sigma_nm_from_omega, sigma_omega_from_nm,
                         zeta_from_extinction)

R2 = 1 / math.sqrt(2)
SIG = sigma_omega_from_nm(0.581, 810.0)


def permanent(m):
    n = m.shape[0]
    return sum(np.prod([m[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n)))


def oracle_amplitude(n_in, n_out, t):
    """<n_out| U |n_in> from the permanent of the repeated splitter matrix."""
    u = np.array([[math.sqrt(t), math.sqrt(1 - t)], [math.sqrt(1 - t), -math.sqrt(t)]])
    if sum(n_in) != sum(n_out):
        return 0.0
    if sum(n_in) == 0:
        return 1.0
    rows = [0] * n_in[0] + [1] * n_in[1]
    cols = [0] * n_out[0] + [1] * n_out[1]
    norm = math.sqrt(math.prod(math.factorial(k) for k in (*n_in, *n_out)))
    return permanent(u[np.ix_(rows, cols)]) / norm


def random_state(rng, n_max=6):
    amps = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    n, m = np.indices(amps.shape)
    mask = n + m <= n_max
    amps[mask] = rng.normal(size=mask.sum()) + 1j * rng.normal(size=mask.sum())
    amps /= math.sqrt(np.sum(np.abs(amps) ** 2))
    return TwoModeFockState(amps)


def close(state, expected, tol=1e-12):
    got = state.as_dict(1e-15)
    keys = set(got) | set(expected)
    return all(abs(got.get(k, 0) - expected.get(k, 0)) <= tol for k in keys)


def test_one_one_bunches():
    out = beam_splitter_fock(TwoModeFockState.ket(1, 1))
    assert close(out, {(2, 0): R2, (0, 2): -R2})


def test_two_zero_spreads():
    out = beam_splitter_fock(TwoModeFockState.ket(2, 0))
    assert close(out, {(2, 0): 0.5, (0, 2): 0.5, (1, 1): R2})


@pytest.mark.parametrize("t", [0.0, 0.3, 0.5, 1.0])
def test_vacuum_is_invariant(t):
    assert close(beam_splitter_fock(TwoModeFockState.ket(0, 0), t), {(0, 0): 1.0})


@pytest.mark.parametrize("t", [0.5, 0.52, 0.2])
@pytest.mark.parametrize("n_in", [(1, 1), (2, 0), (2, 1), (3, 2), (0, 4), (3, 3)])
def test_matches_permanent_oracle(n_in, t):
    out = beam_splitter_fock(TwoModeFockState.ket(*n_in, n_max=6), t)
    total = sum(n_in)
    for p in range(total + 1):
        want = oracle_amplitude(n_in, (p, total - p), t)
        assert out.amp(p, total - p) == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_unitarity_and_number_conservation(seed):
    rng = np.random.default_rng(seed)
    s = random_state(rng)
    t = rng.uniform(0.0, 1.0)
    out = beam_splitter_fock(s, t)
    assert out.norm() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(out.photon_number_distribution(), s.photon_number_distribution(),
                               atol=1e-12)
    shifted = phase_shift_fock(s, 1 + seed % 2, rng.uniform(-7, 7))
    assert shifted.norm() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_balanced_splitters_compose_to_identity(seed):
    s = random_state(np.random.default_rng(seed))
    twice = beam_splitter_fock(beam_splitter_fock(s))
    np.testing.assert_allclose(twice.probabilities(), s.probabilities(), atol=1e-12)


def test_phase_shift_identity_and_two_photon_phase():
    s = beam_splitter_fock(TwoModeFockState.ket(1, 1))
    assert close(phase_shift_fock(s, 2, 0.0), s.as_dict())
    th = 0.37
    assert close(phase_shift_fock(s, 2, th), {(2, 0): R2, (0, 2): -R2 * np.exp(2j * th)})


def test_global_phase_leaves_probabilities():
    s = random_state(np.random.default_rng(3))
    both = phase_shift_fock(phase_shift_fock(s, 1, 0.8), 2, 0.8)
    np.testing.assert_allclose(both.probabilities(), s.probabilities(), atol=1e-15)


def test_blocking_examples():
    s = beam_splitter_fock(TwoModeFockState.ket(1, 1))
    blocked = block_arm_fock(s, 2)
    assert close(blocked, {(2, 0): R2, (0, 0): -R2})
    assert not blocked.normalized
    assert close(block_arm_fock(TwoModeFockState.ket(0, 0), 2), {(0, 0): 1.0})
    assert close(block_arm_fock(TwoModeFockState.ket(1, 1), 2), {(1, 0): 1.0})


def test_coincidence_examples():
    assert coincidence_prob(TwoModeFockState.ket(1, 1)) == 1.0
    s = beam_splitter_fock(TwoModeFockState.ket(1, 1))
    assert coincidence_prob(s) == pytest.approx(0.0, abs=1e-30)
    assert coincidence_prob(beam_splitter_fock(block_arm_fock(s, 2))) == pytest.approx(0.25, abs=1e-12)


@pytest.mark.parametrize("theta, want", [(0.0, 1.0), (math.pi, 0.0), (math.pi / 2, 0.5)])
def test_mzi_points(theta, want):
    assert mzi_quantum_coincidence(theta) == pytest.approx(want, abs=1e-12)


def test_mzi_matches_cos_squared():
    theta = np.linspace(0, 2 * math.pi, 100)
    got = np.array([mzi_quantum_coincidence(th) for th in theta])
    assert np.max(np.abs(got - np.cos(theta / 2) ** 2)) <= 1e-12


def test_state_validation():
    with pytest.raises(ShapeError):
        TwoModeFockState(np.zeros((3, 4)))
    with pytest.raises(DomainError):
        TwoModeFockState(np.zeros((3, 3)))
    with pytest.raises(DomainError):
        phase_shift_fock(TwoModeFockState.ket(1, 1), 3, 0.1)


# --- JSA and coincidence model -------------------------------------------

def test_overlap_limits():
    jsa = JsaModel(SIG)
    assert g_overlap(jsa, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert g_overlap(jsa, 1.0) == 0.0
    assert abs(g_overlap(jsa, 20 / SIG)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(x=st.floats(0, 6))
def test_gaussian_overlap_closed_form(x):
    dtau = x / SIG
    assert g_overlap(JsaModel(SIG), dtau) == pytest.approx(math.exp(-2 * x * x), abs=1e-12)


def test_overlap_is_even_and_vectorized():
    d = np.linspace(-2, 2, 9) / SIG
    g = g_overlap(JsaModel(SIG), d)
    np.testing.assert_allclose(g, g[::-1], atol=0)


def test_flat_filter_is_neutral():
    f_hz = 30 * SIG / (2 * math.pi)
    flat = FilterTable((-f_hz, f_hz), (1.0, 1.0))
    d = np.linspace(0, 2, 5) / SIG
    np.testing.assert_allclose(g_overlap(JsaModel(SIG, flat), d), g_overlap(JsaModel(SIG), d), atol=1e-12)


def test_narrow_filter_broadens_dip_and_warns():
    f_hz = 1.0 * SIG / (2 * math.pi)
    narrow = FilterTable((-f_hz, f_hz), (1.0, 1.0))
    with pytest.warns(TruncationWarning):
        g = g_overlap(JsaModel(SIG, narrow), 0.5 / SIG)
    assert g > math.exp(-0.5)


def test_unnormalized_filter_reduces_peak():
    f_hz = 30 * SIG / (2 * math.pi)
    half = FilterTable((-f_hz, f_hz), (math.sqrt(0.5), math.sqrt(0.5)))
    assert g_overlap(JsaModel(SIG, half, renormalize=False), 0.0) == pytest.approx(0.5, abs=1e-9)


def test_filter_csv(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("freq_offset_hz,transmission\n-1e12,0.5\n1e12,0.5\n")
    table = load_filter_csv(p)
    assert table(0.0) == pytest.approx(0.5)
    assert table(1e14) == 0.0
    p.write_text("f,t\n0,1\n1,1\n")
    with pytest.raises(ShapeError):
        load_filter_csv(p)


def test_balanced_dip_limits():
    jsa = JsaModel(SIG)
    assert hom_coincidence(0.0, 0.5, jsa) == pytest.approx(0.0, abs=1e-12)
    assert hom_coincidence(100 / SIG, 0.5, jsa) == pytest.approx(0.5, abs=1e-12)
    assert hom_coincidence(100 / SIG, 0.52, jsa) == pytest.approx(0.52 ** 2 + 0.48 ** 2, abs=1e-12)
    assert 0.52 ** 2 + 0.48 ** 2 == pytest.approx(0.5008, abs=1e-12)


def test_noisy_model_reduces_to_ideal():
    jsa = JsaModel(SIG)
    d = np.linspace(-3, 3, 15) / SIG
    np.testing.assert_allclose(hom_coincidence_noisy(d, QuantumModelParams(), jsa),
                               hom_coincidence(d, 0.5, jsa), atol=1e-15)


def test_offset_term_from_extinction_ratios():
    zeta = zeta_from_extinction(1000, 52)
    assert zeta == pytest.approx(0.0201, abs=1e-4)
    c0 = hom_coincidence_noisy(0.0, QuantumModelParams(0.5, 1.0, zeta), JsaModel(SIG))
    assert c0 == pytest.approx(zeta * 0.5, rel=1e-12)


def test_waveplate_indistinguishability():
    assert eta_from_waveplate(math.radians(44)) == pytest.approx(0.9988, abs=1e-4)


def test_derived_visibility_values():
    assert derived_visibility(QuantumModelParams()) == pytest.approx(1.0, abs=1e-15)
    # direct arithmetic oracle for the noisy closed form
    t, eta, zeta = 0.52, 0.9988, 0.0201
    same, cross = t ** 2 + (1 - t) ** 2, 2 * t * (1 - t)
    c0 = (1 - zeta) * (same - cross * eta) + zeta * cross
    cinf = (1 - zeta) * same + zeta * cross
    v = derived_visibility(QuantumModelParams(t, eta, zeta))
    assert v == pytest.approx(1 - c0 / cinf, abs=1e-15)
    assert v == pytest.approx(0.97566, abs=1e-5)


def test_bandwidth_conversion_round_trip():
    assert sigma_nm_from_omega(SIG) == pytest.approx(0.581, rel=1e-12)
    assert SIG == pytest.approx(1.668e12, rel=1e-3)


def test_params_validation():
    with pytest.raises(DomainError):
        QuantumModelParams(eta=1.2)
    with pytest.raises(DomainError):
        QuantumModelParams(scale_k=0)
