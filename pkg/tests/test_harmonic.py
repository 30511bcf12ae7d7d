import time
from fractions import Fraction

import numpy as np
import pytest

from app.core.config import AnalysisConfig
from app.core.errors import NumericError, ShapeError
from app.dsp.harmonic import (
    CANDIDATE_COUNT, PitchTrack, SignificanceSpectrum, build_integral_matrix, build_pulse_matrix,
    candidate_hz, harmonic_template, select_pitch, significance,
)
from app.dsp.spectral import AudioBuffer, stft
from tests.conftest import harmonic_comb, white_noise_at_snr

# --- Test Setup ---

WB = AnalysisConfig.wide_band()


def reference_integral_matrix(n_bins, span, centered):
    """
    Straight-line transcription of the cosine peak-valley construction, with
    exact rational arithmetic for every bin location.
    """
    U = np.zeros((3600, n_bins))
    half = Fraction(1, 2)
    for j in range(3600):
        f_c = Fraction(600 + j, 10)
        n_harmonics = int(Fraction(8000) / f_c + half)
        loc_last, peak_last = 0, 1.0
        for k in range(1, n_harmonics + 1):
            x = f_c * k * span / 8000
            loc = int(x) + 1 if centered else int(x + half)
            if loc >= n_bins:
                break
            peak = 1.0 / np.sqrt(k)
            U[j, loc] = peak
            if loc - loc_last > 1:
                n = loc - loc_last
                U[j, loc_last:loc] = np.cos(np.linspace(0, 2 * np.pi, n)) * np.linspace(peak_last, peak, n)
            else:
                U[j, loc] -= (peak_last + peak) / 2
                U[j, loc_last] -= (peak_last + peak) / 2
            loc_last, peak_last = loc, peak
    return U


def comb_pitch_track(signal, matrix):
    spec = stft(AudioBuffer(signal, 16000), WB)
    return select_pitch(significance(spec.magnitude, matrix))


@pytest.fixture(scope="module")
def literal_matrix():
    return build_integral_matrix(257)


@pytest.fixture(scope="module")
def calibrated_matrix():
    return build_integral_matrix(257, WB.bin_hz)


def harmonic_peak_count(f_c, n_bins):
    """Number of harmonics of candidate f_c (0.1 Hz units) whose peak lands inside the grid."""
    n_harmonics = int(Fraction(80000, f_c) + Fraction(1, 2))
    return sum(1 for k in range(1, n_harmonics + 1) if int(Fraction(f_c * k * n_bins, 80000) + Fraction(1, 2)) < n_bins)


# --- Integral matrix ---

@pytest.mark.parametrize("n_bins", [129, 257, 769])
def test_literal_matrix_matches_transcription(n_bins):
    """The uncalibrated matrix is bit-identical to the reference transcription."""
    matrix = build_integral_matrix(n_bins)
    assert matrix.values.shape == (CANDIDATE_COUNT, n_bins)
    assert matrix.span_bins == n_bins
    assert np.array_equal(matrix.values, reference_integral_matrix(n_bins, n_bins, centered=False))


@pytest.mark.parametrize("n_bins", [257, 769])
def test_calibrated_matrix_matches_transcription(n_bins):
    """With a 31.25 Hz bin spacing the span is 256 bins and peaks sit at floor(x) + 1."""
    matrix = build_integral_matrix(n_bins, 31.25)
    assert matrix.span_bins == 256
    assert np.array_equal(matrix.values, reference_integral_matrix(n_bins, 256, centered=True))


def test_matrix_build_is_fast_and_deterministic():
    start = time.perf_counter()
    first = build_integral_matrix(257)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    assert np.array_equal(first.values, build_integral_matrix(257).values)


def test_first_row_peak_and_harmonic_count():
    """Row 0 (60 Hz) has its first harmonic peak of 1 at bin 2; high candidates carry fewer harmonic peaks."""
    matrix = build_integral_matrix(257)
    assert matrix.values[0, 2] == 1.0
    assert harmonic_peak_count(600, 257) == 133
    assert harmonic_peak_count(4199, 257) == 19
    assert harmonic_peak_count(600, 257) > harmonic_peak_count(4199, 257)
    assert matrix.nnz == int(np.count_nonzero(matrix.values))


def test_candidate_grid():
    assert candidate_hz(0) == 60.0
    assert candidate_hz(CANDIDATE_COUNT - 1) == pytest.approx(419.9)


# --- Significance and pitch selection ---

def test_csr_layout_matches_dense(calibrated_matrix):
    rng = np.random.default_rng(0)
    mag = rng.uniform(0, 2, (12, 257))
    dense = significance(mag, calibrated_matrix, "dense").values
    sparse = significance(mag, calibrated_matrix, "csr").values
    np.testing.assert_allclose(sparse, dense, rtol=1e-12, atol=1e-9)


def test_significance_rejects_bad_input(calibrated_matrix):
    with pytest.raises(ShapeError):
        significance(np.ones((3, 129)), calibrated_matrix)
    with pytest.raises(NumericError):
        significance(-np.ones((3, 257)), calibrated_matrix)


def test_select_pitch_ties_go_to_lowest_candidate():
    q = SignificanceSpectrum(np.ones((2, CANDIDATE_COUNT)))
    track = select_pitch(q)
    assert track.candidate.tolist() == [0, 0]
    assert track.pitch_hz.tolist() == [60.0, 60.0]


@pytest.mark.parametrize("scale", ["literal_matrix", "calibrated_matrix"])
@pytest.mark.parametrize("f0", [100.0, 150.5, 233.3, 400.0])
def test_clean_comb_pitch_within_one_hz(f0, scale, request):
    """On clean harmonic combs >= 95% of frames land within +-1 Hz of f0, with either bin scale."""
    # Arrange
    matrix = request.getfixturevalue(scale)
    signal = harmonic_comb(f0, duration_s=3.0)

    # Act
    start = time.perf_counter()
    track = comb_pitch_track(signal, matrix)
    elapsed = time.perf_counter() - start

    # Assert
    assert np.mean(np.abs(track.pitch_hz - f0) <= 1.0) >= 0.95
    assert elapsed < 2.0


@pytest.mark.parametrize("scale", ["literal_matrix", "calibrated_matrix"])
@pytest.mark.parametrize("f0", [100.0, 150.5, 200.0, 233.3, 400.0])
def test_noisy_comb_pitch_within_two_hz(f0, scale, request):
    """At 10 dB SNR in white noise >= 80% of frames land within +-2 Hz."""
    clean = harmonic_comb(f0, duration_s=3.0)
    track = comb_pitch_track(clean + white_noise_at_snr(clean, 10.0), request.getfixturevalue(scale))
    assert np.mean(np.abs(track.pitch_hz - f0) <= 2.0) >= 0.80


def test_significance_is_half_homogeneous(literal_matrix):
    """Scaling magnitudes by c scales every significance by sqrt(c); silence scores zero."""
    rng = np.random.default_rng(3)
    mag = rng.uniform(0, 1, (6, 257))
    q = significance(mag, literal_matrix).values
    np.testing.assert_allclose(significance(4.0 * mag, literal_matrix).values, 2.0 * q, rtol=1e-12, atol=1e-12)
    assert not significance(np.zeros((3, 257)), literal_matrix).values.any()


def test_significance_keeps_the_stored_matrix_exact(literal_matrix):
    """Row centring happens in the product; the matrix itself is untouched."""
    rng = np.random.default_rng(4)
    mag = rng.uniform(0, 1, (2, 257))
    centred = literal_matrix.values - literal_matrix.values.mean(axis=1, keepdims=True)
    np.testing.assert_allclose(significance(mag, literal_matrix).values, np.sqrt(mag) @ centred.T, rtol=1e-10, atol=1e-10)
    np.testing.assert_array_equal(literal_matrix.values, reference_integral_matrix(257, 257, centered=False))


def test_select_pitch_ignores_monotone_rescaling():
    rng = np.random.default_rng(6)
    q = rng.standard_normal((8, CANDIDATE_COUNT))
    first = select_pitch(SignificanceSpectrum(q))
    rescaled = select_pitch(SignificanceSpectrum(3.0 * np.exp(q) + 1.0))
    assert rescaled.candidate.tolist() == first.candidate.tolist()


def test_pitch_track_masking():
    track = PitchTrack(np.array([10, 20, 30]), np.array([1.0, 2.0, 3.0]))
    masked = track.masked(np.array([1, 0, 1]))
    assert masked.candidate.tolist() == [10, -1, 30]
    assert masked.voiced.tolist() == [True, False, True]
    assert masked.pitch_hz[1] == 0.0
    with pytest.raises(ShapeError):
        track.masked(np.array([1, 0]))


# --- Pulse model ---

def test_pulse_matrix_matches_direct_sum():
    """Significance with the pulse matrix equals the direct peak-minus-half-harmonic sum."""
    # Arrange
    matrix = build_pulse_matrix(257, 31.25)
    rng = np.random.default_rng(5)
    mag = rng.uniform(0, 1, (1, 257))
    root = np.sqrt(mag[0])
    half = Fraction(1, 2)

    # Act
    q = significance(mag, matrix).values[0]

    # Assert
    for j in (0, 777, 1400, 2999, 3599):
        f_c = Fraction(600 + j, 10)
        expected = 0.0
        for k in range(1, int(Fraction(8000) / f_c + half) + 1):
            peak = int(f_c * k / Fraction(125, 4) + half)
            valley = int(f_c * (k - half) / Fraction(125, 4) + half)
            if peak < 257:
                expected += root[peak] / np.sqrt(k)
            if valley < 257:
                expected -= root[valley] / np.sqrt(k)
        assert q[j] == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_pulse_matrix_finds_comb_pitch():
    matrix = build_pulse_matrix(257, 31.25)
    track = comb_pitch_track(harmonic_comb(200.0, duration_s=1.0), matrix)
    assert np.median(track.pitch_hz) == pytest.approx(200.0, abs=5.0)


# --- Harmonic template ---

def test_binary_template_marks_harmonic_bins():
    """A 200 Hz frame marks the 40 bins floor(k * 6.4 + 0.5); an unvoiced frame stays empty."""
    track = PitchTrack(np.array([1400, -1]), np.zeros(2))
    template = harmonic_template(track, 257, 31.25).values
    expected = np.floor(np.arange(1, 41) * 200.0 / 31.25 + 0.5).astype(int)
    assert np.flatnonzero(template[0]).tolist() == sorted(set(expected.tolist()))
    assert not template[1].any()


def test_binary_template_at_100_hz():
    track = PitchTrack(np.array([400]), np.zeros(1))
    row = harmonic_template(track, 257, 31.25).values[0]
    assert np.flatnonzero(row)[:4].tolist() == [3, 6, 10, 13]


def test_binary_template_has_at_most_133_ones():
    track = PitchTrack(np.array([0]), np.zeros(1))
    row = harmonic_template(track, 257, 31.25).values[0]
    assert set(np.unique(row)) <= {0.0, 1.0}
    assert row.sum() <= 133


def test_signed_template_uses_matrix_rows(calibrated_matrix):
    track = PitchTrack(np.array([5, -1]), np.zeros(2))
    template = harmonic_template(track, 257, 31.25, mode="signed", matrix=calibrated_matrix).values
    assert np.array_equal(template[0], calibrated_matrix.values[5])
    assert not template[1].any()
    with pytest.raises(ShapeError):
        harmonic_template(track, 257, 31.25, mode="signed")
