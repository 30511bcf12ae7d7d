"""
High-resolution harmonic integration.

Pitch candidates run from 60.0 Hz to 419.9 Hz in 0.1 Hz steps (3600 rows).
Candidate frequencies are handled in integer units of 0.1 Hz (`f_c` in
[600, 4200)) and every bin location is rounded half-up in exact integer
arithmetic, so the matrices are reproducible bit for bit.
"""

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np
from scipy import sparse

from app.core.errors import NumericError, ShapeError

CANDIDATE_OFFSET = 600
CANDIDATE_COUNT = 3600
NYQUIST_REF_HZ = 8000
# Candidate units are 0.1 Hz, so the 8 kHz reference is 80000 units.
_NYQUIST_REF_UNITS = NYQUIST_REF_HZ * 10


def _round_half_up(numerator: int, denominator: int) -> int:
    return (2 * numerator + denominator) // (2 * denominator)


def candidate_hz(index):
    """Frequency in Hz of candidate row `index` (scalar or array)."""
    return (CANDIDATE_OFFSET + np.asarray(index)) / 10.0


def span_bins_for(n_bins: int, bin_hz: Optional[float]) -> int:
    """
    Number of bins that correspond to 8 kHz. Without a bin spacing this is the
    bin count itself (peak locations scale with F / 8000); with one, the span is
    calibrated to the analysis grid.
    """
    if bin_hz is None:
        return n_bins
    if bin_hz <= 0:
        raise NumericError(f"bin_hz must be positive, got {bin_hz}")
    return int(round(NYQUIST_REF_HZ / bin_hz))


# --- Domain types ---
@dataclass(frozen=True)
class IntegralMatrix:
    values: np.ndarray
    span_bins: int
    model: str = "cosine"

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.values))

    def candidate_hz(self, index):
        return candidate_hz(index)

    @cached_property
    def csr(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(self.values)

    @cached_property
    def row_offset(self) -> np.ndarray:
        """
        Per-row mean removed when scoring candidates. Cosine rows of low
        candidates are mostly positive and would otherwise sum broadband energy;
        pulse rows are scored as built.
        """
        if self.model == "cosine":
            return self.values.mean(axis=1)
        return np.zeros(self.values.shape[0])


@dataclass(frozen=True)
class SignificanceSpectrum:
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != CANDIDATE_COUNT:
            raise ShapeError(f"significance must be T x {CANDIDATE_COUNT}, got {self.values.shape}")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PitchTrack:
    candidate: np.ndarray  # int, -1 where the frame carries no pitch
    significance: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.candidate.size

    @property
    def voiced(self) -> np.ndarray:
        return self.candidate >= 0

    @property
    def pitch_hz(self) -> np.ndarray:
        return np.where(self.voiced, candidate_hz(np.maximum(self.candidate, 0)), 0.0)

    def masked(self, flags: np.ndarray) -> "PitchTrack":
        """Drop the pitch of every frame whose flag is 0."""
        flags = np.asarray(flags).astype(bool)
        if flags.shape != self.candidate.shape:
            raise ShapeError(f"{flags.size} flags for a {self.n_frames}-frame pitch track")
        return PitchTrack(np.where(flags, self.candidate, -1), self.significance)


@dataclass(frozen=True)
class HarmonicTemplate:
    values: np.ndarray


# --- Integral matrix (cosine peak-valley model) ---
@lru_cache(maxsize=None)
def _peak(k: int) -> float:
    return 1.0 / np.sqrt(k)


@lru_cache(maxsize=None)
def _valley_segment(length: int, k: int) -> np.ndarray:
    """Cosine-shaped ramp between the peaks of harmonics k-1 and k."""
    peak_last = 1.0 if k == 1 else _peak(k - 1)
    segment = np.cos(np.linspace(0, 2 * np.pi, length)) * np.linspace(peak_last, _peak(k), length)
    segment.flags.writeable = False
    return segment


def _fill_integral_row(row: np.ndarray, f_c: int, span_bins: int, centered: bool) -> None:
    n_bins = row.size
    loc_last, peak_last = 0, 1.0
    for k in range(1, _round_half_up(_NYQUIST_REF_UNITS, f_c) + 1):
        if centered:
            # floor(x) + 1: the two equal taps at loc-1 and loc then straddle x.
            loc = (f_c * k * span_bins) // _NYQUIST_REF_UNITS + 1
        else:
            loc = _round_half_up(f_c * k * span_bins, _NYQUIST_REF_UNITS)
        if loc >= n_bins:
            break
        peak = _peak(k)
        row[loc] = peak
        if loc - loc_last > 1:
            row[loc_last:loc] = _valley_segment(loc - loc_last, k)
        else:
            dip = (peak_last + peak) / 2
            row[loc] -= dip
            row[loc_last] -= dip
        loc_last, peak_last = loc, peak


def build_integral_matrix(n_bins: int, bin_hz: Optional[float] = None) -> IntegralMatrix:
    """
    Build the 3600 x F cosine harmonic integration matrix.

    Each row places 1/sqrt(k) at the k-th harmonic of its candidate and fills
    wider gaps with a cosine valley whose envelope ramps linearly between the
    neighbouring peaks; adjacent peaks (gap of at most one bin) are instead
    both lowered by their mean.

    Without `bin_hz` the peak of harmonic k sits at round(f_c * k * F / 8000).
    With `bin_hz` the placement is calibrated to the analysis grid: the span
    becomes round(8000 / bin_hz) bins and the peak moves to floor(x) + 1, which
    centres the valley segments' duplicated end taps on the true harmonic.
    """
    if n_bins < 2:
        raise ShapeError(f"integral matrix needs at least 2 bins, got {n_bins}")
    span = span_bins_for(n_bins, bin_hz)
    centered = bin_hz is not None
    values = np.zeros((CANDIDATE_COUNT, n_bins))
    for j in range(CANDIDATE_COUNT):
        _fill_integral_row(values[j], CANDIDATE_OFFSET + j, span, centered)
    logging.info(f"Built {CANDIDATE_COUNT}x{n_bins} integral matrix (span {span} bins per 8 kHz)")
    return IntegralMatrix(values, span, "cosine")


# --- Pulse model (peak minus half-harmonic) ---
def build_pulse_matrix(n_bins: int, bin_hz: Optional[float] = None) -> IntegralMatrix:
    """
    Square-wave integration: +1/sqrt(k) at every harmonic k*f_c and -1/sqrt(k)
    half a harmonic below it, so `significance` with this matrix evaluates the
    direct peak-minus-valley sum for every candidate at once.
    """
    if n_bins < 2:
        raise ShapeError(f"integral matrix needs at least 2 bins, got {n_bins}")
    span = span_bins_for(n_bins, bin_hz)
    values = np.zeros((CANDIDATE_COUNT, n_bins))
    rows, cols, weights = [], [], []
    for j in range(CANDIDATE_COUNT):
        f_c = CANDIDATE_OFFSET + j
        k = np.arange(1, _round_half_up(_NYQUIST_REF_UNITS, f_c) + 1)
        weight = 1.0 / np.sqrt(k)
        # Half-up rounding of k*f_c*span/80000 and of (k - 1/2)*f_c*span/80000.
        peaks = (2 * k * f_c * span + _NYQUIST_REF_UNITS) // (2 * _NYQUIST_REF_UNITS)
        valleys = ((2 * k - 1) * f_c * span + _NYQUIST_REF_UNITS) // (2 * _NYQUIST_REF_UNITS)
        for locations, sign in ((peaks, 1.0), (valleys, -1.0)):
            keep = locations < n_bins
            rows.append(np.full(np.count_nonzero(keep), j))
            cols.append(locations[keep])
            weights.append(sign * weight[keep])
    np.add.at(values, (np.concatenate(rows), np.concatenate(cols)), np.concatenate(weights))
    logging.info(f"Built {CANDIDATE_COUNT}x{n_bins} pulse matrix (span {span} bins per 8 kHz)")
    return IntegralMatrix(values, span, "pulse")


# --- Significance / pitch ---
def significance(coarse_mag: np.ndarray, matrix: IntegralMatrix, layout: str = "dense") -> SignificanceSpectrum:
    """
    Q = |S|^0.5 . (U - row means)^T, one row of candidate significances per frame.

    The row means are subtracted from the product rather than from U, so the
    stored matrix stays bit-identical to its construction.
    """
    coarse_mag = np.asarray(coarse_mag, dtype=np.float64)
    if coarse_mag.ndim != 2 or coarse_mag.shape[1] != matrix.n_bins:
        raise ShapeError(f"magnitude {coarse_mag.shape} does not match a {matrix.n_bins}-bin integral matrix")
    if np.any(coarse_mag < 0):
        raise NumericError("significance needs nonnegative magnitudes")
    compressed = np.sqrt(coarse_mag)
    if layout == "csr":
        values = np.asarray((matrix.csr @ compressed.T).T)
    else:
        values = compressed @ matrix.values.T
    values = values - compressed.sum(axis=1, keepdims=True) * matrix.row_offset[None, :]
    return SignificanceSpectrum(values)


def select_pitch(q: SignificanceSpectrum) -> PitchTrack:
    # argmax returns the first maximum: ties go to the lowest candidate.
    candidate = np.argmax(q.values, axis=1)
    peak = q.values[np.arange(q.n_frames), candidate]
    return PitchTrack(candidate.astype(np.int64), peak)


def harmonic_template(track: PitchTrack, n_bins: int, bin_hz: float,
                      mode: str = "binary", matrix: Optional[IntegralMatrix] = None) -> HarmonicTemplate:
    """
    Per-frame harmonic gate R_H.

    binary: 1 at round(k * pitch / bin_hz) for k = 1..round(8000 / pitch), 0 elsewhere.
    signed: the selected candidate's raw integral-matrix row.
    Frames without a pitch get a zero row in both modes.
    """
    values = np.zeros((track.n_frames, n_bins))
    voiced = np.flatnonzero(track.voiced)
    if mode == "signed":
        if matrix is None or matrix.n_bins != n_bins:
            raise ShapeError("signed templates need the integral matrix the pitch was selected with")
        values[voiced] = matrix.values[track.candidate[voiced]]
        return HarmonicTemplate(values)
    if mode != "binary":
        raise ValueError(f"unknown template mode '{mode}'")

    pitch_hz = track.pitch_hz
    for t in voiced:
        k = np.arange(1, int(np.floor(NYQUIST_REF_HZ / pitch_hz[t] + 0.5)) + 1)
        bins = np.floor(k * pitch_hz[t] / bin_hz + 0.5).astype(np.int64)
        values[t, bins[bins < n_bins]] = 1.0
    return HarmonicTemplate(values)
