"""
STFT analysis/synthesis and spectrum bookkeeping.

Every spectrogram is a T x F pair of float64 matrices (real, imag). Frames are
Hann-windowed, hop = window * (1 - overlap); the signal is reflection-padded by
half a window on the left and as much as needed on the right so the frames
cover every input sample. Synthesis is weighted overlap-add divided by the
summed squared window, which reconstructs exactly wherever that sum is nonzero.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from app.core.config import AnalysisConfig
from app.core.errors import InputFormatError, NumericError, ShapeError

WB_BINS = 257
HB_BINS = 512
FB_BINS = WB_BINS + HB_BINS


# --- Domain types ---
@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InputFormatError(f"audio must be mono (1-D), got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise InputFormatError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise NumericError("audio contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class ComplexSpectrogram:
    real: np.ndarray
    imag: np.ndarray
    frame_hop: int
    bin_hz: float
    n_samples: Optional[int] = None

    def __post_init__(self):
        real = np.asarray(self.real, dtype=np.float64)
        imag = np.asarray(self.imag, dtype=np.float64)
        if real.ndim != 2 or real.shape != imag.shape:
            raise ShapeError(f"real {real.shape} and imag {imag.shape} must be matching T x F matrices")
        if not (np.all(np.isfinite(real)) and np.all(np.isfinite(imag))):
            raise NumericError("spectrogram contains non-finite entries")
        object.__setattr__(self, "real", real)
        object.__setattr__(self, "imag", imag)

    @classmethod
    def from_complex(cls, values: np.ndarray, like: "ComplexSpectrogram") -> "ComplexSpectrogram":
        """Wrap a complex matrix, inheriting hop/bin metadata from `like`."""
        return cls(values.real, values.imag, like.frame_hop, like.bin_hz, like.n_samples)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.real.shape

    @property
    def n_frames(self) -> int:
        return self.real.shape[0]

    @property
    def n_bins(self) -> int:
        return self.real.shape[1]

    @property
    def values(self) -> np.ndarray:
        return self.real + 1j * self.imag

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.real, self.imag)


@dataclass(frozen=True)
class MagPhase:
    magnitude: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        if np.shape(self.magnitude) != np.shape(self.phase):
            raise ShapeError("magnitude and phase must have the same shape")
        if np.any(np.asarray(self.magnitude) < 0):
            raise NumericError("magnitude must be nonnegative")


# --- Windowing helpers ---
def analysis_window(cfg: AnalysisConfig) -> np.ndarray:
    return get_window("hann", cfg.win_length, fftbins=True).astype(np.float64)


def frame_count(n_samples: int, cfg: AnalysisConfig) -> int:
    """Frames needed so the padded signal covers all `n_samples` input samples."""
    pad = cfg.win_length // 2
    covered = pad + n_samples - cfg.win_length
    if covered <= 0:
        return 1
    return -(-covered // cfg.hop_length) + 1


# --- STFT / iSTFT ---
def stft(audio: AudioBuffer, cfg: AnalysisConfig) -> ComplexSpectrogram:
    if audio.samples.size == 0:
        raise InputFormatError("cannot analyse an empty audio buffer")
    if audio.sample_rate != cfg.sample_rate:
        raise InputFormatError(f"audio is {audio.sample_rate} Hz but the analysis expects {cfg.sample_rate} Hz")

    win, hop = cfg.win_length, cfg.hop_length
    n = audio.samples.size
    n_frames = frame_count(n, cfg)
    pad_left = win // 2
    pad_right = (n_frames - 1) * hop + win - pad_left - n
    mode = "reflect" if n > 1 else "constant"
    padded = np.pad(audio.samples, (pad_left, pad_right), mode=mode)

    frames = sliding_window_view(padded, win)[::hop][:n_frames]
    spectrum = np.fft.rfft(frames * analysis_window(cfg), n=cfg.fft_size, axis=1)
    logging.debug(f"STFT: {n} samples -> {n_frames} frames x {spectrum.shape[1]} bins")
    return ComplexSpectrogram(spectrum.real, spectrum.imag, hop, cfg.bin_hz, n)


def istft(spec: ComplexSpectrogram, cfg: AnalysisConfig) -> AudioBuffer:
    if spec.n_bins != cfg.n_bins:
        raise ShapeError(f"spectrogram has {spec.n_bins} bins, analysis expects {cfg.n_bins}")

    win, hop = cfg.win_length, cfg.hop_length
    window = analysis_window(cfg)
    frames = np.fft.irfft(spec.values, n=cfg.fft_size, axis=1)[:, :win] * window

    total = (spec.n_frames - 1) * hop + win
    signal = np.zeros(total)
    norm = np.zeros(total)
    squared = window ** 2
    for t in range(spec.n_frames):
        signal[t * hop:t * hop + win] += frames[t]
        norm[t * hop:t * hop + win] += squared
    covered = norm > np.finfo(np.float64).tiny
    signal[covered] /= norm[covered]
    signal[~covered] = 0.0

    pad_left = win // 2
    n_samples = spec.n_samples if spec.n_samples is not None else total - pad_left
    return AudioBuffer(signal[pad_left:pad_left + n_samples], cfg.sample_rate)


# --- Band handling ---
def split_bands(full: ComplexSpectrogram) -> Tuple[ComplexSpectrogram, ComplexSpectrogram]:
    """Split a 769-bin full-band spectrogram into WB (0-8 kHz, 257 bins) and HB (512 bins)."""
    if full.n_bins != FB_BINS:
        raise ShapeError(f"split_bands expects {FB_BINS} bins, got {full.n_bins}")
    wb = ComplexSpectrogram(full.real[:, :WB_BINS], full.imag[:, :WB_BINS], full.frame_hop, full.bin_hz, full.n_samples)
    hb = ComplexSpectrogram(full.real[:, WB_BINS:], full.imag[:, WB_BINS:], full.frame_hop, full.bin_hz, full.n_samples)
    return wb, hb


def merge_bands(wb: ComplexSpectrogram, hb: ComplexSpectrogram) -> ComplexSpectrogram:
    if wb.n_bins != WB_BINS or hb.n_bins != HB_BINS or wb.n_frames != hb.n_frames:
        raise ShapeError(f"merge_bands expects {WB_BINS}+{HB_BINS} bins with equal frames, got {wb.shape} and {hb.shape}")
    return ComplexSpectrogram(
        np.concatenate([wb.real, hb.real], axis=1),
        np.concatenate([wb.imag, hb.imag], axis=1),
        wb.frame_hop, wb.bin_hz, wb.n_samples,
    )


# --- Magnitude / phase ---
def mag_phase(spec: ComplexSpectrogram) -> MagPhase:
    # arctan2(0, 0) is 0, which fixes the phase of silent bins.
    return MagPhase(np.hypot(spec.real, spec.imag), np.arctan2(spec.imag, spec.real))


def polar(mp: MagPhase, like: Optional[ComplexSpectrogram] = None) -> ComplexSpectrogram:
    """Rebuild a spectrogram from magnitude and phase; metadata is taken from `like` when given."""
    real = mp.magnitude * np.cos(mp.phase)
    imag = mp.magnitude * np.sin(mp.phase)
    if like is None:
        return ComplexSpectrogram(real, imag, 0, 0.0)
    return ComplexSpectrogram(real, imag, like.frame_hop, like.bin_hz, like.n_samples)


def scale_magnitude(spec: ComplexSpectrogram, gain: np.ndarray) -> ComplexSpectrogram:
    """Multiply magnitudes by a nonnegative gain, leaving phases untouched."""
    return ComplexSpectrogram(spec.real * gain, spec.imag * gain, spec.frame_hop, spec.bin_hz, spec.n_samples)


def compress_power(spec: ComplexSpectrogram, exponent: float) -> ComplexSpectrogram:
    if not 0.0 < exponent <= 1.0:
        raise NumericError(f"compression exponent must lie in (0, 1], got {exponent}")
    if exponent == 1.0:
        return spec
    magnitude = spec.magnitude
    gain = np.zeros_like(magnitude)
    nonzero = magnitude > 0
    gain[nonzero] = magnitude[nonzero] ** (exponent - 1.0)
    return scale_magnitude(spec, gain)
