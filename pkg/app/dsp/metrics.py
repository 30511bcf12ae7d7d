"""
Loss and quality metrics.

Scores (APC-SNR, SI-SNR) are in dB, higher is better, clamped to +-60 dB so a
perfect estimate stays finite. Losses (HB, focal) are mean-reduced over all
time-frequency points so values are comparable across utterance lengths.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from app.core.errors import InputFormatError, NumericError, ShapeError
from app.core.reports import LossReport
from app.dsp.spectral import ComplexSpectrogram

DB_CEILING = 60.0
LOG_FLOOR = 1e-8


# --- Loudness exponent ---
@dataclass(frozen=True)
class LoudnessExponent:
    gamma: np.ndarray

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=np.float64).reshape(-1)
        if gamma.size == 0 or np.any(~np.isfinite(gamma)) or np.any(gamma <= 0) or np.any(gamma > 1):
            raise NumericError("loudness exponents must all lie in (0, 1]")
        object.__setattr__(self, "gamma", gamma)

    @property
    def n_bins(self) -> int:
        return self.gamma.size

    @classmethod
    def constant(cls, value: float, n_bins: int) -> "LoudnessExponent":
        return cls(np.full(n_bins, float(value)))

    @classmethod
    def from_file(cls, path: Union[str, Path], n_bins: int) -> "LoudnessExponent":
        """Whitespace-separated per-bin exponents, one value per frequency bin."""
        path = Path(path)
        try:
            values = np.array(path.read_text(encoding="utf-8").split(), dtype=np.float64)
        except OSError as e:
            raise InputFormatError(f"Could not read loudness exponent file {path}: {e}") from e
        except ValueError as e:
            raise InputFormatError(f"{path} contains a non-numeric exponent: {e}") from e
        if values.size != n_bins:
            raise ShapeError(f"{path} holds {values.size} exponents, the spectrum has {n_bins} bins")
        logging.info(f"Loaded {n_bins} per-bin loudness exponents from {path}")
        return cls(values)

    @classmethod
    def from_setting(cls, setting: str, n_bins: int) -> "LoudnessExponent":
        """`setting` is either a number or the path of a per-bin file."""
        try:
            value = float(setting)
        except ValueError:
            return cls.from_file(setting, n_bins)
        return cls.constant(value, n_bins)


def loudness_compress(spec: ComplexSpectrogram, gamma: LoudnessExponent) -> ComplexSpectrogram:
    """|S| -> |S| (|S| + 1)^((gamma - 1) / 2), phase kept."""
    if gamma.n_bins != spec.n_bins:
        raise ShapeError(f"{gamma.n_bins} loudness exponents for a {spec.n_bins}-bin spectrogram")
    gain = (spec.magnitude + 1.0) ** ((gamma.gamma - 1.0) / 2.0)
    return ComplexSpectrogram(spec.real * gain, spec.imag * gain, spec.frame_hop, spec.bin_hz, spec.n_samples)


def flatten_complex(spec: ComplexSpectrogram) -> np.ndarray:
    """Real and imaginary parts interleaved into one real vector."""
    return np.stack([spec.real, spec.imag], axis=-1).ravel()


# --- Scale-invariant SNR ---
def _projection_snr(est: np.ndarray, ref: np.ndarray) -> float:
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise NumericError("SNR is undefined for an all-zero reference")
    target = (np.dot(est, ref) / ref_energy) * ref
    residual = est - target
    target_energy = float(np.dot(target, target))
    residual_energy = float(np.dot(residual, residual))
    if target_energy == 0.0:
        return -DB_CEILING
    if residual_energy == 0.0:
        return DB_CEILING
    return float(np.clip(10.0 * np.log10(target_energy / residual_energy), -DB_CEILING, DB_CEILING))


def si_snr(est, ref, zero_mean: bool = False) -> float:
    """
    Scale-invariant SNR of two real vectors via projection onto the reference.
    With zero_mean=True both vectors are centred first (the usual time-domain form).
    """
    est = np.asarray(est, dtype=np.float64).ravel()
    ref = np.asarray(ref, dtype=np.float64).ravel()
    if est.shape != ref.shape:
        raise ShapeError(f"SI-SNR inputs differ in length: {est.size} vs {ref.size}")
    if zero_mean:
        est = est - est.mean()
        ref = ref - ref.mean()
    return _projection_snr(est, ref)


def apc_snr(est: ComplexSpectrogram, ref: ComplexSpectrogram, gamma: LoudnessExponent) -> float:
    if est.shape != ref.shape:
        raise ShapeError(f"APC-SNR spectrograms differ in shape: {est.shape} vs {ref.shape}")
    est_c = flatten_complex(loudness_compress(est, gamma))
    ref_c = flatten_complex(loudness_compress(ref, gamma))
    return _projection_snr(est_c, ref_c)


# --- Losses ---
def hb_loss(est_mag, ref_mag, floor: float = LOG_FLOOR) -> float:
    """Mean squared magnitude error plus mean squared log-magnitude error."""
    est_mag = np.asarray(est_mag, dtype=np.float64)
    ref_mag = np.asarray(ref_mag, dtype=np.float64)
    if est_mag.shape != ref_mag.shape:
        raise ShapeError(f"HB loss inputs differ in shape: {est_mag.shape} vs {ref_mag.shape}")
    if np.any(est_mag < 0) or np.any(ref_mag < 0):
        raise NumericError("HB loss needs nonnegative magnitudes")
    if est_mag.size == 0:
        return 0.0
    linear = np.mean((est_mag - ref_mag) ** 2)
    log = np.mean((np.log(np.maximum(est_mag, floor)) - np.log(np.maximum(ref_mag, floor))) ** 2)
    return float(linear + log)


def focal_loss(p, alpha: float = 1.0, beta: float = 2.0) -> float:
    """Mean of -alpha (1 - p)^beta log p over points; p is the probability of the true class."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(~np.isfinite(p)) or np.any(p <= 0) or np.any(p > 1):
        raise NumericError("focal loss needs probabilities in (0, 1]; clamp them before calling")
    if p.size == 0:
        return 0.0
    return float(np.mean(-alpha * (1.0 - p) ** beta * np.log(p))) + 0.0


def detector_probabilities(estimated_labels, target_labels, floor: float = 1e-4) -> np.ndarray:
    """Probability a hard detector assigns to the true class: 1 where it agrees, `floor` where not."""
    estimated = np.asarray(estimated_labels)
    target = np.asarray(target_labels)
    if estimated.shape != target.shape:
        raise ShapeError(f"detector labels differ in shape: {estimated.shape} vs {target.shape}")
    return np.where(estimated == target, 1.0, floor)


def total_loss(l_hb: float, apc_snr_coarse_db: float, apc_snr_refined_db: float, l_focal: float) -> LossReport:
    """Combine the components; APC scores enter negated so a lower total is better."""
    l_apc_coarse = -apc_snr_coarse_db + 0.0
    l_apc_refined = -apc_snr_refined_db + 0.0
    return LossReport(
        l_hb=l_hb,
        l_apc_coarse=l_apc_coarse,
        l_apc_refined=l_apc_refined,
        l_focal=l_focal,
        total=l_hb + l_apc_coarse + l_apc_refined + l_focal,
        apc_snr_coarse_db=apc_snr_coarse_db,
        apc_snr_refined_db=apc_snr_refined_db,
    )
