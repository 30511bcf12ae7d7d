"""
End-to-end dataflow shared by the CLI and the HTTP service.

    noisy audio -> STFT -> (FB: split into WB / HB)
      HB: magnitude mask
      WB: complex mask -> coarse -> significance -> pitch -> VRD
          gate = VRD * energy labels * harmonic template -> causal smoothing
          -> gated compensation -> refined
    -> (FB: merge) -> iSTFT
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional

import numpy as np

from app.core.config import PipelineConfig
from app.core.errors import InputFormatError
from app.core.reports import LossReport
from app.dsp import gating, harmonic, masking, metrics, spectral
from app.dsp.gating import EnergyLabels, GateMatrix, VrdState
from app.dsp.harmonic import IntegralMatrix, PitchTrack, SignificanceSpectrum
from app.dsp.providers import MaskProvider
from app.dsp.spectral import AudioBuffer, ComplexSpectrogram


# --- Stage timing ---
class StageTimer:
    def __init__(self):
        self.timings: Dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start


# --- Results ---
@dataclass
class AnalysisResult:
    spectrum: ComplexSpectrogram
    significance: SignificanceSpectrum
    track: PitchTrack
    vrd_flags: np.ndarray
    energy_labels: EnergyLabels
    gate: GateMatrix
    vrd_state: VrdState
    timings: Dict[str, float] = field(default_factory=dict)


@dataclass
class EnhanceResult:
    audio: AudioBuffer
    coarse: ComplexSpectrogram
    refined: ComplexSpectrogram
    gate_smoothed: np.ndarray
    track: PitchTrack
    vrd_state: VrdState
    report: Optional[LossReport] = None
    noisy_apc_snr_db: Optional[float] = None
    timings: Dict[str, float] = field(default_factory=dict)


# --- Integral matrix selection ---
def wide_band_bins(config: PipelineConfig) -> int:
    return spectral.WB_BINS if config.band_mode == "fb" else config.analysis.n_bins


@lru_cache(maxsize=8)
def _cached_matrix(model: str, n_bins: int, bin_hz: Optional[float]) -> IntegralMatrix:
    if model == "pulse":
        return harmonic.build_pulse_matrix(n_bins, bin_hz)
    return harmonic.build_integral_matrix(n_bins, bin_hz)


def integral_matrix_for(config: PipelineConfig) -> IntegralMatrix:
    """The configured integral matrix, built once per (model, bins, scale) and reused."""
    bin_hz = config.analysis.bin_hz if config.bin_scale == "calibrated" else None
    return _cached_matrix(config.harmonic_model, wide_band_bins(config), bin_hz)


def _bands(spec: ComplexSpectrogram, config: PipelineConfig):
    if config.band_mode == "fb":
        return spectral.split_bands(spec)
    return spec, None


def _gate_factor(template: harmonic.HarmonicTemplate) -> np.ndarray:
    # Signed templates carry negative valleys; only their positive part can gate.
    return np.clip(template.values, 0.0, 1.0)


def _harmonic_gate(magnitude: np.ndarray, energy: EnergyLabels, config: PipelineConfig,
                   matrix: IntegralMatrix, state: VrdState, bin_hz: float, timer: StageTimer):
    with timer.stage("significance"):
        q = harmonic.significance(magnitude, matrix, config.matrix_layout)
    with timer.stage("pitch"):
        track = harmonic.select_pitch(q)
    with timer.stage("vrd"):
        flags, new_state = gating.vrd(q, state)
        track = track.masked(flags)
    with timer.stage("gate"):
        template = harmonic.harmonic_template(track, magnitude.shape[1], bin_hz, config.template_mode, matrix)
        gate = gating.compose_gate(flags, energy, _gate_factor(template))
    return q, track, flags, new_state, gate


def _check_rate(audio: AudioBuffer, config: PipelineConfig, label: str) -> None:
    if audio.sample_rate != config.analysis.sample_rate:
        raise InputFormatError(
            f"{label} is {audio.sample_rate} Hz but band mode '{config.band_mode}' expects {config.analysis.sample_rate} Hz"
        )


def _check_pair(first: AudioBuffer, second: AudioBuffer, names=("noisy", "clean")) -> None:
    if first.sample_rate != second.sample_rate:
        raise InputFormatError(f"{names[0]} is {first.sample_rate} Hz, {names[1]} is {second.sample_rate} Hz")
    if first.samples.size != second.samples.size:
        raise InputFormatError(
            f"{names[0]} has {first.samples.size} samples, {names[1]} has {second.samples.size}; inputs must be aligned"
        )


# --- Analyze ---
def analyze(audio: AudioBuffer, config: PipelineConfig, vrd_state: Optional[VrdState] = None,
            matrix: Optional[IntegralMatrix] = None) -> AnalysisResult:
    """
    Pitch track and harmonic gate of a single recording. Without a clean
    reference the energy labels come from the recording's own magnitude.
    """
    timer = StageTimer()
    _check_rate(audio, config, "input")
    state = vrd_state or VrdState(alpha=config.vrd_alpha)
    with timer.stage("matrix"):
        matrix = matrix or integral_matrix_for(config)
    with timer.stage("stft"):
        wb, _ = _bands(spectral.stft(audio, config.analysis), config)
    magnitude = wb.magnitude
    with timer.stage("energy"):
        energy = gating.sed_labels(magnitude, config.log_floor)
    q, track, flags, new_state, gate = _harmonic_gate(magnitude, energy, config, matrix, state, wb.bin_hz, timer)

    logging.info(
        f"Analysed {audio.duration_s:.2f} s: {int(flags.sum())}/{flags.size} voiced frames, gate density {gate.density:.4f}"
    )
    if not flags.any():
        logging.warning("No voiced frames detected; the harmonic gate is empty.")
    return AnalysisResult(wb, q, track, flags, energy, gate, new_state, timer.timings)


# --- Enhance ---
def enhance(noisy: AudioBuffer, clean: Optional[AudioBuffer], config: PipelineConfig, provider: MaskProvider,
            vrd_state: Optional[VrdState] = None, matrix: Optional[IntegralMatrix] = None,
            gate_enabled: bool = True) -> EnhanceResult:
    """
    Run the full mask pipeline. With a clean reference the result carries a
    LossReport and the noisy input's own APC-SNR for comparison. `gate_enabled`
    False forces the compensation gate to zero.
    """
    timer = StageTimer()
    _check_rate(noisy, config, "noisy input")
    if clean is not None:
        _check_pair(noisy, clean)
    state = vrd_state or VrdState(alpha=config.vrd_alpha)
    with timer.stage("matrix"):
        matrix = matrix or integral_matrix_for(config)

    with timer.stage("stft"):
        noisy_wb, noisy_hb = _bands(spectral.stft(noisy, config.analysis), config)
        clean_wb, clean_hb = _bands(spectral.stft(clean, config.analysis), config) if clean is not None else (None, None)

    enhanced_hb = None
    if noisy_hb is not None:
        with timer.stage("hb_mask"):
            enhanced_hb = masking.apply_mask_magnitude(noisy_hb, provider.magnitude_mask(noisy_hb, clean_hb))

    with timer.stage("coarse"):
        coarse = masking.apply_mask_complex(noisy_wb, provider.complex_mask(noisy_wb, clean_wb))
    coarse_mag = coarse.magnitude

    with timer.stage("energy"):
        if clean_wb is not None:
            energy = gating.oracle_sed(clean_wb.magnitude, config.log_floor)
        else:
            energy = gating.sed_labels(coarse_mag, config.log_floor)
    _, track, _, new_state, gate = _harmonic_gate(coarse_mag, energy, config, matrix, state, coarse.bin_hz, timer)

    with timer.stage("compensation"):
        smoothed = gating.smooth_gate(gate, config.kernel) if gate_enabled else np.zeros(coarse.shape)
        compensation = provider.compensation_mask(coarse, clean_wb, smoothed)
        refined = masking.apply_gated_compensation(coarse, smoothed, compensation)

    with timer.stage("istft"):
        merged = spectral.merge_bands(refined, enhanced_hb) if enhanced_hb is not None else refined
        audio = spectral.istft(merged, config.analysis)

    report, noisy_score = None, None
    if clean_wb is not None:
        with timer.stage("metrics"):
            gamma = metrics.LoudnessExponent.from_setting(config.gamma, clean_wb.n_bins)
            noisy_score = metrics.apc_snr(noisy_wb, clean_wb, gamma)
            report = _loss_report(coarse, refined, clean_wb, enhanced_hb, clean_hb, energy, gamma, config)
        logging.info(
            f"APC-SNR noisy {noisy_score:.2f} dB -> coarse {report.apc_snr_coarse_db:.2f} dB "
            f"-> refined {report.apc_snr_refined_db:.2f} dB"
        )
    return EnhanceResult(audio, coarse, refined, smoothed, track, new_state, report, noisy_score, timer.timings)


def _loss_report(coarse: ComplexSpectrogram, refined: ComplexSpectrogram, clean_wb: ComplexSpectrogram,
                 est_hb: Optional[ComplexSpectrogram], clean_hb: Optional[ComplexSpectrogram],
                 target_labels: EnergyLabels, gamma: metrics.LoudnessExponent, config: PipelineConfig) -> LossReport:
    l_hb = metrics.hb_loss(est_hb.magnitude, clean_hb.magnitude, config.log_floor) if est_hb is not None else 0.0
    # Hard energy detector on the estimate, scored against the clean labels.
    detected = gating.sed_labels(refined.magnitude, config.log_floor)
    p = metrics.detector_probabilities(detected.values, target_labels.values, config.detector_floor)
    return metrics.total_loss(
        l_hb=l_hb,
        apc_snr_coarse_db=metrics.apc_snr(coarse, clean_wb, gamma),
        apc_snr_refined_db=metrics.apc_snr(refined, clean_wb, gamma),
        l_focal=metrics.focal_loss(p, config.focal_alpha, config.focal_beta),
    )


# --- Score a finished estimate ---
def score(estimate: AudioBuffer, reference: AudioBuffer, config: PipelineConfig) -> LossReport:
    """
    Evaluate an enhanced recording against its reference. A finished estimate
    has no separate coarse stage, so it fills both APC slots.
    """
    _check_rate(reference, config, "reference")
    _check_pair(estimate, reference, ("estimate", "reference"))
    est_wb, est_hb = _bands(spectral.stft(estimate, config.analysis), config)
    ref_wb, ref_hb = _bands(spectral.stft(reference, config.analysis), config)
    gamma = metrics.LoudnessExponent.from_setting(config.gamma, ref_wb.n_bins)
    target = gating.oracle_sed(ref_wb.magnitude, config.log_floor)
    return _loss_report(est_wb, est_wb, ref_wb, est_hb, ref_hb, target, gamma, config)
