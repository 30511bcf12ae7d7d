"""
Mask application operators and their oracle (clean-reference) counterparts.

magnitude mask    S' = S * sigmoid(M)                            never amplifies
complex mask      S' = |S| tanh|M| exp(j(phi_S + phi_M))         never amplifies
compensation      S'' = [1 + G * sigmoid(M)] * S'                gain in [1, 2]

All three are elementwise; none couples neighbouring bins or frames.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from app.core.errors import NumericError, ShapeError
from app.dsp.spectral import ComplexSpectrogram

ORACLE_FLOOR = 1e-4
ORACLE_CEILING_MARGIN = 1e-12
# sigmoid(+-50) is 1.0 / 2e-22 in float64, tanh(50) is 1.0.
SATURATING_LOGIT = 50.0


# --- Domain types ---
def _finite_matrix(values, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ShapeError(f"{name} must be a T x F matrix, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise NumericError(f"{name} contains non-finite entries")
    return values


@dataclass(frozen=True)
class MagnitudeMask:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _finite_matrix(self.values, "magnitude mask"))

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class ComplexMask:
    real: np.ndarray
    imag: np.ndarray

    def __post_init__(self):
        real = _finite_matrix(self.real, "complex mask (real)")
        imag = _finite_matrix(self.imag, "complex mask (imag)")
        if real.shape != imag.shape:
            raise ShapeError(f"complex mask parts differ in shape: {real.shape} vs {imag.shape}")
        object.__setattr__(self, "real", real)
        object.__setattr__(self, "imag", imag)

    @property
    def shape(self):
        return self.real.shape

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.real, self.imag)

    @property
    def phase(self) -> np.ndarray:
        return np.arctan2(self.imag, self.real)


@dataclass(frozen=True)
class CompensationMask:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _finite_matrix(self.values, "compensation mask"))

    @property
    def shape(self):
        return self.values.shape


def _check_shapes(spec: ComplexSpectrogram, shape, what: str) -> None:
    if tuple(shape) != tuple(spec.shape):
        raise ShapeError(f"{what} of shape {tuple(shape)} does not match spectrogram {spec.shape}")


def wrap_phase(phase: np.ndarray) -> np.ndarray:
    """Wrap angles into (-pi, pi]."""
    wrapped = np.arctan2(np.sin(phase), np.cos(phase))
    return np.where(wrapped == -np.pi, np.pi, wrapped)


# --- Operators ---
def apply_mask_magnitude(spec_hb: ComplexSpectrogram, m: MagnitudeMask) -> ComplexSpectrogram:
    _check_shapes(spec_hb, m.shape, "magnitude mask")
    gain = expit(m.values)
    return ComplexSpectrogram(spec_hb.real * gain, spec_hb.imag * gain, spec_hb.frame_hop, spec_hb.bin_hz, spec_hb.n_samples)


def apply_mask_complex(spec_wb: ComplexSpectrogram, m: ComplexMask) -> ComplexSpectrogram:
    """
    Scale |S| by tanh|M| and rotate by the mask's phase. Computed as
    S * (M / |M|) * tanh|M|, which is the same product without a round trip
    through polar form; a zero mask gives a zero output.
    """
    _check_shapes(spec_wb, m.shape, "complex mask")
    mask_mag = m.magnitude
    unit = np.zeros(mask_mag.shape, dtype=np.complex128)
    nonzero = mask_mag > 0
    unit[nonzero] = (m.real[nonzero] + 1j * m.imag[nonzero]) / mask_mag[nonzero]
    out = spec_wb.values * unit * np.tanh(mask_mag)
    return ComplexSpectrogram.from_complex(out, spec_wb)


def apply_gated_compensation(spec_coarse: ComplexSpectrogram, gate_smoothed, m: CompensationMask) -> ComplexSpectrogram:
    gate = np.asarray(gate_smoothed, dtype=np.float64)
    _check_shapes(spec_coarse, gate.shape, "gate")
    _check_shapes(spec_coarse, m.shape, "compensation mask")
    if np.any(gate < 0) or np.any(gate > 1) or not np.all(np.isfinite(gate)):
        raise NumericError("compensation gate must lie in [0, 1]")
    factor = 1.0 + gate * expit(m.values)
    return ComplexSpectrogram(spec_coarse.real * factor, spec_coarse.imag * factor,
                              spec_coarse.frame_hop, spec_coarse.bin_hz, spec_coarse.n_samples)


# --- Oracle masks ---
def _ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    # A silent denominator bin stays silent whatever the gain, so unit gain is as good as any.
    ratio = np.ones_like(numerator)
    np.divide(numerator, denominator, out=ratio, where=denominator > 0)
    return ratio


def _clamp(ratio: np.ndarray, floor: float, margin: float) -> np.ndarray:
    clamped = np.clip(ratio, floor, 1.0 - margin)
    share = float(np.mean(clamped != ratio)) if ratio.size else 0.0
    if share > 0.5:
        logging.warning(f"Oracle mask clamped {share:.0%} of ratios to [{floor}, 1 - {margin}]")
    return clamped


def oracle_magnitude_mask(noisy: ComplexSpectrogram, clean: ComplexSpectrogram,
                          floor: float = ORACLE_FLOOR, margin: float = ORACLE_CEILING_MARGIN) -> MagnitudeMask:
    """logit(clamp(|clean| / |noisy|)); gains above 1 cannot be expressed and are clamped."""
    _check_shapes(noisy, clean.shape, "clean spectrogram")
    ratio = _clamp(_ratio(clean.magnitude, noisy.magnitude), floor, margin)
    return MagnitudeMask(logit(ratio))


def oracle_complex_mask(noisy: ComplexSpectrogram, clean: ComplexSpectrogram,
                        floor: float = ORACLE_FLOOR, margin: float = ORACLE_CEILING_MARGIN) -> ComplexMask:
    """Magnitude atanh(clamp(|clean| / |noisy|)), phase phi_clean - phi_noisy."""
    _check_shapes(noisy, clean.shape, "clean spectrogram")
    magnitude = np.arctanh(_clamp(_ratio(clean.magnitude, noisy.magnitude), floor, margin))
    rotation = wrap_phase(np.arctan2(clean.imag, clean.real) - np.arctan2(noisy.imag, noisy.real))
    return ComplexMask(magnitude * np.cos(rotation), magnitude * np.sin(rotation))


def oracle_compensation_mask(coarse: ComplexSpectrogram, clean: ComplexSpectrogram, gate_smoothed,
                             floor: float = ORACLE_FLOOR, margin: float = ORACLE_CEILING_MARGIN) -> CompensationMask:
    """
    Logits of the extra gain |clean| / |coarse| - 1, divided by the gate so that
    1 + G * sigmoid(M) hits the ratio where it can. Ungated bins get the floor logit.
    """
    gate = np.asarray(gate_smoothed, dtype=np.float64)
    _check_shapes(coarse, clean.shape, "clean spectrogram")
    _check_shapes(coarse, gate.shape, "gate")
    gated = gate > 0
    extra = np.full(gate.shape, floor)
    excess = _ratio(clean.magnitude, coarse.magnitude) - 1.0
    extra[gated] = excess[gated] / gate[gated]
    logits = logit(np.clip(extra, floor, 1.0 - margin))
    logging.debug(f"Compensation oracle: {int(gated.sum())} gated bins of {gate.size}")
    return CompensationMask(logits)


# --- Saturated masks ---
def identity_masks(shape):
    """Masks under which all three operators return their input unchanged."""
    ones = np.full(shape, SATURATING_LOGIT)
    return MagnitudeMask(ones), ComplexMask(ones, np.zeros(shape)), CompensationMask(-ones)


def constant_masks(shape, value: float):
    """Every logit (and the complex mask's real part) set to `value`."""
    filled = np.full(shape, float(value))
    return MagnitudeMask(filled), ComplexMask(filled, np.zeros(shape)), CompensationMask(filled)
