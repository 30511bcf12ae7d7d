"""
Mask providers stand in for the mask-estimating networks. Each one answers the
three requests the pipeline makes; `clean` is only passed when a reference exists.
"""

import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional

import numpy as np

from app.core.config import PipelineConfig
from app.core.errors import InputFormatError, ShapeError, UsageError
from app.dsp import masking
from app.dsp.masking import ComplexMask, CompensationMask, MagnitudeMask
from app.dsp.matrix_io import load_matrix
from app.dsp.spectral import ComplexSpectrogram

# File names a `file:<dir>` provider expects.
MASK_FILES = {
    "magnitude": "hb_mask.bin",
    "complex_real": "cem_real.bin",
    "complex_imag": "cem_imag.bin",
    "compensation": "gm_mask.bin",
}


class MaskProvider(ABC):
    name: str = "abstract"
    needs_reference: bool = False

    @abstractmethod
    def magnitude_mask(self, noisy_hb: ComplexSpectrogram, clean_hb: Optional[ComplexSpectrogram]) -> MagnitudeMask:
        ...

    @abstractmethod
    def complex_mask(self, noisy_wb: ComplexSpectrogram, clean_wb: Optional[ComplexSpectrogram]) -> ComplexMask:
        ...

    @abstractmethod
    def compensation_mask(self, coarse_wb: ComplexSpectrogram, clean_wb: Optional[ComplexSpectrogram],
                          gate_smoothed: np.ndarray) -> CompensationMask:
        ...


class OracleMaskProvider(MaskProvider):
    """Ideal masks computed from the clean reference."""
    name = "oracle"
    needs_reference = True

    def __init__(self, floor: float = masking.ORACLE_FLOOR, margin: float = masking.ORACLE_CEILING_MARGIN):
        self.floor = floor
        self.margin = margin

    @staticmethod
    def _require(clean):
        if clean is None:
            raise UsageError("the oracle mask provider needs a clean reference")
        return clean

    def magnitude_mask(self, noisy_hb, clean_hb):
        return masking.oracle_magnitude_mask(noisy_hb, self._require(clean_hb), self.floor, self.margin)

    def complex_mask(self, noisy_wb, clean_wb):
        return masking.oracle_complex_mask(noisy_wb, self._require(clean_wb), self.floor, self.margin)

    def compensation_mask(self, coarse_wb, clean_wb, gate_smoothed):
        return masking.oracle_compensation_mask(coarse_wb, self._require(clean_wb), gate_smoothed, self.floor, self.margin)


class IdentityMaskProvider(MaskProvider):
    """Saturated logits: every operator passes its input through unchanged."""
    name = "identity"

    def magnitude_mask(self, noisy_hb, clean_hb):
        return masking.identity_masks(noisy_hb.shape)[0]

    def complex_mask(self, noisy_wb, clean_wb):
        return masking.identity_masks(noisy_wb.shape)[1]

    def compensation_mask(self, coarse_wb, clean_wb, gate_smoothed):
        return masking.identity_masks(coarse_wb.shape)[2]


class ConstantMaskProvider(MaskProvider):
    name = "constant"

    def __init__(self, value: float):
        self.value = float(value)

    def magnitude_mask(self, noisy_hb, clean_hb):
        return masking.constant_masks(noisy_hb.shape, self.value)[0]

    def complex_mask(self, noisy_wb, clean_wb):
        return masking.constant_masks(noisy_wb.shape, self.value)[1]

    def compensation_mask(self, coarse_wb, clean_wb, gate_smoothed):
        return masking.constant_masks(coarse_wb.shape, self.value)[2]


class FileMaskProvider(MaskProvider):
    """Masks precomputed elsewhere, stored in the binary matrix format under one directory."""
    name = "file"

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise InputFormatError(f"mask directory {self.directory} does not exist")

    def _load(self, key: str, shape) -> np.ndarray:
        path = self.directory / MASK_FILES[key]
        if not path.exists():
            raise InputFormatError(f"mask file {path} is missing")
        values = load_matrix(path)
        if values.shape != tuple(shape):
            raise ShapeError(f"{path} holds a {values.shape} mask, the spectrogram is {tuple(shape)}")
        return values

    def magnitude_mask(self, noisy_hb, clean_hb):
        return MagnitudeMask(self._load("magnitude", noisy_hb.shape))

    def complex_mask(self, noisy_wb, clean_wb):
        return ComplexMask(self._load("complex_real", noisy_wb.shape), self._load("complex_imag", noisy_wb.shape))

    def compensation_mask(self, coarse_wb, clean_wb, gate_smoothed):
        return CompensationMask(self._load("compensation", coarse_wb.shape))


def get_mask_provider(config: PipelineConfig) -> MaskProvider:
    kind, argument = config.mask
    if kind == "oracle":
        provider = OracleMaskProvider(config.oracle_floor, config.oracle_ceiling_margin)
    elif kind == "identity":
        provider = IdentityMaskProvider()
    elif kind == "constant":
        provider = ConstantMaskProvider(float(argument))
    else:
        provider = FileMaskProvider(Path(argument))
    logging.info(f"Using '{provider.name}' mask provider")
    return provider
