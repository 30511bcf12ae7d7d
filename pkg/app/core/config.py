# Location: app/core/config.py

import hashlib
import json
import logging
from pathlib import Path
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.errors import UsageError

TOOL_VERSION = "1.0.0"

# Keys of a config file that belong to the nested AnalysisConfig.
ANALYSIS_KEYS = ("window_ms", "overlap_fraction", "fft_size", "sample_rate")

WIDE_BAND_RATE = 16000
FULL_BAND_RATE = 48000


# --- Analysis (STFT) configuration ---
class AnalysisConfig(BaseModel):
    window_ms: float = Field(32.0, gt=0, description="Hann analysis window duration in milliseconds.")
    overlap_fraction: float = Field(0.25, gt=0, lt=1, description="Fraction of the window shared by consecutive frames.")
    fft_size: int = Field(512, gt=1, description="FFT length; 512 for 16 kHz, 1536 for 48 kHz.")
    sample_rate: int = Field(WIDE_BAND_RATE, gt=0, description="Sample rate in Hz the analysis expects.")
    model_config = ConfigDict(populate_by_name=True, frozen=True)

    @classmethod
    def wide_band(cls) -> "AnalysisConfig":
        return cls()

    @classmethod
    def full_band(cls) -> "AnalysisConfig":
        return cls(fft_size=1536, sample_rate=FULL_BAND_RATE)

    @property
    def win_length(self) -> int:
        return int(round(self.window_ms * self.sample_rate / 1000.0))

    @property
    def hop_length(self) -> int:
        return int(round(self.win_length * (1.0 - self.overlap_fraction)))

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.fft_size

    @model_validator(mode="after")
    def _check_window_fits(self) -> "AnalysisConfig":
        if self.win_length < 2:
            raise ValueError(f"window of {self.window_ms} ms at {self.sample_rate} Hz is shorter than two samples")
        if self.fft_size < self.win_length:
            raise ValueError(f"fft_size {self.fft_size} is shorter than the {self.win_length}-sample window")
        if self.hop_length < 1:
            raise ValueError("overlap_fraction leaves a hop of zero samples")
        return self


# --- Mask provider selection ---
def parse_mask_spec(spec: str) -> Tuple[str, Optional[str]]:
    """
    Split a `--mask` value into (kind, argument).
    Accepted forms: `oracle`, `identity`, `constant:<value>`, `file:<dir>`.
    """
    kind, _, argument = spec.strip().partition(":")
    kind = kind.lower()
    if kind in ("oracle", "identity") and not argument:
        return kind, None
    if kind == "constant" and argument:
        try:
            float(argument)
        except ValueError:
            raise ValueError(f"constant mask value '{argument}' is not a number")
        return kind, argument
    if kind == "file" and argument:
        return kind, argument
    raise ValueError(f"unrecognised mask provider '{spec}'; use oracle, identity, constant:<v> or file:<dir>")


def parse_kernel(spec: str) -> np.ndarray:
    """Parse a stencil string such as `0.5,1,0.5;0,0,0` (rows by `;`, taps by `,`)."""
    rows = [row.strip() for row in spec.strip().split(";")]
    try:
        values = [[float(tap) for tap in row.split(",")] for row in rows]
    except ValueError:
        raise ValueError(f"gate kernel '{spec}' contains a non-numeric tap")
    if len({len(row) for row in values}) != 1:
        raise ValueError(f"gate kernel '{spec}' is not rectangular")
    kernel = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(kernel)):
        raise ValueError(f"gate kernel '{spec}' has non-finite taps")
    return kernel


# --- Pipeline configuration ---
class PipelineConfig(BaseModel):
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig.wide_band)
    band_mode: Literal["wb", "fb"] = Field("wb", description="wb: 16 kHz wide-band only; fb: 48 kHz split into WB and HB.")
    vrd_alpha: float = Field(0.4, gt=0, le=1, description="Scale on the moving average for voiced-region decisions.")
    gate_kernel: str = Field("1", description="Causal stencil applied to the gate before compensation.")
    gamma: str = Field("0.5", description="Loudness exponent: a constant in (0, 1] or a path to a per-bin file.")
    mask_provider: str = Field("oracle", description="oracle | identity | constant:<v> | file:<dir>")
    template_mode: Literal["binary", "signed"] = "binary"
    harmonic_model: Literal["cosine", "pulse"] = "cosine"
    bin_scale: Literal["literal", "calibrated"] = "literal"
    matrix_layout: Literal["dense", "csr"] = "dense"
    oracle_floor: float = Field(1e-4, gt=0, lt=0.5)
    oracle_ceiling_margin: float = Field(1e-12, gt=0, lt=0.5)
    log_floor: float = Field(1e-8, gt=0)
    focal_alpha: float = Field(1.0, gt=0)
    focal_beta: float = Field(2.0, ge=0)
    detector_floor: float = Field(1e-4, gt=0, lt=1)
    model_config = ConfigDict(populate_by_name=True, frozen=True)

    @field_validator("mask_provider")
    @classmethod
    def _check_mask_provider(cls, value: str) -> str:
        parse_mask_spec(value)
        return value

    @field_validator("gate_kernel")
    @classmethod
    def _check_gate_kernel(cls, value: str) -> str:
        parse_kernel(value)
        return value

    @model_validator(mode="after")
    def _check_band(self) -> "PipelineConfig":
        expected_rate = WIDE_BAND_RATE if self.band_mode == "wb" else FULL_BAND_RATE
        if self.analysis.sample_rate != expected_rate:
            raise ValueError(f"band_mode '{self.band_mode}' requires sample_rate {expected_rate}, got {self.analysis.sample_rate}")
        if self.band_mode == "fb" and self.analysis.n_bins != 769:
            raise ValueError("band_mode 'fb' requires a 1536-point analysis (769 bins)")
        return self

    @property
    def kernel(self) -> np.ndarray:
        return parse_kernel(self.gate_kernel)

    @property
    def mask(self) -> Tuple[str, Optional[str]]:
        return parse_mask_spec(self.mask_provider)

    def config_hash(self) -> str:
        """
        SHA-256 over the canonical JSON of every semantic field. When `gamma`
        names a file, the digest of its bytes is hashed along with the path.
        """
        fields = self.model_dump(mode="json")
        gamma_digest = self.gamma_file_digest()
        if gamma_digest is not None:
            fields["gamma_sha256"] = gamma_digest
        canonical = json.dumps(fields, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def gamma_file_digest(self) -> Optional[str]:
        try:
            float(self.gamma)
            return None
        except ValueError:
            pass
        path = Path(self.gamma)
        if not path.is_file():
            # Reading the exponents reports the missing file.
            return None
        return hashlib.sha256(path.read_bytes()).hexdigest()


def _parse_config_text(text: str, source: str) -> dict:
    entries = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{source}:{number}: expected key=value, got '{raw_line.strip()}'")
        entries[key.strip()] = value.strip()
    return entries


def build_config(entries: dict) -> PipelineConfig:
    """
    Build a PipelineConfig from flat key/value entries (file contents merged with
    CLI overrides). Analysis keys are lifted into the nested AnalysisConfig, whose
    sample rate and FFT size default from the band mode.
    """
    entries = {key: value for key, value in entries.items() if value is not None}
    known = set(PipelineConfig.model_fields) | set(ANALYSIS_KEYS)
    unknown = sorted(set(entries) - known - {"analysis"})
    if unknown:
        raise UsageError(f"Unknown configuration key(s): {', '.join(unknown)}")

    band_mode = str(entries.get("band_mode", "wb")).lower()
    base = AnalysisConfig.full_band() if band_mode == "fb" else AnalysisConfig.wide_band()
    analysis_fields = base.model_dump()
    analysis_fields.update({key: entries.pop(key) for key in ANALYSIS_KEYS if key in entries})
    entries.pop("analysis", None)
    entries["band_mode"] = band_mode

    try:
        return PipelineConfig(analysis=AnalysisConfig(**analysis_fields), **entries)
    except ValidationError as e:
        logging.error(f"Invalid configuration: {e.errors()}")
        raise UsageError(f"Invalid configuration: {e}") from e


def load_config(path: Optional[Path] = None, overrides: Optional[dict] = None) -> PipelineConfig:
    """Read a key=value config file (optional) and apply overrides on top."""
    entries = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise UsageError(f"Could not read config file {path}: {e}") from e
        entries.update(_parse_config_text(text, str(path)))
        logging.info(f"Loaded {len(entries)} configuration entries from {path}")
    entries.update(overrides or {})
    return build_config(entries)
