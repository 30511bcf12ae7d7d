# Location: app/api/v1/schemas.py

from pydantic import BaseModel, Field, ConfigDict
from typing import Optional, List

# --- Pitch / gate schemas ---
class PitchFrame(BaseModel):
    frame: int
    time_s: float = Field(..., alias="timeS")
    candidate: Optional[int] = Field(None, description="Candidate row index; None for frames without a pitch.")
    pitch_hz: Optional[float] = Field(None, alias="pitchHz")
    significance: float
    model_config = ConfigDict(populate_by_name=True)

class AnalysisResponse(BaseModel):
    sample_rate: int = Field(..., alias="sampleRate")
    band_mode: str = Field(..., alias="bandMode")
    n_frames: int = Field(..., alias="nFrames")
    n_bins: int = Field(..., alias="nBins")
    voiced_frames: int = Field(..., alias="voicedFrames")
    gate_density: float = Field(..., alias="gateDensity", description="Fraction of T-F points the gate opens.")
    config_hash: str = Field(..., alias="configHash")
    frames: List[PitchFrame] = []
    model_config = ConfigDict(populate_by_name=True)

# --- Metric schemas ---
class MetricsResponse(BaseModel):
    """LossReport plus the configuration it was computed under."""
    l_hb: float = Field(..., alias="lHb")
    l_apc_coarse: float = Field(..., alias="lApcCoarse")
    l_apc_refined: float = Field(..., alias="lApcRefined")
    l_focal: float = Field(..., alias="lFocal")
    total: float
    apc_snr_coarse_db: float = Field(..., alias="apcSnrCoarseDb")
    apc_snr_refined_db: float = Field(..., alias="apcSnrRefinedDb")
    config_hash: str = Field(..., alias="configHash")
    model_config = ConfigDict(populate_by_name=True)

# --- Integral matrix schemas ---
class MatrixSummary(BaseModel):
    rows: int
    cols: int
    nnz: int
    model: str
    span_bins: int = Field(..., alias="spanBins", description="Bins corresponding to 8 kHz.")
    min_candidate_hz: float = Field(..., alias="minCandidateHz")
    max_candidate_hz: float = Field(..., alias="maxCandidateHz")
    model_config = ConfigDict(populate_by_name=True)
