# Location: app/core/reports.py

from typing import List

from pydantic import BaseModel, ConfigDict, Field

from app.core.config import TOOL_VERSION


# --- Loss / metric report ---
class LossReport(BaseModel):
    """
    Components of the combined objective. APC terms are stored both as
    scores (dB, higher is better) and as losses (the negated score), so
    `total` is the plain sum of the four loss components.
    """
    l_hb: float = Field(..., description="High-band magnitude + log-magnitude loss.")
    l_apc_coarse: float = Field(..., description="Negated APC-SNR of the coarse estimate.")
    l_apc_refined: float = Field(..., description="Negated APC-SNR of the refined estimate.")
    l_focal: float = Field(..., description="Focal loss of the energy detector.")
    total: float
    apc_snr_coarse_db: float
    apc_snr_refined_db: float
    model_config = ConfigDict(populate_by_name=True, frozen=True)

    def as_lines(self) -> List[str]:
        return [f"{key}={value:.10g}" for key, value in self.model_dump().items()]

    def as_csv(self) -> str:
        fields = self.model_dump()
        header = ",".join(fields)
        row = ",".join(f"{value:.10g}" for value in fields.values())
        return f"{header}\n{row}\n"


# --- Run manifest ---
class RunManifest(BaseModel):
    command: str
    inputs: List[str]
    outputs: List[str] = Field(default_factory=list, description="Every file the command wrote, the manifest included.")
    config_hash: str
    tool_version: str = TOOL_VERSION
    model_config = ConfigDict(populate_by_name=True)
