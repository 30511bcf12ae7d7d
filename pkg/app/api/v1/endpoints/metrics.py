from fastapi import APIRouter, Depends, File, UploadFile
import logging

from app import pipeline
from app.api.v1 import schemas
from app.api.v1.deps import get_pipeline_config, read_upload
from app.core.config import PipelineConfig

router = APIRouter()

@router.post("", response_model=schemas.MetricsResponse, response_model_by_alias=False)
def score_estimate(
    estimate: UploadFile = File(..., description="Enhanced recording."),
    reference: UploadFile = File(..., description="Clean reference, same rate and length."),
    config: PipelineConfig = Depends(get_pipeline_config),
):
    """
    Score an enhanced recording against its clean reference.
    Returns the loss report; APC terms appear both as dB scores and as negated losses.
    """
    est = read_upload(estimate)
    ref = read_upload(reference)
    report = pipeline.score(est, ref, config)
    logging.info(f"Scored '{estimate.filename}' against '{reference.filename}': total={report.total:.4f}")
    return schemas.MetricsResponse(**report.model_dump(), config_hash=config.config_hash())
