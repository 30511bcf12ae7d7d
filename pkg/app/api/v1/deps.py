import os
import logging
from functools import lru_cache

from fastapi import Depends, HTTPException, UploadFile, status

from app import pipeline
from app.core.config import PipelineConfig, load_config
from app.core.errors import UsageError
from app.dsp.audio_io import read_wav
from app.dsp.harmonic import IntegralMatrix
from app.dsp.spectral import AudioBuffer


@lru_cache(maxsize=1)
def _load_service_config(path: str | None) -> PipelineConfig:
    return load_config(path)


def get_pipeline_config() -> PipelineConfig:
    """
    FastAPI dependency returning the service's pipeline configuration.
    Read from the file named by PIPELINE_CONFIG, or the defaults when unset.
    """
    path = os.getenv("PIPELINE_CONFIG") or None
    try:
        return _load_service_config(path)
    except UsageError as e:
        logging.error(f"Could not load pipeline configuration from {path}: {e}")
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail="Service configuration is invalid.",
        )


def get_integral_matrix(config: PipelineConfig = Depends(get_pipeline_config)) -> IntegralMatrix:
    """The configured integral matrix; built on first use and memoized by the pipeline."""
    return pipeline.integral_matrix_for(config)


def read_upload(upload: UploadFile) -> AudioBuffer:
    data = upload.file.read()
    if not data:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=f"Uploaded file '{upload.filename}' is empty.",
        )
    return read_wav(data, name=upload.filename or "upload")
