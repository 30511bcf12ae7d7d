from fastapi import APIRouter, Depends, File, UploadFile
import logging

from app import pipeline
from app.api.v1 import schemas
from app.api.v1.deps import get_integral_matrix, get_pipeline_config, read_upload
from app.core.config import PipelineConfig
from app.dsp.harmonic import IntegralMatrix

router = APIRouter()

@router.post("", response_model=schemas.AnalysisResponse, response_model_by_alias=False)
def analyze_recording(
    audio: UploadFile = File(..., description="Mono WAV, 16-bit PCM or 32-bit float."),
    config: PipelineConfig = Depends(get_pipeline_config),
    matrix: IntegralMatrix = Depends(get_integral_matrix),
):
    """
    Analyse one recording: per-frame pitch, voiced-frame count and gate density.
    Each request starts from a fresh voiced-region moving average, so results
    do not depend on what the service processed before.
    """
    buffer = read_upload(audio)
    logging.info(f"Analysing upload '{audio.filename}' ({buffer.samples.size} samples)")
    result = pipeline.analyze(buffer, config, matrix=matrix)

    track = result.track
    pitch_hz = track.pitch_hz
    frames = []
    for t in range(track.n_frames):
        voiced = bool(track.voiced[t])
        frames.append(schemas.PitchFrame(
            frame=t,
            time_s=t * result.spectrum.frame_hop / buffer.sample_rate,
            candidate=int(track.candidate[t]) if voiced else None,
            pitch_hz=round(float(pitch_hz[t]), 1) if voiced else None,
            significance=float(track.significance[t]),
        ))

    return schemas.AnalysisResponse(
        sample_rate=buffer.sample_rate,
        band_mode=config.band_mode,
        n_frames=track.n_frames,
        n_bins=result.spectrum.n_bins,
        voiced_frames=int(result.vrd_flags.sum()),
        gate_density=result.gate.density,
        config_hash=config.config_hash(),
        frames=frames,
    )
