import inspect
import io
from unittest.mock import patch

import numpy as np
import soundfile as sf
from fastapi import FastAPI
from fastapi.testclient import TestClient

from app.api.v1 import deps
from app.api.v1.deps import get_pipeline_config
from app.api.v1.endpoints import analysis, matrix, metrics
from app.core.config import build_config
from app.core.errors import NumericError
from app.main import app
from tests.conftest import harmonic_comb

# --- Test Setup ---

WB_CONFIG = build_config({})


# This function will replace the `get_pipeline_config` dependency
def override_get_pipeline_config():
    return WB_CONFIG


app.dependency_overrides[get_pipeline_config] = override_get_pipeline_config
client = TestClient(app)

# A minimal app carrying only the matrix router, configured for the pulse model
matrix_app = FastAPI()
matrix_app.include_router(matrix.router, prefix="/api/v1/matrix")
matrix_app.dependency_overrides[get_pipeline_config] = lambda: build_config({"harmonic_model": "pulse"})
matrix_client = TestClient(matrix_app)


def wav_upload(samples, sample_rate=16000, name="audio.wav"):
    buffer = io.BytesIO()
    sf.write(buffer, samples, sample_rate, subtype="FLOAT", format="WAV")
    return (name, buffer.getvalue(), "audio/wav")


# --- Test Cases ---

def test_health_check():
    response = client.get("/")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_analysis_success():
    """
    A 200 Hz comb upload returns one entry per frame, voiced frames carrying ~200 Hz.
    """
    # Arrange
    files = {"audio": wav_upload(harmonic_comb(200.0, duration_s=1.0))}

    # Act
    response = client.post("/api/v1/analysis", files=files)

    # Assert
    assert response.status_code == 200
    data = response.json()
    assert data["n_frames"] == 42 and len(data["frames"]) == 42
    assert data["config_hash"] == WB_CONFIG.config_hash()
    voiced = [frame["pitch_hz"] for frame in data["frames"] if frame["pitch_hz"] is not None]
    assert len(voiced) == data["voiced_frames"]
    assert abs(float(np.median(voiced)) - 200.0) <= 1.0


def test_analysis_rejects_stereo_upload():
    files = {"audio": wav_upload(np.zeros((1600, 2)))}
    response = client.post("/api/v1/analysis", files=files)
    assert response.status_code == 422
    assert response.json()["error"] == "InputFormatError"


def test_analysis_rejects_empty_upload():
    response = client.post("/api/v1/analysis", files={"audio": ("empty.wav", b"", "audio/wav")})
    assert response.status_code == 422
    assert "empty" in response.json()["detail"]


def test_analysis_missing_file_is_validation_error():
    response = client.post("/api/v1/analysis")
    assert response.status_code == 422


def test_pipeline_endpoints_run_in_the_threadpool():
    """DSP-bound handlers are plain functions so FastAPI runs them off the event loop."""
    assert not inspect.iscoroutinefunction(analysis.analyze_recording)
    assert not inspect.iscoroutinefunction(metrics.score_estimate)
    assert not inspect.iscoroutinefunction(deps.read_upload)


def test_metrics_identical_upload():
    samples = harmonic_comb(180.0, duration_s=1.0)
    files = {"estimate": wav_upload(samples, name="est.wav"), "reference": wav_upload(samples, name="ref.wav")}

    response = client.post("/api/v1/metrics", files=files)

    assert response.status_code == 200
    data = response.json()
    assert data["apc_snr_refined_db"] == 60.0
    assert data["total"] == -120.0


def test_metrics_length_mismatch():
    samples = harmonic_comb(180.0, duration_s=1.0)
    files = {"estimate": wav_upload(samples[:-5]), "reference": wav_upload(samples)}
    response = client.post("/api/v1/metrics", files=files)
    assert response.status_code == 422


@patch('app.api.v1.endpoints.metrics.pipeline.score')
def test_metrics_numeric_failure_maps_to_400(mock_score):
    """
    Numeric contract violations raised inside the pipeline become 400 responses.
    """
    # Arrange
    mock_score.side_effect = NumericError("SNR is undefined for an all-zero reference")
    samples = harmonic_comb(180.0, duration_s=1.0)
    files = {"estimate": wav_upload(samples), "reference": wav_upload(samples)}

    # Act
    response = client.post("/api/v1/metrics", files=files)

    # Assert
    assert response.status_code == 400
    assert response.json() == {"detail": "SNR is undefined for an all-zero reference", "error": "NumericError"}
    mock_score.assert_called_once()


def test_matrix_summary():
    response = client.get("/api/v1/matrix")
    assert response.status_code == 200
    data = response.json()
    assert (data["rows"], data["cols"], data["span_bins"]) == (3600, 257, 257)
    assert data["model"] == "cosine"
    assert data["min_candidate_hz"] == 60.0


def test_matrix_summary_pulse_model():
    response = matrix_client.get("/api/v1/matrix")
    assert response.status_code == 200
    assert response.json()["model"] == "pulse"


def test_invalid_service_config_is_500(tmp_path, monkeypatch):
    """
    A broken PIPELINE_CONFIG file surfaces as a 500, not a crash.
    """
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key=1\n")
    monkeypatch.setenv("PIPELINE_CONFIG", str(bad))
    deps._load_service_config.cache_clear()

    service_app = FastAPI()
    service_app.include_router(matrix.router, prefix="/api/v1/matrix")
    response = TestClient(service_app).get("/api/v1/matrix")

    assert response.status_code == 500
    deps._load_service_config.cache_clear()
