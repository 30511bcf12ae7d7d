from fastapi import APIRouter, Depends

from app.api.v1 import schemas
from app.api.v1.deps import get_integral_matrix
from app.dsp import harmonic
from app.dsp.harmonic import IntegralMatrix

router = APIRouter()

@router.get("", response_model=schemas.MatrixSummary, response_model_by_alias=False)
def get_matrix_summary(matrix: IntegralMatrix = Depends(get_integral_matrix)):
    """
    Shape and sparsity of the configured integral matrix.
    """
    return schemas.MatrixSummary(
        rows=matrix.values.shape[0],
        cols=matrix.n_bins,
        nnz=matrix.nnz,
        model=matrix.model,
        span_bins=matrix.span_bins,
        min_candidate_hz=float(harmonic.candidate_hz(0)),
        max_candidate_hz=float(harmonic.candidate_hz(harmonic.CANDIDATE_COUNT - 1)),
    )
