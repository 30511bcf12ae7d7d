import logging
from fastapi import FastAPI, Request, status
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.middleware.cors import CORSMiddleware
from app.api.v1.endpoints import analysis, metrics, matrix
from app.core.config import TOOL_VERSION
from app.core.errors import HarmonicGateError, InputFormatError, NumericError, UsageError
from app.core.logging_config import configure_logging

# --- Logging Configuration ---
# Configure logging at the application's entry point; LOG_LEVEL selects the level.
configure_logging()

app = FastAPI(
    title="Harmonic Gate API",
    description="Pitch analysis, harmonic gating and enhancement metrics over HTTP.",
    version=TOOL_VERSION
)

# --- Custom Exception Handler for Validation Errors ---
@app.exception_handler(RequestValidationError)
async def validation_exception_handler(request: Request, exc: RequestValidationError):
    """
    Log detailed validation errors for 422 responses, then delegate to
    FastAPI's default handler so the response format stays the same.
    """
    error_details = exc.errors()
    logging.error(f"422 Unprocessable Entity. Request: {request.method} {request.url}. Errors: {error_details}")

    from fastapi.exception_handlers import request_validation_exception_handler
    return await request_validation_exception_handler(request, exc)

# --- Domain Error Handler ---
@app.exception_handler(HarmonicGateError)
async def harmonic_gate_exception_handler(request: Request, exc: HarmonicGateError):
    """
    Map domain errors onto HTTP statuses: bad uploads and shape mismatches are 422,
    numeric contract violations and usage errors are 400.
    """
    if isinstance(exc, InputFormatError):
        status_code = status.HTTP_422_UNPROCESSABLE_ENTITY
    elif isinstance(exc, (NumericError, UsageError)):
        status_code = status.HTTP_400_BAD_REQUEST
    else:
        status_code = status.HTTP_500_INTERNAL_SERVER_ERROR
    logging.error(f"{status_code} {type(exc).__name__}. Request: {request.method} {request.url}. Detail: {exc}")
    return JSONResponse(status_code=status_code, content={"detail": str(exc), "error": type(exc).__name__})

# --- CORS Middleware ---
# Public read-only API: any origin, no credentials.
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=False,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(analysis.router, prefix="/api/v1/analysis", tags=["Analysis"])
app.include_router(metrics.router, prefix="/api/v1/metrics", tags=["Metrics"])
app.include_router(matrix.router, prefix="/api/v1/matrix", tags=["Integral Matrix"])

@app.get("/", tags=["Health Check"])
def read_root():
    return {"status": "ok", "message": "Harmonic Gate API", "version": TOOL_VERSION}
