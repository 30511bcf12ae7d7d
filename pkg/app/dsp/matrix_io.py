"""
On-disk formats shared by the CLI and the service.

Binary matrix: 16-byte little-endian header (magic b"HGMX", rows u32, cols u32,
reserved u32 = 0) followed by rows * cols little-endian float32 values in
row-major order.

Pitch CSV: frame,time_s,candidate,pitch_hz,significance. Frames without a
pitch leave candidate and pitch_hz empty.
"""

import csv
import io
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from app.core.errors import InputFormatError
from app.dsp.harmonic import PitchTrack

MATRIX_MAGIC = b"HGMX"
_HEADER = struct.Struct("<4sIII")
PITCH_COLUMNS = ("frame", "time_s", "candidate", "pitch_hz", "significance")


# --- Binary matrices ---
def matrix_to_bytes(values: np.ndarray) -> bytes:
    values = np.asarray(values)
    if values.ndim != 2:
        raise InputFormatError(f"only 2-D matrices can be serialised, got shape {values.shape}")
    rows, cols = values.shape
    return _HEADER.pack(MATRIX_MAGIC, rows, cols, 0) + np.ascontiguousarray(values, dtype="<f4").tobytes()


def matrix_from_bytes(data: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(data) < _HEADER.size:
        raise InputFormatError(f"{source}: {len(data)} bytes is shorter than the matrix header")
    magic, rows, cols, _reserved = _HEADER.unpack_from(data)
    if magic != MATRIX_MAGIC:
        raise InputFormatError(f"{source}: bad magic {magic!r}, expected {MATRIX_MAGIC!r}")
    expected = _HEADER.size + 4 * rows * cols
    if len(data) != expected:
        raise InputFormatError(f"{source}: {rows}x{cols} header needs {expected} bytes, file has {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(rows, cols)
    return values.astype(np.float64)


def save_matrix(path: Union[str, Path], values: np.ndarray) -> Path:
    path = Path(path)
    path.write_bytes(matrix_to_bytes(values))
    logging.info(f"Wrote {np.shape(values)[0]}x{np.shape(values)[1]} matrix to {path}")
    return path


def load_matrix(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise InputFormatError(f"Could not read matrix file {path}: {e}") from e
    return matrix_from_bytes(data, str(path))


def save_matrix_csv(path: Union[str, Path], values: np.ndarray) -> Path:
    """Plain comma-separated rows, for matrices small enough to inspect by eye."""
    path = Path(path)
    np.savetxt(path, np.asarray(values, dtype=np.float64), delimiter=",", fmt="%.9g")
    return path


# --- Pitch track CSV ---
def pitch_track_csv(track: PitchTrack, frame_hop: int, sample_rate: int) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(PITCH_COLUMNS)
    pitch_hz = track.pitch_hz
    for t in range(track.n_frames):
        voiced = bool(track.voiced[t])
        writer.writerow([
            t,
            f"{t * frame_hop / sample_rate:.6f}",
            int(track.candidate[t]) if voiced else "",
            f"{pitch_hz[t]:.1f}" if voiced else "",
            f"{track.significance[t]:.9g}",
        ])
    return buffer.getvalue()


def save_pitch_csv(path: Union[str, Path], track: PitchTrack, frame_hop: int, sample_rate: int) -> Path:
    path = Path(path)
    path.write_text(pitch_track_csv(track, frame_hop, sample_rate), encoding="utf-8")
    logging.info(f"Wrote {int(track.voiced.sum())}/{track.n_frames} voiced frames to {path}")
    return path


def load_pitch_csv(path: Union[str, Path]) -> PitchTrack:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != PITCH_COLUMNS:
            raise InputFormatError(f"{path}: expected columns {','.join(PITCH_COLUMNS)}, got {reader.fieldnames}")
        rows = list(reader)
    candidate = np.array([int(row["candidate"]) if row["candidate"] else -1 for row in rows], dtype=np.int64)
    significance = np.array([float(row["significance"]) for row in rows])
    return PitchTrack(candidate, significance)
