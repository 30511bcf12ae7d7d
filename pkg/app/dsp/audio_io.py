# Location: app/dsp/audio_io.py

import io
import logging
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np
import soundfile as sf

from app.core.errors import InputFormatError
from app.dsp.spectral import AudioBuffer

SUPPORTED_SUBTYPES = ("PCM_16", "FLOAT")
SUPPORTED_RATES = (16000, 48000)

AudioSource = Union[str, Path, BinaryIO, bytes]


def _open(source: AudioSource):
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(source)
    return source


def read_wav(source: AudioSource, name: str = "") -> AudioBuffer:
    """
    Read a mono 16-bit PCM or 32-bit float WAV into a float64 buffer.
    Multichannel files are rejected rather than downmixed.
    """
    label = name or str(source if not isinstance(source, (bytes, bytearray)) else "<upload>")
    handle = _open(source)
    try:
        info = sf.info(handle)
        if hasattr(handle, "seek"):
            handle.seek(0)
        samples, sample_rate = sf.read(handle, dtype="float64", always_2d=True)
    except RuntimeError as e:
        logging.error(f"Could not decode WAV {label}: {e}")
        raise InputFormatError(f"{label} is not a readable WAV file: {e}") from e
    except OSError as e:
        raise InputFormatError(f"Could not open {label}: {e}") from e

    if info.format != "WAV":
        raise InputFormatError(f"{label} is {info.format}, only WAV is supported")
    if info.subtype not in SUPPORTED_SUBTYPES:
        raise InputFormatError(f"{label} uses {info.subtype}; convert it to 16-bit PCM or 32-bit float")
    if samples.shape[1] != 1:
        raise InputFormatError(f"{label} has {samples.shape[1]} channels; only mono input is supported, downmix it first")
    if sample_rate not in SUPPORTED_RATES:
        raise InputFormatError(f"{label} is sampled at {sample_rate} Hz; resample it to 16000 (wb) or 48000 (fb)")

    logging.info(f"Read {label}: {samples.shape[0]} samples at {sample_rate} Hz ({info.subtype})")
    return AudioBuffer(samples[:, 0], int(sample_rate))


def write_wav(path: Union[str, Path], audio: AudioBuffer, subtype: str = "FLOAT") -> Path:
    if subtype not in SUPPORTED_SUBTYPES:
        raise InputFormatError(f"Cannot write subtype {subtype}; use one of {', '.join(SUPPORTED_SUBTYPES)}")
    path = Path(path)
    data = audio.samples.astype(np.float32)
    if subtype == "PCM_16":
        peak = float(np.max(np.abs(data))) if data.size else 0.0
        if peak > 1.0:
            logging.warning(f"Clipping {path}: peak {peak:.3f} exceeds full scale")
        data = np.clip(data, -1.0, 1.0)
    sf.write(str(path), data, audio.sample_rate, subtype=subtype, format="WAV")
    logging.info(f"Wrote {path}: {data.size} samples at {audio.sample_rate} Hz ({subtype})")
    return path
