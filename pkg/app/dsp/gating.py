"""
Gates that decide where harmonic compensation may act: voiced-region
detection from significance, energy labels, their product, and the causal
smoothing stencil applied before compensation.
"""

import logging
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from app.core.errors import InputFormatError, NumericError, ShapeError

LOG_FLOOR = 1e-8
XI_DECAY = 0.9


# --- Domain types ---
@dataclass(frozen=True)
class VrdState:
    """
    Moving average xi of per-frame maximum significance. `xi` is None until the
    first utterance has been processed.
    """
    xi: Optional[float] = None
    alpha: float = 0.4

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise NumericError(f"VRD alpha must lie in (0, 1], got {self.alpha}")
        if self.xi is not None and self.xi < 0:
            raise NumericError(f"VRD xi must be nonnegative, got {self.xi}")

    def save(self, path: Path) -> None:
        """Write `xi=` / `alpha=` lines atomically (temp file + rename)."""
        path = Path(path)
        text = f"xi={'' if self.xi is None else repr(float(self.xi))}\nalpha={self.alpha!r}\n"
        fd, tmp_name = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(text)
            os.replace(tmp_name, path)
        except OSError:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
        logging.info(f"Saved VRD state to {path}: {text.strip()!r}")

    @classmethod
    def load(cls, path: Path, alpha: float = 0.4) -> "VrdState":
        """Read a state file; a missing file yields a fresh state with `alpha`."""
        path = Path(path)
        if not path.exists():
            logging.warning(f"VRD state file {path} not found, starting from an uninitialised moving average.")
            return cls(None, alpha)
        fields = {}
        for line in path.read_text(encoding="utf-8").splitlines():
            key, sep, value = line.partition("=")
            if sep:
                fields[key.strip()] = value.strip()
        try:
            xi = float(fields["xi"]) if fields.get("xi") else None
            return cls(xi, float(fields.get("alpha", alpha)))
        except ValueError as e:
            raise InputFormatError(f"Malformed VRD state file {path}: {e}") from e


@dataclass(frozen=True)
class EnergyLabels:
    values: np.ndarray


@dataclass(frozen=True)
class GateMatrix:
    values: np.ndarray

    @property
    def density(self) -> float:
        return float(np.mean(self.values)) if self.values.size else 0.0


# --- Speech energy labels ---
def sed_labels(clean_mag: np.ndarray, floor: float = LOG_FLOOR) -> EnergyLabels:
    """
    1 where the log magnitude exceeds that bin's mean log magnitude over time.
    The comparison is strict; values equal to the mean up to rounding count as 0.
    """
    clean_mag = np.asarray(clean_mag, dtype=np.float64)
    if clean_mag.ndim != 2 or clean_mag.shape[0] == 0:
        raise ShapeError(f"energy labels need a non-empty T x F magnitude, got {clean_mag.shape}")
    if np.any(clean_mag < 0):
        raise NumericError("energy labels need nonnegative magnitudes")
    log_mag = np.log(np.maximum(clean_mag, floor))
    mu = log_mag.mean(axis=0, keepdims=True)
    above = (log_mag > mu) & ~np.isclose(log_mag, mu, rtol=1e-12, atol=1e-12)
    return EnergyLabels(above.astype(np.float64))


def oracle_sed(clean_mag: np.ndarray, floor: float = LOG_FLOOR) -> EnergyLabels:
    """Energy labels computed from the clean reference, standing in for a trained detector."""
    return sed_labels(clean_mag, floor)


# --- Voiced region detection ---
def vrd(q, state: VrdState) -> Tuple[np.ndarray, VrdState]:
    """
    Flag frame t as voiced iff max(Q_t) > alpha * xi_old, then update
    xi_new = 0.9 * xi_old + 0.1 * mean_t max(Q_t). An uninitialised state takes
    this utterance's own mean as xi_old.
    """
    values = np.asarray(getattr(q, "values", q), dtype=np.float64)
    if values.ndim != 2:
        raise ShapeError(f"VRD needs a T x candidates significance matrix, got {values.shape}")
    if values.shape[0] == 0:
        return np.zeros(0, dtype=bool), state

    frame_max = values.max(axis=1)
    utterance_mean = max(float(frame_max.mean()), 0.0)
    xi_old = utterance_mean if state.xi is None else state.xi
    flags = frame_max > state.alpha * xi_old
    new_state = replace(state, xi=XI_DECAY * xi_old + (1.0 - XI_DECAY) * utterance_mean)
    logging.debug(f"VRD: {int(flags.sum())}/{flags.size} voiced frames, xi {xi_old:.4g} -> {new_state.xi:.4g}")
    return flags, new_state


# --- Gate composition and smoothing ---
def compose_gate(vrd_flags: np.ndarray, r_a: EnergyLabels, r_h) -> GateMatrix:
    """G = R_VRD (broadcast over frequency) * R_A * R_H."""
    flags = np.asarray(vrd_flags, dtype=np.float64).reshape(-1)
    energy = np.asarray(getattr(r_a, "values", r_a), dtype=np.float64)
    harmonic = np.asarray(getattr(r_h, "values", r_h), dtype=np.float64)
    if energy.shape != harmonic.shape or energy.ndim != 2 or energy.shape[0] != flags.size:
        raise ShapeError(f"gate factors disagree: flags {flags.shape}, R_A {energy.shape}, R_H {harmonic.shape}")
    for name, factor in (("R_VRD", flags), ("R_A", energy), ("R_H", harmonic)):
        if np.any(factor < 0) or np.any(factor > 1):
            raise NumericError(f"{name} must lie in [0, 1]")
    return GateMatrix(flags[:, None] * energy * harmonic)


def validate_kernel(kernel: np.ndarray) -> np.ndarray:
    kernel = np.atleast_2d(np.asarray(kernel, dtype=np.float64))
    if kernel.ndim != 2 or kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
        raise NumericError(f"gate kernel must be a 2-D stencil with odd sides, got shape {kernel.shape}")
    if np.any(kernel < 0):
        raise NumericError("gate kernel weights must be nonnegative")
    # Rows below the centre would read future frames.
    if np.any(kernel[kernel.shape[0] // 2 + 1:] != 0):
        raise NumericError("gate kernel has taps on future frames")
    return kernel


def smooth_gate(gate, kernel: np.ndarray) -> np.ndarray:
    """
    Causal 2-D correlation of the gate with a centred stencil (rows = time
    offsets, columns = frequency offsets), zero outside the matrix, clamped to [0, 1].
    """
    values = np.asarray(getattr(gate, "values", gate), dtype=np.float64)
    kernel = validate_kernel(kernel)
    smoothed = ndimage.correlate(values, kernel, mode="constant", cval=0.0)
    return np.clip(smoothed, 0.0, 1.0)
