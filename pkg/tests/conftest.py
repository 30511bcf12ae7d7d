import sys
import os

# This adds the project root directory to the Python path.
# It allows tests to import modules from the 'app' directory as if they were run from the root.
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest

from app.dsp.spectral import AudioBuffer


# --- Synthetic signal factories ---
def harmonic_comb(f0, sample_rate=16000, duration_s=3.0, max_hz=8000.0, amplitude=0.05, seed=0):
    """Equal-amplitude harmonics of f0 strictly below max_hz, random but reproducible phases."""
    rng = np.random.default_rng(seed)
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    n_harmonics = int(np.ceil(max_hz / f0)) - 1
    phases = rng.uniform(0, 2 * np.pi, n_harmonics)
    signal = np.zeros_like(t)
    for k in range(1, n_harmonics + 1):
        signal += amplitude * np.cos(2 * np.pi * k * f0 * t + phases[k - 1])
    return signal


def white_noise_at_snr(signal, snr_db, seed=1):
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(signal.size)
    scale = np.sqrt(np.sum(signal ** 2) / (np.sum(noise ** 2) * 10 ** (snr_db / 10)))
    return noise * scale


@pytest.fixture
def comb():
    """Factory: comb(f0, **kwargs) -> AudioBuffer at 16 kHz."""
    def _make(f0, sample_rate=16000, **kwargs):
        return AudioBuffer(harmonic_comb(f0, sample_rate=sample_rate, **kwargs), sample_rate)
    return _make


@pytest.fixture
def noisy_pair():
    """Factory: noisy_pair(snr_db, seed) -> (noisy, clean) AudioBuffers, 1 s of amplitude-modulated comb speech."""
    def _make(snr_db=0.0, seed=0, f0=140.0, sample_rate=16000, duration_s=1.0):
        clean = harmonic_comb(f0, sample_rate=sample_rate, duration_s=duration_s, seed=seed)
        t = np.arange(clean.size) / sample_rate
        clean = clean * (0.6 + 0.4 * np.sin(2 * np.pi * 3.0 * t))
        noise = white_noise_at_snr(clean, snr_db, seed=seed + 1000)
        return AudioBuffer(clean + noise, sample_rate), AudioBuffer(clean, sample_rate)
    return _make


@pytest.fixture
def voiced_silence():
    """
    Factory: alternating voiced (150 Hz comb) and near-silent segments.
    Returns (AudioBuffer, per-sample voiced truth).
    """
    def _make(segment_s=0.5, n_segments=12, seed=0, sample_rate=16000):
        rng = np.random.default_rng(seed)
        seg = int(segment_s * sample_rate)
        voiced = harmonic_comb(150.0, sample_rate=sample_rate, duration_s=segment_s, amplitude=0.1, seed=seed)
        pieces, truth = [], []
        for i in range(n_segments):
            if i % 2 == 0:
                pieces.append(voiced)
                truth.append(np.ones(seg, dtype=bool))
            else:
                pieces.append(1e-3 * rng.standard_normal(seg))
                truth.append(np.zeros(seg, dtype=bool))
        return AudioBuffer(np.concatenate(pieces), sample_rate), np.concatenate(truth)
    return _make
