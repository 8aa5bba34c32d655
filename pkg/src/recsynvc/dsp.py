"""Core signal processing: framing, STFT/ISTFT, mel filterbank, Griffin-Lim.

One fixed analysis chain is shared by the mel extractor, the cepstrum
computation, and the native vocoder so that analysis and resynthesis agree:
periodic Hann window, no center padding, magnitude spectra.
"""

from __future__ import annotations

import numpy as np


def hann_window(win_length: int) -> np.ndarray:
    """Periodic Hann window."""
    n = np.arange(win_length)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / win_length)


def frame_count(num_samples: int, win_length: int, hop_length: int) -> int:
    """Frames of a left-aligned, non-centered analysis: floor((N - win)/hop) + 1."""
    if num_samples < win_length:
        return 0
    return (num_samples - win_length) // hop_length + 1


def frame_signal(samples: np.ndarray, win_length: int, hop_length: int) -> np.ndarray:
    """Slice a signal into overlapping frames, shape (T, win_length)."""
    n_frames = frame_count(samples.size, win_length, hop_length)
    idx = np.arange(win_length)[None, :] + hop_length * np.arange(n_frames)[:, None]
    return samples[idx]


def stft(samples: np.ndarray, win_length: int, hop_length: int) -> np.ndarray:
    """Complex STFT, shape (T, win_length // 2 + 1)."""
    frames = frame_signal(np.asarray(samples, dtype=np.float64), win_length, hop_length)
    return np.fft.rfft(frames * hann_window(win_length)[None, :], axis=1)


def istft(spectra: np.ndarray, win_length: int, hop_length: int) -> np.ndarray:
    """Least-squares inverse STFT by windowed overlap-add.

    Returns (T - 1) * hop + win samples; the caller trims to taste.
    """
    spectra = np.asarray(spectra)
    n_frames = spectra.shape[0]
    window = hann_window(win_length)
    frames = np.fft.irfft(spectra, n=win_length, axis=1) * window[None, :]
    out_len = (n_frames - 1) * hop_length + win_length
    out = np.zeros(out_len)
    wsum = np.zeros(out_len)
    wsq = window * window
    for t in range(n_frames):
        start = t * hop_length
        out[start:start + win_length] += frames[t]
        wsum[start:start + win_length] += wsq
    nonzero = wsum > 1e-11
    out[nonzero] /= wsum[nonzero]
    return out


def hz_to_mel(freq):
    return 2595.0 * np.log10(1.0 + np.asarray(freq, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate, win_length, n_mels, fmin, fmax) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, win_length // 2 + 1)."""
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.fft.rfftfreq(win_length, d=1.0 / sample_rate)
    fb = np.zeros((n_mels, freqs.size))
    for m in range(n_mels):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - lo) / max(center - lo, 1e-12)
        falling = (hi - freqs) / max(hi - center, 1e-12)
        fb[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def mel_center_frequencies(sample_rate, win_length, n_mels, fmin, fmax) -> np.ndarray:
    """Center frequency (Hz) of each triangular filter."""
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    return edges[1:-1]


def griffin_lim(magnitudes: np.ndarray, win_length: int, hop_length: int,
                n_iters: int = 32) -> np.ndarray:
    """Iterative phase reconstruction from a magnitude STFT (T, F).

    Starts from zero phase, so the result is deterministic.
    """
    magnitudes = np.asarray(magnitudes, dtype=np.float64)
    signal = istft(magnitudes.astype(np.complex128), win_length, hop_length)
    for _ in range(n_iters):
        spectra = stft(signal, win_length, hop_length)
        phases = spectra / np.maximum(np.abs(spectra), 1e-12)
        signal = istft(magnitudes * phases, win_length, hop_length)
    return signal
