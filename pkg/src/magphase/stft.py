"""Forward/inverse STFT with exact round-trip reconstruction.

Layout: the input is zero-padded by (win - hop) samples on each side,
frames start every hop samples, and the frame count is
1 + ceil(num_samples / hop). Analysis uses a periodic square-root Hann
window; synthesis uses its least-squares canonical dual for the given
hop, so reconstruction is exact even for non-dyadic hop ratios
(e.g. 200/80). Overlap-add is renormalized by the actual per-sample
window overlap, which equals 1 in the fully-overlapped interior and
corrects the partially covered edge frames.

The module also exposes the adjoints of both linear maps (with respect
to the real inner product, complex matrices read as Re/Im pairs); loss
gradients that travel through an iSTFT or STFT are built on them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigInvalidError, ShapeMismatchError
from .types import (
    DEFAULT_SAMPLE_RATE_HZ,
    Spectrogram,
    StftConfig,
    TimeSignal,
    WindowKind,
    validate_signal,
    validate_spectrogram,
)

# Overlap weights below this are treated as uncovered (padding only).
_COVERAGE_TINY = 1e-12


@dataclass(frozen=True)
class WindowPair:
    """Analysis window and its canonical dual synthesis window.

    For hop H the pair satisfies sum_k analysis[n + k*H] * synthesis[n + k*H] = 1
    at every fully-overlapped position n.
    """

    analysis: np.ndarray
    synthesis: np.ndarray


def analysis_window(cfg: StftConfig) -> np.ndarray:
    if cfg.window_kind is not WindowKind.SQRT_HANN:
        raise ConfigInvalidError(f"unsupported window kind {cfg.window_kind}")
    n = np.arange(cfg.win_length_samples)
    return np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * n / cfg.win_length_samples))


def window_pair(cfg: StftConfig) -> WindowPair:
    """Analysis window plus least-squares canonical dual for cfg's hop."""
    w = analysis_window(cfg)
    hop = cfg.hop_length_samples
    lattice = np.zeros(hop)
    for r in range(hop):
        lattice[r] = np.sum(w[r::hop] ** 2)
    if np.any(lattice <= _COVERAGE_TINY):
        raise ConfigInvalidError(
            "window/hop combination has zero overlap power; reconstruction impossible"
        )
    synthesis = w / lattice[np.arange(cfg.win_length_samples) % hop]
    return WindowPair(analysis=w, synthesis=synthesis)


def num_frames_for(num_samples: int, cfg: StftConfig) -> int:
    return 1 + math.ceil(num_samples / cfg.hop_length_samples)


def _edge_pad(cfg: StftConfig) -> int:
    return cfg.win_length_samples - cfg.hop_length_samples


def _buffer_len(num_frames: int, cfg: StftConfig) -> int:
    return (num_frames - 1) * cfg.hop_length_samples + cfg.win_length_samples


def _coverage(num_frames: int, cfg: StftConfig, pair: WindowPair) -> np.ndarray:
    wd = pair.analysis * pair.synthesis
    cov = np.zeros(_buffer_len(num_frames, cfg))
    hop = cfg.hop_length_samples
    for t in range(num_frames):
        cov[t * hop : t * hop + cfg.win_length_samples] += wd
    return cov


def stft(x: TimeSignal, cfg: StftConfig) -> Spectrogram:
    """One-sided STFT, fft_size//2 + 1 bins, unscaled forward DFT."""
    validate_signal(x)
    data = stft_array(x.samples, cfg)
    return Spectrogram(data, cfg)


def stft_array(samples: np.ndarray, cfg: StftConfig) -> np.ndarray:
    wl, hop = cfg.win_length_samples, cfg.hop_length_samples
    n = samples.shape[0]
    frames = num_frames_for(n, cfg)
    buf = np.zeros(_buffer_len(frames, cfg))
    pad = _edge_pad(cfg)
    buf[pad : pad + n] = samples
    segs = sliding_window_view(buf, wl)[::hop]
    assert segs.shape[0] == frames
    w = analysis_window(cfg)
    return np.fft.rfft(segs * w, n=cfg.fft_size, axis=1)


def istft(
    X: Spectrogram,
    out_len: int,
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ,
) -> TimeSignal:
    """Weighted overlap-add inverse, trimmed/zero-padded to out_len samples.

    sample_rate_hz only labels the output container.
    """
    validate_spectrogram(X)
    return TimeSignal(istft_array(X.data, X.config, out_len), sample_rate_hz)


def istft_array(data: np.ndarray, cfg: StftConfig, out_len: int) -> np.ndarray:
    if data.shape[1] != cfg.num_bins:
        raise ShapeMismatchError(
            f"spectrogram has {data.shape[1]} bins, config implies {cfg.num_bins}"
        )
    if out_len < 0:
        raise ShapeMismatchError("out_len must be nonnegative")
    frames, wl, hop = data.shape[0], cfg.win_length_samples, cfg.hop_length_samples
    pair = window_pair(cfg)
    segs = np.fft.irfft(data, n=cfg.fft_size, axis=1)[:, :wl] * pair.synthesis
    buf = np.zeros(_buffer_len(frames, cfg))
    for t in range(frames):  # fixed frame order keeps the sum deterministic
        buf[t * hop : t * hop + wl] += segs[t]
    cov = _coverage(frames, cfg, pair)
    covered = cov > _COVERAGE_TINY
    buf[covered] /= cov[covered]
    buf[~covered] = 0.0
    pad = _edge_pad(cfg)
    out = np.zeros(out_len)
    avail = min(out_len, buf.shape[0] - pad)
    out[:avail] = buf[pad : pad + avail]
    return out


def consistency_project(X: Spectrogram, out_len: int | None = None) -> Spectrogram:
    """STFT(iSTFT(X)): projection onto the set of consistent spectrograms.

    out_len defaults to (num_frames - 1) * hop; any out_len whose frame
    count matches X keeps the projection shape-preserving (and therefore
    idempotent).
    """
    validate_spectrogram(X)
    cfg = X.config
    if out_len is None:
        out_len = (X.num_frames - 1) * cfg.hop_length_samples
    if num_frames_for(out_len, cfg) != X.num_frames:
        raise ShapeMismatchError(
            f"out_len {out_len} implies {num_frames_for(out_len, cfg)} frames, "
            f"spectrogram has {X.num_frames}"
        )
    return Spectrogram(stft_array(istft_array(X.data, cfg, out_len), cfg), cfg)


def istft_adjoint(g_time: np.ndarray, cfg: StftConfig, num_frames: int) -> np.ndarray:
    """Adjoint of istft_array(., cfg, len(g_time)) for a fixed frame count.

    Maps a time-domain cotangent to a complex [frames x bins] cotangent,
    complex entries packed as dL/dRe + 1j * dL/dIm.
    """
    wl, hop, nfft = cfg.win_length_samples, cfg.hop_length_samples, cfg.fft_size
    pair = window_pair(cfg)
    cov = _coverage(num_frames, cfg, pair)
    buf = np.zeros(cov.shape[0])
    pad = _edge_pad(cfg)
    avail = min(g_time.shape[0], buf.shape[0] - pad)
    buf[pad : pad + avail] = g_time[:avail]
    covered = cov > _COVERAGE_TINY
    buf[covered] /= cov[covered]
    buf[~covered] = 0.0
    segs = np.zeros((num_frames, nfft))
    for t in range(num_frames):
        segs[t, :wl] = buf[t * hop : t * hop + wl] * pair.synthesis
    spec = np.fft.rfft(segs, n=nfft, axis=1)
    # Adjoint of irfft: interior bins carry weight 2/N (they stand for a
    # conjugate pair), DC and Nyquist carry 1/N with no imaginary part.
    scale = np.full(cfg.num_bins, 2.0 / nfft)
    scale[0] = 1.0 / nfft
    if nfft % 2 == 0:
        scale[-1] = 1.0 / nfft
    g_spec = spec * scale
    g_spec[:, 0] = g_spec[:, 0].real
    if nfft % 2 == 0:
        g_spec[:, -1] = g_spec[:, -1].real
    return g_spec


def stft_adjoint(g_spec: np.ndarray, cfg: StftConfig, out_len: int) -> np.ndarray:
    """Adjoint of stft_array(., cfg) for an input of out_len samples."""
    wl, hop, nfft = cfg.win_length_samples, cfg.hop_length_samples, cfg.fft_size
    frames = g_spec.shape[0]
    # Adjoint of rfft: unpack the one-sided cotangent (irfft halves the
    # interior bins and drops Im at DC/Nyquist, exactly matching the
    # forward map's sensitivities).
    c = np.full(cfg.num_bins, 0.5)
    c[0] = 1.0
    if nfft % 2 == 0:
        c[-1] = 1.0
    segs = np.fft.irfft(g_spec * c, n=nfft, axis=1) * nfft
    w = analysis_window(cfg)
    buf = np.zeros(_buffer_len(frames, cfg))
    for t in range(frames):
        buf[t * hop : t * hop + wl] += segs[t, :wl] * w
    pad = _edge_pad(cfg)
    out = np.zeros(out_len)
    avail = min(out_len, buf.shape[0] - pad)
    out[:avail] = buf[pad : pad + avail]
    return out
