"""Mono WAV read/write.

Accepts 32-bit float or 16-bit PCM input (multichannel files are reduced
to their first channel); output is always 32-bit float so quantization
cannot mask sub-1e-6 differences in round-trip checks.
"""
from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from .errors import SpecInvalidError
from .types import TimeSignal


def read_wav(path) -> TimeSignal:
    rate, data = wavfile.read(path)
    if data.ndim == 2:
        data = data[:, 0]
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise SpecInvalidError(f"unsupported WAV sample format {data.dtype}")
    return TimeSignal(samples, int(rate))


def write_wav(path, signal: TimeSignal) -> None:
    wavfile.write(path, signal.sample_rate_hz, signal.samples.astype(np.float32))
