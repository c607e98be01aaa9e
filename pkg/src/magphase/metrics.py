"""Evaluation metrics: SI-SDR, plain SNR, magnitude SNR, phase SNR.

All return dB. A perfect estimate yields +inf, which serializes as the
literal string "inf"; results are never NaN.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    LengthMismatchError,
    ShapeMismatchError,
    SilentReferenceError,
    ZeroSignalError,
)
from .types import MagSpectrogram, Spectrogram, TimeSignal, phase_of

# Energy ratios whose denominator falls below this yield +inf instead of
# overflowing the log.
_DENOM_FLOOR = 1e-300


def _ratio_db(num: float, den: float) -> float:
    if den < _DENOM_FLOOR:
        return math.inf
    return 10.0 * math.log10(num / den)


def si_sdr(est: TimeSignal, ref: TimeSignal) -> float:
    """Scale-invariant signal-to-distortion ratio in dB.

    The reference is rescaled by its least-squares gain
    a = <ref, est> / <ref, ref> before the error ratio
    10*log10(||a*ref||^2 / ||a*ref - est||^2) is taken, which makes the
    result invariant to any nonzero rescaling of the estimate.
    """
    s = ref.samples
    e = est.samples
    if len(s) != len(e):
        raise LengthMismatchError(f"length mismatch: {len(e)} vs {len(s)}")
    ref_energy = float(np.dot(s, s))
    if ref_energy == 0.0:
        raise ZeroSignalError("reference signal is all-zero")
    if float(np.dot(e, e)) == 0.0:
        raise ZeroSignalError("estimate signal is all-zero")
    alpha = float(np.dot(s, e)) / ref_energy
    target = alpha * s
    num = float(np.dot(target, target))
    err = target - e
    return _ratio_db(num, float(np.dot(err, err)))


def snr(est: TimeSignal, ref: TimeSignal) -> float:
    """Plain SNR: 10*log10(||ref||^2 / ||ref - est||^2)."""
    s = ref.samples
    e = est.samples
    if len(s) != len(e):
        raise LengthMismatchError(f"length mismatch: {len(e)} vs {len(s)}")
    num = float(np.dot(s, s))
    if num == 0.0:
        raise ZeroSignalError("reference signal is all-zero")
    err = s - e
    return _ratio_db(num, float(np.dot(err, err)))


def _as_magnitude(est: Spectrogram | MagSpectrogram) -> np.ndarray:
    if isinstance(est, MagSpectrogram):
        return est.data
    return np.abs(est.data)


def msnr(est: Spectrogram | MagSpectrogram, S: Spectrogram) -> float:
    """Magnitude SNR: 10*log10(sum |S|^2 / sum (|S| - |est|)^2)."""
    mag_est = _as_magnitude(est)
    mag_ref = np.abs(S.data)
    if mag_est.shape != mag_ref.shape:
        raise ShapeMismatchError(f"shape mismatch: {mag_est.shape} vs {mag_ref.shape}")
    num = float(np.sum(mag_ref**2))
    if num == 0.0:
        raise SilentReferenceError("reference spectrogram has zero energy")
    den = float(np.sum((mag_ref - mag_est) ** 2))
    return _ratio_db(num, den)


def psnr(est: Spectrogram, S: Spectrogram) -> float:
    """Phase SNR: the oracle magnitude |S| is attached to the estimated phase.

    10*log10(sum |S|^2 / sum |S - |S| e^{j angle(est)}|^2). The
    denominator is evaluated through the identity
    |S - |S| e^{j t}|^2 = 2 |S|^2 (1 - cos(angle(S) - t)), which is exact
    when the two phases agree bitwise; the direct complex form would
    leave ~1 ulp of rounding and turn a perfect estimate's +inf into a
    merely large number. Bins with |S| = 0 contribute zero to both sums,
    so the estimated phase there is irrelevant.
    """
    if est.data.shape != S.data.shape:
        raise ShapeMismatchError(f"shape mismatch: {est.data.shape} vs {S.data.shape}")
    mag2 = np.abs(S.data) ** 2
    num = float(np.sum(mag2))
    if num == 0.0:
        raise SilentReferenceError("reference spectrogram has zero energy")
    delta = phase_of(S) - phase_of(est)
    den = float(np.sum(2.0 * mag2 * (1.0 - np.cos(delta))))
    return _ratio_db(num, den)


def format_db(value: float) -> str:
    """'inf'/'-inf' literals for infinities, else 4 decimal places."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.4f}"


@dataclass(frozen=True)
class MetricReport:
    """Bundle of the four metrics for one estimate/reference pair.

    si_sdr_db is -inf by convention when the estimate is silent (the
    metric itself is undefined there); the other fields are finite or
    +inf, never NaN.
    """

    si_sdr_db: float
    snr_db: float
    msnr_db: float
    psnr_db: float
    metadata: dict = field(default_factory=dict)

    _KEYS = ("si_sdr_db", "snr_db", "msnr_db", "psnr_db")

    def as_dict(self) -> dict:
        """JSON-ready mapping; infinities become 'inf'/'-inf' strings."""
        out = {}
        for k in self._KEYS:
            v = getattr(self, k)
            out[k] = format_db(v) if math.isinf(v) else v
        if self.metadata:
            out["metadata"] = dict(self.metadata)
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def csv_header(self) -> str:
        return ",".join(self._KEYS)

    def csv_row(self) -> str:
        return ",".join(format_db(getattr(self, k)) for k in self._KEYS)


def report(
    est: TimeSignal,
    ref: TimeSignal,
    est_spec: Spectrogram,
    ref_spec: Spectrogram,
    metadata: dict | None = None,
) -> MetricReport:
    """Compute all four metrics; a silent estimate reports si_sdr_db = -inf."""
    try:
        si = si_sdr(est, ref)
    except ZeroSignalError:
        if float(np.dot(ref.samples, ref.samples)) == 0.0:
            raise
        si = -math.inf
    return MetricReport(
        si_sdr_db=si,
        snr_db=snr(est, ref),
        msnr_db=msnr(est_spec, ref_spec),
        psnr_db=psnr(est_spec, ref_spec),
        metadata=metadata or {},
    )
