"""Separation losses over spectrograms, magnitudes, and waveforms.

Twelve selectable kinds cover complex-domain regression (with and
without a magnitude term, before or after re-synthesis), time-domain
regression, magnitude-only and phase-only regression, and the
phase-sensitive target. Every kind reports an exact L1 value (mean over
elements, so scales are comparable across window/hop settings) and an
analytic gradient.

Gradients use the Charbonnier smoothing sqrt(d^2 + eps^2) of |d| with
eps = 1e-8, so they are defined everywhere; reported values stay exact
L1. The gradient of |z| at z = 0 is taken as 0.

Gradients with respect to complex spectrogram parameters are packed as
dL/dRe + 1j * dL/dIm.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigInvalidError, MissingTargetError, ShapeMismatchError
from .masks import psa_target
from .stft import istft_adjoint, istft_array, num_frames_for, stft_adjoint, stft_array
from .types import MagSpectrogram, Spectrogram, TimeSignal, phase_of

L1_SMOOTH_EPS = 1e-8


class LossTag(Enum):
    RI = "ri"
    RI_MAG = "ri+mag"
    RI_ISTFT = "ri-istft"
    RI_ISTFT_MAG = "ri-istft+mag"
    MAG_RI_ISTFT = "mag+ri-istft"
    RI_ISTFT_X0_MAG = "(ri-istft)x0+mag"
    WAV = "wav"
    WAV_MAG = "wav+mag"
    WAV_X0_MAG = "wavx0+mag"
    MSA = "msa"
    PSA = "psa"
    PHASE = "phase"


_X0_TAGS = frozenset({LossTag.RI_ISTFT_X0_MAG, LossTag.WAV_X0_MAG})

SPECTROGRAM_TAGS = frozenset(
    {
        LossTag.RI,
        LossTag.RI_MAG,
        LossTag.RI_ISTFT,
        LossTag.RI_ISTFT_MAG,
        LossTag.MAG_RI_ISTFT,
        LossTag.RI_ISTFT_X0_MAG,
        LossTag.PHASE,
    }
)
MAGNITUDE_TAGS = frozenset({LossTag.MSA, LossTag.PSA})
WAVEFORM_TAGS = frozenset({LossTag.WAV, LossTag.WAV_MAG, LossTag.WAV_X0_MAG})


@dataclass(frozen=True)
class LossKind:
    """Loss selector: tag plus weights on the time/complex and magnitude terms.

    time_weight defaults to 1, except for the x0 variants where it is
    fixed at 0 (passing a nonzero value there is an error).
    """

    tag: LossTag
    time_weight: float | None = None
    mag_weight: float = 1.0

    def __post_init__(self):
        tw = self.time_weight
        if tw is None:
            tw = 0.0 if self.tag in _X0_TAGS else 1.0
        tw = float(tw)
        mw = float(self.mag_weight)
        if not (np.isfinite(tw) and np.isfinite(mw)) or tw < 0 or mw < 0:
            raise ConfigInvalidError("loss weights must be finite and nonnegative")
        if self.tag in _X0_TAGS and tw != 0.0:
            raise ConfigInvalidError(f"{self.tag.value} fixes time_weight = 0")
        object.__setattr__(self, "time_weight", tw)
        object.__setattr__(self, "mag_weight", mw)


def all_loss_kinds() -> tuple[LossKind, ...]:
    return tuple(LossKind(tag) for tag in LossTag)


def parse_loss_tag(name: str) -> LossTag:
    for tag in LossTag:
        if tag.value == name:
            return tag
    raise ConfigInvalidError(f"unknown loss tag {name!r}")


@dataclass(frozen=True)
class LossValue:
    value: float
    gradient: np.ndarray | None = None


@dataclass(frozen=True)
class SourceTargets:
    """Reference bundle a loss may draw on: clean spectrogram/signal, mixture."""

    S: Spectrogram | None = None
    s: TimeSignal | None = None
    Y: Spectrogram | None = None


def _smooth_l1_grad(d: np.ndarray) -> np.ndarray:
    return d / np.sqrt(d * d + L1_SMOOTH_EPS**2)


def _unit(z: np.ndarray) -> np.ndarray:
    r = np.abs(z)
    return np.where(r > 0, z / np.where(r > 0, r, 1.0), 0.0 + 0.0j)


def _same_shape(a, b) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")


def _mag_term(est_data: np.ndarray, ref_mag: np.ndarray, weight: float, want_grad: bool):
    """weight * mean(||est| - ref_mag|) and its complex gradient."""
    d = np.abs(est_data) - ref_mag
    value = weight * float(np.mean(np.abs(d)))
    grad = None
    if want_grad:
        grad = weight * _smooth_l1_grad(d) * _unit(est_data) / d.size
    return value, grad


def loss_ri(
    est: Spectrogram,
    S: Spectrogram,
    time_weight: float = 1.0,
    want_grad: bool = False,
) -> LossValue:
    """Mean L1 over real and imaginary parts."""
    _same_shape(est.data, S.data)
    dr = est.data.real - S.data.real
    di = est.data.imag - S.data.imag
    count = dr.size
    value = time_weight * float(np.mean(np.abs(dr)) + np.mean(np.abs(di)))
    grad = None
    if want_grad:
        grad = time_weight * (_smooth_l1_grad(dr) + 1j * _smooth_l1_grad(di)) / count
    return LossValue(value, grad)


def loss_ri_mag(
    est: Spectrogram,
    S: Spectrogram,
    time_weight: float = 1.0,
    mag_weight: float = 1.0,
    want_grad: bool = False,
) -> LossValue:
    """loss_ri plus a magnitude L1 term on |est| vs |S|."""
    base = loss_ri(est, S, time_weight, want_grad)
    mag_value, mag_grad = _mag_term(est.data, np.abs(S.data), mag_weight, want_grad)
    grad = None if not want_grad else base.gradient + mag_grad
    return LossValue(base.value + mag_value, grad)


def _check_istft_shapes(est: Spectrogram, s: TimeSignal) -> None:
    expect = num_frames_for(len(s), est.config)
    if est.num_frames != expect:
        raise ShapeMismatchError(
            f"estimate has {est.num_frames} frames, a {len(s)}-sample target implies {expect}"
        )


def loss_ri_istft(
    est: Spectrogram,
    s: TimeSignal,
    time_weight: float = 1.0,
    want_grad: bool = False,
) -> LossValue:
    """Mean L1 in the time domain after inverting the estimated spectrogram."""
    _check_istft_shapes(est, s)
    cfg = est.config
    e = istft_array(est.data, cfg, len(s)) - s.samples
    value = time_weight * float(np.mean(np.abs(e)))
    grad = None
    if want_grad:
        g_time = time_weight * _smooth_l1_grad(e) / e.size
        grad = istft_adjoint(g_time, cfg, est.num_frames)
    return LossValue(value, grad)


def loss_ri_istft_mag(
    est: Spectrogram,
    s: TimeSignal,
    S: Spectrogram,
    time_weight: float = 1.0,
    mag_weight: float = 1.0,
    want_grad: bool = False,
) -> LossValue:
    """Time-domain L1 plus a magnitude L1 on the re-analyzed inverse.

    The magnitude term compares |STFT(iSTFT(est))| (the consistency
    projection of the estimate) against |S|, so it scores the magnitude
    of the signal actually produced.
    """
    _check_istft_shapes(est, s)
    _same_shape(est.data, S.data)
    cfg = est.config
    n = len(s)
    y_hat = istft_array(est.data, cfg, n)
    e = y_hat - s.samples
    proj = stft_array(y_hat, cfg)
    dm = np.abs(proj) - np.abs(S.data)
    value = time_weight * float(np.mean(np.abs(e))) + mag_weight * float(
        np.mean(np.abs(dm))
    )
    grad = None
    if want_grad:
        g_time = time_weight * _smooth_l1_grad(e) / e.size
        cot_proj = mag_weight * _smooth_l1_grad(dm) * _unit(proj) / dm.size
        g_time = g_time + stft_adjoint(cot_proj, cfg, n)
        grad = istft_adjoint(g_time, cfg, est.num_frames)
    return LossValue(value, grad)


def loss_mag_ri_istft(
    est: Spectrogram,
    s: TimeSignal,
    S: Spectrogram,
    time_weight: float = 1.0,
    mag_weight: float = 1.0,
    want_grad: bool = False,
) -> LossValue:
    """Magnitude L1 taken on the raw estimate (before inversion) plus time L1."""
    _same_shape(est.data, S.data)
    base = loss_ri_istft(est, s, time_weight, want_grad)
    mag_value, mag_grad = _mag_term(est.data, np.abs(S.data), mag_weight, want_grad)
    grad = None if not want_grad else base.gradient + mag_grad
    return LossValue(base.value + mag_value, grad)


def loss_wav(
    est: TimeSignal,
    s: TimeSignal,
    time_weight: float = 1.0,
    want_grad: bool = False,
) -> LossValue:
    """Mean L1 between waveforms."""
    if len(est) != len(s):
        raise ShapeMismatchError(f"length mismatch: {len(est)} vs {len(s)}")
    e = est.samples - s.samples
    value = time_weight * float(np.mean(np.abs(e)))
    grad = None
    if want_grad:
        grad = time_weight * _smooth_l1_grad(e) / e.size
    return LossValue(value, grad)


def loss_wav_mag(
    est: TimeSignal,
    s: TimeSignal,
    S: Spectrogram,
    time_weight: float = 1.0,
    mag_weight: float = 1.0,
    want_grad: bool = False,
) -> LossValue:
    """Waveform L1 plus a magnitude L1 on |STFT(est)| vs |S|."""
    if len(est) != len(s):
        raise ShapeMismatchError(f"length mismatch: {len(est)} vs {len(s)}")
    cfg = S.config
    X_hat = stft_array(est.samples, cfg)
    _same_shape(X_hat, S.data)
    e = est.samples - s.samples
    dm = np.abs(X_hat) - np.abs(S.data)
    value = time_weight * float(np.mean(np.abs(e))) + mag_weight * float(
        np.mean(np.abs(dm))
    )
    grad = None
    if want_grad:
        cot = mag_weight * _smooth_l1_grad(dm) * _unit(X_hat) / dm.size
        grad = time_weight * _smooth_l1_grad(e) / e.size + stft_adjoint(
            cot, cfg, len(est)
        )
    return LossValue(value, grad)


def loss_msa(
    est: MagSpectrogram,
    S: Spectrogram,
    mag_weight: float = 1.0,
    want_grad: bool = False,
) -> LossValue:
    """Mean L1 between an estimated magnitude and |S|."""
    _same_shape(est.data, S.data)
    d = est.data - np.abs(S.data)
    value = mag_weight * float(np.mean(np.abs(d)))
    grad = None
    if want_grad:
        grad = mag_weight * _smooth_l1_grad(d) / d.size
    return LossValue(value, grad)


def loss_psa(
    est: MagSpectrogram,
    S: Spectrogram,
    Y: Spectrogram,
    mag_weight: float = 1.0,
    want_grad: bool = False,
) -> LossValue:
    """Mean L1 against the truncated phase-sensitive magnitude target."""
    _same_shape(est.data, S.data)
    d = est.data - psa_target(S, Y).data
    value = mag_weight * float(np.mean(np.abs(d)))
    grad = None
    if want_grad:
        grad = mag_weight * _smooth_l1_grad(d) / d.size
    return LossValue(value, grad)


def loss_phase(
    est: Spectrogram,
    S: Spectrogram,
    time_weight: float = 1.0,
    want_grad: bool = False,
) -> LossValue:
    """L1 between |S| e^{j angle(est)} and S over RI parts.

    The oracle magnitude |S| is supplied, so the value depends on the
    estimate only through its phase and the gradient flows only through
    angle(est); it vanishes at zero-magnitude estimate bins.
    """
    _same_shape(est.data, S.data)
    mag_ref = np.abs(S.data)
    theta = phase_of(est)
    p_re = mag_ref * np.cos(theta)
    p_im = mag_ref * np.sin(theta)
    d_re = p_re - S.data.real
    d_im = p_im - S.data.imag
    count = d_re.size
    value = time_weight * float(np.mean(np.abs(d_re)) + np.mean(np.abs(d_im)))
    grad = None
    if want_grad:
        dl_dtheta = (
            time_weight
            * (_smooth_l1_grad(d_re) * (-p_im) + _smooth_l1_grad(d_im) * p_re)
            / count
        )
        rho2 = est.data.real**2 + est.data.imag**2
        safe = np.where(rho2 > 0, rho2, 1.0)
        grad = np.where(
            rho2 > 0,
            dl_dtheta * (-est.data.imag + 1j * est.data.real) / safe,
            0.0 + 0.0j,
        )
    return LossValue(value, grad)


def _require(targets: SourceTargets, kind: LossKind, *names: str):
    out = []
    for name in names:
        val = getattr(targets, name)
        if val is None:
            raise MissingTargetError(f"loss {kind.tag.value} requires target {name!r}")
        out.append(val)
    return out


def evaluate_loss(
    kind: LossKind,
    estimate: Spectrogram | MagSpectrogram | TimeSignal,
    targets: SourceTargets,
    want_grad: bool = False,
) -> LossValue:
    """Route a LossKind to its implementation.

    The estimate's domain must match the kind: Spectrogram for the
    complex/consistency/phase kinds, MagSpectrogram for msa/psa,
    TimeSignal for the waveform kinds.
    """
    tag, tw, mw = kind.tag, kind.time_weight, kind.mag_weight
    if tag in SPECTROGRAM_TAGS and not isinstance(estimate, Spectrogram):
        raise MissingTargetError(f"loss {tag.value} expects a Spectrogram estimate")
    if tag in MAGNITUDE_TAGS and not isinstance(estimate, MagSpectrogram):
        raise MissingTargetError(f"loss {tag.value} expects a MagSpectrogram estimate")
    if tag in WAVEFORM_TAGS and not isinstance(estimate, TimeSignal):
        raise MissingTargetError(f"loss {tag.value} expects a TimeSignal estimate")

    if tag is LossTag.RI:
        (S,) = _require(targets, kind, "S")
        return loss_ri(estimate, S, tw, want_grad)
    if tag is LossTag.RI_MAG:
        (S,) = _require(targets, kind, "S")
        return loss_ri_mag(estimate, S, tw, mw, want_grad)
    if tag is LossTag.RI_ISTFT:
        (s,) = _require(targets, kind, "s")
        return loss_ri_istft(estimate, s, tw, want_grad)
    if tag in (LossTag.RI_ISTFT_MAG, LossTag.RI_ISTFT_X0_MAG):
        s, S = _require(targets, kind, "s", "S")
        return loss_ri_istft_mag(estimate, s, S, tw, mw, want_grad)
    if tag is LossTag.MAG_RI_ISTFT:
        s, S = _require(targets, kind, "s", "S")
        return loss_mag_ri_istft(estimate, s, S, tw, mw, want_grad)
    if tag is LossTag.WAV:
        (s,) = _require(targets, kind, "s")
        return loss_wav(estimate, s, tw, want_grad)
    if tag in (LossTag.WAV_MAG, LossTag.WAV_X0_MAG):
        s, S = _require(targets, kind, "s", "S")
        return loss_wav_mag(estimate, s, S, tw, mw, want_grad)
    if tag is LossTag.MSA:
        (S,) = _require(targets, kind, "S")
        return loss_msa(estimate, S, mw, want_grad)
    if tag is LossTag.PSA:
        S, Y = _require(targets, kind, "S", "Y")
        return loss_psa(estimate, S, Y, mw, want_grad)
    if tag is LossTag.PHASE:
        (S,) = _require(targets, kind, "S")
        return loss_phase(estimate, S, tw, want_grad)
    raise ConfigInvalidError(f"unhandled loss tag {tag}")


def pit_wrap(
    kind: LossKind,
    estimates,
    targets,
) -> tuple[LossValue, tuple[int, int]]:
    """Permutation-invariant wrapper for exactly two sources.

    The loss of an assignment is the mean of the two per-source losses;
    both assignments are evaluated and the smaller one is returned along
    with its permutation (estimate index -> target index).
    """
    if len(estimates) != 2 or len(targets) != 2:
        raise ShapeMismatchError("pit_wrap handles exactly 2 estimates and 2 targets")
    best_value = None
    best_perm = None
    for perm in ((0, 1), (1, 0)):
        total = 0.0
        for est_idx, tgt_idx in enumerate(perm):
            total += evaluate_loss(kind, estimates[est_idx], targets[tgt_idx]).value
        value = total / 2.0
        if best_value is None or value < best_value:
            best_value = value
            best_perm = perm
    return LossValue(best_value), best_perm
