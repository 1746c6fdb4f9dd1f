"""Signal chain from a raw bilateral recording to segmented whole-body CoP series.

The chain (all defaults match the measurement protocol):

1. zero-phase 4th-order Butterworth low-pass at 10 Hz on each of the six
   raw channels,
2. force-weighted fusion of the left/right CoP into a whole-body CoP,
   assuming the insoles stand parallel with their medial edges 10 mm
   apart (lateral center offset = width/2 + 5 mm),
3. zero-phase low-pass at 5 Hz on the fused coordinates,
4. Savitzky-Golay first derivatives (order 3, window 5) giving velocity
   and speed channels,
5. sliding-window segmentation: 150 frames long, 50-frame stride.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .errors import ParameterError, TooShortError, ValidationError
from .recording import RawRecording

#: Segment geometry (frames at the nominal 50 Hz: 3 s windows, 1 s apart).
SEGMENT_FRAMES = 150
SEGMENT_STRIDE = 50

#: The only supported acquisition rate; other rates are rejected, not resampled.
NOMINAL_RATE = 50.0


@dataclass(frozen=True)
class CopSeries:
    """Fused whole-body CoP trajectory with velocity and speed channels.

    Positions in mm, velocities/speed in mm/s; all channels equal length
    and finite, with ``speed == hypot(v_ml, v_ap)``.
    """

    sample_rate: float
    ml: np.ndarray
    ap: np.ndarray
    v_ml: np.ndarray
    v_ap: np.ndarray
    speed: np.ndarray

    def __post_init__(self):
        n = len(self.ml)
        for name in ("ap", "v_ml", "v_ap", "speed"):
            if len(getattr(self, name)) != n:
                raise ValidationError("CopSeries channels must have equal lengths")
        for name in ("ml", "ap", "v_ml", "v_ap", "speed"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"CopSeries channel {name} contains non-finite values")
        expected = np.hypot(self.v_ml, self.v_ap)
        scale = np.maximum(np.abs(expected), 1.0)
        if np.any(np.abs(self.speed - expected) > 1e-9 * scale):
            raise ValidationError("speed channel inconsistent with velocity channels")

    def __len__(self):
        return len(self.ml)

    def window(self, start: int, length: int) -> "CopSeries":
        sl = slice(start, start + length)
        return CopSeries(self.sample_rate, self.ml[sl], self.ap[sl],
                         self.v_ml[sl], self.v_ap[sl], self.speed[sl])


@dataclass(frozen=True)
class Segment:
    """One fixed-length analysis window of a subject's CoP series."""

    subject_id: str
    index: int
    series: CopSeries

    def __post_init__(self):
        if len(self.series) != SEGMENT_FRAMES:
            raise ValidationError(
                f"segment must be exactly {SEGMENT_FRAMES} frames, got {len(self.series)}")


def butterworth_lowpass(x, cutoff: float, fs: float, order: int = 4) -> np.ndarray:
    """Zero-phase Butterworth low-pass (forward-backward application).

    Uses reflective padding of ``3 * (order + 1)`` samples per end. The
    forward-backward pass squares the single-pass magnitude response, so
    the gain at the cutoff is 0.5 and DC passes exactly.
    """
    x = np.asarray(x, dtype=float)
    if not 0.0 < cutoff < fs / 2.0:
        raise ParameterError(f"cutoff {cutoff} Hz must lie in (0, fs/2) = (0, {fs / 2})")
    padlen = 3 * (order + 1)
    if len(x) <= padlen:
        raise TooShortError(f"need more than {padlen} samples to filter, got {len(x)}")
    b, a = signal.butter(order, cutoff, btype="low", fs=fs)
    return signal.filtfilt(b, a, x, padtype="even", padlen=padlen)


def fuse_bilateral_cop(rec: RawRecording, cutoff: float = 10.0,
                       medial_gap_mm: float = 10.0):
    """Fuse the two insoles' local CoP into whole-body (ml, ap) series.

    All six channels are low-pass filtered at `cutoff` first; the fused
    coordinate is then the force-weighted average of the per-foot CoP,
    with each insole's local origin shifted laterally by
    ``rec.insole_width / 2 + medial_gap_mm / 2`` (left negative, right
    positive). Frames whose filtered total force is zero are filled by
    linear interpolation from neighbouring frames.
    """
    fs = rec.sample_rate
    l_ml = butterworth_lowpass(rec.l_ml, cutoff, fs)
    l_ap = butterworth_lowpass(rec.l_ap, cutoff, fs)
    r_ml = butterworth_lowpass(rec.r_ml, cutoff, fs)
    r_ap = butterworth_lowpass(rec.r_ap, cutoff, fs)
    f_l = butterworth_lowpass(rec.l_force, cutoff, fs)
    f_r = butterworth_lowpass(rec.r_force, cutoff, fs)

    offset = rec.insole_width / 2.0 + medial_gap_mm / 2.0
    total = f_l + f_r
    good = total != 0.0
    if not np.any(good):
        raise ValidationError(f"subject {rec.subject.id}: zero total force everywhere, "
                              "fused CoP undefined")

    ml = np.empty_like(total)
    ap = np.empty_like(total)
    ml[good] = (f_l[good] * (l_ml[good] - offset) + f_r[good] * (r_ml[good] + offset)) / total[good]
    ap[good] = (f_l[good] * l_ap[good] + f_r[good] * r_ap[good]) / total[good]
    if not np.all(good):
        idx = np.arange(len(total))
        ml[~good] = np.interp(idx[~good], idx[good], ml[good])
        ap[~good] = np.interp(idx[~good], idx[good], ap[good])
    return ml, ap


def savitzky_golay_derivative(x, fs: float, order: int = 3, window: int = 5) -> np.ndarray:
    """First derivative via least-squares polynomial fit over a centered window.

    Edge samples are handled by fitting the polynomial on the first/last
    full window and evaluating its derivative there, so polynomials up to
    `order` differentiate exactly along the whole series.
    """
    x = np.asarray(x, dtype=float)
    if len(x) < window:
        raise TooShortError(f"need at least {window} samples, got {len(x)}")
    if window % 2 == 0 or order >= window:
        raise ParameterError("window must be odd and larger than the polynomial order")
    return signal.savgol_filter(x, window_length=window, polyorder=order,
                                deriv=1, delta=1.0 / fs, mode="interp")


def preprocess_recording(rec: RawRecording, noise_cutoff: float = 10.0,
                         smooth_cutoff: float = 5.0, sg_order: int = 3,
                         sg_window: int = 5, medial_gap_mm: float = 10.0) -> CopSeries:
    """Full chain: filter, fuse, smooth, differentiate.

    Only 50 Hz recordings are accepted; other rates are rejected rather
    than resampled.
    """
    if rec.sample_rate != NOMINAL_RATE:
        raise ParameterError(
            f"subject {rec.subject.id}: sample rate {rec.sample_rate} Hz unsupported "
            f"(only {NOMINAL_RATE} Hz; resampling is out of scope)")
    fs = rec.sample_rate
    ml_raw, ap_raw = fuse_bilateral_cop(rec, cutoff=noise_cutoff,
                                        medial_gap_mm=medial_gap_mm)
    ml = butterworth_lowpass(ml_raw, smooth_cutoff, fs)
    ap = butterworth_lowpass(ap_raw, smooth_cutoff, fs)
    v_ml = savitzky_golay_derivative(ml, fs, order=sg_order, window=sg_window)
    v_ap = savitzky_golay_derivative(ap, fs, order=sg_order, window=sg_window)
    speed = np.hypot(v_ml, v_ap)
    return CopSeries(fs, ml, ap, v_ml, v_ap, speed)


def segment_series(series: CopSeries, window: int = SEGMENT_FRAMES,
                   stride: int = SEGMENT_STRIDE, subject_id: str = "") -> list:
    """Cut a series into overlapping fixed-length segments.

    Segments start at offsets 0, stride, 2*stride, ...; a trailing partial
    window is discarded. Count = floor((len - window) / stride) + 1.
    """
    n = len(series)
    if n < window:
        raise TooShortError(f"series of {n} frames is shorter than one {window}-frame window")
    count = (n - window) // stride + 1
    return [Segment(subject_id, k, series.window(k * stride, window))
            for k in range(count)]


def segment_recording(rec: RawRecording, **preprocess_kwargs) -> list:
    """Convenience: preprocess a recording and segment it, tagging segments
    with the subject id."""
    series = preprocess_recording(rec, **preprocess_kwargs)
    return segment_series(series, subject_id=rec.subject.id)


def dump_cop_series(series: CopSeries, path, header_lines=()) -> None:
    """Debug CSV of the fused/smoothed channels: frame,ml_mm,ap_mm,v_ml,v_ap,speed."""
    lines = [f"# {h}" for h in header_lines]
    lines.append("frame,ml_mm,ap_mm,v_ml,v_ap,speed")
    for i in range(len(series)):
        lines.append(f"{i},{series.ml[i]:.8g},{series.ap[i]:.8g},"
                     f"{series.v_ml[i]:.8g},{series.v_ap[i]:.8g},{series.speed[i]:.8g}")
    Path(path).write_text("\n".join(lines) + "\n")
