"""SALSA feature extraction for 4-channel FOA audio.

The feature stacks 4 log-linear spectrogram channels (W, Y, Z, X) on top of
3 intensity channels (I_x, I_y, I_z) derived from the principal eigenvector
of a locally smoothed spatial covariance matrix, giving a (7, 200, T)
tensor. Per-channel-frequency standardization lives here too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal.windows import hann

from .dataset_io import MultichannelClip, read_feature_file, write_feature_file
from .errors import EmptyManifest, SeldkitError, ShapeMismatch, TooShort

STFT_WINDOW = 512
STFT_HOP = 300
N_FREQ_BINS = 200
SPEC_FLOOR = 1e-10

_EPS_EIGVEC = 1e-9


@dataclass(frozen=True)
class ComplexSpectrogram:
    """Windowed DFT of a clip: bins is (4, window_len/2+1, T) complex."""

    bins: np.ndarray
    window_len: int = STFT_WINDOW
    hop: int = STFT_HOP


@dataclass(frozen=True)
class NormStats:
    """Per-(channel, frequency) standardization statistics, shape (C, F)."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 2:
            raise ShapeMismatch(
                f"mean/std must share a 2-D shape, got {mean.shape} and {std.shape}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std))):
            raise SeldkitError("normalization statistics contain non-finite values")
        if np.any(std <= 0):
            raise SeldkitError("std must be positive (floored at 1e-8 when fitted)")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


def stft(clip: MultichannelClip, window_len: int = STFT_WINDOW,
         hop: int = STFT_HOP) -> ComplexSpectrogram:
    """Hann-windowed DFT per channel, no signal padding.

    Frame t covers samples [t*hop, t*hop + window_len), so
    T = floor((N - window_len)/hop) + 1 and the signal tail that does not
    fill a window is dropped.
    """
    samples = clip.samples
    if samples.shape[1] < window_len:
        raise TooShort(
            f"clip has {samples.shape[1]} samples, window needs {window_len}"
        )
    window = hann(window_len, sym=False)
    frames = sliding_window_view(samples, window_len, axis=1)[:, ::hop]
    spec = np.fft.rfft(frames * window, axis=2)
    return ComplexSpectrogram(spec.transpose(0, 2, 1), window_len, hop)


def log_linear_spectrogram(spec, n_bins: int = N_FREQ_BINS,
                           floor: float = SPEC_FLOOR) -> np.ndarray:
    """ln of floored power per bin, keeping the lowest n_bins bins."""
    bins = _spec_bins(spec)[:, :n_bins, :]
    return np.log(np.maximum(np.abs(bins) ** 2, floor))


def eigenvector_intensity(spec, n_bins: int = N_FREQ_BINS,
                          smooth: tuple = (3, 3)) -> np.ndarray:
    """Direction estimate per TF bin from the smoothed spatial covariance.

    For each retained (f, t): average x*x^H over a smooth = (freq, time)
    neighborhood (clipped at the edges, so corner cells average fewer
    terms), take the principal eigenvector u of the 4x4 result, and read
    the direction off the component ratios Re(u[1:4]/u[0]). The ratio
    cancels the eigenvector's arbitrary global phase, so no separate sign
    convention is needed. Bins where the W component nearly vanishes
    (|u[0]| <= 1e-9) carry no usable direction and come out zero; vectors
    longer than 1 are rescaled onto the unit sphere.

    Output channels are (I_x, I_y, I_z), Cartesian order, shape (3, n_bins, T).
    """
    x = _spec_bins(spec)[:, :n_bins, :]
    outer = np.einsum("aft,bft->abft", x, x.conj())
    cov = _box_mean(outer, smooth)
    cov = np.moveaxis(cov, (0, 1), (2, 3))
    cov = (cov + cov.conj().swapaxes(-1, -2)) / 2.0
    _, vecs = np.linalg.eigh(cov)
    u = vecs[..., :, -1]

    u0 = u[..., 0]
    usable = np.abs(u0) > _EPS_EIGVEC
    safe_u0 = np.where(usable, u0, 1.0)
    ratios = (u[..., 1:4] / safe_u0[..., None]).real
    ratios = np.where(usable[..., None], ratios, 0.0)

    # ratios arrive in channel order (Y, Z, X); emit Cartesian (x, y, z)
    intensity = np.stack([ratios[..., 2], ratios[..., 0], ratios[..., 1]])
    norm = np.linalg.norm(intensity, axis=0)
    intensity /= np.maximum(norm, 1.0)
    return np.where(norm < _EPS_EIGVEC, 0.0, intensity)


def salsa(clip: MultichannelClip) -> np.ndarray:
    """Full SALSA feature: (7, 200, T) float32.

    Channels 0..3 are log-linear spectrograms of (W, Y, Z, X); channels
    4..6 the intensity vector (I_x, I_y, I_z).
    """
    spec = stft(clip)
    return np.concatenate(
        [log_linear_spectrogram(spec), eigenvector_intensity(spec)]
    ).astype(np.float32)


def compute_norm_stats(tensors) -> NormStats:
    """Fit per-(channel, frequency) mean/std over the time frames of a set
    of feature tensors.

    Uses the population std (so normalizing the fitting set gives exactly
    unit variance), floored at 1e-8 to keep constant rows finite.
    """
    count = 0
    total = None
    total_sq = None
    for tensor in tensors:
        arr = np.asarray(tensor, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeMismatch(f"expected (C, F, T) tensors, got {arr.shape}")
        if total is None:
            total = np.zeros(arr.shape[:2])
            total_sq = np.zeros(arr.shape[:2])
        elif arr.shape[:2] != total.shape:
            raise ShapeMismatch(
                f"tensor (C, F) {arr.shape[:2]} does not match {total.shape}"
            )
        count += arr.shape[2]
        total += arr.sum(axis=2)
        total_sq += (arr * arr).sum(axis=2)
    if count == 0:
        raise EmptyManifest("no feature frames to fit statistics on")
    mean = total / count
    var = np.maximum(total_sq / count - mean * mean, 0.0)
    return NormStats(mean, np.maximum(np.sqrt(var), 1e-8))


def normalize(tensor, stats: NormStats) -> np.ndarray:
    """Standardize a feature tensor: (x - mean)/std per (channel, freq)."""
    arr = np.asarray(tensor, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[:2] != stats.mean.shape:
        raise ShapeMismatch(
            f"tensor shape {arr.shape} does not fit stats {stats.mean.shape}"
        )
    out = (arr - stats.mean[:, :, None]) / stats.std[:, :, None]
    return out.astype(np.float32)


def save_norm_stats(stats: NormStats, path) -> None:
    """Persist stats as a (2, C, F) stack of mean and std.

    The container payload is float32, so reloaded statistics are the
    float32 rounding of the fitted values.
    """
    write_feature_file(np.stack([stats.mean, stats.std]), path)


def load_norm_stats(path) -> NormStats:
    arr = read_feature_file(path)
    if arr.ndim != 3 or arr.shape[0] != 2:
        raise ShapeMismatch(f"{path}: expected (2, C, F) stats, got {arr.shape}")
    return NormStats(arr[0], arr[1])


def _spec_bins(spec) -> np.ndarray:
    if isinstance(spec, ComplexSpectrogram):
        return spec.bins
    return np.asarray(spec)


def _box_mean(arr: np.ndarray, smooth) -> np.ndarray:
    """Mean over a centered (smooth[0] x smooth[1]) window on the last two
    axes, dividing by the number of cells actually inside the grid."""
    size_f, size_t = smooth
    if size_f < 1 or size_t < 1:
        raise SeldkitError(f"smoothing window must be positive, got {smooth}")
    if size_f == 1 and size_t == 1:
        return arr.copy()
    n_f, n_t = arr.shape[-2:]
    integral = np.zeros(arr.shape[:-2] + (n_f + 1, n_t + 1), dtype=arr.dtype)
    integral[..., 1:, 1:] = arr.cumsum(axis=-2).cumsum(axis=-1)

    f_lo, f_hi = _window_edges(n_f, size_f)
    t_lo, t_hi = _window_edges(n_t, size_t)
    sums = (
        integral[..., f_hi[:, None], t_hi[None, :]]
        - integral[..., f_lo[:, None], t_hi[None, :]]
        - integral[..., f_hi[:, None], t_lo[None, :]]
        + integral[..., f_lo[:, None], t_lo[None, :]]
    )
    counts = (f_hi - f_lo)[:, None] * (t_hi - t_lo)[None, :]
    return sums / counts


def _window_edges(n: int, size: int):
    idx = np.arange(n)
    lo = np.maximum(idx - (size - 1) // 2, 0)
    hi = np.minimum(idx + size // 2 + 1, n)
    return lo, hi
