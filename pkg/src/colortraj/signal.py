"""Orthonormal DCT-II/DCT-III pair and low-pass trajectory smoothing.

Both transforms delegate to ``scipy.fft`` with orthonormal scaling.
"""

from dataclasses import dataclass
import numpy as np
import scipy.fft

from .errors import EmptySignal

DEFAULT_CUTOFF = 15


@dataclass(frozen=True, eq=False)
class Spectrum:
    """DCT-II coefficients; index 0 is the DC term."""

    coefficients: np.ndarray

    @property
    def length(self):
        return self.coefficients.size

    def __len__(self):
        return self.coefficients.size


def _as_signal(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    if x.size == 0:
        raise EmptySignal("cannot transform an empty signal")
    return x


def dct_forward(signal):
    x = _as_signal(signal)
    return Spectrum(scipy.fft.dct(x, type=2, norm="ortho"))


def dct_inverse(spectrum):
    coeffs = spectrum.coefficients if isinstance(spectrum, Spectrum) else spectrum
    c = _as_signal(coeffs)
    return scipy.fft.idct(c, type=2, norm="ortho")


def smooth_lowpass(signal, cutoff=DEFAULT_CUTOFF):
    """Zero every DCT coefficient with index >= ``cutoff`` and invert.

    ``cutoff`` is the number of retained coefficients: the default of 15
    keeps indices 0..14.
    """
    x = _as_signal(signal)
    if isinstance(cutoff, bool) or int(cutoff) != cutoff or cutoff < 1:
        raise ValueError(f"cutoff must be a positive integer, got {cutoff!r}")
    if cutoff >= x.size:
        return x.copy()
    coeffs = dct_forward(x).coefficients.copy()
    coeffs[int(cutoff):] = 0.0
    return dct_inverse(coeffs)
