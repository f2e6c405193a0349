"""Correlation-function assembly and discrete Fourier spectroscopy.

The ground-state two-point function is linear in the Pauli coefficients:
C(t) = sum_i c_i(t) <Omega| s_i O |Omega> with constant matrix elements
computed once from the exact oracle.  Its DFT carries delta-like peaks at
the in-sector excitation energies, which are located by thresholded local
maxima with three-point quadratic refinement.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exact import Observable, TfimSpec, Trajectory, build_hamiltonian, diagonalize
from .pauli import to_matrix

SPEC_HEADER = "opdyn-spec v1"
PEAKS_HEADER = "opdyn-peaks v1"
WINDOWS = ("rectangular", "hann")


@dataclass(frozen=True)
class Spectrum:
    """DFT of a uniformly sampled complex series.

    ``frequencies`` is the angular grid w_k = 2*pi*k/T; the ordinary
    frequency column is w/(2*pi).  ``resolution`` is the angular bin width.
    """

    frequencies: np.ndarray
    amplitudes: np.ndarray
    window: str
    resolution: float

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.amplitudes)

    @property
    def ordinary_frequencies(self) -> np.ndarray:
        return self.frequencies / (2.0 * np.pi)


@dataclass(frozen=True)
class Peak:
    frequency: float
    magnitude: float
    half_width: float


@dataclass(frozen=True)
class PeakList:
    peaks: tuple  # of Peak, ascending in frequency
    gap_estimate: float | None
    threshold_fraction: float
    resolution: float


def ground_state_weights(spec: TfimSpec, O: Observable, basis) -> np.ndarray:
    """Constant matrix elements <Omega| s_i O |Omega> per basis column."""
    eig = diagonalize(build_hamiltonian(spec))
    omega = eig.ground_state
    O_omega = O.to_matrix() @ omega
    return np.array([omega.conj() @ to_matrix(p) @ O_omega for p in basis])


def assemble_two_point(pred: Trajectory, spec: TfimSpec, O: Observable) -> np.ndarray:
    """Two-point function series from a (predicted) coefficient trajectory."""
    weights = ground_state_weights(spec, O, pred.basis)
    return pred.coeffs @ weights


def fft_spectrum(times, series, window: str = "rectangular") -> Spectrum:
    """DFT with a sign convention putting exp(-iEt) content at w = +E.

    Amplitudes are scaled by the sample spacing so Parseval's identity
    sum|s|^2 dt = sum|S|^2 dw / (2 pi) holds for the rectangular window.
    """
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=complex)
    if len(times) != len(series) or len(times) < 2:
        raise ValueError("series and grid must align with at least two samples")
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=1e-12):
        raise ValueError("spectrum requires a uniform time grid")
    if window not in WINDOWS:
        raise ValueError(f"unknown window {window!r}")
    dt = float(dts[0])
    m = len(series)
    data = series
    if window == "hann":
        data = data * np.hanning(m)
    # ifft*m computes sum_j s_j exp(+2i pi jk/m)
    amplitudes = dt * m * np.fft.ifft(data)
    span = m * dt
    freqs = 2.0 * np.pi * np.arange(m) / span
    return Spectrum(freqs, amplitudes, window, 2.0 * np.pi / span)


def find_peaks(spectrum: Spectrum, threshold_fraction: float = 0.05) -> PeakList:
    """Local maxima above a fraction of the global maximum.

    Peak positions are refined by a three-point parabola; the gap estimate
    is the lowest peak beyond the DC resolution bin.
    """
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError("threshold_fraction must be in (0, 1)")
    mag = spectrum.magnitude
    if mag.size == 0:
        raise ValueError("empty spectrum")
    peak_list = []
    top = mag.max()
    if top > 0.0:
        thresh = threshold_fraction * top
        dw = spectrum.resolution
        for k in range(1, len(mag) - 1):
            if mag[k] >= thresh and mag[k] > mag[k - 1] and mag[k] >= mag[k + 1]:
                denom = mag[k - 1] - 2.0 * mag[k] + mag[k + 1]
                offset = 0.0
                if denom < 0.0:
                    offset = 0.5 * (mag[k - 1] - mag[k + 1]) / denom
                freq = spectrum.frequencies[k] + offset * dw
                height = mag[k] - 0.25 * (mag[k - 1] - mag[k + 1]) * offset
                # half-width from the bins above half maximum around k
                lo = k
                while lo > 0 and mag[lo - 1] > height / 2:
                    lo -= 1
                hi = k
                while hi < len(mag) - 1 and mag[hi + 1] > height / 2:
                    hi += 1
                peak_list.append(Peak(freq, float(height), 0.5 * (hi - lo) * dw))
    gap = None
    for p in peak_list:
        if p.frequency > spectrum.resolution:
            gap = p.frequency
            break
    return PeakList(tuple(peak_list), gap, threshold_fraction, spectrum.resolution)


@dataclass(frozen=True)
class SpectrumComparison:
    matched: tuple    # of (freq_a, freq_b, delta)
    unmatched_a: tuple
    unmatched_b: tuple
    tolerance: float


def compare_spectra(a: Spectrum, b: Spectrum,
                    threshold_fraction: float = 0.05,
                    tolerance: float | None = None) -> SpectrumComparison:
    """Greedy nearest-frequency matching of the two peak sets.

    Default tolerance is one bin of the coarser spectrum.
    """
    if tolerance is None:
        tolerance = max(a.resolution, b.resolution)
    peaks_a = [p.frequency for p in find_peaks(a, threshold_fraction).peaks]
    peaks_b = [p.frequency for p in find_peaks(b, threshold_fraction).peaks]
    remaining = list(peaks_b)
    matched = []
    unmatched_a = []
    for fa in peaks_a:
        if remaining:
            j = int(np.argmin([abs(fb - fa) for fb in remaining]))
            if abs(remaining[j] - fa) <= tolerance:
                fb = remaining.pop(j)
                matched.append((fa, fb, fb - fa))
                continue
        unmatched_a.append(fa)
    return SpectrumComparison(
        tuple(matched), tuple(unmatched_a), tuple(remaining), tolerance
    )


def write_spectrum(spectrum: Spectrum, path, meta: dict | None = None) -> None:
    lines = [SPEC_HEADER, f"window={spectrum.window}",
             f"resolution={spectrum.resolution:.17g}"]
    for key, value in (meta or {}).items():
        lines.append(f"{key}={value}")
    lines.append("columns omega f magnitude")
    for w, m in zip(spectrum.frequencies, spectrum.magnitude):
        lines.append(f"{w:.17g} {w / (2 * np.pi):.17g} {m:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_spectrum(path) -> Spectrum:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != SPEC_HEADER:
        raise ValueError(f"{path}: not a {SPEC_HEADER} file")
    window = "rectangular"
    rows = []
    for line in text[1:]:
        if line.startswith("window="):
            window = line.partition("=")[2]
        elif line and line[0].isdigit() or line.startswith("-"):
            rows.append([float(v) for v in line.split()])
    data = np.array(rows)
    freqs = data[:, 0]
    resolution = float(freqs[1] - freqs[0]) if len(freqs) > 1 else 0.0
    return Spectrum(freqs, data[:, 2].astype(complex), window, resolution)


def write_peaks(peaks: PeakList, path, meta: dict | None = None) -> None:
    lines = [PEAKS_HEADER,
             f"threshold_fraction={peaks.threshold_fraction:.17g}",
             f"resolution={peaks.resolution:.17g}"]
    for key, value in (meta or {}).items():
        lines.append(f"{key}={value}")
    if peaks.gap_estimate is not None:
        lines.append(f"gap_estimate.omega={peaks.gap_estimate:.17g}")
        lines.append(f"gap_estimate.f={peaks.gap_estimate / (2 * np.pi):.17g}")
    for i, p in enumerate(peaks.peaks):
        lines.append(f"peak.{i}.omega={p.frequency:.17g}")
        lines.append(f"peak.{i}.f={p.frequency / (2 * np.pi):.17g}")
        lines.append(f"peak.{i}.magnitude={p.magnitude:.17g}")
        lines.append(f"peak.{i}.half_width={p.half_width:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")
