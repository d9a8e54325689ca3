"""Transforms from complex I/Q bursts to real-valued loop inputs.

Delay loops process real vectors only, so every transform here discards
phase in some form: amplitude extraction, spectral magnitudes (full,
differential, or column-decimated DFT), and phase-difference frequency
estimates.  :class:`TransformSpec` gives each transform a serializable
description plus an exact output-length query, which the topology layer
uses to validate slice assignments before any computation runs.
"""

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class IQBurst:
    """Fixed-length complex sample burst: one datapoint before transforms.

    samples are stored as read-only complex128; ``sample_rate`` is in Hz
    and ``meta`` carries free-form capture metadata.
    """

    samples: np.ndarray
    sample_rate: float = 100e6
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("burst must be a non-empty 1-D complex vector")
        if not np.all(np.isfinite(samples)):
            raise ValueError("burst samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class MeanAmplitudeProfile:
    """Per-sample mean amplitude over a training set.

    Must be computed on training bursts only; reusing a test-set profile
    leaks label information into the transform.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("profile must be a non-empty 1-D vector")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


class TransformKind(str, enum.Enum):
    AMPLITUDE_SUBBURST = "amplitude_subburst"
    FFT_MAG = "fft_mag"
    DIFF_FFT = "diff_fft"
    DECIMATED_DFT = "decimated_dft"
    KAY_FREQ = "kay_freq"


def amplitude_subburst(
    burst: IQBurst, offset: Optional[int] = None, length: int = 256
) -> np.ndarray:
    """Extract the amplitudes of a contiguous sub-burst.

    ``offset=None`` centers the window in the burst, where the salient
    part of a burst tends to sit; both offset and length are otherwise
    free (and searchable) parameters.
    """
    n = len(burst)
    if length < 1:
        raise ValueError("length must be >= 1")
    if offset is None:
        offset = (n - length) // 2
    if offset < 0 or offset + length > n:
        raise ValueError(f"window [{offset}, {offset + length}) outside burst of length {n}")
    return np.abs(burst.samples[offset : offset + length])


def fft_magnitude(burst: IQBurst) -> np.ndarray:
    """Magnitudes of the 1/N-scaled DFT of the burst (length L)."""
    n = len(burst)
    return np.abs(np.fft.fft(burst.samples)) / n


def compute_mean_amplitude(bursts: Sequence[IQBurst]) -> MeanAmplitudeProfile:
    """Elementwise mean of |b[i]| over a set of equal-length bursts.

    Summation runs in sequence order, so recomputation over the same set
    is bit-identical.
    """
    if len(bursts) == 0:
        raise ValueError("need at least one burst")
    n = len(bursts[0])
    acc = np.zeros(n)
    for b in bursts:
        if len(b) != n:
            raise ValueError("bursts must all have the same length")
        acc += np.abs(b.samples)
    return MeanAmplitudeProfile(values=acc / len(bursts))


def differential_fft(burst: IQBurst, profile: MeanAmplitudeProfile) -> np.ndarray:
    """FFT magnitudes after removing the dataset-mean amplitude.

    The profile is subtracted from the burst's amplitude while the phase
    of every sample is preserved; samples with zero amplitude take phase
    0 (the choice is immaterial: any phase times zero magnitude is zero).
    """
    if len(profile) != len(burst):
        raise ValueError(f"profile length {len(profile)} != burst length {len(burst)}")
    s = burst.samples
    amp = np.abs(s)
    phase = np.where(amp > 0, s / np.where(amp > 0, amp, 1.0), 1.0)
    residual = IQBurst(
        samples=(amp - profile.values) * phase,
        sample_rate=burst.sample_rate,
    )
    return fft_magnitude(residual)


def decimated_dft(burst: IQBurst, d: int) -> np.ndarray:
    """Magnitudes of the column-decimated DFT (length L/d).

    Keeping every d-th column of the 1/N-scaled DFT matrix and projecting
    the burst onto those columns evaluates every d-th frequency bin, which
    equals an L/d-point FFT of the d-fold folded burst.  That pruned form
    is used here; the dense matrix product serves as the test oracle.
    """
    n = len(burst)
    if d < 1:
        raise ValueError("d must be >= 1")
    if n % d != 0:
        raise ValueError(f"decimation {d} does not divide burst length {n}")
    if d == 1:
        return fft_magnitude(burst)
    folded = burst.samples.reshape(d, n // d).sum(axis=0)
    return np.abs(np.fft.fft(folded)) / n


def kay_freq_estimate(burst: IQBurst, stride: int = 4) -> np.ndarray:
    """Phase-difference frequency estimates over 3-sample windows.

    For window start p the estimate is the mean of the two successive
    phase increments, expressed as a normalized frequency in (-0.5, 0.5]:

        f(p) = (arg(b[p+1] conj(b[p])) + arg(b[p+2] conj(b[p+1]))) / (4 pi)

    Windows start every ``stride`` samples; output length is
    ``(L - 3) // stride + 1``.  Exact on noiseless complex exponentials.
    The two increments get equal weight: with only two phase differences
    per window, parabolic window weighting is indistinguishable from
    uniform.
    """
    n = len(burst)
    if n < 3:
        raise ValueError("burst must hold at least 3 samples")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    s = burst.samples
    starts = np.arange(0, n - 2, stride)
    d1 = np.angle(s[starts + 1] * np.conj(s[starts]))
    d2 = np.angle(s[starts + 2] * np.conj(s[starts + 1]))
    return (d1 + d2) / (4.0 * np.pi)


@dataclass(frozen=True)
class TransformSpec:
    """Serializable description of one input transform.

    ``params`` is validated per kind at construction:

    - ``amplitude_subburst``: ``offset`` (int or None for centered),
      ``length`` (default 256)
    - ``fft_mag``: no params
    - ``diff_fft``: no params (the mean profile is supplied at apply time)
    - ``decimated_dft``: ``d`` (default 1)
    - ``kay_freq``: ``stride`` (default 4)
    """

    kind: TransformKind
    params: dict = field(default_factory=dict)

    _ALLOWED = {
        TransformKind.AMPLITUDE_SUBBURST: {"offset", "length"},
        TransformKind.FFT_MAG: set(),
        TransformKind.DIFF_FFT: set(),
        TransformKind.DECIMATED_DFT: {"d"},
        TransformKind.KAY_FREQ: {"stride"},
    }

    def __post_init__(self):
        kind = TransformKind(self.kind)
        object.__setattr__(self, "kind", kind)
        unknown = set(self.params) - self._ALLOWED[kind]
        if unknown:
            raise ValueError(f"unknown params for {kind.value}: {sorted(unknown)}")

    def output_length(self, input_length: int) -> int:
        """Exact output length for a burst of ``input_length`` samples."""
        if self.kind is TransformKind.AMPLITUDE_SUBBURST:
            length = int(self.params.get("length", 256))
            offset = self.params.get("offset")
            offset = (input_length - length) // 2 if offset is None else int(offset)
            if offset < 0 or offset + length > input_length:
                raise ValueError("sub-burst window outside burst")
            return length
        if self.kind in (TransformKind.FFT_MAG, TransformKind.DIFF_FFT):
            return input_length
        if self.kind is TransformKind.DECIMATED_DFT:
            d = int(self.params.get("d", 1))
            if d < 1 or input_length % d != 0:
                raise ValueError(f"decimation {d} does not divide length {input_length}")
            return input_length // d
        stride = int(self.params.get("stride", 4))
        if input_length < 3:
            raise ValueError("burst must hold at least 3 samples")
        return (input_length - 3) // stride + 1

    def needs_profile(self) -> bool:
        return self.kind is TransformKind.DIFF_FFT

    def apply(
        self, burst: IQBurst, profile: Optional[MeanAmplitudeProfile] = None
    ) -> np.ndarray:
        if self.kind is TransformKind.AMPLITUDE_SUBBURST:
            return amplitude_subburst(
                burst,
                offset=self.params.get("offset"),
                length=int(self.params.get("length", 256)),
            )
        if self.kind is TransformKind.FFT_MAG:
            return fft_magnitude(burst)
        if self.kind is TransformKind.DIFF_FFT:
            if profile is None:
                raise ValueError("diff_fft requires a mean amplitude profile")
            return differential_fft(burst, profile)
        if self.kind is TransformKind.DECIMATED_DFT:
            return decimated_dft(burst, int(self.params.get("d", 1)))
        return kay_freq_estimate(burst, stride=int(self.params.get("stride", 4)))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, **self.params}

    @classmethod
    def from_dict(cls, data: dict) -> "TransformSpec":
        data = dict(data)
        kind = TransformKind(data.pop("kind"))
        return cls(kind=kind, params=data)
