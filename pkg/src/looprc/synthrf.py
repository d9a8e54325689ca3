"""Synthetic labeled RF data: emitter fingerprints, ISM-like bursts, channels.

Stands in for over-the-air captures.  Two task families are covered:

* emitter identification — one waveform family, many transmitters, where
  class information lives only in hardware impairments (IQ imbalance, DC
  offset, PA compression, CFO, phase noise) applied per device;
* protocol recognition — four waveform families (OFDM, two GFSK variants,
  half-sine OQPSK) with distinct symbol rates and bandwidths, each class
  drawing from a small pool of device fingerprints.

Waveforms are deliberately simplified: they reuse the modulation and
rough rate/bandwidth relationships of the real protocols without any
claim of standards compliance.  Everything is deterministic from a seed;
per-burst RNG streams are derived from (seed, burst index) so a parallel
generator produces the same dataset as a serial one.
"""

import hashlib
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
from scipy.signal import resample_poly, upfirdn

from .transforms import IQBurst

SAMPLE_RATE = 100e6  # Hz; all rate fields below are fractions of this
BURST_LEN = 1024

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# emitter fingerprints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Fingerprint:
    """Per-transmitter impairment chain parameters.

    Applied in a fixed order: IQ imbalance, DC offset, memoryless PA
    polynomial a1·x + a3·x|x|² + a5·x|x|⁴, carrier-frequency-offset
    rotation, phase-noise random walk.
    """

    device_id: int
    iq_gain_imbalance: float = 0.0  # dB
    iq_phase_skew: float = 0.0  # radians
    dc_offset: complex = 0j
    cfo: float = 0.0  # cycles per sample
    pa_coeffs: tuple[float, float, float] = (1.0, 0.0, 0.0)
    phase_noise_std: float = 0.0  # radians per sample

    def __post_init__(self):
        if len(self.pa_coeffs) != 3:
            raise ValueError("pa_coeffs must be (a1, a3, a5)")
        if self.phase_noise_std < 0:
            raise ValueError("phase_noise_std must be >= 0")
        object.__setattr__(self, "pa_coeffs", tuple(float(a) for a in self.pa_coeffs))

    @property
    def is_identity(self) -> bool:
        return (
            self.iq_gain_imbalance == 0.0
            and self.iq_phase_skew == 0.0
            and self.dc_offset == 0
            and self.cfo == 0.0
            and self.pa_coeffs == (1.0, 0.0, 0.0)
            and self.phase_noise_std == 0.0
        )


IDENTITY_FINGERPRINT = Fingerprint(device_id=-1)


def _draw_fingerprint(rng: np.random.Generator, device_id: int, spread: float) -> Fingerprint:
    # Magnitudes loosely follow commodity transceivers but run hot where a
    # realistic value would vanish inside one FFT bin of a 1024-sample
    # burst (CFO especially); `spread` scales every impairment so task
    # difficulty is tunable in one knob.
    sign = lambda: rng.choice((-1.0, 1.0))
    return Fingerprint(
        device_id=device_id,
        iq_gain_imbalance=sign() * rng.uniform(0.2, 1.5) * spread,
        iq_phase_skew=sign() * rng.uniform(0.01, 0.06) * spread,
        dc_offset=complex(rng.normal(0, 0.01), rng.normal(0, 0.01)) * spread,
        cfo=sign() * rng.uniform(1e-3, 5e-3) * spread,
        pa_coeffs=(
            1.0,
            -rng.uniform(0.05, 0.25) * spread,
            rng.uniform(0.0, 0.05) * spread,
        ),
        phase_noise_std=rng.uniform(0.5e-3, 3e-3) * spread,
    )


def device_fingerprint(seed: int, device_id: int, spread: float = 1.0) -> Fingerprint:
    """Deterministic fingerprint for one device of a seeded population.

    Devices of the same seed differ in every impairment with probability
    one (continuous draws), in particular in the (a3, a5, cfo) triple.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF1, device_id]))
    return _draw_fingerprint(rng, device_id, spread)


def fingerprint_pool(
    seed: int, class_index: int, count: int = 5, spread: float = 1.0
) -> tuple[Fingerprint, ...]:
    """Pool of device fingerprints for one protocol class.

    All but the last cluster tightly around a shared draw, mimicking
    devices from one manufacturing run; the last is an independent draw
    at a looser spread (a different make of the same radio).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF2, class_index]))
    center = _draw_fingerprint(rng, device_id=0, spread=spread)
    pool = []
    for i in range(count - 1):
        jitter = _draw_fingerprint(rng, device_id=i, spread=0.15 * spread)
        pool.append(
            replace(
                jitter,
                device_id=i,
                iq_gain_imbalance=center.iq_gain_imbalance + jitter.iq_gain_imbalance,
                iq_phase_skew=center.iq_phase_skew + jitter.iq_phase_skew,
                dc_offset=center.dc_offset + jitter.dc_offset,
                cfo=center.cfo + jitter.cfo,
                pa_coeffs=(
                    1.0,
                    center.pa_coeffs[1] + jitter.pa_coeffs[1],
                    center.pa_coeffs[2] + jitter.pa_coeffs[2],
                ),
                phase_noise_std=center.phase_noise_std + jitter.phase_noise_std,
            )
        )
    pool.append(_draw_fingerprint(rng, count - 1, 1.5 * spread))
    return tuple(pool)


def apply_fingerprint(
    burst: IQBurst, fp: Fingerprint, noise_seed: Optional[SeedLike] = None
) -> IQBurst:
    """Run a burst through a device's impairment chain.

    The identity fingerprint returns the input unchanged.  A phase-noise
    component requires ``noise_seed``; everything else is deterministic.
    """
    if fp.is_identity:
        return burst
    x = burst.samples
    e = 10.0 ** (fp.iq_gain_imbalance / 20.0) * np.exp(1j * fp.iq_phase_skew)
    y = 0.5 * (1.0 + e) * x + 0.5 * (1.0 - e) * np.conj(x)
    y = y + fp.dc_offset
    a1, a3, a5 = fp.pa_coeffs
    p = np.abs(y) ** 2
    y = a1 * y + a3 * y * p + a5 * y * p * p
    if fp.cfo != 0.0:
        y = y * np.exp(2j * np.pi * fp.cfo * np.arange(len(y)))
    if fp.phase_noise_std > 0.0:
        if noise_seed is None:
            raise ValueError("phase_noise_std > 0 requires a noise_seed")
        walk = np.cumsum(_rng(noise_seed).normal(0.0, fp.phase_noise_std, len(y)))
        y = y * np.exp(1j * walk)
    meta = dict(burst.meta)
    meta["device_id"] = fp.device_id
    return IQBurst(samples=y, sample_rate=burst.sample_rate, meta=meta)


def add_awgn(burst: IQBurst, snr_db: float, seed: Optional[SeedLike] = None) -> IQBurst:
    """Add complex white Gaussian noise at the requested SNR.

    SNR is relative to the measured average power of this burst.
    ``snr_db=inf`` is a no-op returning the input itself.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return burst
    if seed is None:
        raise ValueError("finite snr_db requires a seed")
    x = burst.samples
    p_sig = float(np.mean(np.abs(x) ** 2))
    p_noise = p_sig / 10.0 ** (snr_db / 10.0)
    rng = _rng(seed)
    noise = rng.normal(0.0, 1.0, len(x)) + 1j * rng.normal(0.0, 1.0, len(x))
    y = x + noise * math.sqrt(p_noise / 2.0)
    return IQBurst(samples=y, sample_rate=burst.sample_rate, meta=dict(burst.meta))


# ---------------------------------------------------------------------------
# protocol waveforms
# ---------------------------------------------------------------------------

PROTOCOL_FAMILIES = ("wifi_like", "bt_like", "zigbee_like", "nrf_like")


@dataclass(frozen=True)
class ProtocolSpec:
    """One ISM-band waveform family.

    ``symbol_rate`` and ``occupied_bw`` are fractions of the sample rate;
    ``occupied_bw`` is the nominal −20 dB support width.  ``mod_index``
    and ``gauss_bt`` only apply to the GFSK families.
    """

    family: str
    modulation: str  # "ofdm_qpsk" | "gfsk" | "oqpsk_halfsine"
    symbol_rate: float
    occupied_bw: float
    ramp: int = 16
    mod_index: float = 0.0
    gauss_bt: float = 0.5

    def __post_init__(self):
        if not (0 < self.symbol_rate < 1):
            raise ValueError("symbol_rate must be a fraction of the sample rate")
        if not (0 < self.occupied_bw < 1):
            raise ValueError("occupied_bw must be a fraction of the sample rate")
        if self.ramp < 0:
            raise ValueError("ramp must be >= 0")


# Rates keep the real protocols' ordering (WiFi ≫ ZigBee > NRF > BT in
# bandwidth) at a 100 MHz equivalent sample rate, without compliance.
PROTOCOLS: dict[str, ProtocolSpec] = {
    "wifi_like": ProtocolSpec(
        family="wifi_like", modulation="ofdm_qpsk", symbol_rate=1 / 400, occupied_bw=0.20
    ),
    "bt_like": ProtocolSpec(
        family="bt_like",
        modulation="gfsk",
        symbol_rate=0.01,
        occupied_bw=0.010,
        mod_index=0.32,
        gauss_bt=0.5,
    ),
    "zigbee_like": ProtocolSpec(
        family="zigbee_like",
        modulation="oqpsk_halfsine",
        symbol_rate=0.025,  # chip rate
        occupied_bw=0.032,
    ),
    "nrf_like": ProtocolSpec(
        family="nrf_like",
        modulation="gfsk",
        symbol_rate=0.02,
        occupied_bw=0.023,
        mod_index=0.5,
        gauss_bt=0.5,
    ),
}


def _payload_bits(
    rng: np.random.Generator,
    count: int,
    base_bits: Optional[np.ndarray],
    bit_flip_prob: float,
) -> np.ndarray:
    """Random bits, or a fixed pattern with a fraction of positions flipped."""
    if base_bits is None:
        return rng.integers(0, 2, count)
    bits = np.resize(np.asarray(base_bits, dtype=np.int64), count)
    if bit_flip_prob > 0:
        flips = rng.random(count) < bit_flip_prob
        bits = bits ^ flips.astype(np.int64)
    return bits


def _ofdm_qpsk(rng, length, spec, base_bits, bit_flip_prob):
    # 64 occupied subcarriers (DC null) in an FFT sized so the occupied
    # fraction equals spec.occupied_bw; quarter-length cyclic prefix.
    n_occ = 64
    nfft = int(round(n_occ / spec.occupied_bw))
    cp = nfft // 4
    n_sym = -(-length // (nfft + cp))
    bits = _payload_bits(rng, 2 * n_occ * n_sym, base_bits, bit_flip_prob)
    qpsk = ((1 - 2 * bits[0::2]) + 1j * (1 - 2 * bits[1::2])) / math.sqrt(2)
    qpsk = qpsk.reshape(n_sym, n_occ)
    spectrum = np.zeros((n_sym, nfft), dtype=np.complex128)
    spectrum[:, 1 : n_occ // 2 + 1] = qpsk[:, : n_occ // 2]
    spectrum[:, nfft - n_occ // 2 :] = qpsk[:, n_occ // 2 :]
    symbols = np.fft.ifft(spectrum, axis=1)
    with_cp = np.concatenate([symbols[:, -cp:], symbols], axis=1)
    return with_cp.reshape(-1)[:length]


def _gfsk(rng, length, spec, base_bits, bit_flip_prob):
    sps = int(round(1.0 / spec.symbol_rate))
    pad = 4  # symbols absorbed by the filter transient at each end
    n_sym = -(-length // sps) + 2 * pad
    bits = _payload_bits(rng, n_sym, base_bits, bit_flip_prob)
    nrz = np.repeat(2.0 * bits - 1.0, sps)
    # Gaussian pulse-shaping filter; std in samples from the BT product.
    std = sps * math.sqrt(math.log(2.0)) / (2.0 * math.pi * spec.gauss_bt)
    t = np.arange(-2 * sps, 2 * sps + 1)
    kernel = np.exp(-0.5 * (t / std) ** 2)
    kernel /= kernel.sum()
    shaped = np.convolve(nrz, kernel, mode="same")
    phase = np.pi * spec.mod_index * np.cumsum(shaped) / sps
    return np.exp(1j * phase)[pad * sps : pad * sps + length]


def _oqpsk_halfsine(rng, length, spec, base_bits, bit_flip_prob):
    sps = int(round(1.0 / spec.symbol_rate))  # samples per chip
    pad = 2
    per_branch = -(-length // (2 * sps)) + 2 * pad + 2
    chips = 2.0 * _payload_bits(rng, 2 * per_branch, base_bits, bit_flip_prob) - 1.0
    pulse = np.sin(np.pi * np.arange(2 * sps) / (2 * sps))
    i_br = upfirdn(pulse, chips[0::2], up=2 * sps)
    q_br = upfirdn(pulse, chips[1::2], up=2 * sps)
    n = min(len(i_br), len(q_br) + sps)
    sig = i_br[:n].astype(np.complex128)
    sig[sps:n] += 1j * q_br[: n - sps]  # half-chip branch offset
    return sig[pad * 2 * sps : pad * 2 * sps + length]


_MODULATORS = {
    "ofdm_qpsk": _ofdm_qpsk,
    "gfsk": _gfsk,
    "oqpsk_halfsine": _oqpsk_halfsine,
}


def gen_protocol_burst(
    spec: ProtocolSpec,
    payload_seed: SeedLike,
    length: int = BURST_LEN,
    base_bits: Optional[np.ndarray] = None,
    bit_flip_prob: float = 0.0,
) -> IQBurst:
    """Generate one clean burst of a waveform family.

    Deterministic per (spec, payload_seed).  Output has exactly unit
    average power and a raised-cosine amplitude ramp at both ends.  With
    ``base_bits`` the payload is that fixed pattern, each bit flipped
    independently with ``bit_flip_prob`` — the "mostly constant frame"
    regime of beacon-like traffic.
    """
    if length < 64:
        raise ValueError("length must be >= 64")
    rng = _rng(payload_seed)
    sig = _MODULATORS[spec.modulation](rng, length, spec, base_bits, bit_flip_prob)
    if spec.ramp > 0:
        win = 0.5 * (1.0 - np.cos(np.pi * (np.arange(spec.ramp) + 0.5) / spec.ramp))
        env = np.ones(length)
        env[: spec.ramp] = win
        env[length - spec.ramp :] = win[::-1]
        sig = sig * env
    sig = sig / math.sqrt(float(np.mean(np.abs(sig) ** 2)))
    return IQBurst(
        samples=sig,
        sample_rate=SAMPLE_RATE,
        meta={"family": spec.family, "modulation": spec.modulation},
    )


# ---------------------------------------------------------------------------
# bandwidth measurement and normalization
# ---------------------------------------------------------------------------


def measure_occupied_bandwidth(
    burst: IQBurst, rel_db: float = -20.0, nfft: int = 512
) -> float:
    """−`rel_db` support width of the averaged power spectrum.

    Hann-windowed segments with 50% overlap are averaged (one segment if
    the burst is short), and the width is the contiguous run of bins
    within ``rel_db`` of the peak that contains the peak, as a fraction
    of the sample rate.  Using the peak's run (not the outermost bins
    above threshold) keeps a stray payload-dependent sidelobe from
    inflating the estimate; segments are zero-padded 4x so the crossing
    quantizes to 1/(4·nfft) of the sample rate.
    """
    x = burst.samples
    if not np.any(x):
        raise ValueError("zero-energy burst")
    nfft = min(nfft, len(x))
    grid = 4 * nfft
    hop = max(1, nfft // 2)
    win = np.hanning(nfft)
    acc = np.zeros(grid)
    count = 0
    for start in range(0, len(x) - nfft + 1, hop):
        seg = np.fft.fft(x[start : start + nfft] * win, n=grid)
        acc += np.abs(seg) ** 2
        count += 1
    psd = np.fft.fftshift(acc / count)
    above = np.flatnonzero(psd >= psd.max() * 10.0 ** (rel_db / 10.0))
    peak = int(np.argmax(psd))
    runs = np.split(above, np.flatnonzero(np.diff(above) > 1) + 1)
    run = next(r for r in runs if r[0] <= peak <= r[-1])
    return len(run) / grid


NORMALIZED_BW = 0.05  # common post-normalization −20 dB width


def normalize_bandwidth(
    burst: IQBurst,
    target_bw: float = NORMALIZED_BW,
    tol: float = 0.05,
    rel_db: float = -20.0,
    max_rounds: int = 8,
) -> IQBurst:
    """Resample a burst so its occupied bandwidth matches ``target_bw``.

    Removes the bandwidth cue between waveform families while keeping
    the modulation structure.  The output length scales inversely with
    the rate change, so callers needing fixed-length bursts crop after
    normalizing.

    Idempotence is exact: a burst already carrying this target's
    ``bw_normalized`` marker — or one that already measures within
    ``tol`` — is returned unchanged.  Re-resampling an already
    normalized burst could only add filtering artifacts; the marker
    survives cropping and noise because burst metadata is copied along.

    The driving measurement runs on a fixed-size central window (the
    standard burst length) so long raw bursts and their fixed-length
    crops agree on the width.  The -20 dB crossing of a short burst's
    averaged PSD is payload-noisy, so the loop resamples up to
    ``max_rounds`` times and keeps the round that measured closest to
    the target.
    """
    if burst.meta.get("bw_normalized") == target_bw:
        return burst
    y = burst
    best_err, best = math.inf, burst
    for _ in range(max_rounds):
        win = y if len(y) <= BURST_LEN else center_crop(y, BURST_LEN)
        measured = measure_occupied_bandwidth(win, rel_db=rel_db)
        err = abs(target_bw / measured - 1.0)
        if err < best_err:
            best_err, best = err, y
        if err <= tol:
            break
        ratio = Fraction(measured / target_bw).limit_denominator(64)
        samples = resample_poly(y.samples, ratio.numerator, ratio.denominator)
        y = IQBurst(samples=samples, sample_rate=y.sample_rate, meta=dict(y.meta))
    if best is burst:
        return burst
    meta = dict(best.meta)
    meta["bw_normalized"] = target_bw
    return IQBurst(samples=best.samples, sample_rate=best.sample_rate, meta=meta)


def center_crop(burst: IQBurst, length: int) -> IQBurst:
    """Central ``length`` samples of a burst."""
    n = len(burst)
    if n < length:
        raise ValueError(f"burst of length {n} cannot be cropped to {length}")
    start = (n - length) // 2
    return IQBurst(
        samples=burst.samples[start : start + length],
        sample_rate=burst.sample_rate,
        meta=dict(burst.meta),
    )


# ---------------------------------------------------------------------------
# capture streams and burst detection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CaptureStream:
    """Long complex capture with ground-truth burst start indices.

    Ground truth exists because the generator knows it; detection
    operates on samples alone.
    """

    samples: np.ndarray
    sample_rate: float = SAMPLE_RATE
    burst_starts: tuple[int, ...] = ()

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.complex128)
        if samples.ndim != 1:
            raise ValueError("stream must be 1-D")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "burst_starts", tuple(int(i) for i in self.burst_starts))

    def __len__(self) -> int:
        return self.samples.size


def synthesize_capture(
    bursts: Sequence[IQBurst],
    snr_db: float,
    seed: SeedLike,
    gap_range: Optional[tuple[int, int]] = None,
) -> CaptureStream:
    """Place bursts into a noisy stream separated by silence.

    Gaps before and between bursts are drawn uniformly from
    ``gap_range`` (default: one to three burst lengths, so bursts are
    always separated by at least one burst length of silence).  Noise
    power is set from ``snr_db`` against unit signal power.
    """
    if not bursts:
        raise ValueError("need at least one burst")
    rng = _rng(seed)
    max_len = max(len(b) for b in bursts)
    lo, hi = gap_range if gap_range is not None else (max_len, 3 * max_len)
    if lo < max_len:
        raise ValueError("gaps must be at least one burst length")
    starts = []
    cursor = 0
    for b in bursts:
        cursor += int(rng.integers(lo, hi + 1))
        starts.append(cursor)
        cursor += len(b)
    total = cursor + int(rng.integers(lo, hi + 1))
    noise_amp = math.sqrt(10.0 ** (-snr_db / 10.0) / 2.0) if math.isfinite(snr_db) else 0.0
    stream = noise_amp * (rng.normal(size=total) + 1j * rng.normal(size=total))
    for b, s in zip(bursts, starts):
        stream[s : s + len(b)] += b.samples
    return CaptureStream(samples=stream, burst_starts=tuple(starts))


def detect_bursts(
    stream: CaptureStream,
    threshold_factor: float = 6.0,
    window: int = 32,
    burst_len: int = BURST_LEN,
) -> list[int]:
    """Rising-edge energy detection.

    A trailing moving-average power crossing ``threshold_factor`` times
    the noise-floor estimate (a low percentile of the same average)
    marks a burst; the start index is then refined by walking backwards
    from inside the burst while a short-window average stays above twice
    the floor, stopping at the first dip — so an isolated noise spike
    shortly before the edge cannot drag the onset early.  One detection
    per burst via a hold-off of ``burst_len``.  An empty list means
    nothing was found.
    """
    n = len(stream)
    if n <= burst_len:
        raise ValueError("stream must be longer than one burst")
    power = np.abs(stream.samples) ** 2
    csum = np.concatenate([[0.0], np.cumsum(power)])
    ma = (csum[window:] - csum[:-window]) / window  # ma[i] ends at i+window-1
    floor = float(np.percentile(ma, 25))
    if floor <= 0.0:
        floor = float(np.mean(ma)) or 1e-30
    thr = threshold_factor * floor
    w2 = 4
    sma = (csum[w2:] - csum[:-w2]) / w2
    refine_thr = max(2.0 * floor, thr / 8.0)
    starts: list[int] = []
    i = 0
    while i < len(ma):
        if ma[i] >= thr:
            end = min(i + window - 1, len(sma) - 1)  # inside the burst body
            lo = max(0, end - window - w2)
            onset = lo
            for j in range(end, lo - 1, -1):
                if sma[j] < refine_thr:
                    onset = j + 1
                    break
            starts.append(onset)
            # Hold off past the burst plus one full window so the tail of
            # this burst cannot re-trigger.
            i = onset + burst_len + window
        else:
            i += 1
    return starts


def extract_burst(stream: CaptureStream, index: int, length: int = BURST_LEN) -> IQBurst:
    """Slice ``length`` samples starting at ``index``."""
    if index < 0 or index + length > len(stream):
        raise ValueError(
            f"cannot extract {length} samples at {index} from stream of length {len(stream)}"
        )
    return IQBurst(
        samples=stream.samples[index : index + length],
        sample_rate=stream.sample_rate,
    )


# ---------------------------------------------------------------------------
# labeled datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabeledDataset:
    """Bursts with integer labels and a fixed stratified train/test split."""

    bursts: tuple[IQBurst, ...]
    labels: np.ndarray
    label_names: tuple[str, ...]
    train_idx: np.ndarray
    test_idx: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "bursts", tuple(self.bursts))
        object.__setattr__(self, "label_names", tuple(self.label_names))
        for name in ("train_idx", "test_idx"):
            idx = np.array(getattr(self, name), dtype=np.int64)
            idx.setflags(write=False)
            object.__setattr__(self, name, idx)
        if len(self.bursts) != self.labels.size:
            raise ValueError("labels and bursts disagree in length")
        if self.labels.size and not (
            0 <= self.labels.min() and self.labels.max() < len(self.label_names)
        ):
            raise ValueError("labels outside label_names range")
        both = np.concatenate([self.train_idx, self.test_idx])
        if np.unique(both).size != both.size or both.size != len(self.bursts):
            raise ValueError("train/test must partition the dataset")

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def __len__(self) -> int:
        return len(self.bursts)

    def subset(self, indices: np.ndarray) -> tuple[list[IQBurst], np.ndarray]:
        return [self.bursts[i] for i in indices], self.labels[indices]

    def content_hash(self) -> str:
        """SHA-256 over samples, labels, split and names — byte identity."""
        h = hashlib.sha256()
        for b in self.bursts:
            h.update(b.samples.tobytes())
        h.update(self.labels.tobytes())
        h.update(self.train_idx.tobytes())
        h.update(self.test_idx.tobytes())
        h.update("\x00".join(self.label_names).encode())
        return h.hexdigest()


def stratified_split(
    labels: np.ndarray, seed: SeedLike, train_frac: float = 0.8
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded per-class shuffle, first ``train_frac`` of each class to train."""
    rng = _rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        cut = int(round(train_frac * idx.size))
        train.append(idx[:cut])
        test.append(idx[cut:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def _burst_seeds(seed: int, burst_index: int) -> tuple:
    """Independent payload / impairment / channel streams per burst."""
    ss = np.random.SeedSequence([seed, 1, burst_index])
    return tuple(ss.spawn(3))


def make_sei_dataset(
    n_devices: int = 10,
    bursts_per_device: int = 100,
    snr_db: float = 30.0,
    seed: int = 0,
    spread: float = 1.0,
    length: int = BURST_LEN,
    bit_flip_prob: float = 0.1,
    if_offset: float = 0.0,
) -> LabeledDataset:
    """Emitter-identification dataset: one waveform, ``n_devices`` radios.

    Every device transmits near-identical beacon-like frames (one fixed
    payload with ~``bit_flip_prob`` of bits flipped per burst), so class
    information comes almost entirely from the fingerprints.

    ``if_offset`` (cycles/sample) tunes the capture off-center, the usual
    trick for keeping a signal away from the receiver's DC/LO artifacts.
    The occupied band then sits in the interior of the spectrum instead of
    straddling the bin-0 wraparound.
    """
    if n_devices < 2:
        raise ValueError("n_devices must be >= 2")
    if bursts_per_device < 1:
        raise ValueError("bursts_per_device must be >= 1")
    if not -0.5 <= if_offset <= 0.5:
        raise ValueError("if_offset must be within [-0.5, 0.5] cycles/sample")
    spec = PROTOCOLS["wifi_like"]
    fps = [device_fingerprint(seed, d, spread) for d in range(n_devices)]
    base_bits = np.random.default_rng(np.random.SeedSequence([seed, 0])).integers(0, 2, 4096)
    shift = (
        np.exp(2j * np.pi * if_offset * np.arange(length)) if if_offset != 0.0 else None
    )
    bursts, labels = [], []
    for d in range(n_devices):
        for j in range(bursts_per_device):
            pay_ss, imp_ss, chan_ss = _burst_seeds(seed, d * bursts_per_device + j)
            b = gen_protocol_burst(spec, pay_ss, length, base_bits, bit_flip_prob)
            if shift is not None:
                b = IQBurst(samples=b.samples * shift, sample_rate=b.sample_rate, meta=b.meta)
            b = apply_fingerprint(b, fps[d], imp_ss)
            b = add_awgn(b, snr_db, chan_ss)
            bursts.append(b)
            labels.append(d)
    labels = np.asarray(labels)
    train_idx, test_idx = stratified_split(labels, np.random.SeedSequence([seed, 2]))
    return LabeledDataset(
        bursts=tuple(bursts),
        labels=labels,
        label_names=tuple(f"device_{d:02d}" for d in range(n_devices)),
        train_idx=train_idx,
        test_idx=test_idx,
        meta={
            "kind": "sei",
            "n_devices": n_devices,
            "bursts_per_device": bursts_per_device,
            "snr_db": snr_db,
            "seed": seed,
            "spread": spread,
            "bit_flip_prob": bit_flip_prob,
            "if_offset": if_offset,
        },
    )


def _raw_length(spec: ProtocolSpec, target_bw: float, length: int) -> int:
    # Widening a narrowband burst to the target compresses it in time by
    # target/width, so those families need proportionally more raw samples
    # for the final crop to fit.  Narrowing a wideband burst stretches it,
    # so plain `length` already suffices there.
    grow = max(1.0, target_bw / spec.occupied_bw)
    need = int(math.ceil(length * grow * 1.4))
    return max(length, -(-need // 256) * 256)


def make_wiprec_dataset(
    bursts_per_class: int = 200,
    clean: bool = True,
    bw_normalized: bool = False,
    seed: int = 0,
    snr_db: float = 30.0,
    length: int = BURST_LEN,
    fingerprints_per_class: int = 5,
    spread: float = 1.0,
) -> LabeledDataset:
    """Protocol-recognition dataset over the four waveform families.

    ``clean=True`` emits pristine modulator output.  Otherwise each
    class's bursts rotate through a pool of ``fingerprints_per_class``
    devices and pass through an AWGN channel at ``snr_db``.  With
    ``bw_normalized`` every burst is resampled to a common occupied
    bandwidth (then center-cropped back to ``length``), which deletes
    the bandwidth cue between families.
    """
    if bursts_per_class < 1:
        raise ValueError("bursts_per_class must be >= 1")
    families = PROTOCOL_FAMILIES
    pools = {
        c: fingerprint_pool(seed, c, fingerprints_per_class, spread)
        for c in range(len(families))
    }
    bursts, labels = [], []
    for c, fam in enumerate(families):
        spec = PROTOCOLS[fam]
        raw_len = _raw_length(spec, NORMALIZED_BW, length) if bw_normalized else length
        for j in range(bursts_per_class):
            pay_ss, imp_ss, chan_ss = _burst_seeds(seed, c * bursts_per_class + j)
            raw = raw_len
            while True:
                b = gen_protocol_burst(spec, pay_ss, raw)
                if not clean:
                    b = apply_fingerprint(b, pools[c][j % fingerprints_per_class], imp_ss)
                if not bw_normalized:
                    break
                bn = normalize_bandwidth(b)
                if len(bn) >= length:
                    b = center_crop(bn, length)
                    break
                # Measured width came in below nominal; retry with more raw
                # samples (same seeds, so the payload prefix is unchanged).
                raw *= 2
            if not clean:
                b = add_awgn(b, snr_db, chan_ss)
            bursts.append(b)
            labels.append(c)
    labels = np.asarray(labels)
    train_idx, test_idx = stratified_split(labels, np.random.SeedSequence([seed, 2]))
    return LabeledDataset(
        bursts=tuple(bursts),
        labels=labels,
        label_names=families,
        train_idx=train_idx,
        test_idx=test_idx,
        meta={
            "kind": "wiprec",
            "bursts_per_class": bursts_per_class,
            "clean": clean,
            "bw_normalized": bw_normalized,
            "snr_db": snr_db,
            "seed": seed,
            "spread": spread,
        },
    )
