"""Single-neuron, time-multiplexed delay loop.

A delay loop realizes N virtual reservoir nodes by clocking each input
sample through one nonlinearity N times.  A fixed random mask spreads every
input sample into N chips (sample-and-hold upsampling); the loop output at
chip time t feeds back after a delay of N chips, so the N chip positions
behave like the recurrently connected neurons of a spatial reservoir.

The chip-time recurrence implemented by :func:`run_loop` is

    X(t) = sum_u h(u) * f( eta * X(t - N + u) + nu * J(t - u) ) + eps(t)

for u in {0, 1}, where J is the masked chip stream, ``h`` is a two-tap
filter modeling the nonlinearity's temporal response (pure delay ``(1, 0)``
by default), and ``eps`` is optional i.i.d. Gaussian in-loop noise.  The
state vector is the last N chip values after the final input sample has
been clocked in.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NumericOverflowError

MASK_DISTRIBUTIONS = ("binary", "uniform")

#: "identity" is a test hook for linear-system oracles.  It is accepted by
#: LoopSpec so oracle tests can drive full topologies, but experiment
#: configs (pipeline.ExperimentConfig) reject it.
NONLINEARITIES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sine": np.sin,
    "tanh": np.tanh,
    "identity": lambda x: x,
}


@dataclass(frozen=True)
class Mask:
    """Fixed per-chip spreading weights of one loop.

    The mask plays the role of random input weights: it is generated once
    per loop and reused for every datapoint, in training and inference.
    """

    values: np.ndarray
    seed: int

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("mask must be a non-empty 1-D vector")
        if not np.all(np.isfinite(values)):
            raise ValueError("mask values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class LoopSpec:
    """Full description of one delay loop.

    Parameters
    ----------
    n_nodes : int
        Number of virtual nodes N; also the mask length in chips.
    loop_gain : float
        Feedback gain applied to the delayed state tap.
    input_gain : float
        Gain applied to the masked input chips.  Together with
        ``loop_gain`` it must be calibrated per application to put the
        loop in a useful dynamic regime; there is no universal default.
    nonlinearity : str
        One of ``"sine"`` (default), ``"tanh"``, or the test-only
        ``"identity"``.
    filter_taps : (float, float)
        Two-tap temporal response h(0), h(1) of the nonlinearity.
        ``(1, 0)`` is a pure delay and matches a digital loop.
    noise_std : float
        Std-dev of additive per-chip Gaussian in-loop noise; 0 disables
        noise exactly (digital mode).
    mask_seed : int
        Seed for the loop's spreading mask.
    mask_distribution : str
        ``"binary"`` (+/-1, default) or ``"uniform"`` (on (-1, 1)).
    """

    n_nodes: int
    loop_gain: float
    input_gain: float
    nonlinearity: str = "sine"
    filter_taps: tuple[float, float] = (1.0, 0.0)
    noise_std: float = 0.0
    mask_seed: int = 0
    mask_distribution: str = "binary"

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        h0, h1 = self.filter_taps
        if h0 == 0.0 and h1 == 0.0:
            raise ValueError("filter taps must not both be zero")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.mask_distribution not in MASK_DISTRIBUTIONS:
            raise ValueError(f"unknown mask distribution {self.mask_distribution!r}")
        if not all(np.isfinite(v) for v in (self.loop_gain, self.input_gain, h0, h1)):
            raise ValueError("loop parameters must be finite")


@dataclass(frozen=True)
class StateVector:
    """Reservoir readout: one value per virtual node (or combined output)."""

    values: np.ndarray
    loop_id: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("state vector must be 1-D")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


def generate_mask(n_nodes: int, seed: int, distribution: str = "binary") -> Mask:
    """Draw the fixed spreading mask for a loop.

    Deterministic for a fixed ``(seed, n_nodes, distribution)`` triple;
    regenerating from the same seed reproduces identical values bit-exactly.

    Parameters
    ----------
    n_nodes : int
        Mask length in chips (= loop size N).
    seed : int
        RNG seed.
    distribution : str
        ``"binary"`` draws i.i.d. +/-1; ``"uniform"`` draws i.i.d. from
        the open interval (-1, 1).
    """
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if distribution not in MASK_DISTRIBUTIONS:
        raise ValueError(f"unknown mask distribution {distribution!r}")
    rng = np.random.default_rng(seed)
    if distribution == "binary":
        values = rng.integers(0, 2, size=n_nodes).astype(np.float64) * 2.0 - 1.0
    else:
        values = rng.uniform(-1.0, 1.0, size=n_nodes)
    return Mask(values=values, seed=seed)


def mask_for(spec: LoopSpec) -> Mask:
    """Generate the mask described by a loop spec."""
    return generate_mask(spec.n_nodes, spec.mask_seed, spec.mask_distribution)


def run_loop(
    datapoint: np.ndarray,
    spec: LoopSpec,
    mask: Mask,
    noise_seed: Optional[int] = None,
) -> StateVector:
    """Clock a real-valued datapoint through the delay loop and read out.

    Every input sample s(n) is spread into N chips ``mask[j] * s(n)``;
    the chips drive the recurrence in the module docstring with zero
    initial state.  After the last sample the final N chip values are
    returned as the state vector (entry k = chip position k).

    The run is a pure function of its arguments: bit-identical output for
    identical ``(datapoint, spec, mask, noise_seed)``, with noise drawn
    only when ``spec.noise_std > 0``.

    Parameters
    ----------
    datapoint : array_like
        Real vector of length ell >= 1, finite entries.
    spec : LoopSpec
        Loop parameters.
    mask : Mask
        Spreading mask; ``len(mask)`` must equal ``spec.n_nodes``.
    noise_seed : int, optional
        Seed for in-loop noise; required only for reproducibility when
        ``spec.noise_std > 0``.

    Raises
    ------
    ValueError
        Mask/N mismatch, empty or non-finite input.
    NumericOverflowError
        State became non-finite (possible only for pathological gains
        with an unbounded nonlinearity).
    """
    x = np.asarray(datapoint, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("datapoint must be a non-empty 1-D vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("datapoint entries must be finite")
    n = spec.n_nodes
    if len(mask) != n:
        raise ValueError(f"mask length {len(mask)} != n_nodes {n}")
    h0, h1 = float(spec.filter_taps[0]), float(spec.filter_taps[1])
    if n == 1 and h1 != 0.0:
        # h(1) couples chip t to chip t - N + 1 = t: self-referential.
        raise ValueError("filter_taps[1] != 0 requires n_nodes >= 2")

    f = NONLINEARITIES[spec.nonlinearity]
    eta = float(spec.loop_gain)
    nu = float(spec.input_gain)
    m = mask.values
    sigma = float(spec.noise_std)
    rng = np.random.default_rng(noise_seed) if sigma > 0.0 else None

    state = np.zeros(n)
    s_prev = 0.0
    # Overflow shows up as inf/nan in the state and is reported explicitly
    # below; keep numpy quiet about the intermediate arithmetic.
    with np.errstate(over="ignore", invalid="ignore"):
        for i, s_n in enumerate(x):
            if h1 == 0.0:
                new = h0 * f(eta * state + (nu * s_n) * m)
            else:
                # Chip j (0-based) takes its u=1 tap from state chip j+1 of
                # the previous pass, except the last chip, which sees the
                # first chip of the current pass; the u=1 drive is the
                # previous chip of J.
                first = h0 * f(eta * state[0] + nu * m[0] * s_n) + h1 * f(
                    eta * state[1] + nu * m[n - 1] * s_prev
                )
                tap = np.empty(n - 1)
                tap[: n - 2] = state[2:]
                tap[n - 2] = first
                new = np.empty(n)
                new[0] = first
                new[1:] = h0 * f(eta * state[1:] + (nu * s_n) * m[1:]) + h1 * f(
                    eta * tap + (nu * s_n) * m[: n - 1]
                )
            if rng is not None:
                new = new + rng.normal(0.0, sigma, size=n)
            if not np.all(np.isfinite(new)):
                bad = int(np.flatnonzero(~np.isfinite(new))[0])
                raise NumericOverflowError(chip_index=i * n + bad + 1)
            state = new
            s_prev = s_n
    return StateVector(values=state)
