"""Composition of delay loops into split banks and layered trees.

A bank holds k parallel loops, each assigned one contiguous slice of the
incoming datapoint.  Banks stack into layers: the state vectors of layer r
are concatenated and re-sliced to feed layer r+1.  The final layer's k
state vectors merge into the joint state vector through one of three
combiners:

- ``sum``: elementwise sum (requires equal loop sizes),
- ``normalized_product``: elementwise product, L2-normalized (a scalar
  product of k vectors taken elementwise so the output keeps length N_j),
- ``concat``: concatenation (preserves all split information at the cost
  of a k-fold larger classifier input).

Loops are never trained; everything here is a fixed, seeded function of
the topology description.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .reservoir import LoopSpec, Mask, StateVector, mask_for, run_loop

COMBINERS = ("sum", "normalized_product", "concat")


def split_datapoint(datapoint: np.ndarray, k: int) -> list[np.ndarray]:
    """Split a datapoint into k contiguous, order-preserving pieces.

    k must divide the length exactly; callers that need ragged sizes pad
    explicitly first (no silent padding here).
    """
    x = np.asarray(datapoint)
    if x.ndim != 1:
        raise ValueError("datapoint must be 1-D")
    if k < 1:
        raise ValueError("k must be >= 1")
    if x.size % k != 0:
        raise ValueError(f"k={k} does not divide datapoint length {x.size}")
    step = x.size // k
    return [x[i * step : (i + 1) * step] for i in range(k)]


def _as_values(states: Sequence[Union[StateVector, np.ndarray, Sequence[float]]]):
    return [s.values if isinstance(s, StateVector) else np.asarray(s, dtype=np.float64) for s in states]


def combine(
    states: Sequence[Union[StateVector, np.ndarray, Sequence[float]]], mode: str
) -> StateVector:
    """Merge k state vectors into the joint state vector.

    ``sum`` and ``normalized_product`` require equal lengths and keep the
    per-loop length; ``concat`` yields the total length.  A zero product
    vector stays zero under normalization (documented, not an error).
    """
    if mode not in COMBINERS:
        raise ValueError(f"unknown combiner {mode!r}")
    values = _as_values(states)
    if len(values) == 0:
        raise ValueError("need at least one state vector")
    if mode == "concat":
        return StateVector(values=np.concatenate(values), loop_id="concat")
    lengths = {v.size for v in values}
    if len(lengths) != 1:
        raise ValueError(f"{mode} requires equal state lengths, got {sorted(lengths)}")
    if mode == "sum":
        out = np.sum(values, axis=0)
        return StateVector(values=out, loop_id="sum")
    out = values[0].copy()
    for v in values[1:]:
        out *= v
    norm = np.linalg.norm(out)
    if norm > 0:
        out = out / norm
    return StateVector(values=out, loop_id="normalized_product")


@dataclass(frozen=True)
class LoopBank:
    """k parallel loops plus the slice of the input each one processes.

    ``slices`` are (start, stop) bounds, 0-based half-open, that must be
    ordered, non-overlapping, and cover [0, input_length) exactly.  Loop
    sizes may be heterogeneous (mixed-transform routing relies on that).
    """

    loops: tuple[LoopSpec, ...]
    slices: tuple[tuple[int, int], ...]

    def __post_init__(self):
        loops = tuple(self.loops)
        slices = tuple((int(a), int(b)) for a, b in self.slices)
        if len(loops) == 0:
            raise ValueError("bank must hold at least one loop")
        if len(loops) != len(slices):
            raise ValueError("one slice per loop required")
        pos = 0
        for start, stop in slices:
            if start != pos or stop <= start:
                raise ValueError(f"slices must be contiguous and cover the input; bad ({start}, {stop})")
            pos = stop
        object.__setattr__(self, "loops", loops)
        object.__setattr__(self, "slices", slices)

    @property
    def k(self) -> int:
        return len(self.loops)

    @property
    def input_length(self) -> int:
        return self.slices[-1][1]

    @property
    def output_lengths(self) -> tuple[int, ...]:
        return tuple(spec.n_nodes for spec in self.loops)


def even_bank(
    k: int,
    input_length: int,
    n_nodes: int,
    loop_gain: float,
    input_gain: float,
    mask_seed_base: int = 0,
    **loop_kwargs,
) -> LoopBank:
    """Bank of k identical loops over an even split of the input.

    Mask seeds are ``mask_seed_base + loop_index`` so the loops stay
    reproducible yet distinct.
    """
    if input_length % k != 0:
        raise ValueError(f"k={k} does not divide input length {input_length}")
    step = input_length // k
    loops = tuple(
        LoopSpec(
            n_nodes=n_nodes,
            loop_gain=loop_gain,
            input_gain=input_gain,
            mask_seed=mask_seed_base + i,
            **loop_kwargs,
        )
        for i in range(k)
    )
    slices = tuple((i * step, (i + 1) * step) for i in range(k))
    return LoopBank(loops=loops, slices=slices)


@dataclass(frozen=True)
class TopologySpec:
    """Layered loop banks plus the final combiner.

    Between layers, the upstream state vectors are concatenated and
    re-sliced per the next bank's bounds, so trees compose with the same
    semantics as the first layer.
    """

    layers: tuple[LoopBank, ...]
    combiner: str = "sum"

    def __post_init__(self):
        layers = tuple(self.layers)
        if len(layers) == 0:
            raise ValueError("topology needs at least one layer")
        if self.combiner not in COMBINERS:
            raise ValueError(f"unknown combiner {self.combiner!r}")
        if self.combiner in ("sum", "normalized_product"):
            sizes = set(layers[-1].output_lengths)
            if len(sizes) != 1:
                raise ValueError(f"{self.combiner} requires equal loop sizes in the final layer")
        for upstream, downstream in zip(layers, layers[1:]):
            produced = sum(upstream.output_lengths)
            if downstream.input_length != produced:
                raise ValueError(
                    f"layer expects input of length {downstream.input_length}, "
                    f"upstream produces {produced}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def input_length(self) -> int:
        return self.layers[0].input_length

    @property
    def output_length(self) -> int:
        final = self.layers[-1]
        if self.combiner == "concat":
            return sum(final.output_lengths)
        return final.output_lengths[0]

    def masks(self) -> list[list[Mask]]:
        """Per-layer, per-loop masks, generated from the loop seeds."""
        return [[mask_for(spec) for spec in bank.loops] for bank in self.layers]


def single_loop_topology(spec: LoopSpec, input_length: int, combiner: str = "sum") -> TopologySpec:
    """Degenerate one-loop topology; run_topology on it equals run_loop."""
    bank = LoopBank(loops=(spec,), slices=((0, input_length),))
    return TopologySpec(layers=(bank,), combiner=combiner)


def _loop_noise_seed(base: Optional[int], layer: int, index: int) -> Optional[int]:
    if base is None:
        return None
    seq = np.random.SeedSequence([int(base), layer, index])
    return int(seq.generate_state(1)[0])


def run_topology(
    datapoint: np.ndarray,
    topo: TopologySpec,
    noise_seed: Optional[int] = None,
    masks: Optional[list[list[Mask]]] = None,
) -> StateVector:
    """Run a datapoint through every layer and combine the final states.

    Each loop in a bank runs independently on its slice (they are
    parallel in the hardware picture; here they simply share no state).
    ``noise_seed`` derives a distinct child seed per (layer, loop) so a
    noisy topology is reproducible end to end.  ``masks`` can supply
    pre-generated masks (e.g. from a stored model); by default they are
    regenerated from the loop seeds.
    """
    x = np.asarray(datapoint, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("datapoint must be 1-D")
    if x.size != topo.input_length:
        raise ValueError(
            f"datapoint length {x.size} != topology input length {topo.input_length}"
        )
    if masks is None:
        masks = topo.masks()

    current = x
    states: list[StateVector] = []
    for li, bank in enumerate(topo.layers):
        if current.size != bank.input_length:
            raise ValueError(
                f"layer {li} expects input of length {bank.input_length}, got {current.size}"
            )
        states = []
        for i, (spec, (start, stop)) in enumerate(zip(bank.loops, bank.slices)):
            state = run_loop(
                current[start:stop],
                spec,
                masks[li][i],
                noise_seed=_loop_noise_seed(noise_seed, li, i),
            )
            states.append(state)
        current = np.concatenate([s.values for s in states])
    return combine(states, topo.combiner)
