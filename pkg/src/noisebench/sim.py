"""Noiseless and noisy circuit execution.

Two execution paths share one gate/noise vocabulary:

* ``run_exact`` returns the exact outcome distribution, via a statevector
  when no noise model is given and via a density matrix otherwise (each
  ideal gate followed by its assigned channel, readout confusion applied
  to the measured marginal).
* ``run_shots`` draws finite-shot counts with stochastic Pauli
  trajectories: per shot one Pauli is sampled from each noisy gate's
  channel and applied after the ideal gate.  Shots that drew the same
  Pauli pattern share one statevector simulation, which changes nothing
  statistically but makes large shot counts cheap.

Simulation cost depends only on the qubits a circuit actually touches;
register indices may be sparse (e.g. a Bell pair on qubits 22 and 25).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .circuits import Circuit, Gate
from .paulis import (
    PTM,
    DepolarizingParams,
    PauliChannel,
    PauliString,
    ReadoutError,
    all_paulis,
    depolarizing_to_pauli,
    pauli_matrix,
)

if TYPE_CHECKING:
    from .gst import GSTEstimate

log = logging.getLogger(__name__)

PROB_TOL = 1e-9
# probabilities below this are float dust from exact cancellations, not physics
SAMPLING_FLOOR = 1e-12

EXACT_QUBIT_CAP = 12
SHOTS_QUBIT_CAP = 20


class SimulationError(RuntimeError):
    pass


class ExactModeCapExceeded(SimulationError):
    """Raised when run_exact would need too large a density matrix; use run_shots."""


# ---------------------------------------------------------------------------
# Result containers

@dataclass(frozen=True)
class Distribution:
    """Map bitstring -> probability over an ordered measurement register."""

    probs: dict[str, float]

    def __post_init__(self):
        if not self.probs:
            raise ValueError("empty distribution")
        lengths = {len(k) for k in self.probs}
        if len(lengths) != 1:
            raise ValueError(f"mixed bitstring lengths: {sorted(lengths)}")
        total = sum(self.probs.values())
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total}")
        if min(self.probs.values()) < -PROB_TOL:
            raise ValueError("negative probability")

    @property
    def n_bits(self) -> int:
        return len(next(iter(self.probs)))

    def prob(self, bits: str) -> float:
        return self.probs.get(bits, 0.0)

    def marginal(self, positions: Sequence[int]) -> "Distribution":
        out: dict[str, float] = {}
        for bits, p in self.probs.items():
            key = "".join(bits[i] for i in positions)
            out[key] = out.get(key, 0.0) + p
        return Distribution(out)


@dataclass(frozen=True)
class Counts:
    """Map bitstring -> count with the total shot number."""

    counts: dict[str, int]
    shots: int

    def __post_init__(self):
        if self.shots < 0:
            raise ValueError("negative shot count")
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("negative count")
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to the shot total")
        lengths = {len(k) for k in self.counts}
        if len(lengths) > 1:
            raise ValueError(f"mixed bitstring lengths: {sorted(lengths)}")

    @property
    def n_bits(self) -> int:
        return len(next(iter(self.counts)))

    def to_distribution(self) -> Distribution:
        if self.shots == 0:
            raise ValueError("no shots to normalize")
        return Distribution({k: v / self.shots for k, v in self.counts.items()})

    def marginal(self, positions: Sequence[int]) -> "Counts":
        out: dict[str, int] = {}
        for bits, c in self.counts.items():
            key = "".join(bits[i] for i in positions)
            out[key] = out.get(key, 0) + c
        return Counts(out, self.shots)

    def to_json(self, seed: int | None = None) -> dict:
        obj = {"counts": dict(sorted(self.counts.items())), "shots": self.shots}
        if seed is not None:
            obj["seed"] = seed
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "Counts":
        return cls({k: int(v) for k, v in obj["counts"].items()}, int(obj["shots"]))


def as_distribution(d: Distribution | Counts) -> Distribution:
    return d if isinstance(d, Distribution) else d.to_distribution()


# ---------------------------------------------------------------------------
# Noise model

GateKey = tuple[str, tuple[int, ...]]
Channel = PauliChannel | DepolarizingParams | PTM


def gate_key(kind: str, qubits: Sequence[int]) -> GateKey:
    return kind, tuple(qubits)


@dataclass
class NoiseModel:
    """Per-(gate kind, qubit tuple) channels, per-qubit readout flips, and
    optional coherent over-rotation angles per gate."""

    gates: dict[GateKey, Channel] = field(default_factory=dict)
    readout: dict[int, ReadoutError] = field(default_factory=dict)
    overrotation: dict[GateKey, float] = field(default_factory=dict)
    _expanded: dict[GateKey, PauliChannel] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        for (kind, qubits), chan in self.gates.items():
            arity = len(qubits)
            got = chan.n if isinstance(chan, (PauliChannel, PTM)) else len(chan.qubits)
            if got != arity:
                raise ValueError(
                    f"channel for {kind}{qubits} acts on {got} qubit(s), gate has {arity}"
                )

    def channel_for(self, gate: Gate) -> PauliChannel | PTM | None:
        key = gate_key(gate.kind, gate.qubits)
        chan = self.gates.get(key)
        if chan is None:
            return None
        if isinstance(chan, PTM):
            return chan
        if key not in self._expanded:
            if isinstance(chan, DepolarizingParams):
                chan = depolarizing_to_pauli(chan)
            self._expanded[key] = chan
        return self._expanded[key]

    def overrotation_for(self, gate: Gate) -> float:
        return self.overrotation.get(gate_key(gate.kind, gate.qubits), 0.0)

    def coverage_gaps(self, circuit: Circuit, hard_only: bool = True) -> list[str]:
        """Gate instances and measured qubits the model says nothing about."""
        gaps = []
        for cyc in circuit.cycles:
            for g in cyc.gates:
                if g.kind == "MEASURE":
                    continue
                if hard_only and g.hardness != "hard":
                    continue
                key = gate_key(g.kind, g.qubits)
                if key not in self.gates and key not in self.overrotation:
                    gaps.append(f"{g.kind}{g.qubits}")
        for q in circuit.measured:
            if q not in self.readout:
                gaps.append(f"readout q{q}")
        return sorted(set(gaps))

    # -- JSON ---------------------------------------------------------------

    def to_json(self) -> dict:
        def chan_json(chan: Channel) -> dict:
            if isinstance(chan, PauliChannel):
                return {"type": "pauli", "rates": chan.to_json()}
            if isinstance(chan, DepolarizingParams):
                return {"type": "depolarizing", "p": chan.p, "qubits": list(chan.qubits)}
            return {"type": "ptm", "n": chan.n, "matrix": chan.matrix.tolist()}

        return {
            "gates": {
                f"{kind} {','.join(map(str, qubits))}": chan_json(chan)
                for (kind, qubits), chan in sorted(self.gates.items())
            },
            "readout": {
                str(q): {"p0": r.p0, "p1": r.p1} for q, r in sorted(self.readout.items())
            },
            "overrotation": {
                f"{kind} {','.join(map(str, qubits))}": theta
                for (kind, qubits), theta in sorted(self.overrotation.items())
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NoiseModel":
        def parse_key(key: str) -> GateKey:
            kind, _, qubits = key.partition(" ")
            return kind, tuple(int(q) for q in qubits.split(","))

        def parse_chan(obj: dict) -> Channel:
            if obj["type"] == "pauli":
                return PauliChannel.from_json(obj["rates"])
            if obj["type"] == "depolarizing":
                return DepolarizingParams(float(obj["p"]), tuple(obj["qubits"]))
            if obj["type"] == "ptm":
                return PTM(int(obj["n"]), np.array(obj["matrix"]))
            raise ValueError(f"unknown channel type {obj['type']!r}")

        return cls(
            gates={parse_key(k): parse_chan(v) for k, v in obj.get("gates", {}).items()},
            readout={
                int(q): ReadoutError(float(v["p0"]), float(v["p1"]))
                for q, v in obj.get("readout", {}).items()
            },
            overrotation={
                parse_key(k): float(v) for k, v in obj.get("overrotation", {}).items()
            },
        )


def rx_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def overrotation_unitary(theta: float, n: int) -> np.ndarray:
    """RX(theta) on each of n qubits, the coherent error we attach per gate."""
    u = np.array([[1.0 + 0j]])
    for _ in range(n):
        u = np.kron(u, rx_matrix(theta))
    return u


# ---------------------------------------------------------------------------
# Dense engines

def _apply_unitary(state: np.ndarray, u: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    ut = u.reshape((2,) * (2 * k))
    state = np.tensordot(ut, state, axes=(tuple(range(k, 2 * k)), tuple(axes)))
    return np.moveaxis(state, tuple(range(k)), tuple(axes))


def _apply_pauli_vec(state: np.ndarray, x: int, z: int, axes: Sequence[int]) -> np.ndarray:
    """Apply X^x Z^z on the given axes, ignoring global phase."""
    for i, axis in enumerate(axes):
        if (z >> i) & 1:
            sign = np.ones((1,) * axis + (2,) + (1,) * (state.ndim - axis - 1))
            sign[(0,) * axis + (1,)] = -1.0
            state = state * sign
    flip = tuple(axis for i, axis in enumerate(axes) if (x >> i) & 1)
    if flip:
        state = np.flip(state, axis=flip)
    return state


def _apply_gate_dm(rho: np.ndarray, u: np.ndarray, axes: Sequence[int], n: int) -> np.ndarray:
    rho = _apply_unitary(rho, u, axes)
    return _apply_unitary(rho, u.conj(), [n + a for a in axes])


def _apply_pauli_dm(rho: np.ndarray, x: int, z: int, axes: Sequence[int], n: int) -> np.ndarray:
    rho = _apply_pauli_vec(rho, x, z, axes)
    return _apply_pauli_vec(rho, x, z, [n + a for a in axes])


def _apply_channel_dm(rho: np.ndarray, chan: PauliChannel, axes: Sequence[int],
                      n: int) -> np.ndarray:
    out = np.zeros_like(rho)
    for p, r in chan.rates.items():
        if r == 0.0:
            continue
        out += r * _apply_pauli_dm(rho, p.x, p.z, axes, n)
    return out


def ptm_to_superop(ptm: PTM) -> np.ndarray:
    """Row-stacking superoperator of the map the PTM describes."""
    d = 2**ptm.n
    basis = np.stack([pauli_matrix(p).reshape(-1) for p in all_paulis(ptm.n)], axis=1)
    basis /= math.sqrt(d)
    return basis @ ptm.matrix.astype(complex) @ basis.conj().T


def _apply_superop_dm(rho: np.ndarray, s: np.ndarray, axes: Sequence[int], n: int) -> np.ndarray:
    k = len(axes)
    src = list(axes) + [n + a for a in axes]
    rho = np.moveaxis(rho, src, range(2 * k))
    shape = rho.shape
    rho = s @ rho.reshape(4**k, -1)
    return np.moveaxis(rho.reshape(shape), range(2 * k), src)


def _confuse_probs(probs: np.ndarray, readouts: Sequence[ReadoutError | None]) -> np.ndarray:
    """Apply per-qubit readout confusion to a probability tensor of shape (2,)*m."""
    m = probs.ndim
    for axis, r in enumerate(readouts):
        if r is None or (r.p0 == 0.0 and r.p1 == 0.0):
            continue
        probs = np.tensordot(r.confusion(), probs, axes=([1], [axis]))
        probs = np.moveaxis(probs, 0, axis)
    return probs


def _local_layout(circuit: Circuit) -> tuple[list[int], dict[int, int]]:
    used = list(circuit.used_qubits())
    if not used:
        raise SimulationError("circuit touches no qubits")
    return used, {q: i for i, q in enumerate(used)}


def _measured_probs(tensor: np.ndarray, used: list[int], local: dict[int, int],
                    measured: Sequence[int]) -> np.ndarray:
    """Marginalize a (2,)*n probability tensor to the measured qubits, in order."""
    keep = [local[q] for q in measured]
    drop = tuple(sorted(set(range(len(used))) - set(keep)))
    if drop:
        tensor = tensor.sum(axis=drop)
        # remaining axes keep their relative order; re-rank the kept positions
        order = sorted(keep)
        keep = [order.index(k) for k in keep]
    return np.transpose(tensor, keep)


def _probs_to_distribution(probs: np.ndarray) -> Distribution:
    m = probs.ndim
    flat = probs.reshape(-1)
    out = {}
    for idx in np.nonzero(flat > SAMPLING_FLOOR)[0]:
        out[format(idx, f"0{m}b")] = float(flat[idx])
    total = sum(out.values())
    return Distribution({k: v / total for k, v in out.items()})


# ---------------------------------------------------------------------------
# Public execution API

def apply_readout(d: Distribution, r: ReadoutError | Sequence[ReadoutError | None]
                  ) -> Distribution:
    """Independent per-qubit readout confusion on a distribution.

    A single ReadoutError applies to every bit; a sequence gives one entry
    per bit position (None = ideal).
    """
    m = d.n_bits
    readouts = [r] * m if isinstance(r, ReadoutError) else list(r)
    if len(readouts) != m:
        raise ValueError(f"{len(readouts)} readout entries for {m} bits")
    tensor = np.zeros((2,) * m)
    for bits, p in d.probs.items():
        tensor[tuple(int(b) for b in bits)] = p
    tensor = _confuse_probs(tensor, readouts)
    flat = tensor.reshape(-1)
    out = {
        format(i, f"0{m}b"): float(v) for i, v in enumerate(flat) if v > 0.0
    }
    return Distribution(out)


def _model_readouts(model: NoiseModel | None, measured: Sequence[int]
                    ) -> list[ReadoutError | None]:
    if model is None:
        return [None] * len(measured)
    return [model.readout.get(q) for q in measured]


def run_exact(circuit: Circuit, model: NoiseModel | None = None,
              cap: int = EXACT_QUBIT_CAP) -> Distribution:
    """Exact outcome distribution over the measured qubits.

    Noiseless mode evolves a statevector.  With a model, a density matrix
    is evolved with each ideal gate followed by its over-rotation and
    channel, and readout confusion is applied to the measured marginal.
    """
    used, local = _local_layout(circuit)
    n = len(used)
    if not circuit.measured:
        raise SimulationError("circuit measures nothing")
    if model is None:
        state = np.zeros((2,) * n, dtype=complex)
        state[(0,) * n] = 1.0
        for cyc in circuit.cycles:
            for g in cyc.gates:
                if g.kind == "MEASURE":
                    continue
                state = _apply_unitary(state, g.unitary(), [local[q] for q in g.qubits])
        probs = np.abs(state) ** 2
    else:
        if n > cap:
            raise ExactModeCapExceeded(
                f"{n} touched qubits exceed the exact-mode cap of {cap}; use run_shots"
            )
        rho = np.zeros((2,) * (2 * n), dtype=complex)
        rho[(0,) * (2 * n)] = 1.0
        for cyc in circuit.cycles:
            for g in cyc.gates:
                if g.kind == "MEASURE":
                    continue
                axes = [local[q] for q in g.qubits]
                rho = _apply_gate_dm(rho, g.unitary(), axes, n)
                theta = model.overrotation_for(g)
                if theta:
                    for a in axes:
                        rho = _apply_gate_dm(rho, rx_matrix(theta), [a], n)
                chan = model.channel_for(g)
                if isinstance(chan, PauliChannel):
                    rho = _apply_channel_dm(rho, chan, axes, n)
                elif isinstance(chan, PTM):
                    rho = _apply_superop_dm(rho, ptm_to_superop(chan), axes, n)
        dim = 2**n
        probs = rho.reshape(dim, dim).diagonal().real.reshape((2,) * n)
    marg = _measured_probs(probs, used, local, circuit.measured)
    marg = _confuse_probs(marg, _model_readouts(model, circuit.measured))
    return _probs_to_distribution(marg)


def _noisy_gate_plan(circuit: Circuit, model: NoiseModel | None, local: dict[int, int]):
    """Flatten the circuit into (gate, axes, channel-or-None, theta) steps."""
    plan = []
    missing: set[GateKey] = set()
    for cyc in circuit.cycles:
        for g in cyc.gates:
            if g.kind == "MEASURE":
                continue
            axes = [local[q] for q in g.qubits]
            chan = model.channel_for(g) if model is not None else None
            if isinstance(chan, PTM):
                raise SimulationError(
                    f"PTM noise on {g.kind}{g.qubits} is density-mode only; use run_exact"
                )
            if model is not None and chan is None:
                key = gate_key(g.kind, g.qubits)
                if key not in missing:
                    missing.add(key)
            theta = model.overrotation_for(g) if model is not None else 0.0
            plan.append((g, axes, chan, theta))
    for kind, qubits in sorted(missing):
        if model is not None and gate_key(kind, qubits) in model.overrotation:
            continue
        log.debug("no channel for %s%s; treating as noiseless", kind, qubits)
    return plan


_BATCH_QUBIT_MAX = 6    # dense fast path: precomposed segment unitaries
_BATCH_CHUNK = 8192     # pattern columns evolved at once


def _embedded_unitary(u: np.ndarray, axes: Sequence[int], n: int) -> np.ndarray:
    dim = 2**n
    eye = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))
    return _apply_unitary(eye, u, axes).reshape(dim, dim)


@lru_cache(maxsize=16384)
def _embedded_gate_cached(kind: str, pauli: str | None, theta: float,
                          axes: tuple[int, ...], n: int) -> np.ndarray:
    if kind == "RX":
        u = rx_matrix(theta)
    else:
        u = Gate(kind, tuple(range(len(axes))), pauli=pauli).unitary()
    return _embedded_unitary(u, list(axes), n)


@lru_cache(maxsize=16384)
def _embedded_pauli_cached(x: int, z: int, arity: int,
                           axes: tuple[int, ...], n: int) -> np.ndarray:
    return _embedded_unitary(pauli_matrix(PauliString(arity, x, z)), list(axes), n)


def _pattern_probs_batched(plan, supports, patterns, n: int) -> np.ndarray:
    """Probability vectors for every trajectory pattern, shape (P, 2^n).

    Deterministic gate stretches are precomposed into segment matrices, so
    every pattern costs a handful of dense matrix products.
    """
    dim = 2**n
    segments = []
    pauli_mats = []
    current = np.eye(dim, dtype=complex)
    for gate, axes, chan, theta in plan:
        current = _embedded_gate_cached(gate.kind, gate.pauli, 0.0, tuple(axes), n) @ current
        if theta:
            for a in axes:
                current = _embedded_gate_cached("RX", None, theta, (a,), n) @ current
        if chan is not None:
            segments.append(current)
            current = np.eye(dim, dtype=complex)
            col = len(pauli_mats)
            pauli_mats.append([
                _embedded_pauli_cached(p.x, p.z, p.n, tuple(axes), n)
                for p in supports[col]
            ])
    segments.append(current)

    psi0 = np.zeros(dim, dtype=complex)
    psi0[0] = 1.0
    out = np.empty((patterns.shape[0], dim))
    for start in range(0, patterns.shape[0], _BATCH_CHUNK):
        chunk = patterns[start:start + _BATCH_CHUNK]
        states = np.repeat((segments[0] @ psi0)[:, None], chunk.shape[0], axis=1)
        for i in range(chunk.shape[1]):
            col = chunk[:, i]
            for v in np.unique(col):
                sel = col == v
                states[:, sel] = pauli_mats[i][v] @ states[:, sel]
            states = segments[i + 1] @ states
        out[start:start + _BATCH_CHUNK] = np.abs(states.T) ** 2
    return out


def _pattern_probs_tensor(plan, noisy, supports, patterns, n: int) -> np.ndarray:
    """Same as the batched path but one tensor-network walk per pattern."""
    noisy_positions = {pos: col for col, (pos, _) in enumerate(noisy)}
    out = np.empty((patterns.shape[0], 2**n))
    for row, pattern in enumerate(patterns):
        state = np.zeros((2,) * n, dtype=complex)
        state[(0,) * n] = 1.0
        for pos, (g, axes, chan, theta) in enumerate(plan):
            state = _apply_unitary(state, g.unitary(), axes)
            if theta:
                for a in axes:
                    state = _apply_unitary(state, rx_matrix(theta), [a])
            col = noisy_positions.get(pos)
            if col is not None:
                p = supports[col][pattern[col]]
                state = _apply_pauli_vec(state, p.x, p.z, axes)
        out[row] = (np.abs(state) ** 2).reshape(-1)
    return out


def run_shots(circuit: Circuit, model: NoiseModel | None, shots: int, seed: int,
              cap: int = SHOTS_QUBIT_CAP) -> Counts:
    """Finite-shot counts by stochastic Pauli trajectories, deterministic per seed.

    Per shot, one Pauli is drawn from every noisy gate's channel and
    applied after the ideal gate; the measured bitstring is sampled and
    readout flips are applied.  Shots whose Pauli draws coincide share a
    single statevector evaluation.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    used, local = _local_layout(circuit)
    n = len(used)
    if n > cap:
        raise SimulationError(f"{n} touched qubits exceed the sampling cap of {cap}")
    if not circuit.measured:
        raise SimulationError("circuit measures nothing")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    plan = _noisy_gate_plan(circuit, model, local)
    noisy = [(i, step) for i, step in enumerate(plan) if step[2] is not None]

    if noisy:
        draws = np.empty((shots, len(noisy)), dtype=np.int16)
        supports = []
        for col, (_, (_, _, chan, _)) in enumerate(noisy):
            paulis = sorted(chan.rates)
            rates = np.array([chan.rates[p] for p in paulis])
            rates = rates / rates.sum()
            supports.append(paulis)
            draws[:, col] = rng.choice(len(paulis), size=shots, p=rates)
        patterns, pattern_counts = np.unique(draws, axis=0, return_counts=True)
    else:
        supports = []
        patterns = np.zeros((1, 0), dtype=np.int16)
        pattern_counts = np.array([shots])

    if n <= _BATCH_QUBIT_MAX and noisy:
        prob_rows = _pattern_probs_batched(plan, supports, patterns, n)
    else:
        prob_rows = _pattern_probs_tensor(plan, noisy, supports, patterns, n)

    readouts = _model_readouts(model, circuit.measured)
    m = len(circuit.measured)
    # marginalize + confuse all patterns at once (batch axis in front)
    tensor = prob_rows.reshape((prob_rows.shape[0],) + (2,) * n)
    keep = [local[q] for q in circuit.measured]
    drop = tuple(1 + a for a in sorted(set(range(n)) - set(keep)))
    if drop:
        tensor = tensor.sum(axis=drop)
        order = sorted(keep)
        keep = [order.index(a) for a in keep]
    tensor = np.transpose(tensor, (0, *[1 + a for a in keep]))
    tensor = _confuse_probs(tensor, [None, *readouts])
    rows = tensor.reshape(tensor.shape[0], -1)
    rows = np.where(rows > SAMPLING_FLOOR, rows, 0.0)

    dim_m = 2**m
    tallies = np.zeros(dim_m, dtype=np.int64) if dim_m <= 1 << 16 else None
    totals: dict[str, int] = {}
    for row, cnt in zip(rows, pattern_counts):
        cum = np.cumsum(row)
        cum /= cum[-1]
        outcomes = np.searchsorted(cum, rng.random(int(cnt)), side="right")
        if tallies is not None:
            tallies += np.bincount(outcomes, minlength=dim_m)
        else:
            values, value_counts = np.unique(outcomes, return_counts=True)
            for v, c in zip(values, value_counts):
                key = format(int(v), f"0{m}b")
                totals[key] = totals.get(key, 0) + int(c)
    if tallies is not None:
        totals = {
            format(int(v), f"0{m}b"): int(c) for v, c in enumerate(tallies) if c
        }
    return Counts(totals, shots)


def run_batch(circuits: Sequence[Circuit], model: NoiseModel | None, shots: int,
              seed: int, cap: int = SHOTS_QUBIT_CAP) -> list[Counts]:
    """Sample every circuit with an RNG stream derived from (seed, index).

    Streams are index-derived, so results do not depend on execution order.
    """
    out = []
    for idx, c in enumerate(circuits):
        sub = np.random.SeedSequence((seed, idx)).generate_state(1)[0]
        out.append(run_shots(c, model, shots, int(sub), cap=cap))
    return out


def simulate_gst_model(circuit: Circuit, estimate: "GSTEstimate") -> Distribution:
    """Outcome distribution predicted by a tomography estimate.

    Composes the estimated transfer matrices in circuit order (H is
    decomposed into its 2x RZ90 + RY90 implementation first) and applies
    the estimated SPAM confusion to the outcome probabilities.
    """
    n = estimate.n_qubits
    used = circuit.used_qubits()
    if len(used) > n:
        raise SimulationError(f"circuit touches {len(used)} qubits, estimate has {n}")
    local = {q: i for i, q in enumerate(used)}

    paulis = all_paulis(n)
    d = 2**n
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1.0
    vec = np.array([(pauli_matrix(p) @ rho).trace().real for p in paulis]) / math.sqrt(d)

    for cyc in circuit.cycles:
        for g in cyc.gates:
            if g.kind == "MEASURE":
                continue
            if g.kind == "H":
                # H == RZ90, RZ90, RY90 in time order, up to global phase
                steps = [Gate(k, g.qubits) for k in ("RZ90", "RZ90", "RY90")]
            else:
                steps = [g]
            for step in steps:
                qubits = tuple(local[q] for q in step.qubits)
                full = estimate.full_ptm(step.kind, qubits)
                vec = full @ vec

    effects = np.empty((d, 4**n))
    for k in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[k, k] = 1.0
        effects[k] = [
            (pauli_matrix(p) @ e).trace().real / math.sqrt(d) for p in paulis
        ]
    p_true = effects @ vec
    p_obs = estimate.spam.T @ p_true
    probs = {format(k, f"0{n}b"): float(v) for k, v in enumerate(p_obs) if v > SAMPLING_FLOOR}
    total = sum(probs.values())
    dist = Distribution({k: v / total for k, v in probs.items()})
    positions = [local[q] for q in circuit.measured]
    if positions != list(range(n)):
        dist = dist.marginal(positions)
    return dist


def marginal(data: Distribution | Counts, positions: Sequence[int]) -> Distribution | Counts:
    return data.marginal(positions)
