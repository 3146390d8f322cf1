"""Randomized compiling: twirled circuit sets and the exact twirl-average oracle.

Around every hard cycle we insert a uniformly random Pauli on each
hard-gate qubit and the exact correction Pauli (the random round
conjugated through the hard gate) afterwards, so the overall unitary is
unchanged.  Consecutive insertion rounds in the same gap are composed
into a single round of easy gates; a round is merged into an adjacent
easy cycle when every one of its Paulis lands on an idle qubit or can be
composed with an existing Pauli-like gate (PAULI, X, I).  Rounds that
would collide with a non-Pauli easy gate such as H stay as their own
cycle, which is what blows up the gate count of chains built purely from
hard gates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuits import Circuit, CircuitError, Cycle, Gate, conjugate_pauli
from .paulis import PauliChannel, PauliString, all_paulis, pauli_matrix, pauli_mul
from .qpu import derived_seed
from .sim import Counts

_PAULI_LETTERS = "IXYZ"
_COMPOSABLE = {"PAULI", "X", "I"}


class TwirlError(CircuitError):
    pass


def _compose_letters(a: str, b: str) -> str:
    """Single-qubit Pauli composition, global phase dropped."""
    p, _ = pauli_mul(PauliString.from_label(a), PauliString.from_label(b))
    return p.label


def _gate_letter(g: Gate) -> str:
    if g.kind == "PAULI":
        return g.pauli
    return "X" if g.kind == "X" else "I"


def _absorb_round(cycle: Cycle, round_: dict[int, str]) -> Cycle | None:
    """Merge a Pauli round into an easy cycle, or None when it cannot absorb."""
    by_qubit = {g.qubits[0]: g for g in cycle.gates if len(g.qubits) == 1}
    if any(len(g.qubits) != 1 for g in cycle.gates):
        return None
    for q, letter in round_.items():
        g = by_qubit.get(q)
        if g is not None and g.kind not in _COMPOSABLE:
            return None
    gates = []
    for g in cycle.gates:
        q = g.qubits[0]
        if q in round_:
            letter = _compose_letters(_gate_letter(g), round_[q])
            if letter != "I":
                gates.append(Gate("PAULI", (q,), pauli=letter))
        else:
            gates.append(g)
    for q, letter in round_.items():
        if q not in by_qubit and letter != "I":
            gates.append(Gate("PAULI", (q,), pauli=letter))
    return Cycle(tuple(gates))


def _round_cycle(round_: dict[int, str]) -> Cycle | None:
    gates = tuple(
        Gate("PAULI", (q,), pauli=letter) for q, letter in sorted(round_.items())
        if letter != "I"
    )
    return Cycle(gates) if gates else None


def twirl_once(circuit: Circuit, seed: int) -> Circuit:
    """One random twirl of every hard cycle; the output is unitarily
    equivalent to the input."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    emitted: list[Cycle] = []
    mergeable: list[bool] = []  # per emitted cycle: original easy cycle?
    pending: dict[int, str] = {}

    def flush_round(round_: dict[int, str], try_previous: bool) -> None:
        round_ = {q: p for q, p in round_.items() if p != "I"}
        if not round_:
            return
        if try_previous and emitted and mergeable[-1]:
            merged = _absorb_round(emitted[-1], round_)
            if merged is not None:
                emitted[-1] = merged
                return
        cyc = _round_cycle(round_)
        if cyc is not None:
            emitted.append(cyc)
            mergeable.append(False)

    for cycle in circuit.body:
        if cycle.is_hard():
            twirl: dict[int, str] = {}
            for g in cycle.gates:
                if g.hardness != "hard":
                    continue
                if g.kind != "CNOT":
                    raise TwirlError(f"hard gate {g.kind} has no Pauli conjugation rule")
                for q in g.qubits:
                    twirl[q] = _PAULI_LETTERS[rng.integers(0, 4)]
            round_ = dict(pending)
            for q, letter in twirl.items():
                round_[q] = _compose_letters(round_.get(q, "I"), letter)
            flush_round(round_, try_previous=True)
            emitted.append(cycle)
            mergeable.append(False)
            pending = {}
            for g in cycle.gates:
                if g.hardness != "hard":
                    continue
                local = PauliString.from_label(
                    "".join(twirl[q] for q in g.qubits)
                ).embedded(circuit.n_qubits, g.qubits)
                corr, _ = conjugate_pauli(g, local)
                for q in g.qubits:
                    letter = corr.letter(q)
                    if letter != "I":
                        pending[q] = letter
        else:
            merged = _absorb_round(cycle, pending) if pending else cycle
            if merged is not None:
                emitted.append(merged)
                mergeable.append(True)
            else:
                flush_round(pending, try_previous=False)
                emitted.append(cycle)
                mergeable.append(True)
            pending = {}
    flush_round(pending, try_previous=True)
    return circuit.with_body(emitted)


@dataclass(frozen=True)
class RCSet:
    """A base circuit with its set of logically equivalent twirled variants."""

    base: Circuit
    n_randomizations: int
    seed: int
    circuits: tuple[Circuit, ...]

    def __post_init__(self):
        if self.n_randomizations < 1:
            raise ValueError("need at least one randomization")
        if len(self.circuits) != self.n_randomizations:
            raise ValueError("one twirled circuit per randomization")


def rc_set(circuit: Circuit, n: int, seed: int) -> RCSet:
    """n independent twirls of `circuit`, deterministic per seed."""
    if n < 1:
        raise ValueError("need at least one randomization")
    circuits = tuple(twirl_once(circuit, derived_seed(seed, i)) for i in range(n))
    return RCSet(circuit, n, seed, circuits)


def aggregate(rc_results: list[Counts]) -> Counts:
    """Elementwise sum of the member results; shots add up."""
    if not rc_results:
        raise ValueError("nothing to aggregate")
    n_bits = rc_results[0].n_bits
    totals: dict[str, int] = {}
    shots = 0
    for counts in rc_results:
        if counts.n_bits != n_bits:
            raise ValueError(
                f"mismatched registers: {counts.n_bits} bits vs {n_bits}"
            )
        shots += counts.shots
        for k, v in counts.counts.items():
            totals[k] = totals.get(k, 0) + v
    return Counts(totals, shots)


def twirl_average_channel(channel: PauliChannel | np.ndarray, n: int) -> PauliChannel:
    """Exact average of the channel over conjugation by all 4^n Paulis.

    A stochastic Pauli channel is already twirl-invariant and is returned
    unchanged.  A unitary error U (e.g. a coherent over-rotation) twirls
    to the Pauli channel with rates |Tr(P U)|^2 / 4^n.
    """
    if n > 2:
        raise ValueError("twirl averaging is kept at dense-oracle scale (n <= 2)")
    if isinstance(channel, PauliChannel):
        if channel.n != n:
            raise ValueError(f"channel acts on {channel.n} qubits, expected {n}")
        return channel
    u = np.asarray(channel, dtype=complex)
    if u.shape != (2**n, 2**n):
        raise ValueError(f"expected a {2**n}x{2**n} unitary, got {u.shape}")
    rates = {}
    for p in all_paulis(n):
        c = abs((pauli_matrix(p) @ u).trace()) ** 2 / 4**n
        if c > 1e-15:
            rates[p] = c
    total = math.fsum(rates.values())
    return PauliChannel(n, {p: c / total for p, c in rates.items()})
