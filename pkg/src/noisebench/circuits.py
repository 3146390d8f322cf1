"""Gate-level circuit IR in time-step cycles, plus the standard circuit builders.

A circuit is an ordered list of cycles; each cycle is one time step of
parallel gates with at most one operation per qubit.  Measurement is an
explicit final cycle of MEASURE gates.  Gates carry an easy/hard tag:
CNOT is hard by default, every single-qubit gate is easy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .paulis import PauliString, pauli_matrix, pauli_mul

GATE_ARITY = {
    "H": 1, "X": 1, "I": 1, "RX90": 1, "RY90": 1, "RZ90": 1,
    "PAULI": 1, "MEASURE": 1, "CNOT": 2,
}

_SQRT2 = np.sqrt(2.0)
_GATE_UNITARIES_1Q = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / _SQRT2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "I": np.eye(2, dtype=complex),
    "RX90": np.array([[1, -1j], [-1j, 1]], dtype=complex) / _SQRT2,
    "RY90": np.array([[1, -1], [1, 1]], dtype=complex) / _SQRT2,
    "RZ90": np.array([[np.exp(-1j * np.pi / 4), 0], [0, np.exp(1j * np.pi / 4)]]),
}
# control is the first tensor factor
CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    pauli: str | None = None
    hardness: str = ""

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"{self.kind} gate repeats a qubit: {self.qubits}")
        if len(self.qubits) != GATE_ARITY[self.kind]:
            raise CircuitError(
                f"{self.kind} takes {GATE_ARITY[self.kind]} qubit(s), got {self.qubits}"
            )
        if self.kind == "PAULI":
            if self.pauli not in ("I", "X", "Y", "Z"):
                raise CircuitError(f"PAULI gate needs a single letter, got {self.pauli!r}")
        elif self.pauli is not None:
            raise CircuitError(f"{self.kind} gate does not take a pauli label")
        if not self.hardness:
            object.__setattr__(self, "hardness", "hard" if self.kind == "CNOT" else "easy")
        elif self.hardness not in ("easy", "hard"):
            raise CircuitError(f"hardness must be easy|hard, got {self.hardness!r}")

    def unitary(self) -> np.ndarray:
        if self.kind == "MEASURE":
            raise CircuitError("MEASURE has no unitary")
        if self.kind == "CNOT":
            return CNOT_MATRIX
        if self.kind == "PAULI":
            from .paulis import SINGLE_QUBIT_PAULIS

            return SINGLE_QUBIT_PAULIS[self.pauli]
        return _GATE_UNITARIES_1Q[self.kind]


@dataclass(frozen=True)
class Cycle:
    gates: tuple[Gate, ...]

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        seen: set[int] = set()
        for g in self.gates:
            for q in g.qubits:
                if q in seen:
                    raise CircuitError(f"more than one operation on qubit {q} in a cycle")
                seen.add(q)

    @property
    def qubits(self) -> set[int]:
        return {q for g in self.gates for q in g.qubits}

    def is_measurement(self) -> bool:
        return any(g.kind == "MEASURE" for g in self.gates)

    def is_hard(self) -> bool:
        return any(g.hardness == "hard" for g in self.gates)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    cycles: tuple[Cycle, ...]
    measured: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "cycles", tuple(self.cycles))
        object.__setattr__(self, "measured", tuple(self.measured))
        for i, cyc in enumerate(self.cycles):
            for g in cyc.gates:
                if any(q >= self.n_qubits or q < 0 for q in g.qubits):
                    raise CircuitError(
                        f"cycle {i}: gate {g.kind}{g.qubits} outside register of "
                        f"{self.n_qubits} qubits"
                    )
                if g.kind == "MEASURE" and i != len(self.cycles) - 1:
                    raise CircuitError(f"cycle {i}: measurement before the final cycle")
        if len(set(self.measured)) != len(self.measured):
            raise CircuitError("repeated measured qubit")
        if self.measured:
            final = self.cycles[-1] if self.cycles else Cycle(())
            meas_qubits = tuple(g.qubits[0] for g in final.gates if g.kind == "MEASURE")
            if set(meas_qubits) != set(self.measured):
                raise CircuitError("measured qubits disagree with the final MEASURE cycle")

    @property
    def body(self) -> tuple[Cycle, ...]:
        """Cycles without the trailing measurement cycle."""
        if self.cycles and self.cycles[-1].is_measurement():
            return self.cycles[:-1]
        return self.cycles

    def used_qubits(self) -> tuple[int, ...]:
        used = set(self.measured)
        for cyc in self.cycles:
            used |= cyc.qubits
        return tuple(sorted(used))

    def gate_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for cyc in self.cycles:
            for g in cyc.gates:
                out[g.kind] = out.get(g.kind, 0) + 1
        return out

    def with_body(self, cycles: list[Cycle] | tuple[Cycle, ...]) -> "Circuit":
        """Same register and measurement, different body cycles."""
        tail = (self.cycles[-1],) if self.cycles and self.cycles[-1].is_measurement() else ()
        return Circuit(self.n_qubits, tuple(cycles) + tail, self.measured)


def measure_cycle(qubits) -> Cycle:
    return Cycle(tuple(Gate("MEASURE", (q,)) for q in qubits))


@dataclass(frozen=True)
class Topology:
    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        nodeset = set(self.nodes)
        for a, b in self.edges:
            if a == b:
                raise CircuitError(f"self-edge on node {a}")
            if a not in nodeset or b not in nodeset:
                raise CircuitError(f"edge ({a}, {b}) references a missing node")

    def has_edge(self, a: int, b: int) -> bool:
        return (a, b) in set(self.edges)

    def adjacent(self, a: int, b: int) -> bool:
        es = set(self.edges)
        return (a, b) in es or (b, a) in es

    def neighbors(self, q: int) -> tuple[int, ...]:
        out = {b for a, b in self.edges if a == q} | {a for a, b in self.edges if b == q}
        return tuple(sorted(out))

    def couplings(self) -> tuple[tuple[int, int], ...]:
        """Undirected couplings, each reported once as (min, max)."""
        return tuple(sorted({(min(a, b), max(a, b)) for a, b in self.edges}))

    def to_json(self) -> dict:
        return {"nodes": list(self.nodes), "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, obj: dict) -> "Topology":
        return cls(tuple(obj["nodes"]), tuple((a, b) for a, b in obj["edges"]))

    @classmethod
    def line(cls, n: int) -> "Topology":
        edges = []
        for q in range(n - 1):
            edges += [(q, q + 1), (q + 1, q)]
        return cls(tuple(range(n)), tuple(edges))


def _load_data(name: str) -> dict:
    with resources.files("noisebench.data").joinpath(name).open() as fh:
        return json.load(fh)


@lru_cache(maxsize=1)
def toronto_topology() -> Topology:
    """27-node register with directed couplings for every chain CNOT we ship."""
    return Topology.from_json(_load_data("toronto_topology.json"))


@dataclass(frozen=True)
class GhzMapping:
    """Root qubit plus the CNOT rows appended for each chain size 2..max."""

    root: int
    rows: tuple[tuple[int, int, int], ...]  # (size, control, target)

    @classmethod
    def from_json(cls, obj: dict) -> "GhzMapping":
        return cls(obj["root"], tuple((r["size"], r["control"], r["target"]) for r in obj["rows"]))

    @property
    def max_size(self) -> int:
        return self.rows[-1][0] if self.rows else 1


@lru_cache(maxsize=1)
def default_ghz_mapping() -> GhzMapping:
    return GhzMapping.from_json(_load_data("ghz_chain_mapping.json"))


def line_ghz_mapping(qubits: tuple[int, ...]) -> GhzMapping:
    rows = tuple((i + 2, qubits[i], qubits[i + 1]) for i in range(len(qubits) - 1))
    return GhzMapping(qubits[0], rows)


def build_bell(q_control: int, q_target: int) -> Circuit:
    """H on the control then CNOT(control, target); both qubits measured."""
    if q_control == q_target:
        raise CircuitError("control and target must differ")
    n = max(q_control, q_target) + 1
    cycles = (
        Cycle((Gate("H", (q_control,)),)),
        Cycle((Gate("CNOT", (q_control, q_target)),)),
        measure_cycle((q_control, q_target)),
    )
    return Circuit(n, cycles, (q_control, q_target))


def build_ghz(n: int, mapping: GhzMapping | None = None,
              topology: Topology | None = None) -> Circuit:
    """Entangled chain of n qubits: H on the root, then the CNOT rows for sizes 2..n.

    One gate per cycle; measures the touched qubits in the order they join
    the chain.
    """
    mapping = mapping or default_ghz_mapping()
    if not 2 <= n <= mapping.max_size:
        raise CircuitError(f"size {n} outside [2, {mapping.max_size}]")
    cycles = [Cycle((Gate("H", (mapping.root,)),))]
    touched = [mapping.root]
    for size, control, target in mapping.rows:
        if size > n:
            break
        if topology is not None and not topology.has_edge(control, target):
            raise CircuitError(f"mapping edge ({control}, {target}) not in topology")
        cycles.append(Cycle((Gate("CNOT", (control, target)),)))
        touched.append(target)
    cycles.append(measure_cycle(touched))
    return Circuit(max(touched) + 1, tuple(cycles), tuple(touched))


def build_bv(secret: str, data_qubits: tuple[int, ...], oracle_qubit: int) -> Circuit:
    """Oracle-query circuit whose noiseless output is exactly `secret`.

    Layers: H on all data plus X on the oracle, H on the oracle, one CNOT
    cycle per set bit (data qubit controls, oracle is target), H on all
    data, measure the data qubits.
    """
    data_qubits = tuple(data_qubits)
    if len(secret) != len(data_qubits):
        raise CircuitError(f"secret length {len(secret)} != {len(data_qubits)} data qubits")
    if any(c not in "01" for c in secret):
        raise CircuitError(f"secret must be a bitstring, got {secret!r}")
    if oracle_qubit in data_qubits:
        raise CircuitError("oracle qubit collides with a data qubit")
    n = max((*data_qubits, oracle_qubit)) + 1
    cycles = [
        Cycle(tuple(Gate("H", (q,)) for q in data_qubits) + (Gate("X", (oracle_qubit,)),)),
        Cycle((Gate("H", (oracle_qubit,)),)),
    ]
    for bit, q in zip(secret, data_qubits):
        if bit == "1":
            cycles.append(Cycle((Gate("CNOT", (q, oracle_qubit)),)))
    cycles.append(Cycle(tuple(Gate("H", (q,)) for q in data_qubits)))
    cycles.append(measure_cycle(data_qubits))
    return Circuit(n, tuple(cycles), data_qubits)


# ---------------------------------------------------------------------------
# JSON serialization

def _gate_to_json(g: Gate) -> dict:
    out = {"kind": g.kind, "qubits": list(g.qubits)}
    if g.pauli is not None:
        out["pauli"] = g.pauli
    if g.hardness != ("hard" if g.kind == "CNOT" else "easy"):
        out["hardness"] = g.hardness
    return out


def circuit_to_json(c: Circuit) -> dict:
    return {
        "n_qubits": c.n_qubits,
        "cycles": [[_gate_to_json(g) for g in cyc.gates] for cyc in c.cycles],
        "measured": list(c.measured),
    }


def serialize(c: Circuit) -> str:
    return json.dumps(circuit_to_json(c), indent=1)


def circuit_from_json(obj: dict) -> Circuit:
    try:
        n = int(obj["n_qubits"])
        raw_cycles = obj["cycles"]
        measured = tuple(int(q) for q in obj["measured"])
    except (KeyError, TypeError) as exc:
        raise CircuitError(f"missing or malformed circuit field: {exc}") from exc
    cycles = []
    for i, raw in enumerate(raw_cycles):
        gates = []
        for graw in raw:
            try:
                gates.append(
                    Gate(
                        graw["kind"],
                        tuple(int(q) for q in graw["qubits"]),
                        pauli=graw.get("pauli"),
                        hardness=graw.get("hardness", ""),
                    )
                )
            except (KeyError, TypeError, CircuitError) as exc:
                raise CircuitError(f"cycle {i}: {exc}") from exc
        try:
            cycles.append(Cycle(tuple(gates)))
        except CircuitError as exc:
            raise CircuitError(f"cycle {i}: {exc}") from exc
    try:
        return Circuit(n, tuple(cycles), measured)
    except CircuitError:
        # re-validate per cycle so errors carry the cycle index
        for i, cyc in enumerate(cycles):
            for g in cyc.gates:
                if any(q >= n or q < 0 for q in g.qubits):
                    raise CircuitError(
                        f"cycle {i}: qubit index {max(g.qubits)} outside register of {n}"
                    ) from None
        raise


def parse(text: str) -> Circuit:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CircuitError(f"line {exc.lineno}: {exc.msg}") from exc
    return circuit_from_json(obj)


# ---------------------------------------------------------------------------
# Clifford action of gates on Pauli strings.  Tables are built numerically
# from the gate unitaries so there is nothing to transcribe.

@lru_cache(maxsize=None)
def _conjugation_table(kind: str) -> dict[str, tuple[str, int]]:
    from .paulis import all_paulis

    arity = GATE_ARITY[kind]
    u = CNOT_MATRIX if kind == "CNOT" else _GATE_UNITARIES_1Q[kind]
    dim = 2**arity
    table = {}
    for p in all_paulis(arity):
        conj = u @ pauli_matrix(p) @ u.conj().T
        for q in all_paulis(arity):
            overlap = (pauli_matrix(q).conj().T @ conj).trace().real / dim
            if abs(overlap - 1) < 1e-9:
                table[p.label] = (q.label, 1)
                break
            if abs(overlap + 1) < 1e-9:
                table[p.label] = (q.label, -1)
                break
        else:
            raise CircuitError(f"{kind} does not map {p.label} to a signed Pauli")
    return table


def conjugate_pauli(gate: Gate, p: PauliString) -> tuple[PauliString, int]:
    """(U P U^dag, sign) for a Clifford gate U acting inside p's register."""
    if gate.kind == "MEASURE":
        raise CircuitError("cannot conjugate through a measurement")
    if gate.kind == "PAULI":
        w = PauliString.single(p.n, gate.qubits[0], gate.pauli)
        left, kl = pauli_mul(w, p)
        out, kr = pauli_mul(left, w)  # W P W^dag = W P W for Pauli W
        k = (kl + kr) % 4
        if k not in (0, 2):
            raise CircuitError("Pauli conjugation produced an imaginary phase")
        return out, 1 if k == 0 else -1
    table = _conjugation_table(gate.kind)
    local = PauliString.from_label("".join(p.letter(q) for q in gate.qubits))
    out_label, sign = table[local.label]
    x, z = p.x, p.z
    from .paulis import _LETTER_TO_BITS  # noqa: PLC0415

    for q, letter in zip(gate.qubits, out_label):
        xb, zb = _LETTER_TO_BITS[letter]
        x = (x & ~(1 << q)) | (xb << q)
        z = (z & ~(1 << q)) | (zb << q)
    return PauliString(p.n, x, z), sign


def conjugate_pauli_through_cycle(cycle: Cycle, p: PauliString) -> tuple[PauliString, int]:
    """Conjugate through every gate of a cycle (disjoint supports commute)."""
    sign = 1
    for g in cycle.gates:
        p, s = conjugate_pauli(g, p)
        sign *= s
    return p, sign
