"""Per-cycle Pauli-channel reconstruction from twirled-sequence decays.

For each cycle of interest the experiment prepares a product eigenstate of
a chosen Pauli basis, applies m repetitions of the cycle with fresh random
Pauli rounds folded between them (corrections telescope so the ideal
sequence equals cycle^m), unrotates, and measures.  The Walsh-Hadamard
transform of the outcome distribution estimates Pauli expectations, whose
decay A f^m across sequence lengths yields per-Pauli fidelities; inverting
the restricted transform reconstructs the error rates.

A cycle conflates Paulis that its own Clifford action maps into each
other (e.g. a CNOT cycle cannot distinguish IY from ZY): the measured
fidelity is the orbit's geometric mean.  ``resolve_degeneracies``
reassigns each orbit class's mass to the weight-one member when one
exists, else to the lexicographically first member.
"""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass

import numpy as np

from .circuits import (
    Circuit,
    Cycle,
    Gate,
    Topology,
    conjugate_pauli_through_cycle,
    measure_cycle,
)
from .paulis import (
    FidelityVector,
    PauliChannel,
    PauliString,
    commutes,
    fidelities_to_channel,
    pauli_mul,
)
from .sim import Counts, Distribution, as_distribution

log = logging.getLogger(__name__)

_LETTERS = "IXYZ"


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class CycleSpec:
    """One cycle to characterize, with a stable id."""

    id: str
    cycle: Cycle

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(sorted(self.cycle.qubits))


def unique_cycles(circuits: list[Circuit]) -> list[CycleSpec]:
    """Deduplicated non-measurement cycles across circuits, in first-seen order."""
    seen: dict[Cycle, str] = {}
    specs = []
    for circuit in circuits:
        for cyc in circuit.body:
            if cyc in seen or not cyc.gates:
                continue
            name = "+".join(
                f"{g.kind}{','.join(map(str, g.qubits))}" for g in cyc.gates
            )
            spec = CycleSpec(f"c{len(specs):02d}-{name}", cyc)
            seen[cyc] = spec.id
            specs.append(spec)
    return specs


@dataclass(frozen=True)
class KNRConfig:
    seq_lengths: tuple[int, ...] = (4, 12)
    randomizations: int = 30
    shots: int = 128

    def __post_init__(self):
        if len(set(self.seq_lengths)) != len(self.seq_lengths):
            raise DesignError("sequence lengths must be distinct")
        if len(self.seq_lengths) < 2:
            raise DesignError("need at least two sequence lengths")
        if any(m < 1 for m in self.seq_lengths):
            raise DesignError("sequence lengths must be >= 1")
        # even lengths with even m/2 keep every Pauli orbit sign positive
        if any(m % 4 for m in self.seq_lengths):
            log.warning("sequence lengths %s are not multiples of 4; odd orbit "
                        "signs may flip transformed values", self.seq_lengths)
        if self.randomizations < 1:
            raise DesignError("need at least one randomization")


@dataclass(frozen=True)
class ManifestEntry:
    index: int
    cycle_id: str
    m: int
    r: int
    basis: tuple[tuple[int, str], ...]  # (qubit, letter), sorted by qubit


@dataclass(frozen=True)
class KNRManifest:
    config: KNRConfig
    seed: int
    cycles: tuple[CycleSpec, ...]
    entries: tuple[ManifestEntry, ...]

    def spec(self, cycle_id: str) -> CycleSpec:
        for s in self.cycles:
            if s.id == cycle_id:
                return s
        raise KeyError(cycle_id)

    def to_json(self) -> dict:
        from .circuits import _gate_to_json

        return {
            "config": {
                "seq_lengths": list(self.config.seq_lengths),
                "randomizations": self.config.randomizations,
                "shots": self.config.shots,
            },
            "seed": self.seed,
            "cycles": [
                {"id": s.id, "gates": [_gate_to_json(g) for g in s.cycle.gates]}
                for s in self.cycles
            ],
            "entries": [
                {"index": e.index, "cycle": e.cycle_id, "m": e.m, "r": e.r,
                 "basis": {str(q): letter for q, letter in e.basis}}
                for e in self.entries
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "KNRManifest":
        cfg = KNRConfig(
            tuple(obj["config"]["seq_lengths"]),
            int(obj["config"]["randomizations"]),
            int(obj["config"]["shots"]),
        )
        cycles = tuple(
            CycleSpec(
                c["id"],
                Cycle(tuple(
                    Gate(g["kind"], tuple(g["qubits"]), pauli=g.get("pauli"),
                         hardness=g.get("hardness", ""))
                    for g in c["gates"]
                )),
            )
            for c in obj["cycles"]
        )
        entries = tuple(
            ManifestEntry(
                int(e["index"]), e["cycle"], int(e["m"]), int(e["r"]),
                tuple(sorted((int(q), letter) for q, letter in e["basis"].items())),
            )
            for e in obj["entries"]
        )
        return cls(cfg, int(obj["seed"]), cycles, entries)


def _two_coloring(qubits: tuple[int, ...], topology: Topology | None) -> dict[int, int]:
    """Color the cycle support so adjacent qubits differ (falls back to parity
    of position for non-bipartite subgraphs)."""
    if topology is None or len(qubits) <= 2:
        return {q: i % 2 for i, q in enumerate(qubits)}
    color: dict[int, int] = {}
    for start in qubits:
        if start in color:
            continue
        color[start] = 0
        queue = [start]
        while queue:
            q = queue.pop()
            for nb in topology.neighbors(q):
                if nb not in qubits:
                    continue
                if nb not in color:
                    color[nb] = 1 - color[q]
                    queue.append(nb)
                elif color[nb] == color[q]:
                    log.warning("support %s is not bipartite; using position parity",
                                qubits)
                    return {q: i % 2 for i, q in enumerate(qubits)}
    return color


def _bases_for(qubits: tuple[int, ...], topology: Topology | None
               ) -> list[tuple[tuple[int, str], ...]]:
    if len(qubits) == 1:
        return [((qubits[0], letter),) for letter in "XYZ"]
    color = _two_coloring(qubits, topology)
    bases = []
    for a in "XYZ":
        for b in "XYZ":
            bases.append(tuple((q, a if color[q] == 0 else b) for q in qubits))
    return bases


def _prep_cycles(basis: tuple[tuple[int, str], ...]) -> list[Cycle]:
    """|0..0> -> product +1 eigenstates: X needs H, Y needs H then RZ90."""
    h_qubits = [q for q, letter in basis if letter in ("X", "Y")]
    y_qubits = [q for q, letter in basis if letter == "Y"]
    out = []
    if h_qubits:
        out.append(Cycle(tuple(Gate("H", (q,)) for q in h_qubits)))
    if y_qubits:
        out.append(Cycle(tuple(Gate("RZ90", (q,)) for q in y_qubits)))
    return out


def _unprep_cycles(basis: tuple[tuple[int, str], ...]) -> list[Cycle]:
    h_qubits = [q for q, letter in basis if letter in ("X", "Y")]
    y_qubits = [q for q, letter in basis if letter == "Y"]
    out = []
    for _ in range(3):  # RZ90^3 = RZ90 inverse up to phase
        if y_qubits:
            out.append(Cycle(tuple(Gate("RZ90", (q,)) for q in y_qubits)))
    if h_qubits:
        out.append(Cycle(tuple(Gate("H", (q,)) for q in h_qubits)))
    return out


def _pauli_round(p: PauliString) -> Cycle | None:
    gates = tuple(
        Gate("PAULI", (q,), pauli=p.letter(q)) for q in p.support
    )
    return Cycle(gates) if gates else None


def _sequence_circuit(spec: CycleSpec, m: int, basis: tuple[tuple[int, str], ...],
                      n_qubits: int, rng: np.random.Generator) -> Circuit:
    qubits = spec.qubits
    cycles: list[Cycle] = list(_prep_cycles(basis))
    draws = [
        PauliString.from_label("".join(_LETTERS[k] for k in rng.integers(0, 4, len(qubits))))
        .embedded(n_qubits, qubits)
        for _ in range(m)
    ]
    prev_correction: PauliString | None = None
    for t in range(m):
        round_p = draws[t]
        if prev_correction is not None:
            round_p, _ = pauli_mul(round_p, prev_correction)
        rc = _pauli_round(round_p)
        if rc is not None:
            cycles.append(rc)
        cycles.append(spec.cycle)
        prev_correction, _ = conjugate_pauli_through_cycle(spec.cycle, draws[t])
    if prev_correction is not None:
        rc = _pauli_round(prev_correction)
        if rc is not None:
            cycles.append(rc)
    cycles.extend(_unprep_cycles(basis))
    cycles.append(measure_cycle(qubits))
    return Circuit(n_qubits, tuple(cycles), qubits)


def design_knr(cycles: list[CycleSpec], config: KNRConfig = KNRConfig(),
               topology: Topology | None = None,
               seed: int = 0) -> tuple[list[Circuit], KNRManifest]:
    """Twirled-sequence circuits for every (cycle, length, randomization, basis).

    The basis schedule covers Z-type Paulis directly and X/Y-type ones via
    pre/post single-qubit rotations; a two-coloring of the support keeps
    the count at 9 bases for multi-qubit cycles (3 for single-qubit ones).
    """
    if not cycles:
        raise DesignError("no cycles to characterize")
    ids = [s.id for s in cycles]
    if len(set(ids)) != len(ids):
        raise DesignError("cycle ids must be unique")
    n_qubits = max(max(s.qubits) for s in cycles) + 1
    circuits: list[Circuit] = []
    entries: list[ManifestEntry] = []
    for spec in cycles:
        bases = _bases_for(spec.qubits, topology)
        for m in config.seq_lengths:
            for r in range(config.randomizations):
                cycle_tag = zlib.crc32(spec.id.encode())
                rng = np.random.default_rng(
                    np.random.SeedSequence((seed, cycle_tag, m, r))
                )
                for basis in bases:
                    circuits.append(_sequence_circuit(spec, m, basis, n_qubits, rng))
                    entries.append(ManifestEntry(len(circuits) - 1, spec.id, m, r, basis))
    manifest = KNRManifest(config, seed, tuple(cycles), tuple(entries))
    return circuits, manifest


# ---------------------------------------------------------------------------
# Analysis

@dataclass(frozen=True)
class DecayFit:
    a: float
    f: float
    residual: float
    err: float | None = None  # bootstrap std over randomizations

    def __post_init__(self):
        if not -1.0 <= self.f <= 1.0:
            raise ValueError(f"fidelity {self.f} outside [-1, 1]")
        if not 0.0 <= self.a <= 1.5:
            raise ValueError(f"amplitude {self.a} outside [0, 1.5]")


@dataclass(frozen=True)
class CycleFits:
    cycle_id: str
    qubits: tuple[int, ...]
    fits: dict[PauliString, DecayFit]          # keys local to `qubits`
    unreliable: frozenset[PauliString] = frozenset()


def _masks_of_interest(n_local: int) -> list[tuple[int, ...]]:
    """Bit positions (into the measured string) with weight 1 or 2."""
    out = []
    for i in range(n_local):
        out.append((i,))
    for i in range(n_local):
        for j in range(i + 1, n_local):
            out.append((i, j))
    return out


def _wht_values(dist: Distribution, masks: list[tuple[int, ...]]) -> dict[tuple[int, ...], float]:
    out = {}
    for mask in masks:
        acc = 0.0
        for bits, p in dist.probs.items():
            parity = sum(int(bits[i]) for i in mask) % 2
            acc += p if parity == 0 else -p
        out[mask] = acc
    return out


def _pauli_for(mask: tuple[int, ...], basis: tuple[tuple[int, str], ...]) -> PauliString:
    letters = ["I"] * len(basis)
    for i in mask:
        letters[i] = basis[i][1]
    return PauliString.from_label("".join(letters))


def _fit_log_linear(ms: np.ndarray, ys: np.ndarray) -> tuple[float, float, float]:
    logy = np.log(ys)
    if len(ms) == 2:
        slope = (logy[1] - logy[0]) / (ms[1] - ms[0])
        intercept = logy[0] - slope * ms[0]
        return float(np.exp(intercept)), float(np.exp(slope)), 0.0
    slope, intercept = np.polyfit(ms, logy, 1)
    resid = float(np.sum((logy - (intercept + slope * ms)) ** 2))
    return float(np.exp(intercept)), float(np.exp(slope)), resid


def estimate_fidelities(manifest: KNRManifest, counts: list[Counts],
                        bootstrap: int = 50) -> dict[str, CycleFits]:
    """Per-cycle, per-Pauli decay fits from the executed design.

    Transformed statistics are averaged over randomizations (pooling
    preserves the A f^m form exactly); each Pauli is then solved from its
    sequence lengths, two points exactly or more by log-space regression.
    Transformed values <= 0 mark the Pauli unreliable.
    """
    if len(counts) < len(manifest.entries):
        raise ValueError(
            f"{len(manifest.entries)} designed circuits but only {len(counts)} counts"
        )
    out: dict[str, CycleFits] = {}
    rng = np.random.default_rng(np.random.SeedSequence((manifest.seed, 0xB007)))
    for spec in manifest.cycles:
        qubits = spec.qubits
        masks = _masks_of_interest(len(qubits))
        # (basis, m) -> per-randomization WHT value arrays
        grouped: dict[tuple, list[dict]] = {}
        for e in manifest.entries:
            if e.cycle_id != spec.id:
                continue
            dist = as_distribution(counts[e.index])
            grouped.setdefault((e.basis, e.m), []).append(_wht_values(dist, masks))
        # pauli -> {m: mean over (covering bases x randomizations)}
        per_pauli: dict[PauliString, dict[int, list[np.ndarray]]] = {}
        for (basis, m), rows in grouped.items():
            for mask in masks:
                p = _pauli_for(mask, basis)
                values = np.array([row[mask] for row in rows])
                per_pauli.setdefault(p, {}).setdefault(m, []).append(values)
        fits: dict[PauliString, DecayFit] = {}
        unreliable: set[PauliString] = set()
        for p, by_m in per_pauli.items():
            ms = np.array(sorted(by_m))
            samples = {m: np.concatenate(by_m[m]) for m in by_m}
            ys = np.array([samples[m].mean() for m in ms])
            if np.any(ys <= 0.0):
                unreliable.add(p)
                continue
            a, f, resid = _fit_log_linear(ms, ys)
            if bootstrap and min(len(samples[m]) for m in ms) > 1:
                boots = []
                for _ in range(bootstrap):
                    by = []
                    ok = True
                    for m in ms:
                        draw = rng.integers(0, len(samples[m]), len(samples[m]))
                        val = samples[m][draw].mean()
                        if val <= 0:
                            ok = False
                            break
                        by.append(val)
                    if ok:
                        boots.append(_fit_log_linear(ms, np.array(by))[1])
                err = float(np.std(boots)) if len(boots) > 1 else None
            else:
                err = None
            fits[p] = DecayFit(min(max(a, 0.0), 1.5), min(max(f, -1.0), 1.0), resid, err)
        out[spec.id] = CycleFits(spec.id, qubits, fits, frozenset(unreliable))
    return out


@dataclass(frozen=True)
class KNRResult:
    """Reconstructed Pauli channel of one cycle, on its local qubit order.

    `fit_residual` is the worst disagreement between the measured
    fidelities and those of the projected channel; mass that the support
    cannot represent (e.g. correlations beyond nearest neighbors) shows up
    here.
    """

    cycle_id: str
    qubits: tuple[int, ...]
    channel: PauliChannel
    annotations: tuple[dict, ...] = ()
    fit_residual: float = 0.0

    @property
    def total_error(self) -> float:
        return 1.0 - self.channel.rate(PauliString.identity(self.channel.n))

    def to_json(self) -> dict:
        return {
            "cycle": self.cycle_id,
            "qubits": list(self.qubits),
            "rates": self.channel.to_json(),
            "total_error": self.total_error,
            "fit_residual": self.fit_residual,
            "annotations": list(self.annotations),
        }


def reconstruct(fits: dict[str, CycleFits], topology: Topology | None = None,
                k: int = 1) -> dict[str, KNRResult]:
    """Invert per-cycle fidelities into Pauli error rates.

    The rate support is the identity, all weight-one Paulis on the cycle
    qubits, and weight-two Paulis on topology-adjacent qubit pairs (every
    pair when no topology is given).  Raises if a needed fidelity is
    missing or marked unreliable.
    """
    if k != 1:
        raise DesignError("only k=1 reconstruction is supported")
    out = {}
    for cycle_id, cf in fits.items():
        n_local = len(cf.qubits)
        support = [PauliString.identity(n_local)]
        for p in cf.fits:
            if p.weight == 1:
                support.append(p)
            elif p.weight == 2:
                qa, qb = (cf.qubits[i] for i in p.support)
                if topology is None or topology.adjacent(qa, qb):
                    support.append(p)
        support = sorted(set(support))
        missing = [p.label for p in support
                   if not p.is_identity() and p not in cf.fits]
        bad = [p.label for p in support if p in cf.unreliable]
        if missing or bad:
            raise ValueError(
                f"cycle {cycle_id}: underdetermined support "
                f"(missing {missing}, unreliable {bad})"
            )
        values = {p: fit.f for p, fit in cf.fits.items() if p not in cf.unreliable}
        values[PauliString.identity(n_local)] = 1.0
        fv = FidelityVector(n_local, values)
        channel = fidelities_to_channel(fv, support)
        residual = max(
            abs(math.fsum(
                channel.rate(q) if commutes(p, q) else -channel.rate(q)
                for q in support
            ) - f)
            for p, f in values.items()
        )
        if residual > 0.05:
            log.warning("cycle %s: fidelities disagree with the supported channel "
                        "by %.3f; noise may extend beyond the k=1 support",
                        cycle_id, residual)
        out[cycle_id] = KNRResult(cycle_id, cf.qubits, channel, fit_residual=residual)
    return out


def _orbit(cycle: Cycle, p: PauliString, n_qubits: int,
           qubits: tuple[int, ...]) -> list[PauliString]:
    """Conjugation orbit of a local Pauli under the cycle (signs ignored)."""
    orbit = [p]
    current = p.embedded(n_qubits, qubits)
    for _ in range(16):
        current, _ = conjugate_pauli_through_cycle(cycle, current)
        local = current.restricted(qubits)
        if local == p:
            return orbit
        orbit.append(local)
    raise ValueError("conjugation orbit did not close")


def resolve_degeneracies(result: KNRResult, cycle: Cycle) -> KNRResult:
    """Reassign each conjugation-orbit class's mass to one representative.

    Weight-one members are preferred; classes with no weight-one member go
    to the lexicographically first member (a deliberate, documented bias).
    Total error is preserved exactly, and every reassignment is annotated.
    """
    n_qubits = max(cycle.qubits | set(result.qubits)) + 1
    rates = dict(result.channel.rates)
    seen: set[PauliString] = set()
    new_rates: dict[PauliString, float] = {}
    annotations: list[dict] = []
    for p in sorted(rates):
        if p in seen:
            continue
        orbit = [q for q in _orbit(cycle, p, n_qubits, result.qubits) if q in rates]
        seen.update(orbit)
        if p.is_identity() or len(orbit) == 1:
            new_rates[p] = rates[p]
            continue
        total = math.fsum(rates[q] for q in orbit)
        weight_one = sorted(q for q in orbit if q.weight == 1)
        rep = weight_one[0] if weight_one else sorted(orbit)[0]
        new_rates[rep] = new_rates.get(rep, 0.0) + total
        annotations.append({
            "class": sorted(q.label for q in orbit),
            "assigned_to": rep.label,
            "rate": total,
        })
    channel = PauliChannel(result.channel.n, new_rates)
    return KNRResult(result.cycle_id, result.qubits, channel,
                     result.annotations + tuple(annotations), result.fit_residual)


def depolarizing_summary(result: KNRResult) -> float:
    """Average over the cycle's qubits of the summed weight-one rates.

    Interpreting the weight-one mass on each qubit as its isotropic
    depolarizing strength and averaging matches how the coarse per-coupling
    estimates are defined.
    """
    per_qubit = []
    for i in range(len(result.qubits)):
        total = math.fsum(
            r for p, r in result.channel.rates.items()
            if p.weight == 1 and p.support == (i,)
        )
        per_qubit.append(total)
    return float(np.mean(per_qubit)) if per_qubit else 0.0
