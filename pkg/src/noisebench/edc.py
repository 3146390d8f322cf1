"""Empirical direct characterization: small test-circuit suites, closed-form
readout and depolarizing fits, model composition, and the refinement loop.

The protocol fits a coarse model from cheap experiments: a blank circuit
and X layers give per-qubit readout flips (and optionally an X-gate
depolarizing rate), and per-coupling Bell circuits give one isotropic
depolarizing parameter per CNOT orientation.  The fitted pieces compose
into a NoiseModel the simulator can run, and the refinement loop widens
the suite until the model's distance to the device meets a threshold or
the refinement ladder is exhausted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

from .circuits import Circuit, Cycle, Gate, Topology, build_bell, measure_cycle
from .metrics import tvd
from .paulis import DepolarizingParams, ReadoutError
from .qpu import VirtualQPU, derived_seed
from .sim import Counts, Distribution, NoiseModel, as_distribution, run_exact

log = logging.getLogger(__name__)

Tag = tuple
FLIP_PER_DEPOL = 2.0 / 3.0  # X and Y flip a measured bit, Z does not


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class SuiteMode:
    """Which readout circuits to run and how to lay them out."""

    levels: int = 2          # 2 = blank + X, 3 = blank + X + XX
    per_qubit: bool = False  # isolate one operation per circuit

    def __post_init__(self):
        if self.levels not in (2, 3):
            raise ValueError("levels must be 2 or 3")

    @classmethod
    def from_string(cls, text: str) -> "SuiteMode":
        layer, _, layout = text.lower().partition("-")
        if layer not in ("2c", "3c") or layout not in ("full", "perqubit"):
            raise ValueError(f"unknown mode {text!r}; use e.g. 2c-full or 3c-perqubit")
        return cls(levels=int(layer[0]), per_qubit=(layout == "perqubit"))

    def __str__(self):
        return f"{self.levels}c-{'perqubit' if self.per_qubit else 'full'}"


@dataclass(frozen=True)
class TestSuite:
    mode: SuiteMode
    qubits: tuple[int, ...]
    entries: tuple[tuple[Tag, Circuit], ...]

    def circuits(self) -> list[Circuit]:
        return [c for _, c in self.entries]

    def tags(self) -> list[Tag]:
        return [t for t, _ in self.entries]


def _x_layer_circuit(qubits: tuple[int, ...], on: tuple[int, ...], layers: int) -> Circuit:
    cycles = [Cycle(tuple(Gate("X", (q,)) for q in on)) for _ in range(layers)]
    cycles.append(measure_cycle(qubits))
    return Circuit(max(qubits) + 1, tuple(cycles), qubits)


def gen_suite(topology: Topology, mode: SuiteMode,
              bell_edges: list[tuple[int, int]] | None = None) -> TestSuite:
    """Readout layers plus a Bell test per directed coupling.

    Full layout runs one X layer (and one XX layer for 3c) across the whole
    register; per-qubit layout isolates one operation per circuit.
    """
    qubits = tuple(sorted(topology.nodes))
    entries: list[tuple[Tag, Circuit]] = []
    blank = Circuit(max(qubits) + 1, (measure_cycle(qubits),), qubits)
    entries.append((("blank",), blank))
    layer_counts = range(1, mode.levels)  # 1 for 2c; 1 and 2 for 3c
    if mode.per_qubit:
        for layers in layer_counts:
            tag = "x" if layers == 1 else "xx"
            for q in qubits:
                entries.append(((tag, q), _x_layer_circuit(qubits, (q,), layers)))
    else:
        for layers in layer_counts:
            tag = "x" if layers == 1 else "xx"
            entries.append(((tag, "full"), _x_layer_circuit(qubits, qubits, layers)))
    edges = list(topology.edges) if bell_edges is None else list(bell_edges)
    for c, t in edges:
        entries.append((("bell", c, t), build_bell(c, t)))
    return TestSuite(mode, qubits, tuple(entries))


@dataclass(frozen=True)
class EDCData:
    """Suite results: one counts object per test circuit, plus provenance."""

    suite: TestSuite
    results: dict[Tag, Counts | Distribution]
    job_ids: tuple[str, ...] = ()

    def __post_init__(self):
        missing = [t for t, _ in self.suite.entries if t not in self.results]
        if missing:
            raise FitError(f"suite counts incomplete; missing {missing}")


def run_suite(suite: TestSuite, qpu: VirtualQPU, shots: int,
              seed: int | None = None) -> EDCData:
    records = qpu.submit(suite.circuits(), shots, seed=seed)
    counts = [c for r in records for c in r.results]
    return EDCData(
        suite,
        dict(zip(suite.tags(), counts)),
        job_ids=tuple(r.job_id for r in records),
    )


def _prob_one(data: Counts | Distribution, position: int) -> float:
    dist = as_distribution(data)
    return sum(p for bits, p in dist.probs.items() if bits[position] == "1")


@dataclass(frozen=True)
class ReadoutFit:
    readout: dict[int, ReadoutError]
    x_depol: dict[int, DepolarizingParams] | None
    residuals: dict[int, float]


def fit_readout(data: EDCData) -> ReadoutFit:
    """Per-qubit readout flips from the blank and X-layer circuits.

    2c mode reads p0 from the blank circuit and p1 from the X layer.  3c
    mode additionally models the X gate as an effective bit flip
    q = 2 p_X / 3 and solves

        P(1|blank) = p0
        P(0|X)     = (1-q) p1 + q (1-p0)
        P(1|XX)    = ((1-q)^2 + q^2) p0 + 2 q (1-q) (1-p1)

    which is linear in q once p0 is known.  A degenerate system falls back
    to the 2c values for that qubit.
    """
    mode = data.suite.mode
    qubits = data.suite.qubits
    pos = {q: i for i, q in enumerate(qubits)}
    readout: dict[int, ReadoutError] = {}
    x_depol: dict[int, DepolarizingParams] = {}
    residuals: dict[int, float] = {}

    def layer_result(tag: str, q: int) -> Counts | Distribution:
        return data.results[(tag, q)] if mode.per_qubit else data.results[(tag, "full")]

    blank = data.results[("blank",)]
    for q in qubits:
        p0 = _prob_one(blank, pos[q])
        b = 1.0 - _prob_one(layer_result("x", q), pos[q])  # P(read 0 | one X)
        if mode.levels == 2:
            readout[q] = ReadoutError(min(max(p0, 0.0), 1.0), min(max(b, 0.0), 1.0))
            residuals[q] = 0.0
            continue
        a = _prob_one(layer_result("xx", q), pos[q])  # P(read 1 | two X)
        denom = 2.0 * (1.0 - p0 - b)
        if abs(denom) < 1e-9:
            log.warning("qubit %d: degenerate 3c system, falling back to 2c", q)
            readout[q] = ReadoutError(min(max(p0, 0.0), 1.0), min(max(b, 0.0), 1.0))
            residuals[q] = math.inf
            continue
        qflip = (a - p0) / denom
        qflip = min(max(qflip, 0.0), 1.0)
        p1 = (b - qflip * (1.0 - p0)) / (1.0 - qflip) if qflip < 1.0 else b
        p0c = min(max(p0, 0.0), 1.0)
        p1c = min(max(p1, 0.0), 1.0)
        readout[q] = ReadoutError(p0c, p1c)
        x_depol[q] = DepolarizingParams(min(qflip / FLIP_PER_DEPOL, 1.0), (q,))
        # residual of the solved system after clipping; zero unless clipped
        pred_b = (1 - qflip) * p1c + qflip * (1 - p0c)
        pred_a = ((1 - qflip) ** 2 + qflip**2) * p0c + 2 * qflip * (1 - qflip) * (1 - p1c)
        residuals[q] = max(abs(pred_b - b), abs(pred_a - a))
    return ReadoutFit(readout, x_depol if mode.levels == 3 else None, residuals)


def _bell_model_probs(p: float, readouts: tuple[ReadoutError, ReadoutError]) -> dict[str, float]:
    q = FLIP_PER_DEPOL * p
    same = ((1 - q) ** 2 + q**2) / 2.0
    diff = q * (1 - q)
    r0, r1 = readouts
    out = {}
    base = {"00": same, "01": diff, "10": diff, "11": same}
    for read in ("00", "01", "10", "11"):
        total = 0.0
        for true, pt in base.items():
            f0 = (1 - r0.p0 if read[0] == "0" else r0.p0) if true[0] == "0" else \
                 (r0.p1 if read[0] == "0" else 1 - r0.p1)
            f1 = (1 - r1.p0 if read[1] == "0" else r1.p0) if true[1] == "0" else \
                 (r1.p1 if read[1] == "0" else 1 - r1.p1)
            total += pt * f0 * f1
        out[read] = total
    return out


def _golden_section(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class CnotFit:
    p: float
    residual: float
    sigma: float      # 1-sigma curvature bound from the least-squares surface
    at_boundary: bool = False


def fit_cnot_depolarizing(bell_results: dict[tuple[int, int], Counts | Distribution],
                          readout: dict[int, ReadoutError]) -> dict[tuple[int, int], CnotFit]:
    """One isotropic depolarizing parameter per directed coupling.

    Minimizes the squared error between the observed Bell distribution and
    the two-qubit depolarizing prediction composed with the already-fitted
    readout confusion, by golden-section search on p in [0, 1].
    """
    fits = {}
    for (c, t), data in bell_results.items():
        dist = as_distribution(data)
        reads = (readout.get(c, ReadoutError(0, 0)), readout.get(t, ReadoutError(0, 0)))

        def sse(p: float) -> float:
            model = _bell_model_probs(p, reads)
            return math.fsum((dist.prob(k) - v) ** 2 for k, v in model.items())

        p_hat = _golden_section(sse, 0.0, 1.0)
        resid = sse(p_hat)
        h = 1e-5
        curvature = (sse(min(p_hat + h, 1.0)) - 2 * resid + sse(max(p_hat - h, 0.0))) / h**2
        dof = 3  # four states, one parameter
        sigma = math.sqrt(2 * resid / (dof * curvature)) if curvature > 0 else math.inf
        boundary = p_hat < 1e-7 or p_hat > 1 - 1e-7
        if boundary and len(dist.probs) == 1:
            log.warning("coupling (%d, %d): degenerate counts, p pinned to boundary", c, t)
        fits[(c, t)] = CnotFit(p_hat, resid, sigma, at_boundary=boundary)
    return fits


@dataclass(frozen=True)
class EDCModel:
    """Everything the protocol fitted, plus how to build a simulator model."""

    readout: dict[int, ReadoutError]
    x_depol: dict[int, DepolarizingParams] | None
    cnot: dict[tuple[int, int], CnotFit]
    mode: str
    apply_single_qubit: bool = False
    readout_residuals: dict[int, float] = field(default_factory=dict)
    job_ids: tuple[str, ...] = ()

    def noise_model(self) -> NoiseModel:
        gates: dict = {}
        for (c, t), fit in self.cnot.items():
            gates[("CNOT", (c, t))] = DepolarizingParams(fit.p, (c, t))
        if self.apply_single_qubit and self.x_depol:
            for q, d in self.x_depol.items():
                gates[("X", (q,))] = d
                gates[("H", (q,))] = d
        return NoiseModel(gates=gates, readout=dict(self.readout))

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "apply_single_qubit": self.apply_single_qubit,
            "readout": {
                str(q): {"p0": r.p0, "p1": r.p1, "residual": self.readout_residuals.get(q)}
                for q, r in sorted(self.readout.items())
            },
            "x_depol": None if self.x_depol is None else {
                str(q): d.p for q, d in sorted(self.x_depol.items())
            },
            "cnot": {
                f"{c},{t}": {"p": f.p, "residual": f.residual, "sigma": f.sigma,
                             "at_boundary": f.at_boundary}
                for (c, t), f in sorted(self.cnot.items())
            },
            "provenance": {"job_ids": list(self.job_ids)},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EDCModel":
        readout = {}
        residuals = {}
        for q, r in obj["readout"].items():
            readout[int(q)] = ReadoutError(float(r["p0"]), float(r["p1"]))
            if r.get("residual") is not None:
                residuals[int(q)] = float(r["residual"])
        x_depol = None
        if obj.get("x_depol") is not None:
            x_depol = {
                int(q): DepolarizingParams(float(p), (int(q),))
                for q, p in obj["x_depol"].items()
            }
        cnot = {}
        for key, f in obj["cnot"].items():
            c, t = (int(v) for v in key.split(","))
            cnot[(c, t)] = CnotFit(float(f["p"]), float(f["residual"]), float(f["sigma"]),
                                   bool(f.get("at_boundary", False)))
        return cls(readout, x_depol, cnot, obj.get("mode", "2c-full"),
                   apply_single_qubit=bool(obj.get("apply_single_qubit", False)),
                   readout_residuals=residuals,
                   job_ids=tuple(obj.get("provenance", {}).get("job_ids", ())))


def compose_model(readout_fit: ReadoutFit, cnot_fits: dict[tuple[int, int], CnotFit],
                  mode: SuiteMode, apply_single_qubit: bool = False,
                  average_orientations: bool = False,
                  job_ids: tuple[str, ...] = ()) -> tuple[EDCModel, NoiseModel]:
    """Assemble the fitted pieces into an EDCModel and its simulator NoiseModel."""
    cnot = dict(cnot_fits)
    if average_orientations:
        for (c, t), fit in list(cnot.items()):
            rev = cnot_fits.get((t, c))
            if rev is not None:
                cnot[(c, t)] = replace(fit, p=0.5 * (fit.p + rev.p))
    model = EDCModel(
        readout=readout_fit.readout,
        x_depol=readout_fit.x_depol,
        cnot=cnot,
        mode=str(mode),
        apply_single_qubit=apply_single_qubit,
        readout_residuals=readout_fit.residuals,
        job_ids=job_ids,
    )
    return model, model.noise_model()


def check_coverage(model: NoiseModel, target: Circuit) -> None:
    gaps = model.coverage_gaps(target)
    if gaps:
        raise FitError(f"model does not cover the target: {', '.join(gaps)}")


def characterize(qpu: VirtualQPU, mode: SuiteMode, shots: int = 8192,
                 seed: int | None = None,
                 bell_edges: list[tuple[int, int]] | None = None,
                 apply_single_qubit: bool = False,
                 average_orientations: bool = False) -> tuple[EDCModel, NoiseModel]:
    """Run one full suite on the device and fit every parameter."""
    suite = gen_suite(qpu.profile.topology, mode, bell_edges=bell_edges)
    data = run_suite(suite, qpu, shots, seed=seed)
    readout_fit = fit_readout(data)
    bells = {
        (tag[1], tag[2]): data.results[tag]
        for tag in data.results if tag[0] == "bell"
    }
    cnot_fits = fit_cnot_depolarizing(bells, readout_fit.readout)
    return compose_model(readout_fit, cnot_fits, mode,
                         apply_single_qubit=apply_single_qubit,
                         average_orientations=average_orientations,
                         job_ids=data.job_ids)


@dataclass(frozen=True)
class RefineRound:
    round: int
    config: str
    tvd_candidate: float
    tvd_best: float


# each ladder rung: (mode, both bell orientations, apply single-qubit depol)
_REFINEMENT_LADDER = (
    (SuiteMode(2, False), False, False),
    (SuiteMode(3, False), False, False),
    (SuiteMode(3, True), False, False),
    (SuiteMode(3, True), True, False),
    (SuiteMode(3, True), True, True),
)


def _target_cnot_edges(target: Circuit) -> list[tuple[int, int]]:
    edges = []
    for cyc in target.cycles:
        for g in cyc.gates:
            if g.kind == "CNOT" and g.qubits not in edges:
                edges.append(g.qubits)
    return edges


def refine_loop(target: Circuit, qpu: VirtualQPU, threshold: float,
                max_rounds: int = len(_REFINEMENT_LADDER), shots: int = 8192,
                seed: int = 0) -> tuple[EDCModel, list[RefineRound]]:
    """Characterize, compare to the device on `target`, and refine.

    Each round runs the next suite from the refinement ladder (wider
    readout circuits, per-qubit layers, reversed Bell orientations,
    single-qubit gate noise), fits a model, and measures the TVD between
    the model's exact prediction and the device counts for `target`.  A
    refinement is kept only if it improves that TVD, so the reported
    history is non-increasing.  Stops at the threshold or when the ladder
    is exhausted; exhaustion is an outcome, not an error.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    target_counts = qpu.run([target], shots, seed=derived_seed(seed, 999))[0]
    base_edges = _target_cnot_edges(target)
    best_model: EDCModel | None = None
    best_tvd = math.inf
    history: list[RefineRound] = []
    for round_idx, (mode, both, single) in enumerate(_REFINEMENT_LADDER[:max_rounds]):
        edges = list(base_edges)
        if both:
            edges += [(t, c) for c, t in base_edges if (t, c) not in base_edges]
        model, noise = characterize(
            qpu, mode, shots=shots, seed=derived_seed(seed, round_idx),
            bell_edges=edges, apply_single_qubit=single, average_orientations=both,
        )
        check_coverage(noise, target)
        candidate = tvd(run_exact(target, noise), target_counts)
        if candidate < best_tvd:
            best_tvd, best_model = candidate, model
        history.append(RefineRound(round_idx, f"{mode}|both={both}|1q={single}",
                                   candidate, best_tvd))
        log.info("refine round %d (%s): tvd=%.4f best=%.4f",
                 round_idx, mode, candidate, best_tvd)
        if best_tvd <= threshold:
            break
    assert best_model is not None
    return best_model, history
