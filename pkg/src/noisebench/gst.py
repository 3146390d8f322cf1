"""Gate set tomography: fiducial-sandwich designs, linear-inversion
reconstruction, gauge fixing toward the target frame, and SPAM estimation.

The design runs every F_i . G_k . F_j sequence plus the F_i-only
sequences; reconstruction inverts the Gram matrix built from the
empty-gate slice and conjugates into the ideal-target frame, after which
a quasi-Newton descent over similarity transforms minimizes the summed
Frobenius distance to the ideal gates.  SPAM is a row-stochastic
confusion matrix estimated from basis-state preparation circuits.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .circuits import Circuit, Cycle, Gate, measure_cycle
from .paulis import all_paulis, pauli_matrix, ptm_of_unitary
from .sim import Counts, Distribution, as_distribution

log = logging.getLogger(__name__)

GRAM_RCOND = 1e-10
DEFAULT_SHOTS = 1024


class GSTError(RuntimeError):
    pass


GateSeq = tuple[Gate, ...]


def _seq_unitary(seq: GateSeq, n: int) -> np.ndarray:
    dim = 2**n
    u = np.eye(dim, dtype=complex)
    for g in seq:
        u = _embed_unitary(g, n) @ u
    return u


def _embed_unitary(g: Gate, n: int) -> np.ndarray:
    from .sim import _embedded_unitary

    return _embedded_unitary(g.unitary(), list(g.qubits), n)


def seq_ptm(seq: GateSeq, n: int) -> np.ndarray:
    return ptm_of_unitary(_seq_unitary(seq, n)).matrix


@dataclass(frozen=True)
class GateSet:
    """Gates to estimate plus the fiducial sequences that frame them.

    The empty sequence must appear among the gates: its slice of the data
    provides the Gram matrix.  Every fiducial must be composed of gates
    that are themselves single-gate entries of the set.
    """

    n_qubits: int
    names: tuple[str, ...]
    gates: tuple[GateSeq, ...]
    fiducial_names: tuple[str, ...]
    fiducials: tuple[GateSeq, ...]

    def __post_init__(self):
        if len(self.names) != len(self.gates):
            raise GSTError("one name per gate")
        if len(self.fiducial_names) != len(self.fiducials):
            raise GSTError("one name per fiducial")
        if sum(1 for g in self.gates if len(g) == 0) != 1:
            raise GSTError("the gate set must contain exactly one empty gate")
        singles = {(g[0].kind, g[0].qubits) for g in self.gates if len(g) == 1}
        for name, fid in zip(self.fiducial_names, self.fiducials):
            for g in fid:
                if (g.kind, g.qubits) not in singles:
                    raise GSTError(
                        f"fiducial {name} uses {g.kind}{g.qubits}, which is not in the gate set"
                    )

    @property
    def empty_index(self) -> int:
        return next(i for i, g in enumerate(self.gates) if len(g) == 0)

    def name_for_gate(self, kind: str, qubits: tuple[int, ...]) -> str:
        for name, seq in zip(self.names, self.gates):
            if len(seq) == 1 and seq[0].kind == kind and seq[0].qubits == qubits:
                return name
        raise GSTError(f"gate {kind}{qubits} not in the gate set")

    def ideal_ptms(self) -> dict[str, np.ndarray]:
        return {name: seq_ptm(seq, self.n_qubits) for name, seq in zip(self.names, self.gates)}


def _rho_vector(n: int) -> np.ndarray:
    dim = 2**n
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return np.array([(pauli_matrix(p) @ rho).trace().real for p in all_paulis(n)]) / math.sqrt(dim)


def _effect_vector(n: int) -> np.ndarray:
    # computational all-zeros effect; identical Pauli expansion to rho
    return _rho_vector(n)


def _design_matrices(gs: GateSet) -> tuple[np.ndarray, np.ndarray]:
    """Ideal-frame A (effects after F_i) and B (states from F_j)."""
    rho = _rho_vector(gs.n_qubits)
    eff = _effect_vector(gs.n_qubits)
    fid_ptms = [seq_ptm(f, gs.n_qubits) for f in gs.fiducials]
    a = np.stack([eff @ r for r in fid_ptms])         # (n_fid, 4^n)
    b = np.stack([r @ rho for r in fid_ptms], axis=1)  # (4^n, n_fid)
    return a, b


def _check_complete(gs: GateSet) -> None:
    a, b = _design_matrices(gs)
    dim = 4**gs.n_qubits
    for mat, what in ((a, "measurement"), (b.T, "preparation")):
        s = np.linalg.svd(mat, compute_uv=False)
        if len(s) < dim or s[dim - 1] < 1e-9:
            _, _, vt = np.linalg.svd(mat)
            direction = vt[min(dim, len(vt)) - 1]
            labels = [p.label for p in all_paulis(gs.n_qubits)]
            worst = labels[int(np.argmax(np.abs(direction)))]
            raise GSTError(
                f"fiducials are not informationally complete for {what}; "
                f"undetermined direction is dominated by {worst}"
            )


_FIDUCIAL_RECIPES_1Q = (
    ("Fnull", ()),
    ("Fx", ("RX90",)),
    ("Fy", ("RY90",)),
    ("Fxx", ("RX90", "RX90")),
    ("Fxxx", ("RX90", "RX90", "RX90")),
    ("Fyyy", ("RY90", "RY90", "RY90")),
)


def single_qubit_gateset(qubit: int = 0) -> GateSet:
    """The 5-gate single-qubit set {empty, I, RX90, RY90, RZ90} with the
    standard six preparation/measurement fiducials."""
    q = (qubit,)
    gates = ((), (Gate("I", q),), (Gate("RX90", q),), (Gate("RY90", q),), (Gate("RZ90", q),))
    names = ("Gnull", "Gi", "Gx90", "Gy90", "Gz90")
    fids = tuple(tuple(Gate(k, q) for k in kinds) for _, kinds in _FIDUCIAL_RECIPES_1Q)
    fid_names = tuple(name for name, _ in _FIDUCIAL_RECIPES_1Q)
    gs = GateSet(1, names, gates, fid_names, fids)
    _check_complete(gs)
    return gs


def two_qubit_gateset(kinds: tuple[str, ...] = ("I", "RX90", "RY90", "RZ90"),
                      cnot: bool = True) -> GateSet:
    """Product-fiducial two-qubit set on qubits (0, 1) with CNOT support.

    `kinds` selects which single-qubit gates enter per qubit; pruning it
    shrinks the (36 x 36 x gates) design when only a subset is needed.
    """
    gates: list[GateSeq] = [()]
    names = ["Gnull"]
    for kind in kinds:
        for q in (0, 1):
            gates.append((Gate(kind, (q,)),))
            names.append(f"G{kind.lower()}q{q}")
    if cnot:
        gates.append((Gate("CNOT", (0, 1)),))
        names.append("Gcnot")
    fids: list[GateSeq] = []
    fid_names: list[str] = []
    for (na, ka), (nb, kb) in itertools.product(_FIDUCIAL_RECIPES_1Q, repeat=2):
        seq0 = [Gate(k, (0,)) for k in ka]
        seq1 = [Gate(k, (1,)) for k in kb]
        merged: list[Gate] = []
        for g0, g1 in itertools.zip_longest(seq0, seq1):
            if g0 is not None:
                merged.append(g0)
            if g1 is not None:
                merged.append(g1)
        fids.append(tuple(merged))
        fid_names.append(f"{na}:{nb}")
    needed = {g.kind for f in fids for g in f}
    if not needed <= set(kinds):
        raise GSTError(f"fiducials need gate kinds {sorted(needed)}; got {sorted(kinds)}")
    gs = GateSet(2, tuple(names), tuple(gates), tuple(fid_names), tuple(fids))
    _check_complete(gs)
    return gs


# ---------------------------------------------------------------------------
# Design and data collection

DesignKey = tuple  # ("ijk", i, j, k) | ("fid", i) | ("prep", bits)


def _seq_circuit(seqs: list[GateSeq], n: int) -> Circuit:
    cycles = [Cycle((g,)) for seq in seqs for g in seq]
    cycles.append(measure_cycle(range(n)))
    return Circuit(n, tuple(cycles), tuple(range(n)))


def design_gst(gs: GateSet) -> tuple[list[Circuit], list[DesignKey]]:
    """One circuit per (i, j, k) sandwich plus the F_i-only sequences.

    Time order per sandwich is F_j, then G_k, then F_i.
    """
    _check_complete(gs)
    circuits = []
    manifest: list[DesignKey] = []
    n_fid = len(gs.fiducials)
    for i in range(n_fid):
        for j in range(n_fid):
            for k in range(len(gs.gates)):
                circuits.append(_seq_circuit(
                    [gs.fiducials[j], gs.gates[k], gs.fiducials[i]], gs.n_qubits))
                manifest.append(("ijk", i, j, k))
    for i in range(n_fid):
        circuits.append(_seq_circuit([gs.fiducials[i]], gs.n_qubits))
        manifest.append(("fid", i))
    return circuits, manifest


def design_spam(n_qubits: int) -> tuple[list[Circuit], list[DesignKey]]:
    """Basis-state preparations (X layers) for the readout confusion matrix."""
    circuits = []
    manifest: list[DesignKey] = []
    for idx in range(2**n_qubits):
        bits = format(idx, f"0{n_qubits}b")
        gates = tuple(Gate("X", (q,)) for q, b in enumerate(bits) if b == "1")
        cycles = (Cycle(gates),) if gates else ()
        circuits.append(Circuit(n_qubits, cycles + (measure_cycle(range(n_qubits)),),
                                tuple(range(n_qubits))))
        manifest.append(("prep", bits))
    return circuits, manifest


@dataclass(frozen=True)
class GSTDataset:
    """Success-outcome estimates per design sequence (plus raw distributions)."""

    n_qubits: int
    probs: dict[DesignKey, Distribution]
    shots: int

    def success(self, key: DesignKey) -> float:
        zeros = "0" * self.n_qubits
        try:
            return self.probs[key].prob(zeros)
        except KeyError:
            raise GSTError(f"missing sequence {key}") from None

    def prep_distributions(self) -> dict[str, Distribution]:
        return {key[1]: dist for key, dist in self.probs.items() if key[0] == "prep"}


def collect(manifest: list[DesignKey], results: list[Counts | Distribution],
            n_qubits: int) -> GSTDataset:
    """Outcome frequencies per designed sequence, in manifest order."""
    if len(results) < len(manifest):
        raise GSTError(f"{len(manifest)} sequences designed, {len(results)} results")
    shots = 0
    probs: dict[DesignKey, Distribution] = {}
    for key, res in zip(manifest, results):
        if isinstance(res, Counts):
            shots = max(shots, res.shots)
        probs[key] = as_distribution(res)
    return GSTDataset(n_qubits, probs, shots)


# ---------------------------------------------------------------------------
# Reconstruction

@dataclass(frozen=True)
class GSTEstimate:
    """Per-gate transfer matrices, SPAM confusion, and the gauge report."""

    gate_set: GateSet = field(compare=False)
    ptms: dict[str, np.ndarray] = field(compare=False)
    spam: np.ndarray = field(compare=False)
    rho: np.ndarray = field(compare=False)
    effect: np.ndarray = field(compare=False)
    gauge: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        rows = self.spam.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-9):
            raise GSTError(f"SPAM rows must sum to 1, got {rows}")

    @property
    def n_qubits(self) -> int:
        return self.gate_set.n_qubits

    def ptm_for_gate(self, kind: str, qubits: tuple[int, ...]) -> np.ndarray:
        return self.ptms[self.gate_set.name_for_gate(kind, qubits)]

    def full_ptm(self, kind: str, qubits: tuple[int, ...]) -> np.ndarray:
        # estimates live on the full register, so no further embedding needed
        return self.ptm_for_gate(kind, qubits)

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "gates": {name: m.tolist() for name, m in self.ptms.items()},
            "spam": self.spam.tolist(),
            "rho": self.rho.tolist(),
            "effect": self.effect.tolist(),
            "gauge": self.gauge,
        }


def ideal_spam(n_qubits: int) -> np.ndarray:
    return np.eye(2**n_qubits)


def spam_matrix(prep_results: dict[str, Counts | Distribution]) -> np.ndarray:
    """Row-stochastic confusion: row = prepared basis state, column = outcome."""
    if not prep_results:
        raise GSTError("no preparation circuits supplied")
    n_bits = len(next(iter(prep_results)))
    dim = 2**n_bits
    if set(prep_results) != {format(i, f"0{n_bits}b") for i in range(dim)}:
        raise GSTError("need one preparation circuit per basis state")
    out = np.zeros((dim, dim))
    for expected, res in prep_results.items():
        dist = as_distribution(res)
        row = int(expected, 2)
        for bits, p in dist.probs.items():
            out[row, int(bits, 2)] += p
    return out / out.sum(axis=1, keepdims=True)


def _gauge_objective(gates: list[np.ndarray], targets: list[np.ndarray], dim: int):
    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        t = x.reshape(dim, dim)
        try:
            s = np.linalg.inv(t)
        except np.linalg.LinAlgError:
            return 1e12, np.zeros_like(x)
        value = 0.0
        grad = np.zeros((dim, dim))
        for a, h in zip(gates, targets):
            d = t @ a @ s - h
            value += float(np.sum(d * d))
            grad += 2.0 * (d @ s.T @ a.T - s.T @ a.T @ t.T @ d @ s.T)
        return value, grad.reshape(-1)

    return objective


def gauge_fix(raw: dict[str, np.ndarray], gs: GateSet,
              max_iter: int = 500) -> tuple[dict[str, np.ndarray], dict]:
    """Similarity transform minimizing the Frobenius distance to the ideal set.

    Quasi-Newton descent seeded at the identity; a failed descent returns
    the identity-gauge estimate, flagged in the report.
    """
    dim = 4**gs.n_qubits
    ideals = gs.ideal_ptms()
    names = [n for n in raw if n in ideals]
    objective = _gauge_objective([raw[n] for n in names], [ideals[n] for n in names], dim)
    x0 = np.eye(dim).reshape(-1)
    initial = objective(x0)[0]
    result = minimize(objective, x0, jac=True, method="L-BFGS-B",
                      options={"maxiter": max_iter})
    report = {
        "initial_residual": initial,
        "residual": float(result.fun),
        "converged": bool(result.success),
        "iterations": int(result.nit),
    }
    if not result.success and result.fun >= initial:
        log.warning("gauge descent failed; returning identity-gauge estimate")
        report["residual"] = initial
        return dict(raw), report
    t = result.x.reshape(dim, dim)
    s = np.linalg.inv(t)
    fixed = {name: t @ m @ s for name, m in raw.items()}
    return fixed, report


def lgst_reconstruct(ds: GSTDataset, gs: GateSet,
                     rcond: float = GRAM_RCOND) -> GSTEstimate:
    """Linear-inversion estimate of every gate, in the gauge-fixed frame.

    Builds the Gram matrix from the empty-gate slice of the dataset,
    pseudo-inverts it (threshold `rcond`), conjugates into the ideal
    fiducial frame, and then runs the gauge descent.
    """
    n_fid = len(gs.fiducials)
    dim = 4**gs.n_qubits
    a_tilde = {
        k: np.array([[ds.success(("ijk", i, j, k)) for j in range(n_fid)]
                     for i in range(n_fid)])
        for k in range(len(gs.gates))
    }
    gram = a_tilde[gs.empty_index]
    u, svals, vt = np.linalg.svd(gram)
    if svals[dim - 1] <= rcond * svals[0]:
        raise GSTError(
            "Gram matrix is singular beyond threshold; condition number "
            f"{svals[0] / max(svals[dim - 1], 1e-300):.3e}"
        )
    # an over-complete fiducial set gives structural rank 4^n; anything
    # beyond that is shot noise and must not be inverted
    gram_pinv = vt[:dim].T @ np.diag(1.0 / svals[:dim]) @ u[:, :dim].T
    _, b_ideal = _design_matrices(gs)
    b_pinv = np.linalg.pinv(b_ideal, rcond=rcond)
    raw = {
        name: b_ideal @ gram_pinv @ a_tilde[k] @ b_pinv
        for k, name in enumerate(gs.names)
    }
    fixed, report = gauge_fix(raw, gs)
    p_vec = np.array([ds.success(("fid", i)) for i in range(n_fid)])
    rho_hat = b_ideal @ gram_pinv @ p_vec
    eff_hat = p_vec @ b_pinv
    preps = ds.prep_distributions()
    spam = spam_matrix(preps) if preps else ideal_spam(gs.n_qubits)
    return GSTEstimate(gs, fixed, spam, rho_hat, eff_hat, gauge=report)
