"""Pauli-string algebra, stochastic Pauli channels, and the fidelity/error-rate duality.

Conventions used throughout the package:

* An n-qubit Pauli is stored in symplectic form as two bitmasks ``x`` and
  ``z``; bit ``q`` refers to qubit ``q``.  Qubit ``q`` carries X iff
  ``x``-bit q is set, Z iff ``z``-bit q is set, Y iff both, I iff neither.
* Text labels put qubit 0 leftmost, e.g. ``"IXZ"`` is X on qubit 1 and Z
  on qubit 2.
* Pauli strings are ordered I < X < Y < Z per qubit with qubit 0 most
  significant.  ``all_paulis(n)`` enumerates in this order, which is also
  plain lexicographic order of the labels.
* Dense matrices place qubit 0 as the most significant statevector bit,
  i.e. ``pauli_matrix`` takes Kronecker products left to right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

SINGLE_QUBIT_PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_LETTER_TO_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_TO_LETTER = {v: k for k, v in _LETTER_TO_BITS.items()}

RATE_TOL = 1e-9


class PauliSizeError(ValueError):
    """Operands act on different numbers of qubits."""


@dataclass(frozen=True, order=False)
class PauliString:
    """n-qubit Pauli operator in symplectic (x bits, z bits) form."""

    n: int
    x: int
    z: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one qubit")
        mask = (1 << self.n) - 1
        if self.x & ~mask or self.z & ~mask:
            raise ValueError("bit set beyond qubit count")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        x = z = 0
        for q, letter in enumerate(label):
            try:
                xb, zb = _LETTER_TO_BITS[letter]
            except KeyError:
                raise ValueError(f"invalid Pauli letter {letter!r} in {label!r}") from None
            x |= xb << q
            z |= zb << q
        return cls(len(label), x, z)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        if not 0 <= qubit < n:
            raise ValueError(f"qubit {qubit} outside register of size {n}")
        xb, zb = _LETTER_TO_BITS[letter]
        return cls(n, xb << qubit, zb << qubit)

    @property
    def label(self) -> str:
        return "".join(
            _BITS_TO_LETTER[(self.x >> q) & 1, (self.z >> q) & 1] for q in range(self.n)
        )

    def letter(self, qubit: int) -> str:
        return _BITS_TO_LETTER[(self.x >> qubit) & 1, (self.z >> qubit) & 1]

    @property
    def weight(self) -> int:
        return bin(self.x | self.z).count("1")

    @property
    def support(self) -> tuple[int, ...]:
        bits = self.x | self.z
        return tuple(q for q in range(self.n) if (bits >> q) & 1)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def restricted(self, qubits: tuple[int, ...]) -> "PauliString":
        """Re-express on the sub-register `qubits` (support must lie inside it)."""
        if any(q not in qubits for q in self.support):
            raise ValueError("support extends beyond the requested qubits")
        x = z = 0
        for i, q in enumerate(qubits):
            x |= ((self.x >> q) & 1) << i
            z |= ((self.z >> q) & 1) << i
        return PauliString(len(qubits), x, z)

    def embedded(self, n: int, qubits: tuple[int, ...]) -> "PauliString":
        """Embed this Pauli into an n-qubit register at positions `qubits`."""
        x = z = 0
        for i, q in enumerate(qubits):
            x |= ((self.x >> i) & 1) << q
            z |= ((self.z >> i) & 1) << q
        return PauliString(n, x, z)

    def __repr__(self):
        return f"PauliString({self.label!r})"

    def __lt__(self, other: "PauliString"):
        return self.label < other.label


def all_paulis(n: int) -> list[PauliString]:
    """All 4^n Pauli strings in lexicographic label order."""
    out = []
    for letters in product("IXYZ", repeat=n):
        out.append(PauliString.from_label("".join(letters)))
    return out


def pauli_mul(p: PauliString, q: PauliString) -> tuple[PauliString, int]:
    """Product P·Q as (R, k) with P·Q = i^k · R, k mod 4.

    Uses the per-qubit convention P(x,z) = i^{x·z} X^x Z^z, so e.g.
    X·Y = (Z, 1), i.e. iZ.
    """
    if p.n != q.n:
        raise PauliSizeError(f"size mismatch: {p.n} vs {q.n} qubits")
    rx, rz = p.x ^ q.x, p.z ^ q.z
    # i-exponent: (x1z1 + x2z2 - x3z3 + 2*z1x2) per qubit, summed mod 4
    k = (
        bin(p.x & p.z).count("1")
        + bin(q.x & q.z).count("1")
        - bin(rx & rz).count("1")
        + 2 * bin(p.z & q.x).count("1")
    ) % 4
    return PauliString(p.n, rx, rz), k


def commutes(p: PauliString, q: PauliString) -> bool:
    """True iff the symplectic inner product x_P·z_Q + z_P·x_Q vanishes mod 2."""
    if p.n != q.n:
        raise PauliSizeError(f"size mismatch: {p.n} vs {q.n} qubits")
    return (bin(p.x & q.z).count("1") + bin(p.z & q.x).count("1")) % 2 == 0


def pauli_matrix(p: PauliString) -> np.ndarray:
    """Dense 2^n x 2^n matrix; qubit 0 is the most significant tensor factor."""
    m = np.array([[1.0 + 0j]])
    for q in range(p.n):
        m = np.kron(m, SINGLE_QUBIT_PAULIS[p.letter(q)])
    return m


@dataclass(frozen=True)
class PauliChannel:
    """Stochastic Pauli channel: apply P with probability rates[P] by conjugation."""

    n: int
    rates: dict[PauliString, float]

    def __post_init__(self):
        total = 0.0
        for p, r in self.rates.items():
            if p.n != self.n:
                raise PauliSizeError(f"rate key {p.label} has {p.n} qubits, channel has {self.n}")
            if not -RATE_TOL <= r <= 1 + RATE_TOL:
                raise ValueError(f"rate {r} for {p.label} outside [0, 1]")
            total += r
        if abs(total - 1.0) > RATE_TOL:
            raise ValueError(f"rates sum to {total}, expected 1")

    def rate(self, p: PauliString) -> float:
        return self.rates.get(p, 0.0)

    @classmethod
    def identity(cls, n: int) -> "PauliChannel":
        return cls(n, {PauliString.identity(n): 1.0})

    def tensor(self, other: "PauliChannel") -> "PauliChannel":
        n = self.n + other.n
        rates: dict[PauliString, float] = {}
        for pa, ra in self.rates.items():
            for pb, rb in other.rates.items():
                key = PauliString.from_label(pa.label + pb.label)
                rates[key] = rates.get(key, 0.0) + ra * rb
        return PauliChannel(n, rates)

    def to_json(self) -> dict:
        return {p.label: r for p, r in sorted(self.rates.items())}

    @classmethod
    def from_json(cls, obj: dict) -> "PauliChannel":
        if not obj:
            raise ValueError("empty channel")
        n = len(next(iter(obj)))
        return cls(n, {PauliString.from_label(k): float(v) for k, v in obj.items()})


@dataclass(frozen=True)
class FidelityVector:
    """Pauli fidelities f[P]; +1 means P is fully preserved by the channel."""

    n: int
    values: dict[PauliString, float]

    def __post_init__(self):
        ident = PauliString.identity(self.n)
        if self.values.get(ident) != 1.0:
            raise ValueError("fidelity of the identity must be exactly 1")
        for p, f in self.values.items():
            if p.n != self.n:
                raise PauliSizeError(f"{p.label} has {p.n} qubits, vector has {self.n}")
            if abs(f) > 1 + RATE_TOL:
                raise ValueError(f"|f[{p.label}]| = {abs(f)} exceeds 1")

    def __getitem__(self, p: PauliString) -> float:
        return self.values[p]


@dataclass(frozen=True)
class DepolarizingParams:
    """Isotropic single-qubit depolarizing strength p, applied to each listed qubit."""

    p: float
    qubits: tuple[int, ...]

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"depolarizing probability {self.p} outside [0, 1]")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError("repeated qubit")


@dataclass(frozen=True)
class ReadoutError:
    """Asymmetric readout flips: p0 = P(read 1 | true 0), p1 = P(read 0 | true 1)."""

    p0: float
    p1: float

    def __post_init__(self):
        for v in (self.p0, self.p1):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"flip probability {v} outside [0, 1]")

    def confusion(self) -> np.ndarray:
        """2x2 column-stochastic matrix M[read, true]."""
        return np.array([[1 - self.p0, self.p1], [self.p0, 1 - self.p1]])


@dataclass(frozen=True)
class PTM:
    """Pauli transfer matrix: entry (i, j) = Tr(P_i Lambda(P_j)) / 2^n.

    Rows/columns are indexed by ``all_paulis(n)`` order.
    """

    n: int
    matrix: np.ndarray = field(compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (4**self.n, 4**self.n):
            raise ValueError(f"expected {4**self.n}x{4**self.n} matrix, got {m.shape}")
        object.__setattr__(self, "matrix", m)


def depolarizing_to_pauli(d: DepolarizingParams) -> PauliChannel:
    """Expand isotropic depolarizing into a stochastic Pauli channel.

    Single qubit: {I: 1-p, X: p/3, Y: p/3, Z: p/3}; several qubits give the
    tensor product of the per-qubit channels.
    """
    single = PauliChannel(
        1,
        {
            PauliString.from_label("I"): 1 - d.p,
            PauliString.from_label("X"): d.p / 3,
            PauliString.from_label("Y"): d.p / 3,
            PauliString.from_label("Z"): d.p / 3,
        },
    )
    out = single
    for _ in range(len(d.qubits) - 1):
        out = out.tensor(single)
    return out


def channel_to_fidelities(c: PauliChannel) -> FidelityVector:
    """Pauli fidelities of a stochastic channel: f[P] = sum_Q rates[Q] * chi(P, Q).

    chi(P, Q) is +1 when P and Q commute and -1 otherwise, which for Pauli
    channels reproduces 2^{-n} Tr(P eps(P)).
    """
    values = {}
    for p in all_paulis(c.n):
        f = 0.0
        for q, r in c.rates.items():
            f += r if commutes(p, q) else -r
        values[p] = f
    ident = PauliString.identity(c.n)
    values[ident] = 1.0
    return FidelityVector(c.n, values)


def walsh_hadamard_matrix(n: int, rows: list[PauliString] | None = None,
                          cols: list[PauliString] | None = None) -> np.ndarray:
    """The +/-1 character matrix W[P, Q] = chi(P, Q); full W satisfies W·W = 4^n I."""
    rows = all_paulis(n) if rows is None else rows
    cols = all_paulis(n) if cols is None else cols
    w = np.empty((len(rows), len(cols)))
    for i, p in enumerate(rows):
        for j, q in enumerate(cols):
            w[i, j] = 1.0 if commutes(p, q) else -1.0
    return w


def fidelities_to_channel(f: FidelityVector, support: list[PauliString] | set[PauliString]
                          ) -> PauliChannel:
    """Invert the fidelity transform restricted to `support`, then project to a channel.

    Solves the least-squares system chi(P, Q) p_Q = f_P over the measured
    fidelities for rates on `support`, clips negative rates to zero, and
    renormalizes.  Round-trips ``channel_to_fidelities`` whenever the true
    channel is supported on `support`.

    Raises ValueError when the measured fidelities cannot determine the
    requested rates (fewer fidelities than unknowns, or rank deficiency).
    """
    support = sorted(set(support))
    ident = PauliString.identity(f.n)
    if ident not in support:
        raise ValueError("support must contain the identity")
    measured = sorted(f.values)
    if len(measured) < len(support):
        raise ValueError(
            f"underdetermined support: {len(support)} rates from {len(measured)} fidelities"
        )
    w = walsh_hadamard_matrix(f.n, rows=measured, cols=support)
    y = np.array([f.values[p] for p in measured])
    rates, _, rank, _ = np.linalg.lstsq(w, y, rcond=None)
    if rank < len(support):
        raise ValueError(f"underdetermined support: design rank {rank} < {len(support)}")
    rates = np.clip(rates, 0.0, None)
    total = rates.sum()
    if total <= 0:
        raise ValueError("projection collapsed: no nonnegative rate mass")
    rates /= total
    return PauliChannel(f.n, {p: float(r) for p, r in zip(support, rates)})


def ptm_of_pauli_channel(c: PauliChannel) -> PTM:
    """Diagonal PTM of a stochastic Pauli channel: entry (P, P) = f[P]."""
    f = channel_to_fidelities(c)
    paulis = all_paulis(c.n)
    return PTM(c.n, np.diag([f[p] for p in paulis]))


def ptm_of_unitary(u: np.ndarray) -> PTM:
    """PTM of a unitary map rho -> U rho U^dag."""
    dim = u.shape[0]
    n = round(math.log2(dim))
    if 2**n != dim:
        raise ValueError(f"matrix dimension {dim} is not a power of two")
    paulis = all_paulis(n)
    mats = [pauli_matrix(p) for p in paulis]
    out = np.empty((4**n, 4**n))
    for j, pj in enumerate(mats):
        conj = u @ pj @ u.conj().T
        for i, pi in enumerate(mats):
            out[i, j] = (pi @ conj).trace().real / dim
    return PTM(n, out)
