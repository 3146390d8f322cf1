import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisebench.paulis import (
    DepolarizingParams,
    FidelityVector,
    PauliChannel,
    PauliSizeError,
    PauliString,
    all_paulis,
    channel_to_fidelities,
    commutes,
    depolarizing_to_pauli,
    fidelities_to_channel,
    pauli_matrix,
    pauli_mul,
    ptm_of_pauli_channel,
    ptm_of_unitary,
    walsh_hadamard_matrix,
)

P_ = PauliString.from_label


def dense_channel(chan: PauliChannel, operand: np.ndarray) -> np.ndarray:
    out = np.zeros_like(operand)
    for p, r in chan.rates.items():
        m = pauli_matrix(p)
        out += r * (m @ operand @ m.conj().T)
    return out


def random_channel(rng: np.random.Generator, n: int) -> PauliChannel:
    raw = rng.random(4**n)
    raw /= raw.sum()
    return PauliChannel(n, dict(zip(all_paulis(n), raw)))


# -- pauli strings -----------------------------------------------------------

def test_label_round_trip():
    for label in ("I", "X", "IXZ", "YZXI"):
        assert P_(label).label == label


def test_lexicographic_order():
    labels = [p.label for p in all_paulis(2)]
    assert labels == sorted(labels)
    assert labels[:5] == ["II", "IX", "IY", "IZ", "XI"]


def test_weight_and_support():
    p = P_("IXYI")
    assert p.weight == 2
    assert p.support == (1, 2)


def test_mul_identity_case():
    r, k = pauli_mul(P_("X"), P_("X"))
    assert r.is_identity() and k == 0


def test_mul_xy_gives_iz():
    r, k = pauli_mul(P_("X"), P_("Y"))
    assert (r.label, k) == ("Z", 1)


def test_mul_xx_zz_gives_minus_yy():
    r, k = pauli_mul(P_("XX"), P_("ZZ"))
    assert (r.label, k) == ("YY", 2)


def test_mul_size_mismatch():
    with pytest.raises(PauliSizeError):
        pauli_mul(P_("X"), P_("XX"))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 63), st.integers(0, 63))
def test_mul_matches_dense_product(a, b):
    paulis = all_paulis(3)
    p, q = paulis[a], paulis[b]
    r, k = pauli_mul(p, q)
    assert np.allclose(pauli_matrix(p) @ pauli_matrix(q), (1j**k) * pauli_matrix(r))


def test_commutes_basics():
    assert not commutes(P_("X"), P_("Z"))
    assert commutes(P_("XX"), P_("ZZ"))
    for p in all_paulis(2):
        assert commutes(p, PauliString.identity(2))


def test_commutes_matches_dense_commutator():
    for p in all_paulis(2):
        for q in all_paulis(2):
            comm = pauli_matrix(p) @ pauli_matrix(q) - pauli_matrix(q) @ pauli_matrix(p)
            assert commutes(p, q) == np.allclose(comm, 0.0)


# -- channels ----------------------------------------------------------------

def test_depolarizing_noiseless():
    chan = depolarizing_to_pauli(DepolarizingParams(0.0, (0,)))
    assert chan.rates == {P_("I"): 1.0}


def test_depolarizing_single_qubit_rates():
    chan = depolarizing_to_pauli(DepolarizingParams(0.03, (0,)))
    assert chan.rate(P_("I")) == pytest.approx(0.97, abs=1e-15)
    for letter in "XYZ":
        assert chan.rate(P_(letter)) == pytest.approx(0.01, abs=1e-15)


def test_depolarizing_two_qubit_tensor():
    chan = depolarizing_to_pauli(DepolarizingParams(0.03, (0, 1)))
    assert chan.rate(P_("II")) == pytest.approx(0.9409, abs=1e-12)
    assert chan.rate(P_("IX")) == pytest.approx(0.0097, abs=1e-12)


def test_depolarizing_rejects_out_of_range():
    with pytest.raises(ValueError):
        DepolarizingParams(1.5, (0,))


def test_channel_rate_validation():
    with pytest.raises(ValueError):
        PauliChannel(1, {P_("I"): 0.5, P_("X"): 0.4})  # sums to 0.9


def test_identity_channel_fidelities():
    f = channel_to_fidelities(PauliChannel.identity(2))
    assert all(f[p] == 1.0 for p in all_paulis(2))


def test_depolarizing_fidelities():
    f = channel_to_fidelities(depolarizing_to_pauli(DepolarizingParams(0.03, (0,))))
    for letter in "XYZ":
        assert f[P_(letter)] == pytest.approx(1 - 0.04, abs=1e-12)


def test_bit_flip_fidelities():
    chan = PauliChannel(1, {P_("I"): 0.9, P_("X"): 0.1})
    f = channel_to_fidelities(chan)
    assert f[P_("X")] == pytest.approx(1.0)
    assert f[P_("Y")] == pytest.approx(0.8)
    assert f[P_("Z")] == pytest.approx(0.8)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_fidelities_match_dense_trace(n, seed):
    chan = random_channel(np.random.default_rng(seed), n)
    f = channel_to_fidelities(chan)
    dim = 2**n
    for p in all_paulis(n):
        oracle = (pauli_matrix(p) @ dense_channel(chan, pauli_matrix(p))).trace().real / dim
        assert f[p] == pytest.approx(oracle, abs=1e-9)


def test_walsh_hadamard_squares_to_identity():
    for n in (1, 2):
        w = walsh_hadamard_matrix(n)
        assert np.allclose(w @ w, 4**n * np.eye(4**n))


def test_round_trip_identity_channel():
    chan = PauliChannel.identity(1)
    back = fidelities_to_channel(channel_to_fidelities(chan), all_paulis(1))
    assert back.rate(P_("I")) == pytest.approx(1.0, abs=1e-12)


def test_round_trip_depolarizing_exact():
    chan = depolarizing_to_pauli(DepolarizingParams(0.03, (0,)))
    back = fidelities_to_channel(channel_to_fidelities(chan), all_paulis(1))
    for p in all_paulis(1):
        assert back.rate(p) == pytest.approx(chan.rate(p), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_round_trip_random_channels(n, seed):
    chan = random_channel(np.random.default_rng(seed), n)
    back = fidelities_to_channel(channel_to_fidelities(chan), all_paulis(n))
    for p in all_paulis(n):
        assert back.rate(p) == pytest.approx(chan.rate(p), abs=1e-9)


def test_negative_rate_clipped_and_renormalized():
    # perturb f[Y] of a depolarizing channel so the raw inversion puts
    # -0.002 on Y, then check against a by-hand clip-and-renormalize oracle
    chan = PauliChannel(1, {P_("I"): 0.97, P_("X"): 0.01, P_("Y"): 0.01, P_("Z"): 0.01})
    f = dict(channel_to_fidelities(chan).values)
    f[P_("Y")] -= 0.048  # rate[Y] picks up -0.048/4 = -0.012
    fv = FidelityVector(1, f)
    paulis = all_paulis(1)
    w = walsh_hadamard_matrix(1)
    raw = np.linalg.solve(w, np.array([fv.values[p] for p in paulis]))
    assert raw[paulis.index(P_("Y"))] == pytest.approx(-0.002, abs=1e-12)
    oracle = np.clip(raw, 0.0, None)
    oracle /= oracle.sum()
    projected = fidelities_to_channel(fv, paulis)
    assert projected.rate(P_("Y")) == 0.0
    for p, expected in zip(paulis, oracle):
        assert projected.rate(p) == pytest.approx(expected, abs=1e-12)


def test_underdetermined_support_rejected():
    f = FidelityVector(1, {P_("I"): 1.0, P_("X"): 0.9})
    with pytest.raises(ValueError, match="underdetermined"):
        fidelities_to_channel(f, all_paulis(1))


def test_ptm_of_identity_channel():
    ptm = ptm_of_pauli_channel(PauliChannel.identity(1))
    assert np.allclose(ptm.matrix, np.eye(4))


def test_ptm_of_depolarizing():
    p = 0.03
    ptm = ptm_of_pauli_channel(depolarizing_to_pauli(DepolarizingParams(p, (0,))))
    assert np.allclose(ptm.matrix, np.diag([1, 1 - 4 * p / 3, 1 - 4 * p / 3, 1 - 4 * p / 3]))


def test_ptm_of_bit_flip():
    q = 0.1
    ptm = ptm_of_pauli_channel(PauliChannel(1, {P_("I"): 1 - q, P_("X"): q}))
    assert np.allclose(ptm.matrix, np.diag([1, 1, 1 - 2 * q, 1 - 2 * q]))


def test_ptm_matches_eq_definition_per_entry():
    # oracle: entry (i, j) = Tr(P_i eps(P_j)) / d evaluated densely
    chan = random_channel(np.random.default_rng(3), 1)
    ptm = ptm_of_pauli_channel(chan)
    paulis = all_paulis(1)
    for i, pi in enumerate(paulis):
        for j, pj in enumerate(paulis):
            oracle = (pauli_matrix(pi) @ dense_channel(chan, pauli_matrix(pj))).trace().real / 2
            assert ptm.matrix[i, j] == pytest.approx(oracle, abs=1e-12)


def test_ptm_of_unitary_identity():
    assert np.allclose(ptm_of_unitary(np.eye(2)).matrix, np.eye(4))


def test_json_round_trip():
    chan = depolarizing_to_pauli(DepolarizingParams(0.06, (0, 1)))
    back = PauliChannel.from_json(chan.to_json())
    assert back == chan
