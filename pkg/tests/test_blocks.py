"""Multiplicity combinatorics against independent counting oracles.

The spin-coupling oracle builds Clebsch-Gordan multiplicities of n coupled
spins-1/2 by direct recursion; the Fock oracles count joint eigenspaces of
commuting Casimir/number operators on the full many-body space.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudotherm import blocks


def cg_multiplicity(n_spins: int) -> dict:
    """{2S: multiplicity} for n coupled spins-1/2, by direct recursion."""
    mult = {0: 1}
    for _ in range(n_spins):
        new: dict = {}
        for two_s, m in mult.items():
            for two_s_new in ({two_s + 1} if two_s == 0 else {two_s - 1, two_s + 1}):
                new[two_s_new] = new.get(two_s_new, 0) + m
        mult = new
    return mult


@pytest.mark.parametrize("two_tau", range(0, 13))
def test_d_s_matches_spin_coupling_oracle(two_tau):
    oracle = cg_multiplicity(two_tau)
    tau = two_tau / 2.0
    for k in range(two_tau // 2 + 1):
        two_s = two_tau - 2 * k
        assert blocks.d_s(tau, k) == oracle.get(two_s, 0)


@pytest.mark.parametrize("two_tau", range(0, 13))
def test_d_s_completeness(two_tau):
    tau = two_tau / 2.0
    total = sum(
        blocks.d_s(tau, k) * (two_tau - 2 * k + 1) for k in range(two_tau // 2 + 1)
    )
    assert total == 2**two_tau


def test_d_s_values():
    assert blocks.d_s(1.0, 1) == 1  # two spins-1/2: one singlet
    for two_tau in range(0, 10):
        assert blocks.d_s(two_tau / 2.0, 0) == 1


def test_d_s_invalid_k():
    with pytest.raises(ValueError):
        blocks.d_s(1.0, 2)
    with pytest.raises(ValueError):
        blocks.d_s(1.0, -1)


@pytest.mark.parametrize("two_tau", range(0, 11))
def test_g_qb_matches_spin_coupling_oracle(two_tau):
    oracle = cg_multiplicity(two_tau)
    for two_s in range(two_tau % 2, two_tau + 1, 2):
        assert blocks.g_qb(two_tau / 2.0, two_s / 2.0) == oracle.get(two_s, 0)


def test_g_qb_values():
    assert blocks.g_qb(1.0, 0.0) == 1
    assert blocks.g_qb(2.0, 0.0) == 2  # four spins-1/2 hold two singlets
    for two_s in range(0, 8):
        s = two_s / 2.0
        assert blocks.g_qb(s, s) == 1


def test_g_qb_invalid():
    with pytest.raises(ValueError):
        blocks.g_qb(0.5, 1.0)


def test_qubit_level_multiplicity_values():
    assert blocks.qubit_level_multiplicity(1, 0.5) == 1
    assert blocks.qubit_level_multiplicity(1, 0.0) == 2
    assert blocks.qubit_level_multiplicity(2, 0.0) == 5
    assert blocks.qubit_level_multiplicity(2, 0.5) == 4
    assert blocks.qubit_level_multiplicity(2, 1.0) == 1


@pytest.mark.parametrize("omega_i", range(1, 9))
def test_qubit_level_completeness(omega_i):
    total = sum(
        blocks.qubit_level_multiplicity(omega_i, two_s / 2.0) * (two_s + 1)
        for two_s in range(omega_i + 1)
    )
    assert total == 2 ** (2 * omega_i)


def quasispin_casimir_counts(omega_i: int) -> dict:
    """{2s: count of quasispin-s irreps} on the 2^(2 omega_i) pairing Fock
    space, from eigenvalues of the quasispin Casimir."""
    n_modes = 2 * omega_i
    dim = 2**n_modes

    def chain(ops_at: dict) -> np.ndarray:
        out = np.ones((1, 1))
        for mode in range(n_modes):
            out = np.kron(out, ops_at.get(mode, np.eye(2)))
        return out

    create = np.array([[0.0, 0.0], [1.0, 0.0]])
    number = np.diag([0.0, 1.0])
    sp = np.zeros((dim, dim))
    sz = np.zeros((dim, dim))
    for pslot in range(omega_i):
        a, b = 2 * pslot, 2 * pslot + 1
        sp += chain({a: create, b: create})
        sz += 0.5 * (chain({a: number}) + chain({b: number}) - np.eye(dim))
    sm = sp.T
    casimir = 0.5 * (sp @ sm + sm @ sp) + sz @ sz
    evals = np.linalg.eigvalsh(casimir)
    counts: dict = {}
    for v in evals:
        two_s = round(np.sqrt(4.0 * v + 1.0) - 1.0)
        counts[two_s] = counts.get(two_s, 0) + 1
    return {two_s: c // (two_s + 1) for two_s, c in counts.items() if c}


@pytest.mark.parametrize("omega_i", (1, 2, 3))
def test_qubit_level_multiplicity_against_fock_casimir(omega_i):
    oracle = quasispin_casimir_counts(omega_i)
    for two_s in range(omega_i + 1):
        assert blocks.qubit_level_multiplicity(omega_i, two_s / 2.0) == oracle.get(
            two_s, 0
        )


def test_nv_multiplicity_single_sublevel():
    # Omega=1/2: 4-state Fock space; N=1 holds exactly one doublet
    assert blocks.nv_multiplicity(0.5, 1, 0.5, 0) == 1
    assert blocks.nv_multiplicity(0.5, 0, 0.0, 0) == 1
    assert blocks.nv_multiplicity(0.5, 2, 0.0, 0) == 1


def test_nv_multiplicity_invalid():
    with pytest.raises(ValueError):
        blocks.nv_multiplicity(0.5, 1, 0.0, 0)  # N/2 - tau not integer
    with pytest.raises(ValueError):
        blocks.nv_multiplicity(0.5, 6, 0.0, 0)  # does not fit


@pytest.mark.parametrize("omega", (0.5, 1.0, 1.5, 2.0, 4.0))
def test_nv_completeness(omega):
    total = sum(
        lbl.mult * (round(2 * lbl.S) + 1) for lbl in blocks.enumerate_nv_labels(omega)
    )
    assert total == 2 ** round(4 * omega)


@pytest.mark.parametrize(
    "omega,omega1,omega2",
    [(0.5, 1, 1), (1.0, 1, 1), (2.0, 2, 2), (4.0, 2, 2)],
)
def test_enumerate_blocks_completeness(omega, omega1, omega2):
    bl = blocks.enumerate_blocks(omega, omega1, omega2)
    want = 2 ** (round(4 * omega) + 2 * (omega1 + omega2))
    assert blocks.total_dimension(bl) == want


def test_enumerate_blocks_deterministic_and_unique():
    a = blocks.enumerate_blocks(1.0, 1, 1)
    b = blocks.enumerate_blocks(1.0, 1, 1)
    assert a == b
    keys = [lbl.key() for lbl in a]
    assert keys == sorted(keys)
    assert len(set(keys)) == len(keys)


def test_enumerate_blocks_small_product():
    bl = blocks.enumerate_blocks(0.5, 1, 1)
    assert blocks.total_dimension(bl) == 64


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 10), st.integers(0, 20))
def test_multiplicities_are_positive_exact_ints(omega_i, seed):
    labels = blocks.enumerate_qubit_labels(omega_i, omega_i)
    lbl = labels[seed % len(labels)]
    assert isinstance(lbl.mult, int) and lbl.mult > 0


def test_large_register_no_overflow():
    # Omega = 10 needs exact big-int factorials
    labels = blocks.enumerate_nv_labels(10.0)
    total = sum(lbl.mult * (round(2 * lbl.S) + 1) for lbl in labels)
    assert total == 2**40


def joint_label_counts_fock(omega, omega1, omega2):
    """(N, 2S, 2s1, 2s2) -> state count via simultaneous diagonalization of
    the commuting Casimir and number operators on the full Fock space."""
    from pseudotherm.oracle import FockSpace, fock_operators

    ops = fock_operators(FockSpace(omega, omega1, omega2))
    sp, sz = ops.s_plus_nv, ops.s_z_nv
    c_nv = 0.5 * (sp @ sp.T + sp.T @ sp) + sz @ sz
    c1 = 0.5 * (
        ops.s_plus_qb1 @ ops.s_plus_qb1.T + ops.s_plus_qb1.T @ ops.s_plus_qb1
    ) + ops.s_z_qb1 @ ops.s_z_qb1
    c2 = 0.5 * (
        ops.s_plus_qb2 @ ops.s_plus_qb2.T + ops.s_plus_qb2.T @ ops.s_plus_qb2
    ) + ops.s_z_qb2 @ ops.s_z_qb2
    combo = (
        np.pi * ops.n_nv + np.e * c_nv + np.sqrt(2.0) * c1 + np.sqrt(3.0) * c2
    )
    _, vecs = np.linalg.eigh(combo)

    def spin_of(c_mat, v):
        val = float(v @ c_mat @ v)
        return round(np.sqrt(4.0 * val + 1.0) - 1.0)

    counts: dict = {}
    for i in range(vecs.shape[1]):
        v = vecs[:, i]
        key = (
            round(float(v @ ops.n_nv @ v)),
            spin_of(c_nv, v),
            spin_of(c1, v),
            spin_of(c2, v),
        )
        counts[key] = counts.get(key, 0) + 1
    return counts


def test_block_list_matches_fock_symmetry_decomposition():
    omega, omega1, omega2 = 0.5, 1, 1
    oracle = joint_label_counts_fock(omega, omega1, omega2)
    predicted: dict = {}
    for b in blocks.enumerate_blocks(omega, omega1, omega2):
        key = (b.nv.N, round(2 * b.nv.S), round(2 * b.qb.s1), round(2 * b.qb.s2))
        predicted[key] = predicted.get(key, 0) + b.mult * b.dim
    assert predicted == oracle
