import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ormlab.errors import ValidationError
from ormlab.states import (DensityMatrix, basis_state, gibbs_state, heisenberg_xx, maximally_mixed,
                           observable_from_terms, parse_pauli_label, pauli_dense, pauli_matrix, pauli_labels,
                           random_density_matrix, stabilizer_projector)

BETA0 = 1 / (200 * 420.0)
# [DERIVED] dense diagonalization with scipy.linalg.expm on an independently assembled H_XX
E0_L6 = -126000.0
PURITY_L6_8B0 = 0.8019642874639764


def test_pauli_matrices():
    assert np.allclose(pauli_matrix("Z").matrix, np.diag([1, -1]))
    assert np.allclose(pauli_matrix("ZI").matrix, np.diag([1, 1, -1, -1]))
    xy = pauli_matrix("XY").matrix
    expected = np.kron([[0, 1], [1, 0]], [[0, -1j], [1j, 0]])
    assert np.allclose(xy, expected)
    assert abs(np.trace(xy)) < 1e-12
    assert np.allclose(xy @ xy, np.eye(4))


def test_pauli_label_validation():
    with pytest.raises(ValidationError):
        pauli_matrix("XQ")
    with pytest.raises(ValidationError):
        parse_pauli_label("iZ")
    assert parse_pauli_label("-XZ") == (-1, "XZ")


def test_two_qubit_pauli_products_close():
    labels = list(pauli_labels(2))
    mats = {lab: pauli_dense(lab) for lab in labels}
    for a, b in itertools.product(labels, repeat=2):
        prod = mats[a] @ mats[b]
        hits = [c for c in labels if any(np.allclose(prod, ph * mats[c]) for ph in (1, -1, 1j, -1j))]
        assert len(hits) == 1


def test_heisenberg_terms():
    h = heisenberg_xx(2, J0=1.0, Bz=0.0)
    assert dict(h.terms) == {"XX": 2.0, "YY": 2.0}
    h3 = dict(heisenberg_xx(3, J0=1.0, alpha=1.0, Bz=0.0).terms)
    assert h3["XIX"] == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        heisenberg_xx(1)


def test_heisenberg_matrix_matches_terms():
    h = heisenberg_xx(4)
    m = sum(c * pauli_dense(lab) for lab, c in h.terms)
    assert np.max(np.abs(m - h.matrix)) <= 1e-10


def test_heisenberg_ground_energy():
    assert np.linalg.eigvalsh(heisenberg_xx(6).matrix)[0] == pytest.approx(E0_L6, rel=1e-12)


def test_gibbs_limits():
    h = heisenberg_xx(3)
    assert np.allclose(gibbs_state(h, 0.0).matrix, np.eye(8) / 8)
    z = np.diag([1.0, -1.0])
    assert np.allclose(gibbs_state(z, 50.0).matrix, np.diag([0, 1]), atol=1e-12)


def test_gibbs_purity_reference():
    rho = gibbs_state(heisenberg_xx(6), 8 * BETA0)
    assert rho.purity() == pytest.approx(PURITY_L6_8B0, rel=1e-9)


def test_gibbs_purity_monotone():
    h = heisenberg_xx(4)
    p = [gibbs_state(h, b * BETA0).purity() for b in np.linspace(0, 10, 21)]
    assert np.all(np.diff(p) >= -1e-12)


def test_stabilizer_projectors():
    assert np.allclose(stabilizer_projector(["+Z"]).matrix, np.diag([1, 0]))
    bell = stabilizer_projector(["+ZZ", "+XX"]).matrix
    assert np.linalg.matrix_rank(bell) == 1
    v = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(bell, np.outer(v, v))
    zi = stabilizer_projector(["+ZI"]).matrix
    assert np.allclose(zi, np.diag([1, 1, 0, 0]))


@given(st.integers(1, 3), st.data())
def test_stabilizer_trace(n, data):
    body = data.draw(st.text("IXYZ", min_size=n, max_size=n).filter(lambda s: set(s) != {"I"}))
    p = stabilizer_projector(["+" + body]).matrix
    assert np.trace(p).real == pytest.approx(2 ** (n - 1))
    assert np.allclose(p @ p, p, atol=1e-9)


def test_stabilizer_rejects_bad_generators():
    with pytest.raises(ValidationError):
        stabilizer_projector(["+ZI", "+XI"])
    with pytest.raises(ValidationError):
        stabilizer_projector(["+ZZ", "+ZZ"])


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 16))
def test_random_states_satisfy_invariants(seed, n, rank):
    rho = random_density_matrix(n, np.random.default_rng(seed), min(rank, 2**n))
    m = rho.matrix
    assert np.max(np.abs(m - m.conj().T)) <= 1e-10
    assert abs(np.trace(m) - 1) <= 1e-10
    assert np.linalg.eigvalsh(m)[0] >= -1e-9


def test_density_matrix_validation():
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([0.7, 0.7]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([1.5, -0.5]))
    jitter = DensityMatrix(np.diag([1.0 + 5e-10, -5e-10]))
    assert jitter.matrix[1, 1] == 0
    assert basis_state(3, 2).matrix[3, 3] == 1
    assert maximally_mixed(2).purity() == pytest.approx(0.25)


def test_observable_from_terms():
    o = observable_from_terms([("ZZ", 1.0)], 2)
    assert o.structure == "pauli_string"
    mixed = observable_from_terms([("ZI", 0.6), ("XX", 0.8)], 2)
    assert mixed.structure == "dense"
    assert np.allclose(mixed.matrix, 0.6 * pauli_dense("ZI") + 0.8 * pauli_dense("XX"))
