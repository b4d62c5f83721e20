import numpy as np

from threshold_dirac.algebra import (
    alpha,
    alpha_stack,
    beta,
    free_dirac_symbol,
    identity4,
    one_plus_beta,
    sigma,
)

TOL = 1e-13


def test_clifford_relations_exact():
    I = identity4()
    b = beta()
    for i in range(1, 4):
        ai = alpha(i)
        assert np.max(np.abs(ai @ b + b @ ai)) <= TOL
        for j in range(1, 4):
            aj = alpha(j)
            anti = ai @ aj + aj @ ai
            expect = 2.0 * I if i == j else np.zeros((4, 4))
            assert np.max(np.abs(anti - expect)) <= TOL
    assert np.max(np.abs(b @ b - I)) <= TOL


def test_hermiticity():
    for i in range(1, 4):
        assert np.max(np.abs(alpha(i) - alpha(i).conj().T)) <= TOL
        assert np.max(np.abs(sigma(i) - sigma(i).conj().T)) <= TOL
    assert np.max(np.abs(beta() - beta().conj().T)) <= TOL


def test_pauli_blocks_match_alpha():
    for i in range(1, 4):
        a = alpha(i)
        assert np.max(np.abs(a[:2, 2:] - sigma(i))) == 0
        assert np.max(np.abs(a[2:, :2] - sigma(i))) == 0
        assert np.max(np.abs(a[:2, :2])) == 0
        assert np.max(np.abs(a[2:, 2:])) == 0


def test_symbol_squares_to_dispersion(rng):
    for _ in range(20):
        p = rng.standard_normal(3)
        s = free_dirac_symbol(p)
        assert np.max(np.abs(s - s.conj().T)) <= TOL
        expect = (p @ p + 1.0) * identity4()
        assert np.max(np.abs(s @ s - expect)) <= 1e-13 * (1 + p @ p)


def test_one_plus_beta_is_upper_projector_times_two():
    ob = one_plus_beta()
    assert np.allclose(ob, np.diag([2, 2, 0, 0]))
    assert np.max(np.abs(ob @ ob - 2 * ob)) <= TOL


def test_alpha_stack_consistent():
    st = alpha_stack()
    for i in range(3):
        assert np.array_equal(st[i], alpha(i + 1))
