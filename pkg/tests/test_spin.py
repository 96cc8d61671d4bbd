import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from echotop.errors import DimensionMismatch
from echotop.spin import (
    SpinParameters, TopParameters, apply_kick, apply_perturbed, apply_unperturbed,
    build_angular_momentum, build_kick, build_unperturbed, perturbation_matrix, perturbed_matrix,
)


def rand_state(dim, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return z / np.linalg.norm(z)


def test_spin_one_matrices():
    ops = build_angular_momentum(SpinParameters(1))
    np.testing.assert_allclose(ops.sz_diag, [-1, 0, 1])
    np.testing.assert_allclose(ops.sx_offdiag, [1 / np.sqrt(2)] * 2)


@pytest.mark.parametrize("bad", [0, -3, 0.5, 2.5])
def test_rejects_non_positive_integer_spin(bad):
    with pytest.raises(ValueError):
        SpinParameters(bad)


def test_parameters():
    p = SpinParameters(200)
    assert p.dim == 401
    assert p.hbar * p.S == 1.0
    assert p.tau == 1.0
    with pytest.raises(ValueError):
        TopParameters(delta=-0.1)


@pytest.mark.parametrize("S", [1, 3, 10, 20])
def test_commutation_relations(S):
    ops = build_angular_momentum(SpinParameters(S))
    X, Z = ops.sx(), ops.sz()
    Y = -1j * (Z @ X - X @ Z)  # [Sz, Sx] = i Sy
    np.testing.assert_allclose(Y, ops.sy(), atol=1e-12)
    np.testing.assert_allclose(Y, Y.conj().T, atol=1e-12)
    np.testing.assert_allclose(X @ Y - Y @ X, 1j * Z, atol=1e-12)
    np.testing.assert_allclose(Y @ Z - Z @ Y, 1j * X, atol=1e-12)
    # Casimir
    np.testing.assert_allclose(X @ X + Y @ Y + Z @ Z, S * (S + 1) * np.eye(2 * S + 1), atol=1e-10)


def test_perturbation_has_zero_diagonal():
    V = perturbation_matrix(SpinParameters(30))
    assert np.all(np.diag(V) == 0.0)


def test_unperturbed_phases():
    p = SpinParameters(200)
    prop = build_unperturbed(p, TopParameters(alpha=1.1))
    assert prop.phases[200] == 0.0
    assert prop.phases[-1] == pytest.approx(110.0, rel=1e-14)
    prop = build_unperturbed(p, TopParameters(alpha=1.1, beta=1.4))
    assert prop.phases[-1] == pytest.approx(200 * 0.55 * 0.4 ** 2, rel=1e-13)


def test_cubic_term_uses_reference_point():
    p = SpinParameters(10)
    j = p.j
    prop = build_unperturbed(p, TopParameters(alpha=1.1, gamma=4.0), j_ref=0.3)
    expected = 10 * 0.55 * j ** 2 + 10 * 4.0 / 6 * (j - 0.3) ** 3
    np.testing.assert_allclose(prop.phases, expected, rtol=1e-14)
    # gamma = 0 ignores j_ref
    a = build_unperturbed(p, TopParameters(alpha=1.1), j_ref=0.0).phases
    b = build_unperturbed(p, TopParameters(alpha=1.1), j_ref=0.7).phases
    np.testing.assert_array_equal(a, b)


def test_unperturbed_application():
    p = SpinParameters(12)
    prop = build_unperturbed(p, TopParameters(alpha=1.1, beta=0.2))
    e = np.zeros(p.dim, complex)
    e[5] = 1
    out = apply_unperturbed(e, prop)
    assert abs(out[5]) == pytest.approx(1.0)
    psi = rand_state(p.dim)
    twice = apply_unperturbed(apply_unperturbed(psi, prop), prop)
    np.testing.assert_allclose(twice, np.exp(-2j * prop.phases) * psi, atol=1e-14)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-14)


def test_kick_identity_cases():
    p = SpinParameters(7)
    psi = rand_state(p.dim, 1)
    np.testing.assert_allclose(apply_kick(psi, build_kick(p, 0.0)), psi, atol=1e-14)
    np.testing.assert_allclose(apply_kick(psi, build_kick(p, 2 * np.pi)), psi, atol=1e-12)


@pytest.mark.parametrize("S", [1, 5, 10, 20])
def test_kick_matches_expm(S):
    p = SpinParameters(S)
    X = build_angular_momentum(p).sx()
    k = build_kick(p, 0.3)
    oracle = expm(-0.3j * X)
    assert np.abs(k.matrix() - oracle).max() <= 1e-9
    np.testing.assert_allclose(k.eigvecs.T @ k.eigvecs, np.eye(p.dim), atol=1e-10)
    e = np.zeros(p.dim, complex)
    e[0] = 1
    np.testing.assert_allclose(apply_kick(e, k), oracle[:, 0], atol=1e-10)


def test_kick_batch_matches_single():
    p = SpinParameters(9)
    k = build_kick(p, 0.7)
    B = np.stack([rand_state(p.dim, s) for s in range(4)], axis=1)
    out = apply_kick(B, k)
    for c in range(4):
        np.testing.assert_allclose(out[:, c], apply_kick(B[:, c], k), atol=1e-14)


def test_dimension_mismatch():
    p = SpinParameters(4)
    with pytest.raises(DimensionMismatch):
        apply_kick(np.ones(3, complex), build_kick(p, 0.1))
    with pytest.raises(DimensionMismatch):
        apply_unperturbed(np.ones(3, complex), build_unperturbed(p, TopParameters()))


def test_kick_rejects_non_finite():
    with pytest.raises(ValueError):
        build_kick(SpinParameters(3), float("nan"))


def test_perturbed_step_order():
    p = SpinParameters(10)
    top = TopParameters(alpha=1.1, beta=0.3)
    prop, k = build_unperturbed(p, top), build_kick(p, 0.2)
    psi = rand_state(p.dim, 3)
    np.testing.assert_allclose(apply_perturbed(psi, prop, k), perturbed_matrix(prop, k) @ psi, atol=1e-13)
    np.testing.assert_allclose(perturbed_matrix(prop, k),
                               np.diag(np.exp(-1j * prop.phases)) @ expm(-0.2j * build_angular_momentum(p).sx()),
                               atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(S=st.integers(1, 25), delta=st.floats(-4, 4), seed=st.integers(0, 2 ** 32 - 1))
def test_unitarity_property(S, delta, seed):
    p = SpinParameters(S)
    psi = rand_state(p.dim, seed)
    k = build_kick(p, abs(delta))
    out = apply_kick(psi, k)
    assert abs(np.linalg.norm(out) - 1) <= 1e-10
    back = apply_kick(out, build_kick(p, -abs(delta)))
    np.testing.assert_allclose(back, psi, atol=1e-10)
    prop = build_unperturbed(p, TopParameters(alpha=1.1, beta=delta))
    assert abs(np.linalg.norm(apply_perturbed(psi, prop, k)) - 1) <= 1e-10
