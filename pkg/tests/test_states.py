import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from echotop.spin import SpinParameters
from echotop.states import (
    CoherentParams, RandomEnsembleParams, coherent_state, gaussian_structure_function,
    random_ensemble, random_state, structure_function,
)


@pytest.mark.parametrize("S", [1, 10, 200, 3200])
def test_coherent_normalized(S):
    psi = coherent_state(SpinParameters(S), 1.0, 1.0)
    assert abs(psi.norm - 1) <= 1e-12
    assert np.all(np.isfinite(psi.amps))


def test_coherent_matches_binomial_formula():
    from math import comb
    S, th, ph = 6, 0.7, 2.1
    m = np.arange(-S, S + 1)
    ref = np.array([np.sqrt(comb(2 * S, S + k)) * np.cos(th / 2) ** (S + k) * np.sin(th / 2) ** (S - k)
                    for k in m]) * np.exp(-1j * m * ph)
    np.testing.assert_allclose(coherent_state(SpinParameters(S), th, ph).amps, ref, atol=1e-13)


def test_pole_states_flagged():
    p = SpinParameters(5)
    with pytest.warns(RuntimeWarning):
        north = coherent_state(p, 0.0, 0.3)
    assert north.degenerate and abs(north.amps[-1]) == 1
    with pytest.warns(RuntimeWarning):
        south = coherent_state(p, np.pi, 0.0)
    assert south.degenerate and abs(south.amps[0]) == pytest.approx(1)


def test_near_pole_concentrates_on_top_state():
    psi = coherent_state(SpinParameters(20), 1e-6, 0.0)
    assert abs(psi.amps[-1]) ** 2 > 1 - 1e-9


def test_coherent_action_moments():
    S = 200
    p = SpinParameters(S)
    cp = CoherentParams.for_spin(p, 1.0, 1.0)
    j, D = structure_function(coherent_state(p, 1.0, 1.0))
    mean = np.sum(j * D)
    var = np.sum((j - mean) ** 2 * D)
    assert abs(mean - np.cos(1)) <= 2 * cp.delta_j / np.sqrt(p.dim)
    assert var == pytest.approx(cp.delta_j ** 2, rel=0.05)
    assert cp.lambda_squeeze >= 1 and -1 < cp.j_star < 1


@pytest.mark.parametrize("S", [100, 200, 400])
def test_action_variance_scaling(S):
    p = SpinParameters(S)
    j, D = structure_function(coherent_state(p, 1.0, 0.0))
    mean = np.sum(j * D)
    var = np.sum((j - mean) ** 2 * D)
    assert var == pytest.approx(p.hbar * np.sin(1) ** 2 / 2, rel=0.05)


def test_structure_function_gaussian_kl():
    S = 200
    j, D = structure_function(coherent_state(SpinParameters(S), 1.0, 1.0))
    G = gaussian_structure_function(j, np.cos(1), 1 / np.sin(1) ** 2, 1 / S) / S
    G /= G.sum()
    mask = D > 1e-300
    kl = np.sum(D[mask] * np.log(D[mask] / G[mask]))
    assert kl <= 0.01
    assert abs(j[np.argmax(D)] - np.cos(1)) < 2 / S


def test_structure_function_basis_and_sum():
    p = SpinParameters(4)
    from echotop.states import QuantumState
    e = np.zeros(p.dim, complex)
    e[6] = 1
    j, D = structure_function(QuantumState(e, 4))
    assert D[6] == 1 and D.sum() == 1 and j[6] == 0.5


def test_random_state_reproducible():
    p = SpinParameters(30)
    a = random_state(p, 7, 3).amps
    b = random_state(p, 7, 3).amps
    assert np.array_equal(a, b)
    assert not np.array_equal(a, random_state(p, 8, 3).amps)
    assert abs(np.linalg.norm(a) - 1) <= 1e-12


def test_ensemble_members_independent_of_count():
    p = SpinParameters(10)
    small = random_ensemble(p, RandomEnsembleParams(5, 3, p.dim))
    big = random_ensemble(p, RandomEnsembleParams(5, 10, p.dim))
    assert np.array_equal(small, big[:, :3])


def test_random_overlap_statistics():
    p = SpinParameters(50)
    ov = [abs(np.vdot(random_state(p, 1, k).amps, random_state(p, 2, k).amps)) ** 2 for k in range(400)]
    mean = np.mean(ov)
    assert 1 / (5 * p.dim) < mean < 5 / p.dim


def test_random_covariance():
    p = SpinParameters(50)
    K = 10000
    E = random_ensemble(p, RandomEnsembleParams(11, K, p.dim))
    C = (E @ E.conj().T) / K
    # each entry is an average of K terms of size ~1/N
    sigma = 1 / (p.dim * np.sqrt(K))
    assert np.abs(np.diag(C).real - 1 / p.dim).max() < 5 * sigma
    off = C - np.diag(np.diag(C))
    assert np.abs(off).max() < 5 * sigma
    j, D = structure_function(random_state(p, 0))
    assert D.mean() == pytest.approx(1 / p.dim)


@settings(max_examples=25, deadline=None)
@given(S=st.integers(1, 300), th=st.floats(0.05, 3.09), ph=st.floats(0, 2 * np.pi))
def test_coherent_normalization_property(S, th, ph):
    psi = coherent_state(SpinParameters(S), th, ph)
    assert abs(psi.norm - 1) <= 1e-12
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        coherent_state(SpinParameters(S), th, ph)
