"""Initial states: SU(2) coherent states and seeded random states.

Random streams are numpy ``PCG64`` generators keyed by
``SeedSequence([seed, member])``, so member ``k`` of an ensemble with seed
``s`` is the same vector no matter how many members are drawn or in which
order they are computed.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .spin import SpinParameters

NORM_TOL = 1e-12


@dataclass(frozen=True)
class QuantumState:
    amps: np.ndarray
    S: int
    degenerate: bool = False

    def __post_init__(self):
        if self.amps.shape != (2 * self.S + 1,):
            raise ValueError(f"amps must have shape ({2 * self.S + 1},), got {self.amps.shape}")

    @property
    def dim(self) -> int:
        return self.amps.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))


@dataclass(frozen=True)
class CoherentParams:
    theta_star: float
    phi_star: float
    hbar: float

    @property
    def j_star(self) -> float:
        return float(np.cos(self.theta_star))

    @property
    def lambda_squeeze(self) -> float:
        return float(1.0 / np.sin(self.theta_star) ** 2)

    @property
    def delta_j(self) -> float:
        return float(np.sqrt(self.hbar / (2.0 * self.lambda_squeeze)))

    @classmethod
    def for_spin(cls, params: SpinParameters, theta_star: float, phi_star: float) -> "CoherentParams":
        return cls(float(theta_star), float(phi_star), params.hbar)


@dataclass(frozen=True)
class RandomEnsembleParams:
    seed: int
    count: int
    hilbert_dim: int
    action_volume: float = 2.0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")


def coherent_state(params: SpinParameters, theta_star: float, phi_star: float) -> QuantumState:
    """|theta*, phi*> in the S_z basis, built from log-binomials.

    At the poles the state is the basis vector |+-S>; it is returned with
    ``degenerate=True`` and a warning.
    """
    S = params.S
    m = params.m
    c = np.cos(theta_star / 2.0)
    s = np.sin(theta_star / 2.0)
    if abs(np.sin(theta_star)) < 1e-15:
        warnings.warn("coherent state at a pole; returning |+-S>", RuntimeWarning, stacklevel=2)
        amps = np.zeros(params.dim, dtype=complex)
        amps[-1 if np.cos(theta_star) > 0 else 0] = 1.0
        return QuantumState(amps, S, degenerate=True)
    logw = 0.5 * (gammaln(2 * S + 1) - gammaln(S + m + 1) - gammaln(S - m + 1))
    logw = logw + (S + m) * np.log(abs(c)) + (S - m) * np.log(abs(s))
    mag = np.exp(logw - logw.max())
    sign = np.sign(c) ** (S + m) * np.sign(s) ** (S - m)
    amps = sign * mag * np.exp(-1j * m * phi_star)
    amps /= np.linalg.norm(amps)
    return QuantumState(amps, S)


def member_rng(seed: int, member: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(member)])))


def random_state(params: SpinParameters, seed: int, member: int = 0) -> QuantumState:
    """Normalized vector of i.i.d. complex Gaussian amplitudes."""
    rng = member_rng(seed, member)
    z = rng.standard_normal(params.dim) + 1j * rng.standard_normal(params.dim)
    z /= np.linalg.norm(z)
    return QuantumState(z, params.S)


def random_ensemble(params: SpinParameters, ens: RandomEnsembleParams) -> np.ndarray:
    """Members stacked as columns, shape (dim, count)."""
    if ens.hilbert_dim != params.dim:
        raise ValueError("ensemble hilbert_dim does not match spin dimension")
    out = np.empty((params.dim, ens.count), dtype=complex)
    for k in range(ens.count):
        out[:, k] = random_state(params, ens.seed, k).amps
    return out


def structure_function(state: QuantumState) -> tuple[np.ndarray, np.ndarray]:
    """Return (j_n, D(j_n)) with D = |psi_n|^2 on the grid j_n = n/S."""
    j = np.arange(-state.S, state.S + 1) / state.S
    return j, np.abs(state.amps) ** 2


def gaussian_structure_function(j: np.ndarray, j_star: float, lam: float, hbar: float) -> np.ndarray:
    """Asymptotic Gaussian profile of a coherent state, normalized as a lattice weight."""
    return np.sqrt(hbar * lam / np.pi) * np.exp(-lam * (j - j_star) ** 2 / hbar)
