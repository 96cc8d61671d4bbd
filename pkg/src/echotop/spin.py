"""Spin-S operators and the two one-step Floquet propagators of the kicked top.

States live in the S_z eigenbasis ordered m = -S, ..., S.  The unperturbed
step is the diagonal twist ``exp(-i phi_m)``; the perturbing kick is the
x-rotation ``exp(-i delta S_x)``, applied through a one-time eigendecomposition
of the symmetric tridiagonal S_x.

Both propagators accept a single state of shape ``(dim,)`` or a batch of
states stacked as columns, shape ``(dim, k)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import DimensionMismatch, EigensolverError


@dataclass(frozen=True)
class SpinParameters:
    S: int

    def __post_init__(self):
        if isinstance(self.S, bool) or int(self.S) != self.S:
            raise ValueError(f"S must be a positive integer, got {self.S!r}")
        if self.S < 1:
            raise ValueError(f"S must be >= 1, got {self.S!r}")
        object.__setattr__(self, "S", int(self.S))

    @property
    def dim(self) -> int:
        return 2 * self.S + 1

    @property
    def hbar(self) -> float:
        return 1.0 / self.S

    @property
    def tau(self) -> float:
        return 1.0

    @property
    def m(self) -> np.ndarray:
        return np.arange(-self.S, self.S + 1, dtype=float)

    @property
    def j(self) -> np.ndarray:
        """Action grid j_m = m/S."""
        return self.m / self.S


@dataclass(frozen=True)
class TopParameters:
    alpha: float = 1.1
    beta: float = 0.0
    gamma: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")


@dataclass(frozen=True)
class AngularMomentumOps:
    sz_diag: np.ndarray
    sx_offdiag: np.ndarray

    @property
    def dim(self) -> int:
        return self.sz_diag.size

    def sz(self) -> np.ndarray:
        return np.diag(self.sz_diag)

    def sx(self) -> np.ndarray:
        return np.diag(self.sx_offdiag, 1) + np.diag(self.sx_offdiag, -1)

    def sy(self) -> np.ndarray:
        # S_y = (S_+ - S_-)/(2i); S_+ has entries on the subdiagonal in this ordering
        return (np.diag(self.sx_offdiag, -1) - np.diag(self.sx_offdiag, 1)) / 1j


def build_angular_momentum(params: SpinParameters) -> AngularMomentumOps:
    S = params.S
    m = params.m
    off = 0.5 * np.sqrt(S * (S + 1) - m[:-1] * (m[:-1] + 1))
    return AngularMomentumOps(sz_diag=m, sx_offdiag=off)


def perturbation_matrix(params: SpinParameters) -> np.ndarray:
    """Dense V = S_x/S (zero diagonal, tridiagonal)."""
    return build_angular_momentum(params).sx() / params.S


@dataclass(frozen=True)
class UnperturbedPropagator:
    phases: np.ndarray
    j_ref: float = 0.0
    _factors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_factors", np.exp(-1j * self.phases))

    @property
    def dim(self) -> int:
        return self.phases.size

    @property
    def factors(self) -> np.ndarray:
        """exp(-i phi_m), the diagonal of U_0."""
        return self._factors


def build_unperturbed(params: SpinParameters, top: TopParameters, j_ref: float = 0.0) -> UnperturbedPropagator:
    S = params.S
    j = params.j
    phases = 0.5 * S * top.alpha * (j - top.beta) ** 2
    if top.gamma != 0.0:
        phases = phases + S * top.gamma / 6.0 * (j - j_ref) ** 3
    return UnperturbedPropagator(phases=phases, j_ref=float(j_ref))


@dataclass(frozen=True)
class KickPropagator:
    eigvals: np.ndarray
    eigvecs: np.ndarray
    delta: float
    _phase: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_phase", np.exp(-1j * self.delta * self.eigvals))

    @property
    def dim(self) -> int:
        return self.eigvals.size

    @property
    def phase(self) -> np.ndarray:
        return self._phase

    def matrix(self) -> np.ndarray:
        """Dense exp(-i delta S_x); O(dim^3), for oracles and spectral evaluation."""
        return (self.eigvecs * self._phase) @ self.eigvecs.T


def build_kick(params: SpinParameters, delta: float) -> KickPropagator:
    if not np.isfinite(delta):
        raise ValueError(f"delta must be finite, got {delta!r}")
    ops = build_angular_momentum(params)
    try:
        mu, Q = eigh_tridiagonal(np.zeros(params.dim), ops.sx_offdiag)
    except LinAlgError as exc:
        raise EigensolverError(f"S_x eigendecomposition failed for S={params.S}: {exc}") from exc
    # spectrum of S_x is exactly {-S..S}
    err = np.abs(mu - params.m).max()
    if not np.isfinite(err) or err > 1e-8 * max(1, params.S):
        raise EigensolverError(
            f"S_x eigenvalues off the integer ladder by {err:.3e} for S={params.S}")
    return KickPropagator(eigvals=mu, eigvecs=Q, delta=float(delta))


def _check_dim(state: np.ndarray, dim: int):
    if state.shape[0] != dim:
        raise DimensionMismatch(f"state has leading dimension {state.shape[0]}, propagator {dim}")


def apply_unperturbed(state: np.ndarray, prop: UnperturbedPropagator) -> np.ndarray:
    state = np.asarray(state)
    _check_dim(state, prop.dim)
    f = prop.factors
    return f * state if state.ndim == 1 else f[:, None] * state


def _real_matmul(Q: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Q @ z for real Q and complex z without promoting Q to complex."""
    z = np.ascontiguousarray(z, dtype=complex)
    shape = z.shape
    zr = z.view(np.float64).reshape(shape[0], -1)
    return np.ascontiguousarray(Q @ zr).view(complex).reshape((Q.shape[0],) + shape[1:])


def apply_kick(state: np.ndarray, kick: KickPropagator) -> np.ndarray:
    state = np.asarray(state)
    _check_dim(state, kick.dim)
    c = _real_matmul(kick.eigvecs.T, state)
    c *= kick.phase if c.ndim == 1 else kick.phase[:, None]
    return _real_matmul(kick.eigvecs, c)


def apply_perturbed(state: np.ndarray, prop: UnperturbedPropagator, kick: KickPropagator) -> np.ndarray:
    """One step of U_delta = U_0 exp(-i delta S_x): kick first, then twist."""
    return apply_unperturbed(apply_kick(state, kick), prop)


def perturbed_matrix(prop: UnperturbedPropagator, kick: KickPropagator) -> np.ndarray:
    return prop.factors[:, None] * kick.matrix()
