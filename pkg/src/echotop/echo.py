"""Exact quantum echo dynamics for the kicked top.

Kick order: one perturbed step is ``U_delta = U_0 exp(-i delta S_x)``; the
kick acts first, then the twist.  The fidelity amplitude is

    f(t) = <U_delta^t psi | U_0^t psi>,

so that for a single step ``f(1) = <psi| exp(+i delta S_x) |psi>``.

Traces are produced by co-evolving two state vectors (never forming U^t).
For sparse, very long times ``run_fidelity_spectral`` diagonalizes U_delta
once and evaluates f(t) at arbitrary t directly.

The dense oracle builders (``heisenberg_v``, ``sigma_exact``, ``gamma_exact``,
``echo_operators``) refuse S > ``DENSE_LIMIT`` unless ``allow_large=True``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur

from .errors import DegenerateSpectrum, DimensionMismatch, NotNormalized, OracleSizeError
from .spin import (
    KickPropagator,
    SpinParameters,
    UnperturbedPropagator,
    apply_kick,
    apply_unperturbed,
    build_angular_momentum,
    perturbation_matrix,
    perturbed_matrix,
)
from .states import QuantumState

KICK_ORDER = "kick-then-twist"
DENSE_LIMIT = 128
NORM_TOL = 1e-8
DEGENERACY_TOL = 1e-9


def kick_order_convention() -> str:
    """U_delta = U_0 exp(-i delta S_x): the kick is applied first, then the twist."""
    return KICK_ORDER


@dataclass(frozen=True)
class FidelityTrace:
    times: np.ndarray
    amplitude: np.ndarray

    @property
    def fidelity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2


@dataclass(frozen=True)
class EnsembleTrace:
    """Amplitude-level ensemble average: F = |<f>|^2.

    ``fidelity_stderr`` propagates the member scatter of f to F to first
    order, 2|<f>| * std(f)/sqrt(K).
    """
    times: np.ndarray
    members: np.ndarray  # shape (n_times, K)

    @property
    def amplitude(self) -> np.ndarray:
        return self.members.mean(axis=1)

    @property
    def fidelity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    @property
    def count(self) -> int:
        return self.members.shape[1]

    @property
    def fidelity_stderr(self) -> np.ndarray:
        K = self.count
        if K < 2:
            return np.zeros(self.times.size)
        sf = np.sqrt(np.var(self.members, axis=1, ddof=1) / K)
        return 2.0 * np.abs(self.amplitude) * sf

    @property
    def member_fidelity(self) -> np.ndarray:
        return np.abs(self.members) ** 2


def _as_amps(state) -> np.ndarray:
    amps = state.amps if isinstance(state, QuantumState) else np.asarray(state)
    return np.asarray(amps, dtype=complex)


def _check_input(psi: np.ndarray, dim: int):
    if psi.shape[0] != dim:
        raise DimensionMismatch(f"state dimension {psi.shape[0]} != propagator dimension {dim}")
    norms = np.linalg.norm(psi, axis=0)
    bad = np.abs(norms - 1.0) > NORM_TOL
    if np.any(bad):
        raise NotNormalized(f"input state norm deviates from 1 by {np.abs(norms - 1).max():.3e}")


def _record_times(t_max: int, stride: int, times) -> np.ndarray:
    if times is not None:
        ts = np.unique(np.asarray(times, dtype=np.int64))
        if ts.size and ts[0] < 0:
            raise ValueError("times must be >= 0")
        return ts
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return np.arange(0, t_max + 1, stride, dtype=np.int64)


def _step_overlaps(psi, prop, kick, ts):
    """Co-evolve psi (dim,) or (dim, K); return overlaps at times ts, shape (len(ts), K)."""
    batch = psi if psi.ndim == 2 else psi[:, None]
    p0 = batch.copy()
    pd = batch.copy()
    out = np.empty((ts.size, batch.shape[1]), dtype=complex)
    t = 0
    for i, target in enumerate(ts):
        while t < target:
            p0 = apply_unperturbed(p0, prop)
            pd = apply_unperturbed(apply_kick(pd, kick), prop)
            t += 1
        out[i] = np.einsum("ij,ij->j", pd.conj(), p0)
    if ts.size and ts[0] == 0:
        out[0] = 1.0
    return out


def run_fidelity(state, prop: UnperturbedPropagator, kick: KickPropagator,
                 t_max: int = 0, stride: int = 1, times=None) -> FidelityTrace:
    """Fidelity amplitude of one state, recorded every ``stride`` steps up to ``t_max``.

    ``times`` (sorted integers) overrides the regular grid.
    """
    psi = _as_amps(state)
    if psi.ndim != 1:
        raise DimensionMismatch("run_fidelity takes a single state; use run_fidelity_ensemble")
    _check_input(psi, prop.dim)
    if kick.dim != prop.dim:
        raise DimensionMismatch("kick and twist dimensions differ")
    ts = _record_times(t_max, stride, times)
    return FidelityTrace(ts, _step_overlaps(psi, prop, kick, ts)[:, 0])


def run_fidelity_ensemble(states: np.ndarray, prop: UnperturbedPropagator, kick: KickPropagator,
                          t_max: int = 0, stride: int = 1, times=None,
                          batch: int = 256) -> EnsembleTrace:
    """Batched co-evolution of ensemble members stacked as columns of ``states``."""
    states = np.asarray(states, dtype=complex)
    if states.ndim != 2:
        raise DimensionMismatch("states must have shape (dim, K)")
    _check_input(states, prop.dim)
    ts = _record_times(t_max, stride, times)
    K = states.shape[1]
    members = np.empty((ts.size, K), dtype=complex)
    for lo in range(0, K, batch):
        members[:, lo:lo + batch] = _step_overlaps(states[:, lo:lo + batch], prop, kick, ts)
    return EnsembleTrace(ts, members)


@dataclass(frozen=True)
class SpectralEcho:
    """Eigendecomposition U_delta = Z diag(exp(-i theta)) Z^H of one perturbed step."""
    theta: np.ndarray
    Z: np.ndarray
    phases: np.ndarray

    def overlaps(self, states: np.ndarray, times) -> np.ndarray:
        """f(t) for each column of ``states`` at each t; shape (len(times), K)."""
        states = np.asarray(states, dtype=complex)
        if states.ndim == 1:
            states = states[:, None]
        c = self.Z.conj().T @ states
        ph0 = np.mod(self.phases, 2 * np.pi)
        out = np.empty((len(times), states.shape[1]), dtype=complex)
        for i, t in enumerate(times):
            # U_0^t psi, expressed in the eigenbasis of U_delta
            w = self.Z.conj().T @ (np.exp(-1j * np.mod(ph0 * t, 2 * np.pi))[:, None] * states)
            rot = np.exp(-1j * np.mod(self.theta * t, 2 * np.pi))
            out[i] = np.einsum("nk,nk->k", (rot[:, None] * c).conj(), w)
        return out


def spectral_echo(prop: UnperturbedPropagator, kick: KickPropagator) -> SpectralEcho:
    """Complex Schur form of U_delta; for a unitary matrix T is diagonal up to roundoff."""
    T, Z = schur(perturbed_matrix(prop, kick), output="complex")
    theta = -np.angle(np.diag(T))
    return SpectralEcho(theta=theta, Z=Z, phases=prop.phases)


def run_fidelity_spectral(states, prop: UnperturbedPropagator, kick: KickPropagator, times,
                          spectral: SpectralEcho | None = None) -> EnsembleTrace:
    """f(t) at arbitrary sparse times via one O(dim^3) diagonalization of U_delta.

    Cost per recorded time equals one stepped time step, independent of t,
    so log-spaced times out to 10^6 and beyond are cheap.
    """
    psi = _as_amps(states)
    psi2 = psi if psi.ndim == 2 else psi[:, None]
    _check_input(psi2, prop.dim)
    ts = np.asarray(times, dtype=np.int64)
    spectral = spectral if spectral is not None else spectral_echo(prop, kick)
    return EnsembleTrace(ts, spectral.overlaps(psi2, ts))


# ----------------------------------------------------------------------------
# dense small-S oracles

def _gate(params: SpinParameters, allow_large: bool):
    if params.S > DENSE_LIMIT and not allow_large:
        raise OracleSizeError(
            f"dense oracle at S={params.S} exceeds S<={DENSE_LIMIT}; pass allow_large=True")


def _apply_v(psi: np.ndarray, params: SpinParameters) -> np.ndarray:
    """V psi with V = S_x/S, using the tridiagonal structure."""
    off = build_angular_momentum(params).sx_offdiag / params.S
    out = np.zeros_like(psi)
    out[:-1] += off[:, None] * psi[1:] if psi.ndim == 2 else off * psi[1:]
    out[1:] += off[:, None] * psi[:-1] if psi.ndim == 2 else off * psi[:-1]
    return out


def heisenberg_v(params: SpinParameters, prop: UnperturbedPropagator, t: int,
                 allow_large: bool = False) -> np.ndarray:
    """V_t = U_0^{-t} V U_0^t, i.e. (V_t)_{nm} = V_{nm} exp(i(phi_n - phi_m)t)."""
    _gate(params, allow_large)
    V = perturbation_matrix(params).astype(complex)
    e = np.exp(1j * np.mod(prop.phases * t, 2 * np.pi))
    return e[:, None] * V * e.conj()[None, :]


def sigma_exact(params: SpinParameters, prop: UnperturbedPropagator, t: int,
                allow_large: bool = False) -> np.ndarray:
    """Sigma_t = tau * sum_{t'=0}^{t-1} V_{t'}, summed as a geometric series per element."""
    _gate(params, allow_large)
    V = perturbation_matrix(params)
    d = prop.phases[:, None] - prop.phases[None, :]
    z = np.exp(1j * np.mod(d, 2 * np.pi))
    near = np.abs(1 - z) < 1e-12
    num = 1 - np.exp(1j * np.mod(d * t, 2 * np.pi))
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(near, float(t), num / np.where(near, 1.0, 1 - z))
    return params.tau * V * g


def sigma_direct(params: SpinParameters, prop: UnperturbedPropagator, t: int,
                 allow_large: bool = False) -> np.ndarray:
    """Literal sum of heisenberg_v over t' < t (oracle for sigma_exact)."""
    out = np.zeros((params.dim, params.dim), dtype=complex)
    for tp in range(t):
        out += heisenberg_v(params, prop, tp, allow_large)
    return params.tau * out


def gamma_exact(params: SpinParameters, prop: UnperturbedPropagator, t: int,
                allow_large: bool = False) -> np.ndarray:
    """Gamma_t = (i tau^2/hbar) sum_{t'<t} sum_{t''=t'}^{t-1} [V_{t'}, V_{t''}]."""
    _gate(params, allow_large)
    Vs = [heisenberg_v(params, prop, tp, allow_large) for tp in range(t)]
    out = np.zeros((params.dim, params.dim), dtype=complex)
    tail = np.zeros_like(out)
    for tp in range(t - 1, -1, -1):
        tail += Vs[tp]
        out += Vs[tp] @ tail - tail @ Vs[tp]
    return 1j * params.tau ** 2 / params.hbar * out


def v_bar_exact(params: SpinParameters) -> np.ndarray:
    """Time average of V: its diagonal in the (diagonal) U_0 eigenbasis."""
    return np.real(np.diag(perturbation_matrix(params))).copy()


def v_doubly_averaged_exact(params: SpinParameters, prop: UnperturbedPropagator) -> np.ndarray:
    """Diagonal of the doubly averaged perturbation, lim Gamma_t/(t tau).

    V==_nn = (tau/hbar) sum_k |V_nk|^2 cot((phi_n - phi_k)/2); only k = n+-1
    contribute for V = S_x/S.  Raises DegenerateSpectrum if a contributing
    pair of eigenphases coincides mod 2pi within DEGENERACY_TOL.
    """
    off = build_angular_momentum(params).sx_offdiag / params.S
    phi = prop.phases
    d = phi[:-1] - phi[1:]  # phi_n - phi_{n+1}
    gap = np.abs(np.angle(np.exp(1j * d)))
    if np.any(gap < DEGENERACY_TOL):
        n = int(np.argmin(gap))
        raise DegenerateSpectrum(n, n + 1, float(gap[n]))
    w = off ** 2 / np.tan(0.5 * d)
    out = np.zeros(params.dim)
    out[:-1] += w
    out[1:] -= w
    return params.tau / params.hbar * out


@dataclass(frozen=True)
class EchoOperators:
    sigma_t: np.ndarray
    v_bar: np.ndarray
    v_bbar: np.ndarray
    gamma_t: np.ndarray


def echo_operators(params: SpinParameters, prop: UnperturbedPropagator, t: int,
                   allow_large: bool = False) -> EchoOperators:
    return EchoOperators(
        sigma_t=sigma_exact(params, prop, t, allow_large),
        v_bar=v_bar_exact(params),
        v_bbar=v_doubly_averaged_exact(params, prop),
        gamma_t=gamma_exact(params, prop, t, allow_large),
    )


def echo_operator_matrix(prop: UnperturbedPropagator, kick: KickPropagator, t: int) -> np.ndarray:
    """M_delta(t) = U_delta^{-t} U_0^t by explicit dense products."""
    Ud = perturbed_matrix(prop, kick)
    U0 = np.diag(prop.factors)
    Mt = np.linalg.matrix_power(Ud.conj().T, t) @ np.linalg.matrix_power(U0, t)
    return Mt


# ----------------------------------------------------------------------------
# correlations

def _heisenberg_columns(psi: np.ndarray, params: SpinParameters, prop: UnperturbedPropagator,
                        times) -> np.ndarray:
    """Columns V_t psi for each t in ``times``."""
    times = np.asarray(times)
    ph = np.mod(np.outer(prop.phases, times), 2 * np.pi)
    e = np.exp(-1j * ph)
    return e.conj() * _apply_v(e * psi[:, None], params)


def correlation_function(state, params: SpinParameters, prop: UnperturbedPropagator,
                         t1: int, t2: int) -> complex:
    """C(t', t'') = <V_t' V_t''> - <V_t'><V_t''> in the given state."""
    return complex(correlation_surface(state, params, prop, [t1, t2])[0, 1])


def correlation_surface(state, params: SpinParameters, prop: UnperturbedPropagator,
                        times) -> np.ndarray:
    """C(t_a, t_b) for all pairs of ``times``; hermitian matrix."""
    psi = _as_amps(state)
    W = _heisenberg_columns(psi, params, prop, times)
    ev = psi.conj() @ W
    return W.conj().T @ W - np.outer(ev.conj(), ev)


def sigma_moments(state, params: SpinParameters, prop: UnperturbedPropagator, t: int):
    """(<Sigma_t>, <Sigma_t^2> - <Sigma_t>^2) from a sum of V_t' psi vectors; no dense matrices."""
    psi = _as_amps(state)
    acc = np.zeros_like(psi)
    for lo in range(0, t, 512):
        acc += _heisenberg_columns(psi, params, prop, np.arange(lo, min(t, lo + 512))).sum(axis=1)
    acc *= params.tau
    mean = np.vdot(psi, acc)
    var = np.vdot(acc, acc).real - abs(mean) ** 2
    return mean.real, var


def linear_response_residual(state, params: SpinParameters, prop: UnperturbedPropagator,
                             kick_builder, t: int, deltas) -> np.ndarray:
    """F_exact(t; delta) - [1 - (delta/hbar)^2 Var(Sigma_t)] for each delta.

    ``kick_builder(delta)`` must return a KickPropagator.
    """
    _, var = sigma_moments(state, params, prop, t)
    res = []
    for d in deltas:
        F = run_fidelity(state, prop, kick_builder(d), times=[t]).fidelity[-1]
        res.append(F - (1.0 - (d / params.hbar) ** 2 * var))
    return np.array(res)
