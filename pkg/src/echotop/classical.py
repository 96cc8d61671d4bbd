"""Classical twist-and-kick map on the unit sphere and Monte-Carlo classical fidelity.

Points are stored as arrays of shape (..., 3) holding (x, y, z).  The
perturbed map is ``twist o kick`` (kick first), matching the quantum
propagator; the echo trajectory runs the unperturbed map forward t steps and
the exact inverse of the perturbed map back t steps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PoleDegenerate

RENORM_EVERY = 1024


@dataclass(frozen=True)
class SpherePoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        r = self.x ** 2 + self.y ** 2 + self.z ** 2
        if abs(r - 1.0) > 1e-12:
            raise ValueError(f"point not on the unit sphere (|p|^2 = {r!r})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def _xyz(p):
    if isinstance(p, SpherePoint):
        return p.as_array()
    return np.asarray(p, dtype=float)


def twist_step(p, alpha: float, beta: float, sign: int = 1) -> np.ndarray:
    """Rotation about z by sign * alpha (z - beta)."""
    p = _xyz(p)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    w = sign * alpha * (z - beta)
    c, s = np.cos(w), np.sin(w)
    return np.stack([x * c - y * s, y * c + x * s, z], axis=-1)


def kick_step(p, delta: float) -> np.ndarray:
    """Rotation about x by delta."""
    p = _xyz(p)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    c, s = np.cos(delta), np.sin(delta)
    return np.stack([x, y * c - z * s, y * s + z * c], axis=-1)


def perturbed_step(p, alpha, beta, delta):
    return twist_step(kick_step(p, delta), alpha, beta)


def perturbed_step_inverse(p, alpha, beta, delta):
    return kick_step(twist_step(p, alpha, beta, sign=-1), -delta)


def renormalize(p: np.ndarray) -> np.ndarray:
    return p / np.linalg.norm(p, axis=-1, keepdims=True)


def action_angle(p):
    """(j, theta) = (z, atan2(y, x) mod 2pi); undefined at the poles."""
    p = _xyz(p)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    if np.any(np.hypot(x, y) == 0.0):
        raise PoleDegenerate("angle undefined at a pole")
    return z, np.mod(np.arctan2(y, x), 2 * np.pi)


def from_action_angle(j, theta) -> np.ndarray:
    j = np.asarray(j, dtype=float)
    r = np.sqrt(np.clip(1 - j ** 2, 0.0, None))
    return np.stack([r * np.cos(theta), r * np.sin(theta), j + 0 * np.asarray(theta)], axis=-1)


def iterate(p, t: int, step, *args) -> np.ndarray:
    p = _xyz(p)
    for i in range(1, t + 1):
        p = step(p, *args)
        if i % RENORM_EVERY == 0:
            p = renormalize(p)
    return p


@dataclass(frozen=True)
class ClassicalEnsemble:
    points: np.ndarray  # (N, 3)
    weights: np.ndarray  # rho_cl at the points
    theta_star: float
    phi_star: float
    S: int

    @property
    def norm_constant(self) -> float:
        return (4 * self.S + 1) / (4 * np.pi)

    def density(self, p) -> np.ndarray:
        return coherent_density(p, self.theta_star, self.phi_star, self.S)


def coherent_density(p, theta_star: float, phi_star: float, S: int) -> np.ndarray:
    """rho_cl = ((4S+1)/4pi) exp(-S[(th - th*)^2 + (ph - ph*)^2 sin^2 th]), ph difference wrapped."""
    p = _xyz(p)
    th = np.arccos(np.clip(p[..., 2], -1, 1))
    ph = np.arctan2(p[..., 1], p[..., 0])
    dph = np.angle(np.exp(1j * (ph - phi_star)))
    return (4 * S + 1) / (4 * np.pi) * np.exp(-S * ((th - theta_star) ** 2 + dph ** 2 * np.sin(th) ** 2))


def sample_coherent(S: int, theta_star: float, phi_star: float, count: int, seed: int = 0) -> ClassicalEnsemble:
    """Gaussian sampling in (theta, phi): sigma_theta = 1/sqrt(2S), sigma_phi = sigma_theta/sin(theta*)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0x636C])))
    sig = 1.0 / np.sqrt(2 * S)
    th = theta_star + sig * rng.standard_normal(count)
    ph = phi_star + sig / np.sin(theta_star) * rng.standard_normal(count)
    pts = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
    return ClassicalEnsemble(pts, coherent_density(pts, theta_star, phi_star, S), theta_star, phi_star, S)


def echo_points(points: np.ndarray, alpha: float, beta: float, delta: float, t: int) -> np.ndarray:
    """Phi_delta^{-t} Phi_0^t applied to each point."""
    p = twist_step(points, alpha * t, beta)  # t unperturbed twists compose to one rotation
    for i in range(1, t + 1):
        p = perturbed_step_inverse(p, alpha, beta, delta)
        if i % RENORM_EVERY == 0:
            p = renormalize(p)
    return p


def classical_fidelity(ens: ClassicalEnsemble, alpha: float, beta: float, delta: float, times,
                       return_stderr: bool = False):
    """F_cl(t) = E[rho0(echo(y))] / E[rho0(y)] with y ~ rho0; F_cl(0) = 1."""
    times = np.atleast_1d(np.asarray(times, dtype=int))
    norm = ens.weights.mean()
    F = np.empty(times.size)
    err = np.empty(times.size)
    for i, t in enumerate(times):
        if t == 0:
            F[i], err[i] = 1.0, 0.0
            continue
        v = ens.density(echo_points(ens.points, alpha, beta, delta, int(t))) / norm
        F[i] = v.mean()
        err[i] = v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else 0.0
    return (F, err) if return_stderr else F
