"""Semiclassical predictions for the integrable kicked top and its generalizations.

Conventions: hbar = 1/S, tau = 1.  The unperturbed frequency is

    omega(j) = alpha (j - beta) + (gamma/2) (j - j_ref)^2,

and the perturbation V = S_x/S has Fourier modes v_{+-1}(j) = sqrt(1-j^2)/2.
A user-supplied ``modes`` mapping m -> v_m(j) replaces the top's modes; the
closed forms are then swapped for numerics (angle quadrature for the
plateau, finite differences for derivatives of the doubly averaged
perturbation).

The d = 1 specializations are used throughout; matrices (Lambda, Omega, W)
reduce to scalars.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import integrate, optimize, special

from .errors import (
    NonresonanceViolated,
    NoStationaryPoint,
    NoTimescale,
    QuadratureError,
    SingularFrequency,
)

TOL_RES = 1e-8
FD_STEP = 1e-5
QUAD_TOL = 1e-10
SP_GRID = 2048


def _top_mode(j):
    return 0.5 * np.sqrt(np.clip(1.0 - np.asarray(j, dtype=float) ** 2, 0.0, None))


@dataclass(frozen=True)
class IntegrableModel:
    alpha: float = 1.1
    beta: float = 0.0
    gamma: float = 0.0
    j_ref: float = 0.0
    tau: float = 1.0
    modes: Mapping[int, Callable] | None = field(default=None, compare=False)

    @property
    def is_top(self) -> bool:
        return self.modes is None

    @property
    def mode_numbers(self) -> list[int]:
        if self.modes is None:
            return [-1, 1]
        # v_{-m} = conj(v_m) is implied when only one sign is supplied
        return sorted({s * m for m in self.modes if m != 0 for s in (1, -1)})

    def v_mode(self, m: int, j):
        if self.modes is None:
            return _top_mode(j) if abs(m) == 1 else np.zeros_like(np.asarray(j, dtype=float))
        if m == 0:
            return np.zeros_like(np.asarray(j, dtype=float))
        if m in self.modes:
            return self.modes[m](j)
        if -m in self.modes:
            return np.conj(self.modes[-m](j))
        return np.zeros_like(np.asarray(j, dtype=float))

    def positive_modes(self) -> list[int]:
        return sorted({abs(m) for m in self.mode_numbers})

    def omega(self, j):
        j = np.asarray(j, dtype=float)
        return self.alpha * (j - self.beta) + 0.5 * self.gamma * (j - self.j_ref) ** 2

    def omega_prime(self, j):
        j = np.asarray(j, dtype=float)
        return self.alpha + self.gamma * (j - self.j_ref)

    def omega_second(self, j):
        return self.gamma + 0.0 * np.asarray(j, dtype=float)

    def h0(self, j):
        j = np.asarray(j, dtype=float)
        return 0.5 * self.alpha * (j - self.beta) ** 2 + self.gamma / 6.0 * (j - self.j_ref) ** 3

    def singular_points(self, lo: float = -1.0, hi: float = 1.0) -> list[tuple[int, float]]:
        """(m, j) with m omega(j) = 0 mod 2pi on [lo, hi], for positive contributing m."""
        out = []
        grid = np.linspace(lo, hi, 8193)
        for m in self.positive_modes():
            s = np.sin(0.5 * m * self.omega(grid))
            exact = np.flatnonzero(s == 0.0)
            for i in exact:
                out.append((m, float(grid[i])))
            sgn = np.sign(s)
            for i in np.flatnonzero(sgn[:-1] * sgn[1:] < 0):
                root = optimize.brentq(lambda x: np.sin(0.5 * m * self.omega(x)), grid[i], grid[i + 1],
                                       xtol=1e-14)
                out.append((m, float(root)))
        return sorted(set(out), key=lambda p: p[1])


def _check_nonresonant(model: IntegrableModel, j):
    ja = np.atleast_1d(np.asarray(j, dtype=float))
    for m in model.positive_modes():
        s = np.abs(np.sin(0.5 * m * model.omega(ja)))
        if np.any(s < TOL_RES):
            raise SingularFrequency(m, float(ja[np.argmin(s)]))


# ----------------------------------------------------------------------------
# modified Fourier coefficients

def tilde_v_mode(model: IntegrableModel, m: int, j):
    """tau v_m(j) / (1 - exp(i m omega(j)))."""
    if m == 0:
        return np.zeros_like(np.asarray(j, dtype=float), dtype=complex)
    s = np.sin(0.5 * m * model.omega(j))
    if np.any(np.abs(s) < TOL_RES):
        raise SingularFrequency(m, float(np.atleast_1d(j)[np.argmin(np.abs(np.atleast_1d(s)))]))
    return model.tau * model.v_mode(m, j) / (1.0 - np.exp(1j * m * model.omega(j)))


def tilde_v(model: IntegrableModel, j, theta):
    """Real function sum_m tilde_v_m(j) exp(i m theta)."""
    if model.is_top:
        _check_nonresonant(model, j)
        w = model.omega(j)
        return -model.tau * _top_mode(j) * np.sin(theta - 0.5 * w) / np.sin(0.5 * w)
    acc = 0.0
    for m in model.mode_numbers:
        acc = acc + tilde_v_mode(model, m, j) * np.exp(1j * m * np.asarray(theta))
    return np.real(acc)


# ----------------------------------------------------------------------------
# doubly averaged perturbation

def _bbar_v_generic(model: IntegrableModel, j):
    def g(x):
        acc = 0.0
        for m in model.mode_numbers:
            acc = acc + m * np.abs(model.v_mode(m, x)) ** 2 / np.tan(0.5 * m * model.omega(x))
        return acc
    return -0.5 * model.tau * _richardson(g, j)


def _richardson(g, j, h=FD_STEP):
    d1 = (g(j + h) - g(j - h)) / (2 * h)
    d2 = (g(j + 2 * h) - g(j - 2 * h)) / (4 * h)
    return (4 * d1 - d2) / 3.0


def bbar_v(model: IntegrableModel, j):
    """Doubly averaged perturbation v==(j) = -(tau/2) sum_m m d/dj[|v_m|^2 cot(m omega/2)]."""
    _check_nonresonant(model, j)
    if not model.is_top:
        return _bbar_v_generic(model, j)
    j = np.asarray(j, dtype=float)
    h = 0.5 * model.omega(j)
    return model.tau * (0.5 * j / np.tan(h)
                        + model.omega_prime(j) / 8.0 * (1 - j ** 2) / np.sin(h) ** 2)


def bbar_v_prime(model: IntegrableModel, j):
    """u(j) = d v==/dj."""
    _check_nonresonant(model, j)
    if not model.is_top:
        return _richardson(lambda x: _bbar_v_generic(model, x), j)
    j = np.asarray(j, dtype=float)
    h = 0.5 * model.omega(j)
    s2 = np.sin(h) ** 2
    c = 1.0 / np.tan(h)
    w1 = model.omega_prime(j)
    w2 = model.omega_second(j)
    q = 1 - j ** 2
    return model.tau * (0.5 * c - 0.5 * j * w1 / s2 + w2 * q / (8 * s2) - w1 ** 2 * q * c / (8 * s2))


def bbar_v_second(model: IntegrableModel, j):
    return _richardson(lambda x: bbar_v_prime(model, x), j)


# ----------------------------------------------------------------------------
# variances and plateaus

def nu_coherent(model: IntegrableModel, j_star: float) -> float:
    """sum_{m != 0} tau^2 |v_m|^2 / (4 sin^2(m omega/2)) at j*."""
    _check_nonresonant(model, j_star)
    acc = 0.0
    for m in model.mode_numbers:
        acc += (model.tau ** 2 * np.abs(model.v_mode(m, j_star)) ** 2
                / (4 * np.sin(0.5 * m * model.omega(j_star)) ** 2))
    return float(acc)


def _bessel_arg(model: IntegrableModel, j, delta, S):
    return delta * S * model.tau * 2 * _top_mode(j) / (2 * np.abs(np.sin(0.5 * model.omega(j))))


def plateau_coherent(model: IntegrableModel, j_star: float, delta: float, S: int) -> float:
    """J0^2 of delta S sqrt(1-j*^2) / (2 sin(omega(j*)/2)) for the top."""
    _check_nonresonant(model, j_star)
    if not model.is_top:
        return float(abs(plateau_coherent_general(model, j_star, delta, 1.0 / S)) ** 2)
    return float(special.j0(_bessel_arg(model, j_star, delta, S)) ** 2)


def plateau_coherent_general(model: IntegrableModel, j_star: float, delta: float, hbar: float) -> complex:
    """Angle average (1/2pi) int dx exp(-i delta/hbar tilde_v(j*, x)).

    Its squared modulus is the plateau; for the single-mode top this is a
    Bessel J0 identity.
    """
    _check_nonresonant(model, j_star)
    a = delta / hbar

    def part(fn):
        val, err = integrate.quad(lambda x: fn(-a * tilde_v(model, j_star, x)), 0.0, 2 * np.pi,
                                  epsabs=QUAD_TOL, epsrel=0.0, limit=400)
        if not np.isfinite(val) or err > 1e3 * QUAD_TOL:
            raise QuadratureError(f"angle quadrature did not converge (err={err:.2e})")
        return val

    return complex(part(np.cos), part(np.sin)) / (2 * np.pi)


def _check_range_nonresonant(model: IntegrableModel, lo=-1.0, hi=1.0):
    sing = model.singular_points(lo, hi)
    if sing:
        m, j = sing[0]
        raise NonresonanceViolated(m, j)


def _quad_j(fn, lo=-1.0, hi=1.0):
    val, err = integrate.quad(fn, lo, hi, epsabs=QUAD_TOL, epsrel=1e-12, limit=1000)
    if not np.isfinite(val):
        raise QuadratureError("action-space quadrature produced a non-finite value")
    return val


def nu_random(model: IntegrableModel, volume: float = 2.0) -> float:
    """(tau^2/V) int dj sum_m |v_m|^2 / (2 sin^2(m omega/2))."""
    _check_range_nonresonant(model)

    def integrand(j):
        return sum(model.tau ** 2 * abs(model.v_mode(m, j)) ** 2
                   / (2 * np.sin(0.5 * m * model.omega(j)) ** 2) for m in model.mode_numbers)

    return _quad_j(integrand) / volume


def plateau_random(model: IntegrableModel, delta: float, S: int, volume: float = 2.0) -> float:
    """[(1/V) int dj |angle average|^2]^2; the angle average is J0 for the top."""
    _check_range_nonresonant(model)
    if model.is_top:
        inner = _quad_j(lambda j: special.j0(_bessel_arg(model, j, delta, S)) ** 2)
    else:
        inner = _quad_j(lambda j: abs(plateau_coherent_general(model, j, delta, 1.0 / S)) ** 2)
    return float((inner / volume) ** 2)


def plateau_random_singular(model: IntegrableModel, delta: float, S: int,
                            tol_skip: float | None = None) -> float:
    """Lattice-sum plateau for a frequency field with resonant points.

    Sum over j_n = n/S of the coherent plateau, skipping lattice points with
    |sin(m omega(j_n)/2)| < tol_skip (default 10 hbar), divided by the full
    dimension 2S+1 and squared.
    """
    hbar = 1.0 / S
    tol = 10 * hbar if tol_skip is None else tol_skip
    j = np.arange(-S, S + 1) / S
    keep = np.ones(j.size, dtype=bool)
    for m in model.positive_modes():
        keep &= np.abs(np.sin(0.5 * m * model.omega(j))) >= max(tol, TOL_RES)
    if model.is_top:
        vals = special.j0(_bessel_arg(model, j[keep], delta, S)) ** 2
    else:
        vals = np.array([abs(plateau_coherent_general(model, x, delta, hbar)) ** 2 for x in j[keep]])
    return float((vals.sum() / j.size) ** 2)


# ----------------------------------------------------------------------------
# timescales

@dataclass(frozen=True)
class ResonanceMarker:
    time: float
    kind: str
    order: float
    zeta: float
    width: float
    strong: bool
    visible: bool


@dataclass
class TheoryBundle:
    nu_coh: float | None = None
    nu_ran: float | None = None
    plateau_coh: float | None = None
    plateau_ran: float | None = None
    t1: float | None = None
    t2: float | None = None
    t_coh: float | None = None
    t_ran_scale: float | None = None
    t_star: float | None = None
    t_r: float | None = None
    zeta: list = field(default_factory=list)
    delta_t_res: list = field(default_factory=list)
    u: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _coh_geometry(theta_star: float, S: int):
    hbar = 1.0 / S
    j_star = math.cos(theta_star)
    lam = 1.0 / math.sin(theta_star) ** 2
    return hbar, j_star, lam, math.sqrt(hbar / (2 * lam))


def t1_coherent(model: IntegrableModel, theta_star: float, S: int) -> float:
    hbar, j_star, lam, _ = _coh_geometry(theta_star, S)
    w1 = float(model.omega_prime(j_star))
    if w1 == 0.0:
        raise NoTimescale("no t1 scale: omega'(j*) = 0")
    mmin = min(model.positive_modes())
    return 2.0 / (mmin * abs(w1) * math.sqrt(hbar / lam))


def t_coh(model: IntegrableModel, theta_star: float, delta: float, S: int) -> float:
    hbar, j_star, lam, _ = _coh_geometry(theta_star, S)
    u = float(bbar_v_prime(model, j_star))
    if u == 0.0 or delta == 0.0:
        return math.inf
    return math.sqrt(lam) / abs(u) * math.sqrt(8 * hbar) / delta ** 2


def t2_coherent(model: IntegrableModel, theta_star: float, delta: float, S: int) -> float:
    hbar, j_star, _, _ = _coh_geometry(theta_star, S)
    nu = nu_coherent(model, j_star)
    return min(1.0, delta / hbar * math.sqrt(nu)) * t_coh(model, theta_star, delta, S)


def _action_grid(n=4000):
    # midpoint grid on (-1, 1); avoids endpoints and, for even n, j = 0
    return -1.0 + (np.arange(n) + 0.5) * (2.0 / n)


def t2_random(model: IntegrableModel, delta: float) -> float:
    """Effective sqrt(sum |tilde v_m|^2)/|v==| * 2/(tau delta), effective value = median over j."""
    j = _action_grid()
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.array([_ratio_t2(model, x) for x in j])
    return float(np.nanmedian(q) * 2.0 / (model.tau * delta))


def _ratio_t2(model, x):
    try:
        return math.sqrt(nu_coherent(model, x)) / abs(float(bbar_v(model, x)))
    except (SingularFrequency, ZeroDivisionError):
        return np.nan


def t_star_random(model: IntegrableModel, delta: float) -> float:
    j = _action_grid()
    vals = []
    for x in j:
        try:
            vals.append(abs(float(bbar_v_prime(model, x))))
        except SingularFrequency:
            pass
    return float(1.0 / (np.median(vals) * model.tau * delta ** 2))


def t1_random(model: IntegrableModel) -> float:
    """Dephasing time of the angle sums across the full action range, 2pi/(m_min * spread of omega)."""
    j = np.linspace(-1, 1, 2001)
    w = model.omega(j)
    return float(2 * np.pi / (min(model.positive_modes()) * (w.max() - w.min())))


def resonance_period(model: IntegrableModel, j_star: float, S: int) -> float:
    w1 = float(model.omega_prime(j_star))
    if w1 == 0.0:
        raise NoTimescale("omega'(j*) = 0: no resonance period")
    return 2 * np.pi * S / abs(w1)


def resonance_predictor(model: IntegrableModel, theta_star: float, S: int, k_max: int = 3,
                        fractions: tuple[int, ...] = (), m: int | None = None,
                        delta_j: float | None = None, lam: float | None = None) -> list[ResonanceMarker]:
    """2pi resonances at k t_r, pi resonances at (k+1/2) t_r, and optional (q/p) t_r markers.

    zeta = hbar m omega'' t/(2 Lambda), width = sqrt(1+zeta^2)/(m |omega'| Delta_j).
    ``strong`` flags zeta < 1 and ``visible`` flags zeta < 2pi.  pi resonances are
    emitted only when the perturbation has odd modes.
    """
    hbar, j_star, lam0, dj0 = _coh_geometry(theta_star, S)
    lam = lam0 if lam is None else lam
    dj = math.sqrt(hbar / (2 * lam)) if delta_j is None else delta_j
    m = min(model.positive_modes()) if m is None else m
    tr = resonance_period(model, j_star, S)
    w1 = abs(float(model.omega_prime(j_star)))
    w2 = float(model.omega_second(j_star))
    has_odd = any(q % 2 for q in model.positive_modes())

    def mk(t, kind, order):
        zeta = abs(hbar * m * w2 * t / (2 * lam))
        width = math.sqrt(1 + zeta ** 2) / (m * w1 * dj)
        return ResonanceMarker(float(t), kind, float(order), zeta, width, zeta < 1.0, zeta < 2 * np.pi)

    out = []
    for k in range(0, k_max + 1):
        if k >= 1:
            out.append(mk(k * tr, "2pi", k))
        if has_odd and k < k_max:
            out.append(mk((k + 0.5) * tr, "pi", k + 0.5))
    for p in fractions:
        for q in range(1, k_max * p):
            if math.gcd(q, p) == 1 and p > 2:
                out.append(mk(q * tr / p, f"2pi/{p}", q / p))
    out.sort(key=lambda r: r.time)
    return out


def resonance_profile(t_prime, k: float, m: int, model: IntegrableModel, theta_star: float, S: int):
    """Complex Gaussian envelope of the k-th resonance at offset t' from k t_r."""
    hbar, j_star, lam, _ = _coh_geometry(theta_star, S)
    tr = resonance_period(model, j_star, S)
    w1 = float(model.omega_prime(j_star))
    t = k * tr + np.asarray(t_prime, dtype=float)
    zeta = hbar * m * float(model.omega_second(j_star)) * t / (2 * lam)
    tp = np.asarray(t_prime, dtype=float)
    return (1 - 1j * zeta) ** -0.5 * np.exp(
        -hbar * m ** 2 * w1 ** 2 * tp ** 2 * (1 + 1j * zeta) / (4 * lam * (1 + zeta ** 2)))


def pi_resonance_fidelity(t, model: IntegrableModel, theta_star: float, phi_star: float,
                          delta: float, S: int, m_max: int = 9):
    """F(t) ~ 1 - (4 delta^2/hbar^2) (sum_{odd m>0} |tilde v_m| cos(m omega* t + beta_m))^2 near a pi resonance."""
    hbar, j_star, _, _ = _coh_geometry(theta_star, S)
    w = float(model.omega(j_star))
    t = np.asarray(t, dtype=float)
    acc = 0.0
    for m in range(1, m_max + 1, 2):
        if m not in model.positive_modes():
            continue
        tv = complex(tilde_v_mode(model, m, j_star))
        acc = acc + abs(tv) * np.cos(m * w * t + np.angle(tv) + m * phi_star)
    return 1 - 4 * delta ** 2 / hbar ** 2 * acc ** 2


def gaussian_decay_coherent(t, model: IntegrableModel, theta_star: float, delta: float, S: int,
                            prefactor: float | None = None, exponent_factor: float = 1.0):
    """f(t) = exp(-(u^2/Lambda) delta^4 t^2/(16 hbar) + i v==(j*) delta^2 tau t/(2 hbar)).

    With ``prefactor`` the amplitude is scaled so that F carries that factor;
    ``exponent_factor`` rescales the Gaussian exponent.
    """
    hbar, j_star, lam, _ = _coh_geometry(theta_star, S)
    u = float(bbar_v_prime(model, j_star))
    vb = float(bbar_v(model, j_star))
    t = np.asarray(t, dtype=float)
    expo = -exponent_factor * (u ** 2 / lam) * delta ** 4 * t ** 2 / (16 * hbar)
    f = np.exp(expo + 1j * vb * delta ** 2 * model.tau * t / (2 * hbar))
    if prefactor is not None:
        f = f * math.sqrt(prefactor)
    return f


# ----------------------------------------------------------------------------
# stationary points and long-time asymptotics

@dataclass(frozen=True)
class StationaryPoint:
    j_eta: float
    w_eta: float
    nu_eta: float


def _safe_prime(model, x):
    try:
        return float(bbar_v_prime(model, x))
    except SingularFrequency:
        return np.nan


def stationary_points(model: IntegrableModel, grid: int = SP_GRID) -> list[StationaryPoint]:
    """Interior zeros of d v==/dj on (-1, 1), bracketed on a uniform grid and refined.

    Sign changes across a pole of v== (where sin(m omega/2) vanishes) are rejected.
    """
    xs = np.linspace(-1, 1, grid + 2)[1:-1]
    ys = np.array([_safe_prime(model, x) for x in xs])
    sing = [j for _, j in model.singular_points()]
    out = []
    for i in range(len(xs) - 1):
        a, b = xs[i], xs[i + 1]
        ya, yb = ys[i], ys[i + 1]
        if not (np.isfinite(ya) and np.isfinite(yb)) or ya * yb > 0:
            continue
        if any(a <= s <= b for s in sing):
            continue
        if ya == 0.0:
            r = a
        else:
            r = optimize.brentq(lambda x: float(bbar_v_prime(model, x)), a, b, xtol=1e-12)
        if abs(float(bbar_v_prime(model, r))) > 1e-9:
            continue
        W = float(bbar_v_second(model, r))
        out.append(StationaryPoint(float(r), W, math.copysign(math.pi / 4, W)))
    return out


def _phase_panels(phase, lo, hi, log_end=None, step=math.pi / 4, max_width=1.0 / 64, n_probe=20001):
    """Breakpoints on [lo, hi] such that each panel spans at most ``step`` of phase variation."""
    u = np.linspace(lo, hi, n_probe)
    if log_end is not None:
        # geometric refinement toward a singular endpoint
        span = hi - lo
        g = np.geomspace(1e-12 * span + 1e-15, span, n_probe)
        u = np.unique(np.concatenate([u, lo + g if log_end == "lo" else hi - g]))
        u = u[(u >= lo) & (u <= hi)]
    p = phase(u)
    var = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(p)))])
    n_phase = int(math.ceil(var[-1] / step))
    levels = np.linspace(0, var[-1], n_phase + 1) if n_phase > 0 else np.array([0.0])
    br = np.interp(levels, var, u)
    n_width = int(math.ceil((hi - lo) / max_width))
    br = np.unique(np.concatenate([br, np.linspace(lo, hi, n_width + 1)]))
    return br


def oscillatory_integral(amp, phase, lo, hi, log_end=None, nodes: int = 12, chunk: int = 200000):
    """int_lo^hi amp(j) exp(i phase(j)) dj by phase-adaptive composite Gauss-Legendre."""
    br = _phase_panels(phase, lo, hi, log_end)
    x, w = np.polynomial.legendre.leggauss(nodes)
    total = 0.0 + 0.0j
    for s in range(0, br.size - 1, chunk):
        a = br[s:s + chunk + 1][:-1]
        b = br[s + 1:s + chunk + 1]
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        pts = mid[:, None] + half[:, None] * x[None, :]
        vals = amp(pts) * np.exp(1j * phase(pts))
        total += np.sum(half * (vals @ w))
    return complex(total)


def asymptotic_random_quadrature(t, model: IntegrableModel, delta: float, S: int,
                                 volume: float = 2.0, cut: float | None = None):
    """Evaluator A: (1/V) int dj exp(i tau delta^2 v==(j) t/(2 hbar)) over [-1, 1].

    Neighbourhoods |j - j_s| < cut (default hbar/2) of resonant points, where
    v== diverges, are excluded; on the lattice they contain no quantum number
    other than the resonant one.
    """
    hbar = 1.0 / S
    cut = 0.5 * hbar if cut is None else cut
    sing = sorted({j for _, j in model.singular_points()})
    edges = [(-1.0, None)]
    for s in sing:
        edges.append((s - cut, "hi"))
        edges.append((s + cut, "lo"))
    edges.append((1.0, None))
    intervals = []
    for (a, ta), (b, tb) in zip(edges[::2], edges[1::2]):
        if b > a:
            intervals.append((a, b, tb if tb else ta))
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    kappa = model.tau * delta ** 2 / (2 * hbar)
    out = np.empty(ts.size, dtype=complex)
    for i, tt in enumerate(ts):
        acc = 0.0 + 0.0j
        for a, b, end in intervals:
            acc += oscillatory_integral(lambda x: np.ones_like(x),
                                        lambda x, tt=tt: kappa * tt * bbar_v(model, x),
                                        a, b, log_end=end)
        out[i] = acc / volume
    return out if np.ndim(t) else out[0]


def asymptotic_random_stationary(t, model: IntegrableModel, delta: float, S: int,
                                 volume: float = 2.0, points: list[StationaryPoint] | None = None):
    """Evaluator B: stationary-phase sum over interior points of v==.

    f(t) ~ (1/V) sum_eta sqrt(4 pi hbar/(t tau delta^2 |W_eta|))
           exp(i v==(j_eta) t tau delta^2/(2 hbar) + i nu_eta),   F ~ 1/t.
    """
    pts = stationary_points(model) if points is None else points
    if not pts:
        raise NoStationaryPoint("v== has no interior stationary point; the regime is boundary-dominated")
    hbar = 1.0 / S
    t = np.asarray(t, dtype=float)
    acc = 0.0
    for p in pts:
        amp = np.sqrt(4 * np.pi * hbar / (t * model.tau * delta ** 2 * abs(p.w_eta)))
        ph = float(bbar_v(model, p.j_eta)) * t * model.tau * delta ** 2 / (2 * hbar) + p.nu_eta
        acc = acc + amp * np.exp(1j * ph)
    return acc / volume


# ----------------------------------------------------------------------------
# bundle

def timescales(model: IntegrableModel, theta_star: float, delta: float, S: int,
               k_max: int = 2) -> TheoryBundle:
    """Coherent-state timescales and resonance data at j* = cos(theta*), plus random-state scales."""
    hbar, j_star, lam, dj = _coh_geometry(theta_star, S)
    b = TheoryBundle()
    b.nu_coh = nu_coherent(model, j_star)
    b.plateau_coh = plateau_coherent(model, j_star, delta, S)
    b.u = float(bbar_v_prime(model, j_star))
    b.t1 = t1_coherent(model, theta_star, S)
    b.t_coh = t_coh(model, theta_star, delta, S)
    b.t2 = t2_coherent(model, theta_star, delta, S)
    b.t_star = 1.0 / (abs(b.u) * model.tau * delta ** 2) if delta > 0 and b.u != 0 else math.inf
    b.t_r = resonance_period(model, j_star, S)
    res = resonance_predictor(model, theta_star, S, k_max=k_max)
    b.zeta = [r.zeta for r in res]
    b.delta_t_res = [r.width for r in res]
    b.t_ran_scale = 2 * hbar / (model.tau * delta ** 2) if delta > 0 else math.inf
    b.extras = {
        "j_star": j_star,
        "lambda": lam,
        "delta_j": dj,
        "v_bbar_star": float(bbar_v(model, j_star)),
        "resonances": [asdict(r) for r in res],
    }
    try:
        b.nu_ran = nu_random(model)
        b.plateau_ran = plateau_random(model, delta, S)
        b.extras["plateau_ran_method"] = "quadrature"
    except NonresonanceViolated:
        b.plateau_ran = plateau_random_singular(model, delta, S)
        b.extras["plateau_ran_method"] = "lattice-sum"
    if delta > 0:
        b.extras["t1_ran"] = t1_random(model)
        b.extras["t2_ran"] = t2_random(model, delta)
        b.extras["t_star_ran"] = t_star_random(model, delta)
    b.extras["stationary_points"] = [asdict(p) for p in stationary_points(model)]
    return b
