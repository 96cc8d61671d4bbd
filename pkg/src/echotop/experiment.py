"""Experiment configuration, runs, sweeps and figure presets.

Config files are flat ``key = value`` text; ``#`` starts a comment.  Every key
is also a command-line flag of the same name.  Outputs:

* ``trace.csv``: ``t,re_f,im_f,F`` (plus ``F_stderr`` for ensembles); floats
  written with ``%.17g`` so a rerun is byte-identical.
* ``classical.csv``: ``t,F,F_stderr``.
* ``correlation.csv``: ``t1,t2,re_C,im_C``.
* ``sweep.csv``: one row per swept value.
* ``theory.json``: the semiclassical bundle for the run's parameters.
* ``manifest.json``: config echo, version, RNG streams, wall time and the
  sha256 of every file written.
"""
from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import peak_near, plateau_estimate
from .classical import classical_fidelity, sample_coherent
from .echo import (
    FidelityTrace, correlation_surface, run_fidelity, run_fidelity_ensemble, run_fidelity_spectral,
)
from .errors import ConfigError, ResourceRefused
from .semiclassics import IntegrableModel, timescales
from .spin import SpinParameters, TopParameters, build_kick, build_unperturbed
from .states import RandomEnsembleParams, coherent_state, random_ensemble

OUTPUT_ENV = "ECHOTOP_OUTPUT_DIR"
RESOURCE_LIMIT = 1e13
MODES = ("quantum", "classical", "theory", "correlation", "sweep")
SWEEP_AXES = ("delta", "S", "seed")


@dataclass
class ExperimentConfig:
    mode: str = "quantum"
    S: int = 200
    alpha: float = 1.1
    beta: float = 0.0
    gamma: float = 0.0
    j_ref: float | None = None
    delta: float | None = None
    delta_times_S: float | None = None
    state: str = "coherent"
    theta_star: float = 1.0
    phi_star: float = 1.0
    seed: int = 0
    count: int = 1
    t_max: int = 1000
    stride: int = 1
    log_times: int = 0
    output: str = ""
    classical_samples: int = 20000
    classical_t_max: int | None = None
    correlation_t_max: int = 160
    write_members: bool = False
    window_lo: float = 2.0
    window_hi: float = 0.8
    axis: str = ""
    values: str = ""
    workers: int = 1
    force: bool = False
    allow_large: bool = False

    # ------------------------------------------------------------------
    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ConfigError("mode", f"must be one of {MODES}")
        if self.S < 1:
            raise ConfigError("S", "must be a positive integer")
        if (self.delta is None) == (self.delta_times_S is None):
            raise ConfigError("delta", "give exactly one of delta and delta_times_S")
        if self.effective_delta < 0:
            raise ConfigError("delta", "must be >= 0")
        if self.state not in ("coherent", "random"):
            raise ConfigError("state", "must be 'coherent' or 'random'")
        if self.state == "coherent" and not 0 < self.theta_star < math.pi:
            raise ConfigError("theta_star", "must lie in (0, pi)")
        if self.count < 1:
            raise ConfigError("count", "must be >= 1")
        if self.t_max < 0:
            raise ConfigError("t_max", "must be >= 0")
        if self.stride < 1:
            raise ConfigError("stride", "must be >= 1")
        if self.log_times < 0:
            raise ConfigError("log_times", "must be >= 0")
        if self.mode == "sweep":
            if self.axis not in SWEEP_AXES:
                raise ConfigError("axis", f"must be one of {SWEEP_AXES}")
            if not self.values.strip():
                raise ConfigError("values", "comma-separated list required for a sweep")
        return self

    @property
    def effective_delta(self) -> float:
        return self.delta if self.delta is not None else self.delta_times_S / self.S

    @property
    def effective_j_ref(self) -> float:
        return math.cos(self.theta_star) if self.j_ref is None else self.j_ref

    def output_dir(self) -> Path:
        base = self.output or os.environ.get(OUTPUT_ENV) or "echotop-out"
        return Path(base)

    def sample_times(self) -> np.ndarray | None:
        """Log-spaced integer times when ``log_times`` > 0, else None (regular stride grid)."""
        if self.log_times <= 0 or self.t_max < 1:
            return None
        ts = np.rint(np.geomspace(1, self.t_max, self.log_times)).astype(np.int64)
        return np.unique(np.concatenate([[0], ts]))

    def cost_estimate(self) -> float:
        """Multiply-adds: dim^2 per member and step, or per member and sample when spectral."""
        dim = float(2 * self.S + 1)
        members = self.count if self.state == "random" else 1
        ts = self.sample_times()
        if ts is not None:
            return dim ** 3 * 10 + dim ** 2 * ts.size * members
        return dim ** 2 * self.t_max * members

    def check_resources(self):
        est = self.cost_estimate()
        if est > RESOURCE_LIMIT and not self.force:
            raise ResourceRefused(est, RESOURCE_LIMIT)

    def model(self) -> IntegrableModel:
        return IntegrableModel(self.alpha, self.beta, self.gamma, self.effective_j_ref)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name: str, raw):
    f = _FIELDS.get(name)
    if f is None:
        raise ConfigError(name, "unknown key")
    if raw is None or isinstance(raw, (bool, int, float)) and not isinstance(raw, str):
        return raw
    s = str(raw).strip()
    kind = str(f.type)
    try:
        if s.lower() in ("none", "") and "None" in kind:
            return None
        if kind.startswith("bool"):
            if s.lower() in ("1", "true", "yes", "on"):
                return True
            if s.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(s)
        if kind.startswith("int"):
            return int(float(s)) if float(s).is_integer() else int(s)
        if kind.startswith("float"):
            return float(s)
    except ValueError:
        raise ConfigError(name, f"cannot parse {s!r} as {kind}") from None
    return s


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected key = value")
        k, v = (p.strip() for p in line.split("=", 1))
        out[k] = _coerce(k, v)
    return out


def make_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    vals = {k: _coerce(k, v) for k, v in (file_values or {}).items()}
    given = {k: v for k, v in (overrides or {}).items() if v is not None}
    # delta on the command line replaces delta_times_S from the file, and vice versa
    if "delta" in given:
        vals.pop("delta_times_S", None)
    if "delta_times_S" in given:
        vals.pop("delta", None)
    vals.update({k: _coerce(k, v) for k, v in given.items()})
    try:
        cfg = ExperimentConfig(**vals)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None
    return cfg.validate()


# ----------------------------------------------------------------------------
# file output

def _fmt(x) -> str:
    return "%.17g" % x


def atomic_write(path: Path, data: str | bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: list[str], columns: list[np.ndarray]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(str(int(v)) if isinstance(v, (np.integer, int)) else _fmt(v) for v in row))
        buf.write("\n")
    return buf.getvalue()


def trace_csv(trace) -> str:
    cols = [trace.times, trace.amplitude.real, trace.amplitude.imag, trace.fidelity]
    header = ["t", "re_f", "im_f", "F"]
    if hasattr(trace, "fidelity_stderr"):
        cols.append(trace.fidelity_stderr)
        header.append("F_stderr")
    return csv_text(header, cols)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


class OutputSet:
    def __init__(self, root: Path):
        self.root = root
        self.files: dict[str, str] = {}

    def write(self, name: str, data: str):
        path = self.root / name
        atomic_write(path, data)
        self.files[name] = hashlib.sha256(data.encode()).hexdigest()
        return path

    def write_json(self, name: str, obj):
        return self.write(name, json.dumps(_json_safe(obj), indent=2, sort_keys=True) + "\n")


# ----------------------------------------------------------------------------
# runs

def theory_for(cfg: ExperimentConfig):
    return timescales(cfg.model(), cfg.theta_star, cfg.effective_delta, cfg.S)


def _propagators(cfg: ExperimentConfig, S: int | None = None, delta: float | None = None):
    S = cfg.S if S is None else S
    delta = cfg.effective_delta if delta is None else delta
    sp = SpinParameters(S)
    top = TopParameters(cfg.alpha, cfg.beta, cfg.gamma, delta)
    return sp, build_unperturbed(sp, top, cfg.effective_j_ref), build_kick(sp, delta)


def quantum_trace(cfg: ExperimentConfig, S: int | None = None, delta: float | None = None,
                  seed: int | None = None):
    sp, prop, kick = _propagators(cfg, S, delta)
    ts = cfg.sample_times()
    if ts is not None:
        # sparse times: one diagonalization instead of t_max steps
        if cfg.state == "coherent":
            psi = coherent_state(sp, cfg.theta_star, cfg.phi_star).amps
        else:
            psi = random_ensemble(sp, RandomEnsembleParams(cfg.seed if seed is None else seed, cfg.count, sp.dim))
        tr = run_fidelity_spectral(psi, prop, kick, ts)
        return FidelityTrace(tr.times, tr.members[:, 0]) if cfg.state == "coherent" else tr
    if cfg.state == "coherent":
        return run_fidelity(coherent_state(sp, cfg.theta_star, cfg.phi_star), prop, kick,
                            cfg.t_max, cfg.stride)
    ens = RandomEnsembleParams(cfg.seed if seed is None else seed, cfg.count, sp.dim)
    return run_fidelity_ensemble(random_ensemble(sp, ens), prop, kick, cfg.t_max, cfg.stride)


def _rng_streams(cfg: ExperimentConfig) -> dict:
    out = {"generator": "numpy PCG64"}
    if cfg.state == "random":
        out["quantum"] = f"SeedSequence([{cfg.seed}, k]) for k in 0..{cfg.count - 1}"
    if cfg.mode == "classical":
        out["classical"] = f"SeedSequence([{cfg.seed}, 0x636C])"
    return out


def _manifest(cfg: ExperimentConfig, outs: OutputSet, wall: float, extra: dict | None = None) -> dict:
    return {
        "config": cfg.as_dict(),
        "version": __version__,
        "rng_streams": _rng_streams(cfg),
        "wall_time_s": wall,
        "outputs": dict(sorted(outs.files.items())),
        **(extra or {}),
    }


def run(cfg: ExperimentConfig) -> dict[str, Path]:
    """Execute one configured run; returns the written paths by name."""
    cfg.validate()
    if cfg.mode in ("quantum", "sweep"):
        cfg.check_resources()
    t0 = time.perf_counter()
    outs = OutputSet(cfg.output_dir())
    bundle = theory_for(cfg) if cfg.state == "coherent" or cfg.mode == "theory" else None
    if cfg.mode == "quantum":
        tr = quantum_trace(cfg)
        outs.write("trace.csv", trace_csv(tr))
        if cfg.state == "random" and cfg.write_members:
            for k in range(tr.count):
                m = tr.members[:, k]
                outs.write(f"members/member_{k:05d}.csv",
                           csv_text(["t", "re_f", "im_f", "F"], [tr.times, m.real, m.imag, np.abs(m) ** 2]))
    elif cfg.mode == "classical":
        ens = sample_coherent(cfg.S, cfg.theta_star, cfg.phi_star, cfg.classical_samples, cfg.seed)
        tmax = cfg.classical_t_max if cfg.classical_t_max is not None else cfg.t_max
        ts = np.arange(0, tmax + 1, cfg.stride)
        F, err = classical_fidelity(ens, cfg.alpha, cfg.beta, cfg.effective_delta, ts, return_stderr=True)
        outs.write("classical.csv", csv_text(["t", "F", "F_stderr"], [ts, F, err]))
    elif cfg.mode == "correlation":
        sp, prop, _ = _propagators(cfg)
        ts = np.arange(cfg.correlation_t_max + 1)
        C = correlation_surface(coherent_state(sp, cfg.theta_star, cfg.phi_star), sp, prop, ts)
        a, b = np.meshgrid(ts, ts, indexing="ij")
        outs.write("correlation.csv",
                   csv_text(["t1", "t2", "re_C", "im_C"], [a.ravel(), b.ravel(), C.real.ravel(), C.imag.ravel()]))
    elif cfg.mode == "sweep":
        outs.write("sweep.csv", sweep_csv(cfg))
    if bundle is None:
        bundle = _random_bundle(cfg)
    outs.write_json("theory.json", bundle.to_dict())
    wall = time.perf_counter() - t0
    outs.write_json("manifest.json", _manifest(cfg, outs, wall))
    return {name: outs.root / name for name in outs.files}


def _random_bundle(cfg: ExperimentConfig):
    # random-state runs still report the full bundle at the nominal packet centre
    return timescales(cfg.model(), cfg.theta_star, cfg.effective_delta, cfg.S)


# ----------------------------------------------------------------------------
# sweeps

SWEEP_HEADER = ["value", "plateau", "plateau_raw", "plateau_theory", "decay_rate", "t_lo", "t_hi",
                "flagged", "peaks"]


def sweep_row(cfg: ExperimentConfig, value) -> list:
    S, delta, seed = cfg.S, cfg.effective_delta, cfg.seed
    if cfg.axis == "S":
        S = int(value)
        if cfg.delta_times_S is not None:
            delta = cfg.delta_times_S / S
    elif cfg.axis == "delta":
        delta = float(value)
    else:
        seed = int(value)
    sub = dataclasses.replace(cfg, S=S, delta=delta, delta_times_S=None, seed=seed)
    b = timescales(sub.model(), sub.theta_star, delta, S)
    if cfg.state == "coherent":
        lo, hi = cfg.window_lo * b.t1, cfg.window_hi * b.t2
        theory = b.plateau_coh
    else:
        lo, hi = cfg.window_lo * b.extras["t1_ran"], cfg.window_hi * b.extras["t2_ran"]
        theory = b.plateau_ran
    res = [(r["time"], r["width"]) for r in b.extras["resonances"]]
    tr = quantum_trace(sub, S, delta, seed)
    est = plateau_estimate(tr.times, tr.fidelity, lo, hi, res)
    peaks = []
    for r in b.extras["resonances"]:
        if r["time"] + r["width"] <= tr.times[-1]:
            tp, fp = peak_near(tr.times, tr.fidelity, r["time"], max(r["width"], 1.0))
            peaks.append(f"{r['kind']}@{tp:g}:{fp:.6g}")
    return [value, est.value, est.raw_median, theory, est.decay_rate, lo, hi, int(est.flagged),
            ";".join(peaks)]


def sweep_csv(cfg: ExperimentConfig) -> str:
    values = [v.strip() for v in cfg.values.split(",") if v.strip()]
    conv = int if cfg.axis in ("S", "seed") else float
    values = [conv(float(v)) if conv is int else conv(v) for v in values]
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        rows = list(pool.map(lambda v: sweep_row(cfg, v), values))
    buf = io.StringIO()
    buf.write(",".join(SWEEP_HEADER) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(x) if isinstance(x, float) else str(x) for x in r) + "\n")
    return buf.getvalue()


# ----------------------------------------------------------------------------
# presets

PRESETS: dict[str, dict] = {
    "fig1a": dict(mode="quantum", S=200, beta=0.0, delta_times_S=0.32, state="coherent", t_max=6000,
                  classical_t_max=200),
    "fig1b": dict(mode="quantum", S=1600, beta=0.0, delta_times_S=0.32, state="coherent", t_max=20000,
                  classical_t_max=200),
    "fig2a": dict(mode="quantum", S=200, beta=0.0, delta_times_S=0.064, state="coherent", t_max=120000,
                  log_times=400),
    "fig2-desk": dict(mode="quantum", S=100, beta=0.0, delta_times_S=0.32, state="coherent", t_max=12000),
    "fig3c": dict(mode="quantum", S=200, beta=0.0, gamma=4.0, delta_times_S=0.32, state="coherent",
                  t_max=3000),
    "fig4": dict(mode="correlation", S=16, beta=0.0, delta_times_S=0.32, state="coherent",
                 correlation_t_max=160, t_max=160),
    "fig6": dict(mode="quantum", S=200, beta=1.4, delta_times_S=0.32, state="random", count=100,
                 t_max=1500),
    "fig6-large": dict(mode="quantum", S=1600, beta=1.4, delta_times_S=0.32, state="random", count=20,
                       t_max=1500),
    "fig7-desk": dict(mode="quantum", S=200, beta=0.0, delta_times_S=0.32, state="random", count=100,
                      t_max=1500),
    "fig8-desk": dict(mode="quantum", S=200, beta=0.0, delta_times_S=0.064, state="random", count=1000,
                      t_max=100000, log_times=200),
}


def preset_config(name: str, overrides: dict | None = None) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    base = dict(PRESETS[name])
    base["output"] = ""
    return make_config(base, overrides)


def run_preset(name: str, overrides: dict | None = None) -> dict[str, Path]:
    """Run a figure preset; coherent quantum presets also emit the classical trace."""
    cfg = preset_config(name, overrides)
    if not cfg.output:
        cfg.output = str(Path(cfg.output_dir()) / name)
    paths = run(cfg)
    if cfg.mode == "quantum" and cfg.state == "coherent" and cfg.classical_t_max:
        ccfg = dataclasses.replace(cfg, mode="classical", output=str(Path(cfg.output) / "classical"))
        paths.update({f"classical/{k}": v for k, v in run(ccfg).items()})
    return paths
