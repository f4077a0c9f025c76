"""Euler-Maruyama particle engine with absorption and blow-up detection.

Paths follow ``x_{n+1} = x_n + f(x_n) dt + gamma(x_n) sqrt(dt) xi_n`` with
``xi_n`` drawn from the counter-based generator in :mod:`singsde.rng`, so
a path depends only on (seed, particle index) and never on threading.

A path ends when it crosses a singular point (absorption or exit, time
interpolated linearly inside the step), when ``|x|`` exceeds the blow-up
threshold or becomes non-finite, or, with the optional convergence rule,
when it stays within a radius of a saddle-node equilibrium for a hold
time.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Any, Sequence

import numpy as np
from numba import njit

from .classify import Absorption, classify_absorption
from .model import ModelKind, ModelSpec
from .rng import normal_block

__all__ = [
    "SimConfigError", "Label", "SimConfig", "PathRecord", "EnsembleStats", "MeanTimeResult",
    "ExitFrequency", "euler_maruyama_path", "ensemble_run", "mean_absorption_time", "exit_frequencies",
]

DEFAULT_CONVERGENCE_RADIUS = 1e-3
CHUNK = 2048  # particles per work item; fixed so results never depend on the thread count


class SimConfigError(ValueError):
    """Invalid simulation configuration."""


class Label(IntEnum):
    ALIVE = 0
    ABSORBED_AT_ZERO = 1
    EXIT_LEFT = 2
    EXIT_RIGHT = 3
    BLOWN_UP = 4

    @property
    def text(self) -> str:
        return {0: "Alive", 1: "AbsorbedAtZero", 2: "ExitLeft", 3: "ExitRight", 4: "BlownUp"}[int(self)]


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters.

    ``convergence_radius`` enables the saddle-node convergence rule: a path
    that stays within this distance of +-sqrt(a) for ``convergence_hold``
    time units is labelled with the corresponding exit.
    """

    dt: float = 0.01
    T: float = 10.0
    n_particles: int = 100_000
    master_seed: int = 0
    blowup_threshold: float = 1e6
    snapshot_times: tuple[float, ...] = ()
    histogram_bins: int = 20
    histogram_range: tuple[float, float] = (0.0, 1.0)
    convergence_radius: float | None = None
    convergence_hold: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))
        object.__setattr__(self, "histogram_range", tuple(float(v) for v in self.histogram_range))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise SimConfigError("dt must be > 0")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise SimConfigError("T must be > 0")
        if self.dt > self.T:
            raise SimConfigError("dt must not exceed T")
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise SimConfigError("n_particles must be an integer >= 1")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise SimConfigError("master_seed must fit in 64 bits")
        if not self.blowup_threshold > 0:
            raise SimConfigError("blowup_threshold must be > 0")
        st = self.snapshot_times
        if any(b < a for a, b in zip(st, st[1:])):
            raise SimConfigError("snapshot_times must be sorted")
        if any(t < 0 or t > self.T for t in st):
            raise SimConfigError("snapshot_times must lie in [0, T]")
        if self.histogram_bins < 1:
            raise SimConfigError("histogram_bins must be >= 1")
        lo, hi = self.histogram_range
        if not lo < hi:
            raise SimConfigError("histogram_range must be increasing")
        if self.convergence_radius is not None and not self.convergence_radius > 0:
            raise SimConfigError("convergence_radius must be > 0")
        if not self.convergence_hold > 0:
            raise SimConfigError("convergence_hold must be > 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def to_dict(self) -> dict[str, Any]:
        return {"dt": self.dt, "T": self.T, "n_particles": self.n_particles, "master_seed": self.master_seed,
                "blowup_threshold": self.blowup_threshold, "snapshot_times": list(self.snapshot_times),
                "histogram_bins": self.histogram_bins, "histogram_range": list(self.histogram_range),
                "convergence_radius": self.convergence_radius, "convergence_hold": self.convergence_hold}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise SimConfigError(f"unknown sim field(s): {', '.join(sorted(extra))}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise SimConfigError(str(exc)) from None


# --- kernel ----------------------------------------------------------------------

_CODES = {ModelKind.GENERAL_POWER: 0, ModelKind.PITCHFORK: 1, ModelKind.SUBCRITICAL_PITCHFORK: 2,
          ModelKind.SADDLE_NODE: 3}


def _params(model: ModelSpec) -> np.ndarray:
    nan = math.nan
    return np.array([model.lam, model.sigma, model.alpha,
                     model.mu if model.mu is not None else nan, model.kappa if model.kappa is not None else nan,
                     model.nu if model.nu is not None else nan, model.beta if model.beta is not None else nan,
                     model.tail_threshold, model.d_coef if model.d_coef is not None else model.sigma,
                     model.delta_exp if model.delta_exp is not None else model.alpha, model.a,
                     1.0 if model.has_tail_blend else 0.0])


@njit(inline="always", nogil=True)
def _spow(x, a):
    if x == 0.0:
        return 0.0
    return math.copysign(abs(x) ** a, x)


@njit(inline="always", nogil=True)
def _drift(code, p, x):
    # same operation order as model.drift_eval
    if code == 3:
        return -x * x + p[10]
    if code == 1 or code == 2:
        return p[0] * x - x * x * x
    A = p[7]
    ax = abs(x)
    if ax <= A:
        w = 0.0
    elif ax >= 2.0 * A:
        w = 1.0
    else:
        w = (ax - A) / A
    loc = p[3] * _spow(x, 1.0 + p[4]) if w < 1.0 else 0.0
    tail = -p[5] * _spow(x, 1.0 + p[6]) if w > 0.0 else 0.0
    return p[0] * x + ((1.0 - w) * loc + w * tail)


@njit(inline="always", nogil=True)
def _diffusion(code, p, x):
    if code == 3:
        return p[1] * abs(x * x - p[10]) ** p[2]
    ax = abs(x)
    local = p[1] * ax ** p[2]
    if p[11] == 0.0:
        return local
    A = p[7]
    if ax <= A:
        w = 0.0
    elif ax >= 2.0 * A:
        w = 1.0
    else:
        w = (ax - A) / A
    return (1.0 - w) * local + w * (p[8] * ax ** p[9])


@njit(nogil=True)
def _run(first, x0s, code, p, dt, nsteps, seed, thr, snap_steps, conv_r, hold_steps,
         labels, times, snaps, finals, mins, path):
    """Simulate particles ``first + i`` for i < len(x0s); write per-particle outputs."""
    sq = math.sqrt(dt)
    z = np.empty(4)
    nsnap = snap_steps.shape[0]
    record = path.shape[0] > 0
    r = math.sqrt(p[10]) if (code == 3 and p[10] > 0.0) else 0.0
    two_pts = code == 3 and p[10] > 0.0
    for i in range(x0s.shape[0]):
        pid = first + i
        x = x0s[i]
        lab = 0
        t_end = math.nan
        # region: for the zero-singular case the sign of x0; for two points, which band
        if two_pts:
            if x > r:
                band = 1
            elif x < -r:
                band = -1
            else:
                band = 0
            if x == r:
                lab = 3
                t_end = 0.0
            elif x == -r:
                lab = 2
                t_end = 0.0
        else:
            band = 1 if x > 0.0 else -1
            if x == 0.0 and not (code == 3 and p[10] < 0.0):
                lab = 1
                t_end = 0.0
        if two_pts:
            mind = min(abs(x - r), abs(x + r))
        elif code == 3 and p[10] < 0.0:
            mind = math.inf
        else:
            mind = abs(x)
        s = 0
        while s < nsnap and snap_steps[s] == 0:
            snaps[i, s] = x if lab == 0 else math.nan
            s += 1
        if record:
            path[i, 0] = x
        held = 0
        near = 0
        k = 0
        while lab == 0 and k < nsteps:
            if (k & 3) == 0:
                normal_block(seed, np.uint64(pid), np.uint64(k >> 2), z)
            xn = x + _drift(code, p, x) * dt + _diffusion(code, p, x) * sq * z[k & 3]
            if not math.isfinite(xn) or abs(xn) > thr:
                lab = 4
                t_end = (k + 1) * dt
                x = xn
            elif two_pts:
                if band == 0 and xn >= r:
                    lab = 3
                    t_end = (k + (r - x) / (xn - x)) * dt
                    x = r
                elif band == 0 and xn <= -r:
                    lab = 2
                    t_end = (k + (x + r) / (x - xn)) * dt
                    x = -r
                elif band == 1 and xn <= r:
                    lab = 3
                    t_end = (k + (x - r) / (x - xn)) * dt
                    x = r
                elif band == -1 and xn >= -r:
                    lab = 2
                    t_end = (k + (-r - x) / (xn - x)) * dt
                    x = -r
                else:
                    x = xn
            elif code == 3 and p[10] < 0.0:
                x = xn
            elif (band == 1 and xn <= 0.0) or (band == -1 and xn >= 0.0):
                lab = 1
                t_end = (k + x / (x - xn)) * dt
                x = 0.0
            else:
                x = xn
            k += 1
            if two_pts:
                d = min(abs(x - r), abs(x + r))
            elif code == 3 and p[10] < 0.0:
                d = math.inf
            else:
                d = abs(x)
            if d < mind:
                mind = d
            if lab == 0 and conv_r > 0.0:
                nr = 1 if abs(x - r) < conv_r else (-1 if abs(x + r) < conv_r else 0)
                if nr != 0 and nr == near:
                    held += 1
                else:
                    held = 1 if nr != 0 else 0
                    near = nr
                if held >= hold_steps:
                    lab = 3 if near == 1 else 2
                    t_end = k * dt
            if record:
                path[i, k] = x
            while s < nsnap and snap_steps[s] == k:
                snaps[i, s] = x if lab == 0 else math.nan
                s += 1
        while s < nsnap:
            snaps[i, s] = math.nan
            s += 1
        if record:
            for j in range(k + 1, path.shape[1]):
                path[i, j] = x
        labels[i] = lab
        times[i] = t_end
        finals[i] = x
        mins[i] = mind


def _kernel_args(model: ModelSpec, cfg: SimConfig):
    snap_steps = np.array([int(round(t / cfg.dt)) for t in cfg.snapshot_times], dtype=np.int64)
    conv_r = cfg.convergence_radius if cfg.convergence_radius is not None else 0.0
    hold = max(1, int(round(cfg.convergence_hold / cfg.dt)))
    return (_CODES[model.kind], _params(model), float(cfg.dt), cfg.n_steps, np.uint64(cfg.master_seed),
            float(cfg.blowup_threshold), snap_steps, float(conv_r), hold)


# --- single path -------------------------------------------------------------------

@dataclass(frozen=True)
class PathRecord:
    """One simulated path on the time grid k * dt (constant after termination)."""

    times: np.ndarray
    values: np.ndarray
    label: Label
    event_time: float
    min_distance: float


def euler_maruyama_path(model: ModelSpec, x0: float, cfg: SimConfig, particle_index: int = 0) -> PathRecord:
    """Simulate a single particle and return its full path."""
    if not math.isfinite(x0):
        raise SimConfigError("x0 must be finite")
    args = _kernel_args(model, cfg)
    n = cfg.n_steps
    path = np.empty((1, n + 1))
    lab = np.empty(1, np.int64)
    tim = np.empty(1)
    fin = np.empty(1)
    mins = np.empty(1)
    snaps = np.empty((1, len(args[6])))
    _run(np.uint64(particle_index), np.array([float(x0)]), *args, lab, tim, snaps, fin, mins, path)
    return PathRecord(np.arange(n + 1) * cfg.dt, path[0], Label(int(lab[0])), float(tim[0]), float(mins[0]))


# --- ensembles -------------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleStats:
    """Aggregated ensemble output, reduced by particle index."""

    snapshot_times: tuple[float, ...]
    bin_edges: np.ndarray
    hist_counts: np.ndarray       # (n_snapshots, bins), survivors inside the histogram range
    survivor_counts: np.ndarray   # (n_snapshots,), all survivors
    labels: np.ndarray            # per particle, Label values
    event_times: np.ndarray       # per particle, NaN while alive
    final_states: np.ndarray
    min_distance: np.ndarray
    x0: np.ndarray
    snapshot_values: np.ndarray   # (n, n_snapshots), NaN once a path has ended
    first_index: int = 0
    meta: dict[str, Any] = field(default_factory=dict)

    def survivor_medians(self) -> list[float]:
        """Median state of the surviving paths at each snapshot (NaN without survivors)."""
        out = []
        for s in range(self.snapshot_values.shape[1]):
            v = self.snapshot_values[:, s]
            v = v[~np.isnan(v)]
            out.append(float(np.median(v)) if len(v) else math.nan)
        return out

    @property
    def hist_mass(self) -> np.ndarray:
        """Per-snapshot probability mass over the in-range survivors."""
        tot = self.hist_counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(tot > 0, self.hist_counts / np.maximum(tot, 1), 0.0)

    @property
    def absorption_times(self) -> np.ndarray:
        sel = (self.labels == Label.ABSORBED_AT_ZERO) | (self.labels == Label.EXIT_LEFT) | \
              (self.labels == Label.EXIT_RIGHT)
        return self.event_times[sel]

    def label_counts(self) -> dict[str, int]:
        return {Label(v).text: int(np.sum(self.labels == v)) for v in Label}

    def summary(self) -> dict[str, Any]:
        at = self.event_times[self.labels == Label.ABSORBED_AT_ZERO]
        n = len(self.labels)
        out: dict[str, Any] = {"n_particles": n, "labels": self.label_counts(),
                               "survivor_counts": [int(c) for c in self.survivor_counts],
                               "snapshot_times": list(self.snapshot_times),
                               "survivor_medians": self.survivor_medians()}
        if len(at):
            out["absorption_time_mean"] = float(at.mean())
            out["absorption_time_stderr"] = float(at.std(ddof=1) / math.sqrt(len(at))) if len(at) > 1 else None
        out["min_distance_to_singular_set"] = float(self.min_distance.min()) if n else None
        out.update(self.meta)
        return out


def ensemble_run(model: ModelSpec, x0: float | Sequence[float] | np.ndarray, cfg: SimConfig,
                 threads: int | None = None, first_index: int = 0) -> EnsembleStats:
    """Run ``cfg.n_particles`` independent paths.

    Parameters
    ----------
    x0 : float or array
        Common initial state, or one initial state per particle.
    threads : int, optional
        Worker threads; the output is identical for every value.
    first_index : int
        Particle index of the first path (offsets the random streams).
    """
    n = int(cfg.n_particles)
    x0s = np.broadcast_to(np.asarray(x0, dtype=float), (n,)).copy()
    if not np.all(np.isfinite(x0s)):
        raise SimConfigError("initial states must be finite")
    args = _kernel_args(model, cfg)
    nsnap = len(args[6])
    labels = np.empty(n, np.int64)
    times = np.empty(n)
    finals = np.empty(n)
    mins = np.empty(n)
    snaps = np.empty((n, nsnap))
    empty_path = np.empty((0, 0))

    def work(lo):
        hi = min(n, lo + CHUNK)
        _run(np.uint64(first_index + lo), x0s[lo:hi], *args, labels[lo:hi], times[lo:hi], snaps[lo:hi],
             finals[lo:hi], mins[lo:hi], empty_path)

    starts = range(0, n, CHUNK)
    threads = threads or os.cpu_count() or 1
    if threads == 1:
        for lo in starts:
            work(lo)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, starts))

    edges = np.linspace(cfg.histogram_range[0], cfg.histogram_range[1], cfg.histogram_bins + 1)
    counts = np.zeros((nsnap, cfg.histogram_bins), dtype=np.int64)
    surv = np.zeros(nsnap, dtype=np.int64)
    for s in range(nsnap):
        v = snaps[:, s]
        v = v[~np.isnan(v)]
        surv[s] = len(v)
        counts[s] = np.histogram(v, bins=edges)[0]
    meta = {"x0": float(x0s[0]) if np.all(x0s == x0s[0]) else "per-particle",
            "convergence_rule": None if cfg.convergence_radius is None else
            {"radius": cfg.convergence_radius, "hold_time": cfg.convergence_hold}}
    return EnsembleStats(cfg.snapshot_times, edges, counts, surv, labels, times, finals, mins, x0s, snaps,
                         first_index, meta)


@dataclass(frozen=True)
class MeanTimeResult:
    estimate: float
    stderr: float
    n_absorbed: int
    censored_fraction: float
    biased_low: bool

    def to_dict(self) -> dict[str, Any]:
        return {"estimate": self.estimate, "stderr": self.stderr, "n_absorbed": self.n_absorbed,
                "censored_fraction": self.censored_fraction, "biased_low": self.biased_low}


def default_start(model: ModelSpec) -> float:
    """Stable equilibrium of the noiseless system on the positive axis."""
    if model.kind is ModelKind.GENERAL_POWER and model.mu < 0 and model.lam > 0:
        return (model.lam / -model.mu) ** (1.0 / model.kappa)
    if model.kind in (ModelKind.PITCHFORK, ModelKind.SUBCRITICAL_PITCHFORK) and model.lam > 0:
        return math.sqrt(model.lam)
    raise SimConfigError("no positive stable equilibrium; give x0 explicitly")


def mean_absorption_time(model: ModelSpec, cfg: SimConfig, x0: float | None = None,
                         threads: int | None = None) -> MeanTimeResult:
    """Sample mean of absorption times before the horizon, with the censored fraction.

    More than half of the paths censored sets ``biased_low``.
    """
    if classify_absorption(model) is not Absorption.ALMOST_SURELY_FINITE:
        raise SimConfigError("absorption is not almost surely finite for this model")
    if x0 is None:
        x0 = default_start(model)
    st = ensemble_run(model, x0, cfg, threads)
    t = st.event_times[st.labels == Label.ABSORBED_AT_ZERO]
    n = len(t)
    cens = 1.0 - n / cfg.n_particles
    est = float(t.mean()) if n else math.nan
    se = float(t.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return MeanTimeResult(est, se, n, cens, cens > 0.5)


@dataclass(frozen=True)
class ExitFrequency:
    x0: float
    n: int
    n_right: int
    n_left: int
    n_unresolved: int
    n_blown_up: int
    frequency_right: float
    stderr: float

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def exit_frequencies(model: ModelSpec, x0_grid: Sequence[float], cfg: SimConfig,
                     threads: int | None = None) -> list[ExitFrequency]:
    """Frequency of reaching (or, with the convergence rule, converging to) +sqrt(a) first.

    Each initial condition uses its own block of particle indices. For
    alpha >= 1 the ends are not reached in finite time, so the convergence
    rule is switched on with radius 1e-3 and the configured hold time
    unless ``cfg.convergence_radius`` is already set.
    """
    if model.kind is not ModelKind.SADDLE_NODE or model.a <= 0:
        raise SimConfigError("exit_frequencies needs a saddle-node model with a > 0")
    if model.alpha >= 1.0 and cfg.convergence_radius is None:
        cfg = replace(cfg, convergence_radius=DEFAULT_CONVERGENCE_RADIUS)
    out = []
    n = cfg.n_particles
    for j, x0 in enumerate(x0_grid):
        st = ensemble_run(model, float(x0), cfg, threads, first_index=j * n)
        nr = int(np.sum(st.labels == Label.EXIT_RIGHT))
        nl = int(np.sum(st.labels == Label.EXIT_LEFT))
        nu = int(np.sum(st.labels == Label.ALIVE))
        nb = int(np.sum(st.labels == Label.BLOWN_UP))
        f = nr / n
        out.append(ExitFrequency(float(x0), n, nr, nl, nu, nb, f, math.sqrt(f * (1 - f) / n)))
    return out
