"""Quantum and classical evolution under the driven pendulum in a weak harmonic well,

    H = p^2/(2m) - kappa*cos(x - l*sin t) + a_h*x^2/2,

with tangent-map Lyapunov exponents and logarithmic saturation times.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .grid import GridSpec, WaveFunction

__all__ = [
    "DEFAULT_DT",
    "DrivenPendulumParams",
    "ClassicalEnsemble",
    "BlowupError",
    "LyapunovResult",
    "Timescales",
    "evolve_quantum",
    "evolve_classical",
    "tangent_map_step",
    "transverse_scale",
    "lyapunov",
    "nonlinearity_scale",
    "timescales",
    "saturation_time",
    "saturation_onset",
]

DEFAULT_DT = 2.0 * math.pi / 2048
_CHECK_EVERY = 256


class BlowupError(RuntimeError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


@dataclass(frozen=True)
class DrivenPendulumParams:
    """Mass, cosine strength ``kappa``, drive amplitude ``l`` and harmonic
    coefficient ``a_h``.  Defaults are the chaotic parameter set."""

    m: float = 1.0
    kappa: float = 0.36
    l: float = 3.0
    a_h: float = 0.01

    def __post_init__(self):
        vals = (self.m, self.kappa, self.l, self.a_h)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("parameters must be finite")
        if self.m <= 0:
            raise ValueError("mass must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")

    def potential(self, x, t):
        return -self.kappa * np.cos(x - self.l * np.sin(t)) + 0.5 * self.a_h * x**2

    def force(self, x, t):
        return -self.kappa * np.sin(x - self.l * np.sin(t)) - self.a_h * x

    def curvature(self, x, t):
        """``d^2 V / dx^2``."""
        return self.kappa * np.cos(x - self.l * np.sin(t)) + self.a_h

    def energy(self, x, p, t):
        return p**2 / (2.0 * self.m) + self.potential(x, t)


def _segments(t0: float, times: Sequence[float], dt: float) -> Iterable[tuple[float, float, int]]:
    # equal sub-steps no longer than |dt| that land exactly on every requested time
    ta = t0
    for tb in times:
        span = tb - ta
        n = max(1, int(math.ceil(abs(span) / abs(dt) - 1e-9))) if span != 0 else 0
        yield ta, (span / n if n else 0.0), n
        ta = tb


def _ordered_times(t0: float, t_final: Optional[float], snapshots: Sequence[float]) -> list[float]:
    snaps = [float(s) for s in snapshots]
    if t_final is None:
        if not snaps:
            raise ValueError("need t_final or snapshot times")
        t_final = max(snaps, key=lambda s: abs(s - t0))
    sign = 1.0 if t_final >= t0 else -1.0
    for s in snaps:
        if sign * (s - t0) < 0 or sign * (s - t_final) > 0:
            raise ValueError(f"snapshot {s} lies outside [{t0}, {t_final}]")
    if any(sign * (b - a) < 0 for a, b in zip(snaps, snaps[1:])):
        raise ValueError("snapshot times must be ordered in the direction of evolution")
    return snaps if snaps else [float(t_final)]


def evolve_quantum(psi0: WaveFunction, params: DrivenPendulumParams, dt: float = DEFAULT_DT,
                   t_final: Optional[float] = None, snapshots: Sequence[float] = (),
                   t0: float = 0.0) -> list[WaveFunction]:
    """Strang split-operator propagation from ``t0``.

    Each step is a half kinetic step in momentum space, the full potential
    phase evaluated at the midpoint time, and another half kinetic step.  The
    step is shortened where needed so every snapshot time is hit exactly.
    ``t_final < t0`` runs backwards in time.  Returns the states at
    ``snapshots`` (or only at ``t_final`` when no snapshots are given).
    """
    if dt == 0:
        raise ValueError("dt must be non-zero")
    times = _ordered_times(t0, t_final, snapshots)
    g = psi0.grid
    x = g.x
    p2 = g._fft_p() ** 2
    amp = psi0.amp.copy()
    out = []
    step = 0
    # overflow shows up as non-finite amplitudes and is reported as a blowup
    with np.errstate(over="ignore", invalid="ignore"):
        for ta, h, n in _segments(t0, times, dt):
            if n:
                half = np.exp(-1j * p2 * h / (4.0 * params.m * g.hbar))
                full = half * half
                amp = sfft.ifft(half * sfft.fft(amp))
                for k in range(n):
                    amp *= np.exp(-1j * params.potential(x, ta + (k + 0.5) * h) * h / g.hbar)
                    amp = sfft.ifft((full if k < n - 1 else half) * sfft.fft(amp))
                    step += 1
                    if step % _CHECK_EVERY == 0 and not np.all(np.isfinite(amp)):
                        raise BlowupError("non-finite amplitudes", step)
            if not np.all(np.isfinite(amp)):
                raise BlowupError("non-finite amplitudes", step)
            out.append(WaveFunction(g, amp))
    return out


# ---------------------------------------------------------------------------
# classical


@dataclass(frozen=True, eq=False)
class ClassicalEnsemble:
    """Point particles ``(x, p)`` with uniform weights.

    ``jacobians`` (shape ``(N, 2, 2)``), when present, is the accumulated
    tangent map of every particle since the ensemble was created.
    """

    x: np.ndarray
    p: np.ndarray
    t: float = 0.0
    jacobians: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.atleast_1d(np.array(self.x, dtype=float))
        p = np.atleast_1d(np.array(self.p, dtype=float))
        if x.shape != p.shape or x.ndim != 1 or x.size < 1:
            raise ValueError("x and p must be equal-length 1-D arrays with at least one particle")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)
        if self.jacobians is not None:
            jac = np.array(self.jacobians, dtype=float)
            if jac.shape != (x.size, 2, 2):
                raise ValueError("jacobians must have shape (N, 2, 2)")
            object.__setattr__(self, "jacobians", jac)

    @classmethod
    def from_gaussian(cls, n: int, x0: float, p0: float, sigma_x: float, sigma_p: float,
                      rng: np.random.Generator, track_tangent: bool = False) -> "ClassicalEnsemble":
        x = rng.normal(x0, sigma_x, n)
        p = rng.normal(p0, sigma_p, n)
        jac = np.tile(np.eye(2), (n, 1, 1)) if track_tangent else None
        return cls(x, p, 0.0, jac)

    def __len__(self):
        return self.x.size

    def means(self) -> tuple[float, float]:
        return float(self.x.mean()), float(self.p.mean())

    def spreads(self) -> tuple[float, float]:
        return float(self.x.std()), float(self.p.std())


def _kdk(x, p, jac, params, t, h):
    # kick-drift-kick; each sub-map is a shear, so the tangent map has det 1
    if jac is not None:
        jac[:, 1, :] -= 0.5 * h * params.curvature(x, t)[:, None] * jac[:, 0, :]
    p = p + 0.5 * h * params.force(x, t)
    x = x + h * p / params.m
    if jac is not None:
        jac[:, 0, :] += (h / params.m) * jac[:, 1, :]
        jac[:, 1, :] -= 0.5 * h * params.curvature(x, t + h)[:, None] * jac[:, 0, :]
    p = p + 0.5 * h * params.force(x, t + h)
    return x, p


def evolve_classical(ens: ClassicalEnsemble, params: DrivenPendulumParams, dt: float = DEFAULT_DT,
                     t_final: float = 0.0) -> ClassicalEnsemble:
    """Symplectic leapfrog (kick-drift-kick) from ``ens.t`` to ``t_final``."""
    if dt == 0:
        raise ValueError("dt must be non-zero")
    x, p = ens.x.copy(), ens.p.copy()
    jac = None if ens.jacobians is None else ens.jacobians.copy()
    step = 0
    for ta, h, n in _segments(ens.t, [t_final], dt):
        for k in range(n):
            x, p = _kdk(x, p, jac, params, ta + k * h, h)
            step += 1
            if step % _CHECK_EVERY == 0 and not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
                raise BlowupError("non-finite particle coordinates", step)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
        raise BlowupError("non-finite particle coordinates", step)
    return ClassicalEnsemble(x, p, float(t_final), jac)


def tangent_map_step(params: DrivenPendulumParams, x: float, p: float, t: float, dt: float) -> np.ndarray:
    """Jacobian of a single leapfrog step at ``(x, p, t)``."""
    jac = np.eye(2)[None].copy()
    _kdk(np.array([x], float), np.array([p], float), jac, params, t, dt)
    return jac[0]


def transverse_scale(ens: ClassicalEnsemble, delta: float, percentile: float = 10.0) -> float:
    """Small-percentile transverse width of an initially round patch of size ``delta``.

    A patch of size ``delta`` around each particle is compressed by the
    inverse of the largest singular value of its tangent map (area is
    conserved), so the local filament width is ``delta / sigma_max``.
    """
    if ens.jacobians is None:
        raise ValueError("ensemble carries no tangent maps; create it with track_tangent=True")
    sv = np.linalg.svd(ens.jacobians, compute_uv=False)
    return float(np.percentile(delta / sv[:, 0], percentile))


@dataclass(frozen=True)
class LyapunovResult:
    rate: float
    stderr: float
    rates: np.ndarray
    chaotic: np.ndarray

    @property
    def chaotic_rate(self) -> float:
        """Mean over seeds flagged chaotic (NaN if none are)."""
        r = self.rates[self.chaotic]
        return float(r.mean()) if r.size else float("nan")

    @property
    def chaotic_stderr(self) -> float:
        r = self.rates[self.chaotic]
        return float(r.std(ddof=1) / math.sqrt(r.size)) if r.size > 1 else float("nan")


def lyapunov(params: DrivenPendulumParams, seed_points, t_total: float, renorm_interval: float = 1.0,
             dt: float = 2.0 * math.pi / 512, chaotic_threshold: float = 0.02) -> LyapunovResult:
    """Largest Lyapunov exponent from the linearized leapfrog map.

    A tangent vector is carried along each seed trajectory and renormalized
    every ``renorm_interval``; the rate is the mean of the accumulated log
    growth over elapsed time.  ``rate`` and ``stderr`` are the mean and
    standard error over seeds; seeds below ``chaotic_threshold`` are flagged
    regular.
    """
    seeds = np.atleast_2d(np.asarray(seed_points, dtype=float))
    if seeds.shape[1] != 2:
        raise ValueError("seed points must be (x, p) pairs")
    if not t_total > renorm_interval > 0:
        raise ValueError("need t_total > renorm_interval > 0")
    n_seeds = seeds.shape[0]
    x, p = seeds[:, 0].copy(), seeds[:, 1].copy()
    jac = np.zeros((n_seeds, 2, 1))
    jac[:, 0, 0] = jac[:, 1, 0] = 1.0 / math.sqrt(2.0)
    log_growth = np.zeros(n_seeds)
    n_blocks = int(round(t_total / renorm_interval))
    t = 0.0
    for b in range(n_blocks):
        for ta, h, n in _segments(t, [t + renorm_interval], dt):
            for k in range(n):
                x, p = _kdk(x, p, jac, params, ta + k * h, h)
        t += renorm_interval
        norm = np.hypot(jac[:, 0, 0], jac[:, 1, 0])
        if not np.all(np.isfinite(norm)) or not np.all(np.isfinite(x)):
            raise BlowupError("non-finite tangent vector", b)
        log_growth += np.log(norm)
        jac /= norm[:, None, None]
    rates = log_growth / t
    stderr = float(rates.std(ddof=1) / math.sqrt(n_seeds)) if n_seeds > 1 else float("nan")
    return LyapunovResult(float(rates.mean()), stderr, rates, rates > chaotic_threshold)


# ---------------------------------------------------------------------------
# saturation timescales


def nonlinearity_scale(params: DrivenPendulumParams, x: float = 0.7, t: float = 0.0) -> float:
    """``sqrt(|V'/V'''|)`` of the cosine part of the potential.

    The harmonic term has no third derivative and is excluded; for the pure
    cosine the ratio is 1 at every point where ``V'`` is non-zero.
    """
    if params.kappa == 0:
        raise ValueError("no cosine term: nonlinearity scale undefined")
    u = x - params.l * math.sin(t)
    v1 = params.kappa * math.sin(u)
    v3 = -params.kappa * math.sin(u)
    if v3 == 0:
        raise ValueError(f"V''' vanishes at x={x}, t={t}; choose another point")
    return math.sqrt(abs(v1 / v3))


def saturation_time(rate: float, ratio: float) -> Optional[float]:
    """``ln(ratio)/rate``, or ``None`` if ``ratio <= 1`` (already below hbar)."""
    if not rate > 0:
        raise ValueError("Lyapunov rate must be positive")
    if ratio <= 1.0:
        return None
    return math.log(ratio) / rate


@dataclass(frozen=True)
class Timescales:
    t_hbar: Optional[float]
    t_r: Optional[float]
    chi: float


def timescales(lyapunov: float, delta_p0: float, params: DrivenPendulumParams, A: float,
               hbar: float) -> Timescales:
    """``t_hbar = ln(delta_p0*chi/hbar)/lyapunov`` and ``t_r = ln(A/hbar)/lyapunov``."""
    if not (lyapunov > 0 and delta_p0 > 0 and A > 0 and hbar > 0):
        raise ValueError("all inputs must be positive")
    chi = nonlinearity_scale(params)
    return Timescales(saturation_time(lyapunov, delta_p0 * chi / hbar), saturation_time(lyapunov, A / hbar), chi)


def saturation_onset(times: Sequence[float], values: Sequence[float], band: float = 0.3) -> Optional[float]:
    """First time after which every later value stays within ``band`` (relative)
    of the value at that time; ``None`` if the last sample is the only one."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    for k in range(len(v) - 1):
        if np.all(np.abs(v[k:] / v[k] - 1.0) <= band):
            return float(t[k])
    return None
