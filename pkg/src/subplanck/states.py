"""Constructors for Gaussian, cat, compass and sparse superposition states,
plus closed-form Wigner functions used as test oracles."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import GridSpec, WaveFunction

__all__ = [
    "GaussianPacket",
    "CompassSpec",
    "SparseSpec",
    "SupportError",
    "OverlapWarning",
    "make_gaussian",
    "make_cat",
    "make_compass",
    "make_sparse",
    "random_sparse_spec",
    "analytic_wigner_oracle",
    "checkerboard_sum",
    "checkerboard_product",
    "checkerboard_zeros",
]

SUPPORT_SIGMAS = 6.0
SPARSE_SEPARATION = 5.0


class SupportError(ValueError):
    """A packet does not fit inside the grid with the required margin."""


class OverlapWarning(UserWarning):
    """Packets of a superposition overlap appreciably (not in the sparse limit)."""


@dataclass(frozen=True)
class GaussianPacket:
    """Minimum-uncertainty packet centered at ``(x0, p0)`` with width ``xi``.

    Position std is ``xi/sqrt(2)``, momentum std ``hbar/(xi*sqrt(2))``.
    """

    x0: float = 0.0
    p0: float = 0.0
    xi: float = 1.0

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi!r}")


@dataclass(frozen=True)
class CompassSpec:
    """Four packets at ``(+-L/2, 0)`` and ``(0, +-P/2)``."""

    L: float
    P: float
    xi: float

    def __post_init__(self):
        if not (self.L > 0 and self.P > 0 and self.xi > 0):
            raise ValueError("L, P and xi must be positive")

    def is_sparse(self, hbar: float) -> bool:
        return self.L > SPARSE_SEPARATION * self.xi and self.P > SPARSE_SEPARATION * hbar / self.xi

    def packets(self) -> list[GaussianPacket]:
        """East, west, north, south."""
        h = 0.5
        return [
            GaussianPacket(h * self.L, 0.0, self.xi),
            GaussianPacket(-h * self.L, 0.0, self.xi),
            GaussianPacket(0.0, h * self.P, self.xi),
            GaussianPacket(0.0, -h * self.P, self.xi),
        ]


@dataclass(frozen=True)
class SparseSpec:
    """Superposition ``sum_k alpha_k |x_k, p_k>`` of identical packets."""

    packets: tuple[tuple[complex, float, float], ...]
    xi: float

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError("xi must be positive")
        if len(self.packets) == 0:
            raise ValueError("need at least one packet")
        pk = tuple((complex(a), float(x), float(p)) for a, x, p in self.packets)
        object.__setattr__(self, "packets", pk)

    @property
    def alphas(self) -> np.ndarray:
        a = np.array([a for a, _, _ in self.packets])
        return a / math.sqrt(np.sum(np.abs(a) ** 2))

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.alphas) ** 2

    @property
    def centers(self) -> np.ndarray:
        return np.array([(x, p) for _, x, p in self.packets])

    def scaled_separations(self, hbar: float) -> np.ndarray:
        """Pairwise distances in units of the packet widths ``(xi, hbar/xi)``."""
        c = self.centers
        u = c[:, 0] / self.xi
        v = c[:, 1] * self.xi / hbar
        d = np.hypot(u[:, None] - u[None, :], v[:, None] - v[None, :])
        return d[np.triu_indices(len(c), k=1)]

    def is_sparse(self, hbar: float) -> bool:
        sep = self.scaled_separations(hbar)
        return bool(sep.size == 0 or sep.min() > SPARSE_SEPARATION)


def _packet_amp(x: np.ndarray, g: GaussianPacket, hbar: float) -> np.ndarray:
    # unit-norm in the continuum
    norm = (math.pi * g.xi**2) ** -0.25
    return norm * np.exp(-((x - g.x0) ** 2) / (2.0 * g.xi**2) + 1j * g.p0 * x / hbar)


def _check_support(grid: GridSpec, packets: Sequence[GaussianPacket]) -> None:
    for g in packets:
        sx = g.xi / math.sqrt(2.0)
        sp = grid.hbar / (g.xi * math.sqrt(2.0))
        lo = g.x0 - SUPPORT_SIGMAS * sx - grid.x_min
        hi = grid.x_max - (g.x0 + SUPPORT_SIGMAS * sx)
        if min(lo, hi) < 0:
            raise SupportError(
                f"packet at x0={g.x0} needs [{g.x0 - SUPPORT_SIGMAS * sx:.4g}, {g.x0 + SUPPORT_SIGMAS * sx:.4g}] "
                f"but grid covers [{grid.x_min:.4g}, {grid.x_max:.4g}] (margin {min(lo, hi):.4g})"
            )
        pmarg = grid.p_max - (abs(g.p0) + SUPPORT_SIGMAS * sp)
        if pmarg < 0:
            raise SupportError(
                f"packet at p0={g.p0} needs |p| <= {abs(g.p0) + SUPPORT_SIGMAS * sp:.4g} "
                f"but grid resolves |p| < {grid.p_max:.4g} (margin {pmarg:.4g})"
            )


def _superpose(grid: GridSpec, packets: Sequence[GaussianPacket], alphas: Sequence[complex],
               check_support: bool = True) -> WaveFunction:
    if check_support:
        _check_support(grid, packets)
    x = grid.x
    amp = np.zeros(grid.n, dtype=np.complex128)
    for a, g in zip(alphas, packets):
        amp += a * _packet_amp(x, g, grid.hbar)
    return WaveFunction(grid, amp).normalized()


def make_gaussian(g: GaussianPacket, grid: GridSpec, check_support: bool = True) -> WaveFunction:
    """Normalized ``exp(-(x-x0)^2/(2 xi^2) + i p0 x/hbar)``."""
    return _superpose(grid, [g], [1.0], check_support)


def make_cat(x0: float, xi: float, grid: GridSpec, p0: float = 0.0,
             check_support: bool = True) -> WaveFunction:
    """Even superposition of packets at ``-(x0, p0)`` and ``+(x0, p0)``.

    Normalization is computed numerically, so the result is exact at any
    separation; a warning is issued when the two packets overlap.
    """
    if 2.0 * math.hypot(x0 / xi, p0 * xi / grid.hbar) <= SPARSE_SEPARATION:
        warnings.warn(f"cat packets at +-{x0} overlap (xi={xi}); not in the sparse limit",
                      OverlapWarning, stacklevel=2)
    packets = [GaussianPacket(-x0, -p0, xi), GaussianPacket(x0, p0, xi)]
    return _superpose(grid, packets, [1.0, 1.0], check_support)


def make_compass(c: CompassSpec, grid: GridSpec, check_support: bool = True) -> WaveFunction:
    """Equal-amplitude superposition of the four compass packets."""
    return _superpose(grid, c.packets(), [1.0] * 4, check_support)


def make_sparse(s: SparseSpec, grid: GridSpec, check_support: bool = True) -> WaveFunction:
    packets = [GaussianPacket(x, p, s.xi) for _, x, p in s.packets]
    return _superpose(grid, packets, s.alphas, check_support)


def random_sparse_spec(n_packets: int, xi: float, hbar: float,
                       x_range: tuple[float, float], p_range: tuple[float, float],
                       rng: np.random.Generator, min_separation: float = SPARSE_SEPARATION,
                       random_phases: bool = False, max_tries: int = 200_000) -> SparseSpec:
    """Equal-weight packets at random, mutually non-overlapping centers.

    Centers are drawn uniformly and rejected until every pairwise distance,
    measured in packet widths, exceeds ``min_separation``.
    """
    centers: list[tuple[float, float]] = []
    u_s, v_s = 1.0 / xi, xi / hbar
    tries = 0
    while len(centers) < n_packets:
        tries += 1
        if tries > max_tries:
            raise RuntimeError(f"could only place {len(centers)} of {n_packets} packets; enlarge the ranges")
        x = rng.uniform(*x_range)
        p = rng.uniform(*p_range)
        if all(math.hypot((x - cx) * u_s, (p - cp) * v_s) > min_separation for cx, cp in centers):
            centers.append((x, p))
    if random_phases:
        phases = rng.uniform(0.0, 2.0 * math.pi, n_packets)
    else:
        phases = np.zeros(n_packets)
    amp = 1.0 / math.sqrt(n_packets)
    packets = tuple((amp * complex(math.cos(ph), math.sin(ph)), x, p) for ph, (x, p) in zip(phases, centers))
    return SparseSpec(packets, xi)


def _gauss_wigner(x, p, x0, p0, xi, hbar):
    return np.exp(-((x - x0) ** 2) / xi**2 - ((p - p0) ** 2) * xi**2 / hbar**2) / (math.pi * hbar)


def checkerboard_sum(x, p, L: float, P: float, hbar: float):
    return np.cos(p * L / hbar) + np.cos(x * P / hbar)


def checkerboard_product(x, p, L: float, P: float, hbar: float):
    return 2.0 * np.cos((P * x + L * p) / (2 * hbar)) * np.cos((P * x - L * p) / (2 * hbar))


def checkerboard_zeros(L: float, P: float, hbar: float) -> tuple[float, float]:
    """Zero of the central pattern along ``x`` (at ``p = pi hbar/2L``) and
    along ``p`` (at ``x = pi hbar/2P``): ``(pi hbar/(2P), pi hbar/(2L))``."""
    return math.pi * hbar / (2 * P), math.pi * hbar / (2 * L)


def analytic_wigner_oracle(kind: str, params: dict, x, p, hbar: float):
    """Closed-form Wigner values.

    kind ``"gaussian"`` (x0, p0, xi)
        ``exp(-(x-x0)^2/xi^2 - (p-p0)^2 xi^2/hbar^2)/(pi hbar)``.
    kind ``"cat"`` (x0, xi)
        Two-packet cat with packets at ``+-x0``: half of each packet term
        plus the interference term ``exp(-x^2/xi^2 - p^2 xi^2/hbar^2)
        cos(2 p x0/hbar)/(pi hbar)``, all divided by the exact norm
        ``1 + exp(-x0^2/xi^2)`` (which is 1 in the sparse limit).
    kind ``"compass-interference"`` (L, P, xi)
        Central checkerboard term ``exp(...) (cos(pL/hbar) + cos(xP/hbar))/(pi hbar)``.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if kind == "gaussian":
        return _gauss_wigner(x, p, params.get("x0", 0.0), params.get("p0", 0.0), params["xi"], hbar)
    if kind == "cat":
        x0, xi = params["x0"], params["xi"]
        packets = 0.5 * (_gauss_wigner(x, p, -x0, 0.0, xi, hbar) + _gauss_wigner(x, p, x0, 0.0, xi, hbar))
        fringe = _gauss_wigner(x, p, 0.0, 0.0, xi, hbar) * np.cos(2.0 * p * x0 / hbar)
        return (packets + fringe) / (1.0 + math.exp(-(x0**2) / xi**2))
    if kind == "compass-interference":
        L, P, xi = params["L"], params["P"], params["xi"]
        return _gauss_wigner(x, p, 0.0, 0.0, xi, hbar) * checkerboard_sum(x, p, L, P, hbar)
    raise ValueError(f"unknown oracle kind {kind!r}")
