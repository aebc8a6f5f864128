"""Uniform position grid, state containers and the phase-space displacement.

Conventions used throughout the package:

* position samples ``x_i = x_min + i*dx``, ``i = 0..n-1``, periodic;
* momentum samples are centered, ``p_j = (j - n/2)*dp`` with
  ``dp = 2*pi*hbar/(n*dx)``, so ``p`` spans ``[-pi*hbar/dx, pi*hbar/dx)``;
* momentum amplitudes are ``(2*pi*hbar)**-1/2 * sum_i psi(x_i) exp(-i p x_i/hbar) dx``,
  which makes ``sum |phi|^2 dp == sum |psi|^2 dx`` exactly;
* ``displace(psi, (dx0, dp0))`` moves the state (and its Wigner function)
  by ``+dx0`` in position and ``+dp0`` in momentum, with the symmetric phase
  ``exp(i dp0 (x - dx0/2)/hbar) psi(x - dx0)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "WaveFunction",
    "DensityMatrix",
    "Displacement",
    "GridMismatchError",
    "WraparoundWarning",
    "inner",
    "displace",
    "build_density",
    "pure_density",
    "to_momentum",
    "from_momentum",
    "position_moments",
    "momentum_moments",
]


class GridMismatchError(ValueError):
    """Two objects live on different grids."""


class WraparoundWarning(UserWarning):
    """A displacement moved amplitude across the periodic boundary."""


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Periodic position grid; the momentum grid is derived from it."""

    n: int
    x_min: float
    dx: float
    hbar: float

    def __post_init__(self):
        n = int(self.n)
        if n != self.n or not _is_pow2(n) or n < 16:
            raise ValueError(f"n must be a power of two >= 16, got {self.n!r}")
        if not (math.isfinite(self.dx) and self.dx > 0):
            raise ValueError(f"dx must be positive, got {self.dx!r}")
        if not (math.isfinite(self.hbar) and self.hbar > 0):
            raise ValueError(f"hbar must be positive, got {self.hbar!r}")
        if not math.isfinite(self.x_min):
            raise ValueError("x_min must be finite")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "hbar", float(self.hbar))

    @classmethod
    def centered(cls, n: int, dx: float, hbar: float) -> "GridSpec":
        """Grid of ``n`` points with ``x = 0`` at index ``n/2``."""
        return cls(n=n, x_min=-0.5 * n * dx, dx=dx, hbar=hbar)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def extent(self) -> float:
        return self.n * self.dx

    @property
    def x_max(self) -> float:
        return self.x_min + (self.n - 1) * self.dx

    @property
    def dp(self) -> float:
        return 2.0 * math.pi * self.hbar / (self.n * self.dx)

    @property
    def p(self) -> np.ndarray:
        return self.dp * (np.arange(self.n) - self.n // 2)

    @property
    def p_max(self) -> float:
        return math.pi * self.hbar / self.dx

    def _fft_p(self) -> np.ndarray:
        # momenta in native FFT order
        return 2.0 * math.pi * self.hbar * sfft.fftfreq(self.n, self.dx)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Complex amplitudes ``psi(x_i)`` on a :class:`GridSpec`.

    ``wrapped`` is set by :func:`displace` when the shift exceeded half the
    grid extent, in which case the periodic image dominates the result.
    """

    grid: GridSpec
    amp: np.ndarray
    wrapped: bool = field(default=False)

    def __post_init__(self):
        amp = np.array(self.amp, dtype=np.complex128, copy=True)
        if amp.shape != (self.grid.n,):
            raise GridMismatchError(f"amplitude shape {amp.shape} does not match grid n={self.grid.n}")
        if not np.all(np.isfinite(amp)):
            raise ValueError("wavefunction contains non-finite amplitudes")
        amp.flags.writeable = False
        object.__setattr__(self, "amp", amp)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amp) ** 2

    def norm(self) -> float:
        return float(np.sum(self.density) * self.grid.dx)

    def normalized(self) -> "WaveFunction":
        nrm = self.norm()
        if nrm <= 0:
            raise ValueError("cannot normalize a zero wavefunction")
        return WaveFunction(self.grid, self.amp / math.sqrt(nrm), self.wrapped)

    def __repr__(self):
        return f"WaveFunction(n={self.grid.n}, norm={self.norm():.12g})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Kernel ``rho(x_i, x_j)``; operators act as ``sum_j rho_ij psi_j dx``."""

    grid: GridSpec
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=np.complex128, copy=True)
        n = self.grid.n
        if rho.shape != (n, n):
            raise GridMismatchError(f"rho shape {rho.shape} does not match grid n={n}")
        if not np.all(np.isfinite(rho)):
            raise ValueError("density matrix contains non-finite entries")
        scale = max(float(np.max(np.abs(rho))), 1.0)
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10 * scale:
            raise ValueError("density matrix is not Hermitian")
        tr = float(np.real(np.trace(rho))) * self.grid.dx
        if abs(tr - 1.0) > 1e-8:
            raise ValueError(f"trace*dx = {tr!r}, expected 1")
        if np.min(np.real(np.diag(rho))) < -1e-10 * scale:
            raise ValueError("density matrix has negative diagonal entries")
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)

    def purity(self) -> float:
        """``Tr(rho^2)`` in continuum normalization."""
        return float(np.real(np.sum(self.rho * self.rho.T))) * self.grid.dx**2

    @property
    def density(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).copy()


@dataclass(frozen=True)
class Displacement:
    """Phase-space shift ``(delta_x, delta_p)``."""

    delta_x: float = 0.0
    delta_p: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.delta_x) and math.isfinite(self.delta_p)):
            raise ValueError("displacement components must be finite")
        object.__setattr__(self, "delta_x", float(self.delta_x))
        object.__setattr__(self, "delta_p", float(self.delta_p))

    def __neg__(self):
        return Displacement(-self.delta_x, -self.delta_p)

    def __add__(self, other: "Displacement"):
        return Displacement(self.delta_x + other.delta_x, self.delta_p + other.delta_p)

    def __sub__(self, other: "Displacement"):
        return Displacement(self.delta_x - other.delta_x, self.delta_p - other.delta_p)

    def __mul__(self, s: float):
        return Displacement(s * self.delta_x, s * self.delta_p)

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return self.delta_x == 0.0 and self.delta_p == 0.0

    def magnitude(self, L_ref: float, P_ref: float) -> float:
        """Action-scaled length ``sqrt((dx*P)^2 + (dp*L)^2)/sqrt(L*P)``."""
        A = L_ref * P_ref
        if A <= 0:
            raise ValueError("reference scales must be positive")
        return math.hypot(self.delta_x * P_ref, self.delta_p * L_ref) / math.sqrt(A)


def _check_same_grid(a: GridSpec, b: GridSpec) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def inner(a: WaveFunction, b: WaveFunction) -> complex:
    """``<a|b> = sum conj(a) b dx``."""
    _check_same_grid(a.grid, b.grid)
    return complex(np.vdot(a.amp, b.amp) * a.grid.dx)


def _momentum_phase(grid: GridSpec) -> np.ndarray:
    return np.exp(-1j * grid.p * grid.x_min / grid.hbar)


def to_momentum(psi: WaveFunction) -> np.ndarray:
    """Momentum amplitudes on ``psi.grid.p`` (centered, increasing)."""
    g = psi.grid
    spec = sfft.fftshift(sfft.fft(psi.amp))
    return spec * _momentum_phase(g) * (g.dx / math.sqrt(2.0 * math.pi * g.hbar))


def from_momentum(grid: GridSpec, phi: np.ndarray) -> WaveFunction:
    """Inverse of :func:`to_momentum`."""
    phi = np.asarray(phi, dtype=np.complex128)
    if phi.shape != (grid.n,):
        raise GridMismatchError(f"momentum amplitudes shape {phi.shape} does not match n={grid.n}")
    amp = sfft.ifft(sfft.ifftshift(phi * np.conj(_momentum_phase(grid))))
    return WaveFunction(grid, amp * (math.sqrt(2.0 * math.pi * grid.hbar) / grid.dx))


def _shift_position(amp: np.ndarray, grid: GridSpec, delta_x: float, axis: int = -1) -> np.ndarray:
    # psi(x) -> psi(x - delta_x) by a phase ramp in momentum space
    kernel = np.exp(-1j * grid._fft_p() * delta_x / grid.hbar)
    shape = [1] * amp.ndim
    shape[axis] = grid.n
    return sfft.ifft(sfft.fft(amp, axis=axis) * kernel.reshape(shape), axis=axis)


def _displace_array(amp: np.ndarray, grid: GridSpec, d: Displacement, axis: int = -1) -> np.ndarray:
    out = np.asarray(amp, dtype=np.complex128)
    if d.delta_x != 0.0:
        out = _shift_position(out, grid, d.delta_x, axis)
    if d.delta_p != 0.0:
        ramp = np.exp(1j * d.delta_p * (grid.x - 0.5 * d.delta_x) / grid.hbar)
        shape = [1] * out.ndim
        shape[axis] = grid.n
        out = out * ramp.reshape(shape)
    return out


def displace(psi: WaveFunction, d: Displacement) -> WaveFunction:
    """Apply the phase-space displacement ``d`` to ``psi``.

    Position shifts are done spectrally, so non-lattice shifts are exact to
    spectral accuracy.  A shift larger than half the grid extent sets
    ``wrapped`` on the result and emits :class:`WraparoundWarning`.
    """
    if d.is_zero():
        return psi
    wrapped = abs(d.delta_x) > 0.5 * psi.grid.extent
    if wrapped:
        warnings.warn(
            f"delta_x={d.delta_x} exceeds half the grid extent {0.5 * psi.grid.extent}",
            WraparoundWarning,
            stacklevel=2,
        )
    return WaveFunction(psi.grid, _displace_array(psi.amp, psi.grid, d), wrapped or psi.wrapped)


def pure_density(psi: WaveFunction) -> DensityMatrix:
    return DensityMatrix(psi.grid, np.outer(psi.amp, psi.amp.conj()))


def build_density(components: Iterable[tuple[float, WaveFunction]]) -> DensityMatrix:
    """Mixture ``sum_k w_k |psi_k><psi_k|``."""
    components = list(components)
    if not components:
        raise ValueError("need at least one component")
    weights = np.array([float(w) for w, _ in components])
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    if abs(weights.sum() - 1.0) > 1e-10:
        raise ValueError(f"weights sum to {weights.sum()!r}, expected 1")
    grid = components[0][1].grid
    rho = np.zeros((grid.n, grid.n), dtype=np.complex128)
    for w, psi in components:
        _check_same_grid(grid, psi.grid)
        rho += w * np.outer(psi.amp, psi.amp.conj())
    return DensityMatrix(grid, rho)


def _density_of(state) -> tuple[GridSpec, np.ndarray]:
    if isinstance(state, WaveFunction):
        return state.grid, state.density
    if isinstance(state, DensityMatrix):
        return state.grid, state.density
    raise TypeError(f"expected WaveFunction or DensityMatrix, got {type(state).__name__}")


def position_moments(state) -> tuple[float, float]:
    """Mean and variance of ``x`` for a pure or mixed state."""
    grid, dens = _density_of(state)
    w = dens * grid.dx
    total = w.sum()
    mean = float(np.dot(w, grid.x) / total)
    var = float(np.dot(w, (grid.x - mean) ** 2) / total)
    return mean, var


def momentum_density(state) -> np.ndarray:
    """``|phi(p_j)|^2`` (or ``<p_j|rho|p_j>``) on the centered momentum grid."""
    if isinstance(state, WaveFunction):
        return np.abs(to_momentum(state)) ** 2
    if isinstance(state, DensityMatrix):
        g = state.grid
        phase = _momentum_phase(g) * (g.dx / math.sqrt(2.0 * math.pi * g.hbar))
        # F rho F^dagger, diagonal only
        left = sfft.fftshift(sfft.fft(state.rho, axis=0), axes=0) * phase[:, None]
        both = sfft.fftshift(sfft.fft(left.conj(), axis=1), axes=1) * phase[None, :]
        return np.real(np.diag(both))
    raise TypeError(f"expected WaveFunction or DensityMatrix, got {type(state).__name__}")


def momentum_moments(state) -> tuple[float, float]:
    """Mean and variance of ``p`` for a pure or mixed state."""
    grid, _ = _density_of(state)
    w = momentum_density(state) * grid.dp
    total = w.sum()
    mean = float(np.dot(w, grid.p) / total)
    var = float(np.dot(w, (grid.p - mean) ** 2) / total)
    return mean, var


def support_margin(grid: GridSpec, centers: Sequence[float], width: float, sigmas: float = 6.0) -> float:
    """Smallest distance between ``center +- sigmas*width`` and the grid edges."""
    lo = min(centers) - sigmas * width
    hi = max(centers) + sigmas * width
    return min(lo - grid.x_min, grid.x_max - hi)
