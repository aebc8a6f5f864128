"""Decoherence of a two-state system by conditional phase-space shifts of an
environment state.

The system ``alpha|+> + beta|->`` displaces the environment by ``plus`` or
``minus`` depending on its state.  Everything observable about the system is
then fixed by the suppression factor

    z = <eps_minus|eps_plus>,  eps_pm = D(plus/minus) eps,

which for a net shift ``delta = plus - minus`` equals
``<eps|D(delta)|eps>`` up to a unimodular phase.  With this ordering a pure
momentum shift gives ``z = sum |eps(x)|^2 exp(i delta_p x/hbar) dx``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from .grid import (
    DensityMatrix,
    Displacement,
    GridMismatchError,
    WaveFunction,
    _displace_array,
    displace,
    inner,
    position_moments,
)
from .states import CompassSpec, SparseSpec
from .wigner import DecayCurve, _unit, ray_limit

__all__ = [
    "TwoStateSystem",
    "ConditionalShifts",
    "Prediction",
    "conditional_evolve",
    "suppression_factor",
    "fourier_suppression",
    "small_shift_prediction",
    "orthogonality_shift",
    "mixed_suppression",
    "reduced_density",
    "compass_overlap_prediction",
    "sparse_overlap_prediction",
    "decay_scan",
]

Env = Union[WaveFunction, DensityMatrix]

SMALL_SHIFT_WINDOW = 0.3
# squared shift in packet-width units below which the Gaussian envelope costs < 2.5%
COMPASS_WINDOW = 0.05


@dataclass(frozen=True)
class TwoStateSystem:
    alpha: complex
    beta: complex

    def __post_init__(self):
        a, b = complex(self.alpha), complex(self.beta)
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > 1e-10:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {abs(a) ** 2 + abs(b) ** 2!r}, expected 1")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)


@dataclass(frozen=True)
class ConditionalShifts:
    """Environment shifts conditioned on ``|+>`` and ``|->``."""

    plus: Displacement
    minus: Displacement = Displacement()

    @property
    def net(self) -> Displacement:
        return self.plus - self.minus

    @classmethod
    def from_coupling(cls, g: float, t: float) -> "ConditionalShifts":
        """Shifts generated by ``g (|+><+| - |-><-|) p`` acting for time ``t``."""
        return cls(Displacement(g * t, 0.0), Displacement(-g * t, 0.0))


class Prediction(NamedTuple):
    value: float
    valid: bool


def conditional_evolve(env: WaveFunction, shifts: ConditionalShifts) -> tuple[WaveFunction, WaveFunction]:
    return displace(env, shifts.plus), displace(env, shifts.minus)


def suppression_factor(eps_plus: WaveFunction, eps_minus: WaveFunction) -> complex:
    """``z = <eps_minus|eps_plus>``."""
    return inner(eps_minus, eps_plus)


def _diagonal(env: Env) -> np.ndarray:
    if isinstance(env, WaveFunction):
        return env.density
    if isinstance(env, DensityMatrix):
        return env.density
    raise TypeError(f"expected WaveFunction or DensityMatrix, got {type(env).__name__}")


def fourier_suppression(env: Env, delta_p: float) -> complex:
    """Fourier transform of the position density at ``delta_p/hbar``."""
    dens = _diagonal(env)
    g = env.grid
    return complex(np.sum(dens * np.exp(1j * delta_p * g.x / g.hbar)) * g.dx)


def small_shift_prediction(env: Env, delta_p: float) -> Prediction:
    """``1 - delta_p^2 Var(x)/hbar^2``, the leading expansion of ``|z|^2``.

    ``valid`` is False once ``delta_p * sqrt(Var x)/hbar`` reaches 0.3.
    """
    _, var = position_moments(env)
    hbar = env.grid.hbar
    value = 1.0 - delta_p**2 * var / hbar**2
    return Prediction(value, abs(delta_p) * math.sqrt(var) / hbar < SMALL_SHIFT_WINDOW)


def orthogonality_shift(env: Env) -> float:
    """Momentum shift ``hbar/sqrt(Var x)`` at which ``z`` becomes small."""
    _, var = position_moments(env)
    if not var > 0:
        raise ValueError("position variance must be positive")
    return env.grid.hbar / math.sqrt(var)


def mixed_suppression(rho_env: DensityMatrix, shifts: ConditionalShifts) -> complex:
    """``Tr(D_plus rho D_minus^dagger)`` for a mixed environment.

    Reduces to :func:`suppression_factor` for a pure projector.
    """
    g = rho_env.grid
    # D_plus on the ket index, then D_minus^dagger on the bra index via conjugation
    m = _displace_array(rho_env.rho, g, shifts.plus, axis=0)
    m = np.conj(_displace_array(np.conj(m), g, shifts.minus, axis=1))
    return complex(np.trace(m) * g.dx)


def reduced_density(sys: TwoStateSystem, z: complex) -> np.ndarray:
    """System density matrix in the ``|+>, |->`` basis after the environment is traced out."""
    z = complex(z)
    if abs(z) > 1.0 + 1e-9:
        raise ValueError(f"|z| = {abs(z)!r} exceeds 1")
    a, b = sys.alpha, sys.beta
    return np.array([[abs(a) ** 2, z * a * b.conjugate()],
                     [z.conjugate() * a.conjugate() * b, abs(b) ** 2]])


def compass_overlap_prediction(c: CompassSpec, d: Displacement, hbar: float) -> Prediction:
    """Squared overlap ``(cos(dx P/2hbar) + cos(dp L/2hbar))^2/4`` of a compass
    state with its displaced copy.

    ``valid`` requires the sparse limit and a shift small against the packet
    widths, since the Gaussian envelope factor is dropped.
    """
    value = (math.cos(d.delta_x * c.P / (2 * hbar)) + math.cos(d.delta_p * c.L / (2 * hbar))) ** 2 / 4.0
    scaled = (d.delta_x / c.xi) ** 2 + (d.delta_p * c.xi / hbar) ** 2
    return Prediction(value, c.is_sparse(hbar) and scaled <= COMPASS_WINDOW)


def sparse_overlap_prediction(spec: SparseSpec, d: Displacement, hbar: float) -> float:
    """Weighted phase sum ``|sum_k w_k exp(i(dp x_k - dx p_k)/hbar)|``.

    Each packet contributes its weight with the phase picked up by a
    displaced coherent state; cross terms between distinct packets are
    neglected, as is the Gaussian envelope.
    """
    c = spec.centers
    phase = (d.delta_p * c[:, 0] - d.delta_x * c[:, 1]) / hbar
    return float(abs(np.sum(spec.weights * np.exp(1j * phase))))


def _shift_overlap(env: Env, d: Displacement) -> complex:
    if isinstance(env, WaveFunction):
        return suppression_factor(displace(env, d), env)
    return mixed_suppression(env, ConditionalShifts(d))


def decay_scan(env: Env, direction: Sequence[float], max_magnitude: float, steps: int = 64) -> DecayCurve:
    """``z`` for net shifts ``s * direction`` with ``s`` in ``[0, max_magnitude]``."""
    if steps < 16:
        raise ValueError("need at least 16 steps")
    if not max_magnitude > 0:
        raise ValueError("max_magnitude must be positive")
    u = _unit(direction)
    lim = ray_limit(env.grid, u)
    if max_magnitude > lim:
        raise GridMismatchError(f"max_magnitude {max_magnitude} exceeds the grid's reach {lim:.6g} along {u}")
    s = np.linspace(0.0, max_magnitude, steps)
    deltas = np.column_stack([s * u[0], s * u[1]])
    z = np.array([_shift_overlap(env, Displacement(dx, dp)) for dx, dp in deltas])
    return DecayCurve(deltas, z, s)
