"""Wigner transforms, Moyal overlap and phase-space structure metrics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.fft as sfft
from scipy import optimize, signal

from .grid import (
    DensityMatrix,
    Displacement,
    GridMismatchError,
    GridSpec,
    WaveFunction,
    displace,
    inner,
    momentum_moments,
    position_moments,
    to_momentum,
)

__all__ = [
    "WignerGrid",
    "StructureReport",
    "DecayCurve",
    "CoherenceScale",
    "RippleFrequency",
    "TileMeasurement",
    "wigner_of_psi",
    "wigner_of_rho",
    "moyal_overlap",
    "structure_report",
    "coherence_scale",
    "ripple_frequency",
    "wigner_slice",
    "tile_area",
]

State = Union[WaveFunction, DensityMatrix]

NEGATIVITY_TOL = 1e-9
_ROW_BLOCK = 256


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """``W(x_i, p_j)`` with rows along position and columns along momentum."""

    grid: GridSpec
    n_p: int
    p_min: float
    dp: float
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != (self.grid.n, self.n_p):
            raise GridMismatchError(f"values shape {v.shape} != ({self.grid.n}, {self.n_p})")
        if not np.all(np.isfinite(v)):
            raise ValueError("Wigner values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def p(self) -> np.ndarray:
        return self.p_min + self.dp * np.arange(self.n_p)

    @property
    def hbar(self) -> float:
        return self.grid.hbar

    def cell(self) -> float:
        return self.grid.dx * self.dp

    def total(self) -> float:
        return float(self.values.sum() * self.cell())

    def purity(self) -> float:
        """``2 pi hbar * sum W^2 dx dp`` (equals ``Tr rho^2``)."""
        return 2.0 * math.pi * self.hbar * float(np.sum(self.values**2)) * self.cell()

    def same_axes(self, other: "WignerGrid") -> bool:
        return (self.grid == other.grid and self.n_p == other.n_p
                and self.p_min == other.p_min and self.dp == other.dp)

    def negative_volume(self) -> float:
        """Integrated magnitude of the genuinely negative part."""
        neg = self.values[self.values < -NEGATIVITY_TOL]
        return float(-neg.sum() * self.cell())

    def index_of(self, x: float, p: float) -> tuple[int, int]:
        i = int(round((x - self.grid.x_min) / self.grid.dx))
        j = int(round((p - self.p_min) / self.dp))
        return i, j


def _half_step(amp: np.ndarray, axis: int = -1) -> np.ndarray:
    """Band-limited interpolation onto a grid of twice the density."""
    n = amp.shape[axis]
    spec = sfft.fft(amp, axis=axis)
    shape = list(amp.shape)
    shape[axis] = 2 * n
    padded = np.zeros(shape, dtype=np.complex128)

    def sl(a, b):
        s = [slice(None)] * amp.ndim
        s[axis] = slice(a, b)
        return tuple(s)

    h = n // 2
    padded[sl(0, h)] = spec[sl(0, h)]
    padded[sl(2 * n - h + 1, 2 * n)] = spec[sl(h + 1, n)]
    # split the Nyquist bin symmetrically
    padded[sl(h, h + 1)] = 0.5 * spec[sl(h, h + 1)]
    padded[sl(2 * n - h, 2 * n - h + 1)] = 0.5 * spec[sl(h, h + 1)]
    return sfft.ifft(padded, axis=axis) * 2.0


def _chord_to_wigner(chord: np.ndarray, grid: GridSpec) -> np.ndarray:
    # chord[:, c] holds k = c - n/2, k = -n/2..n/2-1 (y = k*dx)
    n = grid.n
    chord[:, 0] = chord[:, 0].real  # unpaired k = -n/2 term: average with its periodic image
    s = sfft.ifft(sfft.ifftshift(chord, axes=1), axis=1) * n
    w = sfft.fftshift(s, axes=1)
    norm = grid.dx / (2.0 * math.pi * grid.hbar)
    # residual measured against the pure-state bound 1/(pi hbar)
    imag = float(np.max(np.abs(w.imag))) * norm * math.pi * grid.hbar if w.size else 0.0
    if imag > 1e-10:
        warnings.warn(f"Wigner transform has imaginary residual {imag:.2e} (relative to 1/(pi hbar))",
                      RuntimeWarning, stacklevel=3)
    return w.real * norm


def _empty_wigner(grid: GridSpec) -> np.ndarray:
    return np.empty((grid.n, grid.n), dtype=float)


def _wrap(grid: GridSpec, values: np.ndarray) -> WignerGrid:
    return WignerGrid(grid, grid.n, float(grid.p[0]), grid.dp, values)


def wigner_of_psi(psi: WaveFunction) -> WignerGrid:
    """Wigner function of a pure state on the ``(x, p)`` grid of ``psi``.

    The chord product ``psi*(x+y/2) psi(x-y/2)`` is sampled at ``y = k dx``
    using band-limited half-step values, so there is no ``O(dx)`` phase bias.
    The chord is periodic; states must occupy less than half of the box.
    """
    g = psi.grid
    n = g.n
    amp2 = _half_step(psi.amp)
    k = np.arange(-n // 2, n // 2)
    out = _empty_wigner(g)
    for i0 in range(0, n, _ROW_BLOCK):
        i = np.arange(i0, min(i0 + _ROW_BLOCK, n))[:, None]
        chord = np.conj(amp2[(2 * i + k) % (2 * n)]) * amp2[(2 * i - k) % (2 * n)]
        out[i0:i0 + len(i)] = _chord_to_wigner(chord, g)
    return _wrap(g, out)


def wigner_of_rho(rho: DensityMatrix) -> WignerGrid:
    """Wigner function of a density matrix, from ``rho(x - y/2, x + y/2)``."""
    g = rho.grid
    n = g.n
    r2 = _half_step(_half_step(rho.rho, axis=0), axis=1)
    k = np.arange(-n // 2, n // 2)
    out = _empty_wigner(g)
    for i0 in range(0, n, _ROW_BLOCK):
        i = np.arange(i0, min(i0 + _ROW_BLOCK, n))[:, None]
        chord = r2[(2 * i - k) % (2 * n), (2 * i + k) % (2 * n)]
        out[i0:i0 + len(i)] = _chord_to_wigner(chord, g)
    return _wrap(g, out)


def wigner(state: State) -> WignerGrid:
    if isinstance(state, WaveFunction):
        return wigner_of_psi(state)
    if isinstance(state, DensityMatrix):
        return wigner_of_rho(state)
    raise TypeError(f"cannot take the Wigner transform of {type(state).__name__}")


def moyal_overlap(w1: WignerGrid, w2: WignerGrid) -> float:
    """``2 pi hbar * sum W1 W2 dx dp``; equals ``|<a|b>|^2`` for pure states."""
    if not w1.same_axes(w2):
        raise GridMismatchError("Wigner grids differ")
    return 2.0 * math.pi * w1.hbar * float(np.sum(w1.values * w2.values)) * w1.cell()


# ---------------------------------------------------------------------------
# structure report


@dataclass(frozen=True)
class StructureReport:
    L: float
    P: float
    A: float
    a_sub: float
    n_states: float
    delta_x_min: float
    delta_p_min: float
    tile_area: float
    hbar: float
    t_hbar: Optional[float] = None
    t_r: Optional[float] = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def structure_report(state: State, lyapunov: Optional[float] = None, delta_p0: Optional[float] = None,
                     chi: Optional[float] = None) -> StructureReport:
    """Spreads, classical action and the derived sub-Planck scales of ``state``.

    ``L`` and ``P`` are standard deviations.  With ``lyapunov`` the report
    also carries ``t_r = ln(A/hbar)/lyapunov``; adding ``delta_p0`` (and
    optionally ``chi``, default 1) gives ``t_hbar = ln(delta_p0*chi/hbar)/lyapunov``.
    Times are ``None`` when the log argument does not exceed 1.
    """
    from .dynamics import saturation_time

    hbar = state.grid.hbar
    _, vx = position_moments(state)
    _, vp = momentum_moments(state)
    tiny = 1e-300
    if vx <= tiny or vp <= tiny:
        raise ValueError("state has zero spread; unphysical on this grid")
    L = math.sqrt(vx)
    P = math.sqrt(vp)
    A = L * P
    t_r = t_hbar = None
    if lyapunov is not None:
        t_r = saturation_time(lyapunov, A / hbar)
        if delta_p0 is not None:
            t_hbar = saturation_time(lyapunov, delta_p0 * (1.0 if chi is None else chi) / hbar)
    return StructureReport(
        L=L, P=P, A=A, a_sub=hbar**2 / A, n_states=A / (2.0 * math.pi * hbar),
        delta_x_min=hbar / P, delta_p_min=hbar / L, tile_area=(2.0 * math.pi * hbar) ** 2 / A,
        hbar=hbar, t_hbar=t_hbar, t_r=t_r,
    )


# ---------------------------------------------------------------------------
# overlap decay under displacement


@dataclass(frozen=True, eq=False)
class DecayCurve:
    """Overlap ``z`` sampled along a ray of displacements."""

    deltas: np.ndarray  # (m, 2): delta_x, delta_p
    z: np.ndarray       # (m,) complex
    s: np.ndarray       # (m,) distance along the ray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.z)

    def first_crossing(self, threshold: float = math.exp(-1)) -> Optional[float]:
        """Ray distance of the first drop below ``threshold`` (linear interpolation)."""
        m = self.magnitude
        below = np.nonzero(m <= threshold)[0]
        if below.size == 0:
            return None
        k = int(below[0])
        if k == 0:
            return float(self.s[0])
        s0, s1, m0, m1 = self.s[k - 1], self.s[k], m[k - 1], m[k]
        return float(s0 + (m0 - threshold) * (s1 - s0) / (m0 - m1))

    def first_minimum(self) -> Optional[int]:
        m = self.magnitude
        for k in range(1, len(m) - 1):
            if m[k] < m[k - 1] and m[k] <= m[k + 1]:
                return k
        return None

    def to_csv(self, path) -> None:
        from .io import write_curve_csv

        write_curve_csv(path, self)


@dataclass(frozen=True)
class CoherenceScale:
    delta: Optional[float]
    direction: tuple[float, float]
    threshold: float
    curve: DecayCurve = field(repr=False)
    first_zero: Optional[float] = None
    first_zero_value: Optional[float] = None

    @property
    def crossed(self) -> bool:
        return self.delta is not None

    @property
    def displacement(self) -> Optional[Displacement]:
        if self.delta is None:
            return None
        return Displacement(self.delta * self.direction[0], self.delta * self.direction[1])


def _unit(direction: Sequence[float]) -> tuple[float, float]:
    u = np.asarray(direction, dtype=float)
    nrm = float(np.hypot(u[0], u[1]))
    if u.shape != (2,) or nrm == 0 or not np.isfinite(nrm):
        raise ValueError(f"direction must be a non-zero 2-vector, got {direction!r}")
    return float(u[0] / nrm), float(u[1] / nrm)


def ray_limit(grid: GridSpec, u: tuple[float, float]) -> float:
    """Largest ray distance keeping the shift within half the grid in x and p."""
    lim = math.inf
    if u[0]:
        lim = min(lim, 0.5 * grid.extent / abs(u[0]))
    if u[1]:
        lim = min(lim, grid.p_max / abs(u[1]))
    return lim


def coherence_scale(psi: WaveFunction, direction: Sequence[float] = (0.0, 1.0),
                    threshold: float = math.exp(-1), step: Optional[float] = None,
                    max_magnitude: Optional[float] = None, find_first_zero: bool = False) -> CoherenceScale:
    """Smallest shift along ``direction`` with ``|<psi|D psi>| <= threshold``.

    The ray is scanned in steps of ``step`` until the overlap drops below
    ``threshold``.  The default step is ``min(dx, dp)``, reduced to a quarter
    of ``hbar/sigma`` where ``sigma`` is the state's spread conjugate to the
    shift direction, so that the overlap cannot oscillate between samples.  The
    crossing is then refined by bracketed root finding to better than
    ``min(dx, dp)/4``.  With
    ``find_first_zero`` the scan continues to the first local minimum of the
    overlap, refined by bounded minimization.  If no crossing occurs within
    half the grid, ``delta`` is ``None``.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    g = psi.grid
    u = _unit(direction)
    res = min(g.dx, g.dp) / 4.0
    if step is None:
        _, vx = position_moments(psi)
        _, vp = momentum_moments(psi)
        sigma = math.sqrt(u[1] ** 2 * vx + u[0] ** 2 * vp)
        step = min(g.dx, g.dp, 0.25 * g.hbar / sigma)
    step = float(step)
    s_max = ray_limit(g, u) if max_magnitude is None else float(max_magnitude)

    def overlap(s: float) -> complex:
        return inner(psi, displace(psi, Displacement(s * u[0], s * u[1])))

    ss, zs = [0.0], [inner(psi, psi)]
    crossing = None
    s = 0.0
    while s + step <= s_max:
        s += step
        z = overlap(s)
        ss.append(s)
        zs.append(z)
        if crossing is None and abs(z) <= threshold:
            lo, hi = ss[-2], s
            crossing = optimize.brentq(lambda t: abs(overlap(t)) - threshold, lo, hi, xtol=res * 1e-3)
            if not find_first_zero:
                break
        if find_first_zero and crossing is not None and len(zs) >= 3 and abs(zs[-2]) < abs(zs[-3]) \
                and abs(zs[-2]) <= abs(zs[-1]):
            break
    curve = DecayCurve(np.array([(t * u[0], t * u[1]) for t in ss]), np.array(zs), np.array(ss))
    fz = fz_val = None
    if find_first_zero:
        k = curve.first_minimum()
        if k is not None:
            r = optimize.minimize_scalar(lambda t: abs(overlap(t)), bounds=(ss[k - 1], ss[k + 1]),
                                         method="bounded", options={"xatol": res * 1e-2})
            fz, fz_val = float(r.x), float(r.fun)
    return CoherenceScale(None if crossing is None else float(crossing), u, threshold, curve, fz, fz_val)


# ---------------------------------------------------------------------------
# ripple frequency


@dataclass(frozen=True)
class RippleFrequency:
    frequency: float  # angular, radians per unit of the slice coordinate
    bin_width: float


def _slice(w: WignerGrid, axis: str, at: float) -> tuple[np.ndarray, np.ndarray]:
    if axis == "p":
        i = int(round((at - w.grid.x_min) / w.grid.dx))
        return w.p, w.values[i % w.grid.n, :]
    if axis == "x":
        j = int(round((at - w.p_min) / w.dp))
        return w.x, w.values[:, j % w.n_p]
    raise ValueError(f"axis must be 'x' or 'p', got {axis!r}")


def ripple_frequency(w: WignerGrid, axis: str, at: float = 0.0,
                     window: Optional[tuple[float, float]] = None,
                     rel_threshold: float = 1e-3) -> Optional[RippleFrequency]:
    """Dominant non-zero angular frequency of the slice of ``w`` along ``axis``.

    ``at`` is the transverse coordinate.  ``window`` restricts the slice to an
    interval of the slice coordinate.  Returns ``None`` when the spectrum has
    no local maximum away from zero frequency above ``rel_threshold`` of the
    spectral peak.
    """
    coord, vals = _slice(w, axis, at)
    if window is not None:
        keep = (coord >= window[0]) & (coord <= window[1])
        coord, vals = coord[keep], vals[keep]
    m = len(vals)
    if m < 8:
        raise ValueError("slice too short")
    h = coord[1] - coord[0]
    spec = np.abs(np.fft.rfft(vals))
    omega = 2.0 * math.pi * np.fft.rfftfreq(m, h)
    bin_width = float(omega[1])
    top = spec.max()
    peaks = [k for k in range(1, len(spec) - 1)
             if spec[k] > spec[k - 1] and spec[k] >= spec[k + 1] and spec[k] > rel_threshold * top]
    if not peaks:
        return None
    k = max(peaks, key=lambda q: spec[q])
    # parabolic refinement on the log spectrum
    a, b, c = np.log(spec[k - 1:k + 2] + 1e-300)
    den = a - 2 * b + c
    off = 0.5 * (a - c) / den if den != 0 else 0.0
    return RippleFrequency(float(omega[k] + off * bin_width), bin_width)


# ---------------------------------------------------------------------------
# spectral slices and tile measurement


def _self_convolution(f: np.ndarray, origin: float, step: float, refine: int) -> tuple[np.ndarray, np.ndarray]:
    # c(y) = sum_u conj(f(u)) f(y - u) step, linear (zero padded), returned at y/2
    n = len(f)
    spec = sfft.fft(np.conj(f), 2 * n) * sfft.fft(f, 2 * n)
    if refine > 1:
        m = 2 * n * refine
        padded = np.zeros(m, dtype=np.complex128)
        padded[:n] = spec[:n]
        padded[m - n + 1:] = spec[n + 1:]
        padded[n] = 0.5 * spec[n]
        padded[m - n] = 0.5 * spec[n]
        c = sfft.ifft(padded) * refine
    else:
        c = sfft.ifft(spec)
    y = 2.0 * origin + step * np.arange(len(c)) / refine
    return 0.5 * y, c * step


def wigner_slice(psi: WaveFunction, p: Optional[float] = None, x: Optional[float] = None,
                 refine: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Wigner values along one line, evaluated directly from ``psi``.

    Give exactly one of ``p`` (returns ``W(x, p)`` over x) or ``x`` (returns
    ``W(x, p)`` over p).  The slice is a self-convolution of the phase-
    modulated amplitude, sampled at half the grid spacing and refined
    ``refine``-fold by band-limited interpolation.  Independent of
    :func:`wigner_of_psi`.
    """
    g = psi.grid
    if (p is None) == (x is None):
        raise ValueError("give exactly one of p or x")
    if p is not None:
        f = psi.amp * np.exp(-1j * p * g.x / g.hbar)
        coord, c = _self_convolution(f, g.x_min, g.dx, refine)
    else:
        f = to_momentum(psi) * np.exp(1j * x * g.p / g.hbar)
        coord, c = _self_convolution(f, float(g.p[0]), g.dp, refine)
    return coord, c.real / (math.pi * g.hbar)


@dataclass(frozen=True)
class TileMeasurement:
    period_x: float
    period_p: float

    @property
    def area(self) -> float:
        return self.period_x * self.period_p


def _crossings(coord: np.ndarray, vals: np.ndarray) -> np.ndarray:
    s = np.sign(vals)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    c0, c1, v0, v1 = coord[idx], coord[idx + 1], vals[idx], vals[idx + 1]
    return c0 - v0 * (c1 - c0) / (v1 - v0)


def _period_from_crossings(roots: np.ndarray) -> list[float]:
    # crossings come in pairs per period; every-other spacing is one period
    if len(roots) < 3:
        return []
    return list(roots[2:] - roots[:-2])


def _periodic_refine(vals: np.ndarray, coord: np.ndarray, refine: int) -> tuple[np.ndarray, np.ndarray]:
    fine = signal.resample(vals, len(vals) * refine)
    h = (coord[1] - coord[0]) / refine
    return coord[0] + h * np.arange(len(fine)), fine


def tile_area(source: Union[WaveFunction, WignerGrid], window: tuple[float, float],
              center: tuple[float, float] = (0.0, 0.0), n_slices: int = 7, refine: int = 8) -> TileMeasurement:
    """Measure the periodic cell of the interference pattern around ``center``.

    Zero crossings are located on ``n_slices`` lines parallel to each axis
    within ``center +- window`` (half-widths in x and p).  Along any line the
    crossings of a checkerboard come in pairs, so the spacing between every
    other crossing is one period; the median over all lines is reported.
    ``source`` may be a wavefunction (slices evaluated directly) or a
    :class:`WignerGrid` (slices refined by band-limited interpolation).
    """
    wx, wp = window
    xc, pc = center
    offs_p = pc + np.linspace(-wp / 3.0, wp / 3.0, n_slices)
    offs_x = xc + np.linspace(-wx / 3.0, wx / 3.0, n_slices)
    px_periods: list[float] = []
    pp_periods: list[float] = []
    for q in offs_p:
        if isinstance(source, WignerGrid):
            coord, vals = _slice(source, "x", q)
            coord, vals = _periodic_refine(vals, coord, refine)
        else:
            coord, vals = wigner_slice(source, p=q, refine=refine)
        keep = np.abs(coord - xc) <= wx
        px_periods += _period_from_crossings(_crossings(coord[keep], vals[keep]))
    for q in offs_x:
        if isinstance(source, WignerGrid):
            coord, vals = _slice(source, "p", q)
            coord, vals = _periodic_refine(vals, coord, refine)
        else:
            coord, vals = wigner_slice(source, x=q, refine=refine)
        keep = np.abs(coord - pc) <= wp
        pp_periods += _period_from_crossings(_crossings(coord[keep], vals[keep]))
    if not px_periods or not pp_periods:
        raise ValueError("no interference crossings found inside the window")
    return TileMeasurement(float(np.median(px_periods)), float(np.median(pp_periods)))
