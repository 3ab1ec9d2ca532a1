"""Spectral discretisation and split-step time stepping.

Two grids are supported:

* ``TorusGrid1D`` -- periodic grid on [-L, L) with the FFT.
* ``RadialGrid3D`` -- radial functions on R^3 stored as ``v = r u`` on the
  interior nodes of [0, R_max] with homogeneous Dirichlet conditions, so the
  radial Laplacian becomes ``v''`` and is diagonalised by the type-I DST.

The linear flow follows the convention ``exp(i s Delta) = F^-1 exp(-i s xi^2) F``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import fft as sfft

from .dispersion_map import DispersionMap, big_gamma

__all__ = [
    "TorusGrid1D",
    "RadialGrid3D",
    "ComplexField",
    "SplitStepConfig",
    "EvolveResult",
    "FieldNorms",
    "DispersionDiscontinuityError",
    "linear_propagate",
    "nonlinear_phase",
    "strang_step",
    "evolve",
    "collect",
    "zoom_radial",
    "norms",
    "lebesgue_norm",
    "spacetime_norm",
    "is_schrodinger_admissible",
]

FOUR_PI = 4.0 * math.pi


class DispersionDiscontinuityError(ValueError):
    pass


@dataclass(frozen=True)
class TorusGrid1D:
    half_length: float
    points: int
    kind: str = field(default="torus", init=False)

    def __post_init__(self):
        m = self.points
        if m < 8 or m & (m - 1):
            raise ValueError("torus grid needs a power-of-two number of points >= 8")
        if not self.half_length > 0:
            raise ValueError("half_length must be positive")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.points

    @property
    def weight(self) -> float:
        return self.dx

    @property
    def nodes(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.points)

    x = nodes

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.dx)

    @property
    def kinetic(self) -> np.ndarray:
        return self.wavenumbers**2

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        return sfft.fft(values, axis=-1)

    def from_spectral(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.ifft(coeffs, axis=-1)

    def derivative(self, values: np.ndarray) -> np.ndarray:
        return sfft.ifft(1j * self.wavenumbers * sfft.fft(values, axis=-1), axis=-1)

    def to_physical(self, values: np.ndarray) -> np.ndarray:
        return values

    def from_physical(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=complex)

    @property
    def n_values(self) -> int:
        return self.points

    @property
    def extent(self) -> float:
        return self.half_length


@dataclass(frozen=True)
class RadialGrid3D:
    r_max: float
    points: int
    kind: str = field(default="radial", init=False)

    def __post_init__(self):
        if self.points < 8:
            raise ValueError("radial grid needs at least 8 points")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")

    @property
    def dr(self) -> float:
        return self.r_max / self.points

    @property
    def weight(self) -> float:
        return FOUR_PI * self.dr

    @property
    def nodes(self) -> np.ndarray:
        return self.dr * np.arange(1, self.points)

    r = nodes

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.pi * np.arange(1, self.points) / self.r_max

    @property
    def kinetic(self) -> np.ndarray:
        return self.wavenumbers**2

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        return sfft.dst(values, type=1, norm="ortho", axis=-1)

    from_spectral = to_spectral  # orthonormal DST-I is an involution

    def derivative(self, values: np.ndarray) -> np.ndarray:
        """d/dr of ``v`` at the interior nodes via the cosine series."""
        coeffs = self.to_spectral(values) * self.wavenumbers
        pad = np.zeros(values.shape[:-1] + (self.points + 1,), dtype=coeffs.dtype)
        pad[..., 1:-1] = coeffs
        out = sfft.dct(pad, type=1, axis=-1)[..., 1:-1]
        return out * math.sqrt(2.0 / self.points) / 2.0

    def origin_value(self, values: np.ndarray):
        """u(0) = v'(0)."""
        coeffs = self.to_spectral(values)
        return math.sqrt(2.0 / self.points) * np.sum(coeffs * self.wavenumbers, axis=-1)

    def to_physical(self, values: np.ndarray) -> np.ndarray:
        return values / self.nodes

    def from_physical(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=complex) * self.nodes

    @property
    def n_values(self) -> int:
        return self.points - 1

    @property
    def extent(self) -> float:
        return self.r_max


Grid = TorusGrid1D | RadialGrid3D


@dataclass(frozen=True)
class ComplexField:
    """Discrete field; ``values`` holds u on the torus and v = r u on the radial grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.n_values,):
            raise ValueError(f"field has {vals.shape} values, grid expects {self.grid.n_values}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_u(cls, grid: Grid, u) -> "ComplexField":
        return cls(grid, grid.from_physical(np.broadcast_to(u, (grid.n_values,))))

    @classmethod
    def from_function(cls, grid: Grid, f: Callable[[np.ndarray], np.ndarray]) -> "ComplexField":
        return cls.from_u(grid, f(grid.nodes))

    @classmethod
    def zeros(cls, grid: Grid) -> "ComplexField":
        return cls(grid, np.zeros(grid.n_values, dtype=complex))

    @property
    def u(self) -> np.ndarray:
        return self.grid.to_physical(self.values)

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def with_values(self, values: np.ndarray) -> "ComplexField":
        return ComplexField(self.grid, values)

    def __mul__(self, c) -> "ComplexField":
        return ComplexField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other: "ComplexField") -> "ComplexField":
        _same_grid(self, other)
        return ComplexField(self.grid, self.values + other.values)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        _same_grid(self, other)
        return ComplexField(self.grid, self.values - other.values)


def _same_grid(a: ComplexField, b: ComplexField) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


# ---------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class FieldNorms:
    mass: float
    grad_sq: float
    l4_quartic: float
    sup: float
    h1: float


def norms(field: ComplexField) -> FieldNorms:
    """Mass, |grad u|_2^2, |u|_4^4, sup |u| and the H^1 norm.

    The gradient term is computed spectrally; on the radial grid it uses
    int |grad u|^2 = 4 pi int |v'|^2 dr, valid because v(0) = 0.
    """
    grid, vals = field.grid, field.values
    coeffs = grid.to_spectral(vals)
    if grid.kind == "torus":
        mass = grid.dx * np.sum(np.abs(vals) ** 2)
        grad = grid.dx / grid.points * np.sum(grid.kinetic * np.abs(coeffs) ** 2)
        quartic = grid.dx * np.sum(np.abs(vals) ** 4)
        sup = np.max(np.abs(vals))
    else:
        mass = grid.weight * np.sum(np.abs(vals) ** 2)
        grad = grid.weight * np.sum(grid.kinetic * np.abs(coeffs) ** 2)
        u_abs = np.abs(vals) / grid.nodes
        quartic = grid.weight * np.sum(grid.nodes**2 * u_abs**4)
        sup = np.max(u_abs)
    return FieldNorms(
        mass=float(mass),
        grad_sq=float(grad),
        l4_quartic=float(quartic),
        sup=float(sup),
        h1=float(math.sqrt(mass + grad)),
    )


def lebesgue_norm(field: ComplexField, r: float) -> float:
    """Spatial L^r norm of u."""
    u_abs = np.abs(field.u)
    if math.isinf(r):
        return float(np.max(u_abs))
    grid = field.grid
    if grid.kind == "torus":
        integral = grid.dx * np.sum(u_abs**r)
    else:
        integral = grid.weight * np.sum(grid.nodes**2 * u_abs**r)
    return float(integral ** (1.0 / r))


def is_schrodinger_admissible(d: int, q: float, r: float, tol: float = 1e-12) -> tuple[bool, str]:
    """2/q + d/r = d/2 with 2 <= q, r <= inf, excluding (d, q, r) = (2, 2, inf)."""
    if not (2 <= q and 2 <= r):
        return False, "exponents must be at least 2"
    if d == 2 and q == 2 and math.isinf(r):
        return False, "forbidden endpoint (d, q, r) = (2, 2, inf)"
    lhs = (0.0 if math.isinf(q) else 2.0 / q) + (0.0 if math.isinf(r) else d / r)
    if abs(lhs - d / 2.0) > tol:
        return False, f"2/q + d/r = {lhs:.12g} != d/2 = {d / 2}"
    return True, "admissible"


def spacetime_norm(snapshots: Sequence[tuple[float, ComplexField]], q: float, r: float) -> float:
    """L^q_t L^r_x norm over the sampled window (trapezoidal in t)."""
    if not snapshots:
        raise ValueError("no snapshots")
    times = np.array([t for t, _ in snapshots], dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("snapshots must be time-ordered")
    spatial = np.array([lebesgue_norm(f, r) for _, f in snapshots])
    if math.isinf(q):
        return float(spatial.max())
    if len(snapshots) < 2:
        raise ValueError("need at least 2 snapshots for finite q")
    return float(np.trapezoid(spatial**q, times) ** (1.0 / q))


# ---------------------------------------------------------------------------
# propagators


def linear_propagate(field: ComplexField, dgamma: float) -> ComplexField:
    """Apply exp(i dgamma Delta)."""
    grid = field.grid
    if dgamma == 0:
        return field
    coeffs = grid.to_spectral(field.values) * np.exp(-1j * dgamma * grid.kinetic)
    return field.with_values(grid.from_spectral(coeffs))


def nonlinear_phase(field: ComplexField, h: float, p: int = 2) -> ComplexField:
    """Exact flow of i u_t + |u|^p u = 0 over time h: u -> u exp(i h |u|^p)."""
    if h == 0:
        return field
    amp = np.abs(field.u)
    return field.with_values(field.values * np.exp(1j * h * amp**p))


def _check_no_jump(gmap: DispersionMap, t: float, h: float) -> None:
    eps = 1e-12 * max(1.0, abs(t) + abs(h))
    if len(gmap.jump_times(t + eps, t + h - eps)):
        raise DispersionDiscontinuityError("step crosses dispersion discontinuity")


def strang_step(
    field: ComplexField,
    t: float,
    h: float,
    gmap: DispersionMap,
    p: int = 2,
    nonlinear: bool = True,
) -> ComplexField:
    """One Strang step N(h/2) L(Gamma(t+h, t)) N(h/2); must not cross a jump of gamma."""
    if not h > 0:
        raise ValueError("step size must be positive")
    _check_no_jump(gmap, t, h)
    dgamma = big_gamma(gmap, t + h, t)
    if not nonlinear:
        return linear_propagate(field, dgamma)
    out = nonlinear_phase(field, 0.5 * h, p)
    out = linear_propagate(out, dgamma)
    return nonlinear_phase(out, 0.5 * h, p)


# ---------------------------------------------------------------------------
# evolution


@dataclass(frozen=True)
class SplitStepConfig:
    """Time-stepping controls.

    Blowup thresholds are multiples of the initial sup and H^1 norms.
    ``phase_cfl`` (optional) caps the step so that h * max|u|^p <= phase_cfl.
    ``zoom_points`` (radial grids only) halves the domain whenever the
    half-maximum radius of |u| drops below that many grid spacings; the outer
    fifth of the domain then acts as a sponge.
    """

    dt_max: float
    blowup_sup_threshold: float = 1e6
    blowup_h1_threshold: float = 1e3
    snapshot_stride: int = 1
    power: int = 2
    nonlinear: bool = True
    phase_cfl: float | None = None
    zoom_points: int | None = None
    sponge_rate: float = 2e4
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if not (self.blowup_sup_threshold > 1 and self.blowup_h1_threshold > 1):
            raise ValueError("blowup thresholds must exceed 1")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be a positive integer")


@dataclass
class EvolveResult:
    status: Literal["completed", "blowup_detected"]
    t_final: float
    field: ComplexField
    steps: int
    t_star: float | None = None
    reason: str | None = None
    zooms: int = 0
    initial_norms: FieldNorms | None = None
    final_norms: FieldNorms | None = None

    @property
    def blowup(self) -> bool:
        return self.status == "blowup_detected"


def _half_max_radius(field: ComplexField) -> float:
    u_abs = np.abs(field.u)
    top = u_abs.max()
    below = np.nonzero(u_abs < 0.5 * top)[0]
    return float(field.grid.nodes[below[0]]) if len(below) else field.grid.r_max


def zoom_radial(field: ComplexField) -> ComplexField:
    """Restrict a radial field to [0, R_max/2] on a grid with the same point count.

    Values come from the sine series evaluated at the refined nodes, and a
    cosine taper over the outer 30% of the new domain restores v(R_max/2) = 0.
    """
    grid = field.grid
    m = grid.points
    coeffs = grid.to_spectral(field.values)
    pad = np.zeros(2 * m - 1, dtype=complex)
    pad[: m - 1] = coeffs
    fine = sfft.dst(pad, type=1, norm="ortho") * math.sqrt(2.0)
    new_grid = RadialGrid3D(grid.r_max / 2.0, m)
    s = np.clip((new_grid.nodes / new_grid.r_max - 0.7) / 0.3, 0.0, 1.0)
    taper = np.cos(0.5 * np.pi * s) ** 2
    return ComplexField(new_grid, fine[: m - 1] * taper)


def _sponge(field: ComplexField, h: float, strength: float) -> ComplexField:
    grid = field.grid
    s = np.clip((grid.nodes / grid.r_max - 0.8) / 0.2, 0.0, 1.0)
    rate = strength / grid.r_max**2
    return field.with_values(field.values * np.exp(-rate * h * s**2))


def evolve(
    u0: ComplexField,
    t0: float,
    t1: float,
    gmap: DispersionMap,
    cfg: SplitStepConfig,
    observer: Callable[[float, ComplexField], None] | None = None,
) -> EvolveResult:
    """Advance ``u0`` from ``t0`` to ``t1`` with segment-aware Strang steps.

    Each step lies inside one constant segment of gamma; within a segment
    steps are uniform unless ``phase_cfl`` forces them smaller.  The observer
    sees the initial field, every ``snapshot_stride``-th step, and the last
    field.  A non-finite value or a norm exceeding its threshold stops the
    run with ``status="blowup_detected"`` and ``t_star`` at the midpoint of
    the step that tripped it.
    """
    if not t1 > t0:
        raise ValueError("invalid time interval: need t1 > t0")
    if not u0.is_finite:
        raise ValueError("initial field is not finite")
    zoom = cfg.zoom_points is not None and u0.grid.kind == "radial"
    field = u0
    n0 = norms(u0)
    sup_limit = cfg.blowup_sup_threshold * n0.sup if n0.sup > 0 else math.inf
    h1_limit = cfg.blowup_h1_threshold * n0.h1 if n0.h1 > 0 else math.inf
    cutoff = [t0, *gmap.jump_times(t0, t1), t1]
    sponge_strength = cfg.sponge_rate * gmap.sup_norm

    if observer is not None:
        observer(t0, field)
    t = t0
    steps = 0
    zooms = 0
    last_observed = 0
    for seg_end in cutoff[1:]:
        while t < seg_end:
            remaining = seg_end - t
            cap = cfg.dt_max
            if cfg.phase_cfl is not None and cfg.nonlinear:
                peak = np.max(np.abs(field.u)) ** cfg.power
                if peak > 0:
                    cap = min(cap, cfg.phase_cfl / peak)
            n_sub = max(1, math.ceil(remaining / cap - 1e-9))
            h = remaining / n_sub
            field = strang_step(field, t, h, gmap, cfg.power, cfg.nonlinear)
            if zoom:
                field = _sponge(field, h, sponge_strength)
            t_prev = t
            t = seg_end if n_sub == 1 else t + h
            steps += 1

            reason = None
            if not field.is_finite:
                reason = "non-finite value"
            elif cfg.nonlinear:
                cur = norms(field)
                if cur.sup > sup_limit:
                    reason = "sup-norm threshold"
                elif cur.h1 > h1_limit:
                    reason = "H1 threshold"
            if reason is not None:
                if observer is not None and field.is_finite:
                    observer(t, field)
                return EvolveResult(
                    "blowup_detected", t, field, steps,
                    t_star=0.5 * (t_prev + t), reason=reason, zooms=zooms,
                    initial_norms=n0,
                    final_norms=norms(field) if field.is_finite else None,
                )
            if zoom and _half_max_radius(field) < cfg.zoom_points * field.grid.dr:
                field = zoom_radial(field)
                zooms += 1
            if observer is not None and steps % cfg.snapshot_stride == 0:
                observer(t, field)
                last_observed = steps
            if steps >= cfg.max_steps:
                raise RuntimeError(f"step budget of {cfg.max_steps} exhausted at t={t}")
    if observer is not None and last_observed != steps:
        observer(t, field)
    return EvolveResult("completed", t, field, steps, zooms=zooms, initial_norms=n0,
                        final_norms=norms(field))


def collect(u0: ComplexField, t0: float, t1: float, gmap: DispersionMap, cfg: SplitStepConfig):
    """Run ``evolve`` and return ``(result, [(t, field), ...])``."""
    snaps: list[tuple[float, ComplexField]] = []
    res = evolve(u0, t0, t1, gmap, cfg, observer=lambda t, f: snaps.append((t, f)))
    return res, snaps


def with_nonlinearity(cfg: SplitStepConfig, on: bool) -> SplitStepConfig:
    return replace(cfg, nonlinear=on)
