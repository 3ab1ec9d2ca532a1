"""Cubic ground state in three dimensions.

Q is the positive, radial, decreasing solution of Q'' + (2/r) Q' - Q + Q^3 = 0.
The primary solver shoots on Q(0) with bisection; an independent
Petviashvili iteration on a sine grid serves as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import fft as sfft
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline

from .spectral_engine import ComplexField, RadialGrid3D

__all__ = [
    "GroundStateProfile",
    "GroundStateError",
    "solve_Q",
    "solve_Q_petviashvili",
    "rescale_to_Rplus",
    "gn_constant",
    "pohozaev_residuals",
    "save_profile_csv",
    "load_profile_csv",
    "cached_ground_state",
]

FOUR_PI = 4.0 * math.pi
PEAK_BRACKET = (0.1, 100.0)
R_START = 1e-4
R_MATCH = 8.0


class GroundStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class GroundStateProfile:
    """Radial samples of Q (gamma_scale = 1) or of R_+(x) = Q(x / sqrt(gamma_+)).

    ``r[0] == 0`` and ``values[0] == peak``.  Beyond the last sample the
    profile continues with its exponential tail A exp(-r/l) / r, l = sqrt(gamma_scale).
    """

    r: np.ndarray
    values: np.ndarray
    gamma_scale: float
    mass: float
    grad_sq: float
    quartic: float

    @property
    def peak(self) -> float:
        return float(self.values[0])

    @property
    def decay_length(self) -> float:
        return math.sqrt(self.gamma_scale)

    def __call__(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        spline = CubicSpline(self.r, self.values, bc_type=((1, 0.0), "not-a-knot"))
        out = np.empty_like(r)
        inside = r <= self.r[-1]
        out[inside] = spline(r[inside])
        r_end, q_end = self.r[-1], self.values[-1]
        rt = r[~inside]
        out[~inside] = q_end * (r_end / rt) * np.exp(-(rt - r_end) / self.decay_length)
        return out

    def sample(self, grid: RadialGrid3D, amplitude: float = 1.0, scale: float = 1.0) -> ComplexField:
        """Field ``amplitude * scale * R(scale * r)`` on ``grid``."""
        u = amplitude * scale * self(scale * grid.nodes)
        return ComplexField.from_u(grid, u)

    def scaled(self, amplitude: float) -> "GroundStateProfile":
        """Pointwise multiple of the profile (norms updated; no longer a solution)."""
        a2 = amplitude * amplitude
        return replace(
            self,
            values=self.values * amplitude,
            mass=self.mass * a2,
            grad_sq=self.grad_sq * a2,
            quartic=self.quartic * a2 * a2,
        )

    @property
    def energy_plus(self) -> float:
        """E_+ = (gamma/2) |grad R|^2 - (1/4) |R|_4^4 with gamma = gamma_scale."""
        return 0.5 * self.gamma_scale * self.grad_sq - 0.25 * self.quartic


# ---------------------------------------------------------------------------
# shooting


def _rhs(r, y):
    q, dq = y[0], y[1]
    w = FOUR_PI * r * r
    return [dq, q - q**3 - 2.0 * dq / r, w * q * q, w * dq * dq, w * q**4]


def _start(a: float):
    c = (a - a**3) / 6.0
    r0 = R_START
    # series Q = a + c r^2 + O(r^4) on the small ball [0, r0]
    ball = [
        FOUR_PI * a * a * r0**3 / 3.0,
        FOUR_PI * 4.0 * c * c * r0**5 / 5.0,
        FOUR_PI * a**4 * r0**3 / 3.0,
    ]
    return r0, [a + c * r0 * r0, 2.0 * c * r0, *ball]


def _crosses(r, y):
    return y[0]


_crosses.terminal = True
_crosses.direction = -1


def _turns(r, y):
    return y[1]


_turns.terminal = True
_turns.direction = 1


def _shoot(a: float, r_end: float, dense: bool = False):
    r0, y0 = _start(a)
    return solve_ivp(
        _rhs, (r0, r_end), y0, method="DOP853", rtol=1e-13, atol=1e-16,
        events=[_crosses, _turns], dense_output=dense,
    )


def _overshoots(a: float, r_end: float) -> bool:
    return len(_shoot(a, r_end).t_events[0]) > 0


def solve_Q(tol: float = 1e-8, r_max: float = 20.0, nodes: int = 4001) -> GroundStateProfile:
    """Ground state by shooting on the peak value Q(0).

    Peaks whose trajectory crosses zero are too large, those that turn back
    up while positive are too small; bisection runs to machine precision.
    The trajectory is trusted up to r = 8 and continued by the exact
    decaying solution A e^{-r}/r of the linearised equation.  ``tol`` is the
    acceptance bound on the normalised Pohozaev residuals.
    """
    if not 0 < tol <= 1e-4:
        raise ValueError("tol must lie in (0, 1e-4]")
    if r_max < 10:
        raise ValueError("r_max must be at least 10")
    lo, hi = PEAK_BRACKET
    if _overshoots(lo, r_max) or not _overshoots(hi, r_max):
        raise GroundStateError(f"bisection bracket not found in {PEAK_BRACKET}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _overshoots(mid, r_max):
            hi = mid
        else:
            lo = mid

    sol = _shoot(lo, R_MATCH, dense=True)
    if sol.t[-1] < R_MATCH:
        raise GroundStateError("trajectory left the positive branch before the matching radius")
    upper = _shoot(hi, R_MATCH, dense=False)
    q_m, dq_m, m_in, g_in, p_in = sol.y[:, -1]
    if abs(upper.y[0, -1] - q_m) > 1e-6 * q_m:
        raise GroundStateError("shooting did not resolve the profile out to the matching radius")

    amp = q_m * R_MATCH * math.exp(R_MATCH)
    tail = lambda f: quad(f, R_MATCH, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    mass = m_in + 2.0 * math.pi * amp * amp * math.exp(-2.0 * R_MATCH)
    grad = g_in + tail(lambda r: FOUR_PI * amp**2 * math.exp(-2 * r) * (1 + 1 / r) ** 2)
    quartic = p_in + tail(lambda r: FOUR_PI * amp**4 * math.exp(-4 * r) / r**2)

    r = np.linspace(0.0, r_max, nodes)
    values = np.empty_like(r)
    a, c = lo, (lo - lo**3) / 6.0
    ball = r < R_START
    values[ball] = a + c * r[ball] ** 2
    mid_r = (r >= R_START) & (r <= R_MATCH)
    values[mid_r] = sol.sol(r[mid_r])[0]
    far = r > R_MATCH
    values[far] = amp * np.exp(-r[far]) / r[far]

    if np.any(values <= 0) or np.any(np.diff(values) > 0):
        raise GroundStateError("profile is not positive and decreasing (not the nodeless state)")
    prof = GroundStateProfile(r, values, 1.0, float(mass), float(grad), float(quartic))
    res = pohozaev_residuals(prof)
    if max(abs(x) for x in res) > tol:
        raise GroundStateError(f"Pohozaev residuals {res} exceed tolerance {tol}")
    return prof


# ---------------------------------------------------------------------------
# Petviashvili oracle


@dataclass(frozen=True)
class PetviashviliResult:
    peak: float
    mass: float
    grad_sq: float
    quartic: float
    iterations: int
    field: ComplexField


def solve_Q_petviashvili(
    r_max: float = 30.0, points: int = 4096, tol: float = 1e-14, max_iter: int = 2000
) -> PetviashviliResult:
    """Fixed-point iteration (1 - Delta) Q = Q^3 with the Petviashvili stabiliser.

    Works on v = r Q with the sine transform; the stabilising factor is
    S^{3/2}, S = <v, (1 + k^2) v> / <v, N(v)>.
    """
    grid = RadialGrid3D(r_max, points)
    r, k2 = grid.nodes, grid.kinetic
    dst = lambda x: sfft.dst(x, type=1, norm="ortho")
    v = 3.0 * r * np.exp(-0.5 * r * r)
    for it in range(1, max_iter + 1):
        vh = dst(v)
        nh = dst(v**3 / r**2)
        s = np.sum((1.0 + k2) * vh * vh) / np.sum(vh * nh)
        v_new = dst(s**1.5 * nh / (1.0 + k2))
        done = np.max(np.abs(v_new - v)) < tol * np.max(np.abs(v))
        v = v_new
        if done:
            break
    else:
        raise GroundStateError("Petviashvili iteration did not converge")
    vh = dst(v)
    w = grid.weight
    field = ComplexField(grid, v.astype(complex))
    return PetviashviliResult(
        peak=float(grid.origin_value(v)),
        mass=float(w * np.sum(v * v)),
        grad_sq=float(w * np.sum(k2 * vh * vh)),
        quartic=float(w * np.sum(v**4 / r**2)),
        iterations=it,
        field=field,
    )


# ---------------------------------------------------------------------------


def rescale_to_Rplus(q: GroundStateProfile, gamma_plus: float) -> GroundStateProfile:
    """R_+(x) = Q(x / sqrt(gamma_+)), which solves -R + gamma_+ Delta R + R^3 = 0."""
    if q.gamma_scale != 1.0:
        raise ValueError("rescale_to_Rplus expects the gamma = 1 profile")
    if not gamma_plus > 0:
        raise ValueError("gamma_plus must be positive")
    s = math.sqrt(gamma_plus)
    return GroundStateProfile(
        r=q.r * s,
        values=q.values.copy(),
        gamma_scale=float(gamma_plus),
        mass=q.mass * s**3,
        grad_sq=q.grad_sq * s,
        quartic=q.quartic * s**3,
    )


def gn_constant(prof: GroundStateProfile) -> float:
    """Sharp Gagliardo-Nirenberg constant |R|_4^4 / (|R|_2 |grad R|_2^3)."""
    return prof.quartic / (math.sqrt(prof.mass) * prof.grad_sq**1.5)


def pohozaev_residuals(prof: GroundStateProfile) -> tuple[float, float]:
    m, g, p, gam = prof.mass, prof.grad_sq, prof.quartic, prof.gamma_scale
    first = (-m - gam * g + p) / m
    second = (1.5 * m + 0.5 * gam * g - 0.75 * p) / m
    return float(first), float(second)


# ---------------------------------------------------------------------------
# cache


HEADER_PREFIX = "# dmnls-groundstate v1"


def save_profile_csv(prof: GroundStateProfile, path: str | Path) -> Path:
    path = Path(path)
    f = lambda x: repr(float(x))
    header = (
        f"{HEADER_PREFIX}, gamma_scale={f(prof.gamma_scale)}, M={f(prof.mass)}, "
        f"G={f(prof.grad_sq)}, P={f(prof.quartic)}"
    )
    body = "\n".join(f"{f(r)},{f(q)}" for r, q in zip(prof.r, prof.values))
    path.write_text(header + "\n" + body + "\n")
    return path


def _parse_header(line: str) -> dict[str, float]:
    if not line.startswith(HEADER_PREFIX):
        raise ValueError("not a dmnls ground-state file")
    fields = {}
    for item in line[len(HEADER_PREFIX):].split(","):
        item = item.strip()
        if item:
            key, val = item.split("=")
            fields[key.strip()] = float(val)
    return fields


def load_profile_csv(path: str | Path) -> GroundStateProfile:
    lines = Path(path).read_text().splitlines()
    meta = _parse_header(lines[0])
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:] if ln.strip()])
    return GroundStateProfile(
        r=data[:, 0], values=data[:, 1], gamma_scale=meta["gamma_scale"],
        mass=meta["M"], grad_sq=meta["G"], quartic=meta["P"],
    )


def cached_ground_state(
    path: str | Path | None,
    gamma_plus: float = 1.0,
    tol: float = 1e-8,
    r_max: float = 20.0,
    nodes: int = 4001,
) -> GroundStateProfile:
    """R_+ for ``gamma_plus``, read from ``path`` when its header and grid match."""
    if path is not None and Path(path).exists():
        try:
            prof = load_profile_csv(path)
        except (ValueError, KeyError, IndexError):
            prof = None
        s = math.sqrt(gamma_plus)
        if (
            prof is not None
            and prof.gamma_scale == gamma_plus
            and len(prof.r) == nodes
            and math.isclose(prof.r[-1], r_max * s, rel_tol=1e-12)
        ):
            return prof
    prof = solve_Q(tol=tol, r_max=r_max, nodes=nodes)
    if gamma_plus != 1.0:
        prof = rescale_to_Rplus(prof, gamma_plus)
    if path is not None:
        save_profile_csv(prof, path)
    return prof
