"""One-periodic piecewise-constant dispersion maps.

A map is stored as one period of segments ``(duration, value)`` with the
durations summing to one.  The accumulated dispersion

    Gamma(t, s) = int_s^t gamma(tau) dtau

is evaluated in closed form (whole periods times the average plus a partial
segment sum), so nothing downstream carries quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

__all__ = [
    "DispersionMap",
    "InadmissibleMapError",
    "MonotonePartition",
    "CoverReport",
    "gamma_at",
    "average",
    "is_admissible",
    "big_gamma",
    "drift_deviation",
    "separation_time",
    "covering_bound",
    "strichartz_constant",
    "monotone_partition",
    "cover_intervals",
]

PERIOD_TOL = 1e-12
ZERO_AVERAGE_TOL = 1e-12

Direction = Literal["increasing", "decreasing"]


class InadmissibleMapError(ValueError):
    """Raised when an operation needs an admissible map and gets one that is not."""


@dataclass(frozen=True)
class DispersionMap:
    """One period of a piecewise-constant dispersion map.

    ``gamma(t)`` is right-continuous: on ``[b_i, b_{i+1})`` it takes the value
    of segment ``i``, where ``b_i`` are the cumulative durations.
    """

    segments: tuple[tuple[float, float], ...]
    period: float = field(default=1.0, init=False)

    def __init__(self, segments: Iterable[Sequence[float]]):
        segs = tuple((float(d), float(v)) for d, v in segments)
        if not segs:
            raise ValueError("dispersion map needs at least one segment")
        for d, v in segs:
            if not (math.isfinite(d) and d > 0):
                raise ValueError(f"segment duration must be positive and finite, got {d}")
            if not math.isfinite(v):
                raise ValueError(f"segment value must be finite, got {v}")
            if v == 0.0:
                raise ValueError("segment value must be nonzero (gamma^-1 must be bounded)")
        total = math.fsum(d for d, _ in segs)
        if abs(total - 1.0) > PERIOD_TOL:
            raise ValueError(f"segment durations must sum to 1, got {total!r}")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "period", 1.0)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def constant(cls, value: float) -> "DispersionMap":
        return cls([(1.0, value)])

    @classmethod
    def two_step(cls, gamma_plus: float, gamma_minus: float, t_plus: float) -> "DispersionMap":
        """gamma = gamma_plus on [0, t_plus) and -gamma_minus on [t_plus, 1)."""
        if not 0.0 < t_plus < 1.0:
            raise ValueError("t_plus must lie in (0, 1)")
        if gamma_plus <= 0 or gamma_minus <= 0:
            raise ValueError("gamma_plus and gamma_minus must be positive")
        return cls([(t_plus, gamma_plus), (1.0 - t_plus, -gamma_minus)])

    @classmethod
    def from_json(cls, obj: dict) -> "DispersionMap":
        if "segments" in obj:
            return cls(obj["segments"])
        keys = {"gamma_plus", "gamma_minus", "t_plus"}
        if keys <= obj.keys():
            return cls.two_step(obj["gamma_plus"], obj["gamma_minus"], obj["t_plus"])
        raise ValueError("map JSON needs 'segments' or gamma_plus/gamma_minus/t_plus")

    def to_json(self) -> dict:
        return {"segments": [[d, v] for d, v in self.segments]}

    # -- derived quantities ---------------------------------------------------

    @property
    def durations(self) -> np.ndarray:
        return np.array([d for d, _ in self.segments])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.segments])

    @property
    def breakpoints(self) -> np.ndarray:
        """Segment start offsets within one period, beginning with 0."""
        return np.concatenate([[0.0], np.cumsum(self.durations)[:-1]])

    @property
    def average(self) -> float:
        return math.fsum(d * v for d, v in self.segments)

    @property
    def sup_norm(self) -> float:
        return max(abs(v) for _, v in self.segments)

    @property
    def inv_sup_norm(self) -> float:
        return max(1.0 / abs(v) for _, v in self.segments)

    @property
    def n_discontinuities(self) -> int:
        """Jumps in one period, counting the wrap-around jump at t = 0."""
        vals = [v for _, v in self.segments]
        if len(vals) == 1:
            return 0
        return sum(1 for a, b in zip(vals, vals[1:] + vals[:1]) if a != b)

    def jump_times(self, t0: float, t1: float) -> np.ndarray:
        """Breakpoints of gamma strictly inside (t0, t1)."""
        bp = self.breakpoints
        first = math.floor(t0)
        last = math.floor(t1)
        times = (np.arange(first, last + 1)[:, None] + bp[None, :]).ravel()
        return times[(times > t0) & (times < t1)]

    def __call__(self, t):
        return gamma_at(self, t)


# ---------------------------------------------------------------------------


def _segment_index(gmap: DispersionMap, frac):
    return np.searchsorted(gmap.breakpoints, frac, side="right") - 1


def gamma_at(gmap: DispersionMap, t):
    """Value of gamma at ``t`` (scalar or array), right-continuous at breakpoints."""
    t = np.asarray(t, dtype=float)
    frac = t - np.floor(t)
    out = gmap.values[_segment_index(gmap, frac)]
    return float(out) if out.ndim == 0 else out


def average(gmap: DispersionMap) -> float:
    return gmap.average


def is_admissible(gmap: DispersionMap, tol: float = ZERO_AVERAGE_TOL) -> tuple[bool, str]:
    """Check the admissibility clauses in order; returns ``(ok, reason)``.

    Periodicity, bounded values, bounded inverse and finitely many jumps are
    enforced when the map is built, so only the average can fail here.
    """
    if not isinstance(gmap, DispersionMap):
        return False, "not a dispersion map"
    if abs(gmap.average) <= tol:
        return False, "zero average"
    return True, "admissible"


def _require_admissible(gmap: DispersionMap) -> None:
    ok, reason = is_admissible(gmap)
    if not ok:
        raise InadmissibleMapError(f"not admissible: {reason}")


def _primitive(gmap: DispersionMap, t):
    """Gamma(t, 0), vectorised."""
    t = np.asarray(t, dtype=float)
    whole = np.floor(t)
    frac = t - whole
    bp = gmap.breakpoints
    vals = gmap.values
    cum = np.concatenate([[0.0], np.cumsum(gmap.durations * vals)[:-1]])
    idx = np.searchsorted(bp, frac, side="right") - 1
    return whole * gmap.average + cum[idx] + vals[idx] * (frac - bp[idx])


def big_gamma(gmap: DispersionMap, t, s=0.0):
    """Accumulated dispersion Gamma(t, s) = int_s^t gamma."""
    out = _primitive(gmap, t) - _primitive(gmap, s)
    return float(out) if np.ndim(out) == 0 else out


def drift_deviation(gmap: DispersionMap, t):
    """|Gamma(t, 0) - t <gamma>|; bounded by 2 ||gamma||_inf."""
    t = np.asarray(t, dtype=float)
    out = np.abs(_primitive(gmap, t) - t * gmap.average)
    return float(out) if out.ndim == 0 else out


def separation_time(gmap: DispersionMap, delta: float) -> float:
    """Time gap beyond which Gamma is guaranteed to have moved by more than ``delta``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    _require_admissible(gmap)
    return (delta + 4.0 * gmap.sup_norm) / abs(gmap.average)


def covering_bound(gmap: DispersionMap) -> float:
    """K_gamma = 1 + N_gamma (1 + (1 + 4||gamma||_inf) / |<gamma>|)."""
    _require_admissible(gmap)
    return 1.0 + gmap.n_discontinuities * (1.0 + (1.0 + 4.0 * gmap.sup_norm) / abs(gmap.average))


def strichartz_constant(gmap: DispersionMap, c_str: float, q: float) -> float:
    """Strichartz constant for the dispersion-managed flow.

    ``C(gamma) = C_str * ||1/gamma||_inf^(1/q) * K_gamma^(1/q)``; ``q = inf``
    gives back ``C_str``.
    """
    if c_str <= 0:
        raise ValueError("c_str must be positive")
    if not q >= 2:
        raise ValueError("q must be at least 2")
    k_gamma = covering_bound(gmap)
    if math.isinf(q):
        return float(c_str)
    return c_str * (gmap.inv_sup_norm * k_gamma) ** (1.0 / q)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MonotonePartition:
    intervals: tuple[tuple[float, float, Direction], ...]

    @property
    def increasing(self) -> list[tuple[float, float]]:
        return [(a, b) for a, b, d in self.intervals if d == "increasing"]

    @property
    def decreasing(self) -> list[tuple[float, float]]:
        return [(a, b) for a, b, d in self.intervals if d == "decreasing"]


def _constant_pieces(gmap: DispersionMap, a: float, b: float):
    """Yield (start, end, value) for maximal runs of a single segment inside [a, b]."""
    cuts = np.concatenate([[a], gmap.jump_times(a, b), [b]])
    # jump_times only reports value changes at breakpoints; equal-valued
    # neighbours are still separate pieces here, which is harmless
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            yield float(lo), float(hi), gamma_at(gmap, 0.5 * (lo + hi))


def monotone_partition(gmap: DispersionMap, window: tuple[float, float]) -> MonotonePartition:
    """Split ``window`` into maximal intervals where Gamma(., 0) is monotone."""
    a, b = map(float, window)
    if not b > a:
        raise ValueError("window must be nonempty")
    out: list[list] = []
    for lo, hi, val in _constant_pieces(gmap, a, b):
        direction = "increasing" if val > 0 else "decreasing"
        if out and out[-1][2] == direction:
            out[-1][1] = hi
        else:
            out.append([lo, hi, direction])
    return MonotonePartition(tuple((lo, hi, d) for lo, hi, d in out))


@dataclass(frozen=True)
class CoverReport:
    n: int
    pieces: tuple[tuple[float, float], ...]
    K_n: int
    K_gamma_bound: float
    window: tuple[float, float]


def preimage_bracket(gmap: DispersionMap, n: int) -> tuple[float, float]:
    """Time interval guaranteed to contain every t with Gamma(t, 0) in [n, n+1)."""
    _require_admissible(gmap)
    avg = gmap.average
    slack = 2.0 * gmap.sup_norm
    ends = sorted(((n - slack) / avg, (n + 1 + slack) / avg))
    return ends[0], ends[1]


def cover_intervals(
    gmap: DispersionMap,
    n: int,
    horizon: float | None = None,
    *,
    full_line: bool = False,
) -> CoverReport:
    """Maximal intervals of the increasing set on which Gamma(., 0) lies in [n, n+1).

    By default only the half-line on which Gamma(., 0) travels towards the
    target band is searched: forward times when ``n * <gamma> >= 0``
    (``n >= 0`` for a positive average), backward times otherwise.  Pass
    ``full_line=True`` to search ``[-horizon, horizon]``.
    """
    n = int(n)
    bound = covering_bound(gmap)
    lo_need, hi_need = preimage_bracket(gmap, n)
    forward = (n >= 0) == (gmap.average > 0)
    if full_line:
        need = max(abs(lo_need), abs(hi_need))
    else:
        need = max(hi_need, 0.0) if forward else max(-lo_need, 0.0)
    if horizon is None:
        horizon = need + 1.0
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if horizon < need:
        raise ValueError("horizon does not contain preimage")
    if full_line:
        window = (-horizon, horizon)
    else:
        window = (0.0, horizon) if forward else (-horizon, 0.0)

    cuts = np.concatenate([[window[0]], gmap.jump_times(*window), [window[1]]])
    lo_all, hi_all = cuts[:-1], cuts[1:]
    val_all = gamma_at(gmap, 0.5 * (lo_all + hi_all))
    g_all = _primitive(gmap, lo_all)
    keep = (hi_all > lo_all) & (val_all > 0)
    lo_all, hi_all, val_all, g_all = lo_all[keep], hi_all[keep], val_all[keep], g_all[keep]
    starts = np.maximum(lo_all, lo_all + (n - g_all) / val_all)
    ends = np.minimum(hi_all, lo_all + (n + 1 - g_all) / val_all)
    # slivers at the round-off level are endpoints of a neighbouring band
    live = ends - starts > 1e-12 * np.maximum(1.0, np.abs(starts))

    pieces: list[list[float]] = []
    for start, end in zip(starts[live].tolist(), ends[live].tolist()):
        if pieces and abs(pieces[-1][1] - start) <= 1e-12 * max(1.0, abs(start)):
            pieces[-1][1] = end
        else:
            pieces.append([start, end])
    k_n = len(pieces)
    if k_n > bound:
        raise RuntimeError(f"covering number K_{n} = {k_n} exceeds K_gamma = {bound}")
    return CoverReport(
        n=n,
        pieces=tuple((a, b) for a, b in pieces),
        K_n=k_n,
        K_gamma_bound=bound,
        window=window,
    )
