"""Experiment drivers: Strichartz audits, scattering, blowup, soliton, partition.

Each driver takes an :class:`ExperimentSpec` and returns a
:class:`ResultReport` whose measurements each carry the tolerance they were
judged against.  All randomness is drawn from ``numpy.random.default_rng(spec.seed)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import dispersion_map as dm
from .diagnostics import (
    augmented_virial_integrand,
    check_blowup_conditions,
    diagnostics_record,
    norm_ratio,
    trapping_certificate,
    virial_quantities,
)
from .dispersion_map import DispersionMap, big_gamma
from .ground_state import GroundStateProfile, cached_ground_state
from .spectral_engine import (
    ComplexField,
    RadialGrid3D,
    SplitStepConfig,
    TorusGrid1D,
    evolve,
    is_schrodinger_admissible,
    linear_propagate,
    norms,
)

__all__ = [
    "ExperimentSpec",
    "ResultReport",
    "Measurement",
    "ExperimentError",
    "KINDS",
    "build_grid",
    "build_datum",
    "blowup_time_bound",
    "duhamel",
    "run",
    "run_strichartz",
    "run_inhomogeneous_audit",
    "run_scattering",
    "run_blowup",
    "run_soliton",
    "run_partition",
    "trapping_trajectory",
]

KINDS = ("strichartz", "scattering", "blowup", "soliton", "partition")

REQUIRED = object()

# Kind-specific parameters and their defaults.
PARAM_DEFAULTS: dict[str, dict[str, Any]] = {
    "strichartz": {
        "q": REQUIRED, "r": REQUIRED, "d": None, "t_window": 8.0, "n_data": 50, "sample_dt": 0.01,
        "c_str": None, "calibration_safety": 1.1, "check_window_doubling": False,
        "width_range": [0.75, 2.0], "center_range": [-5.0, 5.0], "modulation_range": [-1.0, 1.0],
    },
    "scattering": {
        "t_final": 100.0, "checkpoint_every": 10.0, "dt": 0.02, "eta": 0.1,
        "tolerance_factor": 1e-3, "min_decay": 10.0, "nonlinear": True,
    },
    "blowup": {
        "lam": "auto", "delta": None, "virial_prefactor": None, "dt_max": 1e-3,
        "phase_cfl": 0.02, "zoom_points": 32, "h1_growth": 1e3, "min_core_points": 16,
        "resolution_check": False, "resolution_tol": 0.1, "profile_cache": None,
    },
    "soliton": {
        "dt": 0.005, "t_end": None, "order_target": 4.0, "order_tol": 0.2,
        "error_tol": 1e-2, "mass_tol": 1e-10, "probe_radius": 0.5,
        "profile_cache": None,
    },
    "partition": {"n_min": -10, "n_max": 10, "full_line": False},
}

GRID_DEFAULTS = {
    "strichartz": {"kind": "torus", "half_length": 320.0, "points": 4096},
    "scattering": {"kind": "torus", "half_length": 800.0, "points": 16384},
    "blowup": {"kind": "radial", "r_max": 20.0, "points": 1024},
    "soliton": {"kind": "radial", "r_max": 20.0, "points": 1024},
    "partition": {},
}

DATUM_DEFAULTS = {
    "strichartz": {"family": "packet_ensemble"},
    "scattering": {"family": "gaussian", "amplitude": 0.01, "width": 1.0},
    "blowup": {"family": "ground_state", "amplitude": 1.2},
    "soliton": {"family": "ground_state", "amplitude": 1.0},
    "partition": {},
}


class ExperimentError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    kind: str
    map: DispersionMap
    grid: dict = field(default_factory=dict)
    datum: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ExperimentError(f"unknown experiment kind {self.kind!r}")
        self.grid = {**GRID_DEFAULTS[self.kind], **self.grid}
        self.datum = {**DATUM_DEFAULTS[self.kind], **self.datum}
        unknown = set(self.params) - set(PARAM_DEFAULTS[self.kind])
        if unknown:
            raise ExperimentError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        self.params = {**PARAM_DEFAULTS[self.kind], **self.params}

    def validate(self) -> list[str]:
        """All problems with this experiment description (empty when valid)."""
        errors = []
        p = self.params
        missing = [k for k, v in p.items() if v is REQUIRED]
        errors += [f"{self.kind}: missing required parameter {k!r}" for k in missing]
        if self.kind in ("strichartz", "scattering", "partition"):
            ok, reason = dm.is_admissible(self.map)
            if not ok:
                errors.append(f"map not admissible: {reason}")
        if self.kind == "strichartz" and not missing:
            d = p["d"] if p["d"] is not None else (1 if self.grid.get("kind") == "torus" else 3)
            ok, reason = is_schrodinger_admissible(d, float(p["q"]), float(p["r"]))
            if not ok:
                errors.append(f"exponent pair not admissible: {reason}")
            if d not in (1, 3):
                errors.append("strichartz audit supports d = 1 (torus) or d = 3 (radial)")
            if p["n_data"] < 50:
                errors.append("strichartz ensemble needs at least 50 data")
        if self.kind in ("blowup", "soliton"):
            if self.grid.get("kind") != "radial":
                errors.append(f"{self.kind} runs need a radial grid")
            if self.map.segments[0][1] <= 0:
                errors.append("first segment of the map must be focusing (gamma_+ > 0)")
        if self.kind == "blowup":
            lam = p["lam"]
            if not (lam == "auto" or (isinstance(lam, (int, float)) and lam >= 1)):
                errors.append("lam must be 'auto' or a number >= 1")
        if self.kind == "partition" and p["n_min"] > p["n_max"]:
            errors.append("partition: n_min > n_max")
        try:
            if self.grid:
                build_grid(self.grid)
        except (ValueError, KeyError, TypeError) as exc:
            errors.append(f"grid: {exc}")
        return errors

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "map": self.map.to_json(),
            "grid": dict(self.grid),
            "datum": dict(self.datum),
            "params": {k: v for k, v in self.params.items() if v is not REQUIRED},
            "seed": int(self.seed),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentSpec":
        return cls(
            kind=obj["kind"],
            map=DispersionMap.from_json(obj["map"]),
            grid=dict(obj.get("grid", {})),
            datum=dict(obj.get("datum", {})),
            params=dict(obj.get("params", {})),
            seed=int(obj.get("seed", 0)),
        )


@dataclass
class Measurement:
    name: str
    value: float
    tolerance: float | None
    passed: bool | None
    hard: bool = True

    def to_json(self) -> dict:
        return {"name": self.name, "value": _jsonable(self.value), "tolerance": _jsonable(self.tolerance),
                "pass": self.passed, "hard": self.hard}


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


@dataclass
class ResultReport:
    spec: ExperimentSpec
    verdict: str
    measurements: list[Measurement]
    runtime_seconds: float
    seed: int
    artifacts: dict = field(default_factory=dict)

    def measurement(self, name: str) -> Measurement:
        for m in self.measurements:
            if m.name == name:
                return m
        raise KeyError(name)

    def __getitem__(self, name: str) -> float:
        return self.measurement(name).value

    def to_json(self) -> dict:
        return {
            "spec": self.spec.to_json(),
            "verdict": self.verdict,
            "measurements": [m.to_json() for m in self.measurements],
            "runtime_seconds": self.runtime_seconds,
            "seed": self.seed,
        }


def _verdict(measurements: list[Measurement]) -> str:
    hard = [m for m in measurements if m.hard and m.passed is not None]
    return "pass" if all(m.passed for m in hard) else "fail"


def _check(spec: ExperimentSpec) -> None:
    errors = spec.validate()
    if errors:
        raise ExperimentError("; ".join(errors))


# ---------------------------------------------------------------------------
# grids and data


def build_grid(desc: dict):
    kind = desc.get("kind")
    if kind == "torus":
        return TorusGrid1D(float(desc["half_length"]), int(desc["points"]))
    if kind == "radial":
        return RadialGrid3D(float(desc["r_max"]), int(desc["points"]))
    raise ValueError(f"unknown grid kind {kind!r}")


def build_datum(desc: dict, grid, profile: GroundStateProfile | None = None) -> ComplexField:
    family = desc.get("family", "gaussian")
    amp = float(desc.get("amplitude", 1.0))
    x = grid.nodes
    if family == "zero":
        return ComplexField.zeros(grid)
    if family == "gaussian":
        width = float(desc.get("width", 1.0))
        if grid.kind == "torus":
            center = float(desc.get("center", 0.0))
            mod = float(desc.get("modulation", 0.0))
            u = amp * np.exp(-((x - center) ** 2) / (2 * width**2) + 1j * mod * x)
        else:
            u = amp * np.exp(-(x**2) / (2 * width**2))
        return ComplexField.from_u(grid, u)
    if family == "ground_state":
        if profile is None:
            raise ExperimentError("ground_state datum needs a profile")
        if grid.kind != "radial":
            raise ExperimentError("ground_state datum lives on the radial grid")
        return profile.sample(grid, amplitude=amp, scale=float(desc.get("scale", 1.0)))
    raise ExperimentError(f"unknown datum family {family!r}")


def _first_segment(gmap: DispersionMap) -> tuple[float, float]:
    t_plus, gamma_plus = gmap.segments[0]
    return t_plus, gamma_plus


# ---------------------------------------------------------------------------
# Strichartz audits


def _packet_ensemble(grid, rng, n, p):
    w = rng.uniform(*p["width_range"], size=n)
    c = rng.uniform(*p["center_range"], size=n)
    m = rng.uniform(*p["modulation_range"], size=n)
    x = grid.nodes
    if grid.kind == "torus":
        data = np.exp(-((x[None, :] - c[:, None]) ** 2) / (2 * w[:, None] ** 2) + 1j * m[:, None] * x[None, :])
    else:
        # radial packets: random width and a random chirp exp(i m r^2)
        u = np.exp(-(x[None, :] ** 2) / (2 * w[:, None] ** 2) + 1j * m[:, None] * x[None, :] ** 2)
        data = u * x[None, :]
    xi_max = np.abs(m) + 6.0 / w if grid.kind == "torus" else 6.0 / w + 2 * np.abs(m) * 6.0 * w
    return data, float(xi_max.max())


def _batch_lebesgue(grid, values: np.ndarray, r: float) -> np.ndarray:
    u_abs = np.abs(values) if grid.kind == "torus" else np.abs(values) / grid.nodes
    if math.isinf(r):
        return u_abs.max(axis=-1)
    if grid.kind == "torus":
        return (grid.dx * np.sum(u_abs**r, axis=-1)) ** (1.0 / r)
    return (grid.weight * np.sum(grid.nodes**2 * u_abs**r, axis=-1)) ** (1.0 / r)


def _l2(grid, values):
    return _batch_lebesgue(grid, values, 2.0)


def _time_norm(times: np.ndarray, spatial: np.ndarray, q: float) -> np.ndarray:
    if math.isinf(q):
        return spatial.max(axis=-1)
    return np.trapezoid(spatial**q, times, axis=-1) ** (1.0 / q)


def _strichartz_ratios(grid, data, gmap, times, q, r, chunk=256):
    gam = big_gamma(gmap, times, 0.0)
    coeffs = grid.to_spectral(data)
    k2 = grid.kinetic
    spatial = np.empty((len(data), len(times)))
    for lo in range(0, len(times), chunk):
        phase = np.exp(-1j * gam[lo:lo + chunk, None] * k2[None, :])
        for i, c in enumerate(coeffs):
            vals = grid.from_spectral(c[None, :] * phase)
            spatial[i, lo:lo + chunk] = _batch_lebesgue(grid, vals, r)
    return _time_norm(times, spatial, q) / _l2(grid, data)


def _strichartz_window(gmap, t_window, sample_dt):
    n = int(round(2 * t_window / sample_dt)) + 1
    return np.linspace(-t_window, t_window, n)


def _wrap_guard(grid, xi_max, gmap, times):
    span = float(np.max(np.abs(big_gamma(gmap, times, 0.0))))
    if grid.extent < 4.0 * xi_max * span:
        raise ExperimentError(
            f"domain too small: extent {grid.extent} < 4 * xi_max * |Gamma| = {4 * xi_max * span:.4g}"
        )
    if math.pi / (grid.dx if grid.kind == "torus" else grid.dr) < xi_max:
        raise ExperimentError("grid does not resolve the data spectrum")


def run_strichartz(spec: ExperimentSpec) -> ResultReport:
    """Ensemble audit of |exp(i Gamma(t,0) Delta) phi|_{L^q_t L^r_x} <= C(gamma) |phi|_2."""
    _check(spec)
    start = time.perf_counter()
    p = spec.params
    q, r = float(p["q"]), float(p["r"])
    grid = build_grid(spec.grid)
    rng = np.random.default_rng(spec.seed)
    data, xi_max = _packet_ensemble(grid, rng, int(p["n_data"]), p)
    times = _strichartz_window(spec.map, p["t_window"], p["sample_dt"])
    baseline = DispersionMap.constant(1.0)
    _wrap_guard(grid, xi_max, spec.map, times)
    _wrap_guard(grid, xi_max, baseline, times)

    ratios = _strichartz_ratios(grid, data, spec.map, times, q, r)
    measurements = []
    if p["c_str"] is None:
        base = _strichartz_ratios(grid, data, baseline, times, q, r)
        c_str = p["calibration_safety"] * float(base.max())
        measurements.append(Measurement("baseline_max_ratio", float(base.max()), None, None, hard=False))
    else:
        c_str = float(p["c_str"])
    c_gamma = dm.strichartz_constant(spec.map, c_str, q)
    max_ratio = float(ratios.max())
    measurements += [
        Measurement("c_str", c_str, None, None, hard=False),
        Measurement("max_ratio", max_ratio, c_gamma, max_ratio <= c_gamma),
        Measurement("min_ratio", float(ratios.min()), None, None, hard=False),
    ]
    if math.isinf(q) and r == 2.0:
        dev = float(np.max(np.abs(ratios - 1.0)))
        measurements.append(Measurement("unitarity_deviation", dev, 1e-10, dev <= 1e-10))
    if p["check_window_doubling"]:
        wide = _strichartz_window(spec.map, 2 * p["t_window"], p["sample_dt"])
        _wrap_guard(grid, xi_max, spec.map, wide)
        wide_max = float(_strichartz_ratios(grid, data, spec.map, wide, q, r).max())
        drift = abs(wide_max - max_ratio) / max_ratio
        measurements.append(Measurement("window_doubling_drift", drift, 0.02, drift <= 0.02))
    return ResultReport(spec, _verdict(measurements), measurements, time.perf_counter() - start,
                        spec.seed, artifacts={"ratios": ratios, "c_gamma": c_gamma})


def duhamel(grid, gmap: DispersionMap, times: np.ndarray, forcing: np.ndarray) -> np.ndarray:
    """D(t_k) = int_{t_0}^{t_k} exp(i Gamma(t_k, s) Delta) F(s) ds by the trapezoidal rule.

    ``forcing`` has shape (len(times), n_values) in the grid's storage.
    Computed as exp(i Gamma(t_k, 0) Delta) applied to the cumulative integral
    of exp(i Gamma(0, s) Delta) F(s).
    """
    gam = big_gamma(gmap, times, 0.0)
    k2 = grid.kinetic
    pulled = grid.to_spectral(forcing) * np.exp(1j * gam[:, None] * k2[None, :])
    acc = cumulative_trapezoid(pulled, times, axis=0, initial=0.0)
    return grid.from_spectral(acc * np.exp(-1j * gam[:, None] * k2[None, :]))


def _dual(x: float) -> float:
    if math.isinf(x):
        return 1.0
    if x == 1.0:
        return math.inf
    return x / (x - 1.0)


def run_inhomogeneous_audit(spec: ExperimentSpec, n_times: int = 401, refine: bool = True) -> ResultReport:
    """Ratio |Duhamel F|_{L^q L^r} / |F|_{L^{q~'} L^{r~'}} over random forcings.

    ``spec`` is a strichartz spec; ``params`` may add ``q_tilde``/``r_tilde``
    (default: the same pair).  The forcing is a random superposition of
    packets with a smooth envelope in time over [0, t_window].
    """
    start = time.perf_counter()
    p = dict(spec.params)
    q, r = float(p["q"]), float(p["r"])
    qt, rt = float(p.get("q_tilde", q)), float(p.get("r_tilde", r))
    d = 1 if spec.grid.get("kind") == "torus" else 3
    for pair in ((q, r), (qt, rt)):
        ok, reason = is_schrodinger_admissible(d, *pair)
        if not ok:
            raise ExperimentError(f"exponent pair not admissible: {reason}")
    if q == 2 and qt == 2:
        raise ExperimentError("(q, q~) = (2, 2) is excluded")
    ok, reason = dm.is_admissible(spec.map)
    if not ok:
        raise ExperimentError(f"map not admissible: {reason}")
    grid = build_grid(spec.grid)
    rng = np.random.default_rng(spec.seed)
    n_force = max(4, int(p["n_data"]) // 5)
    t_window = float(p["t_window"])
    packets, _ = _packet_ensemble(grid, rng, 3 * n_force, p)
    phases = rng.uniform(0, 2 * np.pi, size=(n_force, 3))
    rates = rng.uniform(0.5, 2.0, size=(n_force, 3))

    def ratios_at(nt: int) -> np.ndarray:
        times = np.linspace(0.0, t_window, nt)
        env = np.sin(np.pi * times / t_window) ** 2
        out = np.empty(n_force)
        for i in range(n_force):
            amps = env[:, None] * np.exp(1j * (rates[i] * times[:, None] + phases[i]))
            forcing = amps @ packets[3 * i:3 * i + 3]
            dvals = duhamel(grid, spec.map, times, forcing)
            lhs = _time_norm(times, _batch_lebesgue(grid, dvals, r), q)
            rhs = _time_norm(times, _batch_lebesgue(grid, forcing, _dual(rt)), _dual(qt))
            out[i] = lhs / rhs if rhs > 0 else 0.0
        return out

    ratios = ratios_at(n_times)
    max_ratio = float(ratios.max())
    measurements = [Measurement("max_ratio", max_ratio, None, bool(np.isfinite(max_ratio)))]
    if refine:
        fine = float(ratios_at(2 * n_times - 1).max())
        drift = abs(fine - max_ratio) / max_ratio
        measurements.append(Measurement("refinement_drift", drift, 0.02, drift <= 0.02))
    return ResultReport(spec, _verdict(measurements), measurements, time.perf_counter() - start,
                        spec.seed, artifacts={"ratios": ratios})


# ---------------------------------------------------------------------------
# scattering


def run_scattering(spec: ExperimentSpec) -> ResultReport:
    """Small-data run; checks that w(t) = exp(i Gamma(t0, t) Delta) u(t) is Cauchy in H^1."""
    _check(spec)
    start = time.perf_counter()
    p = spec.params
    grid = build_grid(spec.grid)
    u0 = build_datum(spec.datum, grid)
    h1_0 = norms(u0).h1
    if h1_0 >= p["eta"]:
        raise ExperimentError(f"datum not small: |u0|_H1 = {h1_0:.4g} >= eta = {p['eta']}")
    t0 = 0.0
    n_check = int(round(p["t_final"] / p["checkpoint_every"]))
    checkpoints = t0 + p["checkpoint_every"] * np.arange(n_check + 1)
    cfg = SplitStepConfig(dt_max=p["dt"], nonlinear=bool(p["nonlinear"]))
    field = u0
    w = [u0]
    for a, b in zip(checkpoints[:-1], checkpoints[1:]):
        res = evolve(field, a, b, spec.map, cfg)
        if res.blowup:
            m = [Measurement("blowup_time", res.t_star, None, False)]
            return ResultReport(spec, "fail", m, time.perf_counter() - start, spec.seed)
        field = res.field
        w.append(linear_propagate(field, big_gamma(spec.map, t0, b)))
    diffs = np.array([norms(b - a).h1 for a, b in zip(w[:-1], w[1:])])
    monotone = bool(np.all(np.diff(diffs) <= 1e-14 * max(1.0, diffs.max(initial=0.0))))
    tol = p["tolerance_factor"] * h1_0 if h1_0 > 0 else 1e-300
    last = float(diffs[-1])
    decay = float(diffs[0] / diffs[-1]) if diffs[-1] > 0 else math.inf
    measurements = [
        Measurement("cauchy_monotone", float(monotone), 1.0, monotone),
        Measurement("last_cauchy_difference", last, tol, last <= tol),
        Measurement("cauchy_decay_factor", decay, p["min_decay"], decay >= p["min_decay"]),
        Measurement("u_plus_h1", norms(w[-1]).h1, None, None, hard=False),
        Measurement("mass_drift", abs(norms(field).mass / norms(u0).mass - 1) if h1_0 > 0 else 0.0,
                    None, None, hard=False),
    ]
    return ResultReport(spec, _verdict(measurements), measurements, time.perf_counter() - start,
                        spec.seed, artifacts={"checkpoints": checkpoints, "cauchy": diffs, "u_plus": w[-1]})


# ---------------------------------------------------------------------------
# blowup


def blowup_time_bound(c1: float, c2: float, c: float, lam: float) -> float:
    """Zero of -c lam t^2 / 2 + C2 t / lam + C1 / lam^3: (C2 + sqrt(C2^2 + 2 c C1)) / (c lam^2)."""
    return (c2 + math.sqrt(c2 * c2 + 2.0 * c * c1)) / (c * lam * lam)


def _profile_for(spec: ExperimentSpec, gamma_plus: float) -> GroundStateProfile:
    return cached_ground_state(spec.params.get("profile_cache"), gamma_plus)


@dataclass
class TrappingTrack:
    times: np.ndarray
    ratio: np.ndarray
    integrand: np.ndarray
    certificate: Any
    ratio_floor: float
    integrand_ceiling: float

    @property
    def ratio_ok(self) -> bool:
        return bool(np.all(self.ratio >= self.ratio_floor))

    @property
    def integrand_ok(self) -> bool:
        return bool(np.all(self.integrand <= self.integrand_ceiling))


def trapping_trajectory(
    snapshots, rplus: GroundStateProfile, cert, gamma_plus: float, lam: float = 1.0
) -> TrappingTrack:
    """Norm ratio y(t) and the epsilon-augmented virial integrand along a run.

    The integrand scales like lam under u -> lam u(lam x), the ratio is invariant.
    """
    times, ratio, integ = [], [], []
    for t, f in snapshots:
        n = norms(f)
        times.append(t)
        ratio.append(norm_ratio(n, rplus))
        integ.append(augmented_virial_integrand(n, gamma_plus, cert.epsilon) / lam)
    return TrappingTrack(
        np.array(times), np.array(ratio), np.array(integ), cert,
        ratio_floor=1.0 + cert.delta_prime - 0.01,
        integrand_ceiling=-cert.c + 0.01 * abs(cert.c),
    )


def _blowup_run(spec, u0_unscaled: ComplexField, lam: float, t_plus: float, points: int,
                observer: Callable | None = None):
    p = spec.params
    g = spec.grid
    grid = RadialGrid3D(float(g["r_max"]) / lam, points)
    profile_grid = RadialGrid3D(float(g["r_max"]), points)
    # the datum lam * u0(lam r) on the grid [0, r_max / lam] has the same nodal values times lam
    if profile_grid.points != u0_unscaled.grid.points:
        raise ValueError("datum grid mismatch")
    u0 = ComplexField(grid, u0_unscaled.values)  # v = r u scales as lam * (r/lam) = 1
    cfg = SplitStepConfig(
        dt_max=p["dt_max"] / lam**2,
        blowup_h1_threshold=p["h1_growth"],
        phase_cfl=p["phase_cfl"],
        zoom_points=p["zoom_points"],
    )
    return evolve(u0, 0.0, t_plus, spec.map, cfg, observer=observer)


def run_blowup(spec: ExperimentSpec) -> ResultReport:
    """Rescaled-datum blowup inside the first focusing segment."""
    _check(spec)
    start = time.perf_counter()
    p = spec.params
    t_plus, gamma_plus = _first_segment(spec.map)
    rplus = _profile_for(spec, gamma_plus)
    base_grid = build_grid(spec.grid)
    u0 = build_datum(spec.datum, base_grid, rplus)
    n0 = norms(u0)
    cond = check_blowup_conditions(n0, rplus, gamma_plus)
    if not cond.satisfied:
        raise ExperimentError(
            f"MER violated: margin {cond.delta_margin:.4g}, gradient ratio {cond.gradient_ratio:.4g}"
        )
    delta = p["delta"] if p["delta"] is not None else 0.99 * cond.delta_margin
    cert = trapping_certificate(n0, rplus, gamma_plus, delta)
    kappa = gamma_plus if p["virial_prefactor"] is None else float(p["virial_prefactor"])
    c_virial = 8.0 * kappa * cert.c
    c1 = virial_quantities(u0, gamma_plus).variance
    c2 = 4.0 * math.sqrt(c1) * math.sqrt(n0.grad_sq)

    lam = p["lam"]
    if lam == "auto":
        lam = 1
        while blowup_time_bound(c1, c2, c_virial, lam) >= 0.5 * t_plus:
            lam *= 2
    lam = float(lam)
    t_bound = blowup_time_bound(c1, c2, c_virial, lam)

    measurements = [
        Measurement("lambda", lam, None, None, hard=False),
        Measurement("delta_margin", cond.delta_margin, 0.0, cond.delta_margin > 0),
        Measurement("T_lambda", t_bound, None, None, hard=False),
        Measurement("certificate_c", cert.c, None, None, hard=False),
    ]
    core = rplus.r[np.argmax(rplus.values < 0.5 * rplus.peak)]
    core_points = core / base_grid.dr
    if core_points < p["min_core_points"]:
        measurements.append(Measurement("core_points", core_points, p["min_core_points"], False))
        return ResultReport(spec, "inconclusive", measurements, time.perf_counter() - start, spec.seed)

    snaps: list = []
    res = _blowup_run(spec, u0, lam, t_plus, base_grid.points, observer=lambda t, f: snaps.append((t, f)))
    if not res.blowup:
        measurements.append(Measurement("t_star", math.inf, t_plus, False))
        return ResultReport(spec, "fail", measurements, time.perf_counter() - start, spec.seed)
    t_star = res.t_star
    growth = res.final_norms.h1 / res.initial_norms.h1 if res.final_norms else math.inf
    measurements += [
        Measurement("t_star", t_star, t_plus, t_star < t_plus),
        Measurement("h1_growth", growth, p["h1_growth"], growth >= p["h1_growth"]),
        Measurement("t_star_below_T_lambda", float(t_star <= t_bound), 1.0, t_star <= t_bound, hard=False),
        Measurement("zooms", res.zooms, None, None, hard=False),
    ]
    pre = [(t, f) for t, f in snaps if t <= 0.9 * t_star]
    track = trapping_trajectory(pre, rplus, cert, gamma_plus, lam)
    measurements += [
        Measurement("min_norm_ratio", float(track.ratio.min()), track.ratio_floor, track.ratio_ok),
        Measurement("max_augmented_integrand", float(track.integrand.max()), track.integrand_ceiling,
                    track.integrand_ok),
    ]
    if p["resolution_check"]:
        fine = RadialGrid3D(float(spec.grid["r_max"]), 2 * base_grid.points)
        u0_fine = build_datum(spec.datum, fine, rplus)
        res2 = _blowup_run(spec, u0_fine, lam, t_plus, fine.points)
        t2 = res2.t_star if res2.blowup else math.inf
        rel = abs(t2 - t_star) / t_star
        measurements.append(Measurement("t_star_resolution_drift", rel, p["resolution_tol"],
                                        rel <= p["resolution_tol"]))
    verdict = "blowup_detected" if _verdict(measurements) == "pass" else "fail"
    return ResultReport(spec, verdict, measurements, time.perf_counter() - start, spec.seed,
                        artifacts={"result": res, "track": track, "certificate": cert,
                                   "snapshots": snaps, "lambda": lam})


# ---------------------------------------------------------------------------
# soliton


def _soliton_run(rplus, grid, gmap, h, t_end, probe_index):
    u0 = rplus.sample(grid)
    ref = np.abs(u0.values)
    ref_norm = math.sqrt(np.sum(ref**2))
    errs, phases, times = [], [], []

    def observe(t, f):
        times.append(t)
        errs.append(math.sqrt(np.sum((np.abs(f.values) - ref) ** 2)) / ref_norm)
        phases.append(np.angle(f.values[probe_index] / u0.values[probe_index]))

    res = evolve(u0, 0.0, t_end, gmap, SplitStepConfig(dt_max=h), observer=observe)
    mass_drift = abs(norms(res.field).mass / norms(u0).mass - 1.0)
    return np.array(times), np.array(errs), np.array(phases), mass_drift, res


def run_soliton(spec: ExperimentSpec) -> ResultReport:
    """Evolve R_+ on the focusing segment; it should only rotate in phase."""
    _check(spec)
    start = time.perf_counter()
    p = spec.params
    t_plus, gamma_plus = _first_segment(spec.map)
    t_end = t_plus if p["t_end"] is None else float(p["t_end"])
    if t_end > t_plus + 1e-12:
        raise ExperimentError("soliton window must stay inside the first segment")
    rplus = _profile_for(spec, gamma_plus)
    grid = build_grid(spec.grid)
    probe = int(np.argmin(np.abs(grid.nodes - p["probe_radius"])))
    h = float(p["dt"])
    t_a, e_a, _, _, _ = _soliton_run(rplus, grid, spec.map, h, t_end, probe)
    t_b, e_b, ph_b, drift_b, _ = _soliton_run(rplus, grid, spec.map, h / 2, t_end, probe)
    order = e_a.max() / e_b.max()
    phase_err = float(np.max(np.abs(np.angle(np.exp(1j * (ph_b - t_b))))))
    lo = p["order_target"] * (1 - p["order_tol"])
    hi = p["order_target"] * (1 + p["order_tol"])
    measurements = [
        Measurement("max_profile_error_h", float(e_a.max()), None, None, hard=False),
        Measurement("max_profile_error_h2", float(e_b.max()), p["error_tol"], e_b.max() <= p["error_tol"]),
        Measurement("error_ratio", float(order), p["order_tol"], lo <= order <= hi),
        Measurement("phase_error", phase_err, 10 * e_b.max() + 1e-8, phase_err <= 10 * e_b.max() + 1e-8),
        Measurement("mass_drift", drift_b, p["mass_tol"], drift_b <= p["mass_tol"]),
    ]
    return ResultReport(spec, _verdict(measurements), measurements, time.perf_counter() - start,
                        spec.seed, artifacts={"times": t_b, "errors": e_b})


# ---------------------------------------------------------------------------
# partition


def run_partition(spec: ExperimentSpec) -> ResultReport:
    """Covering numbers K_n over a range of n against K_gamma."""
    _check(spec)
    start = time.perf_counter()
    p = spec.params
    reports = [
        dm.cover_intervals(spec.map, n, full_line=p["full_line"])
        for n in range(int(p["n_min"]), int(p["n_max"]) + 1)
    ]
    bound = dm.covering_bound(spec.map)
    k_max = max(r.K_n for r in reports)
    measurements = [
        Measurement("max_K_n", float(k_max), bound, k_max <= bound),
        Measurement("K_gamma", bound, None, None, hard=False),
    ]
    for r in reports:
        if r.n == 0:
            measurements.append(Measurement("K_0", float(r.K_n), bound, r.K_n <= bound, hard=False))
    return ResultReport(spec, _verdict(measurements), measurements, time.perf_counter() - start,
                        spec.seed, artifacts={"covers": reports})


RUNNERS: dict[str, Callable[[ExperimentSpec], ResultReport]] = {
    "strichartz": run_strichartz,
    "scattering": run_scattering,
    "blowup": run_blowup,
    "soliton": run_soliton,
    "partition": run_partition,
}


def run(spec: ExperimentSpec) -> ResultReport:
    return RUNNERS[spec.kind](spec)
