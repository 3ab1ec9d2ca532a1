"""Monitored functionals: mass, segment energies, variance and virial terms.

All integrals are over R^3 for radial fields (or over the torus in 1d) and
reuse the quadratures of :func:`dmnls.spectral_engine.norms`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .ground_state import GroundStateProfile
from .spectral_engine import ComplexField, FieldNorms, RadialGrid3D, norms

__all__ = [
    "DiagnosticsRecord",
    "TrappingCertificate",
    "LocalizedWeight",
    "VirialQuantities",
    "LocalizedVirial",
    "BlowupConditions",
    "energies",
    "virial_quantities",
    "virial_prefactor_audit",
    "localized_virial",
    "trapping_certificate",
    "check_blowup_conditions",
    "diagnostics_record",
    "norm_ratio",
    "augmented_virial_integrand",
]

TERM3_CONSTANT = 8.0


# ---------------------------------------------------------------------------
# energies and global virial quantities


def energies(field: ComplexField, gamma_plus: float, gamma_minus: float) -> tuple[float, float]:
    """E_pm(u) = int (gamma_pm / 2) |grad u|^2 -/+ (1/4) |u|^4."""
    n = norms(field)
    e_plus = 0.5 * gamma_plus * n.grad_sq - 0.25 * n.l4_quartic
    e_minus = 0.5 * gamma_minus * n.grad_sq + 0.25 * n.l4_quartic
    return float(e_plus), float(e_minus)


@dataclass(frozen=True)
class VirialQuantities:
    variance: float
    momentum: float
    virial_rhs: float


def _radial_parts(field: ComplexField):
    grid = field.grid
    r = grid.nodes
    v = field.values
    dv = grid.derivative(v)
    u = v / r
    u_r = dv / r - v / r**2
    return grid, r, v, dv, u, u_r


def virial_quantities(field: ComplexField, gamma: float) -> VirialQuantities:
    """Variance int |x|^2 |u|^2, momentum 4 Im int conj(u) grad u . x, and
    the right-hand side 8 int (gamma |grad u|^2 - (3/4) |u|^4)."""
    grid = field.grid
    n = norms(field)
    if grid.kind == "radial":
        _, r, v, dv, _, _ = _radial_parts(field)
        variance = grid.weight * np.sum(r**2 * np.abs(v) ** 2)
        # conj(u) u_r r^3 = conj(v) v' r - |v|^2, the second term is real
        momentum = 4.0 * grid.weight * np.sum(np.imag(np.conj(v) * dv) * r)
    else:
        x, u = grid.nodes, field.values
        du = grid.derivative(u)
        variance = grid.dx * np.sum(x**2 * np.abs(u) ** 2)
        momentum = 4.0 * grid.dx * np.sum(np.imag(np.conj(u) * du) * x)
    rhs = 8.0 * (gamma * n.grad_sq - 0.75 * n.l4_quartic)
    return VirialQuantities(float(variance), float(momentum), float(rhs))


def _second_derivative(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Three-point second differences at the interior samples (nonuniform spacing)."""
    h0 = times[1:-1] - times[:-2]
    h1 = times[2:] - times[1:-1]
    return 2.0 * (h0 * values[2:] - (h0 + h1) * values[1:-1] + h1 * values[:-2]) / (
        h0 * h1 * (h0 + h1)
    )


def virial_prefactor_audit(
    gamma: float,
    snapshots: Sequence[tuple[float, ComplexField]],
    nonlinear: bool = True,
) -> float:
    """Least-squares kappa with d^2V/dt^2 = kappa * rhs, V the variance.

    ``rhs`` is 8 int (gamma |grad u|^2 - (3/4) |u|^4); for a linear run the
    quartic term is dropped since it is absent from the dynamics.
    """
    if len(snapshots) < 5:
        raise ValueError("virial audit needs at least 5 snapshots")
    times = np.array([t for t, _ in snapshots])
    var = np.empty(len(snapshots))
    rhs = np.empty(len(snapshots))
    for i, (_, f) in enumerate(snapshots):
        vq = virial_quantities(f, gamma)
        var[i] = vq.variance
        if nonlinear:
            rhs[i] = vq.virial_rhs
        else:
            rhs[i] = 8.0 * gamma * norms(f).grad_sq
    d2 = _second_derivative(times, var)
    target = rhs[1:-1]
    return float(np.dot(d2, target) / np.dot(target, target))


# ---------------------------------------------------------------------------
# localized virial


def _phi_profile(s: np.ndarray):
    """phi, phi', phi'' for the cutoff: s^2 on [0,1], quintic on [1,3], constant after."""
    s = np.asarray(s, dtype=float)
    t = np.clip(s - 1.0, 0.0, 2.0)
    bridge = 1 + 2 * t + t**2 - 1.5 * t**3 + 0.5 * t**4 - 0.05 * t**5
    d_bridge = 2 + 2 * t - 4.5 * t**2 + 2 * t**3 - 0.25 * t**4
    dd_bridge = 2 - 9 * t + 6 * t**2 - t**3
    inner = s <= 1.0
    phi = np.where(inner, s**2, bridge)
    dphi = np.where(inner, 2 * s, d_bridge)
    ddphi = np.where(inner, 2.0, np.where(s >= 3.0, 0.0, dd_bridge))
    dphi = np.where(s >= 3.0, 0.0, dphi)
    return phi, dphi, ddphi


@dataclass(frozen=True)
class LocalizedWeight:
    """w_R(x) = R^2 phi(x / R) sampled on a radial grid.

    ``R = inf`` gives the untruncated weight |x|^2.  The Hessian of a
    radial weight has eigenvalues w'' (radial) and w'/r (tangential, twice).
    """

    R: float
    r: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    d2w: np.ndarray

    @classmethod
    def build(cls, grid: RadialGrid3D, R: float) -> "LocalizedWeight":
        if not R > 0:
            raise ValueError("R must be positive")
        r = grid.nodes
        if math.isinf(R):
            return cls(R, r, r**2, 2 * r, np.full_like(r, 2.0))
        if 3.0 * R >= grid.r_max:
            raise ValueError("weight support exceeds grid")
        phi, dphi, ddphi = _phi_profile(r / R)
        return cls(R, r, R**2 * phi, R * dphi, ddphi)

    @property
    def tangential(self) -> np.ndarray:
        return self.dw / self.r

    def check_bounds(self, tol: float = 1e-12) -> dict[str, bool]:
        r, R = self.r, self.R
        inner = r <= R
        checks = {
            "quadratic_inside": bool(np.allclose(self.w[inner], r[inner] ** 2, rtol=1e-14, atol=0)),
            "gradient_bound": bool(np.all(np.abs(self.dw) <= 2 * r + tol)),
            "hessian_bound": bool(
                np.all(np.abs(self.d2w) <= 2 + tol) and np.all(np.abs(self.tangential) <= 2 + tol)
            ),
        }
        if not math.isinf(R):
            outer = r >= 3 * R
            checks["constant_outside"] = bool(np.ptp(self.w[outer]) <= tol * R**2) if outer.any() else True
        return checks


@dataclass(frozen=True)
class LocalizedVirial:
    term1: float
    term2: float
    term3_bound: float
    variance_w: float
    momentum_w: float
    constant: float = TERM3_CONSTANT


def localized_virial(field: ComplexField, weight: LocalizedWeight, gamma: float) -> LocalizedVirial:
    """Split of the localized virial second derivative (divided by gamma).

    term1 = 8 int (gamma |grad u|^2 - (3/4) |u|^4) over all of R^3;
    term2 = gamma [4 Re int_{|x|>R} conj(u_j) u_k d_jk w - 8 int_{|x|>R} |grad u|^2],
    nonpositive because the Hessian of w is at most 2;
    term3_bound = C int_{|x|>R} (R^-2 |u|^2 + |u|^4) with C = 8.
    """
    if field.grid.kind != "radial":
        raise ValueError("localized virial needs a radial field")
    grid, r, v, dv, u, u_r = _radial_parts(field)
    if not np.array_equal(weight.r, r):
        raise ValueError("weight sampled on a different grid")
    wq = grid.weight * r**2  # 4 pi r^2 dr
    n = norms(field)
    term1 = 8.0 * (gamma * n.grad_sq - 0.75 * n.l4_quartic)
    if math.isinf(weight.R):
        term2 = 0.0
        term3 = 0.0
    else:
        ext = r > weight.R
        grad2 = np.abs(u_r[ext]) ** 2
        term2 = gamma * np.sum(wq[ext] * (4.0 * weight.d2w[ext] - 8.0) * grad2)
        term3 = TERM3_CONSTANT * np.sum(
            wq[ext] * (np.abs(u[ext]) ** 2 / weight.R**2 + np.abs(u[ext]) ** 4)
        )
    variance_w = np.sum(wq * weight.w * np.abs(u) ** 2)
    momentum_w = 2.0 * np.sum(wq * np.imag(np.conj(u) * u_r) * weight.dw)
    return LocalizedVirial(float(term1), float(term2), float(term3), float(variance_w), float(momentum_w))


# ---------------------------------------------------------------------------
# energy trapping


def _as_norms(obj) -> tuple[float, float, float]:
    """(mass, grad_sq, quartic) from FieldNorms, a profile or a mapping."""
    if isinstance(obj, FieldNorms):
        return obj.mass, obj.grad_sq, obj.l4_quartic
    if isinstance(obj, GroundStateProfile):
        return obj.mass, obj.grad_sq, obj.quartic
    if isinstance(obj, Mapping):
        quart = obj.get("quartic", obj.get("l4_quartic", obj.get("P")))
        return float(obj.get("mass", obj.get("M"))), float(obj.get("grad_sq", obj.get("G"))), float(quart)
    raise TypeError(f"cannot read norms from {type(obj).__name__}")


def _energy_plus(mass_grad_quartic, gamma_plus):
    _, g, p = mass_grad_quartic
    return 0.5 * gamma_plus * g - 0.25 * p


@dataclass(frozen=True)
class TrappingCertificate:
    delta: float
    delta_prime: float
    epsilon: float
    c: float
    y0: float

    @property
    def epsilon_critical(self) -> float:
        dp = self.delta_prime
        return (self.delta + 2 * dp + dp * dp) / (2 * (1 + dp) ** 2)


def _trapping_root(delta: float, xtol: float = 1e-15) -> float:
    """Root y > 1 of 3y^2 - 2y^3 = 1 - delta (the cubic is decreasing there)."""
    target = 1.0 - delta
    f = lambda y: 3 * y * y - 2 * y**3 - target
    hi = 2.0
    while f(hi) > 0:
        hi *= 2.0
    if f(1.0) <= 0:
        return 1.0
    return brentq(f, 1.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def trapping_certificate(u0_norms, rplus_norms, gamma_plus: float, delta: float) -> TrappingCertificate:
    """Constants delta', epsilon, c for which, along the gamma_+ flow from u0,

        |u|_2 |grad u|_2 >= (1 + delta') |R|_2 |grad R|_2   and
        int gamma_+ (1 + epsilon) |grad u|^2 - (3/4) |u|^4 < -c.

    Expanding the virial integrand gives the bracket
    delta + 2 delta' + delta'^2 - 2 epsilon (1 + delta')^2, so epsilon is
    taken as half of the largest admissible value.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    m0, g0, p0 = _as_norms(u0_norms)
    mr, gr, pr = _as_norms(rplus_norms)
    e0 = _energy_plus((m0, g0, p0), gamma_plus)
    er = _energy_plus((mr, gr, pr), gamma_plus)
    lhs, rhs = m0 * e0, (1.0 - delta) * mr * er
    if lhs > rhs + 1e-12 * abs(mr * er):
        raise ValueError(f"hypothesis M(u0)E+(u0) <= (1-delta) M(R+)E+(R+) fails: {lhs} > {rhs}")
    y0 = math.sqrt(m0 * g0 / (mr * gr))
    if y0 < 1.0 - 1e-12:
        raise ValueError(f"hypothesis |u0|_2 |grad u0|_2 >= |R+|_2 |grad R+|_2 fails: ratio {y0}")
    y_star = _trapping_root(delta)
    dp = y_star - 1.0
    s = delta + 2 * dp + dp * dp
    eps = s / (4.0 * (1.0 + dp) ** 2)
    c = gamma_plus * mr * gr / (2.0 * m0) * (s - 2.0 * eps * (1.0 + dp) ** 2)
    return TrappingCertificate(delta=delta, delta_prime=dp, epsilon=eps, c=c, y0=y0)


def norm_ratio(field_norms, rplus_norms) -> float:
    """|u|_2 |grad u|_2 / (|R|_2 |grad R|_2)."""
    m, g, _ = _as_norms(field_norms)
    mr, gr, _ = _as_norms(rplus_norms)
    return math.sqrt(m * g / (mr * gr))


def augmented_virial_integrand(field_norms, gamma_plus: float, epsilon: float) -> float:
    """int gamma_+ (1 + epsilon) |grad u|^2 - (3/4) |u|^4."""
    _, g, p = _as_norms(field_norms)
    return gamma_plus * (1.0 + epsilon) * g - 0.75 * p


@dataclass(frozen=True)
class BlowupConditions:
    satisfied: bool
    delta_margin: float
    mass_energy_ok: bool
    gradient_ok: bool
    gradient_ratio: float


def check_blowup_conditions(u0_norms, rplus_norms, gamma_plus: float | None = None,
                            tol: float = 1e-9) -> BlowupConditions:
    """Both mass-energy conditions; the first must hold with margin above ``tol``."""
    if gamma_plus is None:
        if not isinstance(rplus_norms, GroundStateProfile):
            raise ValueError("gamma_plus is required unless a profile is given")
        gamma_plus = rplus_norms.gamma_scale
    n0 = _as_norms(u0_norms)
    nr = _as_norms(rplus_norms)
    me0 = n0[0] * _energy_plus(n0, gamma_plus)
    mer = nr[0] * _energy_plus(nr, gamma_plus)
    margin = 1.0 - me0 / mer
    ratio = math.sqrt(n0[0] * n0[1] / (nr[0] * nr[1]))
    me_ok = margin > tol
    grad_ok = ratio >= 1.0
    return BlowupConditions(me_ok and grad_ok, float(margin), me_ok, grad_ok, float(ratio))


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    E_plus: float
    E_minus: float
    grad_sq: float
    quartic: float
    variance: float
    momentum: float
    virial_rhs: float
    variance_w: float | None = None
    momentum_w: float | None = None
    virial_rhs_localized: float | None = None

    CSV_COLUMNS = ("t", "mass", "E_plus", "E_minus", "grad_sq", "quartic", "variance", "momentum", "virial_rhs")

    def as_row(self) -> list[float]:
        return [getattr(self, c) for c in self.CSV_COLUMNS]

    def as_dict(self) -> dict:
        return asdict(self)


def diagnostics_record(
    t: float,
    field: ComplexField,
    gamma_plus: float,
    gamma_minus: float,
    gamma: float,
    weight: LocalizedWeight | None = None,
) -> DiagnosticsRecord:
    n = norms(field)
    e_plus = 0.5 * gamma_plus * n.grad_sq - 0.25 * n.l4_quartic
    e_minus = 0.5 * gamma_minus * n.grad_sq + 0.25 * n.l4_quartic
    vq = virial_quantities(field, gamma)
    loc = None
    if weight is not None:
        lv = localized_virial(field, weight, gamma)
        loc = (lv.variance_w, lv.momentum_w, lv.term1 + lv.term2)
    return DiagnosticsRecord(
        t=float(t), mass=n.mass, E_plus=e_plus, E_minus=e_minus,
        grad_sq=n.grad_sq, quartic=n.l4_quartic,
        variance=vq.variance, momentum=vq.momentum, virial_rhs=vq.virial_rhs,
        variance_w=loc[0] if loc else None,
        momentum_w=loc[1] if loc else None,
        virial_rhs_localized=loc[2] if loc else None,
    )
