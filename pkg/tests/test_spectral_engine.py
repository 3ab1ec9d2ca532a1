import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmnls.diagnostics import energies
from dmnls.dispersion_map import DispersionMap, big_gamma
from dmnls.spectral_engine import (
    ComplexField,
    DispersionDiscontinuityError,
    RadialGrid3D,
    SplitStepConfig,
    TorusGrid1D,
    collect,
    evolve,
    is_schrodinger_admissible,
    lebesgue_norm,
    linear_propagate,
    nonlinear_phase,
    norms,
    spacetime_norm,
    strang_step,
)

from helpers import REFERENCE

PI32 = math.pi**1.5


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    n = grid.n_values
    vals = rng.normal(size=n) + 1j * rng.normal(size=n)
    # smooth it so the spectrum decays
    coeffs = grid.to_spectral(vals) * np.exp(-0.05 * grid.kinetic)
    return ComplexField(grid, grid.from_spectral(coeffs))


def gaussian_radial(grid):
    return ComplexField.from_function(grid, lambda r: np.exp(-(r**2) / 2))


class TestGrids:
    def test_torus_validation(self):
        with pytest.raises(ValueError):
            TorusGrid1D(1.0, 12)
        with pytest.raises(ValueError):
            TorusGrid1D(1.0, 4)

    def test_torus_wavenumbers(self):
        g = TorusGrid1D(math.pi, 16)
        assert sorted(g.wavenumbers) == pytest.approx(list(range(-8, 8)))

    def test_radial_nodes(self):
        g = RadialGrid3D(8.0, 16)
        assert g.nodes[0] == pytest.approx(0.5) and g.nodes[-1] == pytest.approx(7.5)
        assert g.n_values == 15

    def test_radial_transform_is_self_inverse(self):
        g = RadialGrid3D(8.0, 64)
        v = np.random.default_rng(0).normal(size=63)
        assert np.allclose(g.from_spectral(g.to_spectral(v)), v, atol=1e-14)

    def test_radial_derivative(self):
        g = RadialGrid3D(30.0, 1024)
        v = g.nodes * np.exp(-(g.nodes**2) / 2)
        exact = (1 - g.nodes**2) * np.exp(-(g.nodes**2) / 2)
        assert np.max(np.abs(g.derivative(v) - exact)) < 1e-10


class TestNorms:
    def test_constant_torus(self):
        g = TorusGrid1D(2.5, 64)
        assert norms(ComplexField.from_u(g, np.full(64, 2.0))).mass == pytest.approx(20.0)

    def test_plane_wave_gradient(self):
        g = TorusGrid1D(math.pi, 64)
        assert norms(ComplexField.from_u(g, np.exp(1j * g.nodes))).grad_sq == pytest.approx(2 * math.pi)

    def test_radial_gaussian(self):
        n = norms(gaussian_radial(RadialGrid3D(8.0, 1024)))
        assert n.mass == pytest.approx(PI32, rel=1e-8)
        assert n.grad_sq == pytest.approx(1.5 * PI32, rel=1e-8)
        assert n.l4_quartic == pytest.approx((math.pi / 2) ** 1.5, rel=1e-8)
        assert n.sup == pytest.approx(1.0, abs=1e-4)
        assert n.h1 == pytest.approx(math.sqrt(2.5 * PI32), rel=1e-8)

    def test_lebesgue_matches_mass(self):
        f = random_field(TorusGrid1D(10.0, 256), 3)
        assert lebesgue_norm(f, 2) ** 2 == pytest.approx(norms(f).mass, rel=1e-13)


class TestLinearPropagate:
    def test_single_mode(self):
        g = TorusGrid1D(math.pi, 64)
        xi, tau = 3.0, 0.37
        out = linear_propagate(ComplexField.from_u(g, np.exp(1j * xi * g.nodes)), tau)
        assert np.max(np.abs(out.u - np.exp(-1j * tau * xi**2) * np.exp(1j * xi * g.nodes))) < 1e-12

    def test_radial_eigenmode(self):
        g = RadialGrid3D(5.0, 128)
        k = 7 * math.pi / 5.0
        out = linear_propagate(ComplexField(g, np.sin(k * g.nodes)), 0.2)
        assert np.max(np.abs(out.values - np.exp(-0.2j * k * k) * np.sin(k * g.nodes))) < 1e-12

    @pytest.mark.parametrize("grid", [TorusGrid1D(10.0, 256), RadialGrid3D(10.0, 256)])
    def test_zero_step(self, grid):
        f = random_field(grid, 1)
        assert np.max(np.abs(linear_propagate(f, 0.0).values - f.values)) < 1e-13

    @given(st.integers(0, 1000), st.floats(-10, 10), st.sampled_from(["torus", "radial"]))
    @settings(max_examples=50, deadline=None)
    def test_unitarity(self, seed, dgamma, kind):
        grid = TorusGrid1D(10.0, 256) if kind == "torus" else RadialGrid3D(10.0, 256)
        f = random_field(grid, seed)
        assert norms(linear_propagate(f, dgamma)).mass == pytest.approx(norms(f).mass, rel=1e-12)

    @given(st.integers(0, 1000), st.floats(-5, 5), st.floats(-5, 5))
    @settings(max_examples=50, deadline=None)
    def test_group_law(self, seed, a, b):
        f = random_field(TorusGrid1D(10.0, 256), seed)
        lhs = linear_propagate(linear_propagate(f, b), a).values
        rhs = linear_propagate(f, a + b).values
        assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, np.max(np.abs(f.values)))


class TestNonlinearPhase:
    def test_constant_amplitude(self):
        g = TorusGrid1D(1.0, 16)
        out = nonlinear_phase(ComplexField.from_u(g, np.full(16, 1.5 + 0j)), 0.3)
        assert np.allclose(out.u, 1.5 * np.exp(0.3j * 1.5**2), atol=1e-15)

    def test_identity_and_mass(self):
        f = gaussian_radial(RadialGrid3D(8.0, 256)) * 2.0
        assert np.array_equal(nonlinear_phase(f, 0.0).values, f.values)
        assert norms(nonlinear_phase(f, 0.7)).mass == pytest.approx(norms(f).mass, rel=1e-14)

    def test_radial_uses_physical_amplitude(self):
        g = RadialGrid3D(8.0, 64)
        f = gaussian_radial(g)
        out = nonlinear_phase(f, 0.5)
        assert np.allclose(out.u, f.u * np.exp(0.5j * np.abs(f.u) ** 2), atol=1e-15)


class TestStrangStep:
    def test_zero_field(self):
        g = RadialGrid3D(8.0, 64)
        assert np.all(strang_step(ComplexField.zeros(g), 0.0, 0.1, REFERENCE).values == 0)

    def test_rejects_step_over_jump(self):
        g = TorusGrid1D(4.0, 64)
        with pytest.raises(DispersionDiscontinuityError, match="step crosses dispersion discontinuity"):
            strang_step(random_field(g, 0), 0.45, 0.1, REFERENCE)

    def test_step_ending_on_jump_is_allowed(self):
        g = TorusGrid1D(4.0, 64)
        strang_step(random_field(g, 0), 0.4, 0.1, REFERENCE)

    def test_mass_per_step(self):
        f = gaussian_radial(RadialGrid3D(10.0, 512)) * 3.0
        out = strang_step(f, 0.0, 0.01, DispersionMap.constant(1.0))
        assert norms(out).mass == pytest.approx(norms(f).mass, rel=1e-12)

    def test_soliton_local_error_is_third_order(self, q_profile):
        grid = RadialGrid3D(20.0, 1024)
        u0 = q_profile.sample(grid)
        m = DispersionMap.constant(1.0)
        errs = []
        for h in (0.02, 0.01):
            out = strang_step(u0, 0.0, h, m)
            errs.append(np.max(np.abs(out.values - np.exp(1j * h) * u0.values)))
        assert 6.0 < errs[0] / errs[1] < 10.0


class TestEvolve:
    def test_invalid_interval(self):
        with pytest.raises(ValueError):
            evolve(random_field(TorusGrid1D(4.0, 64), 0), 1.0, 1.0, REFERENCE, SplitStepConfig(dt_max=0.01))

    def test_linear_run_matches_exact_propagator(self):
        f = random_field(TorusGrid1D(20.0, 512), 2)
        res = evolve(f, 0.1, 2.3, REFERENCE, SplitStepConfig(dt_max=0.07, nonlinear=False))
        exact = linear_propagate(f, big_gamma(REFERENCE, 2.3, 0.1))
        assert res.status == "completed" and res.t_final == 2.3
        assert np.max(np.abs(res.field.values - exact.values)) < 1e-12

    def test_steps_respect_breakpoints(self):
        times = []
        f = random_field(TorusGrid1D(4.0, 64), 0)
        evolve(f, 0.0, 2.0, REFERENCE, SplitStepConfig(dt_max=0.3), observer=lambda t, _: times.append(t))
        assert {0.5, 1.0, 1.5, 2.0} <= set(times)
        assert np.max(np.diff(times)) <= 0.3 + 1e-15

    def test_observer_stride(self):
        f = random_field(TorusGrid1D(4.0, 64), 0)
        _, snaps = collect(f, 0.0, 0.5, DispersionMap.constant(1.0), SplitStepConfig(dt_max=0.01, snapshot_stride=10))
        assert [round(t, 12) for t, _ in snaps] == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]

    def test_soliton_sup_norm_stable(self, q_profile):
        grid = RadialGrid3D(20.0, 1024)
        u0 = q_profile.sample(grid)
        _, snaps = collect(u0, 0.0, 0.5, DispersionMap.constant(1.0), SplitStepConfig(dt_max=0.0025))
        sups = np.array([norms(f).sup for _, f in snaps])
        assert np.max(np.abs(sups / sups[0] - 1)) < 0.01

    def test_supercritical_datum_blows_up(self, q_profile):
        grid = RadialGrid3D(20.0, 1024)
        u0 = q_profile.sample(grid, amplitude=1.2)
        cfg = SplitStepConfig(dt_max=1e-3, phase_cfl=0.02, zoom_points=32)
        res = evolve(u0, 0.0, 0.5, DispersionMap.two_step(1.0, 1.0, 0.5), cfg)
        assert res.status == "blowup_detected" and 0 < res.t_star < 0.5
        assert res.final_norms.h1 >= 1e3 * res.initial_norms.h1

    def test_non_finite_datum_rejected(self):
        g = TorusGrid1D(4.0, 64)
        vals = np.zeros(64, complex)
        vals[3] = np.nan
        with pytest.raises(ValueError, match="not finite"):
            evolve(ComplexField(g, vals), 0.0, 0.1, REFERENCE, SplitStepConfig(dt_max=0.01))

    def test_strang_order_and_segment_energy(self, q_profile):
        # perturbed soliton inside one segment: energy drift shrinks ~4x per halving
        grid = RadialGrid3D(20.0, 1024)
        u0 = q_profile.sample(grid, amplitude=0.9)
        m = DispersionMap.two_step(1.0, 1.0, 0.5)
        e0 = energies(u0, 1.0, 1.0)[0]
        drifts = []
        for h in (0.01, 0.005):
            res = evolve(u0, 0.0, 0.25, m, SplitStepConfig(dt_max=h))
            drifts.append(abs(energies(res.field, 1.0, 1.0)[0] - e0))
        assert 3.2 < drifts[0] / drifts[1] < 4.8


class TestSpacetimeNorm:
    def test_admissibility(self):
        assert is_schrodinger_admissible(3, 5, 30 / 11)[0]
        assert is_schrodinger_admissible(1, 8, 4)[0]
        assert is_schrodinger_admissible(1, math.inf, 2)[0]
        ok, reason = is_schrodinger_admissible(2, 2, math.inf)
        assert not ok and "(2, 2, inf)" in reason
        assert not is_schrodinger_admissible(1, 4, 4)[0]

    def test_unitarity(self):
        f = random_field(TorusGrid1D(20.0, 256), 4)
        snaps = [(t, linear_propagate(f, t)) for t in np.linspace(0, 3, 7)]
        assert spacetime_norm(snaps, math.inf, 2) == pytest.approx(math.sqrt(norms(f).mass), rel=1e-12)

    def test_constant_in_time(self):
        g = TorusGrid1D(1.0, 16)
        c = ComplexField.from_u(g, np.full(16, 2.0))
        snaps = [(t, c) for t in np.linspace(0, 3.0, 5)]
        assert spacetime_norm(snaps, 4, 4) == pytest.approx(3.0**0.25 * lebesgue_norm(c, 4))

    def test_errors(self):
        c = ComplexField.zeros(TorusGrid1D(1.0, 16))
        with pytest.raises(ValueError):
            spacetime_norm([(0.0, c)], 4, 4)
        with pytest.raises(ValueError):
            spacetime_norm([(1.0, c), (0.0, c)], 4, 4)
