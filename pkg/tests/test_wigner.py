import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subplanck import (
    CompassSpec,
    Displacement,
    GaussianPacket,
    GridMismatchError,
    GridSpec,
    build_density,
    coherence_scale,
    displace,
    inner,
    make_cat,
    make_compass,
    make_gaussian,
    moyal_overlap,
    pure_density,
    structure_report,
    tile_area,
    wigner,
)
from subplanck.states import OverlapWarning, analytic_wigner_oracle
from subplanck.wigner import (
    ripple_frequency,
    wigner_of_psi,
    wigner_of_rho,
    wigner_slice,
)

HBAR, XI = 0.16, 0.4


def _oracle_grid(g):
    return np.meshgrid(g.x, g.p, indexing="ij")


class TestTransform:
    def test_gaussian_off_center(self, grid1024):
        psi = make_gaussian(GaussianPacket(1.2, -0.7, XI), grid1024)
        X, P = _oracle_grid(grid1024)
        ref = analytic_wigner_oracle("gaussian", {"x0": 1.2, "p0": -0.7, "xi": XI}, X, P, HBAR)
        assert np.max(np.abs(wigner(psi).values - ref)) < 1e-8

    def test_normalization_and_purity(self, grid1024):
        w = wigner(make_compass(CompassSpec(4, 4, XI), grid1024))
        assert w.total() == pytest.approx(1.0, abs=1e-6)
        assert w.purity() == pytest.approx(1.0, abs=1e-6)

    def test_pure_projector_matches_psi(self, grid512):
        psi = make_cat(2.0, XI, grid512)
        assert np.max(np.abs(wigner_of_rho(pure_density(psi)).values - wigner_of_psi(psi).values)) < 1e-10

    def test_mixture_drops_fringes(self, grid512):
        x0 = 2.0
        a = make_gaussian(GaussianPacket(-x0, 0, XI), grid512)
        b = make_gaussian(GaussianPacket(x0, 0, XI), grid512)
        w = wigner(build_density([(0.5, a), (0.5, b)]))
        X, P = _oracle_grid(grid512)
        ref = 0.5 * sum(analytic_wigner_oracle("gaussian", {"x0": s, "xi": XI}, X, P, HBAR) for s in (-x0, x0))
        assert np.max(np.abs(w.values - ref)) < 1e-8
        assert w.values.min() >= -1e-9
        assert w.purity() == pytest.approx(0.5, abs=1e-6)

    def test_linearity(self, grid512):
        a = make_cat(1.5, XI, grid512)
        b = make_gaussian(GaussianPacket(1, 1, 0.5), grid512)
        w = wigner(build_density([(0.3, a), (0.7, b)]))
        assert np.max(np.abs(w.values - 0.3 * wigner(a).values - 0.7 * wigner(b).values)) < 1e-10

    def test_negativity_is_reported(self, grid1024):
        assert wigner(make_cat(2.0, XI, grid1024)).negative_volume() > 0.1
        assert wigner(make_gaussian(GaussianPacket(0, 0, XI), grid1024)).negative_volume() == 0.0

    @settings(max_examples=15, deadline=None)
    @given(st.floats(-1.5, 1.5), st.floats(-1.2, 1.2))
    def test_translation_covariance(self, dx, dp):
        g = GridSpec.centered(256, 0.08, HBAR)
        psi = make_cat(1.5, XI, g)
        # shift by whole cells so translation is an exact index roll
        kx, kp = round(dx / g.dx), round(dp / g.dp)
        moved = displace(psi, Displacement(kx * g.dx, kp * g.dp))
        rolled = np.roll(np.roll(wigner(psi).values, kx, axis=0), kp, axis=1)
        assert np.max(np.abs(wigner(moved).values - rolled)) < 1e-6

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.0, 3.0), st.floats(0.0, 1.5), st.floats(0.3, 0.6))
    def test_bound_and_purity(self, x0, p0, xi):
        g = GridSpec.centered(256, 0.08, HBAR)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OverlapWarning)
            w = wigner(make_cat(x0, xi, g, p0=p0))
        assert np.max(np.abs(w.values)) <= 1 / (math.pi * HBAR) + 1e-6
        assert abs(w.purity() - 1) < 1e-6


class TestMoyal:
    def test_cat_against_fourier_oracle(self, grid1024):
        x0 = 2.0
        psi = make_cat(x0, XI, grid1024)
        dp = math.pi * HBAR / (2 * x0)
        z = np.sum(psi.density * np.exp(1j * dp * grid1024.x / HBAR)) * grid1024.dx
        m = moyal_overlap(wigner(psi), wigner(displace(psi, Displacement(0, dp))))
        assert m == pytest.approx(abs(z) ** 2, abs=1e-6)

    def test_far_gaussians(self, grid1024):
        a = wigner(make_gaussian(GaussianPacket(-4, 0, XI), grid1024))
        b = wigner(make_gaussian(GaussianPacket(4, 0, XI), grid1024))
        assert abs(moyal_overlap(a, b)) < 1e-8
        assert moyal_overlap(a, b) == moyal_overlap(b, a)

    def test_grid_mismatch(self, grid512, grid1024):
        with pytest.raises(GridMismatchError):
            moyal_overlap(wigner(make_gaussian(GaussianPacket(), grid512)),
                          wigner(make_gaussian(GaussianPacket(), grid1024)))


class TestStructureReport:
    def test_vacuum(self, grid1024):
        r = structure_report(make_gaussian(GaussianPacket(0, 0, XI), grid1024))
        assert r.L == pytest.approx(XI / math.sqrt(2), rel=1e-9)
        assert r.P == pytest.approx(HBAR / (XI * math.sqrt(2)), rel=1e-9)
        assert r.A == pytest.approx(HBAR / 2, rel=1e-9)
        assert r.a_sub == pytest.approx(2 * HBAR, rel=1e-9)
        assert r.n_states == pytest.approx(1 / (4 * math.pi), rel=1e-9)
        assert r.a_sub * r.A == pytest.approx(HBAR**2, rel=1e-15)

    def test_compass_spreads(self):
        # sparse limit: Var x = L^2/8 + xi^2/2, and the same in p with hbar/xi
        g = GridSpec.centered(2048, 0.02, HBAR)
        r = structure_report(make_compass(CompassSpec(8, 8, XI), g))
        assert r.L == pytest.approx(math.sqrt(8 + XI**2 / 2), rel=1e-6)
        assert r.P == pytest.approx(math.sqrt(8 + HBAR**2 / (2 * XI**2)), rel=1e-6)
        assert r.delta_p_min == pytest.approx(HBAR / r.L)
        assert r.tile_area == pytest.approx((2 * math.pi * HBAR) ** 2 / r.A)

    def test_times(self, grid1024):
        psi = make_compass(CompassSpec(4, 4, XI), grid1024)
        r = structure_report(psi, lyapunov=0.2, delta_p0=1.0)
        assert r.t_r == pytest.approx(5 * math.log(r.A / HBAR))
        assert r.t_hbar == pytest.approx(5 * math.log(6.25))
        vac = structure_report(make_gaussian(GaussianPacket(), grid1024), lyapunov=0.2)
        assert vac.t_r is None

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.0, 3.0), st.floats(0.25, 0.8))
    def test_uncertainty_floor(self, x0, xi):
        g = GridSpec.centered(512, 0.05, HBAR)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OverlapWarning)
            r = structure_report(make_cat(x0, xi, g))
        assert r.A >= HBAR / 2 - 1e-9


class TestCoherenceScale:
    def test_gaussian_closed_form(self, grid1024):
        psi = make_gaussian(GaussianPacket(0, 0, XI), grid1024)
        thr = math.exp(-0.5)
        # exp(-dp^2 xi^2/(4 hbar^2)) = e^{-1/2}  ->  dp = sqrt(2) hbar/xi
        cs = coherence_scale(psi, (0, 1), threshold=thr)
        res = min(grid1024.dx, grid1024.dp) / 4
        assert cs.delta == pytest.approx(math.sqrt(2) * HBAR / XI, abs=res)
        cs = coherence_scale(psi, (1, 0), threshold=thr)
        assert cs.delta == pytest.approx(math.sqrt(2) * XI, abs=res)

    def test_compass_first_zero(self):
        g = GridSpec.centered(1024, 0.025, HBAR)
        cs = coherence_scale(make_compass(CompassSpec(8, 8, XI), g), (1, 0), find_first_zero=True)
        assert cs.first_zero == pytest.approx(2 * math.pi * HBAR / 8, abs=g.dx)
        assert cs.first_zero_value < 0.01
        assert cs.displacement.delta_p == 0.0

    def test_no_crossing_reports_none(self, grid512):
        psi = make_gaussian(GaussianPacket(0, 0, XI), grid512)
        cs = coherence_scale(psi, (0, 1), threshold=0.01, max_magnitude=0.2)
        assert not cs.crossed and cs.displacement is None

    def test_rejects_bad_threshold(self, grid512):
        with pytest.raises(ValueError):
            coherence_scale(make_gaussian(GaussianPacket(), grid512), threshold=1.0)


class TestRipples:
    def test_cat_momentum_ripple(self, grid1024):
        w = wigner(make_cat(2.0, XI, grid1024))
        rf = ripple_frequency(w, "p", at=0.0)
        assert rf.frequency == pytest.approx(4.0 / HBAR, abs=rf.bin_width)

    def test_compass_position_ripple(self):
        g = GridSpec.centered(1024, 0.025, HBAR)
        w = wigner(make_compass(CompassSpec(8, 8, XI), g))
        rf = ripple_frequency(w, "x", at=0.0, window=(-2.0, 2.0))
        assert rf.frequency == pytest.approx(8.0 / HBAR, abs=rf.bin_width)

    def test_gaussian_has_none(self, grid1024):
        assert ripple_frequency(wigner(make_gaussian(GaussianPacket(), grid1024)), "p") is None


class TestSlicesAndTiles:
    def test_slice_matches_oracle(self, grid1024):
        psi = make_cat(2.0, XI, grid1024)
        x, vals = wigner_slice(psi, p=0.13)
        ref = analytic_wigner_oracle("cat", {"x0": 2.0, "xi": XI}, x, 0.13, HBAR)
        assert np.max(np.abs(vals - ref)) < 1e-10
        p, vals = wigner_slice(psi, x=0.3, refine=4)
        ref = analytic_wigner_oracle("cat", {"x0": 2.0, "xi": XI}, 0.3, p, HBAR)
        assert np.max(np.abs(vals - ref)) < 1e-10

    def test_slice_needs_one_axis(self, grid512):
        psi = make_gaussian(GaussianPacket(), grid512)
        with pytest.raises(ValueError):
            wigner_slice(psi)
        with pytest.raises(ValueError):
            wigner_slice(psi, p=0.0, x=0.0)

    @pytest.mark.parametrize("L,P", [(4.0, 4.0), (8.0, 8.0), (8.0, 16.0)])
    def test_two_routes_agree(self, L, P):
        g = GridSpec.centered(1024, 0.025, HBAR)
        psi = make_compass(CompassSpec(L, P, XI), g)
        direct = tile_area(psi, (0.8, 0.8))
        gridded = tile_area(wigner(psi), (0.8, 0.8))
        expected = (2 * math.pi * HBAR) ** 2 / (L * P)
        assert direct.area == pytest.approx(expected, rel=0.01)
        assert gridded.area == pytest.approx(direct.area, rel=1e-3)
        assert direct.period_x == pytest.approx(2 * math.pi * HBAR / P, rel=0.01)
        assert direct.period_p == pytest.approx(2 * math.pi * HBAR / L, rel=0.01)

    def test_no_pattern_raises(self, grid1024):
        with pytest.raises(ValueError):
            tile_area(make_gaussian(GaussianPacket(), grid1024), (0.3, 0.3))
