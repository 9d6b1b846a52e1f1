import numpy as np
import pytest

from hardylab.atoms import Cube, make_atom
from hardylab.grid import SampledFunction, lp_quasinorm, make_grid, sample
from hardylab.maximal import (
    hl_maximal,
    hp_quasinorm,
    make_bump,
    make_ladder,
    power_maximal,
    smooth_maximal,
)


@pytest.fixture(scope="module")
def grid1024():
    return make_grid(1, 8.0, 1024)


@pytest.fixture(scope="module")
def bump():
    return make_bump(1)


@pytest.fixture(scope="module")
def ladder(grid1024):
    return make_ladder(grid1024)


def indicator(grid, lo, hi):
    x = grid.axis_points()
    return SampledFunction(grid, ((x >= lo) & (x <= hi)).astype(float))


class TestBump:
    def test_value_at_origin(self, bump):
        assert bump(0.0) == pytest.approx(bump.normalization * np.exp(-1.0))
        assert bump.peak == pytest.approx(bump(0.0))

    def test_support(self, bump):
        assert bump(1.0) == 0.0
        assert bump(-1.2) == 0.0
        assert bump(0.999) > 0.0

    def test_unit_mass_against_quad_oracle(self, bump):
        # Independent oracle: adaptive quadrature of the unnormalized profile.
        from scipy.integrate import quad

        raw, _ = quad(lambda u: np.exp(1.0 / (u * u - 1.0)), -1.0, 1.0)
        assert bump.normalization * raw == pytest.approx(1.0, abs=1e-8)

    def test_unit_mass_2d(self):
        from scipy.integrate import quad

        b2 = make_bump(2)
        raw, _ = quad(lambda r: 2.0 * np.pi * r * np.exp(1.0 / (r * r - 1.0)), 0.0, 1.0)
        assert b2.normalization * raw == pytest.approx(1.0, abs=1e-8)


class TestLadder:
    def test_range(self, grid1024, ladder):
        assert ladder.scales[0] == grid1024.dx
        assert ladder.scales[-1] >= 2.0 * grid1024.L

    def test_half_steps(self, grid1024):
        full = make_ladder(grid1024)
        half = make_ladder(grid1024, half_steps=True)
        assert len(half.scales) == 2 * len(full.scales) - 1


class TestSmoothMaximal:
    def test_constant_preserved(self, grid1024, bump, ladder):
        one = sample(lambda x: np.ones_like(x), grid1024)
        out = smooth_maximal(one, bump, ladder)
        assert np.max(np.abs(out.values - 1.0)) < 1e-8

    def test_dominates_each_scale(self, grid1024, bump, ladder):
        f = indicator(grid1024, -0.5, 0.5)
        out = smooth_maximal(f, bump, ladder)
        # recompute one mid-ladder scale by hand
        from hardylab.maximal import _periodized_kernel
        from hardylab.grid import dft, idft, Spectrum

        t = ladder.scales[len(ladder.scales) // 2]
        kern = _periodized_kernel(bump, t, grid1024)
        conv = idft(
            Spectrum(
                grid1024,
                dft(f).coefficients
                * dft(SampledFunction(grid1024, kern)).coefficients,
            )
        )
        assert np.all(out.values.real >= np.abs(conv.values) - 1e-12)

    def test_bounded_by_sup(self, grid1024, bump, ladder):
        rng = np.random.default_rng(1)
        f = SampledFunction(grid1024, rng.standard_normal(1024))
        out = smooth_maximal(f, bump, ladder)
        assert np.max(out.values.real) <= f.max_abs() * (1 + 1e-8)

    def test_plateau_value_with_conv_oracle(self, grid1024, bump, ladder):
        # For t <= 1 the whole bump mass sits inside the plateau of the
        # indicator of [-1, soft 1], so the small-scale average is 1; oracle =
        # direct convolution quadrature at one scale.
        f = indicator(grid1024, -1.0, 1.0)
        out = smooth_maximal(f, bump, ladder)
        center = grid1024.M // 2
        assert out.values[center].real == pytest.approx(1.0, abs=0.02)

        t = 0.5
        x = grid1024.axis_points()
        direct = np.sum(bump((0.0 - x) / t) / t * f.values.real) * grid1024.dx
        assert direct == pytest.approx(1.0, abs=0.02)


class TestHlMaximal:
    def test_indicator_outside_value(self, grid1024, ladder):
        # sup_r (r - 1)_+ / r = 1/2 at r = 2 for x = 2 outside [0, 1]; oracle
        # = dense sweep over radii of the clipped-window average.
        f = indicator(grid1024, 0.0, 1.0)
        out = hl_maximal(f, ladder)
        x = grid1024.axis_points()
        i2 = int(np.argmin(np.abs(x - 2.0)))
        assert out.values[i2].real == pytest.approx(0.5, rel=0.05)

        rs = np.linspace(0.05, 16.0, 4000)
        window = lambda r: max(0.0, min(2.0 + r, 1.0) - max(2.0 - r, 0.0))
        dense = max(window(r) / r for r in rs)
        assert dense == pytest.approx(0.5, rel=1e-3)

    def test_indicator_inside_value(self, grid1024, ladder):
        f = indicator(grid1024, 0.0, 1.0)
        out = hl_maximal(f, ladder)
        x = grid1024.axis_points()
        i_half = int(np.argmin(np.abs(x - 0.5)))
        assert out.values[i_half].real == pytest.approx(2.0, rel=0.05)

        rs = np.linspace(0.01, 16.0, 8000)
        window = lambda r: max(0.0, min(0.5 + r, 1.0) - max(0.5 - r, 0.0))
        dense = max(window(r) / r for r in rs)
        assert dense == pytest.approx(2.0, rel=1e-2)

    def test_zero_function(self, grid1024, ladder):
        f = SampledFunction(grid1024, np.zeros(1024))
        out = hl_maximal(f, ladder)
        assert np.all(out.values == 0)

    def test_dominates_smooth_maximal(self, grid1024, bump, ladder):
        # |phi_t * f| <= sup(phi_t,disc) * t^n * (ball average at radius t);
        # the explicit constant comes from the sampled bump's peak and its
        # discrete-mass renormalization, with a factor 2 of headroom for the
        # clipped-versus-periodic boundary mismatch.
        from hardylab.maximal import _periodized_kernel

        atom = make_atom(Cube((0.5,), 1.0), 1.0, 2, seed=3, grid=grid1024)
        f = atom.values
        smooth = smooth_maximal(f, bump, ladder)
        rough = hl_maximal(f.abs(), ladder)
        const = 0.0
        for t in ladder.scales:
            kern = _periodized_kernel(bump, t, grid1024)
            const = max(const, float(np.max(kern)) * t)
        assert np.all(
            rough.values.real >= smooth.values.real / (2.0 * const) - 1e-12
        )


class TestPowerMaximal:
    def test_r_one_identity(self, grid1024, ladder):
        f = indicator(grid1024, -1.0, 0.5)
        a = power_maximal(f, 1.0, ladder)
        b = hl_maximal(f, ladder)
        assert np.array_equal(a.values, b.values)

    def test_rejects_r_below_one(self, grid1024, ladder):
        f = indicator(grid1024, -1.0, 0.5)
        with pytest.raises(ValueError):
            power_maximal(f, 0.5, ladder)

    def test_constant_value_dense_sweep_oracle(self, grid1024, ladder):
        # For f = c on the whole box the discrete sup at an interior point is
        # sup_r min(2r, clipped)/r * c^r, power 1/r; oracle = dense r sweep.
        c = 0.7
        f = SampledFunction(grid1024, c * np.ones(1024))
        out = power_maximal(f, 2.0, ladder)
        center = grid1024.M // 2
        rs = np.linspace(grid1024.dx, 16.0, 2000)
        dense = max(min(2 * r, 8.0 + grid1024.dx) / r for r in rs) ** 0.5 * c
        assert out.values[center].real == pytest.approx(dense, rel=0.05)
        assert out.values[center].real >= c

    def test_lower_bound_against_plain_maximal(self, grid1024, ladder):
        # With the r^{-n} normalization the ball measure has mass at most 2
        # (n = 1), so M^(2) can undershoot M^(1) by at most sqrt(2).
        atom = make_atom(Cube((0.0,), 1.0), 1.0, 2, seed=4, grid=grid1024)
        f = atom.values
        m1 = hl_maximal(f, ladder)
        m2 = power_maximal(f, 2.0, ladder)
        assert np.all(m2.values.real >= m1.values.real / np.sqrt(2.0) - 1e-12)


class TestHpQuasinorm:
    def test_zero(self, grid1024, bump, ladder):
        f = SampledFunction(grid1024, np.zeros(1024))
        assert hp_quasinorm(f, 1.0, bump, ladder) == 0.0

    def test_exact_homogeneity(self, grid1024, bump, ladder):
        atom = make_atom(Cube((0.0,), 1.0), 1.0, 2, seed=5, grid=grid1024)
        f = atom.values
        for p in (0.5, 1.0, 2.0):
            a = hp_quasinorm(2.0 * f, p, bump, ladder)
            b = 2.0 * hp_quasinorm(f, p, bump, ladder)
            assert a == pytest.approx(b, rel=1e-13)

    def test_translation_invariance(self, grid1024, bump, ladder):
        atom = make_atom(Cube((0.0,), 1.0), 1.0, 2, seed=6, grid=grid1024)
        f = atom.values
        g = SampledFunction(grid1024, np.roll(f.values, 37))
        a = hp_quasinorm(f, 1.0, bump, ladder)
        b = hp_quasinorm(g, 1.0, bump, ladder)
        assert a == pytest.approx(b, rel=1e-12)

    def test_single_atom_value_and_refinement(self, bump):
        # Self-convergence oracle: the value is O(1) and stable under M -> 2M.
        vals = {}
        for M in (1024, 2048):
            g = make_grid(1, 8.0, M)
            atom = make_atom(Cube((0.0,), 1.0), 1.0, 2, seed=7, grid=g)
            vals[M] = hp_quasinorm(atom.values, 1.0, bump, make_ladder(g))
        assert 0.1 <= vals[1024] <= 10.0
        assert abs(vals[2048] - vals[1024]) / vals[1024] < 0.2

    @pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
    def test_comparable_to_lp_above_one(self, grid1024, bump, ladder, p):
        # Between 1 and infinity the maximal quasinorm is equivalent to the
        # Lebesgue norm; the observed ratio window stays narrow.
        rng = np.random.default_rng(42)
        ratios = []
        for trial in range(12):
            coeffs = rng.standard_normal(9) + 1j * rng.standard_normal(9)
            x = grid1024.axis_points()
            vals = np.zeros(1024, dtype=complex)
            for k, c in enumerate(coeffs):
                vals += c * np.exp(2j * np.pi * (k - 4) * x / 16.0)
            f = SampledFunction(grid1024, vals)
            ratios.append(hp_quasinorm(f, p, bump, ladder) / lp_quasinorm(f, p))
        assert max(ratios) / min(ratios) <= 20.0
