import numpy as np
import pytest

from hardylab.symbols import (
    Partition,
    builtin_symbol,
    cm_condition_ratio,
    dyadic_shells,
    forms_agree,
    homogeneity_deviation,
    plane_samples,
    plane_vanishing_order,
    power_symbol,
    random_frequency_tuples,
    sphere_directions,
)

VANISHING = ["sigma1", "sigma2", "sigma2_factored", "sigma3", "sigma3_factored", "sigma4"]


class TestBuiltins:
    def test_sigma1_point_values(self):
        s1 = builtin_symbol("sigma1")
        assert s1(1.0, 1.0, 1.0) == pytest.approx(3.0)
        assert s1(1.0, -1.0, 0.0) == 0.0

    def test_sigma4_vanishes_on_plane_point(self):
        s4 = builtin_symbol("sigma4")
        assert abs(s4(1.0, 2.0, -3.0)) < 1e-15

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown symbol"):
            builtin_symbol("nosuch")

    def test_unicode_alias(self):
        assert builtin_symbol("σ1").name == "sigma1"

    def test_constant_one_any_arity(self):
        for m in (1, 2, 3, 4):
            one = builtin_symbol("constant_one", m=m)
            args = [1.0] * m
            assert one(*args) == 1.0

    def test_constant_one_is_one_at_origin(self):
        # The constant symbol is not singular; the origin convention applies
        # only to the rational builtins.
        one = builtin_symbol("constant_one", m=2)
        assert one(0.0, 0.0) == 1.0

    def test_singular_builtins_are_zero_at_origin(self):
        assert builtin_symbol("sigma1")(0.0, 0.0, 0.0) == 0.0
        assert builtin_symbol("sigma4")(0.0, 0.0, 0.0) == 0.0
        assert builtin_symbol("sigma1_bilinear")(0.0, 0.0) == 0.0

    def test_kinds(self):
        assert builtin_symbol("sigma1").kind == "general"
        assert builtin_symbol("sigma2").kind == "mixed"
        assert builtin_symbol("sigma3").kind == "product"
        assert builtin_symbol("sigma4").kind == "mixed"

    def test_sigma4_group_counts_vary(self):
        s4 = builtin_symbol("sigma4")
        counts = sorted(part.group_count for part in s4.mixed_terms)
        assert counts == [1, 2]

    @pytest.mark.parametrize("name", VANISHING)
    def test_plane_vanishing_all_builtins(self, name):
        sym = builtin_symbol(name)
        pts = plane_samples(3, 1, 200, seed=5)
        rep = plane_vanishing_order(sym, 0, pts)
        assert rep.max_residual < 1e-12

    def test_finite_on_random_tuples(self):
        pts = random_frequency_tuples(3, 1, 500, seed=9)
        for name in VANISHING + ["constant_one"]:
            vals = builtin_symbol(name)(pts[:, 0], pts[:, 1], pts[:, 2])
            assert np.all(np.isfinite(vals))


class TestFormsAgree:
    def test_sigma2_sum_vs_factored(self):
        pts = random_frequency_tuples(3, 1, 1000, seed=1)
        dev = forms_agree(builtin_symbol("sigma2"), builtin_symbol("sigma2_factored"), pts)
        assert dev < 1e-12

    def test_sigma3_sum_vs_factored(self):
        pts = random_frequency_tuples(3, 1, 1000, seed=2)
        dev = forms_agree(builtin_symbol("sigma3"), builtin_symbol("sigma3_factored"), pts)
        assert dev < 1e-12

    def test_self_agreement(self):
        pts = random_frequency_tuples(3, 1, 100, seed=3)
        s1 = builtin_symbol("sigma1")
        assert forms_agree(s1, s1, pts) == 0.0

    def test_arity_mismatch(self):
        with pytest.raises(ValueError):
            forms_agree(builtin_symbol("sigma1"), builtin_symbol("sigma1_bilinear"), [])


class TestHomogeneity:
    def test_sigma1_degree_zero(self):
        s1 = builtin_symbol("sigma1")
        assert s1.homogeneous_degree_zero
        assert homogeneity_deviation(s1, 128, seed=0) < 1e-13

    def test_sigma1_quarter_to_four(self):
        s1 = builtin_symbol("sigma1")
        pts = random_frequency_tuples(3, 1, 64, seed=4)
        base = s1(pts[:, 0], pts[:, 1], pts[:, 2])
        for lam in (0.25, 0.5, 2.0, 4.0):
            scaled = s1(lam * pts[:, 0], lam * pts[:, 1], lam * pts[:, 2])
            assert np.max(np.abs(scaled - base)) < 1e-13 * np.max(1 + np.abs(base))

    def test_sigma2_not_flagged(self):
        assert not builtin_symbol("sigma2").homogeneous_degree_zero


class TestPowerSymbol:
    def test_square_values(self):
        s1 = builtin_symbol("sigma1")
        sq = power_symbol(s1, 2)
        assert sq(1.0, 1.0, 1.0) == pytest.approx(9.0)
        assert sq(1.0, -1.0, 0.0) == 0.0

    def test_matches_pointwise_power(self):
        s1 = builtin_symbol("sigma1")
        cube = power_symbol(s1, 3)
        pts = random_frequency_tuples(3, 1, 200, seed=6)
        base = s1(pts[:, 0], pts[:, 1], pts[:, 2])
        vals = cube(pts[:, 0], pts[:, 1], pts[:, 2])
        assert np.max(np.abs(vals - base**3)) <= 1e-13 * np.max(1 + np.abs(base) ** 3)

    def test_constant_power(self):
        one = builtin_symbol("constant_one", m=3)
        assert power_symbol(one, 5)(1.0, 2.0, 3.0) == 1.0

    def test_preserves_homogeneity_flag(self):
        assert power_symbol(builtin_symbol("sigma1"), 2).homogeneous_degree_zero


class TestCmCondition:
    def test_sigma1_order_zero_supremum(self):
        # Oracle: the supremum of (a+b+c)^2/(a^2+b^2+c^2) on the sphere is 3,
        # attained on the diagonal; dense sampling never exceeds it.
        s1 = builtin_symbol("sigma1")
        rng = np.random.default_rng(123)
        dense = rng.standard_normal((20000, 3, 1))
        dense /= np.linalg.norm(dense.reshape(-1, 3), axis=1)[:, None, None]
        dense_max = np.max(np.abs(s1(dense[:, 0], dense[:, 1], dense[:, 2])))
        assert dense_max <= 3.0 + 1e-12

        dirs = sphere_directions(3, 1, 64, seed=0)
        assert cm_condition_ratio(s1, (0, 0, 0), dirs) == pytest.approx(3.0, abs=1e-9)

    def test_constant_derivatives_vanish(self):
        one = builtin_symbol("constant_one", m=3)
        dirs = sphere_directions(3, 1, 32, seed=1)
        for alpha in [(1, 0, 0), (0, 1, 1), (2, 0, 0)]:
            assert cm_condition_ratio(one, alpha, dirs) < 1e-8

    def test_sigma1_first_derivative_shell_independent(self):
        # Degree-zero homogeneity forces the weighted derivative supremum to
        # agree between shells; oracle = evaluate on two shells directly.
        s1 = builtin_symbol("sigma1")
        dirs = sphere_directions(3, 1, 64, seed=2)
        vals = [cm_condition_ratio(s1, (1, 0, 0), dirs * r) for r in (1.0, 2.0, 4.0, 8.0)]
        for v in vals[1:]:
            assert abs(v - vals[0]) / vals[0] < 1e-6

    @pytest.mark.parametrize("name", VANISHING + ["constant_one"])
    def test_all_builtins_finite_up_to_order_two(self, name):
        sym = builtin_symbol(name)
        dirs = sphere_directions(3, 1, 16, seed=3)
        for alpha in [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0), (2, 0, 0)]:
            for radius in dyadic_shells():
                val = cm_condition_ratio(sym, alpha, dirs * radius)
                assert np.isfinite(val)

    def test_order_cap(self):
        with pytest.raises(ValueError, match="cap"):
            cm_condition_ratio(builtin_symbol("sigma1"), (3, 0, 0), sphere_directions(3, 1, 8, 0))

    def test_rejects_origin_sample(self):
        pts = np.zeros((1, 3, 1))
        with pytest.raises(ValueError, match="origin"):
            cm_condition_ratio(builtin_symbol("sigma1"), (0, 0, 0), pts)


class TestPlaneVanishing:
    def test_sigma1_square_first_transverse_derivative(self):
        # Oracle: symbolic differentiation of the squared rational function
        # along the diagonal direction at three plane points.
        import sympy as sp

        a, b, c, t = sp.symbols("a b c t", real=True)
        u = 1 / sp.sqrt(3)
        expr = ((a + b + c) ** 2 / (a**2 + b**2 + c**2)) ** 2
        shifted = expr.subs({a: a + t * u, b: b + t * u, c: c + t * u})
        deriv = sp.diff(shifted, t).subs(t, 0)
        for pa, pb in [(1.0, 0.5), (-2.0, 1.0), (0.7, 0.7)]:
            pc = -(pa + pb)
            val = float(deriv.subs({a: pa, b: pb, c: pc}))
            assert abs(val) < 1e-12

        sq = power_symbol(builtin_symbol("sigma1"), 2)
        pts = plane_samples(3, 1, 50, seed=7)
        rep = plane_vanishing_order(sq, 1, pts)
        assert rep.residuals[1] < 1e-6

    def test_constant_does_not_vanish(self):
        one = builtin_symbol("constant_one", m=3)
        pts = plane_samples(3, 1, 20, seed=8)
        rep = plane_vanishing_order(one, 0, pts)
        assert rep.max_residual == pytest.approx(1.0)

    def test_rejects_off_plane_samples(self):
        pts = random_frequency_tuples(3, 1, 5, seed=9)
        with pytest.raises(ValueError, match="plane"):
            plane_vanishing_order(builtin_symbol("sigma1"), 0, pts)


class TestPartition:
    def test_valid_partition(self):
        sb = builtin_symbol("sigma1_bilinear")
        lin = builtin_symbol("constant_one", m=1)
        part = Partition(((0, 1), (2,)), (sb, lin))
        assert part.m == 3
        assert part.group_count == 2

    def test_rejects_overlap(self):
        sb = builtin_symbol("sigma1_bilinear")
        with pytest.raises(ValueError, match="partition"):
            Partition(((0, 1), (1,)), (sb, builtin_symbol("constant_one", m=1)))

    def test_rejects_arity_mismatch(self):
        with pytest.raises(ValueError, match="arity"):
            Partition(((0, 1),), (builtin_symbol("constant_one", m=1),))
