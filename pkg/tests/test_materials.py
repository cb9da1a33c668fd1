import math

import numpy as np
import pytest

from tvsim import materials as mat
from tvsim.errors import ConfigError

E = math.e


def tabulated_clone_of_constant(k0=1.0):
    """kappa == k0 through the tabulated variant: forces the quadrature path."""
    return mat.TabulatedCapacity(np.array([0.0, 1e7]), np.array([k0, k0]))


class TestClosedForms:
    def test_constant_primitives(self):
        c = mat.ConstantCapacity(1.0)
        assert c.K(5.0) == pytest.approx(5.0)
        assert c.ell(E) == pytest.approx(1.0)
        assert c.Lambda(1.0 / E) == pytest.approx(-1.0)
        assert c.Lambda(1.0) == pytest.approx(0.0)
        assert c.Lambda(3.0) == pytest.approx(2.0)

    def test_constant_log_entropy_closed(self):
        c = mat.ConstantCapacity(1.0)
        m = mat.M_DEFAULT
        assert c.ell_hat(0.0) == 0.0
        expected = (math.log(1.0 + m) ** 3 - math.log(m) ** 3) / 3.0
        assert c.ell_hat(1.0) == pytest.approx(expected, rel=1e-12)

    def test_power_growth_primitives(self):
        p = mat.PowerGrowthCapacity(1.0, 1.0)
        assert p.K(2.0) == pytest.approx((3.0 ** 2 - 1.0) / 2.0)
        assert p.ell(2.0) == pytest.approx(math.log(2.0) + 1.0)


class TestQuadratureAgainstClosedForms:
    def test_log_entropy_quadrature(self):
        c = mat.ConstantCapacity(1.0)
        t = tabulated_clone_of_constant()
        for xi in (1.0, 10.0, 100.0):
            assert t.ell_hat(xi) == pytest.approx(c.ell_hat(xi), rel=1e-9)

    def test_energy_and_entropy_quadrature(self):
        c = mat.ConstantCapacity(1.0)
        t = tabulated_clone_of_constant()
        for xi in np.geomspace(1e-3, 1e5, 17):
            assert t.K(xi) == pytest.approx(c.K(xi), rel=1e-10)
            assert t.ell(xi) == pytest.approx(c.ell(xi), rel=1e-10, abs=1e-12)

    def test_linear_kappa_entropy_at_zero(self):
        # kappa(s) = s makes ell(0) = -int_0^1 ds = -1 finite
        lin = mat.TabulatedCapacity(np.array([0.0, 1e7]), np.array([0.0, 1e7]))
        assert lin.ell(0.0) == pytest.approx(-1.0, abs=1e-9)
        assert lin.ell(2.0) == pytest.approx(1.0, rel=1e-9)


class TestKappaVariants:
    def test_constant_value(self):
        assert mat.ConstantCapacity(1.0).kappa(7.0) == 1.0

    def test_debye_degenerates_at_origin(self):
        d = mat.DebyeLikeCapacity(1.0, 1.0)
        assert d.kappa(0.0) == 0.0
        assert d.kappa(10.0) == pytest.approx(1000.0 / 1001.0)

    def test_slow_decay_log_weighted_divergence(self):
        s = mat.SlowDecayCapacity(1.0, 0.5)
        vals = [s.kappa(10.0 ** k) * math.log(10.0 ** k) for k in range(1, 13)]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert vals[-1] > 5.0
        assert s.kappa(1e12) < 0.2

    def test_rejects_negative_temperature(self):
        with pytest.raises(ConfigError):
            mat.ConstantCapacity(1.0).kappa(-0.1)

    def test_variant_validation(self):
        with pytest.raises(ConfigError):
            mat.ConstantCapacity(0.0)
        with pytest.raises(ConfigError):
            mat.SlowDecayCapacity(1.0, 1.5)
        with pytest.raises(ConfigError):
            mat.PowerGrowthCapacity(1.0, -0.5)
        with pytest.raises(ConfigError):
            mat.TabulatedCapacity(np.array([0.0, 1.0]), np.array([1.0, 0.0]))


ALL_MODELS = [
    mat.ConstantCapacity(1.0),
    mat.PowerGrowthCapacity(1.0, 1.0),
    mat.PowerGrowthCapacity(2.0, 0.3),
    mat.DebyeLikeCapacity(1.0, 1.0),
    mat.SlowDecayCapacity(1.0, 0.5),
]


class TestMonotonicityAndInversion:
    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.describe()["variant"])
    def test_primitives_strictly_increasing(self, model):
        xs = np.geomspace(1e-3, 1e4, 60)
        for fn in (model.K, model.ell, model.Lambda,
                   lambda x: model.ell_hat(x, mat.M_DEFAULT)):
            vals = fn(xs)
            assert np.all(np.diff(vals) > 0)

    @pytest.mark.parametrize("model", [m for m in ALL_MODELS
                                       if m.describe()["variant"] != "debye"],
                             ids=lambda m: m.describe()["variant"])
    def test_inverse_round_trip(self, model):
        for xi in np.geomspace(1e-3, 1e6, 28):
            back = model.ell_inverse(float(model.ell(xi)))
            assert back == pytest.approx(xi, rel=1e-9)

    def test_inverse_round_trip_degenerate_law(self):
        # below the Debye knee the entropy primitive is nearly flat
        # (slope kappa(x)/x ~ x^2), so float64 can only invert it up to the
        # conditioning floor eps * |ell| / (x * slope); tolerate exactly that
        d = mat.DebyeLikeCapacity(1.0, 1.0)
        for xi in np.geomspace(1e-3, 1e6, 28):
            back = d.ell_inverse(float(d.ell(xi)))
            slope = d.kappa(xi) / xi
            floor = 64.0 * np.finfo(float).eps * max(1.0, abs(d.ell(xi))) / (xi * slope)
            assert abs(back - xi) <= max(1e-9, floor) * xi

    def test_inverse_examples(self):
        c = mat.ConstantCapacity(1.0)
        assert c.ell_inverse(0.0) == pytest.approx(1.0, abs=1e-11)
        assert c.ell_inverse(1.0) == pytest.approx(E, rel=1e-11)
        p = mat.PowerGrowthCapacity(1.0, 1.0)
        assert p.ell_inverse(float(p.ell(3.7))) == pytest.approx(3.7, abs=1e-10)

    def test_inverse_rejects_below_infimum(self):
        d = mat.DebyeLikeCapacity(1.0, 1.0)
        with pytest.raises(ConfigError):
            d.ell_inverse(d.ell_at_zero() - 0.5)

    def test_energy_inverse(self):
        d = mat.DebyeLikeCapacity(1.0, 1.0)
        assert d.K_inverse(float(d.K(2.5))) == pytest.approx(2.5, rel=1e-10)
        assert d.K_inverse(0.0) == 0.0


class TestCutoffEntropy:
    @pytest.mark.parametrize("m_cut", [2.0, 10.0, 100.0])
    @pytest.mark.parametrize("model", ALL_MODELS[:4],
                             ids=lambda m: m.describe()["variant"])
    def test_sandwich(self, model, m_cut):
        for xi in np.geomspace(1e-2, 1e4, 100):
            ell = float(model.ell(xi))
            cut = model.ell_cut(float(xi), m_cut)
            low = ell - float(model.K(xi)) / m_cut
            assert low - 1e-10 * (1 + abs(ell)) <= cut <= ell + 1e-10 * (1 + abs(ell))

    def test_identity_below_cutoff(self):
        c = mat.ConstantCapacity(1.0)
        assert c.ell_cut(1.5, 10.0) == pytest.approx(c.ell(1.5), rel=1e-12)

    def test_rejects_small_cutoff(self):
        with pytest.raises(ConfigError):
            mat.ConstantCapacity(1.0).ell_cut(2.0, 1.0)


class TestElementaryInequalities:
    def test_log_sqrt_bound(self):
        # ln(s) <= (2/e) sqrt(s) for s >= 1
        for s in np.geomspace(1.0, 1e12, 400):
            assert math.log(s) <= (2.0 / E) * math.sqrt(s) + 1e-14

    def test_interpolation_split(self):
        # x ln x <= x^2 ln^2(y) / y + y for x >= e, y >= e^2
        for x in np.geomspace(E, 1e8, 60):
            for y in np.geomspace(E ** 2, 1e8, 60):
                assert x * math.log(x) <= x * x * math.log(y) ** 2 / y + y + 1e-9

    @pytest.mark.parametrize("model", ALL_MODELS[:3],
                             ids=lambda m: m.describe()["variant"])
    def test_log_entropy_dominated_by_energy(self, model):
        # ell_hat <= (4/e^2) K follows from the log bound above
        for xi in np.geomspace(1e-2, 1e6, 40):
            assert model.ell_hat(xi, mat.M_DEFAULT) <= (4.0 / E ** 2) * model.K(xi) * (1 + 1e-12)


class TestRegularization:
    def test_constant_unchanged(self):
        c = mat.ConstantCapacity(1.0)
        assert c.floor(0.1) is c

    def test_debye_floor_values(self):
        f = mat.DebyeLikeCapacity(1.0, 1.0).floor(0.1)
        assert f.kappa(0.0) == pytest.approx(0.1)
        assert f.kappa(10.0) == pytest.approx(1000.0 / 1001.0)

    def test_floor_properties(self):
        base = mat.DebyeLikeCapacity(1.0, 1.0)
        xs = np.geomspace(1e-6, 1e4, 200)
        for eps in (0.3, 0.05, 1e-3):
            f = base.floor(eps)
            kf, kb = f.kappa(xs), base.kappa(xs)
            assert np.all(kf >= eps)
            assert np.max(np.abs(kf - kb)) <= eps
        # pointwise convergence as eps -> 0
        gaps = [np.max(np.abs(base.floor(eps).kappa(xs) - base.kappa(xs)))
                for eps in (1e-1, 1e-2, 1e-3, 1e-4)]
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))

    def test_rejects_bad_eps(self):
        c = mat.DebyeLikeCapacity(1.0, 1.0)
        for eps in (0.0, 1.0, -0.1, 2.0):
            with pytest.raises(ConfigError):
                c.floor(eps)

    def test_floored_entropy_diverges_at_zero(self):
        f = mat.DebyeLikeCapacity(1.0, 1.0).floor(1e-3)
        assert f.ell(0.0) == -math.inf

    def test_rejects_small_m_shift(self):
        with pytest.raises(ConfigError):
            mat.ConstantCapacity(1.0).ell_hat(1.0, math.exp(4) - 1.0)
        with pytest.raises(ConfigError):
            mat.ScalarFunctionals(mat.ConstantCapacity(1.0), 2.0)


class TestChordMean:
    def test_matches_energy_difference(self):
        d = mat.DebyeLikeCapacity(1.0, 1.0)
        a = np.array([0.5, 1.0, 2.0])
        b = np.array([0.8, 1.5, 1.9])
        chord = d.kappa_chord(a, b)
        expected = (d.K(b) - d.K(a)) / (b - a)
        assert np.allclose(chord, expected, rtol=1e-12)

    def test_tiny_interval_falls_back_to_midpoint(self):
        d = mat.DebyeLikeCapacity(1.0, 1.0)
        val = d.kappa_chord(np.array([1.0]), np.array([1.0 + 1e-12]))
        assert val[0] == pytest.approx(d.kappa(1.0), rel=1e-9)


class TestClassification:
    def test_examples(self):
        c = mat.ConstantCapacity(1.0).classify()
        assert c.bounded_below_at_infinity and c.log_weighted_divergent
        s = mat.SlowDecayCapacity(1.0, 0.5).classify()
        assert not s.bounded_below_at_infinity and s.log_weighted_divergent
        p = mat.PowerGrowthCapacity(1.0, 0.3).classify()
        assert p.bounded_below_at_infinity
        d = mat.DebyeLikeCapacity(1.0, 1.0).classify()
        assert d.bounded_below_at_infinity and not d.heuristic

    def test_tabulated_is_heuristic(self):
        t = tabulated_clone_of_constant().classify()
        assert t.heuristic and t.bounded_below_at_infinity

    def test_floored_always_bounded_below(self):
        f = mat.SlowDecayCapacity(1.0, 0.5).floor(0.01).classify()
        assert f.bounded_below_at_infinity


class TestWeightedEnergy:
    def test_against_antiderivative(self):
        c = mat.ConstantCapacity(2.0)
        # with kappa = 2 and w = cos: int_0^x 2 cos = 2 sin(x)
        val = c.K_weighted(1.3, math.cos)
        assert val == pytest.approx(2.0 * math.sin(1.3), rel=1e-9)

    def test_zero_at_origin(self):
        assert mat.DebyeLikeCapacity(1.0, 1.0).K_weighted(0.0, math.cos) == 0.0


class TestAdmissibility:
    def field(self, fill, zero_one=False):
        theta = np.full((6, 6), fill)
        if zero_one:
            theta[2, 3] = 0.0
        return theta

    def weights(self):
        return np.full((6, 6), 1.0 / 36.0)

    def test_divergent_law_rejects_zero_cell(self):
        rep = mat.admissibility_check(mat.ConstantCapacity(1.0),
                                      self.field(1.0, zero_one=True), self.weights())
        assert not rep.passed and not rep.ell_finite

    def test_integrable_law_accepts_zeros(self):
        lin = mat.TabulatedCapacity(np.array([0.0, 1e7]), np.array([0.0, 1e7]))
        rep = mat.admissibility_check(lin, self.field(2.0, zero_one=True),
                                      self.weights())
        assert rep.passed

    def test_identically_zero_rejected(self):
        rep = mat.admissibility_check(mat.ConstantCapacity(1.0),
                                      np.zeros((6, 6)), self.weights())
        assert not rep.passed and not rep.not_identically_zero

    def test_negative_cells_rejected(self):
        theta = self.field(1.0)
        theta[0, 0] = -0.5
        rep = mat.admissibility_check(mat.ConstantCapacity(1.0), theta, self.weights())
        assert not rep.passed and rep.has_negative_cells

    def test_floor_flagging(self):
        theta = self.field(1.0)
        theta[1, 1] = 1e-4
        rep = mat.admissibility_check(mat.ConstantCapacity(1.0), theta,
                                      self.weights(), theta_floor=1e-3)
        assert rep.passed and rep.cells_below_floor == 1
