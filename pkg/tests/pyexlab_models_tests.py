import sys, os, unittest, math
import numpy as np
from scipy import integrate
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from pyexlab import models, ModelError
from pyexlab.models import ModelKind
from .test_params import *

def model_test_setup(model_id):
    def decorator(func):
        def wrapper(self, *args):
            self.model = models.parse_model(model_id)
            func(self, *args)
        return wrapper
    return decorator

class PyExlabCatalogueTests(unittest.TestCase):

    def test_01_parse_model_ids(self):
        checks = []
        for model_id, kind in ((bf_id, ModelKind.BARGMANN_FOCK), (rpw_id, ModelKind.RPW),
                               (powerlaw_id, ModelKind.POWER_LAW), (atom_id, ModelKind.ATOM)):
            model = models.parse_model(model_id)
            checks.append(model.kind == kind)
            checks.append(models.parse_model(model.id) == model)
        atom = models.parse_model(atom_id)
        checks.append(atom.base.kind == ModelKind.BARGMANN_FOCK and atom.mass == 0.25)
        self.assertTrue(all(checks))
        print_test_result(f"""Test 01 parse catalogue ids and round trip canonical ids""", all(checks))

    def test_02_invalid_model_ids(self):
        bad_ids = ["gaussian", "powerlaw:alpha=2.0,r0=0.5", "powerlaw:alpha=0.5", "powerlaw:alpha=1,r0=-1",
                   "rpw:r0=1", "atom:mass=0.5", "atom:mass=-1,base=rpw", "bargmann-fock:support=x"]
        for model_id in bad_ids:
            with self.assertRaises(ModelError, msg=model_id):
                models.parse_model(model_id)
        print_test_result(f"""Test 02 invalid model ids raise ModelError\nIDS: {bad_ids}""", True)

    def test_03_h_max(self):
        checks = [
            models.bargmann_fock().h_max == 1 / 8,
            math.isclose(models.random_plane_wave().h_max, 2 * math.pi / 16),
            math.isclose(models.power_law(1.0, 0.5).h_max, 1 / 16),
            models.parse_model(atom_id).h_max == 1 / 8,
        ]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 03 coarsest grid spacing per model""", all(checks))

    def test_04_support_radius(self):
        checks = [
            math.isinf(models.bargmann_fock().support_radius),
            models.power_law(1.0, 0.5).support_radius == 0.5,
            models.bargmann_fock(support=2.0).support_radius == 2.0,
            not models.random_plane_wave().has_density,
            models.parse_model(atom_id).has_density,
        ]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 04 declared support radius and density flag""", all(checks))

class PyExlabCovarianceTests(unittest.TestCase):

    @model_test_setup(bf_id)
    def test_01_bargmann_fock_closed_form(self):
        points = np.array([[0.0, 0.0], [1.0, 0.0], [0.6, 0.8], [2.0, -1.0]])
        values = models.covariance_eval(self.model, points)
        expected = np.exp(-np.sum(points ** 2, axis=1) / 2)
        self.assertEqual(values.shape, (4,))
        self.assertTrue(np.allclose(values, expected, rtol=0, atol=1e-15))
        print_test_result(f"""Test 01 Bargmann-Fock covariance\nVALUES: {values}""", True)

    @model_test_setup(rpw_id)
    def test_02_rpw_closed_form(self):
        value = models.covariance_eval(self.model, (2.404825557695773, 0.0))
        self.assertAlmostEqual(value, 0.0, places=12)
        self.assertEqual(models.covariance_eval(self.model, (0.0, 0.0)), 1.0)
        print_test_result(f"""Test 02 RPW covariance vanishes at the first zero of J0\nVALUE: {value}""", True)

    @model_test_setup(atom_id)
    def test_03_atom_adds_constant(self):
        value = models.covariance_eval(self.model, (1.0, 0.0))
        self.assertAlmostEqual(value, 0.25 + math.exp(-0.5), places=14)
        self.assertEqual(self.model.variance, 1.25)
        print_test_result(f"""Test 03 atom covariance is mass plus base covariance\nVALUE: {value}""", True)

    @model_test_setup(powerlaw_id)
    def test_04_powerlaw_needs_numeric_transform(self):
        with self.assertRaises(ModelError):
            models.covariance_eval(self.model, (0.0, 0.0))
        value = models.covariance_numeric(self.model, (0.0, 0.0))
        self.assertAlmostEqual(value, 1.0, places=8)
        print_test_result(f"""Test 04 power-law covariance via Hankel transform\nKAPPA(0): {value}""", True)

    @model_test_setup(bf_id)
    def test_05_numeric_transform_matches_closed_form(self):
        points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.5]])
        numeric = models.covariance_numeric(self.model, points)
        closed = models.covariance_eval(self.model, points)
        self.assertTrue(np.allclose(numeric, closed, rtol=0, atol=1e-8))
        print_test_result(f"""Test 05 numeric transform matches closed form\nNUMERIC: {numeric}""", True)

    @model_test_setup(powerlaw_id)
    def test_06_powerlaw_density_mass(self):
        numeric = 2 * math.pi * sum(
            integrate.quad(lambda s: s * models.spectral_density_eval(self.model, (s, 0.0)), lo, hi,
                           epsabs=1e-13, epsrel=1e-12)[0] for lo, hi in ((0.0, 0.5), (0.5, 1.0)))
        closed = models.density_mass(self.model)
        self.assertAlmostEqual(numeric, closed, places=8)
        print_test_result(f"""Test 06 power-law density mass\nCLOSED: {closed}, NUMERIC: {numeric}""", True)

class PyExlabSpectralTests(unittest.TestCase):

    @model_test_setup(bf_id)
    def test_01_bargmann_fock_lower_density(self):
        g = models.lower_density_g(self.model, 0.1)
        self.assertAlmostEqual(g, bf_g_01, delta=1e-9)
        self.assertAlmostEqual(g, 2.8532, delta=1e-3)
        print_test_result(f"""Test 01 Bargmann-Fock g(0.1)\nG: {g}""", True)

    @model_test_setup(powerlaw_id)
    def test_02_powerlaw_lower_density(self):
        g = models.lower_density_g(self.model, 0.05)
        bound = models.rkhs_shift_norm_bound(self.model, 0.05)
        self.assertAlmostEqual(g, 10.0, places=10)
        self.assertAlmostEqual(bound, 1 / (0.1 * math.sqrt(10)), places=10)
        self.assertAlmostEqual(bound, 3.1623, places=4)
        print_test_result(f"""Test 02 power-law g(0.05) and RKHS bound\nG: {g}, BOUND: {bound}""", True)

    @model_test_setup(powerlaw_id)
    def test_03_ball_outside_support(self):
        with self.assertRaises(ModelError):
            models.lower_density_g(self.model, 0.3)
        with self.assertRaises(ModelError):
            models.lower_density_g(models.random_plane_wave(), 0.1)
        print_test_result(f"""Test 03 g outside the declared support raises ModelError""", True)

    def test_04_rpw_has_no_density(self):
        with self.assertRaises(ModelError):
            models.spectral_density_eval(models.random_plane_wave(), (0.1, 0.0))
        print_test_result(f"""Test 04 RPW spectral density raises ModelError""", True)

    def test_05_h_shift_values(self):
        zero = models.h_shift_eval(0.25, (2.0, 0.0))
        quarter = models.h_shift_eval(0.25, (1.0, 1.0))
        origin = models.h_shift_eval(0.25, (0.0, 0.0))
        self.assertAlmostEqual(zero, 0.0, places=15)
        self.assertAlmostEqual(quarter, 4 / math.pi ** 2, places=14)
        self.assertEqual(origin, 1.0)
        grid = models.h_shift_eval(0.25, np.zeros((3, 4, 2)))
        self.assertEqual(grid.shape, (3, 4))
        print_test_result(f"""Test 05 shift function h_r\nVALUES: {zero}, {quarter}, {origin}""", True)

    @model_test_setup(bf_id)
    def test_06_rkhs_and_tv_bounds(self):
        bound = models.rkhs_shift_norm_bound(self.model, 0.1)
        tv = models.tv_shift_bound(self.model, 0.01, 0.1)
        self.assertAlmostEqual(bound, bf_rkhs_01, delta=1e-9)
        self.assertAlmostEqual(tv, bf_tv_001, delta=1e-9)
        self.assertAlmostEqual(tv, 0.03556, delta=1e-4)
        self.assertEqual(models.tv_shift_bound(self.model, 0.0, 0.1), 0.0)
        self.assertEqual(models.tv_shift_bound(self.model, 100.0, 0.1), 1.0)
        shifts = [0.001, 0.01, 0.1]
        bounds = [models.tv_shift_bound(self.model, a, 0.1) for a in shifts]
        self.assertTrue(all(x < y for x, y in zip(bounds, bounds[1:])))
        print_test_result(f"""Test 06 RKHS norm and total variation bounds\nBOUND: {bound}, TV: {tv}""", True)

class PyExlabDerivativeTests(unittest.TestCase):

    def test_01_analytic_chi(self):
        bf = models.chi_parameter(models.bargmann_fock())
        rpw = models.chi_parameter(models.random_plane_wave())
        self.assertAlmostEqual(bf, 1.0, places=14)
        self.assertAlmostEqual(rpw, math.sqrt(2), places=14)
        print_test_result(f"""Test 01 analytic chi\nBF: {bf}, RPW: {rpw}""", True)

    def test_02_finite_difference_agrees(self):
        checks = []
        for model in (models.bargmann_fock(), models.random_plane_wave()):
            analytic = models.chi_parameter(model, 'analytic')
            fd = models.chi_parameter(model, 'finite-difference')
            checks.append(abs(fd - analytic) <= 1e-6 * analytic)
            d = models.kappa_derivatives(model, 'finite-difference')
            checks.append(abs(d.d11) < 1e-6)
        self.assertTrue(all(checks))
        print_test_result(f"""Test 02 finite-difference chi within 1e-6 of analytic""", all(checks))

    @model_test_setup(powerlaw_id)
    def test_03_powerlaw_second_derivative(self):
        analytic = models.kappa_derivatives(self.model, 'analytic')
        fd = models.kappa_derivatives(self.model, 'finite-difference')
        self.assertLess(analytic.d20, 0)
        self.assertGreater(analytic.d40, 0)
        self.assertTrue(math.isclose(fd.d20, analytic.d20, rel_tol=1e-3))
        print_test_result(f"""Test 03 power-law spectral moments\nANALYTIC: {analytic}, FD d20: {fd.d20}""", True)

    @model_test_setup(atom_id)
    def test_04_atom_does_not_change_derivatives(self):
        self.assertEqual(models.kappa_derivatives(self.model), models.kappa_derivatives(self.model.base))
        self.assertAlmostEqual(models.chi_parameter(self.model), 1.0, places=14)
        print_test_result(f"""Test 04 atom leaves derivatives of kappa unchanged""", True)

    def test_05_unknown_scheme(self):
        with self.assertRaises(ValueError):
            models.kappa_derivatives(models.bargmann_fock(), 'spline')
        print_test_result(f"""Test 05 unknown derivative scheme raises ValueError""", True)

class PyExlabNormalizationTests(unittest.TestCase):

    def test_01_unit_variance_models(self):
        bf = models.normalization_report(models.bargmann_fock())
        rpw = models.normalization_report(models.random_plane_wave())
        checks = [bf.variance == 1.0, bf.gradient_c == 1.0, bf.isotropic, bf.flags == (),
                  rpw.gradient_c == 0.5, rpw.flags == ()]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 01 normalization of unit-variance models\nBF: {bf.to_dict()}\nRPW: {rpw.to_dict()}""", all(checks))

    def test_02_atom_is_flagged(self):
        report = models.normalization_report(models.parse_model(atom_id))
        checks = [report.variance == 1.25, "atom-normalized" in report.flags, report.isotropic,
                  report.gradient_c == 1.0]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 02 atom normalization is flagged\nREPORT: {report.to_dict()}""", all(checks))

def main():
    unittest.main(verbosity=0)

if __name__ == '__main__':
    main()
