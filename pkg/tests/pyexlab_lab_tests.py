import sys, os, unittest, math
import numpy as np
from scipy import stats
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from pyexlab import lab, models, topology, EstimationError
from .test_params import *

pool_size = max(1, min(8, os.cpu_count() or 1))

def ladder_counts(R_list, n, seed=test_seed):
    """Synthetic counts whose variance grows like R^2."""
    rng = np.random.default_rng(seed)
    return {R: np.round(rng.normal(1000.0, R, size=n)) for R in R_list}

class PyExlabReplicateTests(unittest.TestCase):

    def test_01_default_grid(self):
        bf = lab.default_grid(bf_id, 2.0)
        rpw = lab.default_grid(rpw_id, 10.0)
        powerlaw = lab.default_grid(powerlaw_id, 3.0)
        checks = [bf.h == 0.125, bf.shape == (17, 17), math.isclose(rpw.h, 10 / 26), rpw.window_cells == 26,
                  powerlaw.h == 1 / 16]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 01 default grids\nBF: {bf}, RPW: {rpw}""", all(checks))

    def test_02_results_do_not_depend_on_workers(self):
        task = (bf_id, lab.default_grid(bf_id, 2.0), [-0.5, 0.5], topology.DEFAULT_POLICY)
        serial = lab.run_replicates(lab._census_replicate, task, test_seed, 6, workers=1)
        pooled = lab.run_replicates(lab._census_replicate, task, test_seed, 6, workers=3)
        self.assertEqual(serial, pooled)
        with self.assertRaises(ValueError):
            lab.run_replicates(lab._census_replicate, task, test_seed, 0)
        print_test_result(f"""Test 02 replicate results are independent of the worker count\nRESULTS: {serial}""", serial == pooled)

    def test_03_running_moments(self):
        values = np.random.default_rng(test_seed).gamma(2.0, size=1000)
        whole = lab.RunningMoments().extend(values)
        merged = lab.RunningMoments().extend(values[:317]).merge(lab.RunningMoments().extend(values[317:]))
        centred = values - values.mean()
        expected = [values.mean()] + [np.sum(centred ** k) for k in (2, 3, 4)]
        checks = []
        for moments in (whole, merged):
            checks.append(moments.n == 1000)
            checks += [math.isclose(got, want, rel_tol=1e-9)
                       for got, want in zip((moments.mean, moments.m2, moments.m3, moments.m4), expected)]
        checks.append(math.isclose(whole.variance, np.var(values, ddof=1), rel_tol=1e-9))
        checks.append(whole.se_log_variance() > 0)
        self.assertTrue(all(checks))
        print_test_result(f"""Test 03 mergeable running moments""", all(checks))

class PyExlabDensityTests(unittest.TestCase):

    def test_01_density_from_counts(self):
        counts = np.random.default_rng(test_seed).poisson(50, size=(400, 2))
        curve = lab.density_curve_from_counts(counts, [0.0, 1.0], 10.0)
        frame = curve.to_frame()
        within = np.abs(curve.c_es_hat - 0.5) <= 4 * curve.c_es_se
        checks = [within.all(), list(frame.columns) == ["level", "c_es_hat", "c_es_se", "c_ls_hat", "c_ls_se"],
                  curve.n_samples == 400]
        with self.assertRaises(ValueError):
            lab.density_curve_from_counts([[1, 2]], [0.0, 1.0], 10.0)
        self.assertTrue(all(checks))
        print_test_result(f"""Test 01 density estimate from injected counts\n{frame}""", all(checks))

    def test_02_estimate_density_curve(self):
        curve = lab.estimate_density_curve(bf_id, 2.0, [0.5, -0.5], 3, test_seed)
        frame = curve.to_frame()
        checks = [len(frame) == 2, np.all(np.isfinite(frame['c_es_hat'])), curve.model_id == bf_id]
        with self.assertRaises(ValueError):
            lab.estimate_density_curve(bf_id, 2.0, [0.5], 1, test_seed)
        self.assertTrue(all(checks))
        print_test_result(f"""Test 02 density curve from synthesized samples\n{frame}""", all(checks))

    @unittest.skipUnless(full_acceptance, "set EXLAB_FULL=1 to run")
    def test_03_level_set_density_is_symmetric(self):
        curve = lab.estimate_density_curve(bf_id, 16.0, [-0.5, 0.5], 300, test_seed, workers=pool_size)
        gap = abs(curve.c_ls_hat[0] - curve.c_ls_hat[1])
        joint_se = math.hypot(curve.c_ls_se[0], curve.c_ls_se[1])
        self.assertLessEqual(gap, 3 * joint_se, f"{curve.to_frame()}")
        print_test_result(f"""Test 03 level-set density symmetric in the level\n{curve.to_frame()}""", True, is_slow=True)

    @unittest.skipUnless(full_acceptance, "set EXLAB_FULL=1 to run")
    def test_04_bargmann_fock_excursion_density(self):
        levels = [1.2, 1.6, 2.0, 2.5, 10.0]
        small = lab.estimate_density_curve(bf_id, 16.0, levels, 400, test_seed, workers=pool_size)
        large = lab.estimate_density_curve(bf_id, 32.0, levels, 200, test_seed + 1, workers=pool_size)
        # contained counts miss components within about one unit of the ring, an O(1/R) share
        allowance = 3 * math.hypot(small.c_es_se[0], large.c_es_se[0]) + 4 * large.c_es_hat[0] / 16
        checks = [small.c_es_hat[-1] == 0.0, large.c_es_hat[-1] == 0.0,
                  abs(small.c_es_hat[0] - large.c_es_hat[0]) <= allowance]
        hat, se = large.c_es_hat[:4], large.c_es_se[:4]
        checks += [hat[k] - hat[k + 1] >= -3 * math.hypot(se[k], se[k + 1]) for k in range(3)]
        checks.append(hat[0] > hat[3])
        self.assertTrue(all(checks), f"{small.to_frame()}\n{large.to_frame()}")
        print_test_result(f"""Test 04 Bargmann-Fock excursion density at R=16 and R=32\n{large.to_frame()}""", all(checks), is_slow=True)

class PyExlabIdentityTests(unittest.TestCase):

    def test_01_identity_from_counts(self):
        rng = np.random.default_rng(test_seed)
        m_plus, s_minus = rng.poisson(5, 50), rng.poisson(3, 50)
        m_minus, s_plus = rng.poisson(2, 50), rng.poisson(2, 50)
        rows = np.column_stack([m_plus - s_minus, m_plus - s_minus + s_plus - m_minus,
                                m_plus, s_minus, m_minus, s_plus])
        excursion, level = lab.identity_from_counts(rows, 0.0, 1.0, 4.0)
        checks = [excursion.kind == "excursion", level.kind == "level", excursion.difference == 0.0,
                  level.difference == 0.0, excursion.passed, level.passed, excursion.n_samples == 50]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 01 identity reports from consistent counts\n{excursion.to_dict()}""", all(checks))

    def test_02_degenerate_windows(self):
        with self.assertRaises(ValueError):
            lab.integral_identity_check(bf_id, 2.0, 1.0, 0.5, 3, test_seed)
        reports = lab.integral_identity_check(bf_id, 2.0, 0.5, 0.5, 3, test_seed)
        checks = [all(r.lhs == 0.0 and r.rhs == 0.0 and r.n_samples == 0 and r.passed for r in reports)]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 02 empty and reversed level windows""", all(checks))

    def test_03_identity_on_samples(self):
        excursion, level = lab.integral_identity_check(bf_id, 2.0, 0.5, 1.5, 4, test_seed)
        checks = [excursion.n_samples == 4, math.isfinite(excursion.lhs), math.isfinite(level.rhs),
                  excursion.allowance >= 5.0 / 2.0]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 03 integral identity on synthesized samples\n{excursion.to_dict()}\n{level.to_dict()}""", all(checks))

class PyExlabScalingTests(unittest.TestCase):

    def test_01_recovers_injected_exponent(self):
        fit = lab.fit_variance_scaling(ladder_counts([8.0, 16.0, 32.0, 64.0], 400), test_seed, 0.5, bf_id)
        frame = fit.to_frame()
        checks = [abs(fit.exponent - 2.0) < 4 * fit.exponent_se, fit.exponent_se > 0,
                  np.all(frame['ci_low'] <= frame['variance']), np.all(frame['variance'] <= frame['ci_high']),
                  list(frame['R']) == [8.0, 16.0, 32.0, 64.0]]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 01 variance exponent of injected counts\nEXPONENT: {fit.exponent} +- {fit.exponent_se}""", all(checks))

    def test_02_fit_is_deterministic(self):
        counts = ladder_counts([8.0, 16.0, 32.0, 64.0], 300)
        first = lab.fit_variance_scaling(counts, 99)
        second = lab.fit_variance_scaling(counts, 99)
        checks = [np.array_equal(first.ci_low, second.ci_low), first.exponent == second.exponent]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 02 bootstrap intervals are seeded""", all(checks))

    def test_03_degenerate_ladders(self):
        counts = ladder_counts([8.0, 16.0, 32.0, 64.0], 300)
        counts[16.0] = np.full(300, 7.0)
        with self.assertRaises(EstimationError):
            lab.fit_variance_scaling(counts, test_seed)
        with self.assertRaises(ValueError):
            lab.fit_variance_scaling(ladder_counts([8.0, 16.0, 32.0], 300), test_seed)
        with self.assertRaises(ValueError):
            lab.variance_scaling_fit(bf_id, 0.5, [2.0, 3.0, 4.0], 200, test_seed)
        with self.assertRaises(ValueError):
            lab.variance_scaling_fit(bf_id, 0.5, [2.0, 3.0, 4.0, 5.0], 100, test_seed)
        print_test_result(f"""Test 03 degenerate ladders are rejected""", True)

    def test_04_variance_ci(self):
        counts = np.random.default_rng(test_seed).normal(0.0, 2.0, size=400)
        low, high = lab.variance_ci(counts, test_seed)
        checks = [low < np.var(counts, ddof=1) < high, (low, high) == lab.variance_ci(counts, test_seed),
                  lab.variance_ci(np.full(10, 3.0), test_seed) == (0.0, 0.0)]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 04 bootstrap variance interval\nCI: {(low, high)}""", all(checks))

    @unittest.skipUnless(full_acceptance, "set EXLAB_FULL=1 to run")
    def test_05_variance_ci_coverage(self):
        rng = np.random.default_rng(test_seed + 1)
        covered = 0
        for i in range(200):
            counts = np.round(rng.normal(500.0, 20.0, size=400))
            low, high = lab.variance_ci(counts, test_seed + i)
            covered += low <= 400.0 <= high
        rate = covered / 200
        self.assertGreaterEqual(rate, 0.9)
        print_test_result(f"""Test 05 bootstrap interval covers the injected variance\nCOVERAGE: {rate}""", rate >= 0.9, is_slow=True)

class PyExlabPairedLevelTests(unittest.TestCase):

    def test_01_a_rules(self):
        inverse = lab.parse_a_rule("inverse:c=2")
        inverse_sqrt = lab.parse_a_rule("inverse-sqrt")
        singular = lab.parse_a_rule("singular:c=1", models.bargmann_fock())
        g = models.lower_density_g(models.bargmann_fock(), 0.25)
        checks = [inverse.id == "inverse:c=2.0", inverse(4.0) == 0.5, inverse_sqrt(4.0) == 0.5,
                  math.isclose(singular(4.0), math.sqrt(g) / 4.0), set(lab.A_RULES) == {"inverse", "inverse-sqrt", "singular"}]
        rule = lambda R: 0.1
        checks.append(lab.parse_a_rule(rule) is rule)
        for bad in ("linear:c=1", "inverse:k=1"):
            with self.assertRaises(ValueError):
                lab.parse_a_rule(bad)
        with self.assertRaises(ValueError):
            lab.parse_a_rule("singular:c=1")
        self.assertTrue(all(checks))
        print_test_result(f"""Test 01 level-shift rules""", all(checks))

    def test_02_paired_from_counts(self):
        frame = lab.paired_from_counts({2.0: [(3, 1), (2, 2), (4, 1)], 4.0: [(5, 5)]}, {2.0: 0.5, 4.0: 0.0})
        first, second = frame.iloc[0], frame.iloc[1]
        checks = [first['mean_abs'] == 5 / 3, first['second_moment'] == 13 / 3,
                  math.isclose(first['pz_ratio'], (25 / 9) / (13 / 3)), math.isclose(first['order_ratio'], (5 / 3) / 2.0),
                  math.isnan(second['pz_ratio']), math.isnan(second['order_ratio'])]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 02 paired statistics from counts\n{frame}""", all(checks))

    def test_03_zero_shift_gives_identical_counts(self):
        report = lab.paired_level_experiment(bf_id, 0.5, lambda R: 0.0, [2.0, 3.0], 4, test_seed)
        frame = report.to_frame()
        checks = [np.all(frame['mean_abs'] == 0.0), list(frame['n']) == [4, 4], report.level == 0.5]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 03 zero level shift\n{frame}""", all(checks))

class PyExlabFluctuationTests(unittest.TestCase):

    def test_01_window_test(self):
        concentrated = lab.fluctuation_window_test(np.full(100, 5.0), 1.0, 1.0, 0.5)
        spread = lab.fluctuation_window_test(np.arange(100.0), 1.0, 9.0, 0.5)
        checks = [not concentrated.passed, concentrated.probability == 1.0, spread.passed,
                  spread.probability == 0.1]
        with self.assertRaises(ValueError):
            lab.fluctuation_window_test([1.0], 1.0, 1.0, 1.5)
        self.assertTrue(all(checks))
        print_test_result(f"""Test 01 fluctuation window test\nSPREAD: {spread}""", all(checks))

    def test_02_differ_test(self):
        x = np.arange(100.0)
        checks = [lab.differ_test(x, x + 5.0, 1.0, 3.0, 0.5).passed, not lab.differ_test(x, x, 1.0, 3.0, 0.5).passed]
        with self.assertRaises(ValueError):
            lab.differ_test(x, x[:10], 1.0, 3.0, 0.5)
        self.assertTrue(all(checks))
        print_test_result(f"""Test 02 paired differ test""", all(checks))

    def test_03_chatterjee_bound(self):
        report = lab.chatterjee_bound_check([0, 0, 1, 1], [0, 1, 0, 1], 0.0, 0.0, 0.0)
        checks = [report.lhs == 0.5, report.rhs == 0.75, report.holds, report.margin == 0.25]
        with self.assertRaises(ValueError):
            lab.chatterjee_bound_check([0], [0], 0.0, 0.0, 1.5)
        self.assertTrue(all(checks))
        print_test_result(f"""Test 03 anti-concentration bound on enumerated pairs\nREPORT: {report}""", all(checks))

class PyExlabGaussianBoundTests(unittest.TestCase):

    def test_01_scaled_gaussian_kl(self):
        d, tv = lab.kl_tv_gaussian_scaled(2, 0.9)
        checks = [abs(d - (0.81 - 1 - math.log(0.81))) < 1e-15, abs(d - 0.020721) < 1e-6, abs(tv - 0.1018) < 1e-4]
        for s in (0.5, 0.9, 1.3, 3.0):
            lhs = lab.kl_tv_gaussian_scaled(3, s)[0] - lab.kl_tv_gaussian_scaled(3, 1 / s)[0]
            checks.append(abs(lhs - 1.5 * (s * s - 1 / (s * s) - 2 * math.log(s * s))) < 1e-12)
        checks.append(lab.kl_tv_gaussian_scaled(5, 1.0) == (0.0, 0.0))
        with self.assertRaises(ValueError):
            lab.kl_tv_gaussian_scaled(0, 0.9)
        with self.assertRaises(ValueError):
            lab.kl_tv_gaussian_scaled(2, 0.0)
        self.assertTrue(all(checks))
        print_test_result(f"""Test 01 KL divergence of scaled gaussians\nKL: {d}, TV: {tv}""", all(checks))

    def test_02_exact_one_dimensional_tv(self):
        s = 2.0
        x0 = math.sqrt(2 * math.log(s) * s * s / (s * s - 1))
        closed = 2 * (stats.norm.cdf(x0) - stats.norm.cdf(x0 / s))
        exact = lab.tv_gaussian_scale_1d(s)
        checks = [abs(exact - closed) < 1e-9, lab.tv_gaussian_scale_1d(1.0) == 0.0]
        checks += [lab.tv_gaussian_scale_1d(v) <= lab.kl_tv_gaussian_scaled(1, v)[1] + 1e-12
                   for v in (0.3, 0.8, 0.95, 1.1, 2.0, 5.0)]
        self.assertTrue(all(checks))
        print_test_result(f"""Test 02 exact TV below its Pinsker bound\nTV(2): {exact}""", all(checks))

    def test_03_rpw_coupling_bound(self):
        inverse = [lab.rpw_level_coupling_bound(1.0, 1.0 / R, R) for R in (100.0, 400.0, 1600.0)]
        inverse_sqrt = [lab.rpw_level_coupling_bound(1.0, R ** -0.5, R) for R in (100.0, 400.0, 1600.0)]
        m = 29
        split = lab.kl_tv_gaussian_scaled(m, 2 / 3)[0] + lab.kl_tv_gaussian_scaled(2 * m, 2 / 3)[0]
        checks = [inverse[0] > inverse[1] > inverse[2] > 0, inverse_sqrt == [1.0, 1.0, 1.0],
                  lab.rpw_level_coupling_bound(1.0, 0.0, 10.0) == 0.0,
                  0 < lab.rpw_level_coupling_bound(1.0, 0.5, 10.0) <= 1.0,
                  abs(lab.kl_tv_gaussian_scaled(3 * m, 2 / 3)[0] - split) < 1e-12]
        with self.assertRaises(ValueError):
            lab.rpw_level_coupling_bound(0.0, 0.1, 10.0)
        self.assertTrue(all(checks))
        print_test_result(f"""Test 03 RPW level coupling bound\nINVERSE: {inverse}""", all(checks))

    def test_04_coupling_bound_for_negative_scales(self):
        checks = [lab.rpw_level_coupling_bound(1.0, -2.0, 10.0) == 0.0,
                  lab.rpw_level_coupling_bound(-1.0, 0.5, 10.0) == lab.rpw_level_coupling_bound(1.0, -0.5, 10.0),
                  lab.rpw_level_coupling_bound(-1.0, -0.5, 10.0) == lab.rpw_level_coupling_bound(1.0, 0.5, 10.0),
                  0 < lab.rpw_level_coupling_bound(-1.0, 0.5, 10.0) <= 1.0,
                  0 < lab.rpw_level_coupling_bound(1.0, -3.0, 10.0) <= 1.0]
        with self.assertRaises(ValueError):
            lab.rpw_level_coupling_bound(1.0, -1.0, 10.0)
        self.assertTrue(all(checks))
        print_test_result(f"""Test 04 coupling bound for negative levels and shifts past zero""", all(checks))

def main():
    unittest.main(verbosity=0)

if __name__ == '__main__':
    main()
