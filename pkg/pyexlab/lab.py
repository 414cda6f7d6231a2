"""Monte Carlo experiments on excursion-set counts.

Every experiment is a pure function of its arguments and a master seed:
replicate ``i`` uses ``seed_split(master, i)``, and ladders over window sizes
give the ``j``-th size the master ``seed_split(master, j)``. Replicates run on
a process pool with a static partition, so results do not depend on the
number of workers.
"""
import logging, math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import integrate, stats

from . import models, synthesis, topology
from ._util import seed_split
from .errors import EstimationError

logger = logging.getLogger(__name__)

BOOTSTRAP_RESAMPLES = 1000


def default_grid(model, R, h=None, margin=0.0):
    """Grid for a window of side ``R``: the largest spacing not above ``h_max`` that divides ``R``."""
    model = models.parse_model(model)
    h_max = model.h_max if h is None else h
    h = R / math.ceil(R / h_max - 1e-9)
    return synthesis.GridSpec(float(R), h, float(margin)).validate_for(model)


def _run_block(worker, task, master_seed, indices):
    return [worker(task, i, seed_split(master_seed, i)) for i in indices]


def run_replicates(worker, task, master_seed, n, workers=1):
    """Runs ``worker(task, index, seed)`` for ``index < n``; results come back in index order.

    ``worker`` must be a module-level function so it can be sent to the pool.
    """
    if n < 1:
        raise ValueError(f"Invalid replicate count. Expected a positive integer, got {n}.")
    if workers <= 1 or n == 1:
        return _run_block(worker, task, master_seed, range(n))
    blocks = [b.tolist() for b in np.array_split(np.arange(n), min(workers, n))]
    results = []
    with ProcessPoolExecutor(max_workers=len(blocks)) as pool:
        futures = [pool.submit(_run_block, worker, task, master_seed, block) for block in blocks]
        for future in futures:
            results.extend(future.result())
    return results


class RunningMoments:
    """Mergeable count/mean/central-moment accumulator (moments up to the fourth)."""

    def __init__(self, n=0, mean=0.0, m2=0.0, m3=0.0, m4=0.0):
        self.n, self.mean, self.m2, self.m3, self.m4 = n, mean, m2, m3, m4

    def push(self, x):
        self.merge(RunningMoments(1, float(x)))
        return self

    def extend(self, values):
        for x in np.ravel(values):
            self.push(x)
        return self

    def merge(self, other):
        na, nb = self.n, other.n
        if nb == 0:
            return self
        if na == 0:
            self.n, self.mean, self.m2, self.m3, self.m4 = other.n, other.mean, other.m2, other.m3, other.m4
            return self
        n = na + nb
        d = other.mean - self.mean
        mean = self.mean + d * nb / n
        m2 = self.m2 + other.m2 + d * d * na * nb / n
        m3 = (self.m3 + other.m3 + d ** 3 * na * nb * (na - nb) / n ** 2
              + 3 * d * (na * other.m2 - nb * self.m2) / n)
        m4 = (self.m4 + other.m4 + d ** 4 * na * nb * (na * na - na * nb + nb * nb) / n ** 3
              + 6 * d * d * (na * na * other.m2 + nb * nb * self.m2) / n ** 2
              + 4 * d * (na * other.m3 - nb * self.m3) / n)
        self.n, self.mean, self.m2, self.m3, self.m4 = n, mean, m2, m3, m4
        return self

    @property
    def variance(self):
        return self.m2 / (self.n - 1) if self.n > 1 else float("nan")

    @property
    def se_mean(self):
        return math.sqrt(self.variance / self.n) if self.n > 1 else float("nan")

    def se_log_variance(self):
        """Delta-method standard error of ``log s^2`` from the fourth central moment."""
        n, s2 = self.n, self.variance
        if n < 4 or not s2 > 0:
            return float("nan")
        var_s2 = (self.m4 / n - (n - 3) / (n - 1) * s2 * s2) / n
        if not var_s2 > 0:
            var_s2 = 2 * s2 * s2 / (n - 1)
        return math.sqrt(var_s2) / s2


@dataclass(frozen=True)
class LevelDensityCurve:
    levels: np.ndarray
    c_es_hat: np.ndarray
    c_es_se: np.ndarray
    c_ls_hat: np.ndarray
    c_ls_se: np.ndarray
    R: float
    n_samples: int
    model_id: str = None
    seed: int = None

    def to_frame(self):
        return pd.DataFrame({"level": self.levels, "c_es_hat": self.c_es_hat, "c_es_se": self.c_es_se,
                             "c_ls_hat": self.c_ls_hat, "c_ls_se": self.c_ls_se})


def density_curve_from_counts(es_counts, levels, R, ls_counts=None, model_id=None, seed=None):
    """Density estimates ``mean(N) / R^2`` from replicate-by-level count arrays."""
    es = np.asarray(es_counts, dtype=float).reshape(-1, len(levels))
    ls = np.zeros_like(es) if ls_counts is None else np.asarray(ls_counts, dtype=float).reshape(es.shape)
    n = es.shape[0]
    if n < 2:
        raise ValueError(f"Expected at least 2 replicates, got {n}.")
    area = float(R) ** 2
    return LevelDensityCurve(np.asarray(levels, dtype=float), es.mean(axis=0) / area,
                             es.std(axis=0, ddof=1) / math.sqrt(n) / area, ls.mean(axis=0) / area,
                             ls.std(axis=0, ddof=1) / math.sqrt(n) / area, float(R), n, model_id, seed)


def _census_replicate(task, index, seed):
    model_id, grid, levels, policy = task
    sample = synthesis.synthesize(model_id, grid, seed, index)
    censuses = [topology.count_components(sample, level, policy) for level in levels]
    return [c.n_contained for c in censuses], [c.n_level_contained for c in censuses]


def estimate_density_curve(model, R, levels, n_samples, seed, h=None, margin=0.0,
                           policy=topology.DEFAULT_POLICY, workers=1):
    """Estimates ``c_ES`` and ``c_LS`` at each level from contained counts in windows of side ``R``.

    :rtype: LevelDensityCurve
    """
    model = models.parse_model(model)
    if n_samples < 2:
        raise ValueError(f"Invalid n_samples. Expected at least 2, got {n_samples}.")
    levels = [float(v) for v in levels]
    grid = default_grid(model, R, h, margin)
    results = run_replicates(_census_replicate, (model.id, grid, levels, policy), seed, n_samples, workers)
    es = np.array([r[0] for r in results])
    ls = np.array([r[1] for r in results])
    logger.info("density curve %s R=%s: %d replicates", model.id, R, n_samples)
    return density_curve_from_counts(es, levels, R, ls, model.id, seed)


@dataclass(frozen=True)
class IdentityReport:
    kind: str
    a: float
    b: float
    R: float
    n_samples: int
    lhs: float
    rhs: float
    se: float
    allowance: float

    @property
    def difference(self):
        return self.lhs - self.rhs

    @property
    def passed(self):
        return abs(self.difference) <= self.allowance

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b, "R": self.R, "n_samples": self.n_samples,
                "lhs": self.lhs, "rhs": self.rhs, "difference": self.difference, "se": self.se,
                "allowance": self.allowance, "passed": self.passed}


def _identity_replicate(task, index, seed):
    model_id, grid, a, b, policy = task
    sample = synthesis.synthesize(model_id, grid, seed, index)
    lower = topology.count_components(sample, a, policy)
    upper = topology.count_components(sample, b, policy)
    per_type = topology.count_window_crit(sample, a, b, policy)[2]
    return (lower.n_contained - upper.n_contained, lower.n_level_contained - upper.n_level_contained,
            per_type["m+"], per_type["s-"], per_type["m-"], per_type["s+"])


def identity_from_counts(rows, a, b, R):
    """Both identity reports from per-replicate ``(dES, dLS, m+, s-, m-, s+)`` rows.

    Each side is estimated on the same replicates, so the standard error is
    that of the per-replicate difference.
    """
    rows = np.asarray(rows, dtype=float).reshape(-1, 6)
    n = rows.shape[0]
    area = float(R) ** 2
    d_es, d_ls, m_plus, s_minus, m_minus, s_plus = rows.T
    reports = []
    for kind, lhs, rhs in (("excursion", d_es, m_plus - s_minus),
                           ("level", d_ls, m_plus - s_minus + s_plus - m_minus)):
        se = (lhs - rhs).std(ddof=1) / math.sqrt(n) / area if n > 1 else 0.0
        reports.append(IdentityReport(kind, float(a), float(b), float(R), n, lhs.mean() / area,
                                      rhs.mean() / area, se, 3 * se + 5.0 / R))
    return tuple(reports)


def integral_identity_check(model, R, a, b, n_samples, seed, h=None, policy=topology.DEFAULT_POLICY,
                            workers=1):
    """Checks ``c_ES(a) - c_ES(b)`` against the critical-point count difference, and its level-set variant.

    ``a == b`` is the empty window: both sides are 0 and nothing is sampled.

    :return: ``(excursion report, level-set report)``.
    :rtype: tuple(IdentityReport, IdentityReport)
    """
    if a > b:
        raise ValueError(f"Invalid level window: a={a} > b={b}.")
    model = models.parse_model(model)
    if a == b:
        return tuple(IdentityReport(kind, float(a), float(b), float(R), 0, 0.0, 0.0, 0.0, 5.0 / R)
                     for kind in ("excursion", "level"))
    grid = default_grid(model, R, h)
    rows = run_replicates(_identity_replicate, (model.id, grid, float(a), float(b), policy),
                          seed, n_samples, workers)
    logger.info("integral identity %s R=%s [%s, %s]: %d replicates", model.id, R, a, b, n_samples)
    return identity_from_counts(rows, a, b, R)


@dataclass(frozen=True)
class ScalingFit:
    model_id: str
    level: float
    R_list: tuple
    n_per_R: tuple
    seed: int
    variances: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    se_log_variance: np.ndarray
    exponent: float
    exponent_se: float

    def to_frame(self):
        return pd.DataFrame({"R": self.R_list, "n": self.n_per_R, "variance": self.variances,
                             "ci_low": self.ci_low, "ci_high": self.ci_high,
                             "se_log_variance": self.se_log_variance})

    def summary(self):
        return {"model": self.model_id, "level": self.level, "exponent": self.exponent,
                "exponent_se": self.exponent_se, "seed": self.seed}


def variance_ci(counts, seed, confidence=0.95, n_resamples=BOOTSTRAP_RESAMPLES):
    """Percentile bootstrap interval of the unbiased sample variance."""
    counts = np.asarray(counts, dtype=float)
    if np.all(counts == counts[0]):
        return 0.0, 0.0
    result = stats.bootstrap((counts,), lambda x, axis: np.var(x, ddof=1, axis=axis),
                             n_resamples=n_resamples, confidence_level=confidence, method="percentile",
                             vectorized=True, random_state=np.random.default_rng(seed))
    return float(result.confidence_interval.low), float(result.confidence_interval.high)


def fit_variance_scaling(counts_by_R, seed, level=float("nan"), model_id=None):
    """Fits ``log Var(N) = alpha log R + c`` by weighted least squares.

    :param counts_by_R: Replicate counts for each window side.
    :type counts_by_R: dict(float, array_like)
    :param seed: Master seed; the bootstrap of the ``j``-th side uses
        ``seed_split(seed, j)``.
    :type seed: int
    :rtype: ScalingFit
    :raises EstimationError: If some variance is 0.
    """
    R_list = sorted(counts_by_R)
    if len(R_list) < 4:
        raise ValueError(f"Expected at least 4 window sizes, got {len(R_list)}.")
    variances, lows, highs, se_logs, ns = [], [], [], [], []
    for j, R in enumerate(R_list):
        counts = np.asarray(counts_by_R[R], dtype=float)
        moments = RunningMoments().extend(counts)
        if not moments.variance > 0:
            raise EstimationError(f"Zero count variance at R={R}: level outside the field's effective range.")
        low, high = variance_ci(counts, seed_split(seed, j))
        variances.append(moments.variance); lows.append(low); highs.append(high)
        se_logs.append(moments.se_log_variance()); ns.append(len(counts))
    x, y = np.log(R_list), np.log(variances)
    weights = 1.0 / np.asarray(se_logs)
    coefficients, cov = np.polyfit(x, y, 1, w=weights, cov="unscaled")
    return ScalingFit(model_id, float(level), tuple(float(R) for R in R_list), tuple(ns), seed,
                      np.array(variances), np.array(lows), np.array(highs), np.array(se_logs),
                      float(coefficients[0]), float(math.sqrt(cov[0, 0])))


def _level_counts_replicate(task, index, seed):
    model_id, grid, levels, policy = task
    sample = synthesis.synthesize(model_id, grid, seed, index)
    return [topology.count_components(sample, level, policy).n_contained for level in levels]


def _ladder_counts(model, levels, R_list, n_per_R, seed, h, policy, workers):
    R_list = [float(R) for R in R_list]
    if len(R_list) < 4 or any(b <= a for a, b in zip(R_list, R_list[1:])):
        raise ValueError(f"Expected a strictly increasing R_list with at least 4 entries, got {R_list}.")
    if n_per_R < 200:
        raise ValueError(f"Invalid n_per_R. Expected at least 200, got {n_per_R}.")
    counts = {}
    for j, R in enumerate(R_list):
        grid = default_grid(model, R, h)
        rows = run_replicates(_level_counts_replicate, (model.id, grid, levels, policy),
                              seed_split(seed, j), n_per_R, workers)
        counts[R] = np.array(rows)
        logger.info("scaling %s R=%s: %d replicates done", model.id, R, n_per_R)
    return counts


def variance_scaling_fit(model, level, R_list, n_per_R, seed, h=None, policy=topology.DEFAULT_POLICY, workers=1):
    """Exponent of ``Var(N_ES(D_R, level))`` in ``R`` over a ladder of window sides.

    :rtype: ScalingFit
    """
    model = models.parse_model(model)
    counts = _ladder_counts(model, [float(level)], R_list, n_per_R, seed, h, policy, workers)
    return fit_variance_scaling({R: c[:, 0] for R, c in counts.items()}, seed, level, model.id)


def level_sweep_exponents(model, levels, R_list, n_per_R, seed, h=None, policy=topology.DEFAULT_POLICY,
                          workers=1):
    """Variance exponent at each level of a grid, from one ladder of samples.

    Levels whose variance vanishes at some ``R`` get ``NaN``.
    """
    model = models.parse_model(model)
    levels = [float(v) for v in levels]
    counts = _ladder_counts(model, levels, R_list, n_per_R, seed, h, policy, workers)
    rows = []
    for k, level in enumerate(levels):
        try:
            fit = fit_variance_scaling({R: c[:, k] for R, c in counts.items()}, seed, level, model.id)
            rows.append((level, fit.exponent, fit.exponent_se))
        except EstimationError:
            rows.append((level, float("nan"), float("nan")))
    return pd.DataFrame(rows, columns=["level", "exponent", "exponent_se"])


class ARule:
    """Level-shift rule ``R -> a_R``."""
    name = None

    def __init__(self, c=1.0):
        if c < 0:
            raise ValueError(f"Invalid rule constant. Expected a nonnegative value, got {c}.")
        self.c = float(c)

    @property
    def id(self):
        return f"{self.name}:c={self.c!r}"

    def __call__(self, R):
        raise NotImplementedError

    def __repr__(self):
        return self.id


class InverseRule(ARule):
    name = "inverse"

    def __call__(self, R):
        return self.c / R


class InverseSqrtRule(ARule):
    name = "inverse-sqrt"

    def __call__(self, R):
        return self.c / math.sqrt(R)


class SingularRule(ARule):
    """``a_R = c * sqrt(g(1/R)) / R`` for a model with a density."""
    name = "singular"

    def __init__(self, c=1.0, model=None):
        super().__init__(c)
        if model is None:
            raise ValueError("The singular rule needs the field model.")
        self.model = models.parse_model(model)

    def __call__(self, R):
        return self.c * math.sqrt(models.lower_density_g(self.model, 1.0 / R)) / R


A_RULES = {cls.name: cls for cls in (InverseRule, InverseSqrtRule, SingularRule)}


def parse_a_rule(rule_id, model=None):
    """Parses ``inverse:c=<c>``, ``inverse-sqrt:c=<c>`` or ``singular:c=<c>``."""
    if isinstance(rule_id, ARule) or callable(rule_id):
        return rule_id
    name, _, rest = str(rule_id).partition(":")
    cls = A_RULES.get(name.strip())
    if cls is None:
        raise ValueError(f"Unknown a-rule '{rule_id}'. Expected one of {sorted(A_RULES)}.")
    c = 1.0
    if rest:
        key, sep, value = rest.partition("=")
        if key.strip() != "c" or not sep:
            raise ValueError(f"Invalid a-rule '{rule_id}': expected c=<value>.")
        c = float(value)
    return cls(c, model) if cls is SingularRule else cls(c)


@dataclass(frozen=True)
class PairedLevelReport:
    model_id: str
    level: float
    rule: str
    frame: pd.DataFrame = field(repr=False)

    @property
    def ratio_spread(self):
        """max/min of ``mean|dN| / (R^2 a_R)`` across the ladder."""
        ratios = self.frame["order_ratio"].to_numpy()
        return float(ratios.max() / ratios.min())

    def to_frame(self):
        return self.frame.copy()


def paired_from_counts(pairs_by_R, a_by_R):
    """Per-R statistics of ``dN = N(level) - N(level + a_R)`` from ``(N(level), N(level + a_R))`` rows."""
    rows = []
    for R in sorted(pairs_by_R):
        pairs = np.asarray(pairs_by_R[R], dtype=float).reshape(-1, 2)
        delta = pairs[:, 0] - pairs[:, 1]
        mean_abs = np.abs(delta).mean()
        second = (delta ** 2).mean()
        a_R = a_by_R[R]
        rows.append({"R": float(R), "a_R": a_R, "n": len(delta), "mean_abs": mean_abs, "mean": delta.mean(),
                     "second_moment": second,
                     "pz_ratio": mean_abs ** 2 / second if second > 0 else float("nan"),
                     "order_ratio": mean_abs / (R * R * a_R) if a_R > 0 else float("nan")})
    return pd.DataFrame(rows, columns=["R", "a_R", "n", "mean_abs", "mean", "second_moment", "pz_ratio",
                                       "order_ratio"])


def _paired_replicate(task, index, seed):
    model_id, grid, level, a_R, policy = task
    sample = synthesis.synthesize(model_id, grid, seed, index)
    return (topology.count_components(sample, level, policy).n_contained,
            topology.count_components(sample, level + a_R, policy).n_contained)


def paired_level_experiment(model, level, a_rule, R_list, n_per_R, seed, h=None,
                            policy=topology.DEFAULT_POLICY, workers=1):
    """Counts at ``level`` and ``level + a_R`` on the same samples, over a ladder of window sides.

    :param a_rule: Rule object, rule id, or any callable ``R -> a_R``.
    :rtype: PairedLevelReport
    """
    model = models.parse_model(model)
    rule = parse_a_rule(a_rule, model)
    pairs, a_by_R = {}, {}
    for j, R in enumerate(float(R) for R in R_list):
        a_R = float(rule(R))
        grid = default_grid(model, R, h)
        pairs[R] = run_replicates(_paired_replicate, (model.id, grid, float(level), a_R, policy),
                                  seed_split(seed, j), n_per_R, workers)
        a_by_R[R] = a_R
        logger.info("paired %s R=%s a_R=%.4g: %d replicates done", model.id, R, a_R, n_per_R)
    return PairedLevelReport(model.id, float(level), getattr(rule, "id", repr(rule)),
                             paired_from_counts(pairs, a_by_R))


@dataclass(frozen=True)
class WindowTest:
    passed: bool
    probability: float
    allowance: float
    window: tuple = None


def fluctuation_window_test(counts, u, c1, c2):
    """Tests that no window ``[x, x + c1*u]`` holds more than ``1 - c2`` of the counts.

    The largest window mass is attained with a window starting at an observed
    value. A binomial allowance ``3 sqrt(p(1-p)/n)`` is added to ``1 - c2``.
    """
    counts = np.sort(np.asarray(counts, dtype=float))
    n = len(counts)
    if n == 0:
        raise ValueError("Expected at least one count.")
    if not 0 < c2 < 1:
        raise ValueError(f"Invalid c2. Expected a value in (0, 1), got {c2}.")
    width = c1 * u
    if not width >= 0:
        raise ValueError(f"Invalid window width c1*u = {width}.")
    ends = np.searchsorted(counts, counts + width, side="right")
    masses = (ends - np.arange(n)) / n
    i = int(np.argmax(masses))
    p = float(masses[i])
    allowance = 3 * math.sqrt(p * (1 - p) / n)
    return WindowTest(p <= 1 - c2 + allowance, p, allowance, (float(counts[i]), float(counts[i] + width)))


def differ_test(x, y, u, c1, c2):
    """Tests ``P(|X - Y| >= c1*u) >= c2`` on paired samples, with a 3-SE allowance."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size == 0:
        raise ValueError("Expected two nonempty paired samples of equal length.")
    if not 0 < c2 < 1:
        raise ValueError(f"Invalid c2. Expected a value in (0, 1), got {c2}.")
    p = float(np.mean(np.abs(x - y) >= c1 * u))
    allowance = 3 * math.sqrt(p * (1 - p) / x.size)
    return WindowTest(p + allowance >= c2, p, allowance)


@dataclass(frozen=True)
class ChatterjeeReport:
    lhs: float
    rhs: float

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def holds(self):
        return self.margin >= 0


def chatterjee_bound_check(x, y, a, b, dtv_bound):
    """Evaluates ``P(a <= X <= b)`` against ``(1 + P(|X - Y| <= b - a) + dtv) / 2`` on joint samples."""
    if a > b:
        raise ValueError(f"Invalid window: a={a} > b={b}.")
    if not 0 <= dtv_bound <= 1:
        raise ValueError(f"Invalid dtv_bound. Expected a value in [0, 1], got {dtv_bound}.")
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size == 0:
        raise ValueError("Expected two nonempty joint samples of equal length.")
    lhs = float(np.mean((a <= x) & (x <= b)))
    rhs = 0.5 * (1 + float(np.mean(np.abs(x - y) <= b - a)) + dtv_bound)
    return ChatterjeeReport(lhs, rhs)


def kl_tv_gaussian_scaled(k, s):
    """``d_KL(N(0, s^2 I_k) || N(0, I_k))`` and its Pinsker bound ``min(1, sqrt(d/2))``.

    :rtype: tuple(float, float)
    """
    if not s > 0:
        raise ValueError(f"Invalid scale. Expected a positive value, got {s}.")
    if int(k) != k or k < 1:
        raise ValueError(f"Invalid dimension. Expected a positive integer, got {k}.")
    s2 = s * s
    d = 0.5 * k * (s2 - 1 - math.log(s2))
    return d, min(1.0, math.sqrt(d / 2))


def tv_gaussian_scale_1d(s):
    """Exact ``d_TV(N(0, s^2), N(0, 1))`` by quadrature."""
    if not s > 0:
        raise ValueError(f"Invalid scale. Expected a positive value, got {s}.")
    if s == 1:
        return 0.0
    # the two densities cross at +-x0
    x0 = math.sqrt(2 * math.log(s) * s * s / (s * s - 1))
    gap = lambda x: abs(stats.norm.pdf(x, scale=s) - stats.norm.pdf(x))
    inner = integrate.quad(gap, 0, x0, epsabs=1e-12, epsrel=1e-12)[0]
    outer = integrate.quad(gap, x0, np.inf, epsabs=1e-12, epsrel=1e-12)[0]
    return inner + outer


def rpw_level_coupling_bound(level, a, R):
    """Pinsker bound on the coupling of the level ``level`` and ``level + a`` RPW excursions.

    Uses ``k = 3m`` with ``m = ceil(2 sqrt(2) R)`` and ``s = |level / (level + a)|``; the
    divergence depends on ``s^2`` only, so levels of either sign are accepted.
    """
    if level == 0:
        raise ValueError("The nodal level is excluded.")
    if level + a == 0:
        raise ValueError(f"Invalid shift: level + a = 0 for level={level}, a={a}.")
    if not R > 0:
        raise ValueError(f"Invalid R. Expected a positive value, got {R}.")
    m = synthesis.rpw_truncation_order(R)
    return kl_tv_gaussian_scaled(3 * m, abs(level / (level + a)))[1]
