"""Grid synthesis of the catalogue fields.

Arrays are stored y-major: ``values[i, j]`` is the field at
``(x_j, y_i)`` with ``x_j = -(R/2 + margin) + j*h`` and likewise for ``y_i``,
so the window ``[-R/2, R/2]^2`` is centred on the origin.
"""
import logging, math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import fft, special, stats

from . import models
from ._util import seed_split
from .errors import ConfigError, SynthesisError
from .models import ModelKind

logger = logging.getLogger(__name__)

# wrap-around covariance tolerance for rapidly decaying kernels
WRAP_TOLERANCE = 1e-6
# truncation sweep ball fraction
SWEEP_BETA = 0.8


def _cells(length, h, what):
    ratio = length / h
    cells = round(ratio)
    if abs(ratio - cells) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"Invalid grid: {what}/h = {ratio} is not an integer.")
    return int(cells)


@dataclass(frozen=True)
class GridSpec:
    """Sampling grid of the window of side ``R`` plus a border of width ``margin``.

    :param R: Window side length.
    :type R: float
    :param h: Grid spacing.
    :type h: float
    :param margin: Extra sampled border around the window (defaults to 0).
    :type margin: float, optional
    """
    R: float
    h: float
    margin: float = 0.0

    def __post_init__(self):
        if not (self.R > 0 and self.h > 0):
            raise ConfigError(f"Invalid grid: R and h must be positive, got R={self.R}, h={self.h}.")
        if self.margin < 0:
            raise ConfigError(f"Invalid grid: margin must be nonnegative, got {self.margin}.")
        if self.window_cells < 8:
            raise ConfigError(f"Invalid grid: R/h = {self.R / self.h} is below 8.")
        _cells(self.margin, self.h, "margin")

    @property
    def window_cells(self):
        return _cells(self.R, self.h, "R")

    @property
    def margin_cells(self):
        return _cells(self.margin, self.h, "margin")

    @property
    def shape(self):
        n = self.window_cells + 2 * self.margin_cells + 1
        return (n, n)

    @property
    def coordinates(self):
        """1-D coordinates shared by both axes."""
        n = self.shape[0]
        return -(self.R / 2 + self.margin) + self.h * np.arange(n)

    def mesh(self):
        x = self.coordinates
        return np.meshgrid(x, x, indexing="xy")

    def validate_for(self, model):
        if self.h > model.h_max * (1 + 1e-12):
            raise ConfigError(f"Invalid grid for {model.id}: h={self.h} exceeds h_max={model.h_max}.")
        return self


@dataclass(frozen=True)
class FieldSample:
    grid: GridSpec
    values: np.ndarray = field(repr=False)
    model_id: str
    seed: int
    replicate: int = 0

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"Sample shape {self.values.shape} does not match grid shape {self.grid.shape}.")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Sample values must be finite.")

    def window_values(self, expand=0):
        """Values on the window, optionally grown by ``expand`` cells into the margin."""
        m = self.grid.margin_cells
        if not 0 <= expand <= m:
            raise ValueError(f"Invalid expand. Expected 0..{m}, got {expand}.")
        lo = m - expand
        hi = self.values.shape[0] - lo
        return self.values[lo:hi, lo:hi]


def _wrap_padding(model, side):
    base = model.base if model.kind == ModelKind.ATOM else model
    if base.kind == ModelKind.BARGMANN_FOCK:
        # exp(-d^2/2) < tol, and at least 4 correlation lengths
        return max(4.0, math.sqrt(-2 * math.log(WRAP_TOLERANCE)))
    # polynomial decay: four window sizes
    return 4.0 * side


def _zero_cell_mass(base, dt):
    """Declared density mass of the zero-frequency cell, via the disc of equal area."""
    if base.kind == ModelKind.POWER_LAW:
        a = dt / math.sqrt(math.pi)
        return 2 * math.pi * a ** (2 - base.alpha) / (2 - base.alpha)
    return float(models.spectral_density_eval(base, (0.0, 0.0))) * dt * dt


def synthesize_spectral(model, grid, seed, replicate=0):
    """Spectral (FFT) synthesis of a field with an absolutely continuous spectrum.

    Real white noise on a padded torus is transformed, weighted by
    ``sqrt(rho(t)/M) * dt`` per frequency cell and transformed back; the
    window block of the torus is returned. The discrete variance is
    renormalised to 1.

    :param model: Bargmann-Fock or power-law model.
    :type model: FieldModel
    :param grid: Sampling grid.
    :type grid: GridSpec
    :param seed: 64-bit seed; the output is a pure function of
        ``(model, grid, seed)``.
    :type seed: int
    :param replicate: Replicate index recorded on the sample.
    :type replicate: int, optional
    :rtype: FieldSample
    :raises SynthesisError: If a frequency weight is negative beyond
        rounding; the message names the most negative one.
    """
    if not model.has_density or model.kind == ModelKind.ATOM:
        raise ValueError(f"{model.id}: spectral synthesis needs a model with a spectral density.")
    grid.validate_for(model)
    n_win = grid.shape[0]
    side = (n_win - 1) * grid.h
    pad = _wrap_padding(model, side)
    n = fft.next_fast_len(n_win + math.ceil(pad / grid.h))
    period = n * grid.h
    if model.kind == ModelKind.BARGMANN_FOCK:
        logger.debug("%s: torus %d^2 (period %.4g), wrap residual kappa(%.4g)=%.3g",
                     model.id, n, period, period - side, math.exp(-(period - side) ** 2 / 2))
    else:
        logger.debug("%s: torus %d^2 (period %.4g), padding %.4g", model.id, n, period, period - side)

    freqs = fft.fftfreq(n, d=grid.h)
    tx, ty = np.meshgrid(freqs, freqs, indexing="xy")
    dt = 1.0 / period
    with np.errstate(divide="ignore"):
        rho = models.spectral_density_eval(model, np.stack([tx, ty], axis=-1))
    cell_mass = rho * dt * dt
    cell_mass[0, 0] = _zero_cell_mass(model, dt)
    if cell_mass.min() < -1e-12:
        idx = np.unravel_index(np.argmin(cell_mass), cell_mass.shape)
        raise SynthesisError(f"{model.id}: most negative spectral weight {cell_mass[idx]:.3e} at frequency "
                             f"({tx[idx]:.4g}, {ty[idx]:.4g}).")
    cell_mass = np.clip(cell_mass, 0.0, None)
    total = cell_mass.sum()
    logger.debug("%s: discrete spectral mass %.6g (declared %.6g)", model.id, total, models.density_mass(model))
    weights = n * np.sqrt(cell_mass / total)

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n, n))
    torus = fft.ifft2(fft.fft2(noise) * weights).real
    values = np.ascontiguousarray(torus[:n_win, :n_win])
    return FieldSample(grid, values, model.id, int(seed), replicate)


def rpw_truncation_order(grid):
    """Smallest order whose expansion covers the sampled square: ``ceil(2 * sqrt(2) * side)``.

    :param grid: Grid, or a window side length.
    :type grid: GridSpec or float
    :rtype: int
    """
    side = grid.R + 2 * grid.margin if isinstance(grid, GridSpec) else float(grid)
    if not side > 0:
        raise ValueError(f"Invalid window side. Expected a positive value, got {side}.")
    return max(1, math.ceil(2 * math.sqrt(2) * side - 1e-12))


@dataclass(frozen=True)
class RpwCoefficients:
    """Random coefficients of the Bessel expansion of the Random Plane Wave.

    ``d[k-1]`` multiplies ``2^(-k/2) J0(r)`` and ``a[m-1]`` multiplies
    ``J_m(r) e^(i m theta)`` (with ``a_(-m) = conj(a_m)``). Coefficients are
    drawn order by order, so :meth:`draw` at order N is the prefix of a draw
    at any higher order from the same generator.
    """
    d: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)

    @property
    def N(self):
        return len(self.d)

    @classmethod
    def draw(cls, N, rng):
        if N <= 0:
            raise ValueError(f"Invalid truncation order. Expected a positive integer, got {N}.")
        z = rng.standard_normal((int(N), 3))
        return cls(z[:, 0].copy(), (z[:, 1] + 1j * z[:, 2]) / math.sqrt(2))

    def truncate(self, N):
        if not 0 < N <= self.N:
            raise ValueError(f"Invalid truncation order. Expected 1..{self.N}, got {N}.")
        return RpwCoefficients(self.d[:N], self.a[:N])

    def order_terms(self, r, theta):
        """Per-order contributions; entry ``k-1`` holds the order-k J0 term plus the ``+-k`` pair.

        Returns the complex terms so the imaginary residue can be checked.
        """
        r = np.asarray(r, dtype=float)
        radii, inverse = np.unique(r.ravel(), return_inverse=True)
        orders = np.arange(self.N + 1)
        # bessel values cached per distinct radius
        table = special.jv(orders[:, None], radii[None, :])
        bessel = table[:, inverse].reshape((self.N + 1,) + r.shape)
        k = np.arange(1, self.N + 1)
        chain = (2.0 ** (-k / 2) * self.d)[:, None] * bessel[0].ravel()[None, :]
        phase = np.exp(1j * k[:, None] * np.ravel(theta)[None, :])
        pair = (self.a[:, None] * phase + np.conj(self.a)[:, None] * np.conj(phase)) \
            * bessel[1:].reshape(self.N, -1)
        return (chain + pair).reshape((self.N,) + r.shape)

    def evaluate(self, r, theta):
        """Complex sum of the expansion at polar points; real up to rounding."""
        return self.order_terms(r, theta).sum(axis=0)


def _polar(grid):
    x, y = grid.mesh()
    return np.hypot(x, y), np.arctan2(y, x)


def synthesize_rpw(grid, N=None, seed=0, replicate=0, allow_under_truncation=False):
    """Truncated Bessel-series synthesis of the Random Plane Wave.

    :param grid: Sampling grid; polar coordinates are centred at the window centre.
    :type grid: GridSpec
    :param N: Truncation order (defaults to :func:`rpw_truncation_order`).
    :type N: int, optional
    :param seed: 64-bit seed.
    :type seed: int
    :param replicate: Replicate index recorded on the sample.
    :type replicate: int, optional
    :param allow_under_truncation: Permit ``N`` below the covering order.
    :type allow_under_truncation: bool, optional
    :rtype: FieldSample
    """
    grid.validate_for(models.random_plane_wave())
    required = rpw_truncation_order(grid)
    if N is None:
        N = required
    if N <= 0:
        raise ValueError(f"Invalid truncation order. Expected a positive integer, got {N}.")
    if N < required and not allow_under_truncation:
        raise ValueError(f"Truncation order {N} is below the covering order {required} for this grid.")
    coefficients = RpwCoefficients.draw(N, np.random.default_rng(seed))
    r, theta = _polar(grid)
    total = coefficients.evaluate(r, theta)
    residue = float(np.abs(total.imag).max())
    if residue > 1e-9:
        raise SynthesisError(f"rpw: imaginary residue {residue:.3e} in the reconstructed sum.")
    logger.debug("rpw: order %d, imaginary residue %.3e", N, residue)
    return FieldSample(grid, np.ascontiguousarray(total.real), models.random_plane_wave().id, int(seed), replicate)


def add_constant_atom(sample, alpha_atom, seed):
    """Adds ``sqrt(alpha_atom) * Z`` to every value, ``Z`` one standard normal drawn from ``seed``."""
    if not alpha_atom > 0:
        raise ValueError(f"Invalid atom mass. Expected a positive value, got {alpha_atom}.")
    z = np.random.default_rng(seed).standard_normal()
    model_id = models.atom_plus(alpha_atom, models.parse_model(sample.model_id)).id
    return replace(sample, values=sample.values + math.sqrt(alpha_atom) * z, model_id=model_id)


def synthesize(model, grid, seed, replicate=0):
    """Draws one sample of ``model`` on ``grid`` by the method matching its spectrum."""
    model = models.parse_model(model)
    if model.kind == ModelKind.ATOM:
        sample = synthesize(model.base, grid, seed, replicate)
        return add_constant_atom(sample, model.mass, seed_split(seed, 0))
    if model.kind == ModelKind.RPW:
        return synthesize_rpw(grid, seed=seed, replicate=replicate)
    return synthesize_spectral(model, grid, seed, replicate)


def _lag_cells(lag, h):
    cells = []
    for component in lag:
        ratio = component / h
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, abs(ratio)):
            raise ValueError(f"Lag {tuple(lag)} is not a multiple of the grid spacing {h}.")
        cells.append(int(round(ratio)))
    return cells


def empirical_covariance(samples, lags):
    """Cross-replicate covariance estimates at a symmetric anchor pair per lag.

    For a lag of ``k`` cells the pair is ``(c - floor(k/2), c - floor(k/2) + k)``
    around the centre ``c``, so lags ``x`` and ``-x`` use the same pair. The
    estimator is the replicate mean of the products (the mean is known to be 0).

    :param samples: At least two samples on one grid from one model.
    :type samples: list(FieldSample)
    :param lags: Planar lags, multiples of the grid spacing.
    :type lags: list(tuple)
    :return: Columns ``lag_x, lag_y, kappa_hat, se, n``.
    :rtype: pandas.DataFrame
    """
    if len(samples) < 2:
        raise ValueError(f"Expected at least 2 samples, got {len(samples)}.")
    grid, model_id = samples[0].grid, samples[0].model_id
    if any(s.grid != grid or s.model_id != model_id for s in samples):
        raise ValueError("All samples must share one grid and one model.")
    stack = np.stack([s.values for s in samples])
    centre = (grid.shape[0] - 1) // 2
    rows = []
    for lag in lags:
        kx, ky = _lag_cells(lag, grid.h)
        p = (centre - ky // 2, centre - kx // 2)
        q = (p[0] + ky, p[1] + kx)
        if not all(0 <= v < grid.shape[0] for v in p + q):
            raise ValueError(f"Lag {tuple(lag)} does not fit on the grid.")
        products = stack[:, p[0], p[1]] * stack[:, q[0], q[1]]
        n = len(products)
        rows.append({"lag_x": float(lag[0]), "lag_y": float(lag[1]), "kappa_hat": products.mean(),
                     "se": products.std(ddof=1) / math.sqrt(n), "n": n})
    return pd.DataFrame(rows, columns=["lag_x", "lag_y", "kappa_hat", "se", "n"])


def truncation_error_sweep(grid, N_list, n_samples, seed, N_ref=None, beta=SWEEP_BETA):
    """Mean sup-norm truncation error of the RPW expansion on the ball ``B(beta*N)``.

    Each replicate draws its coefficients once at ``N_ref`` (default
    ``4*max(N_list)``) and compares every prefix order against the full sum.

    :return: Columns ``N, mean_error, n_points, slope``; ``slope`` is the
        least-squares slope of log mean error against N over the positive errors.
    :rtype: pandas.DataFrame
    """
    N_list = sorted(int(N) for N in N_list)
    if not N_list or N_list[0] <= 0:
        raise ValueError(f"Invalid N_list. Expected positive orders, got {N_list}.")
    if n_samples < 1:
        raise ValueError(f"Invalid n_samples. Expected a positive integer, got {n_samples}.")
    if N_ref is None:
        N_ref = 4 * N_list[-1]
    if N_ref <= N_list[-1]:
        raise ValueError(f"Reference order {N_ref} must exceed max(N_list)={N_list[-1]}.")
    r, theta = _polar(grid)
    masks = {N: r <= beta * N for N in N_list}
    errors = np.zeros((n_samples, len(N_list)))
    for i in range(n_samples):
        coefficients = RpwCoefficients.draw(N_ref, np.random.default_rng(seed_split(seed, i)))
        terms = coefficients.order_terms(r, theta).real
        # tail[k] = sum of orders > k, summed from the top order down
        tail = np.cumsum(terms[::-1], axis=0)[::-1]
        for j, N in enumerate(N_list):
            if masks[N].any():
                errors[i, j] = np.abs(tail[N][masks[N]]).max()
            else:
                errors[i, j] = np.nan
    mean_error = errors.mean(axis=0)
    keep = np.isfinite(mean_error) & (mean_error > 0)
    slope = np.polyfit(np.array(N_list)[keep], np.log(mean_error[keep]), 1)[0] if keep.sum() >= 2 else np.nan
    logger.debug("truncation sweep: N_ref=%d, slope %.4g", N_ref, slope)
    return pd.DataFrame({"N": N_list, "mean_error": mean_error,
                         "n_points": [int(masks[N].sum()) for N in N_list], "slope": slope})


@dataclass(frozen=True)
class GaussianityReport:
    n: int
    skewness: float
    excess_kurtosis: float
    z_skewness: float
    z_kurtosis: float
    passed: bool


def gaussianity_check(values, z_max=5.0):
    """Skewness and excess kurtosis z-scores of replicate values at a point."""
    values = np.asarray(values, dtype=float).ravel()
    n = len(values)
    if n < 8:
        raise ValueError(f"Expected at least 8 values, got {n}.")
    skew = float(stats.skew(values))
    kurt = float(stats.kurtosis(values))
    z_skew = skew / math.sqrt(6.0 / n)
    z_kurt = kurt / math.sqrt(24.0 / n)
    return GaussianityReport(n, skew, kurt, z_skew, z_kurt, abs(z_skew) <= z_max and abs(z_kurt) <= z_max)
