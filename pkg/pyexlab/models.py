"""Catalogue of stationary planar Gaussian field models.

Every model is an immutable :class:`FieldModel`. Covariances use the Fourier
convention ``kappa(x) = int exp(2 pi i t.x) rho(t) dt``, so the Bargmann-Fock
density is ``2 pi exp(-2 pi^2 |t|^2)`` and the Random Plane Wave measure is the
uniform measure on the circle ``|t| = 1/(2 pi)``.
"""
import logging, math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate, special

from .errors import ModelError

logger = logging.getLogger(__name__)

# finite-difference step for the Richardson scheme, in covariance length units
FD_STEP = 0.04


class ModelKind(str, Enum):
    BARGMANN_FOCK = "bargmann-fock"
    RPW = "rpw"
    POWER_LAW = "powerlaw"
    ATOM = "atom"


@dataclass(frozen=True)
class FieldModel:
    """A stationary planar Gaussian field described by its covariance.

    :param kind: Model family.
    :type kind: ModelKind
    :param alpha: Singularity exponent in (0, 2) (``POWER_LAW`` only).
    :type alpha: float, optional
    :param r0: Radius of the singular core of the density (``POWER_LAW`` only).
    :type r0: float, optional
    :param mass: Mass of the spectral atom at the origin (``ATOM`` only).
    :type mass: float, optional
    :param base: Model the atom is added to (``ATOM`` only).
    :type base: FieldModel, optional
    :param support: Declared radius of the neighbourhood on which the density
        is bounded below (defaults to infinity for Bargmann-Fock and ``r0`` for
        the power law).
    :type support: float, optional
    """
    kind: ModelKind
    alpha: float = None
    r0: float = None
    mass: float = None
    base: "FieldModel" = field(default=None, repr=False)
    support: float = None

    def __post_init__(self):
        if self.kind == ModelKind.POWER_LAW:
            if self.alpha is None or not 0 < self.alpha < 2:
                raise ModelError(f"Invalid alpha. Expected a value in (0, 2), got {self.alpha}.")
            if self.r0 is None or not self.r0 > 0:
                raise ModelError(f"Invalid r0. Expected a positive value, got {self.r0}.")
        if self.kind == ModelKind.ATOM:
            if self.mass is None or not self.mass > 0:
                raise ModelError(f"Invalid atom mass. Expected a positive value, got {self.mass}.")
            if self.base is None or self.base.kind == ModelKind.ATOM:
                raise ModelError("An atom model needs a non-atom base model.")
        if self.support is not None and not self.support > 0:
            raise ModelError(f"Invalid support radius. Expected a positive value, got {self.support}.")

    @property
    def id(self):
        """Canonical catalogue id, accepted back by :func:`parse_model`."""
        if self.kind == ModelKind.ATOM:
            return f"atom:mass={self.mass!r},base={self.base.id}"
        params = []
        if self.kind == ModelKind.POWER_LAW:
            params += [f"alpha={self.alpha!r}", f"r0={self.r0!r}"]
        if self.support is not None:
            params.append(f"support={self.support!r}")
        return self.kind.value + (":" + ",".join(params) if params else "")

    @property
    def variance(self):
        """``kappa(0)``."""
        if self.kind == ModelKind.ATOM:
            return 1.0 + self.mass
        return 1.0

    @property
    def has_density(self):
        """Whether the continuous part of the spectral measure has a density."""
        return _root(self).kind != ModelKind.RPW

    @property
    def support_radius(self):
        """Declared radius of the neighbourhood V on which ``g`` may be evaluated."""
        model = _root(self)
        if model.support is not None:
            return model.support
        if model.kind == ModelKind.POWER_LAW:
            return model.r0
        return math.inf

    @property
    def h_max(self):
        """Coarsest grid spacing allowed for this model."""
        model = _root(self)
        if model.kind == ModelKind.RPW:
            return 2 * math.pi / 16
        if model.kind == ModelKind.POWER_LAW:
            # shortest wavelength in the density's support is 1/(2 r0)
            return 1.0 / (32 * model.r0)
        return 1.0 / 8


def _root(model):
    return model.base if model.kind == ModelKind.ATOM else model


def bargmann_fock(support=None):
    return FieldModel(ModelKind.BARGMANN_FOCK, support=support)


def random_plane_wave():
    return FieldModel(ModelKind.RPW)


def power_law(alpha, r0, support=None):
    return FieldModel(ModelKind.POWER_LAW, alpha=float(alpha), r0=float(r0),
                      support=None if support is None else float(support))


def atom_plus(mass, base):
    return FieldModel(ModelKind.ATOM, mass=float(mass), base=base)


def _parse_params(text, model_id):
    params = {}
    for item in filter(None, text.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ModelError(f"Invalid model id '{model_id}': expected key=value, got '{item}'.")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise ModelError(f"Invalid model id '{model_id}': '{value}' is not a number.")
    return params


def parse_model(model_id):
    """Parses a catalogue id into a :class:`FieldModel`.

    Accepted forms are ``bargmann-fock``, ``rpw``,
    ``powerlaw:alpha=<a>,r0=<r>`` and ``atom:mass=<m>,base=<id>``; the first
    and third also take an optional ``support=<s>`` parameter.

    :param model_id: Catalogue id.
    :type model_id: str
    :return: The parsed model.
    :rtype: FieldModel
    :raises ModelError: If the id is unknown or its parameters are invalid.
    """
    if isinstance(model_id, FieldModel):
        return model_id
    text = str(model_id).strip()
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    if name == ModelKind.ATOM.value:
        head, sep, base_id = rest.partition("base=")
        if not sep or not base_id:
            raise ModelError(f"Invalid model id '{text}': atom models need base=<id>.")
        params = _parse_params(head, text)
        if set(params) != {"mass"}:
            raise ModelError(f"Invalid model id '{text}': atom models take mass=<m> and base=<id>.")
        return atom_plus(params["mass"], parse_model(base_id))
    params = _parse_params(rest, text)
    if name == ModelKind.BARGMANN_FOCK.value:
        if set(params) - {"support"}:
            raise ModelError(f"Invalid model id '{text}': unexpected parameters {sorted(params)}.")
        return bargmann_fock(params.get("support"))
    if name == ModelKind.RPW.value:
        if params:
            raise ModelError(f"Invalid model id '{text}': rpw takes no parameters.")
        return random_plane_wave()
    if name == ModelKind.POWER_LAW.value:
        if not {"alpha", "r0"} <= set(params) or set(params) - {"alpha", "r0", "support"}:
            raise ModelError(f"Invalid model id '{text}': expected powerlaw:alpha=<a>,r0=<r>.")
        return power_law(params["alpha"], params["r0"], params.get("support"))
    raise ModelError(f"Unknown model id '{text}'.")


def _radius(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (2,):
        raise ValueError(f"Expected planar points with a trailing axis of length 2, got shape {x.shape}.")
    return np.hypot(x[..., 0], x[..., 1])


def _scalar(value):
    return float(value) if np.ndim(value) == 0 else value


def _radial_covariance(model, r):
    if model.kind == ModelKind.BARGMANN_FOCK:
        return np.exp(-r * r / 2)
    if model.kind == ModelKind.RPW:
        return special.j0(r)
    raise ModelError(f"{model.id}: covariance available only via numeric transform "
                     "(use covariance_numeric).")


def covariance_eval(model, x):
    """Evaluates the covariance function in closed form.

    :param model: Field model.
    :type model: FieldModel
    :param x: A planar point, or an array of points with trailing axis 2.
    :type x: array_like
    :return: ``kappa(x)``; for atom models ``mass + kappa_base(x)``.
    :rtype: float or numpy.ndarray
    :raises ModelError: For power-law models, whose covariance is only
        available through :func:`covariance_numeric`.
    """
    r = _radius(x)
    if model.kind == ModelKind.ATOM:
        return _scalar(model.mass + _radial_covariance(model.base, r))
    return _scalar(_radial_covariance(model, r))


def _radial_density(model, s):
    """Declared radial density of a non-atom model with a density."""
    s = np.asarray(s, dtype=float)
    if model.kind == ModelKind.BARGMANN_FOCK:
        return 2 * math.pi * np.exp(-2 * math.pi ** 2 * s * s)
    if model.kind == ModelKind.POWER_LAW:
        r0, alpha = model.r0, model.alpha
        with np.errstate(divide="ignore"):
            core = np.power(s, -alpha)
        taper = r0 ** -alpha * np.cos(math.pi * (s - r0) / (2 * r0)) ** 2
        return np.where(s < r0, core, np.where(s < 2 * r0, taper, 0.0))
    raise ModelError(f"{model.id}: singular spectral measure (supported on the circle |t| = 1/(2 pi)).")


def density_mass(model):
    """Total mass of the declared density of the continuous spectral part.

    Bargmann-Fock has mass 1. The power-law density, ``|t|^-alpha`` on the core
    and a cosine-squared taper on ``[r0, 2 r0]``, has mass
    ``2 pi r0^(2-alpha) (1/(2-alpha) + 3/4 - 1/pi^2)``.
    """
    model = _root(model)
    if model.kind == ModelKind.POWER_LAW:
        return 2 * math.pi * model.r0 ** (2 - model.alpha) * (1 / (2 - model.alpha) + 0.75 - 1 / math.pi ** 2)
    _radial_density(model, 0.0)
    return 1.0


def spectral_density_eval(model, t, normalized=False):
    """Evaluates the spectral density of the continuous part.

    :param model: Field model.
    :type model: FieldModel
    :param t: A planar frequency, or an array of them with trailing axis 2.
    :type t: array_like
    :param normalized: Divide by :func:`density_mass`, giving the density of the
        unit-variance field (defaults to `False`, the declared density).
    :type normalized: bool, optional
    :return: ``rho(t)``; atom models return the density of their base.
    :rtype: float or numpy.ndarray
    :raises ModelError: For the Random Plane Wave, whose measure is singular.
    """
    model = _root(model)
    rho = _radial_density(model, _radius(t))
    if normalized:
        rho = rho / density_mass(model)
    return _scalar(rho)


def covariance_numeric(model, x):
    """Covariance by numerical Hankel transform of the normalised density.

    ``kappa(r) = (2 pi / M) int_0^inf s rho(s) J0(2 pi s r) ds``. The Random
    Plane Wave falls back to ``J0``.
    """
    base = _root(model)
    offset = model.mass if model.kind == ModelKind.ATOM else 0.0
    r = np.atleast_1d(_radius(x))
    if base.kind == ModelKind.RPW:
        values = special.j0(r)
    else:
        mass = density_mass(base)
        if base.kind == ModelKind.POWER_LAW:
            pieces = [(0.0, base.r0), (base.r0, 2 * base.r0)]
        else:
            pieces = [(0.0, 6.0 / math.pi)]
        values = np.empty_like(r)
        for i, radius in enumerate(r.ravel()):
            total = 0.0
            for lo, hi in pieces:
                part, _ = integrate.quad(
                    lambda s: s * _radial_density(base, s) * special.j0(2 * math.pi * s * radius),
                    lo, hi, epsabs=1e-14, epsrel=1e-12, limit=400)
                total += part
            values.flat[i] = 2 * math.pi * total / mass
    values = offset + values
    return float(values[0]) if np.ndim(_radius(x)) == 0 else values.reshape(np.shape(_radius(x)))


def lower_density_g(model, r, normalized=False):
    """Infimum of the spectral density over the closed ball of radius ``2r``.

    Every catalogue density is radially non-increasing, so the infimum is the
    density at radius ``2r``.

    :param model: Field model with a density.
    :type model: FieldModel
    :param r: Positive radius.
    :type r: float
    :param normalized: Use the density of the unit-variance field.
    :type normalized: bool, optional
    :rtype: float
    :raises ModelError: If ``2r`` exceeds the model's declared support radius or
        the model has no density.
    """
    if not r > 0:
        raise ValueError(f"Invalid r. Expected a positive value, got {r}.")
    base = _root(model)
    if 2 * r > model.support_radius:
        raise ModelError(f"{model.id}: ball of radius {2 * r} leaves the declared support "
                         f"neighbourhood of radius {model.support_radius}.")
    value = float(_radial_density(base, 2 * r))
    if normalized:
        value /= density_mass(base)
    return value


class KappaDerivatives(tuple):
    """``(d20, d40, d11)``: second, fourth and mixed derivatives of kappa at 0."""
    __slots__ = ()

    def __new__(cls, d20, d40, d11):
        return super().__new__(cls, (d20, d40, d11))

    d20 = property(lambda self: self[0])
    d40 = property(lambda self: self[1])
    d11 = property(lambda self: self[2])


def _spectral_moment(model, power):
    """``int_0^inf s^power rho(s) ds`` of the declared density."""
    if model.kind == ModelKind.POWER_LAW:
        pieces = [(0.0, model.r0), (model.r0, 2 * model.r0)]
    else:
        pieces = [(0.0, np.inf)]
    return sum(integrate.quad(lambda s: s ** power * _radial_density(model, s), lo, hi,
                              epsabs=1e-14, epsrel=1e-12, limit=400)[0] for lo, hi in pieces)


def _analytic_derivatives(model):
    if model.kind == ModelKind.BARGMANN_FOCK:
        return KappaDerivatives(-1.0, 3.0, 0.0)
    if model.kind == ModelKind.RPW:
        # J0(r) = 1 - r^2/4 + r^4/64 - ...
        return KappaDerivatives(-0.5, 0.375, 0.0)
    # int t1^2 rho = pi int s^3 rho ds, int t1^4 rho = (3 pi / 4) int s^5 rho ds
    mass = density_mass(model)
    d20 = -(2 * math.pi) ** 2 * math.pi * _spectral_moment(model, 3) / mass
    d40 = (2 * math.pi) ** 4 * 0.75 * math.pi * _spectral_moment(model, 5) / mass
    return KappaDerivatives(d20, d40, 0.0)


def _richardson(estimate, h):
    return (4 * estimate(h / 2) - estimate(h)) / 3


def _fd_derivatives(model, h=FD_STEP):
    if model.kind == ModelKind.POWER_LAW:
        kappa = lambda x, y: covariance_numeric(model, (x, y))
    else:
        kappa = lambda x, y: covariance_eval(model, (x, y))
    k0 = kappa(0.0, 0.0)

    def second(step):
        return (kappa(step, 0.0) - 2 * k0 + kappa(-step, 0.0)) / step ** 2

    def fourth(step):
        return (kappa(2 * step, 0.0) - 4 * kappa(step, 0.0) + 6 * k0
                - 4 * kappa(-step, 0.0) + kappa(-2 * step, 0.0)) / step ** 4

    def mixed(step):
        return (kappa(step, step) - kappa(step, -step) - kappa(-step, step)
                + kappa(-step, -step)) / (4 * step ** 2)

    return KappaDerivatives(_richardson(second, h), _richardson(fourth, h), _richardson(mixed, h))


def kappa_derivatives(model, scheme="analytic"):
    """Derivatives ``d^(2,0)``, ``d^(4,0)`` and ``d^(1,1)`` of kappa at the origin.

    :param model: Field model; the atom contributes nothing to derivatives.
    :type model: FieldModel
    :param scheme: ``'analytic'`` (closed forms for Bargmann-Fock and the RPW,
        spectral moments for density models) or ``'finite-difference'``
        (Richardson-extrapolated central differences with steps h and h/2).
    :type scheme: str, optional
    :rtype: KappaDerivatives
    """
    ALLOWED_SCHEMES = {"analytic", "finite-difference"}
    if scheme not in ALLOWED_SCHEMES:
        raise ValueError(f"Invalid scheme. Expected one of {ALLOWED_SCHEMES}, got {scheme}.")
    base = _root(model)
    if scheme == "analytic":
        return _analytic_derivatives(base)
    return _fd_derivatives(base)


def chi_parameter(model, scheme="analytic"):
    """The isotropy parameter ``chi = -sqrt(3) d20 / sqrt(d40)``.

    Bargmann-Fock gives 1 and the Random Plane Wave gives ``sqrt(2)``.

    :raises ModelError: If the fourth derivative is not finite and positive.
    """
    d = kappa_derivatives(model, scheme)
    if not (math.isfinite(d.d40) and d.d40 > 0):
        raise ModelError(f"{model.id}: fourth derivative of kappa at 0 is {d.d40}, chi undefined.")
    return -math.sqrt(3) * d.d20 / math.sqrt(d.d40)


def h_shift_eval(r, t):
    """Product of sincs ``prod_i sin(2 pi r t_i) / (2 pi r t_i)``, equal to 1 at ``t_i = 0``."""
    if not r > 0:
        raise ValueError(f"Invalid r. Expected a positive value, got {r}.")
    t = np.asarray(t, dtype=float)
    if t.shape[-1:] != (2,):
        raise ValueError(f"Expected planar points with a trailing axis of length 2, got shape {t.shape}.")
    # numpy's sinc is sin(pi x)/(pi x)
    return _scalar(np.sinc(2 * r * t[..., 0]) * np.sinc(2 * r * t[..., 1]))


def rkhs_shift_norm_bound(model, r, normalized=False):
    """Upper bound ``1 / (2 r sqrt(g(r)))`` on the RKHS norm of the shift ``h_r``."""
    g = lower_density_g(model, r, normalized=normalized)
    if not g > 0:
        raise ModelError(f"{model.id}: density infimum g({r}) = {g} is not positive.")
    return 1.0 / (2 * r * math.sqrt(g))


def tv_shift_bound(model, a, r, normalized=False):
    """Cameron-Martin bound ``|a| ||h_r||_H / sqrt(log 2)`` on ``d_TV(f, f - a h_r)``, clamped to [0, 1]."""
    if a == 0:
        return 0.0
    bound = abs(a) * rkhs_shift_norm_bound(model, r, normalized=normalized) / math.sqrt(math.log(2))
    return min(1.0, bound)


@dataclass(frozen=True)
class NormalizationReport:
    model_id: str
    variance: float
    gradient_c: float
    mixed: float
    flags: tuple = ()

    @property
    def isotropic(self):
        return "anisotropic" not in self.flags

    def to_dict(self):
        return {"model": self.model_id, "variance": self.variance, "gradient_c": self.gradient_c,
                "mixed": self.mixed, "isotropic": self.isotropic, "flags": list(self.flags)}


def normalization_report(model, scheme="analytic", tol=1e-9):
    """Reports ``Var f(x)``, the gradient covariance scalar and the mixed derivative.

    Violations are flagged rather than raised: ``'atom-normalized'`` for atom
    models (variance ``1 + mass``), ``'variance-not-unit'`` and
    ``'anisotropic'`` otherwise.
    """
    d = kappa_derivatives(model, scheme)
    flags = []
    if model.kind == ModelKind.ATOM:
        flags.append("atom-normalized")
    elif abs(model.variance - 1.0) > tol:
        flags.append("variance-not-unit")
    if abs(d.d11) > max(tol, 1e-6 if scheme == "finite-difference" else tol):
        flags.append("anisotropic")
    report = NormalizationReport(model.id, model.variance, -d.d20, d.d11, tuple(flags))
    logger.debug("normalization report %s", report.to_dict())
    return report
