"""Exceptions raised by :mod:`pyexlab`."""


class ExlabError(Exception):
    """Base class for all pyexlab errors."""


class ConfigError(ExlabError, ValueError):
    """An experiment configuration or constructor argument is invalid."""


class ModelError(ExlabError, ValueError):
    """A field model id is unknown or a model cannot answer a request."""


class SynthesisError(ExlabError, RuntimeError):
    """Field synthesis could not realise the requested covariance."""


class GridFormatError(ExlabError, ValueError):
    """An EXLB1 grid file is malformed."""


class EstimationError(ExlabError, ValueError):
    """A Monte Carlo estimate is degenerate (for example a zero variance)."""
