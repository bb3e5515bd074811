"""In-control models: fitting, CDF/sampling primitives, chart parameters.

A model represents the (estimated or true) in-control law of the
monitored observations.  Parametric kinds (normal, exponential) and the
empirical distribution of a phase-1 sample are supported for scalar
data; joint empirical rows of ``(response, covariates)`` back the
regression charts.  Models are immutable after construction and safe to
share across concurrent evaluations; all sampling goes through an
explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import (
    DegenerateSample,
    IncompatibleModelChart,
    InputError,
    NonPositiveData,
)

__all__ = [
    "Sample",
    "InControlModel",
    "NormalModel",
    "ExponentialModel",
    "EmpiricalModel",
    "JointModel",
    "ChartParams",
    "MeanSd",
    "Rate",
    "RegressionCoeffs",
    "fit_model",
    "extract_params",
    "model_cdf",
    "model_cdf_left",
    "model_survival",
    "sample_from",
]


@dataclass(frozen=True, eq=False)
class Sample:
    """An ordered sequence of scalar phase-1 observations."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise InputError("a sample needs at least one scalar observation")
        if not np.all(np.isfinite(values)):
            raise InputError("sample contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.size


class InControlModel:
    """Base class for in-control distributions."""

    #: size of the phase-1 sample the model was fitted from, if any
    n_fitted: int | None = None

    @property
    def provenance(self) -> str:
        return "fitted-from-sample" if self.n_fitted is not None else "explicit"


@dataclass(frozen=True, eq=False)
class NormalModel(InControlModel):
    mu: float
    sigma: float
    n_fitted: int | None = None

    def __post_init__(self):
        if not (self.sigma > 0 and np.isfinite(self.sigma) and np.isfinite(self.mu)):
            raise InputError("normal model needs finite mu and sigma > 0")


@dataclass(frozen=True, eq=False)
class ExponentialModel(InControlModel):
    rate: float
    n_fitted: int | None = None

    def __post_init__(self):
        if not (self.rate > 0 and np.isfinite(self.rate)):
            raise InputError("exponential model needs rate > 0")


@dataclass(frozen=True, eq=False)
class EmpiricalModel(InControlModel):
    """Discrete law with distinct sorted atoms and probability weights."""

    values: np.ndarray
    weights: np.ndarray
    n_fitted: int | None = None
    #: cumulative weights, aligned with ``values``
    cumweights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if values.ndim != 1 or values.shape != weights.shape or values.size == 0:
            raise InputError("empirical model needs matching 1-d values/weights")
        if np.any(np.diff(values) <= 0):
            raise InputError("empirical values must be strictly increasing")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise InputError("empirical weights must be positive and sum to 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "cumweights", np.cumsum(weights))

    @property
    def mean(self) -> float:
        return float(self.values @ self.weights)

    @property
    def population_sd(self) -> float:
        m = self.mean
        var = float(((self.values - m) ** 2) @ self.weights)
        return float(np.sqrt(var))


@dataclass(frozen=True, eq=False)
class JointModel(InControlModel):
    """Empirical joint law of rows ``(y, x)`` with equal row weights.

    ``x`` includes the leading intercept column.  Repeated rows are kept
    as-is; ``row_weights`` generalises to bootstrap-resampled row
    multiplicities.
    """

    y: np.ndarray
    x: np.ndarray
    row_weights: np.ndarray | None = None
    n_fitted: int | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if y.ndim != 1 or x.ndim != 2 or x.shape[0] != y.size or y.size == 0:
            raise InputError("joint model needs y (n,) and x (n, d) with n >= 1")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise InputError("joint model contains non-finite entries")
        w = self.row_weights
        if w is None:
            w = np.full(y.size, 1.0 / y.size)
        else:
            w = np.asarray(w, dtype=float)
            if w.shape != y.shape or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
                raise InputError("row weights must be positive and sum to 1")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "row_weights", w)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d(self) -> int:
        return self.x.shape[1]


class ChartParams:
    """Base class for run-time chart parameters extracted from a model."""


@dataclass(frozen=True)
class MeanSd(ChartParams):
    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise DegenerateSample("chart needs sigma > 0")


@dataclass(frozen=True)
class Rate(ChartParams):
    rate: float

    def __post_init__(self):
        if not (self.rate > 0 and np.isfinite(self.rate)):
            raise InputError("rate parameter must be positive")


@dataclass(frozen=True, eq=False)
class RegressionCoeffs(ChartParams):
    beta: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 1 or not np.all(np.isfinite(beta)):
            raise InputError("regression coefficients must be a finite vector")
        object.__setattr__(self, "beta", beta)


def fit_model(family: str, sample) -> InControlModel:
    """Fit an in-control model of the given family to a phase-1 sample.

    Parameters
    ----------
    family : {"normal", "exponential", "empirical", "empirical-joint"}
        Model family tag.
    sample : Sample or JointSample
        Phase-1 data; ``empirical-joint`` expects a
        :class:`spcboot.regression.JointSample`.

    Returns
    -------
    InControlModel
        The fitted model, carrying ``n_fitted`` for bootstrap use.
    """
    if family == "empirical-joint":
        return JointModel(y=sample.y, x=sample.x, n_fitted=sample.n)

    if not isinstance(sample, Sample):
        sample = Sample(np.asarray(sample, dtype=float))
    v = sample.values
    n = sample.n
    if n < 2:
        raise InputError("fitting needs at least 2 observations")
    if family == "normal":
        mu = float(v.mean())
        sigma = float(v.std(ddof=1))
        if sigma == 0.0:
            raise DegenerateSample("sample standard deviation is 0")
        return NormalModel(mu=mu, sigma=sigma, n_fitted=n)
    if family == "exponential":
        if np.any(v <= 0):
            raise NonPositiveData("exponential family needs all values > 0")
        return ExponentialModel(rate=1.0 / float(v.mean()), n_fitted=n)
    if family == "empirical":
        values, counts = np.unique(v, return_counts=True)
        return EmpiricalModel(values=values, weights=counts / n, n_fitted=n)
    raise InputError(f"unknown model family: {family!r}")


def extract_params(model: InControlModel, chart) -> ChartParams:
    """Extract the run-time parameter the chart needs from the model.

    Dispatches on ``chart.param_kind``: mean/sd charts use the model's
    first two moments (population moments for empirical models), the
    exponential likelihood-ratio chart uses the rate, and regression
    charts refit their coefficients on the joint rows.
    """
    kind = getattr(chart, "param_kind", None)
    if kind == "mean-sd":
        if isinstance(model, NormalModel):
            return MeanSd(model.mu, model.sigma)
        if isinstance(model, EmpiricalModel):
            sd = model.population_sd
            if sd == 0.0:
                raise DegenerateSample("empirical model has zero variance")
            return MeanSd(model.mean, sd)
        if isinstance(model, ExponentialModel):
            mean = 1.0 / model.rate
            return MeanSd(mean, mean)
        raise IncompatibleModelChart(f"{type(model).__name__} has no mean/sd parameters")
    if kind == "rate":
        if isinstance(model, ExponentialModel):
            return Rate(model.rate)
        if isinstance(model, EmpiricalModel):
            mean = model.mean
            if mean <= 0:
                raise IncompatibleModelChart("empirical mean must be positive for a rate")
            return Rate(1.0 / mean)
        raise IncompatibleModelChart(f"{type(model).__name__} has no rate parameter")
    if kind == "regression-ls" or kind == "regression-logit":
        if not isinstance(model, JointModel):
            raise IncompatibleModelChart("regression charts need an empirical-joint model")
        from . import regression

        fit = regression.fit_joint_model(model, kind)
        return RegressionCoeffs(fit.beta)
    raise IncompatibleModelChart(f"cannot extract parameters for chart {chart!r}")


def model_cdf(model: InControlModel, x):
    """Right-continuous CDF of a scalar model, vectorised in ``x``."""
    x = np.asarray(x, dtype=float)
    if isinstance(model, NormalModel):
        return ndtr((x - model.mu) / model.sigma)
    if isinstance(model, ExponentialModel):
        return -np.expm1(-model.rate * np.maximum(x, 0.0))
    if isinstance(model, EmpiricalModel):
        idx = np.searchsorted(model.values, x, side="right")
        cw = np.concatenate(([0.0], model.cumweights))
        return cw[idx]
    raise IncompatibleModelChart("model is not scalar-valued")


def model_cdf_left(model: InControlModel, x):
    """Left limit ``P(X < x)``; differs from the CDF only at atoms."""
    x = np.asarray(x, dtype=float)
    if isinstance(model, EmpiricalModel):
        idx = np.searchsorted(model.values, x, side="left")
        cw = np.concatenate(([0.0], model.cumweights))
        return cw[idx]
    return model_cdf(model, x)


def model_survival(model: InControlModel, x):
    """``P(X > x)`` computed without cancellation in the far tail."""
    x = np.asarray(x, dtype=float)
    if isinstance(model, NormalModel):
        return ndtr(-(x - model.mu) / model.sigma)
    if isinstance(model, ExponentialModel):
        return np.exp(-model.rate * np.maximum(x, 0.0))
    if isinstance(model, EmpiricalModel):
        return 1.0 - model_cdf(model, x)
    raise IncompatibleModelChart("model is not scalar-valued")


def sample_from(model: InControlModel, count: int, rng: np.random.Generator):
    """Draw ``count`` i.i.d. observations from the model.

    Returns a :class:`Sample` for scalar models and a
    :class:`spcboot.regression.JointSample` for joint models.  Output is
    a deterministic function of the generator state.
    """
    if count < 1:
        raise InputError("count must be >= 1")
    if isinstance(model, NormalModel):
        return Sample(rng.normal(model.mu, model.sigma, size=count))
    if isinstance(model, ExponentialModel):
        return Sample(rng.exponential(1.0 / model.rate, size=count))
    if isinstance(model, EmpiricalModel):
        if model.values.size == 1:
            return Sample(np.full(count, model.values[0]))
        return Sample(rng.choice(model.values, size=count, p=model.weights))
    if isinstance(model, JointModel):
        from .regression import JointSample

        idx = rng.choice(model.n, size=count, p=model.row_weights)
        return JointSample(y=model.y[idx], x=model.x[idx], has_intercept=True)
    raise IncompatibleModelChart(f"cannot sample from {type(model).__name__}")
