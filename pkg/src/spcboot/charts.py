"""Chart families, their scalar update laws, and a chart runner.

A chart family plus a model and a run-time parameter induces the law of
one chart increment (the "update distribution").  CUSUM performance is
computed from that law by the Markov engine in :mod:`spcboot.perf`;
:func:`run_chart` runs any family over an observation stream.

Update laws keep their affine structure ``(X - loc) / den`` explicit so
that threshold inversion can factor out the scale exactly: the scaled
and unscaled variants of a chart then calibrate to thresholds that
agree to rounding error after multiplying by the scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import IncompatibleModelChart, InputError, NonFiniteObservation
from .models import (
    ChartParams,
    EmpiricalModel,
    ExponentialModel,
    InControlModel,
    JointModel,
    MeanSd,
    NormalModel,
    Rate,
    RegressionCoeffs,
)

__all__ = [
    "ShewhartStandardized",
    "CusumMeanShift",
    "CusumExponentialLLR",
    "CusumLinReg",
    "CusumLogisticLLR",
    "ChartSpec",
    "UpdateLaw",
    "ClosedFormScalar",
    "NormalUpdate",
    "ExpAffineUpdate",
    "CustomUpdate",
    "DiscreteAtoms",
    "ChartPath",
    "update_distribution",
    "run_chart",
]


@dataclass(frozen=True)
class ShewhartStandardized:
    """Per-observation chart on ``(x - mu) / sd``; alarms on strict ``> c``."""

    two_sided: bool = False
    param_kind = "mean-sd"


@dataclass(frozen=True)
class CusumMeanShift:
    """CUSUM for a mean shift of ``delta``, optionally scaled by the sd."""

    delta: float
    scaled: bool = True
    param_kind = "mean-sd"

    def __post_init__(self):
        if not (self.delta > 0 and np.isfinite(self.delta)):
            raise InputError("mean-shift CUSUM needs delta > 0")


@dataclass(frozen=True)
class CusumExponentialLLR:
    """Likelihood-ratio CUSUM for exponential data.

    The out-of-control mean is ``delta`` times the in-control mean, so
    ``delta > 1`` monitors degradation; ``delta = 1`` is rejected.
    """

    delta: float
    param_kind = "rate"

    def __post_init__(self):
        if not (self.delta > 0 and np.isfinite(self.delta)) or self.delta == 1.0:
            raise InputError("exponential LLR CUSUM needs delta > 0, delta != 1")


@dataclass(frozen=True)
class CusumLinReg:
    """Residual CUSUM for a mean-response shift in a linear model."""

    delta: float
    param_kind = "regression-ls"

    def __post_init__(self):
        if not (self.delta > 0 and np.isfinite(self.delta)):
            raise InputError("linear-regression CUSUM needs delta > 0")


@dataclass(frozen=True)
class CusumLogisticLLR:
    """Log-likelihood-ratio CUSUM for a log-odds shift of ``delta``."""

    delta: float
    param_kind = "regression-logit"

    def __post_init__(self):
        if not np.isfinite(self.delta):
            raise InputError("logistic CUSUM needs a finite delta")


ChartSpec = (
    ShewhartStandardized
    | CusumMeanShift
    | CusumExponentialLLR
    | CusumLinReg
    | CusumLogisticLLR
)


class UpdateLaw:
    """Law of one CUSUM increment: CDF, left limit, and a scale hint."""

    def cdf(self, x):
        raise NotImplementedError

    def cdf_left(self, x):
        return self.cdf(x)

    @property
    def scale_hint(self) -> float:
        """A positive scale of the law, used to canonicalise inversions."""
        raise NotImplementedError


class ClosedFormScalar(UpdateLaw):
    """Base for update laws with a closed-form CDF."""


@dataclass(frozen=True, eq=False)
class NormalUpdate(ClosedFormScalar):
    """Law of ``(X - loc) / den`` with ``X ~ Normal(mu, sigma^2)``."""

    mu: float
    sigma: float
    loc: float = 0.0
    den: float = 1.0

    @property
    def mean(self) -> float:
        return (self.mu - self.loc) / self.den

    @property
    def sd(self) -> float:
        return self.sigma / self.den

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return ndtr((x * self.den + self.loc - self.mu) / self.sigma)

    @property
    def scale_hint(self) -> float:
        return self.sigma / self.den


@dataclass(frozen=True, eq=False)
class ExpAffineUpdate(ClosedFormScalar):
    """Law of ``slope * X + intercept`` with ``X ~ Exponential(rate)``."""

    slope: float
    intercept: float
    rate: float

    def __post_init__(self):
        if self.slope == 0 or self.rate <= 0:
            raise InputError("affine exponential update needs slope != 0, rate > 0")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.intercept) / self.slope
        if self.slope > 0:
            return -np.expm1(-self.rate * np.maximum(z, 0.0))
        return np.where(z <= 0, 1.0, np.exp(-self.rate * z))

    @property
    def scale_hint(self) -> float:
        return abs(self.slope) / self.rate


@dataclass(frozen=True, eq=False)
class CustomUpdate(ClosedFormScalar):
    """Update law given by arbitrary CDF callables (vectorised in x)."""

    cdf_fn: object
    cdf_left_fn: object = None
    scale: float = 1.0

    def cdf(self, x):
        return np.asarray(self.cdf_fn(np.asarray(x, dtype=float)), dtype=float)

    def cdf_left(self, x):
        if self.cdf_left_fn is None:
            return self.cdf(x)
        return np.asarray(self.cdf_left_fn(np.asarray(x, dtype=float)), dtype=float)

    @property
    def scale_hint(self) -> float:
        return self.scale

    def canonical(self):
        s = self.scale
        return (
            CustomUpdate(
                cdf_fn=lambda y, _f=self.cdf_fn, _s=s: _f(np.asarray(y) * _s),
                cdf_left_fn=None
                if self.cdf_left_fn is None
                else (lambda y, _f=self.cdf_left_fn, _s=s: _f(np.asarray(y) * _s)),
                scale=1.0,
            ),
            s,
        )


@dataclass(frozen=True, eq=False)
class DiscreteAtoms(UpdateLaw):
    """Discrete update law with strictly increasing atoms.

    When built from an empirical model the raw source values and the
    affine map ``(v - loc) / den`` are kept so that canonicalisation is
    independent of ``den`` (bit-identical for scaled/unscaled charts).
    """

    atoms: np.ndarray
    weights: np.ndarray
    source_values: np.ndarray | None = None
    loc: float = 0.0
    den: float = 1.0
    cumweights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if atoms.ndim != 1 or atoms.shape != weights.shape or atoms.size == 0:
            raise InputError("atoms/weights must be matching 1-d arrays")
        if np.any(np.diff(atoms) <= 0):
            raise InputError("atoms must be strictly increasing")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise InputError("weights must be positive and sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "cumweights", np.cumsum(weights))

    def cdf(self, x):
        idx = np.searchsorted(self.atoms, np.asarray(x, dtype=float), side="right")
        cw = np.concatenate(([0.0], self.cumweights))
        return cw[idx]

    def cdf_left(self, x):
        idx = np.searchsorted(self.atoms, np.asarray(x, dtype=float), side="left")
        cw = np.concatenate(([0.0], self.cumweights))
        return cw[idx]

    def _basis(self) -> np.ndarray:
        return self.atoms if self.source_values is None else self.source_values

    @property
    def scale_hint(self) -> float:
        v = self._basis()
        m = float(v @ self.weights)
        sd = float(np.sqrt(((v - m) ** 2) @ self.weights))
        if sd > 0:
            return sd
        amax = float(np.max(np.abs(self.atoms)))
        return amax if amax > 0 else 1.0


def _merge_atoms(atoms: np.ndarray, weights: np.ndarray):
    """Sort and merge exactly-equal atoms (binary equality only)."""
    order = np.argsort(atoms, kind="stable")
    a = atoms[order]
    w = weights[order]
    keep = np.concatenate(([True], np.diff(a) > 0))
    idx = np.cumsum(keep) - 1
    merged_w = np.zeros(keep.sum())
    np.add.at(merged_w, idx, w)
    return a[keep], merged_w


@dataclass(frozen=True, eq=False)
class ChartPath:
    """A realised chart trajectory, truncated at the first alarm."""

    values: np.ndarray
    alarm_time: int | None
    threshold: float


def update_distribution(
    chart: ChartSpec, model: InControlModel, params: ChartParams
) -> UpdateLaw:
    """Law of one chart increment under ``model`` run with ``params``.

    The model supplies the data law; the parameter is the (possibly
    estimated) value plugged into the chart statistic, so the two may
    disagree — that mismatch is exactly what conditional performance
    measures quantify.
    """
    if isinstance(chart, CusumMeanShift):
        if not isinstance(params, MeanSd):
            raise IncompatibleModelChart("mean-shift CUSUM needs MeanSd parameters")
        loc = params.mu + chart.delta / 2.0
        den = params.sigma if chart.scaled else 1.0
        if isinstance(model, NormalModel):
            return NormalUpdate(mu=model.mu, sigma=model.sigma, loc=loc, den=den)
        if isinstance(model, ExponentialModel):
            return ExpAffineUpdate(
                slope=1.0 / den, intercept=-loc / den, rate=model.rate
            )
        if isinstance(model, EmpiricalModel):
            return DiscreteAtoms(
                atoms=(model.values - loc) / den,
                weights=model.weights,
                source_values=model.values,
                loc=loc,
                den=den,
            )
        raise IncompatibleModelChart(
            f"mean-shift CUSUM cannot use {type(model).__name__}"
        )
    if isinstance(chart, CusumExponentialLLR):
        if not isinstance(params, Rate):
            raise IncompatibleModelChart("exponential LLR CUSUM needs a Rate parameter")
        slope = params.rate * (1.0 - 1.0 / chart.delta)
        intercept = -np.log(chart.delta)
        if isinstance(model, ExponentialModel):
            return ExpAffineUpdate(slope=slope, intercept=intercept, rate=model.rate)
        if isinstance(model, EmpiricalModel):
            atoms = model.values * slope + intercept
            weights = model.weights
            if slope < 0:
                atoms = atoms[::-1]
                weights = weights[::-1]
            atoms, weights = _merge_atoms(atoms, weights)
            return DiscreteAtoms(atoms=atoms, weights=weights)
        raise IncompatibleModelChart(
            f"exponential LLR CUSUM cannot use {type(model).__name__}"
        )
    if isinstance(chart, (CusumLinReg, CusumLogisticLLR)):
        if not isinstance(params, RegressionCoeffs):
            raise IncompatibleModelChart("regression CUSUMs need RegressionCoeffs")
        if not isinstance(model, JointModel):
            raise IncompatibleModelChart("regression CUSUMs need an empirical-joint model")
        from .regression import joint_update_distribution

        return joint_update_distribution(chart, model, params.beta)
    if isinstance(chart, ShewhartStandardized):
        raise IncompatibleModelChart(
            "Shewhart charts have no accumulated update; use the closed forms"
        )
    raise IncompatibleModelChart(f"unknown chart {chart!r}")


def _increments(chart: ChartSpec, params: ChartParams, obs: np.ndarray) -> np.ndarray:
    if isinstance(chart, CusumMeanShift):
        inc = obs - params.mu - chart.delta / 2.0
        return inc / params.sigma if chart.scaled else inc
    if isinstance(chart, CusumExponentialLLR):
        return obs * (params.rate * (1.0 - 1.0 / chart.delta)) - np.log(chart.delta)
    if isinstance(chart, CusumLinReg):
        from .regression import linreg_increment

        return linreg_increment(obs[:, 0], obs[:, 1:], params.beta, chart.delta)
    if isinstance(chart, CusumLogisticLLR):
        from .regression import logistic_llr_increment

        return logistic_llr_increment(obs[:, 0], obs[:, 1:], params.beta, chart.delta)
    raise IncompatibleModelChart(f"chart {chart!r} has no CUSUM increments")


def run_chart(
    chart: ChartSpec, params: ChartParams, threshold: float, stream
) -> ChartPath:
    """Run the chart over a stream and report the first alarm.

    CUSUM paths follow ``S_t = max(0, S_{t-1} + increment)`` from
    ``S_0 = 0`` and alarm at the first ``S_t >= c``; the Shewhart chart
    records the standardised statistic per step and alarms on strict
    exceedance ``> c``.  The returned path is truncated at the alarm.
    """
    if not (threshold > 0 and np.isfinite(threshold)):
        raise InputError("threshold must be positive and finite")
    obs = np.asarray(stream, dtype=float)
    if isinstance(chart, (CusumLinReg, CusumLogisticLLR)):
        if obs.ndim != 2 or obs.shape[1] < 2:
            raise IncompatibleModelChart(
                "regression charts need rows (y, x_1, ..., x_d)"
            )
        if isinstance(params, RegressionCoeffs) and obs.shape[1] - 1 != params.beta.size:
            raise IncompatibleModelChart(
                f"row dimension {obs.shape[1] - 1} does not match beta ({params.beta.size})"
            )
    elif obs.ndim != 1:
        raise IncompatibleModelChart("scalar charts need a 1-d stream")
    if not np.all(np.isfinite(obs)):
        raise NonFiniteObservation("stream contains non-finite observations")

    if isinstance(chart, ShewhartStandardized):
        stat = (obs - params.mu) / params.sigma
        if chart.two_sided:
            stat = np.abs(stat)
        exceed = np.nonzero(stat > threshold)[0]
        alarm = int(exceed[0]) + 1 if exceed.size else None
        last = alarm if alarm is not None else stat.size
        values = np.concatenate(([0.0], stat[:last]))
        return ChartPath(values=values, alarm_time=alarm, threshold=threshold)

    inc = _increments(chart, params, obs)
    values = np.empty(inc.size + 1)
    values[0] = 0.0
    s = 0.0
    alarm = None
    for t, y in enumerate(inc, start=1):
        s = max(0.0, s + y)
        values[t] = s
        if s >= threshold:
            alarm = t
            break
    last = alarm if alarm is not None else inc.size
    return ChartPath(values=values[: last + 1], alarm_time=alarm, threshold=threshold)
