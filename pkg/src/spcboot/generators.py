"""True-model generators for the simulation experiments.

A generator owns the actual data law of an experiment: it draws phase-1
samples and exposes the exact closed-form CDF of one chart increment
under that law, so "true" conditional performance at an estimated
parameter is computed by the Markov engine rather than by simulation.
An out-of-control shift moves the data law from time 0 onwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, ndtr

from .charts import (
    CusumExponentialLLR,
    CusumLinReg,
    CusumLogisticLLR,
    CusumMeanShift,
    CustomUpdate,
    ExpAffineUpdate,
    NormalUpdate,
    UpdateLaw,
)
from .errors import IncompatibleModelChart, InputError
from .models import MeanSd, Rate, RegressionCoeffs, Sample
from .perf import MarkovConfig, PerfMeasure, arl_markov, hit_markov, invert_threshold
from .regression import JointSample

__all__ = [
    "NormalGenerator",
    "ExponentialGenerator",
    "ScaledChiSquareGenerator",
    "LinearModelGenerator",
    "LogisticModelGenerator",
    "make_generator",
]


class Generator:
    """Protocol: phase-1 sampling plus exact update laws."""

    name: str

    def sample_phase1(self, n: int, rng):
        raise NotImplementedError

    def true_update(self, chart, params, shift: float = 0.0) -> UpdateLaw:
        raise NotImplementedError

    def truth_measure(self, chart, params, measure: PerfMeasure, markov: MarkovConfig, shift: float = 0.0) -> float:
        update = self.true_update(chart, params, shift)
        if measure.kind == "arl":
            raw = arl_markov(update, measure.c, markov)
        elif measure.kind == "hit":
            raw = hit_markov(update, measure.c, measure.T, markov)
        else:
            raw = invert_threshold(update, measure, markov)
        return measure.apply_transform(raw)


def _meanshift_loc_den(chart: CusumMeanShift, params: MeanSd):
    loc = params.mu + chart.delta / 2.0
    den = params.sigma if chart.scaled else 1.0
    return loc, den


@dataclass(frozen=True)
class NormalGenerator(Generator):
    mu: float = 0.0
    sigma: float = 1.0
    name: str = "normal"

    def sample_phase1(self, n, rng):
        return Sample(rng.normal(self.mu, self.sigma, size=n))

    def true_update(self, chart, params, shift=0.0):
        if not isinstance(chart, CusumMeanShift):
            raise IncompatibleModelChart("normal generator drives mean-shift CUSUMs")
        loc, den = _meanshift_loc_den(chart, params)
        return NormalUpdate(mu=self.mu + shift, sigma=self.sigma, loc=loc, den=den)


@dataclass(frozen=True)
class ExponentialGenerator(Generator):
    """Exponential data law.

    For mean-shift CUSUMs an out-of-control ``shift`` adds to the
    observations (``X + shift``); for the likelihood-ratio chart a
    nonzero ``shift`` selects the designed out-of-control law with the
    mean multiplied by the chart's delta.
    """

    mean: float = 1.0
    name: str = "exponential"

    def sample_phase1(self, n, rng):
        return Sample(rng.exponential(self.mean, size=n))

    def true_update(self, chart, params, shift=0.0):
        if isinstance(chart, CusumMeanShift):
            loc, den = _meanshift_loc_den(chart, params)
            # law of ((X + shift) - loc) / den, X ~ Exp(1/mean)
            return ExpAffineUpdate(
                slope=1.0 / den, intercept=(shift - loc) / den, rate=1.0 / self.mean
            )
        if isinstance(chart, CusumExponentialLLR):
            if not isinstance(params, Rate):
                raise IncompatibleModelChart("LLR chart needs a Rate parameter")
            slope = params.rate * (1.0 - 1.0 / chart.delta)
            intercept = -np.log(chart.delta)
            out_factor = chart.delta if shift != 0.0 else 1.0
            return ExpAffineUpdate(
                slope=slope, intercept=intercept, rate=1.0 / (self.mean * out_factor)
            )
        raise IncompatibleModelChart("exponential generator: unsupported chart")


@dataclass(frozen=True)
class ScaledChiSquareGenerator(Generator):
    """``scale * V`` with ``V ~ chi-square(df)``; defaults give variance 1."""

    df: float = 10.0
    scale: float = 1.0 / np.sqrt(20.0)
    name: str = "chi-square-scaled"

    def sample_phase1(self, n, rng):
        return Sample(self.scale * rng.chisquare(self.df, size=n))

    def true_update(self, chart, params, shift=0.0):
        if not isinstance(chart, CusumMeanShift):
            raise IncompatibleModelChart("chi-square generator drives mean-shift CUSUMs")
        loc, den = _meanshift_loc_den(chart, params)
        k = self.df / 2.0
        scale = self.scale

        def cdf(y):
            # P((scale*V + shift - loc)/den <= y)
            z = (np.asarray(y, dtype=float) * den + loc - shift) / scale
            return gammainc(k, np.maximum(z, 0.0) / 2.0)

        sd = scale * np.sqrt(2.0 * self.df) / den
        return CustomUpdate(cdf_fn=cdf, scale=sd)


def _phi_uniform_normal_cdf(y, lo, hi, m, s):
    """CDF of ``U(lo, hi) + Normal(m, s^2)`` via G(z) = z*Phi(z) + phi(z)."""
    y = np.asarray(y, dtype=float)
    if hi - lo < 1e-12:
        return ndtr((y - (lo + hi) / 2.0 - m) / s)

    def big_g(z):
        return z * ndtr(z) + np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)

    za = (y - m - lo) / s
    zb = (y - m - hi) / s
    return np.clip(s * (big_g(za) - big_g(zb)) / (hi - lo), 0.0, 1.0)


@dataclass(frozen=True)
class LinearModelGenerator(Generator):
    """Linear in-control model with mixed covariates.

    ``Y = X1 + X2 + X3 + eps`` with ``X1 ~ Bernoulli(0.4)``,
    ``X2 ~ U(0, 1)``, ``X3 ~ N(0, 1)``, ``eps ~ N(0, 1)``; the fitted
    design adds an intercept.  An out-of-control shift adds to the
    response.
    """

    p_bern: float = 0.4
    name: str = "linear-model"
    true_beta = (0.0, 1.0, 1.0, 1.0)

    def _draw(self, n, rng):
        x1 = (rng.random(n) < self.p_bern).astype(float)
        x2 = rng.random(n)
        x3 = rng.normal(size=n)
        eps = rng.normal(size=n)
        y = x1 + x2 + x3 + eps
        return y, x1, x2, x3

    def sample_phase1(self, n, rng):
        y, x1, x2, x3 = self._draw(n, rng)
        return JointSample.with_intercept(y, np.column_stack((x1, x2, x3)))

    def sample_rows(self, n, rng, shift: float = 0.0):
        y, x1, x2, x3 = self._draw(n, rng)
        return JointSample.with_intercept(y + shift, np.column_stack((x1, x2, x3)))

    def true_update(self, chart, params, shift=0.0):
        if not isinstance(chart, CusumLinReg):
            raise IncompatibleModelChart("linear generator drives the linear CUSUM")
        beta = np.asarray(params.beta, dtype=float)
        if beta.size != 4:
            raise InputError("linear model expects 4 coefficients (incl. intercept)")
        b0, b1, b2, b3 = beta
        # increment = (Y + shift) - x@beta - delta/2
        #           = a1*X1 + U(0, a2) + N(m0, 1 + a3^2)
        a1 = 1.0 - b1
        a2 = 1.0 - b2
        a3 = 1.0 - b3
        m0 = shift - b0 - chart.delta / 2.0
        s = np.sqrt(1.0 + a3 * a3)
        lo, hi = min(0.0, a2), max(0.0, a2)
        p1 = self.p_bern

        def cdf(y_):
            y_ = np.asarray(y_, dtype=float)
            c0 = _phi_uniform_normal_cdf(y_, lo, hi, m0, s)
            c1 = _phi_uniform_normal_cdf(y_ - a1, lo, hi, m0, s)
            return (1.0 - p1) * c0 + p1 * c1

        sd = np.sqrt(a1 * a1 * p1 * (1 - p1) + a2 * a2 / 12.0 + 1.0 + a3 * a3)
        return CustomUpdate(cdf_fn=cdf, scale=float(sd))


@dataclass(frozen=True)
class LogisticModelGenerator(Generator):
    """Binary response with true log odds ``X1 + X2 + X3``.

    Covariates match the linear model; an out-of-control shift adds to
    the log odds.  The increment ``R = y*delta + log((1+e^V)/(1+e^(delta+V)))``
    with ``V = x @ beta`` is strictly monotone in ``V`` per response, so
    ``{R <= r}`` is a half-space in the predictor with a closed-form
    boundary; the exact CDF reduces to smooth quadrature over
    ``(X2, X3)`` on one side of that boundary.
    """

    p_bern: float = 0.4
    name: str = "logistic-model"
    true_beta = (0.0, 1.0, 1.0, 1.0)

    def sample_phase1(self, n, rng):
        x1 = (rng.random(n) < self.p_bern).astype(float)
        x2 = rng.random(n)
        x3 = rng.normal(size=n)
        eta = x1 + x2 + x3
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
        return JointSample.with_intercept(y, np.column_stack((x1, x2, x3)))

    def true_update(self, chart, params, shift=0.0):
        if not isinstance(chart, CusumLogisticLLR):
            raise IncompatibleModelChart("logistic generator drives the logistic CUSUM")
        beta = np.asarray(params.beta, dtype=float)
        if beta.size != 4:
            raise InputError("logistic model expects 4 coefficients (incl. intercept)")
        delta = chart.delta
        if delta <= 0:
            raise InputError("exact logistic update law needs delta > 0")
        p1 = self.p_bern
        b0, b1, b2, b3 = beta
        if abs(b3) < 1e-12:
            raise InputError("degenerate predictor law (coefficient on X3 is 0)")

        x2n, x2w = np.polynomial.legendre.leggauss(48)
        x2n = 0.5 * (x2n + 1.0)
        x2w = 0.5 * x2w
        x3n, x3w = np.polynomial.legendre.leggauss(64)
        lim = 10.0

        def v_star(y, r):
            # solve y*delta + log((1+e^v)/(1+e^(delta+v))) = r for v;
            # R ranges over ((y-1)*delta, y*delta), decreasing in v
            if r >= y * delta:
                return -np.inf
            if r <= (y - 1.0) * delta:
                return np.inf
            k = np.exp(r - y * delta)
            u = (k - 1.0) / (1.0 - k * np.exp(delta))
            return np.log(u)

        def half_space_mass(y, vs):
            # E[ P(Y=y | X) * 1(V >= vs) ] over (X1, X2, X3)
            if vs == np.inf:
                return 0.0
            total = 0.0
            for x1val, px1 in ((0.0, 1.0 - p1), (1.0, p1)):
                # boundary in x3 given x2: b3*x3 >= vs - b0 - b1*x1 - b2*x2
                t = (vs - b0 - b1 * x1val - b2 * x2n) / b3
                if b3 > 0:
                    lo = np.minimum(np.maximum(t, -lim), lim)
                    hi = np.full_like(lo, lim)
                else:
                    hi = np.minimum(np.maximum(t, -lim), lim)
                    lo = np.full_like(hi, -lim)
                # map x3 nodes into [lo, hi] per x2 node
                mid = 0.5 * (lo + hi)
                rad = 0.5 * (hi - lo)
                x3 = mid[:, None] + rad[:, None] * x3n[None, :]
                w3 = rad[:, None] * x3w[None, :]
                eta = shift + x1val + x2n[:, None] + x3
                p_one = 1.0 / (1.0 + np.exp(-eta))
                py = p_one if y == 1.0 else 1.0 - p_one
                dens = np.exp(-0.5 * x3 * x3) / np.sqrt(2.0 * np.pi)
                inner = (py * dens * w3).sum(axis=1)
                total += px1 * float((inner * x2w).sum())
            return total

        def cdf(r):
            r = np.atleast_1d(np.asarray(r, dtype=float))
            out = np.empty_like(r)
            for i, ri in enumerate(r):
                out[i] = half_space_mass(0.0, v_star(0.0, ri)) + half_space_mass(
                    1.0, v_star(1.0, ri)
                )
            return np.clip(out, 0.0, 1.0)

        return CustomUpdate(cdf_fn=cdf, scale=max(abs(delta) / 2.0, 0.1))


def make_generator(name: str) -> Generator:
    """Generator registry for experiment specs."""
    table = {
        "normal": NormalGenerator(),
        "exponential": ExponentialGenerator(),
        "chi-square-scaled": ScaledChiSquareGenerator(),
        "linear-model": LinearModelGenerator(),
        "logistic-model": LogisticModelGenerator(),
    }
    if name not in table:
        raise InputError(f"unknown generator {name!r}; choose from {sorted(table)}")
    return table[name]
