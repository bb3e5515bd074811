"""Risk-adjusted CUSUM building blocks: linear and logistic fits.

Charts on heterogeneous units replace the constant in-control mean by a
fitted regression prediction per observation.  The linear chart
accumulates residuals ``y - x @ beta - delta/2``; the logistic chart
accumulates the log likelihood ratio between the in-control model and
the model with the log odds shifted by ``delta``.  Both resample rows
``(y, x)`` jointly in the bootstrap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InputError, NoConvergence, RankDeficient, Separation

__all__ = [
    "JointSample",
    "RegressionFit",
    "fit_linear",
    "fit_logistic",
    "linreg_increment",
    "logistic_llr_increment",
    "joint_update_distribution",
]

_SEPARATION_NORM = 1e3


@dataclass(frozen=True, eq=False)
class JointSample:
    """Rows ``(y, x)`` with a leading intercept column in ``x``.

    Scalar machinery never sees these; they exist to fit regression
    charts and to be resampled jointly.
    """

    y: np.ndarray
    x: np.ndarray
    has_intercept: bool = True

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if y.ndim != 1 or x.ndim != 2 or x.shape[0] != y.size or y.size == 0:
            raise InputError("joint sample needs y (n,) and x (n, d)")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise InputError("joint sample contains non-finite entries")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @classmethod
    def with_intercept(cls, y, covariates) -> "JointSample":
        """Prepend the intercept column of ones to raw covariates."""
        covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
        if covariates.shape[0] != np.asarray(y).size:
            covariates = covariates.T
        x = np.column_stack((np.ones(len(covariates)), covariates))
        return cls(y=np.asarray(y, dtype=float), x=x)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class RegressionFit:
    beta: np.ndarray
    fit_kind: str
    iterations: int = 0
    grad_norm: float = 0.0
    converged: bool = True


def fit_linear(sample: JointSample) -> RegressionFit:
    """Least-squares coefficients via QR of the design matrix."""
    if sample.n <= sample.d:
        raise InputError("need more rows than coefficients")
    q, r = np.linalg.qr(sample.x)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise RankDeficient("design matrix is rank deficient")
    beta = solve_triangular(r, q.T @ sample.y)
    return RegressionFit(beta=beta, fit_kind="least-squares")


def _log_likelihood(y, eta):
    # sum y*eta - log(1 + exp(eta)), overflow-safe
    return float(y @ eta - np.logaddexp(0.0, eta).sum())


def fit_logistic(sample: JointSample, tol: float = 1e-8, max_iter: int = 100) -> RegressionFit:
    """Logistic MLE by Newton-Raphson with step halving.

    Convergence is declared at score max-norm ``tol``.  Coefficient
    norms beyond 1e3 are reported as separation; hitting the iteration
    budget raises.
    """
    y = sample.y
    x = sample.x
    if sample.n <= sample.d:
        raise InputError("need more rows than coefficients")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise InputError("logistic fit needs binary responses")
    beta = np.zeros(sample.d)
    eta = x @ beta
    ll = _log_likelihood(y, eta)
    grad_norm = np.inf
    for it in range(1, max_iter + 1):
        mu = 1.0 / (1.0 + np.exp(-eta))
        grad = x.T @ (y - mu)
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= tol:
            return RegressionFit(
                beta=beta, fit_kind="logistic-mle", iterations=it - 1,
                grad_norm=grad_norm, converged=True,
            )
        w = mu * (1.0 - mu)
        hess = x.T @ (x * w[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise Separation("singular information matrix; data may be separated") from exc
        # halve until the likelihood does not decrease
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            ll_cand = _log_likelihood(y, x @ cand)
            if ll_cand >= ll - 1e-12:
                break
            scale *= 0.5
        beta = beta + scale * step
        eta = x @ beta
        ll = _log_likelihood(y, eta)
        if float(np.linalg.norm(beta)) > _SEPARATION_NORM:
            raise Separation("coefficients diverged; data are (quasi-)separated")
    raise NoConvergence(
        f"logistic fit did not converge in {max_iter} iterations (score {grad_norm:.2e})"
    )


def linreg_increment(y, x, beta, delta: float):
    """Residual chart increment ``y - x @ beta - delta/2`` (vectorised)."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    return y - x @ np.asarray(beta, dtype=float) - delta / 2.0


def logistic_llr_increment(y, x, beta, delta: float):
    """Log likelihood ratio for a log-odds shift of ``delta``.

    ``y*delta + log(1 + exp(x@beta)) - log(1 + exp(delta + x@beta))``,
    evaluated through log1p-of-exp so large linear predictors do not
    overflow.
    """
    y = np.asarray(y, dtype=float)
    eta = np.asarray(x, dtype=float) @ np.asarray(beta, dtype=float)
    return y * delta + np.logaddexp(0.0, eta) - np.logaddexp(0.0, delta + eta)


def joint_update_distribution(chart, model, beta):
    """Discrete increment law over the joint model's rows.

    Each row contributes its increment with the row's weight; exactly
    equal increments merge.  The result feeds the Markov engine like
    any other scalar update law.
    """
    from .charts import CusumLinReg, CusumLogisticLLR, DiscreteAtoms, _merge_atoms

    if isinstance(chart, CusumLinReg):
        inc = linreg_increment(model.y, model.x, beta, chart.delta)
    elif isinstance(chart, CusumLogisticLLR):
        inc = logistic_llr_increment(model.y, model.x, beta, chart.delta)
    else:
        raise InputError(f"not a regression chart: {chart!r}")
    atoms, weights = _merge_atoms(np.asarray(inc, dtype=float), model.row_weights.copy())
    return DiscreteAtoms(atoms=atoms, weights=weights)


def fit_joint_model(model, kind: str) -> RegressionFit:
    """Fit the coefficients a regression chart needs from a joint model."""
    sample = JointSample(y=model.y, x=model.x)
    if kind == "regression-ls":
        return fit_linear(sample)
    return fit_logistic(sample)
