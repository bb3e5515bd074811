"""Bootstrap adjustment: pivots, one-sided bounds, adjusted thresholds.

The estimated in-control model is resampled ``B`` times; each replicate
``b`` yields the pivot ``q(P*_b; xi*_b) - q(P_hat; xi*_b)``, where both
terms plug in the replicate's parameter but the second evaluates the
original model under it.  A direction-aware empirical quantile of the
pivots then shifts the plug-in estimate into a one-sided confidence
bound; on threshold measures, that bound is the adjusted threshold
which attains the target in-control behaviour with probability about
``1 - alpha`` over the phase-1 estimation.

Replicate ``b`` draws only from the stream keyed ``(master_seed, b)``,
so results are bit-identical across runs and worker counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import perf as _perf
from .charts import update_distribution
from .errors import (
    DegenerateResample,
    DegenerateSample,
    IncompatibleModelChart,
    InputError,
    TooManyFailures,
    TransformDomain,
)
from .models import (
    EmpiricalModel,
    ExponentialModel,
    InControlModel,
    JointModel,
    NormalModel,
    extract_params,
    fit_model,
    sample_from,
)
from .perf import MarkovConfig, PerfMeasure, eval_measure
from .seeding import derive_seed, substream

__all__ = [
    "DIRECTION_UPPER",
    "DIRECTION_LOWER",
    "BootstrapConfig",
    "PivotSample",
    "AdjustmentResult",
    "resample_model",
    "pivot_sample",
    "quantile_pivot",
    "adjust",
    "coverage_check",
]

DIRECTION_UPPER = "upper-bound-on-q"
DIRECTION_LOWER = "lower-bound-on-q"

_MAX_FAILURE_FRACTION = 0.01


@dataclass(frozen=True)
class BootstrapConfig:
    """Settings for one bootstrap adjustment."""

    B: int = 1000
    alpha: float = 0.1
    scheme: str = "parametric"
    master_seed: int = 0
    direction: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.B < 100:
            raise InputError("B must be >= 100")
        if not 0.0 < self.alpha <= 0.5:
            raise InputError("alpha must be in (0, 0.5]")
        if self.scheme not in ("parametric", "nonparametric"):
            raise InputError(f"unknown scheme {self.scheme!r}")
        if self.direction not in (None, DIRECTION_UPPER, DIRECTION_LOWER):
            raise InputError(f"unknown direction {self.direction!r}")
        if self.workers < 1:
            raise InputError("workers must be >= 1")


@dataclass(frozen=True, eq=False)
class PivotSample:
    """Pivot values from the successful replicates plus failure counts."""

    values: np.ndarray
    failures: int = 0
    reasons: dict = field(default_factory=dict)

    @property
    def B(self) -> int:
        return self.values.size + self.failures


@dataclass(frozen=True)
class AdjustmentResult:
    """Plug-in estimate, pivot quantile, and the one-sided bound.

    ``q_hat`` and ``p_star`` live on the measure's transform scale;
    ``bound`` is reported back on the natural scale.
    """

    q_hat: float
    p_star: float
    bound: float
    direction: str
    alpha: float
    B: int
    pivot_summary: dict


def _resample_once(model: InControlModel, scheme: str, n: int, rng) -> InControlModel:
    if scheme == "parametric":
        if isinstance(model, NormalModel):
            draws = rng.normal(model.mu, model.sigma, size=n)
            sd = float(draws.std(ddof=1))
            if sd == 0.0:
                raise DegenerateResample("refitted normal has zero variance")
            return NormalModel(mu=float(draws.mean()), sigma=sd, n_fitted=n)
        if isinstance(model, ExponentialModel):
            draws = rng.exponential(1.0 / model.rate, size=n)
            mean = float(draws.mean())
            if mean <= 0.0:
                raise DegenerateResample("refitted exponential has non-positive mean")
            return ExponentialModel(rate=1.0 / mean, n_fitted=n)
        raise IncompatibleModelChart(
            "parametric resampling needs a parametric model"
        )
    if isinstance(model, EmpiricalModel):
        if model.values.size == 1:
            # resampling a point mass reproduces it exactly
            return EmpiricalModel(
                values=model.values, weights=model.weights, n_fitted=n
            )
        counts = rng.multinomial(n, model.weights)
        keep = counts > 0
        if keep.sum() < 2:
            raise DegenerateResample("resample collapsed to a single atom")
        return EmpiricalModel(
            values=model.values[keep], weights=counts[keep] / n, n_fitted=n
        )
    if isinstance(model, JointModel):
        counts = rng.multinomial(n, model.row_weights)
        idx = np.repeat(np.arange(model.n), counts)
        return JointModel(y=model.y[idx], x=model.x[idx], n_fitted=n)
    raise IncompatibleModelChart("nonparametric resampling needs an empirical model")


def resample_model(model: InControlModel, scheme: str, n: int, rng) -> InControlModel:
    """One bootstrap replicate of the model, refit in the same family.

    A degenerate refit (zero variance) is retried once on the same
    stream before the error surfaces.
    """
    if n is None or n < 1:
        raise InputError("resampling needs the phase-1 sample size n")
    try:
        return _resample_once(model, scheme, n, rng)
    except DegenerateResample:
        return _resample_once(model, scheme, n, rng)


def _family_for(chart, scheme: str) -> str:
    kind = getattr(chart, "param_kind", None)
    if scheme == "nonparametric":
        if kind in ("regression-ls", "regression-logit"):
            return "empirical-joint"
        return "empirical"
    if kind == "mean-sd":
        return "normal"
    if kind == "rate":
        return "exponential"
    raise InputError("regression charts support only the nonparametric scheme")


def _base_key(measure: PerfMeasure):
    return (measure.kind, measure.c, measure.T, measure.gamma, measure.beta)


def _evaluate_updates(updates, measure: PerfMeasure, markov: MarkovConfig):
    """Raw base-measure values for a list of update laws (NaN = failed)."""
    values = np.full(len(updates), np.nan)
    live = [i for i, u in enumerate(updates) if u is not None]
    if not live:
        return values
    batch = _perf._batch_from_updates([updates[i] for i in live])
    N = markov.grid_points
    if measure.kind == "arl":
        out = _perf._batch_arl(batch, np.full(len(live), measure.c), N)
        out = np.where(np.isfinite(out), out, np.nan)
    elif measure.kind == "hit":
        out = _perf._batch_hit(batch, np.full(len(live), measure.c), N, measure.T)
    else:
        out, ok = _perf._batch_invert(batch, measure, markov)
        out = np.where(ok, out, np.nan)
    values[live] = out
    return values


def _pivot_values_multi(chart, model, measures, cfg: BootstrapConfig, markov=None):
    """Pivot vectors for several measures from one shared resampling pass.

    Returns ``(pivots, failures, reasons)`` where ``pivots`` maps each
    measure to a length-B array (NaN marks a failed replicate) and
    ``failures``/``reasons`` aggregate per-replicate problems common to
    all measures.  Transform-domain failures are measure-specific and
    appear as NaN in that measure's vector only.
    """
    markov = markov or MarkovConfig()
    n = model.n_fitted
    if n is None:
        raise InputError("the model must be fitted from a sample (n unknown)")

    upd_star: list = [None] * cfg.B
    upd_orig: list = [None] * cfg.B
    reasons: dict = {}

    for b in range(cfg.B):
        rng = substream(cfg.master_seed, b)
        try:
            model_b = resample_model(model, cfg.scheme, n, rng)
            params_b = extract_params(model_b, chart)
            upd_star[b] = update_distribution(chart, model_b, params_b)
            upd_orig[b] = update_distribution(chart, model, params_b)
        except (DegenerateResample, DegenerateSample) as exc:
            reasons[type(exc).__name__] = reasons.get(type(exc).__name__, 0) + 1

    base_keys = {}
    for m in measures:
        base_keys.setdefault(_base_key(m), PerfMeasure(
            kind=m.kind, c=m.c, T=m.T, gamma=m.gamma, beta=m.beta
        ))

    chunks = np.array_split(np.arange(cfg.B), min(cfg.workers, cfg.B))
    raw_star: dict = {}
    raw_orig: dict = {}
    for key, base in base_keys.items():
        v1 = np.concatenate(
            [_evaluate_updates([upd_star[i] for i in ch], base, markov) for ch in chunks if ch.size]
        )
        v2 = np.concatenate(
            [_evaluate_updates([upd_orig[i] for i in ch], base, markov) for ch in chunks if ch.size]
        )
        raw_star[key] = v1
        raw_orig[key] = v2

    pivots = {}
    for m in measures:
        v1 = raw_star[_base_key(m)]
        v2 = raw_orig[_base_key(m)]
        out = np.full(cfg.B, np.nan)
        for b in range(cfg.B):
            if np.isnan(v1[b]) or np.isnan(v2[b]):
                continue
            try:
                out[b] = m.apply_transform(v1[b]) - m.apply_transform(v2[b])
            except TransformDomain:
                pass
        pivots[m] = out

    failures = int(sum(reasons.values()))
    return pivots, failures, reasons


def pivot_sample(
    chart, model, measure: PerfMeasure, cfg: BootstrapConfig, markov=None
) -> PivotSample:
    """Bootstrap pivot sample for one measure (Algorithm steps 2-3)."""
    pivots, _, reasons = _pivot_values_multi(chart, model, [measure], cfg, markov)
    raw = pivots[measure]
    ok = ~np.isnan(raw)
    failures = int(cfg.B - ok.sum())
    if failures > _MAX_FAILURE_FRACTION * cfg.B:
        raise TooManyFailures(
            f"{failures}/{cfg.B} bootstrap replicates failed ({reasons})"
        )
    return PivotSample(values=raw[ok], failures=failures, reasons=reasons)


def quantile_pivot(pivot: PivotSample, alpha: float, direction: str) -> float:
    """Direction-aware empirical quantile of the pivot values.

    Upper bounds on q use the ``alpha`` quantile (the fraction of
    pivots strictly above it is about ``1 - alpha``); lower bounds use
    the ``1 - alpha`` quantile.  The empirical quantile is the
    ``ceil(level * B)``-th order statistic.
    """
    values = np.sort(pivot.values)
    if values.size == 0:
        raise InputError("empty pivot sample")
    level = alpha if direction == DIRECTION_UPPER else 1.0 - alpha
    k = int(np.ceil(level * values.size))
    k = min(max(k, 1), values.size)
    return float(values[k - 1])


def _pivot_summary(values: np.ndarray) -> dict:
    if values.size == 0:
        return {}
    s = np.sort(values)

    def order_stat(level):
        k = min(max(int(np.ceil(level * s.size)), 1), s.size)
        return float(s[k - 1])

    return {
        "min": float(s[0]),
        "q25": order_stat(0.25),
        "median": order_stat(0.5),
        "q75": order_stat(0.75),
        "max": float(s[-1]),
    }


def adjust(
    chart, model, measure: PerfMeasure, cfg: BootstrapConfig, markov=None
) -> AdjustmentResult:
    """One-sided bound / adjusted threshold for the measure.

    Computes the plug-in value on the transform scale, subtracts the
    direction-aware pivot quantile, and back-transforms.  For threshold
    measures with an upper-bound direction the result is the adjusted
    threshold to run the chart with.
    """
    direction = measure.direction
    if cfg.direction is not None and cfg.direction != direction:
        raise InputError(
            f"direction {cfg.direction!r} is incoherent with measure {measure.kind!r}"
        )
    markov = markov or MarkovConfig()
    params = extract_params(model, chart)
    q_hat = eval_measure(chart, model, params, measure, markov=markov)
    pivot = pivot_sample(chart, model, measure, cfg, markov)
    p_star = quantile_pivot(pivot, cfg.alpha, direction)
    bound = measure.invert_transform(q_hat - p_star)
    return AdjustmentResult(
        q_hat=q_hat,
        p_star=p_star,
        bound=bound,
        direction=direction,
        alpha=cfg.alpha,
        B=cfg.B,
        pivot_summary=_pivot_summary(pivot.values),
    )


def _covered(truth: float, bound: float, direction: str) -> bool:
    if direction == DIRECTION_UPPER:
        return truth <= bound
    return truth >= bound


def coverage_check(
    true_source,
    chart,
    measure: PerfMeasure,
    n: int,
    cfg: BootstrapConfig,
    replications: int,
    seed: int,
    markov=None,
) -> float:
    """Fraction of replications whose one-sided interval covers the truth.

    Each replication draws a fresh phase-1 sample from the true source,
    fits the scheme's model, runs the adjustment, and checks whether
    the conditional truth ``q(P; xi_hat_r)`` (true law, estimated
    parameter) falls inside the interval.
    """
    if replications < 100:
        raise InputError("coverage_check needs at least 100 replications")
    markov = markov or MarkovConfig()
    family = _family_for(chart, cfg.scheme)
    direction = measure.direction
    hits = 0
    for r in range(replications):
        rng = substream(seed, r, 0)
        if isinstance(true_source, InControlModel):
            data = sample_from(true_source, n, rng)
        else:
            data = true_source.sample_phase1(n, rng)
        model_r = fit_model(family, data)
        params_r = extract_params(model_r, chart)
        cfg_r = BootstrapConfig(
            B=cfg.B,
            alpha=cfg.alpha,
            scheme=cfg.scheme,
            master_seed=derive_seed(seed, r, 1),
            direction=cfg.direction,
            workers=cfg.workers,
        )
        result = adjust(chart, model_r, measure, cfg_r, markov)
        if isinstance(true_source, InControlModel):
            truth = eval_measure(chart, true_source, params_r, measure, markov=markov)
        else:
            truth = true_source.truth_measure(chart, params_r, measure, markov)
        if _covered(truth, result.bound, direction):
            hits += 1
    return hits / replications
