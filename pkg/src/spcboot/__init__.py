"""Control-chart performance under estimated in-control distributions.

The package computes run-length performance measures (average run
length, false-alarm probability, and the thresholds attaining targets
for either) for Shewhart and CUSUM charts, and calibrates thresholds
from phase-1 data with a bootstrap adjustment that guarantees, with
prescribed probability, the conditional in-control performance given
the estimated model.
"""

__version__ = "0.1.0"

from .bootstrap import (
    AdjustmentResult,
    BootstrapConfig,
    PivotSample,
    adjust,
    coverage_check,
    pivot_sample,
    quantile_pivot,
    resample_model,
)
from .charts import (
    ChartPath,
    CusumExponentialLLR,
    CusumLinReg,
    CusumLogisticLLR,
    CusumMeanShift,
    CustomUpdate,
    DiscreteAtoms,
    ExpAffineUpdate,
    NormalUpdate,
    ShewhartStandardized,
    run_chart,
    update_distribution,
)
from .models import (
    EmpiricalModel,
    ExponentialModel,
    JointModel,
    MeanSd,
    NormalModel,
    Rate,
    RegressionCoeffs,
    Sample,
    extract_params,
    fit_model,
    model_cdf,
    model_survival,
    sample_from,
)
from .perf import (
    MarkovConfig,
    McConfig,
    PerfMeasure,
    arl_markov,
    eval_measure,
    hit_markov,
    invert_threshold,
    markov_transition,
    shewhart_exceedance,
    shewhart_measures,
)
from .regression import (
    JointSample,
    RegressionFit,
    fit_linear,
    fit_logistic,
    joint_update_distribution,
    linreg_increment,
    logistic_llr_increment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
