"""Command-line front end: calibrate, evaluate, monitor, experiment.

All file formats live here.  Scalar data files are CSV with one value
per line (optional header ``x``); regression data carry a header
``y,x1,...,xd`` and the intercept column is added internally.  Config
files hold ``key=value`` lines; command-line flags win on conflict and
unknown keys are rejected.  Reports render floats with 17 significant
digits and contain no timestamps, so identical invocations produce
byte-identical output.

Exit codes: 0 success, 2 input/validation error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import BootstrapConfig, adjust
from .charts import (
    ChartSpec,
    CusumExponentialLLR,
    CusumLinReg,
    CusumLogisticLLR,
    CusumMeanShift,
    ShewhartStandardized,
)
from .errors import DegenerateSample, InputError, NumericalError, SpcError
from .harness import (
    ExperimentSpec,
    run_conditional_arl_experiment,
    run_coverage_experiment,
    run_misspecification_experiment,
)
from .models import (
    MeanSd,
    Rate,
    RegressionCoeffs,
    Sample,
    extract_params,
    fit_model,
)
from .perf import MarkovConfig, PerfMeasure, eval_measure
from .regression import JointSample

_FLOAT_FMT = "%.17g"

_CONFIG_KEYS = {
    "chart", "delta", "scaled", "two_sided", "target", "gamma", "T", "beta",
    "transform", "alpha", "B", "scheme", "seed", "grid", "workers", "n", "R",
    "generator", "out", "threshold", "measure", "c",
}

_CHART_NAMES = {
    "shewhart": "shewhart",
    "cusum-mean-shift": "cusum-mean-shift",
    "cusum-exp-llr": "cusum-exp-llr",
    "cusum-linreg": "cusum-linreg",
    "cusum-logistic": "cusum-logistic",
}


def _fmt(x) -> str:
    if isinstance(x, float):
        return _FLOAT_FMT % x
    return str(x)


def _parse_bool(value: str) -> bool:
    v = str(value).strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise InputError(f"expected a boolean, got {value!r}")


def load_config(path: str) -> dict:
    """Parse a key=value config file; '#' starts a comment line."""
    settings = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise InputError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise InputError(f"{path}:{lineno}: unknown config key {key!r}")
        settings[key] = value.strip()
    return settings


def _merged_settings(args, defaults: dict) -> dict:
    """Defaults < config file < explicit flags."""
    settings = dict(defaults)
    if getattr(args, "config", None):
        settings.update(load_config(args.config))
    for key in _CONFIG_KEYS:
        attr = key if key != "continue" else "continue_"
        val = getattr(args, attr, None)
        if val is not None:
            settings[key] = val
    return settings


def _build_chart(settings) -> ChartSpec:
    name = str(settings.get("chart", "cusum-mean-shift"))
    if name not in _CHART_NAMES:
        raise InputError(f"unknown chart {name!r}; choose from {sorted(_CHART_NAMES)}")
    delta = float(settings.get("delta", 1.0))
    if name == "shewhart":
        return ShewhartStandardized(two_sided=_parse_bool(str(settings.get("two_sided", "false"))))
    if name == "cusum-mean-shift":
        return CusumMeanShift(delta=delta, scaled=_parse_bool(str(settings.get("scaled", "true"))))
    if name == "cusum-exp-llr":
        return CusumExponentialLLR(delta=delta)
    if name == "cusum-linreg":
        return CusumLinReg(delta=delta)
    return CusumLogisticLLR(delta=delta)


def _build_measure(settings) -> PerfMeasure:
    target = str(settings.get("target", "arl"))
    transform = str(settings.get("transform", "log"))
    if target == "arl":
        return PerfMeasure.c_arl(float(settings.get("gamma", 100.0)), transform=transform)
    if target == "hit":
        return PerfMeasure.c_hit(
            int(settings.get("T", 100)),
            float(settings.get("beta", 0.05)),
            transform=transform,
        )
    raise InputError(f"unknown calibration target {target!r} (use arl or hit)")


def _read_scalar_data(path: str) -> np.ndarray:
    lines = _read_lines(path)
    values = []
    start = 0
    if lines and lines[0].strip().lower() == "x":
        start = 1
    for lineno, line in enumerate(lines[start:], start=start + 1):
        s = line.strip()
        if not s:
            continue
        try:
            values.append(float(s))
        except ValueError:
            raise InputError(f"{path}:{lineno}: not a number: {s!r}")
    if not values:
        raise InputError(f"{path}: no data")
    return np.asarray(values)


def _read_lines(path: str):
    if path == "-":
        return sys.stdin.read().splitlines()
    return Path(path).read_text().splitlines()


def _read_regression_data(path: str):
    lines = _read_lines(path)
    if not lines or not lines[0].lower().startswith("y"):
        raise InputError(f"{path}: regression data needs a 'y,x1,...,xd' header")
    header = [h.strip() for h in lines[0].split(",")]
    d = len(header) - 1
    ys, xs = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        s = line.strip()
        if not s:
            continue
        parts = s.split(",")
        if len(parts) != d + 1:
            raise InputError(
                f"{path}:{lineno}: expected {d + 1} fields, got {len(parts)}"
            )
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise InputError(f"{path}:{lineno}: not numeric: {s!r}")
        ys.append(row[0])
        xs.append(row[1:])
    if not ys:
        raise InputError(f"{path}: no data rows")
    return JointSample.with_intercept(np.asarray(ys), np.asarray(xs))


def _is_regression(chart) -> bool:
    return isinstance(chart, (CusumLinReg, CusumLogisticLLR))


def _header_lines(command: str, settings: dict) -> list:
    resolved = " ".join(f"{k}={settings[k]}" for k in sorted(settings))
    return [
        f"# spcboot {__version__}",
        f"# command: {command}",
        f"# config: {resolved}",
        f"# seed: {settings.get('seed', 0)}",
    ]


def _write_report(out_dir: Path, stem: str, command: str, settings: dict,
                  text_lines: list, kv_pairs: list):
    out_dir.mkdir(parents=True, exist_ok=True)
    header = _header_lines(command, settings)
    (out_dir / f"{stem}.txt").write_text(
        "\n".join(header + [""] + text_lines) + "\n"
    )
    kv_lines = header + [f"{k} = {_fmt(v)}" for k, v in kv_pairs]
    (out_dir / f"{stem}.kv").write_text("\n".join(kv_lines) + "\n")


def _param_pairs(params) -> list:
    if isinstance(params, MeanSd):
        return [("param_mu", params.mu), ("param_sigma", params.sigma)]
    if isinstance(params, Rate):
        return [("param_rate", params.rate)]
    if isinstance(params, RegressionCoeffs):
        return [(f"param_beta_{i}", float(b)) for i, b in enumerate(params.beta)]
    return []


def _common_cfg(settings) -> dict:
    return {
        "seed": int(settings.get("seed", 0)),
        "alpha": float(settings.get("alpha", 0.1)),
        "B": int(settings.get("B", 1000)),
        "grid": int(settings.get("grid", 75)),
        "workers": int(settings.get("workers", 1)),
        "scheme": str(settings.get("scheme", "parametric")),
    }


def cmd_calibrate(args) -> int:
    settings = _merged_settings(args, {"chart": "cusum-mean-shift"})
    chart = _build_chart(settings)
    measure = _build_measure(settings)
    common = _common_cfg(settings)

    if _is_regression(chart):
        data = _read_regression_data(args.data)
        n = data.n
        if common["scheme"] != "nonparametric":
            raise InputError("regression charts calibrate with scheme=nonparametric")
        family = "empirical-joint"
    else:
        values = _read_scalar_data(args.data)
        n = values.size
        if float(np.std(values)) == 0.0:
            # report degeneracy before the size check: it is the more
            # informative failure for a broken data file
            raise DegenerateSample("data file has zero variance")
        if n < 10:
            raise InputError(f"calibration needs n >= 10 observations, got {n}")
        data = Sample(values)
        family = {
            "parametric": "normal" if not isinstance(chart, CusumExponentialLLR) else "exponential",
            "nonparametric": "empirical",
        }[common["scheme"]]

    model = fit_model(family, data)
    params = extract_params(model, chart)
    cfg = BootstrapConfig(
        B=common["B"],
        alpha=common["alpha"],
        scheme=common["scheme"],
        master_seed=common["seed"],
        workers=common["workers"],
    )
    markov = MarkovConfig(grid_points=common["grid"])
    result = adjust(chart, model, measure, cfg, markov)
    unadjusted = measure.invert_transform(result.q_hat)

    settings_out = {**settings, **{k: str(v) for k, v in common.items()}}
    text = [
        f"chart: {settings.get('chart')}  delta={settings.get('delta', 1.0)}",
        f"phase-1 observations: {n}",
        f"scheme: {common['scheme']}   B={common['B']}   alpha={common['alpha']}",
        f"unadjusted threshold: {_fmt(unadjusted)}",
        f"adjusted threshold:   {_fmt(result.bound)}",
        f"pivot quantile (p*):  {_fmt(result.p_star)}",
        "pivot summary: "
        + "  ".join(f"{k}={_fmt(v)}" for k, v in result.pivot_summary.items()),
    ]
    kv = [
        ("command", "calibrate"),
        ("chart", settings.get("chart", "cusum-mean-shift")),
        ("delta", float(settings.get("delta", 1.0))),
        ("scaled", str(settings.get("scaled", "true"))),
        ("two_sided", str(settings.get("two_sided", "false"))),
        ("target", str(settings.get("target", "arl"))),
        ("gamma", float(settings.get("gamma", 100.0))),
        ("T", int(settings.get("T", 100))),
        ("beta", float(settings.get("beta", 0.05))),
        ("transform", measure.transform),
        ("n", n),
        ("alpha", common["alpha"]),
        ("B", common["B"]),
        ("scheme", common["scheme"]),
        ("seed", common["seed"]),
        ("grid", common["grid"]),
        *_param_pairs(params),
        ("q_hat_transformed", result.q_hat),
        ("p_star", result.p_star),
        ("threshold_unadjusted", unadjusted),
        ("threshold_adjusted", result.bound),
        *[(f"pivot_{k}", v) for k, v in result.pivot_summary.items()],
    ]
    _write_report(Path(args.out), "calibration", "calibrate", settings_out, text, kv)
    print(f"adjusted threshold: {_fmt(result.bound)} (unadjusted {_fmt(unadjusted)})")
    return 0


def cmd_evaluate(args) -> int:
    settings = _merged_settings(args, {"chart": "cusum-mean-shift"})
    chart = _build_chart(settings)
    common = _common_cfg(settings)
    kind = str(settings.get("measure", "arl"))
    transform = str(settings.get("transform", "identity"))
    if kind in ("arl", "hit"):
        c = settings.get("threshold", settings.get("c"))
        if c is None:
            raise InputError("evaluate needs threshold=... for arl/hit measures")
        measure = (
            PerfMeasure.arl(float(c), transform=transform)
            if kind == "arl"
            else PerfMeasure.hit(float(c), int(settings.get("T", 100)), transform=transform)
        )
    elif kind == "c_arl":
        measure = PerfMeasure.c_arl(float(settings.get("gamma", 100.0)), transform=transform)
    elif kind == "c_hit":
        measure = PerfMeasure.c_hit(
            int(settings.get("T", 100)), float(settings.get("beta", 0.05)), transform=transform
        )
    else:
        raise InputError(f"unknown measure {kind!r}")

    if _is_regression(chart):
        data = _read_regression_data(args.data)
        family = "empirical-joint"
        n = data.n
    else:
        values = _read_scalar_data(args.data)
        data = Sample(values)
        n = values.size
        family = {
            "parametric": "normal" if not isinstance(chart, CusumExponentialLLR) else "exponential",
            "nonparametric": "empirical",
        }[common["scheme"]]
    model = fit_model(family, data)
    params = extract_params(model, chart)
    markov = MarkovConfig(grid_points=common["grid"])
    value = eval_measure(chart, model, params, measure, markov=markov)
    natural = measure.invert_transform(value)

    settings_out = {**settings, **{k: str(v) for k, v in common.items()}}
    kv = [
        ("command", "evaluate"),
        ("measure", kind),
        ("transform", transform),
        ("n", n),
        *_param_pairs(params),
        ("value_transformed", value),
        ("value", natural),
    ]
    _write_report(
        Path(args.out), "evaluation", "evaluate", settings_out,
        [f"measure {kind} ({transform}): {_fmt(value)}", f"natural scale: {_fmt(natural)}"],
        kv,
    )
    print(f"{kind} = {_fmt(natural)}")
    return 0


def _load_calibration(path: str) -> dict:
    kv = {}
    for line in Path(path).read_text().splitlines():
        s = line.strip()
        if not s or s.startswith("#") or "=" not in s:
            continue
        key, _, value = s.partition("=")
        kv[key.strip()] = value.strip()
    if "threshold_adjusted" not in kv:
        raise InputError(f"{path}: not a calibration report (no threshold_adjusted)")
    return kv


def _params_from_kv(kv: dict):
    if "param_mu" in kv:
        return MeanSd(float(kv["param_mu"]), float(kv["param_sigma"]))
    if "param_rate" in kv:
        return Rate(float(kv["param_rate"]))
    betas = sorted(
        (int(k.rsplit("_", 1)[1]), float(v))
        for k, v in kv.items()
        if k.startswith("param_beta_")
    )
    if betas:
        return RegressionCoeffs(np.array([b for _, b in betas]))
    raise InputError("calibration report carries no chart parameters")


def cmd_monitor(args) -> int:
    if args.calibration:
        kv = _load_calibration(args.calibration)
        threshold = float(kv["threshold_adjusted"])
        chart = _build_chart(kv)
        params = _params_from_kv(kv)
    else:
        settings = _merged_settings(args, {})
        if "threshold" not in settings:
            raise InputError("monitor needs --calibration or an explicit threshold")
        threshold = float(settings["threshold"])
        chart = _build_chart(settings)
        if isinstance(chart, CusumExponentialLLR):
            if args.param_rate is None:
                raise InputError("exponential chart monitoring needs --param-rate")
            params = Rate(args.param_rate)
        elif _is_regression(chart):
            raise InputError("regression monitoring needs --calibration")
        else:
            params = MeanSd(
                args.param_mu if args.param_mu is not None else 0.0,
                args.param_sigma if args.param_sigma is not None else 1.0,
            )

    lines = _read_lines(args.data)
    out = sys.stdout
    out.write("t,statistic,alarmed\n")
    state = 0.0
    t = 0
    start = 0
    if _is_regression(chart):
        if not lines or not lines[0].lower().startswith("y"):
            raise InputError("regression stream needs a 'y,x1,...,xd' header")
        d = len(lines[0].split(",")) - 1
        if d + 1 != params.beta.size:
            raise InputError(
                f"stream has {d} covariates but the chart expects {params.beta.size - 1}"
            )
        start = 1
    for lineno, line in enumerate(lines[start:], start=start + 1):
        s = line.strip()
        if not s:
            continue
        t += 1
        if _is_regression(chart):
            parts = s.split(",")
            if len(parts) != params.beta.size:
                raise InputError(
                    f"line {lineno}: expected {params.beta.size} fields, got {len(parts)}"
                )
            try:
                row = np.array([float(p) for p in parts])
            except ValueError:
                raise InputError(f"line {lineno}: not numeric: {s!r}")
            obs = np.concatenate(([row[0], 1.0], row[1:]))[None, :]
        else:
            try:
                obs = np.array([float(s)])
            except ValueError:
                raise InputError(f"line {lineno}: not a number: {s!r}")
        if isinstance(chart, ShewhartStandardized):
            stat = float(obs[0] - params.mu) / params.sigma
            if chart.two_sided:
                stat = abs(stat)
            hit = stat > threshold
        else:
            state = max(0.0, state + _single_increment(chart, params, obs))
            stat = state
            hit = state >= threshold
        out.write(f"{t},{_fmt(stat)},{1 if hit else 0}\n")
        if hit and not args.continue_:
            break
    return 0


def _single_increment(chart, params, obs) -> float:
    from .charts import _increments

    return float(_increments(chart, params, obs)[0])


def _write_csv(path: Path, command: str, settings: dict, header_cols: list, rows: list):
    lines = _header_lines(command, settings)
    lines.append(",".join(header_cols))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def cmd_experiment(args) -> int:
    settings = _merged_settings(args, {})
    common = _common_cfg(settings)
    spec = ExperimentSpec(
        generator=str(settings.get("generator", "normal")),
        chart=_build_chart(settings),
        n=int(settings.get("n", 50)),
        R=int(settings.get("R", 500)),
        B=int(settings.get("B", 500)),
        alpha=common["alpha"],
        scheme=common["scheme"],
        seed=common["seed"],
        grid=common["grid"],
        workers=common["workers"],
        gamma=float(settings.get("gamma", 100.0)),
        c=float(settings.get("c", 3.0)),
        T=int(settings.get("T", 100)),
        beta=float(settings.get("beta", 0.05)),
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    settings_out = {**settings, **{k: str(v) for k, v in common.items()}}
    name = args.name

    if name == "coverage":
        result = run_coverage_experiment(spec)
        rep_rows = []
        for row in result.rows:
            cov = result.replicates["covered"][row.measure]
            bnd = result.replicates["bound"][row.measure]
            tru = result.replicates["truth"][row.measure]
            for r in range(spec.R):
                rep_rows.append(
                    (r, row.measure, tru[r], bnd[r], int(cov[r]))
                )
        _write_csv(
            out_dir / "coverage_replicates.csv", "experiment coverage", settings_out,
            ["replication", "measure", "truth", "bound", "covered"], rep_rows,
        )
        _write_csv(
            out_dir / "coverage_summary.csv", "experiment coverage", settings_out,
            ["measure", "coverage", "failed_replicates"],
            [(row.measure, row.coverage, row.failures) for row in result.rows],
        )
        for row in result.rows:
            print(f"{row.measure:12s} coverage {row.coverage:.3f}")
        return 0

    if name == "conditional-arl":
        result = run_conditional_arl_experiment(spec)
        rep_rows = [
            (
                r,
                result.c_unadjusted[r],
                result.c_adjusted[r],
                result.arl_in_unadjusted[r],
                result.arl_in_adjusted[r],
                result.arl_out_unadjusted[r],
                result.arl_out_adjusted[r],
            )
            for r in range(spec.R)
        ]
        _write_csv(
            out_dir / "conditional_arl_replicates.csv", "experiment conditional-arl",
            settings_out,
            [
                "replication", "c_unadjusted", "c_adjusted",
                "arl_in_unadjusted", "arl_in_adjusted",
                "arl_out_unadjusted", "arl_out_adjusted",
            ],
            rep_rows,
        )
        summaries = result.summaries()
        sum_rows = []
        for i, level in enumerate(summaries[("unadjusted", "in")].levels):
            sum_rows.append(
                (
                    f"q{100 * level:g}%",
                    summaries[("unadjusted", "in")].values[i],
                    summaries[("adjusted", "in")].values[i],
                    summaries[("unadjusted", "out")].values[i],
                    summaries[("adjusted", "out")].values[i],
                )
            )
        sum_rows.append(
            (
                "mean",
                summaries[("unadjusted", "in")].mean,
                summaries[("adjusted", "in")].mean,
                summaries[("unadjusted", "out")].mean,
                summaries[("adjusted", "out")].mean,
            )
        )
        sum_rows.append(
            ("guarantee_fraction", "", result.guarantee_fraction, "", "")
        )
        _write_csv(
            out_dir / "conditional_arl_summary.csv", "experiment conditional-arl",
            settings_out,
            ["probe", "unadjusted_in", "adjusted_in", "unadjusted_out", "adjusted_out"],
            sum_rows,
        )
        print(f"guarantee fraction (ARL >= {spec.gamma:g}): {result.guarantee_fraction:.3f}")
        return 0

    if name == "misspecification":
        cells = run_misspecification_experiment(spec)
        rep_rows = []
        sum_rows = []
        for cell in cells:
            res = cell.result
            for r in range(res.spec.R):
                rep_rows.append(
                    (
                        cell.generator, cell.scheme, r,
                        res.c_adjusted[r], res.arl_in_adjusted[r], res.arl_out_adjusted[r],
                    )
                )
            qs = res.summaries()[("adjusted", "in")]
            sum_rows.append(
                (cell.generator, cell.scheme, cell.guarantee_fraction,
                 *[qs.values[i] for i in range(len(qs.levels))], qs.mean)
            )
        _write_csv(
            out_dir / "misspecification_replicates.csv", "experiment misspecification",
            settings_out,
            ["generator", "scheme", "replication", "c_adjusted", "arl_in", "arl_out"],
            rep_rows,
        )
        _write_csv(
            out_dir / "misspecification_summary.csv", "experiment misspecification",
            settings_out,
            ["generator", "scheme", "guarantee_fraction",
             "q2.5%", "q10%", "q25%", "q50%", "q75%", "q90%", "q97.5%", "mean"],
            sum_rows,
        )
        for cell in cells:
            print(
                f"{cell.generator:18s} {cell.scheme:14s} guarantee "
                f"{cell.guarantee_fraction:.3f}"
            )
        return 0

    raise InputError(f"unknown experiment {name!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spcboot",
        description="Control-chart calibration with guaranteed conditional performance",
    )
    parser.add_argument("--version", action="version", version=f"spcboot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, help="master seed (64-bit)")
        p.add_argument("--workers", type=int, help="worker count (results invariant)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--scheme", choices=["parametric", "nonparametric"])
        p.add_argument("--alpha", type=float)
        p.add_argument("--B", type=int, dest="B")
        p.add_argument("--grid", type=int, help="Markov grid points (default 75)")
        p.add_argument("--chart", choices=sorted(_CHART_NAMES))
        p.add_argument("--delta", type=float)
        p.add_argument("--scaled", choices=["true", "false"])
        p.add_argument("--two-sided", dest="two_sided", choices=["true", "false"])

    cal = sub.add_parser("calibrate", help="bootstrap-adjusted threshold from phase-1 data")
    common(cal)
    cal.add_argument("data", help="phase-1 data file (CSV)")
    cal.add_argument("--target", choices=["arl", "hit"])
    cal.add_argument("--gamma", type=float)
    cal.add_argument("--T", type=int, dest="T")
    cal.add_argument("--beta", type=float)
    cal.add_argument("--transform", choices=["log", "identity", "logit"])
    cal.set_defaults(func=cmd_calibrate)

    ev = sub.add_parser("evaluate", help="plug-in performance measure from phase-1 data")
    common(ev)
    ev.add_argument("data", help="phase-1 data file (CSV)")
    ev.add_argument("--measure", choices=["arl", "hit", "c_arl", "c_hit"])
    ev.add_argument("--threshold", type=float)
    ev.add_argument("--gamma", type=float)
    ev.add_argument("--T", type=int, dest="T")
    ev.add_argument("--beta", type=float)
    ev.add_argument("--transform", choices=["log", "identity", "logit"])
    ev.set_defaults(func=cmd_evaluate)

    mon = sub.add_parser("monitor", help="run a chart over a phase-2 stream")
    common(mon)
    mon.add_argument("data", nargs="?", default="-", help="phase-2 data file or - for stdin")
    mon.add_argument("--calibration", help="calibration .kv report to read parameters from")
    mon.add_argument("--threshold", type=float, dest="threshold")
    mon.add_argument("--param-mu", type=float, dest="param_mu")
    mon.add_argument("--param-sigma", type=float, dest="param_sigma")
    mon.add_argument("--param-rate", type=float, dest="param_rate")
    mon.add_argument("--continue", dest="continue_", action="store_true",
                     help="keep monitoring after an alarm")
    mon.set_defaults(func=cmd_monitor)

    exp = sub.add_parser("experiment", help="run a named simulation experiment")
    common(exp)
    exp.add_argument("name", choices=["coverage", "conditional-arl", "misspecification"])
    exp.add_argument("--n", type=int, dest="n")
    exp.add_argument("--R", type=int, dest="R")
    exp.add_argument("--generator",
                     choices=["normal", "exponential", "chi-square-scaled",
                              "linear-model", "logistic-model"])
    exp.add_argument("--gamma", type=float)
    exp.add_argument("--T", type=int, dest="T")
    exp.add_argument("--beta", type=float)
    exp.add_argument("--c", type=float, dest="c")
    exp.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error (input) {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error (numerical) {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except SpcError as exc:
        print(f"error {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error (io): {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
