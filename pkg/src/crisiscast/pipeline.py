"""End-to-end orchestration: data acquisition, transform, order search,
fitting, forecasting, peak scanning, regime analysis, backtesting and
report emission.

A run builds its whole artifact bundle in memory and returns it; nothing is
written until every stage has succeeded. Errors keep their class and gain a
stage prefix so callers can tell which step failed.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autoorder import SearchSpace, select_order
from .errors import BadParameter, CrisiscastError, ParseError, PlanTooLarge
from .evaluation import BacktestPlan, backtest, parse_method
from .io_csv import IngestConfig, ingest
from .keywords import fit_lda, keyword_report, load_corpus, load_embeddings, load_seed_tags
from .msar import fit_msar, regime_report, to_growth
from .peaks import PeakConfig, scan_peaks
from .report import (
    emit_summary,
    render_backtest_csv,
    render_forecast_csv,
    render_keywords_csv,
    render_leaderboard_csv,
    render_order_leaderboard_csv,
    render_peaks_csv,
    render_plot_csv,
    render_regime_spans_csv,
    render_regimes_csv,
    render_summary_csv,
)
from .sarimax import fit as fit_sarimax
from .sarimax import fitted_values
from .sarimax import forecast as forecast_sarimax
from .sarimax import quantile
from .series import (
    WEEK,
    FlagSeries,
    ScenarioConfig,
    WeeklySeries,
    build_covid_flag,
    build_peak_flag,
    log_transform,
    parse_iso_week,
)
from .synthetic import SyntheticParams, generate_synthetic
from .varx import MultiSeries

VARIANTS = ("with_covid", "without_covid")


def _default_search() -> SearchSpace:
    # weekly retail defaults: seasonal difference at 52 handles the annual
    # profile, so the stepwise search only ranges over short ARMA terms
    return SearchSpace(
        max_p=2, max_q=2, max_P=0, max_Q=0, d_set=(0, 1), D_set=(1,), s=52, mode="stepwise"
    )


def _default_baselines() -> tuple[str, ...]:
    return (
        "naive",
        "seasonal_naive",
        "moving_average(2)",
        "moving_average(3)",
        "moving_average(4)",
        "moving_average(7)",
        "ses(0.3)",
        "trailing_yoy",
    )


@dataclass(frozen=True)
class KeywordsConfig:
    corpus_path: str
    baseline_path: str | None = None
    seeds_path: str | None = None
    embeddings_path: str | None = None
    n_topics: int = 8
    alpha: float | None = None
    beta: float = 0.01
    iterations: int = 200
    lda_seed: int = 7
    lambda_: float = 0.6
    min_count: int = 5
    m_neighbors: int = 10
    top_n: int | None = None


@dataclass(frozen=True)
class PipelineConfig:
    input_path: str | None = None
    ingest: IngestConfig = field(default_factory=IngestConfig)
    years: int = 6
    synthetic: SyntheticParams = field(default_factory=SyntheticParams)
    target_metric: str = "tpv"
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    variants: tuple[str, ...] = ("with_covid",)
    covid_cutoff: str = "2020-W01"
    search: SearchSpace = field(default_factory=_default_search)
    peak: PeakConfig = field(default_factory=PeakConfig)
    msar_ar_order: int = 1
    growth_mode: str = "weekly"
    backtest_plan: BacktestPlan | None = None
    baseline_methods: tuple[str, ...] = field(default_factory=_default_baselines)
    keywords: KeywordsConfig | None = None
    seed: int = 0
    out_dir: str = "runs"

    def __post_init__(self) -> None:
        variants = tuple(self.variants)
        if not variants or len(set(variants)) != len(variants):
            raise BadParameter("variants must be a non-empty list without repeats")
        for variant in variants:
            if variant not in VARIANTS:
                raise BadParameter(f"unknown variant {variant!r}; allowed: {VARIANTS}")
        object.__setattr__(self, "variants", variants)
        object.__setattr__(self, "baseline_methods", tuple(self.baseline_methods))
        if not self.target_metric:
            raise BadParameter("target_metric must be set")
        parse_iso_week(self.covid_cutoff)
        if self.growth_mode not in ("weekly", "yoy"):
            raise BadParameter(f"unknown growth_mode: {self.growth_mode!r}")
        if not isinstance(self.seed, int):
            raise BadParameter("seed must be an integer")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ParseError("config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        kwargs = dict(data)
        _reject_unknown(cls, kwargs)
        _convert(kwargs, "ingest", IngestConfig, tuple_fields=("metrics", "flags"))
        _convert(kwargs, "synthetic", SyntheticParams, tuple_fields=("covid_weeks",))
        _convert(
            kwargs,
            "scenario",
            ScenarioConfig,
            tuple_fields=("covid_positive_weeks", "covid_negative_weeks"),
        )
        _convert(kwargs, "search", SearchSpace, tuple_fields=("d_set", "D_set"))
        _convert(kwargs, "peak", PeakConfig)
        _convert(kwargs, "backtest_plan", BacktestPlan)
        _convert(kwargs, "keywords", KeywordsConfig)
        for name in ("variants", "baseline_methods"):
            if name in kwargs and kwargs[name] is not None:
                kwargs[name] = tuple(kwargs[name])
        return cls(**kwargs)


def _reject_unknown(cls, data: dict) -> None:
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise BadParameter(f"unknown {cls.__name__} keys: {unknown}")


def _convert(kwargs: dict, name: str, cls, tuple_fields: tuple[str, ...] = ()) -> None:
    value = kwargs.get(name)
    if value is None or isinstance(value, cls):
        return
    if not isinstance(value, dict):
        raise BadParameter(f"config key {name!r} must be an object")
    _reject_unknown(cls, value)
    built = dict(value)
    for tf in tuple_fields:
        if tf in built and built[tf] is not None:
            built[tf] = tuple(built[tf])
    kwargs[name] = cls(**built)


@dataclass(frozen=True)
class PipelineResult:
    files: dict[str, str]
    variants: tuple[str, ...]
    selected_orders: dict[str, tuple]


@contextmanager
def _stage(name: str):
    """Prefix any package error with the stage it came from, keeping its class."""
    try:
        yield
    except CrisiscastError as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def _slice_flag(flag: FlagSeries, n: int) -> FlagSeries:
    return FlagSeries(flag.name, flag.start_week, flag.values[:n])


def _derive_plan(n: int) -> BacktestPlan:
    horizon, step, folds = 26, 26, 4
    while folds > 1 and n - ((folds - 1) * step + horizon) < 104:
        folds -= 1
    initial = n - ((folds - 1) * step + horizon)
    if initial < 104:
        raise PlanTooLarge(
            f"series of {n} weeks is too short for the default backtest plan"
        )
    return BacktestPlan(
        initial_train_weeks=initial, step_weeks=step, horizon_weeks=horizon, n_folds=folds
    )


def _truncate(series: WeeklySeries, n: int) -> WeeklySeries:
    return WeeklySeries(series.name, series.start_week, series.values[:n], series.transform)


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    with _stage("ingest" if config.input_path else "generate"):
        if config.input_path:
            ms, ingested_flags = ingest(config.input_path, config.ingest)
        else:
            ms = generate_synthetic(config.years, config.seed, config.synthetic)
            ingested_flags = []
        if config.target_metric not in ms.names:
            raise BadParameter(
                f"target metric {config.target_metric!r} not in data: {list(ms.names)}"
            )

    files: dict[str, str] = {"config.json": config.to_json()}
    selected: dict[str, tuple] = {}
    flat = len(config.variants) == 1
    for variant in config.variants:
        variant_files, order = _run_variant(config, variant, ms, ingested_flags)
        selected[variant] = order
        for name, content in variant_files.items():
            files[name if flat else f"{variant}/{name}"] = content
    return PipelineResult(files=files, variants=config.variants, selected_orders=selected)


def _run_variant(
    config: PipelineConfig,
    variant: str,
    ms: MultiSeries,
    ingested_flags: list[FlagSeries],
) -> tuple[dict[str, str], tuple]:
    files: dict[str, str] = {}
    full_target = ms.get(config.target_metric)
    n_full = len(full_target)
    if variant == "without_covid":
        cutoff = parse_iso_week(config.covid_cutoff)
        n_train = (cutoff - full_target.start_week).days // 7
        if not 0 < n_train <= n_full:
            raise BadParameter(
                f"covid cutoff {config.covid_cutoff} is outside the data span"
            )
    else:
        n_train = n_full
    start = full_target.start_week
    horizon = config.scenario.horizon_weeks
    forecast_start = start + n_train * WEEK

    with _stage("transform"):
        target = _truncate(full_target, n_train)
        log_target = log_transform(target)

    # exogenous flags: calendar/scenario rules build the defaults, matching
    # ingested columns override the history span, futures always come from
    # the rules (extra ingested flags get zero futures)
    ingested = {f.name: f for f in ingested_flags}
    use_covid = variant == "with_covid" and bool(
        config.scenario.covid_positive_weeks or config.scenario.covid_negative_weeks
    )
    fit_flags: list[FlagSeries] = []
    future_flags: list[FlagSeries] = []
    if "peak" in ingested:
        fit_flags.append(_slice_flag(ingested["peak"], n_train))
    else:
        fit_flags.append(build_peak_flag(start, n_train))
    future_flags.append(build_peak_flag(forecast_start, horizon))
    if use_covid:
        if "covid" in ingested:
            fit_flags.append(_slice_flag(ingested["covid"], n_train))
        else:
            fit_flags.append(build_covid_flag(start, n_train, config.scenario))
        future_flags.append(build_covid_flag(forecast_start, horizon, config.scenario))
    for name in sorted(ingested):
        if name in ("peak", "covid"):
            continue
        fit_flags.append(_slice_flag(ingested[name], n_train))
        future_flags.append(
            FlagSeries(name, forecast_start, np.zeros(horizon, dtype=np.int64))
        )

    with _stage("autofit"):
        result = select_order(log_target, fit_flags, config.search)
        best = result.best
        files["order_search.csv"] = render_order_leaderboard_csv(result.leaderboard)

    with _stage("forecast"):
        dist = forecast_sarimax(best, log_target, fit_flags, future_flags, horizon)
        p50 = [quantile(dist, h, 0.5) for h in range(1, horizon + 1)]
        p90 = [quantile(dist, h, 0.9) for h in range(1, horizon + 1)]

    with _stage("peaks"):
        fc_series = WeeklySeries(
            f"{config.target_metric}_p50", forecast_start, np.asarray(p50)
        )
        scan = scan_peaks(fc_series, config.peak)
        files["forecast.csv"] = render_forecast_csv(forecast_start, p50, p90, scan.flags)
        files["peaks.csv"] = render_peaks_csv(fc_series, scan)

    with _stage("regimes"):
        growth = to_growth(target, config.growth_mode)
        regimes = fit_msar(growth, config.msar_ar_order)
        spans = regime_report(regimes)
        files["regimes.csv"] = render_regimes_csv(regimes, growth)
        files["regime_spans.csv"] = render_regime_spans_csv(spans)

    with _stage("backtest"):
        plan = config.backtest_plan or _derive_plan(n_train)
        # no flags in the rolling folds: short windows can leave a calendar
        # flag identically zero after seasonal differencing (the crisis flag
        # additionally predates most folds), which is unfittable by contract
        bt_flags: list[FlagSeries] = []
        specs = [{"kind": "sarimax", "order": best.order.as_tuple(), "log": True}]
        for method in config.baseline_methods:
            if method == "trailing_yoy":
                specs.append({"kind": "trailing_yoy"})
            else:
                name, args = parse_method(method)
                specs.append({"kind": "baseline", "method": name, **args})
        reports = [backtest(target, bt_flags, spec, plan) for spec in specs]
        files["backtest.csv"] = render_backtest_csv(reports)
        files["leaderboard.csv"] = render_leaderboard_csv(reports)

    with _stage("report"):
        histories = {name: _truncate(ms.get(name), n_train) for name in ms.names}
        forecasts: dict[str, list[float]] = {config.target_metric: p50}
        for name in ms.names:
            if name == config.target_metric:
                continue
            other = log_transform(histories[name])
            other_fit = fit_sarimax(other, fit_flags, best.order)
            other_dist = forecast_sarimax(other_fit, other, fit_flags, future_flags, horizon)
            forecasts[name] = [quantile(other_dist, h, 0.5) for h in range(1, horizon + 1)]
        summary = emit_summary(histories, forecasts, target=config.target_metric)
        files["summary.csv"] = render_summary_csv(summary)

        fitted = fitted_values(best, log_target, fit_flags)
        regime_weeks = {
            monday: float(p)
            for monday, p in zip(regimes.weeks(), regimes.covid_probability())
        }

        def _flag_map(name: str) -> dict:
            out: dict = {}
            for f in fit_flags + future_flags:
                if f.name == name:
                    out.update(zip(f.weeks(), (int(v) for v in f.values)))
            return out

        peak_map = _flag_map("peak")
        covid_map = _flag_map("covid")
        files["plot.csv"] = render_plot_csv(
            target, fitted, forecast_start, p50, p90, regime_weeks, peak_map, covid_map
        )

        doc = {
            "variant": variant,
            "target": config.target_metric,
            "order": list(best.order.as_tuple()),
            "aicc": best.aicc,
            "loglik": best.loglik,
            "sigma2": best.sigma2,
            "converged": best.converged,
            "intercept": best.intercept,
            "exog_betas": {
                name: beta for name, beta in zip(best.exog_names, best.exog_betas)
            },
            "n_candidates_evaluated": result.n_evaluated,
            "regimes": {
                "loglik": regimes.loglik,
                "params": [
                    {
                        "intercept": r.intercept,
                        "ar_coeffs": list(r.ar_coeffs),
                        "sigma2": r.sigma2,
                    }
                    for r in regimes.regimes
                ],
                "transition": [
                    [regimes.trans.p00, regimes.trans.p01],
                    [regimes.trans.p10, regimes.trans.p11],
                ],
                "initial_dist": list(regimes.initial_dist),
            },
            "peak_config": dataclasses.asdict(config.peak),
            "sarimax": json.loads(best.to_json()),
        }
        files["model.json"] = json.dumps(doc, indent=2, sort_keys=True)

    if config.keywords is not None:
        with _stage("keywords"):
            files["keywords.csv"] = _run_keywords(config.keywords)

    return files, best.order.as_tuple()


def _run_keywords(kw: KeywordsConfig) -> str:
    corpus = load_corpus(kw.corpus_path)
    baseline = load_corpus(kw.baseline_path) if kw.baseline_path else None
    seeds = load_seed_tags(kw.seeds_path) if kw.seeds_path else None
    embeddings = load_embeddings(kw.embeddings_path) if kw.embeddings_path else None
    model = fit_lda(
        corpus,
        n_topics=kw.n_topics,
        alpha=kw.alpha,
        beta=kw.beta,
        iterations=kw.iterations,
        seed=kw.lda_seed,
    )
    rows = keyword_report(
        model,
        corpus,
        lambda_=kw.lambda_,
        seeds=seeds,
        embeddings=embeddings,
        baseline=baseline,
        min_count=kw.min_count,
        m_neighbors=kw.m_neighbors,
        top_n=kw.top_n,
    )
    return render_keywords_csv(rows)


def write_bundle(
    files: dict[str, str],
    out_dir: str | Path,
    seed: int,
    when: dt.datetime | None = None,
) -> Path:
    """Write a finished bundle under out_dir/run-<timestamp>-seed<seed>/."""
    when = when or dt.datetime.now(dt.timezone.utc)
    stamp = when.strftime("%Y%m%dT%H%M%SZ")
    base = Path(out_dir) / f"run-{stamp}-seed{seed}"
    run_dir = base
    counter = 2
    while run_dir.exists():
        run_dir = Path(f"{base}-{counter}")
        counter += 1
    for name in sorted(files):
        path = run_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(files[name], encoding="utf-8")
    return run_dir
