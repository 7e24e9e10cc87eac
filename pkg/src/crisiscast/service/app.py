"""FastAPI application: one endpoint per pipeline stage plus /pipeline.

Error mapping is the HTTP face of the package's exception hierarchy:
usage errors are 400, data errors 422, numerical failures 500. Request
bodies that fail validation are usage errors too, so they return 400
rather than FastAPI's default 422.
"""

from __future__ import annotations

import json
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..autoorder import SearchSpace, select_order
from ..errors import BadParameter, CrisiscastError, DataError, NumericalError, UsageError
from ..evaluation import BacktestPlan, backtest, parse_method
from ..io_csv import IngestConfig, ingest
from ..msar import fit_msar, regime_report, to_growth
from ..peaks import PeakConfig, scan_peaks
from ..pipeline import (
    KeywordsConfig,
    PipelineConfig,
    _default_baselines,
    _default_search,
    _derive_plan,
    _run_keywords,
    run_pipeline,
)
from ..report import (
    emit_summary,
    render_backtest_csv,
    render_forecast_csv,
    render_input_csv,
    render_leaderboard_csv,
    render_order_leaderboard_csv,
    render_peaks_csv,
    render_regime_spans_csv,
    render_regimes_csv,
    render_summary_csv,
)
from ..sarimax import SarimaOrder
from ..sarimax import fit as fit_sarimax
from ..sarimax import forecast as forecast_sarimax
from ..sarimax import quantile
from ..series import (
    WEEK,
    FlagSeries,
    ScenarioConfig,
    WeeklySeries,
    build_covid_flag,
    build_peak_flag,
    iso_week_label,
    log_transform,
)
from ..synthetic import SyntheticParams, default_scenario, generate_synthetic
from ..varx import MultiSeries
from . import schemas as s

_STATUS = ((UsageError, 400), (DataError, 422), (NumericalError, 500))


@contextmanager
def _materialized(files: dict[str, str]) -> Iterator[dict[str, str]]:
    """Write request-supplied file contents into a temp dir, yield paths.

    Parse errors cite the file they came from; the temp directory prefix
    would be meaningless to the caller, so it is stripped from messages.
    """
    with tempfile.TemporaryDirectory(prefix="crisiscast-") as td:
        paths = {}
        for name, text in files.items():
            path = Path(td) / name
            path.write_text(text, encoding="utf-8")
            paths[name] = str(path)
        try:
            yield paths
        except CrisiscastError as exc:
            raise type(exc)(str(exc).replace(td + "/", "")) from exc


def _ingest_text(
    csv_text: str,
    metrics: list[str] | None = None,
    flags: list[str] | None = None,
    fill_gaps: bool = False,
) -> tuple[MultiSeries, list[FlagSeries]]:
    config = IngestConfig(
        metrics=tuple(metrics) if metrics is not None else None,
        flags=tuple(flags) if flags is not None else None,
        fill_gaps=fill_gaps,
    )
    with _materialized({"input.csv": csv_text}) as paths:
        return ingest(paths["input.csv"], config)


def _get_metric(ms: MultiSeries, name: str) -> WeeklySeries:
    if name not in ms.names:
        raise BadParameter(f"metric {name!r} not in data: {list(ms.names)}")
    return ms.get(name)


def _parse_order(values: list[int]) -> SarimaOrder:
    xs = list(values)
    if len(xs) == 3:
        xs += [0, 0, 0, 52]
    elif len(xs) == 6:
        xs += [52]
    if len(xs) != 7:
        raise BadParameter("order must have 3, 6 or 7 integers: p,d,q[,P,D,Q[,s]]")
    return SarimaOrder(*xs)


def _search_space(spec: dict | None) -> SearchSpace:
    if spec is None:
        return _default_search()
    built = dict(spec)
    for name in ("d_set", "D_set"):
        if name in built and built[name] is not None:
            built[name] = tuple(built[name])
    try:
        return SearchSpace(**built)
    except TypeError as exc:
        raise BadParameter(f"bad search space: {exc}") from exc


def _build_config(spec: dict | None, cls, label: str):
    if spec is None:
        return cls()
    try:
        return cls(**spec)
    except TypeError as exc:
        raise BadParameter(f"bad {label}: {exc}") from exc


def _fit_inputs(
    req, horizon: int | None = None, scenario: dict | None = None
) -> tuple[WeeklySeries, list[FlagSeries], list[FlagSeries]]:
    """Shared setup for fit/autofit/forecast: target series plus exogenous
    flags for the history and, when a horizon is given, for the future."""
    ms, ingested = _ingest_text(req.csv, req.metrics, req.flags, req.fill_gaps)
    y = _get_metric(ms, req.metric)
    y = log_transform(y) if req.log else y
    fit_flags = list(ingested) if req.use_flags else []

    future_flags: list[FlagSeries] = []
    if horizon is not None:
        forecast_start = y.start_week + len(y) * WEEK
        scen = _build_config(scenario, ScenarioConfig, "scenario") if scenario else None
        for flag in fit_flags:
            if flag.name == "peak":
                future_flags.append(build_peak_flag(forecast_start, horizon))
            elif flag.name == "covid" and scen is not None:
                future_flags.append(build_covid_flag(forecast_start, horizon, scen))
            else:
                # no rule for this regressor's future: assume inactive
                future_flags.append(
                    FlagSeries(flag.name, forecast_start, np.zeros(horizon, dtype=np.int64))
                )
    return y, fit_flags, future_flags


def _fit_response(model, cls=s.FitResponse, **extra):
    return cls(
        model=json.loads(model.to_json()),
        order=list(model.order.as_tuple()),
        aicc=model.aicc,
        loglik=model.loglik,
        converged=model.converged,
        **extra,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="crisiscast", version=__version__)

    for exc_class, status in _STATUS:
        def _handler(request: Request, exc: Exception, status=status) -> JSONResponse:
            body = s.ErrorResponse(error=type(exc).__name__, detail=str(exc))
            return JSONResponse(status_code=status, content=body.model_dump())

        app.add_exception_handler(exc_class, _handler)

    @app.exception_handler(RequestValidationError)
    def _validation_handler(request: Request, exc: RequestValidationError) -> JSONResponse:
        body = s.ErrorResponse(error="RequestValidationError", detail=str(exc))
        return JSONResponse(status_code=400, content=body.model_dump())

    @app.get("/health", response_model=s.HealthResponse)
    def health() -> s.HealthResponse:
        return s.HealthResponse(status="ok", version=__version__)

    @app.post("/generate", response_model=s.GenerateResponse)
    def generate(req: s.GenerateRequest) -> s.GenerateResponse:
        params = req.params or {}
        if "covid_weeks" in params and params["covid_weeks"] is not None:
            params = dict(params, covid_weeks=tuple(params["covid_weeks"]))
        sp = _build_config(params or None, SyntheticParams, "generator params")
        ms = generate_synthetic(req.years, req.seed, sp)
        metrics = [ms.get(name) for name in ms.names]
        n, start = len(metrics[0]), metrics[0].start_week
        flags: list[FlagSeries] = []
        if req.include_flags:
            flags.append(build_peak_flag(start, n))
            if sp.covid_enabled:
                covid = build_covid_flag(start, n, default_scenario(sp))
                # a span that misses the crisis weeks gets no covid column
                if covid.values.any():
                    flags.append(covid)
        return s.GenerateResponse(
            csv=render_input_csv(metrics, flags),
            n_weeks=n,
            start_week=iso_week_label(start),
            metrics=list(ms.names),
            flags=[f.name for f in flags],
        )

    @app.post("/ingest", response_model=s.IngestResponse)
    def ingest_endpoint(req: s.IngestRequest) -> s.IngestResponse:
        ms, flags = _ingest_text(req.csv, req.metrics, req.flags, req.fill_gaps)
        first = ms.get(ms.names[0])
        return s.IngestResponse(
            n_weeks=len(first),
            start_week=iso_week_label(first.start_week),
            end_week=iso_week_label(first.end_week),
            metrics=list(ms.names),
            flags=[f.name for f in flags],
        )

    @app.post("/fit", response_model=s.FitResponse)
    def fit_endpoint(req: s.FitRequest) -> s.FitResponse:
        y, fit_flags, _ = _fit_inputs(req)
        model = fit_sarimax(y, fit_flags, _parse_order(req.order))
        return _fit_response(model)

    @app.post("/autofit", response_model=s.AutofitResponse)
    def autofit(req: s.AutofitRequest) -> s.AutofitResponse:
        y, fit_flags, _ = _fit_inputs(req)
        result = select_order(y, fit_flags, _search_space(req.search))
        return _fit_response(
            result.best,
            cls=s.AutofitResponse,
            search_csv=render_order_leaderboard_csv(result.leaderboard),
            n_evaluated=result.n_evaluated,
        )

    @app.post("/forecast", response_model=s.ForecastResponse)
    def forecast(req: s.ForecastRequest) -> s.ForecastResponse:
        if req.horizon < 1:
            raise BadParameter("horizon must be a positive integer")
        y, fit_flags, future_flags = _fit_inputs(req, req.horizon, req.scenario)
        if req.order is not None:
            model = fit_sarimax(y, fit_flags, _parse_order(req.order))
        else:
            model = select_order(y, fit_flags, _search_space(req.search)).best
        dist = forecast_sarimax(model, y, fit_flags, future_flags, req.horizon)
        p50 = [quantile(dist, h, 0.5) for h in range(1, req.horizon + 1)]
        p90 = [quantile(dist, h, 0.9) for h in range(1, req.horizon + 1)]
        forecast_start = y.start_week + len(y) * WEEK
        scan = scan_peaks(
            WeeklySeries(f"{req.metric}_p50", forecast_start, np.asarray(p50)),
            _build_config(req.peak, PeakConfig, "peak config"),
        )
        return s.ForecastResponse(
            csv=render_forecast_csv(forecast_start, p50, p90, scan.flags),
            order=list(model.order.as_tuple()),
            horizon=req.horizon,
        )

    @app.post("/peaks", response_model=s.PeaksResponse)
    def peaks(req: s.PeaksRequest) -> s.PeaksResponse:
        ms, _ = _ingest_text(req.csv)
        column = req.column or ms.names[0]
        series = _get_metric(ms, column)
        cfg = PeakConfig(window_n=req.window_n, k=req.k, sd_mode=req.sd_mode)
        scan = scan_peaks(series, cfg)
        return s.PeaksResponse(
            csv=render_peaks_csv(series, scan), n_flagged=len(scan.flagged_indices())
        )

    @app.post("/regimes", response_model=s.RegimesResponse)
    def regimes(req: s.RegimesRequest) -> s.RegimesResponse:
        ms, _ = _ingest_text(req.csv, fill_gaps=req.fill_gaps)
        y = _get_metric(ms, req.metric)
        growth = to_growth(y, req.growth_mode)
        fit = fit_msar(growth, req.ar_order)
        spans = regime_report(fit, req.threshold)
        return s.RegimesResponse(
            regimes_csv=render_regimes_csv(fit, growth),
            spans_csv=render_regime_spans_csv(spans),
            loglik=float(fit.loglik),
            transition=[
                [float(fit.trans.p00), float(fit.trans.p01)],
                [float(fit.trans.p10), float(fit.trans.p11)],
            ],
            initial_dist=[float(x) for x in fit.initial_dist],
        )

    @app.post("/keywords", response_model=s.KeywordsResponse)
    def keywords(req: s.KeywordsRequest) -> s.KeywordsResponse:
        contents = {"corpus.txt": req.corpus}
        if req.baseline is not None:
            contents["baseline.txt"] = req.baseline
        if req.seeds_csv is not None:
            contents["seeds.csv"] = req.seeds_csv
        if req.embeddings is not None:
            contents["embeddings.txt"] = req.embeddings
        with _materialized(contents) as paths:
            kw = KeywordsConfig(
                corpus_path=paths["corpus.txt"],
                baseline_path=paths.get("baseline.txt"),
                seeds_path=paths.get("seeds.csv"),
                embeddings_path=paths.get("embeddings.txt"),
                n_topics=req.n_topics,
                alpha=req.alpha,
                beta=req.beta,
                iterations=req.iterations,
                lda_seed=req.seed,
                lambda_=req.lambda_,
                min_count=req.min_count,
                m_neighbors=req.m_neighbors,
                top_n=req.top_n,
            )
            csv_text = _run_keywords(kw)
        return s.KeywordsResponse(csv=csv_text, n_terms=csv_text.count("\n") - 1)

    @app.post("/backtest", response_model=s.BacktestResponse)
    def backtest_endpoint(req: s.BacktestRequest) -> s.BacktestResponse:
        ms, _ = _ingest_text(req.csv, fill_gaps=req.fill_gaps)
        y = _get_metric(ms, req.metric)
        if req.plan is not None:
            plan = _build_config(req.plan, BacktestPlan, "backtest plan")
        else:
            plan = _derive_plan(len(y))
        if req.models is not None:
            specs = [dict(m) for m in req.models]
        else:
            specs = []
            for method in _default_baselines():
                if method == "trailing_yoy":
                    specs.append({"kind": "trailing_yoy"})
                else:
                    name, args = parse_method(method)
                    specs.append({"kind": "baseline", "method": name, **args})
        reports = [backtest(y, [], spec, plan) for spec in specs]
        return s.BacktestResponse(
            backtest_csv=render_backtest_csv(reports),
            leaderboard_csv=render_leaderboard_csv(reports),
        )

    @app.post("/report", response_model=s.ReportResponse)
    def report(req: s.ReportRequest) -> s.ReportResponse:
        ms, _ = _ingest_text(req.csv, fill_gaps=req.fill_gaps)
        histories = {name: ms.get(name) for name in ms.names}
        _get_metric(ms, req.target)
        if req.share_metrics is not None:
            share = tuple(req.share_metrics)
        else:
            share = tuple(m for m in ("new_usd", "reengaged_usd") if m in ms.names)
        table = emit_summary(histories, None, target=req.target, share_metrics=share)
        return s.ReportResponse(csv=render_summary_csv(table))

    @app.post("/pipeline", response_model=s.PipelineResponse)
    def pipeline(req: s.PipelineRequest) -> s.PipelineResponse:
        config_dict = dict(req.config or {})
        contents: dict[str, str] = {}
        if req.input_csv is not None:
            contents["input.csv"] = req.input_csv
        if req.corpus is not None:
            contents["corpus.txt"] = req.corpus
        if req.baseline is not None:
            contents["baseline.txt"] = req.baseline
        if req.seeds_csv is not None:
            contents["seeds.csv"] = req.seeds_csv
        if req.embeddings is not None:
            contents["embeddings.txt"] = req.embeddings

        with _materialized(contents) as paths:
            if "input.csv" in paths:
                config_dict["input_path"] = paths["input.csv"]
            keywords_cfg = config_dict.get("keywords")
            keywords_cfg = dict(keywords_cfg) if keywords_cfg else {}
            if "corpus.txt" in paths:
                keywords_cfg["corpus_path"] = paths["corpus.txt"]
            for name, key in (
                ("baseline.txt", "baseline_path"),
                ("seeds.csv", "seeds_path"),
                ("embeddings.txt", "embeddings_path"),
            ):
                if name in paths:
                    keywords_cfg[key] = paths[name]
            if keywords_cfg:
                if "corpus_path" not in keywords_cfg:
                    raise BadParameter("keyword inputs need a corpus")
                config_dict["keywords"] = keywords_cfg
            result = run_pipeline(PipelineConfig.from_dict(config_dict))

        return s.PipelineResponse(
            files=result.files,
            variants=list(result.variants),
            selected_orders={
                variant: list(order) for variant, order in result.selected_orders.items()
            },
        )

    return app
