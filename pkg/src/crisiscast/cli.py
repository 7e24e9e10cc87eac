"""Command line client.

Every subcommand is a thin wrapper over one service endpoint: the CLI
reads local files, ships their contents in the request body, and writes
whatever the service returns. By default the app runs in-process; with
--server it talks to a remote instance over HTTP, so the two modes stay
behaviorally identical.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import click

from . import __version__
from .errors import BadParameter, DataError, NumericalError, ParseError, UsageError
from .pipeline import write_bundle

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3
_STATUS_EXIT = {400: EXIT_USAGE, 422: EXIT_DATA, 500: EXIT_NUMERICAL}


class ServiceFailure(Exception):
    """A non-200 service response, carrying the mapped exit code."""

    def __init__(self, status: int, error: str, detail: str):
        super().__init__(detail)
        self.exit_code = _STATUS_EXIT.get(status, EXIT_NUMERICAL)
        self.error = error
        self.detail = detail


class ServiceClient:
    def __init__(self, server: str | None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=900.0)
            self._transport_errors: tuple = (httpx.HTTPError,)
        else:
            import warnings

            with warnings.catch_warnings():
                # the in-process client shim warns at import on some hosts
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())
            self._transport_errors = ()

    def post(self, path: str, body: dict) -> dict:
        try:
            response = self._client.post(path, json=body)
        except self._transport_errors as exc:
            raise ServiceFailure(400, "ConnectionError", f"cannot reach server: {exc}")
        if response.status_code != 200:
            try:
                payload = response.json()
            except ValueError:
                payload = {"error": "HTTPError", "detail": response.text}
            raise ServiceFailure(
                response.status_code,
                payload.get("error", "HTTPError"),
                payload.get("detail", response.text),
            )
        return response.json()


@dataclass
class CliState:
    config: dict = field(default_factory=dict)
    seed: int | None = None
    out_dir: str | None = None
    client: ServiceClient | None = None

    def section(self, name: str) -> dict:
        value = self.config.get(name)
        return dict(value) if isinstance(value, dict) else {}

    def effective_seed(self, fallback: int = 0) -> int:
        if self.seed is not None:
            return self.seed
        seed = self.config.get("seed", fallback)
        if not isinstance(seed, int):
            raise BadParameter("seed must be an integer")
        return seed


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}")


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise BadParameter(f"cannot read config {path}: {exc.strerror or exc}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadParameter(f"config {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise BadParameter(f"config {path} must be a JSON object")
    return data


def _parse_json_option(text: str | None, label: str):
    if text is None:
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadParameter(f"--{label} is not valid JSON: {exc}")


def _parse_order_option(text: str | None) -> list[int] | None:
    if text is None:
        return None
    try:
        return [int(part) for part in text.split(",")]
    except ValueError:
        raise BadParameter(f"--order must be comma-separated integers, got {text!r}")


def _parse_list_option(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [part.strip() for part in text.split(",") if part.strip()]


def _write_outputs(state: CliState, files: dict[str, str]) -> None:
    out = Path(state.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        path = out / name
        path.write_text(files[name], encoding="utf-8")
        click.echo(f"wrote {path}")


def _pick(value, *fallbacks):
    """First non-None of an option value, config values, and a default."""
    if value is not None:
        return value
    for candidate in fallbacks[:-1]:
        if candidate is not None:
            return candidate
    return fallbacks[-1]


pass_state = click.make_pass_decorator(CliState)


@click.group(name="crisiscast")
@click.version_option(__version__, prog_name="crisiscast")
@click.option("--config", "config_path", metavar="PATH", default=None,
              help="JSON config document (pipeline schema); sections feed subcommand defaults.")
@click.option("--seed", type=int, default=None, help="Seed override for data generation and runs.")
@click.option("--out", "out_dir", metavar="DIR", default=None,
              help="Directory for output files (default: current directory; pipeline: runs/).")
@click.option("--server", metavar="URL", default=None,
              help="Base URL of a running service; default executes in-process.")
@click.pass_context
def main(ctx, config_path, seed, out_dir, server):
    """Crisis-aware weekly forecasting and keyword scoring."""
    config = _load_config(config_path) if config_path else {}
    ctx.obj = CliState(config=config, seed=seed, out_dir=out_dir, client=ServiceClient(server))


@main.command()
@click.option("--years", type=int, default=None, help="Complete ISO years to generate.")
@click.option("--no-covid", is_flag=True, help="Disable the crisis shock.")
@click.option("--no-flags", is_flag=True, help="Omit the peak/covid flag columns.")
@pass_state
def generate(state: CliState, years, no_covid, no_flags):
    """Write a synthetic weekly retail dataset as input.csv."""
    params = state.section("synthetic")
    if no_covid:
        params["covid_enabled"] = False
    body = {
        "years": _pick(years, state.config.get("years"), 6),
        "seed": state.effective_seed(),
        "params": params or None,
        "include_flags": not no_flags,
    }
    result = state.client.post("/generate", body)
    _write_outputs(state, {"input.csv": result["csv"]})
    click.echo(
        f"{result['n_weeks']} weeks from {result['start_week']}; "
        f"metrics: {', '.join(result['metrics'])}; "
        f"flags: {', '.join(result['flags']) or 'none'}"
    )


def _ingest_body(state: CliState, input_path, metrics, flags, fill_gaps) -> dict:
    section = state.section("ingest")
    body = {"csv": _read_text(input_path)}
    m = _pick(_parse_list_option(metrics), section.get("metrics"), None)
    f = _pick(_parse_list_option(flags), section.get("flags"), None)
    if m is not None:
        body["metrics"] = list(m)
    if f is not None:
        body["flags"] = list(f)
    body["fill_gaps"] = bool(fill_gaps or section.get("fill_gaps", False))
    return body


@main.command()
@click.argument("input_path", metavar="INPUT")
@click.option("--metrics", default=None, help="Comma-separated metric columns.")
@click.option("--flags", default=None, help="Comma-separated flag columns.")
@click.option("--fill-gaps", is_flag=True, help="Interpolate missing weeks instead of failing.")
@pass_state
def ingest(state: CliState, input_path, metrics, flags, fill_gaps):
    """Validate a weekly CSV and describe its contents."""
    result = state.client.post("/ingest", _ingest_body(state, input_path, metrics, flags, fill_gaps))
    click.echo(
        f"{result['n_weeks']} weeks from {result['start_week']} to {result['end_week']}; "
        f"metrics: {', '.join(result['metrics'])}; "
        f"flags: {', '.join(result['flags']) or 'none'}"
    )


def _model_options(fn):
    fn = click.option("--metric", default=None, help="Target metric column.")(fn)
    fn = click.option("--no-log", is_flag=True, help="Model the raw levels instead of logs.")(fn)
    fn = click.option("--no-flags", is_flag=True, help="Ignore flag columns when fitting.")(fn)
    fn = click.option("--metrics", default=None, help="Comma-separated metric columns.")(fn)
    fn = click.option("--flags", default=None, help="Comma-separated flag columns.")(fn)
    fn = click.option("--fill-gaps", is_flag=True, help="Interpolate missing weeks.")(fn)
    return fn


def _model_body(state, input_path, metric, no_log, no_flags, metrics, flags, fill_gaps) -> dict:
    body = _ingest_body(state, input_path, metrics, flags, fill_gaps)
    body["metric"] = _pick(metric, state.config.get("target_metric"), "tpv")
    body["log"] = not no_log
    body["use_flags"] = not no_flags
    return body


@main.command()
@click.argument("input_path", metavar="INPUT")
@click.option("--order", default=None, metavar="p,d,q[,P,D,Q[,s]]",
              help="Model order (required).")
@_model_options
@pass_state
def fit(state: CliState, input_path, order, metric, no_log, no_flags, metrics, flags, fill_gaps):
    """Fit one seasonal ARIMA model with exogenous flags; write model.json."""
    parsed = _parse_order_option(order)
    if parsed is None:
        raise BadParameter("fit needs --order p,d,q[,P,D,Q[,s]]")
    body = _model_body(state, input_path, metric, no_log, no_flags, metrics, flags, fill_gaps)
    body["order"] = parsed
    result = state.client.post("/fit", body)
    _write_outputs(state, {"model.json": json.dumps(result["model"], indent=2, sort_keys=True)})
    click.echo(
        f"order {tuple(result['order'])}: aicc {result['aicc']:.2f}, "
        f"loglik {result['loglik']:.2f}, converged {result['converged']}"
    )


@main.command()
@click.argument("input_path", metavar="INPUT")
@click.option("--mode", type=click.Choice(["stepwise", "exhaustive"]), default=None,
              help="Search strategy override.")
@_model_options
@pass_state
def autofit(state: CliState, input_path, mode, metric, no_log, no_flags, metrics, flags, fill_gaps):
    """Select the model order by corrected-AIC search; write model.json."""
    body = _model_body(state, input_path, metric, no_log, no_flags, metrics, flags, fill_gaps)
    search = state.section("search") or None
    if mode is not None:
        search = dict(search or {}, mode=mode)
    body["search"] = search
    result = state.client.post("/autofit", body)
    _write_outputs(state, {
        "model.json": json.dumps(result["model"], indent=2, sort_keys=True),
        "order_search.csv": result["search_csv"],
    })
    click.echo(
        f"selected {tuple(result['order'])} after {result['n_evaluated']} candidates: "
        f"aicc {result['aicc']:.2f}"
    )


@main.command()
@click.argument("input_path", metavar="INPUT")
@click.option("--order", default=None, metavar="p,d,q[,P,D,Q[,s]]",
              help="Model order; omitted = select automatically.")
@click.option("--horizon", type=int, default=None, help="Weeks ahead to forecast.")
@_model_options
@pass_state
def forecast(state: CliState, input_path, order, horizon, metric, no_log, no_flags,
             metrics, flags, fill_gaps):
    """Forecast P50/P90 quantiles with peak flags; write forecast.csv."""
    body = _model_body(state, input_path, metric, no_log, no_flags, metrics, flags, fill_gaps)
    scenario = state.section("scenario")
    body["order"] = _parse_order_option(order)
    body["search"] = state.section("search") or None
    body["horizon"] = _pick(horizon, scenario.get("horizon_weeks"), 78)
    body["scenario"] = scenario or None
    body["peak"] = state.section("peak") or None
    result = state.client.post("/forecast", body)
    _write_outputs(state, {"forecast.csv": result["csv"]})
    click.echo(f"{result['horizon']} weeks ahead with order {tuple(result['order'])}")


@main.command()
@click.argument("input_path", metavar="INPUT")
@click.option("--column", default=None, help="Column to scan (default: first metric).")
@click.option("--window", "window_n", type=int, default=None, help="Trailing window length.")
@click.option("--k", type=float, default=None, help="Standard-deviation multiple.")
@click.option("--sd-mode", type=click.Choice(["window", "avg_series"]), default=None)
@pass_state
def peaks(state: CliState, input_path, column, window_n, k, sd_mode):
    """Scan a weekly series for false peaks; write peaks.csv."""
    section = state.section("peak")
    body = {
        "csv": _read_text(input_path),
        "column": column,
        "window_n": _pick(window_n, section.get("window_n"), 8),
        "k": _pick(k, section.get("k"), 3.0),
        "sd_mode": _pick(sd_mode, section.get("sd_mode"), "window"),
    }
    result = state.client.post("/peaks", body)
    _write_outputs(state, {"peaks.csv": result["csv"]})
    click.echo(f"{result['n_flagged']} weeks flagged")


@main.command()
@click.argument("input_path", metavar="INPUT")
@click.option("--metric", default=None, help="Metric column to analyze.")
@click.option("--growth-mode", type=click.Choice(["weekly", "yoy"]), default=None)
@click.option("--ar-order", type=int, default=None, help="Autoregressive lags per regime.")
@click.option("--threshold", type=float, default=None, help="Crisis-probability cutoff for spans.")
@click.option("--fill-gaps", is_flag=True)
@pass_state
def regimes(state: CliState, input_path, metric, growth_mode, ar_order, threshold, fill_gaps):
    """Fit the two-regime growth model; write regimes.csv and regime_spans.csv."""
    body = {
        "csv": _read_text(input_path),
        "metric": _pick(metric, state.config.get("target_metric"), "tpv"),
        "growth_mode": _pick(growth_mode, state.config.get("growth_mode"), "weekly"),
        "ar_order": _pick(ar_order, state.config.get("msar_ar_order"), 1),
        "threshold": _pick(threshold, None, 0.5),
        "fill_gaps": fill_gaps,
    }
    result = state.client.post("/regimes", body)
    _write_outputs(state, {
        "regimes.csv": result["regimes_csv"],
        "regime_spans.csv": result["spans_csv"],
    })
    click.echo(f"loglik {result['loglik']:.2f}")


@main.command()
@click.argument("corpus_path", metavar="CORPUS")
@click.option("--baseline", default=None, metavar="PATH", help="Pre-crisis corpus for trend ratios.")
@click.option("--seeds", default=None, metavar="PATH", help="Seed essentiality CSV (term,score).")
@click.option("--embeddings", default=None, metavar="PATH", help="Word-vector table.")
@click.option("--topics", type=int, default=None, help="Number of topics.")
@click.option("--iterations", type=int, default=None, help="Gibbs sweeps.")
@click.option("--lda-seed", type=int, default=None, help="Sampler seed.")
@click.option("--lambda", "lambda_", type=float, default=None, help="Relevance mixing weight.")
@click.option("--min-count", type=int, default=None, help="Trend-ratio frequency floor.")
@click.option("--neighbors", type=int, default=None, help="Seeds per essentiality estimate.")
@click.option("--top", "top_n", type=int, default=None, help="Rows to keep in the report.")
@pass_state
def keywords(state: CliState, corpus_path, baseline, seeds, embeddings, topics, iterations,
             lda_seed, lambda_, min_count, neighbors, top_n):
    """Score keywords by topic saliency and crisis essentiality; write keywords.csv."""
    section = state.section("keywords")
    body = {
        "corpus": _read_text(corpus_path),
        "n_topics": _pick(topics, section.get("n_topics"), 8),
        "iterations": _pick(iterations, section.get("iterations"), 200),
        "seed": _pick(lda_seed, section.get("lda_seed"), 7),
        "lambda_": _pick(lambda_, section.get("lambda_"), 0.6),
        "min_count": _pick(min_count, section.get("min_count"), 5),
        "m_neighbors": _pick(neighbors, section.get("m_neighbors"), 10),
        "top_n": _pick(top_n, section.get("top_n"), None),
        "alpha": section.get("alpha"),
        "beta": section.get("beta", 0.01),
    }
    for option, key, body_key in (
        (baseline, "baseline_path", "baseline"),
        (seeds, "seeds_path", "seeds_csv"),
        (embeddings, "embeddings_path", "embeddings"),
    ):
        path = _pick(option, section.get(key), None)
        if path is not None:
            body[body_key] = _read_text(path)
    result = state.client.post("/keywords", body)
    _write_outputs(state, {"keywords.csv": result["csv"]})
    click.echo(f"{result['n_terms']} terms scored")


@main.command()
@click.argument("input_path", metavar="INPUT")
@click.option("--metric", default=None, help="Metric column to backtest.")
@click.option("--models", default=None, metavar="JSON",
              help='Model spec list, e.g. \'[{"kind":"baseline","method":"naive"}]\'.')
@click.option("--plan", default=None, metavar="JSON",
              help='{"initial_train_weeks":..,"step_weeks":..,"horizon_weeks":..,"n_folds":..}')
@click.option("--fill-gaps", is_flag=True)
@pass_state
def backtest(state: CliState, input_path, metric, models, plan, fill_gaps):
    """Rolling-origin comparison of models; write backtest.csv and leaderboard.csv."""
    body = {
        "csv": _read_text(input_path),
        "metric": _pick(metric, state.config.get("target_metric"), "tpv"),
        "models": _parse_json_option(models, "models"),
        "plan": _pick(_parse_json_option(plan, "plan"), state.config.get("backtest_plan"), None),
        "fill_gaps": fill_gaps,
    }
    result = state.client.post("/backtest", body)
    _write_outputs(state, {
        "backtest.csv": result["backtest_csv"],
        "leaderboard.csv": result["leaderboard_csv"],
    })
    leader = result["leaderboard_csv"].splitlines()
    if len(leader) > 1:
        click.echo(f"best: {leader[1].split(',')[1]}")


@main.command()
@click.argument("input_path", metavar="INPUT")
@click.option("--target", default=None, help="Metric for the trailing-52-week row.")
@click.option("--share-metrics", default=None, help="Comma-separated share columns.")
@click.option("--fill-gaps", is_flag=True)
@pass_state
def report(state: CliState, input_path, target, share_metrics, fill_gaps):
    """Annual level/YoY/average summary of a weekly dataset; write summary.csv."""
    body = {
        "csv": _read_text(input_path),
        "target": _pick(target, state.config.get("target_metric"), "tpv"),
        "share_metrics": _parse_list_option(share_metrics),
        "fill_gaps": fill_gaps,
    }
    result = state.client.post("/report", body)
    _write_outputs(state, {"summary.csv": result["csv"]})


@main.command()
@click.argument("input_path", metavar="INPUT", required=False)
@pass_state
def pipeline(state: CliState, input_path):
    """Run the full pipeline; write an artifact bundle to a run directory."""
    config = dict(state.config)
    if state.seed is not None:
        config["seed"] = state.seed
    out_dir = state.out_dir or config.pop("out_dir", None) or "runs"
    source = input_path or config.pop("input_path", None)
    if input_path:
        config.pop("input_path", None)

    body: dict = {"config": config}
    if source:
        body["input_csv"] = _read_text(source)
    keywords_cfg = config.get("keywords")
    if isinstance(keywords_cfg, dict):
        for key, body_key in (
            ("corpus_path", "corpus"),
            ("baseline_path", "baseline"),
            ("seeds_path", "seeds_csv"),
            ("embeddings_path", "embeddings"),
        ):
            path = keywords_cfg.get(key)
            if path:
                body[body_key] = _read_text(path)

    result = state.client.post("/pipeline", body)
    seed_used = config.get("seed", 0)
    run_dir = write_bundle(result["files"], out_dir, seed_used)
    for name in sorted(result["files"]):
        click.echo(f"wrote {run_dir / name}")
    orders = ", ".join(
        f"{variant}: {tuple(order)}" for variant, order in result["selected_orders"].items()
    )
    click.echo(f"run directory: {run_dir}")
    click.echo(f"selected orders: {orders}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8008, show_default=True)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


def run(argv: list[str] | None = None) -> int:
    """Invoke the CLI, mapping exception families onto exit codes."""
    try:
        main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except ServiceFailure as exc:
        click.echo(f"error [{exc.error}]: {exc.detail}", err=True)
        return exc.exit_code
    except UsageError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except NumericalError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_NUMERICAL
    return EXIT_OK


def entrypoint() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    entrypoint()
