"""Request and response bodies for the HTTP service.

Requests carry file contents (CSV text, corpus text) instead of paths so
the service stays stateless and the CLI can run against a remote host.
Unknown fields are rejected: a typo in a request is a usage error, not
something to silently ignore.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ------------------------------------------------------------- requests


class GenerateRequest(StrictModel):
    years: int = 6
    seed: int = 0
    params: dict | None = None
    include_flags: bool = True


class IngestRequest(StrictModel):
    csv: str
    metrics: list[str] | None = None
    flags: list[str] | None = None
    fill_gaps: bool = False


class FitRequest(StrictModel):
    csv: str
    metric: str = "tpv"
    order: list[int]
    log: bool = True
    use_flags: bool = True
    metrics: list[str] | None = None
    flags: list[str] | None = None
    fill_gaps: bool = False


class AutofitRequest(StrictModel):
    csv: str
    metric: str = "tpv"
    search: dict | None = None
    log: bool = True
    use_flags: bool = True
    metrics: list[str] | None = None
    flags: list[str] | None = None
    fill_gaps: bool = False


class ForecastRequest(StrictModel):
    csv: str
    metric: str = "tpv"
    order: list[int] | None = None
    search: dict | None = None
    horizon: int = 78
    log: bool = True
    use_flags: bool = True
    scenario: dict | None = None
    peak: dict | None = None
    metrics: list[str] | None = None
    flags: list[str] | None = None
    fill_gaps: bool = False


class PeaksRequest(StrictModel):
    csv: str
    column: str | None = None
    window_n: int = 8
    k: float = 3.0
    sd_mode: str = "window"


class RegimesRequest(StrictModel):
    csv: str
    metric: str = "tpv"
    growth_mode: str = "weekly"
    ar_order: int = 1
    threshold: float = 0.5
    fill_gaps: bool = False


class KeywordsRequest(StrictModel):
    corpus: str
    baseline: str | None = None
    seeds_csv: str | None = None
    embeddings: str | None = None
    n_topics: int = 8
    alpha: float | None = None
    beta: float = 0.01
    iterations: int = 200
    seed: int = 7
    lambda_: float = 0.6
    min_count: int = 5
    m_neighbors: int = 10
    top_n: int | None = None


class BacktestRequest(StrictModel):
    csv: str
    metric: str = "tpv"
    models: list[dict] | None = None
    plan: dict | None = None
    fill_gaps: bool = False


class ReportRequest(StrictModel):
    csv: str
    target: str = "tpv"
    share_metrics: list[str] | None = None
    fill_gaps: bool = False


class PipelineRequest(StrictModel):
    config: dict | None = None
    input_csv: str | None = None
    corpus: str | None = None
    baseline: str | None = None
    seeds_csv: str | None = None
    embeddings: str | None = None


# ------------------------------------------------------------ responses


class HealthResponse(StrictModel):
    status: str
    version: str


class GenerateResponse(StrictModel):
    csv: str
    n_weeks: int
    start_week: str
    metrics: list[str]
    flags: list[str]


class IngestResponse(StrictModel):
    n_weeks: int
    start_week: str
    end_week: str
    metrics: list[str]
    flags: list[str]


class FitResponse(StrictModel):
    model: dict
    order: list[int]
    aicc: float
    loglik: float
    converged: bool

    # "model" is data here, not an ML artifact name pydantic should guard
    model_config = ConfigDict(extra="forbid", protected_namespaces=())


class AutofitResponse(FitResponse):
    search_csv: str
    n_evaluated: int


class ForecastResponse(StrictModel):
    csv: str
    order: list[int]
    horizon: int


class PeaksResponse(StrictModel):
    csv: str
    n_flagged: int


class RegimesResponse(StrictModel):
    regimes_csv: str
    spans_csv: str
    loglik: float
    transition: list[list[float]]
    initial_dist: list[float]


class KeywordsResponse(StrictModel):
    csv: str
    n_terms: int


class BacktestResponse(StrictModel):
    backtest_csv: str
    leaderboard_csv: str


class ReportResponse(StrictModel):
    csv: str


class PipelineResponse(StrictModel):
    files: dict[str, str]
    variants: list[str]
    selected_orders: dict[str, list[int]]


class ErrorResponse(StrictModel):
    error: str
    detail: str
