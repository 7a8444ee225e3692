"""HTTP API over a shared pipeline context.

Every error response has the body ``{"error": <code>, "message": <text>}``.
"""

from __future__ import annotations

import json
import logging

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool
from starlette.exceptions import HTTPException as StarletteHTTPException

from .config import ServiceConfig
from .dga import BigramModel, DgaScorer
from .dns_model import RecordError, iter_jsonl, record_from_dict
from .forest import ForestModel
from .lists import DomainList, DomainLists, InvalidDomain, ListKind, Source, load_list
from .pipeline import NotReady, PipelineConfig, PipelineContext, process
from .rate import RateStore

log = logging.getLogger(__name__)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status, self.code, self.message = status, code, message


def build_context(cfg: ServiceConfig) -> PipelineContext:
    """Load lists and models named in ``cfg``. Absent model paths leave the
    context in degraded mode; a path that fails to load is an error."""
    wl = load_list(cfg.lists.whitelist, ListKind.WHITELIST) if cfg.lists.whitelist else None
    bl = load_list(cfg.lists.blacklist, ListKind.BLACKLIST) if cfg.lists.blacklist else None
    dga_model = BigramModel.load(cfg.models.dga) if cfg.models.dga else None
    forest = ForestModel.load(cfg.models.forest) if cfg.models.forest else None
    scorer = DgaScorer(dga_model, cfg.dga.remote_url or None, cfg.dga.timeout_ms / 1000.0)
    return PipelineContext(
        lists=DomainLists(wl, bl, allow_feedback_whitelist=cfg.feedback.allow_whitelist),
        scorer=scorer,
        forest=forest,
        config=PipelineConfig(cfg.rate_config(), cfg.thresholds(), cfg.feedback.enabled),
        rate_store=RateStore(),
    )


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"error": code, "message": message}, status_code=status)


def create_app(ctx: PipelineContext, cfg: ServiceConfig | None = None) -> FastAPI:
    cfg = cfg or ServiceConfig()
    app = FastAPI(title="botsieve")
    app.state.ctx = ctx
    list_paths = {ListKind.WHITELIST: cfg.lists.whitelist, ListKind.BLACKLIST: cfg.lists.blacklist}

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return _error(exc.status, exc.code, exc.message)

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException):
        code = {404: "not_found", 405: "method_not_allowed"}.get(exc.status_code, "http_error")
        return _error(exc.status_code, code, str(exc.detail))

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "bad_request", str(exc.errors()))

    @app.exception_handler(Exception)
    async def _internal(request: Request, exc: Exception):
        log.exception("unhandled error")
        return _error(500, "internal", type(exc).__name__)

    async def _json_body(request: Request):
        raw = await request.body()
        try:
            return json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ApiError(400, "invalid_json", f"body is not valid JSON: {exc}") from None

    def _classify(record):
        try:
            return process(record, ctx)
        except NotReady as exc:
            raise ApiError(503, "not_ready", str(exc)) from None

    @app.post("/classify")
    async def classify(request: Request):
        body = await _json_body(request)
        try:
            record = record_from_dict(body)
        except RecordError as exc:
            raise ApiError(400, "invalid_record", str(exc)) from None
        return (await run_in_threadpool(_classify, record)).to_dict()

    @app.post("/classify/batch")
    async def classify_batch(request: Request, verbose: int = 0):
        text = (await request.body()).decode("utf-8", errors="replace")
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if len(lines) > cfg.service.max_batch:
            raise ApiError(413, "batch_too_large",
                           f"{len(lines)} lines exceeds the limit of {cfg.service.max_batch}")
        summary = {"total": len(lines), "benign": 0, "infected": 0,
                   "per_phase_exits": {str(p): 0 for p in (1, 2, 3, 4)}, "errors": 0}
        return await run_in_threadpool(_run_batch, lines, summary, verbose)

    def _run_batch(lines, summary, verbose):
        results = []
        for item in iter_jsonl(lines):
            if isinstance(item, RecordError):
                summary["errors"] += 1
                ctx.stats.add_errors()
                results.append({"error": "invalid_record", "message": str(item)})
                continue
            c = _classify(item[0])
            summary[c.verdict.value] += 1
            summary["per_phase_exits"][str(c.exit_phase)] += 1
            results.append(c.to_dict())
        if verbose:
            summary["records"] = results
        return summary

    @app.get("/stats")
    def stats():
        return ctx.stats.snapshot()

    @app.get("/health")
    def health():
        return {"status": "ok" if ctx.ready else "degraded"}

    def _kind(kind: str) -> ListKind:
        try:
            return ListKind(kind)
        except ValueError:
            raise ApiError(404, "unknown_list", f"no list named {kind!r}") from None

    def _listing(kind: ListKind) -> dict:
        lst: DomainList = ctx.lists.get(kind)
        return {"kind": kind.value, "entries": lst.entries(), "revision": lst.revision}

    def _persist() -> None:
        for k, path in list_paths.items():
            if path:
                ctx.lists.get(k).save(path)

    @app.get("/lists/{kind}")
    def get_list(kind: str):
        return _listing(_kind(kind))

    async def _domain_arg(request: Request) -> str:
        domain = request.query_params.get("domain")
        if domain is None:
            body = await _json_body(request)
            if not isinstance(body, dict) or not isinstance(body.get("domain"), str):
                raise ApiError(400, "invalid_domain", 'body must be {"domain": string}')
            domain = body["domain"]
        return domain

    @app.post("/lists/{kind}")
    async def add_to_list(kind: str, request: Request):
        k = _kind(kind)
        domain = await _domain_arg(request)
        try:
            ctx.lists.update(k, domain, Source.MANUAL)
        except InvalidDomain as exc:
            raise ApiError(400, "invalid_domain", str(exc)) from None
        _persist()
        return _listing(k)

    @app.delete("/lists/{kind}")
    async def remove_from_list(kind: str, request: Request):
        k = _kind(kind)
        domain = await _domain_arg(request)
        try:
            ctx.lists.remove(k, domain)
        except InvalidDomain as exc:
            raise ApiError(400, "invalid_domain", str(exc)) from None
        _persist()
        return _listing(k)

    return app

