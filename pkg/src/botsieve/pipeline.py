"""Four-phase classification of DNS requests with list feedback and per-phase stats.

Phases run in order (lists, query rate, DGA score, forest) and the first definite
verdict ends the walk. Records without a query name have nothing to look up or
score, so phases 1 and 3 are skipped for them; they still count as having
reached those phases.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

from .dga import DgaScorer, DgaThresholds, RemoteMalformed, RemoteUnavailable, decide
from .dns_model import DnsRequestRecord, RecordError, extract_features, record_from_dict
from .forest import ForestModel, predict
from .lists import DomainLists, FeedbackWhitelistDisabled, InvalidDomain, ListKind, Source
from .rate import RateConfig, RateStore, observe
from .verdict import Verdict

PHASES = (1, 2, 3, 4)
LATENCY_RESERVOIR = 100_000


class NotReady(RuntimeError):
    """A record needs a model that is not loaded."""


@dataclass
class Classification:
    verdict: Verdict
    exit_phase: int
    phase_ms: dict[int, float]
    dga_score: float | None = None
    dga_fallback: bool = False
    feedback_action: str | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "exit_phase": self.exit_phase,
            "dga_score": self.dga_score,
            "phase_ms": {str(p): ms for p, ms in self.phase_ms.items()},
            "feedback_action": self.feedback_action,
        }


class LatencyAgg:
    """Count and mean over every sample; median and p95 over a bounded reservoir."""

    def __init__(self, capacity: int = LATENCY_RESERVOIR, seed: int = 0):
        self.count = 0
        self.total = 0.0
        self.capacity = capacity
        self.samples: list[float] = []
        self._rng = random.Random(seed)

    def add(self, ms: float) -> None:
        self.count += 1
        self.total += ms
        if len(self.samples) < self.capacity:
            self.samples.append(ms)
        else:
            j = self._rng.randrange(self.count)
            if j < self.capacity:
                self.samples[j] = ms

    def summary(self) -> dict:
        if not self.count:
            return {"count": 0, "mean": 0.0, "median": 0.0, "p95": 0.0}
        s = sorted(self.samples)
        return {"count": self.count, "mean": self.total / self.count,
                "median": _percentile(s, 50), "p95": _percentile(s, 95)}


def _percentile(sorted_vals: Sequence[float], q: float) -> float:
    """Linear-interpolated percentile of already sorted values."""
    pos = (len(sorted_vals) - 1) * q / 100.0
    lo = int(pos)
    hi = min(lo + 1, len(sorted_vals) - 1)
    return sorted_vals[lo] + (sorted_vals[hi] - sorted_vals[lo]) * (pos - lo)


class PipelineStats:
    """Counters for one run. ``record`` and ``snapshot`` share a lock, so a
    snapshot always satisfies processed(p+1) = processed(p) - exits(p)."""

    def __init__(self):
        self._lock = threading.Lock()
        self.total = 0
        self.errors = 0
        self.fallbacks = 0
        self.processed = dict.fromkeys(PHASES, 0)
        self.skipped = dict.fromkeys(PHASES, 0)
        self.exits_benign = dict.fromkeys(PHASES, 0)
        self.exits_infected = dict.fromkeys(PHASES, 0)
        self.latency = {p: LatencyAgg(seed=p) for p in PHASES}
        self.feedback = {"blacklisted": 0, "whitelisted": 0, "none": 0}

    def record(self, c: Classification) -> None:
        with self._lock:
            self.total += 1
            for p in PHASES[:c.exit_phase]:
                self.processed[p] += 1
                ms = c.phase_ms.get(p)
                if ms is None:
                    self.skipped[p] += 1
                else:
                    self.latency[p].add(ms)
            if c.verdict is Verdict.BENIGN:
                self.exits_benign[c.exit_phase] += 1
            else:
                self.exits_infected[c.exit_phase] += 1
            if c.dga_fallback:
                self.fallbacks += 1
            if c.feedback_action is not None:
                self.feedback[c.feedback_action] += 1

    def add_errors(self, n: int = 1) -> None:
        with self._lock:
            self.errors += n

    def snapshot(self) -> dict:
        """JSON-ready copy; key names are part of the public interface."""
        with self._lock:
            phases = {}
            for p in PHASES:
                exits = self.exits_benign[p] + self.exits_infected[p]
                phases[str(p)] = {
                    "processed": self.processed[p],
                    "skipped": self.skipped[p],
                    "exits_benign": self.exits_benign[p],
                    "exits_infected": self.exits_infected[p],
                    "exit_ratio": exits / self.total if self.total else 0.0,
                    "latency_ms": self.latency[p].summary(),
                }
            return {
                "total": self.total,
                "errors": self.errors,
                "benign": sum(self.exits_benign.values()),
                "infected": sum(self.exits_infected.values()),
                "phases": phases,
                "fallbacks": self.fallbacks,
                "feedback": dict(self.feedback),
            }


@dataclass
class PipelineConfig:
    rate: RateConfig = field(default_factory=RateConfig)
    thresholds: DgaThresholds = field(default_factory=DgaThresholds)
    feedback: bool = False


@dataclass
class PipelineContext:
    lists: DomainLists = field(default_factory=DomainLists)
    scorer: DgaScorer = field(default_factory=DgaScorer)
    forest: ForestModel | None = None
    config: PipelineConfig = field(default_factory=PipelineConfig)
    rate_store: RateStore = field(default_factory=RateStore)
    stats: PipelineStats = field(default_factory=PipelineStats)

    @property
    def ready(self) -> bool:
        return self.forest is not None and self.scorer.ready


_clock = time.perf_counter_ns


def process(record: DnsRequestRecord, ctx: PipelineContext, stats: Iterable[PipelineStats] | None = None) -> Classification:
    """Classify one record and update ``ctx.stats`` (plus any extra ``stats``).

    Raises NotReady when the record reaches a phase whose model is missing; stats
    are untouched in that case.
    """
    name = record.query_name
    times: dict[int, float] = {}
    cfg = ctx.config

    def done(verdict: Verdict, phase: int, score: float | None = None, fallback: bool = False) -> Classification:
        c = Classification(verdict, phase, times, score, fallback)
        if cfg.feedback and phase in (3, 4) and name:
            c.feedback_action = apply_feedback(c, name, ctx)
        ctx.stats.record(c)
        for s in stats or ():
            s.record(c)
        return c

    if name:
        t0 = _clock()
        v = ctx.lists.check(name)
        times[1] = (_clock() - t0) / 1e6
        if v is not Verdict.PASS:
            return done(v, 1)

    t0 = _clock()
    v = observe(record.src_ip, record.timestamp, cfg.rate, ctx.rate_store)
    times[2] = (_clock() - t0) / 1e6
    if v is Verdict.INFECTED:
        return done(v, 2)

    score = None
    fallback = False
    if name:
        if not ctx.scorer.ready:
            raise NotReady("no DGA scorer loaded")
        t0 = _clock()
        try:
            s, fallback = ctx.scorer.score(name)
        except (RemoteUnavailable, RemoteMalformed) as exc:
            raise NotReady(f"remote DGA scorer failed and no built-in model is loaded: {exc}") from exc
        v = decide(s, cfg.thresholds)
        times[3] = (_clock() - t0) / 1e6
        score = s.value
        if v is not Verdict.PASS:
            return done(v, 3, score, fallback)

    if ctx.forest is None:
        raise NotReady("no forest model loaded")
    t0 = _clock()
    label = predict(ctx.forest, extract_features(record))
    times[4] = (_clock() - t0) / 1e6
    return done(Verdict.INFECTED if label else Verdict.BENIGN, 4, score, fallback)


def apply_feedback(c: Classification, domain: str, ctx: PipelineContext) -> str:
    """Push a phase-3/4 verdict back into the lists; returns the action taken."""
    if c.exit_phase not in (3, 4):
        raise ValueError("feedback only applies to phase 3 and 4 exits")
    kind = ListKind.BLACKLIST if c.verdict is Verdict.INFECTED else ListKind.WHITELIST
    try:
        ctx.lists.update(kind, domain, Source.FEEDBACK)
    except (FeedbackWhitelistDisabled, InvalidDomain):
        return "none"
    return "blacklisted" if kind is ListKind.BLACKLIST else "whitelisted"


def process_stream(records: Iterable[DnsRequestRecord | dict[str, Any]],
                   ctx: PipelineContext) -> tuple[list[Classification], PipelineStats]:
    """Classify records in order. Dict items are validated first; bad ones are
    counted in the returned stats and skipped."""
    run = PipelineStats()
    out = []
    for item in records:
        if not isinstance(item, DnsRequestRecord):
            try:
                item = record_from_dict(item)
            except RecordError:
                run.add_errors()
                ctx.stats.add_errors()
                continue
        out.append(process(item, ctx, (run,)))
    return out, run


def shift_records(records: Sequence[DnsRequestRecord], offset: float) -> list[DnsRequestRecord]:
    return [replace(r, timestamp=r.timestamp + offset) for r in records]


def replay(records: Sequence[DnsRequestRecord], ctx: PipelineContext, passes: int,
           pause: float = 60.0) -> list[PipelineStats]:
    """Feed the same capture ``passes`` times through one context.

    Each pass is shifted to start ``pause`` seconds after the previous one ended,
    so per-source rate state sees time move forward as it would on a live link.
    """
    if passes < 1:
        raise ValueError("passes must be >= 1")
    if not records:
        return [process_stream([], ctx)[1] for _ in range(passes)]
    first = min(r.timestamp for r in records)
    span = max(r.timestamp for r in records) - first
    out = []
    for i in range(passes):
        _, st = process_stream(shift_records(records, i * (span + pause)), ctx)
        out.append(st)
    return out
