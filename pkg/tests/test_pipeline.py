import pytest
from hypothesis import given, settings, strategies as st

from botsieve.datagen import TrafficProfile, generate
from botsieve.dga import DgaScore, DgaScorer
from botsieve.forest import LEAF, DecisionTree, ForestModel
from botsieve.lists import DomainLists, ListKind
from botsieve.pipeline import (
    Classification, NotReady, PipelineConfig, PipelineContext, PipelineStats, apply_feedback,
    process, process_stream, replay,
)
from botsieve.verdict import Verdict

from conftest import make_record


class StubScorer(DgaScorer):
    """Fixed score per registered domain, default 0.5."""

    def __init__(self, scores=None, default=0.5):
        super().__init__()
        self.scores = scores or {}
        self.default = default

    @property
    def ready(self):
        return True

    def score(self, domain):
        label = domain.split(".")[-2] if "." in domain else domain
        return DgaScore(self.scores.get(label, self.default), "stub"), False


def stump_forest(infected_above=100.0):
    """Predicts infected iff payload length > ``infected_above``."""
    return ForestModel([DecisionTree([2, LEAF, LEAF], [infected_above, 0, 0], [1, -1, -1], [2, -1, -1],
                                     [0, 5, 0], [0, 0, 5])])


def ctx_with(scores=None, default=0.5, feedback=False, allow_wl=False, forest=True):
    return PipelineContext(
        lists=DomainLists(allow_feedback_whitelist=allow_wl),
        scorer=StubScorer(scores, default),
        forest=stump_forest() if forest else None,
        config=PipelineConfig(feedback=feedback),
    )


def test_blacklisted_exits_phase1():
    ctx = ctx_with()
    ctx.lists.update(ListKind.BLACKLIST, "evil.top")
    c = process(make_record("www.evil.top"), ctx)
    assert (c.verdict, c.exit_phase) == (Verdict.INFECTED, 1)
    assert set(c.phase_ms) == {1}


def test_high_dga_score_exits_phase3():
    c = process(make_record("xqzt81k.top"), ctx_with({"xqzt81k": 0.95}))
    assert (c.verdict, c.exit_phase, c.dga_score) == (Verdict.INFECTED, 3, 0.95)


def test_mid_score_forest_benign():
    c = process(make_record("maybe.com", length=60), ctx_with())
    assert (c.verdict, c.exit_phase) == (Verdict.BENIGN, 4)
    assert set(c.phase_ms) == {1, 2, 3, 4}
    c = process(make_record("maybe.com", ts=100, length=150), ctx_with())
    assert (c.verdict, c.exit_phase) == (Verdict.INFECTED, 4)


def test_null_name_skips_1_and_3():
    ctx = ctx_with()
    c = process(make_record(None), ctx)
    assert c.exit_phase == 4 and set(c.phase_ms) == {2, 4} and c.dga_score is None
    snap = ctx.stats.snapshot()
    assert snap["phases"]["1"]["processed"] == 1 and snap["phases"]["1"]["skipped"] == 1
    assert snap["phases"]["3"]["skipped"] == 1 and snap["phases"]["2"]["skipped"] == 0


def test_rate_flag_exits_phase2():
    ctx = ctx_with()
    out = [process(make_record("a.com", ts=i * 0.001), ctx) for i in range(25)]
    assert [c.exit_phase for c in out].count(2) == 25 - 19
    assert all(c.verdict is Verdict.INFECTED for c in out if c.exit_phase == 2)


def test_feedback_blacklists_then_phase1():
    ctx = ctx_with({"xqzt81k": 0.95}, feedback=True)
    first = process(make_record("xqzt81k.top"), ctx)
    assert first.feedback_action == "blacklisted"
    assert "xqzt81k.top" in ctx.lists.blacklist
    again = process(make_record("xqzt81k.top", ts=100), ctx)
    assert (again.verdict, again.exit_phase, again.feedback_action) == (Verdict.INFECTED, 1, None)


def test_feedback_benign_without_whitelist_flag():
    ctx = ctx_with(feedback=True)
    c = process(make_record("fine.com", length=60), ctx)
    assert (c.exit_phase, c.verdict, c.feedback_action) == (4, Verdict.BENIGN, "none")
    assert len(ctx.lists.whitelist) == 0
    assert ctx.stats.snapshot()["feedback"] == {"blacklisted": 0, "whitelisted": 0, "none": 1}


def test_feedback_benign_with_whitelist_flag():
    ctx = ctx_with({"fine": 0.01}, feedback=True, allow_wl=True)
    assert process(make_record("cdn.fine.com"), ctx).feedback_action == "whitelisted"
    assert ctx.lists.whitelist.entries() == ["fine.com"]


def test_feedback_rejects_phase1_exit():
    with pytest.raises(ValueError):
        apply_feedback(Classification(Verdict.INFECTED, 1, {}), "x.top", ctx_with())


def test_feedback_off_by_default():
    ctx = ctx_with({"xqzt81k": 0.95})
    process(make_record("xqzt81k.top"), ctx)
    assert len(ctx.lists.blacklist) == 0


def test_not_ready():
    ctx = ctx_with(forest=False)
    with pytest.raises(NotReady):
        process(make_record("maybe.com"), ctx)
    assert ctx.stats.snapshot()["total"] == 0
    ctx.lists.update(ListKind.BLACKLIST, "evil.top")
    assert process(make_record("evil.top"), ctx).exit_phase == 1
    assert not ctx.ready


def test_empty_stream():
    ctx = ctx_with()
    out, stats = process_stream([], ctx)
    snap = stats.snapshot()
    assert out == [] and snap["total"] == 0 and snap["errors"] == 0
    assert all(p["processed"] == 0 and p["latency_ms"]["count"] == 0 for p in snap["phases"].values())


def test_identical_blacklisted_stream():
    ctx = ctx_with()
    ctx.lists.update(ListKind.BLACKLIST, "evil.top")
    out, stats = process_stream([make_record("evil.top", ts=i) for i in range(30)], ctx)
    snap = stats.snapshot()
    assert snap["phases"]["1"]["exits_infected"] == 30
    assert [snap["phases"][p]["processed"] for p in "234"] == [0, 0, 0]


def test_stream_counts_invalid_dicts():
    ctx = ctx_with()
    out, stats = process_stream([{"ts": 1}, make_record("a.com")], ctx)
    assert len(out) == 1 and stats.snapshot()["errors"] == 1 and ctx.stats.snapshot()["errors"] == 1


def test_snapshot_keys():
    snap = PipelineStats().snapshot()
    assert set(snap) == {"total", "errors", "benign", "infected", "phases", "fallbacks", "feedback"}
    assert set(snap["phases"]) == {"1", "2", "3", "4"}
    assert set(snap["phases"]["1"]) == {"processed", "skipped", "exits_benign", "exits_infected",
                                        "exit_ratio", "latency_ms"}
    assert set(snap["phases"]["1"]["latency_ms"]) == {"count", "mean", "median", "p95"}


def test_replay_with_feedback_converges(bigram):
    recs, _ = generate(TrafficProfile("infected", 600, seed=2))
    ctx = PipelineContext(scorer=DgaScorer(bigram), forest=stump_forest(), config=PipelineConfig(feedback=True))
    runs = [s.snapshot() for s in replay(recs, ctx, 3)]
    p1 = [r["phases"]["1"]["exits_infected"] for r in runs]
    late = [sum(r["phases"][p]["exits_benign"] + r["phases"][p]["exits_infected"] for p in "34") for r in runs]
    assert p1[1] > p1[0]
    assert late[0] >= late[1] >= late[2]


# routing totality and attrition over arbitrary streams
names = st.one_of(st.none(), st.sampled_from(["a.com", "www.b.org", "zz9q.top", "c.co.uk", "evil.ru"]))
recs = st.lists(st.builds(lambda n, t, s, ln: make_record(n, ts=t, src=s, length=ln),
                          names, st.floats(0, 100), st.sampled_from(["1.1.1.1", "2.2.2.2"]),
                          st.integers(0, 200)), max_size=60)


@settings(max_examples=60, deadline=None)
@given(recs, st.booleans(), st.floats(0, 1))
def test_routing_invariants(stream, feedback, default):
    ctx = ctx_with({"evil": 0.99, "zz9q": 0.5}, default=default, feedback=feedback, allow_wl=True)
    ctx.lists.update(ListKind.WHITELIST, "a.com")
    out, stats = process_stream(sorted(stream, key=lambda r: r.timestamp), ctx)
    snap = stats.snapshot()
    assert len(out) == len(stream) == snap["total"]
    assert all(c.verdict in (Verdict.BENIGN, Verdict.INFECTED) for c in out)
    assert all(c.verdict is Verdict.INFECTED for c in out if c.exit_phase == 2)
    ph = snap["phases"]
    for p in (1, 2, 3):
        a, b = ph[str(p)], ph[str(p + 1)]
        assert b["processed"] == a["processed"] - a["exits_benign"] - a["exits_infected"]
        assert b["processed"] <= a["processed"]
    assert snap["benign"] + snap["infected"] == snap["total"]


def test_remote_down_falls_back_everywhere(bigram):
    import socket
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    dead = f"http://127.0.0.1:{s.getsockname()[1]}/"
    s.close()
    recs, _ = generate(TrafficProfile("benign", 40, seed=4))
    ctx = PipelineContext(scorer=DgaScorer(bigram, dead, 0.05), forest=stump_forest())
    out, stats = process_stream(recs, ctx)
    scored = [c for c in out if c.dga_score is not None]
    assert len(out) == 40 and scored
    assert all(c.dga_fallback for c in scored)
    assert stats.snapshot()["fallbacks"] == len(scored)
