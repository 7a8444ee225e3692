import io
import statistics
import time

import pytest
from hypothesis import given, strategies as st

from botsieve.dns_model import extract_fld
from botsieve.lists import (
    DomainList, DomainLists, FeedbackWhitelistDisabled, InvalidDomain, ListIOError, ListKind,
    Source, check, load_list, update_list,
)
from botsieve.verdict import Verdict

W, B = ListKind.WHITELIST, ListKind.BLACKLIST


def test_check_examples():
    wl = DomainList(W, ["netflix.com"])
    assert check("api-global.netflix.com", wl, DomainList(B)) is Verdict.BENIGN
    assert check("anything.example", DomainList(W), DomainList(B)) is Verdict.PASS
    both = "evil-dga.top"
    assert check("x.evil-dga.top", DomainList(W, [both]), DomainList(B, [both])) is Verdict.INFECTED


def test_update_examples():
    lists = DomainLists()
    update_list(lists, B, "c2domain.ru")
    assert lists.check("c2domain.ru") is Verdict.INFECTED
    assert lists.check("www.c2domain.ru") is Verdict.INFECTED

    rev = lists.whitelist.revision
    with pytest.raises(FeedbackWhitelistDisabled):
        lists.update(W, "netflix.com", Source.FEEDBACK)
    assert lists.whitelist.entries() == [] and lists.whitelist.revision == rev

    lists.update(W, "c2domain.ru", Source.MANUAL)
    assert "c2domain.ru" not in lists.blacklist
    assert lists.whitelist.entries() == ["c2domain.ru"]
    assert lists.check("c2domain.ru") is Verdict.BENIGN


def test_feedback_never_overrides_manual():
    lists = DomainLists(allow_feedback_whitelist=True)
    lists.update(W, "bank.pt", Source.MANUAL)
    lists.update(B, "bank.pt", Source.FEEDBACK)
    assert lists.check("bank.pt") is Verdict.BENIGN
    lists.update(B, "evil.top", Source.FEEDBACK)
    lists.update(W, "evil.top", Source.FEEDBACK)
    assert lists.check("evil.top") is Verdict.INFECTED
    lists.update(W, "ok.com", Source.FEEDBACK)
    assert lists.whitelist.source_of("ok.com") is Source.FEEDBACK
    lists.update(W, "ok.com", Source.MANUAL)
    assert lists.whitelist.source_of("ok.com") is Source.MANUAL


def test_revisions_and_remove():
    lists = DomainLists()
    assert lists.update(B, "a.top") == 1
    assert lists.update(B, "b.top") == 2
    assert lists.remove(B, "a.top") == 3
    assert lists.remove(B, "a.top") == 3
    assert lists.blacklist.entries() == ["b.top"]


def test_invalid_domain():
    with pytest.raises(InvalidDomain):
        DomainLists().update(B, "bad domain.com")
    with pytest.raises(InvalidDomain):
        DomainLists().update(B, "")


def test_load_list_examples(tmp_path):
    lst = load_list(io.StringIO("Netflix.COM\n# comment\nftl.netflix.com\n"), W)
    assert lst.entries() == ["netflix.com"]
    p = tmp_path / "empty.txt"
    p.write_text("")
    assert len(load_list(p)) == 0
    with pytest.raises(ListIOError):
        load_list(tmp_path / "missing.txt")
    with pytest.raises(OSError):
        load_list(tmp_path / "missing.txt")


def test_load_list_skips_bad_lines():
    lst = load_list(io.StringIO("good.com\nbad domain\n" + "x" * 70 + ".com\n"))
    assert lst.entries() == ["good.com"] and lst.skipped_lines == 2


def test_save_roundtrip(tmp_path):
    lists = DomainLists()
    for d in ("b.top", "a.ru", "www.c.com"):
        lists.update(B, d)
    lists.blacklist.save(tmp_path / "bl.txt")
    assert load_list(tmp_path / "bl.txt").entries() == ["a.ru", "b.top", "c.com"]


def test_load_time_conflict_resolved_to_blacklist():
    lists = DomainLists(DomainList(W, ["x.com", "y.com"]), DomainList(B, ["x.com"]))
    assert lists.whitelist.entries() == ["y.com"] and lists.check("x.com") is Verdict.INFECTED


domains = st.builds(lambda a, b: f"{a}.{b}", st.text("abcdef", min_size=1, max_size=3),
                    st.sampled_from(["com", "top", "co.uk", "ru"]))
ops = st.lists(st.tuples(st.sampled_from([W, B]), domains, st.sampled_from(list(Source))), max_size=60)


@given(ops)
def test_lists_stay_disjoint(seq):
    lists = DomainLists(allow_feedback_whitelist=True)
    for kind, d, src in seq:
        lists.update(kind, d, src)
        assert not set(lists.whitelist.entries()) & set(lists.blacklist.entries())


@given(ops, st.text("xyz", min_size=1, max_size=4), domains)
def test_check_is_fld_invariant(seq, prefix, d):
    lists = DomainLists(allow_feedback_whitelist=True)
    for kind, dom, src in seq:
        lists.update(kind, dom, src)
    assert lists.check(f"{prefix}.{d}") is lists.check(extract_fld(d))


def _median_check_ns(n):
    lst = DomainList(B, (f"d{i}.com" for i in range(n)))
    empty = DomainList(W)
    probes = [f"www.d{i * 7 % n}.com" for i in range(2000)] + [f"miss{i}.org" for i in range(2000)]
    samples = []
    for _ in range(5):
        t0 = time.perf_counter_ns()
        for p in probes:
            check(p, empty, lst)
        samples.append((time.perf_counter_ns() - t0) / len(probes))
    return statistics.median(samples)


def test_check_cost_constant_in_list_size():
    small, large = _median_check_ns(100), _median_check_ns(100_000)
    assert large <= 2 * small
