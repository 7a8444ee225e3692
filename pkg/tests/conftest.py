from __future__ import annotations

import pytest

from botsieve import datagen
from botsieve.dga import train_bigram
from botsieve.dns_model import DnsRequestRecord, QueryType
from botsieve.forest import ForestParams, train_forest


def make_record(name="a.com", ts=0.0, src="10.1.1.1", dst="10.1.1.2", length=60,
                flags=0x0100, questions=1, qtype=QueryType.A) -> DnsRequestRecord:
    return DnsRequestRecord(ts, src, dst, length, flags, questions, int(qtype), name)


@pytest.fixture(scope="session")
def wordlist():
    return datagen.load_wordlist()


@pytest.fixture(scope="session")
def bigram(wordlist):
    return train_bigram(wordlist)


@pytest.fixture(scope="session")
def labeled_2k():
    recs, labels = datagen.gen_labeled_dataset(2000, seed=11)
    return datagen.as_dataset(recs, labels, "synthetic-2k")


@pytest.fixture(scope="session")
def small_forest(labeled_2k):
    return train_forest(labeled_2k, ForestParams(n_trees=15, seed=3))


ACCEPTANCE: list[tuple[str, bool, str]] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.append((name, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE, key=lambda r: int(r[0][1:])):
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}  {detail}")
