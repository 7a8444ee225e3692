"""Phase 1: whitelist/blacklist lookup on registered domains.

Entries are stored already FLD-stripped in a dict keyed by domain, so a check is a
constant number of hash probes regardless of list size.
"""

from __future__ import annotations

import logging
import os
import threading
from enum import Enum
from pathlib import Path
from typing import IO, Iterable

from .dns_model import DEFAULT_SUFFIX_RULES, SuffixRules, extract_fld, name_problem
from .verdict import Verdict

log = logging.getLogger(__name__)


class ListKind(str, Enum):
    WHITELIST = "whitelist"
    BLACKLIST = "blacklist"


class Source(str, Enum):
    MANUAL = "manual"
    FEEDBACK = "feedback"


class FeedbackWhitelistDisabled(Exception):
    """A feedback-sourced whitelist insert arrived while feedback whitelisting is off."""


class ListIOError(OSError):
    pass


class InvalidDomain(ValueError):
    pass


class DomainList:
    """One hash-keyed list of registered domains, each tagged with its source."""

    def __init__(self, kind: ListKind | str, entries: Iterable[str] = (),
                 source: Source = Source.MANUAL, rules: SuffixRules = DEFAULT_SUFFIX_RULES):
        self.kind = ListKind(kind)
        self.rules = rules
        self._entries: dict[str, Source] = {}
        self.revision = 0
        self.skipped_lines = 0
        for e in entries:
            self._entries[normalize_domain(e, rules)] = source

    def __contains__(self, fld: str) -> bool:
        return fld in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> list[str]:
        return sorted(self._entries)

    def source_of(self, fld: str) -> Source | None:
        return self._entries.get(fld)

    def save(self, path: str | Path) -> None:
        tmp = Path(str(path) + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(f"# {self.kind.value}, revision {self.revision}\n")
            for d in self.entries():
                fh.write(d + "\n")
        os.replace(tmp, path)


def normalize_domain(domain: str, rules: SuffixRules = DEFAULT_SUFFIX_RULES) -> str:
    if not isinstance(domain, str):
        raise InvalidDomain("domain must be a string")
    d = domain.strip()
    problem = name_problem(d)
    if problem or any(c.isspace() for c in d):
        raise InvalidDomain(f"invalid domain {domain!r}: {problem or 'contains whitespace'}")
    return extract_fld(d, rules)


def check(domain: str, whitelist: DomainList, blacklist: DomainList,
          rules: SuffixRules = DEFAULT_SUFFIX_RULES) -> Verdict:
    """Blacklist first, then whitelist; anything else passes on."""
    fld = extract_fld(domain, rules)
    if fld in blacklist:
        return Verdict.INFECTED
    if fld in whitelist:
        return Verdict.BENIGN
    return Verdict.PASS


class DomainLists:
    """The whitelist/blacklist pair and the rules keeping them disjoint.

    Writers serialize on one lock. Readers take no lock: each mutation swaps a single
    dict entry, so a concurrent check sees the list either before or after it.
    """

    def __init__(self, whitelist: DomainList | None = None, blacklist: DomainList | None = None,
                 allow_feedback_whitelist: bool = False, rules: SuffixRules = DEFAULT_SUFFIX_RULES):
        self.rules = rules
        self.whitelist = whitelist if whitelist is not None else DomainList(ListKind.WHITELIST, rules=rules)
        self.blacklist = blacklist if blacklist is not None else DomainList(ListKind.BLACKLIST, rules=rules)
        self.allow_feedback_whitelist = allow_feedback_whitelist
        self._lock = threading.Lock()
        # entries in both lists at load time: blacklist wins
        for fld in [d for d in self.whitelist._entries if d in self.blacklist._entries]:
            del self.whitelist._entries[fld]

    def get(self, kind: ListKind | str) -> DomainList:
        return self.whitelist if ListKind(kind) is ListKind.WHITELIST else self.blacklist

    def check(self, domain: str) -> Verdict:
        return check(domain, self.whitelist, self.blacklist, self.rules)

    def update(self, kind: ListKind | str, domain: str, source: Source | str = Source.MANUAL) -> int:
        """Insert the FLD of ``domain`` and return the target list's revision.

        Manual inserts move an entry out of the opposite list. Feedback inserts never
        displace a manual entry, and a feedback whitelist insert never displaces a
        blacklist entry; both are ignored without bumping the revision.
        """
        kind, source = ListKind(kind), Source(source)
        fld = normalize_domain(domain, self.rules)
        target = self.get(kind)
        other = self.blacklist if target is self.whitelist else self.whitelist
        if kind is ListKind.WHITELIST and source is Source.FEEDBACK and not self.allow_feedback_whitelist:
            raise FeedbackWhitelistDisabled(fld)
        with self._lock:
            if source is Source.FEEDBACK:
                if target._entries.get(fld) is Source.MANUAL:
                    return target.revision
                if fld in other._entries and (
                        other._entries[fld] is Source.MANUAL or kind is ListKind.WHITELIST):
                    return target.revision
            if fld in other._entries:
                del other._entries[fld]
                other.revision += 1
            target._entries[fld] = source
            target.revision += 1
            return target.revision

    def remove(self, kind: ListKind | str, domain: str) -> int:
        fld = normalize_domain(domain, self.rules)
        target = self.get(kind)
        with self._lock:
            if target._entries.pop(fld, None) is not None:
                target.revision += 1
            return target.revision


def update_list(lists: DomainLists, kind: ListKind | str, domain: str,
                source: Source | str = Source.MANUAL) -> int:
    return lists.update(kind, domain, source)


def load_list(src: str | Path | IO[str], kind: ListKind | str = ListKind.BLACKLIST,
              rules: SuffixRules = DEFAULT_SUFFIX_RULES) -> DomainList:
    """Read a newline-delimited domain file; ``#`` starts a comment.

    Bad lines are skipped and counted in ``skipped_lines``.
    """
    if isinstance(src, (str, Path)):
        try:
            with open(src, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except (OSError, UnicodeDecodeError) as exc:
            raise ListIOError(f"cannot read list {src}: {exc}") from exc
    else:
        lines = src.read().splitlines()
    out = DomainList(kind, rules=rules)
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out._entries[normalize_domain(line, rules)] = Source.MANUAL
        except InvalidDomain:
            out.skipped_lines += 1
    log.info("loaded %d %s entries (%d lines skipped)", len(out), out.kind.value, out.skipped_lines)
    return out
