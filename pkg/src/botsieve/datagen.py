"""Synthetic DNS request captures.

Benign traffic queries popular-looking domains from a wordlist at a relaxed,
exponentially distributed pace. Infected traffic mimics a DGA botnet locating
its C2: bursts of back-to-back queries for random labels from a handful of
compromised devices using their own resolver.
"""

from __future__ import annotations

import math
import random
import string
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

from .dns_model import DnsRequestRecord, QueryType, RD_BIT, extract_features, wire_length
from .forest import LabeledDataset

DGA_TLDS = ("top", "ru", "cn", "com")
DGA_CHARS = string.ascii_lowercase + string.digits
BENIGN_PREFIXES = (("", 0.4), ("www.", 0.45), ("m.", 0.04), ("api.", 0.04),
                   ("cdn.", 0.03), ("mail.", 0.02), ("img.", 0.02))


class EmptyWordlist(ValueError):
    pass


class OddCount(ValueError):
    pass


def _pool(prefix: str, lo: int, hi: int) -> tuple[str, ...]:
    return tuple(f"{prefix}.{i}" for i in range(lo, hi + 1))


@dataclass(frozen=True)
class TrafficProfile:
    kind: str = "benign"
    n_packets: int = 1000
    seed: int = 0
    wordlist: str | Path | None = None
    burst_size: int = 50
    intra_gap: float = 0.01
    inter_gap: float = 30.0
    benign_mean_gap: float = 0.5
    benign_sources: tuple[str, ...] = field(default_factory=lambda: _pool("192.168.1", 10, 249))
    infected_sources: tuple[str, ...] = field(default_factory=lambda: _pool("10.0.2", 15, 18))
    benign_resolver: str = "192.168.1.1"
    infected_resolver: str = "10.0.2.3"
    start: float = 0.0
    time_span: float | None = None

    def __post_init__(self):
        if self.kind not in ("benign", "infected", "mixed"):
            raise ValueError(f"unknown traffic kind {self.kind!r}")
        if self.n_packets < 0:
            raise ValueError("n_packets must be >= 0")
        if self.burst_size < 1:
            raise ValueError("burst_size must be >= 1")
        if not 0 < self.intra_gap < self.inter_gap:
            raise ValueError("need 0 < intra_gap < inter_gap")
        if not self.benign_mean_gap > 0:
            raise ValueError("benign_mean_gap must be > 0")
        if not self.benign_sources or not self.infected_sources:
            raise ValueError("source pools must not be empty")


def load_wordlist(path: str | Path | None = None) -> list[str]:
    """Domains from ``path``, or the bundled 10k list when None."""
    if path is None:
        text = resources.files("botsieve").joinpath("data/benign_domains.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = [w.strip().lower() for w in text.splitlines()]
    return [w for w in words if w and not w.startswith("#")]


def gen_benign(profile: TrafficProfile, wordlist: Sequence[str] | None = None) -> list[DnsRequestRecord]:
    words = list(wordlist) if wordlist is not None else load_wordlist(profile.wordlist)
    if not words:
        raise EmptyWordlist("benign wordlist is empty")
    rng = random.Random(f"benign:{profile.seed}")
    prefixes = [p for p, _ in BENIGN_PREFIXES]
    weights = [w for _, w in BENIGN_PREFIXES]
    out = []
    t = profile.start
    for i in range(profile.n_packets):
        if i:
            t += rng.expovariate(1.0 / profile.benign_mean_gap)
        name = rng.choices(prefixes, weights)[0] + rng.choice(words)
        qtype = QueryType.A if rng.random() < 0.7 else QueryType.AAAA
        out.append(DnsRequestRecord(t, rng.choice(profile.benign_sources), profile.benign_resolver,
                                    wire_length(name), RD_BIT, 1, int(qtype), name))
    return out


def dga_domain(rng: random.Random) -> str:
    label = "".join(rng.choice(DGA_CHARS) for _ in range(rng.randint(8, 24)))
    return f"{label}.{rng.choice(DGA_TLDS)}"


def gen_infected(profile: TrafficProfile) -> list[DnsRequestRecord]:
    """Bursts of ``burst_size`` DGA queries from one infected source each.

    Without ``time_span``, consecutive bursts are ``inter_gap`` apart (jittered
    0.5-1.5x). With it, bursts are spread evenly over the span so the capture
    covers the same period as benign traffic.
    """
    rng = random.Random(f"infected:{profile.seed}")
    n = profile.n_packets
    n_bursts = math.ceil(n / profile.burst_size) if n else 0
    slot = profile.time_span / n_bursts if profile.time_span and n_bursts else None
    out: list[DnsRequestRecord] = []
    prev_end = None
    for b in range(n_bursts):
        if slot is not None:
            busy = profile.burst_size * profile.intra_gap
            t = profile.start + b * slot + rng.uniform(0.0, max(slot - busy, 0.0))
            if prev_end is not None:
                # bursts from one device must not run together
                t = max(t, prev_end + 10 * profile.intra_gap)
        elif prev_end is None:
            t = profile.start
        else:
            t = prev_end + profile.inter_gap * rng.uniform(0.5, 1.5)
        src = rng.choice(profile.infected_sources)
        for j in range(min(profile.burst_size, n - len(out))):
            if j:
                t += profile.intra_gap * rng.uniform(0.5, 1.0)
            name = dga_domain(rng)
            out.append(DnsRequestRecord(t, src, profile.infected_resolver, wire_length(name),
                                        RD_BIT, 1, int(QueryType.A), name))
        prev_end = t
    return out


def gen_mixed(profile: TrafficProfile) -> tuple[list[DnsRequestRecord], list[int]]:
    """Half benign, half infected over the same period, merged in time order."""
    n_benign = profile.n_packets // 2
    benign = gen_benign(replace(profile, n_packets=n_benign))
    span = benign[-1].timestamp - profile.start if benign else None
    infected = gen_infected(replace(profile, n_packets=profile.n_packets - n_benign, time_span=span or None))
    rows = sorted([(r, 0) for r in benign] + [(r, 1) for r in infected], key=lambda p: p[0].timestamp)
    return [r for r, _ in rows], [lab for _, lab in rows]


def generate(profile: TrafficProfile) -> tuple[list[DnsRequestRecord], list[int]]:
    """Records and labels for any profile kind."""
    if profile.kind == "benign":
        recs = gen_benign(profile)
        return recs, [0] * len(recs)
    if profile.kind == "infected":
        recs = gen_infected(profile)
        return recs, [1] * len(recs)
    return gen_mixed(profile)


def gen_labeled_dataset(n: int, seed: int = 0, wordlist: str | Path | None = None,
                        **profile_kw) -> tuple[list[DnsRequestRecord], list[int]]:
    """``n/2`` benign and ``n/2`` infected records spanning one time range, shuffled."""
    if n % 2:
        raise OddCount(f"n must be even, got {n}")
    records, labels = gen_mixed(TrafficProfile("mixed", n, seed, wordlist, **profile_kw))
    order = list(range(len(records)))
    random.Random(f"shuffle:{seed}").shuffle(order)
    return [records[i] for i in order], [labels[i] for i in order]


def as_dataset(records: Sequence[DnsRequestRecord], labels: Sequence[int], provenance: str = "") -> LabeledDataset:
    return LabeledDataset.from_rows(((extract_features(r), lab) for r, lab in zip(records, labels)), provenance)


def time_overlap(records: Sequence[DnsRequestRecord], labels: Sequence[int]) -> float:
    """Intersection over union of the two classes' [first, last] timestamp ranges."""
    spans = {}
    for c in (0, 1):
        ts = [r.timestamp for r, lab in zip(records, labels) if lab == c]
        if not ts:
            return 0.0
        spans[c] = (min(ts), max(ts))
    (a0, a1), (b0, b1) = spans[0], spans[1]
    union = max(a1, b1) - min(a0, b0)
    if union == 0:
        return 1.0
    return max(0.0, min(a1, b1) - max(a0, b0)) / union
