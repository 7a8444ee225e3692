"""Phase 2: per-source burst detection from inter-arrival times.

Each source keeps the timestamp of its previous packet and the length of the
current run of fast arrivals (gap <= delta_f). A packet is flagged once the run
reaches ``k`` packets. Slow gaps reset the run to 1.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Callable

from .verdict import Verdict


@dataclass(frozen=True)
class RateConfig:
    delta_f: float = 0.05
    k: int = 20
    max_idle_secs: float = 3600.0

    def __post_init__(self):
        if not self.delta_f >= 0:
            raise ValueError("rate.delta_f must be >= 0")
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 2:
            raise ValueError("rate.k must be an integer >= 2")
        if not self.max_idle_secs > 0:
            raise ValueError("rate.max_idle_secs must be > 0")


@dataclass
class SourceRateState:
    last_timestamp: float
    fast_count: int
    last_seen: float


class RateStore:
    """Per-source state, keyed by source address.

    ``clock`` supplies wall-clock seconds for idle eviction; it is unrelated to the
    packet timestamps that drive detection.
    """

    def __init__(self, clock: Callable[[], float] = time.monotonic):
        self.clock = clock
        self._states: dict[str, SourceRateState] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._states)

    def get(self, src: str) -> SourceRateState | None:
        return self._states.get(src)

    def clear(self) -> None:
        with self._lock:
            self._states.clear()


def observe(src: str, ts: float, cfg: RateConfig, store: RateStore) -> Verdict:
    """Record one packet from ``src`` and return INFECTED or PASS.

    Out-of-order timestamps are clamped to the previous one, i.e. counted as fast.
    """
    now = store.clock()
    with store._lock:
        st = store._states.get(src)
        if st is None:
            store._states[src] = SourceRateState(ts, 1, now)
            return Verdict.PASS
        if ts < st.last_timestamp:
            ts = st.last_timestamp
        if ts - st.last_timestamp <= cfg.delta_f:
            st.fast_count += 1
        else:
            st.fast_count = 1
        st.last_timestamp = ts
        st.last_seen = now
        flagged = st.fast_count >= cfg.k
    return Verdict.INFECTED if flagged else Verdict.PASS


def evict_stale(store: RateStore, max_idle: float) -> int:
    if not max_idle > 0:
        raise ValueError("max_idle must be > 0")
    cutoff = store.clock() - max_idle
    with store._lock:
        stale = [s for s, st in store._states.items() if st.last_seen < cutoff]
        for s in stale:
            del store._states[s]
    return len(stale)
