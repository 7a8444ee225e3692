"""Phase 3: DGA-likeness scores and the accept/reject thresholds.

The built-in scorer is a character-bigram language model over the registered
label of a name, fitted on benign domains. The mean negative log-likelihood per
bigram goes through a logistic curve whose midpoint sits at an upper quantile of
the training NLLs, so nearly all benign names land below 0.5.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import httpx
import numpy as np

from .dns_model import DEFAULT_SUFFIX_RULES, SuffixRules, registered_label
from .verdict import Verdict

MAGIC = "MONDEO-DGA-v1"
BOUNDARY = "^"
UNKNOWN = "?"
ALPHABET = BOUNDARY + "abcdefghijklmnopqrstuvwxyz0123456789-" + UNKNOWN
_INDEX = {c: i for i, c in enumerate(ALPHABET)}
_UNK = _INDEX[UNKNOWN]
MIN_CORPUS = 1000
# score given to a domain at the lower calibration quantile
LOW_QUANTILE_SCORE = 0.01
# keeps the curve finite on degenerate corpora whose NLLs barely spread
MIN_SPREAD = 0.25


class CorpusTooSmall(ValueError):
    pass


class RemoteUnavailable(Exception):
    pass


class RemoteMalformed(Exception):
    pass


@dataclass(frozen=True)
class DgaScore:
    value: float
    scorer_id: str

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"DGA score out of [0, 1]: {self.value}")


@dataclass(frozen=True)
class DgaThresholds:
    lower: float = 0.1
    upper: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.lower < self.upper <= 1.0:
            raise ValueError("DGA thresholds need 0 <= lower < upper <= 1")


def decide(score: DgaScore | float, thresholds: DgaThresholds = DgaThresholds()) -> Verdict:
    s = score.value if isinstance(score, DgaScore) else score
    if s <= thresholds.lower:
        return Verdict.BENIGN
    if s >= thresholds.upper:
        return Verdict.INFECTED
    return Verdict.PASS


def _encode(label: str) -> list[int]:
    return [_INDEX[BOUNDARY]] + [_INDEX.get(c, _UNK) for c in label] + [_INDEX[BOUNDARY]]


@dataclass
class BigramModel:
    log_probs: list[list[float]]
    smoothing: float
    midpoint: float
    steepness: float
    quantiles: tuple[float, float] = (0.5, 0.99)
    rules: SuffixRules = field(default=DEFAULT_SUFFIX_RULES, repr=False, compare=False)

    scorer_id = "bigram"

    def nll(self, label: str) -> float:
        """Mean negative log-likelihood per bigram of one label."""
        seq = _encode(label.lower())
        lp = self.log_probs
        total = 0.0
        for a, b in zip(seq, seq[1:]):
            total -= lp[a][b]
        return total / (len(seq) - 1)

    def calibrate(self, nll: float) -> float:
        z = self.steepness * (nll - self.midpoint)
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-z))
        e = math.exp(z)
        return e / (1.0 + e)

    def score(self, domain: str) -> DgaScore:
        return score_builtin(domain, self)

    def to_dict(self) -> dict:
        return {
            "magic": MAGIC,
            "alphabet": ALPHABET,
            "smoothing": self.smoothing,
            "calibration": {
                "midpoint": self.midpoint,
                "steepness": self.steepness,
                "quantiles": list(self.quantiles),
            },
            "log_probs": self.log_probs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> BigramModel:
        if d.get("magic") != MAGIC:
            raise ValueError(f"not a {MAGIC} model")
        if d.get("alphabet") != ALPHABET:
            raise ValueError("model alphabet does not match this version")
        cal = d["calibration"]
        return cls(
            log_probs=[[float(v) for v in row] for row in d["log_probs"]],
            smoothing=float(d["smoothing"]),
            midpoint=float(cal["midpoint"]),
            steepness=float(cal["steepness"]),
            quantiles=tuple(cal["quantiles"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> BigramModel:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def score_builtin(domain: str, model: BigramModel) -> DgaScore:
    label = registered_label(domain, model.rules)
    return DgaScore(model.calibrate(model.nll(label)), model.scorer_id)


def train_bigram(corpus: Sequence[str], smoothing: float = 0.01,
                 calibration_quantiles: tuple[float, float] = (0.5, 0.99),
                 rules: SuffixRules = DEFAULT_SUFFIX_RULES) -> BigramModel:
    """Fit an add-k smoothed bigram table on benign domains and calibrate it.

    The upper quantile of training NLLs becomes the 0.5 point; the lower quantile
    is mapped to ``LOW_QUANTILE_SCORE``, which fixes the steepness. When the two
    quantiles are closer than ``MIN_SPREAD`` the midpoint is pushed up to keep
    that gap.
    """
    if len(corpus) < MIN_CORPUS:
        raise CorpusTooSmall(f"need at least {MIN_CORPUS} domains, got {len(corpus)}")
    q_lo, q_hi = calibration_quantiles
    if not 0.0 <= q_lo < q_hi <= 1.0:
        raise ValueError("calibration quantiles need 0 <= low < high <= 1")
    if not smoothing > 0:
        raise ValueError("smoothing must be > 0")

    labels = [registered_label(d, rules) for d in corpus]
    v = len(ALPHABET)
    counts = np.zeros((v, v), dtype=np.float64)
    for lab in labels:
        seq = _encode(lab)
        np.add.at(counts, (seq[:-1], seq[1:]), 1.0)
    counts += smoothing
    probs = counts / counts.sum(axis=1, keepdims=True)
    log_probs = np.log(probs).tolist()

    model = BigramModel(log_probs, float(smoothing), 0.0, 1.0, (q_lo, q_hi), rules)
    nlls = np.array([model.nll(lab) for lab in labels])
    hi = float(np.quantile(nlls, q_hi))
    lo = float(np.quantile(nlls, q_lo))
    spread = max(hi - lo, MIN_SPREAD)
    # equals ``hi`` unless the floor kicked in
    model.midpoint = lo + spread
    model.steepness = math.log((1 - LOW_QUANTILE_SCORE) / LOW_QUANTILE_SCORE) / spread
    return model


def score_remote(domain: str, endpoint: str, timeout: float = 0.2,
                 client: httpx.Client | None = None) -> DgaScore:
    """Ask an external scorer. Wire contract: POST {"domain"} -> 200 {"score"}."""
    try:
        if client is not None:
            resp = client.post(endpoint, json={"domain": domain}, timeout=timeout)
        else:
            resp = httpx.post(endpoint, json={"domain": domain}, timeout=timeout)
    except httpx.HTTPError as exc:
        raise RemoteUnavailable(f"{endpoint}: {exc!r}") from exc
    if resp.status_code != 200:
        raise RemoteUnavailable(f"{endpoint}: HTTP {resp.status_code}")
    try:
        value = resp.json()["score"]
    except (ValueError, KeyError, TypeError) as exc:
        raise RemoteMalformed(f"{endpoint}: bad payload") from exc
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
        raise RemoteMalformed(f"{endpoint}: score {value!r} not a number in [0, 1]")
    return DgaScore(float(value), "remote")


class DgaScorer:
    """Remote scorer with built-in fallback. Counts how often the fallback fired."""

    def __init__(self, model: BigramModel | None = None, remote_url: str | None = None,
                 timeout: float = 0.2):
        self.model = model
        self.remote_url = remote_url
        self.timeout = timeout
        self.fallbacks = 0
        self._lock = threading.Lock()
        self._client = httpx.Client() if remote_url else None

    @property
    def ready(self) -> bool:
        return self.model is not None or self.remote_url is not None

    def score(self, domain: str) -> tuple[DgaScore, bool]:
        """Return the score and whether the built-in fallback produced it."""
        if self.remote_url:
            try:
                return score_remote(domain, self.remote_url, self.timeout, self._client), False
            except (RemoteUnavailable, RemoteMalformed):
                with self._lock:
                    self.fallbacks += 1
                if self.model is None:
                    raise
                return score_builtin(domain, self.model), True
        if self.model is None:
            raise RemoteUnavailable("no DGA scorer configured")
        return score_builtin(domain, self.model), False

    def close(self) -> None:
        if self._client is not None:
            self._client.close()


def roc_auc(negatives: Iterable[float], positives: Iterable[float]) -> float:
    """Probability a random positive outscores a random negative (ties count half)."""
    neg = np.sort(np.asarray(list(negatives), dtype=float))
    pos = np.asarray(list(positives), dtype=float)
    if neg.size == 0 or pos.size == 0:
        raise ValueError("need both positives and negatives")
    below = np.searchsorted(neg, pos, side="left")
    not_above = np.searchsorted(neg, pos, side="right")
    return float((below + 0.5 * (not_above - below)).sum() / (neg.size * pos.size))
