"""Multistage DNS botnet detection: lists, query rate, DGA score, random forest."""

from .dga import BigramModel, DgaScore, DgaThresholds, decide, score_builtin, train_bigram
from .dns_model import (
    DnsRequestRecord,
    FeatureVector,
    SuffixRules,
    extract_features,
    extract_fld,
    ip_to_u32,
    parse_wire_query,
)
from .forest import ForestModel, LabeledDataset, evaluate, predict, split_train_test, train_forest
from .lists import DomainList, DomainLists, check, load_list
from .pipeline import Classification, PipelineContext, PipelineStats, process, process_stream
from .rate import RateConfig, RateStore, observe
from .verdict import Verdict

__version__ = "0.1.0"

__all__ = [
    "BigramModel", "Classification", "DgaScore", "DgaThresholds", "DnsRequestRecord", "DomainList",
    "DomainLists", "FeatureVector", "ForestModel", "LabeledDataset", "PipelineContext", "PipelineStats",
    "RateConfig", "RateStore", "SuffixRules", "Verdict", "check", "decide", "evaluate",
    "extract_features", "extract_fld", "ip_to_u32", "load_list", "observe", "parse_wire_query",
    "predict", "process", "process_stream", "score_builtin", "split_train_test", "train_bigram",
    "train_forest",
]
