"""DNS request records, wire-format query parsing, FLD extraction and feature encoding."""

from __future__ import annotations

import csv
import gzip
import io
import json
import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import IO, Any, Iterable, Iterator, NamedTuple

HEADER = struct.Struct("!HHHHHH")
RD_BIT = 0x0100
QR_BIT = 0x8000
MAX_NAME = 253
MAX_LABEL = 63


class QueryType(IntEnum):
    A = 1
    CNAME = 5
    PTR = 12
    AAAA = 28


# --- errors -----------------------------------------------------------------

class DnsParseError(ValueError):
    """Base for per-packet wire parse failures; callers skip the packet."""


class TruncatedMessage(DnsParseError):
    pass


class MalformedLabel(DnsParseError):
    pass


class NotAQuery(DnsParseError):
    pass


class InvalidIp(ValueError):
    pass


class RecordError(ValueError):
    """An ingested record failed validation. ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


# --- records ----------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class DnsRequestRecord:
    timestamp: float
    src_ip: str
    dst_ip: str
    payload_length: int
    flags: int
    question_count: int
    query_type: int
    query_name: str | None = None

    def __post_init__(self):
        if not self.timestamp >= 0:
            raise RecordError("ts", "timestamp must be >= 0")
        if self.question_count < 0:
            raise RecordError("questions", "question count must be >= 0")
        if self.payload_length < 0:
            raise RecordError("length", "length must be >= 0")
        if not 0 <= self.flags <= 0xFFFF:
            raise RecordError("flags", "flags must fit in 16 bits")
        if self.query_name is not None:
            problem = name_problem(self.query_name)
            if problem:
                raise RecordError("qname", problem)


class FeatureVector(NamedTuple):
    src_ip_num: int
    dst_ip_num: int
    length: int
    dns_flag: int
    questions: int
    query_type_code: int
    qry_name_null: int
    timestamp: float


FEATURE_NAMES = FeatureVector._fields


def name_problem(name: str) -> str | None:
    """Return why ``name`` violates the domain-name invariants, or None if it is fine."""
    if not name:
        return "name is empty"
    if name.endswith("."):
        name = name[:-1]
    if not name or len(name) > MAX_NAME:
        return f"name length must be 1..{MAX_NAME}"
    for label in name.split("."):
        if not label:
            return "empty label"
        if len(label) > MAX_LABEL:
            return f"label longer than {MAX_LABEL}"
    return None


# --- IPv4 -------------------------------------------------------------------

def ip_to_u32(ip: str) -> int:
    parts = ip.split(".") if isinstance(ip, str) else ()
    if len(parts) != 4:
        raise InvalidIp(f"not a dotted-quad IPv4 address: {ip!r}")
    value = 0
    for p in parts:
        if not (p.isascii() and p.isdigit()) or len(p) > 3:
            raise InvalidIp(f"bad octet {p!r} in {ip!r}")
        octet = int(p)
        if octet > 255:
            raise InvalidIp(f"octet out of range in {ip!r}")
        value = (value << 8) | octet
    return value


def u32_to_ip(value: int) -> str:
    if not 0 <= value < 1 << 32:
        raise InvalidIp(f"value out of range: {value}")
    return ".".join(str((value >> s) & 0xFF) for s in (24, 16, 8, 0))


# --- FLD extraction ---------------------------------------------------------

_DEFAULT_SUFFIXES = """
com net org edu gov mil int info biz name pro mobi app dev io co me tv cc ws
xyz top site online club shop store live tech cloud blog news link click
ru cn uk de fr es it pt br nl be ch at se no dk fi pl cz sk hu ro gr ie
us ca mx ar cl jp kr in au nz za tr ua il ir sa ae sg hk tw my id th vn ph
co.uk org.uk ac.uk gov.uk ltd.uk plc.uk me.uk net.uk
com.br net.br org.br gov.br com.pt org.pt gov.pt edu.pt
com.au net.au org.au edu.au gov.au co.nz org.nz co.za org.za
co.jp ne.jp or.jp ac.jp co.kr or.kr co.in net.in org.in
com.cn net.cn org.cn gov.cn edu.cn com.hk com.tw com.sg com.my
com.mx com.ar com.tr com.ua com.ru org.ru net.ru co.il ac.il
"""


@dataclass(frozen=True)
class SuffixRules:
    """Set of public suffixes used to find the registered domain of a name."""

    suffixes: frozenset[str]

    def __post_init__(self):
        if not self.suffixes:
            raise ValueError("suffix rules must not be empty")
        for s in self.suffixes:
            if s != s.lower() or s.startswith(".") or not s:
                raise ValueError(f"bad suffix entry: {s!r}")

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> SuffixRules:
        out = set()
        for line in lines:
            line = line.split("//", 1)[0].strip().lower().lstrip(".")
            if line and not line.startswith(("!", "*")):
                out.add(line)
        return cls(frozenset(out))

    @classmethod
    def from_file(cls, path: str | Path) -> SuffixRules:
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)

    def __contains__(self, item: str) -> bool:
        return item in self.suffixes


DEFAULT_SUFFIX_RULES = SuffixRules.from_lines(_DEFAULT_SUFFIXES.split())


def _split_registered(fqdn: str, rules: SuffixRules) -> tuple[list[str], int]:
    """Labels of the normalized name plus the index where the registered domain starts."""
    labels = fqdn.lower().rstrip(".").split(".")
    n = len(labels)
    for i in range(1, n):
        if ".".join(labels[i:]) in rules.suffixes:
            return labels, i - 1
    return labels, max(n - 2, 0)


def extract_fld(fqdn: str, rules: SuffixRules = DEFAULT_SUFFIX_RULES) -> str:
    """Registered domain of ``fqdn``: the longest listed suffix plus one label.

    Falls back to the last two labels when no suffix matches.
    """
    labels, start = _split_registered(fqdn, rules)
    return ".".join(labels[start:])


def registered_label(fqdn: str, rules: SuffixRules = DEFAULT_SUFFIX_RULES) -> str:
    """The label just left of the public suffix (``google`` for ``www.google.co.uk``)."""
    labels, start = _split_registered(fqdn, rules)
    return labels[start]


# --- features ---------------------------------------------------------------

def extract_features(record: DnsRequestRecord) -> FeatureVector:
    return FeatureVector(
        ip_to_u32(record.src_ip),
        ip_to_u32(record.dst_ip),
        record.payload_length,
        1 if record.flags & RD_BIT else 0,
        record.question_count,
        int(record.query_type),
        0 if record.query_name else 1,
        record.timestamp,
    )


# --- wire format ------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class WireQuery:
    """Fields recoverable from the query message itself."""

    flags: int
    question_count: int
    query_type: int
    query_name: str | None

    def to_record(self, timestamp: float, src_ip: str, dst_ip: str, length: int) -> DnsRequestRecord:
        return DnsRequestRecord(timestamp, src_ip, dst_ip, length, self.flags,
                                self.question_count, self.query_type, self.query_name)


def parse_wire_query(data: bytes) -> WireQuery:
    """Decode the header and first question of a DNS query message.

    Compression pointers are rejected since queries have no earlier names to point at.
    """
    if len(data) < HEADER.size:
        raise TruncatedMessage(f"{len(data)} octets, header needs {HEADER.size}")
    _, flags, qdcount, _, _, _ = HEADER.unpack_from(data)
    if flags & QR_BIT:
        raise NotAQuery("QR bit set")
    if qdcount == 0:
        return WireQuery(flags, 0, 0, None)

    pos = HEADER.size
    labels = []
    total = 0
    while True:
        if pos >= len(data):
            raise MalformedLabel("name runs past end of message")
        n = data[pos]
        pos += 1
        if n == 0:
            break
        if n & 0xC0 == 0xC0:
            raise MalformedLabel("compression pointer in question name")
        if n > MAX_LABEL:
            raise MalformedLabel(f"label length {n} > {MAX_LABEL}")
        if pos + n > len(data):
            raise MalformedLabel("label runs past end of message")
        raw = data[pos:pos + n]
        pos += n
        if not raw.isascii() or b"." in raw:
            raise MalformedLabel("label is not printable ASCII without dots")
        labels.append(raw.decode("ascii"))
        total += n + 1
        if total - 1 > MAX_NAME:
            raise MalformedLabel(f"name longer than {MAX_NAME}")
    if pos + 4 > len(data):
        raise TruncatedMessage("question section truncated before QTYPE/QCLASS")
    qtype = int.from_bytes(data[pos:pos + 2], "big")
    return WireQuery(flags, qdcount, qtype, ".".join(labels) or None)


def encode_query(name: str | None, qtype: int = QueryType.A, flags: int = RD_BIT,
                 question_count: int = 1, qid: int = 0, qclass: int = 1) -> bytes:
    """Build a query message. Every question repeats ``name``; ``None`` encodes the root."""
    out = bytearray(HEADER.pack(qid, flags, question_count, 0, 0, 0))
    qname = bytearray()
    for label in (name.rstrip(".").split(".") if name else []):
        raw = label.encode("ascii")
        qname.append(len(raw))
        qname += raw
    qname.append(0)
    question = bytes(qname) + struct.pack("!HH", qtype, qclass)
    for _ in range(question_count):
        out += question
    return bytes(out)


def wire_length(name: str | None) -> int:
    """Size in octets of a single-question query for ``name`` (no EDNS)."""
    body = len(name.rstrip(".")) + 2 if name else 1
    return HEADER.size + body + 4


# --- ingestion formats ------------------------------------------------------

FIELDS = ("ts", "src_ip", "dst_ip", "length", "flags", "questions", "qtype", "qname")


def _qtype_from(value: Any) -> int:
    if isinstance(value, str):
        v = value.strip().upper()
        if v in QueryType.__members__:
            return int(QueryType[v])
        if v.isdigit():
            value = int(v)
        else:
            raise RecordError("qtype", f"unknown query type {value!r}")
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value <= 0xFFFF:
        raise RecordError("qtype", "must be A, AAAA, CNAME, PTR or an integer code")
    return value


def _int_field(d: dict, key: str) -> int:
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise RecordError(key, "must be an integer")
    return v


def record_from_dict(d: Any) -> DnsRequestRecord:
    """Validate one JSON Lines object into a record.

    Raises RecordError naming the first bad field; IPv6 endpoints are rejected.
    """
    if not isinstance(d, dict):
        raise RecordError("record", "must be a JSON object")
    for key in FIELDS:
        if key not in d:
            raise RecordError(key, "missing")
    ts = d["ts"]
    if isinstance(ts, bool) or not isinstance(ts, (int, float)):
        raise RecordError("ts", "must be a number")
    for key in ("src_ip", "dst_ip"):
        if not isinstance(d[key], str):
            raise RecordError(key, "must be a string")
        try:
            ip_to_u32(d[key])
        except InvalidIp as exc:
            raise RecordError(key, str(exc)) from None
    qname = d["qname"]
    if qname is not None and not isinstance(qname, str):
        raise RecordError("qname", "must be a string or null")
    if qname == "":
        qname = None
    return DnsRequestRecord(
        float(ts), d["src_ip"], d["dst_ip"], _int_field(d, "length"),
        _int_field(d, "flags"), _int_field(d, "questions"), _qtype_from(d["qtype"]), qname,
    )


def record_to_dict(record: DnsRequestRecord, label: int | None = None) -> dict:
    try:
        qtype: int | str = QueryType(record.query_type).name
    except ValueError:
        qtype = record.query_type
    d = {
        "ts": record.timestamp,
        "src_ip": record.src_ip,
        "dst_ip": record.dst_ip,
        "length": record.payload_length,
        "flags": record.flags,
        "questions": record.question_count,
        "qtype": qtype,
        "qname": record.query_name,
    }
    if label is not None:
        d["label"] = label
    return d


def _label_from(d: dict) -> int | None:
    lab = d.get("label")
    if lab is None or lab == "":
        return None
    lab = int(lab)
    if lab not in (0, 1):
        raise RecordError("label", "must be 0 or 1")
    return lab


@dataclass
class Ingested:
    """Records read from a file, their labels (None when unlabeled) and the skip count."""

    records: list[DnsRequestRecord]
    labels: list[int | None]
    errors: int = 0


def _open_text(path: str | Path, mode: str = "rt") -> IO[str]:
    if str(path).endswith(".gz"):
        return gzip.open(path, mode, encoding="utf-8")
    return open(path, mode.replace("t", ""), encoding="utf-8", newline="" if "w" in mode else None)


def iter_jsonl(lines: Iterable[str]) -> Iterator[tuple[DnsRequestRecord, int | None] | RecordError]:
    """Yield (record, label) pairs, or a RecordError for each bad non-blank line."""
    for line in lines:
        line = line.strip()
        if not line:
            continue
        try:
            d = json.loads(line)
            yield record_from_dict(d), _label_from(d)
        except json.JSONDecodeError as exc:
            yield RecordError("line", f"invalid JSON: {exc.msg}")
        except (RecordError, ValueError, TypeError) as exc:
            yield exc if isinstance(exc, RecordError) else RecordError("record", str(exc))


def _collect(items: Iterable) -> Ingested:
    out = Ingested([], [])
    for item in items:
        if isinstance(item, RecordError):
            out.errors += 1
        else:
            out.records.append(item[0])
            out.labels.append(item[1])
    return out


def read_jsonl(path: str | Path) -> Ingested:
    with _open_text(path) as fh:
        return _collect(iter_jsonl(fh))


def _csv_rows(fh: IO[str]) -> Iterator[tuple[DnsRequestRecord, int | None] | RecordError]:
    reader = csv.DictReader(fh)
    for row in reader:
        try:
            d: dict[str, Any] = dict(row)
            missing = [k for k in FIELDS if k not in d or d[k] is None]
            if missing:
                raise RecordError(missing[0], "missing")
            d["ts"] = float(d["ts"])
            for k in ("length", "flags", "questions"):
                d[k] = int(d[k])
            d["qname"] = d["qname"] or None
            yield record_from_dict(d), _label_from(d)
        except RecordError as exc:
            yield exc
        except (ValueError, TypeError) as exc:
            yield RecordError("row", str(exc))


def read_csv(path: str | Path) -> Ingested:
    with _open_text(path) as fh:
        return _collect(_csv_rows(fh))


def read_records(path: str | Path) -> Ingested:
    """Read JSON Lines or CSV (chosen by extension, ``.gz`` allowed)."""
    name = str(path)
    base = name[:-3] if name.endswith(".gz") else name
    return read_csv(path) if base.endswith(".csv") else read_jsonl(path)


def write_jsonl(records: Iterable[DnsRequestRecord], path: str | Path | IO[str],
                labels: Iterable[int | None] | None = None) -> int:
    labels_it = iter(labels) if labels is not None else None
    n = 0
    fh = path if isinstance(path, io.TextIOBase) else _open_text(path, "wt")
    try:
        for rec in records:
            lab = next(labels_it) if labels_it is not None else None
            fh.write(json.dumps(record_to_dict(rec, lab), separators=(",", ":")) + "\n")
            n += 1
    finally:
        if fh is not path:
            fh.close()
    return n


def write_csv(records: Iterable[DnsRequestRecord], path: str | Path,
              labels: Iterable[int | None] | None = None) -> int:
    labels_it = iter(labels) if labels is not None else None
    n = 0
    with _open_text(path, "wt") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELDS + (("label",) if labels_it is not None else ()))
        for rec in records:
            d = record_to_dict(rec)
            row = [d[k] if d[k] is not None else "" for k in FIELDS]
            if labels_it is not None:
                row.append(next(labels_it))
            w.writerow(row)
            n += 1
    return n


# --- raw length-prefixed messages ------------------------------------------

def iter_raw_messages(stream: IO[bytes]) -> Iterator[bytes]:
    """Split a stream of 4-byte big-endian length-prefixed messages.

    A trailing partial frame raises TruncatedMessage.
    """
    while True:
        head = stream.read(4)
        if not head:
            return
        if len(head) < 4:
            raise TruncatedMessage("partial length prefix at end of stream")
        (n,) = struct.unpack("!I", head)
        body = stream.read(n)
        if len(body) < n:
            raise TruncatedMessage("partial message at end of stream")
        yield body


def write_raw_messages(messages: Iterable[bytes], stream: IO[bytes]) -> None:
    for m in messages:
        stream.write(struct.pack("!I", len(m)))
        stream.write(m)


def read_raw(messages_path: str | Path, sidecar_path: str | Path) -> Ingested:
    """Join raw query messages with their capture context.

    The sidecar is a JSON array with one ``{"ts", "src_ip", "dst_ip"}`` object per
    message, in stream order. Unparseable messages and bad context are skipped and counted.
    """
    with open(sidecar_path, encoding="utf-8") as fh:
        context = json.load(fh)
    if not isinstance(context, list):
        raise RecordError("sidecar", "must be a JSON array")
    out = Ingested([], [])
    with open(messages_path, "rb") as fh:
        for i, msg in enumerate(iter_raw_messages(fh)):
            try:
                ctx = context[i]
                q = parse_wire_query(msg)
                rec = record_from_dict({
                    "ts": ctx["ts"], "src_ip": ctx["src_ip"], "dst_ip": ctx["dst_ip"],
                    "length": len(msg), "flags": q.flags, "questions": q.question_count,
                    "qtype": q.query_type, "qname": q.query_name,
                })
            except (DnsParseError, RecordError, IndexError, KeyError, TypeError):
                out.errors += 1
                continue
            out.records.append(rec)
            out.labels.append(None)
    return out
