"""Merged CS tables, subject/ECS indexes and the on-disk database format.

Layout of a database directory::

    catalog                 JSON metadata
    dict                    term dictionary
    ecs.idx                 (from_table, property, to_table) links
    tables/<id>/subject.bin subject ids, little-endian u64
    tables/<id>/<prop>.bin  one file per property column

Every file starts with a 20-byte header ``magic, version, kind, payload
length, crc32``; the CRC covers the rest of the header and the payload, so any
flipped byte is reported as a checksum failure for that file.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .cs import CharacteristicSet, index_css
from .errors import (
    CorruptFileError,
    FormatVersionError,
    NotADatabaseError,
    StorageError,
    UnknownColumnError,
)
from .ingest import DatasetStats, Term, TermDictionary, TermKind
from .merge import MergePlan

FORMAT_VERSION = 1
MAGIC = b"RXDB"
_HEADER = struct.Struct("<4sHHQI")
_KIND_CATALOG, _KIND_DICT, _KIND_SUBJECT, _KIND_COLUMN, _KIND_ECS = 1, 2, 3, 4, 5
_TERM_KINDS = [TermKind.IRI, TermKind.LITERAL, TermKind.BNODE]


@dataclass
class Column:
    """CSR-style value lists; a row with an empty list is NULL."""

    offsets: np.ndarray  # int64, len = rows + 1
    values: np.ndarray  # int64

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    @cached_property
    def row_of_value(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.offsets) - 1, dtype=np.int64), self.lengths)

    @property
    def null_count(self) -> int:
        return int(np.count_nonzero(self.lengths == 0))

    @property
    def is_multi_valued(self) -> bool:
        return bool(len(self.values)) and int(self.lengths.max()) > 1

    def cell(self, row: int) -> Optional[list[int]]:
        lo, hi = self.offsets[row], self.offsets[row + 1]
        return self.values[lo:hi].tolist() if hi > lo else None


@dataclass
class MergedTable:
    table_id: int
    columns: tuple[int, ...]
    subjects: np.ndarray
    cells: dict[int, Column]
    base: Optional[int]  # None for the residual table
    members: tuple[int, ...] = ()
    residual: bool = False

    @property
    def property_set(self) -> frozenset[int]:
        return frozenset(self.columns)

    @property
    def row_count(self) -> int:
        return len(self.subjects)

    @property
    def multi_valued(self) -> frozenset[int]:
        return frozenset(p for p, c in self.cells.items() if c.is_multi_valued)

    def null_cells(self) -> int:
        return sum(c.null_count for c in self.cells.values())

    def column(self, prop: int) -> Column:
        try:
            return self.cells[prop]
        except KeyError:
            raise UnknownColumnError(f"table {self.table_id} has no column for property {prop}") from None

    def meta(self) -> "TableMeta":
        return TableMeta(
            self.table_id, self.columns, tuple(sorted(self.multi_valued)), self.row_count,
            self.residual, self.base, self.members,
        )


@dataclass
class TableMeta:
    table_id: int
    columns: tuple[int, ...]
    multi_valued: tuple[int, ...]
    row_count: int
    residual: bool
    base: Optional[int]
    members: tuple[int, ...]

    @property
    def property_set(self) -> frozenset[int]:
        return frozenset(self.columns)


@dataclass
class Catalog:
    tables: list[TableMeta]
    m: Optional[float] = None
    algorithm: str = "none"
    type_iri: Optional[str] = None
    stats: DatasetStats = field(default_factory=DatasetStats)
    cs_count: int = 0

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "m": self.m,
            "algorithm": self.algorithm,
            "type_iri": self.type_iri,
            "cs_count": self.cs_count,
            "stats": self.stats.to_json(),
            "tables": [
                {
                    "id": t.table_id,
                    "columns": list(t.columns),
                    "multi_valued": list(t.multi_valued),
                    "rows": t.row_count,
                    "residual": t.residual,
                    "base": t.base,
                    "members": list(t.members),
                }
                for t in self.tables
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Catalog":
        tables = [
            TableMeta(
                t["id"], tuple(t["columns"]), tuple(t["multi_valued"]), t["rows"],
                t["residual"], t["base"], tuple(t["members"]),
            )
            for t in obj["tables"]
        ]
        return cls(tables, obj["m"], obj["algorithm"], obj["type_iri"],
                   DatasetStats.from_json(obj["stats"]), obj.get("cs_count", 0))


@dataclass(frozen=True)
class EcsIndex:
    links: frozenset[tuple[int, int, int]]  # (from_table, property, to_table)

    @cached_property
    def pairs(self) -> frozenset[tuple[int, int]]:
        return frozenset((a, b) for a, _, b in self.links)

    def linked(self, from_table: int, to_table: int) -> bool:
        return (from_table, to_table) in self.pairs

    def __len__(self) -> int:
        return len(self.links)


def _build_table(table_id, columns, recs, base, members, residual) -> MergedTable:
    subjects = np.fromiter((r.subject for r in recs), dtype=np.int64, count=len(recs))
    cells: dict[int, Column] = {}
    for p in columns:
        lengths = np.zeros(len(recs) + 1, dtype=np.int64)
        vals: list[int] = []
        for i, r in enumerate(recs):
            v = r.values.get(p)
            if v:
                lengths[i + 1] = len(v)
                vals.extend(v)
        cells[p] = Column(np.cumsum(lengths), np.asarray(vals, dtype=np.int64))
    return MergedTable(table_id, tuple(columns), subjects, cells, base, tuple(members), residual)


def materialize(plan: MergePlan, css) -> tuple[list[MergedTable], Catalog]:
    """One table per plan group (columns = base properties) plus the residual.

    Rows are the base records followed by each member's records in member id
    order; member rows hold NULL for the base properties they lack.
    """
    idx: Mapping[int, CharacteristicSet] = css if isinstance(css, Mapping) else index_css(css)
    tables: list[MergedTable] = []
    for g in sorted(plan.groups, key=lambda g: g.base):
        base = idx[g.base]
        members = sorted(g.members)
        recs = list(base.records)
        for mid in members:
            if not idx[mid].properties < base.properties:
                raise StorageError(f"CS {mid} is not an ancestor of base CS {g.base}")
            recs.extend(idx[mid].records)
        tables.append(_build_table(len(tables), base.sorted_properties, recs, g.base, members, False))
    if plan.residual:
        ids = sorted(plan.residual)
        cols = sorted(frozenset().union(*(idx[c].properties for c in ids)))
        recs = [r for c in ids for r in idx[c].records]
        tables.append(_build_table(len(tables), cols, recs, None, ids, True))
    m = plan.config.m if plan.config is not None else None
    catalog = Catalog([t.meta() for t in tables], m, plan.algorithm, cs_count=len(idx))
    return tables, catalog


def subject_index(tables: Sequence[MergedTable], n_terms: int) -> tuple[np.ndarray, np.ndarray]:
    """Per term id: owning table (-1 when not a subject) and row number."""
    tab = np.full(n_terms, -1, dtype=np.int64)
    row = np.full(n_terms, -1, dtype=np.int64)
    for t in tables:
        tab[t.subjects] = t.table_id
        row[t.subjects] = np.arange(t.row_count, dtype=np.int64)
    return tab, row


def build_ecs_index(tables: Sequence[MergedTable], n_terms: int) -> EcsIndex:
    """Links ``(t_i, p, t_j)`` whenever a value under ``p`` in ``t_i`` is a subject of ``t_j``."""
    owner, _ = subject_index(tables, n_terms)
    links: set[tuple[int, int, int]] = set()
    for t in tables:
        for p, col in t.cells.items():
            if not len(col.values):
                continue
            targets = np.unique(owner[col.values])
            for dst in targets[targets >= 0].tolist():
                links.add((t.table_id, p, dst))
    return EcsIndex(frozenset(links))


class Database:
    """In-memory handle over materialized tables; read-only after construction."""

    def __init__(self, dictionary: TermDictionary, tables: list[MergedTable], catalog: Catalog,
                 ecs: Optional[EcsIndex] = None):
        self.dictionary = dictionary
        self.tables = tables
        self.catalog = catalog
        self.subject_table, self.subject_row = subject_index(tables, len(dictionary))
        self.ecs = ecs if ecs is not None else build_ecs_index(tables, len(dictionary))

    @property
    def stats(self) -> DatasetStats:
        return self.catalog.stats

    @property
    def type_id(self) -> Optional[int]:
        if self.catalog.type_iri is None:
            return None
        return self.dictionary.lookup(Term(TermKind.IRI, self.catalog.type_iri))

    def table(self, table_id: int) -> MergedTable:
        return self.tables[table_id]

    def locate(self, subject: int) -> Optional[tuple[int, int]]:
        if not 0 <= subject < len(self.subject_table) or self.subject_table[subject] < 0:
            return None
        return int(self.subject_table[subject]), int(self.subject_row[subject])

    def scan(self, table_id: int, required_non_null: Iterable[int] = (),
             filters: Iterable[tuple[int, int]] = (), subject: Optional[int] = None) -> np.ndarray:
        return scan(self.tables[table_id], required_non_null, filters, subject)

    def triples(self) -> np.ndarray:
        """Distinct triples reconstructed from all tables."""
        parts = []
        for t in self.tables:
            for p, col in t.cells.items():
                n = len(col.values)
                if n:
                    parts.append(np.column_stack(
                        (t.subjects[col.row_of_value], np.full(n, p, dtype=np.int64), col.values)))
        if not parts:
            return np.empty((0, 3), dtype=np.int64)
        return np.concatenate(parts)


def scan(table: MergedTable, required_non_null: Iterable[int] = (),
         filters: Iterable[tuple[int, int]] = (), subject: Optional[int] = None,
         rows: Optional[np.ndarray] = None) -> np.ndarray:
    """Row numbers whose required columns are non-NULL and whose filters hold.

    A filter ``(p, v)`` matches a multi-valued cell when any element equals
    ``v``.  ``rows`` restricts the check to candidate rows (e.g. from the
    subject index) instead of the whole table.
    """
    if rows is not None:
        rows = np.asarray(rows, dtype=np.int64)
        keep = np.ones(len(rows), dtype=bool)
        for p in required_non_null:
            keep &= table.column(p).lengths[rows] > 0
        for p, v in filters:
            col = table.column(p)
            keep &= np.fromiter((v in (col.cell(r) or ()) for r in rows.tolist()), dtype=bool, count=len(rows))
        if subject is not None:
            keep &= table.subjects[rows] == subject
        return rows[keep]
    n = table.row_count
    mask = np.ones(n, dtype=bool)
    for p in required_non_null:
        mask &= table.column(p).lengths > 0
    for p, v in filters:
        col = table.column(p)
        hit = np.zeros(n, dtype=bool)
        hit[col.row_of_value[col.values == v]] = True
        mask &= hit
    if subject is not None:
        mask &= table.subjects == subject
    return np.flatnonzero(mask)


# -- on-disk format -----------------------------------------------------------

def _write_framed(path: Path, kind: int, payload: bytes) -> None:
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, kind, len(payload), 0)
    crc = zlib.crc32(payload, zlib.crc32(head[:16]))
    path.write_bytes(head[:16] + struct.pack("<I", crc) + payload)


def _read_framed(path: Path, kind: int) -> bytes:
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise CorruptFileError(path, "missing file") from None
    if len(raw) < _HEADER.size:
        raise CorruptFileError(path, "truncated header")
    magic, version, got_kind, length, crc = _HEADER.unpack_from(raw)
    payload = raw[_HEADER.size:]
    if zlib.crc32(payload, zlib.crc32(raw[:16])) != crc:
        raise CorruptFileError(path, "checksum mismatch")
    if magic != MAGIC:
        raise CorruptFileError(path, "bad magic")
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    if got_kind != kind or length != len(payload):
        raise CorruptFileError(path, "unexpected file kind or length")
    return payload


def _u64(arr) -> bytes:
    return np.asarray(arr, dtype="<u8").tobytes()


def _from_u64(buf: bytes, path: Path) -> np.ndarray:
    if len(buf) % 8:
        raise CorruptFileError(path, "payload is not a whole number of u64 words")
    return np.frombuffer(buf, dtype="<u8").astype(np.int64)


def _encode_column(col: Column) -> bytes:
    lengths = col.lengths
    n = len(lengths)
    nulls = lengths == 0
    multi = col.is_multi_valued
    head = struct.pack("<QB", n, 1 if multi else 0)
    bitmap = np.packbits(nulls, bitorder="little").tobytes()
    if multi:
        stream = np.concatenate((lengths[~nulls], col.values)).astype(np.uint64)
        body = kernels.varint_encode(stream)
    else:
        body = _u64(col.values)
    return head + bitmap + body


def _decode_column(buf: bytes, path: Path) -> Column:
    n, multi = struct.unpack_from("<QB", buf)
    pos = 9
    nbytes = (n + 7) // 8
    nulls = np.unpackbits(np.frombuffer(buf, dtype=np.uint8, count=nbytes, offset=pos),
                          count=n, bitorder="little").astype(bool)
    body = buf[pos + nbytes:]
    present = int(n - nulls.sum())
    if multi:
        try:
            stream = kernels.varint_decode(body).astype(np.int64)
        except ValueError as exc:
            raise CorruptFileError(path, str(exc)) from None
        counts, values = stream[:present], stream[present:]
        if len(counts) != present or int(counts.sum()) != len(values):
            raise CorruptFileError(path, "value list framing does not match row count")
    else:
        values = _from_u64(body, path)
        counts = np.ones(present, dtype=np.int64)
        if len(values) != present:
            raise CorruptFileError(path, "value count does not match NULL bitmap")
    lengths = np.zeros(n + 1, dtype=np.int64)
    lengths[1:][~nulls] = counts
    return Column(np.cumsum(lengths), values)


def _encode_dict(dictionary: TermDictionary) -> bytes:
    terms = list(dictionary)
    kinds = np.asarray([_TERM_KINDS.index(t.kind) for t in terms], dtype=np.uint8)
    blobs = [t.lexical.encode("utf-8") for t in terms]
    lens = kernels.varint_encode(np.asarray([len(b) for b in blobs], dtype=np.uint64))
    return struct.pack("<QQ", len(terms), len(lens)) + kinds.tobytes() + lens + b"".join(blobs)


def _decode_dict(buf: bytes, path: Path) -> TermDictionary:
    n, nlen = struct.unpack_from("<QQ", buf)
    pos = 16
    kinds = np.frombuffer(buf, dtype=np.uint8, count=n, offset=pos).tolist()
    pos += n
    lens = kernels.varint_decode(buf[pos:pos + nlen]).tolist()
    pos += nlen
    if len(lens) != n:
        raise CorruptFileError(path, "term length table is inconsistent")
    terms = []
    for k, ln in zip(kinds, lens):
        terms.append(Term(_TERM_KINDS[k], buf[pos:pos + ln].decode("utf-8")))
        pos += ln
    if pos != len(buf):
        raise CorruptFileError(path, "trailing bytes in dictionary")
    return TermDictionary(terms)


def persist(db: Database, db_dir) -> None:
    """Write ``db`` into ``db_dir``, which must be absent or empty."""
    root = Path(db_dir)
    if root.exists() and any(root.iterdir()):
        raise StorageError(f"{root} is not empty")
    (root / "tables").mkdir(parents=True, exist_ok=True)
    _write_framed(root / "dict", _KIND_DICT, _encode_dict(db.dictionary))
    for t in db.tables:
        tdir = root / "tables" / str(t.table_id)
        tdir.mkdir()
        _write_framed(tdir / "subject.bin", _KIND_SUBJECT, _u64(t.subjects))
        for p in t.columns:
            _write_framed(tdir / f"{p}.bin", _KIND_COLUMN, _encode_column(t.cells[p]))
    links = sorted(db.ecs.links)
    _write_framed(root / "ecs.idx", _KIND_ECS, _u64(np.asarray(links, dtype=np.int64).reshape(-1, 3)))
    catalog = json.dumps(db.catalog.to_json(), sort_keys=True, indent=1).encode("utf-8")
    _write_framed(root / "catalog", _KIND_CATALOG, catalog)


def load(db_dir) -> Database:
    """Read a database directory, verifying every file's checksum."""
    root = Path(db_dir)
    if not (root / "catalog").is_file():
        raise NotADatabaseError(f"{root} is not a database (no catalog)")
    try:
        catalog = Catalog.from_json(json.loads(_read_framed(root / "catalog", _KIND_CATALOG)))
    except (ValueError, KeyError) as exc:
        raise CorruptFileError(root / "catalog", f"unreadable catalog ({exc})") from None
    dictionary = _decode_dict(_read_framed(root / "dict", _KIND_DICT), root / "dict")
    tables = []
    for meta in catalog.tables:
        tdir = root / "tables" / str(meta.table_id)
        subjects = _from_u64(_read_framed(tdir / "subject.bin", _KIND_SUBJECT), tdir / "subject.bin")
        cells = {}
        for p in meta.columns:
            path = tdir / f"{p}.bin"
            col = _decode_column(_read_framed(path, _KIND_COLUMN), path)
            if len(col.offsets) - 1 != len(subjects):
                raise CorruptFileError(path, "row count differs from subject column")
            cells[p] = col
        tables.append(MergedTable(meta.table_id, meta.columns, subjects, cells, meta.base,
                                  meta.members, meta.residual))
    ecs_raw = _from_u64(_read_framed(root / "ecs.idx", _KIND_ECS), root / "ecs.idx")
    if len(ecs_raw) % 3:
        raise CorruptFileError(root / "ecs.idx", "link table is not a whole number of triples")
    ecs = EcsIndex(frozenset(map(tuple, ecs_raw.reshape(-1, 3).tolist())))
    return Database(dictionary, tables, catalog, ecs)
