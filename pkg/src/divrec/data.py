"""Item stores, synthetic dataset generation, and on-disk formats.

Two ways to hold items: fully in memory, or batched off a file so no more
than ``batch_rows`` embeddings are materialised at once. Both serve
unit-norm float64 rows addressed by dense integer ids.

File formats:

- csv: one item per line, comma-separated decimals, optionally preceded by
  an integer id column (auto-detected when the leading column counts 0..N-1
  or 1..N in order).
- packed binary: an 8-byte header of two little-endian uint32 (count, dim)
  followed by count*dim little-endian float64 values, row major.
"""

from __future__ import annotations

import logging
import os
import struct

import numpy as np

from .exceptions import (
    AssumptionViolationError,
    DegenerateItemError,
    FormatError,
    InvalidInputError,
    StorageError,
)
from .feedback import PrecomputedMatrixModel, SyntheticLinearModel
from .validation import check_positive_int, normalize_rows

logger = logging.getLogger(__name__)

FORMATS = ("csv", "packed_binary")

_HEADER = struct.Struct("<II")


def _normalize_row(row, line=None):
    norm = float(np.linalg.norm(row))
    if norm == 0.0:
        raise DegenerateItemError(
            f"item row{'' if line is None else f' at line {line}'} has zero norm"
        )
    if abs(norm - 1.0) <= 1e-12:
        return row
    return row / norm


def _round_values(rows, decimals):
    return rows if decimals is None else np.round(rows, decimals)


class ItemStore:
    """Unit-norm item embeddings behind a uniform row-serving interface."""

    def __init__(self, backing, n_items, dim, batch_rows=4096):
        self.backing = backing
        self.n_items = int(n_items)
        self.dim = int(dim)
        self.batch_rows = int(batch_rows)

    # Subclasses implement row / rows / iter_batches.

    def row(self, item_id):
        return self.rows([item_id])[0]


class InMemoryItemStore(ItemStore):
    def __init__(self, embeddings, batch_rows=4096, round_decimals=None):
        embeddings = _round_values(
            np.asarray(embeddings, dtype=np.float64), round_decimals
        )
        embeddings = normalize_rows(embeddings, "embeddings")
        super().__init__("in_memory", embeddings.shape[0], embeddings.shape[1],
                         batch_rows)
        self._rows = embeddings

    def rows(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.n_items):
            raise InvalidInputError(f"item ids out of range for {self.n_items} items")
        return self._rows[ids]

    def iter_batches(self):
        for start in range(0, self.n_items, self.batch_rows):
            yield start, self._rows[start : start + self.batch_rows]


class FileItemStore(ItemStore):
    """Batched reader over a csv or packed-binary embedding file."""

    def __init__(self, path, fmt, batch_rows=4096, round_decimals=None):
        if fmt not in FORMATS:
            raise InvalidInputError(f"unknown format {fmt!r}; pick one of {FORMATS}")
        check_positive_int(batch_rows, "batch_rows")
        self.path = os.fspath(path)
        self.format = fmt
        self.round_decimals = round_decimals
        if not os.path.exists(self.path):
            raise StorageError(f"no such file: {self.path}")
        if fmt == "packed_binary":
            n_items, dim = self._read_binary_header()
            self._offsets = None
            self._has_id_column = False
        else:
            n_items, dim = self._index_csv()
        super().__init__("file_batched", n_items, dim, batch_rows)

    # -- packed binary -----------------------------------------------------

    def _read_binary_header(self):
        try:
            with open(self.path, "rb") as handle:
                header = handle.read(_HEADER.size)
        except OSError as exc:
            raise StorageError(f"cannot read {self.path}: {exc}") from exc
        if len(header) != _HEADER.size:
            raise FormatError(f"{self.path}: truncated header")
        n_items, dim = _HEADER.unpack(header)
        if n_items == 0 or dim == 0:
            raise FormatError(f"{self.path}: header declares an empty store")
        expected = _HEADER.size + n_items * dim * 8
        actual = os.path.getsize(self.path)
        if actual != expected:
            raise FormatError(
                f"{self.path}: expected {expected} bytes for {n_items}x{dim}, "
                f"found {actual}"
            )
        return n_items, dim

    def _read_binary_rows(self, start, count):
        offset = _HEADER.size + start * self.dim * 8
        with open(self.path, "rb") as handle:
            handle.seek(offset)
            data = handle.read(count * self.dim * 8)
        rows = np.frombuffer(data, dtype="<f8").reshape(count, self.dim)
        return np.ascontiguousarray(rows)

    # -- csv -----------------------------------------------------------------

    def _index_csv(self):
        offsets = []
        first_fields = []
        dim = None
        try:
            with open(self.path, "rb") as handle:
                position = handle.tell()
                for line_no, raw in enumerate(iter(handle.readline, b""), start=1):
                    line = raw.strip()
                    if line:
                        fields = line.split(b",")
                        if dim is None:
                            dim = len(fields)
                        elif len(fields) != dim:
                            raise FormatError(
                                f"{self.path}: expected {dim} fields, found "
                                f"{len(fields)}",
                                line=line_no,
                            )
                        offsets.append(position)
                        first_fields.append(fields[0])
                    position = handle.tell()
        except OSError as exc:
            raise StorageError(f"cannot read {self.path}: {exc}") from exc
        if not offsets:
            raise FormatError(f"{self.path}: no item rows found")
        n_items = len(offsets)
        self._offsets = np.asarray(offsets, dtype=np.int64)
        self._has_id_column = _leading_ids(first_fields, n_items)
        width = dim - 1 if self._has_id_column else dim
        if width == 0:
            raise FormatError(f"{self.path}: rows carry ids but no values")
        return n_items, width

    def _parse_csv_line(self, raw, line_no):
        fields = raw.strip().split(b",")
        if self._has_id_column:
            fields = fields[1:]
        try:
            values = np.array([float(f) for f in fields])
        except ValueError:
            raise FormatError(
                f"{self.path}: non-numeric value", line=line_no
            ) from None
        if not np.all(np.isfinite(values)):
            raise FormatError(f"{self.path}: non-finite value", line=line_no)
        return values

    def _read_csv_rows(self, start, count):
        rows = np.empty((count, self.dim))
        with open(self.path, "rb") as handle:
            for k in range(count):
                handle.seek(self._offsets[start + k])
                rows[k] = self._parse_csv_line(handle.readline(), start + k + 1)
        return rows

    # -- shared serving ------------------------------------------------------

    def _served(self, rows):
        rows = _round_values(rows, self.round_decimals)
        out = np.empty_like(rows)
        for k, row in enumerate(rows):
            out[k] = _normalize_row(row)
        return out

    def rows(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.n_items):
            raise InvalidInputError(f"item ids out of range for {self.n_items} items")
        out = np.empty((ids.size, self.dim))
        for k, item in enumerate(ids):
            if self.format == "packed_binary":
                raw = self._read_binary_rows(int(item), 1)
            else:
                raw = self._read_csv_rows(int(item), 1)
            out[k] = self._served(raw)[0]
        return out

    def iter_batches(self):
        for start in range(0, self.n_items, self.batch_rows):
            count = min(self.batch_rows, self.n_items - start)
            if self.format == "packed_binary":
                raw = self._read_binary_rows(start, count)
            else:
                raw = self._read_csv_rows(start, count)
            yield start, self._served(raw)


def _leading_ids(first_fields, n_items):
    """A leading column is an id column when it counts 0..N-1 or 1..N in order."""
    try:
        values = [int(f) for f in first_fields]
    except ValueError:
        return False
    return values == list(range(n_items)) or values == list(range(1, n_items + 1))


# -- generation ---------------------------------------------------------------


def generate_synthetic(n_items, dim, n_groups, n_users, seed=0):
    """Synthetic catalog of near-duplicate groups plus user contexts.

    Group one is i.i.d. Gaussian rows on the unit sphere; each further group
    repeats those rows with a constant ``0.01 * group`` offset added to every
    entry before renormalising, giving ``n_groups`` families of close
    siblings. Rows beyond ``n_items`` are dropped after concatenation.
    """
    n_items = check_positive_int(n_items, "n_items")
    dim = check_positive_int(dim, "dim")
    n_groups = check_positive_int(n_groups, "n_groups")
    n_users = check_positive_int(n_users, "n_users")
    if n_items < n_groups:
        raise InvalidInputError(
            f"n_items {n_items} must cover at least one item per group "
            f"(n_groups {n_groups})"
        )
    rng = np.random.default_rng(seed)
    per_group = -(-n_items // n_groups)  # ceil
    base = normalize_rows(
        rng.normal(0.0, np.sqrt(2.0), size=(per_group, dim)), "group"
    )
    groups = [base]
    for group in range(2, n_groups + 1):
        groups.append(normalize_rows(base + 0.01 * group, "group"))
    items = np.concatenate(groups, axis=0)[:n_items]
    contexts = normalize_rows(rng.normal(0.0, 1.0, size=(n_users, dim)), "contexts")
    store = InMemoryItemStore(items)
    return store, contexts


# -- loading / saving ----------------------------------------------------------


def load_items(path, fmt="csv", batch_rows=None, round_decimals=None):
    """Open an item file; ``batch_rows`` keeps it on disk and batched."""
    if batch_rows is not None:
        return FileItemStore(path, fmt, batch_rows=batch_rows,
                             round_decimals=round_decimals)
    staging = FileItemStore(path, fmt, batch_rows=65536,
                            round_decimals=round_decimals)
    rows = np.concatenate([block for _, block in staging.iter_batches()], axis=0)
    return InMemoryItemStore(rows, round_decimals=None)


def save_items_packed(rows, path):
    rows = np.ascontiguousarray(np.asarray(rows, dtype=np.float64))
    try:
        with open(path, "wb") as handle:
            handle.write(_HEADER.pack(rows.shape[0], rows.shape[1]))
            handle.write(rows.astype("<f8").tobytes())
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def save_items_csv(rows, path):
    rows = np.asarray(rows, dtype=np.float64)
    try:
        with open(path, "w", encoding="ascii") as handle:
            for row in rows:
                handle.write(",".join(repr(float(v)) for v in row))
                handle.write("\n")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def store_rows(store):
    """All rows of a store, materialised (test and export helper)."""
    return np.concatenate([block for _, block in store.iter_batches()], axis=0)


def load_scores(path, n_users=None, n_items=None):
    """Read a ``user,item,score`` csv into a precomputed feedback table.

    Scores must be strictly positive; a repeated pair keeps the last value
    and logs a warning.
    """
    table = {}
    max_user = -1
    max_item = -1
    try:
        with open(path, "r", encoding="ascii") as handle:
            for line_no, raw in enumerate(handle, start=1):
                line = raw.strip()
                if not line:
                    continue
                fields = line.split(",")
                if len(fields) != 3:
                    raise FormatError(
                        f"{path}: expected user,item,score", line=line_no
                    )
                try:
                    user, item, score = int(fields[0]), int(fields[1]), float(fields[2])
                except ValueError:
                    raise FormatError(
                        f"{path}: malformed score row", line=line_no
                    ) from None
                if not np.isfinite(score) or score <= 0.0:
                    raise AssumptionViolationError(
                        f"{path} line {line_no}: scores must be strictly positive"
                    )
                if (user, item) in table:
                    logger.warning(
                        "%s line %d: duplicate score for user %d item %d; "
                        "keeping the last value",
                        path, line_no, user, item,
                    )
                table[(user, item)] = score
                max_user = max(max_user, user)
                max_item = max(max_item, item)
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    if not table:
        raise FormatError(f"{path}: no score rows found")
    return PrecomputedMatrixModel(
        table=table,
        n_users=n_users if n_users is not None else max_user + 1,
        n_items=n_items if n_items is not None else max_item + 1,
    )


# -- user histories -------------------------------------------------------------


class HistoryLog:
    """Append-only per-user history files under one directory."""

    def __init__(self, root):
        self.root = os.fspath(root)
        os.makedirs(self.root, exist_ok=True)

    def _path(self, user_id):
        return os.path.join(self.root, f"user_{int(user_id)}.history")

    def append(self, user_id, item_ids):
        items = [int(i) for i in item_ids]
        try:
            with open(self._path(user_id), "a", encoding="ascii") as handle:
                for item in items:
                    handle.write(f"{item}\n")
        except OSError as exc:
            raise StorageError(f"cannot append history: {exc}") from exc

    def load(self, user_id):
        path = self._path(user_id)
        if not os.path.exists(path):
            return []
        try:
            with open(path, "r", encoding="ascii") as handle:
                lines = [line.strip() for line in handle]
        except OSError as exc:
            raise StorageError(f"cannot read history: {exc}") from exc
        items = []
        for line_no, line in enumerate(lines, start=1):
            if not line:
                continue
            try:
                items.append(int(line))
            except ValueError:
                raise FormatError(
                    f"{path}: malformed history entry", line=line_no
                ) from None
        return items

    def users(self):
        found = []
        for name in sorted(os.listdir(self.root)):
            if name.startswith("user_") and name.endswith(".history"):
                found.append(int(name[len("user_"):-len(".history")]))
        return sorted(found)


def history_append(log, user_id, item_ids):
    log.append(user_id, item_ids)


def history_load(log, user_id):
    return log.load(user_id)


def synthetic_model(store, contexts):
    """Bundle a store and its user contexts into the linear feedback model."""
    return SyntheticLinearModel(store=store, contexts=contexts)
