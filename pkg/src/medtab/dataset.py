"""Tabular dataset container: CSV ingestion, seeded stratified splitting, and
leakage-free encoding (impute, one-hot, standardize) fitted on training rows.

CSV layout: UTF-8, RFC-4180 quoting, header row required, empty cell means a
missing value. An optional ``id`` column carries row identifiers (row indices
are used when absent); the label column is matched by the schema's label name.

Split files are JSON: ``{"seed": int, "train": [...], "val": [...], "test": [...]}``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .schema import MISSING, CoercionError, ExtractionSchema, canonicalize_value, fold_name


class DatasetError(ValueError):
    pass


@dataclass
class TabularDataset:
    schema: ExtractionSchema
    rows: list[dict]
    ids: list[str]
    labels: list[int] | None = None  # 1 = positive_value

    def __post_init__(self):
        if len(self.ids) != len(self.rows):
            raise DatasetError("ids and rows must have equal length")
        if self.labels is not None and len(self.labels) != len(self.rows):
            raise DatasetError("labels and rows must have equal length")
        if len(set(self.ids)) != len(self.ids):
            raise DatasetError("row ids must be unique")

    @property
    def n(self) -> int:
        return len(self.rows)

    def subset(self, indices) -> "TabularDataset":
        idx = list(indices)
        return TabularDataset(
            schema=self.schema,
            rows=[self.rows[i] for i in idx],
            ids=[self.ids[i] for i in idx],
            labels=[self.labels[i] for i in idx] if self.labels is not None else None,
        )

    def label_array(self) -> np.ndarray:
        if self.labels is None:
            raise DatasetError("dataset has no labels")
        return np.asarray(self.labels, dtype=np.int64)


def load_csv(path: str | Path, schema: ExtractionSchema) -> TabularDataset:
    """Read a dataset; every cell passes through the schema coercion rules."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file, expected a header row") from None
        columns = _map_header(header, schema, path)
        rows, ids, labels = [], [], []
        has_label = any(role == "label" for role in columns)
        for lineno, cells in enumerate(reader, start=2):
            if len(cells) != len(columns):
                raise DatasetError(f"{path}:{lineno}: expected {len(columns)} cells, got {len(cells)}")
            row: dict = {}
            row_id = None
            label = None
            for role, cell in zip(columns, cells):
                if role == "id":
                    row_id = cell
                elif role == "label":
                    label = _parse_label(cell, schema, path, lineno)
                else:
                    try:
                        row[role.name] = canonicalize_value(role, cell if cell != "" else None)
                    except CoercionError as e:
                        raise DatasetError(f"{path}:{lineno}: column {role.name!r}: {e}") from e
            rows.append(row)
            ids.append(row_id if row_id is not None else str(len(ids)))
            if has_label:
                labels.append(label)
    return TabularDataset(schema=schema, rows=rows, ids=ids,
                          labels=labels if has_label else None)


def _map_header(header, schema, path):
    """Resolve header names to feature specs / 'id' / 'label' roles."""
    columns = []
    seen = set()
    for name in header:
        folded = fold_name(name)
        spec = schema.match_key(name)
        if spec is not None:
            role = spec
        elif folded == "id":
            role = "id"
        elif schema.label is not None and folded == fold_name(schema.label.name):
            role = "label"
        else:
            raise DatasetError(f"{path}: header column {name!r} does not match the schema")
        key = folded
        if key in seen:
            raise DatasetError(f"{path}: duplicate header column {name!r}")
        seen.add(key)
        columns.append(role)
    missing = [f.name for f in schema.features if f not in columns]
    if missing:
        raise DatasetError(f"{path}: header is missing feature columns: {', '.join(missing)}")
    return columns


def _parse_label(cell, schema, path, lineno) -> int:
    text = cell.strip().lower()
    if text == schema.label.positive_value.lower():
        return 1
    if text == schema.label.negative_value.lower():
        return 0
    raise DatasetError(
        f"{path}:{lineno}: label {cell!r} is neither "
        f"{schema.label.positive_value!r} nor {schema.label.negative_value!r}")


def format_cell(value) -> str:
    if value is MISSING:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def save_csv(dataset: TabularDataset, path: str | Path) -> None:
    """Write a dataset (id column first, label last when present)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["id"] + [f.name for f in dataset.schema.features]
        if dataset.labels is not None:
            header.append(dataset.schema.label.name)
        writer.writerow(header)
        for i, row in enumerate(dataset.rows):
            cells = [dataset.ids[i]] + [format_cell(row[f.name]) for f in dataset.schema.features]
            if dataset.labels is not None:
                cells.append(dataset.schema.label.positive_value if dataset.labels[i]
                             else dataset.schema.label.negative_value)
            writer.writerow(cells)


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

_LCG_MULT = 6364136223846793005  # Knuth's 64-bit MMIX constants
_LCG_INC = 1442695040888963407
_MASK64 = (1 << 64) - 1


class _Lcg:
    """64-bit linear congruential generator: x <- (a*x + c) mod 2^64,
    a = 6364136223846793005, c = 1442695040888963407. Bounded draws take the
    high 32 bits through a fixed-point multiply."""

    def __init__(self, seed: int):
        self.state = (seed ^ 0x5DEECE66D) & _MASK64
        self._next()

    def _next(self) -> int:
        self.state = (_LCG_MULT * self.state + _LCG_INC) & _MASK64
        return self.state

    def below(self, n: int) -> int:
        return ((self._next() >> 32) * n) >> 32


def _shuffled(indices: list[int], rng: _Lcg) -> list[int]:
    out = list(indices)
    for i in range(len(out) - 1, 0, -1):  # Fisher-Yates, descending
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


@dataclass(frozen=True)
class SplitAssignment:
    train_ids: tuple[int, ...]
    val_ids: tuple[int, ...]
    test_ids: tuple[int, ...]
    seed: int

    def to_dict(self) -> dict:
        return {"seed": self.seed, "train": list(self.train_ids),
                "val": list(self.val_ids), "test": list(self.test_ids)}

    @classmethod
    def from_dict(cls, doc: dict) -> "SplitAssignment":
        return cls(train_ids=tuple(doc["train"]), val_ids=tuple(doc["val"]),
                   test_ids=tuple(doc["test"]), seed=int(doc["seed"]))


def split(dataset: TabularDataset, seed: int) -> SplitAssignment:
    """Stratified 70/10/20 split of row indices, deterministic for a seed.

    Within each class: indices are shuffled by the documented LCG and cut at
    floor(0.7 n_c) and floor(0.1 n_c); the remainder goes to the test split.
    """
    if dataset.n < 10:
        raise DatasetError(f"need at least 10 rows to split, got {dataset.n}")
    if dataset.labels is None:
        raise DatasetError("stratified split needs labels")
    rng = _Lcg(seed)
    train, val, test = [], [], []
    for cls in (0, 1):
        members = [i for i, y in enumerate(dataset.labels) if y == cls]
        if len(members) < 3:
            raise DatasetError(f"class {cls} has {len(members)} members; cannot stratify")
        shuffled = _shuffled(members, rng)
        n_tr = int(0.7 * len(members))
        n_val = int(0.1 * len(members))
        train += shuffled[:n_tr]
        val += shuffled[n_tr:n_tr + n_val]
        test += shuffled[n_tr + n_val:]
    return SplitAssignment(train_ids=tuple(sorted(train)), val_ids=tuple(sorted(val)),
                           test_ids=tuple(sorted(test)), seed=seed)


def save_split(assignment: SplitAssignment, path: str | Path) -> None:
    Path(path).write_text(json.dumps(assignment.to_dict()) + "\n", encoding="utf-8")


def load_split(path: str | Path) -> SplitAssignment:
    return SplitAssignment.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NumericState:
    name: str
    impute_mean: float
    center: float
    scale: float


@dataclass(frozen=True)
class CategoricalState:
    name: str
    categories: tuple[str, ...]
    impute_category: str


@dataclass(frozen=True)
class EncoderState:
    columns: tuple  # NumericState | CategoricalState, in schema feature order

    @property
    def column_names(self) -> tuple[str, ...]:
        names = []
        for col in self.columns:
            if isinstance(col, NumericState):
                names.append(col.name)
            else:
                names.extend(f"{col.name}_{cat}" for cat in col.categories)
        return tuple(names)

    def to_dict(self) -> dict:
        out = []
        for col in self.columns:
            if isinstance(col, NumericState):
                out.append({"kind": "numeric", "name": col.name, "impute_mean": col.impute_mean,
                            "center": col.center, "scale": col.scale})
            else:
                out.append({"kind": "categorical", "name": col.name,
                            "categories": list(col.categories),
                            "impute_category": col.impute_category})
        return {"columns": out}

    @classmethod
    def from_dict(cls, doc: dict) -> "EncoderState":
        cols = []
        for c in doc["columns"]:
            if c["kind"] == "numeric":
                cols.append(NumericState(c["name"], c["impute_mean"], c["center"], c["scale"]))
            else:
                cols.append(CategoricalState(c["name"], tuple(c["categories"]), c["impute_category"]))
        return cls(columns=tuple(cols))


@dataclass
class EncodedMatrix:
    column_names: tuple[str, ...]
    values: np.ndarray  # (n, d) float64
    encoder_state: EncoderState


def fit_encoder(dataset: TabularDataset, train_ids) -> EncoderState:
    """Fit imputation, one-hot maps and standardization on the training rows only.

    Numerics: impute with the observed train mean, then z-score against the
    imputed train column (zero variance yields scale 1). Categoricals: one
    column per allowed value, missing imputed as the train mode.
    """
    train_idx = list(train_ids)
    if not train_idx:
        raise DatasetError("train_ids must be nonempty")
    columns = []
    for spec in dataset.schema.features:
        cells = [dataset.rows[i][spec.name] for i in train_idx]
        if spec.is_numeric:
            observed = np.array([float(v) for v in cells if v is not MISSING], dtype=np.float64)
            impute = float(observed.mean()) if observed.size else 0.0
            imputed = np.array([float(v) if v is not MISSING else impute for v in cells])
            scale = float(imputed.std())
            columns.append(NumericState(name=spec.name, impute_mean=impute,
                                        center=float(imputed.mean()),
                                        scale=scale if scale > 0 else 1.0))
        elif spec.kind == "categorical":
            counts = {cat: 0 for cat in spec.allowed_values}
            for v in cells:
                if v is not MISSING:
                    counts[v] += 1
            mode = max(spec.allowed_values, key=lambda cat: counts[cat])  # ties: schema order
            columns.append(CategoricalState(name=spec.name, categories=spec.allowed_values,
                                            impute_category=mode))
        else:
            raise DatasetError(f"feature {spec.name!r}: text features cannot be encoded for modeling")
    return EncoderState(columns=tuple(columns))


def transform(dataset: TabularDataset, encoder: EncoderState, ids=None) -> EncodedMatrix:
    """Apply a fitted encoder to the given rows (all rows when ids is None)."""
    idx = list(ids) if ids is not None else list(range(dataset.n))
    parts = []
    for col in encoder.columns:
        if isinstance(col, NumericState):
            raw = np.array([_numeric_cell(dataset.rows[i], col) for i in idx], dtype=np.float64)
            parts.append(((raw - col.center) / col.scale)[:, None])
        else:
            block = np.zeros((len(idx), len(col.categories)), dtype=np.float64)
            pos = {cat: j for j, cat in enumerate(col.categories)}
            for r, i in enumerate(idx):
                v = dataset.rows[i][col.name]
                cat = col.impute_category if v is MISSING else v
                if cat not in pos:
                    raise DatasetError(f"{col.name}: value {cat!r} is not an allowed category")
                block[r, pos[cat]] = 1.0
            parts.append(block)
    values = np.hstack(parts) if parts else np.zeros((len(idx), 0))
    return EncodedMatrix(column_names=encoder.column_names, values=values, encoder_state=encoder)


def _numeric_cell(row: dict, col: NumericState) -> float:
    v = row[col.name]
    return col.impute_mean if v is MISSING else float(v)
