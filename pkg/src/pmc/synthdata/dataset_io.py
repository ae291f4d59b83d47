"""Text format for :class:`MultiModalDataset`.

::

    # pmc-dataset 1
    # schema n_classes=4 modalities=A:8,B:8 missing=B samples=800 hidden=1
    <id>\t<domain>\t<category>\t<truth>\t<name>:<v1>,<v2>,...\t...

The two header lines are handled here; the record body is a headerless
tab-separated table written and read with pandas. Every record has one
payload cell per schema modality, left empty when the sample has no payload
for it.

``domain`` is 0 (source) or 1 (target). ``category`` is the source label and
``-`` for target samples; ``truth`` is the hidden target label and ``-`` for
source samples. A payload that was dropped from a target sample is kept as a
hidden field written ``~<name>:<values>``. ``hidden`` says whether the file
carries target ground truth at all, so an empty target split keeps that
distinction; files without the entry infer it from the ``truth`` column.
Floats are written with ``repr`` so a round trip is exact.
"""
import csv
import io
import logging
import re
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from pmc.errors import DatasetParseError
from pmc.synthdata.dataset import (SOURCE, TARGET, DatasetSchema, DomainSplit, HiddenTruth, ModalitySchema,
                                   MultiModalDataset)
from pmc.utils import PathLike, atomic_write_text

logger = logging.getLogger(__name__)

FORMAT_LINE = "# pmc-dataset 1"
UNLABELED = "-"
HIDDEN_PREFIX = "~"
HEADER_LINES = 2
RECORD_FIELDS = ("id", "domain", "category", "truth")


def _vector(values: np.ndarray) -> str:
    return ",".join(repr(float(v)) for v in values)


def _records(ds: MultiModalDataset) -> pd.DataFrame:
    schema = ds.schema
    rows = []
    for i, sid in enumerate(ds.source.ids):
        row = [str(int(sid)), str(SOURCE), str(int(ds.source.labels[i])), UNLABELED]
        row += [f"{m}:{_vector(ds.source.payloads[m][i])}" for m in schema.names]
        rows.append(row)

    hidden = ds.hidden
    for i, sid in enumerate(ds.target.ids):
        truth = str(int(hidden.labels[i])) if hidden is not None else UNLABELED
        row = [str(int(sid)), str(TARGET), UNLABELED, truth]
        for m in schema.names:
            if m in ds.target.payloads:
                row.append(f"{m}:{_vector(ds.target.payloads[m][i])}")
            elif hidden is not None and m in hidden.payloads:
                row.append(f"{HIDDEN_PREFIX}{m}:{_vector(hidden.payloads[m][i])}")
            else:
                row.append("")
        rows.append(row)
    return pd.DataFrame(rows, columns=list(RECORD_FIELDS) + list(schema.names), dtype=str)


def dumps(ds: MultiModalDataset) -> str:
    schema = ds.schema
    modalities = ",".join(f"{m.name}:{m.dim}" for m in schema.modalities)
    header = (f"{FORMAT_LINE}\n"
              f"# schema n_classes={schema.n_classes} modalities={modalities} "
              f"missing={','.join(schema.missing) or UNLABELED} samples={ds.n} hidden={int(ds.hidden is not None)}\n")
    if ds.n == 0:
        return header
    body = _records(ds).to_csv(sep="\t", header=False, index=False, quoting=csv.QUOTE_NONE, lineterminator="\n")
    return header + body


def save(ds: MultiModalDataset, path: PathLike) -> PathLike:
    atomic_write_text(path, dumps(ds))
    logger.info("wrote %d samples to %s", ds.n, path)
    return path


def _parse_header(line: str, lineno: int):
    parts = line.split()
    if parts[:2] != ["#", "schema"]:
        raise DatasetParseError("expected '# schema ...' header", line=lineno, field="schema")
    entries = {}
    for item in parts[2:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise DatasetParseError(f"malformed header entry '{item}'", line=lineno, field="schema")
        entries[key] = value
    for key in ("n_classes", "modalities", "missing", "samples"):
        if key not in entries:
            raise DatasetParseError("missing header entry", line=lineno, field=key)
    try:
        n_classes = int(entries["n_classes"])
        n_samples = int(entries["samples"])
        modalities = []
        for item in entries["modalities"].split(","):
            name, dim = item.split(":")
            modalities.append(ModalitySchema(name, int(dim)))
    except ValueError as err:
        raise DatasetParseError(str(err), line=lineno, field="schema") from err
    has_truth: Optional[bool] = None
    if "hidden" in entries:
        if entries["hidden"] not in ("0", "1"):
            raise DatasetParseError(f"hidden must be 0 or 1, got '{entries['hidden']}'", line=lineno, field="hidden")
        has_truth = entries["hidden"] == "1"
    missing = () if entries["missing"] == UNLABELED else tuple(entries["missing"].split(","))
    try:
        schema = DatasetSchema(tuple(modalities), n_classes, missing)
    except ValueError as err:
        raise DatasetParseError(str(err), line=lineno, field="schema") from err
    return schema, n_samples, has_truth


def _parse_label(token: str, lineno: int, field: str):
    if token == UNLABELED:
        return None
    try:
        return int(token)
    except ValueError:
        raise DatasetParseError(f"expected an integer or '{UNLABELED}', got '{token}'", line=lineno, field=field)


def _read_body(body: str) -> pd.DataFrame:
    if not body.strip():
        return pd.DataFrame(columns=range(len(RECORD_FIELDS)), dtype=str)
    try:
        frame = pd.read_csv(io.StringIO(body), sep="\t", header=None, dtype=str, na_filter=False,
                            quoting=csv.QUOTE_NONE, skip_blank_lines=False)
    except pd.errors.ParserError as err:
        found = re.search(r"line (\d+)", str(err))
        line = int(found.group(1)) + HEADER_LINES if found else None
        raise DatasetParseError(str(err), line=line, field="record") from err
    return frame.fillna("")


def loads(text: str) -> MultiModalDataset:
    lines = text.split("\n")
    if not lines or lines[0].strip() != FORMAT_LINE:
        raise DatasetParseError(f"expected '{FORMAT_LINE}'", line=1, field="format")
    if len(lines) < 2 or not lines[1]:
        raise DatasetParseError("missing schema header", line=2, field="schema")
    schema, n_samples, has_truth = _parse_header(lines[1], 2)
    body = "\n".join(lines[HEADER_LINES:])
    if body.endswith("\n"):
        body = body[:-1]
    frame = _read_body(body)

    source: Dict[str, List] = {"ids": [], "labels": [], **{m: [] for m in schema.names}}
    target: Dict[str, List] = {"ids": [], "truth": [], **{m: [] for m in schema.names}}
    hidden_payloads: Dict[str, List] = {m: [] for m in schema.missing}

    for lineno, tokens in enumerate(frame.itertuples(index=False, name=None), start=HEADER_LINES + 1):
        if len(tokens) < len(RECORD_FIELDS):
            raise DatasetParseError(f"expected at least {len(RECORD_FIELDS)} fields, got {len(tokens)}",
                                    line=lineno, field="record")
        try:
            sid = int(tokens[0])
        except ValueError:
            raise DatasetParseError(f"bad id '{tokens[0]}'", line=lineno, field="id")
        if tokens[1] not in (str(SOURCE), str(TARGET)):
            raise DatasetParseError(f"domain must be {SOURCE} or {TARGET}, got '{tokens[1]}'", line=lineno, field="domain")
        domain = int(tokens[1])
        category = _parse_label(tokens[2], lineno, "category")
        truth = _parse_label(tokens[3], lineno, "truth")

        payloads, hidden = {}, {}
        for token in tokens[len(RECORD_FIELDS):]:
            if not token:
                continue
            name, sep, values = token.partition(":")
            if not sep:
                raise DatasetParseError(f"payload '{token[:20]}' lacks a 'name:' prefix", line=lineno, field="payload")
            store = payloads
            if name.startswith(HIDDEN_PREFIX):
                name, store = name[len(HIDDEN_PREFIX):], hidden
            try:
                vector = np.array([float(v) for v in values.split(",")], dtype=np.float64)
                dim = schema.dim(name)
            except ValueError as err:
                raise DatasetParseError(str(err), line=lineno, field=name)
            if vector.shape != (dim,):
                raise DatasetParseError(f"expected {dim} values, got {vector.size}", line=lineno, field=name)
            store[name] = vector

        expected = schema.names if domain == SOURCE else schema.target_names
        if set(payloads) != set(expected):
            raise DatasetParseError(f"payloads {sorted(payloads)} do not match {sorted(expected)}", line=lineno, field="payload")
        if domain == SOURCE:
            if category is None:
                raise DatasetParseError("source samples need a category", line=lineno, field="category")
            source["ids"].append(sid)
            source["labels"].append(category)
            for m in schema.names:
                source[m].append(payloads[m])
        else:
            if category is not None:
                raise DatasetParseError("target samples must be unlabeled", line=lineno, field="category")
            if has_truth is not None and (truth is not None) != has_truth:
                expected_truth = "a label" if has_truth else UNLABELED
                raise DatasetParseError(f"truth must be {expected_truth} when hidden={int(has_truth)}",
                                        line=lineno, field="truth")
            target["ids"].append(sid)
            target["truth"].append(truth)
            for m in schema.target_names:
                target[m].append(payloads[m])
            for m in schema.missing:
                hidden_payloads[m].append(hidden.get(m))

    n_read = len(source["ids"]) + len(target["ids"])
    if n_read != n_samples:
        raise DatasetParseError(f"header announces {n_samples} samples but {n_read} were read (truncated file?)",
                                line=HEADER_LINES + n_read + 1, field="samples")

    def stack(rows, name):
        return np.array(rows, dtype=np.float64).reshape(len(rows), schema.dim(name))

    source_split = DomainSplit(np.array(source["ids"], dtype=np.int64),
                               {m: stack(source[m], m) for m in schema.names},
                               np.array(source["labels"], dtype=np.int64))
    target_ids = np.array(target["ids"], dtype=np.int64)
    target_split = DomainSplit(target_ids, {m: stack(target[m], m) for m in schema.target_names})

    if has_truth is None:
        has_truth = bool(target["truth"]) and all(t is not None for t in target["truth"])
    hidden_truth = None
    if has_truth:
        kept = {m: stack(rows, m) for m, rows in hidden_payloads.items() if all(r is not None for r in rows)}
        hidden_truth = HiddenTruth(target_ids, np.array(target["truth"], dtype=np.int64), kept)
    try:
        return MultiModalDataset(schema, source_split, target_split, hidden_truth)
    except ValueError as err:
        raise DatasetParseError(str(err), field="dataset") from err


def load(path: PathLike) -> MultiModalDataset:
    with open(path, "r") as in_IO:
        text = in_IO.read()
    ds = loads(text)
    logger.info("read %d samples from %s", ds.n, path)
    return ds
