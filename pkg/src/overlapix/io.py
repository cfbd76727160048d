"""Envelope files in, result bundles out.

JSON envelope file::

    {
      "schema_version": 1,
      "characteristics": [
        {"id": "location", "kind": "categorical"},
        {"id": "time", "kind": "ordered", "order_key": "integer", "resolution": "year"}
      ],
      "studies": [
        {"study_id": "S1", "sample_size": 3,
         "ranges": {"location": ["area 1", "area 2"], "time": "2021..2022"},
         "effect": 0.4, "se": 0.1, "arms": {"control": 2, "treatment": 1}}
      ]
    }

A range is a list of atoms, an interval string ``start..end`` (ordered
characteristics only, inclusive), an object ``{"start": ..., "end": ...}``, or
a list mixing atoms and intervals.

CSV envelope file: one row per study. Columns ``study_id`` and
``sample_size`` are required; ``effect``, ``se`` and ``arm:<name>`` are
optional; every other column is a characteristic whose header may carry its
declaration, e.g. ``location:categorical``, ``time:ordered:integer`` or
``age:ordered:declared=0-17|18-64|65+``. Cells hold atoms separated by ``;``
and ordered intervals as ``start..end``. An empty cell is a missing range.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import re
from pathlib import Path
from typing import Sequence

from . import __version__
from .exceptions import FormatError, ValidationError
from .model import (
    CATEGORICAL,
    ORDERED,
    Characteristic,
    StudyEnvelope,
    ReportedRange,
    fill_missing_ranges,
)

SCHEMA_VERSION = 1
BUNDLE_FORMAT = "overlapix-result-bundle"
MISSING_POLICIES = ("error", "full-range")

_FILE_KEYS = {"schema_version", "characteristics", "studies"}
_CHAR_KEYS = {"id", "kind", "order_key", "atoms", "resolution"}
_STUDY_KEYS = {"study_id", "sample_size", "ranges", "effect", "se", "arms"}


def _line_of(text: str | None, needle: str) -> int | None:
    if not text:
        return None
    pos = text.find(needle)
    return text.count("\n", 0, pos) + 1 if pos >= 0 else None


def _parse_range_items(c: Characteristic, value, where) -> frozenset[str]:
    def interval(start, end):
        return c.expand(start, end)

    def item(v):
        if isinstance(v, dict):
            extra = set(v) - {"start", "end"}
            if extra or not {"start", "end"} <= set(v):
                raise FormatError(f"{where}: an interval needs exactly 'start' and 'end'")
            return interval(v["start"], v["end"])
        if isinstance(v, str) and ".." in v:
            # also for categorical ones, where expand() explains the problem
            start, _, end = v.partition("..")
            return interval(start, end)
        return frozenset([c.normalize(v)])

    try:
        if isinstance(value, list):
            atoms = frozenset().union(*(item(v) for v in value)) if value else frozenset()
        else:
            atoms = item(value)
    except FormatError as exc:
        if exc.detail.startswith(where):
            raise
        raise FormatError(f"{where}: {exc.detail}") from None
    if not atoms:
        raise FormatError(f"{where}: empty range")
    return atoms


def _parse_characteristic(d, strict: bool, text=None) -> Characteristic:
    if not isinstance(d, dict) or "id" not in d:
        raise FormatError("each characteristic needs an 'id'", line=_line_of(text, '"characteristics"'))
    extra = set(d) - _CHAR_KEYS
    if strict and extra:
        raise FormatError(
            f"characteristic {d['id']!r}: unknown fields {sorted(extra)}",
            line=_line_of(text, json.dumps(d["id"])),
        )
    try:
        return Characteristic(
            str(d["id"]),
            d.get("kind", CATEGORICAL),
            d.get("order_key"),
            tuple(str(a) for a in d.get("atoms", ())),
            d.get("resolution"),
        )
    except FormatError as exc:
        raise exc.located(line=_line_of(text, json.dumps(d["id"]))) from None


def parse_study(
    row: dict,
    characteristics: Sequence[Characteristic],
    *,
    strict: bool = True,
    allow_missing: bool = False,
    text: str | None = None,
) -> StudyEnvelope:
    """One study object of the JSON format to a :class:`StudyEnvelope`."""
    if not isinstance(row, dict):
        raise FormatError("each study must be an object")
    sid = row.get("study_id")
    line = _line_of(text, json.dumps(sid)) if sid is not None else None
    if not isinstance(sid, str) or not sid:
        raise FormatError("study_id must be a non-empty string", line=line)
    extra = set(row) - _STUDY_KEYS
    if strict and extra:
        raise FormatError(f"study {sid!r}: unknown fields {sorted(extra)}", line=line)
    size = row.get("sample_size")
    if isinstance(size, bool) or not isinstance(size, int) or size < 1:
        raise FormatError(f"study {sid!r}: sample_size must be a positive integer", line=line)
    ranges_in = row.get("ranges") or {}
    if not isinstance(ranges_in, dict):
        raise FormatError(f"study {sid!r}: 'ranges' must be an object", line=line)
    known = {c.id for c in characteristics}
    unknown = sorted(set(ranges_in) - known)
    if unknown:
        raise FormatError(f"study {sid!r}: undeclared characteristic {unknown[0]!r}", line=line)
    ranges = []
    for c in characteristics:
        value = ranges_in.get(c.id)
        if value is None or value == [] or value == "":
            if allow_missing:
                continue
            raise FormatError(
                f"study {sid!r} is missing characteristic {c.id!r}"
                " (use --missing full-range to treat it as the full range)",
                line=line,
            )
        try:
            atoms = _parse_range_items(c, value, f"study {sid!r}, {c.id!r}")
        except FormatError as exc:
            raise exc.located(line=line) from None
        ranges.append(ReportedRange(c.id, atoms))
    arms = row.get("arms") or {}
    if not isinstance(arms, dict) or not all(
        isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in arms.values()
    ):
        raise FormatError(f"study {sid!r}: arms must map names to non-negative counts", line=line)
    effect, se = row.get("effect"), row.get("se")
    for name, v in (("effect", effect), ("se", se)):
        if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
            raise FormatError(f"study {sid!r}: {name} must be a number", line=line)
    try:
        return StudyEnvelope(
            sid,
            size,
            tuple(ranges),
            None if effect is None else float(effect),
            None if se is None else float(se),
            tuple(sorted((str(k), int(v)) for k, v in arms.items())),
        )
    except ValidationError as exc:
        raise FormatError(str(exc), line=line) from None


def _study_lines(text: str | None, envelopes) -> list[int | None]:
    """Line of each study's ``study_id`` in JSON text, occurrence by occurrence."""
    if not text:
        return [None] * len(envelopes)
    used: dict[str, int] = {}
    out = []
    for env in envelopes:
        pattern = r'"study_id"\s*:\s*' + re.escape(json.dumps(env.study_id))
        hits = [m.start() for m in re.finditer(pattern, text)]
        k = used.get(env.study_id, 0)
        used[env.study_id] = k + 1
        out.append(text.count("\n", 0, hits[k]) + 1 if k < len(hits) else None)
    return out


def _finish(envelopes, characteristics, missing, source, lines=None):
    if missing not in MISSING_POLICIES:
        raise ValidationError(f"missing policy must be one of {MISSING_POLICIES}")
    seen = {}
    for i, env in enumerate(envelopes):
        if env.study_id in seen:
            raise FormatError(
                f"duplicate study_id {env.study_id!r}",
                source=source,
                line=lines[i] if lines else None,
            )
        seen[env.study_id] = env
    if missing == "full-range" and envelopes:
        envelopes = fill_missing_ranges(envelopes, characteristics)
    return envelopes


def loads_json(text: str, *, missing: str = "error", strict: bool = True, source=None):
    """Parse JSON envelope text. Returns ``(envelopes, characteristics)``.

    A result bundle is accepted too; its echoed input is parsed.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, source=source, line=exc.lineno, column=exc.colno) from None
    if isinstance(data, dict) and data.get("format") == BUNDLE_FORMAT:
        data = data["input"]
        text = None
    if not isinstance(data, dict):
        raise FormatError("top level must be an object", source=source, line=1)
    extra = set(data) - _FILE_KEYS
    if strict and extra:
        raise FormatError(f"unknown top-level fields {sorted(extra)}", source=source)
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise FormatError(f"unsupported schema_version {version!r}", source=source)
    studies = data.get("studies", [])
    if not isinstance(studies, list):
        raise FormatError("'studies' must be a list", source=source)
    decls = data.get("characteristics")
    if decls is None:
        ids = []
        for s in studies:
            for k in (s.get("ranges") or {}) if isinstance(s, dict) else ():
                if k not in ids:
                    ids.append(k)
        characteristics = [Characteristic(k) for k in ids]
    else:
        try:
            characteristics = [_parse_characteristic(d, strict, text) for d in decls]
        except FormatError as exc:
            raise exc.located(source=source) from None
        ids = [c.id for c in characteristics]
        if len(set(ids)) != len(ids):
            raise FormatError("duplicate characteristic id", source=source)
    try:
        envelopes = [
            parse_study(
                s, characteristics, strict=strict, allow_missing=missing == "full-range", text=text
            )
            for s in studies
        ]
    except FormatError as exc:
        raise exc.located(source=source) from None
    lines = _study_lines(text, envelopes)
    return _finish(envelopes, characteristics, missing, source, lines), characteristics


def _parse_header(name: str, col: int, source) -> Characteristic:
    parts = name.split(":")
    cid = parts[0].strip()
    try:
        if len(parts) == 1:
            return Characteristic(cid)
        kind = parts[1].strip()
        if kind == CATEGORICAL:
            if len(parts) > 2:
                raise FormatError("categorical columns take no order key")
            return Characteristic(cid, CATEGORICAL)
        if kind != ORDERED or len(parts) != 3:
            raise FormatError(f"cannot read characteristic declaration {name!r}")
        key = parts[2].strip()
        atoms: tuple[str, ...] = ()
        if key.startswith("declared="):
            atoms = tuple(a.strip() for a in key[len("declared="):].split("|"))
            key = "declared"
        return Characteristic(cid, ORDERED, key, atoms)
    except FormatError as exc:
        raise exc.located(source=source, line=1, column=col) from None


def loads_csv(text: str, *, missing: str = "error", strict: bool = True, source=None):
    """Parse CSV envelope text. Returns ``(envelopes, characteristics)``."""
    reader = csv.reader(_io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return [], []
    header = [h.strip() for h in header]
    for req in ("study_id", "sample_size"):
        if req not in header:
            raise FormatError(f"missing required column {req!r}", source=source, line=1)
    if len(set(header)) != len(header):
        raise FormatError("duplicate column", source=source, line=1)
    char_cols = []
    arm_cols = []
    for col, name in enumerate(header, start=1):
        if name in ("study_id", "sample_size", "effect", "se"):
            continue
        if name.startswith("arm:"):
            arm_cols.append((col, name[4:]))
            continue
        if not name:
            raise FormatError("empty column name", source=source, line=1, column=col)
        char_cols.append((col, _parse_header(name, col, source)))
    characteristics = [c for _, c in char_cols]
    pos = {name: i for i, name in enumerate(header)}
    envelopes = []
    lines: list[int] = []
    for row in reader:
        line = reader.line_num
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise FormatError(
                f"expected {len(header)} fields, got {len(row)}", source=source, line=line
            )
        sid = row[pos["study_id"]].strip()
        if not sid:
            raise FormatError("empty study_id", source=source, line=line, column=pos["study_id"] + 1)
        try:
            size = int(row[pos["sample_size"]])
        except ValueError:
            raise FormatError(
                "sample_size must be an integer", source=source, line=line,
                column=pos["sample_size"] + 1,
            ) from None
        if size < 1:
            raise FormatError(
                "sample_size must be positive", source=source, line=line,
                column=pos["sample_size"] + 1,
            )
        ranges = []
        for col, c in char_cols:
            cell = row[col - 1].strip()
            if not cell:
                if missing == "full-range":
                    continue
                raise FormatError(
                    f"study {sid!r} is missing characteristic {c.id!r}"
                    " (use --missing full-range to treat it as the full range)",
                    source=source, line=line, column=col,
                )
            items = [t.strip() for t in cell.split(";") if t.strip()]
            try:
                atoms = _parse_range_items(c, items, f"study {sid!r}, {c.id!r}")
            except FormatError as exc:
                raise exc.located(source=source, line=line, column=col) from None
            ranges.append(ReportedRange(c.id, atoms))
        extras = {}
        for name in ("effect", "se"):
            if name in pos and row[pos[name]].strip():
                try:
                    extras[name] = float(row[pos[name]])
                except ValueError:
                    raise FormatError(
                        f"{name} must be a number", source=source, line=line, column=pos[name] + 1
                    ) from None
        arms = []
        for col, arm in arm_cols:
            cell = row[col - 1].strip()
            if cell:
                try:
                    arms.append((arm, int(cell)))
                except ValueError:
                    raise FormatError(
                        "arm counts must be integers", source=source, line=line, column=col
                    ) from None
        try:
            envelopes.append(
                StudyEnvelope(sid, size, tuple(ranges), arms=tuple(sorted(arms)), **extras)
            )
        except ValidationError as exc:
            raise FormatError(str(exc), source=source, line=line) from None
        lines.append(line)
    return _finish(envelopes, characteristics, missing, source, lines), characteristics


def infer_format(path) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "json"


def ingest(path, format: str | None = None, *, missing: str = "error", strict: bool = True):
    """Read an envelope file. Returns ``(envelopes, characteristics)``."""
    path = Path(path)
    fmt = format or infer_format(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc.strerror}", source=path) from None
    if fmt == "json":
        return loads_json(text, missing=missing, strict=strict, source=path)
    if fmt == "csv":
        return loads_csv(text, missing=missing, strict=strict, source=path)
    raise ValidationError(f"unknown input format {fmt!r}")


# ---------------------------------------------------------------------------
# writing


def envelope_file_dict(
    envelopes: Sequence[StudyEnvelope], characteristics: Sequence[Characteristic]
) -> dict:
    """Canonical JSON envelope-file content; atoms listed in domain order."""
    decls = []
    for c in characteristics:
        d = {"id": c.id, "kind": c.kind}
        if c.order_key:
            d["order_key"] = c.order_key
        if c.atoms:
            d["atoms"] = list(c.atoms)
        if c.resolution:
            d["resolution"] = c.resolution
        decls.append(d)
    studies = []
    for env in envelopes:
        row = {
            "study_id": env.study_id,
            "sample_size": env.sample_size,
            "ranges": {
                c.id: sorted(env.atoms(c.id), key=c.sort_key) for c in characteristics
            },
        }
        if env.effect is not None:
            row["effect"] = env.effect
        if env.se is not None:
            row["se"] = env.se
        if env.arms:
            row["arms"] = dict(env.arms)
        studies.append(row)
    return {"schema_version": SCHEMA_VERSION, "characteristics": decls, "studies": studies}


def dumps(obj) -> str:
    """Deterministic JSON text used for every file this package writes."""
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def content_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def read_partition_file(path) -> dict:
    """Explicit bins: ``{characteristic: [[atom, ...], ...]}``."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, source=path, line=exc.lineno, column=exc.colno) from None
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc.strerror}", source=path) from None
    if not isinstance(data, dict) or not all(
        isinstance(v, list) and all(isinstance(b, list) for b in v) for v in data.values()
    ):
        raise FormatError("partition file must map characteristic ids to lists of bins", source=path)
    return {k: [[str(a) for a in b] for b in v] for k, v in data.items()}


def resolve_partition(spec: str):
    """CLI partition flag to a scheme accepted by ``partition_domains``."""
    if spec == "singleton" or spec.startswith("width="):
        return spec
    if spec.startswith("file="):
        return read_partition_file(spec[len("file="):])
    raise ValidationError(f"unknown partition {spec!r}; use singleton, width=N or file=PATH")


def write_text(path, text: str) -> None:
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            os.makedirs(path.parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc.strerror}") from None


def tool_info() -> dict:
    return {"name": "overlapix", "version": __version__}
