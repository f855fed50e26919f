"""JSON design files: strict parsing against a schema and canonical serialization.

A design file looks like::

    {
      "version": 1,
      "peg": {"points": [[x, y], ...], "bump_radius": r, "tip": [x, y]},
      "socket": {"vertices": [[x, y], ...], "insertion_axis": [ax, ay]},
      "correspondence": [[point, edge], ...],
      "errors": {"dx": .., "dtheta": .., "scale": ..}
    }

Lengths are in design units and angles in radians.  ``errors`` is optional.
"""
from __future__ import annotations

import json
import math
import os
import re
import tempfile
from pathlib import Path

import jsonschema

from .design import (
    MAX_EDGES,
    MAX_POINTS,
    MIN_EDGES,
    MIN_POINTS,
    Correspondence,
    DesignError,
    ErrorModel,
    JointDesign,
    PegDesign,
    SocketDesign,
    validate_design,
)
from .geometry import GeometryError

FORMAT_VERSION = 1

_XY = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_ERRORS = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "dx": {"type": "number", "minimum": 0},
        "dtheta": {"type": "number", "minimum": 0},
        "scale": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
    },
}

DESIGN_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "peg", "socket", "correspondence"],
    "properties": {
        "version": {"const": FORMAT_VERSION},
        "peg": {
            "type": "object",
            "additionalProperties": False,
            "required": ["points", "bump_radius", "tip"],
            "properties": {
                "points": {"type": "array", "items": _XY,
                           "minItems": MIN_POINTS, "maxItems": MAX_POINTS},
                "bump_radius": {"type": "number", "exclusiveMinimum": 0},
                "tip": _XY,
            },
        },
        "socket": {
            "type": "object",
            "additionalProperties": False,
            "required": ["vertices", "insertion_axis"],
            "properties": {
                "vertices": {"type": "array", "items": _XY,
                             "minItems": MIN_EDGES + 1, "maxItems": MAX_EDGES + 1},
                "insertion_axis": _XY,
            },
        },
        "correspondence": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer", "minimum": 0},
                      "minItems": 2, "maxItems": 2},
            "minItems": 1,
        },
        "errors": _ERRORS,
    },
}

ERRORS_SCHEMA = dict(_ERRORS, **{"$schema": DESIGN_SCHEMA["$schema"]})


class DesignFileError(ValueError):
    """A design or error-model file that cannot be used; the message names the offending path."""


def _path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _describe(err: jsonschema.ValidationError) -> str:
    where = _path(err.absolute_path)
    v = err.validator
    if v == "maxItems":
        return f"{where}: {len(err.instance)} items, at most {err.validator_value} allowed"
    if v == "minItems":
        return f"{where}: {len(err.instance)} items, at least {err.validator_value} required"
    return f"{where}: {err.message}"


def _check(doc, schema) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.validator))
    if errors:
        raise DesignFileError("; ".join(_describe(e) for e in errors))


def _loads(data) -> object:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise DesignFileError(f"$: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _errors_from(doc: dict) -> ErrorModel:
    return ErrorModel(float(doc.get("dx", 0.0)), float(doc.get("dtheta", 0.0)), float(doc.get("scale", 0.0)))


def design_from_dict(doc: dict) -> tuple[JointDesign, ErrorModel | None]:
    _check(doc, DESIGN_SCHEMA)
    peg, sock = doc["peg"], doc["socket"]
    n, m = len(peg["points"]), len(sock["vertices"]) - 1
    for k, (i, j) in enumerate(doc["correspondence"]):
        if i >= n:
            raise DesignFileError(f"$.correspondence[{k}][0]: point {i} does not exist (n = {n})")
        if j >= m:
            raise DesignFileError(f"$.correspondence[{k}][1]: edge {j} does not exist (m = {m})")
    try:
        d = JointDesign(
            PegDesign(peg["points"], peg["tip"], peg["bump_radius"]),
            SocketDesign(sock["vertices"], sock["insertion_axis"]),
            Correspondence(frozenset(tuple(p) for p in doc["correspondence"])),
        )
        errors = _errors_from(doc["errors"]) if "errors" in doc else None
    except (DesignError, GeometryError) as exc:
        raise DesignFileError(f"$: {exc}") from None
    report = validate_design(d)
    if not report.ok:
        raise DesignFileError(f"$: invalid design: {report}")
    return d, errors


def parse_design(data) -> JointDesign:
    """Strictly parse a JSON design document (str or bytes)."""
    return design_from_dict(_loads(data))[0]


def parse_design_file(data) -> tuple[JointDesign, ErrorModel | None]:
    """Design and, when present, its error model."""
    return design_from_dict(_loads(data))


def parse_errors(data) -> ErrorModel:
    doc = _loads(data)
    _check(doc, ERRORS_SCHEMA)
    return _errors_from(doc)


def _num(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("non-finite value")
    return 0.0 if x == 0.0 else x


def _xy(v) -> list[float]:
    return [_num(v[0]), _num(v[1])]


def design_to_dict(d: JointDesign, errors: ErrorModel | None = None) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "peg": {
            "points": [_xy(p) for p in d.peg.points],
            "bump_radius": _num(d.peg.bump_radius),
            "tip": _xy(d.peg.tip),
        },
        "socket": {
            "vertices": [_xy(v) for v in d.socket.vertices],
            "insertion_axis": _xy(d.socket.insertion_axis),
        },
        "correspondence": [list(p) for p in sorted(d.goal_pairs)],
    }
    if errors is not None:
        doc["errors"] = {"dx": _num(errors.dx), "dtheta": _num(errors.dtheta), "scale": _num(errors.scale)}
    return doc


_FLAT_ARRAY = re.compile(r"\[\s*(-?[\d.eE+-]+(?:,\s*-?[\d.eE+-]+)*)\s*\]")


def dumps(doc) -> str:
    """Canonical JSON text: sorted keys, two-space indent, number pairs on one line,
    shortest round-trip floats."""
    text = json.dumps(doc, sort_keys=True, indent=2)
    text = _FLAT_ARRAY.sub(lambda mt: "[" + re.sub(r",\s*", ", ", mt.group(1)) + "]", text)
    return text + "\n"


def serialize_design(d: JointDesign, errors: ErrorModel | None = None) -> str:
    return dumps(design_to_dict(d, errors))


def canonical_text(data) -> str:
    """Canonical form of a design document, as :func:`serialize_design` would write it."""
    d, errors = parse_design_file(data)
    return serialize_design(d, errors)


def write_atomic(path, text: str | bytes) -> None:
    """Write through a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    mode = "wb" if isinstance(text, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_design(path) -> tuple[JointDesign, ErrorModel | None]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DesignFileError(f"cannot read {path}: {exc.strerror}") from None
    return parse_design_file(data)


def load_errors(path) -> ErrorModel:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DesignFileError(f"cannot read {path}: {exc.strerror}") from None
    return parse_errors(data)
