"""Text formats for matrices, systems and sets, and deterministic JSON/CSV output.

Matrix file::

    r t
    a_11 ... a_1t
    ...
    a_r1 ... a_rt

System file (one row per linear form, d coefficients each)::

    d t
    c_11 ... c_1d
    ...
    constants: b_1 ... b_t      (optional)
    modulus: M                  (optional)

Set file: one integer per line.  Blank lines and ``#`` comments are ignored
everywhere.  Parse errors carry the 1-based line number.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import is_dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np

from .errors import ValidationError
from .linsys import IntMatrix, LinearSystem

PathLike = Union[str, Path]


def _lines(text: str) -> list[tuple[int, str]]:
    out = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append((no, line))
    return out


def _ints(no: int, parts: Sequence[str]) -> list[int]:
    try:
        return [int(p) for p in parts]
    except ValueError as exc:
        raise ValidationError(f"line {no}: expected integers, got {' '.join(parts)!r}") from exc


def _read(path: PathLike) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


def _header(lines: list[tuple[int, str]], what: str) -> tuple[int, int]:
    if not lines:
        raise ValidationError(f"empty {what} file")
    no, line = lines[0]
    head = _ints(no, line.split())
    if len(head) != 2 or min(head) < 0:
        raise ValidationError(f"line {no}: header must be two non-negative integers")
    return head[0], head[1]


def parse_matrix(text: str) -> IntMatrix:
    lines = _lines(text)
    r, t = _header(lines, "matrix")
    body = lines[1:]
    if len(body) != r:
        where = body[r][0] if len(body) > r else (lines[-1][0] if lines else 1)
        raise ValidationError(f"line {where}: expected {r} rows, found {len(body)}")
    rows = []
    for no, line in body:
        row = _ints(no, line.split())
        if len(row) != t:
            raise ValidationError(f"line {no}: expected {t} entries, found {len(row)}")
        rows.append(row)
    return IntMatrix.from_rows(rows, t)


def parse_system(text: str) -> LinearSystem:
    lines = _lines(text)
    d, t = _header(lines, "system")
    rows, constants, modulus = [], (), None
    for no, line in lines[1:]:
        key, _, rest = line.partition(":")
        if _ and key.strip().lower() == "constants":
            constants = tuple(_ints(no, rest.split()))
            if len(constants) != t:
                raise ValidationError(f"line {no}: expected {t} constants")
        elif _ and key.strip().lower() == "modulus":
            vals = _ints(no, rest.split())
            if len(vals) != 1 or vals[0] < 2:
                raise ValidationError(f"line {no}: modulus must be one integer >= 2")
            modulus = vals[0]
        else:
            row = _ints(no, line.split())
            if len(row) != d:
                raise ValidationError(f"line {no}: expected {d} coefficients, found {len(row)}")
            rows.append(tuple(row))
    if len(rows) != t:
        raise ValidationError(f"expected {t} forms, found {len(rows)}")
    return LinearSystem(tuple(rows), d, constants, modulus)


def parse_set(text: str) -> np.ndarray:
    vals = []
    for no, line in _lines(text):
        parts = line.split()
        if len(parts) != 1:
            raise ValidationError(f"line {no}: expected one integer per line")
        vals.extend(_ints(no, parts))
    return np.array(sorted(set(vals)), dtype=np.int64)


def read_matrix(path: PathLike) -> IntMatrix:
    return parse_matrix(_read(path))


def read_system(path: PathLike) -> LinearSystem:
    return parse_system(_read(path))


def read_set(path: PathLike) -> np.ndarray:
    return parse_set(_read(path))


def format_matrix(V: IntMatrix) -> str:
    lines = [f"{V.r} {V.t}"] + [" ".join(str(a) for a in row) for row in V.entries]
    return "\n".join(lines) + "\n"


def format_system(psi: LinearSystem) -> str:
    lines = [f"{psi.d} {psi.t}"] + [" ".join(str(a) for a in row) for row in psi.coeffs]
    if any(psi.constants):
        lines.append("constants: " + " ".join(str(b) for b in psi.constants))
    if psi.modulus is not None:
        lines.append(f"modulus: {psi.modulus}")
    return "\n".join(lines) + "\n"


def format_set(A: Iterable[int]) -> str:
    return "".join(f"{int(a)}\n" for a in sorted(set(int(x) for x in A)))


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become strings so output stays standard JSON."""
    if hasattr(obj, "to_dict") and callable(obj.to_dict):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [to_jsonable(v) for v in items]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, Fraction):
        return {"fraction": f"{obj.numerator}/{obj.denominator}", "value": float(obj)}
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if is_dataclass(obj):
        return to_jsonable({f: getattr(obj, f) for f in obj.__dataclass_fields__})
    if obj is None or isinstance(obj, str):
        return obj
    raise ValidationError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def function_csv(values: np.ndarray) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "value"])
    for i, v in enumerate(np.asarray(values)):
        w.writerow([i, repr(float(np.real(v)))])
    return buf.getvalue()


def table_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)
