"""JSON and CSV forms for sets, functions, systems, sequences and reports.

Every rational is written as a ``"num/den"`` string so that files round-trip
exactly. JSON output is key-sorted and compact-indented for byte-stable reruns.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping

from .lp_operator import SimpleFunction
from .measure_core import DyadicSet, StepFunction, as_fraction, format_rational
from .tower import LeveledSet, TowerSystem, bdp_system, custom_system, geometric_system

SCHEMA_VERSION = "1.0"
CSV_COLUMNS = ("n", "value_num", "value_den", "tag")
SEQ_COLUMNS = ("index", "num", "den")


class DescriptorError(ValueError):
    """A malformed input document; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, Fraction):
        return format_rational(obj)
    if isinstance(obj, DyadicSet):
        return obj.to_text()
    if isinstance(obj, LeveledSet):
        return leveled_to_json(obj)
    if isinstance(obj, SimpleFunction):
        return simple_to_json(obj)
    if isinstance(obj, StepFunction):
        return step_to_json(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: to_jsonable(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
            if not callable(getattr(obj, f.name))
        }
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, float):
        raise TypeError("floats are not allowed in exact reports")
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# -- sets and functions -----------------------------------------------------


def leveled_to_json(s: LeveledSet) -> dict[str, str]:
    return {str(p): fib.to_text() for p, fib in s}


def _parse_set(text: Any, where: str) -> DyadicSet:
    if not isinstance(text, str):
        raise DescriptorError(where, "expected a set string like '0:1/2,3/4:1'")
    try:
        return DyadicSet.from_text(text)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise DescriptorError(where, str(exc)) from None


def _parse_level(key: Any, where: str) -> int:
    try:
        return int(key)
    except (TypeError, ValueError):
        raise DescriptorError(where, f"level must be an integer, got {key!r}") from None


def _parse_rational(value: Any, where: str) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise DescriptorError(where, "rationals must be integers or 'num/den' strings")
    try:
        return as_fraction(value)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise DescriptorError(where, str(exc)) from None


def leveled_from_json(doc: Any, field: str = "set") -> LeveledSet:
    if not isinstance(doc, Mapping):
        raise DescriptorError(field, "expected an object mapping level -> set string")
    return LeveledSet(
        (_parse_level(k, f"{field}.{k}"), _parse_set(v, f"{field}.{k}")) for k, v in doc.items()
    )


def simple_to_json(phi: SimpleFunction) -> list[dict[str, Any]]:
    return [
        {"level": p, "set": s.to_text(), "coeff": format_rational(c)} for p, s, c in phi
    ]


def simple_from_json(doc: Any, field: str = "phi") -> SimpleFunction:
    if not isinstance(doc, list):
        raise DescriptorError(field, "expected a list of {level, set, coeff}")
    terms = []
    for i, term in enumerate(doc):
        where = f"{field}[{i}]"
        if not isinstance(term, Mapping) or set(term) != {"level", "set", "coeff"}:
            raise DescriptorError(where, "each term needs exactly level, set and coeff")
        terms.append(
            (
                _parse_level(term["level"], f"{where}.level"),
                _parse_set(term["set"], f"{where}.set"),
                _parse_rational(term["coeff"], f"{where}.coeff"),
            )
        )
    return SimpleFunction(terms)


def step_to_json(d: StepFunction) -> list[list[str]]:
    return [[format_rational(lo), format_rational(hi), format_rational(v)] for lo, hi, v in d.pieces()]


def step_from_json(doc: Any, field: str) -> StepFunction:
    if isinstance(doc, (str, int)) and not isinstance(doc, bool):
        value = _parse_rational(doc, field)
        if value <= 0:
            raise DescriptorError(field, "density must be positive")
        return StepFunction.constant(value)
    if not isinstance(doc, list) or not doc:
        raise DescriptorError(field, "expected a constant or a list of [lo, hi, value]")
    pieces = []
    for i, piece in enumerate(doc):
        where = f"{field}[{i}]"
        if not isinstance(piece, list) or len(piece) != 3:
            raise DescriptorError(where, "expected [lo, hi, value]")
        pieces.append(tuple(_parse_rational(x, where) for x in piece))
    try:
        return StepFunction.from_pieces(pieces)
    except ValueError as exc:
        raise DescriptorError(field, str(exc)) from None


# -- system descriptors -------------------------------------------------------


def system_to_descriptor(sys: TowerSystem) -> dict[str, Any]:
    doc: dict[str, Any] = {"name": sys.name, "kind": sys.kind, "parameters": {}}
    if sys.kind == "geometric":
        doc["parameters"] = {"rho": format_rational(sys.parameters["rho"])}
    elif sys.kind == "custom":
        table = sys.parameters.get("table", {})
        default = sys.parameters.get("default")
        doc["parameters"] = {"default": to_jsonable(default)}
        doc["densities"] = {str(p): step_to_json(d) for p, d in sorted(table.items())}
    return doc


def _default_rule(spec: Any, field: str):
    if isinstance(spec, Mapping):
        if set(spec) != {"rho"}:
            raise DescriptorError(field, "a default rule object must be {\"rho\": r}")
        rho = _parse_rational(spec["rho"], f"{field}.rho")
        if not 0 < rho < 1:
            raise DescriptorError(f"{field}.rho", "must lie in (0, 1)")
        flat = {}

        def rule(p: int) -> StepFunction:
            if p not in flat:
                flat[p] = StepFunction.constant(rho ** abs(p))
            return flat[p]

        return rule, {"rho": format_rational(rho)}
    value = _parse_rational(spec, field)
    if value <= 0:
        raise DescriptorError(field, "default density must be positive")
    return value, None


def system_from_descriptor(doc: Any) -> TowerSystem:
    if not isinstance(doc, Mapping):
        raise DescriptorError("system", "descriptor must be a JSON object")
    kind = doc.get("kind")
    params = doc.get("parameters", {}) or {}
    if not isinstance(params, Mapping):
        raise DescriptorError("parameters", "expected an object")
    if kind == "bdp":
        return bdp_system()
    if kind == "geometric":
        if "rho" not in params:
            raise DescriptorError("parameters.rho", "required for geometric systems")
        rho = _parse_rational(params["rho"], "parameters.rho")
        if not 0 < rho < 1:
            raise DescriptorError("parameters.rho", "must lie in (0, 1)")
        return geometric_system(rho)
    if kind == "custom":
        name = doc.get("name", "custom")
        if not isinstance(name, str):
            raise DescriptorError("name", "expected a string")
        densities = doc.get("densities", {}) or {}
        if not isinstance(densities, Mapping):
            raise DescriptorError("densities", "expected an object mapping position -> density")
        table = {
            _parse_level(k, f"densities.{k}"): step_from_json(v, f"densities.{k}")
            for k, v in densities.items()
        }
        default, spec = _default_rule(params.get("default", 1), "parameters.default")
        return custom_system(name, table, default, spec)
    raise DescriptorError("kind", f"expected 'bdp', 'geometric' or 'custom', got {kind!r}")


def load_system(path: str | Path) -> TowerSystem:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DescriptorError("system", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DescriptorError("system", f"invalid JSON in {path}: {exc.msg}") from None
    return system_from_descriptor(doc)


# -- reports and CSV ------------------------------------------------------------


def report(command: str, config: Mapping[str, Any], body: Mapping[str, Any]) -> dict[str, Any]:
    return {"schema_version": SCHEMA_VERSION, "command": command, "config": dict(config), **body}


def sequences_to_csv(rows: Iterable[tuple[int, Fraction, str]]) -> str:
    """Rows ``(n, value, tag)`` as CSV with columns n, value_num, value_den, tag."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for n, v, tag in rows:
        v = as_fraction(v)
        w.writerow((n, v.numerator, v.denominator, tag))
    return buf.getvalue()


def sequences_from_csv(text: str) -> list[tuple[int, Fraction, str]]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise DescriptorError("csv", f"expected columns {','.join(CSV_COLUMNS)}")
    return [
        (int(r["n"]), Fraction(int(r["value_num"]), int(r["value_den"])), r["tag"]) for r in reader
    ]


def seq_to_csv(values: Mapping[int, Fraction]) -> str:
    """Weight or norm p-th powers as CSV with columns index, num, den."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SEQ_COLUMNS)
    for k in sorted(values):
        v = as_fraction(values[k])
        w.writerow((k, v.numerator, v.denominator))
    return buf.getvalue()


def seq_from_csv(text: str) -> dict[int, Fraction]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != SEQ_COLUMNS:
        raise DescriptorError("csv", f"expected columns {','.join(SEQ_COLUMNS)}")
    out = {}
    for i, r in enumerate(reader):
        try:
            out[int(r["index"])] = Fraction(int(r["num"]), int(r["den"]))
        except (TypeError, ValueError, ZeroDivisionError):
            raise DescriptorError(f"csv row {i + 1}", "index, num and den must be integers") from None
    return out
