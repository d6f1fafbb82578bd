"""Run configuration: a single flat JSON document validated against a schema.

Validation errors carry the line of the offending key or value, e.g.
``config.json:7: tasks[1].m: 0 is less than the minimum of 1``.
"""

import json
import json.decoder
import json.scanner
import re
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .exceptions import ConfigError
from .model import BUILTIN_MODELS

__all__ = ["RunConfig", "load_config", "parse_config", "CONFIG_SCHEMA", "TASK_KINDS"]

TASK_KINDS = ("backbone", "melnikov", "ridge", "frc", "validate")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_num_list = {"type": "array", "items": _num, "minItems": 1}
_pos_list = {"type": "array", "items": _pos, "minItems": 1}
_pair = {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2}
_id = {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"}


def _task(kind, props, required=()):
    base = {"kind": {"const": kind}, "id": _id}
    base.update(props)
    return {
        "type": "object",
        "properties": base,
        "required": ["kind", "id", *required],
        "additionalProperties": False,
    }


_TASK_SCHEMAS = {
    "backbone": _task("backbone", {
        "mode": _posint,
        "amplitude_max": _pos,
        "energy_max": _pos,
        "seed_amplitude": _pos,
        "max_points": _posint,
        "ds": _pos,
        "ds_max": _pos,
        "check_normality": {"type": "boolean"},
        "ridge_target": _pos,
    }, required=("mode",)),
    "melnikov": _task("melnikov", {
        "source": {"type": "string"},
        "orbit_index": {"type": "integer"},
        "m": _posint,
        "l": _posint,
        "e": _num_list,
        "grid_size": _posint,
    }, required=("source", "e")),
    "ridge": _task("ridge", {
        "source": {"type": "string"},
        "l": _posint,
        "e": _num_list,
        "window": {"type": "integer", "minimum": 3},
        "wrt": {"enum": ["amplitude", "energy", "frequency", "family"]},
    }, required=("source",)),
    "frc": _task("frc", {
        "e": _num_list,
        "eps": _pos_list,
        "omega_range": _pair,
        "periods": _posint,
        "ds": _pos,
        "ds_max": _pos,
        "max_points": _posint,
        "fold_e_range": _pair,
    }, required=("e", "eps", "omega_range")),
    "validate": _task("validate", {
        "source": {"type": "string"},
        "e": _num,
        "eps": _pos_list,
        "window": _pos,
        "periods": _posint,
    }, required=("source", "e", "eps")),
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "model": {
            "type": "object",
            "properties": {
                "name": {"enum": list(BUILTIN_MODELS)},
                "params": {"type": "object"},
            },
            "required": ["name"],
            "additionalProperties": False,
        },
        "numerics": {
            "type": "object",
            "properties": {
                "rtol": _pos,
                "atol": _pos,
                "shooting_tol": _pos,
                "max_step": _pos,
                "quad_tol": _pos,
                "quad_cap": _posint,
                "cluster_band": _pos,
                "cluster_guard": _pos,
                "zero_band": _pos,
                "ridge_band": _pos,
                "frc_tol": _pos,
                "workers": _posint,
                "dump_trajectories": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "output": {"type": "string", "minLength": 1},
        "tasks": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"kind": {"enum": list(TASK_KINDS)}},
                "required": ["kind"],
            },
        },
    },
    "required": ["model", "tasks"],
    "additionalProperties": False,
}


@dataclass
class RunConfig:
    """Validated run configuration."""

    model: dict
    tasks: list
    numerics: dict = field(default_factory=dict)
    output: str = "nnm_output"
    path: Path | None = None

    def task(self, task_id):
        for t in self.tasks:
            if t["id"] == task_id:
                return t
        return None


# -------------------------------------------------------- line-aware decoding

def _span_decoder(spans):
    dec = json.JSONDecoder()
    base_object = json.decoder.JSONObject
    base_array = json.decoder.JSONArray

    def parse_object(s_and_end, strict, scan_once, object_hook, object_pairs_hook, memo=None):
        s, start = s_and_end
        result, end = base_object(s_and_end, strict, scan_once, object_hook, object_pairs_hook, memo)
        spans[id(result)] = (start - 1, end, result)
        return result, end

    def parse_array(s_and_end, scan_once):
        s, start = s_and_end
        result, end = base_array(s_and_end, scan_once)
        spans[id(result)] = (start - 1, end, result)
        return result, end

    dec.parse_object = parse_object
    dec.parse_array = parse_array
    dec.scan_once = json.scanner.py_make_scanner(dec)
    return dec


def _line_of(text, offset):
    return text.count("\n", 0, offset) + 1


def _locate(text, doc, spans, path):
    """Best-effort offset of the element at ``path`` inside ``text``."""
    node, offset = doc, 0
    for key in path:
        span = spans.get(id(node))
        if span is None:
            break
        start, end, _ = span
        offset = start
        if isinstance(node, dict):
            # first occurrence of the key that is not inside a nested container
            children = [spans[id(v)][:2] for v in node.values() if id(v) in spans]
            pat = re.compile(r'"%s"\s*:' % re.escape(str(key)))
            for m in pat.finditer(text, start, end):
                if not any(a <= m.start() < b for a, b in children):
                    offset = m.start()
                    break
            if key not in node:
                break
            node = node[key]
        elif isinstance(node, list) and isinstance(key, int) and 0 <= key < len(node):
            child = node[key]
            if id(child) in spans:
                offset = spans[id(child)][0]
            node = child
        else:
            break
    return offset


def _format_path(path):
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def parse_config(text, source="<config>"):
    """Parse and validate configuration text; raises ConfigError with a line number."""
    spans = {}  # id(container) -> (start, end, container)
    try:
        doc = _span_decoder(spans).decode(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}", line=exc.lineno) from None

    def fail(path, message):
        line = _line_of(text, _locate(text, doc, spans, list(path)))
        raise ConfigError(f"{source}:{line}: {_format_path(path)}: {message}", line=line)

    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        fail(_error_path(err), _message(err))

    seen = {}
    for i, task in enumerate(doc["tasks"]):
        schema = _TASK_SCHEMAS[task["kind"]]
        task_errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(task),
                             key=lambda e: list(e.absolute_path))
        if task_errors:
            fail(["tasks", i] + _error_path(task_errors[0]), _message(task_errors[0]))
        if task["id"] in seen:
            fail(["tasks", i, "id"], f"duplicate task id {task['id']!r}")
        seen[task["id"]] = task

    base = Path(source).parent if source != "<config>" else Path(".")
    upstream = {"melnikov": ("backbone",), "ridge": ("backbone",), "validate": ("ridge",)}
    for i, task in enumerate(doc["tasks"]):
        src = task.get("source")
        if src is None:
            continue
        if src in seen:
            kind = seen[src]["kind"]
            if kind not in upstream[task["kind"]]:
                fail(["tasks", i, "source"], f"{task['kind']} task needs a {upstream[task['kind']][0]} source, "
                                             f"{src!r} is a {kind} task")
            if _index_of(doc["tasks"], src) > i:
                fail(["tasks", i, "source"], f"source {src!r} is defined after this task")
        elif not (base / src).exists():
            fail(["tasks", i, "source"], f"{src!r} is neither a task id nor an existing file")

    model = doc["model"]
    try:
        from .model import builtin_model

        builtin_model(model["name"], model.get("params"))
    except (ValueError, TypeError) as exc:
        fail(["model", "params"] if "params" in model else ["model"], str(exc))

    return RunConfig(model=model, tasks=list(doc["tasks"]), numerics=dict(doc.get("numerics", {})),
                     output=doc.get("output", "nnm_output"),
                     path=None if source == "<config>" else Path(source))


def _index_of(tasks, task_id):
    return next(i for i, t in enumerate(tasks) if t["id"] == task_id)


def _error_path(err):
    path = list(err.absolute_path)
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        path.append(extra[0])
    return path


def _message(err):
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        return f"unknown key(s) {', '.join(map(repr, extra))}"
    return err.message


def load_config(path):
    """Read and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_config(text, str(path))
