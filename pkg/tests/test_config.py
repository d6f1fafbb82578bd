import json

import pytest

from nnm_melnikov import ConfigError
from nnm_melnikov.config import load_config, parse_config

BASE = {
    "model": {"name": "duffing", "params": {"c": 1.0}},
    "tasks": [
        {"kind": "backbone", "id": "bb", "mode": 1},
        {"kind": "ridge", "id": "rg", "source": "bb", "e": [0.5]},
        {"kind": "validate", "id": "val", "source": "rg", "e": 0.5, "eps": [0.02, 0.01]},
    ],
}


def text(doc):
    return json.dumps(doc, indent=2)


def with_task(i, **changes):
    doc = json.loads(json.dumps(BASE))
    doc["tasks"][i].update(changes)
    return doc


def test_valid_config_defaults():
    cfg = parse_config(text(BASE))
    assert cfg.output == "nnm_output"
    assert cfg.numerics == {}
    assert cfg.task("rg")["source"] == "bb"
    assert cfg.task("missing") is None


def test_error_carries_line_of_offending_value():
    doc = text(with_task(1, l=0))
    with pytest.raises(ConfigError) as info:
        parse_config(doc, "run.json")
    line = next(i for i, s in enumerate(doc.splitlines(), 1) if '"l": 0' in s)
    assert info.value.line == line
    assert str(info.value).startswith(f"run.json:{line}: tasks[1].l:")


def test_unknown_key_is_named():
    doc = json.loads(text(BASE))
    doc["numerics"] = {"rtol": 1e-9, "speed": 3}
    with pytest.raises(ConfigError, match=r"numerics\.speed: unknown key\(s\) 'speed'") as info:
        parse_config(text(doc))
    assert text(doc).splitlines()[info.value.line - 1].strip().startswith('"speed"')


def test_unknown_task_key():
    with pytest.raises(ConfigError, match=r"tasks\[0\].*'colour'"):
        parse_config(text(with_task(0, colour="red")))


def test_duplicate_ids():
    with pytest.raises(ConfigError, match="duplicate task id 'bb'"):
        parse_config(text(with_task(1, id="bb")))


def test_source_must_have_right_kind():
    with pytest.raises(ConfigError, match="needs a ridge source"):
        parse_config(text(with_task(2, source="bb")))


def test_source_must_precede_task():
    doc = json.loads(text(BASE))
    doc["tasks"] = doc["tasks"][::-1]
    with pytest.raises(ConfigError, match="defined after"):
        parse_config(text(doc))


def test_source_may_be_existing_file(tmp_path):
    (tmp_path / "fam.csv").write_text("lambda\n1\n")
    path = tmp_path / "run.json"
    path.write_text(text(with_task(1, source="fam.csv")))
    assert load_config(path).task("rg")["source"] == "fam.csv"
    path.write_text(text(with_task(1, source="nope.csv")))
    with pytest.raises(ConfigError, match="neither a task id nor an existing file"):
        load_config(path)


def test_bad_model_name_and_params():
    doc = json.loads(text(BASE))
    doc["model"]["name"] = "duffin"
    with pytest.raises(ConfigError, match="model.name"):
        parse_config(text(doc))
    doc["model"] = {"name": "duffing", "params": {"mass": 1.0}}
    with pytest.raises(ConfigError, match="model.params: unknown parameters"):
        parse_config(text(doc))


def test_invalid_json_line():
    with pytest.raises(ConfigError) as info:
        parse_config('{\n  "model": {\n  "name": }\n}', "x.json")
    assert info.value.line == 3


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.json")
