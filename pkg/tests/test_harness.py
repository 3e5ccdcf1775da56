import json

import numpy as np
import pytest

from mmspace import graph
from mmspace.io import save_field, save_space

from mmspace.harness import (EXIT_FLAGGED, EXIT_OK, ExperimentConfig, HarnessError,
                             canonical_json, config_hash, dumps_toml, load_config, parse_levels,
                             run)

BASE = {
    "schema": 1,
    "seed": 7,
    "space": {"family": "grid", "dim": 1, "side": 64},
    "fields": {"f": {"rule": "linear"}},
    "operations": [{"op": "weak_norm", "field": "f", "p": 2},
                   {"op": "solve_exact", "field": "f", "p": 2}],
}


def write(tmp_path, data, name="c.toml"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if name.endswith(".json") else dumps_toml(data))
    return p


def test_smoke_run_reports_both_norms(tmp_path):
    rep = run(load_config(write(tmp_path, BASE)), tmp_path / "out")
    assert rep.exit_code == EXIT_OK
    row = rep.summary["f@p=2"]
    assert row["hajlaszNorm"] == pytest.approx(0.5, abs=1e-7)
    assert row["ratio"] == pytest.approx(row["weakNorm"] / row["hajlaszNorm"])
    out = json.loads((tmp_path / "out" / "report.json").read_text())
    assert out["configHash"] == rep.config_hash
    assert (tmp_path / "out" / "00_kappa_curve.csv").read_text().startswith(
        "value,level_measure,score")


def test_constant_field_gives_zero_norms(tmp_path):
    data = dict(BASE, fields={"f": {"rule": "constant", "value": 2.0}})
    rep = run(ExperimentConfig.from_dict(data))
    assert rep.exit_code == EXIT_OK
    assert rep.results[0]["result"]["weakNorm"] == 0.0
    assert rep.results[1]["result"]["lpNorm"] == 0.0


def test_missing_field_file_names_path(tmp_path):
    data = dict(BASE, fields={"f": {"file": "absent.json"}})
    with pytest.raises(HarnessError, match="absent.json"):
        run(load_config(write(tmp_path, data)))


def test_invalid_configs():
    with pytest.raises(HarnessError, match="schema"):
        ExperimentConfig.from_dict(dict(BASE, schema=2))
    with pytest.raises(HarnessError, match="unknown operation"):
        ExperimentConfig.from_dict(dict(BASE, operations=[{"op": "fly"}]))
    with pytest.raises(HarnessError, match="undefined field"):
        ExperimentConfig.from_dict(dict(BASE, operations=[{"op": "weak_norm", "field": "g"}]))
    noseed = {k: v for k, v in BASE.items() if k != "seed"}
    noseed["fields"] = {"f": {"rule": "mollified-noise"}}
    with pytest.raises(HarnessError, match="seed"):
        ExperimentConfig.from_dict(noseed)
    with pytest.raises(HarnessError, match="unknown field rule"):
        run(ExperimentConfig.from_dict(dict(BASE, fields={"f": {"rule": "cubic"}})))


def test_invalid_parameter_range_is_an_error():
    data = dict(BASE, operations=[{"op": "level_measure", "field": "f", "kappa": -1.0}])
    with pytest.raises(HarnessError, match="level_measure"):
        run(ExperimentConfig.from_dict(data))


def test_loose_maximal_certificate_is_reported_not_flagged():
    data = dict(BASE, operations=[{"op": "maximal_gradient", "field": "f", "p": 2,
                                   "c": 0.1}])
    rep = run(ExperimentConfig.from_dict(data))
    assert rep.exit_code == EXIT_OK
    res = rep.results[0]["result"]
    assert res["violation"] > 1 and res["certifiedNorm"] >= 0.5 - 1e-9


def test_zero_right_side_flags_exit_two(tmp_path):
    # two tight pairs far apart: lip_hat with window 1 vanishes everywhere
    sp = graph([(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0)])
    save_space(sp, tmp_path / "pairs.json")
    save_field([0.0, 0.0, 1.0, 1.0], tmp_path / "f.json")
    data = {"schema": 1, "seed": 0, "space": {"file": "pairs.json"},
            "fields": {"f": {"file": "f.json"}},
            "operations": [{"op": "poincare", "fields": ["f"], "window": 1, "samples": 4}]}
    rep = run(load_config(write(tmp_path, data)))
    assert rep.exit_code == EXIT_FLAGGED
    assert "zero right-hand side" in rep.flags[0]


def test_toml_and_json_hash_identically(tmp_path):
    a = load_config(write(tmp_path, BASE, "c.toml"))
    b = load_config(write(tmp_path, BASE, "c.json"))
    assert a.hash == b.hash


def test_hash_ignores_layout_but_not_content(tmp_path):
    p = tmp_path / "messy.json"
    p.write_text(json.dumps(BASE, indent=7, sort_keys=False))
    assert load_config(p).hash == config_hash(BASE)
    changed = json.loads(json.dumps(BASE))
    changed["operations"][0]["p"] = 3
    assert config_hash(changed) != config_hash(BASE)
    assert ExperimentConfig.from_dict(BASE).with_seed(8).hash != config_hash(BASE)


def test_toml_round_trip_is_byte_identical(tmp_path):
    text = load_config(write(tmp_path, BASE)).to_toml()
    again = load_config(write(tmp_path, load_config(write(tmp_path, BASE)).data, "d.toml"))
    assert again.to_toml() == text
    assert canonical_json(again.data) == canonical_json(BASE)


def test_rerun_is_bit_identical(tmp_path):
    data = dict(BASE, fields={"f": {"rule": "mollified-noise"}},
                operations=[{"op": "weak_norm", "field": "f", "p": 2},
                            {"op": "poincare", "samples": 10},
                            {"op": "solve_exact", "field": "f", "p": 1.5}])
    cfg = ExperimentConfig.from_dict(data)
    a = run(cfg, threads=1)
    b = run(cfg, threads=1)
    assert canonical_json(a.results) == canonical_json(b.results)


def test_seed_override_changes_randomised_output():
    data = dict(BASE, fields={"f": {"rule": "mollified-noise"}},
                operations=[{"op": "weak_norm", "field": "f", "p": 2}])
    cfg = ExperimentConfig.from_dict(data)
    a = run(cfg).results[0]["result"]["weakNorm"]
    b = run(cfg, seed=99).results[0]["result"]["weakNorm"]
    assert a != b


def test_parse_levels():
    assert parse_levels("6:9") == [6, 7, 8, 9]
    assert parse_levels([3, 5]) == [3, 5]
