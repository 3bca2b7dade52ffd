import copy
import json

import pytest

from coexist.cli import main
from coexist.errors import ParseError, ValidationError
from coexist.scenario import (
    CSV_HEADER,
    Tolerances,
    config_from_dict,
    config_to_dict,
    export,
    parse_config,
    run_certify,
)

SMALL = {
    "model": {
        "constants": {"d1": 1, "d2": 1, "d3": 1, "chi1": 0.1, "chi2": 0.1, "k": 1, "l": 1, "lambda": 1},
        "coefficients": {"a0": 3, "a1": 2, "a2": 0.5, "b0": 3, "b1": 0.5, "b2": 2},
    },
    "grid": {"length": 1, "n_cells": 16},
    "time": {"dt": 0.01, "t_end": 10},
    "initial_u": {"base": 1.2, "amp": 0.1, "mode": 1},
    "initial_v": {"base": 1.2},
    "runs": [
        {"name": "a"},
        {"name": "b", "initial_u": {"base": 0.5, "amp": 0.3, "mode": 2}, "initial_v": {"base": 2.0},
         "pair_with": "a"},
    ],
}


def small(**edits):
    doc = copy.deepcopy(SMALL)
    for path, value in edits.items():
        *parents, leaf = path.split(".")
        node = doc
        for key in parents:
            node = node[key]
        if value is None:
            del node[leaf]
        else:
            node[leaf] = value
    return doc


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


# -- parsing ------------------------------------------------------------------

def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, SMALL))
    assert cfg.save_every == 10
    assert cfg.tolerances == Tolerances()
    assert cfg.spec.a0.inf == 3.0 and cfg.spec.constants.lam == 1.0
    assert cfg.grid.n_cells == 16 and cfg.spec.length == 1.0
    assert cfg.pairs() == [("b", "a")]


def test_missing_lambda_is_named():
    with pytest.raises(ValidationError) as info:
        config_from_dict(small(**{"model.constants.lambda": None}))
    assert any("lambda" in p for p in info.value.problems)


def test_negative_sensitivity_rejected():
    with pytest.raises(ValidationError) as info:
        config_from_dict(small(**{"model.constants.chi1": -0.1}))
    assert any("chi1" in p for p in info.value.problems)


def test_all_violations_listed():
    doc = small(**{"model.constants.chi1": -0.1, "grid.n_cells": 2, "time.dt": 0, "extra": 1})
    with pytest.raises(ValidationError) as info:
        config_from_dict(doc)
    text = " ".join(info.value.problems)
    for key in ("chi1", "n_cells", "dt", "extra"):
        assert key in text


def test_unknown_nested_key_rejected():
    with pytest.raises(ValidationError):
        config_from_dict(small(**{"grid.cells": 16}))


def test_parse_error_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "model": {,\n}', encoding="utf-8")
    with pytest.raises(ParseError) as info:
        parse_config(path)
    assert "line 2" in str(info.value)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        parse_config("/nonexistent/cfg.json")


def test_coefficient_objects_and_pair_validation():
    doc = small(**{"model.coefficients.a0": {"mean": 3, "time_amp": 0.5, "time_freq": 1}})
    cfg = config_from_dict(doc)
    assert cfg.spec.a0.envelope() == (2.5, 3.5)
    with pytest.raises(ValidationError):
        config_from_dict(small(**{"model.coefficients.a0": {"time_amp": 0.5}}))
    bad = small()
    bad["runs"][1]["pair_with"] = "zzz"
    with pytest.raises(ValidationError):
        config_from_dict(bad)


def test_round_trip():
    doc = small(**{"model.coefficients.b0": {"mean": 3, "space_amp": 0.2, "space_mode": 1},
                   "tolerances": {"eps": 0.02}})
    cfg = config_from_dict(doc)
    normalized = config_to_dict(cfg)
    again = config_from_dict(json.loads(json.dumps(normalized)))
    assert again == cfg
    assert config_to_dict(again) == normalized


# -- pipeline -----------------------------------------------------------------

@pytest.fixture(scope="module")
def small_report():
    return run_certify(config_from_dict(SMALL))


def test_small_symmetric_certified(small_report):
    rep = small_report
    assert rep.status == "certified", rep.reasons
    assert all(rep.data["checks"].values())
    assert rep.data["rectangles"]["R"]["rectangle"]["lo1"] == pytest.approx(1.2, abs=1e-12)
    assert rep.data["energy"]["b_a"]["ratio_passed"]


def test_report_is_deterministic(small_report):
    again = run_certify(config_from_dict(SMALL))
    assert again.to_json() == small_report.to_json()


def test_export_file_names(tmp_path, small_report):
    written = export(small_report, tmp_path / "out")
    assert sorted(p.name for p in written) == ["a.csv", "b.csv", "energy_b_a.csv", "report.json"]
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    assert doc["status"] == "certified"
    lines = (tmp_path / "out" / "a.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert float(lines[1].split(",")[0]) == 0.0
    assert (tmp_path / "out" / "energy_b_a.csv").read_text().startswith("t,energy\n")


def test_empty_run_list_exports_report_only(tmp_path):
    rep = run_certify(config_from_dict(small(runs=[])))
    written = export(rep, tmp_path)
    assert [p.name for p in written] == ["report.json"]


def test_strong_chemotaxis_fails_early():
    rep = run_certify(config_from_dict(small(**{"model.constants.chi1": 25})))
    assert rep.status == "failed"
    assert isinstance(rep.data["rectangles"], str) and rep.data["rectangles"].startswith("skipped")
    assert rep.reasons


# -- CLI ----------------------------------------------------------------------

def test_cli_exit_codes(tmp_path, capsys):
    good = write(tmp_path, SMALL)
    bad = write(tmp_path, small(**{"model.constants.chi1": 25}), "strong.json")
    broken = write(tmp_path, small(**{"model.constants.lambda": None}), "broken.json")
    assert main(["check", str(good)]) == 0
    assert json.loads(capsys.readouterr().out)["h5"] is True
    assert main(["check", str(bad)]) == 2
    assert main(["check", str(broken)]) == 1
    assert "lambda" in capsys.readouterr().err
    assert main(["rectangle", str(good)]) == 0
    assert main(["stability", str(good)]) == 0
    assert main(["ode", str(good), "--out", str(tmp_path / "ode")]) == 0
    assert (tmp_path / "ode" / "a_ode.csv").exists()
    assert main(["simulate", str(good), "--run", "b", "--out", str(tmp_path / "sim")]) == 0
    assert (tmp_path / "sim" / "b.csv").exists()
    assert main(["simulate", str(good), "--run", "nope"]) == 1
    assert main(["certify", str(good), "--out", str(tmp_path / "cert")]) == 0
    assert main(["certify", str(bad), "--out", str(tmp_path / "cert2")]) == 2
    assert json.loads((tmp_path / "cert2" / "report.json").read_text())["status"] == "failed"


def test_thread_cap_env(monkeypatch):
    from coexist.errors import ConfigError
    from coexist.scenario import _max_workers

    monkeypatch.setenv("COEXIST_THREADS", "1")
    assert _max_workers() == 1
    monkeypatch.setenv("COEXIST_THREADS", "x")
    with pytest.raises(ConfigError):
        _max_workers()
