import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lavgap import cli, harness
from lavgap.errors import ConfigError
from lavgap.examples import mania_energy
from lavgap.reparam import Anchor

MINIMAL = {"problem": "mania", "anchor": "initial",
           "nu_schedule": {"start": 2, "factor": 2, "steps": 4}}


def cfg(**over):
    doc = json.loads(json.dumps(MINIMAL))
    doc.update(over)
    return doc


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_defaults_applied():
    c = harness.parse_config(json.dumps(MINIMAL))
    assert c.tuning.p == 1.0 and c.tuning.dist_kind == "u" and c.seed == 0
    assert c.anchor is Anchor.INITIAL and c.nu_schedule.values() == [2.0, 4.0, 8.0, 16.0]


@pytest.mark.parametrize("doc, where", [
    (cfg(nu_schedule={"start": 2, "factor": 1, "steps": 3}), "nu_schedule.factor"),
    (cfg(nu_schedule={"start": 2, "factor": 2, "steps": 0}), "nu_schedule.steps"),
    (cfg(extra=1), "extra"),
    (cfg(tuning={"bogus": 1}), "tuning.bogus"),
    (cfg(quad={"tol": 0}), "quad.tol"),
    (cfg(problem="nope"), "problem"),
    (cfg(anchor="middle"), "anchor"),
    (cfg(problem="alberti", anchor="both"), "tuning.lambda_bar"),
    (cfg(tuning={"dist_kind": "inf"}), "tuning.dist_kind"),
    (cfg(problem={"name": "power", "params": {"z": 1}}), "problem.params.z"),
    (cfg(problem={"name": "power", "params": {"q": 0.5}}), "problem"),
])
def test_schema_errors_carry_path(doc, where):
    with pytest.raises(ConfigError) as exc:
        harness.config_from_dict(doc)
    assert exc.value.path == where


def test_factor_message():
    with pytest.raises(ConfigError, match="factor>1 required"):
        harness.config_from_dict(cfg(nu_schedule={"start": 2, "factor": 1, "steps": 3}))


def test_malformed_json():
    with pytest.raises(ConfigError):
        harness.parse_config("{not json")


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["initial", "final", "both"]), st.floats(0.5, 10), st.floats(1.1, 4),
       st.integers(1, 5), st.integers(0, 100), st.sampled_from(["u", "e"]))
def test_round_trip(anchor, start, factor, steps, seed, dist):
    doc = {"problem": {"name": "power", "params": {"q": 2.0}}, "anchor": anchor,
           "nu_schedule": {"start": start, "factor": factor, "steps": steps},
           "tuning": {"dist_kind": dist, "lambda_bar": 3.0}, "seed": seed}
    c = harness.config_from_dict(doc)
    again = harness.parse_config(harness.dump_config(c))
    assert again == c
    assert harness.dump_config(again) == harness.dump_config(c)


def test_emit_header_only_and_inf_token():
    c = harness.config_from_dict(MINIMAL)
    rep = harness.ReportFile(c, {}, ())
    text = harness.emit_report(rep).decode()
    lines = text.splitlines()
    assert lines[-1] == ",".join(harness.COLUMNS + harness.EXTRA_COLUMNS)
    assert all(l.startswith("#") for l in lines[:-1])
    assert harness.fmt(math.inf) == "inf" and harness.fmt(0.1) == "0.10000000000000001"


def test_mania_initial_run():
    c = harness.config_from_dict(MINIMAL)
    rep = harness.run(c)
    assert rep.exit_code == 0 and len(rep.rows) == 4
    gaps = [r.gap for r in rep.rows]
    assert all(b > a for a, b in zip(gaps, gaps[1:]))
    for r in rep.rows:
        assert r.gap == pytest.approx(mania_energy(r.nu), rel=1e-9)
    w = [r.w1p_dist for r in rep.rows]
    assert all(b < a for a, b in zip(w, w[1:]))


def test_mania_both_flags_positivity():
    rep = harness.run(harness.config_from_dict(cfg(anchor="both")))
    assert rep.falsified == ["P_yPsi"] and rep.exit_code == 2 and len(rep.rows) == 4


def test_alberti_final_rows():
    doc = {"problem": "alberti", "anchor": "final",
           "nu_schedule": {"start": 2, "factor": 2, "steps": 3}}
    rep = harness.run(harness.config_from_dict(doc))
    assert rep.exit_code == 0
    for r in rep.rows:
        assert r.gap == 0.0 and r.F_y_nu.value == 0.0 and r.y_nu_end == 1.0
        assert r.lip_rank <= r.nu


def test_baseline_both_passes():
    doc = {"problem": "baseline", "anchor": "both",
           "nu_schedule": {"start": 2, "factor": 2, "steps": 14}, "tuning": {"p": 2}}
    rep = harness.run(harness.config_from_dict(doc))
    assert rep.exit_code == 0 and not rep.falsified
    assert all(rep.verdicts[n].passed for n in rep.required)
    assert abs(rep.rows[-1].gap) <= 1e-2
    head = harness.emit_report(rep).decode()
    assert '"P_yPsi":"pass"' in head


def test_determinism_bytes():
    c = harness.config_from_dict(cfg(nu_schedule={"start": 2, "factor": 2, "steps": 2}))
    a = harness.emit_report(harness.run(c))
    b = harness.emit_report(harness.run(c))
    assert a == b
    ja = harness.emit_report(harness.run(c), "jsonl")
    assert ja == harness.emit_report(harness.run(c), "jsonl")
    rows = [json.loads(l) for l in ja.decode().splitlines()[1:]]
    assert [r["nu"] for r in rows] == [2.0, 4.0]


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["run", "--config", write(tmp_path, MINIMAL)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[-1].startswith("16,")
    assert cli.main(["run", "--config", write(tmp_path, cfg(anchor="both"))]) == 2
    bad = write(tmp_path, cfg(nu_schedule={"start": 2, "factor": 1, "steps": 1}))
    assert cli.main(["run", "--config", bad]) == 4
    assert "factor>1" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 4


def test_cli_outputs_and_check(tmp_path, capsys):
    doc = {"problem": "alberti", "anchor": "final",
           "nu_schedule": {"start": 2, "factor": 2, "steps": 2},
           "outputs": {"samples_path": str(tmp_path / "samples.csv")}}
    out = tmp_path / "r.jsonl"
    assert cli.main(["run", "--config", write(tmp_path, doc), "--out", str(out),
                     "--format", "jsonl"]) == 0
    lines = out.read_text().splitlines()
    assert json.loads(lines[0])["header"]["F_y"] == 0.0
    assert len(lines) == 3
    samples = np.genfromtxt(tmp_path / "samples.csv", delimiter=",", names=True)
    assert samples["s"][-1] == 1.0 and samples["y_nu_2"][-1] == 1.0
    assert cli.main(["check", "--config", write(tmp_path, doc)]) == 0
    assert "L_yLambda" in capsys.readouterr().out


def test_cli_list_examples(capsys):
    assert cli.main(["list-examples"]) == 0
    assert "mania" in capsys.readouterr().out


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise FloatingPointError("overflow")
    monkeypatch.setattr(harness, "convergence_study", boom)
    assert cli.main(["run", "--config", write(tmp_path, MINIMAL)]) == 3
