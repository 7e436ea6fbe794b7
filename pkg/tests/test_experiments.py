import json
import math

import pytest

from onebit_isac import cli
from onebit_isac.experiments import (
    COLUMNS,
    ConfigError,
    Experiment,
    emit_results,
    load_config,
    render_csv,
    run_experiment,
    spec_from_document,
    with_overrides,
)
from onebit_isac.optim import IlpInstance
from onebit_isac.optim.ilp import dump

SMALL = {"n_tx": 8, "n_rx": 16, "n_users": 2, "mc": {"n_trials": 1000}, "n_sym": 2}


def _write(tmp_path, doc, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return p


def test_empty_document_gives_reference_defaults(tmp_path):
    spec = load_config(_write(tmp_path, {}))
    b = spec.base
    assert (b.n_tx, b.n_rx, b.n_users, b.modulation_order) == (128, 128, 4, 8)
    assert b.power_budget == 1.0
    assert b.radar_snr == pytest.approx(31.6227766016838, rel=1e-14)
    assert b.clutter_cnrs == pytest.approx((1000.0, 1000.0))
    assert math.degrees(b.target_angle) == pytest.approx(10.0)
    assert [math.degrees(a) for a in b.clutter_angles] == pytest.approx([-50.0, 30.0])
    assert spec.mc.n_trials == 1_000_000
    assert spec.experiment is Experiment.QOS_SWEEP and spec.sweep_grid == (0.0, 4.0, 8.0, 12.0)
    desk = load_config(_write(tmp_path, {}), desk=True)
    assert (desk.base.n_tx, desk.base.n_rx, desk.mc.n_trials) == (16, 64, 100_000)


def test_db_fields_become_linear(tmp_path):
    spec = load_config(_write(tmp_path, {"snr_r_db": 15, "gamma_db": 10, "snr_c_db": 0}))
    assert spec.base.radar_snr == pytest.approx(31.6227766016838, rel=1e-14)
    assert spec.gamma == pytest.approx(10.0)
    assert spec.base.comm_noise_powers[0] == pytest.approx(1.0)


@pytest.mark.parametrize(
    "doc,field",
    [
        ({"target_angle_deg": "10rad"}, "target_angle_deg"),
        ({"clutter_angles_deg": [-50, 300]}, "clutter_angles_deg"),
        ({"snr_r_dB": 15}, "snr_r_dB"),
        ({"mc": {"trials": 5}}, "mc.trials"),
        ({"configs": ["OneBit-TwoBit"]}, "configs"),
        ({"experiment": "Fig3"}, "experiment"),
        ({"modulation_order": 6}, "modulation_order"),
        ({"grid": []}, "grid"),
        ({"experiment": "Roc", "grid": [0.5, 1.5]}, "grid"),
        ({"cnr_db": [30]}, "cnr_db"),
    ],
)
def test_schema_errors_name_the_field(tmp_path, doc, field):
    with pytest.raises(ConfigError, match=f"field '{field}'"):
        load_config(_write(tmp_path, doc))


def test_errors_carry_line_numbers(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "seed": 1,\n  "n_tx": -3\n}\n')
    with pytest.raises(ConfigError, match=r"bad.json:3: field 'n_tx'"):
        load_config(p)
    p.write_text('{\n  "seed": 1,\n')
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(p)


def test_qos_sweep_rows_and_columns(tmp_path):
    spec = spec_from_document({**SMALL, "grid": [0, 6], "configs": ["OneBit-OneBit", "Infinite-Infinite"]})
    table = run_experiment(spec)
    assert table.columns == COLUMNS[Experiment.QOS_SWEEP]
    assert render_csv(table).splitlines()[0] == "config,gamma_db,qscnr_ta_db,qscnr_mc_db,qscnr_mc_stderr,margin,iters,status"
    assert len(table.rows) == 4
    assert [r["config"] for r in table.rows] == ["OneBit-OneBit"] * 2 + ["Infinite-Infinite"] * 2


def test_output_is_byte_identical_and_worker_independent(tmp_path):
    doc = {**SMALL, "experiment": "QodSweep", "grid": [4, 8], "configs": ["OneBit-OneBit", "Infinite-OneBit"]}
    spec = spec_from_document(doc)
    a = render_csv(run_experiment(spec))
    b = render_csv(run_experiment(spec, workers=2))
    assert a == b
    c = render_csv(run_experiment(with_overrides(spec, seed=1)))
    assert c != a


def test_sidecar_round_trips(tmp_path):
    spec = spec_from_document({**SMALL, "experiment": "Ree", "grid": [8, 16], "output": str(tmp_path / "out")})
    table = run_experiment(spec)
    csv_path, json_path = emit_results(table)
    assert csv_path.name == "Ree.csv" and json_path.name == "Ree.json"
    side = json.loads(json_path.read_text())
    assert side["format"] == "onebit-isac-results v1"
    assert side["seed"] == 0 and len(side["rows"]) == len(table.rows)
    again = load_config(json_path)
    assert again == spec
    assert again.document == spec.document


def test_cli_run_validate_and_exit_codes(tmp_path, capsys):
    spec_path = _write(tmp_path, {**SMALL, "experiment": "Ree", "grid": [8], "configs": ["OneBit-OneBit"]})
    out = tmp_path / "res"
    assert cli.main(["run", "--spec", str(spec_path), "--out", str(out), "--seed", "3"]) == 0
    first = (out / "Ree.csv").read_bytes()
    assert cli.main(["run", "--spec", str(spec_path), "--out", str(out), "--seed", "3"]) == 0
    assert (out / "Ree.csv").read_bytes() == first
    assert json.loads((out / "Ree.json").read_text())["seed"] == 3
    capsys.readouterr()

    assert cli.main(["validate", "--spec", str(spec_path)]) == 0
    assert json.loads(capsys.readouterr().out)["n_tx"] == 8

    hopeless = _write(tmp_path, {**SMALL, "grid": [60], "configs": ["OneBit-OneBit"]}, "hopeless.json")
    assert cli.main(["run", "--spec", str(hopeless), "--out", str(out)]) == 2

    bad = _write(tmp_path, {"n_txx": 3}, "bad.json")
    assert cli.main(["validate", "--spec", str(bad)]) == 1
    assert "n_txx" in capsys.readouterr().err


def test_output_path_blocked_by_a_file(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    spec_path = _write(tmp_path, {**SMALL, "n_tx": 64, "n_rx": 128, "output": str(blocker / "sub")})
    assert cli.main(["run", "--spec", str(spec_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_solve_ilp(tmp_path, capsys):
    path = tmp_path / "inst.ilp"
    dump(IlpInstance([1.0, -2.0], [[1.0, 1.0]], [-5.0], 0.5), path)
    assert cli.main(["solve-ilp", str(path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "Optimal" and out["value"] == pytest.approx(1.5)
    dump(IlpInstance([1.0, 1.0], [[1.0, 1.0]], [5.0], 0.5), path)
    assert cli.main(["solve-ilp", str(path)]) == 2
