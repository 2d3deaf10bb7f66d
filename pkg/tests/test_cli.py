import json
import os

import pytest

from pshlac.cli import (
    CliError,
    RunConfig,
    _forecast_origins,
    _load_forecast_dir,
    _parse_variants,
    build_parser,
    main,
)
from pshlac.core import read_system_json
from pshlac.lac_models import Variant
from pshlac.rolling import SimulationLedger
from pshlac.synth import make_system


def _write_config(tmp_path, name="run.json", **overrides):
    doc = {"system": "sys.json", "load": "load.csv",
           "da_lmp": "da.csv", "rt_lmp": "rt.csv"}
    doc.update(overrides)
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


# -- run config --------------------------------------------------------------


def test_config_resolves_paths_against_its_own_directory(tmp_path):
    p = _write_config(tmp_path, history="hist.csv", rt_lmp="/abs/rt.csv")
    cfg = RunConfig.from_file(str(p))
    assert cfg.system == str(tmp_path / "sys.json")
    assert cfg.history == str(tmp_path / "hist.csv")
    assert cfg.rt_lmp == "/abs/rt.csv"
    assert cfg.scenarios == 50 and cfg.variant == "stochastic"


def test_config_error_catalog(tmp_path):
    with pytest.raises(CliError, match="config file not found"):
        RunConfig.from_file(str(tmp_path / "absent.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(CliError, match="not valid JSON"):
        RunConfig.from_file(str(broken))
    with pytest.raises(CliError, match="unknown keys: frobnicate"):
        RunConfig.from_file(str(_write_config(tmp_path, "u.json", frobnicate=1)))
    partial = tmp_path / "partial.json"
    partial.write_text(json.dumps({"system": "s.json", "load": "l.csv"}))
    with pytest.raises(CliError, match="missing required keys: da_lmp, rt_lmp"):
        RunConfig.from_file(str(partial))


def test_model_config_carries_the_knobs(tmp_path):
    p = _write_config(tmp_path, voll=1000.0, gap_tol=1e-5, end_soc="relax")
    mc = RunConfig.from_file(str(p)).model_config()
    assert (mc.voll, mc.gap_tol, mc.end_soc) == (1000.0, 1e-5, "relax")


# -- variant and forecast-dir helpers ----------------------------------------


def test_parse_variants():
    cfg = RunConfig("s", "l", "d", "r")
    assert _parse_variants(None, cfg) == [Variant.STOCHASTIC]
    allv = _parse_variants(["all"], cfg)
    assert len(allv) == 5
    picked = _parse_variants(["current_practice,robust", "perfect"], cfg)
    assert picked == [Variant.CURRENT_PRACTICE, Variant.ROBUST, Variant.PERFECT]
    with pytest.raises(CliError, match="unknown variant 'hedged'"):
        _parse_variants(["hedged"], cfg)


def test_forecast_origins_leave_room_for_post_window_hours():
    assert _forecast_origins(make_system()) == list(range(21))  # T=24, L=3


def test_load_forecast_dir_points_at_the_forecast_step(tmp_path):
    with pytest.raises(CliError, match="run `pshlac forecast"):
        _load_forecast_dir(str(tmp_path / "nowhere"))
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(CliError, match="no scenario files"):
        _load_forecast_dir(str(empty))


def test_main_reports_errors_on_stderr(tmp_path, capsys):
    rc = main(["forecast", "--config", str(tmp_path / "no.json"), "--out", str(tmp_path)])
    assert rc == 1
    assert "error: config file not found" in capsys.readouterr().err


def test_parser_requires_a_command(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


# -- the whole workflow ------------------------------------------------------


def test_full_workflow(tmp_path, capsys):
    bundle = tmp_path / "bundle"
    rc = main(["gen-instance", "--seed", "3", "--out", str(bundle), "--history-days", "70"])
    assert rc == 0
    cfg_path = bundle / "run.json"
    assert cfg_path.exists()
    system = read_system_json(str(bundle / "system.json"))
    assert system.psh_units[0].da_gen is not None  # schedules embedded

    fdir = tmp_path / "forecasts"
    rc = main(["forecast", "--config", str(cfg_path), "--out", str(fdir),
               "--scenarios", "4", "--seed", "1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "holdout KS p=" in out
    assert "wrote forecasts for 21 origins" in out
    meta = json.loads((fdir / "forecast_meta.json").read_text())
    assert meta["scenarios"] == 4 and meta["origins"] == list(range(21))
    assert (fdir / "scenarios_t00.csv").exists()
    assert (fdir / "point_t20.csv").exists()
    assert (fdir / "weights_t07.csv").exists()
    assert (fdir / "diagnostics.json").exists()

    runs = tmp_path / "runs"
    rc = main(["simulate", "--config", str(cfg_path), "--forecast-dir", str(fdir),
               "--out", str(runs), "--variant", "current_practice,deterministic,stochastic",
               "--label", "smoke"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "current_practice: 22 windows solved" in out
    rdir = runs / "smoke"
    for name in ("ledger_current_practice.jsonl", "ledger_deterministic.jsonl",
                 "ledger_stochastic.jsonl", "metrics_stochastic.csv",
                 "objective_table.csv", "profit_table.csv", "fig_lmp.csv",
                 "fig_dispatch.csv", "summary.txt", "run_config.json"):
        assert (rdir / name).exists(), name
    led = SimulationLedger.from_jsonl(rdir / "ledger_current_practice.jsonl")
    assert [h.hour for h in led.hours] == list(range(1, 25))
    profit_lines = (rdir / "profit_table.csv").read_text().splitlines()
    cp_rows = [l for l in profit_lines if l.startswith("current_practice,")]
    assert len(cp_rows) == 2  # psh1 and psh2
    for row in cp_rows:
        assert float(row.split(",")[3]) == 0.0  # plan follower books zero

    rc = main(["report", "--config", str(cfg_path), "--run-dir", str(rdir)])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("day day000")
    assert "stochastic" in out and "profit_psh1" in out
