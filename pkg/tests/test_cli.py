import json

import numpy as np
import pytest

from hdepose import cli
from hdepose.dataio import load_emg

SMALL = {"n_subjects": 2, "duration_s": 24, "n_channels": 16, "prompt_s": 2, "n_poses": 2, "hidden": [8],
         "learning_rate": 0.003, "batch_size": 200, "epochs": 2, "test_fraction": 0.34,
         "variance_duration_s": 6, "n_nodes": 32}


def _run(args, capsys):
    code = cli.main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def test_help_lists_every_subcommand(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["--help"])
    assert e.value.code == 0
    out = capsys.readouterr().out
    for name in ("synth", "preprocess", "variance", "impedance", "train", "infer", "evaluate", "spm"):
        assert name in out


def test_synth_preprocess_sixteen_by_two(tmp_path, capsys):
    code, _, _ = _run(["synth", "--out", tmp_path / "s", "--duration-s", 8, "--n-channels", 64], capsys)
    assert code == 0
    man = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert man["seed"] == 0 and set(man["versions"]) >= {"hdepose", "numpy", "scipy"}
    assert {"emg.bin", "emg.json", "markers.csv", "angles.csv", "schedule.csv"} <= set(man["outputs"])
    code, _, err = _run(["preprocess", "--input", tmp_path / "s", "--out", tmp_path / "p", "--grid-select", "16x2"],
                        capsys)
    assert code == 0, err
    meta = json.loads((tmp_path / "p" / "preprocess.json").read_text())
    rec = load_emg(tmp_path / "s" / "emg.bin")
    assert len(meta["channels"]) == 32
    assert {rec.channel_map[c][1] for c in meta["channels"]} == set(range(0, 32, 2))
    assert meta["slide"] == 25
    header = (tmp_path / "p" / "aligned.csv").read_text().splitlines()[0].split(",")
    assert sum(h.startswith("ch") for h in header) == 32


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"synth": {"duration_s": 3.0, "n_channels": 8, "seed": 4}}))
    code, _, _ = _run(["synth", "--config", cfg, "--seed", 9, "--out", tmp_path / "s"], capsys)
    assert code == 0
    man = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert man["seed"] == 9 and man["config"]["duration_s"] == 3.0 and man["config"]["n_channels"] == 8


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"duration_s": "long"}))
    code, _, err = _run(["synth", "--config", bad, "--out", tmp_path / "s"], capsys)
    assert code == 2
    rec = json.loads(err.strip().splitlines()[-1])
    assert rec["exit_code"] == 2 and rec["error"] == "ConfigError"
    bad.write_text(json.dumps({"unknown_key": 1}))
    assert _run(["synth", "--config", bad, "--out", tmp_path / "s"], capsys)[0] == 2
    assert _run(["synth"], capsys)[0] == 2  # --out missing
    assert _run(["synth", "--config", tmp_path / "nope.json", "--out", tmp_path], capsys)[0] == 2


def test_data_error_exit_3(tmp_path, capsys):
    code, _, err = _run(["preprocess", "--input", tmp_path / "missing", "--out", tmp_path / "p"], capsys)
    assert code == 3
    assert json.loads(err.strip().splitlines()[-1])["error"] == "DataError"


def test_numerical_failure_exit_4(tmp_path, capsys):
    _run(["synth", "--out", tmp_path / "s", "--duration-s", 3, "--n-channels", 8], capsys)
    _run(["preprocess", "--input", tmp_path / "s", "--out", tmp_path / "p", "--slide", 25], capsys)
    code, _, err = _run(["train", "--data", tmp_path / "p" / "aligned.csv", "--out", tmp_path / "t",
                         "--batch-size", 10 ** 6], capsys)
    assert code == 4 and "batch" in err


def test_evaluate_identity(tmp_path, capsys):
    _run(["synth", "--out", tmp_path / "s", "--duration-s", 6, "--n-channels", 8], capsys)
    _run(["preprocess", "--input", tmp_path / "s", "--out", tmp_path / "p", "--slide", 25], capsys)
    t, split, _, ang = cli.load_aligned_csv(tmp_path / "p" / "aligned.csv")
    cli.save_pred_csv(tmp_path / "same.csv", t, ang)
    code, _, err = _run(["evaluate", "--actual", tmp_path / "p" / "aligned.csv", "--predicted", tmp_path / "same.csv",
                         "--out", tmp_path / "e"], capsys)
    assert code == 0, err
    rep = json.loads((tmp_path / "e" / "report.json").read_text())["setups"]["A"][0]
    assert rep["mpcc"] == pytest.approx(1.0) and rep["md_mm"] == 0.0


def test_impedance_command(tmp_path, capsys):
    code, _, _ = _run(["impedance", "--out", tmp_path / "z", "--spread", 0.0], capsys)
    assert code == 0
    s = json.loads((tmp_path / "z" / "impedance.json").read_text())
    assert s["median_fit_R_ohm"] == pytest.approx(661e3, rel=1e-6)
    assert s["median_fit_C_F"] == pytest.approx(4.8e-9, rel=1e-6)
    assert s["divider_gain"] == pytest.approx(80e6 / np.abs(80e6 + 468.15e3), abs=1e-4)


def test_pipeline_manifest_lists_every_output(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"pipeline": SMALL}))
    code, _, err = _run(["pipeline", "--config", cfg, "--out", tmp_path / "run"], capsys)
    assert code == 0, err
    root = tmp_path / "run"
    man = json.loads((root / "manifest.json").read_text())
    listed = set(man["outputs"])
    produced = {p.relative_to(root).as_posix() for p in root.rglob("*")
                if p.is_file() and p.name not in ("timing.log",) and p != root / "manifest.json"}
    assert produced == listed
    for sub in ("evaluate/report.json", "spm/spm.json", "variance/variance.json", "impedance/impedance.json"):
        assert sub in listed
    assert json.loads((root / "spm" / "spm.json").read_text())["cmcjd"] >= 0
