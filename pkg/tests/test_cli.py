import json
import subprocess
import sys

import numpy as np
import pytest

from cpekit.cli import main
from cpekit.trajectories import builtin_system, save_records, simulate_lti


def _result(out):
    return json.loads((out / "result.json").read_text())


def test_design_then_check(tmp_path):
    d = tmp_path / "d"
    assert main(["design", "-m", "2", "-L", "5", "--lengths", "7,7,6,6,5", "--mode", "mosaic", "-o", str(d)]) == 0
    res = _result(d)
    assert res["ok"] and res["verified"]
    c = tmp_path / "c"
    assert main(["check", "-L", "5", "--mode", "mosaic", "--bundle", res["manifest"], "-o", str(c)]) == 0
    assert _result(c)["verdict"] is True
    assert (c / "result.txt").read_text().startswith("mosaic excitation of order 5: holds")


def test_check_reports_failure_at_too_high_order(tmp_path):
    d = tmp_path / "d"
    main(["design", "-m", "1", "-L", "3", "--lengths", "8,8", "--mode", "cumulative", "-o", str(d)])
    c = tmp_path / "c"
    manifest = _result(d)["manifest"]
    assert main(["check", "-L", "3", "--mode", "cumulative", "--bundle", manifest, "-o", str(c)]) == 0
    assert _result(c)["verdict"] is True
    assert main(["check", "-L", "8", "--mode", "cumulative", "--bundle", manifest, "-o", str(c)]) == 0
    assert _result(c)["verdict"] is False


def test_simulate_then_identify(tmp_path):
    d, s, i = tmp_path / "d", tmp_path / "s", tmp_path / "i"
    main(["design", "-m", "2", "-L", "5", "--lengths", "5,5,5,5,5,5,5,5,5,5", "--mode", "mosaic", "-o", str(d)])
    assert main(["simulate", "--bundle", _result(d)["manifest"], "--system", "batch_reactor", "-o", str(s)]) == 0
    rc = main(["identify", "ls", "--records", _result(s)["manifest"], "--mode", "mosaic",
               "--system", "batch_reactor", "-o", str(i)])
    assert rc == 0 and _result(i)["error"] <= 1e-8


def test_invalid_design_exits_2(tmp_path, capsys):
    rc = main(["design", "-m", "2", "-L", "5", "--lengths", "5,5", "--mode", "mosaic", "-o", str(tmp_path)])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2


def test_failed_gain_synthesis_exits_1(tmp_path):
    sys_ = builtin_system("batch_reactor")
    rec = simulate_lti(sys_, np.zeros(4), np.zeros((10, 2)))
    manifest = save_records([rec], tmp_path / "r")
    out = tmp_path / "g"
    with pytest.warns(UserWarning):
        rc = main(["gain", "--records", str(manifest), "--mode", "mosaic", "-o", str(out)])
    assert rc == 1
    assert _result(out)["ok"] is False


def test_repro_small_run(tmp_path):
    out = tmp_path / "r"
    assert main(["repro", "ls-batch-reactor", "--seeds", "3", "--noise", "0.05", "-o", str(out)]) == 0
    assert _result(out)["ok"]


def test_seed_from_environment_is_deterministic(tmp_path, monkeypatch):
    monkeypatch.setenv("CPEKIT_SEED", "7")
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        main(["design", "-m", "1", "-L", "3", "--lengths", "4,4", "--mode", "mosaic", "-o", str(out)])
    for name in ("member_001.csv", "member_002.csv", "design_ledger.json"):
        assert (a / name).read_text() == (b / name).read_text()
    monkeypatch.setenv("CPEKIT_SEED", "8")
    c = tmp_path / "c"
    main(["design", "-m", "1", "-L", "3", "--lengths", "4,4", "--mode", "mosaic", "-o", str(c)])
    assert (a / "member_001.csv").read_text() != (c / "member_001.csv").read_text()


def test_bench_reports_threshold(tmp_path):
    assert main(["bench", "--repeats", "2", "--warmups", "0", "--mosaic-lengths", "7,7,6,6,5",
                 "--trial-lengths", "14,14", "-o", str(tmp_path)]) == 0
    res = _result(tmp_path)
    assert res["flops"]["K_th"] == 2 and res["flops"]["mcpe"] == 1100


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cpekit", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "design" in proc.stdout
