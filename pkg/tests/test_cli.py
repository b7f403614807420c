import json

import numpy as np
import pytest

from holowave import cli, harness
from holowave.spectral import read_snapshot

SHORT_CFG = """\
# short sweep for tests
eps_list = 0.16, 0.13, 0.10, 0.08
t_slow = 0.05
n_checkpoints = 5
jobs = 1
"""


def test_unknown_flag_prints_usage(capsys):
    assert cli.main(["nls-run", "--out", "x.hlwv", "--bogus"]) == cli.EXIT_ERROR
    err = capsys.readouterr().err
    assert "usage:" in err and "--bogus" in err


def test_unknown_subcommand():
    assert cli.main(["frobnicate"]) == cli.EXIT_ERROR


def test_missing_config_names_path(tmp_path, capsys):
    p = tmp_path / "missing.cfg"
    assert cli.main(["sweep", "--config", str(p)]) == cli.EXIT_ERROR
    assert str(p) in capsys.readouterr().err


def test_bad_config_key(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("colour = blue\n")
    assert cli.main(["sweep", "--config", str(p)]) == cli.EXIT_ERROR
    assert "colour" in capsys.readouterr().err


def test_nls_run_writes_snapshot(tmp_path):
    out = tmp_path / "u.hlwv"
    assert cli.main(["nls-run", "--t-final", "0.1", "--n", "1024", "--out", str(out)]) == cli.EXIT_OK
    snap = read_snapshot(out)
    assert snap.t == pytest.approx(0.1) and snap.grid.n_points == 1024


def test_trunc_study_outputs(tmp_path):
    out = tmp_path / "trunc.csv"
    args = ["trunc-study", "--eps", "0.2,0.1", "--n", "4096", "--out", str(out)]
    assert cli.main(args) == cli.EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(harness.TruncationRow.COLUMNS) and len(lines) == 3
    assert out.with_suffix(".png").stat().st_size > 0


def test_packet_build_then_ww_run(tmp_path):
    init, env = tmp_path / "p.hlwv", tmp_path / "u.hlwv"
    assert cli.main(["packet-build", "--eps", "0.16", "--out", str(init), "--envelope-out", str(env)]) == cli.EXIT_OK
    snap = read_snapshot(init)
    assert len(snap.fields) == 2 and snap.t == 0.0
    out = tmp_path / "run"
    args = ["ww-run", "--init", str(init), "--t-final", "2", "--dt", "0.025", "--checkpoint-every", "10"]
    args += ["--out-dir", str(out), "--envelope", str(env), "--eps", "0.16"]
    assert cli.main(args) == cli.EXIT_OK
    rows = (out / "metrics.csv").read_text().splitlines()
    assert rows[0] == "t,E,E0,A,B,err_H,pos_freq_leak"
    vals = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    assert vals[-1, 0] == pytest.approx(2.0)
    assert np.max(np.abs(vals[:, 1] - vals[0, 1])) <= 1e-9 * abs(vals[0, 1])
    assert np.all(vals[:, 6] <= 1e-25)  # roundoff from the physical-space snapshot
    # the file route reproduces the in-memory harness error at t = 0
    ref = harness.run_case(0.16, harness.SweepConfig(T_slow=0.01, n_checkpoints=1))
    assert vals[0, 5] == pytest.approx(ref.err_H[0], rel=1e-12)
    assert read_snapshot(out / "final.hlwv").t == pytest.approx(2.0)
    assert (out / "metrics.png").stat().st_size > 0


def test_ww_run_envelope_needs_eps(tmp_path):
    init = tmp_path / "p.hlwv"
    cli.main(["packet-build", "--eps", "0.16", "--out", str(init), "--envelope-out", str(tmp_path / "u.hlwv")])
    args = ["ww-run", "--init", str(init), "--t-final", "1", "--envelope", str(tmp_path / "u.hlwv")]
    assert cli.main(args + ["--out-dir", str(tmp_path / "o")]) == cli.EXIT_ERROR


@pytest.mark.slow
def test_sweep_is_deterministic(tmp_path, monkeypatch):
    monkeypatch.setenv("HOLOWAVE_SEED", "5")
    cfg = tmp_path / "short.cfg"
    cfg.write_text(SHORT_CFG)
    outs = [tmp_path / "a", tmp_path / "b"]
    codes = [cli.main(["sweep", "--config", str(cfg), "--out-dir", str(o)]) for o in outs]
    assert codes[0] == codes[1]
    names = sorted(p.name for p in outs[0].iterdir())
    assert {"config.cfg", "resolved.cfg", "summary.json", "verdict.txt", "sweep.png"} <= set(names)
    assert sum(n.startswith("case_eps") for n in names) == 4
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes(), n
    assert "seed = 5" in (outs[0] / "resolved.cfg").read_text()
    summary = json.loads((outs[0] / "summary.json").read_text())
    assert len(summary["err_H"]["points"]) == 4


def _fake_run(eps, slope):
    t = np.linspace(0, 1, 3)
    e = np.full(3, eps**slope)
    z = np.zeros(3)
    return harness.RunMetrics(eps, t, e, e, e, e, e / 10, z, z, z, z)


def test_sweep_failure_exits_2_and_names_metric(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(harness, "run_cases", lambda cfg: [_fake_run(e, 1.0) for e in sorted(cfg.eps_values)])
    cfg = tmp_path / "short.cfg"
    cfg.write_text(SHORT_CFG)
    assert cli.main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == cli.EXIT_FAIL
    assert "err_H" in capsys.readouterr().err
    assert (tmp_path / "o" / "verdict.txt").read_text().splitlines()[-1] == "VERDICT: FAIL"


def test_sweep_verdict_passes_on_good_scaling():
    runs = [_fake_run(e, 1.5) for e in (0.08, 0.1, 0.13, 0.16)]
    checks = cli.sweep_verdict(runs, harness.fit_runs(runs))
    failed = [name for name, ok, _ in checks if not ok]
    assert failed == []


@pytest.mark.slow
def test_check_quick_passes(tmp_path):
    out = tmp_path / "verdicts.txt"
    assert cli.main(["check", "--quick", "--jobs", "1", "--out", str(out)]) == cli.EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 10 and all(l.startswith("[PASS]") for l in lines)
