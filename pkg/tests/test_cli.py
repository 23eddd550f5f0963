import json
import os
import subprocess
import sys

import pytest

from mistguard.cli import main
from mistguard.frame import GrayFrame, RawFrame
from mistguard.netpbm import read_pgm, write_ppm
from mistguard.node import MachineSim

from test_synth import WALKTHROUGH_MANIFEST_SHA256


@pytest.fixture
def constant_ppm(tmp_path):
    p = tmp_path / "in.ppm"
    p.write_bytes(write_ppm(RawFrame.filled((90, 90, 90))))
    return p


def test_preprocess_constant(tmp_path, constant_ppm):
    out = tmp_path / "out.pgm"
    assert main(["preprocess", "--in", str(constant_ppm), "--out", str(out)]) == 0
    assert read_pgm(out.read_bytes()) == GrayFrame.filled(90)


def test_preprocess_missing_file(tmp_path, capsys):
    rc = main(["preprocess", "--in", str(tmp_path / "nope.ppm"), "--out", str(tmp_path / "o.pgm")])
    assert rc == 2
    assert "nope.ppm" in capsys.readouterr().err


def test_preprocess_bad_kernel(tmp_path, constant_ppm):
    rc = main(["preprocess", "--in", str(constant_ppm), "--out", str(tmp_path / "o.pgm"),
               "--kernel", "4"])
    assert rc == 2
    assert not (tmp_path / "o.pgm").exists()


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["preprocess", "--in", "x"])
    assert info.value.code == 2


def test_synth_prints_manifest_and_pins_digest(tmp_path, capsys):
    out = tmp_path / "w"
    assert main(["synth", "--scene", "walkthrough-42", "--frames", "200", "--seed", "42",
                 "--out", str(out)]) == 0
    captured = capsys.readouterr()
    assert captured.out.strip() == str(out / "manifest.csv")
    assert WALKTHROUGH_MANIFEST_SHA256 in captured.err
    assert len(list(out.glob("frame_*.ppm"))) == 200
    assert not list(out.glob(".tmp-*"))


def test_synth_twice_same_digest(tmp_path, capsys):
    digests = []
    for d in ("a", "b"):
        main(["synth", "--scene", "static-q3", "--frames", "5", "--seed", "3",
              "--out", str(tmp_path / d)])
        digests.append(capsys.readouterr().err)
    assert digests[0] == digests[1]


@pytest.mark.parametrize("args", [["--scene", "walkthrough-42", "--frames", "0"],
                                  ["--scene", "atlantis", "--frames", "3"]])
def test_synth_errors(tmp_path, args):
    assert main(["synth", *args, "--out", str(tmp_path / "o")]) == 2


def test_synth_unwritable(tmp_path):
    (tmp_path / "f").write_text("x")
    assert main(["synth", "--scene", "empty", "--frames", "2", "--out",
                 str(tmp_path / "f" / "o")]) == 2


def test_eval_report_and_csv(walkthrough, tmp_path, capsys):
    csv_path = tmp_path / "r.csv"
    rc = main(["eval", "--manifest", walkthrough.manifest_path, "--method", "hybrid",
               "--csv", str(csv_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "== Hybrid (200 frames) ==" in out
    assert "accuracy: 100.00%" in out
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "method,tp,fp,fn,tn,accuracy,lat_min_ms,lat_mean_ms,lat_max_ms,lat_p99_ms"
    assert lines[1].startswith("hybrid,110,0,0,90,100.00,")


def test_eval_errors(tmp_path, walkthrough):
    (tmp_path / "empty.csv").write_text("")
    assert main(["eval", "--manifest", str(tmp_path / "empty.csv")]) == 2
    assert main(["eval", "--manifest", walkthrough.manifest_path, "--method", "c"]) == 2
    (tmp_path / "bad.csv").write_text("frame,label,quadrants\nx.ppm,maybe,\n")
    assert main(["eval", "--manifest", str(tmp_path / "bad.csv")]) == 2


def test_detect_directory_prints_json(walkthrough, capsys):
    directory = os.path.dirname(walkthrough.manifest_path)
    assert main(["detect", "--in", directory]) == 0
    docs = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert len(docs) == 200
    assert docs[0]["frame"] == "frame_00000.ppm" and docs[0]["frame_seq"] == 1
    assert docs[45]["positive"] and docs[45]["method_b"]["quadrants"] == [0]
    assert all(d["positive"] == (d["method_a"]["positive"] or d["method_b"]["positive"])
               for d in docs)


def test_bench_lines(capsys):
    assert main(["bench", "--frames", "40", "--method", "all", "--backend", "both"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 3 * len(__import__("mistguard.kernels").kernels.BACKENDS)
    assert any(line.startswith("hybrid") and "budget 10 ms" in line for line in out)
    assert any(line.startswith("a ") and "budget 7 ms" in line for line in out)
    assert any(line.startswith("b ") and "budget 6 ms" in line for line in out)


def test_bench_errors(walkthrough):
    assert main(["bench", "--manifest", walkthrough.manifest_path, "--repeat", "0"]) == 2
    assert main(["bench", "--manifest", "/nonexistent/m.csv"]) == 2
    assert main(["bench", "--frames", "2", "--backend", "fortran"]) == 2


def _node_config(tmp_path, source_dir, machine):
    cfg = tmp_path / "node.conf"
    cfg.write_text(f"node.id = cli-node\nsource.kind = directory\nsource.path = {source_dir}\n"
                   f"source.fps = 2000\nmachines.endpoints = {machine[0]}:{machine[1]}\n"
                   "zones.monitored = 0,1\nzones.restricted = 1\nzones.caution = 0\n")
    return cfg


def test_node_subcommand_runs_replay(tmp_path, walkthrough):
    with MachineSim(("127.0.0.1", 0), "m") as sim:
        cfg = _node_config(tmp_path, os.path.dirname(walkthrough.manifest_path), sim.address)
        assert main(["node", "--config", str(cfg)]) == 0
        levels = [e.level for e in sim.snapshot().log]
    assert levels[0] == "RUN" and "STOP" in levels and levels[-1] == "RUN"


def test_node_subcommand_failsafe_exit_3(tmp_path, walkthrough):
    src = tmp_path / "frames"
    src.mkdir()
    for p in walkthrough.frame_paths[:10]:
        (src / os.path.basename(p)).write_bytes(open(p, "rb").read())
    (src / "frame_00005.ppm").write_bytes(b"P6\n160 120\n255\n")
    with MachineSim(("127.0.0.1", 0), "m") as sim:
        rc = main(["node", "--config", str(_node_config(tmp_path, src, sim.address))])
        last = sim.snapshot().log[-1]
    assert rc == 3
    assert (last.level, last.reason, last.frame_seq) == ("STOP", "failsafe", 6)


def test_node_bad_config_exit_2(tmp_path):
    (tmp_path / "c.conf").write_text("wat = 1\n")
    assert main(["node", "--config", str(tmp_path / "c.conf")]) == 2


def test_machine_sim_bad_listen():
    assert main(["machine-sim", "--listen", "nope"]) == 2


def test_module_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "mistguard", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    for cmd in ("preprocess", "detect", "eval", "synth", "node", "machine-sim", "bench"):
        assert cmd in res.stdout
