"""Operator CLI behaviour: exit codes, offline planners, sim runner.

Live round-trips against a real server are covered by spawning the server
module in a subprocess so the CLI talks over an actual HTTP socket.
"""

import json
import re
import signal
import subprocess
import sys
import time

import pytest

from scanrig.cli import EXIT_OK, EXIT_PARTIAL, EXIT_UNREACHABLE, EXIT_USAGE, main


# ---- usage and exit codes --------------------------------------------------

def test_no_verb_is_usage_error(capsys):
    assert main([]) == EXIT_USAGE


def test_unknown_verb_is_usage_error(capsys):
    assert main(["frobnicate"]) == EXIT_USAGE


def test_help_exits_zero(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "capture" in capsys.readouterr().out


def test_bad_light_level_is_usage_error(capsys):
    assert main(["light", "75"]) == EXIT_USAGE
    assert main(["light", "fifty"]) == EXIT_USAGE


def test_unreachable_coordinator(capsys):
    # nothing listens on port 9; connect fails fast
    rc = main(["--coordinator", "http://127.0.0.1:9", "--timeout", "0.5", "status"])
    assert rc == EXIT_UNREACHABLE
    assert "unreachable" in capsys.readouterr().err


def test_env_var_supplies_coordinator(capsys, monkeypatch):
    monkeypatch.setenv("SCANRIG_COORDINATOR", "http://127.0.0.1:9")
    rc = main(["--timeout", "0.5", "status"])
    assert rc == EXIT_UNREACHABLE
    assert "127.0.0.1:9" in capsys.readouterr().err


# ---- offline planners ------------------------------------------------------

def test_plan_voltage_default_rig(capsys):
    assert main(["plan", "voltage", "--length", "0.8"]) == EXIT_OK
    assert "end voltage: 4.8675 V" in capsys.readouterr().out


def test_plan_voltage_json(capsys):
    assert main(["plan", "voltage", "--length", "0.8", "--json"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["end_voltage"] == pytest.approx(4.8675, abs=5e-4)


def test_plan_wire_length(capsys):
    assert main(["plan", "wire-length"]) == EXIT_OK
    out = capsys.readouterr().out
    m = re.search(r"max wire length: ([\d.]+) m", out)
    assert m and float(m.group(1)) >= 0.8


def test_plan_wire_length_infeasible(capsys):
    rc = main(["plan", "wire-length", "--min-voltage", "5.5"])
    assert rc == EXIT_USAGE
    assert "infeasible" in capsys.readouterr().err


def test_plan_beams(capsys):
    assert main(["plan", "beams", "--width", "2.90", "--depth", "2.51"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "cameras: 96" in out
    m = re.search(r"min adjacent angle: ([\d.]+) deg", out)
    assert m and 12.0 <= float(m.group(1)) <= 15.0 + 1e-9


def test_plan_beams_rejects_degenerate(capsys):
    rc = main(["plan", "beams", "--width", "0", "--depth", "0"])
    assert rc == EXIT_USAGE


def test_plan_transfer(capsys):
    assert main(["plan", "transfer"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "3.572" in out and "3.839" in out


# ---- sim runner ------------------------------------------------------------

def _write_scenario(tmp_path, **extra):
    doc = {
        "nodes": 3,
        "seed": 7,
        "frame_width": 64,
        "frame_height": 48,
        "actions": [
            {"t": 0.2, "op": "capture", "light_level": 100,
             "pattern": {"kind": "dots", "seed": 5, "density": 0.5}},
        ],
    }
    doc.update(extra)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    return path


def test_sim_run_reports_complete(tmp_path, capsys):
    scen = _write_scenario(tmp_path)
    out = tmp_path / "report.json"
    rc = main(["sim", "run", "--scenario", str(scen), "--out", str(out),
               "--capture-root", str(tmp_path / "frames")])
    assert rc == EXIT_OK
    report = json.loads(out.read_text())
    assert [s["outcome"] for s in report["sessions"]] == ["complete"]
    assert capsys.readouterr().out  # summary printed


def test_sim_run_partial_exit_code(tmp_path, capsys):
    scen = _write_scenario(
        tmp_path, faults=[{"t": 0.26, "node": "n01", "kind": "crash"}])
    rc = main(["sim", "run", "--scenario", str(scen),
               "--capture-root", str(tmp_path / "frames")])
    assert rc == EXIT_PARTIAL


def test_sim_rejects_bad_scenario(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{ not json")
    rc = main(["sim", "run", "--scenario", str(path)])
    assert rc == EXIT_USAGE
    assert "bad scenario" in capsys.readouterr().err


# ---- live server round trip ------------------------------------------------

@pytest.fixture(scope="module")
def live_server(tmp_path_factory):
    root = tmp_path_factory.mktemp("live")
    proc = subprocess.Popen(
        [sys.executable, "-u", "-m", "scanrig.runtime.server",
         "--port", "0", "--http-port", "0", "--agents", "4",
         "--capture-root", str(root / "captures")],
        stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True,
    )
    try:
        line = proc.stdout.readline()
        m = re.search(r"api (http://127\.0\.0\.1:\d+)", line)
        assert m, f"unexpected server banner: {line!r}"
        url = m.group(1)
        deadline = time.monotonic() + 10.0
        while time.monotonic() < deadline:
            rc = main(["--coordinator", url, "status", "--json"])
            if rc == EXIT_OK:
                break
            time.sleep(0.2)
        yield url
    finally:
        proc.send_signal(signal.SIGINT)
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()


def _wait_nodes_up(url, want, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        import io
        from contextlib import redirect_stdout

        buf = io.StringIO()
        with redirect_stdout(buf):
            rc = main(["--coordinator", url, "status", "--json"])
        if rc == EXIT_OK:
            nodes = json.loads(buf.getvalue())
            if sum(1 for n in nodes if n["state"] == "connected") >= want:
                return
        time.sleep(0.2)
    raise TimeoutError("agents never connected")


def test_live_status_grid(live_server, capsys):
    _wait_nodes_up(live_server, 4)
    capsys.readouterr()
    assert main(["--coordinator", live_server, "status"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "beam 00" in out
    assert "4/4 connected" in out


def test_live_light_and_fleet(live_server, capsys):
    _wait_nodes_up(live_server, 4)
    capsys.readouterr()
    assert main(["--coordinator", live_server, "light", "50"]) == EXIT_OK
    assert "level 50 sent to 4 nodes" in capsys.readouterr().out

    rc = main(["--coordinator", live_server, "fleet", "uptime",
               "--targets", "nodes:n00,n03", "--limit", "1"])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert "2/2 ok" in out
    assert "peak concurrency 1" in out


def test_live_capture_completes(live_server, capsys):
    _wait_nodes_up(live_server, 4)
    capsys.readouterr()
    rc = main(["--coordinator", live_server, "capture",
               "--pattern-kind", "dots", "--seed", "3", "--json"])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    snap = json.loads(out)
    assert snap["outcome"] == "complete"
    assert snap["delivered"] == snap["total"] == 8
