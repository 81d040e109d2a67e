"""Capture and maintenance-command backends.

The mock backend is the one every test and simulation uses: frame bytes are a
pure function of (session, node, phase, pattern seed), so two runs with the
same seeds produce identical images on every node. The shell backends shell
out to real tooling on actual rig hardware and stay out of CI.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from pathlib import Path

from ..rng import byte_stream, derive_seed


class BackendFailure(Exception):
    """A capture attempt failed at the sensor or driver level."""


class MockCaptureBackend:
    """Deterministic PPM generator standing in for the camera stack."""

    def __init__(self):
        self.fail_times = 0  # fault injection: fail this many next captures
        self.captures = 0

    def capture(
        self,
        session_id: str,
        node_id: str,
        phase: str,
        pattern_seed: int | None,
        width: int,
        height: int,
    ) -> bytes:
        self.captures += 1
        if self.fail_times > 0:
            self.fail_times -= 1
            raise BackendFailure(f"sensor timeout on {node_id}")
        seed_str = "" if pattern_seed is None else str(pattern_seed)
        seed = derive_seed(session_id, node_id, phase, seed_str)
        header = f"P6\n{width} {height}\n255\n".encode("ascii")
        return header + byte_stream(seed, width * height * 3)


class ShellCaptureBackend:  # pragma: no cover - hardware path
    """Runs a stills command (raspistill and friends) and reads the file back.

    The template receives {out}, {width}, {height} via str.format.
    """

    def __init__(self, command_template: str, timeout: float = 10.0):
        self.command_template = command_template
        self.timeout = timeout

    def capture(self, session_id, node_id, phase, pattern_seed, width, height) -> bytes:
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "frame.ppm"
            cmd = self.command_template.format(out=out, width=width, height=height)
            proc = subprocess.run(
                shlex.split(cmd), capture_output=True, timeout=self.timeout
            )
            if proc.returncode != 0:
                raise BackendFailure(
                    f"capture command exited {proc.returncode}: {proc.stderr.decode(errors='replace')[:200]}"
                )
            if not out.exists():
                raise BackendFailure("capture command produced no file")
            return out.read_bytes()


class MockCommandBackend:
    """Echo-style stand-in for on-node maintenance commands."""

    def __init__(self, node_id: str):
        self.node_id = node_id
        self.fail_commands: set[str] = set()
        self.history: list[str] = []

    def run(self, command: str) -> tuple[int, str, str]:
        self.history.append(command)
        if command in self.fail_commands:
            return (1, "", f"{self.node_id}: command failed")
        return (0, f"{self.node_id}: {command}", "")


class ShellCommandBackend:  # pragma: no cover - hardware path
    """Executes maintenance commands on the node itself."""

    def __init__(self, node_id: str, timeout: float = 30.0):
        self.node_id = node_id
        self.timeout = timeout

    def run(self, command: str) -> tuple[int, str, str]:
        proc = subprocess.run(
            command, shell=True, capture_output=True, timeout=self.timeout
        )
        return (
            proc.returncode,
            proc.stdout.decode(errors="replace"),
            proc.stderr.decode(errors="replace"),
        )
