"""CLI flags, env mirroring, scenario exit codes, exports, REPL."""

import io
import json
import threading
from pathlib import Path

import pytest

from srs.cli import build_parser, engine_from_args, main, repl
from srs.agentkit import AgentConfig, build_demo_agent
from srs.scheduler import EngineConfig, Runner

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def test_flags_parse_into_engine_config():
    args = build_parser().parse_args(
        ["--deterministic", "--seed", "9", "--tick-hz", "50",
         "--timeout-ticks", "3"])
    engine = engine_from_args(args)
    assert engine.deterministic and engine.seed == 9
    assert engine.tick_hz == 50 and engine.timeout_ticks == 3


def test_env_vars_mirror_flags(monkeypatch):
    monkeypatch.setenv("SRS_SEED", "21")
    monkeypatch.setenv("SRS_TIMEOUT_TICKS", "4")
    monkeypatch.setenv("SRS_DETERMINISTIC", "1")
    args = build_parser().parse_args([])
    engine = engine_from_args(args)
    assert engine.seed == 21
    assert engine.timeout_ticks == 4
    assert engine.deterministic


def test_scenario_success_exit_zero(capsys):
    assert main(["--scenario", str(SCENARIOS / "greeting.scn")]) == 0
    out = capsys.readouterr().out
    assert "you> hello" in out
    assert "[hibye:greet]" in out


def test_scenario_failure_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("say hello\nexpect-rule parrotqa:answer\n")
    assert main(["--scenario", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "scenario failed" in err
    assert "line 2" in err


def test_scenario_writes_trace_file(tmp_path):
    trace = tmp_path / "run.jsonl"
    assert main(["--scenario", str(SCENARIOS / "question.scn"),
                 "--trace", str(trace)]) == 0
    lines = trace.read_text().splitlines()
    assert lines
    for line in lines[:20]:
        json.loads(line)


def test_dot_export(tmp_path, capsys):
    target = tmp_path / "agent.dot"
    assert main(["--dot", str(target)]) == 0
    text = target.read_text()
    assert text.startswith("digraph")
    assert "rule:hibye:greet" in text


def test_repl_session():
    ctx = build_demo_agent(
        EngineConfig(tick_hz=200.0, seed=5),
        AgentConfig(bored_after=5000, impatient_after=1000))
    runner = Runner(ctx)
    stdin = io.StringIO("hello\n:utility\n:trace on\n:trace off\n:quit\n")

    out_lines = []

    class Out(io.StringIO):
        def write(self, s):
            out_lines.append(s)
            return len(s)

    # feed input slowly enough for the loop thread to answer the greeting
    class SlowStdin:
        def __init__(self, lines):
            self.lines = lines

        def __iter__(self):
            import time
            for line in self.lines:
                time.sleep(0.15)
                yield line

    code = repl(ctx, runner, stdin=SlowStdin(stdin.getvalue().splitlines(True)),
                stdout=Out())
    assert code == 0
    text = "".join(out_lines)
    assert "[hibye:greet]" in text
    assert "bits" in text  # :utility table printed
