"""Command-line stages: chaining, artifacts, exit codes, and overrides."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

import pipeline_fixtures as pf
from funcforge import cli
from funcforge.dialogue import GenerationConfig, ScenarioType, read_corpus

ARTIFACTS = (
    "groups.json",
    "corpus.jsonl",
    "run_report.json",
    "rule_reports.jsonl",
    "check_report.json",
    "queue.json",
    "flagged.jsonl",
    "gate_report.json",
    "alpaca.json",
    "train_config.json",
    "stats.json",
    "histogram.json",
)


def run(*argv: str) -> int:
    return cli.main(list(argv))


def setup_chain(
    tmp_path,
    seed: int = 5,
    total: int = 9,
    checker_confidence: float = 0.9,
    scenario_mix=None,
    with_backend: bool = True,
):
    """Write pool, scores, scripted replies, and a config into tmp_path."""
    pf.write_pool_file(tmp_path / "pool.json")
    pf.write_scores_file(tmp_path / "scores.json")
    pool = pf.fixture_pool()
    groups = pf.fixture_groups(pool, pf.fixture_scores())
    gen_cfg = GenerationConfig(
        total=total,
        n_candidates=1,
        seed=seed,
        **({"scenario_mix": scenario_mix} if scenario_mix is not None else {}),
    )
    script = pf.build_corpus_script(pool, groups, gen_cfg, checker_confidence=checker_confidence)
    pf.write_script_file(script, tmp_path / "script.json")
    config = {
        "seed": seed,
        "generation": {"total": total, "n_candidates": 1},
    }
    if scenario_mix is not None:
        config["generation"]["scenario_mix"] = {s.value: w for s, w in scenario_mix}
    if with_backend:
        config["backend"] = {"script": "script.json"}
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return config_path


class TestFullChain:
    def test_all_stages_produce_artifacts(self, tmp_path, capsys):
        config = str(setup_chain(tmp_path))
        for stage in ("pool", "generate", "check", "gate", "export", "stats"):
            assert run(stage, "--config", config) == 0, stage
        out = tmp_path / "out"
        for name in ARTIFACTS:
            assert (out / name).exists(), name
        stdout = capsys.readouterr().out
        assert "pool: 12 tools -> 8 groups" in stdout
        assert "generate: retained 9/9 dialogues" in stdout
        corpus = read_corpus(out / "corpus.jsonl")
        assert len(corpus) == 9
        assert json.loads((out / "check_report.json").read_text()) == {"checked": 9, "failed": 0}
        assert json.loads((out / "gate_report.json").read_text()) == {
            "checked": 9,
            "flagged": 0,
            "retained": 9,
            "theta": 0.75,
        }
        records = json.loads((out / "alpaca.json").read_text())
        assert len(records) == 10  # one per tool-calling step across the nine dialogues

    def test_generate_is_repeatable_byte_for_byte(self, tmp_path):
        config = str(setup_chain(tmp_path, total=3))
        assert run("pool", "--config", config) == 0
        assert run("generate", "--config", config) == 0
        first = (tmp_path / "out" / "corpus.jsonl").read_bytes()
        assert run("generate", "--config", config) == 0
        assert (tmp_path / "out" / "corpus.jsonl").read_bytes() == first


class TestRewardStage:
    def test_scores_records(self, tmp_path):
        pf.write_pool_file(tmp_path / "pool.json")
        records = [
            {
                "id": "perfect",
                "pred_calls": [{"name": "weather_current", "arguments": {"city": "Paris"}}],
                "gold_calls": [{"name": "weather_current", "arguments": {"city": "Paris"}}],
            },
            {
                "pred_calls": [{"name": "weather_current", "arguments": {"city": "Lyon"}}],
                "gold_calls": [{"name": "timezone_lookup", "arguments": {"city": "Lyon"}}],
            },
        ]
        lines = "\n".join(json.dumps(r) for r in records)
        (tmp_path / "rewards.jsonl").write_text(lines + "\n\n", encoding="utf-8")
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"seed": 0}), encoding="utf-8")
        assert run("reward", "--config", str(config)) == 0
        scored = [
            json.loads(line)
            for line in (tmp_path / "out" / "reward_scores.jsonl").read_text().splitlines()
            if line
        ]
        assert scored[0] == {"id": "perfect", "structural": 1.0, "correctness": 3.0, "final": 4.0}
        assert scored[1] == {"id": "r00002", "structural": 1.0, "correctness": 0.0, "final": 1.0}

    def test_malformed_input_line_exits_1(self, tmp_path, capsys):
        pf.write_pool_file(tmp_path / "pool.json")
        (tmp_path / "rewards.jsonl").write_text("{broken\n", encoding="utf-8")
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"seed": 0}), encoding="utf-8")
        assert run("reward", "--config", str(config)) == 1
        assert "error:" in capsys.readouterr().err


class TestErrorPaths:
    def test_missing_config_file(self, tmp_path, capsys):
        assert run("pool", "--config", str(tmp_path / "nope.json")) == 1
        assert "error:" in capsys.readouterr().err

    def test_config_not_json(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text("{nope", encoding="utf-8")
        assert run("pool", "--config", str(config)) == 1
        assert "error:" in capsys.readouterr().err

    def test_config_not_an_object(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text("[1, 2]", encoding="utf-8")
        assert run("pool", "--config", str(config)) == 1
        assert "error:" in capsys.readouterr().err

    def test_generate_without_pool(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"seed": 0}), encoding="utf-8")
        assert run("generate", "--config", str(config)) == 1
        assert "provide a pool file" in capsys.readouterr().err

    def test_generate_without_groups(self, tmp_path, capsys):
        pf.write_pool_file(tmp_path / "pool.json")
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"seed": 0}), encoding="utf-8")
        assert run("generate", "--config", str(config)) == 1
        assert "funcforge pool" in capsys.readouterr().err

    def test_export_without_corpus(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"seed": 0}), encoding="utf-8")
        assert run("export", "--config", str(config)) == 1
        assert "funcforge generate" in capsys.readouterr().err

    def test_generate_without_backend_config(self, tmp_path, capsys):
        config = str(setup_chain(tmp_path, total=3, with_backend=False))
        assert run("pool", "--config", config) == 0
        assert run("generate", "--config", config) == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_stage_rejected(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run("frobnicate", "--config", "x.json")
        assert excinfo.value.code == 2

    def test_config_flag_required(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run("pool")
        assert excinfo.value.code == 2


class TestStrictMode:
    def test_gate_strict_exits_2_on_flags(self, tmp_path):
        config = str(setup_chain(tmp_path, total=3, checker_confidence=0.4))
        for stage in ("pool", "generate", "check"):
            assert run(stage, "--config", config) == 0
        assert run("gate", "--config", config) == 0
        report = json.loads((tmp_path / "out" / "gate_report.json").read_text())
        assert report["flagged"] == 3 and report["retained"] == 0
        assert run("gate", "--config", config, "--strict") == 2

    def test_check_strict_passes_clean_corpus(self, tmp_path):
        config = str(setup_chain(tmp_path, total=3))
        for stage in ("pool", "generate"):
            assert run(stage, "--config", config) == 0
        assert run("check", "--config", config, "--strict") == 0

    def test_check_strict_exits_2_on_rule_failure(self, tmp_path):
        config = str(setup_chain(tmp_path, total=3))
        for stage in ("pool", "generate"):
            assert run(stage, "--config", config) == 0
        corpus_path = tmp_path / "out" / "corpus.jsonl"
        lines = [json.loads(l) for l in corpus_path.read_text().splitlines() if l]
        lines[0]["turns"][-1]["content"] = "Done - the result value is 424242."
        corpus_path.write_text(
            "\n".join(json.dumps(l, separators=(",", ":"), ensure_ascii=True) for l in lines) + "\n",
            encoding="utf-8",
        )
        assert run("check", "--config", config) == 0
        report = json.loads((tmp_path / "out" / "check_report.json").read_text())
        assert report["failed"] == 1
        assert run("check", "--config", config, "--strict") == 2


class TestOverrides:
    def test_seed_flag_reaches_the_generator(self, tmp_path):
        # the script is authored for seed 11; the config says 5, so only
        # the override makes every scripted reply land where it must
        setup_chain(tmp_path, seed=11, total=3, with_backend=False)
        config_data = json.loads((tmp_path / "config.json").read_text())
        config_data["seed"] = 5
        (tmp_path / "config.json").write_text(json.dumps(config_data), encoding="utf-8")
        config = str(tmp_path / "config.json")
        script = str(tmp_path / "script.json")
        assert run("pool", "--config", config) == 0
        assert run("generate", "--config", config, "--seed", "11", "--scripted", script) == 0
        report = json.loads((tmp_path / "out" / "run_report.json").read_text())
        assert report["retained"] == 3

    def test_scripted_flag_beats_config_backend(self, tmp_path):
        config = str(setup_chain(tmp_path, total=3))
        bad_script = tmp_path / "empty_script.json"
        bad_script.write_text(json.dumps({tag: [] for tag in ("user", "assistant")}), encoding="utf-8")
        assert run("pool", "--config", config) == 0
        assert run("generate", "--config", config, "--scripted", str(tmp_path / "script.json")) == 0
        report = json.loads((tmp_path / "out" / "run_report.json").read_text())
        assert report["retained"] == 3


class TestStatsEdgeCases:
    def test_no_call_corpus_skips_histogram(self, tmp_path):
        mix = ((ScenarioType.SPECIAL_NO_TOOL, 1.0),)
        config = str(setup_chain(tmp_path, total=2, scenario_mix=mix))
        for stage in ("pool", "generate"):
            assert run(stage, "--config", config) == 0
        assert run("stats", "--config", config) == 0
        assert (tmp_path / "out" / "stats.json").exists()
        assert not (tmp_path / "out" / "histogram.json").exists()


class TestConsoleScript:
    def test_entry_point_shows_stages(self):
        result = subprocess.run(
            [sys.executable, "-m", "funcforge.cli", "--help"], capture_output=True, text=True
        )
        assert result.returncode == 0
        for stage in cli.STAGES:
            assert stage in result.stdout
