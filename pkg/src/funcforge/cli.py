"""Pipeline orchestrator.

``funcforge <stage> --config <path> [--seed N] [--scripted <script.json>]
[--strict]`` where stage is one of pool, generate, check, gate, export,
stats, reward, serve.  Exit code 0 on success, 2 when --strict and a gate
reported failures, 1 on errors.  Written artifacts are deterministic for
a given config/seed/script; wall-clock timings only go to the log.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import dataset, gate as gate_mod, rules, service as service_mod
from .agents import SamplingConfig, SlotStrategy
from .backend import Backend, build_backend
from .dialogue import (
    Dialogue,
    GenerationConfig,
    ScenarioType,
    generate_corpus,
    read_corpus,
    write_corpus,
)
from .errors import (
    ConfigError,
    FuncForgeError,
    MissingPrerequisite,
    NoEligibleCalls,
    ParseError,
)
from .gate import QueueStore, build_queue, model_check, write_flagged
from .tools import SimilarityRecord, ToolCall, cluster_pool, load_pool, read_groups, score_all_pairs, write_groups

log = logging.getLogger("funcforge")

STAGES = ("pool", "generate", "check", "gate", "export", "stats", "reward", "serve")

DEFAULT_PATHS = {
    "pool": "pool.json",
    "scores": "scores.json",
    "groups": "out/groups.json",
    "corpus": "out/corpus.jsonl",
    "report": "out/run_report.json",
    "rule_reports": "out/rule_reports.jsonl",
    "check_report": "out/check_report.json",
    "queue": "out/queue.json",
    "flagged": "out/flagged.jsonl",
    "gate_report": "out/gate_report.json",
    "alpaca": "out/alpaca.json",
    "train_config": "out/train_config.json",
    "stats": "out/stats.json",
    "histogram": "out/histogram.json",
    "rewards_in": "rewards.jsonl",
    "rewards_out": "out/reward_scores.jsonl",
}


@dataclass
class PipelineConfig:
    base_dir: Path
    seed: int = 0
    paths: dict[str, Path] = field(default_factory=dict)
    backend_script: Path | None = None
    backend_endpoint: str | None = None
    backend_model: str | None = None
    backend_retries: int = 3
    generation: dict[str, Any] = field(default_factory=dict)
    theta: float = gate_mod.THETA_DEFAULT
    max_turns: int | None = None
    include_final_answers: bool = False
    histogram_sample: int = dataset.HISTOGRAM_SAMPLE
    service_host: str = "127.0.0.1"
    service_port: int = 8765
    prompt_dir: str | None = None

    def path(self, key: str) -> Path:
        return self.paths[key]


def load_config(path: str, seed: int | None, scripted: str | None) -> PipelineConfig:
    config_path = Path(path)
    try:
        raw = json.loads(config_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    base_dir = config_path.parent
    cfg = PipelineConfig(base_dir=base_dir)
    cfg.seed = int(raw.get("seed", 0))
    if seed is not None:
        cfg.seed = seed
    path_overrides = raw.get("paths", {})
    if not isinstance(path_overrides, dict):
        raise ConfigError("'paths' must be an object")
    for key, default in DEFAULT_PATHS.items():
        value = path_overrides.get(key, default)
        cfg.paths[key] = (base_dir / value).resolve() if not Path(value).is_absolute() else Path(value)
    backend_raw = raw.get("backend", {})
    if scripted is not None:
        cfg.backend_script = Path(scripted)
    elif backend_raw.get("script"):
        script = Path(backend_raw["script"])
        cfg.backend_script = script if script.is_absolute() else (base_dir / script).resolve()
    cfg.backend_endpoint = backend_raw.get("endpoint")
    cfg.backend_model = backend_raw.get("model")
    cfg.backend_retries = int(backend_raw.get("retries", 3))
    cfg.generation = raw.get("generation", {})
    gate_raw = raw.get("gate", {})
    cfg.theta = float(gate_raw.get("theta", gate_mod.THETA_DEFAULT))
    rules_raw = raw.get("rules", {})
    if "max_turns" in rules_raw:
        cfg.max_turns = int(rules_raw["max_turns"])
    export_raw = raw.get("export", {})
    cfg.include_final_answers = bool(export_raw.get("include_final_answers", False))
    histogram_raw = raw.get("histogram", {})
    cfg.histogram_sample = int(histogram_raw.get("sample_n", dataset.HISTOGRAM_SAMPLE))
    service_raw = raw.get("service", {})
    cfg.service_host = service_raw.get("host", "127.0.0.1")
    cfg.service_port = int(service_raw.get("port", 8765))
    cfg.prompt_dir = raw.get("prompt_dir")
    return cfg


def build_generation_config(cfg: PipelineConfig) -> GenerationConfig:
    raw = cfg.generation
    mix_raw = raw.get("scenario_mix")
    mix = GenerationConfig().scenario_mix
    if mix_raw is not None:
        if not isinstance(mix_raw, dict):
            raise ConfigError("'generation.scenario_mix' must be an object")
        try:
            mix = tuple((ScenarioType(key), float(value)) for key, value in mix_raw.items())
        except ValueError as exc:
            raise ConfigError(f"unknown scenario in mix: {exc}") from exc
    sampling_raw = raw.get("sampling", {})
    weights = sampling_raw.get("tier_weights", (2.0, 2.0, 1.0))
    if len(weights) != 3:
        raise ConfigError("'sampling.tier_weights' needs exactly three values (high, medium, low)")
    try:
        strategy = SlotStrategy(raw.get("slot_strategy", "dynamic"))
    except ValueError as exc:
        raise ConfigError(f"unknown slot strategy: {exc}") from exc
    return GenerationConfig(
        total=int(raw.get("total", 10)),
        t_max=int(raw.get("t_max", 8)),
        n_candidates=int(raw.get("n_candidates", 4)),
        scenario_mix=mix,
        slot_strategy=strategy,
        sampling=SamplingConfig(
            m_targets=int(sampling_raw.get("m_targets", 2)),
            n_distractors=int(sampling_raw.get("n_distractors", 3)),
            tier_weights=tuple(float(w) for w in weights),
        ),
        seed=cfg.seed,
        parallelism=int(raw.get("parallelism", 1)),
        error_budget=int(raw.get("error_budget", 3)),
        prompt_dir=cfg.prompt_dir,
    )


def make_backend(cfg: PipelineConfig) -> Backend:
    return build_backend(
        cfg.backend_script, cfg.backend_endpoint, cfg.backend_model, cfg.backend_retries
    )


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise MissingPrerequisite(f"{path} does not exist; run '{produced_by}' first")
    return path


def _write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=True) + "\n", encoding="utf-8")


def _max_turns(cfg: PipelineConfig, gen_cfg: GenerationConfig) -> int:
    return cfg.max_turns if cfg.max_turns is not None else 2 * gen_cfg.t_max + 2


# ----------------------------------------------------------------- stages


def stage_pool(cfg: PipelineConfig, strict: bool) -> int:
    pool = load_pool(_require(cfg.path("pool"), "provide a pool file"))
    scores_path = cfg.path("scores")
    if scores_path.exists():
        raw = json.loads(scores_path.read_text(encoding="utf-8"))
        scores = [SimilarityRecord(a=r["a"], b=r["b"], score=float(r["score"])) for r in raw]
        log.info("using %d precomputed similarity scores", len(scores))
    else:
        scores = score_all_pairs(pool, make_backend(cfg), cfg.prompt_dir)
    groups = cluster_pool(pool, scores)
    cfg.path("groups").parent.mkdir(parents=True, exist_ok=True)
    write_groups(groups, cfg.path("groups"))
    print(f"pool: {len(pool)} tools -> {len(groups)} groups")
    return 0


def stage_generate(cfg: PipelineConfig, strict: bool) -> int:
    pool = load_pool(_require(cfg.path("pool"), "provide a pool file"))
    groups = read_groups(_require(cfg.path("groups"), "funcforge pool"))
    gen_cfg = build_generation_config(cfg)
    backend = make_backend(cfg)
    started = time.monotonic()
    corpus, report = generate_corpus(pool, groups, gen_cfg, backend)
    elapsed = time.monotonic() - started
    cfg.path("corpus").parent.mkdir(parents=True, exist_ok=True)
    write_corpus(corpus, cfg.path("corpus"))
    _write_json(cfg.path("report"), report.to_dict())
    log.info("generated %d/%d dialogues in %.2fs", report.retained, report.total, elapsed)
    print(f"generate: retained {report.retained}/{report.total} dialogues")
    return 0


def stage_check(cfg: PipelineConfig, strict: bool) -> int:
    corpus = read_corpus(_require(cfg.path("corpus"), "funcforge generate"))
    gen_cfg = build_generation_config(cfg)
    max_turns = _max_turns(cfg, gen_cfg)
    pool = load_pool(cfg.path("pool")) if cfg.path("pool").exists() else None
    reports = [
        rules.run_all(d, list(d.tools.all_tools()), pool, max_turns=max_turns) for d in corpus
    ]
    cfg.path("rule_reports").parent.mkdir(parents=True, exist_ok=True)
    rules.write_reports(reports, cfg.path("rule_reports"))
    failed = sum(1 for r in reports if not r.overall)
    _write_json(cfg.path("check_report"), {"checked": len(reports), "failed": failed})
    print(f"check: {len(reports)} dialogues, {failed} failing")
    if strict and failed:
        return 2
    return 0


def stage_gate(cfg: PipelineConfig, strict: bool) -> int:
    corpus = read_corpus(_require(cfg.path("corpus"), "funcforge generate"))
    reports_by_id = {}
    if cfg.path("rule_reports").exists():
        reports_by_id = {r.dialogue_id: r for r in rules.read_reports(cfg.path("rule_reports"))}
    backend = make_backend(cfg)
    verdicts = {
        d.id: model_check(d, d.tools.all_tools(), backend, cfg.prompt_dir) for d in corpus
    }
    state = build_queue(corpus, reports_by_id, verdicts, cfg.theta)
    cfg.path("queue").parent.mkdir(parents=True, exist_ok=True)
    QueueStore(cfg.path("queue")).initialize(state)
    write_flagged(state, cfg.path("flagged"))
    _write_json(
        cfg.path("gate_report"),
        {
            "checked": state.total_checked,
            "flagged": len(state.items),
            "retained": state.total_checked - len(state.items),
            "theta": cfg.theta,
        },
    )
    print(f"gate: {state.total_checked} checked, {len(state.items)} flagged")
    if strict and state.items:
        return 2
    return 0


def stage_export(cfg: PipelineConfig, strict: bool) -> int:
    corpus = read_corpus(_require(cfg.path("corpus"), "funcforge generate"))
    records = dataset.export_alpaca(corpus, include_final_answers=cfg.include_final_answers)
    cfg.path("alpaca").parent.mkdir(parents=True, exist_ok=True)
    dataset.write_alpaca(records, cfg.path("alpaca"))
    dataset.emit_train_config(cfg.path("train_config"))
    print(f"export: {len(records)} records")
    return 0


def stage_stats(cfg: PipelineConfig, strict: bool) -> int:
    corpus = read_corpus(_require(cfg.path("corpus"), "funcforge generate"))
    stats = dataset.compute_stats(corpus)
    _write_json(cfg.path("stats"), stats.to_dict())
    try:
        histogram = dataset.slot_histogram(
            corpus, sample_n=cfg.histogram_sample, rng=random.Random(f"{cfg.seed}:histogram")
        )
        _write_json(cfg.path("histogram"), histogram.to_dict())
    except NoEligibleCalls as exc:
        log.warning("histogram skipped: %s", exc)
    print(dataset.format_stats_table(stats))
    return 0


def stage_reward(cfg: PipelineConfig, strict: bool) -> int:
    from .rewards import final_reward

    source = _require(cfg.path("rewards_in"), "provide a rewards input file")
    pool = load_pool(_require(cfg.path("pool"), "provide a pool file"))
    out_path = cfg.path("rewards_out")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(source, encoding="utf-8") as src, open(out_path, "w", encoding="utf-8") as dst:
        for line_no, line in enumerate(src, 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                pred = [ToolCall.from_dict(c) for c in raw.get("pred_calls", ())]
                gold = [ToolCall.from_dict(c) for c in raw.get("gold_calls", ())]
            except (json.JSONDecodeError, FuncForgeError) as exc:
                raise ParseError(f"{source}:{line_no}: {exc}") from exc
            breakdown = final_reward(pred, gold, pool.tools)
            payload = {"id": raw.get("id", f"r{line_no:05d}"), **breakdown.to_dict()}
            dst.write(json.dumps(payload, separators=(",", ":"), ensure_ascii=True) + "\n")
            n += 1
    print(f"reward: scored {n} records")
    return 0


def stage_serve(cfg: PipelineConfig, strict: bool) -> int:
    store = QueueStore(_require(cfg.path("queue"), "funcforge gate"))
    service_mod.serve(store, cfg.service_host, cfg.service_port)
    return 0


STAGE_FUNCS = {
    "pool": stage_pool,
    "generate": stage_generate,
    "check": stage_check,
    "gate": stage_gate,
    "export": stage_export,
    "stats": stage_stats,
    "reward": stage_reward,
    "serve": stage_serve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="funcforge", description=__doc__)
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGES:
        stage_parser = sub.add_parser(stage, help=f"run the {stage} stage")
        stage_parser.add_argument("--config", required=True, help="pipeline config JSON")
        stage_parser.add_argument("--seed", type=int, default=None, help="override the config seed")
        stage_parser.add_argument("--scripted", default=None, help="use a scripted backend from this file")
        stage_parser.add_argument("--strict", action="store_true", help="exit 2 when a gate reports failures")
        if stage == "serve":
            stage_parser.add_argument("--host", default=None)
            stage_parser.add_argument("--port", type=int, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed, args.scripted)
        if args.stage == "serve":
            if args.host:
                cfg.service_host = args.host
            if args.port is not None:
                cfg.service_port = args.port
        return STAGE_FUNCS[args.stage](cfg, args.strict)
    except FuncForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
