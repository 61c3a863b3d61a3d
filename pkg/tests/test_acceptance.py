"""End-to-end acceptance gates.

Each test covers one shipping criterion and prints a single
``ACCEPTANCE <name>: PASS|FAIL`` line so a suite run doubles as a
release checklist.
"""

from __future__ import annotations

import json
import random
import re
import threading
import time
from collections import Counter
from types import SimpleNamespace

import pytest

import fault_corpus as fc
import pipeline_fixtures as pf
import test_service as svc
from test_cli import setup_chain
from test_rewards import oracle_best_total

from funcforge import cli, dataset, rules
from funcforge.agents import (
    SampleSelection,
    SamplingConfig,
    SlotStrategy,
    choose_group,
    judge_select,
    normalize_label,
    plan_slots,
)
from funcforge.backend import GenerationResponse, ScriptedBackend
from funcforge.dialogue import (
    Action,
    Dialogue,
    DialogueTurn,
    GenerationConfig,
    ScenarioType,
    generate_corpus,
    read_corpus,
    scenario_schedule,
)
from funcforge.gate import CheckerVerdict, GateDecision, gate
from funcforge.rewards import clipped_objective, correctness_reward, group_advantages
from funcforge.tools import Tier, ToolCall, tier_of


@pytest.fixture
def criterion(request, capsys):
    name = request.node.name.removeprefix("test_").replace("_", "-")
    failed_before = request.session.testsfailed
    yield
    outcome = "PASS" if request.session.testsfailed == failed_before else "FAIL"
    with capsys.disabled():
        print(f"ACCEPTANCE {name}: {outcome}", flush=True)


def run_full_chain(base) -> dict[str, bytes]:
    config = setup_chain(base, seed=7, total=100)
    for stage in ("pool", "generate", "check", "gate", "export", "stats"):
        assert cli.main([stage, "--config", str(config)]) == 0, stage
    out = base / "out"
    return {
        path.relative_to(out).as_posix(): path.read_bytes()
        for path in sorted(out.rglob("*"))
        if path.is_file()
    }


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    base = tmp_path_factory.mktemp("chain-a")
    started = time.monotonic()
    artifacts = run_full_chain(base)
    elapsed = time.monotonic() - started
    corpus = read_corpus(base / "out" / "corpus.jsonl")
    return SimpleNamespace(base=base, artifacts=artifacts, corpus=corpus, elapsed=elapsed)


def test_deterministic_regeneration(chain, tmp_path_factory, criterion):
    base = tmp_path_factory.mktemp("chain-b")
    started = time.monotonic()
    artifacts = run_full_chain(base)
    elapsed = time.monotonic() - started
    assert len(chain.corpus) == 100
    assert chain.artifacts.keys() == artifacts.keys()
    for name in chain.artifacts:
        assert chain.artifacts[name] == artifacts[name], f"{name} differs between runs"
    assert chain.elapsed + elapsed < 120.0


def test_scenario_mix_quotas(chain, criterion):
    mix = GenerationConfig().mix_dict()
    counts = Counter(scenario_schedule(mix, 90))
    assert [counts[s] for s in mix] == [20, 20, 20, 20, 5, 5]

    pool = pf.fixture_pool()
    groups = pf.fixture_groups(pool, pf.fixture_scores())
    cfg90 = GenerationConfig(total=90, n_candidates=1, seed=7)
    script = pf.build_corpus_script(pool, groups, cfg90)
    corpus90, report90 = generate_corpus(pool, groups, cfg90, ScriptedBackend(script))
    assert report90.retained == 90
    produced = Counter(d.scenario for d in corpus90)
    single = produced[ScenarioType.SINGLE_SINGLE] + produced[ScenarioType.SINGLE_MULTI]
    multi = produced[ScenarioType.MULTI_SINGLE] + produced[ScenarioType.MULTI_MULTI]
    special = produced[ScenarioType.SPECIAL_NO_TOOL] + produced[ScenarioType.SPECIAL_BAD_PARAMS]
    assert (single, multi, special) == (40, 40, 10)

    from_chain = Counter(d.scenario for d in chain.corpus)
    assert [from_chain[s] for s in mix] == [22, 22, 22, 22, 6, 6]


def test_usage_context_uniqueness(chain, criterion):
    pool = pf.fixture_pool()
    groups = pf.fixture_groups(pool, pf.fixture_scores())
    sampling = SamplingConfig()
    labels_by_group: dict[int, list[str]] = {}
    for dialogue in chain.corpus:
        job = int(dialogue.id[1:])
        rng = random.Random(f"7:{job}:sample")
        group_index = choose_group(groups, sampling, rng)
        labels_by_group.setdefault(group_index, []).append(normalize_label(dialogue.type_label))
    assert sum(len(labels) for labels in labels_by_group.values()) == 100
    for group_index, labels in labels_by_group.items():
        assert len(set(labels)) == len(labels), f"group {group_index} repeats a usage context"


def test_fault_detection_precision_recall(criterion):
    mutants = fc.mutant_cases()
    cleans = fc.clean_cases()
    assert len(mutants) == 20 and len(cleans) == 20
    true_positives = 0
    for _, rule, (dialogue, tools) in mutants:
        report = rules.run_all(dialogue, tools)
        if not report.overall and [r.rule.value for r in report.failures()] == [rule]:
            true_positives += 1
    false_positives = sum(1 for dialogue, tools in cleans if not rules.run_all(dialogue, tools).overall)
    precision = true_positives / (true_positives + false_positives)
    recall = true_positives / len(mutants)
    assert (precision, recall) == (1.0, 1.0)


def test_distractor_tier_boundaries(criterion):
    for score, expected in ((0.61, Tier.HIGH), (0.60, Tier.MEDIUM), (0.30, Tier.LOW), (0.301, Tier.MEDIUM)):
        assert tier_of(score) is expected, score
    assert tier_of(1.0) is Tier.HIGH
    assert tier_of(0.0) is Tier.LOW


def test_confidence_gate_threshold(criterion):
    assert gate(CheckerVerdict(rationale="solid", confidence=0.80)) is GateDecision.RETAIN
    assert gate(CheckerVerdict(rationale="borderline", confidence=0.75)) is GateDecision.FLAG
    relaxed = CheckerVerdict(rationale="middling", confidence=0.65)
    assert gate(relaxed, theta=0.6) is GateDecision.RETAIN
    assert gate(relaxed, theta=0.65) is GateDecision.FLAG


def test_set_matching_reward_oracle(criterion):
    rng = random.Random(9001)
    values = (0, 1, 1.0, 2, "2", True)

    def random_calls() -> list[ToolCall]:
        return [
            ToolCall(
                name=rng.choice("abcd"),
                arguments={
                    key: rng.choice(values)
                    for key in rng.sample(("w", "x", "y", "z"), rng.randint(0, 4))
                },
            )
            for _ in range(rng.randint(0, 4))
        ]

    started = time.monotonic()
    for _ in range(1000):
        pred, gold = random_calls(), random_calls()
        expected = oracle_best_total(pred, gold) / max(len(pred), len(gold), 1)
        assert correctness_reward(pred, gold) == expected
    assert time.monotonic() - started < 30.0


def test_group_advantage_normalization(criterion):
    adv = group_advantages((1.0, 2.0, 3.0))
    assert adv.values == pytest.approx((-1.224744, 0.0, 1.224744), abs=1e-5)
    shifted = group_advantages((101.0, 102.0, 103.0))
    assert shifted.values == adv.values  # exact invariance under a constant shift
    rng = random.Random(424)
    for _ in range(1000):
        group = [rng.uniform(0.0, 4.0) for _ in range(rng.randint(2, 16))]
        assert abs(sum(group_advantages(group).values)) <= 1e-9


def test_clipped_objective_values(criterion):
    rng = random.Random(31)
    for _ in range(20):
        group = [rng.uniform(0.0, 4.0) for _ in range(rng.randint(2, 12))]
        advantages = list(group_advantages(group).values)
        probs = [rng.uniform(0.05, 1.0) for _ in advantages]
        assert abs(clipped_objective(probs, probs, advantages)) <= 1e-12
    # ratio 2 with epsilon 0.2: positive advantage clips, negative does not
    assert clipped_objective([0.5], [0.25], [1.0]) == 1.2
    assert clipped_objective([0.5], [0.25], [-1.0]) == -2.0


class FixedJudge:
    """Always picks presented position 1, whatever it holds."""

    def complete(self, request):
        return GenerationResponse(content="1")


class KeyedJudge:
    """Picks whichever presented position contains the marker text."""

    def complete(self, request):
        text = request.messages[-1].content
        headers = [(m.start(), int(m.group(1))) for m in re.finditer(r"Candidate (\d+):\n", text)]
        marker = text.index("TARGET")
        chosen = max(number for start, number in headers if start < marker)
        return GenerationResponse(content=str(chosen))


def test_judge_position_neutrality(criterion):
    candidates = [f"reply {i}" for i in range(4)]
    fixed = FixedJudge()
    wins = Counter(
        judge_select(candidates, fixed, random.Random(f"ci:{i}")).chosen_index
        for i in range(1000)
    )
    for index in range(4):
        assert 224 <= wins[index] <= 276, dict(wins)

    keyed = KeyedJudge()
    pair = ["plain result", "result carrying the TARGET marker"]
    orderings_seen = set()
    for i in range(50):
        order = [0, 1]
        random.Random(f"swap:{i}").shuffle(order)
        orderings_seen.add(tuple(order))
        verdict = judge_select(pair, keyed, random.Random(f"swap:{i}"))
        assert verdict.chosen_index == 1
    assert orderings_seen == {(0, 1), (1, 0)}  # the target won under both presentations

    for i in range(200):
        target = i % 4
        swapped = [f"plain result {j}" for j in range(4)]
        swapped[target] = "result carrying the TARGET marker"
        verdict = judge_select(swapped, keyed, random.Random(f"swap4:{i}"))
        assert verdict.chosen_index == target


def _histogram_corpus(strategy: SlotStrategy) -> list[Dialogue]:
    by_name = {t.name: t for t in pf.fixture_pool().tools}
    selection = SampleSelection(
        targets=(by_name["event_create"], by_name["weather_forecast"]), distractors=()
    )
    dialogues = []
    for i in range(200):
        rng = random.Random(f"hist:{strategy.value}:{i}")
        allowed = plan_slots(selection, strategy, rng)
        calls = tuple(
            ToolCall(name=tool.name, arguments=pf.make_call_args(tool, allowed[tool.name]))
            for tool in selection.targets
        )
        dialogues.append(
            Dialogue(
                id=f"h{i:03d}",
                scenario=ScenarioType.SINGLE_MULTI,
                type_label=f"fill study {i}",
                tools=selection,
                turns=[
                    DialogueTurn(role="user", content="please handle both"),
                    DialogueTurn(role="assistant", content="", action=Action(kind="call", calls=calls)),
                ],
            )
        )
    return dialogues


def test_slot_strategy_histograms(criterion):
    minimal = dataset.slot_histogram(_histogram_corpus(SlotStrategy.MIN))
    assert minimal.counts == (400, 0, 0, 0, 0)
    maximal = dataset.slot_histogram(_histogram_corpus(SlotStrategy.MAX))
    assert maximal.counts == (0, 0, 0, 0, 400)
    dynamic = dataset.slot_histogram(_histogram_corpus(SlotStrategy.DYNAMIC))
    assert sum(dynamic.counts) == 400
    assert sum(1 for c in dynamic.counts if c > 0) >= 4


def test_export_fidelity(chain, tmp_path, criterion):
    alpaca_path = chain.base / "out" / "alpaca.json"
    original = alpaca_path.read_bytes()
    records = dataset.read_alpaca(alpaca_path)
    assert records
    rewritten = tmp_path / "alpaca.json"
    dataset.write_alpaca(records, rewritten)
    assert rewritten.read_bytes() == original
    assert json.loads(original) == [r.to_dict() for r in records]

    train_path = chain.base / "out" / "train_config.json"
    parsed = json.loads(train_path.read_text(encoding="utf-8"))
    assert parsed == dataset.TRAIN_CONFIG
    assert list(parsed) == [
        "learning_rate",
        "warmup_ratio",
        "lr_scheduler",
        "batch_size",
        "epochs",
        "lora_rank",
        "lora_alpha",
    ]
    emitted = tmp_path / "train_config.json"
    dataset.emit_train_config(emitted)
    assert emitted.read_bytes() == train_path.read_bytes()


def test_review_service_durability(tmp_path, criterion):
    inproc = tmp_path / "inproc"
    inproc.mkdir()
    with svc.running_service(inproc, svc.golden_state()) as (client, _):
        status, queue_body = client.get("/api/queue")
        assert status == 200
        assert queue_body == json.loads((svc.GOLDEN / "service_queue.json").read_text(encoding="utf-8"))
        status, stats_body = client.get("/api/stats")
        assert status == 200
        assert stats_body == json.loads((svc.GOLDEN / "service_stats.json").read_text(encoding="utf-8"))

        barrier = threading.Barrier(2)
        results: list[int] = []

        def attempt():
            barrier.wait()
            code, _ = client.post(
                "/api/items/clean000/decision",
                {"decision": "approve", "reviewer": "racer"},
                headers={"If-Match": "0"},
            )
            results.append(code)

        threads = [threading.Thread(target=attempt) for _ in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=10)
        assert sorted(results) == [200, 409]

    kill_dir = tmp_path / "kill"
    kill_dir.mkdir()
    svc.exercise_sigkill_recovery(kill_dir)
