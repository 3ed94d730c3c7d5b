"""Command-line entry point wiring the pipeline end to end.

Commands: validate, stats, respond, evaluate, analyze (pairs | truncation |
correlation), mitigate. Exit codes: 0 success, 2 input/config error,
3 provider budget exhausted with partial results saved.

Everything a command writes is deterministic given a warm cache and a fixed
config: JSON is serialized with sorted keys and reductions run in sorted-id
order, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import prompts
from .analysis import (
    HumanScoreSet,
    krippendorff_alpha,
    pair_frequency,
    pearson,
    top_fraction_relation_rate,
    truncate_response,
)
from .core import KnowledgeGraph, SynonymTable, Triplet
from .dataset import (
    Benchmark,
    compute_statistics,
    load_benchmark,
    validate_relation_richness,
)
from .errors import (
    AuthError,
    KGHaluError,
    MetricsUndefined,
    ProviderError,
    SchemaError,
)
from .extraction import ExtractionConfig
from .judge import LlmJudge, NliJudge, NliJudgeConfig, RuleJudge
from .metrics import EmptyResponsePolicy, KindFilter
from .mitigation import MitigationMode
from .pipeline import (
    EvaluationRun,
    evaluate_mitigation,
    evaluate_responses,
    knowledge_graph_rows,
    load_verdict_rows,
    verdict_rows,
)
from .providers import (
    CachingChatProvider,
    CachingEmbeddingProvider,
    CachingEntailmentProvider,
    ChatMessage,
    ChatRequest,
    ConcurrencyLimitedChatProvider,
    DEFAULT_EXTRACTOR_MODEL,
    DEFAULT_JUDGE_MODEL,
    ImagePart,
    OpenAICompatChatProvider,
    OpenAICompatEmbeddingProvider,
    ResponseCache,
    ScriptedChatProvider,
    ScriptedEmbeddingProvider,
    ScriptedEntailmentProvider,
    SidecarEmbeddingProvider,
    SidecarEntailmentProvider,
    TextPart,
    Transcript,
)
from .tables import render_table, render_two_level_table

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_PROVIDER_BUDGET = 3


@dataclass
class RunConfig:
    benchmark: Path
    output_dir: Path
    cache_dir: Path | None = None
    judge: str = "rule"
    policy: str = EmptyResponsePolicy.EXCLUDE.value
    concurrency: int = 4
    seed: int = 0
    synonyms: Path | None = None
    similarity_threshold: float = 0.5
    fallback_top_k: int = 3
    entailment_threshold: float = 0.6
    extractor_model: str = DEFAULT_EXTRACTOR_MODEL
    judge_model: str = DEFAULT_JUDGE_MODEL
    responder_model: str = "scripted-lvlm"
    providers: dict[str, Any] = field(default_factory=dict)
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, args: argparse.Namespace) -> "RunConfig":
        raw: dict[str, Any] = {}
        base_dir = Path(".")
        if getattr(args, "config", None):
            config_path = Path(args.config)
            if not config_path.exists():
                raise SchemaError(f"config file not found: {config_path}")
            raw = json.loads(config_path.read_text(encoding="utf-8"))
            # paths inside the config file resolve relative to the file itself;
            # command-line paths stay relative to the working directory
            base_dir = config_path.parent

        def from_config(key: str) -> Path | None:
            return base_dir / raw[key] if raw.get(key) else None

        cli_benchmark = getattr(args, "benchmark", None)
        benchmark = Path(cli_benchmark) if cli_benchmark else from_config("benchmark")
        if benchmark is None:
            raise SchemaError("a benchmark path is required (--benchmark or config)")
        cli_out = getattr(args, "out", None)
        output_dir = Path(cli_out) if cli_out else (from_config("outputDir") or Path("out"))
        config = cls(
            benchmark=benchmark,
            output_dir=output_dir,
            cache_dir=from_config("cacheDir"),
            judge=getattr(args, "judge", None) or raw.get("judge", "rule"),
            policy=raw.get("emptyResponsePolicy", EmptyResponsePolicy.EXCLUDE.value),
            concurrency=int(raw.get("concurrency", 4)),
            seed=getattr(args, "seed", None) if getattr(args, "seed", None) is not None else int(raw.get("seed", 0)),
            synonyms=from_config("synonyms"),
            similarity_threshold=float(raw.get("similarityThreshold", 0.5)),
            fallback_top_k=int(raw.get("fallbackTopK", 3)),
            entailment_threshold=float(raw.get("entailmentThreshold", 0.6)),
            extractor_model=raw.get("extractorModel", DEFAULT_EXTRACTOR_MODEL),
            judge_model=raw.get("judgeModel", DEFAULT_JUDGE_MODEL),
            responder_model=raw.get("responderModel", "scripted-lvlm"),
            providers=raw.get("providers", {}),
            base_dir=base_dir,
        )
        config.validate()
        return config

    def validate(self) -> None:
        if not self.benchmark.exists():
            raise SchemaError(f"benchmark file not found: {self.benchmark}")
        if self.synonyms is not None and not self.synonyms.exists():
            raise SchemaError(f"synonym table not found: {self.synonyms}")
        if self.judge not in ("rule", "nli", "llm"):
            raise SchemaError(f"unknown judge {self.judge!r}; pick rule, nli, or llm")
        EmptyResponsePolicy(self.policy)
        NliJudgeConfig(self.similarity_threshold, self.fallback_top_k, self.entailment_threshold)
        if self.concurrency < 1:
            raise SchemaError("concurrency must be >= 1")

    def synonym_table(self) -> SynonymTable:
        if self.synonyms is not None:
            mapping = json.loads(self.synonyms.read_text(encoding="utf-8"))
        else:
            mapping = json.loads(prompts.asset_text(prompts.SYNONYMS_ASSET))
        return SynonymTable(mapping)

    def nli_config(self) -> NliJudgeConfig:
        return NliJudgeConfig(
            self.similarity_threshold, self.fallback_top_k, self.entailment_threshold
        )


def _cache(config: RunConfig) -> ResponseCache | None:
    import os

    cache_dir = config.cache_dir or os.environ.get("KGHALU_CACHE_DIR") or None
    return ResponseCache(cache_dir) if cache_dir else None


def _transcript(config: RunConfig) -> Transcript:
    return Transcript(config.output_dir / "transcript.jsonl")


def _build_chat_provider(config: RunConfig, section_name: str, default_model: str):
    section = dict(config.providers.get(section_name, {}))
    kind = section.get("kind", "scripted")
    if kind == "scripted":
        playbook = section.get("playbook", {})
        if isinstance(playbook, str):
            playbook = json.loads((config.base_dir / playbook).read_text(encoding="utf-8"))
        provider = ScriptedChatProvider.from_playbook(playbook)
    elif kind == "openai":
        provider = OpenAICompatChatProvider(
            base_url=section.get("baseUrl", "https://api.openai.com/v1"),
            api_key_env=section.get("apiKeyEnv", "KGHALU_CHAT_API_KEY"),
        )
    else:
        raise SchemaError(f"unknown chat provider kind {kind!r} for {section_name}")
    cache = _cache(config)
    if cache is not None:
        provider = CachingChatProvider(provider, cache, _transcript(config))
    return ConcurrencyLimitedChatProvider(provider, config.concurrency)


def _build_embedding_provider(config: RunConfig):
    section = dict(config.providers.get("embedding", {}))
    kind = section.get("kind", "scripted")
    if kind == "scripted":
        playbook = section.get("playbook", {})
        if isinstance(playbook, str):
            playbook = json.loads((config.base_dir / playbook).read_text(encoding="utf-8"))
        provider = ScriptedEmbeddingProvider.from_playbook(playbook)
    elif kind == "sidecar":
        provider = SidecarEmbeddingProvider(
            base_url=section.get("baseUrl", "http://127.0.0.1:8600"),
            model_id=section.get("modelId", "all-mpnet-base-v2"),
        )
    elif kind == "openai":
        provider = OpenAICompatEmbeddingProvider(
            base_url=section.get("baseUrl", "https://api.openai.com/v1"),
            model_id=section.get("modelId", "text-embedding-3-small"),
            api_key_env=section.get("apiKeyEnv", "KGHALU_EMBED_API_KEY"),
        )
    else:
        raise SchemaError(f"unknown embedding provider kind {kind!r}")
    cache = _cache(config)
    if cache is not None:
        provider = CachingEmbeddingProvider(provider, cache, transcript=_transcript(config))
    return provider


def _build_entailment_provider(config: RunConfig):
    section = dict(config.providers.get("entailment", {}))
    kind = section.get("kind", "scripted")
    if kind == "scripted":
        playbook = section.get("playbook", {})
        if isinstance(playbook, str):
            playbook = json.loads((config.base_dir / playbook).read_text(encoding="utf-8"))
        provider = ScriptedEntailmentProvider.from_playbook(playbook)
    elif kind == "sidecar":
        provider = SidecarEntailmentProvider(
            base_url=section.get("baseUrl", "http://127.0.0.1:8600"),
            model_id=section.get("modelId", "cross-encoder/nli-deberta-v3-base"),
        )
    else:
        raise SchemaError(f"unknown entailment provider kind {kind!r}")
    cache = _cache(config)
    if cache is not None:
        provider = CachingEntailmentProvider(provider, cache, transcript=_transcript(config))
    return provider


def _build_judge(config: RunConfig):
    if config.judge == "rule":
        return RuleJudge(config.synonym_table())
    if config.judge == "nli":
        return NliJudge(
            _build_embedding_provider(config),
            _build_entailment_provider(config),
            config.nli_config(),
        )
    return LlmJudge(_build_chat_provider(config, "judge_chat", config.judge_model), config.judge_model)


def _write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def _write_jsonl(path: Path, rows: Sequence[Mapping]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _load_responses(path: Path) -> dict[str, str]:
    if not path.exists():
        raise SchemaError(f"responses file not found: {path}")
    responses: dict[str, str] = {}
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{line_no}: not valid JSON: {exc}") from exc
        if "questionId" not in row or "response" not in row:
            raise SchemaError(f"{path}:{line_no}: rows need questionId and response")
        if row["questionId"] in responses:
            raise SchemaError(f"{path}:{line_no}: duplicate questionId {row['questionId']!r}")
        responses[row["questionId"]] = row["response"]
    return responses


def _subset_benchmark(benchmark: Benchmark, subset: int | None, seed: int) -> tuple[Benchmark, list[str]]:
    if subset is None or subset >= len(benchmark.items):
        return benchmark, [item.image_id for item in benchmark.items]
    ids = sorted(item.image_id for item in benchmark.items)
    sampled = sorted(random.Random(seed).sample(ids, subset))
    chosen = frozenset(sampled)
    items = tuple(item for item in benchmark.items if item.image_id in chosen)
    return Benchmark(benchmark.name, benchmark.version, items), sampled


def _run_meta(config: RunConfig, extra: Mapping[str, Any] | None = None) -> dict:
    meta = {
        "benchmark": str(config.benchmark),
        "judge": config.judge,
        "policy": config.policy,
        "concurrency": config.concurrency,
        "seed": config.seed,
        "thresholds": {
            "similarity": config.similarity_threshold,
            "fallbackTopK": config.fallback_top_k,
            "entailment": config.entailment_threshold,
        },
        "models": {
            "extractor": config.extractor_model,
            "judge": config.judge_model,
            "responder": config.responder_model,
        },
        "promptDigests": dict(sorted(prompts.PINNED_DIGESTS.items())),
    }
    if extra:
        meta.update(extra)
    return meta


def _emit_evaluation(config: RunConfig, run: EvaluationRun, out_dir: Path, label: str) -> None:
    _write_json(out_dir / "report.json", run.report.to_json_dict())
    _write_text(out_dir / "report.txt", run.report.to_text_table(label))
    _write_jsonl(out_dir / "verdicts.jsonl", verdict_rows(run.question_results))
    _write_jsonl(out_dir / "extracted_kgs.jsonl", knowledge_graph_rows(run.knowledge_graphs))
    if run.failures:
        _write_jsonl(
            out_dir / "errors.jsonl",
            [
                {"questionId": qid, "error": kind, "message": message}
                for qid, kind, message in run.failures
            ],
        )


def cmd_validate(args: argparse.Namespace) -> int:
    config = RunConfig.load(args)
    benchmark = load_benchmark(config.benchmark, config.synonym_table())
    report = validate_relation_richness(benchmark, args.min_relations)
    _write_json(config.output_dir / "validation.json", report.to_json_dict())
    failures = report.failures
    print(f"validated {len(benchmark.items)} images; {len(failures)} below the relation floor")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    config = RunConfig.load(args)
    benchmark = load_benchmark(config.benchmark, config.synonym_table())
    statistics = compute_statistics(benchmark)
    _write_json(config.output_dir / "stats.json", statistics.to_json_dict())
    _write_text(config.output_dir / "stats.txt", statistics.to_text_table())
    print(statistics.to_text_table(), end="")
    return EXIT_OK


def cmd_respond(args: argparse.Namespace) -> int:
    config = RunConfig.load(args)
    benchmark = load_benchmark(config.benchmark, config.synonym_table())
    benchmark, sampled = _subset_benchmark(benchmark, args.subset, config.seed)
    mode = MitigationMode(args.mode)
    provider = _build_chat_provider(config, "responder", config.responder_model)

    rows = []
    trace_rows = []
    failures = []
    for item in benchmark.items:
        for qa in item.questions:
            try:
                if mode is MitigationMode.NONE:
                    request = ChatRequest(
                        model_id=config.responder_model,
                        messages=(
                            ChatMessage(
                                "user", (TextPart(qa.question), ImagePart(item.image_path))
                            ),
                        ),
                    )
                    answer = provider.complete(request)
                    rows.append(
                        {"questionId": qa.question_id, "imageId": item.image_id, "response": answer}
                    )
                else:
                    from .mitigation import mitigate

                    trace = mitigate(
                        qa.question, item.image_path, provider, mode, config.responder_model
                    )
                    rows.append(
                        {
                            "questionId": qa.question_id,
                            "imageId": item.image_id,
                            "response": trace.final_answer,
                        }
                    )
                    trace_rows.append(
                        {"questionId": qa.question_id, **trace.to_json_dict()}
                    )
            except AuthError:
                raise
            except (ProviderError, KGHaluError) as exc:
                failures.append(
                    {"questionId": qa.question_id, "error": type(exc).__name__, "message": str(exc)}
                )
    _write_jsonl(config.output_dir / "responses.jsonl", rows)
    if trace_rows:
        _write_jsonl(config.output_dir / "traces.jsonl", trace_rows)
    if failures:
        _write_jsonl(config.output_dir / "errors.jsonl", failures)
    _write_json(
        config.output_dir / "run_meta.json",
        _run_meta(config, {"sampledImageIds": sampled, "mode": mode.value}),
    )
    print(f"collected {len(rows)} responses ({len(failures)} failures)")
    return EXIT_PROVIDER_BUDGET if failures else EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = RunConfig.load(args)
    benchmark = load_benchmark(config.benchmark, config.synonym_table())
    responses = _load_responses(Path(args.responses))
    extractor = _build_chat_provider(config, "extractor", config.extractor_model)
    judge = _build_judge(config)
    run = evaluate_responses(
        benchmark,
        responses,
        extractor,
        judge,
        extraction_config=ExtractionConfig(model_id=config.extractor_model),
        policy=EmptyResponsePolicy(config.policy),
        workers=config.concurrency,
    )
    _emit_evaluation(config, run, config.output_dir, label=config.judge)
    _write_json(
        config.output_dir / "run_meta.json",
        _run_meta(config, {"responses": str(args.responses)}),
    )
    print(
        f"evaluated {run.report.question_count} questions: "
        f"Hallu_Q {float(run.report.hallu_q):.2f}, Hallu_I {float(run.report.hallu_i):.2f}"
    )
    if run.failures:
        print(f"{len(run.failures)} questions failed on provider errors; partial results saved")
        return EXIT_PROVIDER_BUDGET
    return EXIT_OK


def _load_evaluation_dir(path: Path) -> tuple[list[dict], list[dict]]:
    verdicts_path = path / "verdicts.jsonl"
    kgs_path = path / "extracted_kgs.jsonl"
    if not verdicts_path.exists() or not kgs_path.exists():
        raise SchemaError(f"evaluation outputs not found under {path}")
    verdicts = [json.loads(line) for line in verdicts_path.read_text(encoding="utf-8").splitlines() if line.strip()]
    kgs = [json.loads(line) for line in kgs_path.read_text(encoding="utf-8").splitlines() if line.strip()]
    return verdicts, kgs


def cmd_analyze_pairs(args: argparse.Namespace) -> int:
    config = RunConfig.load(args)
    rows, kg_rows = _load_evaluation_dir(Path(args.evaluation_dir))
    synonyms = config.synonym_table()
    kgs = [
        KnowledgeGraph.from_triplets(
            (Triplet(*t) for t in row["triplets"]), source_response_id=row["questionId"]
        )
        for row in kg_rows
        if row["triplets"]
    ]
    table = pair_frequency(kgs, synonyms, ordered=not args.unordered)
    results = load_verdict_rows(rows)
    restricted_i, restricted_q = top_fraction_relation_rate(
        results, table, args.fraction, synonyms
    )
    from .metrics import hallu_i as hallu_i_fn, hallu_q as hallu_q_fn

    overall_i = hallu_i_fn(results, KindFilter.RELATION)
    overall_q = hallu_q_fn(results, KindFilter.RELATION)
    payload = {
        "fraction": args.fraction,
        "pairTable": table.to_json_dict(),
        "relationRates": {
            "original": {"halluI": float(overall_i), "halluQ": float(overall_q)},
            "topFraction": {"halluI": float(restricted_i), "halluQ": float(restricted_q)},
        },
    }
    _write_json(config.output_dir / "pairs.json", payload)
    pct = int(round(args.fraction * 100))
    text = render_two_level_table(
        [("Relation", ("Hallu_I", "Hallu_Q"))],
        [
            ("Original", (f"{float(overall_i):.2f}", f"{float(overall_q):.2f}")),
            (f"First {pct}%", (f"{float(restricted_i):.2f}", f"{float(restricted_q):.2f}")),
        ],
        label_header="Rows",
    )
    _write_text(config.output_dir / "pairs.txt", text)
    print(text, end="")
    return EXIT_OK


def cmd_analyze_truncation(args: argparse.Namespace) -> int:
    config = RunConfig.load(args)
    benchmark = load_benchmark(config.benchmark, config.synonym_table())
    responses = _load_responses(Path(args.responses))
    extractor = _build_chat_provider(config, "extractor", config.extractor_model)
    judge = _build_judge(config)
    ks = []
    for token in str(args.k).split(","):
        token = token.strip()
        ks.append(None if token == "all" else int(token))
    summary = []
    for k in ks:
        label = "all" if k is None else str(k)
        truncated = (
            responses
            if k is None
            else {qid: truncate_response(text, k) for qid, text in responses.items()}
        )
        try:
            run = evaluate_responses(
                benchmark,
                truncated,
                extractor,
                judge,
                extraction_config=ExtractionConfig(model_id=config.extractor_model),
                policy=EmptyResponsePolicy(config.policy),
                workers=config.concurrency,
            )
        except MetricsUndefined:
            # too few tokens for any triplet to survive extraction at this k
            summary.append({"k": label, "halluI": None, "halluQ": None,
                            "excluded": None, "undefined": True})
            continue
        _emit_evaluation(config, run, config.output_dir / f"k_{label}", label=f"k={label}")
        summary.append(
            {
                "k": label,
                "halluI": float(run.report.hallu_i),
                "halluQ": float(run.report.hallu_q),
                "excluded": run.report.excluded_question_count,
                "undefined": False,
            }
        )
    _write_json(config.output_dir / "truncation_summary.json", {"sweep": summary})

    def cell(value):
        return "-" if value is None else f"{value:.2f}"

    text = render_table(
        ["k", "Hallu_I", "Hallu_Q", "Excluded"],
        [
            [row["k"], cell(row["halluI"]), cell(row["halluQ"]),
             "-" if row["excluded"] is None else str(row["excluded"])]
            for row in summary
        ],
    )
    _write_text(config.output_dir / "truncation_summary.txt", text)
    print(text, end="")
    return EXIT_OK


def cmd_analyze_correlation(args: argparse.Namespace) -> int:
    config = RunConfig.load(args)
    scores_path = Path(args.human_scores)
    if not scores_path.exists():
        raise SchemaError(f"human-scores file not found: {scores_path}")
    raw = json.loads(scores_path.read_text(encoding="utf-8"))
    rows = raw["scores"] if isinstance(raw, dict) else raw
    score_set = HumanScoreSet.from_rows(
        (r["annotatorId"], r["responseId"], int(r["score"])) for r in rows
    )
    report_path = Path(args.evaluation_dir) / "report.json"
    if not report_path.exists():
        raise SchemaError(f"evaluation report not found: {report_path}")
    report = json.loads(report_path.read_text(encoding="utf-8"))
    per_question: dict[str, float] = report["perQuestion"]

    means = score_set.mean_by_item()
    shared = sorted(set(per_question) & set(means))
    if len(shared) < 2:
        raise SchemaError("need at least two responses with both auto and human scores")
    auto = [per_question[qid] for qid in shared]
    # Human scale: 5 = no hallucination. Invert so both series point the same
    # way and an aligned judge yields a positive coefficient.
    human = [6.0 - float(means[qid]) for qid in shared]
    coefficient = pearson(auto, human)
    alpha = krippendorff_alpha(score_set, level=args.alpha_level)
    payload = {
        "judge": report["judge"],
        "granularity": "triplet",
        "pearson": coefficient,
        "itemCount": len(shared),
        "krippendorffAlpha": alpha,
        "alphaLevel": args.alpha_level,
        "humanScoresInverted": True,
    }
    _write_json(config.output_dir / "correlation.json", payload)
    text = render_table(
        ["Method", "Pearson"],
        [[f"{report['judge']} judge (triplet)", f"{coefficient:.4f}"]],
    )
    _write_text(config.output_dir / "correlation.txt", text)
    print(text, end="")
    print(f"Krippendorff alpha ({args.alpha_level}): {alpha:.4f}")
    return EXIT_OK


def cmd_mitigate(args: argparse.Namespace) -> int:
    config = RunConfig.load(args)
    benchmark = load_benchmark(config.benchmark, config.synonym_table())
    benchmark, sampled = _subset_benchmark(benchmark, args.subset, config.seed)
    modes = [MitigationMode(m.strip()) for m in args.modes.split(",")]
    responder = _build_chat_provider(config, "responder", config.responder_model)
    extractor = _build_chat_provider(config, "extractor", config.extractor_model)
    judge = _build_judge(config)
    comparison = evaluate_mitigation(
        benchmark,
        responder,
        modes,
        config.responder_model,
        extractor,
        judge,
        extraction_config=ExtractionConfig(model_id=config.extractor_model),
        policy=EmptyResponsePolicy(config.policy),
        workers=config.concurrency,
    )
    summary_rows = []
    for mode in modes:
        report = comparison.reports[mode.value]
        mode_dir = config.output_dir / mode.value
        _emit_evaluation(config, comparison.runs[mode.value], mode_dir, label=mode.value)
        _write_jsonl(
            mode_dir / "traces.jsonl",
            [trace.to_json_dict() for trace in comparison.traces[mode.value]],
        )
        summary_rows.append(
            (mode.value, (f"{float(report.hallu_i):.2f}", f"{float(report.hallu_q):.2f}"))
        )
    text = render_two_level_table(
        [(f"{config.judge} judge", ("Hallu_I", "Hallu_Q"))],
        summary_rows,
        label_header="Mitigation",
    )
    _write_text(config.output_dir / "mitigation_summary.txt", text)
    _write_json(
        config.output_dir / "mitigation_summary.json",
        {
            "judge": config.judge,
            "sampledImageIds": sampled,
            "modes": {
                mode.value: comparison.reports[mode.value].to_json_dict() for mode in modes
            },
        },
    )
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kghalu",
        description="Triplet-level hallucination evaluation for vision-language model responses",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON run config")
        p.add_argument("--benchmark", help="benchmark JSON path")
        p.add_argument("--judge", choices=("rule", "nli", "llm"))
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("validate", help="validate a benchmark file")
    common(p)
    p.add_argument("--min-relations", type=int, default=5)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="corpus statistics table")
    common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("respond", help="collect model responses per question")
    common(p)
    p.add_argument("--mode", default=MitigationMode.NONE.value,
                   choices=[m.value for m in MitigationMode])
    p.add_argument("--subset", type=int, default=None, help="sample N images")
    p.set_defaults(func=cmd_respond)

    p = sub.add_parser("evaluate", help="extract, judge, and report")
    common(p)
    p.add_argument("--responses", required=True, help="responses JSONL path")
    p.set_defaults(func=cmd_evaluate)

    analyze = sub.add_parser("analyze", help="secondary analyses")
    analyze_sub = analyze.add_subparsers(dest="analysis", required=True)

    p = analyze_sub.add_parser("pairs", help="object-pair frequency analysis")
    common(p)
    p.add_argument("--evaluation-dir", required=True)
    p.add_argument("--fraction", type=float, default=0.20)
    p.add_argument("--unordered", action="store_true")
    p.set_defaults(func=cmd_analyze_pairs)

    p = analyze_sub.add_parser("truncation", help="response-truncation sweep")
    common(p)
    p.add_argument("--responses", required=True)
    p.add_argument("--k", default="10,20,40,80,160,all")
    p.set_defaults(func=cmd_analyze_truncation)

    p = analyze_sub.add_parser("correlation", help="correlation with human scores")
    common(p)
    p.add_argument("--human-scores", required=True)
    p.add_argument("--evaluation-dir", required=True)
    p.add_argument("--alpha-level", default="ordinal", choices=("ordinal", "interval"))
    p.set_defaults(func=cmd_analyze_correlation)

    p = sub.add_parser("mitigate", help="compare mitigation modes")
    common(p)
    p.add_argument("--modes", default="none,general-description,triplet-description")
    p.add_argument("--subset", type=int, default=None)
    p.set_defaults(func=cmd_mitigate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AuthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except ProviderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER_BUDGET
    except (SchemaError, MetricsUndefined, KGHaluError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
