"""Single entry-point CLI wiring all modules.

Exit codes: 0 success, 1 validation/usage error, 2 runtime error. With
--json-errors, failures are emitted to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .grpo import GrpoConfig, TokenLogProbs, group_advantages, kl_penalty, token_surrogate
from .kb import load_kb
from .metrics import aggregate, em, score_question, write_per_question_csv
from .pipeline import (
    balance_dataset,
    export_sft,
    read_dataset,
    rejection_filter,
    write_sft_examples,
)
from .policy import PolicyConfig, ReplayScript, make_policy
from .protocol import Action, PromptTemplates, read_trajectories, write_trajectories
from .rewards import PenaltyConfig, RewardConfig, RewardPhase, total_reward
from .rollout import EpisodeConfig, build_manifest, dispatch_tool, episode_stats, run_group
from .sparql import EvalLimits
from .tools import execute_sparql

CONFIG_ENV = "KBAGYM_CONFIG"


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def subseed(seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


# -- config loading --------------------------------------------------------------


def load_config_file(path: Optional[str]) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise UsageError("config file must hold a JSON object")
    if "config" in payload and "episodes" in payload:
        # A run manifest doubles as a config file, so a finished run can be
        # replayed byte-for-byte with `--config manifest.json`.
        merged = dict(payload["config"])
        for key in ("kb_path", "dataset_path", "seed"):
            if payload.get(key) is not None:
                merged.setdefault(key, payload[key])
        return merged
    return payload


def pick(flag_value, config_value, default):
    """Precedence: explicit flag > config file > built-in default."""
    if flag_value is not None:
        return flag_value
    if config_value is not None:
        return config_value
    return default


def policy_config(args, cfg: dict) -> PolicyConfig:
    section = cfg.get("policy", {})
    return PolicyConfig(
        kind=pick(getattr(args, "policy", None), section.get("kind"), "replay"),
        endpoint_url=pick(getattr(args, "endpoint_url", None), section.get("endpoint_url"), None),
        model_name=pick(getattr(args, "model_name", None), section.get("model_name"), None),
        temperature=pick(getattr(args, "temperature", None), section.get("temperature"), 1.0),
        max_output_tokens=pick(None, section.get("max_output_tokens"), 2048),
        request_timeout=pick(getattr(args, "request_timeout", None), section.get("request_timeout"), 60.0),
        api_key_env=pick(None, section.get("api_key_env"), "KBAGYM_API_KEY"),
        request_logprobs=pick(None, section.get("request_logprobs"), False),
    )


def episode_config(args, cfg: dict) -> EpisodeConfig:
    section = cfg.get("episode", {})
    limits = eval_limits(args, cfg)
    return EpisodeConfig(
        max_steps=pick(getattr(args, "max_steps", None), section.get("max_steps"), 10),
        eval_limits=limits,
        observation_char_cap=pick(
            getattr(args, "observation_char_cap", None), section.get("observation_char_cap"), 2000
        ),
        group_size=pick(getattr(args, "group_size", None), section.get("group_size"), 8),
        max_response_chars=pick(
            getattr(args, "max_response_chars", None), section.get("max_response_chars"), None
        ),
    )


def eval_limits(args, cfg: dict) -> EvalLimits:
    section = cfg.get("episode", {})
    return EvalLimits(
        timeout=pick(getattr(args, "timeout", None), section.get("timeout"), 300.0),
        max_rows=pick(getattr(args, "max_rows", None), section.get("max_rows"), 1000),
        max_intermediate_bindings=pick(None, section.get("max_intermediate_bindings"), 100_000),
    )


def reward_config(args, cfg: dict) -> RewardConfig:
    section = cfg.get("reward", {})
    phases = None
    if section.get("phases"):
        phases = tuple(
            RewardPhase(p["name"], p["beta"], p["start"], p.get("end")) for p in section["phases"]
        )
    penalties = None
    if getattr(args, "penalties", False) or section.get("penalties"):
        psec = section.get("penalties") or {}
        psec = psec if isinstance(psec, dict) else {}
        penalties = PenaltyConfig(
            per_event=psec.get("per_event", -0.2),
            floor=psec.get("floor", -0.5),
            hallucination_enabled=psec.get("hallucination_enabled", True),
            timeout_enabled=psec.get("timeout_enabled", True),
            seed_history_with_prompt=psec.get("seed_history_with_prompt", True),
        )
    kwargs = {
        "format_reward_value": pick(None, section.get("format_reward_value"), 0.1),
        "cap": pick(None, section.get("cap"), 1.0),
        "penalties": penalties,
        "answer_mode": pick(getattr(args, "answer_mode", None), section.get("answer_mode"), "f_beta"),
    }
    if phases is not None:
        kwargs["phases"] = phases
    return RewardConfig(**kwargs)


def grpo_config(args, cfg: dict) -> GrpoConfig:
    section = cfg.get("grpo", {})
    return GrpoConfig(
        clip_eps=pick(getattr(args, "clip_eps", None), section.get("clip_eps"), 0.2),
        kl_coeff=pick(getattr(args, "kl_coeff", None), section.get("kl_coeff"), 0.001),
        on_policy=bool(getattr(args, "on_policy", False) or section.get("on_policy", False)),
        std_eps=pick(None, section.get("std_eps"), 1e-6),
        std_mode=pick(getattr(args, "std_mode", None), section.get("std_mode"), "population"),
        kl_estimator=pick(getattr(args, "kl_estimator", None), section.get("kl_estimator"), "k3"),
    )


def load_templates(args) -> Optional[PromptTemplates]:
    path = getattr(args, "templates", None)
    return PromptTemplates.from_file(path) if path else None


def open_kb(args, cfg: dict):
    kb_path = pick(getattr(args, "kb", None), cfg.get("kb_path"), None)
    if not kb_path:
        raise UsageError("a knowledge base path is required (--kb or config kb_path)")
    kb_format = pick(getattr(args, "kb_format", None), cfg.get("kb_format"), "tsv")
    label_predicate = pick(getattr(args, "label_predicate", None), cfg.get("label_predicate"), "type.object.name")
    if not Path(kb_path).exists():
        raise UsageError(f"KB file not found: {kb_path}")
    return kb_path, load_kb(kb_path, kb_format, label_predicate)


def dataset_path_of(args, cfg: dict) -> str:
    path = pick(getattr(args, "dataset", None), cfg.get("dataset_path"), None)
    if not path:
        raise UsageError("a dataset path is required (--dataset or config dataset_path)")
    if not Path(path).exists():
        raise UsageError(f"dataset file not found: {path}")
    return path


# -- subcommands -------------------------------------------------------------------


def cmd_kb_validate(args, cfg) -> int:
    kb_path, kb = open_kb(args, cfg)
    sizes = kb.index_sizes()
    print(
        json.dumps(
            {
                "kb": str(kb_path),
                "triples": len(kb),
                "labels": len(kb.labels),
                "terms": kb.term_count(),
                "indexes_consistent": sizes[0] == sizes[1] == sizes[2] == len(kb),
            }
        )
    )
    return 0


def cmd_query(args, cfg) -> int:
    _, kb = open_kb(args, cfg)
    observation = execute_sparql(kb, args.sparql, eval_limits(args, cfg))
    print(observation)
    return 0


def cmd_tools(args, cfg) -> int:
    _, kb = open_kb(args, cfg)
    try:
        arguments = json.loads(args.args)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--args must be a JSON object: {exc}") from exc
    if not isinstance(arguments, dict):
        raise UsageError("--args must be a JSON object")
    action = Action(args.tool, {k: str(v) for k, v in arguments.items()})
    print(dispatch_tool(action, kb, eval_limits(args, cfg)))
    return 0


def cmd_rollout(args, cfg) -> int:
    kb_path, kb = open_kb(args, cfg)
    data_path = dataset_path_of(args, cfg)
    records = read_dataset(data_path)
    out_dir = Path(pick(args.out_dir, cfg.get("output_dir"), None) or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    pconfig = policy_config(args, cfg)
    econfig = episode_config(args, cfg)
    rconfig = reward_config(args, cfg)
    templates = load_templates(args)
    seed = pick(args.seed, cfg.get("seed"), 0)
    script = ReplayScript.from_file(args.script) if getattr(args, "script", None) else None
    policy = make_policy(pconfig, script)
    parallelism = pick(args.parallelism, cfg.get("parallelism"), os.cpu_count() or 1)

    trajectories = []
    episodes = []
    for step, record in enumerate(records):
        group = run_group(
            record.question,
            record.topic_entities,
            policy,
            kb,
            econfig,
            templates=templates,
            question_id=record.id,
            parallelism=parallelism,
        )
        for index, trajectory in enumerate(group):
            stats = episode_stats(trajectory)
            breakdown = total_reward(trajectory, record.golden_answers, rconfig, global_step=step, templates=templates)
            episodes.append(
                {
                    "step": step,
                    "question_id": record.id,
                    "group_index": index,
                    "reward": breakdown.total,
                    "reward_breakdown": breakdown.to_dict(),
                    **stats,
                }
            )
        trajectories.extend(group)

    write_trajectories(trajectories, out_dir / "trajectories.jsonl")
    config_snapshot = {
        "policy": dict(pconfig.__dict__),
        "episode": {
            "max_steps": econfig.max_steps,
            "observation_char_cap": econfig.observation_char_cap,
            "group_size": econfig.group_size,
            "max_response_chars": econfig.max_response_chars,
            "timeout": econfig.eval_limits.timeout,
            "max_rows": econfig.eval_limits.max_rows,
            "max_intermediate_bindings": econfig.eval_limits.max_intermediate_bindings,
        },
        "reward": {
            "format_reward_value": rconfig.format_reward_value,
            "cap": rconfig.cap,
            "answer_mode": rconfig.answer_mode,
            "phases": [
                {"name": p.name, "beta": p.beta, "start": p.start, "end": p.end} for p in rconfig.phases
            ],
        },
        "grpo": dict(grpo_config(args, cfg).__dict__),
        "parallelism": parallelism,
    }
    manifest = build_manifest(config_snapshot, kb_path, data_path, episodes, seed=seed)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(json.dumps({"trajectories": len(trajectories), "out_dir": str(out_dir)}))
    return 0


def _trajectory_ids(trajectories) -> list[str]:
    counters: dict[str, int] = {}
    ids = []
    for t in trajectories:
        n = counters.get(t.key, 0)
        counters[t.key] = n + 1
        ids.append(f"{t.key}#{n}")
    return ids


def _gold_index(records):
    by_id = {r.id: r for r in records}
    by_question = {r.question: r for r in records}
    return by_id, by_question


def _record_for(trajectory, by_id, by_question):
    record = None
    if trajectory.question_id is not None:
        record = by_id.get(trajectory.question_id)
    if record is None:
        record = by_question.get(trajectory.question)
    return record


def cmd_score(args, cfg) -> int:
    records = read_dataset(dataset_path_of(args, cfg))
    trajectories = read_trajectories(args.trajectories)
    rconfig = reward_config(args, cfg)
    templates = load_templates(args)
    by_id, by_question = _gold_index(records)
    rows = []
    for tid, trajectory in zip(_trajectory_ids(trajectories), trajectories):
        record = _record_for(trajectory, by_id, by_question)
        if record is None:
            raise UsageError(f"no dataset record for trajectory {tid!r}")
        breakdown = total_reward(trajectory, record.golden_answers, rconfig, global_step=args.step, templates=templates)
        rows.append({"id": tid, "question_id": record.id, **breakdown.to_dict()})
    with open(args.out, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    print(json.dumps({"scored": len(rows), "out": args.out}))
    return 0


def cmd_filter(args, cfg) -> int:
    records = read_dataset(dataset_path_of(args, cfg))
    candidates = read_trajectories(args.candidates)
    seed = pick(args.seed, cfg.get("seed"), 0)
    by_id, by_question = _gold_index(records)
    grouped: dict[str, list] = {}
    for trajectory in candidates:
        record = _record_for(trajectory, by_id, by_question)
        if record is None:
            raise UsageError(f"no dataset record for candidate question {trajectory.key!r}")
        grouped.setdefault(record.id, []).append(trajectory)

    kept: dict[str, list] = {}
    for record in records:
        candidates_for_q = grouped.get(record.id, [])
        selected = rejection_filter(candidates_for_q, record)
        if selected:
            kept[record.id] = selected

    report: dict = {
        "questions_with_kept": len(kept),
        "kept_total": sum(len(v) for v in kept.values()),
    }
    if args.balance_targets:
        targets = json.loads(Path(args.balance_targets).read_text(encoding="utf-8"))
        categories = {r.id: r.category for r in records if r.category is not None}
        result = balance_dataset(kept, categories, targets, subseed(seed, "balance"))
        ordered = [t for _, t in result.items]
        report["realized_counts"] = result.realized
    else:
        ordered = [t for record in records for t in kept.get(record.id, [])]
    write_trajectories(ordered, args.out)
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(json.dumps({"kept": len(ordered), "out": args.out}))
    return 0


def cmd_sft_export(args, cfg) -> int:
    trajectories = read_trajectories(args.trajectories)
    examples = export_sft(trajectories, load_templates(args))
    write_sft_examples(examples, args.out)
    print(json.dumps({"examples": len(examples), "out": args.out}))
    return 0


def cmd_grpo_advantage(args, cfg) -> int:
    config = grpo_config(args, cfg)
    rows_out = []
    with open(args.input, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            payload = json.loads(line)
            try:
                rewards = [float(r) for r in payload["rewards"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise UsageError(f"{args.input}:{line_no}: bad rewards: {exc}") from exc
            out = {"question_id": payload.get("question_id"), "advantages": group_advantages(rewards, config)}
            if "logp_new" in payload:
                logp = TokenLogProbs.from_lists(
                    payload["logp_new"], payload.get("logp_old"), payload.get("logp_ref")
                )
                per_trajectory, batch = token_surrogate(logp, out["advantages"], config)
                out["surrogate_per_trajectory"] = per_trajectory
                out["surrogate"] = batch
                out["kl"] = kl_penalty(logp, config)
                out["objective"] = batch - config.kl_coeff * out["kl"]
            rows_out.append(out)
    with open(args.out, "w", encoding="utf-8") as fh:
        for row in rows_out:
            fh.write(json.dumps(row) + "\n")
    print(json.dumps({"groups": len(rows_out), "out": args.out}))
    return 0


def cmd_eval(args, cfg) -> int:
    records = read_dataset(dataset_path_of(args, cfg))
    predictions: dict[str, list[str]] = {}
    with open(args.predictions, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            payload = json.loads(line)
            try:
                predictions[str(payload["id"])] = [str(a) for a in payload["answers"]]
            except (KeyError, TypeError) as exc:
                raise UsageError(f"{args.predictions}:{line_no}: bad prediction row: {exc}") from exc
    unknown = set(predictions) - {r.id for r in records}
    if unknown:
        raise UsageError(f"predictions reference unknown question ids: {sorted(unknown)[:5]}")

    seed = pick(args.seed, cfg.get("seed"), 0)
    results = []
    for r in records:
        predicted = predictions.get(r.id, [])
        results.append(
            score_question(
                r.id,
                predicted,
                r.golden_answers,
                r.category,
                rhits_mode=args.rhits_mode,
                seed=subseed(seed, f"rhits1:{r.id}"),
            )
        )
    report = aggregate(results)
    payload = report.to_dict()

    def strict_mean(group):
        return sum(em(r.predicted, r.gold, strict=True) for r in group) / len(group) if group else 0.0

    payload["overall"]["em_strict"] = strict_mean(results)
    for category in payload["per_category"]:
        payload["per_category"][category]["em_strict"] = strict_mean(
            [r for r in results if r.category == category]
        )

    out_dir = Path(pick(args.out_dir, cfg.get("output_dir"), None) or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_per_question_csv(results, out_dir / "per_question.csv")
    if not args.no_figures:
        from .figures import save_metrics_figure

        save_metrics_figure(report, out_dir / "metrics.png")
    print(json.dumps({"questions": len(results), "out_dir": str(out_dir)}))
    return 0


def cmd_curves(args, cfg) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    episodes = manifest.get("episodes", [])
    if not episodes:
        raise UsageError("manifest contains no episodes")
    steps = sorted({e["step"] for e in episodes})
    rows = []
    for step in steps:
        group = [e for e in episodes if e["step"] == step]
        n = len(group)
        rows.append(
            {
                "step": step,
                "reward": sum(e.get("reward", 0.0) for e in group) / n,
                "response_chars": sum(e["response_chars"] for e in group) / n,
                "turns": sum(e["turns"] for e in group) / n,
                "invalid_calls": sum(e["invalid_calls"] for e in group) / n,
            }
        )
    out_dir = Path(pick(args.out_dir, cfg.get("output_dir"), None) or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "curves.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["step", "reward", "response_chars", "turns", "invalid_calls"])
        writer.writeheader()
        writer.writerows(rows)
    if not args.no_figures:
        from .figures import save_curves_figure

        save_curves_figure(rows, out_dir / "curves.png")
    print(json.dumps({"steps": len(rows), "out_dir": str(out_dir)}))
    return 0


# -- argument wiring -------------------------------------------------------------------


def _add_kb_args(parser):
    parser.add_argument("--kb", help="KB file path")
    parser.add_argument("--kb-format", dest="kb_format", choices=["tsv", "ntriples"])
    parser.add_argument("--label-predicate", dest="label_predicate")


def _add_limit_args(parser):
    parser.add_argument("--timeout", type=float, help="query timeout in seconds")
    parser.add_argument("--max-rows", dest="max_rows", type=int)


def build_parser() -> _Parser:
    parser = _Parser(prog="kbagym", description=__doc__)
    parser.add_argument("--config", help="JSON config file (or set KBAGYM_CONFIG)")
    parser.add_argument("--json-errors", action="store_true", help="emit errors as JSON on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    kb = sub.add_parser("kb", help="knowledge base operations")
    kb_sub = kb.add_subparsers(dest="kb_command", required=True)
    validate = kb_sub.add_parser("validate", help="load a KB file and report stats")
    _add_kb_args(validate)
    validate.set_defaults(handler=cmd_kb_validate)

    query = sub.add_parser("query", help="one-shot SPARQL query with rendered observation")
    _add_kb_args(query)
    _add_limit_args(query)
    query.add_argument("--sparql", required=True)
    query.set_defaults(handler=cmd_query)

    tools = sub.add_parser("tools", help="invoke one KB tool ad hoc")
    _add_kb_args(tools)
    _add_limit_args(tools)
    tools.add_argument("--tool", required=True, choices=["SearchTypes", "SearchGraphPatterns", "ExecuteSPARQL"])
    tools.add_argument("--args", required=True, help="tool arguments as a JSON object")
    tools.set_defaults(handler=cmd_tools)

    rollout = sub.add_parser("rollout", help="run rollout groups over a dataset")
    _add_kb_args(rollout)
    _add_limit_args(rollout)
    rollout.add_argument("--dataset")
    rollout.add_argument("--out-dir", dest="out_dir")
    rollout.add_argument("--policy", choices=["replay", "remote"])
    rollout.add_argument("--script", help="replay script JSON file")
    rollout.add_argument("--endpoint-url", dest="endpoint_url")
    rollout.add_argument("--model-name", dest="model_name")
    rollout.add_argument("--temperature", type=float)
    rollout.add_argument("--request-timeout", dest="request_timeout", type=float)
    rollout.add_argument("--max-steps", dest="max_steps", type=int)
    rollout.add_argument("--group-size", dest="group_size", type=int)
    rollout.add_argument("--observation-char-cap", dest="observation_char_cap", type=int)
    rollout.add_argument("--max-response-chars", dest="max_response_chars", type=int)
    rollout.add_argument("--parallelism", type=int, default=None, help="worker pool size (default: CPU count)")
    rollout.add_argument("--seed", type=int)
    rollout.add_argument("--templates", help="prompt templates JSON file")
    rollout.set_defaults(handler=cmd_rollout)

    score = sub.add_parser("score", help="score trajectories against gold answers")
    score.add_argument("--trajectories", required=True)
    score.add_argument("--dataset")
    score.add_argument("--out", required=True)
    score.add_argument("--step", type=int, default=0, help="global step for phase resolution")
    score.add_argument("--penalties", action="store_true", help="enable process penalties")
    score.add_argument("--answer-mode", dest="answer_mode", choices=["f_beta", "em"])
    score.add_argument("--templates")
    score.set_defaults(handler=cmd_score)

    filt = sub.add_parser("filter", help="rejection-filter candidate trajectories")
    filt.add_argument("--candidates", required=True)
    filt.add_argument("--dataset")
    filt.add_argument("--out", required=True)
    filt.add_argument("--balance-targets", dest="balance_targets", help="JSON file of category -> count")
    filt.add_argument("--report", help="write realized-count report JSON here")
    filt.add_argument("--seed", type=int)
    filt.set_defaults(handler=cmd_filter)

    sft = sub.add_parser("sft-export", help="export masked SFT segments")
    sft.add_argument("--trajectories", required=True)
    sft.add_argument("--out", required=True)
    sft.add_argument("--templates")
    sft.set_defaults(handler=cmd_sft_export)

    grpo = sub.add_parser("grpo-advantage", help="group advantages (and surrogate/KL when log-probs given)")
    grpo.add_argument("--input", required=True, help="JSONL of {question_id, rewards[, logp_*]}")
    grpo.add_argument("--out", required=True)
    grpo.add_argument("--std-mode", dest="std_mode", choices=["population", "sample"])
    grpo.add_argument("--on-policy", dest="on_policy", action="store_true")
    grpo.add_argument("--clip-eps", dest="clip_eps", type=float)
    grpo.add_argument("--kl-coeff", dest="kl_coeff", type=float)
    grpo.add_argument("--kl-estimator", dest="kl_estimator", choices=["direct", "k3"])
    grpo.set_defaults(handler=cmd_grpo_advantage)

    ev = sub.add_parser("eval", help="evaluate predictions against a dataset")
    ev.add_argument("--predictions", required=True, help="JSONL of {id, answers[]}")
    ev.add_argument("--dataset")
    ev.add_argument("--out-dir", dest="out_dir")
    ev.add_argument("--rhits-mode", dest="rhits_mode", choices=["expectation", "sampled"], default="expectation")
    ev.add_argument("--seed", type=int)
    ev.add_argument("--no-figures", dest="no_figures", action="store_true")
    ev.set_defaults(handler=cmd_eval)

    curves = sub.add_parser("curves", help="per-step training-dynamics CSV and figure from a manifest")
    curves.add_argument("--manifest", required=True)
    curves.add_argument("--out-dir", dest="out_dir")
    curves.add_argument("--no-figures", dest="no_figures", action="store_true")
    curves.set_defaults(handler=cmd_curves)

    return parser


def _emit_error(exc: Exception, json_errors: bool) -> None:
    if json_errors:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    else:
        print(f"kbagym: error: {exc}", file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    json_errors = "--json-errors" in (argv if argv is not None else sys.argv[1:])
    try:
        args = parser.parse_args(argv)
        cfg = load_config_file(args.config)
        return args.handler(args, cfg)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        _emit_error(exc, json_errors)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        _emit_error(exc, json_errors)
        return 2


if __name__ == "__main__":
    sys.exit(main())
