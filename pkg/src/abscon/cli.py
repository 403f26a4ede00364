"""Command-line orchestration of the pipeline and its stages.

Exit codes: 0 ok, 1 usage or IO error, 2 infeasible model,
3 inconsistent graph / execution error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import clevr as clevr_exec
from .abstraction import PartialModel, abstract
from .concretize import concretize
from .constraints import check
from .domains import DOMAINS, DomainProfile, profile as make_profile
from .errors import AbsconError, InfeasibleModel, IoError
from .evaluation import METHODS, Sample, evaluate_dataset
from .llm import SamplingConfig, build_bundle, load_candidates, sample_candidates
from .notation import EXTENSION_FOR, EXTENSIONS, parse, serialize

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_INCONSISTENT = 3

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors by default; 2 means infeasible here.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(_fail(f"usage: {message}"))


def _fail(message: str, code: int = EXIT_USAGE) -> int:
    print(json.dumps({"error": message}), file=sys.stderr)
    return code


def _load_config(args) -> dict:
    config = {}
    if getattr(args, "config", None):
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    return config


def _profile_from(args, config: dict) -> DomainProfile:
    domain = args.domain or config.get("domain")
    if domain not in DOMAINS:
        raise IoError(f"unknown or missing domain {domain!r}")
    overrides = {}
    for key in (
        "tau",
        "match_timeout",
        "solve_timeout",
        "case_sensitive_labels",
        "taxonomy_require_connected",
        "nonunique_is_error",
        "seed_selection",
    ):
        if key in config:
            overrides[key] = config[key]
    if config.get("embedding_endpoint"):
        from .similarity import CachingProvider, RemoteProvider

        overrides["provider"] = CachingProvider(
            RemoteProvider(config["embedding_endpoint"]),
            fallback_to_builtin=bool(config.get("embedding_fallback", False)),
        )
    if getattr(args, "timeout_match", None) is not None:
        overrides["match_timeout"] = args.timeout_match
    if getattr(args, "timeout_solve", None) is not None:
        overrides["solve_timeout"] = args.timeout_solve
    if getattr(args, "tau", None) is not None:
        overrides["tau"] = args.tau
    return make_profile(domain, **overrides)


def _read_graph(path: Path):
    notation = EXTENSIONS.get(path.suffix)
    if notation is None:
        raise IoError(f"unknown candidate extension {path.suffix!r}")
    return parse(path.read_text(encoding="utf-8"), notation).graph


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Commands


def cmd_pipeline(args) -> int:
    config = _load_config(args)
    profile = _profile_from(args, config)
    out = Path(args.out)

    if args.candidates:
        candidates, greedy_index = load_candidates(args.candidates, profile.notation)
        parsed = [c.graph for c in candidates]
    else:
        endpoint_cfg = _sampling_config(args, config)
        bundle = build_bundle(profile.name, config.get("description", ""), config.get("examples"))
        candidates = sample_candidates(bundle, endpoint_cfg, profile.notation, run_dir=out)
        cand_dir = out / "candidates"
        cand_dir.mkdir(parents=True, exist_ok=True)
        ext = EXTENSION_FOR[profile.notation]
        for i, cand in enumerate(candidates):
            _write(cand_dir / f"sample_{i:02d}{ext}", cand.source_text)
        parsed = [c.graph for c in candidates]

    partial = abstract(parsed, profile)
    _write(out / "partial.json", partial.to_json())

    report = {
        "domain": profile.name,
        "n_candidates": partial.n_candidates,
        "partial_nodes": len(partial.nodes),
        "partial_edges": len(partial.edges),
    }
    try:
        final = concretize(partial, profile)
    except InfeasibleModel as exc:
        report["status"] = "infeasible"
        report["detail"] = str(exc)
        _write(out / "report.json", _dump_json(report))
        return _fail(str(exc), EXIT_INFEASIBLE)

    consistency = check(final, profile)
    report["status"] = "ok"
    report["consistent"] = consistency.consistent
    report["final_nodes"] = len(final.nodes)
    report["final_edges"] = len(final.edges)
    ext = EXTENSION_FOR[profile.notation]
    _write(out / f"final{ext}", serialize(final, profile.notation))
    _write(out / "report.json", _dump_json(report))
    print(f"final model written to {out / ('final' + ext)}")
    return EXIT_OK


def cmd_abstract(args) -> int:
    config = _load_config(args)
    profile = _profile_from(args, config)
    candidates, _ = load_candidates(args.candidates, profile.notation)
    partial = abstract([c.graph for c in candidates], profile)
    _write(Path(args.out) / "partial.json", partial.to_json())
    print(f"partial model with {len(partial.nodes)} nodes / {len(partial.edges)} edges")
    return EXIT_OK


def cmd_concretize(args) -> int:
    config = _load_config(args)
    profile = _profile_from(args, config)
    partial = PartialModel.from_json(Path(args.partial).read_text(encoding="utf-8"))
    out = Path(args.out)
    try:
        final = concretize(partial, profile)
    except InfeasibleModel as exc:
        return _fail(str(exc), EXIT_INFEASIBLE)
    ext = EXTENSION_FOR[profile.notation]
    _write(out / f"final{ext}", serialize(final, profile.notation))
    print(f"final model written to {out / ('final' + ext)}")
    return EXIT_OK


def cmd_check(args) -> int:
    config = _load_config(args)
    profile = _profile_from(args, config)
    graph = _read_graph(Path(args.graph))
    report = check(graph, profile)
    print(report.to_json(), end="")
    return EXIT_OK if report.consistent else EXIT_INCONSISTENT


def cmd_exec(args) -> int:
    program = _read_graph(Path(args.program))
    scene = clevr_exec.Scene.from_json(Path(args.scene).read_text(encoding="utf-8"))
    answer = clevr_exec.execute(program, scene)
    print(_dump_json(clevr_exec.answer_to_json(answer)), end="")
    return EXIT_INCONSISTENT if isinstance(answer, clevr_exec.ExecError) else EXIT_OK


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    manifest_path = Path(args.manifest)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    args.domain = args.domain or manifest.get("domain")
    profile = _profile_from(args, config)
    methods = args.method or manifest.get("methods") or ["abscon"]
    for method in methods:
        if method not in METHODS:
            raise IoError(f"unknown method {method!r}")

    samples = []
    base = manifest_path.parent
    for row in manifest["samples"]:
        candidates, greedy_index = load_candidates(base / row["candidates"], profile.notation)
        sample = Sample(row["id"], [c.graph for c in candidates], greedy_index)
        if "reference" in row:
            sample.reference = _read_graph(base / row["reference"])
        if "scene" in row:
            sample.scene = clevr_exec.Scene.from_json(
                (base / row["scene"]).read_text(encoding="utf-8")
            )
        if "gold_answer" in row:
            sample.gold_answer = clevr_exec.answer_from_json(row["gold_answer"])
        samples.append(sample)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    aggregates = []
    with (out / "per_sample.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample", "method", "status", "consistent", "precision", "recall", "f1",
             "executed", "accurate"]
        )
        for method in methods:
            report = evaluate_dataset(samples, method, profile, workers=args.workers)
            aggregates.append(report.aggregate())
            for row in report.rows:
                writer.writerow(
                    [row.sample_id, method, row.status, int(row.consistent),
                     f"{row.precision:.6f}", f"{row.recall:.6f}", f"{row.f1:.6f}",
                     int(row.executed), int(row.accurate)]
                )
    _write(out / "aggregate.json", _dump_json(aggregates))
    for agg in aggregates:
        print(
            f"{agg['method']:>7}: CR={agg['consistency_ratio']:.3f} "
            f"P={agg['precision']:.3f} R={agg['recall']:.3f} F1={agg['f1']:.3f} "
            f"SR={agg['success_rate']:.3f} Acc={agg['accuracy']:.3f}"
        )
    return EXIT_OK


def cmd_generate(args) -> int:
    config = _load_config(args)
    profile = _profile_from(args, config)
    cfg = _sampling_config(args, config)
    bundle = build_bundle(profile.name, config.get("description", ""), config.get("examples"))
    out = Path(args.out)
    ext = EXTENSION_FOR[profile.notation]
    cand_dir = out / "candidates"
    cand_dir.mkdir(parents=True, exist_ok=True)

    greedy_cfg = SamplingConfig(**{**cfg.__dict__, "n_candidates": 1})
    greedy = sample_candidates(bundle, greedy_cfg, profile.notation, run_dir=out / "greedy_run",
                               temperature=cfg.greedy_temperature)
    _write(cand_dir / f"greedy{ext}", greedy[0].source_text)
    candidates = sample_candidates(bundle, cfg, profile.notation, run_dir=out)
    for i, cand in enumerate(candidates):
        _write(cand_dir / f"sample_{i:02d}{ext}", cand.source_text)
    print(f"wrote {len(candidates) + 1} candidates to {cand_dir}")
    return EXIT_OK


def _sampling_config(args, config: dict) -> SamplingConfig:
    merged = dict(config.get("sampling", {}))
    if getattr(args, "n", None) is not None:
        merged["n_candidates"] = args.n
    if getattr(args, "temperature", None) is not None:
        merged["temperature"] = args.temperature
    if "endpoint" not in merged or "model" not in merged:
        raise IoError("sampling requires 'endpoint' and 'model' in the config file")
    return SamplingConfig(**merged)


# ---------------------------------------------------------------------------
# Argument parsing


def _build_parser() -> _Parser:
    parser = _Parser(prog="abscon", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--domain", choices=DOMAINS)
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--timeout-solve", dest="timeout_solve", type=float)
        p.add_argument("--timeout-match", dest="timeout_match", type=float)
        p.add_argument("--tau", type=float)

    p = sub.add_parser("pipeline", help="candidates -> partial model -> consistent final model")
    common(p)
    p.add_argument("--candidates", help="directory of candidate files (offline mode)")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--temperature", type=float)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("abstract", help="merge candidates into a partial model")
    common(p)
    p.add_argument("--candidates", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_abstract)

    p = sub.add_parser("concretize", help="solve a stored partial model")
    common(p)
    p.add_argument("--partial", required=True, help="partial.json produced by abstract")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_concretize)

    p = sub.add_parser("check", help="check a concrete model against domain constraints")
    common(p)
    p.add_argument("graph")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("exec", help="execute a clevr program on a scene")
    p.add_argument("program")
    p.add_argument("scene")
    p.set_defaults(func=cmd_exec)

    p = sub.add_parser("evaluate", help="compare methods over a dataset manifest")
    common(p)
    p.add_argument("manifest")
    p.add_argument("--method", action="append", choices=METHODS)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("generate", help="sample candidates from the configured endpoint")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--temperature", type=float)
    p.set_defaults(func=cmd_generate)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except InfeasibleModel as exc:
        return _fail(str(exc), EXIT_INFEASIBLE)
    except AbsconError as exc:
        return _fail(str(exc))
    except json.JSONDecodeError as exc:
        return _fail(f"malformed JSON: {exc}")
    except (FileNotFoundError, NotADirectoryError, ValueError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
