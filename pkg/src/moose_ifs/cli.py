"""Command-line entry point: reconstruct, score, batch and refine.

Exit codes: 0 ok, 1 gate failure, 2 parse error, 3 registry error,
4 endpoint error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import CaseFormatError, format_summary_table, load_cases, run_batch, sha256_manifest, summarize
from .contract import ContractError, PhysicsContract, SchemaError, load_contract, save_contract
from .hit import ParseError, parse_input
from .ifs import ScoreConfig, evaluate, render_report
from .mcs import mcs_detail
from .reconstruct import reconstruct_contract
from .refine import PRESETS, EndpointError, HttpEndpoint, PipelineConfig, RecordingEndpoint, ReplayEndpoint, run_pipeline
from .registry import RegistryError, default_registry, load_registry_file

EXIT_OK = 0
EXIT_GATE = 1
EXIT_PARSE = 2
EXIT_REGISTRY = 3
EXIT_ENDPOINT = 4

logger = logging.getLogger("moose_ifs")


def _err(message: str) -> None:
    print(f"moose-ifs: {message}", file=sys.stderr)


def _registry(path: str | None):
    return load_registry_file(path) if path else default_registry()


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _reconstruct_file(path: str, registry) -> PhysicsContract:
    return reconstruct_contract(parse_input(_read(path)), registry)


def _warn_unresolved(contract: PhysicsContract, label: str) -> None:
    for name in contract.unresolved:
        print(f"warning: {label}: unresolved object class {name}", file=sys.stderr)


def cmd_reconstruct(args) -> int:
    registry = _registry(args.registry)
    try:
        contract = _reconstruct_file(args.input, registry)
    except ParseError as exc:
        _err(f"{args.input}: {exc}")
        return EXIT_PARSE
    _warn_unresolved(contract, args.input)
    for d in contract.diagnostics:
        logger.info("%s: %s", args.input, d)
    text = save_contract(contract) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _load_reference(path: str, registry) -> PhysicsContract:
    if path.endswith(".json"):
        return load_contract(_read(path))
    return _reconstruct_file(path, registry)


def cmd_score(args) -> int:
    registry = _registry(args.registry)
    config = ScoreConfig(args.delta_coef, args.epsilon0)
    try:
        ref = _load_reference(args.reference, registry)
    except (ParseError, SchemaError, ContractError) as exc:
        _err(f"reference {args.reference}: {exc}")
        return EXIT_PARSE
    source = None
    try:
        raw = _read(args.candidate)
        source = raw.decode("utf-8", errors="replace")
        cand = reconstruct_contract(parse_input(raw), registry)
        parse_error = None
    except ParseError as exc:
        cand, parse_error = PhysicsContract(), str(exc)
    report = evaluate(ref, cand, config, registry)
    report.mcs = mcs_detail(ref.coeff_facts, cand.coeff_facts, config.delta_coef, config.eps0)
    if parse_error is not None:
        report.score = 0.0
        report.parse_error = parse_error
    else:
        _warn_unresolved(cand, args.candidate)
    print(f"{report.score:.3f}")
    if args.human:
        sys.stdout.write(render_report(report, "human", source if parse_error is None else None))
    if args.report:
        Path(args.report).write_text(render_report(report, "machine") + "\n", encoding="utf-8")
    if parse_error is not None:
        _err(f"{args.candidate}: {parse_error}")
        return EXIT_PARSE
    if args.gate is not None and report.score < args.gate:
        return EXIT_GATE
    return EXIT_OK


def cmd_batch(args) -> int:
    registry = _registry(args.registry)
    config = ScoreConfig(args.delta_coef, args.epsilon0)
    try:
        cases = load_cases(args.cases)
    except CaseFormatError as exc:
        _err(str(exc))
        return EXIT_PARSE
    results = run_batch(cases, args.candidates, registry, config, jobs=args.jobs)
    out = Path(args.out)
    out.write_text("".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in results), encoding="utf-8")
    summary = summarize(results, seed=args.seed)
    summary_path = out.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    table = format_summary_table(summary)
    sys.stdout.write(table)
    written = [out, summary_path]
    if args.summary:
        Path(args.summary).write_text(table, encoding="utf-8")
        written.append(Path(args.summary))
    if args.figures:
        from .plotting import render_batch_figures

        written.extend(render_batch_figures(results, summary, args.figures))
    if args.sha256_manifest:
        inputs = [Path(args.cases)] + [
            p for p in (Path(args.candidates) / f"{c.id}.i" for c in sorted(cases, key=lambda c: c.id)) if p.exists()
        ]
        Path(args.sha256_manifest).write_text(sha256_manifest(inputs + written), encoding="utf-8")
    return EXIT_OK


def _endpoint(args):
    replay = args.replay
    if replay and replay.startswith("play:"):
        return ReplayEndpoint(replay[len("play:"):])
    if not args.endpoint_url or not args.model:
        raise EndpointError("--endpoint-url and --model are required unless replaying")
    endpoint = HttpEndpoint(args.endpoint_url, args.model)
    if replay and replay.startswith("record:"):
        return RecordingEndpoint(endpoint, replay[len("record:"):])
    if replay:
        raise EndpointError("--replay takes record:PATH or play:PATH")
    return endpoint


def cmd_refine(args) -> int:
    registry = _registry(args.registry)
    description = Path(args.prompt).read_text(encoding="utf-8")
    try:
        endpoint = _endpoint(args)
    except EndpointError as exc:
        _err(str(exc))
        return EXIT_ENDPOINT
    config = PipelineConfig(n_max=args.n_max, tau_ifs=args.tau, delta_coef=args.delta_coef,
                            eps0=args.epsilon0, preset=args.preset)
    trace = run_pipeline(description, endpoint, config, registry=registry)
    trace_text = trace.to_json() + "\n"
    if args.trace:
        Path(args.trace).write_text(trace_text, encoding="utf-8")
    if trace.final_code is not None:
        if args.out:
            Path(args.out).write_text(trace.final_code, encoding="utf-8")
        else:
            sys.stdout.write(trace.final_code)
    if trace.final_ifs is not None:
        print(f"internal IFS: {trace.final_ifs:.3f}", file=sys.stderr)
    if trace.error is not None:
        _err(f"{trace.error['kind']} failure: {trace.error['message']}")
        return EXIT_ENDPOINT
    return EXIT_OK


def _tolerance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta-coef", type=float, default=0.1, help="relative coefficient/value tolerance")
    p.add_argument("--epsilon0", type=float, default=1e-12, help="denominator floor for relative tolerance")
    p.add_argument("--registry", help="mapping registry JSON (default: bundled table)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moose-ifs", description="Static physics verification of MOOSE inputs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", help="write the physics contract of an input file")
    p.add_argument("input")
    p.add_argument("-o", "--out", help="output path (default stdout)")
    p.add_argument("--registry", help="mapping registry JSON (default: bundled table)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("score", help="score a candidate input against a reference")
    p.add_argument("reference", help="reference contract (.json) or input file")
    p.add_argument("candidate", help="candidate input file")
    _tolerance_flags(p)
    p.add_argument("--gate", type=float, help="exit 1 when IFS is below this threshold")
    p.add_argument("--report", help="write the machine-readable report here")
    p.add_argument("--human", action="store_true", help="print the human-readable report")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("batch", help="score a directory of candidates against a case file")
    p.add_argument("cases", help="JSONL case file")
    p.add_argument("candidates", help="directory holding <case id>.i files")
    p.add_argument("--out", required=True, help="result JSONL path")
    p.add_argument("--summary", help="also write the summary table here")
    p.add_argument("--figures", help="directory for summary figures")
    p.add_argument("--sha256-manifest", help="write content hashes of inputs and outputs here")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    _tolerance_flags(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("refine", help="run the extract/generate/refine pipeline on a description")
    p.add_argument("prompt", help="file holding the natural-language description")
    p.add_argument("--endpoint-url")
    p.add_argument("--model")
    p.add_argument("--preset", choices=PRESETS, default="pde_refine")
    p.add_argument("--n-max", type=int, default=2)
    p.add_argument("--tau", type=float, default=0.85)
    p.add_argument("--replay", help="record:PATH or play:PATH")
    p.add_argument("-o", "--out", help="final input file (default stdout)")
    p.add_argument("--trace", help="write the pipeline trace JSON here")
    _tolerance_flags(p)
    p.set_defaults(func=cmd_refine)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RegistryError as exc:
        _err(f"registry: {exc}")
        return EXIT_REGISTRY
    except ValueError as exc:
        # invalid tolerances or thresholds
        _err(str(exc))
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
