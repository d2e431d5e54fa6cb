"""Batch scoring of candidate inputs against benchmark cases."""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .contract import ContractError, PhysicsContract, SchemaError, contract_from_dict
from .hit import ParseError, parse_input
from .ifs import ScoreConfig, evaluate
from .mcs import UNDEFINED, mcs
from .reconstruct import reconstruct_contract
from .registry import MappingRegistry, default_registry
from .stats import Degenerate, bootstrap_ci, wilcoxon_signed_rank

TIERS = ("simple", "medium", "complex")
FAMILIES = (
    "transient_heat",
    "steady_heat",
    "th_porous",
    "linear_elasticity",
    "thm_porous",
    "plasticity",
    "phase_field",
)
HARD_THRESHOLD = 0.7


class CaseFormatError(ValueError):
    pass


class IdMismatch(ValueError):
    pass


@dataclass(frozen=True)
class BenchCase:
    id: str
    prompt: str
    gt_contract: PhysicsContract
    family: str
    tier: str
    acceptable_kernel_variants: dict = field(default_factory=dict)
    reference_input: Path | None = None


@dataclass
class CaseResult:
    id: str
    ifs: float
    mcs: float | str
    parse_failed: bool
    sub_scores: dict
    family: str = ""
    tier: str = ""
    n_violations: int = 0
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def load_cases(path: str | Path) -> list[BenchCase]:
    """Read a JSONL case file; ``reference_input`` resolves relative to it."""
    path = Path(path)
    cases = []
    seen = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            case_id = doc["id"]
            tier = doc.get("tier", "simple")
            if tier not in TIERS:
                raise CaseFormatError(f"tier {tier!r} not in {TIERS}")
            ref = doc.get("reference_input")
            case = BenchCase(
                id=str(case_id),
                prompt=doc.get("prompt", ""),
                gt_contract=contract_from_dict(doc["gt_contract"]),
                family=doc.get("family", ""),
                tier=tier,
                acceptable_kernel_variants=doc.get("acceptable_kernel_variants", {}),
                reference_input=(path.parent / ref) if ref else None,
            )
        except (json.JSONDecodeError, KeyError, SchemaError, ContractError, CaseFormatError) as exc:
            raise CaseFormatError(f"{path}:{lineno}: {exc}") from None
        if case.id in seen:
            raise CaseFormatError(f"{path}:{lineno}: duplicate case id {case.id!r}")
        seen.add(case.id)
        cases.append(case)
    return cases


def golden_cases_path() -> Path:
    return Path(str(resources.files("moose_ifs").joinpath("data/corpus/cases.jsonl")))


def load_golden_cases() -> list[BenchCase]:
    return load_cases(golden_cases_path())


def score_case(
    case: BenchCase,
    candidate_code: str | bytes,
    registry: MappingRegistry | None = None,
    config: ScoreConfig | None = None,
) -> CaseResult:
    """Parse, reconstruct and score one candidate. Never raises on bad input."""
    registry = registry or default_registry()
    cfg = config or ScoreConfig()
    ref = case.gt_contract
    try:
        cand = reconstruct_contract(parse_input(candidate_code), registry)
    except ParseError as exc:
        # unparseable: IFS is 0 by convention; sub-scores are those of an empty candidate
        empty = evaluate(ref, PhysicsContract(), cfg, registry)
        mcs_value = UNDEFINED if not ref.coeff_facts else 0.0
        return CaseResult(case.id, 0.0, mcs_value, True, empty.sub_scores(), case.family, case.tier,
                          len(empty.violations), f"parse error: {exc}")
    report = evaluate(ref, cand, cfg, registry)
    return CaseResult(
        id=case.id,
        ifs=report.score,
        mcs=mcs(ref.coeff_facts, cand.coeff_facts, cfg.delta_coef, cfg.eps0),
        parse_failed=False,
        sub_scores=report.sub_scores(),
        family=case.family,
        tier=case.tier,
        n_violations=len(report.violations),
    )


def _score_file(args) -> CaseResult:
    case, cand_path, registry, config = args
    try:
        data = Path(cand_path).read_bytes()
    except OSError as exc:
        return CaseResult(case.id, 0.0, UNDEFINED, False, {}, case.family, case.tier, error=f"missing candidate: {exc}")
    return score_case(case, data, registry, config)


def run_batch(
    cases: Sequence[BenchCase],
    candidates_dir: str | Path,
    registry: MappingRegistry | None = None,
    config: ScoreConfig | None = None,
    jobs: int = 1,
) -> list[CaseResult]:
    """Score ``<candidates_dir>/<id>.i`` for each case; results sorted by id."""
    registry = registry or default_registry()
    work = [(c, Path(candidates_dir) / f"{c.id}.i", registry, config) for c in cases]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_score_file, work))
    else:
        results = [_score_file(w) for w in work]
    return sorted(results, key=lambda r: r.id)


def _by_id(results: Iterable[CaseResult]) -> dict[str, CaseResult]:
    out = {}
    for r in results:
        if r.id in out:
            raise IdMismatch(f"duplicate id {r.id!r}")
        out[r.id] = r
    return out


def paired_deltas(a: Iterable[CaseResult], b: Iterable[CaseResult]) -> list[float]:
    """b.ifs - a.ifs per id, in sorted id order."""
    ma, mb = _by_id(a), _by_id(b)
    if ma.keys() != mb.keys():
        only_a = sorted(ma.keys() - mb.keys())
        only_b = sorted(mb.keys() - ma.keys())
        raise IdMismatch(f"id sets differ: only in first {only_a}, only in second {only_b}")
    return [mb[k].ifs - ma[k].ifs for k in sorted(ma)]


def paired_delta(a: Iterable[CaseResult], b: Iterable[CaseResult]) -> float:
    deltas = paired_deltas(a, b)
    if not deltas:
        raise IdMismatch("no shared ids")
    return math.fsum(deltas) / len(deltas)


def hard_subset(results: Iterable[CaseResult], theta: float = HARD_THRESHOLD) -> set[str]:
    return {r.id for r in results if r.ifs < theta}


def summarize(results: Sequence[CaseResult], resamples: int = 10_000, seed: int = 0) -> dict:
    """Means, bootstrap interval and per-family/tier/dimension breakdowns."""
    results = sorted(results, key=lambda r: r.id)
    n = len(results)
    summary: dict = {"n": n, "parse_failures": sum(r.parse_failed for r in results)}
    if n == 0:
        return summary
    scores = [r.ifs for r in results]
    summary["mean_ifs"] = math.fsum(scores) / n
    summary["ifs_ci95"] = list(bootstrap_ci(scores, resamples, 0.95, seed))
    defined = [r.mcs for r in results if isinstance(r.mcs, float)]
    summary["mean_mcs"] = math.fsum(defined) / len(defined) if defined else UNDEFINED
    summary["hard_subset"] = sorted(hard_subset(results))

    def group(key: str) -> dict:
        out: dict = {}
        for r in results:
            out.setdefault(getattr(r, key), []).append(r.ifs)
        return {k: {"n": len(v), "mean_ifs": math.fsum(v) / len(v)} for k, v in sorted(out.items())}

    summary["per_family"] = group("family")
    summary["per_tier"] = group("tier")
    dims: dict = {}
    for r in results:
        for d, v in r.sub_scores.items():
            if v is not None:
                dims.setdefault(d, []).append(v)
    summary["sub_scores"] = {d: math.fsum(v) / len(v) for d, v in dims.items()}
    return summary


def compare(a: Sequence[CaseResult], b: Sequence[CaseResult]) -> dict:
    """Paired mean difference (b - a) with its Wilcoxon test, when defined."""
    deltas = paired_deltas(a, b)
    out: dict = {"n": len(deltas), "mean_delta": math.fsum(deltas) / len(deltas) if deltas else 0.0}
    try:
        w = wilcoxon_signed_rank(deltas)
        out["wilcoxon"] = {"W": w.W, "p": w.p, "n_effective": w.n_effective, "method": w.method}
    except Degenerate:
        out["wilcoxon"] = None
    return out


def format_summary_table(summary: dict) -> str:
    lines = [f"cases: {summary['n']}  parse failures: {summary['parse_failures']}"]
    if summary["n"] == 0:
        return lines[0] + "\n"
    lo, hi = summary["ifs_ci95"]
    mean_mcs = summary["mean_mcs"]
    mcs_text = f"{mean_mcs:.3f}" if isinstance(mean_mcs, float) else mean_mcs
    lines.append(f"mean IFS: {summary['mean_ifs']:.3f}  (95% CI {lo:.3f} to {hi:.3f})  mean MCS: {mcs_text}")
    lines.append("")
    lines.append(f"{'family':<20}{'n':>4}{'IFS':>8}")
    for fam, row in summary["per_family"].items():
        lines.append(f"{fam:<20}{row['n']:>4}{row['mean_ifs']:>8.3f}")
    lines.append("")
    lines.append(f"{'tier':<20}{'n':>4}{'IFS':>8}")
    for tier, row in summary["per_tier"].items():
        lines.append(f"{tier:<20}{row['n']:>4}{row['mean_ifs']:>8.3f}")
    if summary["sub_scores"]:
        lines.append("")
        lines.append("  ".join(f"{d} {v:.3f}" for d, v in summary["sub_scores"].items()))
    return "\n".join(lines) + "\n"


def sha256_manifest(paths: Iterable[str | Path]) -> str:
    """One ``<hex>  <path>`` line per file, in the given order."""
    lines = []
    for p in paths:
        digest = hashlib.sha256(Path(p).read_bytes()).hexdigest()
        lines.append(f"{digest}  {p}")
    return "\n".join(lines) + ("\n" if lines else "")
