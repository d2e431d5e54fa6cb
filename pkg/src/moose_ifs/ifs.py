"""Intent Fidelity Score: variable alignment, checkpoints, scoring, reports.

Checkpoints are induced by the reference contract. Candidate terms with no
reference counterpart add ``term_extra`` checkpoints (failed by definition)
to both sides of the ratio, so extra kernels keep IFS below 1 while the
score stays in [0, 1].

Attribute checkpoints (``coefficient``, ``bc_type``, ``bc_value``,
``ic_value``) are judged against the located candidate item. When that item
is absent, its presence checkpoint (``term_missing``, ``bc_boundary``,
``ic_type``) already fails; the attribute checkpoint is then recorded as not
applicable and scored as passing, so one absence is reported once. A
reference variable with no candidate partner fails all of its checkpoints.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .contract import BoundaryCondition, PhysicsContract, normalize_text, term_signature
from .registry import MappingRegistry, default_registry, severity_for

FIX_CLASSES = {
    "term_missing": "add_kernel",
    "term_extra": "remove_kernel",
    "coefficient": "set_value",
    "bc_type": "change_bc_type",
    "bc_boundary": "change_bc_type",
    "bc_value": "set_value",
    "ic_type": "set_value",
    "ic_value": "set_value",
    "time_scheme": "change_time_scheme",
}

DIMENSIONS = {
    "term_missing": "term",
    "term_extra": "term",
    "coefficient": "coeff",
    "bc_type": "bc",
    "bc_boundary": "bc",
    "bc_value": "bc",
    "ic_type": "ic",
    "ic_value": "ic",
    "time_scheme": "time",
}

# exact lexicographic search over candidate subsets up to this size
_EXACT_ALIGNMENT_LIMIT = 14


@dataclass(frozen=True)
class ScoreConfig:
    delta_coef: float = 0.1
    eps0: float = 1e-12

    def __post_init__(self) -> None:
        if self.delta_coef < 0:
            raise ValueError("delta_coef must be >= 0")
        if self.eps0 <= 0:
            raise ValueError("eps0 must be > 0")


@dataclass(frozen=True)
class Checkpoint:
    kind: str
    subject: dict
    weight: float
    description: str = ""


@dataclass
class CheckpointResult:
    checkpoint: Checkpoint
    passed: bool
    applicable: bool = True
    expected: Any = None
    found: Any = None
    cand_variable: str | None = None
    lines: tuple | None = None
    # what a fixer needs to recreate an absent item
    hint: dict | None = None


@dataclass(frozen=True)
class VariableAlignment:
    pairs: dict
    unmatched_ref: tuple = ()
    unmatched_cand: tuple = ()


@dataclass
class ViolationReport:
    score: float
    results: list
    violations: list
    alignment: VariableAlignment
    unresolved: dict = field(default_factory=lambda: {"ref": [], "cand": []})
    mcs: Any = None
    parse_error: str | None = None

    @property
    def total_weight(self) -> float:
        return sum(r.checkpoint.weight for r in self.results)

    @property
    def failed_weight(self) -> float:
        return sum(r.checkpoint.weight for r in self.results if not r.passed)

    def sub_scores(self) -> dict:
        """Per-dimension pass fractions over checkpoint counts (None when empty)."""
        counts: dict[str, list] = {d: [0, 0] for d in ("term", "coeff", "bc", "ic", "time")}
        for r in self.results:
            c = counts[DIMENSIONS[r.checkpoint.kind]]
            c[0] += r.passed
            c[1] += 1
        return {d: (p / n if n else None) for d, (p, n) in counts.items()}

    def to_dict(self) -> dict:
        doc = {
            "score": self.score,
            "checkpoints": [
                {
                    "kind": r.checkpoint.kind,
                    "subject": r.checkpoint.subject,
                    "weight": r.checkpoint.weight,
                    "passed": r.passed,
                    "applicable": r.applicable,
                }
                for r in self.results
            ],
            "violations": self.violations,
            "alignment": {
                "pairs": self.alignment.pairs,
                "unmatched_ref": list(self.alignment.unmatched_ref),
                "unmatched_cand": list(self.alignment.unmatched_cand),
            },
            "unresolved": self.unresolved,
        }
        if self.mcs is not None:
            doc["mcs"] = self.mcs.to_dict()
        if self.parse_error is not None:
            doc["parse_error"] = self.parse_error
        return doc


def coefficient_match(ref_coeff: float | None, cand_coeff: float | None, delta_coef: float = 0.1, eps0: float = 1e-12) -> bool:
    """Reference-relative tolerance test. A unit reference matches anything;
    a unit candidate counts as 1.0."""
    if ref_coeff is None:
        return True
    cand = 1.0 if cand_coeff is None else cand_coeff
    rel = abs(ref_coeff - cand) / max(abs(ref_coeff), eps0)
    # the bound is inclusive; absorb binary rounding of decimal inputs like 1.1
    return rel <= delta_coef or math.isclose(rel, delta_coef, rel_tol=1e-9)


def value_match(ref, cand, delta_coef: float, eps0: float) -> bool:
    """BC/IC value predicate: numeric tolerance, else normalized string equality."""
    if ref is None:
        return True
    if cand is None:
        return False
    if isinstance(ref, float) and isinstance(cand, float):
        return coefficient_match(ref, cand, delta_coef, eps0)
    try:
        r, c = float(ref), float(cand)
    except (TypeError, ValueError):
        return normalize_text(str(ref)) == normalize_text(str(cand))
    return coefficient_match(r, c, delta_coef, eps0)


# --- alignment --------------------------------------------------------------


def _signatures(contract: PhysicsContract) -> dict[str, list]:
    return {v: term_signature(contract, v) for v in contract.variables}


def _pair_score(ref, cand, v, w, sig_r, sig_c, cfg: ScoreConfig) -> tuple | None:
    exact = int(sig_r[v] == sig_c[w])
    overlap = len(set(sig_r[v]) & set(sig_c[w]))
    cand_bcs = [b for b in cand.bcs if b.variable == w]
    bc = sum(
        1
        for b in ref.bcs
        if b.variable == v
        and any(c.boundary_key() == b.boundary_key() and value_match(b.value, c.value, cfg.delta_coef, cfg.eps0) for c in cand_bcs)
    )
    coef = 0
    for t in ref.terms:
        if t.variable == v and t.coefficient is not None:
            ct = cand.term(w, t.operator)
            if ct is not None and coefficient_match(t.coefficient, ct.coefficient, cfg.delta_coef, cfg.eps0):
                coef += 1
    cand_ics = [i for i in cand.ics if i.variable == w]
    ic = sum(
        1
        for i in ref.ics
        if i.variable == v
        and any(c.ic_type == i.ic_type and value_match(i.value, c.value, cfg.delta_coef, cfg.eps0) for c in cand_ics)
    )
    if not (exact or bc or ic or overlap):
        return None
    return (exact, bc, coef, ic, overlap, int(v == w))


def _add(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def align_variables(ref: PhysicsContract, cand: PhysicsContract, config: ScoreConfig | None = None) -> VariableAlignment:
    """Injective ref->cand variable pairing.

    Pairings are ranked lexicographically by summed (exact signature matches,
    BC alignments, coefficient matches, IC matches, shared operators, equal
    names); among equal totals the first pairing in sorted-name order wins.
    Variables with nothing in common are left unmatched.
    """
    cfg = config or ScoreConfig()
    R = sorted(ref.variables)
    C = sorted(cand.variables)
    sig_r, sig_c = _signatures(ref), _signatures(cand)
    scores = [[_pair_score(ref, cand, v, w, sig_r, sig_c, cfg) for w in C] for v in R]
    zero = (0,) * 6

    if len(C) <= _EXACT_ALIGNMENT_LIMIT:
        memo: dict = {}

        def best(i: int, used: int) -> tuple:
            if i == len(R):
                return zero, ()
            key = (i, used)
            if key in memo:
                return memo[key]
            result = None
            for j in range(len(C)):
                s = scores[i][j]
                if s is None or used >> j & 1:
                    continue
                sub, picks = best(i + 1, used | 1 << j)
                total = _add(s, sub)
                if result is None or total > result[0]:
                    result = (total, ((i, j),) + picks)
            sub, picks = best(i + 1, used)
            if result is None or sub > result[0]:
                result = (sub, picks)
            memo[key] = result
            return result

        picks = best(0, 0)[1]
    else:
        # large inputs: greedy on the same ordering
        options = sorted(
            ((scores[i][j], -i, -j) for i in range(len(R)) for j in range(len(C)) if scores[i][j] is not None),
            reverse=True,
        )
        used_r, used_c, chosen = set(), set(), []
        for _, ni, nj in options:
            if -ni not in used_r and -nj not in used_c:
                used_r.add(-ni)
                used_c.add(-nj)
                chosen.append((-ni, -nj))
        picks = tuple(sorted(chosen))

    pairs = {R[i]: C[j] for i, j in picks}
    matched_c = set(pairs.values())
    return VariableAlignment(
        pairs=dict(sorted(pairs.items())),
        unmatched_ref=tuple(v for v in ref.variables if v not in pairs),
        unmatched_cand=tuple(w for w in cand.variables if w not in matched_c),
    )


# --- checkpoints ------------------------------------------------------------


def _boundary_text(bc: BoundaryCondition) -> str:
    return " ".join(bc.boundary)


def generate_checkpoints(ref: PhysicsContract, registry: MappingRegistry | None = None) -> list[Checkpoint]:
    """The reference-induced checkpoint set, weights from the registry."""
    registry = registry or default_registry()
    out: list[Checkpoint] = []
    for t in ref.terms:
        subject = {"variable": t.variable, "operator": t.operator.value}
        out.append(
            Checkpoint("term_missing", subject, severity_for(registry, "term_missing", t.operator),
                       f"{t.operator.value} term on {t.variable}")
        )
        if t.coefficient is not None:
            out.append(
                Checkpoint("coefficient", subject, severity_for(registry, "coefficient"),
                           f"coefficient {t.coefficient:g} of {t.operator.value} on {t.variable}")
            )
    for k, b in enumerate(ref.bcs):
        subject = {"variable": b.variable, "boundary": _boundary_text(b), "index": k}
        out.append(Checkpoint("bc_type", subject, severity_for(registry, "bc_type"), f"{b.bc_type.value} BC type"))
        out.append(Checkpoint("bc_boundary", subject, severity_for(registry, "bc_boundary"), "BC boundary set"))
        if b.value is not None:
            out.append(Checkpoint("bc_value", subject, severity_for(registry, "bc_value"), f"BC value {b.value}"))
    for k, ic in enumerate(ref.ics):
        subject = {"variable": ic.variable, "index": k}
        out.append(Checkpoint("ic_type", subject, severity_for(registry, "ic_type"), f"{ic.ic_type} IC"))
        out.append(Checkpoint("ic_value", subject, severity_for(registry, "ic_value"), f"IC value {ic.value}"))
    out.append(Checkpoint("time_scheme", {}, severity_for(registry, "time_scheme"), f"{ref.time_scheme} time scheme"))
    return out


def ifs_from_results(results: list[CheckpointResult]) -> float:
    """1 - (failed weight / total weight), clamped to [0, 1]."""
    total = sum(r.checkpoint.weight for r in results)
    if total <= 0:
        return 1.0
    failed = sum(r.checkpoint.weight for r in results if not r.passed)
    delta = failed / total
    assert -1e-12 <= delta <= 1 + 1e-12, delta
    return min(1.0, max(0.0, 1.0 - delta))


def _lines(origin) -> tuple | None:
    if origin and len(origin) == 3 and origin[1]:
        return (origin[1], origin[2])
    return None


def evaluate(
    ref: PhysicsContract,
    cand: PhysicsContract,
    config: ScoreConfig | None = None,
    registry: MappingRegistry | None = None,
) -> ViolationReport:
    """Score ``cand`` against ``ref`` and build the violation report."""
    cfg = config or ScoreConfig()
    registry = registry or default_registry()
    alignment = align_variables(ref, cand, cfg)
    pairs = alignment.pairs
    inverse = {w: v for v, w in pairs.items()}
    checkpoints = generate_checkpoints(ref, registry)
    results: list[CheckpointResult] = []

    term_cps = {(c.kind, c.subject.get("variable"), c.subject.get("operator")): c for c in checkpoints
                if c.kind in ("term_missing", "coefficient")}
    for t in ref.terms:
        w = pairs.get(t.variable)
        ct = cand.term(w, t.operator) if w is not None else None
        found_sig = [o.value for o in term_signature(cand, w)] if w is not None else None
        results.append(
            CheckpointResult(term_cps[("term_missing", t.variable, t.operator.value)], ct is not None,
                             expected=t.operator.value, found=found_sig, cand_variable=w,
                             lines=_lines(ct.origin) if ct else None)
        )
        if t.coefficient is not None:
            cp = term_cps[("coefficient", t.variable, t.operator.value)]
            if ct is None:
                results.append(_absent(cp, w, t.coefficient))
            else:
                ok = coefficient_match(t.coefficient, ct.coefficient, cfg.delta_coef, cfg.eps0)
                results.append(CheckpointResult(cp, ok, expected=t.coefficient, found=ct.coefficient,
                                                cand_variable=w, lines=_lines(ct.origin)))

    bc_cps: dict[int, dict[str, Checkpoint]] = {}
    for c in checkpoints:
        if c.kind.startswith("bc_"):
            bc_cps.setdefault(c.subject["index"], {})[c.kind] = c
    used: set[int] = set()
    for k, b in enumerate(ref.bcs):
        w = pairs.get(b.variable)
        pool = [(i, cb) for i, cb in enumerate(cand.bcs) if cb.variable == w and i not in used] if w else []
        same = [(i, cb) for i, cb in pool if cb.boundary_key() == b.boundary_key()]
        if not same and b.bc_type.value != "Periodic":
            # a periodic candidate on the same names still locates the BC
            same = [(i, cb) for i, cb in pool if tuple(sorted(set(cb.boundary))) == b.boundary_key()]
        same.sort(key=lambda p: (p[1].bc_type != b.bc_type, p[0]))
        cps = bc_cps[k]
        if same:
            i, cb = same[0]
            used.add(i)
            lines = _lines(cb.origin)
            results.append(CheckpointResult(cps["bc_type"], cb.bc_type == b.bc_type, expected=b.bc_type.value,
                                            found=cb.bc_type.value, cand_variable=w, lines=lines))
            results.append(CheckpointResult(cps["bc_boundary"], True, expected=_boundary_text(b),
                                            found=_boundary_text(cb), cand_variable=w, lines=lines))
            if "bc_value" in cps:
                ok = value_match(b.value, cb.value, cfg.delta_coef, cfg.eps0)
                results.append(CheckpointResult(cps["bc_value"], ok, expected=b.value, found=cb.value,
                                                cand_variable=w, lines=lines))
        else:
            elsewhere = [_boundary_text(cb) for _, cb in pool] or None
            results.append(_absent(cps["bc_type"], w, b.bc_type.value))
            results.append(CheckpointResult(cps["bc_boundary"], False, expected=_boundary_text(b), found=elsewhere,
                                            cand_variable=w, hint={"bc_type": b.bc_type.value, "value": b.value}))
            if "bc_value" in cps:
                results.append(_absent(cps["bc_value"], w, b.value))

    ic_cps: dict[int, dict[str, Checkpoint]] = {}
    for c in checkpoints:
        if c.kind.startswith("ic_"):
            ic_cps.setdefault(c.subject["index"], {})[c.kind] = c
    used_ic: set[int] = set()
    for k, ic in enumerate(ref.ics):
        w = pairs.get(ic.variable)
        pool = [(i, ci) for i, ci in enumerate(cand.ics) if ci.variable == w and i not in used_ic] if w else []
        pool.sort(key=lambda p: (p[1].ic_type != ic.ic_type, p[0]))
        cps = ic_cps[k]
        if pool:
            i, ci = pool[0]
            used_ic.add(i)
            lines = _lines(ci.origin)
            results.append(CheckpointResult(cps["ic_type"], ci.ic_type == ic.ic_type, expected=ic.ic_type,
                                            found=ci.ic_type, cand_variable=w, lines=lines))
            results.append(CheckpointResult(cps["ic_value"], value_match(ic.value, ci.value, cfg.delta_coef, cfg.eps0),
                                            expected=ic.value, found=ci.value, cand_variable=w, lines=lines))
        else:
            results.append(CheckpointResult(cps["ic_type"], False, expected=ic.ic_type, found=None, cand_variable=w,
                                            hint={"value": ic.value}))
            results.append(_absent(cps["ic_value"], w, ic.value))

    time_cp = checkpoints[-1]
    results.append(CheckpointResult(time_cp, ref.time_scheme == cand.time_scheme, expected=ref.time_scheme,
                                    found=cand.time_scheme))

    for ct in cand.terms:
        v = inverse.get(ct.variable)
        if v is not None and ref.term(v, ct.operator) is not None:
            continue
        cp = Checkpoint("term_extra", {"variable": v or ct.variable, "operator": ct.operator.value},
                        severity_for(registry, "term_extra", ct.operator), f"extra {ct.operator.value} on {ct.variable}")
        results.append(CheckpointResult(cp, False, expected=None, found=ct.operator.value, cand_variable=ct.variable,
                                        lines=_lines(ct.origin)))

    violations = [_violation(r) for r in results if not r.passed]
    return ViolationReport(
        score=ifs_from_results(results),
        results=results,
        violations=violations,
        alignment=alignment,
        unresolved={"ref": list(ref.unresolved), "cand": list(cand.unresolved)},
    )


def _absent(cp: Checkpoint, cand_variable: str | None, expected) -> CheckpointResult:
    # attribute of an item the candidate lacks: not applicable on an aligned
    # variable, failed outright when the reference variable has no partner
    if cand_variable is None:
        return CheckpointResult(cp, False, expected=expected)
    return CheckpointResult(cp, True, applicable=False, expected=expected, cand_variable=cand_variable)


def _violation(r: CheckpointResult) -> dict:
    cp = r.checkpoint
    subject = cp.subject
    variable = r.cand_variable or subject.get("variable")
    record: dict[str, Any] = {"kind": cp.kind, "variable": variable}
    if "operator" in subject:
        record["operator"] = subject["operator"]
    if "boundary" in subject:
        record["boundary"] = subject["boundary"]
    record.update(expected=r.expected, found=r.found, weight=cp.weight, fix_class=FIX_CLASSES[cp.kind])
    if r.hint:
        record["hint"] = r.hint
    if r.lines:
        record["lines"] = list(r.lines)
    record["message"] = _message(cp.kind, record, r)
    return record


def _message(kind: str, rec: dict, r: CheckpointResult) -> str:
    var = rec["variable"]
    if r.cand_variable is None and kind not in ("term_extra", "time_scheme"):
        return f"{kind}: reference variable {var} has no counterpart in the candidate"
    if kind == "term_missing":
        return f"missing {rec['operator']} term on variable {var}"
    if kind == "term_extra":
        return f"extra {rec['operator']} term on variable {var}"
    if kind == "coefficient":
        return f"coefficient of {rec['operator']} on {var}: expected {r.expected:g}, found {_fmt(r.found)}"
    if kind == "bc_type":
        return f"wrong BC type on {var}/{rec['boundary']}: expected {r.expected}, found {r.found}"
    if kind == "bc_boundary":
        where = f"; {var} has BCs on {', '.join(r.found)}" if r.found else ""
        return f"no BC on {var}/{rec['boundary']}{where}"
    if kind == "bc_value":
        return f"BC value on {var}/{rec['boundary']}: expected {_fmt(r.expected)}, found {_fmt(r.found)}"
    if kind == "ic_type":
        if r.found is None:
            return f"missing initial condition on {var}"
        return f"initial condition type on {var}: expected {r.expected}, found {r.found}"
    if kind == "ic_value":
        return f"initial condition value on {var}: expected {_fmt(r.expected)}, found {_fmt(r.found)}"
    return f"time scheme: expected {r.expected}, found {r.found}"


def _fmt(v) -> str:
    if v is None:
        return "none (unit)"
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


def render_report(report: ViolationReport, fmt: str = "machine", source: str | None = None) -> str:
    """Render a report as stable JSON (``machine``) or line-oriented text (``human``).

    With ``source`` (the candidate input text), human output quotes the
    offending lines.
    """
    if fmt == "machine":
        return json.dumps(report.to_dict(), indent=2, default=str)
    if fmt != "human":
        raise ValueError(f"unknown report format {fmt!r}")
    src_lines = source.splitlines() if source is not None else None
    out = [f"IFS = {report.score:.3f}  (failed weight {report.failed_weight:g} of {report.total_weight:g})"]
    if report.parse_error:
        out.append(f"parse error: {report.parse_error}")
    pairs = report.alignment.pairs
    if pairs or report.alignment.unmatched_ref or report.alignment.unmatched_cand:
        out.append("variable alignment (reference -> candidate):")
        for v, w in pairs.items():
            out.append(f"  {v} -> {w}")
        for v in report.alignment.unmatched_ref:
            out.append(f"  {v} -> (unmatched)")
        for w in report.alignment.unmatched_cand:
            out.append(f"  (unmatched) <- {w}")
    if not report.violations:
        out.append("no violations")
    else:
        out.append(f"violations ({len(report.violations)}):")
        for v in report.violations:
            loc = f" [lines {v['lines'][0]}-{v['lines'][1]}]" if "lines" in v else ""
            out.append(f"  [{v['kind']}] {v['message']} (weight {v['weight']:g}, fix: {v['fix_class']}){loc}")
            if src_lines is not None and "lines" in v:
                a, b = v["lines"]
                for n in range(a, min(b, len(src_lines)) + 1):
                    out.append(f"      {n:4d} | {src_lines[n - 1]}")
    if report.unresolved.get("ref") or report.unresolved.get("cand"):
        out.append(f"unresolved: reference {report.unresolved.get('ref', [])}, candidate {report.unresolved.get('cand', [])}")
    if report.mcs is not None:
        score = report.mcs.score
        out.append(f"MCS = {score:.3f}" if isinstance(score, float) else f"MCS = {score}")
        for m in report.mcs.mismatches:
            out.append(f"  [{m['origin']}] {m['key']}: expected {_fmt(m['expected'])}, found {_fmt(m['found'])}")
    return "\n".join(out) + "\n"
