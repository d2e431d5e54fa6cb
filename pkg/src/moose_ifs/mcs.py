"""Material Consistency Score and coefficient/material fact extraction.

MCS is a secondary diagnostic reported next to IFS. It compares normalized
coefficient/material facts key by key and never feeds back into IFS.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .contract import MaterialFact, normalize_key, normalize_text
from .hit import Block, InputTree, as_tokens
from .ifs import coefficient_match
from .registry import MappingRegistry, default_registry

UNDEFINED = "undefined"
FIELD_ERROR_FLOOR = 1e-15

# parameters that wire objects together rather than carry physics
_WIRING_PARAMS = frozenset({"type", "block", "boundary", "variable", "outputs", "output_properties", "base_name"})


class LengthMismatch(ValueError):
    pass


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _materials(tree: InputTree) -> list[Block]:
    out = []
    for b in tree.root_blocks:
        if b.name == "Materials":
            out.extend(b.children)
    return out


def constant_properties(tree: InputTree, registry: MappingRegistry | None = None) -> dict[str, float | str]:
    """Property name -> value for constant-material declarations (first wins)."""
    registry = registry or default_registry()
    props: dict[str, float | str] = {}
    for mb in _materials(tree):
        if mb.block_type not in registry.constant_materials:
            continue
        names = as_tokens(mb.params.get("prop_names"))
        raw = mb.params.get("prop_values")
        values = list(raw) if isinstance(raw, tuple) else ([] if raw is None else [raw])
        for name, value in zip(names, values):
            if name in props:
                continue
            props[name] = float(value) if _is_number(value) else normalize_text(str(value))
    return props


def _fact_value(raw) -> float | str | None:
    if raw is None:
        return None
    if _is_number(raw):
        return float(raw)
    if isinstance(raw, bool):
        return "true" if raw else "false"
    if isinstance(raw, tuple):
        return normalize_text(" ".join(as_tokens(raw)))
    return normalize_text(raw)


def extract_facts(tree: InputTree, registry: MappingRegistry | None = None) -> tuple:
    """Normalized coefficient/material facts of an input, deduplicated by key.

    Facts come from constant material declarations, the numeric parameters
    and class signature of every other material model, the coefficient
    parameters of convective/Robin BCs, and material-backed kernel
    coefficients that resolve through a constant declaration.
    """
    registry = registry or default_registry()
    facts: dict[str, MaterialFact] = {}

    def add(key: str, value, origin: str) -> None:
        key = normalize_key(key)
        if value is None or not key or key in facts:
            return
        facts[key] = MaterialFact(key, value, origin)

    constants = constant_properties(tree, registry)
    for name, value in constants.items():
        add(name, value, "material_model")

    for mb in _materials(tree):
        mtype = mb.block_type
        if mtype is None or mtype in registry.constant_materials:
            continue
        add(f"model:{mtype}", mtype.lower(), "material_model")
        for key, raw in mb.params.items():
            if key in _WIRING_PARAMS:
                continue
            if _is_number(raw) or (isinstance(raw, tuple) and raw and all(_is_number(v) for v in raw)):
                add(key, _fact_value(raw), "uncovered_constitutive")

    for section in tree.root_blocks:
        if section.name != "BCs":
            continue
        for bb in section.children:
            spec = registry.bcs.get(bb.block_type or "")
            if spec is None or not spec.fact_params:
                continue
            where = "+".join(sorted(as_tokens(bb.params.get("boundary")))) or bb.name
            for param in spec.fact_params:
                if param not in bb.params:
                    continue
                raw = bb.params[param]
                if isinstance(raw, str) and isinstance(constants.get(raw), float):
                    raw = constants[raw]
                add(f"bc:{where}:{param}", _fact_value(raw), "bc_coefficient")

    for section in tree.root_blocks:
        if section.name != "Kernels":
            continue
        for kb in section.children:
            entry = registry.kernels.get(kb.block_type or "")
            if entry is None or entry.coefficient_rule.kind != "from_material":
                continue
            prop = kb.params.get(entry.coefficient_rule.param, entry.coefficient_rule.default)
            var = kb.params.get("variable")
            if isinstance(prop, str) and isinstance(constants.get(prop), float) and isinstance(var, str):
                add(f"kernel:{var}:{entry.operator.value}", constants[prop], "kernel_coefficient")

    return tuple(facts.values())


def facts_match(ref, cand, delta_coef: float, eps0: float) -> bool:
    """Reference-relative numeric match, exact normalized match otherwise."""
    if isinstance(ref, (int, float)) and isinstance(cand, (int, float)):
        return coefficient_match(float(ref), float(cand), delta_coef, eps0)
    if isinstance(ref, str) and isinstance(cand, str):
        return normalize_text(ref).lower() == normalize_text(cand).lower()
    # a numeric string on one side still compares numerically
    try:
        r = float(ref)
        c = float(cand)
    except (TypeError, ValueError):
        return False
    return coefficient_match(r, c, delta_coef, eps0)


@dataclass
class McsResult:
    score: float | str
    mismatches: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"mcs": self.score, "mismatches": self.mismatches}


def mcs_detail(
    ref_facts: Iterable[MaterialFact], cand_facts: Iterable[MaterialFact], delta_coef: float = 0.1, eps0: float = 1e-12
) -> McsResult:
    ref_facts = list(ref_facts)
    if not ref_facts:
        return McsResult(UNDEFINED)
    by_key: dict[str, list] = {}
    for g in cand_facts:
        by_key.setdefault(g.key, []).append(g.value)
    matched = 0
    mismatches = []
    for f in ref_facts:
        found = by_key.get(f.key, [])
        if any(facts_match(f.value, v, delta_coef, eps0) for v in found):
            matched += 1
        else:
            mismatches.append(
                {"key": f.key, "origin": f.origin, "expected": f.value, "found": found[0] if found else None}
            )
    return McsResult(matched / len(ref_facts), mismatches)


def mcs(ref_facts, cand_facts, delta_coef: float = 0.1, eps0: float = 1e-12) -> float | str:
    """Fraction of reference facts matched by key and value; ``UNDEFINED`` if there are none."""
    return mcs_detail(ref_facts, cand_facts, delta_coef, eps0).score


def field_relative_error(u_gt: Sequence[float], u_pert: Sequence[float]) -> float:
    """||u_pert - u_gt||_2 / max(||u_gt||_2, 1e-15) over concatenated solution vectors."""
    gt = np.asarray(u_gt, dtype=float).ravel()
    pert = np.asarray(u_pert, dtype=float).ravel()
    if gt.shape != pert.shape:
        raise LengthMismatch(f"lengths differ: {gt.size} vs {pert.size}")
    return float(np.linalg.norm(pert - gt) / max(float(np.linalg.norm(gt)), FIELD_ERROR_FLOOR))
