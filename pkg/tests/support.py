"""Shared test helpers: mutation battery, renaming, random inputs, scripted endpoints."""

from __future__ import annotations

import json
import random
from dataclasses import replace
from pathlib import Path

from moose_ifs.bench import load_golden_cases
from moose_ifs.contract import BcType, OperatorType, PhysicsContract, contract_to_dict
from moose_ifs.hit import Block, InputTree, ParseError, parse_input, serialize
from moose_ifs.registry import default_registry

FIXTURES = Path(__file__).parent / "fixtures"
DELTA = 0.1


def golden():
    return load_golden_cases()


def golden_input(case) -> str:
    return case.reference_input.read_text(encoding="utf-8")


# --- mutation battery -------------------------------------------------------


def _shift(value):
    # moves a checked value well past the relative tolerance
    if isinstance(value, float):
        return value * (1 + 3 * DELTA) if value != 0 else 1.0
    return f"{value} + 1"


def mutations(contract: PhysicsContract):
    """Yield (label, mutated contract, subject) for every single mutation."""
    c = contract
    for i, t in enumerate(c.terms):
        subject = {"variable": t.variable, "operator": t.operator.value}
        yield f"drop {t.key}", replace(c, terms=c.terms[:i] + c.terms[i + 1:]), subject
        present = {o.operator for o in c.terms_of(t.variable)}
        for op in OperatorType:
            if op not in present:
                swapped = replace(t, operator=op)
                yield f"swap {t.key}->{op.value}", replace(c, terms=c.terms[:i] + (swapped,) + c.terms[i + 1:]), subject
        if t.coefficient is not None:
            shifted = replace(t, coefficient=_shift(t.coefficient))
            yield f"coef {t.key}", replace(c, terms=c.terms[:i] + (shifted,) + c.terms[i + 1:]), subject
    for i, b in enumerate(c.bcs):
        subject = {"variable": b.variable, "boundary": " ".join(b.boundary)}
        others = [bt for bt in BcType if bt not in (b.bc_type, BcType.PERIODIC)]
        for bt in others:
            changed = replace(b, bc_type=bt, boundary=b.boundary or ("left",))
            yield f"bc_type {i}->{bt.value}", replace(c, bcs=c.bcs[:i] + (changed,) + c.bcs[i + 1:]), subject
        moved = replace(b, boundary=("mutated_side",))
        yield f"boundary {i}", replace(c, bcs=c.bcs[:i] + (moved,) + c.bcs[i + 1:]), subject
        if b.value is not None:
            shifted = replace(b, value=_shift(b.value))
            yield f"bc_value {i}", replace(c, bcs=c.bcs[:i] + (shifted,) + c.bcs[i + 1:]), subject
    for i, ic in enumerate(c.ics):
        shifted = replace(ic, value=_shift(ic.value))
        yield f"ic_value {i}", replace(c, ics=c.ics[:i] + (shifted,) + c.ics[i + 1:]), {"variable": ic.variable}
    flipped = "steady" if c.time_scheme == "transient" else "transient"
    yield "time", replace(c, time_scheme=flipped), {}


def names_subject(report, subject: dict) -> bool:
    if not subject:
        return any(v["kind"] == "time_scheme" for v in report.violations)
    for v in report.violations:
        if all(v.get(k) == val for k, val in subject.items()):
            return True
    return False


# --- renaming ---------------------------------------------------------------


def rename_contract(c: PhysicsContract, mapping: dict) -> PhysicsContract:
    m = lambda v: mapping.get(v, v)  # noqa: E731
    return replace(
        c,
        variables=tuple(m(v) for v in c.variables),
        terms=tuple(replace(t, variable=m(t.variable)) for t in c.terms),
        bcs=tuple(replace(b, variable=m(b.variable)) for b in c.bcs),
        ics=tuple(replace(i, variable=m(i.variable)) for i in c.ics),
    )


def kernel_substitutions(text: str, registry=None):
    """Yield inputs with one kernel class swapped for a same-class variant.

    A variant qualifies when it reads its coefficient the same way, or when
    the original kernel carries no coefficient at all.
    """
    registry = registry or default_registry()
    tree = parse_input(text)
    for section in tree.root_blocks:
        if section.name != "Kernels":
            continue
        for kb in section.children:
            entry = registry.kernels.get(kb.block_type or "")
            if entry is None:
                continue
            for alt in registry.equivalence_members(entry.equivalence_class):
                if alt == kb.block_type:
                    continue
                alt_rule = registry.kernels[alt].coefficient_rule
                if entry.coefficient_rule.kind == "none":
                    if alt_rule.kind != "none":
                        continue
                elif alt_rule != entry.coefficient_rule:
                    continue
                yield kb.block_type, alt, _with_kernel_type(tree, kb.name, alt)


def _with_kernel_type(tree: InputTree, kernel_name: str, new_type: str) -> str:
    roots = []
    for b in tree.root_blocks:
        if b.name == "Kernels":
            kids = tuple(
                replace(k, params={**k.params, "type": new_type}) if k.name == kernel_name else k for k in b.children
            )
            b = replace(b, children=kids)
        roots.append(b)
    return serialize(InputTree(tuple(roots)))


# --- random inputs for reconstruction soundness -----------------------------

UNCOVERED = ("MysteryKernel", "ADCustomFlux", "PorousFlowFullySaturatedHeatAdvection", "SpecialSource")


def random_input(rng: random.Random, registry=None) -> tuple[str, int, set]:
    """A random input plus its expected term count and unresolved classes."""
    registry = registry or default_registry()
    classes = sorted(registry.kernels)
    variables = [f"v{i}" for i in range(rng.randint(1, 4))]
    lines = ["[Variables]"]
    for v in variables:
        lines += [f"  [{v}]", "  []"]
    lines += ["[]", "", "[Kernels]"]
    keys = set()
    uncovered = set()
    for k in range(rng.randint(0, 9)):
        var = rng.choice(variables)
        if rng.random() < 0.25:
            cls = rng.choice(UNCOVERED)
            uncovered.add(cls)
        else:
            cls = rng.choice(classes)
            keys.add((var, registry.kernels[cls].operator))
        lines += [f"  [k{k}]", f"    type = {cls}", f"    variable = {var}"]
        if rng.random() < 0.5:
            lines.append(f"    coef = {rng.choice([0.5, 2, 1e-3])}")
        lines.append("  []")
    lines += ["[]", "", "[Executioner]", f"  type = {rng.choice(['Steady', 'Transient'])}", "[]", ""]
    return "\n".join(lines), len(keys), uncovered


# --- scripted endpoints -----------------------------------------------------


class ScriptedEndpoint:
    """Returns canned responses per role, in order; records every call."""

    def __init__(self, **responses) -> None:
        self.responses = {role: list(items) for role, items in responses.items()}
        self.calls: list[tuple[str, str]] = []

    def complete(self, prompt: str, role: str) -> str:
        self.calls.append((role, prompt))
        queue = self.responses.get(role)
        if not queue:
            raise AssertionError(f"unexpected {role} call")
        return queue.pop(0) if len(queue) > 1 else queue[0]


def split_refine_prompt(prompt: str) -> tuple[str, list]:
    code = prompt.split("Current code: ", 1)[1].split("\nViolations detected: ", 1)[0]
    doc = prompt.split("Violations detected: ", 1)[1].split("\n\nCRITICAL", 1)[0]
    return code, json.loads(doc)["violations"]


_ADD_KERNEL = {
    "diffusion": "Diffusion",
    "time_derivative": "TimeDerivative",
    "coupled_force": "CoupledForce",
    "reaction": "Reaction",
    "source": "BodyForce",
    "advection": "ConservativeAdvection",
    "stress_divergence": "StressDivergenceTensors",
    "inertia": "InertialForce",
}
_BC_CLASS = {"Dirichlet": "DirichletBC", "Neumann": "NeumannBC"}


def _section(roots: list, name: str) -> int:
    for i, b in enumerate(roots):
        if b.name == name:
            return i
    roots.append(Block(name))
    return len(roots) - 1


def mechanical_fix(code: str, violations: list) -> str:
    """Apply each violation's fix class to the input text, as literally as possible."""
    registry = default_registry()
    try:
        roots = list(parse_input(code).root_blocks)
    except ParseError:
        roots = []
    for v in violations:
        kind, var = v["kind"], v["variable"]
        if kind == "term_missing" and v["operator"] in _ADD_KERNEL:
            i = _section(roots, "Kernels")
            name = f"fix_{var}_{v['operator']}"
            kernel = Block(name, {"type": _ADD_KERNEL[v["operator"]], "variable": var})
            roots[i] = replace(roots[i], children=roots[i].children + (kernel,))
        elif kind == "term_extra":
            i = _section(roots, "Kernels")
            keep = tuple(
                k for k in roots[i].children
                if not (k.params.get("variable") == var and k.block_type in registry.kernels
                        and registry.kernels[k.block_type].operator.value == v["operator"])
            )
            roots[i] = replace(roots[i], children=keep)
        elif kind == "coefficient":
            i = _section(roots, "Kernels")
            kids = []
            for k in roots[i].children:
                entry = registry.kernels.get(k.block_type or "")
                if (entry and k.params.get("variable") == var and entry.operator.value == v["operator"]
                        and entry.coefficient_rule.kind == "from_param"):
                    k = replace(k, params={**k.params, entry.coefficient_rule.param: v["expected"]})
                kids.append(k)
            roots[i] = replace(roots[i], children=tuple(kids))
        elif kind in ("bc_type", "bc_value"):
            i = _section(roots, "BCs")
            kids = []
            for b in roots[i].children:
                if b.params.get("variable") == var and str(b.params.get("boundary")) == v["boundary"]:
                    if kind == "bc_type" and v["expected"] in _BC_CLASS:
                        b = replace(b, params={**b.params, "type": _BC_CLASS[v["expected"]]})
                    elif kind == "bc_value":
                        b = replace(b, params={**b.params, "value": v["expected"]})
                kids.append(b)
            roots[i] = replace(roots[i], children=tuple(kids))
        elif kind == "bc_boundary" and v.get("hint", {}).get("bc_type") in _BC_CLASS:
            i = _section(roots, "BCs")
            params = {"type": _BC_CLASS[v["hint"]["bc_type"]], "variable": var, "boundary": v["boundary"]}
            if v["hint"].get("value") is not None:
                params["value"] = v["hint"]["value"]
            roots[i] = replace(roots[i], children=roots[i].children + (Block(f"fix_{var}_{v['boundary']}", params),))
        elif kind == "time_scheme":
            i = _section(roots, "Executioner")
            roots[i] = replace(roots[i], params={**roots[i].params, "type": v["expected"].capitalize()})
    return serialize(InputTree(tuple(roots)))


class CooperativeEndpoint:
    """Extracts a fixed contract, emits a flawed first draft, then fixes what the report lists."""

    def __init__(self, contract: PhysicsContract, first_draft: str) -> None:
        self.contract_json = json.dumps(contract_to_dict(contract), indent=2)
        self.first_draft = first_draft
        self.calls: list[str] = []

    def complete(self, prompt: str, role: str) -> str:
        self.calls.append(role)
        if role == "extractor":
            return f"Here is the contract:\n```json\n{self.contract_json}\n```\n"
        if role == "generator":
            return f"```moose\n{self.first_draft}```"
        code, violations = split_refine_prompt(prompt)
        return mechanical_fix(code, violations)


class AdversarialEndpoint(CooperativeEndpoint):
    """Like the cooperative one, but every refinement deletes all kernels."""

    def complete(self, prompt: str, role: str) -> str:
        if role != "refiner":
            return super().complete(prompt, role)
        self.calls.append(role)
        code, _ = split_refine_prompt(prompt)
        try:
            roots = tuple(b for b in parse_input(code).root_blocks if b.name != "Kernels")
        except ParseError:
            roots = ()
        return serialize(InputTree(roots))
