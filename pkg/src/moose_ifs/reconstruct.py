"""Deterministic reconstruction of a physics contract from a parsed MOOSE input."""

from __future__ import annotations

import logging

from .contract import (
    BcType,
    BoundaryCondition,
    BoundTerm,
    Domain,
    InitialCondition,
    PhysicsContract,
    normalize_text,
)
from .hit import Block, InputTree, as_tokens, format_value
from .mcs import constant_properties, extract_facts
from .registry import MappingRegistry, Unresolved, default_registry, lookup_kernel

logger = logging.getLogger(__name__)

_MESH_SUMMARY_KEYS = ("dim", "nx", "ny", "nz", "xmin", "xmax", "ymin", "ymax", "zmin", "zmax", "file")


def active_children(block: Block | None) -> list[Block]:
    """Children of ``block`` honoring HIT ``active``/``inactive`` lists."""
    if block is None:
        return []
    children = list(block.children)
    if "active" in block.params:
        keep = set(as_tokens(block.params["active"]))
        children = [c for c in children if c.name in keep]
    if "inactive" in block.params:
        drop = set(as_tokens(block.params["inactive"]))
        children = [c for c in children if c.name not in drop]
    return children


def _sections(tree: InputTree, name: str) -> list[Block]:
    return [c for b in tree.root_blocks if b.name == name for c in active_children(b)]


def _variable_of(block: Block) -> str | None:
    value = block.params.get("variable")
    tokens = as_tokens(value)
    return tokens[0] if len(tokens) == 1 else None


def _bc_blocks(tree: InputTree) -> list[Block]:
    return _sections(tree, "BCs")


def _referenced_variables(tree: InputTree) -> list[str]:
    names: list[str] = []
    for section in ("Kernels", "ICs"):
        for b in _sections(tree, section):
            v = _variable_of(b)
            if v:
                names.append(v)
    for b in _bc_blocks(tree):
        if b.block_type is None and b.children:
            for c in active_children(b):
                v = _variable_of(c)
                if v:
                    names.append(v)
        else:
            v = _variable_of(b)
            if v:
                names.append(v)
    return names


def _declared_variables(tree: InputTree) -> list[str]:
    return [c.name for section in ("Variables", "AuxVariables") for c in _sections(tree, section)]


def variable_inventory(tree: InputTree) -> list[str]:
    """Declared variables, then any variable referenced but never declared."""
    names: list[str] = []
    for name in _declared_variables(tree) + _referenced_variables(tree):
        if name not in names:
            names.append(name)
    return names


def undeclared_variables(tree: InputTree) -> list[str]:
    declared = set(_declared_variables(tree))
    out: list[str] = []
    for name in _referenced_variables(tree):
        if name not in declared and name not in out:
            out.append(name)
    return out


def _functions(tree: InputTree) -> dict[str, str]:
    out = {}
    for b in _sections(tree, "Functions"):
        for key in ("expression", "value"):
            if key in b.params:
                out[b.name] = normalize_text(format_value(b.params[key]).strip("'\""))
                break
    return out


def _bc_value(raw, functions: dict[str, str]) -> float | str | None:
    if raw is None:
        return None
    if isinstance(raw, bool):
        return "true" if raw else "false"
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, tuple):
        return normalize_text(" ".join(as_tokens(raw)))
    return functions.get(raw, normalize_text(raw))


def _structured_value(block: Block) -> str:
    skip = {"type", "variable", "block", "boundary"}
    parts = [f"{k}={' '.join(as_tokens(v))}" for k, v in sorted(block.params.items()) if k not in skip]
    return normalize_text(" ".join(parts)) or (block.block_type or "").lower()


def _mesh_summary(tree: InputTree) -> Domain:
    mesh = tree.block("Mesh")
    if mesh is None:
        return Domain()
    candidates = [mesh] + list(mesh.children)
    dims = None
    parts = []
    for b in candidates:
        if b.block_type:
            parts.append(b.block_type)
        for key in _MESH_SUMMARY_KEYS:
            if key in b.params:
                parts.append(f"{key}={' '.join(as_tokens(b.params[key]))}")
                if key == "dim" and dims is None and isinstance(b.params[key], int) and 1 <= b.params[key] <= 3:
                    dims = b.params[key]
    return Domain(dims, " ".join(parts))


def _span(block: Block) -> tuple:
    return (block.block_type, block.source_span[0], block.source_span[1])


def reconstruct_contract(tree: InputTree, registry: MappingRegistry | None = None) -> PhysicsContract:
    """Map the active kernel, BC, IC and material blocks of ``tree`` to a contract.

    Covered kernels each yield one bound term keyed by (variable, operator);
    a second kernel with the same key is reported as a ``duplicate_term``
    diagnostic and dropped. Classes absent from the registry go to
    ``unresolved`` and never touch the other components.
    """
    registry = registry or default_registry()
    diagnostics = list(tree.diagnostics)
    unresolved: list[str] = []
    constants = constant_properties(tree, registry)
    functions = _functions(tree)

    variables = variable_inventory(tree)
    for name in undeclared_variables(tree):
        diagnostics.append(f"undeclared_variable: {name!r} is referenced but not declared in [Variables]")

    executioner = tree.block("Executioner")
    scheme = "transient" if executioner is not None and executioner.block_type == "Transient" else "steady"

    terms: list[BoundTerm] = []
    seen: dict = {}
    for kb in _sections(tree, "Kernels"):
        kclass = kb.block_type
        if kclass is None:
            diagnostics.append(f"kernel [{kb.name}] has no type")
            continue
        entry = lookup_kernel(registry, kclass)
        if isinstance(entry, Unresolved):
            if kclass not in unresolved:
                unresolved.append(kclass)
            continue
        var = _variable_of(kb)
        if var is None:
            diagnostics.append(f"kernel [{kb.name}] ({kclass}) has no variable")
            continue
        key = (var, entry.operator)
        if key in seen:
            diagnostics.append(
                f"duplicate_term: [{kb.name}] ({kclass}) repeats ({var}, {entry.operator.value}) "
                f"already bound by [{seen[key]}]"
            )
            continue
        seen[key] = kb.name
        terms.append(BoundTerm(var, entry.operator, _coefficient(kb, entry.coefficient_rule, constants), _span(kb)))

    bcs: list[BoundaryCondition] = []
    for bb in _bc_blocks(tree):
        if bb.block_type is None and bb.name == "Periodic":
            bcs.extend(_periodic(bb, variables, diagnostics))
            continue
        bclass = bb.block_type
        if bclass is None and bb.children:
            # action syntax such as [Pressure] expands to classes we do not map
            if bb.name not in unresolved:
                unresolved.append(bb.name)
            continue
        if bclass is None:
            diagnostics.append(f"BC [{bb.name}] has no type")
            continue
        spec = registry.bcs.get(bclass)
        if spec is None:
            if bclass not in unresolved:
                unresolved.append(bclass)
            continue
        var = _variable_of(bb)
        boundary = as_tokens(bb.params.get("boundary"))
        if var is None or not boundary:
            diagnostics.append(f"BC [{bb.name}] ({bclass}) lacks a variable or boundary")
            continue
        value = _bc_value(bb.params.get(spec.value_param), functions) if spec.value_param else None
        bcs.append(BoundaryCondition(var, boundary, spec.bc_type, value, _span(bb)))

    ics: list[InitialCondition] = []
    ic_vars: set = set()

    def add_ic(ic: InitialCondition, where: str) -> None:
        if ic.variable in ic_vars:
            diagnostics.append(f"duplicate initial condition for {ic.variable!r} at {where}; first kept")
            return
        ic_vars.add(ic.variable)
        ics.append(ic)

    for vb in _sections(tree, "Variables"):
        if "initial_condition" in vb.params:
            raw = vb.params["initial_condition"]
            if isinstance(raw, (int, float)) and not isinstance(raw, bool):
                add_ic(InitialCondition(vb.name, "constant", float(raw), _span(vb)), f"[Variables/{vb.name}]")
            else:
                add_ic(InitialCondition(vb.name, "function", _bc_value(raw, functions), _span(vb)), f"[Variables/{vb.name}]")
        for sub in vb.children:
            if sub.name == "InitialCondition":
                ic = _ic_from_block(sub, vb.name, registry, functions, unresolved, diagnostics)
                if ic is not None:
                    add_ic(ic, f"[Variables/{vb.name}/InitialCondition]")
    for ib in _sections(tree, "ICs"):
        var = _variable_of(ib)
        if var is None:
            diagnostics.append(f"IC [{ib.name}] has no variable")
            continue
        ic = _ic_from_block(ib, var, registry, functions, unresolved, diagnostics)
        if ic is not None:
            add_ic(ic, f"[ICs/{ib.name}]")

    for name in unresolved:
        logger.debug("unresolved object class %s", name)

    return PhysicsContract(
        variables=tuple(variables),
        terms=tuple(terms),
        bcs=tuple(bcs),
        ics=tuple(ics),
        coeff_facts=extract_facts(tree, registry),
        time_scheme=scheme,
        domain=_mesh_summary(tree),
        unresolved=tuple(unresolved),
        diagnostics=tuple(diagnostics),
    )


def _coefficient(block: Block, rule, constants: dict) -> float | None:
    if rule.kind == "from_param":
        raw = block.params.get(rule.param)
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return float(raw)
        return None
    if rule.kind == "from_material":
        prop = block.params.get(rule.param, rule.default)
        if isinstance(prop, str):
            value = constants.get(prop)
            if isinstance(value, float):
                return value
    return None


def _periodic(block: Block, variables: list[str], diagnostics: list[str]) -> list[BoundaryCondition]:
    out = []
    for pb in active_children(block):
        if "primary" in pb.params and "secondary" in pb.params:
            boundary = as_tokens(pb.params["primary"]) + as_tokens(pb.params["secondary"])
        elif "auto_direction" in pb.params:
            boundary = tuple(f"auto_{d}" for d in as_tokens(pb.params["auto_direction"]))
        else:
            diagnostics.append(f"periodic BC [{pb.name}] names no boundaries")
            continue
        targets = list(as_tokens(pb.params["variable"])) if "variable" in pb.params else list(variables)
        for var in targets:
            out.append(BoundaryCondition(var, boundary, BcType.PERIODIC, None, ("Periodic",) + pb.source_span))
    return out


def _ic_from_block(block, var, registry, functions, unresolved, diagnostics) -> InitialCondition | None:
    iclass = block.block_type
    if iclass is None:
        diagnostics.append(f"IC [{block.name}] has no type")
        return None
    spec = registry.ics.get(iclass)
    if spec is None:
        if iclass not in unresolved:
            unresolved.append(iclass)
        return None
    if spec.value_param is None:
        value = _structured_value(block)
    else:
        value = _bc_value(block.params.get(spec.value_param), functions)
    if spec.ic_type == "constant" and not isinstance(value, float):
        diagnostics.append(f"constant IC [{block.name}] has no numeric value")
        return None
    if value is None:
        diagnostics.append(f"IC [{block.name}] ({iclass}) has no value")
        return None
    return InitialCondition(var, spec.ic_type, value, _span(block))
