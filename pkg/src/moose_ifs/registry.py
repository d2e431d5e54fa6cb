"""Kernel/BC/IC mapping registry.

The registry is data, not code: the bundled ``data/registry.json`` can be
audited and extended without touching the scorer. Loading validates every
entry, so a malformed table fails loudly instead of skewing scores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

from .contract import BcType, OperatorType, WeakFormDescriptor, parse_bc_type, parse_operator, SchemaError

SEVERITY_LEVELS = (4.0, 3.0, 2.0, 1.0, 0.7, 0.5)

CHECKPOINT_KINDS = (
    "term_missing",
    "term_extra",
    "coefficient",
    "bc_type",
    "bc_boundary",
    "bc_value",
    "ic_type",
    "ic_value",
    "time_scheme",
)
TERM_KINDS = ("term_missing", "term_extra")

DEFAULT_SEVERITIES = {
    "coefficient": 1.0,
    "bc_type": 2.0,
    "bc_boundary": 2.0,
    "bc_value": 1.0,
    "ic_type": 2.0,
    "ic_value": 1.0,
    "time_scheme": 4.0,
}
DEFAULT_OPERATOR_SEVERITY = 3.0
DEFAULT_OPERATOR_SEVERITIES = {
    OperatorType.TIME_DERIVATIVE: 4.0,
    OperatorType.INERTIA: 4.0,
    OperatorType.COUPLED_FORCE: 2.0,
    OperatorType.REACTION: 2.0,
    OperatorType.SOURCE: 0.7,
}


class RegistryError(ValueError):
    def __init__(self, entry: str, field_name: str, message: str) -> None:
        super().__init__(f"{entry}.{field_name}: {message}")
        self.entry = entry
        self.field = field_name


@dataclass(frozen=True)
class CoefficientRule:
    """How a kernel's coefficient is read.

    ``kind`` is ``none``, ``from_param`` (numeric parameter ``param``) or
    ``from_material`` (parameter ``param`` names a material property,
    ``default`` when the parameter is absent).
    """

    kind: str = "none"
    param: str | None = None
    default: str | None = None


@dataclass(frozen=True)
class KernelMappingEntry:
    kernel_class: str
    operator: OperatorType
    descriptor: WeakFormDescriptor | None
    coefficient_rule: CoefficientRule
    severity: float
    equivalence_class: str


@dataclass(frozen=True)
class BcMappingEntry:
    bc_class: str
    bc_type: BcType
    value_param: str | None = None
    # parameters reported as Robin/convective coefficient facts
    fact_params: tuple = ()


@dataclass(frozen=True)
class IcMappingEntry:
    ic_class: str
    ic_type: str
    value_param: str | None = None


@dataclass(frozen=True)
class MappingRegistry:
    kernels: dict = field(default_factory=dict)
    bcs: dict = field(default_factory=dict)
    ics: dict = field(default_factory=dict)
    severity_table: dict = field(default_factory=lambda: dict(DEFAULT_SEVERITIES))
    operator_severity: dict = field(
        default_factory=lambda: {o: DEFAULT_OPERATOR_SEVERITIES.get(o, DEFAULT_OPERATOR_SEVERITY) for o in OperatorType}
    )
    constant_materials: tuple = ("GenericConstantMaterial", "ADGenericConstantMaterial")

    def equivalence_members(self, equivalence_class: str) -> list[str]:
        return sorted(k for k, e in self.kernels.items() if e.equivalence_class == equivalence_class)


class Unresolved:
    """Marker returned by :func:`lookup_kernel` for classes outside the registry."""

    __slots__ = ("kernel_class",)

    def __init__(self, kernel_class: str) -> None:
        self.kernel_class = kernel_class

    def __repr__(self) -> str:
        return f"Unresolved({self.kernel_class!r})"

    def __bool__(self) -> bool:
        return False


def _severity(value: Any, entry: str, field_name: str = "severity") -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RegistryError(entry, field_name, f"expected a number, got {value!r}")
    if float(value) not in SEVERITY_LEVELS:
        raise RegistryError(entry, field_name, f"{value} is not one of {SEVERITY_LEVELS}")
    return float(value)


def _descriptor(value: Any, entry: str) -> WeakFormDescriptor | None:
    if value is None:
        return None
    if not isinstance(value, list) or len(value) != 3:
        raise RegistryError(entry, "descriptor", "expected [trial_op, test_op, contraction]")
    try:
        return WeakFormDescriptor(*value)
    except ValueError as exc:
        raise RegistryError(entry, "descriptor", str(exc)) from None


def _coefficient_rule(value: Any, entry: str) -> CoefficientRule:
    if value is None or value == "none":
        return CoefficientRule()
    if not isinstance(value, dict):
        raise RegistryError(entry, "coefficient", f"expected an object, got {value!r}")
    kind = value.get("rule", "none")
    if kind == "none":
        return CoefficientRule()
    if kind not in ("from_param", "from_material"):
        raise RegistryError(entry, "coefficient.rule", f"unknown rule {kind!r}")
    param = value.get("param")
    if not isinstance(param, str) or not param:
        raise RegistryError(entry, "coefficient.param", "required for this rule")
    default = value.get("default")
    if default is not None and not isinstance(default, str):
        raise RegistryError(entry, "coefficient.default", "expected a property name")
    return CoefficientRule(kind, param, default)


def registry_from_dict(doc: Any) -> MappingRegistry:
    if not isinstance(doc, dict):
        raise RegistryError("$", "$", "registry document must be a JSON object")

    severity_table = dict(DEFAULT_SEVERITIES)
    for kind, weight in (doc.get("severity_table") or {}).items():
        if kind not in CHECKPOINT_KINDS or kind in TERM_KINDS:
            raise RegistryError("severity_table", kind, "unknown or operator-derived checkpoint kind")
        severity_table[kind] = _severity(weight, "severity_table", kind)

    operator_severity = {op: DEFAULT_OPERATOR_SEVERITIES.get(op, DEFAULT_OPERATOR_SEVERITY) for op in OperatorType}
    operator_descriptor: dict[OperatorType, WeakFormDescriptor | None] = {}
    for name, spec in (doc.get("operators") or {}).items():
        entry = f"operators.{name}"
        try:
            op = parse_operator(name, entry)
        except SchemaError as exc:
            raise RegistryError(entry, "name", str(exc)) from None
        if not isinstance(spec, dict):
            raise RegistryError(entry, "$", "expected an object")
        operator_severity[op] = _severity(spec.get("severity"), entry)
        operator_descriptor[op] = _descriptor(spec.get("descriptor"), entry)

    kernels: dict[str, KernelMappingEntry] = {}
    class_ops: dict[str, OperatorType] = {}
    for name, spec in (doc.get("kernels") or {}).items():
        entry = f"kernels.{name}"
        if not isinstance(spec, dict):
            raise RegistryError(entry, "$", "expected an object")
        try:
            op = parse_operator(spec.get("operator"), entry)
        except SchemaError as exc:
            raise RegistryError(entry, "operator", str(exc)) from None
        severity = spec.get("severity", operator_severity[op])
        descriptor = _descriptor(spec["descriptor"], entry) if "descriptor" in spec else operator_descriptor.get(op)
        eq = spec.get("equivalence_class", f"{op.value}_op")
        if not isinstance(eq, str) or not eq:
            raise RegistryError(entry, "equivalence_class", "expected a non-empty identifier")
        if class_ops.setdefault(eq, op) != op:
            raise RegistryError(entry, "equivalence_class", f"{eq!r} already maps to {class_ops[eq].value}")
        severity = _severity(severity, entry)
        if severity != operator_severity[op]:
            raise RegistryError(entry, "severity", f"{severity} disagrees with operator {op.value} ({operator_severity[op]})")
        kernels[name] = KernelMappingEntry(
            kernel_class=name,
            operator=op,
            descriptor=descriptor,
            coefficient_rule=_coefficient_rule(spec.get("coefficient"), entry),
            severity=severity,
            equivalence_class=eq,
        )

    bcs: dict[str, BcMappingEntry] = {}
    for name, spec in (doc.get("bcs") or {}).items():
        entry = f"bcs.{name}"
        if not isinstance(spec, dict):
            raise RegistryError(entry, "$", "expected an object")
        try:
            bc_type = parse_bc_type(spec.get("bc_type"), entry)
        except SchemaError as exc:
            raise RegistryError(entry, "bc_type", str(exc)) from None
        value_param = spec.get("value")
        if value_param is not None and not isinstance(value_param, str):
            raise RegistryError(entry, "value", "expected a parameter name or null")
        fact_params = spec.get("facts", [])
        if not isinstance(fact_params, list) or not all(isinstance(p, str) for p in fact_params):
            raise RegistryError(entry, "facts", "expected a list of parameter names")
        bcs[name] = BcMappingEntry(name, bc_type, value_param, tuple(fact_params))

    ics: dict[str, IcMappingEntry] = {}
    for name, spec in (doc.get("ics") or {}).items():
        entry = f"ics.{name}"
        if not isinstance(spec, dict):
            raise RegistryError(entry, "$", "expected an object")
        ic_type = spec.get("ic_type")
        if ic_type not in ("constant", "function"):
            raise RegistryError(entry, "ic_type", f"unknown ic_type {ic_type!r}")
        value_param = spec.get("value")
        if value_param is not None and not isinstance(value_param, str):
            raise RegistryError(entry, "value", "expected a parameter name or null")
        ics[name] = IcMappingEntry(name, ic_type, value_param)

    constant_materials = doc.get("constant_materials", list(MappingRegistry().constant_materials))
    if not isinstance(constant_materials, list) or not all(isinstance(m, str) for m in constant_materials):
        raise RegistryError("constant_materials", "$", "expected a list of material class names")

    return MappingRegistry(kernels, bcs, ics, severity_table, operator_severity, tuple(constant_materials))


def load_registry(document: str | bytes) -> MappingRegistry:
    """Load and validate a registry JSON document."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise RegistryError("$", "$", f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    return registry_from_dict(doc)


def load_registry_file(path: str | Path) -> MappingRegistry:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise RegistryError(str(path), "$", f"cannot read registry: {exc}") from None
    return load_registry(text)


@lru_cache(maxsize=1)
def default_registry() -> MappingRegistry:
    text = resources.files("moose_ifs").joinpath("data/registry.json").read_text(encoding="utf-8")
    return load_registry(text)


def lookup_kernel(registry: MappingRegistry, kernel_class: str) -> KernelMappingEntry | Unresolved:
    entry = registry.kernels.get(kernel_class)
    return entry if entry is not None else Unresolved(kernel_class)


def descriptor_equivalent(a: WeakFormDescriptor, b: WeakFormDescriptor) -> bool:
    return a.trial_op == b.trial_op and a.test_op == b.test_op and a.contraction == b.contraction


def severity_for(registry: MappingRegistry, checkpoint_kind: str, operator: OperatorType | None = None) -> float:
    """Weight of a checkpoint; term kinds take the operator's severity."""
    if checkpoint_kind in TERM_KINDS:
        if operator is None:
            raise ValueError(f"{checkpoint_kind} needs an operator")
        return registry.operator_severity.get(operator, DEFAULT_OPERATOR_SEVERITIES.get(operator, DEFAULT_OPERATOR_SEVERITY))
    if checkpoint_kind not in CHECKPOINT_KINDS:
        raise ValueError(f"unknown checkpoint kind {checkpoint_kind!r}")
    return registry.severity_table[checkpoint_kind]
