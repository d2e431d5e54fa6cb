"""Physics contracts: terms, boundary/initial conditions, coefficient facts,
time scheme and domain, plus their JSON interchange format.

The same JSON schema carries reference, LLM-extracted and code-reconstructed
contracts, so the scorer never needs to know where a contract came from.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Union

CoefValue = Union[float, None]  # None is the unit coefficient
BcValue = Union[float, str, None]


class SchemaError(ValueError):
    """A contract document violates the schema; ``path`` names the field."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


class ContractError(ValueError):
    """A contract violates a structural invariant at construction."""


class UnknownVariable(KeyError):
    pass


class OperatorType(str, Enum):
    DIFFUSION = "diffusion"
    TIME_DERIVATIVE = "time_derivative"
    SOURCE = "source"
    REACTION = "reaction"
    ADVECTION = "advection"
    STRESS_DIVERGENCE = "stress_divergence"
    COUPLED_FORCE = "coupled_force"
    CURL_CURL = "curl_curl"
    INERTIA = "inertia"
    PF_DARCY_FLUX = "pf_darcy_flux"
    PF_EFFECTIVE_STRESS = "pf_effective_stress"
    ALLEN_CAHN = "allen_cahn"
    CAHN_HILLIARD = "cahn_hilliard"
    NS_CONTINUITY = "ns_continuity"
    NS_PRESSURE = "ns_pressure"
    NS_VISCOUS = "ns_viscous"

    def __str__(self) -> str:
        return self.value


class BcType(str, Enum):
    DIRICHLET = "Dirichlet"
    NEUMANN = "Neumann"
    ROBIN = "Robin"
    PERIODIC = "Periodic"
    FLUX_RESIDUAL = "FluxResidual"
    POROUS_FLOW_SINK = "PorousFlowSink"
    POROUS_FLOW_OUTFLOW = "PorousFlowOutflow"

    def __str__(self) -> str:
        return self.value


TRIAL_OPS = frozenset({"identity", "grad", "div", "curl", "ddt", "ddt2", "stress", "strain"})
TEST_OPS = frozenset({"identity", "grad", "div", "curl"})
CONTRACTIONS = frozenset({"scalar_mult", "dot", "double_dot"})

TIME_SCHEMES = ("steady", "transient")
IC_TYPES = ("constant", "function")
FACT_ORIGINS = ("kernel_coefficient", "bc_coefficient", "material_model", "uncovered_constitutive")

_BC_BY_LOWER = {t.value.lower(): t for t in BcType}


@dataclass(frozen=True)
class WeakFormDescriptor:
    """Weak-form witness: trial-side operator, test-side operator, contraction."""

    trial_op: str
    test_op: str
    contraction: str

    def __post_init__(self) -> None:
        if self.trial_op not in TRIAL_OPS:
            raise ValueError(f"trial_op {self.trial_op!r} not in {sorted(TRIAL_OPS)}")
        if self.test_op not in TEST_OPS:
            raise ValueError(f"test_op {self.test_op!r} not in {sorted(TEST_OPS)}")
        if self.contraction not in CONTRACTIONS:
            raise ValueError(f"contraction {self.contraction!r} not in {sorted(CONTRACTIONS)}")


@dataclass(frozen=True)
class BoundTerm:
    variable: str
    operator: OperatorType
    coefficient: CoefValue = None
    # provenance only: (kernel class, first line, last line)
    origin: tuple | None = field(default=None, compare=False)

    @property
    def key(self) -> tuple[str, OperatorType]:
        return (self.variable, self.operator)


@dataclass(frozen=True)
class BoundaryCondition:
    variable: str
    boundary: tuple
    bc_type: BcType
    value: BcValue = None
    origin: tuple | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.boundary and self.bc_type is not BcType.PERIODIC:
            raise ContractError(f"BC on {self.variable!r} has an empty boundary set")

    def boundary_key(self) -> tuple:
        """Matching key: ordered for periodic pairs, a sorted set otherwise."""
        if self.bc_type is BcType.PERIODIC:
            return ("periodic",) + tuple(self.boundary)
        return tuple(sorted(set(self.boundary)))


@dataclass(frozen=True)
class InitialCondition:
    variable: str
    ic_type: str
    value: float | str
    origin: tuple | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.ic_type not in IC_TYPES:
            raise ContractError(f"ic_type {self.ic_type!r} not in {IC_TYPES}")
        if self.ic_type == "constant" and not _is_number(self.value):
            raise ContractError(f"constant IC on {self.variable!r} needs a numeric value")


@dataclass(frozen=True)
class MaterialFact:
    key: str
    value: float | str
    origin: str

    def __post_init__(self) -> None:
        key = normalize_key(self.key)
        if not key:
            raise ContractError("material fact key is empty")
        object.__setattr__(self, "key", key)
        if isinstance(self.value, str):
            object.__setattr__(self, "value", normalize_text(self.value))
        if self.origin not in FACT_ORIGINS:
            raise ContractError(f"fact origin {self.origin!r} not in {FACT_ORIGINS}")


@dataclass(frozen=True)
class Domain:
    dimensions: int | None = None
    mesh: str = ""


@dataclass(frozen=True)
class PhysicsContract:
    variables: tuple = ()
    terms: tuple = ()
    bcs: tuple = ()
    ics: tuple = ()
    coeff_facts: tuple = ()
    time_scheme: str = "steady"
    domain: Domain = Domain()
    unresolved: tuple = ()
    extras: dict = field(default_factory=dict)
    diagnostics: tuple = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if self.time_scheme not in TIME_SCHEMES:
            raise ContractError(f"time_scheme {self.time_scheme!r} not in {TIME_SCHEMES}")
        if len(set(self.variables)) != len(self.variables):
            raise ContractError("variables must be unique")
        declared = set(self.variables)
        seen = set()
        for t in self.terms:
            if t.key in seen:
                raise ContractError(f"duplicate term ({t.variable}, {t.operator})")
            seen.add(t.key)
            if t.variable not in declared:
                raise ContractError(f"term variable {t.variable!r} is not declared")
        for item in (*self.bcs, *self.ics):
            if item.variable not in declared:
                raise ContractError(f"variable {item.variable!r} is not declared")

    def terms_of(self, variable: str) -> list[BoundTerm]:
        return [t for t in self.terms if t.variable == variable]

    def term(self, variable: str, operator: OperatorType) -> BoundTerm | None:
        for t in self.terms:
            if t.variable == variable and t.operator == operator:
                return t
        return None


def normalize_text(text: str) -> str:
    return " ".join(str(text).split())


def normalize_key(text: str) -> str:
    return " ".join(str(text).lower().split())


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def term_signature(contract: PhysicsContract, variable: str) -> list[OperatorType]:
    """Sorted operator types acting on ``variable``."""
    if variable not in contract.variables:
        raise UnknownVariable(variable)
    return sorted((t.operator for t in contract.terms if t.variable == variable), key=lambda o: o.value)


# --- JSON interchange -------------------------------------------------------

_KNOWN_FIELDS = {
    "variables",
    "terms",
    "boundary_conditions",
    "initial_conditions",
    "time_scheme",
    "dimensions",
    "mesh",
    "unresolved",
    "coeff_facts",
}


def parse_operator(name: Any, path: str) -> OperatorType:
    if not isinstance(name, str):
        raise SchemaError(path, f"expected an operator name, got {name!r}")
    try:
        return OperatorType(name.strip().lower())
    except ValueError:
        raise SchemaError(path, f"unknown operator {name!r}") from None


def parse_bc_type(name: Any, path: str) -> BcType:
    if isinstance(name, str) and name.strip().lower() in _BC_BY_LOWER:
        return _BC_BY_LOWER[name.strip().lower()]
    raise SchemaError(path, f"unknown bc_type {name!r}")


def _number(value: Any, path: str, allow_null: bool = True) -> float | None:
    if value is None and allow_null:
        return None
    if _is_number(value):
        if not math.isfinite(value):
            raise SchemaError(path, "value must be finite")
        return float(value)
    if isinstance(value, str):
        try:
            parsed = float(value)
        except ValueError:
            pass
        else:
            if math.isfinite(parsed):
                return parsed
    raise SchemaError(path, f"expected a number{' or null' if allow_null else ''}, got {value!r}")


def _value(value: Any, path: str) -> float | str | None:
    if value is None:
        return None
    if _is_number(value):
        return _number(value, path)
    if isinstance(value, str):
        try:
            parsed = float(value)
        except ValueError:
            return normalize_text(value)
        return parsed if math.isfinite(parsed) else normalize_text(value)
    raise SchemaError(path, f"expected a number, string or null, got {value!r}")


def _identifier(value: Any, path: str) -> str:
    if not isinstance(value, str) or not value.strip() or len(value.split()) != 1:
        raise SchemaError(path, f"expected an identifier, got {value!r}")
    return value.strip()


def _boundary(value: Any, path: str) -> tuple:
    if isinstance(value, str):
        tokens = value.split()
    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        tokens = [str(value)]
    elif isinstance(value, list) and all(isinstance(v, (str, int)) and not isinstance(v, bool) for v in value):
        tokens = [t for v in value for t in str(v).split()]
    else:
        raise SchemaError(path, f"expected boundary name(s), got {value!r}")
    return tuple(tokens)


def _require(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return obj[key]


def _list(obj: dict, key: str, path: str) -> list:
    value = obj.get(key, [])
    if value is None:
        return []
    if not isinstance(value, list):
        raise SchemaError(f"{path}{key}", "expected a list")
    return value


def contract_from_dict(doc: Any) -> PhysicsContract:
    """Validate a decoded contract document."""
    if not isinstance(doc, dict):
        raise SchemaError("$", "contract must be a JSON object")

    variables: list[str] = []
    for i, v in enumerate(_list(doc, "variables", "")):
        name = _identifier(v, f"variables[{i}]")
        if name not in variables:
            variables.append(name)

    def declare(name: str) -> None:
        if name not in variables:
            variables.append(name)

    terms: list[BoundTerm] = []
    seen: set = set()
    for i, item in enumerate(_list(doc, "terms", "")):
        path = f"terms[{i}]"
        if not isinstance(item, dict):
            raise SchemaError(path, "expected an object")
        var = _identifier(_require(item, "variable", path), f"{path}.variable")
        op = parse_operator(_require(item, "operator", path), f"{path}.operator")
        coef = _number(item.get("coefficient"), f"{path}.coefficient")
        if (var, op) in seen:
            raise SchemaError(path, f"duplicate term ({var}, {op})")
        seen.add((var, op))
        declare(var)
        terms.append(BoundTerm(var, op, coef))

    bcs: list[BoundaryCondition] = []
    for i, item in enumerate(_list(doc, "boundary_conditions", "")):
        path = f"boundary_conditions[{i}]"
        if not isinstance(item, dict):
            raise SchemaError(path, "expected an object")
        var = _identifier(_require(item, "variable", path), f"{path}.variable")
        bc_type = parse_bc_type(_require(item, "bc_type", path), f"{path}.bc_type")
        boundary = _boundary(item.get("boundary", []), f"{path}.boundary")
        if not boundary and bc_type is not BcType.PERIODIC:
            raise SchemaError(f"{path}.boundary", "boundary must be non-empty")
        declare(var)
        bcs.append(BoundaryCondition(var, boundary, bc_type, _value(item.get("value"), f"{path}.value")))

    ics: list[InitialCondition] = []
    for i, item in enumerate(_list(doc, "initial_conditions", "")):
        path = f"initial_conditions[{i}]"
        if not isinstance(item, dict):
            raise SchemaError(path, "expected an object")
        var = _identifier(_require(item, "variable", path), f"{path}.variable")
        ic_type = str(item.get("ic_type", "constant")).strip().lower()
        if ic_type not in IC_TYPES:
            raise SchemaError(f"{path}.ic_type", f"unknown ic_type {item.get('ic_type')!r}")
        value = _value(_require(item, "value", path), f"{path}.value")
        if value is None:
            raise SchemaError(f"{path}.value", "initial condition needs a value")
        if ic_type == "constant" and not _is_number(value):
            raise SchemaError(f"{path}.value", "constant initial condition needs a numeric value")
        declare(var)
        ics.append(InitialCondition(var, ic_type, value))

    facts: list[MaterialFact] = []
    for i, item in enumerate(_list(doc, "coeff_facts", "")):
        path = f"coeff_facts[{i}]"
        if not isinstance(item, dict):
            raise SchemaError(path, "expected an object")
        key = _require(item, "key", path)
        if not isinstance(key, str) or not key.strip():
            raise SchemaError(f"{path}.key", "expected a non-empty string")
        value = _value(_require(item, "value", path), f"{path}.value")
        if value is None:
            raise SchemaError(f"{path}.value", "fact needs a value")
        origin = item.get("origin", "material_model")
        if origin not in FACT_ORIGINS:
            raise SchemaError(f"{path}.origin", f"unknown origin {origin!r}")
        facts.append(MaterialFact(key, value, origin))

    scheme = doc.get("time_scheme", "steady")
    if not isinstance(scheme, str) or scheme.strip().lower() not in TIME_SCHEMES:
        raise SchemaError("time_scheme", f"expected one of {TIME_SCHEMES}, got {scheme!r}")

    dims = doc.get("dimensions")
    if dims is not None:
        if not _is_number(dims) or int(dims) != dims or not 1 <= int(dims) <= 3:
            raise SchemaError("dimensions", f"expected an integer in 1..3, got {dims!r}")
        dims = int(dims)
    mesh = doc.get("mesh", "")
    if not isinstance(mesh, str):
        raise SchemaError("mesh", "expected a string")

    unresolved = []
    for i, name in enumerate(_list(doc, "unresolved", "")):
        if not isinstance(name, str):
            raise SchemaError(f"unresolved[{i}]", "expected a class name")
        unresolved.append(name)

    extras = {k: v for k, v in doc.items() if k not in _KNOWN_FIELDS}
    return PhysicsContract(
        variables=tuple(variables),
        terms=tuple(terms),
        bcs=tuple(bcs),
        ics=tuple(ics),
        coeff_facts=tuple(facts),
        time_scheme=scheme.strip().lower(),
        domain=Domain(dims, mesh),
        unresolved=tuple(unresolved),
        extras=extras,
    )


def load_contract(document: str | bytes) -> PhysicsContract:
    """Parse and validate contract JSON. ``null`` coefficients become unit."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    return contract_from_dict(doc)


def contract_to_dict(contract: PhysicsContract) -> dict:
    doc: dict[str, Any] = {
        "variables": list(contract.variables),
        "terms": [
            {"variable": t.variable, "operator": t.operator.value, "coefficient": t.coefficient}
            for t in contract.terms
        ],
        "boundary_conditions": [
            {"variable": b.variable, "boundary": " ".join(b.boundary), "bc_type": b.bc_type.value, "value": b.value}
            for b in contract.bcs
        ],
        "initial_conditions": [
            {"variable": ic.variable, "value": ic.value, "ic_type": ic.ic_type} for ic in contract.ics
        ],
        "time_scheme": contract.time_scheme,
        "dimensions": contract.domain.dimensions,
    }
    if contract.domain.mesh:
        doc["mesh"] = contract.domain.mesh
    if contract.unresolved:
        doc["unresolved"] = list(contract.unresolved)
    if contract.coeff_facts:
        doc["coeff_facts"] = [{"key": f.key, "value": f.value, "origin": f.origin} for f in contract.coeff_facts]
    for key, value in contract.extras.items():
        doc.setdefault(key, value)
    return doc


def save_contract(contract: PhysicsContract) -> str:
    return json.dumps(contract_to_dict(contract), indent=2)


_FENCE_RE = re.compile(r"```[A-Za-z0-9_-]*\n(.*?)```", re.DOTALL)


def extract_json_payload(text: str) -> str:
    """Pull the first JSON object out of free text or a fenced block."""
    for body in _FENCE_RE.findall(text):
        if body.lstrip().startswith("{"):
            return body.strip()
    start = text.find("{")
    if start < 0:
        return text.strip()
    decoder = json.JSONDecoder()
    try:
        _, end = decoder.raw_decode(text[start:])
    except json.JSONDecodeError:
        return text[start:].strip()
    return text[start:start + end]
